#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "capembed/data.hpp"
#include "capembed/eval.hpp"
#include "capembed/nn.hpp"
#include "capembed/objective.hpp"

#include "json.hpp"

namespace capembed::train {

struct ScheduleConfig {
  double lr_min = 1e-6;
  double lr_max = 1e-3;
  std::size_t cycle_len = 1;  // minibatches per full cycle

  void validate() const;
};

// Cosine cycle: lr_min at every cycle boundary (where snapshots are taken),
// lr_max at mid-cycle.
double cyclic_lr(std::size_t mb, const ScheduleConfig& schedule);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment buffers per parameter plus the shared step counter.
class AdamState {
 public:
  AdamState(const nn::EncoderParams& params, nn::RnnKind kind, AdamConfig config = {});

  // grads aligned with nn::for_each_param order
  void step(nn::EncoderParams& params, const std::vector<Tensor>& grads, double lr);

  std::size_t steps_taken() const { return t_; }

 private:
  struct Slot {
    std::string name;
    Tensor m, v;
  };
  std::vector<Slot> slots_;
  std::size_t t_ = 0;
  AdamConfig config_;
  nn::RnnKind kind_;
};

struct TrainConfig {
  std::size_t epochs = 32;
  std::size_t snapshot_every = 4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  AdamConfig adam;
};

struct Snapshot {
  nn::EncoderParams params;  // deep copy, insulated from later training
  std::size_t epoch = 0;
  double dev_recall_at_10 = 0.0;  // mean of both retrieval directions
};

struct EpochStats {
  double mean_loss = 0.0;
  std::size_t minibatches = 0;
};

// One pass over the shuffled training captions: encode, score, hinge loss,
// backward, Adam update at the cyclic rate. mb_counter persists across
// epochs so the schedule spans the whole run.
EpochStats train_epoch(nn::EncoderParams& params, AdamState& adam, const data::Corpus& corpus,
                       const data::Vocab& vocab, const nn::EncoderConfig& encoder,
                       const objective::LossConfig& loss, const ScheduleConfig& schedule,
                       const TrainConfig& config, std::size_t epoch_index,
                       std::size_t& mb_counter);

// Mean hinge loss over a split without updating anything (fixed batch
// composition, so the series is comparable across epochs).
double split_mean_loss(const nn::EncoderParams& params, const data::Corpus& corpus,
                       const data::Vocab& vocab, const nn::EncoderConfig& encoder,
                       const objective::LossConfig& loss, data::Split split,
                       std::size_t batch_size, std::uint64_t seed);

// Top-k by dev score, ties broken toward the later epoch.
std::vector<Snapshot> select_snapshots(const std::vector<Snapshot>& snapshots, std::size_t k = 2);

// --- checkpoints ---
// Layout: magic "GCPT", u16 LE format version, u32 LE header length,
// UTF-8 JSON header (config + metadata + tensor directory with shapes and
// offsets), then contiguous little-endian f32 tensor payloads.

struct Checkpoint {
  nn::EncoderParams params;
  nn::EncoderConfig config;
  nlohmann::json metadata;
};

void save_checkpoint(const nn::EncoderParams& params, const nn::EncoderConfig& config,
                     const nlohmann::json& metadata, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json encoder_config_to_json(const nn::EncoderConfig& config);
nn::EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// --- metrics log ---

struct MetricsRow {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // dev-split loss at end of epoch (epoch 0: untrained)
  double c2i_r1 = 0.0, c2i_r5 = 0.0, c2i_r10 = 0.0;
  double i2c_r1 = 0.0, i2c_r5 = 0.0, i2c_r10 = 0.0;
  double medr_c2i = 0.0, medr_i2c = 0.0;
  double lr_at_epoch_end = 0.0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

// --- full run ---

struct RunResult {
  std::vector<MetricsRow> metrics;  // epochs + 1 rows, epoch 0 first
  std::vector<Snapshot> snapshots;
  std::vector<std::size_t> selected_epochs;  // for the 2-snapshot ensemble
  nn::EncoderParams final_params;
  std::vector<EpochStats> epoch_stats;
};

struct RunHooks {
  std::ostream* log = nullptr;  // per-epoch progress lines
};

RunResult run_training(const data::Corpus& corpus, const data::Vocab& vocab,
                       const nn::EncoderConfig& encoder, const objective::LossConfig& loss,
                       const ScheduleConfig& schedule, const TrainConfig& config,
                       const RunHooks& hooks = {});

}  // namespace capembed::train
