#include "capembed/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "capembed/bytes.hpp"
#include "capembed/rng.hpp"

namespace capembed::train {

void ScheduleConfig::validate() const {
  if (!(lr_min > 0.0) || lr_min > lr_max) {
    throw ValidationError("schedule: need 0 < lr_min <= lr_max");
  }
  if (cycle_len < 1) throw ValidationError("schedule: cycle_len must be >= 1");
}

double cyclic_lr(std::size_t mb, const ScheduleConfig& schedule) {
  schedule.validate();
  const double pos = static_cast<double>(mb % schedule.cycle_len) /
                     static_cast<double>(schedule.cycle_len);
  const double phase = M_PI * (1.0 + 2.0 * pos);
  return schedule.lr_min + 0.5 * (schedule.lr_max - schedule.lr_min) * (1.0 + std::cos(phase));
}

AdamState::AdamState(const nn::EncoderParams& params, nn::RnnKind kind, AdamConfig config)
    : config_(config), kind_(kind) {
  nn::for_each_param(params, kind, [&](const std::string& name, const Tensor& t) {
    slots_.push_back({name, Tensor::zeros(t.shape()), Tensor::zeros(t.shape())});
  });
}

void AdamState::step(nn::EncoderParams& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != slots_.size()) {
    throw DimensionError("adam: got " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(slots_.size()) + " parameters");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  std::size_t i = 0;
  nn::for_each_param(params, kind_, [&](const std::string& name, Tensor& t) {
    Slot& slot = slots_[i];
    const Tensor& g = grads[i];
    ++i;
    if (slot.name != name || !g.same_shape(t) || !slot.m.same_shape(t)) {
      throw DimensionError("adam: gradient/state shape mismatch for " + name);
    }
    for (std::size_t j = 0; j < t.numel(); ++j) {
      slot.m[j] = config_.beta1 * slot.m[j] + (1.0 - config_.beta1) * g[j];
      slot.v[j] = config_.beta2 * slot.v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double m_hat = slot.m[j] / bc1;
      const double v_hat = slot.v[j] / bc2;
      t[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  });
}

namespace {

double batch_loss(Graph& g, const data::Batch& batch, const nn::BoundParams& bp,
                  const nn::EncoderConfig& encoder, const objective::LossConfig& loss,
                  Var* loss_var) {
  Var cap = nn::encode_caption(g, batch.text, bp, encoder);
  Var img = nn::encode_image(g, g.leaf(batch.image_features, "image_features"), bp, encoder);
  Var sim = objective::cosine_matrix(g, cap, img);
  Var total = objective::hinge_loss(g, sim, loss);
  if (loss_var) *loss_var = total;
  return g.value(total)[0];
}

std::uint64_t epoch_shuffle_seed(std::uint64_t root_seed, std::size_t epoch) {
  return splitmix64(sub_seed(root_seed, "shuffle") ^ static_cast<std::uint64_t>(epoch));
}

}  // namespace

EpochStats train_epoch(nn::EncoderParams& params, AdamState& adam, const data::Corpus& corpus,
                       const data::Vocab& vocab, const nn::EncoderConfig& encoder,
                       const objective::LossConfig& loss, const ScheduleConfig& schedule,
                       const TrainConfig& config, std::size_t epoch_index,
                       std::size_t& mb_counter) {
  const auto batches = data::make_batches(corpus, data::Split::train, vocab, config.batch_size,
                                          epoch_shuffle_seed(config.seed, epoch_index));
  EpochStats stats;
  for (const data::Batch& batch : batches) {
    Graph g;
    nn::BoundParams bp = nn::bind_params(g, params, encoder.rnn_kind);
    Var loss_var;
    stats.mean_loss += batch_loss(g, batch, bp, encoder, loss, &loss_var);
    g.backward(loss_var);
    adam.step(params, nn::collect_grads(g, bp), cyclic_lr(mb_counter, schedule));
    ++mb_counter;
    ++stats.minibatches;
  }
  stats.mean_loss /= static_cast<double>(stats.minibatches);
  return stats;
}

double split_mean_loss(const nn::EncoderParams& params, const data::Corpus& corpus,
                       const data::Vocab& vocab, const nn::EncoderConfig& encoder,
                       const objective::LossConfig& loss, data::Split split,
                       std::size_t batch_size, std::uint64_t seed) {
  const auto batches = data::make_batches(corpus, split, vocab, batch_size, seed);
  double sum = 0.0;
  for (const data::Batch& batch : batches) {
    Graph g;
    nn::BoundParams bp = nn::bind_params(g, params, encoder.rnn_kind);
    sum += batch_loss(g, batch, bp, encoder, loss, nullptr);
  }
  return sum / static_cast<double>(batches.size());
}

std::vector<Snapshot> select_snapshots(const std::vector<Snapshot>& snapshots, std::size_t k) {
  if (snapshots.empty()) throw ValidationError("select_snapshots: no snapshots");
  std::vector<std::size_t> order(snapshots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (snapshots[a].dev_recall_at_10 != snapshots[b].dev_recall_at_10) {
      return snapshots[a].dev_recall_at_10 > snapshots[b].dev_recall_at_10;
    }
    return snapshots[a].epoch > snapshots[b].epoch;  // tie: later epoch wins
  });
  std::vector<Snapshot> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(snapshots[order[i]]);
  return out;
}

// --- checkpoints ---

namespace {

constexpr char kMagic[4] = {'G', 'C', 'P', 'T'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

nlohmann::json encoder_config_to_json(const nn::EncoderConfig& config) {
  return {{"char_vocab_size", config.char_vocab_size},
          {"char_embed_dim", config.char_embed_dim},
          {"hidden_size", config.hidden_size},
          {"rnn_kind", nn::to_string(config.rnn_kind)},
          {"pooling", nn::to_string(config.pooling)},
          {"attention_hidden", config.attention_hidden},
          {"image_feature_dim", config.image_feature_dim}};
}

nn::EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  nn::EncoderConfig c;
  c.char_vocab_size = j.at("char_vocab_size").get<std::size_t>();
  c.char_embed_dim = j.at("char_embed_dim").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.rnn_kind = nn::rnn_kind_from_string(j.at("rnn_kind").get<std::string>());
  c.pooling = nn::pooling_from_string(j.at("pooling").get<std::string>());
  c.attention_hidden = j.at("attention_hidden").get<std::size_t>();
  c.image_feature_dim = j.at("image_feature_dim").get<std::size_t>();
  c.validate();
  return c;
}

void save_checkpoint(const nn::EncoderParams& params, const nn::EncoderConfig& config,
                     const nlohmann::json& metadata, const std::filesystem::path& path) {
  nlohmann::json directory = nlohmann::json::array();
  std::string payload;
  nn::for_each_param(params, config.rnn_kind, [&](const std::string& name, const Tensor& t) {
    directory.push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", payload.size()}});
    for (std::size_t i = 0; i < t.numel(); ++i) {
      bytes::put_f32(payload, static_cast<float>(t[i]));
    }
  });
  nlohmann::json header = {{"config", encoder_config_to_json(config)},
                           {"metadata", metadata},
                           {"tensors", std::move(directory)}};
  const std::string header_str = header.dump();

  std::string buf(kMagic, 4);
  bytes::put_u16(buf, kVersion);
  bytes::put_u32(buf, static_cast<std::uint32_t>(header_str.size()));
  buf += header_str;
  buf += payload;
  bytes::spew(path, buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  bytes::Reader r(bytes::slurp(path), path.string());
  if (r.raw(4) != std::string(kMagic, 4)) {
    throw FormatError(path.string() + ": bad magic (expected GCPT)");
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported format version " + std::to_string(version));
  }
  const std::uint32_t header_len = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.raw(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header JSON: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = encoder_config_from_json(header.at("config"));
    ckpt.metadata = header.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header fields: " + e.what());
  }
  ckpt.params = nn::zero_params(ckpt.config);

  const nlohmann::json& directory = header.at("tensors");
  std::size_t entry = 0;
  nn::for_each_param(ckpt.params, ckpt.config.rnn_kind,
                     [&](const std::string& name, Tensor& t) {
                       if (entry >= directory.size()) {
                         throw FormatError(path.string() + ": tensor directory too short");
                       }
                       const nlohmann::json& d = directory[entry++];
                       if (d.at("name").get<std::string>() != name) {
                         throw FormatError(path.string() + ": unexpected tensor '" +
                                           d.at("name").get<std::string>() + "', wanted '" +
                                           name + "'");
                       }
                       const Shape shape = d.at("shape").get<Shape>();
                       if (shape != t.shape()) {
                         throw FormatError(path.string() + ": tensor '" + name + "' has shape " +
                                           shape_str(shape) + ", config implies " +
                                           shape_str(t.shape()));
                       }
                       for (std::size_t i = 0; i < t.numel(); ++i) {
                         t[i] = static_cast<double>(r.f32());
                       }
                     });
  if (entry != directory.size()) {
    throw FormatError(path.string() + ": tensor directory has extra entries");
  }
  r.expect_end();
  return ckpt;
}

// --- metrics log ---

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out =
      "epoch,mean_loss,dev_c2i_r1,dev_c2i_r5,dev_c2i_r10,"
      "dev_i2c_r1,dev_i2c_r5,dev_i2c_r10,dev_medr_c2i,dev_medr_i2c,lr_at_epoch_end\n";
  char buf[512];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  r.epoch, r.mean_loss, r.c2i_r1, r.c2i_r5, r.c2i_r10, r.i2c_r1, r.i2c_r5,
                  r.i2c_r10, r.medr_c2i, r.medr_i2c, r.lr_at_epoch_end);
    out += buf;
  }
  return out;
}

// --- full run ---

namespace {

MetricsRow make_row(std::size_t epoch, double mean_loss, const eval::RetrievalEval& ev,
                    double lr) {
  MetricsRow row;
  row.epoch = epoch;
  row.mean_loss = mean_loss;
  row.c2i_r1 = ev.caption_to_image.r_at.at(1).pct;
  row.c2i_r5 = ev.caption_to_image.r_at.at(5).pct;
  row.c2i_r10 = ev.caption_to_image.r_at.at(10).pct;
  row.i2c_r1 = ev.image_to_caption.r_at.at(1).pct;
  row.i2c_r5 = ev.image_to_caption.r_at.at(5).pct;
  row.i2c_r10 = ev.image_to_caption.r_at.at(10).pct;
  row.medr_c2i = ev.caption_to_image.median_rank;
  row.medr_i2c = ev.image_to_caption.median_rank;
  row.lr_at_epoch_end = lr;
  return row;
}

}  // namespace

RunResult run_training(const data::Corpus& corpus, const data::Vocab& vocab,
                       const nn::EncoderConfig& encoder, const objective::LossConfig& loss,
                       const ScheduleConfig& schedule, const TrainConfig& config,
                       const RunHooks& hooks) {
  encoder.validate();
  loss.validate();
  schedule.validate();

  RunResult result;
  nn::EncoderParams params = nn::init_params(encoder, sub_seed(config.seed, "init"));
  AdamState adam(params, encoder.rnn_kind, config.adam);
  const std::uint64_t dev_loss_seed = sub_seed(config.seed, "devloss");
  std::size_t mb_counter = 0;

  auto dev_metrics = [&](std::size_t epoch) {
    eval::ModelEmbedder embedder(params, encoder);
    const eval::RetrievalEval ev =
        eval::eval_retrieval(embedder, corpus, vocab, data::Split::dev);
    const double dev_loss = split_mean_loss(params, corpus, vocab, encoder, loss,
                                            data::Split::dev, config.batch_size, dev_loss_seed);
    result.metrics.push_back(make_row(epoch, dev_loss, ev, cyclic_lr(mb_counter, schedule)));
    return ev;
  };

  // untrained baseline row
  dev_metrics(0);
  if (hooks.log) {
    *hooks.log << "epoch 0: dev_loss=" << result.metrics.back().mean_loss
               << " dev_r10_c2i=" << result.metrics.back().c2i_r10
               << " dev_r10_i2c=" << result.metrics.back().i2c_r10 << "\n";
  }

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const EpochStats stats = train_epoch(params, adam, corpus, vocab, encoder, loss, schedule,
                                         config, epoch, mb_counter);
    result.epoch_stats.push_back(stats);
    const eval::RetrievalEval ev = dev_metrics(epoch);
    if (hooks.log) {
      *hooks.log << "epoch " << epoch << ": train_loss=" << stats.mean_loss
                 << " dev_loss=" << result.metrics.back().mean_loss
                 << " dev_r10_c2i=" << result.metrics.back().c2i_r10
                 << " dev_r10_i2c=" << result.metrics.back().i2c_r10
                 << " lr=" << result.metrics.back().lr_at_epoch_end << "\n";
    }
    if (config.snapshot_every > 0 && epoch % config.snapshot_every == 0) {
      result.snapshots.push_back({params, epoch, ev.mean_r_at_10()});
    }
  }

  if (!result.snapshots.empty()) {
    for (const Snapshot& s : select_snapshots(result.snapshots, 2)) {
      result.selected_epochs.push_back(s.epoch);
    }
  }
  result.final_params = std::move(params);
  return result;
}

}  // namespace capembed::train
