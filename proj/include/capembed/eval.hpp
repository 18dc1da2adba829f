#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capembed/data.hpp"
#include "capembed/nn.hpp"
#include "capembed/tensor.hpp"

#include "json.hpp"

namespace capembed::eval {

struct RecallEntry {
  double pct = 0.0;  // [0, 100]
  double ci = 0.0;   // symmetric 95% half-width, percentage points
};

struct RetrievalReport {
  std::string direction;  // "caption_to_image" or "image_to_caption"
  std::map<int, RecallEntry> r_at;  // N in {1, 5, 10}
  double median_rank = 0.0;
  std::size_t n_queries = 0;

  nlohmann::json to_json() const;
  static RetrievalReport from_json(const nlohmann::json& j);
};

struct StsReport {
  std::string task_name;
  double pearson_r = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_pairs = 0;

  nlohmann::json to_json() const;
  static StsReport from_json(const nlohmann::json& j);
};

// Rank of each query: the 1-based position of its best-ranked relevant
// candidate when candidates are sorted by descending cosine similarity,
// ties broken by candidate index ascending. relevance[q] must be non-empty.
std::vector<std::size_t> rank_queries(const Tensor& query_emb, const Tensor& candidate_emb,
                                      const std::vector<std::vector<std::size_t>>& relevance);

double recall_at(const std::vector<std::size_t>& ranks, std::size_t n);
double median_rank(const std::vector<std::size_t>& ranks);

// Wald 95% interval half-width in percentage points.
double recall_ci(double recall_pct, std::size_t n);

double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Fisher z-transform interval; asymmetric around r.
std::pair<double, double> fisher_ci(double r, std::size_t n);

// Maps batches of caption char-id sequences or image feature rows to
// unit-norm embeddings. Implemented by a single model or an ensemble.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Tensor embed_texts(const std::vector<std::vector<int>>& char_id_seqs) const = 0;
  virtual Tensor embed_images(const Tensor& features) const = 0;
  virtual const nn::EncoderConfig& config() const = 0;
};

class ModelEmbedder : public Embedder {
 public:
  ModelEmbedder(const nn::EncoderParams& params, const nn::EncoderConfig& config,
                std::size_t batch_size = 64);
  Tensor embed_texts(const std::vector<std::vector<int>>& char_id_seqs) const override;
  Tensor embed_images(const Tensor& features) const override;
  const nn::EncoderConfig& config() const override { return config_; }

 private:
  const nn::EncoderParams& params_;
  nn::EncoderConfig config_;
  std::size_t batch_size_;
};

// Averages the unit-norm embeddings of several parameter snapshots and
// re-normalizes; ranking-compatible with any positive rescaling.
class EnsembleEmbedder : public Embedder {
 public:
  EnsembleEmbedder(std::vector<const nn::EncoderParams*> members,
                   const nn::EncoderConfig& config, std::size_t batch_size = 64);
  Tensor embed_texts(const std::vector<std::vector<int>>& char_id_seqs) const override;
  Tensor embed_images(const Tensor& features) const override;
  const nn::EncoderConfig& config() const override { return config_; }

 private:
  std::vector<ModelEmbedder> members_;
  nn::EncoderConfig config_;
};

struct RetrievalEval {
  RetrievalReport caption_to_image;
  RetrievalReport image_to_caption;

  // mean of the two directions' R@10, the model-selection score
  double mean_r_at_10() const;
};

// Embeds every caption and image of the split once and scores both
// directions. With folds > 1 the split's images are partitioned into
// contiguous folds; the returned value is the field-wise mean and
// per_fold (when given) receives the individual reports.
RetrievalEval eval_retrieval(const Embedder& embedder, const data::Corpus& corpus,
                             const data::Vocab& vocab, data::Split split, std::size_t folds = 1,
                             std::vector<RetrievalEval>* per_fold = nullptr);

StsReport eval_sts(const Embedder& embedder, const std::vector<data::StsPair>& pairs,
                   const data::Vocab& vocab, const std::string& task_name);

// Flat CSV: one metric per row (name, value, ci_low, ci_high, n).
std::string retrieval_csv(const RetrievalEval& eval);
std::string sts_csv(const StsReport& report);

nlohmann::json retrieval_json(const RetrievalEval& eval);

}  // namespace capembed::eval
