#include "capembed/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace capembed::eval {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json RetrievalReport::to_json() const {
  nlohmann::json j;
  j["direction"] = direction;
  for (const auto& [n, entry] : r_at) {
    j["r_at"][std::to_string(n)] = {{"pct", entry.pct}, {"ci", entry.ci}};
  }
  j["median_rank"] = median_rank;
  j["n_queries"] = n_queries;
  return j;
}

RetrievalReport RetrievalReport::from_json(const nlohmann::json& j) {
  RetrievalReport r;
  r.direction = j.at("direction").get<std::string>();
  for (const auto& [key, entry] : j.at("r_at").items()) {
    r.r_at[std::stoi(key)] = {entry.at("pct").get<double>(), entry.at("ci").get<double>()};
  }
  r.median_rank = j.at("median_rank").get<double>();
  r.n_queries = j.at("n_queries").get<std::size_t>();
  return r;
}

nlohmann::json StsReport::to_json() const {
  return {{"task_name", task_name}, {"pearson_r", pearson_r}, {"ci_low", ci_low},
          {"ci_high", ci_high},     {"n_pairs", n_pairs}};
}

StsReport StsReport::from_json(const nlohmann::json& j) {
  StsReport r;
  r.task_name = j.at("task_name").get<std::string>();
  r.pearson_r = j.at("pearson_r").get<double>();
  r.ci_low = j.at("ci_low").get<double>();
  r.ci_high = j.at("ci_high").get<double>();
  r.n_pairs = j.at("n_pairs").get<std::size_t>();
  return r;
}

std::vector<std::size_t> rank_queries(const Tensor& query_emb, const Tensor& candidate_emb,
                                      const std::vector<std::vector<std::size_t>>& relevance) {
  if (query_emb.rank() != 2 || candidate_emb.rank() != 2 ||
      query_emb.dim(1) != candidate_emb.dim(1)) {
    throw DimensionError("rank_queries: embedding shapes " + shape_str(query_emb.shape()) +
                         " and " + shape_str(candidate_emb.shape()) + " are incompatible");
  }
  const std::size_t n_q = query_emb.dim(0), n_c = candidate_emb.dim(0), d = query_emb.dim(1);
  if (relevance.size() != n_q) {
    throw DimensionError("rank_queries: relevance size does not match query count");
  }
  std::vector<std::size_t> ranks(n_q);
  std::vector<double> scores(n_c);
  std::vector<std::size_t> order(n_c);
  for (std::size_t q = 0; q < n_q; ++q) {
    if (relevance[q].empty()) {
      throw ValidationError("rank_queries: query " + std::to_string(q) +
                            " has no relevant candidates");
    }
    for (std::size_t c = 0; c < n_c; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += query_emb.at(q, j) * candidate_emb.at(c, j);
      scores[c] = s;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    std::size_t rank = 0;
    for (std::size_t pos = 0; pos < n_c; ++pos) {
      const bool relevant =
          std::find(relevance[q].begin(), relevance[q].end(), order[pos]) != relevance[q].end();
      if (relevant) {
        rank = pos + 1;
        break;
      }
    }
    if (rank == 0) {
      throw ValidationError("rank_queries: relevant candidate index out of range for query " +
                            std::to_string(q));
    }
    ranks[q] = rank;
  }
  return ranks;
}

double recall_at(const std::vector<std::size_t>& ranks, std::size_t n) {
  if (ranks.empty()) throw ValidationError("recall_at: empty rank list");
  std::size_t hits = 0;
  for (std::size_t r : ranks) hits += r <= n ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double median_rank(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) throw ValidationError("median_rank: empty rank list");
  std::vector<std::size_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  if (m % 2 == 1) return static_cast<double>(sorted[m / 2]);
  return 0.5 * (static_cast<double>(sorted[m / 2 - 1]) + static_cast<double>(sorted[m / 2]));
}

double recall_ci(double recall_pct, std::size_t n) {
  if (n < 1) throw ValidationError("recall_ci: n must be >= 1");
  const double p = recall_pct / 100.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)) * 100.0;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw ValidationError("pearson_r: need two equal-length lists with >= 3 points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw ValidationError("pearson_r: zero variance in input");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::pair<double, double> fisher_ci(double r, std::size_t n) {
  if (!(std::fabs(r) < 1.0)) throw ValidationError("fisher_ci: |r| must be < 1");
  if (n < 4) throw ValidationError("fisher_ci: n must be >= 4");
  const double z = std::atanh(r);
  const double half_width = 1.96 / std::sqrt(static_cast<double>(n - 3));
  return {std::tanh(z - half_width), std::tanh(z + half_width)};
}

// --- embedders ---

ModelEmbedder::ModelEmbedder(const nn::EncoderParams& params, const nn::EncoderConfig& config,
                             std::size_t batch_size)
    : params_(params), config_(config), batch_size_(batch_size == 0 ? 1 : batch_size) {}

Tensor ModelEmbedder::embed_texts(const std::vector<std::vector<int>>& char_id_seqs) const {
  if (char_id_seqs.empty()) throw ValidationError("embed_texts: no inputs");
  Tensor out = Tensor::zeros({char_id_seqs.size(), config_.embed_dim()});
  for (std::size_t start = 0; start < char_id_seqs.size(); start += batch_size_) {
    const std::size_t b = std::min(batch_size_, char_id_seqs.size() - start);
    std::vector<std::vector<int>> chunk(char_id_seqs.begin() + start,
                                        char_id_seqs.begin() + start + b);
    const Tensor emb = nn::encode_caption_values(data::pad_captions(chunk), params_, config_);
    std::copy_n(emb.data(), emb.numel(), out.data() + start * config_.embed_dim());
  }
  return out;
}

Tensor ModelEmbedder::embed_images(const Tensor& features) const {
  return nn::encode_image_values(features, params_, config_);
}

EnsembleEmbedder::EnsembleEmbedder(std::vector<const nn::EncoderParams*> members,
                                   const nn::EncoderConfig& config, std::size_t batch_size)
    : config_(config) {
  if (members.empty()) throw ValidationError("ensemble: no members");
  for (const nn::EncoderParams* p : members) {
    if (p->char_embedding.shape() != Shape{config.char_vocab_size, config.char_embed_dim} ||
        p->image_a.shape() != Shape{config.embed_dim(), config.image_feature_dim}) {
      throw DimensionError("ensemble: member parameters do not match the shared config");
    }
    members_.emplace_back(*p, config, batch_size);
  }
}

namespace {

Tensor mean_and_renormalize(std::vector<Tensor> parts) {
  Tensor acc = std::move(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    for (std::size_t j = 0; j < acc.numel(); ++j) acc[j] += parts[i][j];
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (std::size_t j = 0; j < acc.numel(); ++j) acc[j] *= inv;
  const std::size_t rows = acc.dim(0), d = acc.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += acc.at(i, j) * acc.at(i, j);
    const double norm = std::max(std::sqrt(s), kNormEpsilon);
    for (std::size_t j = 0; j < d; ++j) acc.at(i, j) /= norm;
  }
  return acc;
}

}  // namespace

Tensor EnsembleEmbedder::embed_texts(const std::vector<std::vector<int>>& char_id_seqs) const {
  std::vector<Tensor> parts;
  parts.reserve(members_.size());
  for (const auto& m : members_) parts.push_back(m.embed_texts(char_id_seqs));
  return mean_and_renormalize(std::move(parts));
}

Tensor EnsembleEmbedder::embed_images(const Tensor& features) const {
  std::vector<Tensor> parts;
  parts.reserve(members_.size());
  for (const auto& m : members_) parts.push_back(m.embed_images(features));
  return mean_and_renormalize(std::move(parts));
}

// --- retrieval protocol ---

double RetrievalEval::mean_r_at_10() const {
  return 0.5 * (caption_to_image.r_at.at(10).pct + image_to_caption.r_at.at(10).pct);
}

namespace {

RetrievalReport report_from_ranks(const std::string& direction,
                                  const std::vector<std::size_t>& ranks) {
  RetrievalReport rep;
  rep.direction = direction;
  rep.n_queries = ranks.size();
  for (int n : {1, 5, 10}) {
    const double pct = recall_at(ranks, static_cast<std::size_t>(n));
    rep.r_at[n] = {pct, recall_ci(pct, ranks.size())};
  }
  rep.median_rank = median_rank(ranks);
  return rep;
}

// both-direction retrieval over one group of image indices
RetrievalEval eval_group(const Embedder& embedder, const data::Corpus& corpus,
                         const data::Vocab& vocab, const std::vector<std::size_t>& image_idx) {
  std::unordered_map<std::string, std::vector<std::size_t>> captions_of;
  for (std::size_t c = 0; c < corpus.captions.size(); ++c) {
    captions_of[corpus.captions[c].image_id].push_back(c);
  }
  // captions grouped per image, corpus order
  std::vector<std::vector<int>> caption_ids;
  std::vector<std::size_t> caption_image;  // position into image_idx
  for (std::size_t pos = 0; pos < image_idx.size(); ++pos) {
    auto it = captions_of.find(corpus.images[image_idx[pos]].id);
    if (it == captions_of.end()) continue;
    for (std::size_t c : it->second) {
      caption_ids.push_back(vocab.encode(corpus.captions[c].text));
      caption_image.push_back(pos);
    }
  }
  if (caption_ids.empty()) throw ValidationError("eval_retrieval: no captions in split");

  Tensor features = Tensor::zeros({image_idx.size(), corpus.feature_dim});
  for (std::size_t pos = 0; pos < image_idx.size(); ++pos) {
    const auto& f = corpus.images[image_idx[pos]].features;
    std::copy(f.begin(), f.end(), features.data() + pos * corpus.feature_dim);
  }

  const Tensor cap_emb = embedder.embed_texts(caption_ids);
  const Tensor img_emb = embedder.embed_images(features);

  std::vector<std::vector<std::size_t>> cap_rel(caption_ids.size());
  for (std::size_t q = 0; q < caption_ids.size(); ++q) cap_rel[q] = {caption_image[q]};
  std::vector<std::vector<std::size_t>> img_rel(image_idx.size());
  for (std::size_t q = 0; q < caption_ids.size(); ++q) img_rel[caption_image[q]].push_back(q);

  RetrievalEval out;
  out.caption_to_image = report_from_ranks("caption_to_image", rank_queries(cap_emb, img_emb, cap_rel));
  out.image_to_caption = report_from_ranks("image_to_caption", rank_queries(img_emb, cap_emb, img_rel));
  return out;
}

RetrievalReport mean_report(const std::vector<const RetrievalReport*>& reports) {
  RetrievalReport mean;
  mean.direction = reports[0]->direction;
  const double inv = 1.0 / static_cast<double>(reports.size());
  double n_acc = 0.0;
  for (const RetrievalReport* r : reports) {
    for (const auto& [n, entry] : r->r_at) {
      mean.r_at[n].pct += entry.pct * inv;
      mean.r_at[n].ci += entry.ci * inv;
    }
    mean.median_rank += r->median_rank * inv;
    n_acc += static_cast<double>(r->n_queries) * inv;
  }
  mean.n_queries = static_cast<std::size_t>(std::llround(n_acc));
  return mean;
}

}  // namespace

RetrievalEval eval_retrieval(const Embedder& embedder, const data::Corpus& corpus,
                             const data::Vocab& vocab, data::Split split, std::size_t folds,
                             std::vector<RetrievalEval>* per_fold) {
  const std::vector<std::size_t> image_idx = corpus.image_indices_of_split(split);
  if (image_idx.empty()) {
    throw ValidationError("eval_retrieval: split '" + data::to_string(split) + "' has no images");
  }
  if (folds <= 1) {
    RetrievalEval whole = eval_group(embedder, corpus, vocab, image_idx);
    if (per_fold) *per_fold = {whole};
    return whole;
  }
  if (folds > image_idx.size()) {
    throw ValidationError("eval_retrieval: more folds than images");
  }
  std::vector<RetrievalEval> fold_evals;
  const std::size_t base = image_idx.size() / folds;
  const std::size_t extra = image_idx.size() % folds;
  std::size_t start = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t count = base + (f < extra ? 1 : 0);
    std::vector<std::size_t> group(image_idx.begin() + start, image_idx.begin() + start + count);
    start += count;
    fold_evals.push_back(eval_group(embedder, corpus, vocab, group));
  }
  RetrievalEval mean;
  std::vector<const RetrievalReport*> c2i, i2c;
  for (const auto& fe : fold_evals) {
    c2i.push_back(&fe.caption_to_image);
    i2c.push_back(&fe.image_to_caption);
  }
  mean.caption_to_image = mean_report(c2i);
  mean.image_to_caption = mean_report(i2c);
  if (per_fold) *per_fold = std::move(fold_evals);
  return mean;
}

StsReport eval_sts(const Embedder& embedder, const std::vector<data::StsPair>& pairs,
                   const data::Vocab& vocab, const std::string& task_name) {
  if (pairs.empty()) throw ValidationError("eval_sts: no pairs");
  std::vector<std::vector<int>> a_ids, b_ids;
  for (const auto& p : pairs) {
    a_ids.push_back(vocab.encode(p.sentence_a));
    b_ids.push_back(vocab.encode(p.sentence_b));
  }
  const Tensor a_emb = embedder.embed_texts(a_ids);
  const Tensor b_emb = embedder.embed_texts(b_ids);
  const std::size_t d = a_emb.dim(1);
  std::vector<double> sims(pairs.size()), gold(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a_emb.at(i, j) * b_emb.at(i, j);
    sims[i] = s;
    gold[i] = pairs[i].gold;
  }
  StsReport rep;
  rep.task_name = task_name;
  rep.n_pairs = pairs.size();
  rep.pearson_r = pearson_r(sims, gold);
  std::tie(rep.ci_low, rep.ci_high) = fisher_ci(rep.pearson_r, pairs.size());
  return rep;
}

// --- serialization ---

namespace {

void csv_row(std::string& out, const std::string& name, double value, double ci_low,
             double ci_high, std::size_t n) {
  out += name + "," + fmt(value) + "," + fmt(ci_low) + "," + fmt(ci_high) + "," +
         std::to_string(n) + "\n";
}

void report_rows(std::string& out, const RetrievalReport& rep) {
  const std::string prefix = rep.direction;
  for (const auto& [n, entry] : rep.r_at) {
    csv_row(out, prefix + "_r@" + std::to_string(n), entry.pct, entry.pct - entry.ci,
            entry.pct + entry.ci, rep.n_queries);
  }
  csv_row(out, prefix + "_medr", rep.median_rank, rep.median_rank, rep.median_rank,
          rep.n_queries);
}

}  // namespace

std::string retrieval_csv(const RetrievalEval& eval) {
  std::string out = "name,value,ci_low,ci_high,n\n";
  report_rows(out, eval.caption_to_image);
  report_rows(out, eval.image_to_caption);
  return out;
}

std::string sts_csv(const StsReport& report) {
  std::string out = "name,value,ci_low,ci_high,n\n";
  csv_row(out, report.task_name + "_pearson_r", report.pearson_r, report.ci_low, report.ci_high,
          report.n_pairs);
  return out;
}

nlohmann::json retrieval_json(const RetrievalEval& eval) {
  return {{"caption_to_image", eval.caption_to_image.to_json()},
          {"image_to_caption", eval.image_to_caption.to_json()}};
}

}  // namespace capembed::eval
