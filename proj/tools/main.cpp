#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "capembed/bytes.hpp"
#include "capembed/data.hpp"
#include "capembed/errors.hpp"
#include "capembed/eval.hpp"
#include "capembed/nn.hpp"
#include "capembed/rng.hpp"
#include "capembed/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace capembed;

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void print_digest(const fs::path& path) {
  std::cout << path.filename().string() << "\t" << hex64(fnv1a64(bytes::slurp(path))) << "\n";
}

// ---- run configuration ----

struct RunConfig {
  std::uint64_t seed = 1;

  std::string captions, features, splits, output_dir;

  std::size_t char_embed_dim = 20;
  std::size_t hidden_size = 64;
  std::size_t attention_hidden = 128;
  std::string rnn_kind = "gru";
  std::string pooling = "attention";

  double margin = 0.2;
  std::string reduction = "sum";

  double lr_min = 1e-6;
  double lr_max = 1e-3;
  std::size_t cycle_epochs = 4;

  std::size_t epochs = 32;
  std::size_t snapshot_every = 4;
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("config: unknown key '" + where + key + "'");
    }
  }
}

template <class T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig parse_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(bytes::slurp(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad JSON: " + e.what());
  }
  reject_unknown_keys(j, {"seed", "data", "encoder", "loss", "schedule", "train"}, "");
  RunConfig c;
  maybe_get(j, "seed", c.seed);
  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown_keys(d, {"captions", "features", "splits", "output_dir"}, "data.");
    maybe_get(d, "captions", c.captions);
    maybe_get(d, "features", c.features);
    maybe_get(d, "splits", c.splits);
    maybe_get(d, "output_dir", c.output_dir);
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    reject_unknown_keys(
        e, {"char_embed_dim", "hidden_size", "attention_hidden", "rnn_kind", "pooling"},
        "encoder.");
    maybe_get(e, "char_embed_dim", c.char_embed_dim);
    maybe_get(e, "hidden_size", c.hidden_size);
    maybe_get(e, "attention_hidden", c.attention_hidden);
    maybe_get(e, "rnn_kind", c.rnn_kind);
    maybe_get(e, "pooling", c.pooling);
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    reject_unknown_keys(l, {"margin", "reduction"}, "loss.");
    maybe_get(l, "margin", c.margin);
    maybe_get(l, "reduction", c.reduction);
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    reject_unknown_keys(s, {"lr_min", "lr_max", "cycle_epochs"}, "schedule.");
    maybe_get(s, "lr_min", c.lr_min);
    maybe_get(s, "lr_max", c.lr_max);
    maybe_get(s, "cycle_epochs", c.cycle_epochs);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown_keys(
        t, {"epochs", "snapshot_every", "batch_size", "beta1", "beta2", "epsilon"}, "train.");
    maybe_get(t, "epochs", c.epochs);
    maybe_get(t, "snapshot_every", c.snapshot_every);
    maybe_get(t, "batch_size", c.batch_size);
    maybe_get(t, "beta1", c.beta1);
    maybe_get(t, "beta2", c.beta2);
    maybe_get(t, "epsilon", c.epsilon);
  }
  return c;
}

json run_config_to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"data",
           {{"captions", c.captions},
            {"features", c.features},
            {"splits", c.splits},
            {"output_dir", c.output_dir}}},
          {"encoder",
           {{"char_embed_dim", c.char_embed_dim},
            {"hidden_size", c.hidden_size},
            {"attention_hidden", c.attention_hidden},
            {"rnn_kind", c.rnn_kind},
            {"pooling", c.pooling}}},
          {"loss", {{"margin", c.margin}, {"reduction", c.reduction}}},
          {"schedule",
           {{"lr_min", c.lr_min}, {"lr_max", c.lr_max}, {"cycle_epochs", c.cycle_epochs}}},
          {"train",
           {{"epochs", c.epochs},
            {"snapshot_every", c.snapshot_every},
            {"batch_size", c.batch_size},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon}}}};
}

void validate_run_config(const RunConfig& c) {
  if (c.captions.empty() || c.features.empty() || c.splits.empty()) {
    throw ValidationError("config: data.captions, data.features, and data.splits are required");
  }
  if (c.output_dir.empty()) throw ValidationError("config: data.output_dir is required");
  if (c.epochs < 1) throw ValidationError("config: train.epochs must be >= 1");
  if (c.batch_size < 2) throw ValidationError("config: train.batch_size must be >= 2");
  if (c.snapshot_every < 1) throw ValidationError("config: train.snapshot_every must be >= 1");
  if (c.cycle_epochs < 1) throw ValidationError("config: schedule.cycle_epochs must be >= 1");
  if (!(c.lr_min > 0.0) || c.lr_min > c.lr_max) {
    throw ValidationError("config: need 0 < lr_min <= lr_max");
  }
  if (!(c.margin > 0.0)) throw ValidationError("config: loss.margin must be > 0");
  nn::rnn_kind_from_string(c.rnn_kind);
  nn::pooling_from_string(c.pooling);
  if (c.reduction != "sum" && c.reduction != "mean_per_term") {
    throw ValidationError("config: loss.reduction must be sum or mean_per_term");
  }
}

// ---- model loading (single checkpoint or ensemble manifest) ----

json vocab_to_json(const data::Vocab& vocab) {
  std::vector<std::uint32_t> cps;
  for (char32_t c : vocab.codepoints()) cps.push_back(static_cast<std::uint32_t>(c));
  return cps;
}

data::Vocab vocab_from_metadata(const json& metadata, const std::string& where) {
  if (!metadata.contains("vocab")) {
    throw FormatError(where + ": checkpoint metadata carries no vocab");
  }
  std::vector<char32_t> cps;
  for (const auto& v : metadata.at("vocab")) cps.push_back(v.get<std::uint32_t>());
  return data::Vocab::from_codepoints(std::move(cps));
}

struct LoadedModel {
  std::vector<train::Checkpoint> checkpoints;  // 1 for a plain checkpoint
  data::Vocab vocab;
  nn::EncoderConfig config;

  std::unique_ptr<eval::Embedder> embedder() const {
    if (checkpoints.size() == 1) {
      return std::make_unique<eval::ModelEmbedder>(checkpoints[0].params, config);
    }
    std::vector<const nn::EncoderParams*> members;
    for (const auto& c : checkpoints) members.push_back(&c.params);
    return std::make_unique<eval::EnsembleEmbedder>(members, config);
  }
};

LoadedModel load_model(const fs::path& path) {
  const std::string head = bytes::slurp(path);
  LoadedModel model;
  if (head.size() >= 4 && head.compare(0, 4, "GCPT") == 0) {
    model.checkpoints.push_back(train::load_checkpoint(path));
  } else {
    json manifest;
    try {
      manifest = json::parse(head);
    } catch (const json::exception&) {
      throw FormatError(path.string() + ": neither a GCPT checkpoint nor a JSON manifest");
    }
    if (!manifest.contains("selected") || manifest["selected"].empty()) {
      throw FormatError(path.string() + ": manifest has no selected snapshots");
    }
    for (const auto& rel : manifest.at("selected")) {
      model.checkpoints.push_back(
          train::load_checkpoint(path.parent_path() / rel.get<std::string>()));
    }
  }
  model.config = model.checkpoints[0].config;
  model.vocab = vocab_from_metadata(model.checkpoints[0].metadata, path.string());
  for (std::size_t i = 1; i < model.checkpoints.size(); ++i) {
    if (!(model.checkpoints[i].config == model.config)) {
      throw ValidationError(path.string() + ": ensemble members have differing configs");
    }
    const data::Vocab v = vocab_from_metadata(model.checkpoints[i].metadata, path.string());
    if (v.codepoints() != model.vocab.codepoints()) {
      throw ValidationError(path.string() + ": ensemble members have differing vocabularies");
    }
  }
  return model;
}

// ---- subcommands ----

int cmd_gen_synth(const fs::path& out_dir, const data::SynthConfig& synth,
                  std::size_t sts_pairs) {
  fs::create_directories(out_dir);
  const data::Corpus corpus = data::gen_synthetic(synth);
  const fs::path caps = out_dir / "captions.tsv";
  const fs::path feats = out_dir / "features.ifv";
  const fs::path splits = out_dir / "splits.tsv";
  data::write_captions_file(caps, corpus.captions);
  data::write_features_file(feats, corpus.images, corpus.feature_dim);
  data::write_splits_file(splits, corpus.images);
  print_digest(caps);
  print_digest(feats);
  print_digest(splits);
  if (sts_pairs > 0) {
    const fs::path sts = out_dir / "sts.tsv";
    data::write_sts_pairs(sts, data::gen_synthetic_sts(sts_pairs, synth, synth.seed));
    print_digest(sts);
  }
  return 0;
}

int cmd_train(const RunConfig& rc) {
  validate_run_config(rc);
  const fs::path out_dir = rc.output_dir;
  fs::create_directories(out_dir);

  const data::Corpus corpus = data::load_corpus(rc.captions, rc.features, rc.splits);
  const data::Vocab vocab = data::build_vocab(corpus);

  nn::EncoderConfig encoder;
  encoder.char_vocab_size = vocab.size();
  encoder.char_embed_dim = rc.char_embed_dim;
  encoder.hidden_size = rc.hidden_size;
  encoder.attention_hidden = rc.attention_hidden;
  encoder.rnn_kind = nn::rnn_kind_from_string(rc.rnn_kind);
  encoder.pooling = nn::pooling_from_string(rc.pooling);
  encoder.image_feature_dim = corpus.feature_dim;

  objective::LossConfig loss;
  loss.margin = rc.margin;
  loss.reduction = rc.reduction == "sum" ? objective::Reduction::sum
                                         : objective::Reduction::mean_per_term;

  const std::size_t train_captions =
      corpus.caption_indices_of_split(data::Split::train).size();
  if (train_captions == 0) throw ValidationError("training split has no captions");
  const std::size_t mb_per_epoch = (train_captions + rc.batch_size - 1) / rc.batch_size;

  train::ScheduleConfig schedule;
  schedule.lr_min = rc.lr_min;
  schedule.lr_max = rc.lr_max;
  schedule.cycle_len = rc.cycle_epochs * mb_per_epoch;

  train::TrainConfig tc;
  tc.epochs = rc.epochs;
  tc.snapshot_every = rc.snapshot_every;
  tc.batch_size = rc.batch_size;
  tc.seed = rc.seed;
  tc.adam = {rc.beta1, rc.beta2, rc.epsilon};

  bytes::spew(out_dir / "resolved_config.json", run_config_to_json(rc).dump(2) + "\n");

  train::RunHooks hooks;
  hooks.log = &std::cerr;
  const train::RunResult result =
      train::run_training(corpus, vocab, encoder, loss, schedule, tc, hooks);

  bytes::spew(out_dir / "metrics.csv", train::metrics_csv(result.metrics));
  std::cout << (out_dir / "metrics.csv").string() << "\n";

  json manifest;
  manifest["snapshots"] = json::array();
  char name_buf[64];
  for (const train::Snapshot& snap : result.snapshots) {
    std::snprintf(name_buf, sizeof(name_buf), "snapshot_epoch_%03zu.ckpt", snap.epoch);
    json metadata = {{"epoch", snap.epoch},
                     {"dev_recall_at_10", snap.dev_recall_at_10},
                     {"seed", rc.seed},
                     {"vocab", vocab_to_json(vocab)}};
    train::save_checkpoint(snap.params, encoder, metadata, out_dir / name_buf);
    manifest["snapshots"].push_back({{"epoch", snap.epoch},
                                     {"path", name_buf},
                                     {"dev_recall_at_10", snap.dev_recall_at_10}});
    std::cout << (out_dir / name_buf).string() << "\n";
  }
  manifest["selected"] = json::array();
  for (std::size_t epoch : result.selected_epochs) {
    std::snprintf(name_buf, sizeof(name_buf), "snapshot_epoch_%03zu.ckpt", epoch);
    manifest["selected"].push_back(name_buf);
  }
  bytes::spew(out_dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << (out_dir / "manifest.json").string() << "\n";

  json final_meta = {{"epoch", rc.epochs},
                     {"seed", rc.seed},
                     {"vocab", vocab_to_json(vocab)}};
  train::save_checkpoint(result.final_params, encoder, final_meta, out_dir / "final.ckpt");
  std::cout << (out_dir / "final.ckpt").string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& model_path, const std::string& captions,
             const std::string& features, const std::string& splits, const std::string& split,
             std::size_t folds, const std::string& sts_file, const fs::path& out_dir) {
  const LoadedModel model = load_model(model_path);
  fs::create_directories(out_dir);
  const auto embedder = model.embedder();

  if (!captions.empty() || !features.empty() || !splits.empty()) {
    if (captions.empty() || features.empty() || splits.empty()) {
      throw ValidationError("eval: --captions, --features, and --splits go together");
    }
    const data::Corpus corpus = data::load_corpus(captions, features, splits);
    if (corpus.feature_dim != model.config.image_feature_dim) {
      throw ValidationError("eval: corpus features have dim " +
                            std::to_string(corpus.feature_dim) + " but the checkpoint expects " +
                            std::to_string(model.config.image_feature_dim));
    }
    const data::Split sp = data::split_from_string(split);
    std::vector<eval::RetrievalEval> per_fold;
    const eval::RetrievalEval mean =
        eval::eval_retrieval(*embedder, corpus, model.vocab, sp, folds, &per_fold);

    const fs::path csv_path = out_dir / ("retrieval_" + split + ".csv");
    bytes::spew(csv_path, eval::retrieval_csv(mean));
    std::cout << csv_path.string() << "\n";

    json report = {{"split", split}, {"folds", folds}, {"mean", eval::retrieval_json(mean)}};
    if (folds > 1) {
      report["per_fold"] = json::array();
      for (std::size_t f = 0; f < per_fold.size(); ++f) {
        report["per_fold"].push_back(eval::retrieval_json(per_fold[f]));
        char fold_name[64];
        std::snprintf(fold_name, sizeof(fold_name), "retrieval_%s_fold%zu.csv", split.c_str(),
                      f + 1);
        bytes::spew(out_dir / fold_name, eval::retrieval_csv(per_fold[f]));
        std::cout << (out_dir / fold_name).string() << "\n";
      }
    }
    const fs::path json_path = out_dir / ("retrieval_" + split + ".json");
    bytes::spew(json_path, report.dump(2) + "\n");
    std::cout << json_path.string() << "\n";
  }

  if (!sts_file.empty()) {
    const auto pairs = data::load_sts_pairs(sts_file);
    const eval::StsReport rep =
        eval::eval_sts(*embedder, pairs, model.vocab, fs::path(sts_file).stem().string());
    bytes::spew(out_dir / "sts.csv", eval::sts_csv(rep));
    bytes::spew(out_dir / "sts.json", rep.to_json().dump(2) + "\n");
    std::cout << (out_dir / "sts.csv").string() << "\n";
    std::cout << (out_dir / "sts.json").string() << "\n";
  }
  return 0;
}

int cmd_embed(const fs::path& model_path, const fs::path& sentences_path,
              const fs::path& out_path) {
  const LoadedModel model = load_model(model_path);
  const auto embedder = model.embedder();

  const std::string content = bytes::slurp(sentences_path);
  std::vector<std::string> lines;
  std::string cur;
  for (char c : content) {
    if (c == '\n') {
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  if (lines.empty()) throw ValidationError(sentences_path.string() + ": no sentences");
  std::vector<std::vector<int>> encoded;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw ValidationError(sentences_path.string() + ": line " + std::to_string(i + 1) +
                            " is empty");
    }
    encoded.push_back(model.vocab.encode(line));
  }

  const Tensor emb = embedder->embed_texts(encoded);
  data::VectorFile vf;
  vf.dim = emb.dim(1);
  for (std::size_t i = 0; i < emb.dim(0); ++i) {
    std::vector<float> vals(vf.dim);
    for (std::size_t j = 0; j < vf.dim; ++j) vals[j] = static_cast<float>(emb.at(i, j));
    vf.entries.emplace_back(std::to_string(i + 1), std::move(vals));
  }
  data::write_vector_file(out_path, vf);
  std::cout << out_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"character-level multimodal sentence embeddings"};
  app.require_subcommand(1);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus");
  std::string gen_out = "synth";
  data::SynthConfig synth;
  std::size_t sts_pairs = 0;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--images", synth.n_images, "total image count");
  gen->add_option("--dev", synth.n_dev, "dev image count (carved from total)");
  gen->add_option("--test", synth.n_test, "test image count (carved from total)");
  gen->add_option("--concepts", synth.vocab_concepts, "concept vocabulary size");
  gen->add_option("--concepts-per-image", synth.concepts_per_image, "concepts per image");
  gen->add_option("--feature-dim", synth.feature_dim, "image feature dimension");
  gen->add_option("--captions-per-image", synth.captions_per_image, "captions per image");
  gen->add_option("--noise-sigma", synth.noise_sigma, "feature noise sigma");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--sts-pairs", sts_pairs, "also emit an STS file with this many pairs");

  // train
  auto* tr = app.add_subcommand("train", "train a model from a JSON config");
  std::string config_path;
  tr->add_option("config", config_path, "RunConfig JSON path")->required();
  struct {
    std::string captions, features, splits, out, rnn, pooling, reduction;
    std::int64_t epochs = -1, batch = -1, snap = -1, cycle = -1, hidden = -1, embed = -1,
                 attn = -1, seed = -1;
    double lr_min = -1, lr_max = -1, margin = -1;
  } ov;
  tr->add_option("--captions", ov.captions, "override data.captions");
  tr->add_option("--features", ov.features, "override data.features");
  tr->add_option("--splits", ov.splits, "override data.splits");
  tr->add_option("--out", ov.out, "override data.output_dir");
  tr->add_option("--epochs", ov.epochs, "override train.epochs");
  tr->add_option("--batch-size", ov.batch, "override train.batch_size");
  tr->add_option("--snapshot-every", ov.snap, "override train.snapshot_every");
  tr->add_option("--cycle-epochs", ov.cycle, "override schedule.cycle_epochs");
  tr->add_option("--hidden-size", ov.hidden, "override encoder.hidden_size");
  tr->add_option("--char-embed-dim", ov.embed, "override encoder.char_embed_dim");
  tr->add_option("--attention-hidden", ov.attn, "override encoder.attention_hidden");
  tr->add_option("--seed", ov.seed, "override seed");
  tr->add_option("--rnn", ov.rnn, "override encoder.rnn_kind (gru|lstm)");
  tr->add_option("--pooling", ov.pooling, "override encoder.pooling (attention|max)");
  tr->add_option("--reduction", ov.reduction, "override loss.reduction");
  tr->add_option("--lr-min", ov.lr_min, "override schedule.lr_min");
  tr->add_option("--lr-max", ov.lr_max, "override schedule.lr_max");
  tr->add_option("--margin", ov.margin, "override loss.margin");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or ensemble manifest");
  std::string ev_model, ev_caps, ev_feats, ev_splits, ev_split = "test", ev_sts, ev_out = ".";
  std::size_t ev_folds = 1;
  ev->add_option("model", ev_model, "checkpoint (.ckpt) or manifest.json")->required();
  ev->add_option("--captions", ev_caps, "captions file");
  ev->add_option("--features", ev_feats, "image features file");
  ev->add_option("--splits", ev_splits, "splits file");
  ev->add_option("--split", ev_split, "split to evaluate (train|dev|test)");
  ev->add_option("--folds", ev_folds, "partition the split into k folds and average");
  ev->add_option("--sts", ev_sts, "STS pairs file to score");
  ev->add_option("--out", ev_out, "output directory for reports");

  // embed
  auto* em = app.add_subcommand("embed", "embed sentences (one per line) to an IFV1 file");
  std::string em_model, em_sentences, em_out = "embeddings.ifv";
  em->add_option("model", em_model, "checkpoint (.ckpt) or manifest.json")->required();
  em->add_option("sentences", em_sentences, "UTF-8 text file, one sentence per line")->required();
  em->add_option("--out", em_out, "output IFV1 path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(gen_out, synth, sts_pairs);
    if (tr->parsed()) {
      RunConfig rc = parse_run_config(config_path);
      if (!ov.captions.empty()) rc.captions = ov.captions;
      if (!ov.features.empty()) rc.features = ov.features;
      if (!ov.splits.empty()) rc.splits = ov.splits;
      if (!ov.out.empty()) rc.output_dir = ov.out;
      if (!ov.rnn.empty()) rc.rnn_kind = ov.rnn;
      if (!ov.pooling.empty()) rc.pooling = ov.pooling;
      if (!ov.reduction.empty()) rc.reduction = ov.reduction;
      if (ov.epochs >= 0) rc.epochs = static_cast<std::size_t>(ov.epochs);
      if (ov.batch >= 0) rc.batch_size = static_cast<std::size_t>(ov.batch);
      if (ov.snap >= 0) rc.snapshot_every = static_cast<std::size_t>(ov.snap);
      if (ov.cycle >= 0) rc.cycle_epochs = static_cast<std::size_t>(ov.cycle);
      if (ov.hidden >= 0) rc.hidden_size = static_cast<std::size_t>(ov.hidden);
      if (ov.embed >= 0) rc.char_embed_dim = static_cast<std::size_t>(ov.embed);
      if (ov.attn >= 0) rc.attention_hidden = static_cast<std::size_t>(ov.attn);
      if (ov.seed >= 0) rc.seed = static_cast<std::uint64_t>(ov.seed);
      if (ov.lr_min >= 0) rc.lr_min = ov.lr_min;
      if (ov.lr_max >= 0) rc.lr_max = ov.lr_max;
      if (ov.margin >= 0) rc.margin = ov.margin;
      return cmd_train(rc);
    }
    if (ev->parsed()) {
      return cmd_eval(ev_model, ev_caps, ev_feats, ev_splits, ev_split, ev_folds, ev_sts, ev_out);
    }
    if (em->parsed()) return cmd_embed(em_model, em_sentences, em_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
