#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capembed/nn.hpp"
#include "capembed/tensor.hpp"

namespace capembed::data {

enum class Split { train, dev, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// Captions longer than this many code points are rejected at load.
inline constexpr std::size_t kMaxCaptionChars = 512;

struct ImageRecord {
  std::string id;
  std::vector<double> features;
  Split split = Split::train;
};

struct CaptionRecord {
  std::string image_id;
  int caption_index = 1;  // 1-based within its image
  std::string text;       // UTF-8
};

struct Corpus {
  std::size_t feature_dim = 0;
  std::vector<ImageRecord> images;  // file order
  std::vector<CaptionRecord> captions;
  std::unordered_map<std::string, std::size_t> image_index;

  const ImageRecord& image_of(const std::string& id) const;
  std::vector<std::size_t> image_indices_of_split(Split s) const;
  std::vector<std::size_t> caption_indices_of_split(Split s) const;
  void validate() const;
};

// Character vocabulary over Unicode code points. Reserved ids: 0 = PAD,
// 1 = UNK. Built from training-split captions only; characters seen only
// at evaluation time encode to UNK.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab() = default;
  // code points must be strictly ascending (the stable serialization order)
  static Vocab from_codepoints(std::vector<char32_t> codepoints);

  std::size_t size() const { return chars_.size() + 2; }
  const std::vector<char32_t>& codepoints() const { return chars_; }
  int id_of(char32_t c) const;
  std::vector<int> encode(std::string_view utf8) const;

 private:
  std::vector<char32_t> chars_;  // ascending; id = position + 2
  std::unordered_map<char32_t, int> ids_;
};

Vocab build_vocab(const Corpus& corpus);

// Decodes UTF-8 to code points; throws FormatError on malformed input.
std::vector<char32_t> utf8_decode(std::string_view text, const std::string& context);
std::string utf8_encode(const std::vector<char32_t>& codepoints);

// Aligned minibatch: row i pairs caption i with its own image's features
// (the diagonal convention consumed by the hinge loss).
struct Batch {
  nn::TextBatch text;
  Tensor image_features;  // B x feature_dim
  std::vector<std::pair<std::string, int>> identity;  // (image_id, caption_index)
};

// Deterministically shuffled caption stream for one epoch. The final short
// batch is kept; batch_size must be >= 2 (in-batch counterexamples).
std::vector<Batch> make_batches(const Corpus& corpus, Split split, const Vocab& vocab,
                                std::size_t batch_size, std::uint64_t epoch_seed);

// Pads already-encoded captions into one batch (no pairing constraints;
// used by evaluation and embedding export).
nn::TextBatch pad_captions(const std::vector<std::vector<int>>& encoded);

struct StsPair {
  std::string sentence_a;
  std::string sentence_b;
  double gold;  // [0, 5]
};

// --- file formats ---

Corpus load_corpus(const std::filesystem::path& captions_path,
                   const std::filesystem::path& features_path,
                   const std::filesystem::path& splits_path);

void write_captions_file(const std::filesystem::path& path,
                         const std::vector<CaptionRecord>& captions, bool tokenized = false);
void write_features_file(const std::filesystem::path& path,
                         const std::vector<ImageRecord>& images, std::size_t feature_dim);
void write_splits_file(const std::filesystem::path& path,
                       const std::vector<ImageRecord>& images);

std::vector<StsPair> load_sts_pairs(const std::filesystem::path& path);
void write_sts_pairs(const std::filesystem::path& path, const std::vector<StsPair>& pairs);

// Embedding vectors in the image-features container (ids are arbitrary
// strings); shared by feature ingestion and embedding export.
struct VectorFile {
  std::size_t dim = 0;
  std::vector<std::pair<std::string, std::vector<float>>> entries;
};
VectorFile read_vector_file(const std::filesystem::path& path);
void write_vector_file(const std::filesystem::path& path, const VectorFile& contents);

// --- synthetic corpus ---

struct SynthConfig {
  std::size_t n_images = 700;  // total; dev/test carved from the tail
  std::size_t n_dev = 100;
  std::size_t n_test = 100;
  std::size_t concepts_per_image = 3;
  std::size_t vocab_concepts = 32;
  std::size_t feature_dim = 64;
  std::size_t captions_per_image = 5;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Images are random concept subsets; features are the sum of fixed
// per-concept basis vectors plus Gaussian noise; captions are templated
// sentences naming the concepts with synonym and word-order variation.
Corpus gen_synthetic(const SynthConfig& config);

// Sentence pairs whose gold score is 5 * shared / max over the two
// concept sets, rendered with the same caption templates.
std::vector<StsPair> gen_synthetic_sts(std::size_t n_pairs, const SynthConfig& config,
                                       std::uint64_t seed);

}  // namespace capembed::data
