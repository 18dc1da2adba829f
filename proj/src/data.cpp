#include "capembed/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "capembed/bytes.hpp"
#include "capembed/rng.hpp"

namespace capembed::data {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + s + "' (expected train, dev, or test)");
}

const ImageRecord& Corpus::image_of(const std::string& id) const {
  auto it = image_index.find(id);
  if (it == image_index.end()) throw ValidationError("unknown image id '" + id + "'");
  return images[it->second];
}

std::vector<std::size_t> Corpus::image_indices_of_split(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (images[i].split == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> Corpus::caption_indices_of_split(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < captions.size(); ++i)
    if (image_of(captions[i].image_id).split == s) out.push_back(i);
  return out;
}

void Corpus::validate() const {
  if (image_index.size() != images.size()) {
    throw ValidationError("corpus: duplicate image ids");
  }
  for (const auto& [id, idx] : image_index) {
    if (idx >= images.size() || images[idx].id != id) {
      throw ValidationError("corpus: image index out of sync");
    }
  }
  std::vector<std::string> missing;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& cap : captions) {
    if (!image_index.count(cap.image_id)) missing.push_back(cap.image_id);
    if (!seen.insert({cap.image_id, cap.caption_index}).second) {
      throw ValidationError("corpus: duplicate caption (" + cap.image_id + ", " +
                            std::to_string(cap.caption_index) + ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = "corpus: captions reference unknown images:";
    for (const auto& id : missing) msg += " " + id;
    throw ValidationError(msg);
  }
  for (const auto& img : images) {
    if (img.features.size() != feature_dim) {
      throw DimensionError("corpus: image '" + img.id + "' has " +
                           std::to_string(img.features.size()) + " features, expected " +
                           std::to_string(feature_dim));
    }
  }
}

// --- UTF-8 ---

std::vector<char32_t> utf8_decode(std::string_view text, const std::string& context) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  const auto fail = [&](const std::string& why) {
    throw FormatError(context + ": invalid UTF-8 at byte " + std::to_string(i) + " (" + why + ")");
  };
  while (i < text.size()) {
    const unsigned char b0 = static_cast<unsigned char>(text[i]);
    std::size_t len;
    char32_t cp;
    char32_t min_cp;
    if (b0 < 0x80) {
      len = 1; cp = b0; min_cp = 0;
    } else if ((b0 >> 5) == 0x6) {
      len = 2; cp = b0 & 0x1f; min_cp = 0x80;
    } else if ((b0 >> 4) == 0xe) {
      len = 3; cp = b0 & 0x0f; min_cp = 0x800;
    } else if ((b0 >> 3) == 0x1e) {
      len = 4; cp = b0 & 0x07; min_cp = 0x10000;
    } else {
      fail("bad leading byte");
      return out;
    }
    if (i + len > text.size()) fail("truncated sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char bk = static_cast<unsigned char>(text[i + k]);
      if ((bk >> 6) != 0x2) fail("bad continuation byte");
      cp = (cp << 6) | (bk & 0x3f);
    }
    if (cp < min_cp) fail("overlong encoding");
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) fail("code point out of range");
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(const std::vector<char32_t>& codepoints) {
  std::string out;
  for (char32_t cp : codepoints) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xc0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xe0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
      out += static_cast<char>(0xf0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    }
  }
  return out;
}

// --- Vocab ---

Vocab Vocab::from_codepoints(std::vector<char32_t> codepoints) {
  Vocab v;
  for (std::size_t i = 1; i < codepoints.size(); ++i) {
    if (codepoints[i] <= codepoints[i - 1]) {
      throw ValidationError("vocab: code points must be strictly ascending");
    }
  }
  v.chars_ = std::move(codepoints);
  for (std::size_t i = 0; i < v.chars_.size(); ++i) {
    v.ids_.emplace(v.chars_[i], static_cast<int>(i) + 2);
  }
  return v;
}

int Vocab::id_of(char32_t c) const {
  auto it = ids_.find(c);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(std::string_view utf8) const {
  std::vector<int> out;
  for (char32_t cp : utf8_decode(utf8, "encode")) out.push_back(id_of(cp));
  return out;
}

Vocab build_vocab(const Corpus& corpus) {
  std::set<char32_t> seen;
  bool any = false;
  for (const auto& cap : corpus.captions) {
    if (corpus.image_of(cap.image_id).split != Split::train) continue;
    any = true;
    for (char32_t cp : utf8_decode(cap.text, "caption for " + cap.image_id)) seen.insert(cp);
  }
  if (!any) throw ValidationError("build_vocab: training split has no captions");
  return Vocab::from_codepoints(std::vector<char32_t>(seen.begin(), seen.end()));
}

// --- batching ---

nn::TextBatch pad_captions(const std::vector<std::vector<int>>& encoded) {
  if (encoded.empty()) throw ValidationError("pad_captions: no captions");
  nn::TextBatch tb;
  tb.batch_size = encoded.size();
  tb.max_len = 0;
  for (const auto& ids : encoded) {
    if (ids.empty()) throw ValidationError("pad_captions: empty caption");
    tb.max_len = std::max(tb.max_len, ids.size());
  }
  tb.char_ids.assign(tb.batch_size * tb.max_len, Vocab::kPad);
  for (const auto& ids : encoded) tb.lengths.push_back(ids.size());
  for (std::size_t b = 0; b < tb.batch_size; ++b) {
    std::copy(encoded[b].begin(), encoded[b].end(), tb.char_ids.begin() + b * tb.max_len);
  }
  return tb;
}

std::vector<Batch> make_batches(const Corpus& corpus, Split split, const Vocab& vocab,
                                std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 2) {
    throw ValidationError("make_batches: batch_size must be >= 2 (in-batch counterexamples)");
  }
  std::vector<std::size_t> order = corpus.caption_indices_of_split(split);
  if (order.empty()) {
    throw ValidationError("make_batches: split '" + to_string(split) + "' has no captions");
  }
  Rng rng(epoch_seed);
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t b = std::min(batch_size, order.size() - start);
    std::vector<std::vector<int>> encoded(b);
    Batch batch;
    batch.image_features = Tensor::zeros({b, corpus.feature_dim});
    for (std::size_t i = 0; i < b; ++i) {
      const CaptionRecord& cap = corpus.captions[order[start + i]];
      encoded[i] = vocab.encode(cap.text);
      const ImageRecord& img = corpus.image_of(cap.image_id);
      for (std::size_t j = 0; j < corpus.feature_dim; ++j) {
        batch.image_features.at(i, j) = img.features[j];
      }
      batch.identity.emplace_back(cap.image_id, cap.caption_index);
    }
    batch.text = pad_captions(encoded);
    batches.push_back(std::move(batch));
  }
  return batches;
}

// --- text-format helpers ---

namespace {

using bytes::slurp;
using bytes::spew;

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::string all = slurp(path);
  std::vector<std::string> lines;
  std::string cur;
  for (char c : all) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string escape_field(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else out += c;
  }
  return out;
}

std::string unescape_field(const std::string& s, const std::string& where) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) throw FormatError(where + ": dangling backslash");
    ++i;
    if (s[i] == 't') out += '\t';
    else if (s[i] == '\\') out += '\\';
    else throw FormatError(where + ": unknown escape \\" + std::string(1, s[i]));
  }
  return out;
}

}  // namespace

// --- vector container (image features / exported embeddings) ---

VectorFile read_vector_file(const std::filesystem::path& path) {
  bytes::Reader r(slurp(path), path.string());
  if (r.raw(4) != "IFV1") throw FormatError(path.string() + ": bad magic (expected IFV1)");
  VectorFile vf;
  vf.dim = r.u32();
  const std::uint32_t count = r.u32();
  vf.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t id_len = r.u16();
    std::string id = r.raw(id_len);
    std::vector<float> vals(vf.dim);
    for (std::size_t j = 0; j < vf.dim; ++j) vals[j] = r.f32();
    vf.entries.emplace_back(std::move(id), std::move(vals));
  }
  r.expect_end();
  return vf;
}

void write_vector_file(const std::filesystem::path& path, const VectorFile& contents) {
  std::string buf = "IFV1";
  bytes::put_u32(buf, static_cast<std::uint32_t>(contents.dim));
  bytes::put_u32(buf, static_cast<std::uint32_t>(contents.entries.size()));
  for (const auto& [id, vals] : contents.entries) {
    if (vals.size() != contents.dim) {
      throw DimensionError("vector file: entry '" + id + "' has " + std::to_string(vals.size()) +
                           " values, expected " + std::to_string(contents.dim));
    }
    if (id.size() > 0xffff) throw ValidationError("vector file: id too long");
    bytes::put_u16(buf, static_cast<std::uint16_t>(id.size()));
    buf += id;
    for (float v : vals) bytes::put_f32(buf, v);
  }
  spew(path, buf);
}

// --- corpus files ---

void write_captions_file(const std::filesystem::path& path,
                         const std::vector<CaptionRecord>& captions, bool tokenized) {
  std::string buf = tokenized ? "CAPS v1 tokenized\n" : "CAPS v1 raw\n";
  for (const auto& cap : captions) {
    buf += cap.image_id;
    buf += '\t';
    buf += std::to_string(cap.caption_index);
    buf += '\t';
    buf += cap.text;
    buf += '\n';
  }
  spew(path, buf);
}

void write_features_file(const std::filesystem::path& path,
                         const std::vector<ImageRecord>& images, std::size_t feature_dim) {
  VectorFile vf;
  vf.dim = feature_dim;
  for (const auto& img : images) {
    std::vector<float> vals(img.features.begin(), img.features.end());
    vf.entries.emplace_back(img.id, std::move(vals));
  }
  write_vector_file(path, vf);
}

void write_splits_file(const std::filesystem::path& path,
                       const std::vector<ImageRecord>& images) {
  std::string buf;
  for (const auto& img : images) {
    buf += img.id;
    buf += '\t';
    buf += to_string(img.split);
    buf += '\n';
  }
  spew(path, buf);
}

namespace {

// tokenized caption streams are joined with single spaces plus a final stop
std::string join_tokens(const std::string& text) {
  std::string out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  out += '.';
  return out;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& captions_path,
                   const std::filesystem::path& features_path,
                   const std::filesystem::path& splits_path) {
  Corpus corpus;

  VectorFile vf = read_vector_file(features_path);
  corpus.feature_dim = vf.dim;
  for (auto& [id, vals] : vf.entries) {
    if (corpus.image_index.count(id)) {
      throw FormatError(features_path.string() + ": duplicate image id '" + id + "'");
    }
    ImageRecord img;
    img.id = id;
    img.features.assign(vals.begin(), vals.end());
    corpus.image_index.emplace(img.id, corpus.images.size());
    corpus.images.push_back(std::move(img));
  }

  {
    std::set<std::string> assigned;
    const auto lines = read_lines(splits_path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const auto cols = split_tabs(lines[ln]);
      if (cols.size() != 2) {
        throw FormatError(splits_path.string() + ":" + std::to_string(ln + 1) +
                          ": expected image_id<TAB>split");
      }
      auto it = corpus.image_index.find(cols[0]);
      if (it == corpus.image_index.end()) {
        throw FormatError(splits_path.string() + ":" + std::to_string(ln + 1) +
                          ": unknown image id '" + cols[0] + "'");
      }
      if (!assigned.insert(cols[0]).second) {
        throw FormatError(splits_path.string() + ":" + std::to_string(ln + 1) +
                          ": image '" + cols[0] + "' assigned to a split twice");
      }
      corpus.images[it->second].split = split_from_string(cols[1]);
    }
    if (assigned.size() != corpus.images.size()) {
      for (const auto& img : corpus.images) {
        if (!assigned.count(img.id)) {
          throw FormatError(splits_path.string() + ": image '" + img.id + "' has no split");
        }
      }
    }
  }

  {
    const auto lines = read_lines(captions_path);
    if (lines.empty()) throw FormatError(captions_path.string() + ": empty file");
    bool tokenized;
    if (lines[0] == "CAPS v1 raw") tokenized = false;
    else if (lines[0] == "CAPS v1 tokenized") tokenized = true;
    else throw FormatError(captions_path.string() + ": bad header '" + lines[0] + "'");

    std::vector<std::string> unknown;
    std::set<std::pair<std::string, int>> seen;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const std::string where = captions_path.string() + ":" + std::to_string(ln + 1);
      const std::string& line = lines[ln];
      const std::size_t t1 = line.find('\t');
      const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) throw FormatError(where + ": expected 3 tab-separated fields");
      CaptionRecord cap;
      cap.image_id = line.substr(0, t1);
      const std::string idx_str = line.substr(t1 + 1, t2 - t1 - 1);
      try {
        cap.caption_index = std::stoi(idx_str);
      } catch (const std::exception&) {
        throw FormatError(where + ": bad caption index '" + idx_str + "'");
      }
      if (cap.caption_index < 1) throw FormatError(where + ": caption index must be >= 1");
      cap.text = line.substr(t2 + 1);
      if (tokenized) cap.text = join_tokens(cap.text);
      if (cap.text.empty()) throw FormatError(where + ": empty caption");
      const auto cps = utf8_decode(cap.text, where);
      if (cps.size() > kMaxCaptionChars) {
        throw FormatError(where + ": caption exceeds " + std::to_string(kMaxCaptionChars) +
                          " characters");
      }
      if (!corpus.image_index.count(cap.image_id)) unknown.push_back(cap.image_id);
      if (!seen.insert({cap.image_id, cap.caption_index}).second) {
        throw FormatError(where + ": duplicate caption (" + cap.image_id + ", " +
                          std::to_string(cap.caption_index) + ")");
      }
      corpus.captions.push_back(std::move(cap));
    }
    if (!unknown.empty()) {
      std::string msg = captions_path.string() + ": captions reference unknown images:";
      for (const auto& id : unknown) msg += " " + id;
      throw FormatError(msg);
    }
  }

  corpus.validate();
  return corpus;
}

// --- STS pairs ---

std::vector<StsPair> load_sts_pairs(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "STS v1") {
    throw FormatError(path.string() + ": bad header (expected 'STS v1')");
  }
  std::vector<StsPair> pairs;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(ln + 1);
    const auto cols = split_tabs(lines[ln]);
    if (cols.size() != 3) throw FormatError(where + ": expected score<TAB>sentence_a<TAB>sentence_b");
    StsPair p;
    try {
      std::size_t used = 0;
      p.gold = std::stod(cols[0], &used);
      if (used != cols[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(where + ": bad score '" + cols[0] + "'");
    }
    if (p.gold < 0.0 || p.gold > 5.0) {
      throw FormatError(where + ": score " + cols[0] + " outside [0, 5]");
    }
    p.sentence_a = unescape_field(cols[1], where);
    p.sentence_b = unescape_field(cols[2], where);
    utf8_decode(p.sentence_a, where);
    utf8_decode(p.sentence_b, where);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_sts_pairs(const std::filesystem::path& path, const std::vector<StsPair>& pairs) {
  std::string buf = "STS v1\n";
  char num[64];
  for (const auto& p : pairs) {
    std::snprintf(num, sizeof(num), "%.17g", p.gold);
    buf += num;
    buf += '\t';
    buf += escape_field(p.sentence_a);
    buf += '\t';
    buf += escape_field(p.sentence_b);
    buf += '\n';
  }
  spew(path, buf);
}

// --- synthetic corpus ---

namespace {

struct ConceptWord {
  const char* base;
  const char* synonym;
};

constexpr ConceptWord kConcepts[] = {
    {"dog", "hound"},       {"cat", "feline"},      {"tree", "birch"},
    {"car", "sedan"},       {"house", "cabin"},     {"bird", "finch"},
    {"boat", "canoe"},      {"fish", "trout"},      {"horse", "pony"},
    {"chair", "stool"},     {"table", "counter"},   {"river", "creek"},
    {"mountain", "ridge"},  {"flower", "tulip"},    {"book", "volume"},
    {"lamp", "lantern"},    {"bridge", "overpass"}, {"clock", "timepiece"},
    {"train", "locomotive"},{"plane", "aircraft"},  {"apple", "fruit"},
    {"ball", "sphere"},     {"hat", "cap"},         {"shoe", "boot"},
    {"road", "street"},     {"field", "meadow"},    {"cloud", "mist"},
    {"stone", "pebble"},    {"door", "gate"},       {"window", "pane"},
    {"cup", "mug"},         {"plate", "dish"},      {"knife", "blade"},
    {"spoon", "ladle"},     {"bottle", "flask"},    {"box", "crate"},
    {"bag", "sack"},        {"coat", "jacket"},     {"glove", "mitten"},
    {"scarf", "shawl"},     {"bed", "cot"},         {"desk", "bureau"},
    {"shelf", "rack"},      {"mirror", "glass"},    {"candle", "taper"},
    {"basket", "hamper"},   {"rope", "cord"},       {"ladder", "stair"},
    {"wheel", "tire"},      {"bell", "chime"},      {"drum", "tom"},
    {"flute", "pipe"},      {"guitar", "banjo"},    {"piano", "organ"},
    {"violin", "fiddle"},   {"trumpet", "horn"},    {"wall", "fence"},
    {"roof", "thatch"},     {"floor", "tile"},      {"garden", "yard"},
    {"forest", "woods"},    {"beach", "shore"},     {"island", "atoll"},
    {"valley", "glen"},
};

constexpr std::size_t kConceptCount = sizeof(kConcepts) / sizeof(kConcepts[0]);
constexpr double kSynonymProb = 0.25;

std::string with_article(const std::string& word) {
  static const std::string vowels = "aeiou";
  const bool vowel = vowels.find(word[0]) != std::string::npos;
  return (vowel ? "an " : "a ") + word;
}

std::vector<std::size_t> sample_concepts(Rng& rng, std::size_t vocab, std::size_t k) {
  std::vector<std::size_t> pool(vocab);
  for (std::size_t i = 0; i < vocab; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.below(vocab - i)]);
  }
  pool.resize(k);
  return pool;
}

std::string render_sentence(Rng& rng, const std::vector<std::size_t>& concepts) {
  std::vector<std::size_t> order = concepts;
  rng.shuffle(order);
  std::string listing;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const ConceptWord& cw = kConcepts[order[i]];
    const std::string word = rng.uniform() < kSynonymProb ? cw.synonym : cw.base;
    if (i == 0) {
      listing = with_article(word);
    } else if (i + 1 == order.size()) {
      listing += " and " + with_article(word);
    } else {
      listing += ", " + with_article(word);
    }
  }
  std::string sentence;
  switch (rng.below(3)) {
    case 0: sentence = listing + "."; break;
    case 1: sentence = "there is " + listing + " in the picture."; break;
    default: sentence = "the photo shows " + listing + "."; break;
  }
  if (rng.uniform() < 0.5 && !sentence.empty()) {
    sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
  }
  return sentence;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_images < 1) throw ValidationError("gen_synthetic: n_images must be >= 1");
  if (n_dev + n_test >= n_images) {
    throw ValidationError("gen_synthetic: dev + test counts must leave at least one training image");
  }
  if (concepts_per_image < 1 || vocab_concepts < concepts_per_image) {
    throw ValidationError("gen_synthetic: need vocab_concepts >= concepts_per_image >= 1");
  }
  if (vocab_concepts > kConceptCount) {
    throw ValidationError("gen_synthetic: at most " + std::to_string(kConceptCount) +
                          " concepts available");
  }
  if (vocab_concepts > feature_dim) {
    throw ValidationError("gen_synthetic: feature_dim must be >= vocab_concepts "
                          "(one basis axis per concept)");
  }
  if (captions_per_image < 1) throw ValidationError("gen_synthetic: captions_per_image must be >= 1");
  if (noise_sigma < 0.0) throw ValidationError("gen_synthetic: noise_sigma must be >= 0");
}

Corpus gen_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(sub_seed(config.seed, "synth"));

  Corpus corpus;
  corpus.feature_dim = config.feature_dim;
  const std::size_t n_train = config.n_images - config.n_dev - config.n_test;
  char id_buf[32];
  for (std::size_t i = 0; i < config.n_images; ++i) {
    std::snprintf(id_buf, sizeof(id_buf), "img%06zu", i);
    ImageRecord img;
    img.id = id_buf;
    img.split = i < n_train ? Split::train
               : i < n_train + config.n_dev ? Split::dev
                                            : Split::test;
    const auto concepts = sample_concepts(rng, config.vocab_concepts, config.concepts_per_image);
    // one basis axis per concept, plus isotropic noise
    img.features.assign(config.feature_dim, 0.0);
    for (std::size_t c : concepts) img.features[c] += 1.0;
    if (config.noise_sigma > 0.0) {
      for (std::size_t j = 0; j < config.feature_dim; ++j) {
        img.features[j] += config.noise_sigma * rng.gaussian();
      }
    }
    for (std::size_t k = 0; k < config.captions_per_image; ++k) {
      CaptionRecord cap;
      cap.image_id = img.id;
      cap.caption_index = static_cast<int>(k) + 1;
      cap.text = render_sentence(rng, concepts);
      corpus.captions.push_back(std::move(cap));
    }
    corpus.image_index.emplace(img.id, corpus.images.size());
    corpus.images.push_back(std::move(img));
  }
  corpus.validate();
  return corpus;
}

std::vector<StsPair> gen_synthetic_sts(std::size_t n_pairs, const SynthConfig& config,
                                       std::uint64_t seed) {
  config.validate();
  Rng rng(sub_seed(seed, "sts"));
  const std::size_t k = config.concepts_per_image;
  std::vector<StsPair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::size_t shared = rng.below(k + 1);
    const auto set_a = sample_concepts(rng, config.vocab_concepts, k);
    // keep `shared` concepts from A, draw the rest from the complement
    std::vector<std::size_t> set_b(set_a.begin(), set_a.begin() + shared);
    std::vector<std::size_t> complement;
    for (std::size_t c = 0; c < config.vocab_concepts; ++c) {
      if (std::find(set_a.begin(), set_a.end(), c) == set_a.end()) complement.push_back(c);
    }
    rng.shuffle(complement);
    for (std::size_t j = 0; j < k - shared; ++j) set_b.push_back(complement[j]);

    StsPair p;
    p.sentence_a = render_sentence(rng, set_a);
    p.sentence_b = render_sentence(rng, set_b);
    p.gold = 5.0 * static_cast<double>(shared) / static_cast<double>(k);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace capembed::data
