#include "elbert/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "elbert/io.hpp"
#include "elbert/rng.hpp"

namespace elbert {

namespace {

const std::string kReservedNames[] = {"[pad]", "[unk]", "[cls]"};

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    index_.emplace_back(tokens_[i], kNumReserved + i);
  }
  std::sort(index_.begin(), index_.end());
}

int Vocab::id_of(const std::string& token) const {
  auto it = std::lower_bound(index_.begin(), index_.end(),
                             std::make_pair(token, 0),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it != index_.end() && it->first == token) return it->second;
  return kUnk;
}

const std::string& Vocab::token_of(int id) const {
  if (id >= 0 && id < kNumReserved) return kReservedNames[id];
  const int i = id - kNumReserved;
  if (i < 0 || i >= static_cast<int>(tokens_.size())) {
    throw InputError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[i];
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab build_vocab(const std::vector<std::string>& corpus, int max_vocab_size) {
  if (corpus.empty()) throw InputError("build_vocab: empty corpus");
  if (max_vocab_size <= Vocab::kNumReserved) {
    throw ConfigError("max_vocab_size must exceed the reserved slots");
  }
  std::map<std::string, long> freq;
  for (const auto& text : corpus) {
    for (auto& tok : tokenize(text)) ++freq[tok];
  }
  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const size_t keep = std::min(ranked.size(),
                               static_cast<size_t>(max_vocab_size - Vocab::kNumReserved));
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocab(std::move(tokens));
}

std::vector<int> encode(const std::string& text, const Vocab& vocab, int max_seq_len) {
  std::vector<int> ids;
  ids.reserve(max_seq_len);
  ids.push_back(Vocab::kCls);
  for (const auto& tok : tokenize(text)) {
    if (static_cast<int>(ids.size()) >= max_seq_len) break;
    ids.push_back(vocab.id_of(tok));
  }
  ids.resize(max_seq_len, Vocab::kPad);
  return ids;
}

std::vector<Example> load_tsv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset: " + path.string());
  std::vector<Example> out;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("expected 'label<TAB>text'", line_no);
    }
    const std::string label_str = line.substr(0, tab);
    Example ex;
    ex.text = line.substr(tab + 1);
    size_t used = 0;
    try {
      ex.label = std::stoi(label_str, &used);
    } catch (const std::exception&) {
      throw ParseError("label is not an integer: '" + label_str + "'", line_no);
    }
    if (used != label_str.size() || ex.label < 0) {
      throw ParseError("label is not a non-negative integer: '" + label_str + "'", line_no);
    }
    if (ex.text.empty()) throw ParseError("empty text", line_no);
    out.push_back(std::move(ex));
  }
  return out;
}

void save_tsv(const std::filesystem::path& path, const std::vector<Example>& examples) {
  atomic_write(path, [&](std::ostream& os) {
    for (const auto& ex : examples) {
      os << ex.label << "\t" << ex.text << "\n";
    }
  });
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  atomic_write(path, [&](std::ostream& os) {
    for (const auto& tok : vocab.tokens()) os << tok << "\n";
  });
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open vocab: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void SynthSpec::validate() const {
  if (positive_keywords.empty() || negative_keywords.empty()) {
    throw ConfigError("keyword lists must be non-empty");
  }
  for (const auto& p : positive_keywords) {
    if (std::find(negative_keywords.begin(), negative_keywords.end(), p) !=
        negative_keywords.end()) {
      throw ConfigError("keyword lists must be disjoint: " + p);
    }
  }
  if (!(negation_rate >= 0.0 && negation_rate <= 1.0)) {
    throw ConfigError("negation_rate must lie in [0, 1]");
  }
  if (min_len < 2 || max_len < min_len) {
    throw ConfigError("sentence length range must satisfy 2 <= min <= max");
  }
  if (filler_words.empty()) throw ConfigError("filler word list must be non-empty");
  if (negation_rate > 0.0 && negation_words.empty()) {
    throw ConfigError("negation words required when negation_rate > 0");
  }
}

SynthSpec SynthSpec::defaults() {
  SynthSpec s;
  s.positive_keywords = {"great",    "wonderful", "excellent", "delightful",
                         "superb",   "charming",  "brilliant", "enjoyable",
                         "moving",   "fresh",     "clever",    "satisfying"};
  s.negative_keywords = {"terrible", "awful",   "boring",  "dreadful",
                         "bland",    "clumsy",  "tedious", "messy",
                         "shallow",  "stale",   "annoying", "painful"};
  s.negation_words = {"not", "never", "hardly", "barely"};
  s.filler_words = {"the",      "a",         "movie",   "film",     "plot",
                    "actor",    "scene",     "story",   "director", "script",
                    "music",    "ending",    "character", "dialogue", "pacing",
                    "camera",   "tone",      "cast",    "set",      "theme",
                    "audience", "critic",    "sequel",  "drama",    "comedy",
                    "screen",   "moment",    "performance", "style", "idea",
                    "line",     "shot",      "cut",     "frame",    "act",
                    "role",     "voice",     "look",    "feel",     "work"};
  s.negation_rate = 0.3;
  s.min_len = 5;
  s.max_len = 20;
  return s;
}

std::vector<SynthExample> generate_synthetic(const SynthSpec& spec, int n) {
  if (n < 1) throw InputError("generate_synthetic: n must be >= 1");
  spec.validate();
  Rng rng(spec.seed);
  std::vector<SynthExample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int len = spec.min_len +
                    static_cast<int>(rng.below(static_cast<uint64_t>(spec.max_len - spec.min_len + 1)));
    const int polarity = static_cast<int>(rng.below(2));  // 1 = positive
    const auto& keywords = polarity ? spec.positive_keywords : spec.negative_keywords;
    const std::string& keyword = keywords[rng.below(keywords.size())];
    const bool negated = rng.uniform() < spec.negation_rate;

    std::vector<std::string> words(len);
    for (auto& w : words) w = spec.filler_words[rng.below(spec.filler_words.size())];
    const int kw_pos = static_cast<int>(rng.below(static_cast<uint64_t>(len)));
    words[kw_pos] = keyword;
    if (negated) {
      int neg_pos = static_cast<int>(rng.below(static_cast<uint64_t>(len)));
      while (neg_pos == kw_pos) {
        neg_pos = static_cast<int>(rng.below(static_cast<uint64_t>(len)));
      }
      words[neg_pos] = spec.negation_words[rng.below(spec.negation_words.size())];
    }

    SynthExample ex;
    std::ostringstream text;
    for (size_t w = 0; w < words.size(); ++w) {
      if (w) text << ' ';
      text << words[w];
    }
    ex.text = text.str();
    ex.label = negated ? 1 - polarity : polarity;
    ex.hard = negated;
    ex.keyword = keyword;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> to_examples(const std::vector<SynthExample>& synth) {
  std::vector<Example> out;
  out.reserve(synth.size());
  for (const auto& s : synth) out.push_back({s.text, s.label});
  return out;
}

}  // namespace elbert
