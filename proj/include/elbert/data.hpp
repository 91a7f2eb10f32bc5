#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "elbert/error.hpp"

namespace elbert {

/// Whitespace-token vocabulary with fixed reserved ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kNumReserved = 3;

  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);  // tokens for ids 3, 4, ...

  int id_of(const std::string& token) const;  // kUnk for unseen tokens
  const std::string& token_of(int id) const;  // reserved ids render as [pad] etc.
  int size() const { return kNumReserved + static_cast<int>(tokens_.size()); }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, int>> index_;  // sorted token -> id
};

struct Example {
  std::string text;
  int label = 0;
};

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize(const std::string& text);

/// Frequency-ranked vocabulary (ties broken lexicographically), truncated
/// to max_vocab_size including the reserved slots.
Vocab build_vocab(const std::vector<std::string>& corpus, int max_vocab_size);

/// [cls]-prefixed id sequence, truncated and right-padded to exactly
/// max_seq_len.
std::vector<int> encode(const std::string& text, const Vocab& vocab, int max_seq_len);

/// "label<TAB>text" per line; the text keeps any tabs after the first.
std::vector<Example> load_tsv(const std::filesystem::path& path);
void save_tsv(const std::filesystem::path& path, const std::vector<Example>& examples);

/// One non-reserved token per line, in id order.
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

/// Synthetic sentiment corpus: every sentence carries one sentiment keyword;
/// a negation word flips the label with probability negation_rate.
struct SynthSpec {
  std::vector<std::string> positive_keywords;
  std::vector<std::string> negative_keywords;
  std::vector<std::string> negation_words;
  std::vector<std::string> filler_words;
  double negation_rate = 0.3;
  int min_len = 5;   // tokens per sentence, excluding [cls]
  int max_len = 20;
  std::uint64_t seed = 0;

  void validate() const;
  static SynthSpec defaults();
};

/// A generated example plus its difficulty flag (hard = negated).
struct SynthExample {
  std::string text;
  int label = 0;    // 1 = positive sentiment, 0 = negative
  bool hard = false;
  std::string keyword;  // the embedded sentiment keyword
};

std::vector<SynthExample> generate_synthetic(const SynthSpec& spec, int n);

std::vector<Example> to_examples(const std::vector<SynthExample>& synth);

}  // namespace elbert
