#ifndef GROUNDRL_TOY_POLICY_HPP_
#define GROUNDRL_TOY_POLICY_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace groundrl {

using Symbol = std::uint32_t;

// Ordered token strings. Decoding a symbol sequence concatenates the strings;
// the stop symbol decodes to nothing.
class Vocabulary {
 public:
  // Throws std::invalid_argument if stop is out of range or tokens repeat.
  Vocabulary(std::vector<std::string> tokens, Symbol stop);

  std::size_t size() const { return tokens_.size(); }
  Symbol stop() const { return stop_; }
  const std::string& token(Symbol s) const { return tokens_.at(s); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Index of an exact token string; throws std::out_of_range if absent.
  Symbol find(std::string_view token) const;

  std::string decode(std::span<const Symbol> symbols) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> tokens_;
  Symbol stop_;
};

// Tabular autoregressive policy: one logit vector per (previous symbol,
// position). The previous symbol at position 0 is a begin marker, stored as
// context index vocab_size(). Generation ends after the stop symbol or after
// max_length symbols.
class ToyPolicy {
 public:
  // All logits start at zero (uniform conditionals).
  ToyPolicy(Vocabulary vocabulary, std::size_t max_length);

  const Vocabulary& vocabulary() const { return vocabulary_; }
  std::size_t vocab_size() const { return vocabulary_.size(); }
  std::size_t max_length() const { return max_length_; }
  Symbol stop_symbol() const { return vocabulary_.stop(); }
  std::size_t begin_context() const { return vocabulary_.size(); }
  std::size_t context_count() const { return vocabulary_.size() + 1; }

  std::size_t parameter_count() const { return logits_.size(); }
  std::span<double> parameters() { return logits_; }
  std::span<const double> parameters() const { return logits_; }

  // Offset of the logit row for (context, position) in parameters().
  std::size_t row_offset(std::size_t context, std::size_t position) const;
  std::span<double> logits(std::size_t context, std::size_t position);
  std::span<const double> logits(std::size_t context, std::size_t position) const;

  // Numerically stable log-softmax of one row.
  std::vector<double> log_probabilities(std::size_t context,
                                        std::size_t position) const;
  std::vector<double> probabilities(std::size_t context,
                                    std::size_t position) const;

  // Throws std::invalid_argument unless the sequence is non-empty, fits in
  // max_length, uses known symbols, and has stop only as its last symbol.
  void check_sequence(std::span<const Symbol> symbols) const;

  double sequence_log_prob(std::span<const Symbol> symbols) const;

  std::vector<Symbol> sample(std::mt19937_64& rng) const;

  bool same_shape(const ToyPolicy& other) const;

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

 private:
  Vocabulary vocabulary_;
  std::size_t max_length_;
  std::vector<double> logits_;
};

// Context index used at each position of a sequence.
std::vector<std::size_t> sequence_contexts(const ToyPolicy& policy,
                                           std::span<const Symbol> symbols);

struct SampledCompletion {
  std::vector<Symbol> symbols;
  std::string text;
};

// Engine seeded from (seed, stream); the same pair always yields the same
// engine, independent of thread scheduling.
std::mt19937_64 make_stream_rng(std::uint64_t seed, std::uint64_t stream);

// OpenMP kernel: completion i is drawn from make_stream_rng(seed, i).
std::vector<SampledCompletion> sample_group(const ToyPolicy& policy,
                                            std::size_t count, std::uint64_t seed);
std::vector<SampledCompletion> sample_group_serial(const ToyPolicy& policy,
                                                   std::size_t count,
                                                   std::uint64_t seed);

}  // namespace groundrl

#endif  // GROUNDRL_TOY_POLICY_HPP_
