#include "groundrl/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace groundrl {

Vocabulary::Vocabulary(std::vector<std::string> tokens, Symbol stop)
    : tokens_(std::move(tokens)), stop_(stop) {
  if (tokens_.empty() || stop_ >= tokens_.size()) {
    throw std::invalid_argument("vocabulary needs a stop symbol among its tokens");
  }
  std::set<std::string> unique(tokens_.begin(), tokens_.end());
  if (unique.size() != tokens_.size()) {
    throw std::invalid_argument("vocabulary tokens must be distinct");
  }
}

Symbol Vocabulary::find(std::string_view token) const {
  const auto it = std::find(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end()) {
    throw std::out_of_range("token not in vocabulary: " + std::string(token));
  }
  return static_cast<Symbol>(it - tokens_.begin());
}

std::string Vocabulary::decode(std::span<const Symbol> symbols) const {
  std::string out;
  for (Symbol s : symbols) {
    if (s == stop_) break;
    out += tokens_.at(s);
  }
  return out;
}

ToyPolicy::ToyPolicy(Vocabulary vocabulary, std::size_t max_length)
    : vocabulary_(std::move(vocabulary)), max_length_(max_length) {
  if (max_length_ == 0) throw std::invalid_argument("max_length must be positive");
  logits_.assign(context_count() * max_length_ * vocab_size(), 0.0);
}

std::size_t ToyPolicy::row_offset(std::size_t context, std::size_t position) const {
  return (context * max_length_ + position) * vocab_size();
}

std::span<double> ToyPolicy::logits(std::size_t context, std::size_t position) {
  return std::span<double>(logits_).subspan(row_offset(context, position),
                                            vocab_size());
}

std::span<const double> ToyPolicy::logits(std::size_t context,
                                          std::size_t position) const {
  return std::span<const double>(logits_).subspan(row_offset(context, position),
                                                  vocab_size());
}

std::vector<double> ToyPolicy::log_probabilities(std::size_t context,
                                                 std::size_t position) const {
  const auto row = logits(context, position);
  const double peak = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double z : row) sum += std::exp(z - peak);
  const double lse = peak + std::log(sum);
  std::vector<double> out(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) out[k] = row[k] - lse;
  return out;
}

std::vector<double> ToyPolicy::probabilities(std::size_t context,
                                             std::size_t position) const {
  auto out = log_probabilities(context, position);
  for (double& v : out) v = std::exp(v);
  return out;
}

void ToyPolicy::check_sequence(std::span<const Symbol> symbols) const {
  if (symbols.empty()) throw std::invalid_argument("sequence is empty");
  if (symbols.size() > max_length_) {
    throw std::invalid_argument("sequence longer than max_length");
  }
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    if (symbols[t] >= vocab_size()) {
      throw std::invalid_argument("unknown symbol " + std::to_string(symbols[t]));
    }
    if (symbols[t] == stop_symbol() && t + 1 != symbols.size()) {
      throw std::invalid_argument("stop symbol before the end of the sequence");
    }
  }
}

std::vector<std::size_t> sequence_contexts(const ToyPolicy& policy,
                                           std::span<const Symbol> symbols) {
  std::vector<std::size_t> contexts(symbols.size());
  std::size_t context = policy.begin_context();
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    contexts[t] = context;
    context = symbols[t];
  }
  return contexts;
}

double ToyPolicy::sequence_log_prob(std::span<const Symbol> symbols) const {
  check_sequence(symbols);
  const auto contexts = sequence_contexts(*this, symbols);
  double total = 0.0;
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    total += log_probabilities(contexts[t], t)[symbols[t]];
  }
  return total;
}

std::vector<Symbol> ToyPolicy::sample(std::mt19937_64& rng) const {
  std::vector<Symbol> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t context = begin_context();
  for (std::size_t t = 0; t < max_length_; ++t) {
    const auto p = probabilities(context, t);
    const double u = unit(rng);
    double cumulative = 0.0;
    Symbol chosen = static_cast<Symbol>(p.size() - 1);
    for (std::size_t k = 0; k < p.size(); ++k) {
      cumulative += p[k];
      if (u < cumulative) {
        chosen = static_cast<Symbol>(k);
        break;
      }
    }
    out.push_back(chosen);
    if (chosen == stop_symbol()) break;
    context = chosen;
  }
  return out;
}

bool ToyPolicy::same_shape(const ToyPolicy& other) const {
  return vocabulary_ == other.vocabulary_ && max_length_ == other.max_length_;
}

std::mt19937_64 make_stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

std::vector<SampledCompletion> sample_group(const ToyPolicy& policy,
                                            std::size_t count, std::uint64_t seed) {
  std::vector<SampledCompletion> out(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    auto rng = make_stream_rng(seed, static_cast<std::uint64_t>(i));
    auto& slot = out[static_cast<std::size_t>(i)];
    slot.symbols = policy.sample(rng);
    slot.text = policy.vocabulary().decode(slot.symbols);
  }
  return out;
}

std::vector<SampledCompletion> sample_group_serial(const ToyPolicy& policy,
                                                   std::size_t count,
                                                   std::uint64_t seed) {
  std::vector<SampledCompletion> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = make_stream_rng(seed, i);
    SampledCompletion c;
    c.symbols = policy.sample(rng);
    c.text = policy.vocabulary().decode(c.symbols);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace groundrl
