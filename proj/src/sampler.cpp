#include "punc/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace punc {

StreamTooShort::StreamTooShort(std::size_t stream_len, std::size_t window)
    : std::invalid_argument("token stream of length " + std::to_string(stream_len) +
                            " is shorter than the window length " + std::to_string(window)) {}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t counter_hash(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

std::uint64_t uniform_below(std::uint64_t bound, std::uint64_t stream) {
  if (bound == 0) throw std::invalid_argument("uniform_below: empty range");
  // Reject the low (2^64 mod bound) values.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (std::uint64_t i = 0;; ++i) {
    const std::uint64_t r = mix64(stream + i * 0xd1b54a32d192ed03ULL);
    if (r >= threshold) return r % bound;
  }
}

std::size_t epoch_sample_count(std::size_t stream_len, std::size_t seq_len) {
  if (seq_len < 2) throw std::invalid_argument("seq_len must be at least 2");
  if (stream_len < seq_len) throw StreamTooShort(stream_len, seq_len);
  return stream_len / seq_len;
}

std::size_t sbs_start(std::size_t stream_len, const SamplerConfig& cfg, std::size_t draw_index) {
  const std::size_t draws = epoch_sample_count(stream_len, cfg.seq_len);
  if (draw_index >= draws)
    throw std::out_of_range("draw index " + std::to_string(draw_index) + " >= " +
                            std::to_string(draws) + " draws per epoch");
  const std::uint64_t stream = counter_hash({cfg.seed, cfg.epoch_index, draw_index});
  return static_cast<std::size_t>(uniform_below(stream_len - cfg.seq_len + 1, stream));
}

TokenizedSample sample_window(const TokenStream& stream, const SamplerConfig& cfg,
                              std::size_t draw_index) {
  return stream.slice(sbs_start(stream.size(), cfg, draw_index), cfg.seq_len);
}

std::vector<std::size_t> epoch_window_starts(SamplerKind kind, std::size_t stream_len,
                                             const SamplerConfig& cfg) {
  const std::size_t draws = epoch_sample_count(stream_len, cfg.seq_len);
  std::vector<std::size_t> starts(draws);
  if (kind == SamplerKind::Sbs) {
    for (std::size_t i = 0; i < draws; ++i) starts[i] = sbs_start(stream_len, cfg, i);
    return starts;
  }
  for (std::size_t i = 0; i < draws; ++i) starts[i] = i * cfg.seq_len;
  // Fisher-Yates with counter-based draws.
  for (std::size_t i = draws; i > 1; --i) {
    const auto k = uniform_below(i, counter_hash({cfg.seed, cfg.epoch_index, 0xf1feULL, i}));
    std::swap(starts[i - 1], starts[k]);
  }
  return starts;
}

std::vector<EvalWindow> eval_windows(const TokenStream& stream, std::size_t seq_len) {
  const std::size_t full = epoch_sample_count(stream.size(), seq_len);
  std::vector<EvalWindow> out;
  for (std::size_t w = 0; w < full; ++w)
    out.push_back({w * seq_len, 0, stream.slice(w * seq_len, seq_len)});
  const std::size_t covered = full * seq_len;
  if (covered < stream.size()) {
    const std::size_t start = stream.size() - seq_len;
    EvalWindow tail{start, covered - start, stream.slice(start, seq_len)};
    std::fill(tail.sample.position_mask.begin(),
              tail.sample.position_mask.begin() + static_cast<std::ptrdiff_t>(tail.first_fresh), 0);
    out.push_back(std::move(tail));
  }
  return out;
}

}  // namespace punc
