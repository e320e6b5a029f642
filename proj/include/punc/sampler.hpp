#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "punc/tokenizer.hpp"

namespace punc {

class StreamTooShort : public std::invalid_argument {
 public:
  StreamTooShort(std::size_t stream_len, std::size_t window);
};

struct SamplerConfig {
  std::size_t seq_len = 256;  // L
  std::uint64_t seed = 0;
  std::uint64_t epoch_index = 0;
};

enum class SamplerKind { Sbs, FixedSplit };

/// splitmix64 finalizer; the building block of the counter-based draws.
std::uint64_t mix64(std::uint64_t x);
/// Hash of an ordered tuple of counters.
std::uint64_t counter_hash(std::initializer_list<std::uint64_t> parts);
/// Unbiased integer in [0, bound) derived from a counter stream.
std::uint64_t uniform_below(std::uint64_t bound, std::uint64_t stream);

/// floor(stream_len / L).
std::size_t epoch_sample_count(std::size_t stream_len, std::size_t seq_len);

/// Start offset of the SBS window for one draw, uniform on [0, |S| - L].
std::size_t sbs_start(std::size_t stream_len, const SamplerConfig& cfg, std::size_t draw_index);

/// Contiguous slice [j, j + L) of the stream with j from sbs_start.
TokenizedSample sample_window(const TokenStream& stream, const SamplerConfig& cfg,
                              std::size_t draw_index);

/// Window starts for one epoch: SBS draws, or the fixed stride-L split in a
/// seed/epoch-dependent order.
std::vector<std::size_t> epoch_window_starts(SamplerKind kind, std::size_t stream_len,
                                             const SamplerConfig& cfg);

struct EvalWindow {
  std::size_t start = 0;
  /// Positions before this offset repeat the previous window and are not
  /// scored (their position_mask is cleared in `sample`).
  std::size_t first_fresh = 0;
  TokenizedSample sample;
};

/// Non-overlapping stride-L windows; a remainder is covered by one extra
/// window aligned to the end of the stream.
std::vector<EvalWindow> eval_windows(const TokenStream& stream, std::size_t seq_len);

}  // namespace punc
