#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "punc/eval.hpp"
#include "punc/model.hpp"
#include "punc/optim.hpp"
#include "punc/sampler.hpp"

namespace punc {

class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  AdamConfig adam{};
  double grad_clip_norm = 5.0;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 50;
  std::size_t patience = 8;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::Sbs;

  std::vector<std::string> validate() const;
};

struct TrainState {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;
  std::vector<AdamMoments> moments;  // one per parameter tensor
};

enum class StopDecision { Continue, Stop };

struct EarlyStopResult {
  StopDecision decision = StopDecision::Continue;
  bool improved = false;  // caller snapshots the parameters when set
};

/// Strictly lower val_loss resets the counter; anything else increments it.
/// Stops once the counter exceeds `patience`.
EarlyStopResult early_stop_check(TrainState& state, double val_loss, std::size_t patience);

/// Clips the gradients of every parameter group by their joint l2 norm.
/// Returns the pre-clip norm.
double clip_gradients(FusionParams<float>& grads, double max_norm);
double clip_gradients(FusionParams<double>& grads, double max_norm);

/// One Adam step on every tensor; `state.step` must already count this step.
void adam_step(FusionParams<float>& params, const FusionParams<float>& grads, TrainState& state,
               const AdamConfig& cfg);

struct StreamEval {
  double loss = 0.0;  // mean cross entropy over scored positions
  std::size_t loss_positions = 0;
  ConfusionCounts counts;
  std::vector<PunctLabel> predictions;  // one per stream position
};

/// Runs the model over eval_windows of the stream. Positions repeated by the
/// final overlapping window are counted once. Streams shorter than seq_len
/// are scored as one window of their own length.
StreamEval evaluate_stream(const FusionModel<float>& model, const TokenStream& stream);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_micro_f1 = 0;
  double val_mean_f1 = 0;
  double seconds = 0;
  std::size_t steps = 0;
};

/// `epoch  train_loss  val_loss  val_micro_f1  val_mean_f1  seconds`
std::string format_epoch_log(const EpochLog& log);

struct TrainResult {
  FusionModel<float> best_model;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<EpochLog> log;
  TrainState state;
};

/// Called after every epoch; returning false ends training early.
using EpochCallback = std::function<bool(const EpochLog&)>;

/// Windows drawn for one training epoch (SBS draws or the shuffled fixed
/// split), grouped into full batches; a short trailing group is dropped.
std::vector<std::vector<std::size_t>> epoch_batches(const TrainConfig& cfg, std::size_t stream_len,
                                                    std::size_t seq_len, std::size_t epoch);

/// Trains `model` in place and returns the snapshot with the lowest
/// validation loss.
TrainResult train_run(const TrainConfig& cfg, FusionModel<float> model, const TokenStream& train_stream,
                      const TokenStream& valid_stream, const EpochCallback& on_epoch = {});

}  // namespace punc
