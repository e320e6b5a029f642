#include "punc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace punc {

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> errors;
  if (!(adam.learning_rate > 0.0)) errors.push_back("learning_rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) errors.push_back("adam_beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) errors.push_back("adam_beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) errors.push_back("adam_eps must be > 0");
  if (!(grad_clip_norm > 0.0)) errors.push_back("grad_clip_norm must be > 0");
  if (batch_size < 1) errors.push_back("batch_size must be >= 1");
  if (patience < 1) errors.push_back("patience must be >= 1");
  if (max_epochs < 1) errors.push_back("max_epochs must be >= 1");
  return errors;
}

EarlyStopResult early_stop_check(TrainState& state, double val_loss, std::size_t patience) {
  EarlyStopResult r;
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.epochs_since_best = 0;
    r.improved = true;
  } else {
    ++state.epochs_since_best;
  }
  r.decision = state.epochs_since_best > patience ? StopDecision::Stop : StopDecision::Continue;
  return r;
}

namespace {
template <typename T>
double clip_all(FusionParams<T>& grads, double max_norm) {
  std::vector<std::span<T>> spans;
  for (auto& t : grads.tensors()) spans.push_back(t.tensor->flat());
  return clip_gradients<T>(std::span<const std::span<T>>(spans), max_norm);
}
}  // namespace

double clip_gradients(FusionParams<float>& grads, double max_norm) { return clip_all(grads, max_norm); }
double clip_gradients(FusionParams<double>& grads, double max_norm) { return clip_all(grads, max_norm); }

void adam_step(FusionParams<float>& params, const FusionParams<float>& grads, TrainState& state,
               const AdamConfig& cfg) {
  auto p = params.tensors();
  auto g = grads.tensors();
  if (state.moments.empty())
    for (const auto& t : p) state.moments.emplace_back(t.tensor->size());
  for (std::size_t i = 0; i < p.size(); ++i)
    adam_step<float>(p[i].tensor->flat(), g[i].tensor->flat(), state.moments[i], cfg, state.step);
}

StreamEval evaluate_stream(const FusionModel<float>& model, const TokenStream& stream) {
  const std::size_t L = model.config().seq_len;
  StreamEval out;
  out.predictions.assign(stream.size(), PunctLabel::O);
  std::vector<EvalWindow> windows;
  if (stream.size() >= L) {
    windows = eval_windows(stream, L);
  } else {
    if (stream.size() < 2) throw StreamTooShort(stream.size(), 2);
    windows.push_back({0, 0, stream});
  }
  double loss_sum = 0.0;
  for (const auto& w : windows) {
    const auto trace = model.forward(w.sample.tokens, w.sample.pos_ids);
    auto include = loss_positions(model.config().loss_mask, w.sample.position_mask);
    for (std::size_t i = 0; i < w.first_fresh; ++i) include[i] = 0;
    loss_sum += FusionModel<float>::loss_sum(trace, w.sample.labels, include);
    for (auto v : include) out.loss_positions += v;
    const auto pred = trace.argmax();
    out.counts += confusion_counts(pred, w.sample.labels, w.sample.position_mask);
    for (std::size_t i = w.first_fresh; i < pred.size(); ++i) out.predictions[w.start + i] = pred[i];
  }
  out.loss = out.loss_positions == 0 ? 0.0 : loss_sum / static_cast<double>(out.loss_positions);
  return out;
}

std::string format_epoch_log(const EpochLog& log) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.2f\t%.2f\t%.3f", log.epoch, log.train_loss, log.val_loss,
                log.val_micro_f1, log.val_mean_f1, log.seconds);
  return buf;
}

std::vector<std::vector<std::size_t>> epoch_batches(const TrainConfig& cfg, std::size_t stream_len,
                                                    std::size_t seq_len, std::size_t epoch) {
  const SamplerConfig sc{seq_len, cfg.seed, epoch};
  const auto starts = epoch_window_starts(cfg.sampler, stream_len, sc);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i + cfg.batch_size <= starts.size(); i += cfg.batch_size)
    batches.emplace_back(starts.begin() + static_cast<std::ptrdiff_t>(i),
                         starts.begin() + static_cast<std::ptrdiff_t>(i + cfg.batch_size));
  return batches;
}

TrainResult train_run(const TrainConfig& cfg, FusionModel<float> model, const TokenStream& train_stream,
                      const TokenStream& valid_stream, const EpochCallback& on_epoch) {
  if (auto errors = cfg.validate(); !errors.empty()) {
    std::string msg = "invalid train config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
  const std::size_t L = model.config().seq_len;
  epoch_sample_count(train_stream.size(), L);  // throws StreamTooShort

  TrainResult result{model, std::numeric_limits<double>::infinity(), {}, {}};
  TrainState& state = result.state;
  using Clock = std::chrono::steady_clock;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    state.epoch = epoch;
    double loss_total = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : epoch_batches(cfg, train_stream.size(), L, epoch)) {
      ++state.step;
      FusionParams<float> grads = model.params().zeros_like();
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto sample = train_stream.slice(batch[k], L);
        const ForwardOptions opts{Mode::Train, counter_hash({cfg.seed, state.step, k})};
        const auto trace = model.forward(sample.tokens, sample.pos_ids, opts);
        const auto include = loss_positions(model.config().loss_mask, sample.position_mask);
        auto lg = model.loss_and_grads(trace, sample.labels, include);
        batch_loss += lg.loss;
        grads.add(lg.grads);
      }
      batch_loss /= static_cast<double>(batch.size());
      if (!std::isfinite(batch_loss))
        throw NumericFailure("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(state.step));
      grads.scale(1.0f / static_cast<float>(batch.size()));
      clip_gradients(grads, cfg.grad_clip_norm);
      adam_step(model.params(), grads, state, cfg.adam);
      loss_total += batch_loss;
      ++steps;
    }

    const StreamEval val = evaluate_stream(model, valid_stream);
    if (!std::isfinite(val.loss)) throw NumericFailure("non-finite validation loss at epoch " + std::to_string(epoch));
    const EvalReport report = make_report(val.counts);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = steps == 0 ? 0.0 : loss_total / static_cast<double>(steps);
    log.val_loss = val.loss;
    log.val_micro_f1 = report.micro_f1;
    log.val_mean_f1 = report.mean_f1;
    log.steps = steps;
    log.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result.log.push_back(log);

    const auto check = early_stop_check(state, val.loss, cfg.patience);
    if (check.improved) {
      result.best_model = model;
      result.best_val_loss = state.best_val_loss;
    }
    if (on_epoch && !on_epoch(log)) break;
    if (check.decision == StopDecision::Stop) break;
  }
  return result;
}

}  // namespace punc
