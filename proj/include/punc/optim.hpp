#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace punc {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment buffers for one parameter tensor.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update of one tensor at step t (t >= 1).
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamMoments& moments,
               const AdamConfig& cfg, std::size_t t) {
  if (t == 0) throw std::invalid_argument("adam_step: t must be >= 1");
  if (params.size() != grads.size() || moments.m.size() != params.size())
    throw std::invalid_argument("adam_step: buffer sizes differ");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = moments.m[i];
    double& v = moments.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] = static_cast<T>(params[i] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

/// l2 norm over every tensor, accumulated in double.
template <typename T>
double global_norm(std::span<const std::span<T>> tensors) {
  double sq = 0.0;
  for (const auto& t : tensors)
    for (T v : t) sq += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sq);
}

/// Scales every gradient by max_norm / g when the global norm g exceeds
/// max_norm. Returns the pre-clip norm.
template <typename T>
double clip_gradients(std::span<const std::span<T>> tensors, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be > 0");
  const double norm = global_norm(tensors);
  if (!std::isfinite(norm)) throw NonFiniteGradient("gradient norm is not finite");
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& t : tensors)
      for (T& v : t) v = static_cast<T>(v * factor);
  }
  return norm;
}

}  // namespace punc
