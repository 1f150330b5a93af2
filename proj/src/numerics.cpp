#include "heg/numerics.hpp"

#include <cmath>

#include "heg/errors.hpp"
#include "heg/random.hpp"

namespace heg {

Matrix xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw DomainError("xavier_init: rows and cols must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

AdamState AdamState::for_shape(const Matrix& param, const AdamHyper& hyper) {
  AdamState s;
  s.first_moment = Matrix(param.rows(), param.cols());
  s.second_moment = Matrix(param.rows(), param.cols());
  s.hyper = hyper;
  return s;
}

void adam_step_inplace(Matrix& param, const Matrix& grad, AdamState& state) {
  if (!param.same_shape(grad) || !param.same_shape(state.first_moment) ||
      !param.same_shape(state.second_moment)) {
    throw DimensionError("adam_step: param " + param.shape_string() + ", grad " +
                         grad.shape_string() + ", moments " + state.first_moment.shape_string() +
                         "/" + state.second_moment.shape_string());
  }
  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  auto p = param.values();
  auto g = grad.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] + h.weight_decay * p[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

AdamResult adam_step(const Matrix& param, const Matrix& grad, const AdamState& state) {
  AdamResult r{param, state};
  adam_step_inplace(r.param, grad, r.state);
  return r;
}

Matrix finite_diff_gradient(const ScalarFn& f, const Matrix& x, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_gradient: step must be positive");
  Matrix probe = x;
  Matrix grad(x.rows(), x.cols());
  auto pv = probe.values();
  auto gv = grad.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double orig = pv[i];
    pv[i] = orig + h;
    const double up = f(probe);
    pv[i] = orig - h;
    const double down = f(probe);
    pv[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_gradient: non-finite function value at entry " +
                         std::to_string(i));
    }
    gv[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace heg
