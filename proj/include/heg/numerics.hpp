#pragma once

#include <cstdint>
#include <functional>

#include "heg/matrix.hpp"

namespace heg {

// Glorot/Xavier uniform: entries in [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
Matrix xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coupled L2: added to the gradient before the moment updates.
  double weight_decay = 0.0;
};

struct AdamState {
  std::uint64_t step = 0;
  Matrix first_moment;
  Matrix second_moment;
  AdamHyper hyper;

  static AdamState for_shape(const Matrix& param, const AdamHyper& hyper);
};

struct AdamResult {
  Matrix param;
  AdamState state;
};

// One bias-corrected Adam update. The effective gradient is
// grad + weight_decay * param.
AdamResult adam_step(const Matrix& param, const Matrix& grad, const AdamState& state);
// Same update applied in place; the training loop uses this form.
void adam_step_inplace(Matrix& param, const Matrix& grad, AdamState& state);

using ScalarFn = std::function<double(const Matrix&)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
Matrix finite_diff_gradient(const ScalarFn& f, const Matrix& x, double h = 1e-5);

}  // namespace heg
