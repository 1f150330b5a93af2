#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "heg/matrix.hpp"

namespace heg {

enum class PoolingMode { attention, mean, sum, max };

inline constexpr PoolingMode kAllPoolingModes[] = {PoolingMode::attention, PoolingMode::mean,
                                                   PoolingMode::sum, PoolingMode::max};

std::string_view to_string(PoolingMode mode);
PoolingMode parse_pooling(std::string_view name);

// Graph readout followed by a linear classifier. In attention mode every
// feature column gets its own softmax over the graph's nodes:
//   G = softmax_nodes(X W_gate + b_gate),  pooled = sum_nodes G (.) X.
// Gate parameters are carried but unused by the baseline modes.
struct PoolingHead {
  PoolingMode mode = PoolingMode::attention;
  Matrix w_gate;  // F x F
  Matrix b_gate;  // 1 x F
  Matrix w_cls;   // F x C
  Matrix b_cls;   // 1 x C

  static PoolingHead create(std::size_t feature_dim, std::size_t num_classes, PoolingMode mode,
                            std::uint64_t seed);

  std::size_t feature_dim() const { return w_gate.rows(); }
  std::size_t num_classes() const { return w_cls.cols(); }
};

struct PoolTrace {
  PoolingMode mode = PoolingMode::attention;
  Matrix input;                                   // N x F
  std::vector<std::vector<std::size_t>> members;  // node indices per graph, ascending
  Matrix gates;                                   // N x F, attention only
  std::vector<std::size_t> argmax;                // graphs x F, max only
};

struct PoolResult {
  Matrix pooled;  // graphs x F
  PoolTrace trace;
};

// membership[p] is the graph index of node p; graph indices must cover
// 0..max with at least one node each.
PoolResult pool(const PoolingHead& head, const Matrix& embeddings,
                std::span<const std::size_t> membership);

struct PoolGrads {
  Matrix grad_input;
  Matrix w_gate;
  Matrix b_gate;
};

PoolGrads pool_backward(const PoolingHead& head, const PoolTrace& trace, const Matrix& grad_pooled);

Matrix class_logits(const PoolingHead& head, const Matrix& pooled);
// softmax(pooled W_cls + b_cls), one row per graph.
Matrix classify(const PoolingHead& head, const Matrix& pooled);

struct LossResult {
  double loss = 0.0;
  Matrix probs;
  Matrix grad_logits;  // (probs - onehot) / batch
};

// Mean negative log-likelihood, computed from logits through log-sum-exp.
LossResult cross_entropy_loss(const Matrix& logits, std::span<const int> labels);

struct HeadGrads {
  Matrix grad_pooled;
  Matrix w_cls;
  Matrix b_cls;
};

HeadGrads head_backward(const PoolingHead& head, const Matrix& pooled, const Matrix& grad_logits);

}  // namespace heg
