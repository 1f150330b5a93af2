#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "heg/aggregators.hpp"
#include "heg/graph.hpp"
#include "heg/matrix.hpp"

namespace heg {

enum class Activation { relu, none };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// x'_p = x_p W_root + Psi(X[N(p)]) W_neigh + b_neigh, then the activation.
// For a node without neighbors the whole neighbor term, bias included, is
// dropped. Psi is the multi-aggregator projecting to the input width.
struct HegLayer {
  Matrix w_root;   // F x F'
  Matrix w_neigh;  // F_a x F'
  Matrix b_neigh;  // 1 x F'
  MultiAggregator aggregator;
  Activation activation = Activation::none;

  static HegLayer create(std::size_t input_dim, std::size_t output_dim,
                         std::vector<AggregatorKind> kinds, double std_epsilon,
                         Activation activation, std::uint64_t seed);

  std::size_t input_dim() const { return w_root.rows(); }
  std::size_t output_dim() const { return w_root.cols(); }
  void check() const;
};

struct LayerTrace {
  const HegLayer* layer = nullptr;
  Adjacency adjacency;
  Matrix input;                         // N x F
  Matrix concat;                        // N x K*F, zero rows for isolated nodes
  Matrix aggregated;                    // N x F_a, Psi output
  Matrix output;                        // N x F', after activation
  std::vector<ReductionTrace> reductions;
  std::vector<char> has_neighbors;
};

struct LayerForward {
  Matrix output;
  LayerTrace trace;
};

LayerForward layer_forward(const HegLayer& layer, const Adjacency& adjacency, const Matrix& x);

struct LayerGrads {
  Matrix w_root;
  Matrix w_neigh;
  Matrix b_neigh;
  Matrix w_proj;
  Matrix b_proj;
};

struct LayerBackward {
  Matrix grad_input;
  LayerGrads grads;
};

LayerBackward layer_backward(const HegLayer& layer, const LayerTrace& trace, const Matrix& grad_output);

// Two stacked layers. With compression the hidden width is floor(F/2).
struct HegModel {
  HegLayer layer1;
  HegLayer layer2;
  bool compression_enabled = true;

  static HegModel create(std::size_t feature_dim, std::vector<AggregatorKind> kinds, double std_epsilon,
                         bool compression, Activation hidden_activation, std::uint64_t seed);

  std::size_t input_dim() const { return layer1.input_dim(); }
  std::size_t hidden_dim() const { return layer1.output_dim(); }
  std::size_t output_dim() const { return layer2.output_dim(); }
};

std::size_t hidden_width(std::size_t feature_dim, bool compression);

struct ModelForward {
  Matrix embeddings;
  LayerTrace trace1;
  LayerTrace trace2;
};

ModelForward model_forward(const HegModel& model, const Adjacency& adjacency, const Matrix& x);

struct ModelBackward {
  Matrix grad_input;
  LayerGrads layer1;
  LayerGrads layer2;
};

ModelBackward model_backward(const HegModel& model, const ModelForward& fwd, const Matrix& grad_embeddings);

}  // namespace heg
