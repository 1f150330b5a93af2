#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "heg/graph.hpp"
#include "heg/layer.hpp"
#include "heg/pooling.hpp"

namespace heg {

struct NetworkConfig {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 2;
  std::vector<AggregatorKind> kinds{std::begin(kAllAggregators), std::end(kAllAggregators)};
  double std_epsilon = 1e-5;
  bool compression = true;
  PoolingMode pooling = PoolingMode::attention;
  Activation hidden_activation = Activation::relu;
  std::uint64_t seed = 0;

  bool operator==(const NetworkConfig&) const = default;
};

struct ParamRef {
  std::string name;
  std::reference_wrapper<Matrix> value;
  bool decay;  // weight matrices decay, biases do not
};

// Two HEG layers, graph readout and classifier.
struct HegNetwork {
  NetworkConfig config;
  HegModel model;
  PoolingHead head;

  static HegNetwork create(const NetworkConfig& config);

  // Fixed order shared by gradients, optimizer state and checkpoints.
  std::vector<ParamRef> parameters();
  std::vector<std::pair<std::string, std::reference_wrapper<const Matrix>>> parameters() const;
  std::vector<Matrix> zero_gradients() const;
};

struct NetworkForward {
  ModelForward model;
  PoolResult pool;
  Matrix logits;
  Matrix probs;
};

NetworkForward network_forward(const HegNetwork& net, const Adjacency& adjacency, const Matrix& features,
                               std::span<const std::size_t> membership);

// Class probabilities, one row per graph of the batch.
Matrix predict(const HegNetwork& net, const GraphBatch& batch);
Matrix predict(const HegNetwork& net, const TemporalBipartiteGraph& graph);

struct LossAndGradients {
  double loss = 0.0;
  std::vector<double> per_graph_loss;
  std::vector<Matrix> gradients;  // parameters() order
  Matrix probs;
};

// Mean cross-entropy over the graphs of the batch, one forward/backward pass.
LossAndGradients batch_loss_and_gradients(const HegNetwork& net, const GraphBatch& batch);

// Same quantity computed one graph at a time, optionally on several threads.
// Per-graph gradients are summed in graph order, so the result does not
// depend on the thread count.
LossAndGradients loss_and_gradients(const HegNetwork& net,
                                    std::span<const TemporalBipartiteGraph* const> graphs,
                                    unsigned threads = 1);

// Runs fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// Checkpoint ("HEGC"): metadata JSON plus every parameter matrix, layout in
// docs/formats.md. Loading rejects any shape or name mismatch.
void save_checkpoint(const std::filesystem::path& path, const HegNetwork& net);
HegNetwork load_checkpoint(const std::filesystem::path& path);
std::string network_config_json(const NetworkConfig& config);

}  // namespace heg
