#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heg/matrix.hpp"
#include "heg/scene.hpp"

namespace heg {

struct NodeOrigin {
  std::size_t frame_position = 0;  // index of the sampled frame
  std::size_t frame_index = 0;     // video frame number
  ObjectId object_id = 0;

  bool operator==(const NodeOrigin&) const = default;
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;

  bool operator==(const Edge&) const = default;
};

// Incoming-neighbor lists in compressed row form: sources of the edges that
// end at node p, in edge-list order.
class Adjacency {
 public:
  Adjacency() = default;
  Adjacency(std::size_t node_count, std::span<const Edge> edges);

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::span<const std::size_t> incoming(std::size_t p) const {
    return {sources_.data() + offsets_[p], offsets_[p + 1] - offsets_[p]};
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> sources_;
};

// Nodes are (sampled frame, object) pairs. Directed edges run both ways
// between every node of sampled frame i and every node of sampled frame i+1.
// Objects are not linked by identity, and an empty sampled frame breaks the
// chain.
struct TemporalBipartiteGraph {
  std::string video_id;
  Matrix features;                  // node_count x F
  std::vector<NodeOrigin> origins;  // per node
  std::vector<Edge> edges;
  std::vector<std::size_t> partition_frames;          // video frame of each sampled position
  std::vector<std::vector<std::size_t>> partitions;   // node indices per sampled position
  int label = 0;

  std::size_t node_count() const { return origins.size(); }
  std::size_t feature_dim() const { return features.cols(); }
  Adjacency adjacency() const { return Adjacency(node_count(), edges); }
};

using FeatureLookup =
    std::function<std::optional<std::span<const double>>(std::size_t frame_index, ObjectId object_id)>;

TemporalBipartiteGraph build_graph(const VideoSequence& seq, const FeatureLookup& lookup,
                                   std::size_t stride);

// All q with an edge (q, p).
std::vector<std::size_t> neighbors(const TemporalBipartiteGraph& g, std::size_t p);

struct GraphBatch {
  TemporalBipartiteGraph merged;
  std::vector<std::size_t> membership;    // per node graph index
  std::vector<std::size_t> node_offsets;  // graph k owns [node_offsets[k], node_offsets[k+1])
  std::vector<int> labels;

  std::size_t graph_count() const { return labels.size(); }
};

GraphBatch batch_graphs(std::span<const TemporalBipartiteGraph> graphs);
GraphBatch batch_graphs(std::span<const TemporalBipartiteGraph* const> graphs);

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t directed_edge_count = 0;
  double mean_objects_per_frame = 0.0;
};

GraphStats count_stats(const TemporalBipartiteGraph& g);

// 2 * sum_i |X_i| |X_{i+1}|.
std::size_t expected_edge_count(std::span<const std::size_t> partition_sizes);

// HEGG binary cache. Layout in docs/formats.md.
void write_graph(const std::filesystem::path& path, const TemporalBipartiteGraph& g);
TemporalBipartiteGraph read_graph(const std::filesystem::path& path);

}  // namespace heg
