#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "heg/graph.hpp"

namespace heg {

struct GradCheckEntry {
  std::string component;
  double max_relative_error = 0.0;
  std::size_t entries = 0;  // number of scalars compared
};

struct GradCheckOptions {
  std::uint64_t seed = 7;
  std::size_t feature_dim = 8;
  std::size_t num_classes = 3;
  double step = 1e-5;
  // Entries where both gradients are below this magnitude are compared
  // absolutely; this keeps round-off on near-zero gradients from
  // dominating the relative figure.
  double floor = 1e-6;
};

// The 6-node graph the check runs on: three sampled frames with two
// objects each, features drawn from a seeded normal.
TemporalBipartiteGraph gradcheck_graph(std::uint64_t seed, std::size_t feature_dim);

// Compares every analytic gradient of the full network (each aggregator
// alone, both HEG layers, attention gate, classifier, loss, input) against
// central finite differences.
std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& options = {});

}  // namespace heg
