#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "heg/graph.hpp"
#include "heg/synth.hpp"

namespace heg {

// Fractions of videos assigned to train / val / test.
struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

// Seeded shuffle of the ids, cut by the fractions (rounded down for train
// and val, remainder to test).
std::map<std::string, std::vector<std::string>> make_splits(const std::vector<std::string>& ids,
                                                            const SplitFractions& fractions,
                                                            std::uint64_t seed);

// Dataset directory layout:
//   annotations.jsonl
//   features/<video_id>.hegf  (+ .hegf.idx)
//   splits.json
void write_dataset(const std::filesystem::path& dir, const std::vector<SynthVideo>& videos,
                   const SplitFractions& fractions, std::uint64_t split_seed);

struct Dataset {
  std::vector<TemporalBipartiteGraph> graphs;
  std::map<std::string, std::vector<std::size_t>> splits;  // split name -> graph indices
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;

  std::vector<const TemporalBipartiteGraph*> split(const std::string& name) const;
  std::vector<const TemporalBipartiteGraph*> all() const;
};

// Reads annotations and feature files and builds one graph per video.
// Videos without nodes on any sampled frame are rejected. When
// expected_feature_dim is nonzero every feature file must match it.
Dataset load_dataset(const std::filesystem::path& dir, std::size_t stride,
                     std::size_t expected_feature_dim = 0);

// Builds a dataset from in-memory synthetic videos, same rules as load_dataset.
Dataset dataset_from_videos(const std::vector<SynthVideo>& videos, std::size_t stride,
                            const std::map<std::string, std::vector<std::string>>& splits);

}  // namespace heg
