// Small builders shared by the test programs.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "heg/graph.hpp"
#include "heg/random.hpp"
#include "heg/synth.hpp"

namespace fixture {

// A video whose sampled frames (stride 5) hold the given object counts, with
// normal-distributed features of width f.
inline heg::SynthVideo video_with_partitions(const std::vector<std::size_t>& sizes, std::size_t f,
                                             std::uint64_t seed, int label = 0) {
  constexpr std::size_t kStride = 5;
  heg::Rng rng(seed);
  heg::SynthVideo out;
  heg::VideoSequence& seq = out.video;
  seq.video_id = "fixture" + std::to_string(seed);
  seq.frame_count = sizes.empty() ? 1 : sizes.size() * kStride;
  seq.frame_width = 640;
  seq.frame_height = 480;
  seq.label = label;
  std::vector<double> rows;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    for (std::size_t k = 0; k < sizes[i]; ++k) {
      heg::Detection d;
      d.frame_index = i * kStride;
      d.object_id = static_cast<heg::ObjectId>(k + 1);
      d.box = heg::Box{100.0 + 20.0 * static_cast<double>(k), 100.0, 30.0, 40.0};
      seq.detections.push_back(d);
      out.table.index[{d.frame_index, d.object_id}] = rows.size() / f;
      for (std::size_t j = 0; j < f; ++j) rows.push_back(rng.normal());
    }
  }
  const std::size_t n = rows.size() / f;
  out.table.features = heg::Matrix(n, f, std::move(rows));
  return out;
}

inline heg::TemporalBipartiteGraph graph_with_partitions(const std::vector<std::size_t>& sizes, std::size_t f,
                                                         std::uint64_t seed, int label = 0) {
  const heg::SynthVideo v = video_with_partitions(sizes, f, seed, label);
  return heg::build_graph(v.video, v.table.lookup(), 5);
}

inline heg::Matrix random_matrix(std::size_t rows, std::size_t cols, heg::Rng& rng) {
  heg::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

// Fresh empty directory under the build tree's temp area.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("heg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
