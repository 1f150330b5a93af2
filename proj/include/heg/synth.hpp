#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "heg/graph.hpp"
#include "heg/matrix.hpp"
#include "heg/scene.hpp"

namespace heg {

// Two-class tasks whose signal lives in one statistic of the node features.
//   skew_coded:     class 0 draws each feature from {-sqrt2, +sqrt2},
//                   class 1 from {-1, -1, +2}; equal mean and variance,
//                   third central moment 0 vs 2.
//   variance_coded: {-1, +1} vs {-2, +2}.
//   mean_coded:     {-1, +1} vs {0, +2}.
enum class SynthTask { skew_coded, variance_coded, mean_coded };

std::string_view to_string(SynthTask task);
SynthTask parse_task(std::string_view name);

// Support of the per-feature value distribution (uniform over the list,
// repeats allowed) for a task and class.
std::vector<double> class_value_set(SynthTask task, int label);

struct SynthSpec {
  std::size_t num_videos = 250;
  std::size_t frames_per_video = 40;
  std::size_t min_objects = 2;
  std::size_t max_objects = 4;
  std::size_t feature_dim = 8;
  SynthTask task = SynthTask::skew_coded;
  std::uint64_t seed = 0;
  double fps = 30.0;
  double frame_width = 1280.0;
  double frame_height = 960.0;

  void validate() const;
};

// Feature rows keyed by (frame_index, object_id).
struct FeatureTable {
  Matrix features;
  std::map<std::pair<std::size_t, ObjectId>, std::size_t> index;

  FeatureLookup lookup() const;
};

struct SynthVideo {
  VideoSequence video;
  FeatureTable table;
};

std::vector<SynthVideo> generate(const SynthSpec& spec);

// HEGF: "HEGF", u32 version, u64 rows, u64 cols, row-major little-endian
// float32. Values are rounded to float32 on write.
void write_feature_file(const std::filesystem::path& path, const Matrix& features);
Matrix read_feature_file(const std::filesystem::path& path);

// Text sidecar "HEGI 1" followed by "frame_index object_id row" lines.
void write_feature_index(const std::filesystem::path& path, const FeatureTable& table);
std::map<std::pair<std::size_t, ObjectId>, std::size_t> read_feature_index(const std::filesystem::path& path);

FeatureTable read_feature_table(const std::filesystem::path& feature_path);

}  // namespace heg
