#include "heg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "heg/errors.hpp"
#include "heg/random.hpp"

namespace heg {

namespace {

constexpr std::uint32_t kFeatureVersion = 1;

}  // namespace

std::string_view to_string(SynthTask task) {
  switch (task) {
    case SynthTask::skew_coded: return "skew_coded";
    case SynthTask::variance_coded: return "variance_coded";
    case SynthTask::mean_coded: return "mean_coded";
  }
  return "?";
}

SynthTask parse_task(std::string_view name) {
  if (name == "skew_coded" || name == "skew") return SynthTask::skew_coded;
  if (name == "variance_coded" || name == "variance") return SynthTask::variance_coded;
  if (name == "mean_coded" || name == "mean") return SynthTask::mean_coded;
  throw DomainError("unknown synthetic task '" + std::string(name) + "'");
}

std::vector<double> class_value_set(SynthTask task, int label) {
  if (label != 0 && label != 1) throw DomainError("synthetic tasks have classes 0 and 1");
  switch (task) {
    case SynthTask::skew_coded:
      if (label == 0) return {-std::sqrt(2.0), std::sqrt(2.0)};
      return {-1.0, -1.0, 2.0};
    case SynthTask::variance_coded:
      if (label == 0) return {-1.0, 1.0};
      return {-2.0, 2.0};
    case SynthTask::mean_coded:
      if (label == 0) return {-1.0, 1.0};
      return {0.0, 2.0};
  }
  return {};
}

void SynthSpec::validate() const {
  if (num_videos == 0) throw DomainError("SynthSpec: num_videos must be >= 1");
  if (frames_per_video < 2) throw DomainError("SynthSpec: frames_per_video must be >= 2");
  if (feature_dim == 0) throw DomainError("SynthSpec: feature_dim must be >= 1");
  if (min_objects == 0 || min_objects > max_objects) {
    throw DomainError("SynthSpec: need 1 <= min_objects <= max_objects");
  }
  if (!(fps > 0.0) || !(frame_width > 0.0) || !(frame_height > 0.0)) {
    throw DomainError("SynthSpec: fps and frame size must be positive");
  }
}

FeatureLookup FeatureTable::lookup() const {
  return [this](std::size_t frame, ObjectId object) -> std::optional<std::span<const double>> {
    auto it = index.find({frame, object});
    if (it == index.end() || it->second >= features.rows()) return std::nullopt;
    return features.row(it->second);
  };
}

std::vector<SynthVideo> generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<SynthVideo> out;
  out.reserve(spec.num_videos);
  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    // One stream per video so videos are independent of generation order.
    Rng rng(derive_seed(spec.seed, v));
    SynthVideo sv;
    VideoSequence& seq = sv.video;
    char id[32];
    std::snprintf(id, sizeof id, "synth%05zu", v);
    seq.video_id = id;
    seq.fps = spec.fps;
    seq.frame_count = spec.frames_per_video;
    seq.frame_width = spec.frame_width;
    seq.frame_height = spec.frame_height;
    seq.label = static_cast<int>(v % 2);

    const std::vector<double> values = class_value_set(spec.task, seq.label);
    const std::size_t pool = spec.max_objects + 2;
    struct Track {
      double cx, cy, w, h, vx, vy;
    };
    std::vector<Track> tracks(pool);
    for (Track& t : tracks) {
      t.w = rng.uniform(30.0, 200.0);
      t.h = rng.uniform(30.0, 200.0);
      t.cx = rng.uniform(t.w, spec.frame_width - t.w);
      t.cy = rng.uniform(t.h, spec.frame_height - t.h);
      t.vx = rng.uniform(-3.0, 3.0);
      t.vy = rng.uniform(-2.0, 2.0);
    }

    std::vector<double> rows;
    std::vector<std::size_t> ids(pool);
    for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
      const auto count = static_cast<std::size_t>(
          rng.between(static_cast<std::int64_t>(spec.min_objects), static_cast<std::int64_t>(spec.max_objects)));
      std::iota(ids.begin(), ids.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(ids));
      std::vector<std::size_t> visible(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count));
      std::sort(visible.begin(), visible.end());
      for (std::size_t obj : visible) {
        const Track& t = tracks[obj];
        Detection d;
        d.frame_index = f;
        d.object_id = static_cast<ObjectId>(obj);
        const double cx = std::clamp(t.cx + t.vx * static_cast<double>(f), t.w / 2, spec.frame_width - t.w / 2);
        const double cy = std::clamp(t.cy + t.vy * static_cast<double>(f), t.h / 2, spec.frame_height - t.h / 2);
        d.box = Box{cx, cy, t.w, t.h};
        d.agent_class = obj % 2 == 0 ? "Car" : "Ped";
        seq.detections.push_back(d);
        sv.table.index[{f, d.object_id}] = rows.size() / spec.feature_dim;
        // Stored as float32 on disk; round here so in-memory and on-disk
        // datasets are identical.
        for (std::size_t j = 0; j < spec.feature_dim; ++j) {
          rows.push_back(static_cast<float>(values[rng.below(values.size())]));
        }
      }
    }
    const std::size_t row_count = rows.size() / spec.feature_dim;
    sv.table.features = Matrix(row_count, spec.feature_dim, std::move(rows));
    out.push_back(std::move(sv));
  }
  return out;
}

void write_feature_file(const std::filesystem::path& path, const Matrix& features) {
  if (!features.all_finite()) throw NumericError("write_feature_file: non-finite value for " + path.string());
  io::Writer w;
  w.magic("HEGF");
  w.u32(kFeatureVersion);
  w.u64(features.rows());
  w.u64(features.cols());
  for (double v : features.values()) w.f32(static_cast<float>(v));
  w.save(path);
}

Matrix read_feature_file(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path);
  r.expect_magic("HEGF");
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion) r.fail("unsupported HEGF version " + std::to_string(version));
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  r.require(rows * cols * 4, "feature payload");
  std::vector<double> data(rows * cols);
  for (double& v : data) v = static_cast<double>(r.f32());
  r.expect_end();
  return Matrix(rows, cols, std::move(data));
}

void write_feature_index(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature index " + path.string());
  // Sorted by row so the sidecar reads top to bottom like the feature file.
  std::vector<std::pair<std::size_t, std::pair<std::size_t, ObjectId>>> by_row;
  for (const auto& [key, row] : table.index) by_row.push_back({row, key});
  std::sort(by_row.begin(), by_row.end());
  out << "HEGI 1\n";
  for (const auto& [row, key] : by_row) out << key.first << ' ' << key.second << ' ' << row << '\n';
}

std::map<std::pair<std::size_t, ObjectId>, std::size_t> read_feature_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature index " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "HEGI 1") {
    throw DataError(path.string() + ": bad index header, expected 'HEGI 1'");
  }
  std::map<std::pair<std::size_t, ObjectId>, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t frame = 0, row = 0;
    ObjectId object = 0;
    if (!(ls >> frame >> object >> row)) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": expected 'frame object row'");
    }
    if (!index.emplace(std::make_pair(frame, object), row).second) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": duplicate (frame " +
                      std::to_string(frame) + ", object " + std::to_string(object) + ")");
    }
  }
  return index;
}

FeatureTable read_feature_table(const std::filesystem::path& feature_path) {
  FeatureTable t;
  t.features = read_feature_file(feature_path);
  std::filesystem::path idx = feature_path;
  idx += ".idx";
  t.index = read_feature_index(idx);
  for (const auto& [key, row] : t.index) {
    if (row >= t.features.rows()) {
      throw DataError(idx.string() + ": row " + std::to_string(row) + " beyond " +
                      std::to_string(t.features.rows()) + " feature rows");
    }
  }
  return t;
}

}  // namespace heg
