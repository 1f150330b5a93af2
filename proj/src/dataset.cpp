#include "heg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "heg/errors.hpp"
#include "heg/random.hpp"

namespace heg {

namespace fs = std::filesystem;
using nlohmann::json;

std::map<std::string, std::vector<std::string>> make_splits(const std::vector<std::string>& ids,
                                                            const SplitFractions& fractions,
                                                            std::uint64_t seed) {
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 ||
      fractions.train + fractions.val + fractions.test > 1.0 + 1e-9) {
    throw DomainError("split fractions must be non-negative and sum to at most 1");
  }
  std::vector<std::string> order = ids;
  std::sort(order.begin(), order.end());
  Rng rng(derive_seed(seed, 0x5917));
  rng.shuffle(std::span<std::string>(order));
  const auto n = static_cast<double>(order.size());
  const auto n_train = static_cast<std::size_t>(std::floor(n * fractions.train + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(n * fractions.val + 1e-9));
  std::map<std::string, std::vector<std::string>> out;
  out["train"].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out["val"].assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                    order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out["test"].assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

void write_dataset(const fs::path& dir, const std::vector<SynthVideo>& videos,
                   const SplitFractions& fractions, std::uint64_t split_seed) {
  fs::create_directories(dir / "features");
  std::vector<VideoSequence> seqs;
  std::vector<std::string> ids;
  for (const SynthVideo& v : videos) {
    seqs.push_back(v.video);
    ids.push_back(v.video.video_id);
    const fs::path feat = dir / "features" / (v.video.video_id + ".hegf");
    write_feature_file(feat, v.table.features);
    fs::path idx = feat;
    idx += ".idx";
    write_feature_index(idx, v.table);
  }
  write_annotations(dir / "annotations.jsonl", seqs);
  json splits = make_splits(ids, fractions, split_seed);
  std::ofstream out(dir / "splits.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "splits.json").string());
  out << splits.dump(2) << '\n';
}

std::vector<const TemporalBipartiteGraph*> Dataset::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw DataError("dataset has no split '" + name + "'");
  std::vector<const TemporalBipartiteGraph*> out;
  for (std::size_t i : it->second) out.push_back(&graphs[i]);
  return out;
}

std::vector<const TemporalBipartiteGraph*> Dataset::all() const {
  std::vector<const TemporalBipartiteGraph*> out;
  for (const auto& g : graphs) out.push_back(&g);
  return out;
}

namespace {

void finish_dataset(Dataset& ds, const std::map<std::string, std::vector<std::string>>& split_ids) {
  std::map<std::string, std::size_t> by_id;
  int max_label = -1;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const auto& g = ds.graphs[i];
    if (g.node_count() == 0) {
      throw DataError("video '" + g.video_id + "' has no detections on any sampled frame");
    }
    if (i == 0) {
      ds.feature_dim = g.feature_dim();
    } else if (g.feature_dim() != ds.feature_dim) {
      throw DataError("video '" + g.video_id + "' has feature width " + std::to_string(g.feature_dim()) +
                      ", expected " + std::to_string(ds.feature_dim));
    }
    if (g.label < 0) throw DataError("video '" + g.video_id + "' has a negative label");
    max_label = std::max(max_label, g.label);
    by_id[g.video_id] = i;
  }
  ds.num_classes = static_cast<std::size_t>(std::max(max_label + 1, 2));
  for (const auto& [name, ids] : split_ids) {
    auto& idx = ds.splits[name];
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError("split '" + name + "' names unknown video '" + id + "'");
      idx.push_back(it->second);
    }
  }
  std::vector<std::size_t> every(ds.graphs.size());
  for (std::size_t i = 0; i < every.size(); ++i) every[i] = i;
  ds.splits["all"] = std::move(every);
}

}  // namespace

Dataset load_dataset(const fs::path& dir, std::size_t stride, std::size_t expected_feature_dim) {
  const std::vector<VideoSequence> videos = read_annotations(dir / "annotations.jsonl");
  if (videos.empty()) throw DataError(dir.string() + ": annotations contain no videos");

  Dataset ds;
  std::vector<std::string> ids;
  for (const VideoSequence& v : videos) {
    const FeatureTable table = read_feature_table(dir / "features" / (v.video_id + ".hegf"));
    if (expected_feature_dim != 0 && table.features.cols() != expected_feature_dim) {
      throw DataError("video '" + v.video_id + "': feature width " + std::to_string(table.features.cols()) +
                      " does not match expected " + std::to_string(expected_feature_dim));
    }
    ds.graphs.push_back(build_graph(v, table.lookup(), stride));
    ids.push_back(v.video_id);
  }

  std::map<std::string, std::vector<std::string>> split_ids;
  const fs::path split_path = dir / "splits.json";
  if (fs::exists(split_path)) {
    std::ifstream in(split_path);
    try {
      split_ids = json::parse(in).get<std::map<std::string, std::vector<std::string>>>();
    } catch (const json::exception& e) {
      throw DataError(split_path.string() + ": " + e.what());
    }
  } else {
    split_ids = make_splits(ids, SplitFractions{}, 0);
  }
  finish_dataset(ds, split_ids);
  return ds;
}

Dataset dataset_from_videos(const std::vector<SynthVideo>& videos, std::size_t stride,
                            const std::map<std::string, std::vector<std::string>>& splits) {
  Dataset ds;
  for (const SynthVideo& v : videos) ds.graphs.push_back(build_graph(v.video, v.table.lookup(), stride));
  finish_dataset(ds, splits);
  return ds;
}

}  // namespace heg
