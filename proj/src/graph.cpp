#include "heg/graph.hpp"

#include <algorithm>

#include "binary_io.hpp"
#include "heg/errors.hpp"

namespace heg {

namespace {

constexpr std::uint32_t kGraphVersion = 1;

}  // namespace

Adjacency::Adjacency(std::size_t node_count, std::span<const Edge> edges)
    : offsets_(node_count + 1, 0), sources_(edges.size()) {
  for (const Edge& e : edges) {
    if (e.src >= node_count || e.dst >= node_count) {
      throw DomainError("Adjacency: edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                        ") out of range for " + std::to_string(node_count) + " nodes");
    }
    ++offsets_[e.dst + 1];
  }
  for (std::size_t p = 0; p < node_count; ++p) offsets_[p + 1] += offsets_[p];
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges) sources_[cursor[e.dst]++] = e.src;
}

TemporalBipartiteGraph build_graph(const VideoSequence& seq, const FeatureLookup& lookup,
                                   std::size_t stride) {
  const std::vector<std::size_t> frames = sample_frames(seq, stride);

  TemporalBipartiteGraph g;
  g.video_id = seq.video_id;
  g.label = seq.label;
  g.partition_frames = frames;
  g.partitions.resize(frames.size());

  std::vector<double> rows;
  std::size_t feature_dim = 0;
  for (std::size_t pos = 0; pos < frames.size(); ++pos) {
    std::vector<const Detection*> dets = seq.detections_at(frames[pos]);
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection* a, const Detection* b) { return a->object_id < b->object_id; });
    for (std::size_t i = 1; i < dets.size(); ++i) {
      if (dets[i]->object_id == dets[i - 1]->object_id) {
        throw DataError("build_graph: video '" + seq.video_id + "' has duplicate object " +
                        std::to_string(dets[i]->object_id) + " in frame " +
                        std::to_string(frames[pos]));
      }
    }
    for (const Detection* d : dets) {
      const auto row = lookup(d->frame_index, d->object_id);
      if (!row) {
        throw DataError("build_graph: video '" + seq.video_id + "' has no feature row for (frame " +
                        std::to_string(d->frame_index) + ", object " + std::to_string(d->object_id) +
                        ")");
      }
      if (g.origins.empty()) {
        feature_dim = row->size();
      } else if (row->size() != feature_dim) {
        throw DimensionError("build_graph: feature row for (frame " + std::to_string(d->frame_index) +
                             ", object " + std::to_string(d->object_id) + ") has width " +
                             std::to_string(row->size()) + ", expected " +
                             std::to_string(feature_dim));
      }
      g.partitions[pos].push_back(g.origins.size());
      g.origins.push_back(NodeOrigin{pos, d->frame_index, d->object_id});
      rows.insert(rows.end(), row->begin(), row->end());
    }
  }
  g.features = Matrix(g.origins.size(), feature_dim, std::move(rows));

  for (std::size_t pos = 0; pos + 1 < g.partitions.size(); ++pos) {
    for (std::size_t a : g.partitions[pos]) {
      for (std::size_t b : g.partitions[pos + 1]) {
        g.edges.push_back({a, b});
        g.edges.push_back({b, a});
      }
    }
  }
  return g;
}

std::vector<std::size_t> neighbors(const TemporalBipartiteGraph& g, std::size_t p) {
  if (p >= g.node_count()) {
    throw DomainError("neighbors: node " + std::to_string(p) + " out of range (" +
                      std::to_string(g.node_count()) + " nodes)");
  }
  std::vector<std::size_t> out;
  for (const Edge& e : g.edges)
    if (e.dst == p) out.push_back(e.src);
  return out;
}

GraphBatch batch_graphs(std::span<const TemporalBipartiteGraph* const> graphs) {
  if (graphs.empty()) throw DomainError("batch_graphs: empty input");
  const std::size_t feature_dim = graphs.front()->feature_dim();

  GraphBatch batch;
  std::size_t total_nodes = 0;
  for (const auto* g : graphs) {
    if (g->node_count() > 0 && g->feature_dim() != feature_dim) {
      throw DimensionError("batch_graphs: feature width " + std::to_string(g->feature_dim()) +
                           " of graph '" + g->video_id + "' differs from " +
                           std::to_string(feature_dim));
    }
    total_nodes += g->node_count();
  }

  TemporalBipartiteGraph& m = batch.merged;
  m.video_id = "batch";
  std::vector<double> rows;
  rows.reserve(total_nodes * feature_dim);
  batch.node_offsets.push_back(0);
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const TemporalBipartiteGraph& g = *graphs[k];
    const std::size_t offset = m.origins.size();
    const std::size_t partition_offset = m.partitions.size();
    auto vals = g.features.values();
    rows.insert(rows.end(), vals.begin(), vals.end());
    for (NodeOrigin o : g.origins) {
      o.frame_position += partition_offset;
      m.origins.push_back(o);
      batch.membership.push_back(k);
    }
    for (const Edge& e : g.edges) m.edges.push_back({e.src + offset, e.dst + offset});
    for (std::size_t pos = 0; pos < g.partitions.size(); ++pos) {
      std::vector<std::size_t> part = g.partitions[pos];
      for (auto& n : part) n += offset;
      m.partitions.push_back(std::move(part));
      m.partition_frames.push_back(g.partition_frames[pos]);
    }
    batch.labels.push_back(g.label);
    batch.node_offsets.push_back(m.origins.size());
  }
  m.features = Matrix(total_nodes, feature_dim, std::move(rows));
  m.label = batch.labels.front();
  return batch;
}

GraphBatch batch_graphs(std::span<const TemporalBipartiteGraph> graphs) {
  std::vector<const TemporalBipartiteGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  return batch_graphs(std::span<const TemporalBipartiteGraph* const>(ptrs));
}

std::size_t expected_edge_count(std::span<const std::size_t> partition_sizes) {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < partition_sizes.size(); ++i)
    total += partition_sizes[i] * partition_sizes[i + 1];
  return 2 * total;
}

GraphStats count_stats(const TemporalBipartiteGraph& g) {
  GraphStats s;
  s.node_count = g.node_count();
  s.directed_edge_count = g.edges.size();
  if (!g.partitions.empty()) {
    s.mean_objects_per_frame =
        static_cast<double>(s.node_count) / static_cast<double>(g.partitions.size());
  }
  return s;
}

void write_graph(const std::filesystem::path& path, const TemporalBipartiteGraph& g) {
  io::Writer w;
  w.magic("HEGG");
  w.u32(kGraphVersion);
  w.u64(g.node_count());
  w.u64(g.feature_dim());
  w.u64(g.edges.size());
  w.u64(g.partitions.size());
  w.i64(g.label);
  w.str(g.video_id);
  for (double v : g.features.values()) w.f64(v);
  for (const NodeOrigin& o : g.origins) {
    w.u64(o.frame_position);
    w.u64(o.frame_index);
    w.i64(o.object_id);
  }
  for (const Edge& e : g.edges) {
    w.u64(e.src);
    w.u64(e.dst);
  }
  for (std::size_t pos = 0; pos < g.partitions.size(); ++pos) {
    w.u64(g.partition_frames[pos]);
    w.u64(g.partitions[pos].size());
    for (std::size_t n : g.partitions[pos]) w.u64(n);
  }
  w.save(path);
}

TemporalBipartiteGraph read_graph(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path);
  r.expect_magic("HEGG");
  const std::uint32_t version = r.u32();
  if (version != kGraphVersion) r.fail("unsupported HEGG version " + std::to_string(version));
  const std::uint64_t nodes = r.u64();
  const std::uint64_t dim = r.u64();
  const std::uint64_t edges = r.u64();
  const std::uint64_t parts = r.u64();

  TemporalBipartiteGraph g;
  g.label = static_cast<int>(r.i64());
  g.video_id = r.str();
  r.require(nodes * dim * 8, "feature matrix");
  std::vector<double> vals(nodes * dim);
  for (double& v : vals) v = r.f64();
  g.features = Matrix(nodes, dim, std::move(vals));
  r.require(nodes * 24, "node origins");
  for (std::uint64_t i = 0; i < nodes; ++i) {
    NodeOrigin o;
    o.frame_position = r.u64();
    o.frame_index = r.u64();
    o.object_id = r.i64();
    if (o.frame_position >= parts) r.fail("node frame position out of range");
    g.origins.push_back(o);
  }
  r.require(edges * 16, "edge list");
  for (std::uint64_t i = 0; i < edges; ++i) {
    Edge e{r.u64(), r.u64()};
    if (e.src >= nodes || e.dst >= nodes) r.fail("edge endpoint out of range");
    g.edges.push_back(e);
  }
  for (std::uint64_t pos = 0; pos < parts; ++pos) {
    g.partition_frames.push_back(r.u64());
    const std::uint64_t n = r.u64();
    r.require(n * 8, "partition");
    std::vector<std::size_t> part(n);
    for (auto& idx : part) {
      idx = r.u64();
      if (idx >= nodes) r.fail("partition node out of range");
    }
    g.partitions.push_back(std::move(part));
  }
  r.expect_end();
  return g;
}

}  // namespace heg
