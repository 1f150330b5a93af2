#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "heg/errors.hpp"
#include "heg/graph.hpp"

using fixture::graph_with_partitions;

namespace {

std::set<std::pair<std::size_t, std::size_t>> edge_set(const heg::TemporalBipartiteGraph& g) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (const auto& e : g.edges) s.insert({e.src, e.dst});
  return s;
}

}  // namespace

TEST_CASE("edge counts from the construction rule") {
  auto g = graph_with_partitions({2, 1}, 4, 1);
  CHECK(g.node_count() == 3);
  CHECK(g.edges.size() == 4);
  // Nodes a, b in frame 0, c in frame 1.
  CHECK(edge_set(g) == std::set<std::pair<std::size_t, std::size_t>>{{0, 2}, {2, 0}, {1, 2}, {2, 1}});

  g = graph_with_partitions({2, 3, 1}, 4, 2);
  CHECK(g.node_count() == 6);
  CHECK(g.edges.size() == 18);
  const auto stats = heg::count_stats(g);
  CHECK(stats.node_count == 6);
  CHECK(stats.directed_edge_count == 18);
  CHECK(stats.mean_objects_per_frame == 2.0);

  g = graph_with_partitions({5}, 4, 3);
  CHECK(g.node_count() == 5);
  CHECK(g.edges.empty());
}

TEST_CASE("uniform partitions give 2(T-1)k^2 edges") {
  for (std::size_t k = 1; k <= 4; ++k) {
    for (std::size_t t = 1; t <= 6; ++t) {
      const auto g = graph_with_partitions(std::vector<std::size_t>(t, k), 2, k * 10 + t);
      CHECK(g.edges.size() == 2 * (t - 1) * k * k);
    }
  }
}

TEST_CASE("empty video and empty sampled frames") {
  const auto empty = graph_with_partitions({}, 3, 4);
  const auto stats = heg::count_stats(empty);
  CHECK(stats.node_count == 0);
  CHECK(stats.directed_edge_count == 0);
  CHECK(stats.mean_objects_per_frame == 0.0);

  // An empty middle frame breaks the chain: no edges skip over it.
  const auto g = graph_with_partitions({2, 0, 2}, 3, 5);
  CHECK(g.node_count() == 4);
  CHECK(g.edges.empty());
  CHECK(g.partitions.size() == 3);
  CHECK(g.partitions[1].empty());
}

TEST_CASE("neighbors") {
  const auto g = graph_with_partitions({2, 1, 2}, 3, 6);
  CHECK(heg::neighbors(g, 2).size() == 4);
  CHECK(heg::neighbors(g, 0) == std::vector<std::size_t>{2});
  CHECK_THROWS_AS(heg::neighbors(g, 5), heg::DomainError);
  CHECK(heg::neighbors(graph_with_partitions({3}, 2, 7), 1).empty());
  const auto pair = graph_with_partitions({1, 1}, 2, 8);
  CHECK(heg::neighbors(pair, 0) == std::vector<std::size_t>{1});
  CHECK(heg::neighbors(pair, 1) == std::vector<std::size_t>{0});

  const heg::Adjacency adj = g.adjacency();
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    auto in = adj.incoming(p);
    std::vector<std::size_t> a(in.begin(), in.end());
    auto b = heg::neighbors(g, p);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("symmetry and locality on random partitions") {
  heg::Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(rng.between(1, 8)));
    for (auto& s : sizes) s = static_cast<std::size_t>(rng.between(0, 5));
    const auto g = graph_with_partitions(sizes, 2, 1000 + static_cast<std::uint64_t>(trial));
    CHECK(g.edges.size() == heg::expected_edge_count(sizes));
    const auto es = edge_set(g);
    CHECK(es.size() == g.edges.size());
    for (const auto& e : g.edges) {
      CHECK(es.count({e.dst, e.src}) == 1);
      const auto a = g.origins[e.src].frame_position;
      const auto b = g.origins[e.dst].frame_position;
      CHECK((a + 1 == b || b + 1 == a));
      CHECK(e.src != e.dst);
    }
  }
}

TEST_CASE("nodes carry their origin and feature row") {
  const heg::SynthVideo v = fixture::video_with_partitions({2, 3}, 4, 12);
  const auto g = heg::build_graph(v.video, v.table.lookup(), 5);
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    const auto& o = g.origins[p];
    const std::size_t row = v.table.index.at({o.frame_index, o.object_id});
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.features(p, j) == v.table.features(row, j));
    CHECK(g.partition_frames[o.frame_position] == o.frame_index);
  }
}

TEST_CASE("ingestion errors") {
  heg::SynthVideo v = fixture::video_with_partitions({2, 2}, 3, 13);
  v.table.index.erase({5, 2});
  try {
    heg::build_graph(v.video, v.table.lookup(), 5);
    FAIL("expected DataError");
  } catch (const heg::DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("frame 5") != std::string::npos);
    CHECK(msg.find("object 2") != std::string::npos);
  }

  const heg::SynthVideo ok = fixture::video_with_partitions({2, 2}, 3, 14);
  const heg::Matrix narrow(1, 2, 0.5);
  auto mixed = [&](std::size_t frame, heg::ObjectId id) -> std::optional<std::span<const double>> {
    if (frame == 5 && id == 1) return narrow.row(0);
    return ok.table.features.row(ok.table.index.at({frame, id}));
  };
  CHECK_THROWS_AS(heg::build_graph(ok.video, mixed, 5), heg::DimensionError);

  heg::SynthVideo dup = fixture::video_with_partitions({2}, 3, 15);
  dup.video.detections.push_back(dup.video.detections.front());
  CHECK_THROWS_AS(heg::build_graph(dup.video, dup.table.lookup(), 5), heg::DataError);
}

TEST_CASE("batching") {
  const auto g1 = graph_with_partitions({2, 1}, 3, 20, 0);
  const auto g2 = graph_with_partitions({1, 2, 2}, 3, 21, 1);
  const heg::TemporalBipartiteGraph one[] = {g1};
  const auto b1 = heg::batch_graphs(std::span(one));
  CHECK(b1.merged.features == g1.features);
  CHECK(b1.merged.edges == g1.edges);
  CHECK(std::all_of(b1.membership.begin(), b1.membership.end(), [](std::size_t m) { return m == 0; }));

  const heg::TemporalBipartiteGraph two[] = {g1, g2};
  const auto b2 = heg::batch_graphs(std::span(two));
  CHECK(b2.merged.node_count() == g1.node_count() + g2.node_count());
  CHECK(b2.merged.edges.size() == g1.edges.size() + g2.edges.size());
  CHECK(b2.labels == std::vector<int>{0, 1});
  for (std::size_t i = 0; i < g2.edges.size(); ++i) {
    const auto& e = b2.merged.edges[g1.edges.size() + i];
    CHECK(e.src == g2.edges[i].src + g1.node_count());
    CHECK(e.dst == g2.edges[i].dst + g1.node_count());
  }
  for (const auto& e : b2.merged.edges) CHECK(b2.membership[e.src] == b2.membership[e.dst]);

  CHECK_THROWS_AS(heg::batch_graphs(std::span<const heg::TemporalBipartiteGraph>()), heg::DomainError);
  const auto wide = graph_with_partitions({1}, 5, 22);
  const heg::TemporalBipartiteGraph mismatched[] = {g1, wide};
  CHECK_THROWS_AS(heg::batch_graphs(std::span(mismatched)), heg::DimensionError);
}

TEST_CASE("HEGG round trip and corruption") {
  const auto dir = fixture::temp_dir("graph");
  auto g = graph_with_partitions({2, 0, 3, 1}, 5, 30, 1);
  g.video_id = "round/trip";
  heg::write_graph(dir / "g.hegg", g);
  const auto back = heg::read_graph(dir / "g.hegg");
  CHECK(back.video_id == g.video_id);
  CHECK(back.features == g.features);
  CHECK(back.origins == g.origins);
  CHECK(back.edges == g.edges);
  CHECK(back.partitions == g.partitions);
  CHECK(back.partition_frames == g.partition_frames);
  CHECK(back.label == 1);

  const auto size = std::filesystem::file_size(dir / "g.hegg");
  std::filesystem::resize_file(dir / "g.hegg", size - 3);
  try {
    heg::read_graph(dir / "g.hegg");
    FAIL("expected FormatError");
  } catch (const heg::FormatError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
  {
    std::ofstream out(dir / "bad.hegg", std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(heg::read_graph(dir / "bad.hegg"), heg::FormatError);
  CHECK_THROWS_AS(heg::read_graph(dir / "missing.hegg"), heg::DataError);
}
