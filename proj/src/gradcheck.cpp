#include "heg/gradcheck.hpp"

#include <algorithm>

#include "heg/network.hpp"
#include "heg/numerics.hpp"
#include "heg/random.hpp"

namespace heg {

namespace {

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

double forward_loss(const HegNetwork& net, const TemporalBipartiteGraph& g, const Matrix& features) {
  const std::vector<std::size_t> membership(g.node_count(), 0);
  const NetworkForward f = network_forward(net, g.adjacency(), features, membership);
  const int label[] = {g.label};
  return cross_entropy_loss(f.logits, label).loss;
}

Matrix input_gradient(const HegNetwork& net, const TemporalBipartiteGraph& g) {
  const std::vector<std::size_t> membership(g.node_count(), 0);
  const NetworkForward f = network_forward(net, g.adjacency(), g.features, membership);
  const int label[] = {g.label};
  const LossResult loss = cross_entropy_loss(f.logits, label);
  const HeadGrads hg = head_backward(net.head, f.pool.pooled, loss.grad_logits);
  const PoolGrads pg = pool_backward(net.head, f.pool.trace, hg.grad_pooled);
  return model_backward(net.model, f.model, pg.grad_input).grad_input;
}

struct Accumulator {
  double worst = 0.0;
  std::size_t entries = 0;
  void add(const Matrix& analytic, const Matrix& numeric, double floor) {
    worst = std::max(worst, max_relative_error(analytic, numeric, floor));
    entries += analytic.values().size();
  }
};

}  // namespace

TemporalBipartiteGraph gradcheck_graph(std::uint64_t seed, std::size_t feature_dim) {
  constexpr std::size_t kStride = 5;
  VideoSequence seq;
  seq.video_id = "gradcheck";
  seq.frame_count = 3 * kStride;
  seq.frame_width = 640;
  seq.frame_height = 480;
  seq.label = 1;
  for (std::size_t f = 0; f < 3; ++f) {
    for (ObjectId id = 1; id <= 2; ++id) {
      Detection d;
      d.frame_index = f * kStride;
      d.object_id = id;
      d.box = Box::from_corners(40.0 * static_cast<double>(id), 50, 40.0 * static_cast<double>(id) + 30, 90);
      seq.detections.push_back(d);
    }
  }
  Rng rng(derive_seed(seed, 0x9c));
  const Matrix features = random_normal(6, feature_dim, rng);
  auto lookup = [&](std::size_t frame, ObjectId id) -> std::optional<std::span<const double>> {
    return features.row(frame / kStride * 2 + static_cast<std::size_t>(id - 1));
  };
  return build_graph(seq, lookup, kStride);
}

std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& o) {
  std::vector<GradCheckEntry> out;
  Rng rng(derive_seed(o.seed, 0x6c));

  // Each reducer alone, through a fixed random linear functional.
  const Matrix x = random_normal(5, o.feature_dim, rng);
  const std::vector<std::size_t> rows = {0, 2, 3, 4};
  auto check_kinds = [&](const std::vector<AggregatorKind>& kinds, const std::string& name) {
    const Matrix weights = random_normal(1, kinds.size() * o.feature_dim, rng);
    auto functional = [&](const Matrix& m) {
      std::vector<double> concat(weights.cols());
      ReductionTrace trace;
      reduce_rows(kinds, 1e-5, m, rows, concat, trace);
      double s = 0.0;
      for (std::size_t i = 0; i < concat.size(); ++i) s += concat[i] * weights(0, i);
      return s;
    };
    std::vector<double> concat(weights.cols());
    ReductionTrace trace;
    reduce_rows(kinds, 1e-5, x, rows, concat, trace);
    Matrix analytic(x.rows(), x.cols());
    reduce_rows_backward(kinds, x, rows, trace, weights.row(0), analytic);
    Accumulator acc;
    acc.add(analytic, finite_diff_gradient(functional, x, o.step), o.floor);
    out.push_back({name, acc.worst, acc.entries});
  };
  for (AggregatorKind k : kAllAggregators) check_kinds({k}, "aggregator." + std::string(to_string(k)));
  check_kinds({std::begin(kAllAggregators), std::end(kAllAggregators)}, "aggregator.all");

  const TemporalBipartiteGraph g = gradcheck_graph(o.seed, o.feature_dim);
  NetworkConfig cfg;
  cfg.feature_dim = o.feature_dim;
  cfg.num_classes = o.num_classes;
  cfg.seed = o.seed;
  const HegNetwork base = HegNetwork::create(cfg);

  const TemporalBipartiteGraph* const one[] = {&g};
  const LossAndGradients lg = batch_loss_and_gradients(base, batch_graphs(std::span(one)));

  // Parameter groups by name prefix.
  const std::pair<std::string, std::vector<std::string>> groups[] = {
      {"layer1", {"layer1."}},
      {"layer2", {"layer2."}},
      {"attention_pooling", {"head.w_gate", "head.b_gate"}},
      {"classifier", {"head.w_cls", "head.b_cls"}}};
  HegNetwork probe = base;
  auto names = probe.parameters();
  for (const auto& [component, prefixes] : groups) {
    Accumulator acc;
    for (std::size_t p = 0; p < names.size(); ++p) {
      const std::string& name = names[p].name;
      if (std::none_of(prefixes.begin(), prefixes.end(),
                       [&](const std::string& pre) { return name.rfind(pre, 0) == 0; })) {
        continue;
      }
      const Matrix original = names[p].value.get();
      auto f = [&](const Matrix& m) {
        names[p].value.get() = m;
        return forward_loss(probe, g, g.features);
      };
      const Matrix numeric = finite_diff_gradient(f, original, o.step);
      names[p].value.get() = original;
      acc.add(lg.gradients[p], numeric, o.floor);
    }
    out.push_back({component, acc.worst, acc.entries});
  }

  // Loss with respect to its logits.
  {
    const Matrix logits = random_normal(2, o.num_classes, rng);
    const int labels[] = {0, static_cast<int>(o.num_classes - 1)};
    auto f = [&](const Matrix& m) { return cross_entropy_loss(m, labels).loss; };
    Accumulator acc;
    acc.add(cross_entropy_loss(logits, labels).grad_logits, finite_diff_gradient(f, logits, o.step), o.floor);
    out.push_back({"loss", acc.worst, acc.entries});
  }

  // Every pooling mode with respect to its node embeddings.
  for (PoolingMode mode : kAllPoolingModes) {
    PoolingHead head = PoolingHead::create(o.feature_dim, o.num_classes, mode, derive_seed(o.seed, 77));
    const Matrix emb = random_normal(7, o.feature_dim, rng);
    const std::vector<std::size_t> membership = {0, 0, 0, 1, 1, 1, 1};
    const Matrix weights = random_normal(2, o.feature_dim, rng);
    auto f = [&](const Matrix& m) {
      const Matrix pooled = pool(head, m, membership).pooled;
      double s = 0.0;
      for (std::size_t i = 0; i < pooled.values().size(); ++i) s += pooled.values()[i] * weights.values()[i];
      return s;
    };
    const PoolResult r = pool(head, emb, membership);
    Accumulator acc;
    acc.add(pool_backward(head, r.trace, weights).grad_input, finite_diff_gradient(f, emb, o.step), o.floor);
    out.push_back({"pooling." + std::string(to_string(mode)), acc.worst, acc.entries});
  }

  // End to end, with respect to the node features.
  {
    auto f = [&](const Matrix& m) { return forward_loss(base, g, m); };
    Accumulator acc;
    acc.add(input_gradient(base, g), finite_diff_gradient(f, g.features, o.step), o.floor);
    out.push_back({"input", acc.worst, acc.entries});
  }
  return out;
}

}  // namespace heg
