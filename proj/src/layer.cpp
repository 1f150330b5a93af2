#include "heg/layer.hpp"

#include <algorithm>

#include "heg/errors.hpp"
#include "heg/numerics.hpp"
#include "heg/random.hpp"

namespace heg {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "none"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "none") return Activation::none;
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

HegLayer HegLayer::create(std::size_t input_dim, std::size_t output_dim,
                          std::vector<AggregatorKind> kinds, double std_epsilon,
                          Activation activation, std::uint64_t seed) {
  HegLayer l;
  l.w_root = xavier_init(input_dim, output_dim, derive_seed(seed, 0));
  l.w_neigh = xavier_init(input_dim, output_dim, derive_seed(seed, 1));
  l.b_neigh = Matrix(1, output_dim);
  l.aggregator =
      MultiAggregator::create(std::move(kinds), input_dim, input_dim, std_epsilon, derive_seed(seed, 2));
  l.activation = activation;
  return l;
}

void HegLayer::check() const {
  aggregator.check();
  if (w_neigh.rows() != aggregator.output_dim() || w_neigh.cols() != w_root.cols() ||
      b_neigh.rows() != 1 || b_neigh.cols() != w_root.cols() ||
      aggregator.input_dim() != w_root.rows()) {
    throw DimensionError("HegLayer: inconsistent parameter shapes w_root " + w_root.shape_string() +
                         ", w_neigh " + w_neigh.shape_string() + ", b_neigh " +
                         b_neigh.shape_string() + ", w_proj " + aggregator.w_proj.shape_string());
  }
}

LayerForward layer_forward(const HegLayer& layer, const Adjacency& adjacency, const Matrix& x) {
  layer.check();
  if (x.cols() != layer.input_dim()) {
    throw DimensionError("layer_forward: input width " + std::to_string(x.cols()) + " != layer width " +
                         std::to_string(layer.input_dim()));
  }
  if (adjacency.node_count() != x.rows()) {
    throw DimensionError("layer_forward: " + std::to_string(x.rows()) + " feature rows for " +
                         std::to_string(adjacency.node_count()) + " nodes");
  }
  const std::size_t n = x.rows();
  const std::size_t kf = layer.aggregator.w_proj.rows();
  const MultiAggregator& agg = layer.aggregator;

  LayerForward res;
  LayerTrace& tr = res.trace;
  tr.layer = &layer;
  tr.adjacency = adjacency;
  tr.input = x;
  tr.concat = Matrix(n, kf);
  tr.reductions.resize(n);
  tr.has_neighbors.assign(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    auto nbrs = adjacency.incoming(p);
    if (nbrs.empty()) continue;
    tr.has_neighbors[p] = 1;
    reduce_rows(agg.kinds, agg.std_epsilon, x, nbrs, tr.concat.row(p), tr.reductions[p]);
  }

  tr.aggregated = matmul(tr.concat, agg.w_proj);
  for (std::size_t p = 0; p < n; ++p) {
    if (!tr.has_neighbors[p]) continue;
    auto ar = tr.aggregated.row(p);
    for (std::size_t j = 0; j < ar.size(); ++j) ar[j] += agg.b_proj(0, j);
  }
  const Matrix neigh_term = matmul(tr.aggregated, layer.w_neigh);

  Matrix out = matmul(x, layer.w_root);
  for (std::size_t p = 0; p < n; ++p) {
    if (!tr.has_neighbors[p]) continue;
    auto o = out.row(p);
    auto nt = neigh_term.row(p);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += nt[j] + layer.b_neigh(0, j);
  }
  if (layer.activation == Activation::relu) {
    for (double& v : out.values()) v = std::max(v, 0.0);
  }
  tr.output = out;
  res.output = std::move(out);
  return res;
}

LayerBackward layer_backward(const HegLayer& layer, const LayerTrace& trace, const Matrix& grad_output) {
  if (trace.layer != &layer || trace.input.rows() != grad_output.rows() ||
      grad_output.cols() != layer.output_dim()) {
    throw InternalError("layer_backward: trace does not match this layer or gradient shape " +
                        grad_output.shape_string());
  }
  const MultiAggregator& agg = layer.aggregator;
  const std::size_t n = trace.input.rows();

  Matrix g = grad_output;
  if (layer.activation == Activation::relu) {
    auto gv = g.values();
    auto ov = trace.output.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (ov[i] <= 0.0) gv[i] = 0.0;
  }

  // Rows of isolated nodes never saw the neighbor term.
  Matrix g_neigh = g;
  for (std::size_t p = 0; p < n; ++p)
    if (!trace.has_neighbors[p]) std::fill(g_neigh.row(p).begin(), g_neigh.row(p).end(), 0.0);

  LayerBackward res;
  res.grads.w_root = matmul_tn(trace.input, g);
  res.grads.w_neigh = matmul_tn(trace.aggregated, g_neigh);
  res.grads.b_neigh = column_sums(g_neigh);

  const Matrix g_agg = matmul_nt(g_neigh, layer.w_neigh);  // N x F_a
  res.grads.w_proj = matmul_tn(trace.concat, g_agg);
  res.grads.b_proj = column_sums(g_agg);
  const Matrix g_concat = matmul_nt(g_agg, agg.w_proj);   // N x K*F

  res.grad_input = matmul_nt(g, layer.w_root);
  for (std::size_t p = 0; p < n; ++p) {
    if (!trace.has_neighbors[p]) continue;
    reduce_rows_backward(agg.kinds, trace.input, trace.adjacency.incoming(p), trace.reductions[p],
                         g_concat.row(p), res.grad_input);
  }
  return res;
}

std::size_t hidden_width(std::size_t feature_dim, bool compression) {
  if (!compression) return feature_dim;
  return std::max<std::size_t>(1, feature_dim / 2);
}

HegModel HegModel::create(std::size_t feature_dim, std::vector<AggregatorKind> kinds, double std_epsilon,
                          bool compression, Activation hidden_activation, std::uint64_t seed) {
  if (feature_dim == 0) throw DomainError("HegModel: feature dimension must be >= 1");
  HegModel m;
  const std::size_t hidden = hidden_width(feature_dim, compression);
  m.layer1 = HegLayer::create(feature_dim, hidden, kinds, std_epsilon, hidden_activation,
                              derive_seed(seed, 10));
  m.layer2 = HegLayer::create(hidden, feature_dim, kinds, std_epsilon, Activation::none,
                              derive_seed(seed, 11));
  m.compression_enabled = compression;
  return m;
}

ModelForward model_forward(const HegModel& model, const Adjacency& adjacency, const Matrix& x) {
  if (model.layer2.input_dim() != model.layer1.output_dim()) {
    throw DimensionError("model_forward: layer widths do not chain");
  }
  ModelForward f;
  LayerForward l1 = layer_forward(model.layer1, adjacency, x);
  LayerForward l2 = layer_forward(model.layer2, adjacency, l1.output);
  f.trace1 = std::move(l1.trace);
  f.trace2 = std::move(l2.trace);
  f.embeddings = std::move(l2.output);
  return f;
}

ModelBackward model_backward(const HegModel& model, const ModelForward& fwd, const Matrix& grad_embeddings) {
  ModelBackward b;
  LayerBackward l2 = layer_backward(model.layer2, fwd.trace2, grad_embeddings);
  LayerBackward l1 = layer_backward(model.layer1, fwd.trace1, l2.grad_input);
  b.grad_input = std::move(l1.grad_input);
  b.layer1 = std::move(l1.grads);
  b.layer2 = std::move(l2.grads);
  return b;
}

}  // namespace heg
