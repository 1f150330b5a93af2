#include "heg/network.hpp"

#include <numeric>
#include <thread>

#include <json.hpp>

#include "binary_io.hpp"
#include "heg/errors.hpp"

namespace heg {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

// Calls fn(name, matrix, decays) in the canonical parameter order.
template <typename Net, typename Fn>
void visit_parameters(Net& net, Fn&& fn) {
  auto layer = [&](auto& l, const std::string& prefix) {
    fn(prefix + ".w_root", l.w_root, true);
    fn(prefix + ".w_neigh", l.w_neigh, true);
    fn(prefix + ".b_neigh", l.b_neigh, false);
    fn(prefix + ".w_proj", l.aggregator.w_proj, true);
    fn(prefix + ".b_proj", l.aggregator.b_proj, false);
  };
  layer(net.model.layer1, "layer1");
  layer(net.model.layer2, "layer2");
  fn(std::string("head.w_gate"), net.head.w_gate, true);
  fn(std::string("head.b_gate"), net.head.b_gate, false);
  fn(std::string("head.w_cls"), net.head.w_cls, true);
  fn(std::string("head.b_cls"), net.head.b_cls, false);
}

void append_layer_grads(std::vector<Matrix>& out, LayerGrads& g) {
  out.push_back(std::move(g.w_root));
  out.push_back(std::move(g.w_neigh));
  out.push_back(std::move(g.b_neigh));
  out.push_back(std::move(g.w_proj));
  out.push_back(std::move(g.b_proj));
}

std::vector<std::size_t> single_graph_membership(std::size_t nodes) {
  return std::vector<std::size_t>(nodes, 0);
}

}  // namespace

HegNetwork HegNetwork::create(const NetworkConfig& config) {
  HegNetwork net;
  net.config = config;
  net.config.kinds = canonical_kinds(config.kinds);
  net.model = HegModel::create(config.feature_dim, net.config.kinds, config.std_epsilon,
                               config.compression, config.hidden_activation, config.seed);
  net.head = PoolingHead::create(net.model.output_dim(), config.num_classes, config.pooling, config.seed);
  return net;
}

std::vector<ParamRef> HegNetwork::parameters() {
  std::vector<ParamRef> out;
  visit_parameters(*this, [&](const std::string& name, Matrix& m, bool decay) {
    out.push_back(ParamRef{name, std::ref(m), decay});
  });
  return out;
}

std::vector<std::pair<std::string, std::reference_wrapper<const Matrix>>> HegNetwork::parameters() const {
  std::vector<std::pair<std::string, std::reference_wrapper<const Matrix>>> out;
  visit_parameters(*this, [&](const std::string& name, const Matrix& m, bool) {
    out.emplace_back(name, std::cref(m));
  });
  return out;
}

std::vector<Matrix> HegNetwork::zero_gradients() const {
  std::vector<Matrix> out;
  for (const auto& [name, m] : parameters()) out.emplace_back(m.get().rows(), m.get().cols());
  return out;
}

NetworkForward network_forward(const HegNetwork& net, const Adjacency& adjacency, const Matrix& features,
                               std::span<const std::size_t> membership) {
  NetworkForward f;
  f.model = model_forward(net.model, adjacency, features);
  f.pool = pool(net.head, f.model.embeddings, membership);
  f.logits = class_logits(net.head, f.pool.pooled);
  f.probs = softmax_over_cols(f.logits);
  return f;
}

Matrix predict(const HegNetwork& net, const GraphBatch& batch) {
  return network_forward(net, batch.merged.adjacency(), batch.merged.features, batch.membership).probs;
}

Matrix predict(const HegNetwork& net, const TemporalBipartiteGraph& graph) {
  return network_forward(net, graph.adjacency(), graph.features, single_graph_membership(graph.node_count()))
      .probs;
}

LossAndGradients batch_loss_and_gradients(const HegNetwork& net, const GraphBatch& batch) {
  const NetworkForward f =
      network_forward(net, batch.merged.adjacency(), batch.merged.features, batch.membership);
  const LossResult loss = cross_entropy_loss(f.logits, batch.labels);
  HeadGrads hg = head_backward(net.head, f.pool.pooled, loss.grad_logits);
  PoolGrads pg = pool_backward(net.head, f.pool.trace, hg.grad_pooled);
  ModelBackward mb = model_backward(net.model, f.model, pg.grad_input);

  LossAndGradients out;
  out.loss = loss.loss;
  out.probs = loss.probs;
  append_layer_grads(out.gradients, mb.layer1);
  append_layer_grads(out.gradients, mb.layer2);
  out.gradients.push_back(std::move(pg.w_gate));
  out.gradients.push_back(std::move(pg.b_gate));
  out.gradients.push_back(std::move(hg.w_cls));
  out.gradients.push_back(std::move(hg.b_cls));
  return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

LossAndGradients loss_and_gradients(const HegNetwork& net,
                                    std::span<const TemporalBipartiteGraph* const> graphs,
                                    unsigned threads) {
  if (graphs.empty()) throw DomainError("loss_and_gradients: empty batch");
  std::vector<LossAndGradients> per_graph(graphs.size());
  parallel_for(graphs.size(), threads, [&](std::size_t i) {
    const TemporalBipartiteGraph* const one[] = {graphs[i]};
    per_graph[i] = batch_loss_and_gradients(net, batch_graphs(std::span(one)));
  });

  const double inv_b = 1.0 / static_cast<double>(graphs.size());
  LossAndGradients out;
  out.gradients = net.zero_gradients();
  out.probs = Matrix(graphs.size(), net.head.num_classes());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    out.loss += per_graph[i].loss;
    out.per_graph_loss.push_back(per_graph[i].loss);
    for (std::size_t p = 0; p < out.gradients.size(); ++p) out.gradients[p] += per_graph[i].gradients[p];
    auto src = per_graph[i].probs.row(0);
    std::copy(src.begin(), src.end(), out.probs.row(i).begin());
  }
  out.loss *= inv_b;
  for (Matrix& g : out.gradients) g *= inv_b;
  return out;
}

std::string network_config_json(const NetworkConfig& c) {
  std::vector<std::string> kinds;
  for (auto k : c.kinds) kinds.emplace_back(to_string(k));
  nlohmann::json j = {{"feature_dim", c.feature_dim},
                      {"num_classes", c.num_classes},
                      {"kinds", kinds},
                      {"std_epsilon", c.std_epsilon},
                      {"compression", c.compression},
                      {"pooling", std::string(to_string(c.pooling))},
                      {"hidden_activation", std::string(to_string(c.hidden_activation))},
                      {"hidden_dim", hidden_width(c.feature_dim, c.compression)},
                      {"seed", c.seed}};
  return j.dump();
}

void save_checkpoint(const std::filesystem::path& path, const HegNetwork& net) {
  io::Writer w;
  w.magic("HEGC");
  w.u32(kCheckpointVersion);
  w.str(network_config_json(net.config));
  const auto params = net.parameters();
  w.u64(params.size());
  for (const auto& [name, ref] : params) {
    const Matrix& m = ref.get();
    w.str(name);
    w.u64(m.rows());
    w.u64(m.cols());
    for (double v : m.values()) w.f64(v);
  }
  w.save(path);
}

HegNetwork load_checkpoint(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path);
  r.expect_magic("HEGC");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

  NetworkConfig c;
  try {
    const auto j = nlohmann::json::parse(r.str());
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.kinds.clear();
    for (const auto& k : j.at("kinds")) c.kinds.push_back(parse_aggregator(k.get<std::string>()));
    c.std_epsilon = j.at("std_epsilon").get<double>();
    c.compression = j.at("compression").get<bool>();
    c.pooling = parse_pooling(j.at("pooling").get<std::string>());
    c.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.at("hidden_dim").get<std::size_t>() != hidden_width(c.feature_dim, c.compression)) {
      r.fail("metadata hidden_dim disagrees with feature_dim/compression");
    }
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad checkpoint metadata: ") + e.what());
  } catch (const DomainError& e) {
    r.fail(std::string("bad checkpoint metadata: ") + e.what());
  }

  HegNetwork net = HegNetwork::create(c);
  auto params = net.parameters();
  const std::uint64_t count = r.u64();
  if (count != params.size()) {
    r.fail("checkpoint holds " + std::to_string(count) + " matrices, layout expects " +
           std::to_string(params.size()));
  }
  for (ParamRef& p : params) {
    const std::string name = r.str();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    Matrix& m = p.value.get();
    if (name != p.name || rows != m.rows() || cols != m.cols()) {
      r.fail("matrix '" + name + "' (" + std::to_string(rows) + "x" + std::to_string(cols) +
             ") does not match expected '" + p.name + "' " + m.shape_string());
    }
    r.require(rows * cols * 8, "matrix data");
    for (double& v : m.values()) v = r.f64();
  }
  r.expect_end();
  return net;
}

}  // namespace heg
