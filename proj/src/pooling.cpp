#include "heg/pooling.hpp"

#include <algorithm>
#include <cmath>

#include "heg/errors.hpp"
#include "heg/numerics.hpp"
#include "heg/random.hpp"

namespace heg {

std::string_view to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::attention: return "attention";
    case PoolingMode::mean: return "mean";
    case PoolingMode::sum: return "sum";
    case PoolingMode::max: return "max";
  }
  return "?";
}

PoolingMode parse_pooling(std::string_view name) {
  if (name == "attention" || name == "feature_gated_attention") return PoolingMode::attention;
  if (name == "mean" || name == "global_mean") return PoolingMode::mean;
  if (name == "sum" || name == "global_sum") return PoolingMode::sum;
  if (name == "max" || name == "global_max") return PoolingMode::max;
  throw DomainError("unknown pooling mode '" + std::string(name) + "'");
}

PoolingHead PoolingHead::create(std::size_t feature_dim, std::size_t num_classes, PoolingMode mode,
                                std::uint64_t seed) {
  if (num_classes < 2) throw DomainError("PoolingHead: need at least 2 classes");
  PoolingHead h;
  h.mode = mode;
  h.w_gate = xavier_init(feature_dim, feature_dim, derive_seed(seed, 20));
  h.b_gate = Matrix(1, feature_dim);
  h.w_cls = xavier_init(feature_dim, num_classes, derive_seed(seed, 21));
  h.b_cls = Matrix(1, num_classes);
  return h;
}

PoolResult pool(const PoolingHead& head, const Matrix& embeddings,
                std::span<const std::size_t> membership) {
  if (membership.size() != embeddings.rows()) {
    throw DimensionError("pool: membership has " + std::to_string(membership.size()) +
                         " entries for " + std::to_string(embeddings.rows()) + " nodes");
  }
  if (embeddings.rows() == 0) throw DomainError("pool: no nodes");
  const std::size_t f = embeddings.cols();
  if (head.mode == PoolingMode::attention && head.w_gate.rows() != f) {
    throw DimensionError("pool: embedding width " + std::to_string(f) + " vs gate " +
                         head.w_gate.shape_string());
  }
  const std::size_t graphs = *std::max_element(membership.begin(), membership.end()) + 1;

  PoolResult res;
  PoolTrace& tr = res.trace;
  tr.mode = head.mode;
  tr.input = embeddings;
  tr.members.resize(graphs);
  for (std::size_t p = 0; p < membership.size(); ++p) tr.members[membership[p]].push_back(p);
  for (std::size_t k = 0; k < graphs; ++k) {
    if (tr.members[k].empty()) throw DomainError("pool: graph " + std::to_string(k) + " has no nodes");
  }

  res.pooled = Matrix(graphs, f);
  switch (head.mode) {
    case PoolingMode::attention: {
      Matrix scores = matmul(embeddings, head.w_gate);
      add_row_inplace(scores, head.b_gate);
      tr.gates = Matrix(embeddings.rows(), f);
      for (std::size_t k = 0; k < graphs; ++k) {
        const auto& nodes = tr.members[k];
        const Matrix gate = softmax_over_rows(gather_rows(scores, nodes));
        auto out = res.pooled.row(k);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          auto x = embeddings.row(nodes[i]);
          auto gr = tr.gates.row(nodes[i]);
          for (std::size_t j = 0; j < f; ++j) {
            gr[j] = gate(i, j);
            out[j] += gate(i, j) * x[j];
          }
        }
      }
      break;
    }
    case PoolingMode::mean:
    case PoolingMode::sum:
      for (std::size_t k = 0; k < graphs; ++k) {
        auto out = res.pooled.row(k);
        for (std::size_t p : tr.members[k]) {
          auto x = embeddings.row(p);
          for (std::size_t j = 0; j < f; ++j) out[j] += x[j];
        }
        if (head.mode == PoolingMode::mean) {
          const double n = static_cast<double>(tr.members[k].size());
          for (double& v : out) v /= n;
        }
      }
      break;
    case PoolingMode::max:
      tr.argmax.assign(graphs * f, 0);
      for (std::size_t k = 0; k < graphs; ++k) {
        auto out = res.pooled.row(k);
        for (std::size_t j = 0; j < f; ++j) {
          std::size_t best = tr.members[k].front();
          for (std::size_t p : tr.members[k])
            if (embeddings(p, j) > embeddings(best, j)) best = p;  // first argmax wins ties
          tr.argmax[k * f + j] = best;
          out[j] = embeddings(best, j);
        }
      }
      break;
  }
  return res;
}

PoolGrads pool_backward(const PoolingHead& head, const PoolTrace& trace, const Matrix& grad_pooled) {
  const std::size_t f = trace.input.cols();
  if (trace.mode != head.mode || grad_pooled.rows() != trace.members.size() || grad_pooled.cols() != f) {
    throw InternalError("pool_backward: trace does not match head or gradient " +
                        grad_pooled.shape_string());
  }
  PoolGrads g;
  g.grad_input = Matrix(trace.input.rows(), f);
  g.w_gate = Matrix(head.w_gate.rows(), head.w_gate.cols());
  g.b_gate = Matrix(1, head.b_gate.cols());

  switch (head.mode) {
    case PoolingMode::attention: {
      // d pooled_j / d x_ij = G_ij directly, plus the path through the gate
      // scores: dZ_ij = G_ij (dS_ij - sum_k G_kj dS_kj) with dS_ij = dP_j x_ij.
      Matrix grad_scores(trace.input.rows(), f);
      for (std::size_t k = 0; k < trace.members.size(); ++k) {
        auto dp = grad_pooled.row(k);
        std::vector<double> weighted(f, 0.0);
        for (std::size_t p : trace.members[k]) {
          auto x = trace.input.row(p);
          auto gate = trace.gates.row(p);
          for (std::size_t j = 0; j < f; ++j) weighted[j] += gate[j] * dp[j] * x[j];
        }
        for (std::size_t p : trace.members[k]) {
          auto x = trace.input.row(p);
          auto gate = trace.gates.row(p);
          auto gi = g.grad_input.row(p);
          auto gz = grad_scores.row(p);
          for (std::size_t j = 0; j < f; ++j) {
            gi[j] += gate[j] * dp[j];
            gz[j] = gate[j] * (dp[j] * x[j] - weighted[j]);
          }
        }
      }
      g.w_gate = matmul_tn(trace.input, grad_scores);
      g.b_gate = column_sums(grad_scores);
      g.grad_input += matmul_nt(grad_scores, head.w_gate);
      break;
    }
    case PoolingMode::mean:
    case PoolingMode::sum:
      for (std::size_t k = 0; k < trace.members.size(); ++k) {
        const double scale =
            head.mode == PoolingMode::mean ? 1.0 / static_cast<double>(trace.members[k].size()) : 1.0;
        auto dp = grad_pooled.row(k);
        for (std::size_t p : trace.members[k]) {
          auto gi = g.grad_input.row(p);
          for (std::size_t j = 0; j < f; ++j) gi[j] += dp[j] * scale;
        }
      }
      break;
    case PoolingMode::max:
      for (std::size_t k = 0; k < trace.members.size(); ++k)
        for (std::size_t j = 0; j < f; ++j) g.grad_input(trace.argmax[k * f + j], j) += grad_pooled(k, j);
      break;
  }
  return g;
}

Matrix class_logits(const PoolingHead& head, const Matrix& pooled) {
  Matrix logits = matmul(pooled, head.w_cls);
  add_row_inplace(logits, head.b_cls);
  return logits;
}

Matrix classify(const PoolingHead& head, const Matrix& pooled) {
  return softmax_over_cols(class_logits(head, pooled));
}

LossResult cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
  }
  if (logits.rows() == 0) throw DomainError("cross_entropy_loss: empty batch");
  LossResult r;
  r.probs = softmax_over_cols(logits);
  r.grad_logits = r.probs;
  const double inv_b = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw DomainError("cross_entropy_loss: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(logits.cols()) + ")");
    }
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    total += (mx + std::log(s)) - row[static_cast<std::size_t>(y)];
    r.grad_logits(i, static_cast<std::size_t>(y)) -= 1.0;
  }
  r.grad_logits *= inv_b;
  r.loss = total * inv_b;
  return r;
}

HeadGrads head_backward(const PoolingHead& head, const Matrix& pooled, const Matrix& grad_logits) {
  if (grad_logits.rows() != pooled.rows() || grad_logits.cols() != head.num_classes()) {
    throw InternalError("head_backward: gradient " + grad_logits.shape_string() + " vs pooled " +
                        pooled.shape_string());
  }
  HeadGrads g;
  g.w_cls = matmul_tn(pooled, grad_logits);
  g.b_cls = column_sums(grad_logits);
  g.grad_pooled = matmul_nt(grad_logits, head.w_cls);
  return g;
}

}  // namespace heg
