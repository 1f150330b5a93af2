// Brute-force reference implementations. Written independently of the
// library code: plain loops, no shared helpers beyond Matrix storage.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "heg/matrix.hpp"

namespace oracle {

inline std::vector<double> column(const heg::Matrix& x, std::size_t j) {
  std::vector<double> c;
  for (std::size_t i = 0; i < x.rows(); ++i) c.push_back(x(i, j));
  return c;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a;
  return s / static_cast<double>(v.size());
}

inline heg::Matrix mean(const heg::Matrix& x) {
  heg::Matrix out(1, x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) = mean_of(column(x, j));
  return out;
}

// Two-pass biased variance.
inline heg::Matrix std_dev(const heg::Matrix& x, double eps) {
  heg::Matrix out(1, x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const auto c = column(x, j);
    const double mu = mean_of(c);
    double ss = 0.0;
    for (double a : c) ss += (a - mu) * (a - mu);
    out(0, j) = std::sqrt(ss / static_cast<double>(c.size()) + eps);
  }
  return out;
}

inline heg::Matrix median(const heg::Matrix& x) {
  heg::Matrix out(1, x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    auto c = column(x, j);
    std::sort(c.begin(), c.end());
    out(0, j) = c[c.size() / 2];
  }
  return out;
}

inline heg::Matrix moment(const heg::Matrix& x, int m) {
  heg::Matrix out(1, x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const auto c = column(x, j);
    const double mu = mean_of(c);
    double s = 0.0;
    for (double a : c) s += std::pow(a - mu, m);
    out(0, j) = s / static_cast<double>(c.size());
  }
  return out;
}

// Feature-gated attention over one graph: for each feature j, a softmax over
// nodes of the gate scores, then the gate-weighted sum of column j.
inline std::vector<double> attention_pool(const heg::Matrix& emb, const heg::Matrix& w_gate,
                                          const heg::Matrix& b_gate) {
  const std::size_t n = emb.rows();
  const std::size_t f = emb.cols();
  std::vector<double> pooled(f, 0.0);
  for (std::size_t j = 0; j < f; ++j) {
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b_gate(0, j);
      for (std::size_t k = 0; k < f; ++k) s += emb(i, k) * w_gate(k, j);
      score[i] = s;
    }
    double denom = 0.0;
    for (double s : score) denom += std::exp(s);
    for (std::size_t i = 0; i < n; ++i) pooled[j] += std::exp(score[i]) / denom * emb(i, j);
  }
  return pooled;
}

// Scalar Adam with coupled L2, step by step.
struct ScalarAdam {
  double lr, b1, b2, eps, wd;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double param, double grad) {
    const double g = grad + wd * param;
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    return param - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

// Average precision as the mean of precision@k over the ranks k that hold a
// positive (equivalent to the recall-increment sum). Ties keep input order.
inline double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t total = 0;
  for (bool p : positive) total += p ? 1 : 0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (positive[idx[k]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(total);
}

}  // namespace oracle
