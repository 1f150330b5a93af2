#include "heg/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "heg/errors.hpp"
#include "heg/numerics.hpp"

namespace heg {

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::mean: return "mean";
    case AggregatorKind::median: return "median";
    case AggregatorKind::std_dev: return "std";
    case AggregatorKind::moment3: return "m3";
    case AggregatorKind::moment4: return "m4";
  }
  return "?";
}

AggregatorKind parse_aggregator(std::string_view name) {
  if (name == "mean") return AggregatorKind::mean;
  if (name == "median" || name == "med") return AggregatorKind::median;
  if (name == "std") return AggregatorKind::std_dev;
  if (name == "m3" || name == "moment3") return AggregatorKind::moment3;
  if (name == "m4" || name == "moment4") return AggregatorKind::moment4;
  throw DomainError("unknown aggregator '" + std::string(name) + "'");
}

std::vector<AggregatorKind> canonical_kinds(std::vector<AggregatorKind> kinds) {
  if (kinds.empty()) throw DomainError("aggregator list must not be empty");
  std::sort(kinds.begin(), kinds.end());
  if (std::adjacent_find(kinds.begin(), kinds.end()) != kinds.end()) {
    throw DomainError("aggregator list contains duplicates");
  }
  return kinds;
}

std::vector<AggregatorKind> parse_aggregators(std::string_view list) {
  if (list == "all") return {std::begin(kAllAggregators), std::end(kAllAggregators)};
  std::vector<AggregatorKind> kinds;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    std::string_view tok = list.substr(start, comma - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (!tok.empty()) kinds.push_back(parse_aggregator(tok));
    start = comma + 1;
  }
  return canonical_kinds(std::move(kinds));
}

std::string join_aggregators(std::span<const AggregatorKind> kinds) {
  std::string out;
  for (auto k : kinds) {
    if (!out.empty()) out += ",";
    out += to_string(k);
  }
  return out;
}

Matrix agg_mean(const Matrix& x) {
  if (x.rows() == 0) throw DomainError("agg_mean: no rows");
  Matrix out(1, x.cols());
  auto o = out.row(0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] += r[j];
  }
  const double n = static_cast<double>(x.rows());
  for (double& v : o) v /= n;
  return out;
}

namespace {

Matrix central_power_mean(const Matrix& x, int power) {
  const Matrix mu = agg_mean(x);
  Matrix out(1, x.cols());
  auto o = out.row(0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double d = r[j] - mu(0, j);
      double p = d;
      for (int e = 1; e < power; ++e) p *= d;
      o[j] += p;
    }
  }
  const double n = static_cast<double>(x.rows());
  for (double& v : o) v /= n;
  return out;
}

}  // namespace

Matrix agg_std(const Matrix& x, double eps) {
  if (x.rows() == 0) throw DomainError("agg_std: no rows");
  Matrix out = central_power_mean(x, 2);
  for (double& v : out.values()) v = std::sqrt(v + eps);
  return out;
}

Matrix agg_moment(const Matrix& x, int m) {
  if (m != 3 && m != 4) throw DomainError("agg_moment: unsupported order " + std::to_string(m));
  if (x.rows() == 0) throw DomainError("agg_moment: no rows");
  return central_power_mean(x, m);
}

Matrix agg_median(const Matrix& x) {
  if (x.rows() == 0) throw DomainError("agg_median: no rows");
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  Matrix out(1, x.cols());
  ReductionTrace trace;
  const AggregatorKind k[] = {AggregatorKind::median};
  reduce_rows(k, 0.0, x, all, out.row(0), trace);
  return out;
}

void reduce_rows(std::span<const AggregatorKind> kinds, double std_epsilon, const Matrix& x,
                 std::span<const std::size_t> rows, std::span<double> concat, ReductionTrace& trace) {
  const std::size_t f = x.cols();
  const std::size_t n = rows.size();
  if (n == 0) throw DomainError("reduce_rows: empty neighborhood");
  if (concat.size() != kinds.size() * f) {
    throw DimensionError("reduce_rows: output length " + std::to_string(concat.size()) +
                         " != K*F = " + std::to_string(kinds.size() * f));
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  trace.mean.assign(f, 0.0);
  for (std::size_t r : rows) {
    auto xr = x.row(r);
    for (std::size_t j = 0; j < f; ++j) trace.mean[j] += xr[j];
  }
  for (double& v : trace.mean) v *= inv_n;

  // Central power sums, only the orders requested.
  bool need[5] = {false, false, false, false, false};
  for (auto k : kinds) {
    if (k == AggregatorKind::std_dev) need[2] = true;
    if (k == AggregatorKind::moment3) need[3] = true;
    if (k == AggregatorKind::moment4) need[4] = true;
  }
  std::vector<double> p2(need[2] ? f : 0, 0.0), p3(need[3] ? f : 0, 0.0), p4(need[4] ? f : 0, 0.0);
  if (need[2] || need[3] || need[4]) {
    for (std::size_t r : rows) {
      auto xr = x.row(r);
      for (std::size_t j = 0; j < f; ++j) {
        const double d = xr[j] - trace.mean[j];
        const double d2 = d * d;
        if (need[2]) p2[j] += d2;
        if (need[3]) p3[j] += d2 * d;
        if (need[4]) p4[j] += d2 * d2;
      }
    }
  }

  trace.std_value.clear();
  trace.median_pick.clear();
  std::vector<std::size_t> order(n);
  for (std::size_t b = 0; b < kinds.size(); ++b) {
    std::span<double> block = concat.subspan(b * f, f);
    switch (kinds[b]) {
      case AggregatorKind::mean:
        std::copy(trace.mean.begin(), trace.mean.end(), block.begin());
        break;
      case AggregatorKind::std_dev:
        trace.std_value.resize(f);
        for (std::size_t j = 0; j < f; ++j) {
          trace.std_value[j] = std::sqrt(p2[j] * inv_n + std_epsilon);
          block[j] = trace.std_value[j];
        }
        break;
      case AggregatorKind::moment3:
        for (std::size_t j = 0; j < f; ++j) block[j] = p3[j] * inv_n;
        break;
      case AggregatorKind::moment4:
        for (std::size_t j = 0; j < f; ++j) block[j] = p4[j] * inv_n;
        break;
      case AggregatorKind::median:
        trace.median_pick.resize(f);
        for (std::size_t j = 0; j < f; ++j) {
          std::iota(order.begin(), order.end(), std::size_t{0});
          std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
            return x(rows[a], j) < x(rows[c], j);
          });
          const std::size_t pick = order[n / 2];
          trace.median_pick[j] = pick;
          block[j] = x(rows[pick], j);
        }
        break;
    }
  }
}

void reduce_rows_backward(std::span<const AggregatorKind> kinds, const Matrix& x,
                          std::span<const std::size_t> rows, const ReductionTrace& trace,
                          std::span<const double> grad_concat, Matrix& grad_x) {
  const std::size_t f = x.cols();
  const std::size_t n = rows.size();
  if (grad_concat.size() != kinds.size() * f || trace.mean.size() != f || !grad_x.same_shape(x)) {
    throw InternalError("reduce_rows_backward: trace or gradient does not match the forward call");
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t b = 0; b < kinds.size(); ++b) {
    std::span<const double> g = grad_concat.subspan(b * f, f);
    switch (kinds[b]) {
      case AggregatorKind::mean:
        for (std::size_t r : rows) {
          auto gr = grad_x.row(r);
          for (std::size_t j = 0; j < f; ++j) gr[j] += g[j] * inv_n;
        }
        break;
      case AggregatorKind::median:
        if (trace.median_pick.size() != f) throw InternalError("reduce_rows_backward: missing median trace");
        for (std::size_t j = 0; j < f; ++j) grad_x(rows[trace.median_pick[j]], j) += g[j];
        break;
      case AggregatorKind::std_dev:
        if (trace.std_value.size() != f) throw InternalError("reduce_rows_backward: missing std trace");
        // d sqrt(v + eps) / dx_i = (x_i - mu) / (n * s); the mean's own
        // dependence cancels because the deviations sum to zero.
        for (std::size_t r : rows) {
          auto xr = x.row(r);
          auto gr = grad_x.row(r);
          for (std::size_t j = 0; j < f; ++j) {
            gr[j] += g[j] * (xr[j] - trace.mean[j]) * inv_n / trace.std_value[j];
          }
        }
        break;
      case AggregatorKind::moment3:
      case AggregatorKind::moment4: {
        // dM/dx_i = (m/n) * [(x_i - mu)^(m-1) - mean_k (x_k - mu)^(m-1)]
        const int m = kinds[b] == AggregatorKind::moment3 ? 3 : 4;
        std::vector<double> lower(f, 0.0);
        for (std::size_t r : rows) {
          auto xr = x.row(r);
          for (std::size_t j = 0; j < f; ++j) {
            const double d = xr[j] - trace.mean[j];
            lower[j] += m == 3 ? d * d : d * d * d;
          }
        }
        for (double& v : lower) v *= inv_n;
        const double scale = static_cast<double>(m) * inv_n;
        for (std::size_t r : rows) {
          auto xr = x.row(r);
          auto gr = grad_x.row(r);
          for (std::size_t j = 0; j < f; ++j) {
            const double d = xr[j] - trace.mean[j];
            const double dp = m == 3 ? d * d : d * d * d;
            gr[j] += g[j] * scale * (dp - lower[j]);
          }
        }
        break;
      }
    }
  }
}

MultiAggregator MultiAggregator::create(std::vector<AggregatorKind> kinds, std::size_t input_dim,
                                        std::size_t output_dim, double std_epsilon,
                                        std::uint64_t seed) {
  MultiAggregator agg;
  agg.kinds = canonical_kinds(std::move(kinds));
  agg.w_proj = xavier_init(agg.kinds.size() * input_dim, output_dim, seed);
  agg.b_proj = Matrix(1, output_dim);
  agg.std_epsilon = std_epsilon;
  return agg;
}

void MultiAggregator::check() const {
  if (kinds.empty()) throw DomainError("MultiAggregator: no aggregation kinds");
  if (w_proj.rows() % kinds.size() != 0) {
    throw DimensionError("MultiAggregator: projection rows " + std::to_string(w_proj.rows()) +
                         " not a multiple of K=" + std::to_string(kinds.size()));
  }
  if (b_proj.rows() != 1 || b_proj.cols() != w_proj.cols()) {
    throw DimensionError("MultiAggregator: bias " + b_proj.shape_string() + " vs projection " +
                         w_proj.shape_string());
  }
}

AggregationResult multi_aggregate(const MultiAggregator& agg, const Matrix& x) {
  agg.check();
  if (x.cols() * agg.kinds.size() != agg.w_proj.rows()) {
    throw DimensionError("multi_aggregate: input width " + std::to_string(x.cols()) + " with K=" +
                         std::to_string(agg.kinds.size()) + " does not match projection " +
                         agg.w_proj.shape_string());
  }
  if (x.rows() == 0) throw DomainError("multi_aggregate: empty neighborhood");
  AggregationResult res;
  res.trace.kinds = agg.kinds;
  res.trace.input = x;
  res.trace.concat = Matrix(1, agg.w_proj.rows());
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  reduce_rows(agg.kinds, agg.std_epsilon, x, all, res.trace.concat.row(0), res.trace.reduction);
  res.output = matmul(res.trace.concat, agg.w_proj);
  add_row_inplace(res.output, agg.b_proj);
  return res;
}

AggregationGrads multi_aggregate_backward(const MultiAggregator& agg, const AggregationTrace& trace,
                                          const Matrix& upstream) {
  if (trace.kinds != agg.kinds || trace.concat.cols() != agg.w_proj.rows()) {
    throw InternalError("multi_aggregate_backward: trace does not belong to this aggregator");
  }
  if (upstream.rows() != 1 || upstream.cols() != agg.w_proj.cols()) {
    throw DimensionError("multi_aggregate_backward: upstream " + upstream.shape_string() +
                         " vs output width " + std::to_string(agg.w_proj.cols()));
  }
  AggregationGrads g;
  g.grad_w_proj = matmul_tn(trace.concat, upstream);
  g.grad_b_proj = upstream;
  const Matrix grad_concat = matmul_nt(upstream, agg.w_proj);
  g.grad_x = Matrix(trace.input.rows(), trace.input.cols());
  std::vector<std::size_t> all(trace.input.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  reduce_rows_backward(agg.kinds, trace.input, all, trace.reduction,
                       grad_concat.row(0), g.grad_x);
  return g;
}

}  // namespace heg
