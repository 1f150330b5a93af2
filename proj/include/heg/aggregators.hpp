#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heg/matrix.hpp"

namespace heg {

// Declaration order is the concatenation order used by MultiAggregator and
// by checkpoints.
enum class AggregatorKind { mean, median, std_dev, moment3, moment4 };

inline constexpr AggregatorKind kAllAggregators[] = {AggregatorKind::mean, AggregatorKind::median,
                                                     AggregatorKind::std_dev, AggregatorKind::moment3,
                                                     AggregatorKind::moment4};

std::string_view to_string(AggregatorKind kind);
AggregatorKind parse_aggregator(std::string_view name);
// Comma-separated names ("mean,median,std,m3,m4" or "all"), returned in
// canonical order. Rejects duplicates and empty lists.
std::vector<AggregatorKind> parse_aggregators(std::string_view list);
std::string join_aggregators(std::span<const AggregatorKind> kinds);
std::vector<AggregatorKind> canonical_kinds(std::vector<AggregatorKind> kinds);

// Column-wise reducers over the rows of X, each returning a 1 x F row.
Matrix agg_mean(const Matrix& x);
// sqrt(biased variance + eps).
Matrix agg_std(const Matrix& x, double eps);
// Ascending stable sort per column, element at zero-based index rows/2.
Matrix agg_median(const Matrix& x);
// Raw central moment: mean of (x - mu)^m, m in {3, 4}.
Matrix agg_moment(const Matrix& x, int m);

// Per-neighborhood values the backward pass needs.
struct ReductionTrace {
  std::vector<double> mean;               // per column
  std::vector<double> std_value;          // per column, when std is active
  std::vector<std::size_t> median_pick;   // per column, position into the row list
};

// Writes the K reducer outputs of the listed rows of X into concat
// (length K * F) in canonical order.
void reduce_rows(std::span<const AggregatorKind> kinds, double std_epsilon, const Matrix& x,
                 std::span<const std::size_t> rows, std::span<double> concat, ReductionTrace& trace);

// Adds d(concat)/d(X) applied to grad_concat into the listed rows of grad_x.
void reduce_rows_backward(std::span<const AggregatorKind> kinds, const Matrix& x,
                          std::span<const std::size_t> rows, const ReductionTrace& trace,
                          std::span<const double> grad_concat, Matrix& grad_x);

struct MultiAggregator {
  std::vector<AggregatorKind> kinds;
  Matrix w_proj;  // K*F x F_a
  Matrix b_proj;  // 1 x F_a
  double std_epsilon = 1e-5;

  static MultiAggregator create(std::vector<AggregatorKind> kinds, std::size_t input_dim,
                                std::size_t output_dim, double std_epsilon, std::uint64_t seed);

  std::size_t input_dim() const { return kinds.empty() ? 0 : w_proj.rows() / kinds.size(); }
  std::size_t output_dim() const { return w_proj.cols(); }
  void check() const;
};

struct AggregationTrace {
  std::vector<AggregatorKind> kinds;
  Matrix input;
  Matrix concat;  // 1 x K*F
  ReductionTrace reduction;
};

struct AggregationResult {
  Matrix output;  // 1 x F_a
  AggregationTrace trace;
};

AggregationResult multi_aggregate(const MultiAggregator& agg, const Matrix& x);

struct AggregationGrads {
  Matrix grad_x;
  Matrix grad_w_proj;
  Matrix grad_b_proj;
};

AggregationGrads multi_aggregate_backward(const MultiAggregator& agg, const AggregationTrace& trace,
                                          const Matrix& upstream);

}  // namespace heg
