#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heg/network.hpp"

namespace heg {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.5;  // coupled L2 on weight matrices, not biases
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  std::size_t stride = 5;
  std::size_t tau = 16;
  double box_scale = 1.5;
  std::vector<AggregatorKind> kinds{std::begin(kAllAggregators), std::end(kAllAggregators)};
  PoolingMode pooling = PoolingMode::attention;
  bool compression = true;
  double std_epsilon = 1e-5;
  Activation hidden_activation = Activation::relu;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  unsigned threads = 1;
  std::string train_split = "train";
  std::string eval_split = "test";

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string config_to_json(const TrainConfig& config);
// Unknown keys are rejected; missing keys keep the values already in `base`.
TrainConfig config_from_json(const std::string& text, TrainConfig base = {});
// Sets one field from its textual value, e.g. ("kinds", "mean,median").
void set_config_field(TrainConfig& config, const std::string& key, const std::string& value);

NetworkConfig network_config(const TrainConfig& config, std::size_t feature_dim, std::size_t num_classes);

struct TrainResult {
  HegNetwork network;
  std::vector<double> epoch_loss;  // mean per-graph loss seen during each epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Deterministic for a given config: initialization, shuffling and gradient
// reduction order are all fixed by the seed. Throws NumericError on a
// non-finite loss, naming the epoch and batch.
TrainResult train(const TrainConfig& config, std::span<const TemporalBipartiteGraph* const> graphs,
                  std::size_t num_classes, const EpochCallback& on_epoch = {});

// All-point interpolated average precision in [0, 1]: sum over ranks of
// (recall gain) x (precision at that rank), scores sorted descending with
// ties kept in input order. Returns nullopt when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const bool> positive);

struct EvalReport {
  double accuracy = 0.0;  // percent
  double map = 0.0;       // percent, macro mean over classes with positives
  std::vector<std::optional<double>> per_class_ap;  // percent
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::string> notes;
  std::size_t samples = 0;
};

// Predicted class is the argmax, lowest class index on ties.
std::size_t argmax_class(std::span<const double> probs);
EvalReport evaluate_probabilities(const Matrix& probs, std::span<const int> labels);
EvalReport evaluate(const HegNetwork& net, std::span<const TemporalBipartiteGraph* const> graphs,
                    unsigned threads = 1);

std::string report_text(const EvalReport& report);
std::string report_json(const EvalReport& report);

struct AblationCell {
  std::string name;
  TrainConfig config;
  std::optional<EvalReport> report;
  std::optional<double> final_loss;
  std::string error;
};

// Named grids: "table3" (cumulative aggregator subsets mean, +median, +std,
// +m3, +m4), "pooling" (attention, mean, sum, max), "compression" (off, on).
// Any other string is read as an aggregator list and gives one cell.
std::vector<AblationCell> ablation_grid(const std::string& grid, const TrainConfig& base);

// Trains and evaluates every cell. A failing cell records its error and the
// grid continues.
void run_ablation(std::vector<AblationCell>& cells, std::span<const TemporalBipartiteGraph* const> train_set,
                  std::span<const TemporalBipartiteGraph* const> eval_set, std::size_t num_classes,
                  const std::function<void(const AblationCell&)>& on_cell = {});

// Number of adjacent cell pairs whose accuracy does not decrease.
std::size_t non_decreasing_pairs(std::span<const AblationCell> cells);

std::string ablation_table(std::span<const AblationCell> cells);
std::string ablation_jsonl(std::span<const AblationCell> cells);

}  // namespace heg
