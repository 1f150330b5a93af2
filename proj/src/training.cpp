#include "heg/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "heg/errors.hpp"
#include "heg/numerics.hpp"
#include "heg/random.hpp"

namespace heg {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw DomainError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be >= 0");
  if (batch_size == 0) throw DomainError("batch_size must be >= 1");
  if (epochs == 0) throw DomainError("epochs must be >= 1");
  if (stride == 0) throw DomainError("stride must be >= 1");
  if (tau < 2 || tau % 2 != 0) throw DomainError("tau must be even and >= 2");
  if (!(box_scale > 0.0)) throw DomainError("box_scale must be positive");
  if (kinds.empty()) throw DomainError("kinds must not be empty");
  if (!(std_epsilon >= 0.0)) throw DomainError("std_epsilon must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw DomainError("beta1 and beta2 must lie in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw DomainError("adam_epsilon must be positive");
  if (threads == 0) throw DomainError("threads must be >= 1");
}

namespace {

json config_json_object(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"stride", c.stride},
              {"tau", c.tau},
              {"box_scale", c.box_scale},
              {"kinds", join_aggregators(c.kinds)},
              {"pooling", std::string(to_string(c.pooling))},
              {"compression", c.compression},
              {"std_epsilon", c.std_epsilon},
              {"hidden_activation", std::string(to_string(c.hidden_activation))},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"threads", c.threads},
              {"train_split", c.train_split},
              {"eval_split", c.eval_split}};
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw DomainError("expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  if (!(is >> out) || !is.eof()) throw DomainError("config field '" + key + "': bad value '" + v + "'");
  return out;
}

}  // namespace

std::string config_to_json(const TrainConfig& config) { return config_json_object(config).dump(2); }

void set_config_field(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "learning_rate") c.learning_rate = parse_number<double>(key, v);
  else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, v);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "stride") c.stride = parse_number<std::size_t>(key, v);
  else if (key == "tau") c.tau = parse_number<std::size_t>(key, v);
  else if (key == "box_scale") c.box_scale = parse_number<double>(key, v);
  else if (key == "kinds") c.kinds = parse_aggregators(v);
  else if (key == "pooling") c.pooling = parse_pooling(v);
  else if (key == "compression") c.compression = parse_bool(v);
  else if (key == "std_epsilon") c.std_epsilon = parse_number<double>(key, v);
  else if (key == "hidden_activation") c.hidden_activation = parse_activation(v);
  else if (key == "beta1") c.beta1 = parse_number<double>(key, v);
  else if (key == "beta2") c.beta2 = parse_number<double>(key, v);
  else if (key == "adam_epsilon") c.adam_epsilon = parse_number<double>(key, v);
  else if (key == "threads") c.threads = parse_number<unsigned>(key, v);
  else if (key == "train_split") c.train_split = v;
  else if (key == "eval_split") c.eval_split = v;
  else throw DomainError("unknown config field '" + key + "'");
}

TrainConfig config_from_json(const std::string& text, TrainConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw DataError("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    std::string text_value;
    if (value.is_string()) {
      text_value = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& item : value) {
        if (!text_value.empty()) text_value += ",";
        text_value += item.get<std::string>();
      }
    } else if (value.is_number_float()) {
      std::ostringstream os;
      os << std::setprecision(17) << value.get<double>();
      text_value = os.str();
    } else {
      text_value = value.dump();
    }
    set_config_field(base, key, text_value);
  }
  base.validate();
  return base;
}

NetworkConfig network_config(const TrainConfig& config, std::size_t feature_dim, std::size_t num_classes) {
  NetworkConfig n;
  n.feature_dim = feature_dim;
  n.num_classes = num_classes;
  n.kinds = config.kinds;
  n.std_epsilon = config.std_epsilon;
  n.compression = config.compression;
  n.pooling = config.pooling;
  n.hidden_activation = config.hidden_activation;
  n.seed = config.seed;
  return n;
}

TrainResult train(const TrainConfig& config, std::span<const TemporalBipartiteGraph* const> graphs,
                  std::size_t num_classes, const EpochCallback& on_epoch) {
  config.validate();
  if (graphs.empty()) throw DomainError("train: empty dataset");
  const std::size_t feature_dim = graphs.front()->feature_dim();
  for (const auto* g : graphs) {
    if (g->feature_dim() != feature_dim) {
      throw DimensionError("train: graph '" + g->video_id + "' has feature width " +
                           std::to_string(g->feature_dim()) + ", expected " + std::to_string(feature_dim));
    }
  }

  TrainResult result{HegNetwork::create(network_config(config, feature_dim, num_classes)), {}};
  HegNetwork& net = result.network;
  auto params = net.parameters();
  std::vector<AdamState> states;
  for (const ParamRef& p : params) {
    AdamHyper h;
    h.learning_rate = config.learning_rate;
    h.beta1 = config.beta1;
    h.beta2 = config.beta2;
    h.epsilon = config.adam_epsilon;
    h.weight_decay = p.decay ? config.weight_decay : 0.0;
    states.push_back(AdamState::for_shape(p.value.get(), h));
  }

  const std::size_t n = graphs.size();
  std::vector<double> sample_loss(n, 0.0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 1000 + epoch));
    const std::vector<std::size_t> order = rng.permutation(n);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<const TemporalBipartiteGraph*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(graphs[order[i]]);

      const LossAndGradients lg = loss_and_gradients(net, batch, config.threads);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      for (std::size_t i = start; i < end; ++i) sample_loss[order[i]] = lg.per_graph_loss[i - start];
      for (std::size_t p = 0; p < params.size(); ++p) {
        if (!lg.gradients[p].all_finite()) {
          throw NumericError("train: non-finite gradient for " + params[p].name + " at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch_index));
        }
        adam_step_inplace(params[p].value.get(), lg.gradients[p], states[p]);
      }
    }
    // Summed in dataset order so the value does not depend on the shuffle.
    const double mean = std::accumulate(sample_loss.begin(), sample_loss.end(), 0.0) / static_cast<double>(n);
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw DimensionError("average_precision: length mismatch");
  const auto total_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (total_pos == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!positive[order[rank]]) continue;
    ++hits;
    const double recall = static_cast<double>(hits) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(hits) / static_cast<double>(rank + 1);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

std::size_t argmax_class(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = c;
  return best;
}

EvalReport evaluate_probabilities(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size()) throw DimensionError("evaluate: probabilities and labels differ in length");
  if (probs.rows() == 0) throw DomainError("evaluate: empty dataset");
  const std::size_t classes = probs.cols();
  EvalReport r;
  r.samples = probs.rows();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= classes) throw DomainError("evaluate: label out of range");
    const std::size_t pred = argmax_class(probs.row(i));
    ++r.confusion[y][pred];
    if (pred == y) ++correct;
  }
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(probs.rows());

  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  std::vector<double> scores(probs.rows());
  for (std::size_t c = 0; c < classes; ++c) {
    auto pos = std::make_unique<bool[]>(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      scores[i] = probs(i, c);
      pos[i] = static_cast<std::size_t>(labels[i]) == c;
    }
    const auto ap = average_precision(scores, std::span<const bool>(pos.get(), probs.rows()));
    if (ap) {
      r.per_class_ap.push_back(100.0 * *ap);
      ap_sum += 100.0 * *ap;
      ++ap_count;
    } else {
      r.per_class_ap.push_back(std::nullopt);
      r.notes.push_back("class " + std::to_string(c) + " has no positives; excluded from mAP");
    }
  }
  r.map = ap_count ? ap_sum / static_cast<double>(ap_count) : 0.0;
  return r;
}

EvalReport evaluate(const HegNetwork& net, std::span<const TemporalBipartiteGraph* const> graphs,
                    unsigned threads) {
  if (graphs.empty()) throw DomainError("evaluate: empty dataset");
  for (const auto* g : graphs) {
    if (g->feature_dim() != net.config.feature_dim) {
      throw DataError("evaluate: graph '" + g->video_id + "' has feature width " +
                      std::to_string(g->feature_dim()) + ", model expects " +
                      std::to_string(net.config.feature_dim));
    }
  }
  Matrix probs(graphs.size(), net.head.num_classes());
  std::vector<int> labels(graphs.size());
  parallel_for(graphs.size(), threads, [&](std::size_t i) {
    const Matrix p = predict(net, *graphs[i]);
    std::copy(p.row(0).begin(), p.row(0).end(), probs.row(i).begin());
    labels[i] = graphs[i]->label;
  });
  return evaluate_probabilities(probs, labels);
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "samples   " << r.samples << "\n";
  os << "accuracy  " << r.accuracy << " %\n";
  os << "mAP       " << r.map << " %\n";
  for (std::size_t c = 0; c < r.per_class_ap.size(); ++c) {
    os << "AP[" << c << "]     ";
    if (r.per_class_ap[c]) os << *r.per_class_ap[c] << " %\n";
    else os << "n/a\n";
  }
  os << "confusion (rows = true class)\n";
  for (const auto& row : r.confusion) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? " " : "  ") << std::setw(6) << row[c];
    os << "\n";
  }
  for (const auto& note : r.notes) os << "note: " << note << "\n";
  return os.str();
}

std::string report_json(const EvalReport& r) {
  json ap = json::array();
  for (const auto& v : r.per_class_ap) ap.push_back(v ? json(*v) : json(nullptr));
  json j = {{"samples", r.samples}, {"accuracy", r.accuracy}, {"map", r.map},
            {"per_class_ap", ap},   {"confusion", r.confusion}, {"notes", r.notes}};
  return j.dump();
}

std::vector<AblationCell> ablation_grid(const std::string& grid, const TrainConfig& base) {
  std::vector<AblationCell> cells;
  if (grid == "table3") {
    std::vector<AggregatorKind> kinds;
    for (AggregatorKind k : kAllAggregators) {
      kinds.push_back(k);
      AblationCell c;
      c.config = base;
      c.config.kinds = kinds;
      c.name = join_aggregators(kinds);
      cells.push_back(std::move(c));
    }
  } else if (grid == "pooling") {
    for (PoolingMode m : kAllPoolingModes) {
      AblationCell c;
      c.config = base;
      c.config.pooling = m;
      c.name = std::string(to_string(m));
      cells.push_back(std::move(c));
    }
  } else if (grid == "compression") {
    for (bool on : {false, true}) {
      AblationCell c;
      c.config = base;
      c.config.compression = on;
      c.name = on ? "with_compression" : "without_compression";
      cells.push_back(std::move(c));
    }
  } else {
    // Otherwise an aggregator list: a single cell.
    AblationCell c;
    c.config = base;
    try {
      c.config.kinds = parse_aggregators(grid);
    } catch (const DomainError&) {
      throw DomainError("unknown ablation grid '" + grid +
                        "' (table3, pooling, compression or an aggregator list)");
    }
    c.name = join_aggregators(c.config.kinds);
    cells.push_back(std::move(c));
  }
  return cells;
}

void run_ablation(std::vector<AblationCell>& cells, std::span<const TemporalBipartiteGraph* const> train_set,
                  std::span<const TemporalBipartiteGraph* const> eval_set, std::size_t num_classes,
                  const std::function<void(const AblationCell&)>& on_cell) {
  for (AblationCell& cell : cells) {
    try {
      TrainResult tr = train(cell.config, train_set, num_classes);
      cell.final_loss = tr.epoch_loss.back();
      cell.report = evaluate(tr.network, eval_set, cell.config.threads);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    if (on_cell) on_cell(cell);
  }
}

std::size_t non_decreasing_pairs(std::span<const AblationCell> cells) {
  std::size_t count = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i - 1].report && cells[i].report && cells[i].report->accuracy >= cells[i - 1].report->accuracy) {
      ++count;
    }
  }
  return count;
}

std::string ablation_table(std::span<const AblationCell> cells) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "cell" << std::right << std::setw(10) << "acc %" << std::setw(10)
     << "mAP %" << std::setw(14) << "final loss" << "\n";
  os << std::fixed;
  for (const AblationCell& c : cells) {
    os << std::left << std::setw(28) << c.name << std::right;
    if (c.report) {
      os << std::setprecision(2) << std::setw(10) << c.report->accuracy << std::setw(10) << c.report->map
         << std::setprecision(6) << std::setw(14) << *c.final_loss << "\n";
    } else {
      os << "  failed: " << c.error << "\n";
    }
  }
  return os.str();
}

std::string ablation_jsonl(std::span<const AblationCell> cells) {
  std::string out;
  for (const AblationCell& c : cells) {
    json j = {{"cell", c.name},
              {"kinds", join_aggregators(c.config.kinds)},
              {"pooling", std::string(to_string(c.config.pooling))},
              {"compression", c.config.compression}};
    if (c.report) {
      j["accuracy"] = c.report->accuracy;
      j["map"] = c.report->map;
      j["final_loss"] = *c.final_loss;
    } else {
      j["error"] = c.error;
    }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace heg
