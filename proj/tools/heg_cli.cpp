// Command-line front end. Talks to the library only through heg.h.
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "heg/heg.h"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric, 4 internal.
struct Failure {
  int code;
};

// Progress goes to stderr; timestamps never reach output files.
void log_line(const std::string& text) {
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
  std::fprintf(stderr, "[%s] %s\n", stamp, text.c_str());
}

void check(heg_status s, const std::string& context) {
  if (s == HEG_OK) return;
  std::fprintf(stderr, "heg: %s: %s: %s\n", context.c_str(), heg_status_name(s), heg_last_error());
  throw Failure{static_cast<int>(s)};
}

template <typename Fn>
std::string read_string(Fn&& fn, const std::string& context) {
  std::size_t needed = 0;
  check(fn(nullptr, 0, &needed), context);
  std::string out(needed, '\0');
  check(fn(out.data(), out.size(), &needed), context);
  out.resize(needed - 1);
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::fprintf(stderr, "heg: cannot write %s\n", path.string().c_str());
    throw Failure{HEG_ERR_DATA};
  }
}

// Relative output paths land under $HEG_OUTPUT_ROOT when it is set.
fs::path output_path(const std::string& p) {
  fs::path path(p);
  const char* root = std::getenv("HEG_OUTPUT_ROOT");
  if (root && *root && path.is_relative()) path = fs::path(root) / path;
  return path;
}

fs::path prepare_dir(const std::string& p) {
  const fs::path dir = output_path(p);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::fprintf(stderr, "heg: cannot create %s: %s\n", dir.string().c_str(), ec.message().c_str());
    throw Failure{HEG_ERR_DATA};
  }
  return dir;
}

struct ConfigHandle {
  heg_config* ptr = nullptr;
  ConfigHandle() { check(heg_config_create(&ptr), "config"); }
  ~ConfigHandle() { heg_config_destroy(ptr); }
  ConfigHandle(const ConfigHandle&) = delete;
  ConfigHandle& operator=(const ConfigHandle&) = delete;
};

struct DatasetHandle {
  heg_dataset* ptr = nullptr;
  ~DatasetHandle() { heg_dataset_destroy(ptr); }
};

struct ModelHandle {
  heg_model* ptr = nullptr;
  ~ModelHandle() { heg_model_destroy(ptr); }
};

// Config-file path plus the flags that may override it. Every training
// field is reachable through --set key=value; the common ones have flags.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;
  std::optional<unsigned> threads;

  void add_to(CLI::App* app, bool with_aggregators) {
    app->add_option("--config", file, "JSON config file");
    const std::pair<const char*, const char*> flags[] = {
        {"--lr,--learning-rate", "learning_rate"},
        {"--weight-decay", "weight_decay"},
        {"--batch-size", "batch_size"},
        {"--epochs", "epochs"},
        {"--seed", "seed"},
        {"--stride", "stride"},
        {"--tau", "tau"},
        {"--box-scale", "box_scale"},
        {"--pooling", "pooling"},
        {"--compression", "compression"},
        {"--std-epsilon", "std_epsilon"},
        {"--train-split", "train_split"},
        {"--eval-split", "eval_split"},
    };
    for (const auto& [flag, key] : flags) app->add_option(flag, values[key], std::string("sets ") + key);
    if (with_aggregators) app->add_option("--aggregators", values["kinds"], "comma list or 'all'");
    app->add_option("--set", sets, "key=value config override")->take_all();
    app->add_option("--threads", threads, "worker thread cap (1 = bit-reproducible)");
  }

  // defaults < config file < environment (threads) < flags
  void apply(heg_config* cfg) const {
    if (!file.empty()) check(heg_config_load(cfg, file.c_str()), "config " + file);
    if (const char* env = std::getenv("HEG_THREADS"); env && *env) {
      check(heg_config_set(cfg, "threads", env), "HEG_THREADS");
    }
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "heg: --set expects key=value, got '%s'\n", s.c_str());
        throw Failure{HEG_ERR_USAGE};
      }
      check(heg_config_set(cfg, s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()), "--set " + s);
    }
    for (const auto& [key, value] : values) {
      if (!value.empty()) check(heg_config_set(cfg, key.c_str(), value.c_str()), "--" + key);
    }
    if (threads) check(heg_config_set(cfg, "threads", std::to_string(*threads).c_str()), "--threads");
  }
};

std::string config_json(const heg_config* cfg) {
  return read_string([&](char* b, std::size_t c, std::size_t* n) { return heg_config_json(cfg, b, c, n); },
                     "config");
}

nlohmann::json resolved(const heg_config* cfg) { return nlohmann::json::parse(config_json(cfg)); }

void open_dataset(const std::string& dir, const heg_config* cfg, DatasetHandle& ds) {
  const auto stride = resolved(cfg).at("stride").get<std::size_t>();
  check(heg_dataset_open(dir.c_str(), stride, 0, &ds.ptr), "dataset " + dir);
}

int run_synth(const heg_synth_options& opts, const std::string& out) {
  const fs::path dir = prepare_dir(out);
  check(heg_synth_generate(&opts, dir.string().c_str()), "synth");
  log_line("wrote dataset to " + dir.string());
  return 0;
}

int run_build_graph(const ConfigFlags& flags, const std::string& data, const std::string& out) {
  ConfigHandle cfg;
  flags.apply(cfg.ptr);
  const fs::path dir = prepare_dir(out);
  write_file(dir / "config.json", config_json(cfg.ptr) + "\n");
  std::size_t n = 0;
  check(heg_build_graphs(data.c_str(), cfg.ptr, dir.string().c_str(), &n), "build-graph");
  log_line("wrote " + std::to_string(n) + " graphs");
  return 0;
}

int run_train(const ConfigFlags& flags, const std::string& data, const std::string& out) {
  ConfigHandle cfg;
  flags.apply(cfg.ptr);
  const fs::path dir = prepare_dir(out);
  write_file(dir / "config.json", config_json(cfg.ptr) + "\n");

  DatasetHandle ds;
  open_dataset(data, cfg.ptr, ds);
  ModelHandle model;
  auto on_epoch = [](std::size_t epoch, double loss, void*) {
    if (epoch % 10 == 9 || epoch == 0) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f", epoch + 1, loss);
      log_line(buf);
    }
  };
  check(heg_train(cfg.ptr, ds.ptr, on_epoch, nullptr, &model.ptr), "train");

  std::size_t epochs = 0;
  check(heg_model_epoch_count(model.ptr, &epochs), "train");
  std::string log = "epoch\tmean_loss\n";
  for (std::size_t e = 0; e < epochs; ++e) {
    double loss = 0.0;
    check(heg_model_epoch_loss(model.ptr, e, &loss), "train");
    char line[64];
    std::snprintf(line, sizeof line, "%zu\t%.17g\n", e + 1, loss);
    log += line;
  }
  write_file(dir / "loss.tsv", log);
  const fs::path ckpt = dir / "model.hegc";
  check(heg_model_save(model.ptr, ckpt.string().c_str()), "save " + ckpt.string());
  log_line("checkpoint " + ckpt.string());
  return 0;
}

int run_eval(const ConfigFlags& flags, const std::string& model_path, const std::string& data,
             const std::string& out) {
  ConfigHandle cfg;
  flags.apply(cfg.ptr);
  ModelHandle model;
  check(heg_model_load(model_path.c_str(), &model.ptr), "checkpoint " + model_path);
  DatasetHandle ds;
  open_dataset(data, cfg.ptr, ds);
  std::size_t model_dim = 0;
  std::size_t data_dim = 0;
  check(heg_model_dims(model.ptr, &model_dim, nullptr, nullptr), "model");
  check(heg_dataset_feature_dim(ds.ptr, &data_dim), "dataset");
  if (model_dim != data_dim) {
    std::fprintf(stderr, "heg: dataset feature width %zu does not match model input %zu\n", data_dim, model_dim);
    throw Failure{HEG_ERR_DATA};
  }
  const nlohmann::json resolved_cfg = resolved(cfg.ptr);
  const auto split = resolved_cfg.at("eval_split").get<std::string>();
  const auto threads = resolved_cfg.at("threads").get<unsigned>();
  heg_report* raw = nullptr;
  check(heg_evaluate(model.ptr, ds.ptr, split.c_str(), threads, &raw), "eval");
  std::unique_ptr<heg_report, void (*)(heg_report*)> report(raw, heg_report_destroy);
  const std::string text = read_string(
      [&](char* b, std::size_t c, std::size_t* n) { return heg_report_text(report.get(), b, c, n); }, "report");
  const std::string json = read_string(
      [&](char* b, std::size_t c, std::size_t* n) { return heg_report_json(report.get(), b, c, n); }, "report");
  const fs::path dir = prepare_dir(out);
  write_file(dir / "config.json", config_json(cfg.ptr) + "\n");
  write_file(dir / "report.txt", text);
  write_file(dir / "report.jsonl", json + "\n");
  std::fputs(text.c_str(), stdout);
  return 0;
}

int run_ablate(const ConfigFlags& flags, const std::string& grid, const std::string& data, const std::string& out) {
  ConfigHandle cfg;
  flags.apply(cfg.ptr);
  const fs::path dir = prepare_dir(out);
  write_file(dir / "config.json", config_json(cfg.ptr) + "\n");
  DatasetHandle ds;
  open_dataset(data, cfg.ptr, ds);
  auto on_cell = [](std::size_t, const char* name, int ok, double acc, double map, void*) {
    char buf[160];
    if (ok) std::snprintf(buf, sizeof buf, "cell %s acc %.2f mAP %.2f", name, acc, map);
    else std::snprintf(buf, sizeof buf, "cell %s failed", name);
    log_line(buf);
  };
  heg_ablation* raw = nullptr;
  check(heg_ablate(cfg.ptr, ds.ptr, grid.c_str(), on_cell, nullptr, &raw), "ablate");
  std::unique_ptr<heg_ablation, void (*)(heg_ablation*)> result(raw, heg_ablation_destroy);
  const std::string table = read_string(
      [&](char* b, std::size_t c, std::size_t* n) { return heg_ablation_table(result.get(), b, c, n); }, "ablate");
  const std::string jsonl = read_string(
      [&](char* b, std::size_t c, std::size_t* n) { return heg_ablation_jsonl(result.get(), b, c, n); }, "ablate");
  std::size_t cells = 0;
  std::size_t pairs = 0;
  check(heg_ablation_cell_count(result.get(), &cells), "ablate");
  check(heg_ablation_non_decreasing_pairs(result.get(), &pairs), "ablate");
  std::string summary = table;
  if (cells > 1) {
    summary += "non-decreasing adjacent pairs: " + std::to_string(pairs) + " of " + std::to_string(cells - 1) + "\n";
  }
  write_file(dir / "ablation.txt", summary);
  write_file(dir / "ablation.jsonl", jsonl);
  std::fputs(summary.c_str(), stdout);
  return 0;
}

int run_gradcheck(std::uint64_t seed, double tolerance) {
  std::size_t count = 0;
  check(heg_gradcheck(seed, nullptr, 0, &count), "gradcheck");
  std::vector<heg_gradcheck_entry> entries(count);
  check(heg_gradcheck(seed, entries.data(), entries.size(), &count), "gradcheck");
  bool ok = true;
  std::printf("%-22s %14s %8s  %s\n", "component", "max rel error", "entries", "status");
  for (const auto& e : entries) {
    const bool pass = e.max_relative_error < tolerance;
    ok = ok && pass;
    std::printf("%-22s %14.3e %8zu  %s\n", e.component, e.max_relative_error, e.entries, pass ? "PASS" : "FAIL");
  }
  std::printf("%s (tolerance %.0e)\n", ok ? "all components pass" : "gradient check FAILED", tolerance);
  return ok ? 0 : HEG_ERR_NUMERIC;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-order evolving graph classifier"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(heg_version()));

  heg_synth_options synth;
  heg_synth_options_default(&synth);
  std::string synth_task = "skew_coded";
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset directory");
  synth_cmd->add_option("--out", synth_out, "output dataset directory")->required();
  synth_cmd->add_option("--task", synth_task, "skew_coded | variance_coded | mean_coded");
  synth_cmd->add_option("--videos", synth.num_videos, "number of videos");
  synth_cmd->add_option("--frames", synth.frames_per_video, "frames per video");
  synth_cmd->add_option("--min-objects", synth.min_objects, "fewest objects per frame");
  synth_cmd->add_option("--max-objects", synth.max_objects, "most objects per frame");
  synth_cmd->add_option("--feature-dim", synth.feature_dim, "node feature width");
  synth_cmd->add_option("--seed", synth.seed, "generator and split seed");
  synth_cmd->add_option("--train-fraction", synth.train_fraction, "share of videos in the train split");
  synth_cmd->add_option("--val-fraction", synth.val_fraction, "share of videos in the val split");

  ConfigFlags build_flags;
  std::string build_data;
  std::string build_out;
  auto* build_cmd = app.add_subcommand("build-graph", "build and cache graphs and tube windows");
  build_cmd->add_option("--data", build_data, "dataset directory")->required();
  build_cmd->add_option("--out", build_out, "output directory")->required();
  build_flags.add_to(build_cmd, false);

  ConfigFlags train_flags;
  std::string train_data;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train a model, write checkpoint and loss log");
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_flags.add_to(train_cmd, true);

  ConfigFlags eval_flags;
  std::string eval_model;
  std::string eval_data;
  std::string eval_out;
  std::string eval_split;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--model", eval_model, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--out", eval_out, "report directory")->required();
  eval_cmd->add_option("--split", eval_flags.values["eval_split"], "split to evaluate (default test)");
  eval_cmd->add_option("--config", eval_flags.file, "JSON config file");
  eval_cmd->add_option("--stride", eval_flags.values["stride"], "frame sampling stride");
  eval_cmd->add_option("--threads", eval_flags.threads, "worker thread cap");

  ConfigFlags ablate_flags;
  std::string ablate_grid;
  std::string ablate_data;
  std::string ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate a grid of configurations");
  ablate_cmd->add_option("--data", ablate_data, "dataset directory")->required();
  ablate_cmd->add_option("--out", ablate_out, "output directory")->required();
  auto* agg_opt = ablate_cmd->add_option("--aggregators", ablate_grid, "table3 or an aggregator list");
  auto* grid_opt = ablate_cmd->add_option("--grid", ablate_grid, "table3 | pooling | compression");
  agg_opt->excludes(grid_opt);
  ablate_flags.add_to(ablate_cmd, false);

  std::uint64_t gc_seed = 7;
  double gc_tol = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gc_cmd->add_option("--seed", gc_seed, "seed for the probe graph and parameters");
  gc_cmd->add_option("--tolerance", gc_tol, "max relative error allowed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth_cmd) {
      synth.task = synth_task.c_str();
      return run_synth(synth, synth_out);
    }
    if (*build_cmd) return run_build_graph(build_flags, build_data, build_out);
    if (*train_cmd) return run_train(train_flags, train_data, train_out);
    if (*eval_cmd) return run_eval(eval_flags, eval_model, eval_data, eval_out);
    if (*ablate_cmd) {
      if (ablate_grid.empty()) {
        std::fprintf(stderr, "heg: ablate needs --aggregators table3 or --grid NAME\n");
        return 1;
      }
      return run_ablate(ablate_flags, ablate_grid, ablate_data, ablate_out);
    }
    if (*gc_cmd) return run_gradcheck(gc_seed, gc_tol);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "heg: %s\n", e.what());
    return 4;
  }
  return 1;
}
