#include "heg/heg.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "heg/dataset.hpp"
#include "heg/errors.hpp"
#include "heg/gradcheck.hpp"
#include "heg/training.hpp"

struct heg_config {
  heg::TrainConfig value;
};

struct heg_dataset {
  heg::Dataset value;
};

struct heg_model {
  heg::HegNetwork network;
  std::vector<double> epoch_loss;
};

struct heg_report {
  heg::EvalReport value;
};

struct heg_ablation {
  std::vector<heg::AblationCell> cells;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string last_error;

heg_status fail(heg_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
heg_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return HEG_OK;
  } catch (const heg::NumericError& e) {
    return fail(HEG_ERR_NUMERIC, e.what());
  } catch (const heg::DataError& e) {
    return fail(HEG_ERR_DATA, e.what());
  } catch (const heg::DimensionError& e) {
    return fail(HEG_ERR_DATA, e.what());
  } catch (const heg::DomainError& e) {
    return fail(HEG_ERR_USAGE, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(HEG_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HEG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HEG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HEG_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw heg::DomainError(std::string(what) + " must not be NULL");
}

void copy_out(const std::string& text, char* buf, std::size_t cap, std::size_t* needed) {
  require(needed != nullptr, "needed");
  *needed = text.size() + 1;
  if (buf != nullptr && cap >= text.size() + 1) std::memcpy(buf, text.c_str(), text.size() + 1);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw heg::DataError("cannot write " + path.string());
  out << text;
  if (!out) throw heg::DataError("write failed: " + path.string());
}

}  // namespace

extern "C" {

const char* heg_version(void) { return "1.0.0"; }

const char* heg_last_error(void) { return last_error.c_str(); }

const char* heg_status_name(heg_status status) {
  switch (status) {
    case HEG_OK: return "ok";
    case HEG_ERR_USAGE: return "usage error";
    case HEG_ERR_DATA: return "data error";
    case HEG_ERR_NUMERIC: return "numeric failure";
    case HEG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

heg_status heg_config_create(heg_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new heg_config{};
  });
}

void heg_config_destroy(heg_config* config) { delete config; }

heg_status heg_config_load(heg_config* config, const char* path) {
  return guarded([&] {
    require(config && path, "config and path");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw heg::DataError(std::string("cannot open config ") + path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      config->value = heg::config_from_json(text, config->value);
    } catch (const heg::DomainError& e) {
      throw heg::DomainError(std::string(path) + ": " + e.what());
    }
  });
}

heg_status heg_config_set(heg_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "config, key and value");
    heg::TrainConfig next = config->value;
    heg::set_config_field(next, key, value);
    next.validate();
    config->value = next;
  });
}

heg_status heg_config_json(const heg_config* config, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(config, "config");
    copy_out(heg::config_to_json(config->value), buf, cap, needed);
  });
}

heg_status heg_config_save(const heg_config* config, const char* path) {
  return guarded([&] {
    require(config && path, "config and path");
    write_text(path, heg::config_to_json(config->value) + "\n");
  });
}

void heg_synth_options_default(heg_synth_options* options) {
  if (options == nullptr) return;
  const heg::SynthSpec spec;
  const heg::SplitFractions fractions;
  options->task = "skew_coded";
  options->num_videos = spec.num_videos;
  options->frames_per_video = spec.frames_per_video;
  options->min_objects = spec.min_objects;
  options->max_objects = spec.max_objects;
  options->feature_dim = spec.feature_dim;
  options->seed = spec.seed;
  options->train_fraction = fractions.train;
  options->val_fraction = fractions.val;
}

heg_status heg_synth_generate(const heg_synth_options* options, const char* out_dir) {
  return guarded([&] {
    require(options && out_dir, "options and out_dir");
    heg::SynthSpec spec;
    spec.task = heg::parse_task(options->task ? options->task : "skew_coded");
    spec.num_videos = options->num_videos;
    spec.frames_per_video = options->frames_per_video;
    spec.min_objects = options->min_objects;
    spec.max_objects = options->max_objects;
    spec.feature_dim = options->feature_dim;
    spec.seed = options->seed;
    const heg::SplitFractions fractions{options->train_fraction, options->val_fraction,
                                        1.0 - options->train_fraction - options->val_fraction};
    heg::write_dataset(out_dir, heg::generate(spec), fractions, options->seed);
  });
}

heg_status heg_dataset_open(const char* dir, size_t stride, size_t expected_feature_dim, heg_dataset** out) {
  return guarded([&] {
    require(dir && out, "dir and out");
    *out = new heg_dataset{heg::load_dataset(dir, stride, expected_feature_dim)};
  });
}

void heg_dataset_destroy(heg_dataset* dataset) { delete dataset; }

heg_status heg_dataset_split_size(const heg_dataset* dataset, const char* split, size_t* out) {
  return guarded([&] {
    require(dataset && split && out, "dataset, split and out");
    *out = dataset->value.split(split).size();
  });
}

heg_status heg_dataset_feature_dim(const heg_dataset* dataset, size_t* out) {
  return guarded([&] {
    require(dataset && out, "dataset and out");
    *out = dataset->value.feature_dim;
  });
}

heg_status heg_dataset_num_classes(const heg_dataset* dataset, size_t* out) {
  return guarded([&] {
    require(dataset && out, "dataset and out");
    *out = dataset->value.num_classes;
  });
}

heg_status heg_build_graphs(const char* dataset_dir, const heg_config* config, const char* out_dir,
                            size_t* graphs_written) {
  return guarded([&] {
    require(dataset_dir && config && out_dir, "dataset_dir, config and out_dir");
    const heg::TrainConfig& cfg = config->value;
    const fs::path in(dataset_dir);
    const fs::path out(out_dir);
    fs::create_directories(out / "graphs");
    const auto videos = heg::read_annotations(in / "annotations.jsonl");
    std::string summary;
    std::string tubes;
    for (const heg::VideoSequence& v : videos) {
      const heg::FeatureTable table = heg::read_feature_table(in / "features" / (v.video_id + ".hegf"));
      const heg::TemporalBipartiteGraph g = heg::build_graph(v, table.lookup(), cfg.stride);
      heg::write_graph(out / "graphs" / (v.video_id + ".hegg"), g);

      std::vector<std::size_t> sizes;
      for (const auto& part : g.partitions) sizes.push_back(part.size());
      const heg::GraphStats stats = heg::count_stats(g);
      summary += nlohmann::json{{"video_id", v.video_id},
                                {"label", v.label},
                                {"nodes", stats.node_count},
                                {"edges", stats.directed_edge_count},
                                {"partition_sizes", sizes},
                                {"feature_dim", g.feature_dim()}}
                     .dump() +
                 "\n";
      for (std::size_t p = 0; p < g.node_count(); ++p) {
        const heg::NodeOrigin& o = g.origins[p];
        for (const heg::Detection* d : v.detections_at(o.frame_index)) {
          if (d->object_id != o.object_id) continue;
          const heg::TubeWindow t = heg::tube_window(*d, v, cfg.tau, cfg.box_scale);
          tubes += nlohmann::json{{"video_id", v.video_id},
                                  {"node", p},
                                  {"object_id", t.object_id},
                                  {"center_frame", t.center_frame},
                                  {"start", t.start},
                                  {"end", t.end},
                                  {"crop_box", {t.crop_box.x1(), t.crop_box.y1(), t.crop_box.x2(), t.crop_box.y2()}},
                                  {"shape", {t.tau, 256, 256, t.channels}}}
                       .dump() +
                   "\n";
        }
      }
    }
    write_text(out / "graphs.jsonl", summary);
    write_text(out / "tubes.jsonl", tubes);
    if (graphs_written) *graphs_written = videos.size();
  });
}

heg_status heg_train(const heg_config* config, const heg_dataset* dataset, heg_epoch_fn on_epoch, void* user,
                     heg_model** out) {
  return guarded([&] {
    require(config && dataset && out, "config, dataset and out");
    const auto graphs = dataset->value.split(config->value.train_split);
    if (graphs.empty()) throw heg::DataError("split '" + config->value.train_split + "' is empty");
    heg::EpochCallback cb;
    if (on_epoch) cb = [&](std::size_t epoch, double loss) { on_epoch(epoch, loss, user); };
    heg::TrainResult r = heg::train(config->value, graphs, dataset->value.num_classes, cb);
    *out = new heg_model{std::move(r.network), std::move(r.epoch_loss)};
  });
}

void heg_model_destroy(heg_model* model) { delete model; }

heg_status heg_model_save(const heg_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model and path");
    heg::save_checkpoint(path, model->network);
  });
}

heg_status heg_model_load(const char* path, heg_model** out) {
  return guarded([&] {
    require(path && out, "path and out");
    *out = new heg_model{heg::load_checkpoint(path), {}};
  });
}

heg_status heg_model_dims(const heg_model* model, size_t* input_dim, size_t* hidden_dim, size_t* output_dim) {
  return guarded([&] {
    require(model, "model");
    if (input_dim) *input_dim = model->network.model.input_dim();
    if (hidden_dim) *hidden_dim = model->network.model.hidden_dim();
    if (output_dim) *output_dim = model->network.model.output_dim();
  });
}

heg_status heg_model_epoch_count(const heg_model* model, size_t* out) {
  return guarded([&] {
    require(model && out, "model and out");
    *out = model->epoch_loss.size();
  });
}

heg_status heg_model_epoch_loss(const heg_model* model, size_t epoch, double* out) {
  return guarded([&] {
    require(model && out, "model and out");
    if (epoch >= model->epoch_loss.size()) throw heg::DomainError("epoch index out of range");
    *out = model->epoch_loss[epoch];
  });
}

heg_status heg_model_parameter_count(const heg_model* model, size_t* out) {
  return guarded([&] {
    require(model && out, "model and out");
    std::size_t n = 0;
    for (const auto& [name, m] : model->network.parameters()) n += m.get().values().size();
    *out = n;
  });
}

heg_status heg_evaluate(const heg_model* model, const heg_dataset* dataset, const char* split, unsigned threads,
                        heg_report** out) {
  return guarded([&] {
    require(model && dataset && split && out, "model, dataset, split and out");
    *out = new heg_report{heg::evaluate(model->network, dataset->value.split(split), threads)};
  });
}

void heg_report_destroy(heg_report* report) { delete report; }

heg_status heg_report_metrics(const heg_report* report, double* accuracy, double* map) {
  return guarded([&] {
    require(report, "report");
    if (accuracy) *accuracy = report->value.accuracy;
    if (map) *map = report->value.map;
  });
}

heg_status heg_report_text(const heg_report* report, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(report, "report");
    copy_out(heg::report_text(report->value), buf, cap, needed);
  });
}

heg_status heg_report_json(const heg_report* report, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(report, "report");
    copy_out(heg::report_json(report->value), buf, cap, needed);
  });
}

heg_status heg_ablate(const heg_config* config, const heg_dataset* dataset, const char* grid, heg_cell_fn on_cell,
                      void* user, heg_ablation** out) {
  return guarded([&] {
    require(config && dataset && grid && out, "config, dataset, grid and out");
    auto result = std::make_unique<heg_ablation>();
    result->cells = heg::ablation_grid(grid, config->value);
    const auto train_set = dataset->value.split(config->value.train_split);
    const auto eval_set = dataset->value.split(config->value.eval_split);
    std::size_t index = 0;
    heg::run_ablation(result->cells, train_set, eval_set, dataset->value.num_classes,
                      [&](const heg::AblationCell& c) {
                        if (on_cell) {
                          on_cell(index, c.name.c_str(), c.report ? 1 : 0, c.report ? c.report->accuracy : 0.0,
                                  c.report ? c.report->map : 0.0, user);
                        }
                        ++index;
                      });
    *out = result.release();
  });
}

void heg_ablation_destroy(heg_ablation* ablation) { delete ablation; }

heg_status heg_ablation_cell_count(const heg_ablation* ablation, size_t* out) {
  return guarded([&] {
    require(ablation && out, "ablation and out");
    *out = ablation->cells.size();
  });
}

heg_status heg_ablation_non_decreasing_pairs(const heg_ablation* ablation, size_t* out) {
  return guarded([&] {
    require(ablation && out, "ablation and out");
    *out = heg::non_decreasing_pairs(ablation->cells);
  });
}

heg_status heg_ablation_table(const heg_ablation* ablation, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(ablation, "ablation");
    copy_out(heg::ablation_table(ablation->cells), buf, cap, needed);
  });
}

heg_status heg_ablation_jsonl(const heg_ablation* ablation, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(ablation, "ablation");
    copy_out(heg::ablation_jsonl(ablation->cells), buf, cap, needed);
  });
}

heg_status heg_gradcheck(uint64_t seed, heg_gradcheck_entry* entries, size_t cap, size_t* count) {
  return guarded([&] {
    require(count, "count");
    heg::GradCheckOptions options;
    options.seed = seed;
    const auto results = heg::run_gradcheck(options);
    *count = results.size();
    for (std::size_t i = 0; i < results.size() && entries && i < cap; ++i) {
      std::snprintf(entries[i].component, sizeof entries[i].component, "%s", results[i].component.c_str());
      entries[i].max_relative_error = results[i].max_relative_error;
      entries[i].entries = results[i].entries;
    }
  });
}

}  // extern "C"
