// Exercises the shared library through its C header only.
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "heg/heg.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("heg_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

template <typename Fn>
std::string read_string(Fn fn) {
  size_t needed = 0;
  REQUIRE(fn(nullptr, 0, &needed) == HEG_OK);
  std::vector<char> buf(needed);
  REQUIRE(fn(buf.data(), buf.size(), &needed) == HEG_OK);
  return std::string(buf.data());
}

fs::path small_dataset(const std::string& name) {
  const auto dir = fresh_dir(name);
  heg_synth_options o;
  heg_synth_options_default(&o);
  o.num_videos = 16;
  o.frames_per_video = 20;
  o.feature_dim = 4;
  o.seed = 2;
  REQUIRE(heg_synth_generate(&o, (dir / "data").c_str()) == HEG_OK);
  return dir;
}

heg_config* quick_config() {
  heg_config* c = nullptr;
  REQUIRE(heg_config_create(&c) == HEG_OK);
  REQUIRE(heg_config_set(c, "epochs", "2") == HEG_OK);
  REQUIRE(heg_config_set(c, "batch_size", "4") == HEG_OK);
  REQUIRE(heg_config_set(c, "learning_rate", "0.001") == HEG_OK);
  return c;
}

void count_epochs(size_t, double, void* user) { ++*static_cast<int*>(user); }

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(heg_version()).size() > 0);
  CHECK(std::string(heg_status_name(HEG_OK)) == "ok");
  CHECK(heg_config_create(nullptr) == HEG_ERR_USAGE);
  CHECK(std::string(heg_last_error()).find("out") != std::string::npos);

  heg_config* c = nullptr;
  REQUIRE(heg_config_create(&c) == HEG_OK);
  CHECK(heg_config_set(c, "no_such_key", "1") == HEG_ERR_USAGE);
  CHECK(std::string(heg_last_error()).find("no_such_key") != std::string::npos);
  CHECK(heg_config_set(c, "tau", "15") == HEG_ERR_USAGE);
  CHECK(heg_config_load(c, "/nonexistent/config.json") == HEG_ERR_DATA);
  heg_config_destroy(c);
  heg_config_destroy(nullptr);
}

TEST_CASE("config json and file round trip") {
  const auto dir = fresh_dir("config");
  heg_config* c = nullptr;
  REQUIRE(heg_config_create(&c) == HEG_OK);
  REQUIRE(heg_config_set(c, "kinds", "mean,m3") == HEG_OK);
  REQUIRE(heg_config_set(c, "weight_decay", "0.125") == HEG_OK);
  const std::string text = read_string([&](char* b, size_t n, size_t* need) { return heg_config_json(c, b, n, need); });
  CHECK(text.find("0.125") != std::string::npos);

  // Too small a buffer reports the size and leaves the buffer alone.
  char tiny[4] = "xyz";
  size_t needed = 0;
  CHECK(heg_config_json(c, tiny, sizeof tiny, &needed) == HEG_OK);
  CHECK(needed == text.size() + 1);
  CHECK(std::strcmp(tiny, "xyz") == 0);

  REQUIRE(heg_config_save(c, (dir / "c.json").c_str()) == HEG_OK);
  heg_config* d = nullptr;
  REQUIRE(heg_config_create(&d) == HEG_OK);
  REQUIRE(heg_config_load(d, (dir / "c.json").c_str()) == HEG_OK);
  CHECK(read_string([&](char* b, size_t n, size_t* need) { return heg_config_json(d, b, n, need); }) == text);
  heg_config_destroy(c);
  heg_config_destroy(d);
}

TEST_CASE("synthesize, train, save, load, evaluate") {
  const auto dir = small_dataset("pipeline");
  heg_dataset* ds = nullptr;
  REQUIRE(heg_dataset_open((dir / "data").c_str(), 5, 0, &ds) == HEG_OK);
  size_t n = 0;
  REQUIRE(heg_dataset_split_size(ds, "all", &n) == HEG_OK);
  CHECK(n == 16);
  REQUIRE(heg_dataset_feature_dim(ds, &n) == HEG_OK);
  CHECK(n == 4);
  CHECK(heg_dataset_split_size(ds, "nope", &n) == HEG_ERR_DATA);

  heg_dataset* wrong = nullptr;
  CHECK(heg_dataset_open((dir / "data").c_str(), 5, 7, &wrong) == HEG_ERR_DATA);
  CHECK(wrong == nullptr);

  heg_config* c = quick_config();
  int epochs = 0;
  heg_model* m = nullptr;
  REQUIRE(heg_train(c, ds, count_epochs, &epochs, &m) == HEG_OK);
  CHECK(epochs == 2);
  size_t count = 0;
  REQUIRE(heg_model_epoch_count(m, &count) == HEG_OK);
  CHECK(count == 2);
  double loss = 0;
  REQUIRE(heg_model_epoch_loss(m, 1, &loss) == HEG_OK);
  CHECK(loss > 0.0);
  CHECK(heg_model_epoch_loss(m, 2, &loss) == HEG_ERR_USAGE);
  size_t in = 0, hidden = 0, out = 0;
  REQUIRE(heg_model_dims(m, &in, &hidden, &out) == HEG_OK);
  CHECK(in == 4);
  CHECK(hidden == 2);
  CHECK(out == 4);

  REQUIRE(heg_model_save(m, (dir / "m.hegc").c_str()) == HEG_OK);
  heg_model* back = nullptr;
  REQUIRE(heg_model_load((dir / "m.hegc").c_str(), &back) == HEG_OK);
  size_t p1 = 0, p2 = 0;
  REQUIRE(heg_model_parameter_count(m, &p1) == HEG_OK);
  REQUIRE(heg_model_parameter_count(back, &p2) == HEG_OK);
  CHECK(p1 == p2);

  heg_report* r1 = nullptr;
  heg_report* r2 = nullptr;
  REQUIRE(heg_evaluate(m, ds, "test", 1, &r1) == HEG_OK);
  REQUIRE(heg_evaluate(back, ds, "test", 2, &r2) == HEG_OK);
  double a1, m1, a2, m2;
  REQUIRE(heg_report_metrics(r1, &a1, &m1) == HEG_OK);
  REQUIRE(heg_report_metrics(r2, &a2, &m2) == HEG_OK);
  CHECK(a1 == a2);
  CHECK(m1 == m2);
  CHECK(a1 >= 0.0);
  CHECK(a1 <= 100.0);
  const std::string json =
      read_string([&](char* b, size_t cap, size_t* need) { return heg_report_json(r1, b, cap, need); });
  CHECK(json.find("\"accuracy\"") != std::string::npos);

  CHECK(heg_model_load((dir / "missing.hegc").c_str(), &back) == HEG_ERR_DATA);

  heg_report_destroy(r1);
  heg_report_destroy(r2);
  heg_model_destroy(m);
  heg_model_destroy(back);
  heg_config_destroy(c);
  heg_dataset_destroy(ds);
}

TEST_CASE("build graphs") {
  const auto dir = small_dataset("graphs");
  heg_config* c = quick_config();
  size_t written = 0;
  REQUIRE(heg_build_graphs((dir / "data").c_str(), c, (dir / "out").c_str(), &written) == HEG_OK);
  CHECK(written == 16);
  CHECK(fs::exists(dir / "out" / "graphs.jsonl"));
  CHECK(fs::exists(dir / "out" / "tubes.jsonl"));
  CHECK(fs::exists(dir / "out" / "graphs" / "synth00000.hegg"));
  std::ifstream tubes(dir / "out" / "tubes.jsonl");
  std::string first;
  std::getline(tubes, first);
  CHECK(first.find("256") != std::string::npos);
  heg_config_destroy(c);
}

TEST_CASE("ablation") {
  const auto dir = small_dataset("ablate");
  heg_dataset* ds = nullptr;
  REQUIRE(heg_dataset_open((dir / "data").c_str(), 5, 0, &ds) == HEG_OK);
  heg_config* c = quick_config();
  heg_ablation* ab = nullptr;
  CHECK(heg_ablate(c, ds, "bogus", nullptr, nullptr, &ab) == HEG_ERR_USAGE);
  REQUIRE(heg_ablate(c, ds, "compression", nullptr, nullptr, &ab) == HEG_OK);
  size_t n = 0;
  REQUIRE(heg_ablation_cell_count(ab, &n) == HEG_OK);
  CHECK(n == 2);
  const std::string table =
      read_string([&](char* b, size_t cap, size_t* need) { return heg_ablation_table(ab, b, cap, need); });
  CHECK(table.find("with_compression") != std::string::npos);
  heg_ablation_destroy(ab);
  heg_config_destroy(c);
  heg_dataset_destroy(ds);
}

TEST_CASE("gradcheck through the C API") {
  size_t count = 0;
  REQUIRE(heg_gradcheck(7, nullptr, 0, &count) == HEG_OK);
  REQUIRE(count > 10);
  std::vector<heg_gradcheck_entry> entries(count);
  REQUIRE(heg_gradcheck(7, entries.data(), entries.size(), &count) == HEG_OK);
  for (const auto& e : entries) {
    CAPTURE(e.component);
    CHECK(e.max_relative_error < 1e-4);
    CHECK(e.entries > 0);
  }
}
