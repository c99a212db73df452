// Copyright 2026 The icqse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "icqse/pipeline.hpp"

using namespace icqse;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("icqse_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig minimal_config(const fs::path& dir) {
  ExperimentConfig c;
  c.n_qubits = 6;
  c.g_values = {-0.5};
  c.detune = 0.15;
  c.global_depolarizing_p = 0.1;
  c.n_configs = 512;
  c.shots = 4;
  c.krylov_plus = false;
  c.observables = {"energy", "sx", "szy"};
  c.output_dir = dir.string();
  return c;
}

json strip_times(json r) {
  for (auto& rec : r["records"]) rec.erase("wall_times");
  return r;
}

}  // namespace

TEST(Config, HashTracksSemanticFields) {
  const ExperimentConfig a;
  ExperimentConfig b = a;
  EXPECT_EQ(a.hash(), b.hash());
  b.output_dir = "elsewhere";
  b.threads = 7;
  EXPECT_EQ(a.hash(), b.hash());

  std::vector<std::function<void(ExperimentConfig&)>> edits{
      [](auto& c) { c.n_qubits = 7; },           [](auto& c) { c.g_values = {0.5}; },
      [](auto& c) { c.pbc = false; },            [](auto& c) { c.detune = 0.1; },
      [](auto& c) { c.global_depolarizing_p = 0.2; }, [](auto& c) { c.local_pauli_q = 0.01; },
      [](auto& c) { c.n_configs = 999; },        [](auto& c) { c.shots = 2; },
      [](auto& c) { c.seed = 9; },               [](auto& c) { c.krylov_plus = false; },
      [](auto& c) { c.pools[1] = 10; },          [](auto& c) { c.top_k = 3; },
      [](auto& c) { c.selection_seed = 4; },     [](auto& c) { c.score_energy_only = true; },
      [](auto& c) { c.eps_ratio = 0.07; },       [](auto& c) { c.eps_sweep = {0.01}; },
      [](auto& c) { c.gevp = false; },           [](auto& c) { c.observables = {"sx"}; },
      [](auto& c) { c.cobyla.rhoend = 1e-5; }};
  std::set<std::string> seen{a.hash()};
  for (const auto& edit : edits) {
    ExperimentConfig c = a;
    edit(c);
    EXPECT_TRUE(seen.insert(c.hash()).second) << c.to_json(true).dump();
  }
}

TEST(Config, JsonRoundTripAndValidation) {
  ExperimentConfig a;
  a.g_values = {-0.9, 0.9};
  a.eps_ratio = 0.05;
  a.pools = {{2, 30}};
  const auto b = ExperimentConfig::from_json(a.to_json());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(b.to_json().dump(), a.to_json().dump());

  auto bad = [](json j) { EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError) << j.dump(); };
  bad({{"n_qubits", 6}, {"typo", 1}});
  bad({{"g_values", json::array()}});
  bad({{"g_values", {1.5}}});
  bad({{"shadows", {{"n_configs", 10}, {"shots", 2}}}});
  bad({{"observables", {"Q3"}}});
  bad({{"n_qubits", "six"}});
  bad({{"n_qubits", 20}});
}

TEST(Config, DetuneFlipsAtBoundary) {
  ExperimentConfig c;
  c.detune = 0.15;
  EXPECT_DOUBLE_EQ(c.effective_detune(0.9), -0.15);
  EXPECT_DOUBLE_EQ(c.effective_detune(-0.9), 0.15);
  EXPECT_DOUBLE_EQ(c.effective_detune(0.2), 0.15);
}

TEST(Pipeline, SmokeReportHasAllFields) {
  const auto dir = fresh_dir("smoke");
  const auto cfg = minimal_config(dir);
  const json r = run_pipeline(cfg);
  EXPECT_EQ(r.at("schema"), 1);
  EXPECT_EQ(r.at("config_hash"), cfg.hash());
  ASSERT_EQ(r.at("records").size(), 1u);
  const auto& rec = r.at("records")[0];
  for (const char* k : {"n_qubits", "g", "couplings", "root", "dataset", "exact", "eps_max", "methods", "gevp",
                        "trace_counts", "wall_times"})
    EXPECT_TRUE(rec.contains(k)) << k;
  EXPECT_EQ(rec.at("exact").at("lowest_densities").size(), 25u);
  EXPECT_NEAR(rec.at("exact").at("ed_energy_density").get<double>(), -2.5, 1e-9);
  for (const char* m : {"unmitigated", "krylov"}) {
    const auto& mj = rec.at("methods").at(m);
    for (const char* obs : {"energy", "sx", "szy"}) {
      const auto& e = mj.at("observables").at(obs);
      EXPECT_TRUE(e.contains("std_error"));
      EXPECT_EQ(e.at("n_samples"), 512);
    }
    EXPECT_EQ(mj.at("provenance").at("dataset_hash"), rec.at("dataset").at("hash"));
    EXPECT_TRUE(mj.at("provenance").contains("c_opt"));
  }
  EXPECT_TRUE(fs::exists(dir / rec.at("dataset").at("file").get<std::string>()));
  fs::remove_all(dir);
}

TEST(Pipeline, DeterministicAcrossRunsAndThreads) {
  const auto d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  auto c1 = minimal_config(d1);
  c1.krylov_plus = true;
  c1.pools = {{1, 10}, {2, 10}};
  c1.eps_sweep = {0.01, 0.05};
  c1.threads = 1;
  auto c2 = c1;
  c2.output_dir = d2.string();
  c2.threads = 3;
  const json a = strip_times(run_pipeline(c1));
  const json b = strip_times(run_pipeline(c2));
  EXPECT_EQ(a.dump(), b.dump());
  // Second run in the same directory reuses the shadow file and eval caches.
  const json again = strip_times(run_pipeline(c1));
  EXPECT_EQ(a.dump(), again.dump());
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Pipeline, TraceTotalIsSumOfStages) {
  const auto dir = fresh_dir("trace");
  auto cfg = minimal_config(dir);
  cfg.krylov_plus = true;
  cfg.pools = {{1, 8}, {3, 8}};
  cfg.observables = {"energy"};
  const json r = run_pipeline(cfg);
  const auto& tc = r.at("records")[0].at("trace_counts");
  std::uint64_t sum = 0;
  for (const auto& [k, v] : tc.items())
    if (k != "total") sum += v.get<std::uint64_t>();
  EXPECT_EQ(tc.at("total").get<std::uint64_t>(), sum);
  EXPECT_TRUE(tc.contains("selection"));

  // The unmitigated stage count equals a direct evaluation of H's Paulis.
  const auto d = read_shadow_file((dir / r.at("records")[0].at("dataset").at("file").get<std::string>()).string());
  const auto h = build_hamiltonian(ModelParams::from_g(6, -0.5));
  EXPECT_EQ(tc.at("unmitigated").get<std::uint64_t>(), evaluate_paulis(d, h, 1).trace_counter());
  fs::remove_all(dir);
}

TEST(Pipeline, PlotCsvSchema) {
  const auto dir = fresh_dir("csv");
  auto cfg = minimal_config(dir);
  cfg.g_values = {-0.5, 0.5};
  cfg.eps_sweep = {0.005, 0.02, 0.08};
  const json r = run_pipeline(cfg);
  const auto files = emit_plot_data(r, dir.string());
  EXPECT_EQ(files.size(), 4u);
  std::ifstream f(dir / "energy.csv");
  std::string header;
  std::getline(f, header);
  EXPECT_NE(header.find("value"), std::string::npos);
  EXPECT_NE(header.find("err"), std::string::npos);
  int rows = 0;
  for (std::string line; std::getline(f, line);) rows += !line.empty();
  EXPECT_EQ(rows, 2 * 2);  // (g, method) pairs

  for (const auto& rec : r.at("records")) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& p : rec.at("eps_sweep").at("points")) {
      EXPECT_LE(p.at("value").get<double>(), prev + 1e-12);
      prev = p.at("value").get<double>();
    }
  }
  fs::remove_all(dir);
}

TEST(Pipeline, StageTaggedErrors) {
  const auto dir = fresh_dir("err");
  auto cfg = minimal_config(dir);
  fs::create_directories(dir);
  // A directory where the shadow file should go makes the write fail.
  std::string path;
  shadows_for(cfg, -0.5, &path);
  fs::remove(path);
  fs::create_directories(path);
  try {
    run_pipeline(cfg);
    FAIL() << "expected failure";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("[gen-shadows]"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}
