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

/**
 * @file
 * End-to-end experiment driver: config, artifacts, report and CSV output.
 *
 * One run walks every g in the config through
 *   shadows -> (selection) -> solves per subspace -> observables -> references
 * and collects a report. Shadow files and small evaluation tables are cached
 * in the output directory under content-derived names, so reruns reuse them.
 */

#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "icqse/errors.hpp"
#include "icqse/model.hpp"
#include "icqse/qse.hpp"
#include "icqse/shadows.hpp"
#include "icqse/statesim.hpp"

namespace icqse {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing

/// 64-bit FNV-1a; used for content names and config fingerprints, not security.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), h);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string dataset_hash(const ShadowDataset& d) { return hex64(fnv1a(serialize(d))); }

// ---------------------------------------------------------------------------
// Config

struct ExperimentConfig {
  int n_qubits = 6;
  std::vector<double> g_values{-0.5};
  bool pbc = true;
  // Root imperfection. The detune is flipped in sign when g + detune would
  // leave [-1, 1], so it always points into the parameter range.
  double detune = 0.0;
  double global_depolarizing_p = 0.0;
  double local_pauli_q = 0.0;
  std::uint32_t n_configs = 1024;
  std::uint16_t shots = 4;
  std::uint64_t seed = 1;
  bool krylov = true;
  bool krylov_plus = true;
  std::map<int, int> pools{{1, 150}, {2, 150}, {3, 150}, {4, 150}, {5, 150}};
  int top_k = 5;
  std::uint64_t selection_seed = 1;
  bool score_energy_only = false;
  std::optional<double> eps_ratio;  ///< default_eps_ratio(N) when absent
  std::vector<double> eps_sweep;    ///< budget ratios for the bias-variance sweep
  bool gevp = true;
  std::vector<std::string> observables{"energy"};
  CobylaOptions cobyla{};
  // Non-semantic.
  std::string output_dir = "icqse-out";
  unsigned threads = 0;

  double effective_eps_ratio() const { return eps_ratio ? *eps_ratio : default_eps_ratio(n_qubits); }

  double effective_detune(double g) const {
    if (std::abs(g + detune) <= 1.0) return detune;
    return -detune;
  }

  void validate() const {
    if (n_qubits < 3 || n_qubits > kEdMaxQubits)
      throw ConfigError("config: n_qubits must lie in [3, " + std::to_string(kEdMaxQubits) + "] for simulated roots");
    if (g_values.empty()) throw ConfigError("config: g_values must be non-empty");
    for (double g : g_values) {
      if (!(g >= -1.0 && g <= 1.0)) throw ConfigError("config: g values must lie in [-1, 1]");
      if (std::abs(g + effective_detune(g)) > 1.0) throw ConfigError("config: detune too large for g");
    }
    if (!(global_depolarizing_p >= 0 && global_depolarizing_p <= 1) || !(local_pauli_q >= 0 && local_pauli_q <= 1))
      throw ConfigError("config: noise rates must lie in [0, 1]");
    if (n_configs < 2 || shots < 1) throw ConfigError("config: need n_configs >= 2 and shots >= 1");
    if (std::uint64_t{n_configs} * shots < 100) throw ConfigError("config: n_configs * shots must be at least 100");
    if (eps_ratio && !(*eps_ratio > 0)) throw ConfigError("config: eps_ratio must be positive");
    for (double r : eps_sweep)
      if (!(r > 0)) throw ConfigError("config: eps_sweep ratios must be positive");
    if (krylov_plus) {
      if (pools.empty()) throw ConfigError("config: krylov+ needs at least one pool");
      for (auto [w, s] : pools)
        if (w < 1 || w > 5 || w > n_qubits || s < 1) throw ConfigError("config: invalid pool weight/size");
      if (top_k < 0) throw ConfigError("config: top_k must be non-negative");
    }
    for (const auto& o : observables) {
      if (o == "energy") continue;
      if ((o == "sx" || o == "szy") && n_qubits < 5) throw ConfigError("config: order parameters need n_qubits >= 5");
      if (o == "sx" || o == "szy") continue;
      parse_pauli(o, n_qubits);  // throws ConfigError on bad text
    }
    if (!(cobyla.rhobeg > 0) || !(cobyla.rhoend > 0) || cobyla.rhoend > cobyla.rhobeg || cobyla.max_evals < 10)
      throw ConfigError("config: invalid optimizer settings");
  }

  /// Canonical JSON (keys sorted by nlohmann's ordered map), with every
  /// default filled in. Non-semantic fields are omitted when semantic_only.
  json to_json(bool semantic_only = false) const {
    json j;
    j["n_qubits"] = n_qubits;
    j["g_values"] = g_values;
    j["pbc"] = pbc;
    j["root"] = {{"detune", detune}, {"global_depolarizing_p", global_depolarizing_p}, {"local_pauli_q", local_pauli_q}};
    j["shadows"] = {{"n_configs", n_configs}, {"shots", shots}, {"seed", seed}};
    json pools_j = json::object();
    for (auto [w, s] : pools) pools_j[std::to_string(w)] = s;
    j["subspace"] = {{"krylov", krylov},
                     {"krylov_plus", krylov_plus},
                     {"pools", pools_j},
                     {"top_k", top_k},
                     {"selection_seed", selection_seed},
                     {"score", score_energy_only ? "energy" : "upper_error"}};
    j["eps_ratio"] = eps_ratio ? json(*eps_ratio) : json(nullptr);
    j["eps_sweep"] = eps_sweep;
    j["gevp"] = gevp;
    j["observables"] = observables;
    j["optimizer"] = {{"rhobeg", cobyla.rhobeg}, {"rhoend", cobyla.rhoend}, {"max_evals", cobyla.max_evals}};
    if (!semantic_only) {
      j["output_dir"] = output_dir;
      j["threads"] = threads;
    }
    return j;
  }

  std::string hash() const { return hex64(fnv1a(to_json(true).dump())); }

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    try {
      static const std::vector<std::string> known{"n_qubits", "g_values", "pbc",         "root",      "shadows",
                                                  "subspace", "eps_ratio", "eps_sweep", "gevp",      "observables",
                                                  "optimizer", "output_dir", "threads"};
      if (!j.is_object()) throw ConfigError("config: top level must be an object");
      for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("config: unknown field '" + k + "'");
      c.n_qubits = j.value("n_qubits", c.n_qubits);
      c.g_values = j.value("g_values", c.g_values);
      c.pbc = j.value("pbc", c.pbc);
      if (j.contains("root")) {
        const auto& r = j.at("root");
        c.detune = r.value("detune", c.detune);
        c.global_depolarizing_p = r.value("global_depolarizing_p", c.global_depolarizing_p);
        c.local_pauli_q = r.value("local_pauli_q", c.local_pauli_q);
      }
      if (j.contains("shadows")) {
        const auto& s = j.at("shadows");
        c.n_configs = s.value("n_configs", c.n_configs);
        c.shots = s.value("shots", c.shots);
        c.seed = s.value("seed", c.seed);
      }
      if (j.contains("subspace")) {
        const auto& s = j.at("subspace");
        c.krylov = s.value("krylov", c.krylov);
        c.krylov_plus = s.value("krylov_plus", c.krylov_plus);
        if (s.contains("pools")) {
          c.pools.clear();
          for (const auto& [w, n] : s.at("pools").items()) c.pools[std::stoi(w)] = n.get<int>();
        }
        c.top_k = s.value("top_k", c.top_k);
        c.selection_seed = s.value("selection_seed", c.selection_seed);
        const std::string score = s.value("score", std::string("upper_error"));
        if (score != "upper_error" && score != "energy") throw ConfigError("config: score must be upper_error or energy");
        c.score_energy_only = score == "energy";
      }
      if (j.contains("eps_ratio") && !j.at("eps_ratio").is_null()) c.eps_ratio = j.at("eps_ratio").get<double>();
      c.eps_sweep = j.value("eps_sweep", c.eps_sweep);
      c.gevp = j.value("gevp", c.gevp);
      c.observables = j.value("observables", c.observables);
      if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        c.cobyla.rhobeg = o.value("rhobeg", c.cobyla.rhobeg);
        c.cobyla.rhoend = o.value("rhoend", c.cobyla.rhoend);
        c.cobyla.max_evals = o.value("max_evals", c.cobyla.max_evals);
      }
      c.output_dir = j.value("output_dir", c.output_dir);
      c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument&) {
      throw ConfigError("config: pool weights must be integers");
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config '" + path + "': " + e.what());
    }
    return from_json(j);
  }
};

// ---------------------------------------------------------------------------
// Building blocks shared by the CLI subcommands

/// Named observable: "energy" is H itself, "sx"/"szy" the order parameters,
/// anything else is parsed as Pauli text.
inline PauliSum observable_by_name(const std::string& name, const PauliSum& h) {
  const int n = h.n_qubits();
  if (name == "energy") return h;
  if (name == "sx") return order_parameter_ops(n).sx;
  if (name == "szy") return order_parameter_ops(n).szy;
  return PauliSum(parse_pauli(name, n));
}

/// Evaluation with an on-disk cache keyed by dataset content and key list.
/// Only tables whose dense form stays below max_bytes are written.
inline PauliEvalTable evaluate_cached(const ShadowDataset& d, std::vector<PauliKey> keys, const std::string& cache_dir,
                                      unsigned threads, std::size_t max_bytes = std::size_t{64} << 20) {
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  if (cache_dir.empty()) return evaluate_paulis(d, keys, threads);
  std::uint64_t h = fnv1a(serialize(d));
  for (const auto& k : keys) {
    std::uint8_t buf[16 * kBitWords];
    std::size_t pos = 0;
    for (auto w : k.x.w)
      for (int b = 0; b < 8; ++b) buf[pos++] = static_cast<std::uint8_t>(w >> (8 * b));
    for (auto w : k.z.w)
      for (int b = 0; b < 8; ++b) buf[pos++] = static_cast<std::uint8_t>(w >> (8 * b));
    h = fnv1a(std::span<const std::uint8_t>(buf, pos), h);
  }
  const auto path = std::filesystem::path(cache_dir) / ("eval_" + hex64(h) + ".icqt");
  if (std::filesystem::exists(path)) {
    try {
      auto t = read_eval_cache(path.string());
      if (t.paulis() == keys && t.n_configs() == d.n_configs()) return t;
    } catch (const ConfigError&) {
    }
    log::warn("ignoring stale evaluation cache " + path.string());
  }
  auto t = evaluate_paulis(d, keys, threads);
  if (std::size_t{d.n_configs()} * keys.size() * sizeof(double) <= max_bytes) write_eval_cache(t, path.string());
  return t;
}

/// Evaluation table and tensors for a spec, with one tensor set per observable.
struct SubspaceData {
  SubspaceSpec spec;
  std::map<std::string, SampleTensors> tensors;  ///< observable name -> tensors
  std::uint64_t trace_counter = 0;
};

inline SubspaceData build_subspace_data(const ShadowDataset& d, const SubspaceSpec& spec, const PauliSum& h,
                                        const std::vector<std::string>& observables, const std::string& cache_dir,
                                        unsigned threads) {
  SubspaceData out;
  out.spec = spec;
  std::map<std::string, SubspaceExpansion> ex;
  ex.emplace("energy", expand_subspace(spec, h));
  for (const auto& o : observables)
    if (!ex.count(o)) ex.emplace(o, expand_subspace(spec, observable_by_name(o, h)));
  std::vector<PauliKey> keys;
  for (const auto& [name, e] : ex) keys.insert(keys.end(), e.paulis.begin(), e.paulis.end());
  const PauliEvalTable table = evaluate_cached(d, std::move(keys), cache_dir, threads);
  out.trace_counter = table.trace_counter();
  for (const auto& [name, e] : ex) out.tensors.emplace(name, assemble_tensors(table, e, threads));
  return out;
}

inline json to_json(const EnergyEstimate& e) {
  return {{"value", e.value}, {"std_error", e.std_error}, {"n_samples", e.n_samples}, {"feasible", e.feasible}};
}

inline json spec_to_json(const SubspaceSpec& s, const PauliSum& h) {
  json ops = json::array();
  for (const auto& o : s.operators) {
    if (o.is_identity())
      ops.push_back("I");
    else if (o.approx_equal(h))
      ops.push_back("H");
    else if (o.size() == 1)
      ops.push_back(format_pauli(o.terms().front().first, o.n_qubits()));
    else
      ops.push_back("<sum of " + std::to_string(o.size()) + " terms>");
  }
  return {{"label", s.label}, {"L", s.size()}, {"operators", ops}};
}

/// Solve one subspace and evaluate the observables at the optimum.
inline json solve_and_report(const SubspaceData& sd, double eps_max, const std::string& dataset_hash_hex,
                             const PauliSum& h, const CobylaOptions& copt, SolveResult* out_result = nullptr) {
  const RatioModel model(sd.tensors.at("energy"));
  SolveOptions so;
  so.cobyla = copt;
  const SolveResult r = constrained_minimize(model, eps_max, so);
  json j;
  j["subspace"] = spec_to_json(sd.spec, h);
  j["provenance"] = {{"dataset_hash", dataset_hash_hex}, {"subspace", sd.spec.label}, {"c_opt", r.c_opt}};
  j["c_opt"] = r.c_opt;
  j["eps_max"] = eps_max;
  j["iterations"] = r.iterations;
  j["hit_eval_cap"] = r.hit_eval_cap;
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  const int n = h.n_qubits();
  json obs = json::object();
  for (const auto& [name, t] : sd.tensors) {
    EnergyEstimate e = name == "energy" ? r.energy : observable_at(t, r.c_opt);
    if (name != "energy") e.feasible = r.energy.feasible;
    obs[name] = to_json(e);
  }
  j["observables"] = obs;
  EnergyEstimate dens = r.energy;
  dens.value /= n;
  dens.std_error /= n;
  j["energy_density"] = to_json(dens);
  j["trace_counter"] = sd.trace_counter;
  if (out_result) *out_result = r;
  return j;
}

// ---------------------------------------------------------------------------
// Pipeline

inline constexpr int kReportSchema = 1;

/// Shadow file for one g, generated or reused from the output directory.
inline ShadowDataset shadows_for(const ExperimentConfig& cfg, double g, std::string* path_out = nullptr,
                                 bool* reused = nullptr) {
  const double det = cfg.effective_detune(g);
  json key = {{"n", cfg.n_qubits}, {"g", g},        {"pbc", cfg.pbc},           {"detune", det},
              {"p", cfg.global_depolarizing_p},     {"q", cfg.local_pauli_q},   {"n_configs", cfg.n_configs},
              {"shots", cfg.shots},                 {"seed", cfg.seed},         {"rng", kRngId}};
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = (std::filesystem::path(cfg.output_dir) / ("shadows_" + hex64(fnv1a(key.dump())) + ".icqs")).string();
  if (path_out) *path_out = path;
  if (reused) *reused = false;
  if (std::filesystem::exists(path)) {
    try {
      auto d = read_shadow_file(path);
      if (d.n_qubits() == cfg.n_qubits && d.n_configs() == cfg.n_configs && d.shots() == cfg.shots &&
          d.seed() == cfg.seed) {
        if (reused) *reused = true;
        return d;
      }
    } catch (const ConfigError&) {
    }
  }
  RootSpec rs{ModelParams::from_g(cfg.n_qubits, g, cfg.pbc), det, NoiseSpec{cfg.global_depolarizing_p, cfg.local_pauli_q}};
  const Statevector root = prepare_root(rs);
  ShadowDataset d = sample_shadows(root, rs.noise, cfg.n_configs, cfg.shots, cfg.seed, cfg.threads);
  write_shadow_file(d, path);
  return d;
}

/// Pipeline stage failure, tagged with the stage that raised it.
template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("[" + stage + "] " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("[" + stage + "] " + e.what());
  } catch (const ResourceError& e) {
    throw ResourceError("[" + stage + "] " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError("[" + stage + "] " + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError("[" + stage + "] " + e.what());
  } catch (const ConsistencyError& e) {
    throw ConsistencyError("[" + stage + "] " + e.what());
  }
}

inline json run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
  std::filesystem::create_directories(cfg.output_dir);
  const std::string cache_dir = (std::filesystem::path(cfg.output_dir) / "cache").string();
  std::filesystem::create_directories(cache_dir);
  const int n = cfg.n_qubits;

  json report;
  report["schema"] = kReportSchema;
  report["config_hash"] = cfg.hash();
  report["config"] = cfg.to_json(true);
  report["records"] = json::array();

  for (double g : cfg.g_values) {
    json rec;
    json times = json::object();
    json traces = json::object();
    const ModelParams mp = ModelParams::from_g(n, g, cfg.pbc);
    const PauliSum h = build_hamiltonian(mp);
    rec["n_qubits"] = n;
    rec["g"] = g;
    rec["couplings"] = {{"g_zz", mp.g_zz}, {"g_x", mp.g_x}, {"g_zxz", mp.g_zxz}};
    rec["root"] = {{"detune", cfg.effective_detune(g)},
                   {"global_depolarizing_p", cfg.global_depolarizing_p},
                   {"local_pauli_q", cfg.local_pauli_q}};

    auto t0 = clock::now();
    std::string shadow_path;
    bool reused = false;
    const ShadowDataset data = run_stage("gen-shadows", [&] { return shadows_for(cfg, g, &shadow_path, &reused); });
    const std::string dhash = dataset_hash(data);
    rec["dataset"] = {{"file", std::filesystem::path(shadow_path).filename().string()},
                      {"hash", dhash},
                      {"n_configs", data.n_configs()},
                      {"shots", data.shots()},
                      {"seed", data.seed()}};
    times["gen_shadows"] = seconds(t0);

    t0 = clock::now();
    run_stage("exact", [&] {
      const int k = n <= 12 ? 25 : 1;
      const SpectrumResult sp = exact_diag(h, k);
      json ex;
      ex["ed_energy_density"] = sp.energy_density;
      ex["theory_energy_density"] = exact_gs_density(g);
      json dens = json::array();
      for (double e : sp.eigenvalues) dens.push_back(e / n);
      ex["lowest_densities"] = dens;
      ex["method"] = sp.method;
      if (n >= 5) {
        const auto ops = order_parameter_ops(n);
        const Statevector gs = sp.ground_state();
        ex["sx_exact"] = expectation(gs, ops.sx).real();
        ex["szy_exact"] = expectation(gs, ops.szy).real();
      }
      ex["sx_theory"] = sx_theory(g);
      ex["szy_theory"] = szy_theory(g);
      rec["exact"] = ex;
      return 0;
    });
    times["exact"] = seconds(t0);

    std::vector<std::string> obs;
    for (const auto& o : cfg.observables)
      if (o != "energy") obs.push_back(o);

    json methods = json::object();
    t0 = clock::now();
    const SubspaceData unmit = run_stage("solve:unmitigated", [&] {
      return build_subspace_data(data, SubspaceSpec{{PauliSum::identity(n)}, "unmitigated"}, h, obs, cache_dir,
                                 cfg.threads);
    });
    const EnergyEstimate unmit_e = ratio_estimate(unmit.tensors.at("energy"), std::vector<double>{1.0});
    const double eps_max = cfg.effective_eps_ratio() * std::abs(unmit_e.value);
    rec["eps_ratio"] = cfg.effective_eps_ratio();
    rec["eps_max"] = eps_max;
    methods["unmitigated"] = run_stage("solve:unmitigated", [&] {
      // L = 1: the only coefficient is fixed and the budget is irrelevant.
      return solve_and_report(unmit, std::max(eps_max, unmit_e.std_error * 2.0 + 1e-300), dhash, h, cfg.cobyla);
    });
    traces["unmitigated"] = unmit.trace_counter;
    times["unmitigated"] = seconds(t0);

    std::optional<SubspaceData> last;  // richest subspace, used for sweeps and GEVP
    if (cfg.krylov) {
      t0 = clock::now();
      SubspaceData kd = run_stage("solve:krylov", [&] {
        return build_subspace_data(data, SubspaceSpec::krylov(h), h, obs, cache_dir, cfg.threads);
      });
      methods["krylov"] = run_stage("solve:krylov", [&] { return solve_and_report(kd, eps_max, dhash, h, cfg.cobyla); });
      traces["krylov"] = kd.trace_counter;
      times["krylov"] = seconds(t0);
      last = std::move(kd);
    }
    if (cfg.krylov_plus) {
      t0 = clock::now();
      SelectionOptions so;
      so.pools = cfg.pools;
      so.top_k = cfg.top_k;
      so.seed = cfg.selection_seed;
      so.score_energy_only = cfg.score_energy_only;
      so.cobyla = cfg.cobyla;
      so.threads = cfg.threads;
      const SelectionResult sel = run_stage("select-paulis", [&] { return select_paulis(data, h, so); });
      traces["selection"] = sel.trace_counter;
      times["select_paulis"] = seconds(t0);
      t0 = clock::now();
      SubspaceData kp = run_stage("solve:krylov+", [&] {
        return build_subspace_data(data, sel.spec, h, obs, cache_dir, cfg.threads);
      });
      json m = run_stage("solve:krylov+", [&] { return solve_and_report(kp, eps_max, dhash, h, cfg.cobyla); });
      json selected = json::array();
      for (const auto& k : sel.selected) selected.push_back(format_pauli(k, n));
      m["selected"] = selected;
      methods["krylov+"] = m;
      traces["krylov+"] = kp.trace_counter;
      times["krylov+"] = seconds(t0);
      last = std::move(kp);
    }
    rec["methods"] = methods;

    if (last && !cfg.eps_sweep.empty()) {
      t0 = clock::now();
      const RatioModel model(last->tensors.at("energy"));
      json sweep = json::array();
      std::vector<double> warm;
      std::vector<double> ratios = cfg.eps_sweep;
      std::sort(ratios.begin(), ratios.end());
      for (double r : ratios) {
        SolveOptions so;
        so.cobyla = cfg.cobyla;
        if (!warm.empty()) so.warm_starts.push_back(warm);
        const double em = r * std::abs(unmit_e.value);
        const SolveResult s = run_stage("eps-sweep", [&] { return constrained_minimize(model, em, so); });
        if (s.energy.feasible) warm = s.c_opt;
        sweep.push_back({{"ratio", r},
                         {"eps_max", em},
                         {"value", s.energy.value},
                         {"std_error", s.energy.std_error},
                         {"feasible", s.energy.feasible},
                         {"snr", s.energy.std_error > 0 ? std::abs(s.energy.value) / (n * s.energy.std_error) : 0.0},
                         {"iterations", s.iterations},
                         {"c_opt", s.c_opt}});
      }
      rec["eps_sweep"] = {{"subspace", last->spec.label}, {"points", sweep}};
      times["eps_sweep"] = seconds(t0);
    }

    if (last && cfg.gevp) {
      t0 = clock::now();
      const auto& t = last->tensors.at("energy");
      json pts = json::array();
      std::vector<double> sv;
      for (int d = 0; d < t.L; ++d) {
        try {
          const GevpResult gr = regularized_gevp(t, d);
          sv = gr.singular_values;
          pts.push_back({{"discard", d}, {"lambda", gr.pseudoeigenvalue}, {"lambda_density", gr.pseudoeigenvalue / n}});
        } catch (const NumericalError& e) {
          pts.push_back({{"discard", d}, {"error", e.what()}});
        }
      }
      rec["gevp"] = {{"subspace", last->spec.label}, {"singular_values", sv}, {"points", pts}};
      times["gevp"] = seconds(t0);
    }

    std::uint64_t total = 0;
    for (const auto& [k, v] : traces.items()) total += v.get<std::uint64_t>();
    traces["total"] = total;
    rec["trace_counts"] = traces;
    rec["wall_times"] = times;
    report["records"].push_back(rec);
  }
  return report;
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  try {
    json j;
    f >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Plot data

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

/// Writes energy.csv, order_parameters.csv, eps_sweep.csv and gevp.csv into
/// dir and returns their paths. Values are densities (per qubit) for energies.
inline std::vector<std::string> emit_plot_data(const json& report, const std::string& dir) {
  using detail::num;
  if (!report.contains("schema") || report.at("schema") != kReportSchema) throw ConfigError("report: unsupported schema");
  std::filesystem::create_directories(dir);
  const auto p = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  std::ofstream energy(p("energy.csv")), order(p("order_parameters.csv")), sweep(p("eps_sweep.csv")), gevp(p("gevp.csv"));
  if (!energy || !order || !sweep || !gevp) throw ConfigError("cannot write CSV files into '" + dir + "'");
  energy << "n_qubits,g,method,value,err,ed_density\n";
  order << "n_qubits,g,method,observable,value,err,exact,theory\n";
  sweep << "n_qubits,g,ratio,eps_max,value,err,snr,feasible\n";
  gevp << "n_qubits,g,discard,lambda,unmitigated,ed_density\n";
  for (const auto& r : report.at("records")) {
    const int n = r.at("n_qubits");
    const double g = r.at("g");
    const double ed = r.at("exact").at("ed_energy_density");
    const std::string head = std::to_string(n) + "," + num(g) + ",";
    for (const auto& [method, m] : r.at("methods").items()) {
      const auto& e = m.at("energy_density");
      energy << head << method << "," << num(e.at("value")) << "," << num(e.at("std_error")) << "," << num(ed) << "\n";
      for (const auto& [name, o] : m.at("observables").items()) {
        if (name == "energy") continue;
        const auto& ex = r.at("exact");
        const std::string exact = name == "sx" && ex.contains("sx_exact")     ? num(ex.at("sx_exact"))
                                  : name == "szy" && ex.contains("szy_exact") ? num(ex.at("szy_exact"))
                                                                              : "";
        const std::string theory = name == "sx" ? num(ex.at("sx_theory")) : name == "szy" ? num(ex.at("szy_theory")) : "";
        order << head << method << "," << name << "," << num(o.at("value")) << "," << num(o.at("std_error")) << ","
              << exact << "," << theory << "\n";
      }
    }
    if (r.contains("eps_sweep")) {
      for (const auto& s : r.at("eps_sweep").at("points"))
        sweep << head << num(s.at("ratio")) << "," << num(s.at("eps_max")) << "," << num(s.at("value").get<double>() / n)
              << "," << num(s.at("std_error").get<double>() / n) << "," << num(s.at("snr")) << ","
              << (s.at("feasible").get<bool>() ? 1 : 0) << "\n";
    }
    if (r.contains("gevp")) {
      const double un = r.at("methods").at("unmitigated").at("energy_density").at("value");
      for (const auto& s : r.at("gevp").at("points"))
        if (s.contains("lambda_density"))
          gevp << head << s.at("discard").get<int>() << "," << num(s.at("lambda_density")) << "," << num(un) << ","
               << num(ed) << "\n";
    }
  }
  return {p("energy.csv"), p("order_parameters.csv"), p("eps_sweep.csv"), p("gevp.csv")};
}

}  // namespace icqse
