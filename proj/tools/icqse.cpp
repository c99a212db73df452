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

// Command-line front end. Exit codes: 0 ok, 2 config, 3 numerical, 4 resource.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "icqse/pipeline.hpp"

using namespace icqse;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitResource = 4;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << j.dump(2) << '\n';
  else
    write_json(j, out);
}

// Custom subspace file: one operator per line; "H" is the Hamiltonian, "I"
// the identity, anything else Pauli text. Identity is prepended if missing.
SubspaceSpec read_custom_spec(const std::string& path, const PauliSum& h) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open subspace file '" + path + "'");
  const int n = h.n_qubits();
  SubspaceSpec s;
  s.label = "custom";
  std::string line;
  while (std::getline(f, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    if (line == "H")
      s.operators.push_back(h);
    else
      s.operators.push_back(PauliSum(parse_pauli(line, n)));
  }
  if (s.operators.empty() || !s.operators.front().is_identity()) s.operators.insert(s.operators.begin(), PauliSum::identity(n));
  s.validate();
  return s;
}

struct SelectFlags {
  int pool_size = 150;
  std::string weights = "1,2,3,4,5";
  int top_k = 5;
  std::uint64_t seed = 1;
  bool energy_only = false;

  SelectionOptions options(unsigned threads) const {
    SelectionOptions o;
    o.pools.clear();
    for (const auto& w : split(weights, ',')) o.pools[std::stoi(w)] = pool_size;
    o.top_k = top_k;
    o.seed = seed;
    o.score_energy_only = energy_only;
    o.threads = threads;
    return o;
  }
};

void add_select_flags(CLI::App* app, SelectFlags& f) {
  app->add_option("--pool-size", f.pool_size, "Candidates drawn per weight")->check(CLI::PositiveNumber);
  app->add_option("--weights", f.weights, "Comma-separated pool weights (1..5)");
  app->add_option("--top-k", f.top_k, "Paulis kept per weight")->check(CLI::NonNegativeNumber);
  app->add_option("--selection-seed", f.seed, "Pool sampling seed");
  app->add_flag("--score-energy", f.energy_only, "Rank on the energy alone instead of energy + error");
}

SubspaceSpec resolve_spec(const std::string& which, const ShadowDataset& d, const PauliSum& h, const SelectFlags& sf,
                          unsigned threads, std::uint64_t* trace = nullptr) {
  const int n = h.n_qubits();
  if (which == "unmitigated") return SubspaceSpec{{PauliSum::identity(n)}, "unmitigated"};
  if (which == "krylov") return SubspaceSpec::krylov(h);
  if (which == "krylov-plus" || which == "krylov+") {
    auto sel = select_paulis(d, h, sf.options(threads));
    if (trace) *trace = sel.trace_counter;
    return sel.spec;
  }
  if (which.rfind("custom:", 0) == 0) return read_custom_spec(which.substr(7), h);
  throw ConfigError("unknown subspace '" + which + "' (krylov, krylov-plus, custom:<file>)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace expansion with classical-shadow data"};
  app.require_subcommand(1);
  unsigned threads = default_threads();

  // gen-shadows
  auto* gen = app.add_subcommand("gen-shadows", "Simulate a root state and write a shadow dataset");
  std::string gen_config, gen_out;
  double gen_g = 0;
  bool gen_has_g = false;
  gen->add_option("--config", gen_config, "Experiment config JSON")->required();
  gen->add_option("--out", gen_out, "Output .icqs file")->required();
  gen->add_option("--g", gen_g, "Coupling to simulate (default: first of g_values)")->each([&](const std::string&) { gen_has_g = true; });

  // exact
  auto* ex = app.add_subcommand("exact", "Exact diagonalization reference");
  int ex_n = 8, ex_k = 1;
  double ex_g = -0.5;
  bool ex_obc = false;
  std::string ex_out;
  ex->add_option("--n", ex_n, "Number of qubits")->required();
  ex->add_option("--g", ex_g, "Trajectory parameter in [-1, 1]")->required();
  ex->add_option("--k", ex_k, "Number of lowest levels")->check(CLI::PositiveNumber);
  ex->add_flag("--obc", ex_obc, "Open boundary conditions");
  ex->add_option("--out", ex_out, "Output JSON (default stdout)");

  // Shared by dataset-driven subcommands.
  std::string shadows;
  double g = 0;
  bool obc = false;
  SelectFlags sf;
  auto dataset_opts = [&](CLI::App* a) {
    a->add_option("--shadows", shadows, "Shadow dataset (.icqs)")->required();
    a->add_option("--g", g, "Hamiltonian parameter the data is analysed against")->required();
    a->add_flag("--obc", obc, "Open boundary conditions");
  };

  auto* sel = app.add_subcommand("select-paulis", "Rank random Paulis and print the Krylov+ operator list");
  dataset_opts(sel);
  add_select_flags(sel, sf);
  sel->add_option("--seed", sf.seed, "Pool sampling seed");
  std::string sel_out;
  sel->add_option("--out", sel_out, "Write the operator list here (default stdout)");

  auto* solve = app.add_subcommand("solve", "Constrained subspace optimization");
  dataset_opts(solve);
  add_select_flags(solve, sf);
  std::string subspace = "krylov", observables = "energy", solve_out;
  double eps_ratio = -1;
  solve->add_option("--subspace", subspace, "krylov | krylov-plus | custom:<file>");
  solve->add_option("--eps-ratio", eps_ratio, "Error budget as a fraction of |unmitigated energy|");
  solve->add_option("--observables", observables, "Comma-separated: energy,sx,szy or Pauli text");
  solve->add_option("--out", solve_out, "Output JSON (default stdout)");

  auto* reg = app.add_subcommand("regularize", "SVD-truncated generalized eigenvalue sweep (CSV)");
  dataset_opts(reg);
  add_select_flags(reg, sf);
  int max_discard = -1;
  std::string reg_out;
  reg->add_option("--subspace", subspace, "krylov | krylov-plus | custom:<file>");
  reg->add_option("--discard", max_discard, "Largest discard count (default L-1)");
  reg->add_option("--out", reg_out, "Output CSV")->required();

  auto* land = app.add_subcommand("landscape", "Energy/error grid on a 2-D coefficient slice (CSV)");
  dataset_opts(land);
  add_select_flags(land, sf);
  std::string dims = "0,1", range_i = "-1:1:41", range_j = "-0.2:0.2:41", land_out;
  land->add_option("--subspace", subspace, "krylov | krylov-plus | custom:<file>");
  land->add_option("--dims", dims, "Two coefficient indices i,j");
  land->add_option("--range-i", range_i, "lo:hi:count for c_i");
  land->add_option("--range-j", range_j, "lo:hi:count for c_j");
  land->add_option("--out", land_out, "Output CSV")->required();

  auto* run = app.add_subcommand("run", "Full pipeline from a config");
  std::string run_config, run_out_dir;
  run->add_option("--config", run_config, "Experiment config JSON")->required();
  run->add_option("--out-dir", run_out_dir, "Override output_dir");

  auto* rep = app.add_subcommand("report", "Emit plot CSVs from a report and print a summary");
  std::string rep_in, rep_dir;
  rep->add_option("--report", rep_in, "report.json from `run`")->required();
  rep->add_option("--out-dir", rep_dir, "CSV directory (default: next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    auto hamiltonian_for = [&](int n) { return build_hamiltonian(ModelParams::from_g(n, g, !obc)); };

    if (*gen) {
      auto cfg = ExperimentConfig::load(gen_config);
      const double gg = gen_has_g ? gen_g : cfg.g_values.front();
      RootSpec rs{ModelParams::from_g(cfg.n_qubits, gg, cfg.pbc), cfg.effective_detune(gg),
                  NoiseSpec{cfg.global_depolarizing_p, cfg.local_pauli_q}};
      const auto d = sample_shadows(prepare_root(rs), rs.noise, cfg.n_configs, cfg.shots, cfg.seed, threads);
      write_shadow_file(d, gen_out);
      std::cout << "wrote " << gen_out << " (" << d.n_configs() << " configurations x " << d.shots() << " shots, hash "
                << dataset_hash(d) << ")\n";
    } else if (*ex) {
      const ModelParams p = ModelParams::from_g(ex_n, ex_g, !ex_obc);
      const auto sp = exact_diag(p, ex_k);
      json j{{"N", ex_n},
             {"g", ex_g},
             {"couplings", {{"g_zz", p.g_zz}, {"g_x", p.g_x}, {"g_zxz", p.g_zxz}}},
             {"energies", sp.eigenvalues},
             {"energy_density", sp.energy_density},
             {"method", sp.method}};
      if (ex_n >= 5) {
        const auto ops = order_parameter_ops(ex_n);
        j["sx_exact"] = expectation(sp.ground_state(), ops.sx).real();
        j["szy_exact"] = expectation(sp.ground_state(), ops.szy).real();
      }
      emit(j, ex_out);
    } else if (*sel) {
      const auto d = read_shadow_file(shadows);
      const PauliSum h = hamiltonian_for(d.n_qubits());
      const auto r = select_paulis(d, h, sf.options(threads));
      std::ostringstream os;
      os << "# krylov+ operators after I and H; trace evaluations " << r.trace_counter << "\n";
      for (const auto& k : r.selected) os << format_pauli(k, d.n_qubits()) << "\n";
      if (sel_out.empty()) {
        std::cout << os.str();
      } else {
        std::ofstream f(sel_out);
        if (!f) throw ConfigError("cannot write '" + sel_out + "'");
        f << "I\nH\n" << os.str();
      }
    } else if (*solve) {
      const auto d = read_shadow_file(shadows);
      const int n = d.n_qubits();
      const PauliSum h = hamiltonian_for(n);
      std::uint64_t sel_trace = 0;
      const SubspaceSpec spec = resolve_spec(subspace, d, h, sf, threads, &sel_trace);
      std::vector<std::string> obs;
      for (const auto& o : split(observables, ','))
        if (o != "energy") obs.push_back(o);
      const auto sd = build_subspace_data(d, spec, h, obs, "", threads);
      const double unmit = sd.tensors.at("energy").aH.col(0).mean();
      const double ratio = eps_ratio > 0 ? eps_ratio : default_eps_ratio(n);
      CobylaOptions copt;
      json j = solve_and_report(sd, ratio * std::abs(unmit), dataset_hash(d), h, copt);
      j["unmitigated_energy"] = unmit;
      j["eps_ratio"] = ratio;
      j["trace_counts"] = {{"selection", sel_trace}, {"solve", sd.trace_counter}, {"total", sel_trace + sd.trace_counter}};
      emit(j, solve_out);
    } else if (*reg) {
      const auto d = read_shadow_file(shadows);
      const PauliSum h = hamiltonian_for(d.n_qubits());
      const auto sd = build_subspace_data(d, resolve_spec(subspace, d, h, sf, threads), h, {}, "", threads);
      const auto& t = sd.tensors.at("energy");
      const int last = max_discard < 0 ? t.L - 1 : std::min(max_discard, t.L - 1);
      std::ofstream f(reg_out);
      if (!f) throw ConfigError("cannot write '" + reg_out + "'");
      f << "discard,lambda,lambda_density,smallest_kept_sv\n";
      for (int k = 0; k <= last; ++k) {
        const auto r = regularized_gevp(t, k);
        f << k << "," << detail::num(r.pseudoeigenvalue) << "," << detail::num(r.pseudoeigenvalue / d.n_qubits()) << ","
          << detail::num(r.singular_values[static_cast<std::size_t>(t.L - 1 - k)]) << "\n";
      }
      std::cout << "wrote " << reg_out << "\n";
    } else if (*land) {
      const auto d = read_shadow_file(shadows);
      const PauliSum h = hamiltonian_for(d.n_qubits());
      const auto sd = build_subspace_data(d, resolve_spec(subspace, d, h, sf, threads), h, {}, "", threads);
      const RatioModel model(sd.tensors.at("energy"));
      const auto dv = split(dims, ',');
      if (dv.size() != 2) throw ConfigError("--dims expects i,j");
      auto grid = [](const std::string& spec) {
        const auto p = split(spec, ':');
        if (p.size() != 3) throw ConfigError("range expects lo:hi:count");
        const double lo = std::stod(p[0]), hi = std::stod(p[1]);
        const int cnt = std::stoi(p[2]);
        if (cnt < 1) throw ConfigError("range count must be positive");
        std::vector<double> v;
        for (int i = 0; i < cnt; ++i) v.push_back(cnt == 1 ? lo : lo + (hi - lo) * i / (cnt - 1));
        return v;
      };
      std::vector<double> base(static_cast<std::size_t>(model.L()), 0.0);
      base[0] = 1.0;
      const auto cells = landscape_scan(model, std::stoi(dv[0]), std::stoi(dv[1]), grid(range_i), grid(range_j), base);
      std::ofstream f(land_out);
      if (!f) throw ConfigError("cannot write '" + land_out + "'");
      f << "ci,cj,value,err,ok\n";
      for (const auto& c : cells)
        f << detail::num(c.ci) << "," << detail::num(c.cj) << "," << (c.ok ? detail::num(c.value) : "") << ","
          << (c.ok ? detail::num(c.std_error) : "") << "," << (c.ok ? 1 : 0) << "\n";
      std::cout << "wrote " << land_out << "\n";
    } else if (*run) {
      auto cfg = ExperimentConfig::load(run_config);
      if (!run_out_dir.empty()) cfg.output_dir = run_out_dir;
      cfg.threads = threads;
      const json report = run_pipeline(cfg);
      const auto path = (std::filesystem::path(cfg.output_dir) / "report.json").string();
      write_json(report, path);
      emit_plot_data(report, cfg.output_dir);
      std::cout << "wrote " << path << " (config " << cfg.hash() << ")\n";
    } else if (*rep) {
      const json report = read_json(rep_in);
      const std::string dir = rep_dir.empty() ? std::filesystem::path(rep_in).parent_path().string() : rep_dir;
      for (const auto& p : emit_plot_data(report, dir.empty() ? "." : dir)) std::cout << "wrote " << p << "\n";
      for (const auto& r : report.at("records")) {
        std::cout << "N=" << r.at("n_qubits") << " g=" << r.at("g")
                  << "  ED density " << detail::num(r.at("exact").at("ed_energy_density")) << "\n";
        for (const auto& [m, v] : r.at("methods").items())
          std::cout << "  " << m << ": " << detail::num(v.at("energy_density").at("value")) << " +- "
                    << detail::num(v.at("energy_density").at("std_error")) << "\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConsistencyError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::bad_alloc&) {
    std::cerr << "resource error: out of memory\n";
    return kExitResource;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
