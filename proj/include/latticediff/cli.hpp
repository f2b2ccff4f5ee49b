#pragma once

#include "diagrams.hpp"
#include "error.hpp"
#include "expression.hpp"
#include "generator.hpp"
#include "io.hpp"
#include "kmc.hpp"
#include "model.hpp"
#include "reservoir.hpp"
#include "spectral.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace latticediff::cli {

using json = nlohmann::json;
using cplx = std::complex<double>;

// --------------------------------------------------------------------- helpers

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

// "0.1,0.2" -> vector of the model dimension; a single value is placed on the first axis
inline Eigen::VectorXd parse_vector(const std::string& text, int dim, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(what + ": cannot parse '" + text + "'");
    }
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  if (vals.size() == 1)
    v(0) = vals[0];
  else if (int(vals.size()) == dim)
    for (int i = 0; i < dim; ++i) v(i) = vals[std::size_t(i)];
  else
    throw ConfigError(what + ": expected 1 or " + std::to_string(dim) + " components, got '" + text + "'");
  return v;
}

inline std::size_t parse_count(double v, const std::string& what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e12) throw ConfigError(what + " must be a positive integer");
  return std::size_t(v);
}

// Shared state of one invocation: the manifest accumulates flags and output files.
struct Run {
  io::RunManifest manifest;
  io::Stopwatch clock;
  std::ostream& out;

  Run(std::string command, std::ostream& o) : out(o) { manifest.command = std::move(command); }

  void flag(const std::string& k, const std::string& v) { manifest.flags[k] = v; }
  void flag(const std::string& k, double v) { manifest.flags[k] = io::fmt(v); }

  void write_json(const std::string& path, json j) {
    j["manifest_hash"] = manifest.hash();
    io::write_json(path, j);
    manifest.outputs.push_back(path);
  }
  io::CsvWriter csv(const std::string& path, const std::vector<std::string>& header) {
    manifest.outputs.push_back(path);
    return io::CsvWriter(path, header, manifest.hash());
  }
  // written next to the primary output, or not at all when there is none
  void finish(const std::string& primary) {
    if (primary.empty()) return;
    manifest.wall_seconds = clock.seconds();
    io::write_json(primary + ".manifest.json", manifest.to_json());
  }
};

inline ModelConfig load_for(Run& run, const std::string& path, std::optional<std::uint64_t> seed, bool validate) {
  ModelConfig cfg = load_model(path);
  if (validate) ensure_valid(cfg);
  run.manifest.config = model_to_json(cfg);
  run.manifest.seed = seed ? *seed : cfg.rng_seed;
  return cfg;
}

// Gap of the p = 0 fiber; bounds the relaxation time of the jump process.
inline double gap_at_zero(const generator::GeneratorMatrices& gen) {
  const auto z = spectral::perron_at_zero(gen);
  return z.value - z.second;
}

// ------------------------------------------------------------------- commands

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

inline int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  Run run("validate", out);
  const ModelConfig cfg = load_for(run, o.config, o.seed, false);
  const auto rep = validate_model(cfg);
  json j = rep.to_json();
  out << io::dump(j);
  if (!o.out.empty()) {
    run.write_json(o.out, j);
    run.finish(o.out);
  }
  if (!rep.ok()) {
    err << json{{"error", "config"}, {"kind", "validation-failed"}, {"failures", rep.failures()}}.dump() << "\n";
    return 2;
  }
  return 0;
}

struct PsiOptions {
  std::string x = "0";
  double tmax = 100.0;
  double dt = 0.25;
  std::string decay_check;
  double v_star = 0.5;
};

inline int cmd_psi(const Options& o, const PsiOptions& p, std::ostream& out) {
  Run run("psi", out);
  const ModelConfig cfg = load_for(run, o.config, o.seed, false);
  if (o.out.empty() && p.decay_check.empty()) throw ConfigError("psi: nothing to do, give --out and/or --decay-check");
  if (!(p.tmax > 0.0) || !(p.dt > 0.0)) throw ConfigError("psi: --tmax and --dt must be positive");
  const Eigen::VectorXd x = parse_vector(p.x, cfg.dim, "--x");
  run.flag("x", p.x);
  run.flag("tmax", p.tmax);
  run.flag("dt", p.dt);
  if (!p.decay_check.empty()) run.flag("vstar", p.v_star);
  const BathProfile bath = cfg.profile();
  const std::string primary = o.out.empty() ? p.decay_check : o.out;
  if (!o.out.empty()) {
    const reservoir::Correlation psi(bath);
    const int n = int(std::llround(p.tmax / p.dt));
    std::vector<double> ts;
    for (int i = 0; i <= n; ++i) ts.push_back(p.tmax * i / std::max(n, 1));
    const auto vals = psi.time_series(x.norm(), ts);
    auto csv = run.csv(o.out, {"t", "re", "im"});
    for (std::size_t i = 0; i < ts.size(); ++i) csv.row({ts[i], vals[i].real(), vals[i].imag()});
  }
  if (!p.decay_check.empty()) {
    const auto fit = reservoir::check_subluminal_decay(bath, p.v_star, p.tmax);
    run.write_json(p.decay_check, {{"rate", fit.rate},
                                   {"intercept", fit.intercept},
                                   {"r2", fit.r2},
                                   {"samples", fit.samples},
                                   {"v_star", fit.v_star},
                                   {"pass", fit.pass},
                                   {"warnings", fit.warnings},
                                   {"times", fit.times},
                                   {"sup_abs_psi", fit.values}});
  }
  run.finish(primary);
  return 0;
}

inline int cmd_rates(const Options& o, const std::string& dump_matrix, const std::string& matrix_out, std::ostream& out) {
  Run run("rates", out);
  const ModelConfig cfg = load_for(run, o.config, o.seed, true);
  if (o.out.empty()) throw ConfigError("rates: --out is required");
  if (!dump_matrix.empty()) run.flag("dump-matrix", dump_matrix);
  const generator::GeneratorMatrices gen(cfg);
  const auto& table = gen.table();
  json channels = json::array();
  for (const auto& c : table.channels)
    channels.push_back({{"from", c.from}, {"to", c.to}, {"a", c.a}, {"amplitude", c.amplitude},
                        {"total_rate", table.total_rate(c)}, {"radius", c.radius}});
  // largest relative violation of r(k,e;k',e') = e^{beta(e-e')} r(k',e';k,e) in the assembled matrix
  double db = 0.0;
  const auto& m = gen.m00();
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (r == c || m(r, c) == 0.0) continue;
      const double e_from = cfg.spin.levels[std::size_t(c / Eigen::Index(gen.grid().size()))];
      const double e_to = cfg.spin.levels[std::size_t(r / Eigen::Index(gen.grid().size()))];
      const double back = std::exp(cfg.beta * (e_from - e_to)) * m(c, r);
      db = std::max(db, std::abs(m(r, c) - back) / std::abs(m(r, c)));
    }
  kmc::JumpProcess proc(cfg);
  run.write_json(o.out, {{"dim", cfg.dim},
                         {"beta", cfg.beta},
                         {"levels", cfg.spin.levels},
                         {"sphere_area", table.sphere_area},
                         {"channels", channels},
                         {"escape_rates", gen.escape()},
                         {"gibbs", proc.gibbs()},
                         {"points_per_axis", gen.grid().points_per_axis()},
                         {"detailed_balance_max_rel", db}});
  if (!dump_matrix.empty()) {
    if (dump_matrix.rfind("p=", 0) != 0) throw ConfigError("--dump-matrix expects p=<value>[,<value>...]");
    const Eigen::VectorXd p = parse_vector(dump_matrix.substr(2), cfg.dim, "--dump-matrix");
    const Eigen::MatrixXcd fib = gen.fiber(p);
    auto csv = run.csv(matrix_out.empty() ? o.out + ".matrix.csv" : matrix_out, {"row", "col", "re", "im"});
    for (Eigen::Index r = 0; r < fib.rows(); ++r)
      for (Eigen::Index c = 0; c < fib.cols(); ++c)
        if (fib(r, c) != cplx(0.0, 0.0)) csv.row({double(r), double(c), fib(r, c).real(), fib(r, c).imag()});
  }
  run.finish(o.out);
  return 0;
}

struct SpectrumOptions {
  double pmax = 0.5;
  int steps = 32;
  std::string direction = "1";
  std::string report;
};

inline int cmd_spectrum(const Options& o, const SpectrumOptions& s, std::ostream& out) {
  Run run("spectrum", out);
  const ModelConfig cfg = load_for(run, o.config, o.seed, true);
  if (o.out.empty()) throw ConfigError("spectrum: --out is required");
  if (!(s.pmax > 0.0) || s.steps < 1) throw ConfigError("spectrum: need --pmax > 0 and --steps >= 1");
  Eigen::VectorXd dir = parse_vector(s.direction, cfg.dim, "--direction");
  if (dir.norm() == 0.0) throw ConfigError("spectrum: --direction must be nonzero");
  dir.normalize();
  run.flag("pmax", s.pmax);
  run.flag("steps", std::to_string(s.steps));
  run.flag("direction", s.direction);
  const generator::GeneratorMatrices gen(cfg);
  std::vector<Eigen::VectorXd> ps;
  for (int i = 0; i <= s.steps; ++i) ps.push_back(dir * (s.pmax * i / s.steps));
  const auto rep = spectral::spectral_gaps(gen, ps);
  auto csv = run.csv(o.out, {"p", "re_f", "im_f", "gap"});
  for (const auto& g : rep.samples) csv.row({g.p.norm(), g.f.real(), g.f.imag(), g.gap});
  if (!s.report.empty()) {
    json blocks = json::array();
    for (const auto& b : rep.blocks)
      blocks.push_back({{"from", b.from}, {"to", b.to}, {"max_re", b.max_re}, {"closed_form", b.closed_form}});
    run.write_json(s.report, {{"p_star", rep.p_star}, {"g_low", rep.g_low}, {"g_high", rep.g_high}, {"blocks", blocks}});
  }
  run.finish(o.out);
  return 0;
}

inline json ensemble_json(const kmc::EnsembleStats& st) {
  json probes = json::array();
  for (const auto& p : st.probes)
    probes.push_back({{"p", to_json(p.p)}, {"mean", to_json(p.mean)}, {"mean_se", p.mean_se},
                      {"cgf", to_json(p.cgf)}, {"cgf_se", p.cgf_se}});
  return {{"n_traj", st.n_traj},
          {"t_final", st.t_final},
          {"seed", st.seed},
          {"total_jumps", st.total_jumps},
          {"mean_x", to_json(st.mean_x)},
          {"mean_x_se", to_json(st.mean_x_se)},
          {"cov_x", to_json(st.cov_x)},
          {"D", to_json(st.D)},
          {"D_se", to_json(st.D_se)},
          {"level_hist", st.level_hist},
          {"gibbs", st.gibbs},
          {"chi_square", st.chi_square},
          {"chi_square_p", st.chi_square_p},
          {"k_bins", st.k_bins},
          {"k_hist", st.k_hist},
          {"k_tv", st.k_tv},
          {"probes", probes},
          {"warnings", st.warnings}};
}

struct DiffusionOptions {
  double kmc_traj = 10000;
  double kmc_tfinal = 0.0;  // 0: 200 / gap
};

inline int cmd_diffusion(const Options& o, const DiffusionOptions& d, std::ostream& out) {
  Run run("diffusion", out);
  const ModelConfig cfg = load_for(run, o.config, o.seed, true);
  if (o.out.empty()) throw ConfigError("diffusion: --out is required");
  run.flag("kmc-traj", d.kmc_traj);
  run.flag("kmc-tfinal", d.kmc_tfinal);
  const generator::GeneratorMatrices gen(cfg);
  const auto h = spectral::diffusion_tensor_hessian(gen);
  const auto f = spectral::diffusion_tensor_formula(gen);
  const double scale = std::max(f.D.cwiseAbs().maxCoeff(), 1e-300);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.D);
  json j{{"hessian", {{"D", to_json(h.D)}, {"gradient", to_json(h.gradient)}, {"max_imag", h.max_imag},
                      {"richardson_gap", h.richardson_gap}, {"f0", h.f0}}},
         {"formula", {{"D", to_json(f.D)}, {"solvability", f.solvability}, {"iterations", f.iterations}}},
         {"agreement_rel", (h.D - f.D).cwiseAbs().maxCoeff() / scale},
         {"eigenvalues", to_json(Eigen::VectorXd(es.eigenvalues()))},
         {"positive_definite", es.eigenvalues().minCoeff() > 0.0},
         {"kmc", nullptr}};
  if (d.kmc_traj > 0) {
    const double gap = gap_at_zero(gen);
    const double tf = d.kmc_tfinal > 0.0 ? d.kmc_tfinal : 200.0 / gap;
    const kmc::JumpProcess proc(cfg);
    kmc::EnsembleOptions eo;
    eo.threads = o.threads;
    eo.g_low = gap;
    const auto st = kmc::run_ensemble(proc, parse_count(d.kmc_traj, "--kmc-traj"), tf, {}, run.manifest.seed, eo);
    j["kmc"] = {{"D", to_json(st.D)}, {"D_se", to_json(st.D_se)}, {"n_traj", st.n_traj}, {"t_final", st.t_final},
                {"seed", st.seed}, {"warnings", st.warnings}};
  }
  run.write_json(o.out, j);
  run.finish(o.out);
  return 0;
}

struct SimulateOptions {
  double traj = 100000;
  double tfinal = 0.0;  // 0: 200 / gap
  std::vector<std::string> probes;
  std::string dump_paths;
  int paths = 10;
};

inline int cmd_simulate(const Options& o, const SimulateOptions& s, std::ostream& out) {
  Run run("simulate", out);
  const ModelConfig cfg = load_for(run, o.config, o.seed, true);
  if (o.out.empty()) throw ConfigError("simulate: --out is required");
  run.flag("traj", s.traj);
  run.flag("tfinal", s.tfinal);
  for (std::size_t i = 0; i < s.probes.size(); ++i) run.flag("probe" + std::to_string(i), s.probes[i]);
  if (!s.dump_paths.empty()) run.flag("paths", std::to_string(s.paths));
  std::vector<Eigen::VectorXd> probes;
  for (const auto& p : s.probes) probes.push_back(parse_vector(p, cfg.dim, "--probe"));
  const kmc::JumpProcess proc(cfg);
  double tf = s.tfinal, gap = 0.0;
  if (!(tf > 0.0)) {
    gap = gap_at_zero(generator::GeneratorMatrices(cfg));
    tf = 200.0 / gap;
  }
  kmc::EnsembleOptions eo;
  eo.threads = o.threads;
  eo.g_low = gap;
  const auto st = kmc::run_ensemble(proc, parse_count(s.traj, "--traj"), tf, probes, run.manifest.seed, eo);
  run.write_json(o.out, ensemble_json(st));
  if (!s.dump_paths.empty()) {
    std::vector<std::string> header{"traj", "t", "level"};
    for (int i = 0; i < cfg.dim; ++i) header.push_back("x" + std::to_string(i));
    for (int i = 0; i < cfg.dim; ++i) header.push_back("k" + std::to_string(i));
    auto csv = run.csv(s.dump_paths, header);
    for (int tr = 0; tr < s.paths; ++tr)
      for (const auto& p : kmc::record_path(proc, run.manifest.seed, std::uint64_t(tr), tf)) {
        std::vector<double> row{double(tr), p.t, double(p.level)};
        for (int i = 0; i < cfg.dim; ++i) row.push_back(p.x(i));
        for (int i = 0; i < cfg.dim; ++i) row.push_back(p.k(i));
        csv.row(row);
      }
  }
  run.finish(o.out);
  return 0;
}

struct DiagramOptions {
  int n = 2;
  bool list = false;
  bool check_d1 = false;
  bool unconstrained = false;
  std::string kernel = "0.05*exp(-t)";
  double a = 0.0;
  double t = 5.0;
  double samples = 1e6;
  int n_max = 4;
};

inline json estimate_json(const diagrams::Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

inline json bound_json(const diagrams::BoundCheck& b) {
  return {{"estimate", estimate_json(b.estimate)}, {"bound", b.bound}, {"pass", b.pass}};
}

inline int cmd_diagrams(const Options& o, const DiagramOptions& d, std::ostream& out) {
  Run run("diagrams", out);
  run.manifest.seed = o.seed.value_or(1);
  if (!d.list && !d.check_d1 && !d.unconstrained)
    throw ConfigError("diagrams: choose --list, --check-d1 or --unconstrained");
  run.flag("n", std::to_string(d.n));
  run.flag("list", d.list ? "1" : "0");
  json j;
  if (d.list) {
    json shapes = json::array();
    std::map<std::string, int> counts;
    for (const auto& s : diagrams::enumerate_pairings(d.n)) {
      const char* c = diagrams::class_name(diagrams::classify(s));
      ++counts[c];
      shapes.push_back({{"shape", s.str()}, {"class", c}});
      out << s.str() << " " << c << "\n";
    }
    j["list"] = {{"n", d.n}, {"count", shapes.size()}, {"class_counts", counts}, {"shapes", shapes}};
  }
  if (d.check_d1 || d.unconstrained) {
    run.flag("k", d.kernel);
    run.flag("samples", d.samples);
    const Expression kx(d.kernel);
    const diagrams::Kernel k = [&kx](double t) { return kx(t); };
    const std::size_t samples = parse_count(d.samples, "--samples");
    if (d.check_d1) {
      run.flag("a", d.a);
      run.flag("nmax", std::to_string(d.n_max));
      const auto r = diagrams::check_lemma_D1(k, d.a, d.n_max, samples, run.manifest.seed);
      json mir = json::array(), ir = json::array();
      for (const auto& e : r.mir_n) mir.push_back(estimate_json(e));
      for (const auto& e : r.ir_n) ir.push_back(estimate_json(e));
      j["check_d1"] = {{"a", r.a},
                       {"a_tilde", r.a_tilde},
                       {"norms", {{"k", r.norm_k}, {"e^{at}k", r.norm_eat}, {"t e^{at}k", r.norm_teat},
                                  {"e^{a~t}k", r.norm_eat_t}, {"t e^{a~t}k", r.norm_teat_t}}},
                       {"proposal_rate", r.proposal_rate},
                       {"n1_exact", r.n1_exact},
                       {"mir_per_n", mir},
                       {"ir_per_n", ir},
                       {"ir_shape_count", r.ir_shape_count},
                       {"mir", bound_json(r.mir)},
                       {"ir", bound_json(r.ir)},
                       {"ir_two_or_more", bound_json(r.ir_two)},
                       {"ratio", bound_json(r.ratio)},
                       {"pass", r.pass}};
    }
    if (d.unconstrained) {
      run.flag("t", d.t);
      run.flag("nmax", std::to_string(d.n_max));
      const auto r = diagrams::integrate_unconstrained(k, d.t, d.n_max, samples, run.manifest.seed);
      json per = json::array();
      for (const auto& e : r.per_n) per.push_back(estimate_json(e));
      j["unconstrained"] = {{"t", d.t}, {"per_n", per}, {"total", estimate_json(r.total)},
                            {"norm_k", r.norm_k}, {"bound", r.bound}, {"pass", r.pass}};
    }
  }
  if (!o.out.empty()) {
    run.write_json(o.out, j);
    run.finish(o.out);
  } else if (!d.list) {
    out << io::dump(j);
  }
  return 0;
}

// ------------------------------------------------------------------- dispatch

inline void error_json(std::ostream& err, const std::string& cls, const std::string& kind, const std::string& msg) {
  err << json{{"error", cls}, {"kind", kind}, {"message", msg}}.dump() << "\n";
}

// Exit codes: 0 success, 1 numeric failure, 2 configuration or usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"latticediff: Markovian transport of a tracer particle with internal levels"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  app.add_option("--threads", o.threads, "worker threads (default: LATTICEDIFF_THREADS, then all cores)")
      ->check(CLI::NonNegativeNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed (default: the config's rng_seed)");
  auto config_flag = [&](CLI::App* sc, bool required = true) {
    auto* opt = sc->add_option("--config", o.config, "model JSON")->check(CLI::ExistingFile);
    if (required) opt->required();
  };
  auto out_flag = [&](CLI::App* sc, const char* help) { sc->add_option("--out", o.out, help); };

  auto* validate = app.add_subcommand("validate", "check the model assumptions");
  config_flag(validate);
  out_flag(validate, "also write the report here");

  PsiOptions po;
  auto* psi = app.add_subcommand("psi", "bath correlation psi(x,t) and its decay check");
  config_flag(psi);
  psi->add_option("--x", po.x, "position, comma separated");
  psi->add_option("--tmax", po.tmax, "last time");
  psi->add_option("--dt", po.dt, "time step of the CSV");
  out_flag(psi, "CSV of t, re, im");
  psi->add_option("--decay-check", po.decay_check, "JSON report of the subluminal cone fit");
  psi->add_option("--vstar", po.v_star, "cone speed for the decay check");

  std::string dump_matrix, matrix_out;
  auto* rates = app.add_subcommand("rates", "jump rate table and escape rates");
  config_flag(rates);
  out_flag(rates, "rates JSON");
  rates->add_option("--dump-matrix", dump_matrix, "p=<value>: write the a = 0 fiber block as CSV");
  rates->add_option("--matrix-out", matrix_out, "CSV path for --dump-matrix (default <out>.matrix.csv)");

  SpectrumOptions so;
  auto* spectrum = app.add_subcommand("spectrum", "Perron eigenvalue and gap along a ray in p");
  config_flag(spectrum);
  spectrum->add_option("--pmax", so.pmax, "largest |p|");
  spectrum->add_option("--steps", so.steps, "number of steps from 0 to pmax");
  spectrum->add_option("--direction", so.direction, "direction of the ray (default: first axis)");
  spectrum->add_option("--report", so.report, "JSON with g_low, g_high, p_star and the a != 0 blocks");
  out_flag(spectrum, "CSV of p, Re f, Im f, gap");

  DiffusionOptions dopt;
  auto* diffusion = app.add_subcommand("diffusion", "diffusion tensor by two spectral routes and KMC");
  config_flag(diffusion);
  diffusion->add_option("--kmc-traj", dopt.kmc_traj, "trajectories for the KMC estimate (0 disables)");
  diffusion->add_option("--kmc-tfinal", dopt.kmc_tfinal, "KMC horizon (default 200 / gap)");
  out_flag(diffusion, "D JSON");

  SimulateOptions sopt;
  auto* simulate = app.add_subcommand("simulate", "kinetic Monte Carlo ensemble");
  config_flag(simulate);
  simulate->add_option("--traj", sopt.traj, "number of trajectories");
  simulate->add_option("--tfinal", sopt.tfinal, "horizon (default 200 / gap)");
  simulate->add_option("--probe", sopt.probes, "p for the CGF estimate, repeatable");
  simulate->add_option("--dump-paths", sopt.dump_paths, "CSV of the first trajectories, one row per jump");
  simulate->add_option("--paths", sopt.paths, "how many trajectories --dump-paths records");
  out_flag(simulate, "statistics JSON");

  DiagramOptions dg;
  auto* diag = app.add_subcommand("diagrams", "pairing combinatorics and Laplace-domain bounds");
  diag->add_option("--n", dg.n, "pairs per shape for --list");
  diag->add_flag("--list", dg.list, "print every shape with its class");
  diag->add_flag("--check-d1", dg.check_d1, "Monte Carlo check of the irreducible-class bounds");
  diag->add_flag("--unconstrained", dg.unconstrained, "Monte Carlo sum over unconstrained diagrams on [0, t]");
  diag->add_option("--k", dg.kernel, "kernel k(t) as an expression in t");
  diag->add_option("--a", dg.a, "Laplace exponent a >= 0");
  diag->add_option("--t", dg.t, "horizon for --unconstrained");
  diag->add_option("--samples", dg.samples, "Monte Carlo samples per order");
  diag->add_option("--nmax", dg.n_max, "largest order");
  out_flag(diag, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    error_json(err, "usage", e.get_name(), e.what());
    return 2;
  }
  if (*seed_opt) o.seed = seed;
  if (o.threads > 0) o.threads = resolve_threads(o.threads);

  try {
    if (*validate) return cmd_validate(o, out, err);
    if (*psi) return cmd_psi(o, po, out);
    if (*rates) return cmd_rates(o, dump_matrix, matrix_out, out);
    if (*spectrum) return cmd_spectrum(o, so, out);
    if (*diffusion) return cmd_diffusion(o, dopt, out);
    if (*simulate) return cmd_simulate(o, sopt, out);
    if (*diag) return cmd_diagrams(o, dg, out);
  } catch (const ConfigError& e) {
    // messages read "<where>: <what>"; a bare identifier before the colon names the kind
    const std::string msg = e.what();
    std::string kind = msg.substr(0, std::min(msg.find(':'), msg.size()));
    if (kind.empty() || kind.size() == msg.size() || kind.find_first_not_of("abcdefghijklmnopqrstuvwxyz_-") != std::string::npos)
      kind = "invalid";
    error_json(err, "config", kind, msg);
    return 2;
  } catch (const NumericError& e) {
    error_json(err, "numeric", e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_json(err, "numeric", "unexpected", e.what());
    return 1;
  }
  return 2;
}

}  // namespace latticediff::cli
