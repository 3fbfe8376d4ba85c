#include "leray/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "leray/error.hpp"
#include "leray/io.hpp"

namespace leray::cli {

using experiments::ExperimentRecord;
using io::json;
namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  int dim = 0;
  double gamma = 0, gamma0 = 0, kappa = 0, q = 0, dt = 0, T = 0, b = 0;
  std::vector<double> alpha;
  std::vector<int> n_sweep;
  int samples = 0, M = 0, save_every = 0, range_factor = 0, gaussianity_samples = 0;
  double gaussianity_T = 0;
  std::string scheme, transport;
  bool no_extension = false;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App* app, CommonFlags& f, bool corrector) {
  f.opts["config"] = app->add_option("--config", f.config, "JSON config file");
  f.opts["seed"] = app->add_option("--seed", f.seed, "master seed (overrides LERAY_SEED)");
  f.opts["out"] = app->add_option("--out", f.out, "output root (overrides LERAY_OUT)");
  f.opts["threads"] = app->add_option("--threads", f.threads, "worker threads, 0 = auto");
  f.opts["dim"] = app->add_option("--dim", f.dim, "dimension")->check(CLI::IsMember({2, 3}));
  f.opts["gamma"] = app->add_option("--gamma", f.gamma, "noise spectrum exponent");
  f.opts["kappa"] = app->add_option("--kappa", f.kappa, "noise intensity");
  f.opts["n-sweep"] = app->add_option("--n-sweep", f.n_sweep, "noise cutoffs, comma separated")->delimiter(',');
  if (corrector) {
    f.opts["alpha"] = app->add_option("--alpha", f.alpha, "regularity exponents, comma separated")->delimiter(',');
    f.opts["b"] = app->add_option("--b", f.b, "Sobolev base index");
    f.opts["range-factor"] = app->add_option("--range-factor", f.range_factor, "mode range as a multiple of N");
    return;
  }
  f.opts["alpha"] = app->add_option("--alpha", f.alpha, "error norm exponent")->expected(1);
  f.opts["gamma0"] = app->add_option("--gamma0", f.gamma0, "smoothing exponent");
  f.opts["q"] = app->add_option("--q", f.q, "moment order");
  f.opts["dt"] = app->add_option("--dt", f.dt, "time step");
  f.opts["T"] = app->add_option("--T", f.T, "final time");
  f.opts["samples"] = app->add_option("--samples", f.samples, "Monte Carlo samples");
  f.opts["M"] = app->add_option("--M", f.M, "Galerkin cutoff");
  f.opts["save-every"] = app->add_option("--save-every", f.save_every, "save stride in steps, 0 = T/200");
  f.opts["scheme"] = app->add_option("--scheme", f.scheme, "ito_euler or stratonovich_midpoint");
  f.opts["transport"] = app->add_option("--transport", f.transport, "fft or direct");
}

std::uint64_t parse_seed_env(const char* text) {
  std::string s(text);
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw ValidationError("LERAY_SEED must be a non-negative integer");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ValidationError("LERAY_SEED is out of range");
  }
}

io::Config resolve_config(const CommonFlags& f, const io::Config& base) {
  io::Config cfg = base;
  if (f.given("config")) cfg = io::load_config(f.config, base);
  auto& s = cfg.study;
  if (const char* env = std::getenv("LERAY_SEED")) s.seed = parse_seed_env(env);
  if (f.given("seed")) s.seed = f.seed;
  if (f.given("dim")) s.dim = f.dim;
  if (f.given("gamma")) s.gamma = f.gamma;
  if (f.given("n-sweep")) s.n_sweep = f.n_sweep;
  if (f.given("gamma0")) s.gamma0 = f.gamma0;
  if (f.given("q")) s.q = f.q;
  if (f.given("dt")) s.dt = f.dt;
  if (f.given("T")) s.T = f.T;
  if (f.given("samples")) s.samples = f.samples;
  if (f.given("M")) s.M = f.M;
  if (f.given("save-every")) s.save_every = f.save_every;
  if (f.given("gaussianity-samples")) s.gaussianity_samples = f.gaussianity_samples;
  if (f.given("gaussianity-T")) s.gaussianity_T = f.gaussianity_T;
  if (f.given("scheme")) s.scheme = dynamics::parse_scheme(f.scheme);
  if (f.given("transport")) {
    json j = {{"solver", {{"transport", f.transport}}}};
    cfg = io::config_from_json(j, cfg);
  }
  if (f.given("b")) cfg.corrector.b = f.b;
  if (f.given("range-factor")) cfg.corrector.range_factor = f.range_factor;
  if (f.no_extension) cfg.corrector.check_extension = false;
  if (f.opts.count("b")) {
    if (f.given("kappa")) cfg.corrector.kappa = f.kappa;
    if (f.given("alpha")) cfg.corrector.alphas = f.alpha;
  } else {
    if (f.given("kappa")) s.kappa = f.kappa;
    if (f.given("alpha")) s.alpha = f.alpha.front();
  }
  return cfg;
}

fs::path output_root(const CommonFlags& f) {
  if (f.given("out")) return f.out;
  if (const char* env = std::getenv("LERAY_OUT")) return env;
  return "runs";
}

// Owns the run directory: manifest first, lock for the duration, status on exit.
class RunContext {
 public:
  RunContext(const std::string& sub, const CommonFlags& f, const json& config, const json& extras,
             std::uint64_t seed)
      : hash_(io::hash_json(json{{"subcommand", sub}, {"config", config}, {"extras", extras}})) {
    dir_ = output_root(f) / (sub + "-" + hash_);
    fs::create_directories(dir_);
    lock_.emplace(dir_);
    manifest_.subcommand = sub;
    manifest_.config_path = f.given("config") ? f.config : "";
    manifest_.config = config;
    if (!extras.empty()) manifest_.config["run"] = extras;
    manifest_.config_hash = hash_;
    manifest_.seed = seed;
    manifest_.timestamp = io::utc_timestamp();
    io::write_manifest(dir_, manifest_);
  }
  ~RunContext() {
    if (!done_) {
      manifest_.status = "failed";
      try {
        io::write_manifest(dir_, manifest_);
      } catch (...) {
      }
    }
  }
  void complete() {
    manifest_.status = "complete";
    io::write_manifest(dir_, manifest_);
    done_ = true;
  }
  const fs::path& dir() const { return dir_; }
  const std::string& hash() const { return hash_; }

 private:
  std::string hash_;
  fs::path dir_;
  std::optional<io::RunLock> lock_;
  io::RunManifest manifest_;
  bool done_ = false;
};

void print_records(std::ostream& out, const std::vector<ExperimentRecord>& recs) {
  out << std::setw(6) << "N" << std::setw(16) << "error" << std::setw(16) << "ci_low" << std::setw(16)
      << "ci_high" << std::setw(16) << "error_fine" << std::setw(9) << "flagged" << '\n';
  for (const auto& r : recs) {
    out << std::setw(6) << r.N << std::setw(16) << r.error << std::setw(16) << r.ci_low << std::setw(16)
        << r.ci_high << std::setw(16) << r.error_fine << std::setw(9) << r.flagged << '\n';
  }
}

json fit_summary(const experiments::RateFit& fit) {
  return {{"fitted_slope", fit.log_n.slope},
          {"intercept", fit.log_n.intercept},
          {"stderr", fit.log_n.stderr_slope},
          {"points", fit.log_n.points},
          {"excluded", fit.excluded},
          {"slope_vs_epsilon", fit.log_eps.slope}};
}

int run_corrector_check(const CommonFlags& f, std::ostream& out) {
  io::Config cfg = resolve_config(f, io::Config{});
  auto sweep = cfg.corrector_sweep();
  experiments::validate_corrector_sweep(sweep);
  RunContext ctx("corrector-check", f, io::to_json(cfg), json::object(), cfg.study.seed);
  auto rows = experiments::run_corrector_sweep(sweep);
  io::JsonlWriter writer(ctx.dir() / "corrector.jsonl");
  out << std::setw(6) << "N" << std::setw(8) << "alpha" << std::setw(16) << "epsilon_N" << std::setw(16) << "D_N"
      << std::setw(16) << "op_norm" << std::setw(14) << "ratio" << std::setw(16) << "ratio_extended" << '\n';
  for (const auto& r : rows) {
    writer.write(io::corrector_row_to_json(r));
    out << std::setw(6) << r.N << std::setw(8) << r.alpha << std::setw(16) << r.epsilon_N << std::setw(16) << r.D_N
        << std::setw(16) << r.op_norm << std::setw(14) << r.ratio << std::setw(16) << r.ratio_extended << '\n';
  }
  json bands = json::object();
  for (double a : sweep.alphas) bands[std::to_string(a)] = experiments::ratio_band(rows, a);
  io::write_json(ctx.dir() / "summary.json", {{"rows", rows.size()}, {"ratio_band", bands}});
  ctx.complete();
  out << "output: " << ctx.dir().string() << '\n';
  return kExitOk;
}

int run_simulate(const CommonFlags& f, int noise_cutoff, bool cutoff_given, std::uint64_t sample, std::ostream& out) {
  io::Config cfg = resolve_config(f, io::Config{});
  const auto& s = cfg.study;
  experiments::validate_main(s);
  const int N = cutoff_given ? noise_cutoff : s.n_sweep.back();
  if (N < 0 || N > s.M) throw ValidationError("noise cutoff N must lie in [0, M]");
  json extras = {{"noise_cutoff", N}, {"sample", sample}};
  RunContext ctx("simulate", f, io::to_json(cfg), extras, s.seed);
  const auto u0 = experiments::make_initial_field(s.initial, s.dim, s.M);
  std::optional<noise::ThetaCoefficients> theta;
  if (N > 0) theta = noise::theta_coeffs(s.dim, s.gamma, N);
  dynamics::GalerkinStepper stepper({s.dim, s.gamma0, s.kappa}, theta, s.solver_config());
  const noise::StreamKey key{s.seed, sample};
  auto traj = dynamics::solve_sde(stepper, u0, [&](std::uint64_t step) {
    return noise::sample_increments(s.dim, std::max(N, 1), s.dt, key, step);
  });
  io::CheckpointHeader h{dynamics::scheme_name(s.scheme), s.dt, s.T, s.M, N, s.gamma, s.gamma0, s.kappa, s.seed,
                         sample};
  io::write_json(ctx.dir() / "trajectory.json", io::trajectory_to_json(h, traj));
  const double e0 = spectral::l2_norm(traj.frames.front());
  const double e1 = spectral::l2_norm(traj.frames.back());
  io::write_json(ctx.dir() / "summary.json",
                 {{"frames", traj.frames.size()},
                  {"initial_l2", e0},
                  {"final_l2", e1},
                  {"max_energy_ratio", traj.max_energy_ratio}});
  ctx.complete();
  out << "frames " << traj.frames.size() << "  |u0| " << e0 << "  |u_T| " << e1 << '\n';
  out << "output: " << ctx.dir().string() << '\n';
  return kExitOk;
}

int run_viscous(const CommonFlags& f, std::ostream& out) {
  io::Config cfg = resolve_config(f, io::Config{});
  const auto& s = cfg.study;
  experiments::validate_main(s);
  RunContext ctx("viscous", f, io::to_json(cfg), json::object(), s.seed);
  const auto u0 = experiments::make_initial_field(s.initial, s.dim, s.M);
  auto traj = dynamics::solve_viscous_leray(u0, s.gamma0, s.kappa, s.dim, s.solver_config());
  io::CheckpointHeader h{"viscous_leray", s.dt, s.T, s.M, 0, s.gamma, s.gamma0, s.kappa, s.seed, 0};
  io::write_json(ctx.dir() / "trajectory.json", io::trajectory_to_json(h, traj));
  const double e0 = spectral::l2_norm(traj.frames.front());
  const double e1 = spectral::l2_norm(traj.frames.back());
  io::write_json(ctx.dir() / "summary.json",
                 {{"frames", traj.frames.size()},
                  {"initial_l2", e0},
                  {"final_l2", e1},
                  {"dissipation", traj.dissipation.back()},
                  {"energy_balance", e1 * e1 + 2.0 * traj.dissipation.back() - e0 * e0}});
  ctx.complete();
  out << "frames " << traj.frames.size() << "  |u0| " << e0 << "  |u_T| " << e1 << '\n';
  out << "output: " << ctx.dir().string() << '\n';
  return kExitOk;
}

int run_study(const std::string& sub, const CommonFlags& f, bool skip_gaussianity, std::ostream& out) {
  const bool clt = sub == "clt";
  io::Config base;
  if (clt) base.study = experiments::default_clt_config();
  io::Config cfg = resolve_config(f, base);
  const auto& s = cfg.study;
  if (clt) experiments::validate_clt(s); else experiments::validate_main(s);
  json extras = clt ? json{{"skip_gaussianity", skip_gaussianity}} : json::object();
  RunContext ctx(sub, f, io::to_json(cfg), extras, s.seed);
  io::JsonlWriter writer(ctx.dir() / "records.jsonl");
  experiments::RunOptions opts;
  opts.threads = f.threads;
  opts.config_hash = ctx.hash();
  opts.on_record = [&](const ExperimentRecord& r) {
    writer.write_record(r);
    out << sub << ": N = " << r.N << "  e_N = " << r.error << '\n';
  };
  auto recs = clt ? experiments::run_clt_study(s, opts) : experiments::run_main_rate_study(s, opts);
  const double predicted = clt ? experiments::predicted_clt_exponent(s.gamma, s.alpha)
                               : experiments::predicted_main_exponent(s.dim, s.gamma, s.alpha);
  io::emit_plot_data(recs, predicted, ctx.dir() / "plot.csv");
  json summary = {{"study", clt ? "clt" : "main"}, {"predicted_exponent", predicted}};
  int flagged = 0;
  for (const auto& r : recs) flagged += r.flagged;
  summary["flagged_paths"] = flagged;
  if (recs.size() >= 3) {
    auto fit = experiments::fit_rate(recs);
    summary.update(fit_summary(fit));
    std::vector<ExperimentRecord> fine = recs;
    for (auto& r : fine) r.error = r.error_fine;
    summary["fitted_slope_fine_grid"] = experiments::fit_rate(fine).log_n.slope;
    summary["pass"] = {{"slope_negative", fit.log_n.slope + 2.0 * fit.log_n.stderr_slope < 0.0},
                       {"consistent_with_prediction", fit.log_n.slope <= predicted + 0.15}};
  }
  if (clt) {
    summary["predicted_moment_exponent"] = experiments::predicted_clt_moment_exponent(s.gamma, s.alpha, s.q);
    summary["pass"]["ci_separated"] = recs.back().ci_high < recs.front().ci_low;
    if (!skip_gaussianity) {
      auto g = experiments::run_clt_gaussianity(s, opts);
      summary["gaussianity"] = {{"mode", g.mode},
                                {"component", g.component},
                                {"samples", g.samples},
                                {"T", g.T},
                                {"jarque_bera", g.test.statistic},
                                {"p_value", g.test.p_value},
                                {"skewness", g.test.skewness},
                                {"excess_kurtosis", g.test.excess_kurtosis},
                                {"pass", g.pass}};
    }
  }
  io::write_json(ctx.dir() / "summary.json", summary);
  ctx.complete();
  print_records(out, recs);
  if (summary.contains("fitted_slope")) {
    out << "slope " << summary["fitted_slope"].get<double>() << " +- " << summary["stderr"].get<double>()
        << "  predicted " << predicted << '\n';
  }
  out << "output: " << ctx.dir().string() << '\n';
  return kExitOk;
}

int run_fit(const CommonFlags& f, const std::string& records_path, double predicted, bool predicted_given,
            std::ostream& out) {
  auto recs = io::read_records(records_path);
  if (recs.empty()) throw ValidationError("records file is empty");
  auto fit = experiments::fit_rate(recs);
  json all = json::array();
  for (const auto& r : recs) all.push_back(io::record_to_json(r));
  json extras = {{"records", io::hash_json(all)}, {"count", recs.size()}};
  if (predicted_given) extras["predicted_exponent"] = predicted;
  RunContext ctx("fit", f, json{{"records_path", records_path}}, extras, recs.front().seed);
  json summary = fit_summary(fit);
  if (predicted_given) {
    summary["predicted_exponent"] = predicted;
    io::emit_plot_data(recs, predicted, ctx.dir() / "plot.csv");
  }
  io::write_json(ctx.dir() / "summary.json", summary);
  ctx.complete();
  out << summary.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic transport noise scaling-limit experiments", "leray"};
  app.require_subcommand(1);

  CommonFlags corr_f, sim_f, visc_f, conv_f, clt_f, fit_f;
  auto* corr = app.add_subcommand("corrector-check", "corrector convergence rate sweep");
  add_common(corr, corr_f, true);
  corr->add_flag("--no-extension", corr_f.no_extension, "skip the enlarged-range check");

  auto* sim = app.add_subcommand("simulate", "one Galerkin SDE path with checkpoints");
  add_common(sim, sim_f, false);
  int noise_cutoff = 0;
  std::uint64_t sample = 0;
  auto* cutoff_opt = sim->add_option("--noise-cutoff", noise_cutoff, "noise cutoff N (default max n_sweep, 0 = no noise)");
  sim->add_option("--sample", sample, "sample index of the Brownian stream");

  auto* visc = app.add_subcommand("viscous", "deterministic viscous Leray solution");
  add_common(visc, visc_f, false);

  auto* conv = app.add_subcommand("convergence", "scaling-limit rate study");
  add_common(conv, conv_f, false);

  auto* clt = app.add_subcommand("clt", "central limit rate study (d = 3)");
  add_common(clt, clt_f, false);
  bool skip_gauss = false;
  clt->add_flag("--skip-gaussianity", skip_gauss, "skip the normality check of the limit");
  clt_f.opts["gaussianity-samples"] =
      clt->add_option("--gaussianity-samples", clt_f.gaussianity_samples, "samples for the normality check");
  clt_f.opts["gaussianity-T"] = clt->add_option("--gaussianity-T", clt_f.gaussianity_T, "horizon of the normality check");

  auto* fit = app.add_subcommand("fit", "re-fit rates from a records JSONL file");
  std::string records_path;
  double predicted = 0.0;
  fit->add_option("--records", records_path, "records JSONL")->required();
  auto* pred_opt = fit->add_option("--predicted", predicted, "predicted exponent for the plot reference line");
  fit_f.opts["out"] = fit->add_option("--out", fit_f.out, "output root (overrides LERAY_OUT)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (corr->parsed()) {
      return run_corrector_check(corr_f, out);
    }
    if (sim->parsed()) return run_simulate(sim_f, noise_cutoff, cutoff_opt->count() > 0, sample, out);
    if (visc->parsed()) return run_viscous(visc_f, out);
    if (conv->parsed()) return run_study("convergence", conv_f, false, out);
    if (clt->parsed()) return run_study("clt", clt_f, skip_gauss, out);
    if (fit->parsed()) return run_fit(fit_f, records_path, predicted, pred_opt->count() > 0, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace leray::cli
