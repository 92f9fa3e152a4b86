// kramers_cli: batch front door for the lattice double-well experiments.
//
//   kramers_cli prefactor --mu 2 --n 1,4,16,64
//   kramers_cli spectrum  --n 1 --h 0.14,0.1,0.07,0.05 --format json --out spec.json
//   kramers_cli verify    --only poincare,gamma
//   kramers_cli sample    --n 1 --h 0.1 --mode rayleigh --chains 8
//   kramers_cli hitting   --n 4 --h 0.25,0.2,0.167 --paths 200
//
// Settings may also come from a TOML/INI file given by --config; command-line
// flags override the file, which overrides the defaults.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "kramers/commands.hpp"

namespace {

using namespace kramers;

struct CommonFlags {
  double mu = 2.0;
  std::string h;
  std::string n;
  std::optional<double> mass;
  std::uint64_t seed = 0;
  std::string out = "-";
  std::string format = "csv";

  cmd::CommonConfig resolve() const {
    cmd::CommonConfig c;
    c.mu = mu;
    c.h_list = cmd::parse_real_list(h, "--h");
    c.n_list = cmd::parse_size_list(n, "--n");
    c.mass = mass;
    c.seed = seed;
    c.out = out;
    c.format = format;
    return c;
  }
};

void add_common(CLI::App* app, CommonFlags& f, const std::string& default_h, const std::string& default_n) {
  f.h = default_h;
  f.n = default_n;
  app->add_option("--mu", f.mu, "coupling strength, must exceed 1")->capture_default_str();
  app->add_option("--h", f.h, "noise strength, scalar or comma list")->capture_default_str();
  app->add_option("--n", f.n, "number of lattice sites, scalar or comma list")->capture_default_str();
  app->add_option("--mass", f.mass, "mass for the lattice Gaussian");
  app->add_option("--seed", f.seed, "Philox seed")->capture_default_str();
  app->add_option("--out", f.out, "output path, - for stdout")->capture_default_str();
  app->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

int finish(const cmd::CommandResult& r, const cmd::CommonConfig& c) {
  cmd::write_table(r.table, c);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-N Kramers law experiments for the lattice double well"};
  app.set_help_flag("--help", "print this help and exit");
  app.set_config("--config", "", "TOML/INI file with default settings");
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags pf, sf, vf, mf, hf;

  auto* prefactor = app.add_subcommand("prefactor", "prefactor p(N) and its large-N limit");
  add_common(prefactor, pf, "", "1,4,16,64");

  auto* spectrum = app.add_subcommand("spectrum", "lowest eigenvalues on a tensor grid (N <= 3)");
  add_common(spectrum, sf, "0.1", "1");
  cmd::SpectrumConfig spec_cfg;
  std::string form = "generator";
  spectrum->add_option("--points", spec_cfg.points, "grid points per dimension, 0 for the default")
      ->capture_default_str();
  spectrum->add_option("--form", form, "generator or witten")
      ->check(CLI::IsMember({"generator", "witten"}))
      ->capture_default_str();

  auto* verify = app.add_subcommand("verify", "inequality and closed-form oracle suites");
  add_common(verify, vf, "", "");
  VerifyOptions verify_opt;
  std::string only;
  verify->add_option("--only", only, "comma list of suites to run");
  verify->add_option("--tolerance-scale", verify_opt.tolerance_scale, "multiplier on every tolerance")
      ->capture_default_str();
  verify->add_option("--states", verify_opt.random_states, "random states per lattice size")->capture_default_str();
  verify->add_option("--mc-samples", verify_opt.mc_samples, "Monte Carlo samples per cell")->capture_default_str();

  auto* sample = app.add_subcommand("sample", "Rayleigh bound and relaxation-rate estimates");
  add_common(sample, mf, "0.1", "1");
  cmd::SampleConfig sample_cfg;
  std::string kernel = "langevin";
  std::size_t threads = 0;
  sample->add_option("--mode", sample_cfg.mode, "rayleigh, relaxation or both")
      ->check(CLI::IsMember({"rayleigh", "relaxation", "both"}))
      ->capture_default_str();
  sample->add_option("--chains", sample_cfg.chain.chains, "MALA chains (even)")->capture_default_str();
  sample->add_option("--steps", sample_cfg.chain.steps, "MALA steps per chain after burn-in")->capture_default_str();
  sample->add_option("--burn-in", sample_cfg.chain.burn_in, "MALA burn-in steps per chain")->capture_default_str();
  sample->add_option("--step-size", sample_cfg.chain.step_size, "initial MALA step size")->capture_default_str();
  sample->add_option("--tune-step", sample_cfg.chain.tune_step, "adapt the MALA step during burn-in")
      ->capture_default_str();
  sample->add_option("--batches", sample_cfg.chain.batches, "batches per chain")->capture_default_str();
  sample->add_option("--ess-floor", sample_cfg.chain.ess_floor, "minimum ESS for a conclusive estimate")
      ->capture_default_str();
  sample->add_option("--kernel", kernel, "relaxation dynamics: langevin or mala")
      ->check(CLI::IsMember({"langevin", "mala"}))
      ->capture_default_str();
  sample->add_option("--paths", sample_cfg.relax.paths, "relaxation trajectories")->capture_default_str();
  sample->add_option("--dt", sample_cfg.relax.dt, "time step")->capture_default_str();
  sample->add_option("--duration", sample_cfg.relax.duration, "simulated time per trajectory")
      ->capture_default_str();
  sample->add_option("--max-lag", sample_cfg.relax.max_lag, "largest autocorrelation lag time")
      ->capture_default_str();
  sample->add_option("--r2-floor", sample_cfg.relax.r_squared_floor, "minimum R^2 of the log-autocorrelation fit")
      ->capture_default_str();
  sample->add_option("--threads", threads, "worker threads, 0 for all cores")->capture_default_str();

  auto* hitting = app.add_subcommand("hitting", "well-to-well hitting times and Arrhenius fit");
  add_common(hitting, hf, "", "4");
  cmd::HittingConfig hit_cfg;
  hitting->add_option("--paths", hit_cfg.sim.paths, "paths per cell")->capture_default_str();
  hitting->add_option("--dt", hit_cfg.sim.dt, "Euler-Maruyama time step")->capture_default_str();
  hitting->add_option("--radius", hit_cfg.sim.target_radius, "target is xbar >= 1 - radius")->capture_default_str();
  hitting->add_option("--max-steps", hit_cfg.sim.max_steps, "censoring budget per path")->capture_default_str();
  hitting->add_option("--threads", hit_cfg.sim.threads, "worker threads, 0 for all cores")->capture_default_str();
  hitting->add_option("--raw-prefix", hit_cfg.raw_prefix, "write raw times to <prefix>_N<n>_h<h>.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cmd::exit_violation;
  }

  try {
    if (prefactor->parsed()) {
      const auto c = pf.resolve();
      return finish(cmd::cmd_prefactor(c), c);
    }
    if (spectrum->parsed()) {
      const auto c = sf.resolve();
      spec_cfg.form = form == "witten" ? OperatorForm::witten : OperatorForm::generator;
      return finish(cmd::cmd_spectrum(c, spec_cfg), c);
    }
    if (verify->parsed()) {
      const auto c = vf.resolve();
      for (const auto& s : cmd::detail::split_commas(only))
        if (!s.empty()) verify_opt.only.insert(s);
      return finish(cmd::cmd_verify(c, verify_opt), c);
    }
    if (sample->parsed()) {
      const auto c = mf.resolve();
      sample_cfg.relax.kernel = kernel == "mala" ? Kernel::mala : Kernel::langevin;
      sample_cfg.chain.threads = threads;
      sample_cfg.relax.threads = threads;
      return finish(cmd::cmd_sample(c, sample_cfg), c);
    }
    if (hitting->parsed()) {
      const auto c = hf.resolve();
      return finish(cmd::cmd_hitting(c, hit_cfg), c);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmd::exit_violation;
  }
  return cmd::exit_violation;
}
