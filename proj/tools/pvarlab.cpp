// pvarlab: power variations, jump tests and simulated controls for sampled paths.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pvarlab/cli.hpp"

namespace {

struct RawOptions {
  std::optional<std::string> input;
  std::optional<double> dt;
  std::optional<std::string> spikes;
  std::optional<double> detect_threshold;
  double min_separation = 0.3;
  bool no_spikes = false;
  double pre = 0.12;
  double post = 0.18;
  std::string gamma = "1,2,4,8,10,16,32,64,128,256";
  std::string m_grid = "1:240";
  std::string p_grid = "0.25:0.25:6";
  std::string powers = "2,4";
  std::size_t m_base = 1;
  std::size_t m_min = 1;
  double trunc_multiplier = 3.0;
  double delta = 0.15;
  double delta_reject = 0.25;
  double eps_stab = 0.01;
  std::uint64_t seed = 1;
  std::string out = ".";
  // simulation
  std::optional<std::string> preset;
  std::optional<std::string> sim_config;
  std::map<std::string, std::string> sim_flags;
};

void add_options(CLI::App* app, RawOptions& o, bool analysis) {
  app->add_option("--seed", o.seed, "Master seed for simulated paths");
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
  app->add_option("--dt", o.dt, "Sampling step in seconds (required for one-column input)");
  app->add_option("--preset", o.preset, "Simulation preset: ou, cir, pearson, jump, jump199, fbm");
  app->add_option("--sim-config", o.sim_config, "key=value file with simulation parameters");
  for (const char* key : {"kind", "theta", "mu", "sigma", "cir-a", "cir-floor", "pearson-a", "pearson-m",
                          "pearson-b", "x0", "n", "alpha", "epsilon", "hurst", "scale"}) {
    std::string flag = std::string("--") + key;
    std::string name = key;
    for (auto& ch : name) {
      if (ch == '-') ch = '_';
    }
    app->add_option_function<std::string>(
        flag, [&o, name](const std::string& v) { o.sim_flags[name] = v; }, "Simulation parameter " + name);
  }
  if (!analysis) return;
  app->add_option("--input", o.input, "Series file: <value> or <time>,<value> per line");
  app->add_option("--spikes", o.spikes, "Spike-time file, one time in seconds per line");
  app->add_option("--detect-threshold", o.detect_threshold, "Detect spikes by upward crossing of this level (mV)");
  app->add_option("--min-separation", o.min_separation, "Refractory period for spike detection (s)")
      ->capture_default_str();
  app->add_flag("--no-spikes", o.no_spikes, "Treat the whole input as one spikeless segment");
  app->add_option("--pre", o.pre, "Excision before each spike (s)")->capture_default_str();
  app->add_option("--post", o.post, "Excision after each spike (s)")->capture_default_str();
  app->add_option("--gamma", o.gamma, "Truncation factors, comma list (inf allowed)")->capture_default_str();
  app->add_option("--m-grid", o.m_grid, "Step multiples M, e.g. 1:240 or 1,2,4")->capture_default_str();
  app->add_option("--p-grid", o.p_grid, "Powers for log-ratio curves, e.g. 0.25:0.25:6")->capture_default_str();
  app->add_option("--p", o.powers, "Powers for pvar curves")->capture_default_str();
  app->add_option("--m-base", o.m_base, "Base step multiple M of the log-ratio")->capture_default_str();
  app->add_option("--m-min", o.m_min, "Base step multiple for the 4-variation ratio")->capture_default_str();
  app->add_option("--trunc-multiplier", o.trunc_multiplier, "Constant c in c*sqrt(dt*M)*Gamma")
      ->capture_default_str();
  app->add_option("--delta", o.delta, "Acceptance distance to a reference curve")->capture_default_str();
  app->add_option("--delta-reject", o.delta_reject, "Rejection distance")->capture_default_str();
  app->add_option("--eps-stab", o.eps_stab, "Stabilization tolerance across Gamma")->capture_default_str();
}

pvarlab::cli::RunConfig to_config(const RawOptions& o, bool analysis) {
  using pvarlab::cli::SpikeSource;
  pvarlab::cli::RunConfig c;
  c.input = o.input;
  c.dt = o.dt;
  c.seed = o.seed;
  c.out = o.out;
  c.threads = pvarlab::detail::thread_budget();
  if (o.sim_config) {
    std::ifstream in(*o.sim_config);
    if (!in) throw pvarlab::Error("cannot open simulation config '" + *o.sim_config + "'");
    c.sim = pvarlab::cli::parse_key_values(in);
  }
  for (const auto& [k, v] : o.sim_flags) c.sim[k] = v;
  if (o.preset) c.sim["preset"] = *o.preset;

  if (analysis) {
    const bool simulated = !o.input;
    const int sources = (o.spikes ? 1 : 0) + (o.detect_threshold ? 1 : 0) + (o.no_spikes ? 1 : 0);
    if (sources > 1) throw pvarlab::DomainError("give at most one of --spikes, --detect-threshold, --no-spikes");
    if (sources == 0 && !simulated) {
      throw pvarlab::DomainError("input files need a spike source: --spikes FILE, --detect-threshold MV or --no-spikes");
    }
    if (o.spikes) {
      c.spike_source = SpikeSource::File;
      c.spikes_path = *o.spikes;
    } else if (o.detect_threshold) {
      c.spike_source = SpikeSource::Detect;
      c.detect_threshold = *o.detect_threshold;
    }
    c.min_separation = o.min_separation;
    c.window = {o.pre, o.post};
    c.gammas = pvarlab::cli::parse_real_grid(o.gamma, "gamma");
    c.m_grid = pvarlab::cli::parse_index_grid(o.m_grid, "m-grid");
    c.p_grid = pvarlab::cli::parse_real_grid(o.p_grid, "p-grid");
    c.pvar_powers = pvarlab::cli::parse_real_grid(o.powers, "p");
    c.m_base = o.m_base;
    c.m_min = o.m_min;
    c.trunc_multiplier = o.trunc_multiplier;
    c.delta = o.delta;
    c.delta_reject = o.delta_reject;
    c.eps_stab = o.eps_stab;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pvarlab: truncated power variations and semimartingale jump diagnostics"};
  app.require_subcommand(1);

  RawOptions opts;
  auto* segment = app.add_subcommand("segment", "Write the spikeless segments (segments.csv)");
  auto* pvar = app.add_subcommand("pvar", "Variation curves M -> V_Gamma(p, dt, M)");
  auto* logratio = app.add_subcommand("logratio", "Log-ratio curves p -> log V(p,2M)/V(p,M)");
  auto* classify = app.add_subcommand("classify", "Semimartingale / jump verdict (report.json)");
  auto* simulate = app.add_subcommand("simulate", "Simulate a diffusion, jump diffusion or fBm (series.csv)");
  for (auto* sub : {segment, pvar, logratio, classify}) add_options(sub, opts, true);
  add_options(simulate, opts, false);

  CLI11_PARSE(app, argc, argv);

  const auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    const auto config = to_config(opts, name != "simulate");
    return pvarlab::cli::run(name, config, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "pvarlab " << name << ": " << e.what() << '\n';
    return 2;
  }
}
