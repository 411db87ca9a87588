#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pvarlab/analysis.hpp"
#include "pvarlab/detail/parallel.hpp"
#include "pvarlab/error.hpp"
#include "pvarlab/segmentation.hpp"
#include "pvarlab/series.hpp"
#include "pvarlab/simulation.hpp"
#include "pvarlab/variations.hpp"

namespace pvarlab::cli {

enum class SpikeSource { None, File, Detect };

// Everything one batch run needs. Analysis subcommands read either `input`
// or simulate from `sim` (a preset name plus key=value overrides).
struct RunConfig {
  std::optional<std::string> input;
  std::map<std::string, std::string> sim;  // preset, kind, theta, ...; see build_simulation_spec
  std::optional<double> dt;
  SpikeSource spike_source = SpikeSource::None;
  std::optional<std::string> spikes_path;
  double detect_threshold = 0.0;
  double min_separation = 0.3;
  SpikeWindow window;
  std::vector<double> gammas = default_gamma_grid();
  std::vector<std::size_t> m_grid = default_m_grid();
  std::vector<double> p_grid = default_p_grid();
  std::vector<double> pvar_powers = {2.0, 4.0};
  std::size_t m_base = 1;
  std::size_t m_min = 1;
  double trunc_multiplier = 3.0;
  double delta = 0.15;
  double delta_reject = 0.25;
  double eps_stab = 0.01;
  std::uint64_t seed = 1;
  std::string out = ".";
  unsigned threads = 1;
};

inline constexpr std::string_view kSubcommands[] = {"segment", "pvar", "logratio", "classify", "simulate"};

// ---------------------------------------------------------------------------
// Grid and key=value parsing

namespace detail {

inline double to_double(std::string_view s, std::string_view what) {
  s = pvarlab::detail::trim(s);
  if (s == "inf" || s == "Inf" || s == "INF" || s == "infinity") return kNoTruncation;
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw DomainError("invalid number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// Comma list of numbers or ranges `lo:hi` (step 1) and `lo:step:hi`.
inline std::vector<double> parse_real_grid(std::string_view text, std::string_view what) {
  std::vector<double> out;
  for (auto item : detail::split(text, ',')) {
    item = pvarlab::detail::trim(item);
    if (item.empty()) continue;
    const auto parts = detail::split(item, ':');
    if (parts.size() == 1) {
      out.push_back(detail::to_double(parts[0], what));
      continue;
    }
    if (parts.size() > 3) throw DomainError("bad range '" + std::string(item) + "' in " + std::string(what));
    const double lo = detail::to_double(parts.front(), what);
    const double hi = detail::to_double(parts.back(), what);
    const double step = parts.size() == 3 ? detail::to_double(parts[1], what) : 1.0;
    if (!(step > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
      throw DomainError("bad range '" + std::string(item) + "' in " + std::string(what));
    }
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t k = 0; k <= count; ++k) out.push_back(lo + static_cast<double>(k) * step);
  }
  if (out.empty()) throw DomainError(std::string(what) + " grid is empty");
  return out;
}

inline std::vector<std::size_t> parse_index_grid(std::string_view text, std::string_view what) {
  std::vector<std::size_t> out;
  for (double v : parse_real_grid(text, what)) {
    if (!(v >= 1.0) || v != std::floor(v) || !std::isfinite(v)) {
      throw DomainError(std::string(what) + " values must be positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// `key = value` lines; `#` starts a comment.
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = pvarlab::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    const auto key = pvarlab::detail::trim(line.substr(0, eq));
    const auto value = pvarlab::detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out[std::string(key)] = std::string(value);
  }
  return out;
}

// Builds a simulation from `preset` (default "ou") and overrides. Recognised
// keys: preset, kind (ou|cir|pearson|fbm), theta, mu, sigma, cir_a, cir_floor,
// pearson_a, pearson_m, pearson_b, x0, dt, n, alpha, epsilon, hurst, scale.
// Setting alpha on a diffusion turns it into a jump diffusion.
inline SimulationSpec build_simulation_spec(const std::map<std::string, std::string>& kv,
                                            std::uint64_t seed) {
  static const std::vector<std::string> known = {
      "preset", "kind",      "theta", "mu", "sigma", "cir_a", "cir_floor", "pearson_a", "pearson_m",
      "pearson_b", "x0", "dt", "n", "alpha", "epsilon", "hurst", "scale", "seed"};
  for (const auto& [k, v] : kv) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw DomainError("unknown simulation key '" + k + "'");
    }
  }
  auto get = [&](const std::string& key) -> std::optional<double> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return detail::to_double(it->second, key);
  };
  auto get_count = [&](const std::string& key) -> std::optional<std::size_t> {
    const auto v = get(key);
    if (!v) return std::nullopt;
    if (!(*v >= 0.0) || *v != std::floor(*v)) throw DomainError(key + " must be a non-negative integer");
    return static_cast<std::size_t>(*v);
  };
  if (const auto s = get_count("seed")) seed = *s;

  const auto preset_it = kv.find("preset");
  const std::string preset = preset_it == kv.end() ? "ou" : preset_it->second;
  auto spec = find_preset(preset, seed);
  if (!spec) throw DomainError("unknown preset '" + preset + "'");

  if (const auto it = kv.find("kind"); it != kv.end()) {
    const auto& kind = it->second;
    if (kind == "fbm") {
      if (!std::holds_alternative<FbmSpec>(*spec)) spec = *find_preset("fbm", seed);
    } else {
      DiffusionSpec base = std::holds_alternative<JumpSpec>(*spec) ? std::get<JumpSpec>(*spec).base
                           : std::holds_alternative<DiffusionSpec>(*spec) ? std::get<DiffusionSpec>(*spec)
                                                                          : DiffusionSpec{};
      base.seed = seed;
      if (kind == "ou") {
        base.noise = OuNoise{};
      } else if (kind == "cir") {
        base.noise = CirNoise{};
      } else if (kind == "pearson") {
        base.noise = PearsonNoise{};
      } else {
        throw DomainError("unknown kind '" + kind + "' (expected ou, cir, pearson or fbm)");
      }
      if (std::holds_alternative<JumpSpec>(*spec)) {
        std::get<JumpSpec>(*spec).base = base;
      } else {
        spec = base;
      }
    }
  }

  if (auto* f = std::get_if<FbmSpec>(&*spec)) {
    if (const auto v = get("hurst")) f->hurst = *v;
    if (const auto v = get("scale")) f->scale = *v;
    if (const auto v = get("dt")) f->dt = *v;
    if (const auto v = get_count("n")) f->n = *v;
    f->seed = seed;
    f->validate();
    return *spec;
  }

  if (get("alpha") && std::holds_alternative<DiffusionSpec>(*spec)) {
    spec = JumpSpec{std::get<DiffusionSpec>(*spec), 1.75, 0.1};
  }
  DiffusionSpec& base = std::holds_alternative<JumpSpec>(*spec) ? std::get<JumpSpec>(*spec).base
                                                                : std::get<DiffusionSpec>(*spec);
  base.seed = seed;
  if (const auto v = get("theta")) base.theta = *v;
  if (const auto v = get("mu")) base.mu = *v;
  if (const auto v = get("x0")) base.x0 = *v;
  if (const auto v = get("dt")) base.dt = *v;
  if (const auto v = get_count("n")) base.n = *v;
  if (auto* s = std::get_if<OuNoise>(&base.noise)) {
    if (const auto v = get("sigma")) s->sigma = *v;
  } else if (auto* s = std::get_if<CirNoise>(&base.noise)) {
    if (const auto v = get("cir_a")) s->a = *v;
    if (const auto v = get("cir_floor")) s->x_floor = *v;
  } else if (auto* s = std::get_if<PearsonNoise>(&base.noise)) {
    if (const auto v = get("pearson_a")) s->a = *v;
    if (const auto v = get("pearson_m")) s->m = *v;
    if (const auto v = get("pearson_b")) s->b = *v;
  }
  if (auto* j = std::get_if<JumpSpec>(&*spec)) {
    if (const auto v = get("alpha")) j->alpha = *v;
    if (const auto v = get("epsilon")) j->epsilon = *v;
    j->validate();
  } else {
    base.validate();
  }
  return *spec;
}

// ---------------------------------------------------------------------------
// Config echo

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json gammas = nlohmann::json::array();
  for (double g : c.gammas) gammas.push_back(std::isinf(g) ? nlohmann::json("inf") : nlohmann::json(g));
  nlohmann::json j = {
      {"input", c.input ? nlohmann::json(*c.input) : nlohmann::json(nullptr)},
      {"simulation", c.sim},
      {"dt", c.dt ? nlohmann::json(*c.dt) : nlohmann::json(nullptr)},
      {"spike_source", c.spike_source == SpikeSource::File     ? "file"
                       : c.spike_source == SpikeSource::Detect ? "detect"
                                                               : "none"},
      {"spikes", c.spikes_path ? nlohmann::json(*c.spikes_path) : nlohmann::json(nullptr)},
      {"detect_threshold", c.detect_threshold},
      {"min_separation", c.min_separation},
      {"pre", c.window.pre},
      {"post", c.window.post},
      {"gamma", gammas},
      {"m_grid", c.m_grid},
      {"p_grid", c.p_grid},
      {"p", c.pvar_powers},
      {"m_base", c.m_base},
      {"m_min", c.m_min},
      {"trunc_multiplier", c.trunc_multiplier},
      {"delta", c.delta},
      {"delta_reject", c.delta_reject},
      {"eps_stab", c.eps_stab},
      {"seed", c.seed}};
  return j;
}

// ---------------------------------------------------------------------------
// Run

namespace detail {

// Files written so far; removed again unless commit() is called.
class OutputTransaction {
 public:
  explicit OutputTransaction(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      throw Error("cannot create output directory '" + dir_.string() + "'");
    }
  }
  OutputTransaction(const OutputTransaction&) = delete;
  OutputTransaction& operator=(const OutputTransaction&) = delete;
  ~OutputTransaction() {
    if (committed_) return;
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  }

  template <typename Writer>
  void write(const std::string& name, Writer&& writer) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    written_.push_back(path);
    writer(out);
    out.flush();
    if (!out) throw Error("write failed for '" + path.string() + "'");
  }

  void commit() noexcept { committed_ = true; }
  const std::vector<std::filesystem::path>& written() const noexcept { return written_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> written_;
  bool committed_ = false;
};

inline TimeSeries load_series(const RunConfig& c) {
  if (c.input) {
    std::ifstream in(*c.input);
    if (!in) throw Error("cannot open input '" + *c.input + "'");
    return parse_series(in, SeriesFormat::Auto, c.dt);
  }
  auto kv = c.sim;
  if (c.dt && !kv.count("dt")) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *c.dt);
    kv["dt"] = buf;
  }
  return simulate(build_simulation_spec(kv, c.seed));
}

inline SegmentSet load_segments(const RunConfig& c, const TimeSeries& series) {
  switch (c.spike_source) {
    case SpikeSource::File: {
      std::ifstream in(*c.spikes_path);
      if (!in) throw Error("cannot open spike file '" + *c.spikes_path + "'");
      return spikeless_segments(series, read_spike_train(in), c.window);
    }
    case SpikeSource::Detect:
      return spikeless_segments(series, detect_spikes(series, c.detect_threshold, c.min_separation),
                                c.window);
    case SpikeSource::None:
      break;
  }
  return SegmentSet::whole(series);
}

inline std::string file_tag(double v) {
  std::string s = format_number(v);
  for (auto& ch : s) {
    if (ch == '.') ch = 'p';
  }
  return s;
}

}  // namespace detail

// Runs one subcommand and writes its artifacts under c.out:
//   segment  -> segments.csv
//   pvar     -> pvar_p<p>_gamma<G>.csv for every (p, Gamma)
//   logratio -> logratio_M<M>_gamma<G>.csv for every Gamma
//   classify -> report.json
//   simulate -> series.csv
// Returns 0 on success. Errors go to `diag` with a nonzero status and any
// files already written by this run are removed.
inline int run(std::string_view subcommand, const RunConfig& c, std::ostream& diag) {
  try {
    if (c.spike_source == SpikeSource::File && !c.spikes_path) throw DomainError("spike file path missing");
    detail::OutputTransaction tx(c.out);
    const std::string echo = "config: " + config_to_json(c).dump();
    const std::vector<std::string> comments = {echo};

    if (subcommand == "simulate") {
      const auto series = detail::load_series(c);
      tx.write("series.csv", [&](std::ostream& o) { write_series(o, series, comments); });
      tx.commit();
      return 0;
    }

    const auto series = detail::load_series(c);
    const auto segs = detail::load_segments(c, series);

    if (subcommand == "segment") {
      tx.write("segments.csv", [&](std::ostream& o) {
        o << "# " << echo << '\n' << "i0,i1,t_start,t_end\n";
        for (const auto& s : segs) {
          o << s.i0 << ',' << s.i1 << ',' << format_number(series.time_at(s.i0)) << ','
            << format_number(series.time_at(s.i1)) << '\n';
        }
      });
    } else if (subcommand == "pvar") {
      std::vector<double> ladder = c.gammas;
      std::sort(ladder.begin(), ladder.end());
      ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());
      std::vector<std::vector<VariationCurve>> per_p(c.pvar_powers.size());
      pvarlab::detail::parallel_for(c.pvar_powers.size(), c.threads, [&](std::size_t k) {
        per_p[k] = variation_curves(series, segs, c.pvar_powers[k], ladder, c.m_grid, c.trunc_multiplier);
      });
      for (const auto& curves : per_p) {
        for (const auto& curve : curves) {
          const std::string name =
              "pvar_p" + detail::file_tag(curve.p) + "_gamma" + detail::file_tag(curve.gamma) + ".csv";
          tx.write(name, [&](std::ostream& o) {
            write_variation_csv(o, std::span<const VariationCurve>(&curve, 1), comments);
          });
        }
      }
    } else if (subcommand == "logratio") {
      std::vector<double> ladder = c.gammas;
      std::sort(ladder.begin(), ladder.end());
      ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());
      const auto curves =
          logratio_curves(series, segs, c.m_base, ladder, c.p_grid, c.trunc_multiplier, c.threads);
      for (const auto& curve : curves) {
        const std::string name = "logratio_M" + std::to_string(curve.m) + "_gamma" +
                                 detail::file_tag(curve.gamma) + ".csv";
        tx.write(name, [&](std::ostream& o) {
          write_logratio_csv(o, std::span<const LogRatioCurve>(&curve, 1), comments);
        });
      }
    } else if (subcommand == "classify") {
      ClassifyConfig cc;
      cc.gammas = c.gammas;
      cc.p_grid = c.p_grid;
      cc.m_grid = c.m_grid;
      cc.m_base = c.m_base;
      cc.m_min = c.m_min;
      cc.trunc_multiplier = c.trunc_multiplier;
      cc.delta = c.delta;
      cc.delta_reject = c.delta_reject;
      cc.eps_stab = c.eps_stab;
      cc.threads = c.threads;
      const auto report = classify(series, segs, cc);
      auto j = report_to_json(report);
      j["segments"] = segs.size();
      j["run_config"] = config_to_json(c);
      tx.write("report.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    } else {
      throw DomainError("unknown subcommand '" + std::string(subcommand) + "'");
    }
    tx.commit();
    return 0;
  } catch (const std::exception& e) {
    diag << "pvarlab " << subcommand << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pvarlab::cli
