#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pvarlab/detail/parallel.hpp"
#include "pvarlab/error.hpp"
#include "pvarlab/series.hpp"
#include "pvarlab/variations.hpp"

namespace pvarlab {

struct LogRatioPoint {
  double p = 0.0;
  double value = 0.0;
};

// p -> log(V_Gamma(p, dt, 2M) / V_Gamma(p, dt, M)) for fixed M and Gamma.
struct LogRatioCurve {
  std::size_t m = 1;
  double gamma = kNoTruncation;
  std::vector<LogRatioPoint> points;
  std::vector<double> omitted_p;  // p where either variation vanished
};

enum class ReferenceKind { Continuous, Jumps };

// Expected log-ratio for a semimartingale: (p/2 - 1) log 2 when continuous,
// min{(p/2 - 1) log 2, 0} with jumps.
inline double reference_logratio(double p, ReferenceKind kind) {
  if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("exponent p must be finite and > 0");
  const double line = (p / 2.0 - 1.0) * std::numbers::ln2;
  return kind == ReferenceKind::Continuous ? line : std::min(line, 0.0);
}

namespace detail {

// Segments that serve both lags M and 2M, so numerator and denominator of a
// ratio are summed over the same stretches.
inline SegmentSet segments_for_ratio(const SegmentSet& segs, std::size_t m) {
  std::vector<Segment> kept;
  for (const auto& s : segs) {
    if (s.i1 - s.i0 >= 2 * m) kept.push_back(s);
  }
  if (kept.empty()) {
    throw SizeError("no segment holds " + std::to_string(2 * m + 1) +
                    " samples, as needed for lags M=" + std::to_string(m) + " and 2M");
  }
  return SegmentSet(std::move(kept), segs.series_size());
}

inline void check_p_grid(std::span<const double> p_grid) {
  if (p_grid.empty()) throw DomainError("p grid is empty");
  for (double p : p_grid) {
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("p grid values must be finite and > 0");
  }
}

}  // namespace detail

// Log-ratio curves for every Gamma of an ascending ladder.
inline std::vector<LogRatioCurve> logratio_curves(const TimeSeries& series, const SegmentSet& segs,
                                                  std::size_t m, std::span<const double> gammas,
                                                  std::span<const double> p_grid,
                                                  double trunc_multiplier = 3.0,
                                                  unsigned threads = 1) {
  if (m < 1) throw DomainError("base step multiple M must be >= 1");
  detail::check_p_grid(p_grid);
  const auto usable = detail::segments_for_ratio(segs, m);

  std::vector<std::vector<VariationSum>> lo(p_grid.size()), hi(p_grid.size());
  detail::parallel_for(p_grid.size(), threads, [&](std::size_t k) {
    lo[k] = total_variation_ladder(series, usable, p_grid[k], m, gammas, trunc_multiplier);
    hi[k] = total_variation_ladder(series, usable, p_grid[k], 2 * m, gammas, trunc_multiplier);
  });

  std::vector<LogRatioCurve> curves(gammas.size());
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    curves[g].m = m;
    curves[g].gamma = gammas[g];
    for (std::size_t k = 0; k < p_grid.size(); ++k) {
      const double num = hi[k][g].value;
      const double den = lo[k][g].value;
      if (num > 0.0 && den > 0.0) {
        curves[g].points.push_back({p_grid[k], std::log(num / den)});
      } else {
        curves[g].omitted_p.push_back(p_grid[k]);
      }
    }
  }
  return curves;
}

inline LogRatioCurve logratio_curve(const TimeSeries& series, const SegmentSet& segs,
                                    std::size_t m, double gamma, std::span<const double> p_grid,
                                    double trunc_multiplier = 3.0) {
  const double g[] = {gamma};
  return logratio_curves(series, segs, m, g, p_grid, trunc_multiplier).front();
}

// V_Gamma(4, dt, 2M) / V_Gamma(4, dt, M): about 2 for a continuous path,
// about 1 when jumps dominate the 4-variation.
inline double ratio4_statistic(const TimeSeries& series, const SegmentSet& segs, double gamma,
                               std::size_t m, double trunc_multiplier = 3.0) {
  const auto usable = detail::segments_for_ratio(segs, m);
  const double den = total_variation(series, usable, {4.0, m, gamma, trunc_multiplier});
  const double num = total_variation(series, usable, {4.0, 2 * m, gamma, trunc_multiplier});
  if (!(den > 0.0)) throw DomainError("4-variation at M=" + std::to_string(m) + " is zero (constant path?)");
  return num / den;
}

enum class Verdict { ContinuousSemimartingale, SemimartingaleWithJumps, NotSemimartingale, Inconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::ContinuousSemimartingale: return "ContinuousSemimartingale";
    case Verdict::SemimartingaleWithJumps: return "SemimartingaleWithJumps";
    case Verdict::NotSemimartingale: return "NotSemimartingale";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

inline std::vector<double> default_gamma_grid() { return {1, 2, 4, 8, 10, 16, 32, 64, 128, 256}; }

inline std::vector<double> default_p_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 24; ++k) g.push_back(0.25 * k);
  return g;
}

inline std::vector<std::size_t> default_m_grid() {
  std::vector<std::size_t> g;
  for (std::size_t m = 1; m <= 240; ++m) g.push_back(m);
  return g;
}

// Decision thresholds are in log units. The rejection level has no
// counterpart in the underlying theory; it is a convention of this tool.
struct ClassifyConfig {
  std::vector<double> gammas = default_gamma_grid();
  std::vector<double> p_grid = default_p_grid();
  std::vector<std::size_t> m_grid = default_m_grid();  // for the 2-variation shape check
  std::size_t m_base = 1;  // log-ratio lag
  std::size_t m_min = 1;   // ratio4 lag
  double trunc_multiplier = 3.0;
  double delta = 0.15;
  double delta_reject = 0.25;
  double eps_stab = 0.01;
  double p_fit_lo = 0.5;
  double p_fit_hi = 6.0;
  double kink_lo = 1.8;  // open interval (kink_lo, kink_hi) left out of the fit
  double kink_hi = 2.2;
  double shape_excess = 0.05;
  unsigned threads = 1;

  bool in_fit_range(double p) const noexcept {
    return p >= p_fit_lo && p <= p_fit_hi && !(p > kink_lo && p < kink_hi);
  }
};

struct GammaStability {
  double gamma = 0.0;
  double sup_change = 0.0;  // sup over p of |curve(gamma) - curve(Gamma=inf)|
};

// Interior maximum of M -> V(2, dt, M) that exceeds both ends of the grid.
struct ShapeWarning {
  std::size_t m_at_max = 0;
  double value_at_max = 0.0;
  double first_value = 0.0;
  double last_value = 0.0;
};

struct ClassificationReport {
  Verdict verdict = Verdict::Inconclusive;
  double ratio4 = 0.0;
  double dist_continuous = 0.0;
  double dist_jump = 0.0;
  double gamma_star = kNoTruncation;
  std::size_t omitted_points = 0;
  LogRatioCurve curve;  // log-ratio curve at gamma_star
  std::vector<GammaStability> stability;
  std::optional<ShapeWarning> shape_warning;
  ClassifyConfig config;
};

namespace detail {

// Sup-norm distance over p values present in both curves.
inline double sup_distance(const LogRatioCurve& a, const LogRatioCurve& b) {
  double d = 0.0;
  std::size_t j = 0;
  for (const auto& pa : a.points) {
    while (j < b.points.size() && b.points[j].p < pa.p) ++j;
    if (j < b.points.size() && b.points[j].p == pa.p) {
      d = std::max(d, std::fabs(pa.value - b.points[j].value));
    }
  }
  return d;
}

inline std::optional<ShapeWarning> interior_maximum(const VariationCurve& curve, double excess) {
  const auto& pts = curve.points;
  if (pts.size() < 3) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (pts[k].value > pts[best].value) best = k;
  }
  if (best == 0 || best + 1 == pts.size()) return std::nullopt;
  const double first = pts.front().value;
  const double last = pts.back().value;
  if (pts[best].value < (1.0 + excess) * std::max(first, last)) return std::nullopt;
  return ShapeWarning{pts[best].m, pts[best].value, first, last};
}

}  // namespace detail

// Sup-norm distance between a log-ratio curve and a reference line over the
// fit range of `config`.
inline double reference_distance(const LogRatioCurve& curve, ReferenceKind kind,
                                 const ClassifyConfig& config) {
  double d = 0.0;
  bool any = false;
  for (const auto& pt : curve.points) {
    if (!config.in_fit_range(pt.p)) continue;
    any = true;
    d = std::max(d, std::fabs(pt.value - reference_logratio(pt.p, kind)));
  }
  if (!any) throw DomainError("no log-ratio point inside the fit range");
  return d;
}

// Three-way decision on the log-ratio curve at the stabilized truncation
// level Gamma*:
//   continuous  if d_c <= delta and d_c <= d_j
//   jumps       if d_j <= delta and d_j <  d_c
//   not a semimartingale if min(d_c, d_j) > delta_reject
//   otherwise inconclusive.
// Gamma* is the smallest ladder level whose curve stays within eps_stab of
// every higher level, Gamma = inf included. ratio4 and the 2-variation shape
// warning are reported alongside but do not enter the decision.
inline ClassificationReport classify(const TimeSeries& series, const SegmentSet& segs,
                                     const ClassifyConfig& config = {}) {
  if (config.gammas.empty()) throw DomainError("truncation grid is empty");
  std::vector<double> ladder = config.gammas;
  std::sort(ladder.begin(), ladder.end());
  ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());
  if (!std::isinf(ladder.back())) ladder.push_back(kNoTruncation);

  std::vector<double> p_grid = config.p_grid;
  std::sort(p_grid.begin(), p_grid.end());
  p_grid.erase(std::unique(p_grid.begin(), p_grid.end()), p_grid.end());
  if (std::none_of(p_grid.begin(), p_grid.end(), [&](double p) { return config.in_fit_range(p); })) {
    throw DomainError("p grid has no point inside the fit range");
  }

  const auto curves = logratio_curves(series, segs, config.m_base, ladder, p_grid,
                                      config.trunc_multiplier, config.threads);

  ClassificationReport report;
  report.config = config;
  std::size_t star = ladder.size() - 1;
  for (std::size_t k = 0; k + 1 < ladder.size(); ++k) {
    bool stable = true;
    for (std::size_t j = k + 1; j < ladder.size() && stable; ++j) {
      stable = detail::sup_distance(curves[k], curves[j]) < config.eps_stab;
    }
    if (stable) {
      star = k;
      break;
    }
  }
  for (std::size_t k = 0; k + 1 < ladder.size(); ++k) {
    report.stability.push_back({ladder[k], detail::sup_distance(curves[k], curves.back())});
  }
  report.gamma_star = ladder[star];
  report.curve = curves[star];
  report.omitted_points = curves[star].omitted_p.size();

  report.dist_continuous = reference_distance(report.curve, ReferenceKind::Continuous, config);
  report.dist_jump = reference_distance(report.curve, ReferenceKind::Jumps, config);

  const double dc = report.dist_continuous;
  const double dj = report.dist_jump;
  if (dc <= config.delta && dc <= dj) {
    report.verdict = Verdict::ContinuousSemimartingale;
  } else if (dj <= config.delta && dj < dc) {
    report.verdict = Verdict::SemimartingaleWithJumps;
  } else if (std::min(dc, dj) > config.delta_reject) {
    report.verdict = Verdict::NotSemimartingale;
  } else {
    report.verdict = Verdict::Inconclusive;
  }

  report.ratio4 = ratio4_statistic(series, segs, report.gamma_star, config.m_min, config.trunc_multiplier);

  if (config.m_grid.size() >= 3) {
    const auto v2 = variation_curve(series, segs, 2.0, report.gamma_star, config.m_grid,
                                    config.trunc_multiplier);
    report.shape_warning = detail::interior_maximum(v2, config.shape_excess);
  }
  return report;
}

namespace detail {

inline nlohmann::json gamma_to_json(double g) {
  if (std::isinf(g)) return "inf";
  return g;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ClassifyConfig& c) {
  nlohmann::json gammas = nlohmann::json::array();
  for (double g : c.gammas) gammas.push_back(detail::gamma_to_json(g));
  return {{"gammas", gammas},
          {"p_grid", c.p_grid},
          {"m_grid", c.m_grid},
          {"m_base", c.m_base},
          {"m_min", c.m_min},
          {"trunc_multiplier", c.trunc_multiplier},
          {"delta", c.delta},
          {"delta_reject", c.delta_reject},
          {"eps_stab", c.eps_stab},
          {"p_fit", {c.p_fit_lo, c.p_fit_hi}},
          {"p_fit_excluded", {c.kink_lo, c.kink_hi}},
          {"shape_excess", c.shape_excess}};
}

inline nlohmann::json report_to_json(const ClassificationReport& r) {
  nlohmann::json stability = nlohmann::json::array();
  for (const auto& s : r.stability) {
    stability.push_back({{"gamma", detail::gamma_to_json(s.gamma)}, {"sup_change", s.sup_change}});
  }
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& pt : r.curve.points) curve.push_back({{"p", pt.p}, {"logratio", pt.value}});
  nlohmann::json warning = nullptr;
  if (r.shape_warning) {
    warning = {{"kind", "interior_maximum_2_variation"},
               {"m_at_max", r.shape_warning->m_at_max},
               {"value_at_max", r.shape_warning->value_at_max},
               {"first_value", r.shape_warning->first_value},
               {"last_value", r.shape_warning->last_value}};
  }
  return {{"verdict", to_string(r.verdict)},
          {"ratio4", r.ratio4},
          {"dist_continuous", r.dist_continuous},
          {"dist_jump", r.dist_jump},
          {"gamma_star", detail::gamma_to_json(r.gamma_star)},
          {"omitted_points", r.omitted_points},
          {"logratio_at_gamma_star", curve},
          {"stability", stability},
          {"shape_warning", warning},
          {"config", config_to_json(r.config)}};
}

// CSV with header `M,gamma,p,logratio`, one row per (Gamma, p).
inline void write_logratio_csv(std::ostream& out, std::span<const LogRatioCurve> curves,
                               std::span<const std::string> comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "M,gamma,p,logratio\n";
  for (const auto& curve : curves) {
    for (const auto& pt : curve.points) {
      out << curve.m << ',' << format_number(curve.gamma) << ',' << format_number(pt.p) << ','
          << format_number(pt.value) << '\n';
    }
  }
}

}  // namespace pvarlab
