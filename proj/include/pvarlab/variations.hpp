#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pvarlab/detail/summation.hpp"
#include "pvarlab/error.hpp"
#include "pvarlab/series.hpp"

namespace pvarlab {

inline constexpr double kNoTruncation = std::numeric_limits<double>::infinity();

// Exponent p, lag multiple M and truncation level Gamma for one evaluation.
// An increment over lag M*dt is kept when |dX| <= trunc_multiplier * sqrt(dt*M) * gamma.
struct VariationParams {
  double p = 2.0;
  std::size_t m = 1;
  double gamma = kNoTruncation;
  double trunc_multiplier = 3.0;

  void validate() const {
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("exponent p must be finite and > 0");
    if (m < 1) throw DomainError("step multiple M must be >= 1");
    if (!(gamma > 0.0)) throw DomainError("truncation factor must be > 0 (or infinite)");
    if (!(trunc_multiplier > 0.0) || !std::isfinite(trunc_multiplier)) {
      throw DomainError("truncation multiplier must be finite and > 0");
    }
  }

  double threshold(double dt) const noexcept {
    if (std::isinf(gamma)) return kNoTruncation;
    return trunc_multiplier * std::sqrt(dt * static_cast<double>(m)) * gamma;
  }
};

namespace detail {

// |d|^p for d >= 0, with the common integer powers spelled out.
inline double abs_pow(double d, double p) noexcept {
  if (p == 2.0) return d * d;
  if (p == 4.0) {
    const double d2 = d * d;
    return d2 * d2;
  }
  if (p == 1.0) return d;
  return std::pow(d, p);
}

}  // namespace detail

// Truncated p-variation over one segment:
//   (1/M) * sum_{i=i0}^{i1-M} |X_{i+M} - X_i|^p * 1{|X_{i+M} - X_i| <= threshold}.
// Returns nullopt when the segment holds no lag-M increment.
inline std::optional<double> segment_variation(const TimeSeries& series, const Segment& seg,
                                               const VariationParams& params) {
  params.validate();
  if (seg.i1 >= series.size() || seg.i0 >= seg.i1) throw DomainError("segment outside the series");
  if (seg.increments(params.m) == 0) return std::nullopt;
  const double thr = params.threshold(series.dt());
  const auto x = series.values();
  detail::CompensatedSum acc;
  for (std::size_t i = seg.i0; i + params.m <= seg.i1; ++i) {
    const double d = std::fabs(x[i + params.m] - x[i]);
    if (d <= thr) acc.add(detail::abs_pow(d, params.p));
  }
  return acc.value() / static_cast<double>(params.m);
}

// Sum over segments plus bookkeeping on what contributed.
struct VariationSum {
  double value = 0.0;
  std::size_t segments_used = 0;
  std::size_t increments = 0;  // lag-M increments scanned (kept or truncated)
};

namespace detail {

inline std::size_t max_usable_m(const SegmentSet& segs) {
  std::size_t best = 0;
  for (const auto& s : segs) best = std::max(best, s.i1 - s.i0);
  return best;
}

[[noreturn]] inline void throw_no_admissible(const SegmentSet& segs, std::size_t m) {
  throw SizeError("no segment is long enough for M=" + std::to_string(m) +
                  "; largest usable M is " + std::to_string(max_usable_m(segs)));
}

}  // namespace detail

// Sum of segment_variation over every segment that holds a lag-M increment.
inline VariationSum total_variation_sum(const TimeSeries& series, const SegmentSet& segs,
                                        const VariationParams& params) {
  VariationSum out;
  detail::CompensatedSum acc;
  for (const auto& seg : segs) {
    if (const auto v = segment_variation(series, seg, params)) {
      acc.add(*v);
      ++out.segments_used;
      out.increments += seg.increments(params.m);
    }
  }
  if (out.segments_used == 0) detail::throw_no_admissible(segs, params.m);
  out.value = acc.value();
  return out;
}

inline double total_variation(const TimeSeries& series, const SegmentSet& segs,
                              const VariationParams& params) {
  return total_variation_sum(series, segs, params).value;
}

// Truncated variation for a whole ascending ladder of truncation factors in
// one pass: each increment is raised to the power p once and binned by the
// smallest ladder level that keeps it. Entry k equals
// total_variation_sum(..., gammas[k]) up to summation order.
inline std::vector<VariationSum> total_variation_ladder(const TimeSeries& series,
                                                        const SegmentSet& segs, double p,
                                                        std::size_t m,
                                                        std::span<const double> gammas,
                                                        double trunc_multiplier = 3.0) {
  if (gammas.empty()) throw DomainError("truncation ladder is empty");
  if (!std::is_sorted(gammas.begin(), gammas.end())) {
    throw DomainError("truncation ladder must be ascending");
  }
  std::vector<double> thresholds;
  thresholds.reserve(gammas.size());
  for (double g : gammas) {
    const VariationParams params{p, m, g, trunc_multiplier};
    params.validate();
    thresholds.push_back(params.threshold(series.dt()));
  }

  const auto x = series.values();
  std::vector<VariationSum> out(gammas.size());
  std::vector<detail::CompensatedSum> totals(gammas.size());
  std::vector<detail::CompensatedSum> bins(gammas.size());
  std::size_t segments_used = 0;
  std::size_t increments = 0;
  for (const auto& seg : segs) {
    if (seg.increments(m) == 0) continue;
    ++segments_used;
    increments += seg.increments(m);
    for (auto& b : bins) b = {};
    for (std::size_t i = seg.i0; i + m <= seg.i1; ++i) {
      const double d = std::fabs(x[i + m] - x[i]);
      const auto it = std::lower_bound(thresholds.begin(), thresholds.end(), d);
      if (it == thresholds.end()) continue;
      bins[static_cast<std::size_t>(it - thresholds.begin())].add(detail::abs_pow(d, p));
    }
    // Per-segment value at each level, divided by M as in segment_variation.
    detail::CompensatedSum running;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      running.add(bins[k]);
      totals[k].add(running.value() / static_cast<double>(m));
    }
  }
  if (segments_used == 0) detail::throw_no_admissible(segs, m);
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    out[k] = VariationSum{totals[k].value(), segments_used, increments};
  }
  return out;
}

// Non-overlapping lag-M p-variation started at s0:
//   sum_{k=1}^{floor((t1-s0)/M)} |X_{s0+kM} - X_{s0+(k-1)M}|^p.
inline double bhat(const TimeSeries& series, std::size_t s0, std::size_t t1, double p,
                   std::size_t m) {
  VariationParams{p, m}.validate();
  if (t1 >= series.size()) throw DomainError("end index outside the series");
  if (t1 < s0 || t1 - s0 < m) {
    throw SizeError("range [" + std::to_string(s0) + ", " + std::to_string(t1) +
                    "] is shorter than M=" + std::to_string(m));
  }
  const auto x = series.values();
  const std::size_t steps = (t1 - s0) / m;
  detail::CompensatedSum acc;
  for (std::size_t k = 1; k <= steps; ++k) {
    acc.add(detail::abs_pow(std::fabs(x[s0 + k * m] - x[s0 + (k - 1) * m]), p));
  }
  return acc.value();
}

struct CurvePoint {
  std::size_t m = 0;
  double value = 0.0;
  std::size_t increments = 0;
};

// M -> V_Gamma(p, dt, M) for one (p, Gamma).
struct VariationCurve {
  double p = 0.0;
  double gamma = kNoTruncation;
  std::vector<CurvePoint> points;
  double dt = 0.0;
  std::size_t segment_count = 0;
  std::size_t total_increments = 0;
  std::vector<std::size_t> omitted_m;  // grid values no segment could serve
};

namespace detail {

inline void require_strictly_increasing(std::span<const std::size_t> grid, const char* what) {
  if (grid.empty()) throw DomainError(std::string(what) + " grid is empty");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (grid[k] <= grid[k - 1]) {
      throw DomainError(std::string(what) + " grid must be strictly increasing");
    }
  }
}

}  // namespace detail

inline VariationCurve variation_curve(const TimeSeries& series, const SegmentSet& segs, double p,
                                      double gamma, std::span<const std::size_t> m_grid,
                                      double trunc_multiplier = 3.0) {
  detail::require_strictly_increasing(m_grid, "M");
  VariationCurve curve;
  curve.p = p;
  curve.gamma = gamma;
  curve.dt = series.dt();
  curve.segment_count = segs.size();
  for (std::size_t m : m_grid) {
    const VariationParams params{p, m, gamma, trunc_multiplier};
    params.validate();
    VariationSum sum;
    try {
      sum = total_variation_sum(series, segs, params);
    } catch (const SizeError&) {
      curve.omitted_m.push_back(m);
      continue;
    }
    curve.points.push_back(CurvePoint{m, sum.value, sum.increments});
    curve.total_increments += sum.increments;
  }
  if (curve.points.empty()) detail::throw_no_admissible(segs, m_grid.front());
  return curve;
}

// Same curve for every Gamma of an ascending ladder, sharing the power
// evaluations across truncation levels.
inline std::vector<VariationCurve> variation_curves(const TimeSeries& series,
                                                    const SegmentSet& segs, double p,
                                                    std::span<const double> gammas,
                                                    std::span<const std::size_t> m_grid,
                                                    double trunc_multiplier = 3.0) {
  detail::require_strictly_increasing(m_grid, "M");
  std::vector<VariationCurve> curves(gammas.size());
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    curves[k].p = p;
    curves[k].gamma = gammas[k];
    curves[k].dt = series.dt();
    curves[k].segment_count = segs.size();
  }
  for (std::size_t m : m_grid) {
    std::vector<VariationSum> sums;
    try {
      sums = total_variation_ladder(series, segs, p, m, gammas, trunc_multiplier);
    } catch (const SizeError&) {
      for (auto& c : curves) c.omitted_m.push_back(m);
      continue;
    }
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      curves[k].points.push_back(CurvePoint{m, sums[k].value, sums[k].increments});
      curves[k].total_increments += sums[k].increments;
    }
  }
  if (curves.front().points.empty()) detail::throw_no_admissible(segs, m_grid.front());
  return curves;
}

// %.17g, with infinity spelled "inf".
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV with header `p,gamma,M,value,n_increments`, one row per (Gamma, M).
inline void write_variation_csv(std::ostream& out, std::span<const VariationCurve> curves,
                                std::span<const std::string> comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "p,gamma,M,value,n_increments\n";
  for (const auto& curve : curves) {
    for (const auto& pt : curve.points) {
      out << format_number(curve.p) << ',' << format_number(curve.gamma) << ',' << pt.m << ','
          << format_number(pt.value) << ',' << pt.increments << '\n';
    }
  }
}

}  // namespace pvarlab
