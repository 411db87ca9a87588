#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "pvarlab/error.hpp"
#include "pvarlab/series.hpp"

namespace pvarlab {

// Asymmetric exclusion window (tau - pre, tau + post) around a spike time.
struct SpikeWindow {
  double pre = 0.12;
  double post = 0.18;
};

// Strictly increasing spike times in seconds.
class SpikeTrain {
 public:
  SpikeTrain() = default;
  explicit SpikeTrain(std::vector<double> times) : times_(std::move(times)) {
    for (std::size_t k = 0; k < times_.size(); ++k) {
      if (!std::isfinite(times_[k])) throw DomainError("spike time must be finite");
      if (k > 0 && !(times_[k] > times_[k - 1])) {
        throw DomainError("spike times must be strictly increasing");
      }
    }
  }

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }

 private:
  std::vector<double> times_;
};

// Upward threshold crossings (x[i-1] < threshold <= x[i]) with a refractory
// period: a crossing less than min_separation after the last accepted one is
// dropped.
inline SpikeTrain detect_spikes(const TimeSeries& series, double threshold, double min_separation) {
  if (!(min_separation >= series.dt())) {
    throw DomainError("min_separation must be at least one time step");
  }
  std::vector<double> times;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i - 1] < threshold && threshold <= series[i]) {
      const double t = series.time_at(i);
      if (times.empty() || t - times.back() >= min_separation) times.push_back(t);
    }
  }
  return SpikeTrain(std::move(times));
}

// One spike time per line; blank lines and `#` comments ignored.
inline SpikeTrain read_spike_train(std::istream& in) {
  std::vector<double> times;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 1) throw ParseError(line_no, "expected one spike time per line");
    times.push_back(detail::parse_number(fields[0], line_no));
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw FormatError("spike times must be strictly increasing (entry " + std::to_string(k + 1) + ")");
    }
  }
  return SpikeTrain(std::move(times));
}

namespace detail {

// Samples within this many index units of a window edge count as lying on it.
inline constexpr double kIndexSnap = 1e-9;

}  // namespace detail

// Maximal runs of samples outside every open window (tau - pre, tau + post).
// Samples exactly on a window edge are retained; runs of fewer than two
// samples are dropped. With no spikes the whole series is one segment.
inline SegmentSet spikeless_segments(const TimeSeries& series, const SpikeTrain& spikes,
                                     const SpikeWindow& window = {}) {
  if (!(window.pre >= 0.0) || !(window.post >= 0.0)) {
    throw DomainError("spike window extents must be non-negative");
  }
  const double t_end = series.time_at(series.size() - 1);
  for (double tau : spikes.times()) {
    if (tau < series.t0() || tau > t_end) {
      throw DomainError("spike time " + std::to_string(tau) + " lies outside the series");
    }
  }

  const auto n = static_cast<std::ptrdiff_t>(series.size());
  std::vector<bool> keep(series.size(), true);
  for (double tau : spikes.times()) {
    // Excluded indices: t0 + i*dt strictly inside (tau - pre, tau + post).
    const double lo = (tau - window.pre - series.t0()) / series.dt();
    const double hi = (tau + window.post - series.t0()) / series.dt();
    auto first = static_cast<std::ptrdiff_t>(std::floor(lo + detail::kIndexSnap)) + 1;
    auto last = static_cast<std::ptrdiff_t>(std::ceil(hi - detail::kIndexSnap)) - 1;
    first = std::max<std::ptrdiff_t>(first, 0);
    last = std::min<std::ptrdiff_t>(last, n - 1);
    for (auto i = first; i <= last; ++i) keep[static_cast<std::size_t>(i)] = false;
  }

  std::vector<Segment> segments;
  std::size_t i = 0;
  while (i < series.size()) {
    if (!keep[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < series.size() && keep[j + 1]) ++j;
    if (j > i) segments.push_back(Segment{i, j});
    i = j + 1;
  }
  return SegmentSet(std::move(segments), series.size());
}

}  // namespace pvarlab
