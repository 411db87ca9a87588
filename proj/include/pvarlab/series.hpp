#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pvarlab/error.hpp"

namespace pvarlab {

// Uniformly sampled scalar path. Sample i sits at time t0 + i * dt.
// Immutable after construction.
class TimeSeries {
 public:
  TimeSeries(double dt, std::vector<double> values, double t0 = 0.0)
      : dt_(dt), t0_(t0), values_(std::move(values)) {
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
      throw DomainError("time step must be finite and strictly positive");
    }
    if (!std::isfinite(t0_)) throw DomainError("start time must be finite");
    if (values_.size() < 2) throw SizeError("a series needs at least 2 samples");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw DomainError("non-finite sample at index " + std::to_string(i));
      }
    }
  }

  double dt() const noexcept { return dt_; }
  double t0() const noexcept { return t0_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double time_at(std::size_t i) const noexcept { return t0_ + static_cast<double>(i) * dt_; }

  // Copy with every sample multiplied by c.
  TimeSeries scaled(double c) const {
    std::vector<double> v(values_);
    for (auto& x : v) x *= c;
    return TimeSeries(dt_, std::move(v), t0_);
  }

 private:
  double dt_;
  double t0_;
  std::vector<double> values_;
};

// Inclusive index interval [i0, i1] of a spikeless stretch.
struct Segment {
  std::size_t i0 = 0;
  std::size_t i1 = 0;

  std::size_t samples() const noexcept { return i1 - i0 + 1; }
  // Number of lag-m increments available inside the segment.
  std::size_t increments(std::size_t m) const noexcept {
    return (i1 - i0 >= m) ? (i1 - i0 - m + 1) : 0;
  }
  friend bool operator==(const Segment&, const Segment&) = default;
};

// Ordered, pairwise disjoint segments of one series.
class SegmentSet {
 public:
  SegmentSet() = default;
  SegmentSet(std::vector<Segment> segments, std::size_t series_size)
      : segments_(std::move(segments)), series_size_(series_size) {
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      const auto& s = segments_[k];
      if (s.i0 >= s.i1 || s.i1 >= series_size_) {
        throw DomainError("segment " + std::to_string(k) + " is not a valid index range");
      }
      if (k > 0 && segments_[k - 1].i1 >= s.i0) {
        throw DomainError("segments must be strictly increasing and disjoint");
      }
    }
  }

  // The whole series as one segment.
  static SegmentSet whole(const TimeSeries& series) {
    return SegmentSet({Segment{0, series.size() - 1}}, series.size());
  }

  std::span<const Segment> segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  bool empty() const noexcept { return segments_.empty(); }
  std::size_t series_size() const noexcept { return series_size_; }
  auto begin() const noexcept { return segments_.begin(); }
  auto end() const noexcept { return segments_.end(); }

 private:
  std::vector<Segment> segments_;
  std::size_t series_size_ = 0;
};

inline double duration(const TimeSeries& series) noexcept {
  return static_cast<double>(series.size() - 1) * series.dt();
}

enum class SeriesFormat { Auto, ValueOnly, TimeValue };

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Splits on comma, whitespace or tab; empty fields between a comma and
// surrounding blanks are not produced.
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    while (j < line.size() && (line[j] == ' ' || line[j] == '\t')) ++j;
    if (j < line.size() && line[j] == ',') ++j;
    i = j;
  }
  return out;
}

inline double parse_number(std::string_view token, std::size_t line) {
  // from_chars does not accept a leading '+'.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw ParseError(line, "not a number: '" + std::string(token) + "'");
  }
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value: '" + std::string(token) + "'");
  return v;
}

}  // namespace detail

// Relative tolerance on the spacing of the time column.
inline constexpr double kSpacingTolerance = 1e-9;

// Reads a series from text. One column needs dt_override; two columns
// (time, value) derive dt from the mean gap and must be uniformly spaced.
// An explicit dt_override wins over the time column but the column is still
// checked for uniformity.
inline TimeSeries parse_series(std::istream& in, SeriesFormat format = SeriesFormat::Auto,
                               std::optional<double> dt_override = std::nullopt) {
  std::vector<double> times;
  std::vector<double> values;
  std::size_t columns = 0;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split_fields(line);
    if (columns == 0) {
      columns = fields.size();
      if (columns != 1 && columns != 2) {
        throw ParseError(line_no, "expected 1 or 2 columns, found " + std::to_string(columns));
      }
      if (format == SeriesFormat::ValueOnly && columns != 1) {
        throw FormatError("value-only format requested but input has 2 columns");
      }
      if (format == SeriesFormat::TimeValue && columns != 2) {
        throw FormatError("time,value format requested but input has 1 column");
      }
    } else if (fields.size() != columns) {
      throw ParseError(line_no, "expected " + std::to_string(columns) + " columns, found " +
                                    std::to_string(fields.size()));
    }
    if (columns == 1) {
      values.push_back(detail::parse_number(fields[0], line_no));
    } else {
      times.push_back(detail::parse_number(fields[0], line_no));
      values.push_back(detail::parse_number(fields[1], line_no));
    }
  }
  if (values.size() < 2) {
    throw SizeError("series has " + std::to_string(values.size()) + " samples; need at least 2");
  }
  if (columns == 1) {
    if (!dt_override) throw FormatError("single-column input requires an explicit time step");
    return TimeSeries(*dt_override, std::move(values));
  }

  const double mean_gap = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(mean_gap > 0.0)) throw FormatError("time column must be strictly increasing");
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double gap = times[i] - times[i - 1];
    if (std::fabs(gap - mean_gap) > kSpacingTolerance * mean_gap) {
      throw FormatError("non-uniform time spacing between samples " + std::to_string(i - 1) +
                        " and " + std::to_string(i));
    }
  }
  return TimeSeries(dt_override.value_or(mean_gap), std::move(values), times.front());
}

// Writes `time,value` rows at round-trip precision, preceded by optional
// `#` comment lines.
inline void write_series(std::ostream& out, const TimeSeries& series,
                         std::span<const std::string> comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    const int n = std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", series.time_at(i), series[i]);
    out.write(buf, n);
  }
}

}  // namespace pvarlab
