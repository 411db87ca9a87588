#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "pvarlab/detail/fft.hpp"
#include "pvarlab/error.hpp"
#include "pvarlab/series.hpp"

namespace pvarlab {

// Diffusion coefficient shapes. Drift is always theta * (mu - x).
struct OuNoise {
  double sigma = 5.0;  // constant, mV / sqrt(s)
};
struct CirNoise {
  double a = 1.25;         // sigma^2(x) = a * max(x - x_floor, 0)
  double x_floor = -80.0;  // mV
};
struct PearsonNoise {
  double a = 0.05;   // sigma^2(x) = a * (x - m)^2 + b
  double m = -60.0;  // mV
  double b = 25.0;
};
using NoiseShape = std::variant<OuNoise, CirNoise, PearsonNoise>;

enum class DiffusionKind { OU, CIR, Pearson };

struct DiffusionSpec {
  double theta = 20.0;  // 1/s
  double mu = -60.0;    // mV
  NoiseShape noise = OuNoise{};
  double x0 = -60.0;
  double dt = 6e-4;
  std::size_t n = 100001;
  std::uint64_t seed = 1;

  DiffusionKind kind() const noexcept { return static_cast<DiffusionKind>(noise.index()); }

  void validate() const {
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw DomainError("theta must be finite and >= 0");
    if (!std::isfinite(mu) || !std::isfinite(x0)) throw DomainError("mu and x0 must be finite");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be finite and > 0");
    if (n < 2) throw SizeError("a simulated path needs n >= 2");
    std::visit(
        [](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, OuNoise>) {
            if (!(s.sigma >= 0.0)) throw DomainError("OU sigma must be >= 0");
          } else if constexpr (std::is_same_v<T, CirNoise>) {
            if (!(s.a >= 0.0) || !std::isfinite(s.x_floor)) {
              throw DomainError("CIR needs a >= 0 and a finite floor");
            }
          } else {
            if (!(s.a >= 0.0) || !(s.b > 0.0) || !std::isfinite(s.m)) {
              throw DomainError("Pearson needs a >= 0, b > 0 and finite m");
            }
          }
        },
        noise);
  }
};

struct JumpSpec {
  DiffusionSpec base;
  double alpha = 1.75;
  double epsilon = 0.1;

  void validate() const {
    base.validate();
    if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("alpha must lie in (0, 2)");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw DomainError("epsilon must be finite and >= 0");
    }
  }
};

// Exact circulant embedding needs a power-of-two FFT twice the increment count.
inline constexpr std::size_t kMaxFbmSamples = std::size_t{1} << 17;

struct FbmSpec {
  double hurst = 0.3;
  std::size_t n = 60001;
  double dt = 6e-4;
  double scale = 5.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("Hurst index must lie in (0, 1)");
    if (n < 2) throw SizeError("a simulated path needs n >= 2");
    if (n > kMaxFbmSamples) {
      throw SizeError("fBm with n=" + std::to_string(n) + " exceeds the exact method's limit of " +
                      std::to_string(kMaxFbmSamples) + " samples; use a smaller n");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be finite and > 0");
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("scale must be finite and >= 0");
  }
};

using SimulationSpec = std::variant<DiffusionSpec, JumpSpec, FbmSpec>;

namespace detail {

enum class Stream : std::uint32_t { Gaussian = 1, Stable = 2 };

// Independent engine per stream, derived from one master seed.
inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

// Uniform on the open interval (0, 1).
template <typename Rng>
double open_unit(Rng& rng) {
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

}  // namespace detail

// One draw of a standard symmetric alpha-stable variable (characteristic
// function exp(-|t|^alpha)) by the Chambers-Mallows-Stuck method. alpha = 2
// is admitted and yields Normal(0, 2).
template <typename Rng>
double stable_increment(double alpha, Rng& rng) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (0, 2]");
  const double u = std::numbers::pi * (detail::open_unit(rng) - 0.5);
  const double e = -std::log(detail::open_unit(rng));
  if (alpha == 1.0) return std::tan(u);
  return std::sin(alpha * u) / std::pow(std::cos(u), 1.0 / alpha) *
         std::pow(std::cos((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
}

// sigma(x) for the given shape. CIR is evaluated at max(x, x_floor).
inline double diffusion_coefficient(const NoiseShape& noise, double x) {
  return std::visit(
      [x](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, OuNoise>) {
          return s.sigma;
        } else if constexpr (std::is_same_v<T, CirNoise>) {
          return std::sqrt(s.a * (std::max(x, s.x_floor) - s.x_floor));
        } else {
          return std::sqrt(s.a * (x - s.m) * (x - s.m) + s.b);
        }
      },
      noise);
}

namespace detail {

// Euler-Maruyama with an optional stable driver added to dW:
//   X' = X + theta (mu - X) dt + sigma(X) (sqrt(dt) Z + eps dt^(1/alpha) xi).
// The stable stream is consumed only when alpha is set.
inline TimeSeries euler_path(const DiffusionSpec& spec, std::optional<double> alpha,
                             double epsilon) {
  auto gauss_rng = make_stream(spec.seed, Stream::Gaussian);
  auto stable_rng = make_stream(spec.seed, Stream::Stable);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sqrt_dt = std::sqrt(spec.dt);
  const double jump_scale = alpha ? epsilon * std::pow(spec.dt, 1.0 / *alpha) : 0.0;

  std::vector<double> x(spec.n);
  x[0] = spec.x0;
  for (std::size_t i = 0; i + 1 < spec.n; ++i) {
    const double sigma = diffusion_coefficient(spec.noise, x[i]);
    double drive = sqrt_dt * normal(gauss_rng);
    if (alpha) drive += jump_scale * stable_increment(*alpha, stable_rng);
    x[i + 1] = x[i] + spec.theta * (spec.mu - x[i]) * spec.dt + sigma * drive;
  }
  return TimeSeries(spec.dt, std::move(x));
}

}  // namespace detail

inline TimeSeries simulate_diffusion(const DiffusionSpec& spec) {
  spec.validate();
  return detail::euler_path(spec, std::nullopt, 0.0);
}

inline TimeSeries simulate_jump_diffusion(const JumpSpec& spec) {
  spec.validate();
  return detail::euler_path(spec.base, spec.alpha, spec.epsilon);
}

// Exact fractional Brownian motion on the grid i*dt, started at 0, with
// Cov(B_s, B_t) = scale^2/2 (s^2H + t^2H - |t-s|^2H). Increments are drawn by
// circulant embedding of the fractional Gaussian noise covariance.
inline TimeSeries simulate_fbm(const FbmSpec& spec) {
  spec.validate();
  const std::size_t increments = spec.n - 1;
  std::size_t half = 1;
  while (half < increments) half <<= 1;
  const std::size_t size = 2 * half;

  const double two_h = 2.0 * spec.hurst;
  const double var_step = spec.scale * spec.scale * std::pow(spec.dt, two_h);
  auto autocov = [&](std::size_t k) {
    const double kd = static_cast<double>(k);
    const double km1 = k == 0 ? 1.0 : kd - 1.0;  // |k - 1|
    return 0.5 * var_step * (std::pow(kd + 1.0, two_h) - 2.0 * std::pow(kd, two_h) +
                             std::pow(km1, two_h));
  };

  std::vector<std::complex<double>> eig(size);
  for (std::size_t j = 0; j <= half; ++j) eig[j] = autocov(j);
  for (std::size_t j = half + 1; j < size; ++j) eig[j] = eig[size - j];
  detail::fft_inplace(eig);
  double max_eig = 0.0;
  for (const auto& e : eig) max_eig = std::max(max_eig, e.real());
  std::vector<double> lambda(size);
  for (std::size_t k = 0; k < size; ++k) {
    const double l = eig[k].real();
    if (l < -1e-10 * max_eig) throw Error("circulant embedding is not non-negative definite");
    lambda[k] = std::max(l, 0.0);
  }

  auto rng = detail::make_stream(spec.seed, detail::Stream::Gaussian);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sz = static_cast<double>(size);
  std::vector<std::complex<double>> w(size);
  w[0] = std::sqrt(lambda[0] / sz) * normal(rng);
  w[half] = std::sqrt(lambda[half] / sz) * normal(rng);
  for (std::size_t k = 1; k < half; ++k) {
    const double s = std::sqrt(lambda[k] / (2.0 * sz));
    const double re = normal(rng);
    const double im = normal(rng);
    w[k] = {s * re, s * im};
    w[size - k] = std::conj(w[k]);
  }
  detail::fft_inplace(w);

  std::vector<double> path(spec.n);
  path[0] = 0.0;
  for (std::size_t i = 0; i < increments; ++i) path[i + 1] = path[i] + w[i].real();
  return TimeSeries(spec.dt, std::move(path));
}

inline TimeSeries simulate(const SimulationSpec& spec) {
  return std::visit(
      [](const auto& s) -> TimeSeries {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiffusionSpec>) {
          return simulate_diffusion(s);
        } else if constexpr (std::is_same_v<T, JumpSpec>) {
          return simulate_jump_diffusion(s);
        } else {
          return simulate_fbm(s);
        }
      },
      spec);
}

// Named starting points for diffusion equivalents and controls. Parameter
// values are placeholders chosen to give a -60 mV resting level with a few mV
// of stationary spread at the 0.6 ms sampling step; override as needed.
//   ou, cir, pearson   diffusions with constant / linear / bowl-shaped sigma^2
//   jump               ou driven by dW + 0.1 dS^1.75
//   jump199            ou driven by dW + 0.1 dS^1.99
//   fbm                fractional Brownian motion, H = 0.3
inline std::optional<SimulationSpec> find_preset(std::string_view name, std::uint64_t seed = 1) {
  DiffusionSpec ou;
  ou.seed = seed;
  if (name == "ou") return ou;
  if (name == "cir") {
    auto s = ou;
    s.noise = CirNoise{};
    return s;
  }
  if (name == "pearson") {
    auto s = ou;
    s.noise = PearsonNoise{};
    return s;
  }
  if (name == "jump") return JumpSpec{ou, 1.75, 0.1};
  if (name == "jump199") return JumpSpec{ou, 1.99, 0.1};
  if (name == "fbm") {
    FbmSpec f;
    f.seed = seed;
    return f;
  }
  return std::nullopt;
}

inline constexpr std::string_view kPresetNames[] = {"ou", "cir", "pearson", "jump", "jump199", "fbm"};

}  // namespace pvarlab
