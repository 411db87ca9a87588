#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "pvarlab/segmentation.hpp"

using namespace pvarlab;

namespace {

TimeSeries flat(double dt, std::size_t n, double level = -60.0) {
  return TimeSeries(dt, std::vector<double>(n, level));
}

}  // namespace

TEST_CASE("detect_spikes", "[segmentation]") {
  SECTION("constant series has no crossing") {
    CHECK(detect_spikes(flat(6e-4, 1000), -10.0, 6e-4).empty());
  }
  SECTION("single crossing reported at its sample time") {
    std::vector<double> v(1000, -60.0);
    for (std::size_t i = 500; i < 520; ++i) v[i] = 20.0;
    const auto train = detect_spikes(TimeSeries(6e-4, v), -10.0, 6e-4);
    REQUIRE(train.size() == 1);
    CHECK(train.times()[0] == Catch::Approx(0.3).epsilon(1e-12));
  }
  SECTION("refractory period suppresses a close second crossing") {
    // crossings at t = 0.005 and t = 0.006
    std::vector<double> w(100, -60.0);
    w[10] = 0.0;
    w[12] = 0.0;
    auto train = detect_spikes(TimeSeries(5e-4, w), -10.0, 0.002);
    REQUIRE(train.size() == 1);
    CHECK(train.times()[0] == Catch::Approx(0.005));
    train = detect_spikes(TimeSeries(5e-4, w), -10.0, 5e-4);
    CHECK(train.size() == 2);
  }
  SECTION("threshold equal to the sample counts as a crossing") {
    std::vector<double> v{-60.0, -10.0, -60.0};
    CHECK(detect_spikes(TimeSeries(1.0, v), -10.0, 1.0).size() == 1);
  }
  SECTION("min_separation below dt is rejected") {
    CHECK_THROWS_AS(detect_spikes(flat(1e-3, 10), 0.0, 1e-4), DomainError);
  }
}

TEST_CASE("spikeless_segments follows the excision rule", "[segmentation]") {
  const double dt = 0.01;
  const auto series = flat(dt, 6001);  // T = 60
  SECTION("no spikes gives the whole series") {
    const auto segs = spikeless_segments(series, SpikeTrain{});
    REQUIRE(segs.size() == 1);
    CHECK(segs.segments()[0] == Segment{0, 6000});
  }
  SECTION("one spike splits into two closed segments") {
    const auto segs = spikeless_segments(series, SpikeTrain({10.0}), SpikeWindow{0.12, 0.18});
    REQUIRE(segs.size() == 2);
    CHECK(series.time_at(segs.segments()[0].i0) == 0.0);
    CHECK(series.time_at(segs.segments()[0].i1) == Catch::Approx(9.88));
    CHECK(series.time_at(segs.segments()[1].i0) == Catch::Approx(10.18));
    CHECK(series.time_at(segs.segments()[1].i1) == Catch::Approx(60.0));
    CHECK(segs.segments()[0] == Segment{0, 988});
    CHECK(segs.segments()[1] == Segment{1018, 6000});
  }
  SECTION("overlapping windows leave no interior segment") {
    const auto segs = spikeless_segments(series, SpikeTrain({1.0, 1.25}), SpikeWindow{0.12, 0.18});
    REQUIRE(segs.size() == 2);
    CHECK(segs.segments()[0] == Segment{0, 88});
    CHECK(segs.segments()[1] == Segment{143, 6000});
  }
  SECTION("a one-sample gap between windows is dropped") {
    // windows (0.88, 1.18) and (1.18, 1.48): only t = 1.18 survives between them
    const auto segs = spikeless_segments(series, SpikeTrain({1.0, 1.30}), SpikeWindow{0.12, 0.18});
    REQUIRE(segs.size() == 2);
    CHECK(segs.segments()[1].i0 == 148);
  }
  SECTION("windows clipped at the series edges") {
    const auto segs = spikeless_segments(series, SpikeTrain({0.05, 59.95}), SpikeWindow{0.12, 0.18});
    REQUIRE(segs.size() == 1);
    CHECK(segs.segments()[0] == Segment{23, 5983});
  }
  SECTION("spike outside the series is rejected") {
    CHECK_THROWS_AS(spikeless_segments(series, SpikeTrain({61.0})), DomainError);
  }
}

TEST_CASE("spikeless_segments invariants on random trains", "[segmentation][property]") {
  std::mt19937_64 rng(11);
  const double dt = 6e-4;
  const auto series = flat(dt, 20001);
  const double t_end = series.time_at(series.size() - 1);
  std::uniform_real_distribution<double> when(0.0, t_end);
  std::uniform_int_distribution<int> count(0, 25);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> times(static_cast<std::size_t>(count(rng)));
    for (auto& t : times) t = when(rng);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    const SpikeWindow w{0.12, 0.18};
    const auto segs = spikeless_segments(series, SpikeTrain(times), w);

    std::vector<bool> retained(series.size(), false);
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const auto& s = segs.segments()[k];
      REQUIRE(s.i1 > s.i0);
      if (k > 0) REQUIRE(segs.segments()[k - 1].i1 + 1 < s.i0);
      for (std::size_t i = s.i0; i <= s.i1; ++i) retained[i] = true;
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
      const double t = series.time_at(i);
      bool inside = false;
      for (double tau : times) inside = inside || (t > tau - w.pre + 1e-9 && t < tau + w.post - 1e-9);
      if (inside) REQUIRE_FALSE(retained[i]);
      // A sample outside every window is retained unless it is isolated.
      if (!inside && !retained[i]) {
        const bool left_out = i == 0 || [&] {
          const double tl = series.time_at(i - 1);
          for (double tau : times) if (tl > tau - w.pre + 1e-9 && tl < tau + w.post - 1e-9) return true;
          return false;
        }();
        const bool right_out = i + 1 == series.size() || [&] {
          const double tr = series.time_at(i + 1);
          for (double tau : times) if (tr > tau - w.pre + 1e-9 && tr < tau + w.post - 1e-9) return true;
          return false;
        }();
        REQUIRE((left_out && right_out));
      }
    }
  }
}

TEST_CASE("read_spike_train", "[segmentation]") {
  std::istringstream ok("# spikes\n1.0\n2.5\n\n10\n");
  CHECK(read_spike_train(ok).times() == std::vector<double>{1.0, 2.5, 10.0});
  std::istringstream unordered("2.0\n1.0\n");
  CHECK_THROWS_AS(read_spike_train(unordered), FormatError);
  std::istringstream junk("1.0\nx\n");
  CHECK_THROWS_AS(read_spike_train(junk), ParseError);
}
