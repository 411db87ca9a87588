#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracle.hpp"
#include "pvarlab/analysis.hpp"
#include "pvarlab/simulation.hpp"

using namespace pvarlab;

TEST_CASE("reference_logratio", "[analysis]") {
  CHECK(reference_logratio(2.0, ReferenceKind::Continuous) == 0.0);
  CHECK(reference_logratio(2.0, ReferenceKind::Jumps) == 0.0);
  CHECK(reference_logratio(4.0, ReferenceKind::Continuous) == Catch::Approx(std::numbers::ln2));
  CHECK(reference_logratio(3.0, ReferenceKind::Jumps) == 0.0);
  CHECK(reference_logratio(1.0, ReferenceKind::Jumps) == Catch::Approx(-std::numbers::ln2 / 2.0));
  CHECK_THROWS_AS(reference_logratio(0.0, ReferenceKind::Jumps), DomainError);
}

TEST_CASE("jump reference is the continuous one capped at zero", "[analysis][property]") {
  for (double p = 0.05; p < 8.0; p += 0.05) {
    const double c = reference_logratio(p, ReferenceKind::Continuous);
    REQUIRE(reference_logratio(p, ReferenceKind::Jumps) == std::min(c, 0.0));
    // continuity: no jump between neighbouring p
    REQUIRE(std::fabs(reference_logratio(p + 1e-6, ReferenceKind::Jumps) -
                      reference_logratio(p, ReferenceKind::Jumps)) < 1e-6);
  }
}

TEST_CASE("logratio_curve", "[analysis]") {
  // increments +1 +1 -1 -1: V(2, dt, 2) = (4 + 0 + 4)/2 = 4 = V(2, dt, 1)
  const TimeSeries s(1.0, {0.0, 1.0, 2.0, 1.0, 0.0});
  const double grid[] = {2.0};
  const auto curve = logratio_curve(s, SegmentSet::whole(s), 1, kNoTruncation, grid);
  REQUIRE(curve.points.size() == 1);
  CHECK(curve.points[0].value == 0.0);

  SECTION("vanishing variations are omitted, not infinite") {
    const TimeSeries zigzag(1.0, {0.0, 1.0, 0.0, 1.0, 0.0, 1.0});
    const double ps[] = {1.0, 2.0};
    const auto c = logratio_curve(zigzag, SegmentSet::whole(zigzag), 1, kNoTruncation, ps);
    CHECK(c.points.empty());
    CHECK(c.omitted_p == std::vector<double>{1.0, 2.0});
  }
  SECTION("segments too short for 2M are an error") {
    const TimeSeries tiny(1.0, {0.0, 1.0, 3.0});
    const double ps[] = {2.0};
    CHECK_THROWS_AS(logratio_curve(tiny, SegmentSet::whole(tiny), 2, kNoTruncation, ps), SizeError);
  }
  SECTION("bad p grid") {
    const double ps[] = {-1.0};
    CHECK_THROWS_AS(logratio_curve(s, SegmentSet::whole(s), 1, kNoTruncation, ps), DomainError);
  }
}

TEST_CASE("ratio4 of a path whose 4-variation is linear in M", "[analysis]") {
  // Increment signs + + - + - + - + repeated: a quarter of neighbouring
  // pairs agree, so V(4,dt,2) = 16/2 * (#agreeing pairs) ~ 2 * V(4,dt,1).
  const int pattern[] = {1, 1, -1, 1, -1, 1, -1, 1};
  std::vector<double> x{0.0};
  const int periods = 20000;
  for (int k = 0; k < periods; ++k) {
    for (int s : pattern) x.push_back(x.back() + s);
  }
  const TimeSeries s(1e-3, x);
  CHECK(ratio4_statistic(s, SegmentSet::whole(s), kNoTruncation, 1) ==
        Catch::Approx(2.0 - 1.0 / periods).epsilon(1e-12));
  CHECK_THROWS_AS(ratio4_statistic(TimeSeries(1.0, std::vector<double>(9, 1.0)),
                                   SegmentSet::whole(TimeSeries(1.0, std::vector<double>(9, 1.0))),
                                   kNoTruncation, 1),
                  DomainError);
}

TEST_CASE("reference_distance vanishes on an exact continuous curve", "[analysis]") {
  LogRatioCurve curve;
  for (const double p : default_p_grid()) {
    curve.points.push_back({p, reference_logratio(p, ReferenceKind::Continuous)});
  }
  const ClassifyConfig cfg;
  CHECK(reference_distance(curve, ReferenceKind::Continuous, cfg) == 0.0);
  CHECK(reference_distance(curve, ReferenceKind::Jumps, cfg) == Catch::Approx(2.0 * std::numbers::ln2));

  LogRatioCurve outside;
  outside.points.push_back({2.0, 0.0});
  CHECK_THROWS_AS(reference_distance(outside, ReferenceKind::Jumps, cfg), DomainError);
}

TEST_CASE("Gamma=inf log-ratio and ratio4 are scale invariant", "[analysis][property]") {
  std::mt19937_64 rng(8);
  const auto x = oracle::random_walk(rng, 5000, 0.2);
  const TimeSeries s(6e-4, x);
  const auto segs = SegmentSet::whole(s);
  const auto grid = default_p_grid();
  const auto base = logratio_curve(s, segs, 1, kNoTruncation, grid);
  const double r4 = ratio4_statistic(s, segs, kNoTruncation, 1);
  for (double c : {-2.0, 0.1, 10.0}) {
    const auto sc = s.scaled(c);
    const auto curve = logratio_curve(sc, segs, 1, kNoTruncation, grid);
    REQUIRE(curve.points.size() == base.points.size());
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
      REQUIRE(curve.points[k].value == Catch::Approx(base.points[k].value).margin(1e-12));
    }
    CHECK(ratio4_statistic(sc, segs, kNoTruncation, 1) == Catch::Approx(r4).epsilon(1e-12));
  }
}

TEST_CASE("classify on simulated controls", "[analysis]") {
  ClassifyConfig cfg;
  cfg.m_grid = {1, 2, 4, 8, 16, 32};
  SECTION("OU diffusion") {
    const auto s = simulate(*find_preset("ou", 3));
    const auto r = classify(s, SegmentSet::whole(s), cfg);
    CHECK(r.verdict == Verdict::ContinuousSemimartingale);
    CHECK(r.ratio4 == Catch::Approx(2.0).margin(0.3));
    CHECK_FALSE(r.shape_warning.has_value());
    CHECK(r.dist_continuous <= r.dist_jump);
  }
  SECTION("fractional Brownian motion, H = 0.3") {
    const auto s = simulate(*find_preset("fbm", 3));
    const auto r = classify(s, SegmentSet::whole(s), cfg);
    CHECK(r.verdict == Verdict::NotSemimartingale);
    CHECK(r.ratio4 == Catch::Approx(std::pow(2.0, 0.2)).margin(0.1));
  }
  SECTION("invalid grids") {
    const auto s = simulate(*find_preset("ou", 3));
    ClassifyConfig bad = cfg;
    bad.p_grid = {1.9, 2.0, 2.1};
    CHECK_THROWS_AS(classify(s, SegmentSet::whole(s), bad), DomainError);
    bad = cfg;
    bad.gammas.clear();
    CHECK_THROWS_AS(classify(s, SegmentSet::whole(s), bad), DomainError);
  }
}

TEST_CASE("Gamma* is the first level that no longer moves the curve", "[analysis]") {
  // A Brownian path with a handful of large jumps: small Gamma cuts the jumps,
  // large Gamma keeps them, so the curve settles only once all jumps pass.
  std::mt19937_64 rng(21);
  auto x = oracle::random_walk(rng, 20000, std::sqrt(6e-4));
  for (std::size_t k = 1; k <= 5; ++k) {
    for (std::size_t i = k * 3000; i < x.size(); ++i) x[i] += 2.0;
  }
  const TimeSeries s(6e-4, x);
  ClassifyConfig cfg;
  cfg.m_grid = {1, 2};
  const auto r = classify(s, SegmentSet::whole(s), cfg);
  // a jump of 2 is cut at M=1 for Gamma < 27.2 and at M=2 for Gamma < 19.3
  CHECK(r.gamma_star == 32.0);
  for (const auto& st : r.stability) {
    if (st.gamma >= r.gamma_star) CHECK(st.sup_change < cfg.eps_stab);
  }
}

TEST_CASE("interior maximum of the 2-variation is flagged", "[analysis]") {
  VariationCurve c;
  for (std::size_t m = 1; m <= 10; ++m) c.points.push_back({m, m == 5 ? 2.0 : 1.0, 10});
  auto w = detail::interior_maximum(c, 0.05);
  REQUIRE(w.has_value());
  CHECK(w->m_at_max == 5);
  c.points[4].value = 1.04;
  CHECK_FALSE(detail::interior_maximum(c, 0.05).has_value());
  c.points[9].value = 3.0;
  CHECK_FALSE(detail::interior_maximum(c, 0.05).has_value());
}

TEST_CASE("report JSON and log-ratio CSV", "[analysis]") {
  const auto s = simulate(*find_preset("ou", 2));
  ClassifyConfig cfg;
  cfg.m_grid = {1, 2, 3};
  const auto r = classify(s, SegmentSet::whole(s), cfg);
  const auto j = report_to_json(r);
  for (const char* key : {"verdict", "ratio4", "dist_continuous", "dist_jump", "gamma_star", "omitted_points", "config"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["verdict"] == "ContinuousSemimartingale");

  LogRatioCurve curve;
  curve.m = 2;
  curve.gamma = kNoTruncation;
  curve.points = {{0.5, -0.25}, {4.0, 0.75}};
  std::ostringstream out;
  write_logratio_csv(out, std::span<const LogRatioCurve>(&curve, 1));
  CHECK(out.str() == "M,gamma,p,logratio\n2,inf,0.5,-0.25\n2,inf,4,0.75\n");
}
