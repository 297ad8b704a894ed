#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <sstream>

#include "bmix/error.hpp"
#include "bmix/stats.hpp"

using namespace bmix;

namespace {
ProcessConfig reference_config(std::size_t K, std::uint64_t seed = 1) {
  return ProcessConfig{LevelSequence::from_levels({2, 64, 65600}), K, {NoiseLaw::gaussian, 0}, seed};
}
}  // namespace

TEST_CASE("exact level variances") {
  CHECK(variance_level_exact(2, 2) == Rational(5, 2));
  for (std::int64_t N : {4, 5, 9, 1000}) CHECK(variance_level_exact(2, N) == 3);
  CHECK(variance_level_exact(3, 6) == Rational(38, 9));
  CHECK(variance_level_exact(3, 20) == Rational(38, 9));
  CHECK(variance_level_exact(64, 256) == Rational(2731, 32));
}

TEST_CASE("level variance is N-free beyond 2n") {
  for (std::int64_t n = 2; n <= 40; ++n) {
    BigInt squares = 0;
    for (std::int64_t j = 1; j <= n; ++j) squares += BigInt(j) * j;
    for (std::int64_t j = 1; j < n; ++j) squares += BigInt(j) * j;
    Rational want(BigInt(2) * squares, BigInt(n) * n);
    want.canonicalize();
    for (std::int64_t N = 2 * n; N <= 2 * n + 30; ++N) CHECK(variance_level_exact(n, N) == want);
  }
}

TEST_CASE("short-range variance scales like N^2/n") {
  // Frozen from the oracle scan: var * n / N^2 lies in [1.000015, 2] here.
  for (std::int64_t n : {8, 16, 32, 64, 128, 256}) {
    for (std::int64_t N = 1; N <= n; ++N) {
      const double r = to_double(variance_level_exact(n, N)) * n / (double(N) * N);
      REQUIRE(r >= 1.0);
      REQUIRE(r <= 3.0);
    }
  }
}

TEST_CASE("variance profile of the reference sequence") {
  std::vector<std::int64_t> Ns;
  for (std::int64_t N = 4; N <= 4096; ++N) Ns.push_back(N);
  const auto rep = variance_profile(reference_config(3), Ns);
  CHECK(rep.sup_ratio_h == doctest::Approx(1.049544).epsilon(1e-6));
  CHECK(rep.sup_ratio_at == 62);
  CHECK(rep.sup_ratio_h <= 4.0);
  const auto& last = rep.rows.back();
  CHECK(last.N == 4096);
  CHECK(last.level_index == 2);
  CHECK(to_double(last.per_level[2]) == doctest::Approx(495.5316930398572));
  CHECK(to_double(last.per_level[2]) <= 2.0 * 4096.0 * 4096.0 / 65600.0);
  for (const auto& row : rep.rows) {
    Rational total;
    for (const auto& v : row.per_level) total += v;
    CHECK(total == row.sigma2_h);
    CHECK(row.sigma2_y == row.sigma2_h + Rational(row.N));
    CHECK(row.ratio_y() >= 1.0);
    CHECK(row.ratio_y() <= 1.0 + rep.sup_ratio_h);
  }
  CHECK(rep.sup_low_ratio <= 2.0);
  CHECK(rep.sup_high_ratio <= 1.0 + std::numbers::pi * std::numbers::pi / 6.0);

  const auto single = variance_profile(reference_config(1), Ns);
  for (const auto& row : single.rows) CHECK(row.sigma2_h == 3);

  const auto par = variance_profile(reference_config(3), Ns, Exec::parallel);
  CHECK(par.to_json() == rep.to_json());

  std::ostringstream os;
  variance_profile(reference_config(2), std::vector<std::int64_t>{4}).write_csv(os);
  CHECK(os.str().rfind("N,i_N,sigma2_h,sigma2_Y,ratio_h,low_part,high_part,level_1,level_2\n4,1,", 0) == 0);
}

TEST_CASE("Monte Carlo variance is deterministic and close") {
  const auto a = variance_monte_carlo(8, 40, 4000, 5);
  const auto b = variance_monte_carlo(8, 40, 4000, 5, Exec::parallel);
  CHECK(a.estimate.estimate == b.estimate.estimate);
  CHECK(a.estimate.standard_error == b.estimate.standard_error);
  CHECK(std::abs(a.estimate.estimate - to_double(a.exact)) < 4 * a.estimate.standard_error);
}

TEST_CASE("KS self-test at exact normal quantiles") {
  boost::math::normal_distribution<double> z;
  for (std::size_t T : {100u, 1000u, 2000u}) {
    std::vector<double> sample;
    for (std::size_t i = 1; i <= T; ++i) sample.push_back(quantile(z, (i - 0.5) / T));
    CHECK(ks_distance(sample) == doctest::Approx(0.5 / T).epsilon(1e-9));
  }
  CHECK(ks_distance({0.0}) == doctest::Approx(0.5));
}

TEST_CASE("CLT with pure noise and refusal below 100 trials") {
  ProcessConfig cfg = reference_config(0, 9);
  const auto r = clt_test(cfg, 64, 2000);
  CHECK(r.ks < r.ks_critical);
  CHECK(clt_test(cfg, 64, 2000).ks == r.ks);
  CHECK(clt_test(cfg, 64, 2000, 0, Exec::parallel).ks == r.ks);
  CHECK_THROWS_AS(clt_test(cfg, 64, 99), RangeError);
}

TEST_CASE("bonferroni examples") {
  const std::vector<double> p2{0.3, 0.3};
  CHECK(bonferroni_bound(p2, {{0, 0}, {0, 0}}) == doctest::Approx(0.6));
  const std::vector<double> h{0.5, 0.5};
  CHECK(bonferroni_bound(h, {{0, 0.25}, {0.25, 0}}) == doctest::Approx(0.75));
  const std::vector<double> t{0.5, 0.5, 0.5};
  CHECK(bonferroni_bound(t, {{0, .25, .25}, {.25, 0, .25}, {.25, .25, 0}}) ==
        doctest::Approx(0.75));
  CHECK_THROWS_AS(bonferroni_bound(h, {{0, 0.25}, {0.2, 0}}), RangeError);
}

TEST_CASE("bonferroni never exceeds the union on dyadic four-atom systems") {
  // Atoms of mass 1/4; events are subsets of the four atoms.
  for (unsigned sys = 0; sys < (1u << 12); ++sys) {
    unsigned ev[3] = {sys & 15u, (sys >> 4) & 15u, (sys >> 8) & 15u};
    std::vector<double> p(3);
    std::vector<std::vector<double>> q(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) p[i] = __builtin_popcount(ev[i]) / 4.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) q[i][j] = __builtin_popcount(ev[i] & ev[j]) / 4.0;
    const double uni = __builtin_popcount(ev[0] | ev[1] | ev[2]) / 4.0;
    REQUIRE(bonferroni_bound(p, q) <= uni + 1e-12);
  }
}

TEST_CASE("N0") {
  CHECK(threshold_N0() == 25);
  CHECK(exceedance_lower_bound(25) > Rational(1, 4));
  CHECK(exceedance_lower_bound(24) < Rational(1, 4));
  CHECK(to_double(exceedance_lower_bound(24)) == doctest::Approx(0.24773341049382716));
  for (std::int64_t n = 25; n < 400; ++n) CHECK(exceedance_lower_bound(n) > Rational(1, 4));
}

TEST_CASE("Bell numbers") {
  const std::uint64_t want[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975};
  for (unsigned p = 0; p <= 10; ++p) CHECK(bell_u64(p) == want[p]);
  for (unsigned p = 1; p <= 20; ++p) CHECK(bell(p) >= bell(p - 1));
  CHECK(bell_u64(25) == 4638590332229999353ULL);
  CHECK_THROWS_AS(bell_u64(26), CapacityError);
  CHECK(to_string(bell(26)) == "49631246523618756274");
}

TEST_CASE("moment suite matches the oracle") {
  const std::vector<Rational> ps{Rational(1, 2), 1, 2, 3, 4};
  const double h[3][5] = {{0.630222755422, 0.708984375, 1, 1.6640625, 3.25},
                          {0.476345100658, 0.517347880574, 0.666666666667, 1.00014959328,
                           1.77777777778},
                          {0.383321023451, 0.408683455826, 0.5, 0.700220016879, 1.15625}};
  const double g[3][5] = {{0.660195337638, 0.828125, 1.5, 3.21875, 7.875},
                          {0.591995389759, 0.855757506478, 2.11111111111, 6.29166666667,
                           21.8888888889},
                          {0.542641538612, 0.879597846884, 2.75, 10.3644742472, 45.640625}};
  for (std::int64_t n = 2; n <= 4; ++n) {
    const auto rep = moment_suite(n, ps);
    CHECK(rep.enumerated);
    CHECK(rep.within_bounds());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(*rep.rows[i].h_moment == doctest::Approx(h[n - 2][i]).epsilon(1e-10));
      CHECK(*rep.rows[i].g_moment == doctest::Approx(g[n - 2][i]).epsilon(1e-10));
    }
    CHECK(*rep.rows[2].h_moment_exact == Rational(1, n) * 2);
    CHECK(rep.to_json() == moment_suite(n, ps, Exec::parallel).to_json());
  }
  const auto r2 = moment_suite(2, ps);
  CHECK(*r2.rows[2].h_bound == 2.0);
  CHECK(*r2.rows[0].g_bound == doctest::Approx(3.0 / std::sqrt(2.0)));
  CHECK(*moment_suite(4, ps).rows[3].h_bound == 2.5);
  CHECK(r2.configurations_h == 81);
  CHECK(r2.configurations_g == 27);
}

TEST_CASE("moment suite beyond budget reports bounds only") {
  const std::vector<Rational> ps{Rational(1, 2), 2};
  const auto rep = moment_suite(8, ps);
  CHECK_FALSE(rep.enumerated);
  CHECK_FALSE(rep.rows[0].g_moment.has_value());
  CHECK(rep.rows[1].h_bound.has_value());
  CHECK(rep.within_bounds());
  CHECK(moment_suite(6, ps).enumerated);
}

TEST_CASE("transfer divergence") {
  const auto seq = LevelSequence::from_levels({2, 64});
  const auto rep = transfer_divergence(seq, 2);
  CHECK(rep.exact);
  CHECK(rep.rows[1].term == doctest::Approx(0.20774276199421102).epsilon(1e-14));
  CHECK(rep.rows[0].term == doctest::Approx(0.40899356267610293).epsilon(1e-14));
  CHECK(rep.all_positive());
  CHECK(rep.non_decaying());
  CHECK(rep.rows[1].partial_sum == doctest::Approx(rep.rows[0].term + rep.rows[1].term));

  const auto inexact = transfer_divergence(seq, 2, 0);
  CHECK_FALSE(inexact.exact);
  CHECK(inexact.rows[1].term == doctest::Approx(0.20774276199421102).epsilon(1e-12));

  const auto big = delta_sequence("0.1", 5, IntegerWidth::big);
  const auto far = transfer_divergence(big, 5);
  CHECK_FALSE(far.exact);
  CHECK(far.all_positive());
  CHECK(far.non_decaying());
  CHECK_THROWS_AS(transfer_divergence(seq, 3), RangeError);
}

TEST_CASE("nontight in level mode beats 1/4 on a short run") {
  ProcessConfig cfg{LevelSequence::from_levels({2, 64}), 2, {}, 12};
  NontightRequest req;
  req.k = 2;
  req.mode = NontightMode::level;
  req.trials = 600;
  const auto rep = nontight_prob(cfg, req);
  CHECK(rep.lo == 128);
  CHECK(rep.hi == 4096);
  CHECK(rep.analytic_bound == 0.25);
  CHECK(rep.window.estimate > 0.25);
  REQUIRE(rep.single_point.has_value());
  CHECK(rep.single_point->estimate < rep.window.estimate);
  const auto par = nontight_prob(cfg, req, Exec::parallel);
  CHECK(par.to_json() == rep.to_json());
}

TEST_CASE("nontight full and focus modes") {
  auto cfg = reference_config(3, 4);
  NontightRequest req;
  req.k = 2;
  req.threshold = Rational(1, 2);
  req.trials = 300;
  req.mode = NontightMode::full;
  const auto full = nontight_prob(cfg, req);
  CHECK(full.intrusion_bound == doctest::Approx(2.0 * 64 / 65600));
  REQUIRE(full.intrusion.has_value());
  req.mode = NontightMode::focus;
  const auto focus = nontight_prob(cfg, req);
  CHECK(focus.focus_threshold == 32 + 8);
  CHECK_FALSE(focus.single_point.has_value());
  // The focus estimator is a lower bound of the full one trial by trial.
  CHECK(focus.window.estimate <= full.window.estimate);

  req.k = 3;
  req.mode = NontightMode::full;
  CHECK_THROWS_AS(nontight_prob(cfg, req), CapacityError);
}
