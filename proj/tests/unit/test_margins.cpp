#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "hdsim/io.hpp"
#include "hdsim/margins.hpp"
#include "oracles.hpp"

using namespace hdsim;
using Catch::Approx;

namespace {

std::vector<double> column(const io::DataTable& t, const char* name) {
  const auto c = t.values.col(t.column(name));
  return {c.data(), c.data() + c.size()};
}

std::vector<MarginSpec> continuous_margins() {
  return {MarginSpec::normal(1.5, 2.0), MarginSpec::lognormal(3.418515, 0.6966689), MarginSpec::gamma(10, 1),
          MarginSpec::gamma(0.7, 3.0), MarginSpec::uniform(-1, 4)};
}

}  // namespace

TEST_CASE("construction rejects invalid parameters", "[margins]") {
  CHECK_THROWS_AS(MarginSpec::normal(0, 0), ParameterError);
  CHECK_THROWS_AS(MarginSpec::lognormal(0, -1), ParameterError);
  CHECK_THROWS_AS(MarginSpec::gamma(0, 1), ParameterError);
  CHECK_THROWS_AS(MarginSpec::gamma(1, 0), ParameterError);
  CHECK_THROWS_AS(MarginSpec::negative_binomial(4, 0), ParameterError);
  CHECK_THROWS_AS(MarginSpec::negative_binomial(4, 1.1), ParameterError);
  CHECK_NOTHROW(MarginSpec::negative_binomial(4, 1.0));
  CHECK_THROWS_AS(MarginSpec::uniform(1, 1), ParameterError);
  CHECK_THROWS_AS(MarginSpec::empirical_discrete({2, 1}, {0.5, 0.5}), ParameterError);
  CHECK_THROWS_AS(MarginSpec::empirical_discrete({1, 2}, {0.5, 0.6}), ParameterError);
  CHECK_THROWS_AS(MarginSpec::empirical_discrete({1, 2}, {-0.5, 1.5}), ParameterError);
}

TEST_CASE("cdf and quantile reference values", "[margins]") {
  CHECK(cdf(MarginSpec::normal(0, 1), 0.0) == 0.5);
  CHECK(cdf(MarginSpec::uniform(0, 1), 0.3) == Approx(0.3).epsilon(1e-15));
  CHECK(cdf(MarginSpec::negative_binomial(4, 3e-4), 0.0) == Approx(std::pow(3e-4, 4)).epsilon(1e-12));
  CHECK(quantile(MarginSpec::normal(0, 1), 0.5) == 0.0);
  CHECK(quantile(MarginSpec::empirical_discrete({1, 2, 3}, {1 / 3.0, 1 / 3.0, 1 / 3.0}), 0.34) == 2.0);
  CHECK(quantile(MarginSpec::lognormal(3.418515, 0.6966689), 0.5) == Approx(std::exp(3.418515)).epsilon(1e-12));
  CHECK(quantile(MarginSpec::lognormal(3.418515, 0.6966689), 0.5) == Approx(30.52).margin(0.005));
  CHECK_THROWS_AS(quantile(MarginSpec::normal(0, 1), 1.5), DomainError);
  CHECK_THROWS_AS(quantile(MarginSpec::normal(0, 1), -0.1), DomainError);
  CHECK_THROWS_AS(quantile(MarginSpec::normal(0, 1), std::nan("")), DomainError);
}

TEST_CASE("continuous round trip and monotone cdf", "[margins]") {
  for (const auto& m : continuous_margins()) {
    double prev = -1;
    for (int i = 1; i < 1000; ++i) {
      const double u = i / 1000.0;
      const double x = quantile(m, u);
      CHECK(std::abs(cdf(m, x) - u) <= 1e-9);
      CHECK(std::abs(ccdf(m, upper_quantile(m, 1 - u)) - (1 - u)) <= 1e-9);
      CHECK(cdf(m, x) >= prev);
      prev = cdf(m, x);
    }
    for (double u : {1e-12, 1e-6, 1 - 1e-6}) CHECK(std::abs(cdf(m, quantile(m, u)) - u) <= 1e-9);
  }
}

TEST_CASE("discrete quantile is the generalized inverse", "[margins]") {
  // Exhaustive scan of the support against the definition inf{y : F(y) >= u}.
  hdsim::CounterRng rng(11, 0, StreamTag::Synthetic);
  std::vector<double> support(1000), probs(1000);
  for (std::size_t j = 0; j < support.size(); ++j) {
    support[j] = static_cast<double>(j) * 0.5 - 100.0;
    probs[j] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
  }
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (auto& p : probs) p /= total;
  double acc = 0;
  for (std::size_t j = 0; j + 1 < probs.size(); ++j) acc += probs[j];
  probs.back() = 1.0 - acc;

  const std::vector<MarginSpec> margins{MarginSpec::empirical_discrete(support, probs),
                                        MarginSpec::negative_binomial(2.5, 0.3), MarginSpec::negative_binomial(4, 0.02)};
  for (const auto& m : margins) {
    const bool nb = m.family() == Family::NegativeBinomial;
    std::vector<double> grid = nb ? std::vector<double>{} : support;
    if (nb)
      for (int k = 0; k <= 4000; ++k) grid.push_back(k);
    std::vector<double> F(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) F[j] = cdf(m, grid[j]);
    for (int i = 0; i <= 2000; ++i) {
      const double u = i == 0 ? 1e-9 : (i == 2000 ? 1 - 1e-9 : i / 2000.0);
      double expected = std::nan("");
      for (std::size_t j = 0; j < grid.size(); ++j)
        if (F[j] >= u) {
          expected = grid[j];
          break;
        }
      INFO(family_name(m.family()) << " u=" << u);
      CHECK(quantile(m, u) == expected);
    }
  }
}

TEST_CASE("negative binomial batch transform equals the scalar path", "[margins]") {
  for (const auto& m : {MarginSpec::negative_binomial(4, 3e-4), MarginSpec::negative_binomial(0.5, 0.9),
                        MarginSpec::negative_binomial(20, 0.01)}) {
    std::vector<double> z(50000);
    for (std::size_t i = 0; i < z.size(); i += 2) {
      const auto p = normal_pair(5, 0, StreamTag::Sample, i / 2);
      z[i] = 1.7 * p[0];
      z[i + 1] = 1.7 * p[1];
    }
    std::vector<double> batch = z;
    transform_scores(m, batch);
    std::size_t mismatch = 0;
    for (std::size_t i = 0; i < z.size(); ++i) mismatch += batch[i] != value_at_score(m, z[i]);
    CHECK(mismatch == 0);
  }
}

TEST_CASE("probability integral transform is uniform", "[margins]") {
  for (const auto& m : continuous_margins()) {
    const auto xs = sample(m, 100000, 3);
    const double d = oracle::ks_distance(xs, [&](double x) { return cdf(m, x); });
    INFO(family_name(m.family()));
    CHECK(d <= 0.01);
  }
}

TEST_CASE("sample moments follow the law of large numbers", "[margins]") {
  const auto u = sample(MarginSpec::uniform(0, 1), 1'000'000, 1);
  CHECK(std::accumulate(u.begin(), u.end(), 0.0) / u.size() == Approx(0.5).margin(0.002));
  const auto z = sample(MarginSpec::normal(0, 1), 1'000'000, 2);
  double ss = 0;
  for (double v : z) ss += v * v;
  CHECK(std::sqrt(ss / z.size()) == Approx(1.0).margin(0.003));
  const auto nb = sample(MarginSpec::negative_binomial(4, 3e-4), 200000, 3);
  CHECK(std::accumulate(nb.begin(), nb.end(), 0.0) / nb.size() == Approx(4 * (1 - 3e-4) / 3e-4).epsilon(0.01));
  CHECK(sample(MarginSpec::gamma(2, 1), 10, 9) == sample(MarginSpec::gamma(2, 1), 10, 9));
}

TEST_CASE("analytic moments", "[margins]") {
  CHECK(mean(MarginSpec::negative_binomial(4, 3e-4)) == Approx(13329.3333333).epsilon(1e-9));
  CHECK(variance(MarginSpec::gamma(10, 2)) == Approx(2.5));
  CHECK(mean(MarginSpec::lognormal(0, 1)) == Approx(std::exp(0.5)));
  CHECK(variance(MarginSpec::uniform(0, 1)) == Approx(1.0 / 12));
  CHECK(mean(MarginSpec::empirical_discrete({1, 2, 3}, {0.2, 0.3, 0.5})) == Approx(2.3));
}

TEST_CASE("fits on the airquality columns", "[margins][golden]") {
  const auto t = io::read_data_csv(std::string(HDSIM_TEST_DATA_DIR) + "/airquality.csv");
  REQUIRE(t.values.rows() == 116);
  CHECK(t.dropped_rows == 37);
  const auto temp = fit_normal(column(t, "Temp"));
  CHECK(temp.method == FitMethod::Unbiased);
  CHECK(temp.sample_size == 116);
  CHECK(temp.spec.as<Normal>().mean == Approx(77.87069).margin(5e-6));
  CHECK(temp.spec.as<Normal>().sd == Approx(9.485486).margin(5e-7));

  const auto ozone = column(t, "Ozone");
  const auto mle = fit_lognormal(ozone).spec.as<LogNormal>();
  CHECK(mle.meanlog == Approx(3.418515).margin(5e-7));
  CHECK(mle.sdlog == Approx(0.8617360).margin(5e-7));
  // The printed fit used mean absolute deviation of the logs.
  const auto mad = fit_lognormal(ozone, LogScaleEstimator::MeanAbsoluteDeviation).spec.as<LogNormal>();
  CHECK(mad.meanlog == Approx(3.418515).margin(5e-7));
  CHECK(mad.sdlog == Approx(0.6966689).margin(5e-8));
}

TEST_CASE("estimator edge cases", "[margins]") {
  const std::vector<double> constant{3, 3, 3};
  CHECK_THROWS_AS(fit_normal(constant), ParameterError);
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(fit_normal(one), DataError);
  const std::vector<double> xs{10 - std::sqrt(10.0), 10 + std::sqrt(10.0)};
  const auto nb = fit_nbinom_mom(xs).spec.as<NegativeBinomial>();
  CHECK(nb.size == Approx(10.0).epsilon(1e-12));
  CHECK(nb.prob == Approx(0.5).epsilon(1e-12));
  const std::vector<double> under{4, 5, 6, 5};
  CHECK_THROWS_AS(fit_nbinom_mom(under), OverDispersionError);
  const std::vector<double> nonpos{1, 0, 2};
  CHECK_THROWS_AS(fit_lognormal(nonpos), DataError);
}

TEST_CASE("lognormal fit recovers its parameters", "[margins]") {
  const auto xs = sample(MarginSpec::lognormal(1.2, 0.7), 100000, 21);
  const auto fit = fit_lognormal(xs).spec.as<LogNormal>();
  CHECK(fit.meanlog == Approx(1.2).margin(1e-2));
  CHECK(fit.sdlog == Approx(0.7).margin(1e-2));
}

TEST_CASE("margin JSON round trip", "[margins][io]") {
  const std::vector<MarginSpec> ms{MarginSpec::normal(77.87069, 9.485486), MarginSpec::lognormal(0.1, 0.3),
                                   MarginSpec::gamma(2.5, 0.125), MarginSpec::negative_binomial(4, 3e-4),
                                   MarginSpec::uniform(-1, 1), MarginSpec::empirical_discrete({0, 1, 5}, {0.25, 0.5, 0.25})};
  const auto text = io::margins_to_json(ms).dump();
  const auto back = io::margins_from_json(nlohmann::json::parse(text));
  REQUIRE(back.size() == ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(back[i].family() == ms[i].family());
    CHECK(nlohmann::json(back[i]) == nlohmann::json(ms[i]));
  }
  CHECK(nlohmann::json(ms[0]).dump() == R"({"family":"normal","params":{"mean":77.87069,"sd":9.485486}})");
  CHECK_THROWS_AS(margin_from_json(nlohmann::json::parse(R"({"family":"cauchy","params":{}})")), DataError);
  CHECK_THROWS_AS(margin_from_json(nlohmann::json::parse(R"({"family":"normal","params":{"mean":0,"sd":-1}})")),
                  ParameterError);
}
