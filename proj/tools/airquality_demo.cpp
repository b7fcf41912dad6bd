// Bivariate workflow on the Temp/Ozone columns of a data CSV:
// fit margins, estimate Spearman, map to the normal scale, check bounds and
// admissibility, then simulate and compare.

#include <cstdio>
#include <span>
#include <string>

#include "hdsim/hdsim.hpp"

int main(int argc, char** argv) {
  using namespace hdsim;
  const std::string path = argc > 1 ? argv[1] : "tests/data/airquality.csv";
  try {
    const auto table = io::read_data_csv(path);
    std::printf("rows kept %td, dropped %zu\n", table.values.rows(), table.dropped_rows);
    const auto temp = table.values.col(table.column("Temp"));
    const auto ozone = table.values.col(table.column("Ozone"));
    const std::span<const double> t(temp.data(), static_cast<std::size_t>(temp.size()));
    const std::span<const double> o(ozone.data(), static_cast<std::size_t>(ozone.size()));

    const auto temp_fit = fit_normal(t).spec.as<Normal>();
    const auto ozone_fit = fit_lognormal(o).spec.as<LogNormal>();
    std::printf("Temp  ~ normal(mean %.7g, sd %.7g)\n", temp_fit.mean, temp_fit.sd);
    std::printf("Ozone ~ lognormal(meanlog %.7g, sdlog %.7g)\n", ozone_fit.meanlog, ozone_fit.sdlog);

    Matrix data(table.values.rows(), 2);
    data.col(0) = temp;
    data.col(1) = ozone;
    const auto rs = cor(data, DependencyType::Spearman);
    const auto rx = cor_convert(rs, DependencyType::Spearman, DependencyType::Pearson);
    std::printf("Spearman %.7g -> normal-scale Pearson %.7g, admissible: %s\n", rs(0, 1), rx(0, 1),
                iscorrelation(rx) ? "yes" : "no");

    const std::vector<MarginSpec> margins{MarginSpec::normal(temp_fit.mean, temp_fit.sd),
                                          MarginSpec::lognormal(ozone_fit.meanlog, ozone_fit.sdlog)};
    const auto b = cor_bounds(margins[0], margins[1], DependencyType::Pearson, 1'000'000, 1);
    std::printf("Pearson bounds [%.4f, %.4f]\n", b.lower, b.upper);

    const auto report = simulate(SimulationConfig(10'000, rs, margins, 2));
    std::printf("simulated Spearman %.4f (target %.4f)\n", cor(report.data, DependencyType::Spearman)(0, 1), rs(0, 1));
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
