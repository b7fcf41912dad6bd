#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <sstream>

#include "hdsim/io.hpp"
#include "hdsim/random.hpp"

using namespace hdsim;

TEST_CASE("matrix CSV round trip is exact", "[io]") {
  CounterRng rng(3, 0, StreamTag::Synthetic);
  Matrix m(7, 5);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal() * std::pow(10.0, (i - 3) * 40);
  m(0, 0) = std::numeric_limits<double>::denorm_min();
  m(1, 1) = -0.0;
  m(2, 2) = 0.1;
  std::stringstream s;
  io::write_matrix_csv(s, m);
  const Matrix back = io::read_matrix_csv(s);
  CHECK(back == m);
  CHECK(io::format_double(0.1) == "0.1");
}

TEST_CASE("matrix CSV rejects malformed input", "[io]") {
  std::stringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(io::read_matrix_csv(ragged), DataError);
  std::stringstream text("1,abc\n");
  CHECK_THROWS_AS(io::read_matrix_csv(text), DataError);
  std::stringstream empty("\n\n");
  CHECK_THROWS_AS(io::read_matrix_csv(empty), DataError);
  CHECK_THROWS_AS(io::read_matrix_csv(std::string("/nonexistent/file.csv")), DataError);
}

TEST_CASE("data CSV drops rows with missing fields", "[io]") {
  std::stringstream s("a, b,c\n1,2,3\nNA,1,1\n4, 5 ,6\n7,,8\n.,1,2\n9,10,11\n\n");
  const auto t = io::read_data_csv(s);
  CHECK(t.names == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.dropped_rows == 3);
  REQUIRE(t.values.rows() == 3);
  CHECK(t.values(1, 1) == 5);
  CHECK(t.column("c") == 2);
  CHECK_THROWS_AS(t.column("z"), DataError);

  std::stringstream bad("a,b\n1,2,3\n");
  CHECK_THROWS_AS(io::read_data_csv(bad), DataError);
}

TEST_CASE("data CSV writer emits a header", "[io]") {
  Matrix m(2, 2);
  m << 1, 2.5, -3, 4e-300;
  std::stringstream s;
  io::write_data_csv(s, m, {"x"});
  const auto t = io::read_data_csv(s);
  CHECK(t.names == std::vector<std::string>{"x", "V2"});
  CHECK(t.values == m);
}

TEST_CASE("margin documents", "[io]") {
  const std::vector<MarginSpec> m{MarginSpec::normal(1, 2), MarginSpec::negative_binomial(4, 3e-4),
                                  MarginSpec::empirical_discrete({0, 2}, {0.25, 0.75})};
  const auto j = io::margins_to_json(m);
  const auto back = io::margins_from_json(j);
  REQUIRE(back.size() == 3);
  CHECK(back[1].as<NegativeBinomial>().prob == 3e-4);
  CHECK(back[2].family() == Family::EmpiricalDiscrete);
  CHECK_THROWS_AS(io::margins_from_json(nlohmann::json::object()), DataError);
}
