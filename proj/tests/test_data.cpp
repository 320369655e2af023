#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "focs/data.hpp"
#include "focs/error.hpp"

using namespace focs;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

std::string render(const Dataset& d) {
  std::ostringstream out;
  write_csv(out, d);
  return out.str();
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("focs_test_data_" + name);
}

}  // namespace

TEST_CASE("three-column file: child X, parents U1 U2") {
  auto path = temp_file("three.csv");
  std::ofstream(path) << "U1,U2,X\n0,1,1\n";
  FamilyView v = load_csv(path, "X");
  CHECK(v.parent_names() == std::vector<std::string>{"U1", "U2"});
  CHECK(v.child_name() == "X");
  CHECK(v.size() == 1);
  std::filesystem::remove(path);
}

TEST_CASE("example dataset round-trips load -> save -> load") {
  auto path = temp_file("example.csv");
  std::ofstream(path) << fixtures::kExampleCsv;
  FamilyView a = load_csv(path, "X");
  auto path2 = temp_file("example_b.csv");
  save_csv(path2, a.dataset());
  FamilyView b = load_csv(path2, "X");
  CHECK(render(a.dataset()) == render(b.dataset()));
  CHECK(render(b.dataset()) == fixtures::kExampleCsv);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("non-binary cell names row and column") {
  try {
    parse("U1,U2,X\n0,1,1\n1,2,0\n");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("U2") != std::string::npos);
  }
}

TEST_CASE("load errors") {
  CHECK_THROWS_AS(parse("U1,U1,X\n0,1,1\n"), ValidationError);
  CHECK_THROWS_AS(parse(""), ValidationError);
  CHECK_THROWS_AS(parse("U1,X\n0\n"), ValidationError);
  CHECK_THROWS_AS(load_csv(temp_file("does_not_exist.csv"), "X"), ValidationError);
  auto data = std::make_shared<const Dataset>(parse("U1,X\n0,1\n"));
  CHECK_THROWS_AS(FamilyView::all_parents(data, "Y"), ValidationError);
}

TEST_CASE("CRLF line endings and weight column") {
  Dataset d = parse("U1,X,#weight\r\n0,1,3\r\n1,0,1\r\n");
  CHECK(d.num_variables() == 2);
  CHECK(d.num_records() == 2);
  CHECK(d.weight(0) == 3);
  CHECK(d.total_weight() == 4);
  CHECK(render(d) == "U1,X,#weight\n0,1,3\n1,0,1\n");
  CHECK_THROWS_AS(parse("U1,X,#weight\n0,1,0\n"), ValidationError);
}

TEST_CASE("count on the example dataset") {
  FamilyView v = fixtures::example_view();
  const std::size_t u1 = 0, u2 = 1, x = 2;
  CHECK(count(v, {{u1, 1}}) == 3);
  CHECK(count(v, {}) == 5);
  CHECK(count(v, {{u1, 1}, {u2, 1}, {x, 1}}) == 1);
  CHECK(count(v, {{x, 1}}) == 3);
}

TEST_CASE("count rejects variables outside the family") {
  auto data = std::make_shared<const Dataset>(parse("A,B,X\n0,1,1\n"));
  FamilyView v(data, 2, {0});
  CHECK_THROWS(count(v, {{1, 0}}));
}

TEST_CASE("count is monotone and respects weights (property)") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    FamilyView v = fixtures::random_view(4, 40, rng);
    Query q;
    uint64_t prev = count(v, q);
    CHECK(prev == v.total_weight());
    std::vector<std::size_t> vars = {0, 1, 2, 3, 4};
    std::shuffle(vars.begin(), vars.end(), rng);
    for (std::size_t var : vars) {
      q[var] = uint8_t(rng() & 1);
      uint64_t now = count(v, q);
      CHECK(now <= prev);
      prev = now;
    }
    // Naive oracle.
    uint64_t naive = 0;
    for (std::size_t r = 0; r < v.size(); ++r) {
      bool ok = true;
      for (auto [var, val] : q) ok = ok && v.dataset().value(r, var) == val;
      if (ok) naive += v.weight(r);
    }
    CHECK(prev == naive);
  }
}

TEST_CASE("save/load identity on random datasets (property)") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    FamilyView v = fixtures::random_view(1 + trial % 6, 1 + trial * 3, rng, trial % 2 ? 4 : 1);
    std::string text = render(v.dataset());
    CHECK(render(parse(text)) == text);
  }
}

TEST_CASE("gen_cardinality: context balance, child rate, determinism") {
  FamilyView v = gen_cardinality(16, 2, 10000, 42);
  CHECK(v.arity() == 16);
  CHECK(v.child_name() == "x");
  uint64_t low = 0, low_ones = 0, high = 0, high_ones = 0;
  for (std::size_t r = 0; r < v.size(); ++r) {
    bool is_low = in_low_cardinality_context(v.parent_values(r), 2);
    (is_low ? low : high) += 1;
    (is_low ? low_ones : high_ones) += v.child_value(r);
  }
  double frac = double(low) / double(v.size());
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);
  double p_low = double(low_ones) / double(low);
  CHECK(p_low >= 0.03);
  CHECK(p_low <= 0.07);
  CHECK(double(high_ones) / double(high) >= 0.93);
  // The four child/context cells partition the data.
  CHECK(low_ones + (low - low_ones) + high_ones + (high - high_ones) == v.total_weight());

  FamilyView again = gen_cardinality(16, 2, 10000, 42);
  CHECK(render(v.dataset()) == render(again.dataset()));
  FamilyView other = gen_cardinality(16, 2, 10000, 43);
  CHECK(render(v.dataset()) != render(other.dataset()));
}

TEST_CASE("gen_cardinality rejects an empty context") {
  CHECK_THROWS_AS(gen_cardinality(16, 1, 10, 1), ValidationError);
  CHECK_THROWS_AS(gen_cardinality(0, 2, 10, 1), ValidationError);
  CHECK_NOTHROW(gen_cardinality(4, 4, 10, 1));
}

TEST_CASE("subset keeps family structure") {
  FamilyView v = fixtures::example_view();
  std::vector<std::size_t> rows = {4, 0};
  FamilyView s = v.subset(rows);
  CHECK(s.size() == 2);
  CHECK(s.parent_values(0)[0] == 1);
  CHECK(s.parent_values(0)[1] == 1);
  CHECK(s.child_value(1) == 1);
  CHECK(s.parent_names() == v.parent_names());
}
