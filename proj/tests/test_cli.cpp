#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "focs_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

Result run(const std::string& args, const std::string& env = "") {
  std::string cmd = env + (env.empty() ? "" : " ") + FOCS_CLI_PATH + std::string(" ") + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void write_fig1() { std::ofstream(path("example.csv")) << fixtures::kExampleCsv; }

}  // namespace

TEST_CASE("gen synth is deterministic given the seed") {
  REQUIRE(run("gen synth --n 8 --k 2 --count 300 --seed 5 --out " + path("a.csv")).code == 0);
  REQUIRE(run("gen synth --n 8 --k 2 --count 300 --seed 5 --out " + path("b.csv")).code == 0);
  REQUIRE(run("gen synth --n 8 --k 2 --count 300 --seed 6 --out " + path("c.csv")).code == 0);
  CHECK(slurp(path("a.csv")) == slurp(path("b.csv")));
  CHECK(slurp(path("a.csv")) != slurp(path("c.csv")));
  CHECK(lines(slurp(path("a.csv"))).size() == 301);

  // Environment seed applies when the flag is absent; the flag wins otherwise.
  REQUIRE(run("gen synth --n 8 --k 2 --count 300 --out " + path("env.csv"), "FOCS_SEED=5").code == 0);
  CHECK(slurp(path("env.csv")) == slurp(path("a.csv")));
  REQUIRE(run("gen synth --n 8 --k 2 --count 300 --seed 6 --out " + path("env2.csv"), "FOCS_SEED=5").code == 0);
  CHECK(slurp(path("env2.csv")) == slurp(path("c.csv")));
}

TEST_CASE("gen code writes message and received columns") {
  REQUIRE(run("gen code --n 4 --window 2 --flip-prob 0 --prior 0.8 --count 20 --seed 1 --out " + path("code.csv"))
              .code == 0);
  auto ls = lines(slurp(path("code.csv")));
  CHECK(ls.front() == "u0,u1,u2,u3,x0,x1,x2,x3");
  CHECK(ls.size() == 21);
}

TEST_CASE("eval of a single-context model on the example data") {
  write_fig1();
  REQUIRE(run("train mlp --data " + path("example.csv") + " --child X --hidden 3 --epochs 50 --seed 1 --out " +
              path("example_mlp.json"))
              .code == 0);
  REQUIRE(run("learn focs --data " + path("example.csv") + " --child X --mlp " + path("example_mlp.json") +
              " --max-contexts 1 --out " + path("k1.json"))
              .code == 0);
  Result r = run("eval --data " + path("example.csv") + " --child X --model " + path("k1.json"));
  REQUIRE(r.code == 0);
  CHECK(std::stod(r.out) == doctest::Approx(0.675).epsilon(1e-3));
  CHECK(std::stod(r.out) == doctest::Approx(-(3 * std::log(4.0 / 7) + 2 * std::log(3.0 / 7)) / 5).epsilon(1e-6));

  REQUIRE(run("learn tree --data " + path("example.csv") + " --child X --max-depth 0 --out " + path("t0.json")).code == 0);
  Result t = run("eval --data " + path("example.csv") + " --child X --model " + path("t0.json"));
  CHECK(t.out == r.out);
  Result m = run("eval --data " + path("example.csv") + " --child X --model " + path("example_mlp.json"));
  CHECK(m.code == 0);
}

TEST_CASE("curve on cardinality data") {
  REQUIRE(run("gen synth --n 10 --k 2 --count 2000 --seed 3 --out " + path("card.csv")).code == 0);
  REQUIRE(run("train mlp --data " + path("card.csv") + " --child x --epochs 20 --out " + path("card_mlp.json")).code ==
          0);
  REQUIRE(run("curve --data " + path("card.csv") + " --child x --mlp " + path("card_mlp.json") +
              " --max-contexts 8 --out " + path("curve.csv"))
              .code == 0);
  auto ls = lines(slurp(path("curve.csv")));
  REQUIRE(ls.size() == 9);
  CHECK(ls[0] == "contexts,focs_ncll,tree_ncll,mlp_ncll");
  double prev = 1e9;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::istringstream row(ls[i]);
    std::string c, f;
    std::getline(row, c, ',');
    std::getline(row, f, ',');
    CHECK(std::stoul(c) == i);
    CHECK(std::stod(f) <= prev + 1e-12);
    prev = std::stod(f);
  }
}

TEST_CASE("compile, marginal and mpe on a step-network model") {
  REQUIRE(run("gen code --n 5 --window 2 --count 800 --seed 2 --out " + path("c5.csv")).code == 0);
  std::string models;
  for (int i = 0; i < 5; ++i) {
    std::string x = "x" + std::to_string(i);
    std::string sub = path("c5_" + x + ".csv");
    // Family x_i | u: drop the other received bits.
    std::ifstream in(path("c5.csv"));
    std::ofstream out(sub);
    for (std::string l; std::getline(in, l);) {
      std::istringstream cells(l);
      std::vector<std::string> v;
      for (std::string c; std::getline(cells, c, ',');) v.push_back(c);
      for (int j = 0; j < 5; ++j) out << v[j] << ',';
      out << v[5 + i] << '\n';
    }
    out.close();
    REQUIRE(run("train mlp --data " + sub + " --child " + x +
                " --hidden 8 --activation sigmoid --optimizer adam --lr 0.01 --epochs 40 --out " + path(x + "_mlp.json"))
                .code == 0);
    REQUIRE(run("learn focs --step --data " + sub + " --child " + x + " --mlp " + path(x + "_mlp.json") +
                " --max-contexts 2 --out " + path(x + ".json"))
                .code == 0);
    models += (i ? "," : "") + path(x + ".json");
  }
  Result st = run("compile --model " + path("x0.json") + " --stats --out-dot " + path("x0.dot"));
  REQUIRE(st.code == 0);
  auto stats = nlohmann::json::parse(st.out);
  CHECK(stats["contexts"].size() == 2);
  CHECK(stats["order"].size() == 5);
  double models_total = stats["contexts"][0]["models"].get<double>() + stats["contexts"][1]["models"].get<double>();
  CHECK(models_total == 32);
  CHECK(slurp(path("x0.dot")).find("digraph") != std::string::npos);

  Result mg = run("marginal --model " + path("x0.json") + " --prior 0.8");
  REQUIRE(mg.code == 0);
  auto mj = nlohmann::json::parse(mg.out);
  CHECK(mj["masses"][0].get<double>() + mj["masses"][1].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  Result mp = run("mpe --models " + models + " --evidence 11000 --prior 0.8 --export-lp " + path("p.lp"));
  REQUIRE(mp.code == 0);
  auto sol = nlohmann::json::parse(mp.out);
  CHECK(sol["optimal"] == true);
  CHECK(sol["u"].size() == 5);
  CHECK(slurp(path("p.lp")).find("Binary") != std::string::npos);

  CHECK(run("compile --model " + path("x0.json") + " --stats --node-budget 1").code == 2);
  CHECK(run("mpe --models " + models + " --evidence 110 --prior 0.8").code == 1);
  CHECK(run("compile --model " + path("x0_mlp.json")).code == 1);
}

TEST_CASE("study coding prints one 12-field row") {
  Result r = run("study coding --n 4 --window 2 --count 400 --folds 2 --epochs 5 --seed 1 --header");
  REQUIRE(r.code == 0);
  auto ls = lines(r.out);
  REQUIRE(ls.size() == 2);
  for (const auto& l : ls) CHECK(std::count(l.begin(), l.end(), ',') == 11);
  CHECK(ls[1].rfind("4,2,0.05,400,", 0) == 0);
}

TEST_CASE("validation failures exit 1") {
  write_fig1();
  CHECK(run("").code == 1);
  CHECK(run("gen synth --bogus 1 --out x.csv").code == 1);
  CHECK(run("eval --data " + path("missing.csv") + " --child X --model " + path("k1.json")).code == 1);
  std::ofstream(path("bad.csv")) << "U1,X\n2,1\n";
  CHECK(run("learn tree --data " + path("bad.csv") + " --child X --out " + path("t.json")).code == 1);
  CHECK(run("gen synth --n 16 --k 1 --out " + path("k1.csv")).code == 1);
  CHECK(run("learn tree --data " + path("example.csv") + " --child Y --out " + path("t.json")).code == 1);
  CHECK(run("--help").code == 0);
}
