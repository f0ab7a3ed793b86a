#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "olar/cli.hpp"
#include "olar/error.hpp"

using namespace olar;
namespace fs = std::filesystem;

namespace {

struct Out {
  int code = 0;
  std::string out, err;
};

Out call(std::vector<std::string> args) {
  args.insert(args.begin(), "olar");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("olar_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& l) {
  std::vector<std::string> out;
  std::istringstream in(l);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("gen") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  const std::vector<std::string> flags = {"--n", "2000", "--d", "20", "--p", "1", "--seed", "1"};
  auto with_out = [&](const fs::path& dir) {
    auto v = flags;
    v.insert(v.begin(), "gen");
    v.push_back("--out");
    v.push_back(dir.string());
    return v;
  };
  REQUIRE(call(with_out(a)).code == 0);
  REQUIRE(call(with_out(b)).code == 0);
  for (const char* f : {"stream.olar", "x_star.csv", "manifest.json"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["n"] == 2000);
  CHECK(manifest["inflate_count"] == 20);

  auto no_out = flags;
  no_out.insert(no_out.begin(), "gen");
  const Out r = call(no_out);
  CHECK(r.code == 2);
  CHECK(r.err.find("--out") != std::string::npos);
  CHECK(call({}).code == 2);
  CHECK(call({"bogus"}).code == 2);
}

TEST_CASE("run") {
  const fs::path clean = scratch("run_clean"), noisy = scratch("run_noisy");
  REQUIRE(call({"gen", "--n", "800", "--d", "4", "--p", "1.5", "--noise", "0", "--seed", "2", "--out", clean.string()})
              .code == 0);
  REQUIRE(call({"gen", "--n", "800", "--d", "4", "--p", "1.5", "--seed", "3", "--inflate", "0", "--out",
                noisy.string()})
              .code == 0);

  const Out g = call({"run", "--data", clean.string(), "--p", "1.5"});
  REQUIRE(g.code == 0);
  const auto jg = nlohmann::json::parse(g.out);
  CHECK(jg["objective"].get<double>() < 1e-6);
  CHECK(jg["queries"] == jg["ledger"]["total"]);
  CHECK(jg["x"].size() == 4);

  const Dataset full = load_dataset((noisy / "stream.olar").string());
  const double opt = solve(full.a, full.b, 1.5).objective;
  const Out all = call({"run", "--data", noisy.string(), "--p", "1.5", "--mode", "budget", "--budget", "800",
                        "--method", "uniform"});
  REQUIRE(all.code == 0);
  CHECK(nlohmann::json::parse(all.out)["objective"].get<double>() == doctest::Approx(opt).epsilon(1e-8));

  double obj[2];
  int k = 0;
  for (const char* mode : {"exact-oracle", "compression-tree"}) {
    const Out r = call({"run", "--data", noisy.string(), "--p", "1.5", "--seed", "4", "--weight-mode", mode});
    REQUIRE(r.code == 0);
    obj[k++] = nlohmann::json::parse(r.out)["objective"].get<double>();
  }
  CHECK(obj[0] <= 1.5 * opt);
  CHECK(obj[1] <= 1.5 * opt);
  CHECK(obj[1] / obj[0] == doctest::Approx(1.0).epsilon(0.5));

  CHECK(call({"run", "--data", noisy.string(), "--mode", "budget"}).code == 2);
  CHECK(call({"run", "--data", noisy.string(), "--epsilon", "2"}).code == 2);
  CHECK(call({"run", "--data", (noisy / "missing.olar").string()}).code == 3);
  CHECK(call({"run", "--data", noisy.string(), "--weight-mode", "leverage-fast", "--p", "1.5"}).code == 2);

  // a rank-deficient stream is a numeric failure
  const fs::path flat = scratch("run_flat");
  fs::create_directories(flat);
  {
    std::ofstream f(flat / "s.csv");
    for (int i = 0; i < 20; ++i) f << "1,0," << i << "\n";
  }
  CHECK(call({"run", "--data", (flat / "s.csv").string(), "--p", "1.5"}).code == 4);
}

TEST_CASE("seed override, config file and sketch dump") {
  const fs::path dir = scratch("cfg");
  REQUIRE(call({"gen", "--n", "500", "--d", "3", "--seed", "5", "--out", dir.string()}).code == 0);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream f(cfg);
    f << "# comment\np = 1.5\nboost_runs = 3\nseed = 17\ntheta.beta3 = 0.1\n";
  }
  const Out r = call({"run", "--data", dir.string(), "--config", cfg.string(), "--boost", "2"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["config"]["p"] == 1.5);
  CHECK(j["config"]["boost_runs"] == 2);
  CHECK(j["config"]["seed"] == 17);

  setenv("OLAR_SEED", "99", 1);
  const Out e = call({"run", "--data", dir.string(), "--seed", "3", "--p", "2"});
  unsetenv("OLAR_SEED");
  REQUIRE(e.code == 0);
  CHECK(nlohmann::json::parse(e.out)["config"]["seed"] == 99);

  {
    std::ofstream f(cfg);
    f << "nonsense = 1\n";
  }
  CHECK(call({"run", "--data", dir.string(), "--config", cfg.string()}).code == 2);

  const fs::path dump = dir / "sketch.csv";
  REQUIRE(call({"run", "--data", dir.string(), "--p", "1.5", "--dump-sketch", dump.string()}).code == 0);
  const auto dl = lines(slurp(dump));
  REQUIRE(dl.size() > 1);
  CHECK(dl[0] == "stage,row_index,probability,scale,queried");
}

TEST_CASE("sweep") {
  const fs::path dir = scratch("sweep");
  REQUIRE(call({"gen", "--n", "2000", "--d", "20", "--p", "2", "--seed", "6", "--out", dir.string()}).code == 0);

  const Out one = call({"sweep", "--data", dir.string(), "--methods", "uniform", "--budgets", "300", "--trials", "1"});
  REQUIRE(one.code == 0);
  const auto l = lines(one.out);
  REQUIRE(l.size() == 5);
  CHECK(l[0] == "method,budget,trial,relative_error,queries_used,seed,status");
  CHECK(l[2] == "# aggregate");
  CHECK(l[3] == "method,budget,trials,mean,std");
  CHECK(fields(l[1])[6] == "ok");

  // desk replica: every budget, active below uniform, and bytes repeat
  const std::vector<std::string> args = {"sweep", "--data", dir.string(), "--p", "2", "--trials", "20", "--seed", "1"};
  const Out a = call(args), b = call(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto al = lines(a.out);
  std::map<std::pair<std::string, std::string>, std::vector<double>> data;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> agg;
  bool in_agg = false;
  for (std::size_t i = 1; i < al.size(); ++i) {
    if (al[i] == "# aggregate") {
      in_agg = true;
      ++i;
      continue;
    }
    const auto f = fields(al[i]);
    if (in_agg)
      agg[{f[0], f[1]}] = {std::stod(f[3]), std::stod(f[4])};
    else
      data[{f[0], f[1]}].push_back(std::stod(f[3]));
  }
  REQUIRE(agg.size() == 8);
  for (const auto& [key, v] : data) {
    double mean = 0.0, var = 0.0;
    for (double e : v) mean += e;
    mean /= static_cast<double>(v.size());
    for (double e : v) var += (e - mean) * (e - mean);
    CHECK(std::abs(agg[key].first - mean) <= 1e-12 * std::max(1.0, mean));
    CHECK(std::abs(agg[key].second - std::sqrt(var / static_cast<double>(v.size() - 1))) <= 1e-12);
  }
  for (const char* budget : {"160", "200", "240", "280"})
    CHECK(agg[{"active-online", budget}].first < agg[{"uniform", budget}].first);

  // a failing cell is reported, the sweep carries on
  const Out bad = call({"sweep", "--data", dir.string(), "--methods", "active-online,uniform", "--budgets", "10,300",
                        "--trials", "2"});
  REQUIRE(bad.code == 0);
  const auto bl = lines(bad.out);
  CHECK(fields(bl[1])[6] == "InvalidArgument");
  CHECK(fields(bl[3])[6] == "ok");

  CHECK(call({"sweep", "--data", (dir / "nope").string()}).code == 3);
  CHECK(call({"sweep", "--data", dir.string(), "--budgets", "300,200"}).code == 2);
  CHECK(call({"sweep", "--data", dir.string(), "--trials", "0"}).code == 2);
  CHECK(call({"sweep", "--data", dir.string(), "--methods", "magic"}).code == 2);
}
