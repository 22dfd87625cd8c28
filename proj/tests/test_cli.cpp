#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "egpd/io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const fs::path& root() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "egpd_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Outcome cli(const std::string& args, const std::string& env = "") {
  const fs::path err = root() / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + EGPD_CLI_PATH + "' " + args +
                          " > /dev/null 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.err = slurp(err);
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::vector<std::vector<double>> numeric_rows(const fs::path& p) {
  return egpd::read_csv(p).rows;
}

// A small fit shared by the post-processing cases.
const fs::path& fitted() {
  static const fs::path dir = [] {
    const fs::path data = root() / "fit_data.csv";
    REQUIRE(cli("simulate --scenario 1 --n 80 --seed 4 --out " + q(data)).code == 0);
    const fs::path cfg = root() / "fit.ini";
    spit(cfg,
         "[sampler]\nn_iter = 200\nburn_in = 100\nn_chains = 2\nseed = 9\n"
         "[data]\npath = fit_data.csv\ncovariates = x1, x2\n"
         "[output]\ndirectory = " + (root() / "fit_a").string() + "\n");
    const Outcome o = cli("fit --config " + q(cfg));
    REQUIRE_MESSAGE(o.code == 0, o.err);
    return root() / "fit_a";
  }();
  return dir;
}

}  // namespace

TEST_CASE("argument and environment errors exit with 2") {
  CHECK(cli("simulate --scenario 5 --out " + q(root() / "s5.csv")).code == 2);
  CHECK(cli("simulate --no-such-flag").code == 2);
  CHECK(cli("").code == 2);
  CHECK(cli("fit --config " + q(root() / "missing.ini")).code == 2);
  CHECK(cli("simulate --out " + q(root() / "w.csv"), "EGPD_LASSO_WORKERS=abc").code == 2);
  CHECK(cli("simulate --out " + q(root() / "w.csv"), "EGPD_LASSO_WORKERS=2").code == 0);
}

TEST_CASE("simulate is deterministic") {
  const fs::path a = root() / "sim_a.csv", b = root() / "sim_b.csv", c = root() / "sim_c.csv";
  REQUIRE(cli("simulate --scenario 2 --n 50 --seed 8 --out " + q(a)).code == 0);
  REQUIRE(cli("simulate --scenario 2 --n 50 --seed 8 --out " + q(b)).code == 0);
  REQUIRE(cli("simulate --scenario 2 --n 50 --seed 9 --out " + q(c)).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
  const egpd::CsvTable t = egpd::read_csv(a);
  CHECK(t.header.front() == "x1");
  CHECK(t.header[9] == "x10");
  CHECK(t.header.back() == "y");
  CHECK(t.rows.size() == 50);

  const fs::path r = root() / "rain.csv";
  REQUIRE(cli("simulate --rainfall --out " + q(r)).code == 0);
  const egpd::CsvTable rt = egpd::read_csv(r);
  CHECK(rt.rows.size() == 532);
  CHECK(rt.header.back() == "precip");
}

TEST_CASE("fit writes its outputs and reruns reproduce them") {
  const fs::path dir = fitted();
  for (const char* f : {"config.ini", "report.json", "summary.csv", "chain_1.csv", "chain_2.csv"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  const Json report = Json::parse(slurp(dir / "report.json"));
  for (const char* key : {"config", "seed", "data", "coordinates", "summary", "lambda",
                          "acceptance", "warnings", "timing"}) {
    CHECK_MESSAGE(report.contains(key), key);
  }
  CHECK(report["seed"] == 9);
  CHECK(report["data"]["n"] == 80);
  CHECK(report["acceptance"].size() == 2);
  const auto names = report["coordinates"].get<std::vector<std::string>>();
  CHECK(names.front() == "beta.intercept");
  CHECK(names.back() == "lambda");
  CHECK(egpd::read_csv(dir / "chain_1.csv").header == names);
  CHECK(egpd::read_csv(dir / "chain_1.csv").rows.size() == 200);

  // The echoed config alone regenerates the chains.
  const fs::path echo = root() / "echo.ini";
  spit(echo, report["config"].get<std::string>());
  const fs::path again = root() / "fit_b";
  const Outcome o = cli("fit --config " + q(echo) + " --out " + q(again), "EGPD_LASSO_WORKERS=2");
  REQUIRE_MESSAGE(o.code == 0, o.err);
  CHECK(slurp(dir / "chain_1.csv") == slurp(again / "chain_1.csv"));
  CHECK(slurp(dir / "chain_2.csv") == slurp(again / "chain_2.csv"));
  CHECK(slurp(dir / "summary.csv") == slurp(again / "summary.csv"));
  std::string echoed = slurp(again / "config.ini");
  echoed.replace(echoed.find(again.string()), again.string().size(), dir.string());
  CHECK(slurp(dir / "config.ini") == echoed);

  const fs::path other = root() / "fit_c";
  REQUIRE(cli("fit --config " + q(echo) + " --out " + q(other) + " --seed 10").code == 0);
  CHECK(slurp(dir / "chain_1.csv") != slurp(other / "chain_1.csv"));
}

TEST_CASE("data errors exit with 3 and name the line") {
  const fs::path data = root() / "bad.csv";
  spit(data, "x1,y\n0.5,1.2\n0.3,0\n");
  const fs::path cfg = root() / "bad.ini";
  spit(cfg, "[sampler]\nn_iter = 20\nburn_in = 10\n[data]\npath = bad.csv\n[output]\ndirectory = " +
                (root() / "bad_out").string() + "\n");
  const Outcome o = cli("fit --config " + q(cfg));
  CHECK(o.code == 3);
  CHECK(o.err.find("line 3") != std::string::npos);

  spit(cfg, "[data]\npath = nowhere.csv\n");
  CHECK(cli("fit --config " + q(cfg)).code == 3);

  spit(cfg, "[sampler]\nn_iter = lots\n[data]\npath = bad.csv\n");
  const Outcome parse = cli("fit --config " + q(cfg));
  CHECK(parse.code == 2);
  CHECK(parse.err.find("line 2") != std::string::npos);
}

TEST_CASE("post-processing commands") {
  const fs::path dir = fitted();

  SUBCASE("density grid") {
    const fs::path out = root() / "grid.csv";
    REQUIRE(cli("density-grid --fit " + q(dir) + " --c 0.2 0.8 --y-count 40 --max-draws 50 --out " +
                q(out)).code == 0);
    const egpd::CsvTable t = egpd::read_csv(out);
    CHECK(t.header == std::vector<std::string>{"x_section", "y", "mean", "lo", "hi"});
    REQUIRE(t.rows.size() == 80);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto& r = t.rows[i];
      CHECK(r[0] == (i < 40 ? 0.2 : 0.8));
      CHECK(r[2] >= 0.0);
      CHECK(r[3] <= r[2]);
      CHECK(r[2] <= r[4]);
      if (i % 40 != 0) CHECK(r[1] > t.rows[i - 1][1]);
    }
    const fs::path js = root() / "grid.json";
    REQUIRE(cli("density-grid --fit " + q(dir) + " --format json --y-count 10 --out " + q(js))
                .code == 0);
    const Json j = Json::parse(slurp(js));
    CHECK(j.is_array());
    CHECK(j[0]["y"].size() == 10);
  }

  SUBCASE("residuals") {
    const fs::path out = root() / "res.csv";
    REQUIRE(cli("residuals --fit " + q(dir) + " --max-draws 50 --out " + q(out)).code == 0);
    const auto rows = numeric_rows(out);
    REQUIRE(rows.size() == 80);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][0] > rows[i - 1][0]);
    for (const auto& r : rows) {
      CHECK(r[2] <= r[1]);
      CHECK(r[1] <= r[3]);
    }
    const fs::path js = root() / "res.json";
    REQUIRE(cli("residuals --fit " + q(dir) + " --plugin --format json --out " + q(js)).code == 0);
    const Json j = Json::parse(slurp(js));
    CHECK(j["plugin"] == true);
    CHECK(j["ks"]["p_value"].get<double>() >= 0.0);
    CHECK(j["ks"]["p_value"].get<double>() <= 1.0);
    CHECK(j["observation_mean"].size() == 80);
  }

  SUBCASE("diagnose") {
    const fs::path out = root() / "diag.csv";
    REQUIRE(cli("diagnose --fit " + q(dir) + " --out " + q(out)).code == 0);
    CHECK(slurp(out) == slurp(dir / "summary.csv"));
  }

  SUBCASE("a corrupted chain header is a data error") {
    const fs::path copy = root() / "fit_corrupt";
    fs::remove_all(copy);
    fs::copy(dir, copy);
    std::string chain = slurp(copy / "chain_2.csv");
    chain.replace(0, chain.find(','), "beta.bogus");
    spit(copy / "chain_2.csv", chain);
    const Outcome o = cli("diagnose --fit " + q(copy) + " --out " + q(root() / "d2.csv"));
    CHECK(o.code == 3);
    CHECK_FALSE(o.err.empty());
  }
}

TEST_CASE("mc-study resumes from finished replicates") {
  const fs::path out = root() / "mc";
  const std::string args = "mc-study --scenario 1 --n 40 60 --reps 3 --seed 5 --draws 60 "
                           "--burn-in 30 --chains 1 --n-x 4 --out " + q(out);
  REQUIRE(cli(args).code == 0);
  const fs::path victim = out / "n_60" / "replicate_0001.csv";
  REQUIRE(fs::exists(victim));
  const std::string before = slurp(victim);
  const std::string table = slurp(out / "replicates.csv");
  const std::string agg = slurp(out / "aggregate.json");
  fs::remove(victim);
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(victim) == before);
  CHECK(slurp(out / "replicates.csv") == table);
  CHECK(slurp(out / "aggregate.json") == agg);

  const egpd::CsvTable t = egpd::read_csv(out / "replicates.csv");
  CHECK(t.header[0] == "n");
  CHECK(t.header[1] == "replicate");
  CHECK(t.header[3] == "mise");
  REQUIRE(t.rows.size() == 6);
  const Json j = Json::parse(agg);
  REQUIRE(j["results"].size() == 2);
  for (std::size_t g = 0; g < 2; ++g) {
    const Json& res = j["results"][g];
    const double n = res["n"].get<double>();
    std::vector<double> mise, first;
    for (const auto& r : t.rows) {
      if (r[0] == n && r[2] == 1.0) {
        mise.push_back(r[3]);
        first.push_back(r[4]);
      }
    }
    CHECK(res["failures"] == 3 - mise.size());
    CHECK(res["mise"]["median"].get<double>() == oracle::sample_quantile(mise, 0.5));
    CHECK(res["mise"]["q25"].get<double>() == oracle::sample_quantile(mise, 0.25));
    CHECK(res["coefficients"][0]["name"] == t.header[4]);
    CHECK(res["coefficients"][0]["median"].get<double>() == oracle::sample_quantile(first, 0.5));
    CHECK(res["coefficients"][0]["truth"] == 0.3);
  }
}
