#include "doctest.h"

#include "json.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = POPADJ_CLI;

int run(const std::string& args, const std::string& out = "/dev/null") {
  const std::string cmd = kCli + " " + args + " > " + out + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("popadj_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("gen-data") {
  const fs::path dir = scratch("gen");
  write(dir / "dgp.cfg", "n = 300\nmu = 0.45\nbc.mu = 0.6\n");
  CHECK(run("gen-data --config " + (dir / "dgp.cfg").string() + " --out " + (dir / "a").string() + " --seed 9") == 0);
  CHECK(fs::exists(dir / "a" / "ipd_ac.csv"));
  CHECK(fs::exists(dir / "a" / "ald_bc.json"));
  CHECK(run("gen-data --config " + (dir / "dgp.cfg").string() + " --out " + (dir / "b").string() + " --seed 9") == 0);
  CHECK(slurp(dir / "a" / "ipd_ac.csv") == slurp(dir / "b" / "ipd_ac.csv"));
  CHECK(slurp(dir / "a" / "ald_bc.json") == slurp(dir / "b" / "ald_bc.json"));

  write(dir / "bad.cfg", "n = 300\nwidgets = 4\n");
  CHECK(run("gen-data --config " + (dir / "bad.cfg").string() + " --out " + (dir / "c").string(),
            (dir / "err.txt").string()) == 2);
  CHECK(slurp(dir / "err.txt").find("widgets") != std::string::npos);
  CHECK(run("gen-data --config " + (dir / "missing.cfg").string()) == 2);
}

TEST_CASE("analyze") {
  const fs::path dir = scratch("analyze");
  // A 2x2 table with a = 10 of 100 active events and c = 20 of 100 control
  // events in both trials; one covariate.
  std::ostringstream ipd;
  ipd << "x1,z,y\n";
  for (int i = 0; i < 200; ++i) {
    const int z = i < 100 ? 1 : 0;
    const int k = z ? i : i - 100;
    const int y = z ? (k < 10) : (k < 20);
    ipd << (k % 10) * 0.1 << "," << z << "," << y << "\n";
  }
  write(dir / "ipd.csv", ipd.str());
  write(dir / "ald.json",
        R"({"cov_means": [0.45], "cov_sds": [0.29], "em_idx": [1], "events_active": 20, "n_active": 100,
            "events_control": 10, "n_control": 100, "corr": "from-IPD"})");
  const std::string io = "--ipd " + (dir / "ipd.csv").string() + " --ald " + (dir / "ald.json").string();

  CHECK(run("analyze " + io + " --method bucher --out " + (dir / "b.json").string()) == 0);
  const auto b = nlohmann::json::parse(slurp(dir / "b.json"));
  CHECK(b["estimate"].get<double>() == doctest::Approx(-2 * 0.8109302162163288).epsilon(1e-9));
  CHECK(b["variance"].get<double>() == doctest::Approx(2 * 0.17361111111111113).epsilon(1e-9));
  CHECK(b["method"] == "bucher");

  CHECK(run("analyze " + io + " --method stc --out " + (dir / "s.json").string()) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "s.json"))["estimand"] == "conditional");

  CHECK(run("analyze " + io + " --method gcomp-ml --n-boot 50 --n-star 1000 --draws-out " +
            (dir / "d.csv").string() + " --out " + (dir / "g.json").string()) == 0);
  const auto g = nlohmann::json::parse(slurp(dir / "g.json"));
  CHECK(g["draws_path"] == (dir / "d.csv").string());
  CHECK(slurp(dir / "d.csv").rfind("draw,delta", 0) == 0);

  CHECK(run("analyze " + io + " --method magic", (dir / "err.txt").string()) == 2);
  CHECK(slurp(dir / "err.txt").find("--method") != std::string::npos);
  CHECK(run("analyze --method maic") == 2);

  // Target mean outside the observed range: infeasible weights.
  write(dir / "far.json",
        R"({"cov_means": [3.0], "cov_sds": [0.29], "em_idx": [1], "events_active": 20, "n_active": 100,
            "events_control": 10, "n_control": 100, "corr": "from-IPD"})");
  CHECK(run("analyze --ipd " + (dir / "ipd.csv").string() + " --ald " + (dir / "far.json").string() +
            " --method maic", (dir / "err2.txt").string()) == 3);
  CHECK(slurp(dir / "err2.txt").find("outside the observed range") != std::string::npos);

  // All-zero control events: numerical failure.
  write(dir / "zero.json",
        R"({"cov_means": [0.45], "cov_sds": [0.29], "em_idx": [1], "events_active": 20, "n_active": 100,
            "events_control": 0, "n_control": 100, "corr": "from-IPD"})");
  CHECK(run("analyze " + ("--ipd " + (dir / "ipd.csv").string() + " --ald " + (dir / "zero.json").string()) +
            " --method bucher") == 4);
}

TEST_CASE("simstudy smoke grid") {
  const fs::path dir = scratch("sim");
  write(dir / "grid.cfg", "n_replicates = 50\n");
  CHECK(run("simstudy --config " + (dir / "grid.cfg").string() + " --out " + (dir / "out").string() +
            " --n-boot 100 --mcmc-draws 1000 --n-star 1000 --seed 5") == 0);
  int csvs = 0;
  for (const auto& e : fs::directory_iterator(dir / "out")) {
    const auto name = e.path().filename().string();
    if (name.rfind("N", 0) == 0 && name.find("_replicates") == std::string::npos && e.path().extension() == ".csv")
      ++csvs;
  }
  CHECK(csvs == 9);
  const std::string report = slurp(dir / "out" / "report.csv");
  CHECK(report.find("nan") == std::string::npos);
  CHECK(report.find("inf") == std::string::npos);
  CHECK(std::count(report.begin(), report.end(), '\n') == 1 + 9 * 5);
}

TEST_CASE("simstudy output is independent of the worker count") {
  const fs::path dir = scratch("workers");
  write(dir / "one.cfg", "grid.n_ac = 200\ngrid.mu_ac = 0.15\nn_replicates = 10\nmaic.n_boot = 50\n"
                         "gcomp_ml.n_boot = 50\ngcomp_bayes.draws = 400\ngcomp_bayes.warmup = 300\n");
  const std::string base = "simstudy --config " + (dir / "one.cfg").string() + " --n-star 1000 --seed 3";
  CHECK(run(base + " --workers 1 --out " + (dir / "w1").string()) == 0);
  CHECK(run(base + " --workers 8 --out " + (dir / "w8").string()) == 0);
  CHECK(slurp(dir / "w1" / "N200_mu0.15.csv") == slurp(dir / "w8" / "N200_mu0.15.csv"));
  CHECK(slurp(dir / "w1" / "N200_mu0.15_replicates.csv") == slurp(dir / "w8" / "N200_mu0.15_replicates.csv"));
}
