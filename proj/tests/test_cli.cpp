#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mlta/data.hpp"
#include "mlta/serialize.hpp"
#include "mlta/simulate.hpp"

namespace fs = std::filesystem;
using namespace mlta;

namespace {

std::string cli_path() {
  const char* p = std::getenv("MLTA_CLI");
  REQUIRE_MESSAGE(p != nullptr, "MLTA_CLI must point at the mlta binary");
  return p;
}

struct RunOutcome {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunOutcome run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      cli_path() + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunOutcome r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), ("missing file: " + p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           fs::path("mlta_cli_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

Parameters demo_params() {
  Parameters p;
  p.spec = ModelSpec{2, 0, false}.normalized();
  p.eta.resize(2);
  p.eta << 0.6, 0.4;
  p.intercepts.resize(2, 6);
  p.intercepts << 1.2, 0.8, -1.5, -1.9, 0.3, -0.7,
                 -1.4, -1.8, 1.1, 0.9, -0.2, 0.6;
  p.slopes.assign(2, Eigen::MatrixXd(6, 0));
  return p;
}

}  // namespace

TEST_CASE("simulate writes the same network the library samples") {
  TempDir tmp;
  const fs::path params = tmp.path / "params.json";
  write_json_file(params_to_json(demo_params()), params.string());

  const fs::path out = tmp.path / "sim";
  RunOutcome r = run_cli("simulate --params " + params.string() +
                             " --n 40 --seed 9 --out " + out.string(),
                         tmp.path);
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(out / "network.csv"));
  REQUIRE(fs::exists(out / "truth.json"));
  REQUIRE(fs::exists(out / "manifest.json"));

  IncidenceMatrix cli_m = load_matrix((out / "network.csv").string());
  SyntheticSample direct = sample_network(demo_params(), 40, 9);
  CHECK(cli_m.cells == direct.matrix.cells);
  CHECK(cli_m.sender_labels == direct.matrix.sender_labels);

  const nlohmann::json truth = read_json_file((out / "truth.json").string());
  REQUIRE(truth.contains("groups"));
  CHECK(truth.at("groups").size() == 40);
  // artifact groups are 1-based
  int lo = 99;
  for (const auto& g : truth.at("groups")) lo = std::min(lo, g.get<int>());
  CHECK(lo >= 1);
}

TEST_CASE("fit emits artifacts and a loadable fit.json") {
  TempDir tmp;
  const fs::path params = tmp.path / "params.json";
  write_json_file(params_to_json(demo_params()), params.string());
  const fs::path sim = tmp.path / "sim";
  REQUIRE(run_cli("simulate --params " + params.string() + " --n 60 --seed 4 --out " +
                      sim.string(),
                  tmp.path)
              .exit_code == 0);

  const fs::path out = tmp.path / "fit";
  RunOutcome r = run_cli("fit --data " + (sim / "network.csv").string() +
                             " --groups 2 --dims 0 --starts 4 --seed 1 --out " +
                             out.string(),
                         tmp.path);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("fit G=2 D=0") == 0);
  for (const char* name : {"fit.json", "bound_trace.csv", "memberships.csv",
                           "manifest.json"})
    CHECK_MESSAGE(fs::exists(out / name), name);
  CHECK_FALSE(fs::exists(out / "traits.csv"));  // D = 0 has no traits

  const FitResult fr = fit_from_json(read_json_file((out / "fit.json").string()));
  CHECK(fr.params.n_groups() == 2);
  CHECK(fr.params.n_receivers() == 6);
  CHECK_NOTHROW(fr.params.validate());
  CHECK(fr.converged);

  // memberships.csv: header plus one row per sender
  std::istringstream mem(read_file(out / "memberships.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(mem, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 61);
}

TEST_CASE("select sweeps the grid and reports the winner") {
  TempDir tmp;
  const fs::path params = tmp.path / "params.json";
  write_json_file(params_to_json(demo_params()), params.string());
  const fs::path sim = tmp.path / "sim";
  REQUIRE(run_cli("simulate --params " + params.string() + " --n 80 --seed 2 --out " +
                      sim.string(),
                  tmp.path)
              .exit_code == 0);

  const fs::path out = tmp.path / "sel";
  RunOutcome r = run_cli("select --data " + (sim / "network.csv").string() +
                             " --groups 1-2 --dims 0 --starts 3 --seed 1 --out " +
                             out.string(),
                         tmp.path);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("G=") == 0);
  for (const char* name :
       {"selection.csv", "selection.json", "fit.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(out / name), name);

  const nlohmann::json sel = read_json_file((out / "selection.json").string());
  REQUIRE(sel.contains("records"));
  CHECK(sel.at("records").size() == 2);
  REQUIRE(sel.contains("winner"));
}

TEST_CASE("report derives posthoc tables; jackknife needs data") {
  TempDir tmp;
  const fs::path params = tmp.path / "params.json";
  write_json_file(params_to_json(demo_params()), params.string());
  const fs::path sim = tmp.path / "sim";
  REQUIRE(run_cli("simulate --params " + params.string() + " --n 50 --seed 6 --out " +
                      sim.string(),
                  tmp.path)
              .exit_code == 0);
  const fs::path fit_dir = tmp.path / "fit";
  REQUIRE(run_cli("fit --data " + (sim / "network.csv").string() +
                      " --groups 2 --dims 0 --starts 3 --out " + fit_dir.string(),
                  tmp.path)
              .exit_code == 0);

  const fs::path out = tmp.path / "rep";
  RunOutcome r = run_cli("report --fit " + (fit_dir / "fit.json").string() +
                             " --out " + out.string(),
                         tmp.path);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "loglift.csv"));
  CHECK(fs::exists(out / "median_prob.csv"));
  CHECK_FALSE(fs::exists(out / "dependence.csv"));  // needs D >= 1
  CHECK_FALSE(fs::exists(out / "se.csv"));          // no --jackknife

  // --jackknife without --data is a usage error
  RunOutcome bad = run_cli("report --fit " + (fit_dir / "fit.json").string() +
                               " --jackknife --out " + (tmp.path / "rep2").string(),
                           tmp.path);
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("--data") != std::string::npos);

  // with data, se.csv appears
  RunOutcome jk = run_cli("report --fit " + (fit_dir / "fit.json").string() +
                              " --data " + (sim / "network.csv").string() +
                              " --jackknife --max-iter 2000 --out " +
                              (tmp.path / "rep3").string(),
                          tmp.path);
  CHECK(jk.exit_code == 0);
  CHECK(fs::exists(tmp.path / "rep3" / "se.csv"));
}

TEST_CASE("usage and data errors exit with code 1") {
  TempDir tmp;
  CHECK(run_cli("fit --groups 2 --dims 0", tmp.path).exit_code == 1);
  CHECK(run_cli("fit --data /nonexistent.csv --groups 2 --dims 0", tmp.path)
            .exit_code == 1);
  CHECK(run_cli("report", tmp.path).exit_code == 1);
  CHECK(run_cli("simulate --n 5", tmp.path).exit_code == 1);
  // malformed range
  const fs::path csv = tmp.path / "m.csv";
  std::ofstream(csv) << "1,0\n0,1\n1,1\n0,0\n";
  CHECK(run_cli("select --data " + csv.string() + " --groups 2-1 --dims 0", tmp.path)
            .exit_code == 1);
  // unknown flags are rejected by the parser with a nonzero code
  CHECK(run_cli("fit --data " + csv.string() + " --bogus", tmp.path).exit_code != 0);
}

TEST_CASE("rerunning a manifest reproduces artifacts byte for byte") {
  TempDir tmp;
  const fs::path params = tmp.path / "params.json";
  write_json_file(params_to_json(demo_params()), params.string());
  const fs::path sim = tmp.path / "sim";
  REQUIRE(run_cli("simulate --params " + params.string() + " --n 45 --seed 12 --out " +
                      sim.string(),
                  tmp.path)
              .exit_code == 0);

  const fs::path a = tmp.path / "a";
  REQUIRE(run_cli("fit --data " + (sim / "network.csv").string() +
                      " --groups 2 --dims 0 --starts 4 --seed 3 --out " + a.string(),
                  tmp.path)
              .exit_code == 0);

  // replay the manifest into a fresh directory; explicit --out wins over the
  // recorded one, everything else comes from the manifest
  const fs::path b = tmp.path / "b";
  REQUIRE(run_cli("fit --config " + (a / "manifest.json").string() + " --out " +
                      b.string(),
                  tmp.path)
              .exit_code == 0);

  for (const char* name : {"fit.json", "bound_trace.csv", "memberships.csv"})
    CHECK_MESSAGE(read_file(a / name) == read_file(b / name), name);
}
