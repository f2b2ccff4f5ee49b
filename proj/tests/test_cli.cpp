#include "common.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace latticediff;
namespace fs = std::filesystem;

namespace {
struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "latticediff");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("latticediff_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};
}  // namespace

TEST_CASE("validate exit codes", "[cli]") {
  const auto good = invoke({"validate", "--config", testing::config_path("good.json")});
  CHECK(good.code == 0);
  CHECK(nlohmann::json::parse(good.out)["pass"] == true);

  const auto bad = invoke({"validate", "--config", testing::config_path("w_identity.json")});
  CHECK(bad.code == 2);
  const auto e = nlohmann::json::parse(bad.err);
  CHECK(e["error"] == "config");
  CHECK(e["failures"] == std::vector<std::string>{"fgr_connected"});
}

TEST_CASE("usage errors are JSON on stderr with exit 2", "[cli]") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"bogus"}, {"validate"}, {"validate", "--config", "/nonexistent.json"}, {"spectrum", "--pmax", "x"}}) {
    const auto r = invoke(args);
    CHECK(r.code == 2);
    CHECK(nlohmann::json::parse(r.err)["error"] == "usage");
  }
  const auto pre = invoke({"diagrams", "--check-d1", "--k", "2*exp(-t)", "--samples", "10"});
  CHECK(pre.code == 2);
  CHECK(nlohmann::json::parse(pre.err)["kind"] == "precondition-violated");
  const auto help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("outputs carry the manifest hash", "[cli]") {
  TempDir dir("cli_manifest");
  const auto r = invoke({"rates", "--config", testing::config_path("ref1d.json"), "--out", dir / "rates.json",
                         "--dump-matrix", "p=0"});
  REQUIRE(r.code == 0);
  const auto rates = nlohmann::json::parse(slurp(dir / "rates.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "rates.json.manifest.json"));
  const std::string hash = manifest["manifest_hash"];
  CHECK(rates["manifest_hash"] == hash);
  CHECK(slurp(dir / "rates.json.matrix.csv").rfind("# manifest " + hash + "\nrow,col,re,im\n", 0) == 0);
  CHECK(manifest["outputs"].size() == 2);
  CHECK(manifest["seed"] == 20240611);
  CHECK(rates["detailed_balance_max_rel"].get<double>() < 1e-12);
}

TEST_CASE("simulate output is byte-identical across runs and thread counts", "[cli]") {
  TempDir dir("cli_repro");
  const std::string cfg = testing::config_path("ref1d.json");
  auto sim = [&](const std::string& threads, const std::string& seed, const std::string& name) {
    const auto r = invoke({"--threads", threads, "--seed", seed, "simulate", "--config", cfg, "--traj", "500", "--tfinal",
                           "40", "--probe", "0.2", "--out", dir / name, "--dump-paths", dir / (name + ".paths.csv"),
                           "--paths", "2"});
    REQUIRE(r.code == 0);
    return slurp(dir / name) + slurp(dir / (name + ".paths.csv"));
  };
  const std::string a = sim("1", "5", "a.json");
  CHECK(a == sim("1", "5", "b.json"));
  CHECK(a == sim("3", "5", "c.json"));
  CHECK(a != sim("1", "6", "d.json"));
}

TEST_CASE("diagram listing", "[cli]") {
  const auto r = invoke({"diagrams", "--n", "2", "--list"});
  CHECK(r.code == 0);
  CHECK(r.out == "(1 2)(3 4) reducible\n(1 3)(2 4) minimally_irreducible\n(1 4)(2 3) irreducible\n");
}

TEST_CASE("psi writes t, re, im rows", "[cli]") {
  TempDir dir("cli_psi");
  const auto r = invoke({"psi", "--config", testing::config_path("ref1d.json"), "--x", "2", "--tmax", "1", "--dt", "0.5",
                         "--out", dir / "psi.csv"});
  REQUIRE(r.code == 0);
  std::istringstream lines(slurp(dir / "psi.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[1] == "t,re,im");
  CHECK(rows[2].rfind("0,", 0) == 0);
  CHECK(rows[4].rfind("1,", 0) == 0);
}
