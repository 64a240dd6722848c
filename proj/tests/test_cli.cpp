#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("callias_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

// Runs the CLI with the given arguments; stderr goes to err.
int cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string("\"") + CALLIAS_CLI + "\" " + args + " 2> \"" + err.string() + "\"";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const std::string kDiagOps = R"(
[operators.a0]
slice = { kind = "points", count = 1 }
potential = { kind = "diagonal", values = [1.0, -1.0] }

[operators.a1]
slice = { kind = "points", count = 1 }
potential = { kind = "diagonal", values = [1.0, 1.0] }

[cylinders.crossing]
start = "a0"
end = "a1"
intervals = 12
)";

}  // namespace

TEST_CASE("spectrum scenario writes the two eigenvalues") {
  const fs::path d = scratch("spectrum");
  CHECK(cli("run " + std::string(CALLIAS_CONFIGS) + "/spectrum.toml --out " + (d / "out").string(), d / "err") == 0);
  CHECK(slurp(d / "out" / "spectrum_diag_mu.csv") == "index,lambda\n0,-0.75\n1,0.75\n");
  const Json m = Json::parse(slurp(d / "out" / "manifest.json"));
  CHECK(m["scenario"] == "spectrum");
  CHECK(m["exit_code"] == 0);
  CHECK(m["config_sha256"].get<std::string>().size() == 64);
  CHECK_FALSE(m["provenance"].empty());
  fs::remove_all(d);
}

TEST_CASE("bundled eta suite passes") {
  const fs::path d = scratch("suite");
  CHECK(cli("run --config " + std::string(CALLIAS_CONFIGS) + "/eta_suite.toml --out " + (d / "out").string(),
            d / "err") == 0);
  const Json s = Json::parse(slurp(d / "out" / "suite.json"));
  CHECK(s["all_passed"] == true);
  CHECK(s["checks"].size() == 17);
  for (const auto& c : s["checks"]) CHECK(c["passed"] == true);
  fs::remove_all(d);
}

TEST_CASE("schema errors exit 2 and leave nothing behind") {
  const fs::path d = scratch("schema");
  const fs::path out = d / "out";
  write(d / "broken.toml", "scenario = \"spectrum\"\n[operators.x\n");
  CHECK(cli("run " + (d / "broken.toml").string() + " --out " + out.string(), d / "err") == 2);
  CHECK_FALSE(fs::exists(out));

  write(d / "unknown.toml", "scenario = \"spectrum\"\ncolour = 3\n" + kDiagOps + "[spectrum]\noperators = [\"a0\"]\n");
  CHECK(cli("run " + (d / "unknown.toml").string() + " --out " + out.string(), d / "err") == 2);
  CHECK(slurp(d / "err").find("colour") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  write(d / "badref.toml", "scenario = \"spectrum\"\n" + kDiagOps + "[spectrum]\noperators = [\"nope\"]\n");
  CHECK(cli("run " + (d / "badref.toml").string() + " --out " + out.string(), d / "err") == 2);
  CHECK_FALSE(fs::exists(out));

  // usage errors
  CHECK(cli("run", d / "err") == 2);
  CHECK(cli("run a.toml --config b.toml", d / "err") == 2);
  CHECK(cli("run " + (d / "badref.toml").string() + " --workers 0", d / "err") == 2);
  fs::remove_all(d);
}

TEST_CASE("cut collision exits 3 and suggests a safe cut") {
  const fs::path d = scratch("collision");
  write(d / "c.toml", "scenario = \"index\"\n" + kDiagOps +
                          "[index]\ncylinder = \"crossing\"\nstart_condition = { kind = \"aps\", cut = 1.0 }\n");
  CHECK(cli("run " + (d / "c.toml").string() + " --out " + (d / "out").string(), d / "err") == 3);
  const std::string err = slurp(d / "err");
  CHECK(err.find("nearest safe cut") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "out"));

  write(d / "ok.toml", "scenario = \"index\"\n" + kDiagOps +
                           "[index]\ncylinder = \"crossing\"\nstart_condition = { kind = \"aps\", cut = 0.5 }\n");
  CHECK(cli("run " + (d / "ok.toml").string() + " --out " + (d / "out").string(), d / "err") == 0);
  const Json r = Json::parse(slurp(d / "out" / "index.json"));
  CHECK(r.dump().find("\"consistent\":true") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("failing verdicts exit 1") {
  const fs::path d = scratch("fail");
  write(d / "f.toml", "scenario = \"suite\"\n" + kDiagOps +
                          "[suite]\nchecks = [\n"
                          "  { name = \"right\", kind = \"eta_value\", operators = [\"a0\", \"a1\"], expected = 2 },\n"
                          "  { name = \"wrong\", kind = \"eta_value\", operators = [\"a0\", \"a1\"], expected = 4 },\n"
                          "]\n");
  CHECK(cli("run " + (d / "f.toml").string() + " --out " + (d / "out").string(), d / "err") == 1);
  const Json s = Json::parse(slurp(d / "out" / "suite.json"));
  CHECK(s["all_passed"] == false);
  CHECK(s["checks"][0]["passed"] == true);
  CHECK(s["checks"][1]["passed"] == false);
  // selecting only the passing check
  CHECK(cli("run " + (d / "f.toml").string() + " --suite right --out " + (d / "out2").string(), d / "err") == 0);
  CHECK(Json::parse(slurp(d / "out2" / "suite.json"))["checks"].size() == 1);
  CHECK(cli("run " + (d / "f.toml").string() + " --suite missing --out " + (d / "out3").string(), d / "err") == 2);
  fs::remove_all(d);
}

TEST_CASE("spectral store is reused across runs") {
  const fs::path d = scratch("cache");
  const std::string base = "run " + std::string(CALLIAS_CONFIGS) + "/eta_suite.toml --cache-dir " +
                           (d / "store").string() + " --out ";
  CHECK(cli(base + (d / "one").string(), d / "err") == 0);
  CHECK(cli(base + (d / "two").string(), d / "err") == 0);
  const Json m1 = Json::parse(slurp(d / "one" / "manifest.json"));
  const Json m2 = Json::parse(slurp(d / "two" / "manifest.json"));
  CHECK(m1["cache"]["solver_calls"].get<int>() > 0);
  CHECK(m2["cache"]["solver_calls"] == 0);
  CHECK(m2["cache"]["cache_hits"].get<int>() > 0);
  CHECK(slurp(d / "one" / "suite.json") == slurp(d / "two" / "suite.json"));
  fs::remove_all(d);
}

TEST_CASE("unwritable output exits 4") {
  const fs::path d = scratch("io");
  write(d / "file", "x");
  CHECK(cli("run " + std::string(CALLIAS_CONFIGS) + "/spectrum.toml --out " + (d / "file" / "sub").string(),
            d / "err") == 4);
  fs::remove_all(d);
}
