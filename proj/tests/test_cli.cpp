#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"

using namespace cqad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("cqad_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cqad_run");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main_entry(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kFockSpec =
    "kind = wigner\n"
    "prep.target = fock\n"
    "prep.fock_number = 1\n"
    "noise = none\n"
    "phonon_dim = 8\n"
    "sweep.re = linspace(-1, 1, 5)\n"
    "sweep.im = -0.5, 0, 0.5\n";

}  // namespace

TEST_CASE("grid and quantity parsing") {
  auto g = parse_grid("linspace(-2, 2, 5)");
  REQUIRE(g.size() == 5);
  CHECK(g[1] == -1.0);
  CHECK(parse_grid("1us, 2us")[1] == doctest::Approx(2e-6));
  CHECK_THROWS(parse_grid("linspace(1, 2)"));
  CHECK_THROWS(parse_grid(""));
}

TEST_CASE("experiment spec diagnostics") {
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return load_experiment(KeyValueDocument::parse(in, "x.spec"), SystemParams{});
  };
  auto message = [&](const std::string& text) {
    try {
      load(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("kind = teleport\n").find("x.spec:1: field 'kind'") != std::string::npos);
  CHECK(message("kind = wigner\nsweep.re = 0\n").find("sweep.im") != std::string::npos);
  CHECK(message("kind = t1\nsweep.delay = 1,2,3\n").find("x.spec:2: field 'sweep.delay'") != std::string::npos);
  CHECK(message("kind = chi_scan\n\nprobe.amplitude = 3k\n").find("x.spec:3") != std::string::npos);
  CHECK(message("kind = fock_prep_check\nprep.target = fock\nprep.fock_number = 5\nprep.method = swap_sequence\n")
            .find("prep.method") != std::string::npos);
  CHECK(message("kind = wigner\nsweep.re = linspace(0, 1)\nsweep.im = 0\n").find("sweep.re") != std::string::npos);

  const auto spec = load("kind = spectroscopy\nprep.target = coherent\nprep.beta = 1.2\ndetuning = coherent\n");
  CHECK(spec.kind == ExperimentKind::spectroscopy);
  CHECK(spec.detuning.value() == SystemParams{}.delta_coherent);
  CHECK(std::abs(spec.preparation.beta - cplx(1.2, 0.0)) < 1e-15);
}

TEST_CASE("run writes deterministic artifacts") {
  TempDir dir("run");
  const auto spec = dir.write("w.spec", kFockSpec);
  REQUIRE(invoke({"run", "--quiet", "--experiment", spec.string(), "--out", (dir.path / "a").string()}) == 0);
  REQUIRE(invoke({"run", "--quiet", "--jobs", "3", "--paper-defaults", "--experiment", spec.string(), "--out",
                  (dir.path / "b").string()}) == 0);
  for (const char* f : {"results.csv", "wigner.csv", "fit.json", "summary.json"}) CHECK(fs::exists(dir.path / "a" / f));

  const std::string csv = slurp(dir.path / "a" / "wigner.csv");
  CHECK(csv.rfind("beta_re,beta_im,w\n# params_sha256=", 0) == 0);
  CHECK(slurp(dir.path / "a" / "wigner.csv") == slurp(dir.path / "b" / "wigner.csv"));
  const auto a = nlohmann::json::parse(slurp(dir.path / "a" / "summary.json"));
  const auto b = nlohmann::json::parse(slurp(dir.path / "b" / "summary.json"));
  CHECK(a["metrics"] == b["metrics"]);
  CHECK(a["metrics"]["w_origin"].get<double>() < -0.55);
  CHECK(a["params_sha256"].get<std::string>().size() == 64);

  // Same run twice: byte-identical summary.
  REQUIRE(invoke({"run", "--quiet", "--experiment", spec.string(), "--out", (dir.path / "c").string()}) == 0);
  CHECK(slurp(dir.path / "a" / "summary.json") == slurp(dir.path / "c" / "summary.json"));
}

TEST_CASE("chi scan artifact") {
  TempDir dir("chi");
  const auto spec = dir.write("chi.spec", "kind = chi_scan\n");
  REQUIRE(invoke({"run", "--quiet", "--experiment", spec.string(), "--out", (dir.path / "o").string()}) == 0);
  std::ifstream in(dir.path / "o" / "chi.csv");
  std::string header, comment, line;
  std::getline(in, header);
  std::getline(in, comment);
  CHECK(header == "delta,n,shift_numeric,chi_analytic_full,chi_analytic_approx");
  CHECK(comment.rfind("# params_sha256=", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 16);  // four detunings, n = 0..3
  const auto s = nlohmann::json::parse(slurp(dir.path / "o" / "summary.json"));
  for (const char* p : {"fock", "coherent", "ramsey", "rest"})
    CHECK(s["metrics"][std::string("monotonic_") + p].get<double>() == 1.0);
}

TEST_CASE("failures leave no outputs") {
  TempDir dir("fail");
  const auto bad_kind = dir.write("bad.spec", "kind = teleport\n");
  const auto out = dir.path / "o";
  CHECK(invoke({"run", "--quiet", "--experiment", bad_kind.string(), "--out", out.string()}) == 2);
  CHECK_FALSE(fs::exists(out));
  const auto missing = dir.write("m.spec", "kind = wigner\nsweep.re = 0\n");
  CHECK(invoke({"run", "--quiet", "--experiment", missing.string(), "--out", out.string()}) == 2);
  CHECK(invoke({"run", "--quiet", "--experiment", (dir.path / "nope.spec").string(), "--out", out.string()}) == 2);
  CHECK(invoke({"run", "--quiet", "--jobs", "0", "--experiment", bad_kind.string()}) == 2);
  CHECK(invoke({"run", "--bogus-flag"}) == 2);
  const auto params = dir.write("p.txt", "g_lg00 = 260k\n");
  const auto good = dir.write("w.spec", kFockSpec);
  CHECK(invoke({"run", "--quiet", "--paper-defaults", "--params", params.string(), "--experiment", good.string(),
                "--out", out.string()}) == 2);
  // Beyond the truncation guard: validation error, still nothing written.
  const auto wide = dir.write("wide.spec", "kind = wigner\nphonon_dim = 6\nsweep.re = 0, 3\nsweep.im = 0\n");
  CHECK(invoke({"run", "--quiet", "--experiment", wide.string(), "--out", out.string()}) == 2);
  CHECK_FALSE(fs::exists(out));
  // Out directory path blocked by a file.
  const auto blocker = dir.write("blocker", "x");
  CHECK(invoke({"run", "--quiet", "--experiment", good.string(), "--out", (blocker / "sub").string()}) == 2);
}

TEST_CASE("compare summaries") {
  nlohmann::json ref = {{"kind", "chi_scan"}, {"metrics", {{"chi", -70.9e3}, {"spread", 0.06}}}};
  KeyValueDocument none;
  CHECK(cli::compare_summaries(ref, ref, none).pass);

  auto off = ref;
  off["metrics"]["chi"] = -70.9e3 * 1.1;
  std::istringstream tol_text("chi = 5%\n");
  const auto tol = KeyValueDocument::parse(tol_text, "tol");
  auto rep = cli::compare_summaries(ref, off, tol);
  CHECK_FALSE(rep.pass);
  for (const auto& c : rep.checks) CHECK(c.pass == (c.metric != "chi"));

  auto missing = ref;
  missing["metrics"].erase("spread");
  rep = cli::compare_summaries(ref, missing, none);
  CHECK_FALSE(rep.pass);
  bool named = false;
  for (const auto& c : rep.checks) named |= c.metric == "spread" && c.reason == "missing metric";
  CHECK(named);

  auto other = ref;
  other["kind"] = "wigner";
  CHECK_THROWS_AS(cli::compare_summaries(ref, other, none), ValidationError);

  std::istringstream abs_text("* = 1e-3\n");
  const auto loose = KeyValueDocument::parse(abs_text, "tol");
  auto near = ref;
  near["metrics"]["spread"] = 0.0605;
  CHECK(cli::compare_summaries(ref, near, loose).pass);

  TempDir dir("cmp");
  const auto r = dir.write("r.json", ref.dump());
  const auto o = dir.write("o.json", off.dump());
  const auto k = dir.write("k.json", other.dump());
  const auto t = dir.write("t.txt", "chi = 5%\n");
  CHECK(invoke({"compare", "--quiet", r.string(), r.string()}) == 0);
  CHECK(invoke({"compare", "--quiet", "--tolerances", t.string(), r.string(), o.string()}) == 4);
  CHECK(invoke({"compare", "--quiet", r.string(), k.string()}) == 2);
}
