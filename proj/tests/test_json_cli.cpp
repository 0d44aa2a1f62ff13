#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "proxyaudit/cli.hpp"
#include "proxyaudit/error.hpp"
#include "proxyaudit/json_io.hpp"

using namespace proxyaudit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "proxyaudit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("proxyaudit_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return file(name);
  }
};

std::string read(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("spec and policy readers are strict") {
  const auto spec = spec_from_json(parse_json(R"({"id":"m","family":"logistic","outcome":"y","predictors":["a"]})", "t"));
  CHECK(spec.family == Family::logistic);
  CHECK(spec_from_json(to_json(spec)) == spec);
  CHECK_THROWS_AS(spec_from_json(parse_json(R"({"id":"m","family":"ols","outcome":"y","predictors":[],"x":1})", "t")),
                  InputError);
  CHECK_THROWS_AS(spec_from_json(parse_json(R"({"id":"m","family":"ols","outcome":"y","predictors":"a"})", "t")),
                  InputError);
  CHECK_THROWS_AS(parse_json("{", "broken"), InputError);

  const auto policy = policy_from_json(parse_json(R"({"band":0.01,"cap":0.04,"protected":["race"],"rule":"capped"})", "p"));
  CHECK(policy.equivalence_band == 0.01);
  CHECK(*policy.cap == 0.04);
  CHECK(*policy.rule == RuleKind::capped);
  CHECK(policy_from_json(to_json(policy)).protected_columns == policy.protected_columns);
  CHECK_THROWS_AS(policy_from_json(parse_json(R"({"bandwidth":0.01})", "p")), InputError);
  CHECK_THROWS_AS(policy_from_json(parse_json(R"({"cap":1.5})", "p")), InputError);
}

TEST_CASE("report JSON is deterministic and markdown derives from it") {
  Policy p;
  p.cap = 0.05;
  const std::vector<ProxyMeasurement> m = {{"a", 0.04}, {"b", 0.06}};
  const auto v1 = to_json(capped_rule(m, p)).dump();
  const auto v2 = to_json(capped_rule(m, p)).dump();
  CHECK(v1 == v2);
  const auto doc = wrap_report(to_json(capped_rule(m, p)), "2026-01-01T00:00:00Z");
  CHECK(doc.at("envelope").at("generated_at") == "2026-01-01T00:00:00Z");
  const auto md = render_markdown(doc);
  CHECK(md.find("lowest_over_cap") == std::string::npos);
  CHECK(md.find("cap") != std::string::npos);
}

TEST_CASE("cli: simulate, audit and screening exit codes") {
  TempDir tmp("audit");
  const auto prefix = tmp.file("marital");
  const auto sim = run({"simulate", "--scenario", "marital_lending", "--n", "2000", "--seed", "7", "--out", prefix});
  REQUIRE(sim.code == kExitClean);
  CHECK(fs::exists(prefix + ".csv"));
  CHECK(fs::exists(prefix + ".schema.json"));

  // Same seed, same bytes.
  const auto again = tmp.file("again");
  run({"simulate", "--scenario", "marital_lending", "--n", "2000", "--seed", "7", "--out", again});
  CHECK(read(prefix + ".csv") == read(again + ".csv"));

  const auto model = tmp.write(
      "proxies.json", R"({"id":"proxies","family":"logistic","outcome":"default","predictors":["name_change","joint_accounts"]})");
  const auto report = tmp.file("audit.json");
  const auto audit = run({"audit", "--data", prefix + ".csv", "--schema", prefix + ".schema.json", "--model", model,
                          "--protected", "marital_status", "--out", report});
  CHECK(audit.code == kExitFlagged);
  const auto doc = parse_json(read(report), "report");
  CHECK(doc.contains("envelope"));
  CHECK(doc.at("report").at("status") == "flags_found");
  CHECK(doc.at("report").at("fit").at("residuals").contains("median"));

  // Two runs differ only in the envelope.
  const auto report2 = tmp.file("audit2.json");
  run({"audit", "--data", prefix + ".csv", "--schema", prefix + ".schema.json", "--model", model, "--protected",
       "marital_status", "--out", report2});
  CHECK(parse_json(read(report2), "r").at("report") == doc.at("report"));

  const auto md = run({"audit", "--data", prefix + ".csv", "--schema", prefix + ".schema.json", "--model", model,
                       "--protected", "marital_status", "--format", "md"});
  CHECK(md.out.rfind("# proxyaudit audit", 0) == 0);
}

TEST_CASE("cli: input errors exit 2 and numerical failures exit 3") {
  TempDir tmp("errors");
  CHECK(run({"audit", "--data", tmp.file("missing.csv")}).code == kExitInput);
  CHECK(run({"frobnicate"}).code == kExitInput);
  CHECK(run({"simulate", "--scenario", "nowhere"}).code == kExitInput);

  const auto schema = tmp.write("s.schema.json",
                                R"({"columns":[{"name":"x","kind":"continuous","role":"predictor"},)"
                                R"({"name":"g","kind":"binary","role":"protected"},)"
                                R"({"name":"y","kind":"binary","role":"outcome"}]})");
  const auto data = tmp.write("s.csv", "x,g,y\n1,0,0\n2,1,0\n3,0,0\n4,1,1\n5,0,1\n6,1,1\n");
  const auto model = tmp.write("m.json", R"({"id":"m","family":"logistic","outcome":"y","predictors":["x"]})");
  const auto sep = run({"audit", "--data", data, "--schema", schema, "--model", model});
  CHECK(sep.code == kExitNumerical);
  CHECK(sep.err.find("separation") != std::string::npos);

  const auto bad = tmp.write("bad.csv", "x,g,y\n1,0,0\n2,7,0\n");
  const auto r = run({"audit", "--data", bad, "--schema", schema, "--model", model});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("row 2") != std::string::npos);
}

TEST_CASE("cli: commit is deterministic and compare reads measurements") {
  TempDir tmp("commit");
  const auto model = tmp.write("m.json", R"({"id":"m","family":"ols","outcome":"y","predictors":["b","a"]})");
  const auto first = run({"commit", "--model", model});
  const auto second = run({"commit", "--model", model, "--out", tmp.file("m.commit")});
  CHECK(first.code == kExitClean);
  CHECK(first.out == second.out);
  CHECK(first.out.size() == 65);
  CHECK(commitment_from_json(parse_json(read(tmp.file("m.commit")), "c")).digest + "\n" == first.out);

  const auto a = tmp.write("a.json", R"({"model_id":"a","semi_partial":0.04})");
  const auto b = tmp.write("b.json", R"({"model_id":"b","semi_partial":0.06})");
  const auto c = tmp.write("c.json", R"({"model_id":"c","semi_partial":0.03})");
  CHECK(run({"compare", "--model", a, "--model", b}).code == kExitFlagged);
  const auto clean = run({"compare", "--model", a, "--model", c});
  CHECK(clean.code == kExitClean);
  CHECK(parse_json(clean.out, "out").at("report").at("verdicts").at(0).at("winner") == "tie");
}

TEST_CASE("cli: competition over a submissions directory") {
  TempDir tmp("compete");
  const auto d = oracle::random_regression(5, 3, 300);
  const auto data = tmp.write("d.csv", d.to_csv());
  const auto schema = tmp.write("d.schema.json", d.schema().to_json());
  fs::create_directories(tmp.path / "subs");
  tmp.write("subs/alice.json", R"({"id":"a","family":"ols","outcome":"y","predictors":["x1","x2"]})");
  tmp.write("subs/bob.json", R"({"party":"bobco","id":"b","family":"ols","outcome":"y","predictors":["x1","b"]})");
  const auto args = std::vector<std::string>{"compete", "--data", data, "--schema", schema, "--submissions",
                                             tmp.file("subs"), "--protected", "g"};
  const auto ok = run(args);
  CHECK(ok.code == kExitClean);
  const auto doc = parse_json(ok.out, "out");
  const auto digest = doc.at("report").at("lockbox").at("digest").get<std::string>();

  auto pinned = args;
  pinned.insert(pinned.end(), {"--lockbox-digest", digest});
  CHECK(run(pinned).code == kExitClean);
  auto wrong = args;
  wrong.insert(wrong.end(), {"--lockbox-digest", std::string(64, 'f')});
  const auto tampered = run(wrong);
  CHECK(tampered.code == kExitInput);
  CHECK(tampered.err.find("lock-box tampered") != std::string::npos);

  tmp.write("subs/a.commit", std::string(64, '0'));
  const auto cheat = run(args);
  CHECK(cheat.code == kExitFlagged);
}
