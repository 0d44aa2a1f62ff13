#include "proxyaudit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "proxyaudit/competition.hpp"
#include "proxyaudit/digest.hpp"
#include "proxyaudit/error.hpp"
#include "proxyaudit/json_io.hpp"
#include "proxyaudit/proxy.hpp"
#include "proxyaudit/rules.hpp"
#include "proxyaudit/scenarios.hpp"

#ifndef PROXYAUDIT_VERSION
#define PROXYAUDIT_VERSION "unknown"
#endif

namespace proxyaudit {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 42;
constexpr double kDefaultLockboxFraction = 0.3;

struct Options {
  std::string data;
  std::string schema;
  std::vector<std::string> models;
  std::string policy;
  std::vector<std::string> protected_columns;
  double lockbox_fraction = kDefaultLockboxFraction;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  std::string format = "json";
  std::string scenario;
  Index n = 0;
  double noise = 0.0;
  double segregated_share = 0.0;
  std::string submissions;
  std::string lockbox_digest;

  CLI::Option* lockbox_fraction_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* n_opt = nullptr;
  CLI::Option* noise_opt = nullptr;
  CLI::Option* share_opt = nullptr;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed_opt && o.seed_opt->count() > 0) return o.seed;
  if (const char* env = std::getenv("PROXYAUDIT_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used, 10);
      if (used == std::string_view(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw InputError("PROXYAUDIT_SEED must be an unsigned integer, got '" + std::string(env) + "'");
  }
  return kDefaultSeed;
}

struct Inputs {
  Schema schema;
  Dataset data;
  Json digests;
};

Inputs load_data(const Options& o) {
  if (o.data.empty() || o.schema.empty()) throw InputError("--data and --schema are required");
  const auto schema_text = read_file(o.schema);
  const auto data_text = read_file(o.data);
  auto schema = Schema::from_json(schema_text);
  auto data = load_dataset(data_text, schema);
  Json digests = {{"data", sha256_hex(data_text)}, {"schema", sha256_hex(schema_text)}};
  return {std::move(schema), std::move(data), std::move(digests)};
}

Policy load_policy(const Options& o, const Schema* schema, Json& digests) {
  Policy p;
  if (!o.policy.empty()) {
    const auto text = read_file(o.policy);
    p = policy_from_json(parse_json(text, o.policy));
    digests["policy"] = sha256_hex(text);
  } else {
    digests["policy"] = nullptr;
  }
  if (!o.protected_columns.empty()) p.protected_columns = o.protected_columns;
  if (p.protected_columns.empty() && schema) p.protected_columns = schema->names_with_role(ColumnRole::protected_attribute);
  p.validate();
  return p;
}

struct Evaluation {
  std::optional<LockBoxSplit> split;
  std::optional<Dataset> train;
  std::optional<Dataset> test;

  const Dataset& train_or(const Dataset& d) const { return train ? *train : d; }
  const Dataset& eval_or(const Dataset& d) const { return test ? *test : d; }
};

Evaluation make_evaluation(const Options& o, const Dataset& d) {
  Evaluation e;
  if (o.lockbox_fraction_opt && o.lockbox_fraction_opt->count() > 0) {
    e.split = lockbox_split(d, o.lockbox_fraction, resolve_seed(o));
    e.train = d.subset(e.split->train_indices);
    e.test = d.subset(e.split->test_indices);
  }
  return e;
}

int emit(Json report, const Options& o, std::ostream& out) {
  const Json doc = wrap_report(std::move(report), utc_now());
  const std::string json_text = doc.dump(2) + "\n";
  const bool markdown = o.format == "md";
  if (!o.out.empty()) {
    write_file(o.out, json_text);
    if (markdown) write_file(fs::path(o.out).replace_extension(".md"), render_markdown(doc));
  } else {
    out << (markdown ? render_markdown(doc) : json_text);
  }
  return 0;
}

Json base_report(std::string_view command) {
  return {{"command", command}, {"tool_version", PROXYAUDIT_VERSION}};
}

Json residual_summary(const FittedModel& m, const Dataset& d) {
  // Response residuals y - yhat; descriptive only, no pass/fail verdict.
  const Eigen::VectorXd r = d.outcome() - predict(m, d);
  std::vector<double> v(r.data(), r.data() + r.size());
  std::sort(v.begin(), v.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  const double mean = r.mean();
  const double sd = std::sqrt((r.array() - mean).square().sum() / static_cast<double>(std::max<Index>(r.size() - 1, 1)));
  return {{"mean", mean},          {"sd", sd},          {"min", v.front()}, {"q25", quantile(0.25)},
          {"median", quantile(0.5)}, {"q75", quantile(0.75)}, {"max", v.back()}};
}

int cmd_audit(const Options& o, std::ostream& out) {
  if (o.models.size() != 1) throw InputError("audit takes exactly one --model");
  auto in = load_data(o);
  const auto& d = in.data;
  const auto model_text = read_file(o.models.front());
  const auto spec = spec_from_json(parse_json(model_text, o.models.front()));
  validate(spec, in.schema);
  in.digests["models"] = {{spec.id, sha256_hex(model_text)}};
  const auto policy = load_policy(o, &in.schema, in.digests);

  const auto ev = make_evaluation(o, d);
  const auto& train = ev.train_or(d);
  const auto& eval = ev.eval_or(d);
  const auto set = ev.split ? EvaluationSet::lockbox : EvaluationSet::train;

  Json warnings = Json::array();
  const auto fitted = fit(train, spec);
  for (const auto& c : fitted.dropped_collinear) warnings.push_back("collinear design column dropped: " + c);
  for (const auto& c : fitted.encoding.excluded_constant) warnings.push_back("constant column excluded: " + c);

  const auto proxy = build_proxy_report(train, eval, spec, policy.protected_columns, set, policy.weights);
  const auto verdict = no_proxy_rule_check(d, spec, policy);

  Json substitutes = Json::array();
  for (const auto& v : spec.predictors) {
    for (const auto& p : policy.protected_columns) {
      if (d.schema().at(p).kind == ColumnKind::continuous) {
        warnings.push_back("substitute check skipped for continuous protected attribute: " + p);
        continue;
      }
      substitutes.push_back(to_json(detect_substitute(d, v, p, policy.substitute_threshold)));
    }
  }

  const auto decisions = binary_decisions(predict(fitted, eval), spec.family);
  const auto screening = screen_by_protected(eval, decisions, policy);
  Json screening_json = Json::array();
  bool flagged = !verdict.violations.empty();
  for (const auto& s : screening) {
    screening_json.push_back(to_json(s));
    flagged = flagged || s.flagged;
  }

  Json report = base_report("audit");
  report["inputs"] = in.digests;
  report["policy"] = to_json(policy);
  report["model"] = to_json(spec);
  report["lockbox"] = ev.split ? to_json(*ev.split) : Json(nullptr);
  report["fit"] = {{"family", to_string(spec.family)},
                   {"train_rows", fitted.n},
                   {"fit_statistic", fitted.fit_statistic()},
                   {"eval_fit_statistic", goodness_of_fit(fitted, eval)},
                   {"coefficients", fitted.coefficient_map()},
                   {"residuals", residual_summary(fitted, eval)}};
  report["proxy_reports"] = Json::array({to_json(proxy)});
  report["substitutes"] = substitutes;
  report["verdicts"] = Json::array({to_json(verdict)});
  report["screening"] = screening_json;
  report["warnings"] = warnings;
  report["status"] = flagged ? "flags_found" : "clean";
  emit(std::move(report), o, out);
  return flagged ? kExitFlagged : kExitClean;
}

Verdict rank_lexicographic(std::vector<ScoredModel> scored, const Policy& policy) {
  std::stable_sort(scored.begin(), scored.end(), [&](const ScoredModel& a, const ScoredModel& b) {
    return lexicographic_compare(a, b, policy).preference == Preference::first;
  });
  Verdict v;
  v.rule = RuleKind::lexicographic;
  for (std::size_t i = 0; i + 1 < scored.size(); ++i) {
    v.trail.push_back(lexicographic_compare(scored[i], scored[i + 1], policy).step);
  }
  const bool tie = scored.size() > 1 &&
                   lexicographic_compare(scored[0], scored[1], policy).preference == Preference::equal;
  v.winner = tie ? "tie" : scored.front().id;
  v.scored = std::move(scored);
  return v;
}

int cmd_compare(const Options& o, std::ostream& out) {
  if (o.models.size() < 2) throw InputError("compare needs at least two --model files");
  std::vector<ModelSpec> specs;
  std::vector<ProxyMeasurement> measurements;
  Json model_digests = Json::object();
  for (const auto& path : o.models) {
    const auto text = read_file(path);
    const auto j = parse_json(text, path);
    if (j.is_object() && j.contains("semi_partial")) {
      measurements.push_back(measurement_from_json(j));
      model_digests[measurements.back().model_id] = sha256_hex(text);
    } else {
      specs.push_back(spec_from_json(j));
      model_digests[specs.back().id] = sha256_hex(text);
    }
  }
  if (!specs.empty() && !measurements.empty()) throw InputError("compare: mix of model specs and measurements");

  Json report = base_report("compare");
  Json verdicts = Json::array();
  bool flagged = false;
  const auto record = [&](const Verdict& v) {
    verdicts.push_back(to_json(v));
    flagged = flagged || !v.non_compliant.empty() || !v.violations.empty();
  };

  if (!measurements.empty()) {
    Json digests = {{"models", model_digests}};
    auto policy = load_policy(o, nullptr, digests);
    if (!policy.cap) policy.cap = Policy::kDefaultCap;
    Json ms = Json::array();
    for (const auto& m : measurements) ms.push_back({{"model_id", m.model_id}, {"semi_partial", m.semi_partial}});
    record(capped_rule(measurements, policy));
    report["inputs"] = digests;
    report["policy"] = to_json(policy);
    report["measurements"] = ms;
  } else {
    auto in = load_data(o);
    in.digests["models"] = model_digests;
    const auto policy = load_policy(o, &in.schema, in.digests);
    const auto ev = make_evaluation(o, in.data);
    const auto rule = policy.rule.value_or(RuleKind::min_proxy);
    const auto scored = [&] { return score_models(ev.train_or(in.data), ev.eval_or(in.data), specs, policy); };
    switch (rule) {
      case RuleKind::min_proxy:
        record(compare_min_proxy_power(in.data, specs, policy, ev.split ? &*ev.split : nullptr));
        break;
      case RuleKind::lexicographic:
        record(rank_lexicographic(scored(), policy));
        break;
      case RuleKind::capped: {
        auto capped = policy;
        if (!capped.cap) capped.cap = Policy::kDefaultCap;
        const auto s = scored();
        std::vector<ProxyMeasurement> m;
        for (const auto& x : s) m.push_back({x.id, x.average_proxy_power.value_or(0.0)});
        auto v = capped_rule(m, capped);
        v.scored = s;
        record(v);
        break;
      }
      case RuleKind::no_proxy:
        for (const auto& spec : specs) record(no_proxy_rule_check(in.data, spec, policy));
        break;
    }
    Json models = Json::array();
    for (const auto& s : specs) models.push_back(to_json(s));
    report["inputs"] = in.digests;
    report["policy"] = to_json(policy);
    report["models"] = models;
    report["lockbox"] = ev.split ? to_json(*ev.split) : Json(nullptr);
  }
  report["verdicts"] = verdicts;
  report["status"] = flagged ? "flags_found" : "clean";
  emit(std::move(report), o, out);
  return flagged ? kExitFlagged : kExitClean;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

int cmd_compete(const Options& o, std::ostream& out) {
  if (o.submissions.empty()) throw InputError("compete needs --submissions");
  auto in = load_data(o);
  const auto policy = load_policy(o, &in.schema, in.digests);
  const auto split = lockbox_split(in.data, o.lockbox_fraction, resolve_seed(o));
  if (!o.lockbox_digest.empty() && o.lockbox_digest != split.digest) {
    throw InputError("lock-box tampered: expected digest " + o.lockbox_digest + ", data gives " + split.digest);
  }

  const fs::path dir(o.submissions);
  if (!fs::is_directory(dir)) throw InputError("'" + o.submissions + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Submission> submissions;
  Json model_digests = Json::object();
  for (const auto& f : files) {
    const auto text = read_file(f.string());
    auto j = parse_json(text, f.string());
    Submission s;
    s.party = f.stem().string();
    if (j.is_object() && j.contains("party")) {
      if (!j.at("party").is_string()) throw InputError(f.string() + ": 'party' must be a string");
      s.party = j.at("party").get<std::string>();
      j.erase("party");
    }
    s.spec = spec_from_json(j);
    const auto sidecar = dir / (s.spec.id + ".commit");
    if (fs::exists(sidecar)) {
      const auto commit_text = trim(read_file(sidecar.string()));
      if (!commit_text.empty() && commit_text.front() == '{') {
        s.commitment = commitment_from_json(parse_json(commit_text, sidecar.string()));
      } else {
        s.commitment = Commitment{s.spec.id, commit_text, ""};
      }
    }
    model_digests[f.filename().string()] = sha256_hex(text);
    submissions.push_back(std::move(s));
  }
  in.digests["models"] = model_digests;

  const auto result = run_competition(in.data, split, submissions, policy);
  Json report = base_report("compete");
  report["inputs"] = in.digests;
  report["policy"] = to_json(policy);
  report["lockbox"] = to_json(split);
  report["result"] = to_json(result);
  report["status"] = result.disqualified.empty() ? "clean" : "flags_found";
  emit(std::move(report), o, out);
  return result.disqualified.empty() ? kExitClean : kExitFlagged;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  if (o.scenario.empty()) throw InputError("simulate needs --scenario");
  ScenarioConfig cfg;
  cfg.name = parse_scenario_name(o.scenario);
  cfg.seed = resolve_seed(o);
  if (o.n_opt->count() > 0) cfg.n = o.n;
  if (o.noise_opt->count() > 0) cfg.noise = o.noise;
  if (o.share_opt->count() > 0) cfg.segregated_share = o.segregated_share;
  const auto d = generate(cfg);

  std::string prefix = o.out.empty() ? std::string(to_string(cfg.name)) : o.out;
  if (prefix.size() > 4 && prefix.ends_with(".csv")) prefix.resize(prefix.size() - 4);
  const std::string csv_path = prefix + ".csv";
  const std::string schema_path = prefix + ".schema.json";
  const auto csv = d.to_csv();
  write_file(csv_path, csv);
  write_file(schema_path, d.schema().to_json());

  Json report = base_report("simulate");
  report["scenario"] = to_string(cfg.name);
  report["seed"] = cfg.seed;
  report["rows"] = d.rows();
  report["noise"] = cfg.noise ? Json(*cfg.noise) : Json(nullptr);
  report["segregated_share"] = cfg.segregated_share ? Json(*cfg.segregated_share) : Json(nullptr);
  report["files"] = {{"data", csv_path}, {"schema", schema_path}};
  report["data_sha256"] = sha256_hex(csv);
  Options to_stdout = o;
  to_stdout.out.clear();
  return emit(std::move(report), to_stdout, out);
}

int cmd_commit(const Options& o, std::ostream& out) {
  if (o.models.size() != 1) throw InputError("commit takes exactly one --model");
  const auto spec = spec_from_json(parse_json(read_file(o.models.front()), o.models.front()));
  if (!o.schema.empty()) validate(spec, Schema::from_json(read_file(o.schema)));
  const auto c = commit_model(spec);
  out << c.digest << "\n";
  if (!o.out.empty()) write_file(o.out, to_json(c).dump(2) + "\n");
  return kExitClean;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "CSV data file");
  cmd->add_option("--schema", o.schema, "schema JSON file");
  cmd->add_option("--model", o.models, "model spec (or measurement) JSON file; repeatable");
  cmd->add_option("--policy", o.policy, "policy JSON file");
  cmd->add_option("--protected", o.protected_columns, "protected attribute(s); overrides the policy")->delimiter(',');
  o.lockbox_fraction_opt =
      cmd->add_option("--lockbox-fraction", o.lockbox_fraction, "share of rows held out as the lock-box")
          ->check(CLI::Range(0.0, 1.0));
  o.seed_opt = cmd->add_option("--seed", o.seed, "seed (default: PROXYAUDIT_SEED, else 42)");
  cmd->add_option("--out", o.out, "output path");
  cmd->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "md"}));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Measure proxy power and compare candidate decision models", "proxyaudit"};
  app.set_version_flag("--version", PROXYAUDIT_VERSION);
  app.require_subcommand(1);

  auto* audit = app.add_subcommand("audit", "no-proxy check, proxy report and screening for one model");
  auto* compare = app.add_subcommand("compare", "compare two or more models under the policy's rule");
  auto* compete = app.add_subcommand("compete", "lock-box competition over a submissions directory");
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scenario dataset and schema");
  auto* commit = app.add_subcommand("commit", "print the commitment digest of a model spec");
  for (auto* cmd : {audit, compare, compete, simulate, commit}) add_common(cmd, o);
  compete->add_option("--submissions", o.submissions, "directory of submission spec files");
  compete->add_option("--lockbox-digest", o.lockbox_digest, "expected lock-box digest");
  simulate->add_option("--scenario", o.scenario, "scenario name");
  o.n_opt = simulate->add_option("--n", o.n, "row count");
  o.noise_opt = simulate->add_option("--noise", o.noise, "scenario noise level");
  o.share_opt = simulate->add_option("--segregated-share", o.segregated_share, "single-race school share");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitClean : kExitInput;
  }

  try {
    if (*audit) return cmd_audit(o, out);
    if (*compare) return cmd_compare(o, out);
    if (*compete) return cmd_compete(o, out);
    if (*simulate) return cmd_simulate(o, out);
    return cmd_commit(o, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace proxyaudit
