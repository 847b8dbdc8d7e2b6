// viable: audit ranked lists for attention-aware group fairness, generate
// fair rankings, and synthesize shuffled realizations.
//
// Exit codes: 0 fair (or trivially fair short list), 1 unfair, 2 usage or
// input error.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "viable/viable.hpp"
#include "viable/io.hpp"

namespace {

using viable::io::Json;

constexpr int kExitFair = 0;
constexpr int kExitUnfair = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : text) {
    if (ch == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  parts.push_back(current);
  return parts;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw viable::ConfigError("invalid number '" + text + "' for " + what);
  }
}

std::size_t parse_count(const std::string& text, const std::string& what) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw viable::ConfigError("invalid count '" + text + "' for " + what);
  }
  return static_cast<std::size_t>(std::stoull(text));
}

std::pair<double, double> parse_pair(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw viable::ConfigError(what + " expects <low,high>, got '" + text + "'");
  return {parse_double(parts[0], what), parse_double(parts[1], what)};
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    viable::io::write_file_atomic(path, content);
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

Json distribution_to_json(const viable::AlignmentDistribution& d) {
  if (d.is_scalar()) return d.score();
  Json arr = Json::array();
  for (double p : d.probabilities()) arr.push_back(p);
  return arr;
}

// ---------------------------------------------------------------- audit

struct AuditOptions {
  std::string input;
  std::string family = "geometric";
  std::string domain;
  std::string views;
  std::optional<double> param;
  std::size_t grid = 1000;
  double delta_max = 1.0;
  std::string metric;
  std::string target_class;
  std::string effective_n = "list";
  std::string p_hat = "mean";
  std::size_t small_n_cutoff = 7;
  bool aggregate = false;
  std::string out;
  std::string curve;
  std::string missing_score = "reject";
  bool no_timestamp = false;
};

viable::io::MissingScores parse_missing(const std::string& text) {
  if (text == "reject") return viable::io::MissingScores::Reject;
  if (text == "zero") return viable::io::MissingScores::Zero;
  if (text == "renormalize") return viable::io::MissingScores::Renormalize;
  throw viable::ConfigError("--missing-score must be reject, zero or renormalize");
}

// `label:weight,...` (weights are normalized) or a bare number for scalar data.
viable::AlignmentDistribution parse_fixed_estimate(const std::string& spec, const viable::ClassSpace& space) {
  if (space.is_scalar()) return viable::AlignmentDistribution::scalar(parse_double(spec, "--p-hat fixed"));
  std::vector<double> shares(space.size(), 0.0);
  double total = 0.0;
  for (const auto& part : split(spec, ',')) {
    const auto kv = split(part, ':');
    if (kv.size() != 2) throw viable::ConfigError("--p-hat fixed expects label:weight pairs, got '" + part + "'");
    const double weight = parse_double(kv[1], "--p-hat fixed");
    if (weight < 0.0) throw viable::ConfigError("--p-hat fixed weights must be non-negative");
    shares[space.index_of(kv[0])] += weight;
    total += weight;
  }
  if (!(total > 0.0)) throw viable::ConfigError("--p-hat fixed weights sum to zero");
  for (double& s : shares) s /= total;
  return viable::AlignmentDistribution::categorical(std::move(shares));
}

int run_audit(const AuditOptions& opt) {
  using namespace viable;
  const std::string text = io::read_file(opt.input);
  const io::MissingScores missing = parse_missing(opt.missing_score);
  const MissingScorePolicy policy = io::to_core_policy(missing).value_or(MissingScorePolicy::Zero);
  io::RankedListData data = io::parse_ranked_list(text, missing);
  const ClassSpace& file_space = data.class_space;

  DistanceMetric metric{};
  if (opt.metric.empty()) {
    metric = file_space.is_scalar() ? DistanceMetric::AbsScalar
             : opt.target_class.empty() ? DistanceMetric::ChiSquare
                                        : DistanceMetric::BinomialZ;
  } else if (opt.metric == "z") {
    metric = DistanceMetric::BinomialZ;
  } else if (opt.metric == "chi2") {
    metric = DistanceMetric::ChiSquare;
  } else if (opt.metric == "scalar") {
    metric = DistanceMetric::AbsScalar;
  } else {
    throw ConfigError("--metric must be z, chi2 or scalar");
  }
  std::optional<std::string> target;
  if (!opt.target_class.empty()) target = opt.target_class;
  if (metric == DistanceMetric::BinomialZ && !target) throw ConfigError("--metric z needs --target-class");
  if (target && !file_space.contains(*target)) throw ConfigError("unknown --target-class '" + *target + "'");

  // Z works on the target class against everything else.
  const bool project = metric == DistanceMetric::BinomialZ && file_space.size() > 2;
  auto prepare = [&](const AlignmentVector& list) { return project ? project_binary(list, *target) : list; };
  auto prepare_estimate = [&](const AlignmentDistribution& d) {
    return project ? project_binary(d, file_space, *target) : d;
  };

  struct Audit {
    std::string id;
    AlignmentVector list;
    std::size_t realizations;
  };
  std::vector<Audit> audits;
  if (opt.aggregate) {
    RealizationSet set(data.lists);
    audits.push_back({"aggregate", prepare(aggregate_realizations(set, policy)), set.k()});
  } else {
    for (std::size_t r = 0; r < data.lists.size(); ++r) {
      audits.push_back({data.realization_ids[r], prepare(data.lists[r]), 1});
    }
  }

  std::optional<AlignmentDistribution> shared_estimate;
  std::string estimate_source = opt.p_hat;
  if (opt.p_hat.rfind("pool:", 0) == 0) {
    const io::ItemPool pool = io::read_item_pool(opt.p_hat.substr(5), missing);
    if (!(pool.class_space == file_space)) throw ConfigError("pool file uses a different class space than the input");
    shared_estimate = prepare_estimate(population_estimator(pool.class_space, pool.items, policy));
  } else if (opt.p_hat.rfind("fixed:", 0) == 0) {
    shared_estimate = prepare_estimate(parse_fixed_estimate(opt.p_hat.substr(6), file_space));
  } else if (opt.p_hat != "mean") {
    throw ConfigError("--p-hat must be mean, pool:<path> or fixed:<spec>");
  }

  const Family family = family_from_string(opt.family);
  if (!is_parametric(family)) throw ConfigError("--family must be geometric, logseries or pareto");
  const int domain_sources = !opt.domain.empty() + !opt.views.empty() + opt.param.has_value();
  if (domain_sources > 1) throw ConfigError("use only one of --domain, --views and --param");

  Json audits_json = Json::array();
  std::size_t fair = 0, trivial = 0, unfair = 0;
  std::string curve_out;
  const bool multi_curve = audits.size() > 1;
  if (multi_curve) curve_out = "realization_id,param,distance,signed_deviation\n";

  for (const Audit& audit : audits) {
    AuditConfig config;
    config.family = family;
    if (!opt.domain.empty()) {
      const auto [lo, hi] = parse_pair(opt.domain, "--domain");
      config.domain = {lo, hi};
      if (!(lo < hi)) throw ConfigError("--domain needs low < high");
    } else if (!opt.views.empty()) {
      const auto [lo, hi] = parse_pair(opt.views, "--views");
      config.domain = param_interval_from_view_bounds(family, audit.list.size(), lo, hi);
    } else if (opt.param) {
      config.domain = {*opt.param, *opt.param};
    } else {
      config.domain = default_domain(family);
    }
    config.grid_points = opt.grid;
    config.delta_max = opt.delta_max;
    config.distance.metric = metric;
    if (opt.effective_n == "list") {
      config.distance.effective_n = audit.list.size();
      config.distance.basis = SampleBasis::ListLength;
    } else if (opt.effective_n == "realizations") {
      config.distance.effective_n = audit.realizations;
      config.distance.basis = SampleBasis::RealizationCount;
    } else {
      config.distance.effective_n = parse_count(opt.effective_n, "--effective-n");
      config.distance.basis = SampleBasis::Explicit;
    }
    config.small_n_cutoff = opt.small_n_cutoff;
    config.target_class = target;
    config.missing_scores = policy;

    const AlignmentDistribution estimate =
        shared_estimate ? *shared_estimate : population_estimator(audit.list, policy);
    const ViableReport report = scan(audit.list, estimate, config);
    switch (report.verdict) {
      case Verdict::Fair:
        ++fair;
        break;
      case Verdict::TriviallyFairSmallN:
        ++trivial;
        break;
      case Verdict::Unfair:
        ++unfair;
        break;
    }
    std::cerr << (audit.id.empty() ? std::string("list") : audit.id) << ": " << to_string(report.verdict)
              << " (min distance " << io::format_number(report.min_distance) << ")\n";

    Json entry;
    entry["realization_id"] = audit.id;
    entry["class_labels"] = audit.list.class_space().is_scalar() ? Json("scalar")
                                                                 : Json(audit.list.class_space().labels());
    entry["p_hat"] = distribution_to_json(estimate);
    entry["report"] = io::report_to_json(report);
    audits_json.push_back(std::move(entry));

    if (multi_curve) {
      const std::string rows = io::format_curve(report.curve);
      for (const auto& line : split(rows.substr(rows.find('\n') + 1), '\n')) {
        if (!line.empty()) curve_out += io::detail::quote_csv(audit.id) + ',' + line + '\n';
      }
    } else {
      curve_out = io::format_curve(report.curve);
    }
  }

  Json doc;
  doc["tool"] = "viable audit";
  doc["version"] = kVersion;
  if (!opt.no_timestamp) doc["timestamp"] = utc_timestamp();
  Json input;
  input["file"] = std::filesystem::path(opt.input).filename().string();
  input["sha256"] = io::sha256_hex(text);
  input["realizations"] = data.lists.size();
  input["class_labels"] = file_space.is_scalar() ? Json("scalar") : Json(file_space.labels());
  doc["input"] = std::move(input);
  doc["aggregate"] = opt.aggregate;
  doc["p_hat_source"] = estimate_source;
  doc["audits"] = std::move(audits_json);
  doc["summary"] = {{"audits", audits.size()}, {"fair", fair}, {"trivially_fair_small_n", trivial}, {"unfair", unfair}};

  emit(opt.out, doc.dump(2) + "\n");
  if (!opt.curve.empty()) io::write_file_atomic(opt.curve, curve_out);
  return unfair == 0 ? kExitFair : kExitUnfair;
}

// ---------------------------------------------------------------- generate

struct GenerateCliOptions {
  std::string counts;
  std::string family = "geometric";
  std::optional<double> param;
  std::optional<double> views;
  std::string metric = "chi2";
  std::string target_class;
  std::string out;
};

int run_generate(const GenerateCliOptions& opt) {
  using namespace viable;
  CompositionSpec spec;
  for (const auto& part : split(opt.counts, ',')) {
    const auto kv = split(part, ':');
    if (kv.size() != 2 || kv[0].empty()) throw ConfigError("--counts expects label:count pairs, got '" + part + "'");
    spec.class_counts.emplace_back(kv[0], parse_count(kv[1], "--counts"));
  }
  const std::size_t n = spec.n();
  if (n == 0) throw ConfigError("--counts describes an empty list");
  const Family family = family_from_string(opt.family);
  if (!is_parametric(family)) throw ConfigError("--family must be geometric, logseries or pareto");
  if (opt.param.has_value() == opt.views.has_value()) throw ConfigError("give exactly one of --param and --views");
  const double param = opt.param ? *opt.param : fit_param_to_expected_views(family, n, *opt.views);

  GenerateOptions options;
  if (opt.metric == "chi2") {
    options.metric = DistanceMetric::ChiSquare;
  } else if (opt.metric == "z") {
    options.metric = DistanceMetric::BinomialZ;
  } else {
    throw ConfigError("--metric must be chi2 or z");
  }
  if (!opt.target_class.empty()) options.target_class = opt.target_class;

  const FairRanking ranking = generate_fair(spec, AttentionModel::with_param(family, param, n), options);
  std::vector<std::string> items;
  std::vector<std::size_t> seen(spec.class_counts.size(), 0);
  for (std::size_t c : ranking.classes) {
    items.push_back(spec.class_counts[c].first + "-" + std::to_string(++seen[c]));
  }
  emit(opt.out, io::format_ranked_list({ranking.list}, {items}));
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", ranking.distance);
  std::cerr << "param " << io::format_number(param) << "\n"
            << "achieved_distance " << buffer << "\n"
            << "proven_optimal " << (ranking.proven_optimal ? "true" : "false") << "\n";
  return kExitFair;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  double pool_minority = 0.13;
  std::size_t pool_size = 4407;
  std::size_t n = 100;
  std::size_t k = 1;
  std::string policy = "shuffle";
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(const SynthOptions& opt) {
  using namespace viable;
  if (!(opt.pool_minority >= 0.0 && opt.pool_minority <= 1.0)) throw ConfigError("--pool-minority must lie in [0, 1]");
  SynthesisPolicy policy;
  if (opt.policy == "shuffle") {
    policy = SynthesisPolicy::uniform_shuffle();
  } else if (opt.policy.rfind("churn:", 0) == 0) {
    policy = SynthesisPolicy::churn(parse_double(opt.policy.substr(6), "--policy churn"));
  } else {
    throw ConfigError("--policy must be shuffle or churn:<rate>");
  }
  const std::size_t minority =
      static_cast<std::size_t>(std::llround(opt.pool_minority * static_cast<double>(opt.pool_size)));
  const ClassSpace space = ClassSpace::categorical({"minority", "majority"});
  const auto indices = synthesize_realization_indices(opt.pool_size, opt.n, opt.k, policy, opt.seed);

  const auto minority_item = make_one_hot("minority", space);
  const auto majority_item = make_one_hot("majority", space);
  std::vector<AlignmentVector> lists;
  std::vector<std::vector<std::string>> items;
  lists.reserve(opt.k);
  items.reserve(opt.k);
  for (const auto& picks : indices) {
    std::vector<AlignmentDistribution> entries;
    std::vector<std::string> ids;
    for (std::size_t idx : picks) {
      entries.push_back(idx < minority ? minority_item : majority_item);
      ids.push_back("item-" + std::to_string(idx));
    }
    lists.emplace_back(space, std::move(entries));
    items.push_back(std::move(ids));
  }
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < lists.size(); ++r) ids.push_back(std::to_string(r + 1));
  emit(opt.out, io::format_ranked_list(lists, items, ids));
  return kExitFair;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-aware group fairness audits for ranked lists"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(viable::kVersion));

  AuditOptions audit;
  auto* audit_cmd = app.add_subcommand("audit", "Run the viable-parameter fairness test on a ranked-list file");
  audit_cmd->add_option("--input", audit.input, "Ranked-list CSV")->required();
  audit_cmd->add_option("--family", audit.family, "geometric | logseries | pareto");
  audit_cmd->add_option("--domain", audit.domain, "Parameter domain <low,high>");
  audit_cmd->add_option("--views", audit.views, "Expected-views bounds <low,high>, converted to a domain");
  audit_cmd->add_option("--param", audit.param, "Audit a single parameter value");
  audit_cmd->add_option("--grid", audit.grid, "Grid points over the domain")->check(CLI::PositiveNumber);
  audit_cmd->add_option("--delta-max", audit.delta_max, "Largest distance still considered fair");
  audit_cmd->add_option("--metric", audit.metric, "z | chi2 | scalar (inferred when omitted)");
  audit_cmd->add_option("--target-class", audit.target_class, "Class whose share is tested");
  audit_cmd->add_option("--effective-n", audit.effective_n, "list | realizations | <int>");
  audit_cmd->add_option("--p-hat", audit.p_hat, "mean | pool:<path> | fixed:<spec>");
  audit_cmd->add_option("--small-n-cutoff", audit.small_n_cutoff, "Lists this short get uniform attention");
  audit_cmd->add_flag("--aggregate", audit.aggregate, "Audit the per-rank mean of all realizations");
  audit_cmd->add_option("--out", audit.out, "Report path (stdout when omitted)");
  audit_cmd->add_option("--curve", audit.curve, "Write the distance curve CSV here");
  audit_cmd->add_option("--missing-score", audit.missing_score, "reject | zero | renormalize");
  audit_cmd->add_flag("--no-timestamp", audit.no_timestamp, "Omit the timestamp from the report");

  GenerateCliOptions generate;
  auto* generate_cmd = app.add_subcommand("generate", "Write a fair ranking for a fixed attention model");
  generate_cmd->add_option("--counts", generate.counts, "Composition, e.g. A:1,B:10")->required();
  generate_cmd->add_option("--family", generate.family, "geometric | logseries | pareto");
  generate_cmd->add_option("--param", generate.param, "Attention parameter");
  generate_cmd->add_option("--views", generate.views, "Expected views; the parameter is fitted to it");
  generate_cmd->add_option("--metric", generate.metric, "chi2 | z");
  generate_cmd->add_option("--target-class", generate.target_class, "Class for the z metric");
  generate_cmd->add_option("--out", generate.out, "Output CSV (stdout when omitted)");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write seeded shuffled or churned realizations of a two-class pool");
  synth_cmd->add_option("--pool-minority", synth.pool_minority, "Minority share of the pool");
  synth_cmd->add_option("--pool-size", synth.pool_size, "Pool size");
  synth_cmd->add_option("--n", synth.n, "List length");
  synth_cmd->add_option("--k", synth.k, "Number of realizations");
  synth_cmd->add_option("--policy", synth.policy, "shuffle | churn:<rate>");
  synth_cmd->add_option("--seed", synth.seed, "RNG seed");
  synth_cmd->add_option("--out", synth.out, "Output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (audit_cmd->parsed()) return run_audit(audit);
    if (generate_cmd->parsed()) return run_generate(generate);
    if (synth_cmd->parsed()) return run_synth(synth);
  } catch (const viable::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
