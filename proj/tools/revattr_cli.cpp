// revattr: attribute session-log revenue under cooperative-game rules, verify
// rules against a brute-force oracle, and run behavior-model simulations.
//
// Exit codes: 0 success (verify: all applicable checks pass), 1 failed
// verification checks, 2 parse/validation error, 3 I/O error, 4 player cap
// exceeded for coalition-exhaustive verification.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "revattr/domain.hpp"
#include "revattr/engine.hpp"
#include "revattr/games.hpp"
#include "revattr/oracle.hpp"
#include "revattr/rules.hpp"
#include "revattr/simulator.hpp"

namespace {

using nlohmann::json;
using namespace revattr;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

unsigned env_threads() {
  const char* env = std::getenv("REVATTR_THREADS");
  if (env == nullptr || *env == '\0') return 0;  // 0 = hardware concurrency
  char* end = nullptr;
  const unsigned long value = std::strtoul(env, &end, 10);
  if (end == env || *end != '\0') {
    std::cerr << "warning: ignoring non-numeric REVATTR_THREADS='" << env << "'\n";
    return 0;
  }
  return static_cast<unsigned>(std::min<unsigned long>(value, 4096));
}

double parse_time_bound(const std::string& token) {
  if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double value = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw ValidationError("invalid window bound '" + token +
                          "' (expected a number or 'inf')");
  }
}

// "a..b" -> half-open window ]a, b]. a >= b is a valid empty window.
TimeWindow parse_window(const std::string& text) {
  const auto sep = text.find("..");
  if (sep == std::string::npos) {
    throw ValidationError("invalid window '" + text + "' (expected 'a..b')");
  }
  return TimeWindow{parse_time_bound(text.substr(0, sep)),
                    parse_time_bound(text.substr(sep + 2))};
}

ParseResult load_log(const std::string& path) {
  ParseResult parsed = path == "-" ? parse_session_log(std::cin)
                                   : parse_session_log_file(path);
  for (const std::string& warning : parsed.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
  return parsed;
}

AttenuationFn load_alpha_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alpha table file: " + path);
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(line_no, "alpha table: expected a number, got '" + tok + "'");
      }
    }
  }
  if (values.empty()) {
    throw ValidationError("alpha table file '" + path + "' holds no values");
  }
  return AttenuationFn::from_table(std::move(values));
}

// Resolves a CLI rule token, including the "alpha:<file>" form.
RuleSpec resolve_rule(const std::string& token) {
  if (token.starts_with("alpha:")) {
    return RuleSpec::with_alpha(load_alpha_table(token.substr(6)));
  }
  return RuleSpec::parse(token);
}

std::string format_number(double value) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(9) << value;
  return out.str();
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

json time_to_json(double t) {
  if (std::isinf(t)) return json(t > 0 ? "inf" : "-inf");
  return json(t);
}

json window_to_json(const TimeWindow& w) {
  return json{{"begin", time_to_json(w.begin)}, {"end", time_to_json(w.end)}};
}

class OutputSink {
 public:
  explicit OutputSink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw IoError("cannot open output file: " + path);
      stream_ = &file_;
    }
  }
  std::ostream& out() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = &std::cout;
};

// ---------------------------------------------------------------------------
// attribute
// ---------------------------------------------------------------------------

struct AttributeOpts {
  std::string log_path;
  std::string window = "0..inf";
  std::vector<std::string> rules;
  std::string engine;  // empty = closed-form rules path
  std::string format = "csv";
  std::string out_path;
  unsigned threads = 0;
};

// The attenuation behind an alpha-family rule, for the relevance-matrix
// engine. shapley-dd13 and event-shapley are the theta = 0 / theta = 1 poles.
AttenuationFn alpha_of(const RuleSpec& rule) {
  switch (rule.kind) {
    case RuleSpec::Kind::ShapleyDD13:
      return AttenuationFn::exponential(0.0);
    case RuleSpec::Kind::EventShapley:
      return AttenuationFn::exponential(1.0);
    case RuleSpec::Kind::Alpha:
    case RuleSpec::Kind::ExpTheta:
      return *rule.alpha;
    case RuleSpec::Kind::ShapleyDD12:
      break;
  }
  throw ValidationError(
      "--engine applies to alpha-family rules only; shapley-dd12 has no "
      "attenuation form");
}

int run_attribute(const AttributeOpts& opt) {
  const ParseResult parsed = load_log(opt.log_path);
  const TimeWindow window = parse_window(opt.window);
  const double total = total_revenue(parsed.log, window).units();
  const auto share_of = [total](double amount) {
    return total > 0.0 ? amount / total : 0.0;
  };

  const auto compute = [&](const RuleSpec& rule) {
    if (opt.engine.empty()) {
      return attribute_window(parsed.log, window, rule, opt.threads);
    }
    const EnginePath path = opt.engine == "matrix" ? EnginePath::Matrix
                                                   : EnginePath::Incremental;
    return engine_attribute_window(parsed.log, window, alpha_of(rule), path,
                                   opt.threads);
  };
  std::vector<std::pair<std::string, Allocation>> blocks;
  for (const std::string& token : opt.rules) {
    blocks.emplace_back(token, compute(resolve_rule(token)));
  }

  OutputSink sink(opt.out_path);
  std::ostream& out = sink.out();
  if (opt.format == "csv") {
    out << "rule,player,amount,share\n";
    for (const auto& [rule_name, alloc] : blocks) {
      for (const auto& [player, amount] : alloc.amounts()) {
        out << csv_field(rule_name) << ',' << csv_field(player.label()) << ','
            << format_number(amount) << ',' << format_number(share_of(amount))
            << '\n';
      }
      out << csv_field(rule_name) << ",W," << format_number(alloc.website_total())
          << ',' << format_number(share_of(alloc.website_total())) << '\n';
    }
  } else {
    json doc;
    doc["window"] = window_to_json(window);
    doc["total_revenue"] = total;
    doc["rules"] = json::array();
    for (const auto& [rule_name, alloc] : blocks) {
      json players = json::array();
      for (const auto& [player, amount] : alloc.amounts()) {
        players.push_back(json{{"player", player.label()},
                               {"amount", amount},
                               {"share", share_of(amount)}});
      }
      doc["rules"].push_back(
          json{{"rule", rule_name},
               {"players", std::move(players)},
               {"website", json{{"amount", alloc.website_total()},
                                {"share", share_of(alloc.website_total())}}}});
    }
    out << doc.dump(2) << '\n';
  }
  if (!out) throw IoError("failed writing report");
  return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyOpts {
  std::string log_path;
  std::string window = "0..inf";
  std::string rule;
  std::uint64_t seed = 0x5EED5EEDULL;
  std::string format = "json";
  std::string out_path;
  unsigned threads = 0;
};

int run_verify(const VerifyOpts& opt) {
  const ParseResult parsed = load_log(opt.log_path);
  const TimeWindow window = parse_window(opt.window);

  const std::vector<PlayerId> players = player_set(parsed.log);
  if (players.size() > kCoalitionCap) throw CapError(players.size());

  const RuleSpec rule = resolve_rule(opt.rule);
  const AxiomReport report = axiom_suite(parsed.log, window, rule, opt.seed);
  bool pass = report.clean();

  const bool oracle_applicable = rule.kind == RuleSpec::Kind::ShapleyDD12 ||
                                 rule.kind == RuleSpec::Kind::ShapleyDD13;
  json oracle = json{{"applicable", false}};
  if (oracle_applicable) {
    const GameKind kind = rule.kind == RuleSpec::Kind::ShapleyDD12 ? GameKind::DD12
                                                                   : GameKind::DD13;
    const Allocation closed = attribute_window(parsed.log, window, rule, opt.threads);
    const Allocation brute = brute_force_shapley(parsed.log, window, kind);
    double max_diff = 0.0;
    for (const PlayerId& p : players) {
      max_diff = std::max(max_diff, std::abs(closed.amount(p) - brute.amount(p)));
    }
    const bool equal = max_diff <= 1e-9;
    const CoreReport core = core_check(parsed.log, window, kind, closed);
    pass = pass && equal && core.in_core();
    oracle = json{{"applicable", true},
                  {"game", kind == GameKind::DD12 ? "dd12" : "dd13"},
                  {"max_abs_diff", max_diff},
                  {"equal_within_tolerance", equal},
                  {"core", json{{"stable", core.stable},
                                {"efficient", core.efficient},
                                {"efficiency_gap", core.efficiency_gap},
                                {"violations", core.violations.size()}}}};
  }

  OutputSink sink(opt.out_path);
  std::ostream& out = sink.out();
  if (opt.format == "json") {
    json doc;
    doc["rule"] = opt.rule;
    doc["window"] = window_to_json(window);
    json labels = json::array();
    for (const PlayerId& p : players) labels.push_back(p.label());
    doc["players"] = std::move(labels);
    doc["axioms"] = json::array();
    for (const AxiomCheck& check : report.checks) {
      doc["axioms"].push_back(json{{"axiom", check.axiom},
                                   {"status", std::string(to_string(check.status))},
                                   {"detail", check.detail}});
    }
    doc["oracle"] = std::move(oracle);
    doc["pass"] = pass;
    out << doc.dump(2) << '\n';
  } else {
    out << "rule: " << opt.rule << "\n";
    for (const AxiomCheck& check : report.checks) {
      out << std::left << std::setw(6) << check.axiom << std::setw(15)
          << to_string(check.status) << check.detail << "\n";
    }
    if (oracle_applicable) {
      out << "oracle vs closed form: max |diff| = "
          << oracle["max_abs_diff"].get<double>()
          << (oracle["equal_within_tolerance"].get<bool>() ? " (equal)" : " (DIFFERS)")
          << "\n";
      out << "core: " << (oracle["core"]["stable"].get<bool>() ? "stable" : "violated")
          << ", efficiency gap " << oracle["core"]["efficiency_gap"].get<double>()
          << "\n";
    }
    out << "result: " << (pass ? "pass" : "fail") << "\n";
  }
  if (!out) throw IoError("failed writing report");
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string preset;
  std::string model_path;
  std::vector<std::size_t> lengths;
  std::optional<std::size_t> sessions;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> seed;
  std::optional<double> geometric_stop;
  std::vector<std::string> rules;
  std::string out_path;
  std::string long_out_path;
  unsigned threads = 0;
};

int run_simulate(const SimulateOpts& opt) {
  if (opt.preset.empty() && opt.model_path.empty()) {
    throw ValidationError("one of --preset or --model is required");
  }
  BehaviorModel model = opt.model_path.empty()
                            ? builtin_preset(opt.preset)
                            : parse_behavior_model_file(opt.model_path);
  if (opt.sessions) model.sessions_per_window = *opt.sessions;
  if (opt.replications) model.replications = *opt.replications;
  if (opt.seed) model.seed = *opt.seed;
  if (opt.geometric_stop) model.geometric_stop = *opt.geometric_stop;

  const std::vector<std::size_t> lengths =
      opt.lengths.empty() ? std::vector<std::size_t>{model.session_length}
                          : opt.lengths;

  std::vector<std::string> rule_tokens = opt.rules;
  if (rule_tokens.empty()) {
    rule_tokens = {"shapley-dd12", "exp:0", "exp:0.25", "exp:0.5", "exp:0.75", "exp:1"};
  }
  std::vector<RuleSpec> rules;
  rules.reserve(rule_tokens.size());
  for (const std::string& token : rule_tokens) rules.push_back(resolve_rule(token));

  std::vector<ExperimentTable> tables;  // one per length
  tables.reserve(lengths.size());
  for (const std::size_t length : lengths) {
    model.session_length = length;
    tables.push_back(run_experiment(model, rules, opt.threads));
  }
  const std::vector<PlayerId>& players = tables.front().players;

  OutputSink sink(opt.out_path);
  std::ostream& out = sink.out();
  out << "rule,length";
  for (const PlayerId& p : players) {
    out << ',' << csv_field(p.label() + "_mean") << ',' << csv_field(p.label() + "_sd");
  }
  out << ",W_mean,W_sd\n";
  for (std::size_t ri = 0; ri < rule_tokens.size(); ++ri) {
    for (std::size_t li = 0; li < lengths.size(); ++li) {
      const ExperimentTable& table = tables[li];
      out << csv_field(rule_tokens[ri]) << ',' << lengths[li];
      for (std::size_t pi = 0; pi < players.size(); ++pi) {
        const ShareStat& stat = table.cell(ri, pi);
        out << ',' << format_number(stat.mean) << ',' << format_number(stat.std_dev);
      }
      out << ',' << format_number(table.website[ri].mean) << ','
          << format_number(table.website[ri].std_dev) << '\n';
    }
  }
  if (!out) throw IoError("failed writing report");

  if (!opt.long_out_path.empty()) {
    OutputSink long_sink(opt.long_out_path);
    std::ostream& lout = long_sink.out();
    lout << "rule,length,player,mean,sd\n";
    for (std::size_t ri = 0; ri < rule_tokens.size(); ++ri) {
      for (std::size_t li = 0; li < lengths.size(); ++li) {
        const ExperimentTable& table = tables[li];
        for (std::size_t pi = 0; pi < players.size(); ++pi) {
          const ShareStat& stat = table.cell(ri, pi);
          lout << csv_field(rule_tokens[ri]) << ',' << lengths[li] << ','
               << csv_field(players[pi].label()) << ',' << format_number(stat.mean)
               << ',' << format_number(stat.std_dev) << '\n';
        }
        lout << csv_field(rule_tokens[ri]) << ',' << lengths[li] << ",W,"
             << format_number(table.website[ri].mean) << ','
             << format_number(table.website[ri].std_dev) << '\n';
      }
    }
    if (!lout) throw IoError("failed writing long-format report");
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);

  CLI::App app{
      "revattr: revenue attribution for video-platform session logs.\n"
      "Rules: shapley-dd12 | shapley-dd13 | event-shapley | exp:<theta> | "
      "alpha:<file>.\nAn alpha file tabulates a nonincreasing attenuation "
      "sequence starting at 1; beyond\nthe table the last value extends as a "
      "constant tail."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "revattr 1.0.0");

  const unsigned default_threads = env_threads();
  const std::string threads_help =
      "worker threads (0 = hardware concurrency; default from REVATTR_THREADS)";
  const std::string window_help =
      "half-open time window ]a,b] as 'a..b'; bounds may be 'inf' (a >= b "
      "selects nothing)";
  const std::string log_help = "session log (JSON Lines); '-' reads stdin";

  AttributeOpts aopt;
  aopt.threads = default_threads;
  CLI::App* attribute = app.add_subcommand(
      "attribute", "split a window's revenue over players under one or more rules");
  attribute->add_option("--log", aopt.log_path, log_help)->required();
  attribute->add_option("--window", aopt.window, window_help)->capture_default_str();
  attribute->add_option("--rule", aopt.rules, "attribution rule (repeatable)")
      ->required();
  attribute
      ->add_option("--engine", aopt.engine,
                   "force the relevance-matrix computation path for "
                   "alpha-family rules (incremental requires exp:<theta>)")
      ->check(CLI::IsMember({"matrix", "incremental"}));
  attribute->add_option("--format", aopt.format, "report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  attribute->add_option("--out", aopt.out_path, "output file (default stdout)");
  attribute->add_option("--threads", aopt.threads, threads_help);

  VerifyOpts vopt;
  vopt.threads = default_threads;
  CLI::App* verify = app.add_subcommand(
      "verify",
      "check a rule against the axiom suite and the brute-force game oracle");
  verify->add_option("--log", vopt.log_path, log_help)->required();
  verify->add_option("--window", vopt.window, window_help)->capture_default_str();
  verify->add_option("--rule", vopt.rule, "attribution rule")->required();
  verify->add_option("--seed", vopt.seed, "seed for randomized axiom probes")
      ->capture_default_str();
  verify->add_option("--format", vopt.format, "report format")
      ->check(CLI::IsMember({"json", "text"}))
      ->capture_default_str();
  verify->add_option("--out", vopt.out_path, "output file (default stdout)");
  verify->add_option("--threads", vopt.threads, threads_help);

  SimulateOpts sopt;
  sopt.threads = default_threads;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate behavior-model session windows and tabulate rule shares");
  CLI::Option* preset_opt = simulate->add_option(
      "--preset", sopt.preset, "built-in model preset (available: paper)");
  simulate->add_option("--model", sopt.model_path, "behavior model file")
      ->excludes(preset_opt);
  simulate
      ->add_option("--lengths", sopt.lengths,
                   "comma-separated session lengths (default: the model's)")
      ->delimiter(',');
  simulate->add_option("--sessions", sopt.sessions, "sessions per window (override)");
  simulate->add_option("--replications", sopt.replications,
                       "replications per length (override)");
  simulate->add_option("--seed", sopt.seed, "experiment seed (override)");
  simulate->add_option("--geometric-stop", sopt.geometric_stop,
                       "per-event stop probability in [0,1] (default: off; "
                       "lengths become a hard cap)");
  simulate->add_option("--rule", sopt.rules,
                       "attribution rule (repeatable; default: shapley-dd12 and "
                       "exp:0, 0.25, 0.5, 0.75, 1)");
  simulate->add_option("--out", sopt.out_path, "wide CSV output (default stdout)");
  simulate->add_option("--long-out", sopt.long_out_path,
                       "also write a long-format CSV (rule,length,player,mean,sd)");
  simulate->add_option("--threads", sopt.threads, threads_help);

  try {
    app.parse(argc, argv);
    if (*attribute) return run_attribute(aopt);
    if (*verify) return run_verify(vopt);
    if (*simulate) return run_simulate(sopt);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const CapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
