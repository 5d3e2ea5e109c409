#include "revattr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <utility>

#include "parallel.hpp"

namespace revattr {

// ---------------------------------------------------------------------------
// BehaviorModel
// ---------------------------------------------------------------------------

void BehaviorModel::validate() const {
  constexpr double kProbTol = 1e-12;

  if (support.empty()) {
    throw ValidationError("behavior model: support is empty");
  }
  std::set<PlayerId> seen;
  for (const PlayerId& p : support) {
    if (p.is_platform()) {
      throw ValidationError(
          "behavior model: the platform cannot appear in the support; it owns "
          "only the entry event");
    }
    if (!seen.insert(p).second) {
      throw ValidationError("behavior model: duplicate support player " + p.label());
    }
  }

  const std::size_t n = support.size();
  const auto check_row = [&](const std::vector<double>& row, const std::string& what) {
    if (row.size() != n) {
      throw ValidationError("behavior model: " + what + " has " +
                            std::to_string(row.size()) + " entries, expected " +
                            std::to_string(n));
    }
    double sum = 0.0;
    for (double p : row) {
      if (!std::isfinite(p) || p < 0.0) {
        throw ValidationError("behavior model: " + what +
                              " contains a negative or non-finite probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
      std::ostringstream out;
      out.precision(17);
      out << "behavior model: " << what << " sums to " << sum << ", expected 1";
      throw ValidationError(out.str());
    }
  };

  check_row(initial, "initial vector");
  if (transition.size() != n) {
    throw ValidationError("behavior model: transition matrix has " +
                          std::to_string(transition.size()) + " rows, expected " +
                          std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    check_row(transition[i], "transition row " + std::to_string(i) + " (" +
                                 support[i].label() + ")");
  }

  for (const auto& [player, money] : revenue_profile) {
    if (!seen.contains(player)) {
      throw ValidationError("behavior model: revenue entry for " + player.label() +
                            ", which is not in the support");
    }
    if (money.micros < 0) {
      throw ValidationError("behavior model: negative revenue for " + player.label());
    }
  }

  if (sessions_per_window == 0) {
    throw ValidationError("behavior model: sessions_per_window must be positive");
  }
  if (replications == 0) {
    throw ValidationError("behavior model: replications must be positive");
  }
  if (geometric_stop &&
      !(std::isfinite(*geometric_stop) && *geometric_stop >= 0.0 &&
        *geometric_stop <= 1.0)) {
    throw ValidationError("behavior model: geometric_stop must lie in [0, 1]");
  }
}

Money BehaviorModel::revenue_for(const PlayerId& owner) const {
  const auto it = revenue_profile.find(owner);
  return it == revenue_profile.end() ? Money{} : it->second;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

std::vector<std::string> builtin_preset_names() { return {"paper"}; }

BehaviorModel builtin_preset(const std::string& name) {
  if (name != "paper") {
    throw ValidationError("unknown preset '" + name + "'; available: paper");
  }
  BehaviorModel m;
  m.support = {PlayerId::search(), PlayerId::recommender(), PlayerId::channel("1"),
               PlayerId::channel("2"), PlayerId::channel("3")};
  m.initial = {0.25, 0.13, 0.25, 0.25, 0.12};
  m.transition = {
      {0.10, 0.40, 0.20, 0.20, 0.10},
      {0.00, 0.00, 0.40, 0.40, 0.20},
      {0.10, 0.50, 0.40, 0.00, 0.00},
      {0.10, 0.50, 0.00, 0.40, 0.00},
      {0.10, 0.70, 0.00, 0.00, 0.20},
  };
  m.revenue_profile = {
      {PlayerId::recommender(), Money::from_units(1.0)},
      {PlayerId::channel("1"), Money::from_units(3.0)},
      {PlayerId::channel("2"), Money::from_units(6.0)},
      {PlayerId::channel("3"), Money::from_units(9.0)},
  };
  m.session_length = 5;
  m.sessions_per_window = 100;
  m.replications = 10;
  m.seed = 42;
  return m;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_number(const std::string& token, std::size_t line) {
  try {
    std::size_t used = 0;
    const double value = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + token + "'");
  }
}

std::uint64_t parse_u64(const std::string& token, std::size_t line) {
  try {
    std::size_t used = 0;
    const unsigned long long value = std::stoull(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw ParseError(line, "expected a nonnegative integer, got '" + token + "'");
  }
}

PlayerId parse_player(const std::string& token, std::size_t line) {
  try {
    return PlayerId::from_label(token);
  } catch (const ValidationError& e) {
    throw ParseError(line, e.what());
  }
}

}  // namespace

BehaviorModel parse_behavior_model(std::istream& in) {
  BehaviorModel model;
  model.session_length = 5;

  std::set<std::string> keys_seen;
  bool have_initial = false;
  bool have_transition = false;
  std::size_t transition_rows_pending = 0;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) {
      raw.erase(hash);
    }
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (transition_rows_pending > 0) {
      const auto tokens = split_tokens(line);
      if (tokens.size() != model.support.size()) {
        throw ParseError(line_no, "transition row has " +
                                      std::to_string(tokens.size()) +
                                      " entries, expected " +
                                      std::to_string(model.support.size()));
      }
      std::vector<double> row;
      row.reserve(tokens.size());
      for (const std::string& tok : tokens) row.push_back(parse_number(tok, line_no));
      model.transition.push_back(std::move(row));
      --transition_rows_pending;
      continue;
    }

    if (line == "transition:") {
      if (model.support.empty()) {
        throw ParseError(line_no, "'players' must be declared before 'transition:'");
      }
      if (have_transition) throw ParseError(line_no, "duplicate 'transition:' block");
      have_transition = true;
      transition_rows_pending = model.support.size();
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(line_no, "expected 'key = value' or 'transition:', got '" +
                                    line + "'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ParseError(line_no, "expected 'key = value', got '" + line + "'");
    }
    if (!keys_seen.insert(key).second) {
      throw ParseError(line_no, "duplicate key '" + key + "'");
    }

    if (key == "players") {
      for (const std::string& tok : split_tokens(value)) {
        const PlayerId p = parse_player(tok, line_no);
        if (p.is_platform()) {
          throw ParseError(line_no,
                           "the platform is implicit and cannot appear in 'players'");
        }
        model.support.push_back(p);
      }
      if (model.support.empty()) throw ParseError(line_no, "'players' is empty");
    } else if (key == "initial") {
      for (const std::string& tok : split_tokens(value)) {
        model.initial.push_back(parse_number(tok, line_no));
      }
      have_initial = true;
    } else if (key == "revenue") {
      const auto tokens = split_tokens(value);
      if (tokens.size() % 2 != 0) {
        throw ParseError(line_no,
                         "'revenue' expects player/amount pairs, e.g. "
                         "'revenue = channel:1 3 recommender 1'");
      }
      for (std::size_t i = 0; i < tokens.size(); i += 2) {
        const PlayerId p = parse_player(tokens[i], line_no);
        const double amount = parse_number(tokens[i + 1], line_no);
        if (amount < 0.0) throw ParseError(line_no, "negative revenue for " + p.label());
        model.revenue_profile[p] = Money::from_units(amount);
      }
    } else if (key == "length") {
      model.session_length = static_cast<std::size_t>(parse_u64(value, line_no));
    } else if (key == "sessions") {
      model.sessions_per_window = static_cast<std::size_t>(parse_u64(value, line_no));
    } else if (key == "replications") {
      model.replications = static_cast<std::size_t>(parse_u64(value, line_no));
    } else if (key == "seed") {
      model.seed = parse_u64(value, line_no);
    } else if (key == "geometric_stop") {
      model.geometric_stop = parse_number(value, line_no);
    } else {
      throw ParseError(line_no, "unknown key '" + key + "'");
    }
  }

  if (in.bad()) throw IoError("failed reading behavior model stream");
  if (model.support.empty()) throw ParseError(line_no, "missing 'players'");
  if (!have_initial) throw ParseError(line_no, "missing 'initial'");
  if (!have_transition) throw ParseError(line_no, "missing 'transition:' block");
  if (transition_rows_pending > 0) {
    throw ParseError(line_no, "transition block ended after " +
                                  std::to_string(model.support.size() -
                                                 transition_rows_pending) +
                                  " of " + std::to_string(model.support.size()) +
                                  " rows");
  }
  model.validate();
  return model;
}

BehaviorModel parse_behavior_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open behavior model file: " + path);
  return parse_behavior_model(in);
}

// ---------------------------------------------------------------------------
// Deterministic randomness
// ---------------------------------------------------------------------------

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t replication,
                                 std::uint64_t session_index) noexcept {
  std::uint64_t z = seed;
  z += 0x9E3779B97F4A7C15ULL * (replication + 1);
  z += 0xD1B54A32D192ED03ULL * (session_index + 1);
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// ---------------------------------------------------------------------------
// Session generation
// ---------------------------------------------------------------------------

namespace {

std::size_t draw_index(const std::vector<double>& probs, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  if (last_positive == probs.size()) {
    throw ValidationError("behavior model: probability row has no positive entry");
  }
  return last_positive;  // u landed in the float dust above the row sum
}

}  // namespace

Session generate_session(const BehaviorModel& model, SessionRng& rng,
                         std::string id, double start_time, double end_time) {
  std::vector<Event> events;
  events.reserve(model.session_length + 1);
  events.push_back(Event{PlayerId::platform(), Money{}});

  std::size_t state = 0;
  for (std::size_t k = 1; k <= model.session_length; ++k) {
    const std::vector<double>& row = k == 1 ? model.initial : model.transition[state];
    state = draw_index(row, rng.next_unit());
    events.push_back(Event{model.support[state], model.revenue_for(model.support[state])});
    if (model.geometric_stop && k < model.session_length &&
        rng.next_unit() < *model.geometric_stop) {
      break;
    }
  }
  return Session(std::move(id), start_time, end_time, std::move(events));
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

ExperimentTable run_experiment(const BehaviorModel& model,
                               const std::vector<RuleSpec>& rules,
                               unsigned threads) {
  model.validate();

  ExperimentTable table;
  {
    std::set<PlayerId> players(model.support.begin(), model.support.end());
    players.insert(PlayerId::platform());
    table.players.assign(players.begin(), players.end());
  }
  table.rule_names.reserve(rules.size());
  for (const RuleSpec& rule : rules) table.rule_names.push_back(rule.name());

  const std::size_t reps = model.replications;
  const std::size_t n_rules = rules.size();
  const std::size_t n_players = table.players.size();

  // shares[rep][rule][player]; website_shares[rep][rule]. Each replication
  // writes only its own slot, so parallel execution stays deterministic.
  std::vector<std::vector<std::vector<double>>> shares(
      reps, std::vector<std::vector<double>>(n_rules,
                                             std::vector<double>(n_players, 0.0)));
  std::vector<std::vector<double>> website_shares(
      reps, std::vector<double>(n_rules, 0.0));

  detail::parallel_chunks(reps, 1, threads, [&](std::size_t, std::size_t begin,
                                                std::size_t end) {
    for (std::size_t rep = begin; rep < end; ++rep) {
      std::vector<Session> sessions;
      sessions.reserve(model.sessions_per_window);
      for (std::size_t idx = 0; idx < model.sessions_per_window; ++idx) {
        SessionRng rng(derive_stream_seed(model.seed, rep, idx));
        sessions.push_back(generate_session(
            model, rng, "r" + std::to_string(rep) + "-s" + std::to_string(idx),
            static_cast<double>(idx), static_cast<double>(idx) + 1.0));
      }
      const SessionLog log(std::move(sessions));
      const TimeWindow window = TimeWindow::all();
      const double total = total_revenue(log, window).units();

      for (std::size_t ri = 0; ri < n_rules; ++ri) {
        const Allocation alloc = attribute_window(log, window, rules[ri]);
        if (total > 0.0) {
          for (std::size_t pi = 0; pi < n_players; ++pi) {
            shares[rep][ri][pi] = alloc.amount(table.players[pi]) / total;
          }
          website_shares[rep][ri] = alloc.website_total() / total;
        }
      }
    }
  });

  const auto summarize = [reps](auto value_of) {
    ShareStat stat;
    for (std::size_t rep = 0; rep < reps; ++rep) stat.mean += value_of(rep);
    stat.mean /= static_cast<double>(reps);
    if (reps > 1) {
      double ss = 0.0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const double d = value_of(rep) - stat.mean;
        ss += d * d;
      }
      stat.std_dev = std::sqrt(ss / static_cast<double>(reps - 1));
    }
    return stat;
  };

  table.cells.assign(n_rules, std::vector<ShareStat>(n_players));
  table.website.assign(n_rules, ShareStat{});
  for (std::size_t ri = 0; ri < n_rules; ++ri) {
    for (std::size_t pi = 0; pi < n_players; ++pi) {
      table.cells[ri][pi] =
          summarize([&](std::size_t rep) { return shares[rep][ri][pi]; });
    }
    table.website[ri] =
        summarize([&](std::size_t rep) { return website_shares[rep][ri]; });
  }
  return table;
}

}  // namespace revattr
