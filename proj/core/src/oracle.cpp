#include "revattr/oracle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <utility>

namespace revattr {

namespace {

constexpr double kTol = 1e-9;

std::array<double, kCoalitionCap + 1> factorials() {
  std::array<double, kCoalitionCap + 1> f{};
  f[0] = 1.0;
  for (std::size_t i = 1; i <= kCoalitionCap; ++i) {
    f[i] = f[i - 1] * static_cast<double>(i);
  }
  return f;
}

/// The window game tabulated over all coalitions of N as bit masks over
/// player_set(log). Money-exact values.
struct MaskGame {
  std::vector<PlayerId> players;
  std::vector<Money> values;  // index = coalition mask

  std::size_t size() const noexcept { return players.size(); }
};

MaskGame build_mask_game(const SessionLog& log, const TimeWindow& w, GameKind kind) {
  MaskGame game;
  game.players = player_set(log);
  const std::size_t n = game.players.size();
  if (n > kCoalitionCap) throw CapError(n);

  game.values.resize(std::size_t{1} << n);
  for (std::uint32_t mask = 0; mask < game.values.size(); ++mask) {
    Coalition f;
    for (std::size_t b = 0; b < n; ++b) {
      if (mask >> b & 1U) f.insert(game.players[b]);
    }
    game.values[mask] = window_value(log, w, f, kind);
  }
  return game;
}

std::string describe_coalition(const Coalition& f) {
  std::string out = "{";
  for (const PlayerId& p : f.members()) {
    if (out.size() > 1) out += ", ";
    out += p.label();
  }
  return out + "}";
}

}  // namespace

CapError::CapError(std::size_t players)
    : std::runtime_error("player set size " + std::to_string(players) +
                         " exceeds the coalition-exhaustive cap of " +
                         std::to_string(kCoalitionCap)),
      players_(players) {}

// ---------------------------------------------------------------------------
// Brute-force Shapley
// ---------------------------------------------------------------------------

Allocation brute_force_shapley(const SessionLog& log, const TimeWindow& w,
                               GameKind kind) {
  const MaskGame game = build_mask_game(log, w, kind);
  const std::size_t n = game.size();
  static const auto kFact = factorials();

  std::map<PlayerId, double> amounts;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bit = 1U << i;
    double shapley = 0.0;
    for (std::uint32_t mask = 0; mask < game.values.size(); ++mask) {
      if (mask & bit) continue;
      const std::size_t f = static_cast<std::size_t>(std::popcount(mask));
      const double weight = kFact[f] * kFact[n - f - 1] / kFact[n];
      shapley += weight * (game.values[mask | bit] - game.values[mask]).units();
    }
    amounts[game.players[i]] = shapley;
  }
  return Allocation(w, std::move(amounts));
}

// ---------------------------------------------------------------------------
// Core membership
// ---------------------------------------------------------------------------

CoreReport core_check(const SessionLog& log, const TimeWindow& w, GameKind kind,
                      const Allocation& x) {
  const MaskGame game = build_mask_game(log, w, kind);
  const std::size_t n = game.size();

  if (x.amounts().size() != n) {
    throw ValidationError("core_check: allocation player set differs from N");
  }
  for (const PlayerId& p : game.players) {
    if (!x.amounts().contains(p)) {
      throw ValidationError("core_check: allocation misses player " + p.label());
    }
  }

  // Subset sums x(F) over masks via lowest-bit recursion.
  std::vector<double> payoff(game.values.size(), 0.0);
  for (std::uint32_t mask = 1; mask < payoff.size(); ++mask) {
    const int low = std::countr_zero(mask);
    payoff[mask] = payoff[mask & (mask - 1)] + x.amount(game.players[low]);
  }

  CoreReport report;
  const std::uint32_t full = static_cast<std::uint32_t>(game.values.size() - 1);
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    const double value = game.values[mask].units();
    if (payoff[mask] < value - kTol) {
      Coalition f;
      for (std::size_t b = 0; b < n; ++b) {
        if (mask >> b & 1U) f.insert(game.players[b]);
      }
      report.violations.push_back(CoreViolation{std::move(f), value, payoff[mask]});
    }
  }
  report.stable = report.violations.empty();
  report.efficiency_gap = std::abs(payoff[full] - game.values[full].units());
  report.efficient = report.efficiency_gap <= kTol;
  return report;
}

// ---------------------------------------------------------------------------
// Axiom suite
// ---------------------------------------------------------------------------

std::string_view to_string(AxiomStatus status) {
  switch (status) {
    case AxiomStatus::Pass:
      return "pass";
    case AxiomStatus::Fail:
      return "fail";
    case AxiomStatus::ExpectedFail:
      return "expected-fail";
    case AxiomStatus::NotApplicable:
      return "not-applicable";
  }
  return "unknown";
}

bool AxiomReport::clean() const noexcept {
  return std::none_of(checks.begin(), checks.end(), [](const AxiomCheck& c) {
    return c.status == AxiomStatus::Fail;
  });
}

SessionLog merge_channels(const SessionLog& log, const std::vector<std::string>& parts,
                          const std::string& merged_name) {
  const std::set<std::string> part_set(parts.begin(), parts.end());
  const PlayerId merged = PlayerId::channel(merged_name);
  const auto relabel = [&](const PlayerId& p) {
    return p.is_channel() && part_set.contains(p.channel_name()) ? merged : p;
  };

  std::vector<Session> sessions;
  sessions.reserve(log.size());
  for (const Session& s : log) {
    std::vector<Event> events;
    events.reserve(s.events().size());
    for (const Event& e : s.events()) {
      events.push_back(Event{relabel(e.owner), e.revenue});
    }
    std::optional<PlayerId> attractor = s.attractor();
    if (attractor) attractor = relabel(*attractor);
    sessions.emplace_back(s.id(), s.start_time(), s.end_time(), std::move(events),
                          std::move(attractor));
  }
  return SessionLog(std::move(sessions));
}

namespace {

bool has_matching_game(const RuleSpec& rule) {
  return rule.kind == RuleSpec::Kind::ShapleyDD12 ||
         rule.kind == RuleSpec::Kind::ShapleyDD13;
}

GameKind matching_game(const RuleSpec& rule) {
  return rule.kind == RuleSpec::Kind::ShapleyDD12 ? GameKind::DD12 : GameKind::DD13;
}

SessionLog bump_event_revenue(const SessionLog& log, std::size_t session_index,
                              std::size_t event_index, Money delta) {
  std::vector<Session> sessions;
  sessions.reserve(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    const Session& s = log[i];
    std::vector<Event> events = s.events();
    if (i == session_index) events[event_index].revenue += delta;
    sessions.emplace_back(s.id(), s.start_time(), s.end_time(), std::move(events),
                          s.attractor());
  }
  return SessionLog(std::move(sessions));
}

std::string format_gap(double gap) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << gap;
  return out.str();
}

AxiomCheck check_efficiency(const Allocation& alloc, const SessionLog& log,
                            const TimeWindow& w) {
  const double revenue = total_revenue(log, w).units();
  const double gap = std::abs(alloc.total() - revenue);
  AxiomCheck check{"EFF", gap <= kTol ? AxiomStatus::Pass : AxiomStatus::Fail, {}};
  check.detail = "allocation total vs window revenue gap " + format_gap(gap);
  return check;
}

AxiomCheck check_null_player(const Allocation& alloc,
                             const std::vector<PlayerId>& players,
                             const std::vector<const Session*>& selected) {
  std::set<PlayerId> owners;
  for (const Session* s : selected) {
    for (const Event& e : s->events()) owners.insert(e.owner);
  }
  std::size_t null_players = 0;
  for (const PlayerId& p : players) {
    if (owners.contains(p)) continue;
    ++null_players;
    if (std::abs(alloc.amount(p)) > kTol) {
      return AxiomCheck{"NP", AxiomStatus::Fail,
                        "null player " + p.label() + " received " +
                            std::to_string(alloc.amount(p))};
    }
  }
  return AxiomCheck{"NP", AxiomStatus::Pass,
                    std::to_string(null_players) + " null player(s), all at 0"};
}

AxiomCheck check_monotonicity(const SessionLog& log, const TimeWindow& w,
                              const RuleSpec& rule, const Allocation& alloc,
                              const std::vector<PlayerId>& players,
                              std::mt19937_64& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (w.contains_end(log[i].end_time())) candidates.push_back(i);
  }
  if (candidates.empty()) {
    return AxiomCheck{"MON", AxiomStatus::Pass, "no sessions in window (vacuous)"};
  }

  constexpr int kTrials = 6;
  double min_slack = std::numeric_limits<double>::infinity();
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t si = candidates[rng() % candidates.size()];
    const std::size_t ei = rng() % log[si].events().size();
    const Money delta = Money::from_micros(
        static_cast<std::int64_t>(rng() % 5'000'000 + 1));
    const SessionLog bumped = bump_event_revenue(log, si, ei, delta);
    const Allocation after = attribute_window(bumped, w, rule);
    for (const PlayerId& p : players) {
      const double slack = after.amount(p) - alloc.amount(p);
      min_slack = std::min(min_slack, slack);
      if (slack < -kTol) {
        return AxiomCheck{"MON", AxiomStatus::Fail,
                          p.label() + " lost " + format_gap(-slack) +
                              " after a revenue increase"};
      }
    }
  }
  return AxiomCheck{"MON", AxiomStatus::Pass,
                    std::to_string(kTrials) + " revenue increases, min slack " +
                        format_gap(min_slack)};
}

AxiomCheck check_stability(const SessionLog& log, const TimeWindow& w,
                           const RuleSpec& rule, const Allocation& alloc) {
  if (!has_matching_game(rule)) {
    return AxiomCheck{"STA", AxiomStatus::NotApplicable,
                      "no underlying coalition game for rule " + rule.name()};
  }
  const CoreReport core = core_check(log, w, matching_game(rule), alloc);
  if (core.in_core()) {
    return AxiomCheck{"STA", AxiomStatus::Pass,
                      "allocation in the core; efficiency gap " +
                          format_gap(core.efficiency_gap)};
  }
  std::string detail = "efficiency gap " + format_gap(core.efficiency_gap);
  if (!core.violations.empty()) {
    detail += "; first violation at " + describe_coalition(core.violations[0].coalition);
  }
  return AxiomCheck{"STA", AxiomStatus::Fail, detail};
}

AxiomCheck check_time_separability(const SessionLog& log, const TimeWindow& w,
                                   const RuleSpec& rule, const Allocation& alloc,
                                   const std::vector<PlayerId>& players,
                                   const std::vector<const Session*>& selected,
                                   std::mt19937_64& rng) {
  constexpr int kTrials = 5;
  double max_gap = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    const double t2 = selected.empty()
                          ? w.begin
                          : selected[rng() % selected.size()]->end_time();
    const Allocation left = attribute_window(log, TimeWindow{w.begin, t2}, rule);
    const Allocation right = attribute_window(log, TimeWindow{t2, w.end}, rule);
    for (const PlayerId& p : players) {
      max_gap = std::max(
          max_gap, std::abs(left.amount(p) + right.amount(p) - alloc.amount(p)));
    }
  }
  return AxiomCheck{"TS",
                    max_gap <= kTol ? AxiomStatus::Pass : AxiomStatus::Fail,
                    std::to_string(kTrials) + " window splits, max gap " +
                        format_gap(max_gap)};
}

AxiomCheck check_session_separability(const RuleSpec& rule, const Allocation& alloc,
                                      const std::vector<PlayerId>& players,
                                      const std::vector<const Session*>& selected) {
  std::map<PlayerId, double> summed;
  for (const Session* s : selected) {
    for (const auto& [player, amount] : attribute_session(*s, rule)) {
      summed[player] += amount;
    }
  }
  double max_gap = 0.0;
  for (const PlayerId& p : players) {
    const auto it = summed.find(p);
    const double direct = it == summed.end() ? 0.0 : it->second;
    max_gap = std::max(max_gap, std::abs(direct - alloc.amount(p)));
  }
  return AxiomCheck{"SS",
                    max_gap <= kTol ? AxiomStatus::Pass : AxiomStatus::Fail,
                    "per-session sum vs window allocation, max gap " +
                        format_gap(max_gap)};
}

AxiomCheck check_non_manipulability(const SessionLog& log, const TimeWindow& w,
                                    const RuleSpec& rule, const Allocation& alloc,
                                    const std::vector<PlayerId>& players,
                                    std::mt19937_64& rng) {
  std::vector<std::string> channels;
  for (const PlayerId& p : players) {
    if (p.is_channel()) channels.push_back(p.channel_name());
  }

  const bool expected_fail = rule.kind == RuleSpec::Kind::ShapleyDD12;
  if (channels.size() < 2) {
    if (expected_fail) {
      return AxiomCheck{"NM", AxiomStatus::ExpectedFail,
                        "fewer than two channels in log; rule is manipulable in "
                        "general (e.g. [platform:0, A:4, B:6] pays the parts 6 "
                        "but a merged channel 5)"};
    }
    return AxiomCheck{"NM", AxiomStatus::Pass,
                      "fewer than two channels in log (vacuous)"};
  }

  const int trials = expected_fail ? 3 : 10;
  double max_gap = 0.0;
  std::string first_breach;
  for (int t = 0; t < trials; ++t) {
    // Draw 2..4 distinct channels to merge.
    std::vector<std::string> pool = channels;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t take =
        2 + (pool.size() > 2 ? rng() % std::min<std::size_t>(pool.size() - 1, 3) : 0);
    pool.resize(std::min(take, pool.size()));

    std::string merged_name = pool[0];
    for (std::size_t i = 1; i < pool.size(); ++i) merged_name += "+" + pool[i];
    while (std::find(channels.begin(), channels.end(), merged_name) != channels.end()) {
      merged_name += "*";
    }

    const SessionLog merged_log = merge_channels(log, pool, merged_name);
    const Allocation merged_alloc = attribute_window(merged_log, w, rule);

    double parts_total = 0.0;
    for (const std::string& name : pool) parts_total += alloc.amount(PlayerId::channel(name));
    const double merged_gap =
        std::abs(merged_alloc.amount(PlayerId::channel(merged_name)) - parts_total);
    max_gap = std::max(max_gap, merged_gap);
    if (merged_gap > kTol && first_breach.empty()) {
      first_breach = "merging {" + merged_name + "} changed the combined payoff by " +
                     format_gap(merged_gap);
    }

    for (const PlayerId& p : players) {
      if (p.is_channel() &&
          std::find(pool.begin(), pool.end(), p.channel_name()) != pool.end()) {
        continue;
      }
      const double bystander_gap = std::abs(merged_alloc.amount(p) - alloc.amount(p));
      max_gap = std::max(max_gap, bystander_gap);
      if (bystander_gap > kTol && first_breach.empty()) {
        first_breach = "merge changed bystander " + p.label() + " by " +
                       format_gap(bystander_gap);
      }
    }
  }

  if (expected_fail) {
    std::string detail = first_breach.empty()
                             ? "no deviation on this log; rule is manipulable in "
                               "general (e.g. [platform:0, A:4, B:6] pays the "
                               "parts 6 but a merged channel 5)"
                             : first_breach + " (expected for this rule)";
    return AxiomCheck{"NM", AxiomStatus::ExpectedFail, std::move(detail)};
  }
  if (!first_breach.empty()) {
    return AxiomCheck{"NM", AxiomStatus::Fail, std::move(first_breach)};
  }
  return AxiomCheck{"NM", AxiomStatus::Pass,
                    std::to_string(trials) + " random merges, max gap " +
                        format_gap(max_gap)};
}

AxiomCheck check_symmetry(const SessionLog& log, const TimeWindow& w,
                          const RuleSpec& rule, const Allocation& alloc) {
  if (!has_matching_game(rule)) {
    return AxiomCheck{"SYM*", AxiomStatus::NotApplicable,
                      "no underlying coalition game for rule " + rule.name()};
  }
  const MaskGame game = build_mask_game(log, w, matching_game(rule));
  const std::size_t n = game.size();

  std::size_t symmetric_pairs = 0;
  double max_gap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::uint32_t bi = 1U << i;
      const std::uint32_t bj = 1U << j;
      bool symmetric = true;
      for (std::uint32_t mask = 0; mask < game.values.size() && symmetric; ++mask) {
        if (mask & (bi | bj)) continue;
        symmetric = game.values[mask | bi] == game.values[mask | bj];
      }
      if (!symmetric) continue;
      ++symmetric_pairs;
      const double gap = std::abs(alloc.amount(game.players[i]) -
                                  alloc.amount(game.players[j]));
      max_gap = std::max(max_gap, gap);
      if (gap > kTol) {
        return AxiomCheck{"SYM*", AxiomStatus::Fail,
                          "symmetric players " + game.players[i].label() + " and " +
                              game.players[j].label() + " differ by " +
                              format_gap(gap)};
      }
    }
  }
  if (symmetric_pairs == 0) {
    return AxiomCheck{"SYM*", AxiomStatus::Pass,
                      "no symmetric pairs in this instance (vacuous)"};
  }
  return AxiomCheck{"SYM*", AxiomStatus::Pass,
                    std::to_string(symmetric_pairs) + " symmetric pair(s), max gap " +
                        format_gap(max_gap)};
}

}  // namespace

AxiomReport axiom_suite(const SessionLog& log, const TimeWindow& w,
                        const RuleSpec& rule, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<PlayerId> players = player_set(log);
  const std::vector<const Session*> selected = window_filter(log, w);
  const Allocation alloc = attribute_window(log, w, rule);

  AxiomReport report;
  report.checks.push_back(check_efficiency(alloc, log, w));
  report.checks.push_back(check_null_player(alloc, players, selected));
  report.checks.push_back(check_monotonicity(log, w, rule, alloc, players, rng));
  report.checks.push_back(check_stability(log, w, rule, alloc));
  report.checks.push_back(
      check_time_separability(log, w, rule, alloc, players, selected, rng));
  report.checks.push_back(check_session_separability(rule, alloc, players, selected));
  report.checks.push_back(
      check_non_manipulability(log, w, rule, alloc, players, rng));
  report.checks.push_back(check_symmetry(log, w, rule, alloc));
  return report;
}

}  // namespace revattr
