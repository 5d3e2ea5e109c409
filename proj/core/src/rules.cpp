#include "revattr/rules.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "parallel.hpp"

namespace revattr {

// ---------------------------------------------------------------------------
// AttenuationFn
// ---------------------------------------------------------------------------

namespace {

std::string format_theta(double theta) {
  std::ostringstream out;
  out << theta;
  return out.str();
}

}  // namespace

AttenuationFn::AttenuationFn(Evaluator evaluator, std::string descriptor)
    : evaluator_(std::move(evaluator)), descriptor_(std::move(descriptor)) {
  if (!evaluator_) {
    throw ValidationError("attenuation evaluator must be callable");
  }
  if (evaluator_(0) != 1.0) {
    throw ValidationError("attenuation function must satisfy alpha(0) = 1");
  }
}

AttenuationFn AttenuationFn::exponential(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ValidationError("exponential attenuation requires theta in [0, 1]");
  }
  AttenuationFn fn(
      [theta](unsigned gap) {
        // 0^0 = 1 by convention; std::pow honors it for integral exponents.
        return gap == 0 ? 1.0 : std::pow(theta, static_cast<double>(gap));
      },
      "exp:" + format_theta(theta));
  fn.theta_ = theta;
  return fn;
}

AttenuationFn AttenuationFn::from_table(std::vector<double> values) {
  if (values.empty()) {
    throw ValidationError("attenuation table must be non-empty");
  }
  if (values.front() != 1.0) {
    throw ValidationError("attenuation table must start with alpha(0) = 1");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw ValidationError("attenuation table entries must lie in [0, 1]");
    }
    if (i > 0 && values[i] > values[i - 1]) {
      throw ValidationError("attenuation table must be nonincreasing (entry " +
                            std::to_string(i) + " increases)");
    }
  }
  std::string descriptor = "table[" + std::to_string(values.size()) + "]";
  return AttenuationFn(
      [table = std::move(values)](unsigned gap) {
        // Beyond the table the last value extends as a constant tail.
        return gap < table.size() ? table[gap] : table.back();
      },
      std::move(descriptor));
}

// ---------------------------------------------------------------------------
// RuleSpec
// ---------------------------------------------------------------------------

RuleSpec RuleSpec::shapley_dd12() { return RuleSpec{Kind::ShapleyDD12, std::nullopt}; }
RuleSpec RuleSpec::shapley_dd13() { return RuleSpec{Kind::ShapleyDD13, std::nullopt}; }
RuleSpec RuleSpec::event_shapley() { return RuleSpec{Kind::EventShapley, std::nullopt}; }

RuleSpec RuleSpec::with_alpha(AttenuationFn alpha) {
  return RuleSpec{Kind::Alpha, std::move(alpha)};
}

RuleSpec RuleSpec::exp_theta(double theta) {
  return RuleSpec{Kind::ExpTheta, AttenuationFn::exponential(theta)};
}

std::string RuleSpec::name() const {
  switch (kind) {
    case Kind::ShapleyDD12:
      return "shapley-dd12";
    case Kind::ShapleyDD13:
      return "shapley-dd13";
    case Kind::EventShapley:
      return "event-shapley";
    case Kind::ExpTheta:
      return alpha->descriptor();  // "exp:<theta>"
    case Kind::Alpha:
      return "alpha:" + alpha->descriptor();
  }
  throw std::logic_error("invalid RuleSpec kind");
}

RuleSpec RuleSpec::parse(std::string_view name) {
  if (name == "shapley-dd12") return shapley_dd12();
  if (name == "shapley-dd13") return shapley_dd13();
  if (name == "event-shapley") return event_shapley();
  constexpr std::string_view kExpPrefix = "exp:";
  if (name.starts_with(kExpPrefix)) {
    const std::string text(name.substr(kExpPrefix.size()));
    std::size_t consumed = 0;
    double theta = 0.0;
    try {
      theta = std::stod(text, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != text.size() || text.empty()) {
      throw ValidationError("invalid theta in rule '" + std::string(name) + "'");
    }
    return exp_theta(theta);
  }
  throw ValidationError("unknown rule '" + std::string(name) +
                        "' (expected shapley-dd12, shapley-dd13, event-shapley, "
                        "exp:<theta>, or alpha:<file>)");
}

// ---------------------------------------------------------------------------
// attribute_session
// ---------------------------------------------------------------------------

namespace {

using CreditMap = std::map<PlayerId, double>;

void credit_shapley_dd12(const Session& s, CreditMap& credit) {
  const auto& events = s.events();
  const std::size_t n = s.tail_length();

  // Per-event split c_k = r_k / n^p_k; a player first seen at event f
  // belongs to every prefix from f on, so her credit is a suffix sum.
  std::map<PlayerId, std::size_t> first_seen;
  first_seen.emplace(PlayerId::platform(), 0);
  std::size_t distinct = 1;
  std::vector<double> split(n + 2, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    if (first_seen.emplace(events[k].owner, k).second) ++distinct;
    split[k] = events[k].revenue.units() / static_cast<double>(distinct);
  }
  std::vector<double> suffix(n + 2, 0.0);
  for (std::size_t k = n; k >= 1; --k) suffix[k] = suffix[k + 1] + split[k];

  for (const auto& [player, f] : first_seen) {
    credit[player] += suffix[std::max<std::size_t>(f, 1)];
  }
}

void credit_shapley_dd13(const Session& s, CreditMap& credit) {
  const auto& events = s.events();
  double platform_half = 0.0;
  for (std::size_t k = 1; k < events.size(); ++k) {
    const double half = events[k].revenue.units() / 2.0;
    credit[events[k].owner] += half;
    platform_half += half;
  }
  credit[PlayerId::platform()] += platform_half;
}

void credit_event_shapley(const Session& s, CreditMap& credit) {
  const auto& events = s.events();
  const std::size_t n = s.tail_length();

  // Event e_l sits in every prefix E^k with k >= l and weighs 1/(k+1) there,
  // so each event's credit is a suffix sum of the per-event splits.
  std::vector<double> suffix(n + 2, 0.0);
  for (std::size_t k = n; k >= 1; --k) {
    suffix[k] = suffix[k + 1] + events[k].revenue.units() / static_cast<double>(k + 1);
  }
  credit[PlayerId::platform()] += suffix[1];  // e_0 counts in every prefix
  for (std::size_t l = 1; l <= n; ++l) {
    credit[events[l].owner] += suffix[l];
  }
}

void credit_alpha(const Session& s, const AttenuationFn& alpha, CreditMap& credit) {
  const auto& events = s.events();
  const std::size_t n = s.tail_length();
  if (n == 0) return;

  std::vector<double> a(n, 0.0);
  for (std::size_t d = 0; d < n; ++d) a[d] = alpha(static_cast<unsigned>(d));

  // prefix[k] = alpha(0) + ... + alpha(k-1); the column-k denominator is the
  // platform anchor (literal 1, never 1/alpha) plus the attenuated weights
  // of e_1..e_k.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t d = 0; d < n; ++d) prefix[d + 1] = prefix[d] + a[d];

  double platform_credit = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double rk = events[k].revenue.units();
    if (rk == 0.0) continue;
    const double denom = 1.0 + prefix[k];
    platform_credit += rk / denom;
    for (std::size_t l = 1; l <= k; ++l) {
      const double weight = a[k - l];
      if (weight != 0.0) credit[events[l].owner] += rk * weight / denom;
    }
  }
  credit[PlayerId::platform()] += platform_credit;
}

}  // namespace

std::map<PlayerId, double> attribute_session(const Session& s, const RuleSpec& rule) {
  CreditMap credit;
  switch (rule.kind) {
    case RuleSpec::Kind::ShapleyDD12:
      credit_shapley_dd12(s, credit);
      break;
    case RuleSpec::Kind::ShapleyDD13:
      credit_shapley_dd13(s, credit);
      break;
    case RuleSpec::Kind::EventShapley:
      credit_event_shapley(s, credit);
      break;
    case RuleSpec::Kind::Alpha:
    case RuleSpec::Kind::ExpTheta:
      if (!rule.alpha) {
        throw ValidationError("rule '" + rule.name() + "' lacks an attenuation function");
      }
      credit_alpha(s, *rule.alpha, credit);
      break;
  }

  // r(e_0) goes entirely to the platform under every rule.
  credit[PlayerId::platform()] += s.events()[0].revenue.units();

  for (auto it = credit.begin(); it != credit.end();) {
    it = it->second == 0.0 ? credit.erase(it) : std::next(it);
  }
  if (credit.empty()) {
    // Degenerate all-zero session: still report the platform entry.
    credit.emplace(PlayerId::platform(), 0.0);
  }
  return credit;
}

// ---------------------------------------------------------------------------
// attribute_window
// ---------------------------------------------------------------------------

Allocation attribute_window(const SessionLog& log, const TimeWindow& w,
                            const RuleSpec& rule, unsigned threads) {
  const std::vector<const Session*> selected = window_filter(log, w);

  // Fixed chunk boundaries + in-order reduction keep the floating-point
  // addition order independent of the worker count.
  constexpr std::size_t kChunk = 256;
  const std::size_t nchunks = (selected.size() + kChunk - 1) / kChunk;
  std::vector<CreditMap> partial(nchunks);
  detail::parallel_chunks(selected.size(), kChunk, threads,
                          [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                            CreditMap& sink = partial[chunk];
                            for (std::size_t i = begin; i < end; ++i) {
                              for (const auto& [player, amount] :
                                   attribute_session(*selected[i], rule)) {
                                sink[player] += amount;
                              }
                            }
                          });

  std::map<PlayerId, double> amounts;
  for (const PlayerId& p : player_set(log)) amounts[p] = 0.0;
  for (const CreditMap& chunk : partial) {
    for (const auto& [player, amount] : chunk) amounts[player] += amount;
  }
  return Allocation(w, std::move(amounts));
}

// ---------------------------------------------------------------------------
// shapley_dd12_breakdown
// ---------------------------------------------------------------------------

std::map<PlayerId, std::vector<double>> shapley_dd12_breakdown(const Session& s) {
  const auto& events = s.events();
  const std::size_t columns = events.size();

  std::map<PlayerId, std::vector<double>> table;
  std::vector<PlayerId> prefix_players;
  auto row = [&](const PlayerId& p) -> std::vector<double>& {
    auto [it, inserted] = table.emplace(p, std::vector<double>());
    if (inserted) it->second.assign(columns, 0.0);
    return it->second;
  };

  row(PlayerId::platform())[0] = events[0].revenue.units();
  prefix_players.push_back(PlayerId::platform());

  for (std::size_t k = 1; k < columns; ++k) {
    const PlayerId& owner = events[k].owner;
    if (std::find(prefix_players.begin(), prefix_players.end(), owner) ==
        prefix_players.end()) {
      prefix_players.push_back(owner);
    }
    const double share =
        events[k].revenue.units() / static_cast<double>(prefix_players.size());
    for (const PlayerId& p : prefix_players) row(p)[k] = share;
  }
  return table;
}

}  // namespace revattr
