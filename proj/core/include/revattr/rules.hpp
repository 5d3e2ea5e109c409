#pragma once

// Closed-form attribution rules.
//
// Every rule splits each event's revenue r(e_k), k >= 1, among players and
// credits r(e_0) to the platform:
//  - ShapleyDD12: r_k equally among the distinct owners of the prefix
//    e_0..e_k (their count is n^p_k);
//  - ShapleyDD13: half of r_k to the platform, half to owner(e_k);
//  - EventShapley: r_k proportionally to each player's event count in the
//    prefix (all k+1 events counted, including e_0);
//  - Alpha / ExpTheta: r_k proportionally to attenuated event weights — the
//    platform anchor e_0 always weighs exactly 1, and a prefix event e_l
//    (1 <= l <= k) weighs alpha(k - l). ExpTheta uses alpha(d) = theta^d
//    (with 0^0 = 1), interpolating from ShapleyDD13 (theta = 0) to
//    EventShapley (theta = 1).

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revattr/domain.hpp"

namespace revattr {

/// A discrete nonincreasing weight alpha: Z+ -> [0,1] with alpha(0) = 1,
/// measuring how much a touchpoint still matters `gap` events later.
class AttenuationFn {
 public:
  using Evaluator = std::function<double(unsigned)>;

  /// Wraps an arbitrary evaluator. Requires evaluator(0) == 1 (checked);
  /// monotonicity is the caller's responsibility for custom evaluators.
  AttenuationFn(Evaluator evaluator, std::string descriptor);

  /// alpha(d) = theta^d with 0^0 = 1. Requires theta in [0,1].
  static AttenuationFn exponential(double theta);

  /// Tabulated alpha extended by its last value beyond the table. Requires a
  /// non-empty table with values[0] == 1, entries in [0,1], nonincreasing.
  static AttenuationFn from_table(std::vector<double> values);

  double operator()(unsigned gap) const { return evaluator_(gap); }
  const std::string& descriptor() const noexcept { return descriptor_; }
  /// theta for members of the exponential family; nullopt otherwise. The
  /// engine's O(n_s) incremental path requires it.
  std::optional<double> exponent() const noexcept { return theta_; }

 private:
  Evaluator evaluator_;
  std::string descriptor_;
  std::optional<double> theta_;
};

/// Which attribution rule to run.
struct RuleSpec {
  enum class Kind { ShapleyDD12, ShapleyDD13, EventShapley, Alpha, ExpTheta };

  Kind kind = Kind::ShapleyDD13;
  /// Present iff kind is Alpha or ExpTheta.
  std::optional<AttenuationFn> alpha;

  static RuleSpec shapley_dd12();
  static RuleSpec shapley_dd13();
  static RuleSpec event_shapley();
  static RuleSpec with_alpha(AttenuationFn alpha);
  static RuleSpec exp_theta(double theta);

  /// Canonical name for reports: "shapley-dd12", "shapley-dd13",
  /// "event-shapley", "exp:<theta>", or "alpha:<descriptor>".
  std::string name() const;

  /// Parses "shapley-dd12" | "shapley-dd13" | "event-shapley" | "exp:<theta>".
  /// Tabulated alpha rules are built via with_alpha (the CLI resolves
  /// "alpha:<file>"). Throws ValidationError on unknown names.
  static RuleSpec parse(std::string_view name);
};

/// Splits one session's revenue. The result covers the players that received
/// nonzero credit (plus the platform for single-event sessions) and sums to
/// the session revenue.
std::map<PlayerId, double> attribute_session(const Session& s, const RuleSpec& rule);

/// Element-wise sum of attribute_session over the sessions ending in `w`.
/// Covers every player of player_set(log), zeros included; the total equals
/// the window revenue within numeric tolerance.
///
/// `threads` caps the worker count (0 = hardware concurrency). The reduction
/// order is fixed, so results are bit-identical for any thread count.
Allocation attribute_window(const SessionLog& log, const TimeWindow& w,
                            const RuleSpec& rule, unsigned threads = 1);

/// Per-event credit table of the ShapleyDD12 rule: for each player, the
/// credit received from each event e_0..e_{n_s} of `s` (r_k / n^p_k for
/// prefix members). Row sums equal attribute_session(s, shapley-dd12).
std::map<PlayerId, std::vector<double>> shapley_dd12_breakdown(const Session& s);

}  // namespace revattr
