#pragma once

// Markov-chain session generator and seeded experiment runner: draws session
// event chains from a behavior model, attributes them under a set of rules,
// and reports per-player revenue shares (mean and standard deviation across
// replications).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "revattr/domain.hpp"
#include "revattr/rules.hpp"

namespace revattr {

// ---------------------------------------------------------------------------
// Behavior model
// ---------------------------------------------------------------------------

/// A first-order Markov model of session behavior. `support` lists the
/// non-platform players (services and channels) in the index order used by
/// `initial` and `transition`: a session starts at the platform entry event,
/// the first tail event's owner is drawn from `initial`, and each subsequent
/// owner from the transition row of the previous one.
struct BehaviorModel {
  std::vector<PlayerId> support;
  std::vector<double> initial;                   // size == support.size()
  std::vector<std::vector<double>> transition;   // square, row-stochastic
  std::map<PlayerId, Money> revenue_profile;     // per-event revenue; absent = 0

  /// Number of events after the entry event. 0 produces platform-only
  /// sessions.
  std::size_t session_length = 5;
  std::size_t sessions_per_window = 100;
  std::size_t replications = 10;
  std::uint64_t seed = 42;

  /// Optional early termination: after each tail event, the session ends with
  /// this probability; `session_length` remains a hard cap. Disabled by
  /// default so lengths are exact.
  std::optional<double> geometric_stop;

  /// Throws ValidationError on the first violated invariant (probability
  /// vectors summing to 1 within 1e-12, nonnegative entries, square matrix,
  /// revenue keys inside the support, positive counts).
  void validate() const;

  /// Per-event revenue for `owner`; Money{} when absent from the profile.
  Money revenue_for(const PlayerId& owner) const;
};

/// Built-in models addressable by name from the CLI. "paper" is the bundled
/// reference model: support {search, recommender, channels 1..3},
/// I = (0.25, 0.13, 0.25, 0.25, 0.12), the 5x5 transition matrix documented
/// in the README, per-event revenues 3/6/9 for channels 1/2/3 and 1 for the
/// recommender, length 5, 100 sessions, 10 replications, seed 42.
BehaviorModel builtin_preset(const std::string& name);
std::vector<std::string> builtin_preset_names();

/// Parses the model-file format (see README): `key = value` lines, a
/// `transition:` block of matrix rows, `#` comments. Throws ParseError with
/// a 1-based line number; the file overload throws IoError when unreadable.
BehaviorModel parse_behavior_model(std::istream& in);
BehaviorModel parse_behavior_model_file(const std::string& path);

// ---------------------------------------------------------------------------
// Deterministic randomness
// ---------------------------------------------------------------------------

/// Portable random stream: std::mt19937_64 (bit-exact across platforms by
/// the standard) mapped to [0,1) via (x >> 11) * 2^-53.
class SessionRng {
 public:
  explicit SessionRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

/// Stream seed for session `session_index` of replication `replication`:
/// a splitmix64-style finalizer over the experiment seed and both indices.
/// Every session gets an independent generator, so replications can run in
/// parallel and still produce bit-identical streams.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t replication,
                                 std::uint64_t session_index) noexcept;

// ---------------------------------------------------------------------------
// Session generation
// ---------------------------------------------------------------------------

/// Draws one session: a zero-revenue platform entry event followed by up to
/// `session_length` events whose owners follow the Markov chain and whose
/// revenues come from the revenue profile. Precondition: `model.validate()`
/// passes (not re-checked here).
Session generate_session(const BehaviorModel& model, SessionRng& rng,
                         std::string id = "s0", double start_time = 0.0,
                         double end_time = 1.0);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ShareStat {
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation; 0 for one replication
};

/// Mean/stddev of per-player revenue shares for each rule, across
/// replications. Row order follows the requested rules; player order is the
/// deterministic report order (platform, search, recommender, channels
/// lexicographic). `website` holds the aggregate W share (platform + search
/// + recommender) per rule.
struct ExperimentTable {
  std::vector<std::string> rule_names;
  std::vector<PlayerId> players;
  std::vector<std::vector<ShareStat>> cells;  // cells[rule][player]
  std::vector<ShareStat> website;             // website[rule]

  const ShareStat& cell(std::size_t rule, std::size_t player) const {
    return cells.at(rule).at(player);
  }
};

/// Runs `model.replications` windows of `model.sessions_per_window` sessions
/// each and attributes every window under every rule (the same sessions are
/// reused across rules, so rule comparisons are paired). Deterministic for a
/// fixed model and seed, independent of `threads`.
ExperimentTable run_experiment(const BehaviorModel& model,
                               const std::vector<RuleSpec>& rules,
                               unsigned threads = 1);

}  // namespace revattr
