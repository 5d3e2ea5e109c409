#pragma once

// Core data model: players, money, events, sessions, time windows, session
// logs, allocations, and JSONL ingestion/serialization.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace revattr {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// A structural rule of the data model was violated (bad player label,
/// negative revenue, channel-first session, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A session-log stream could not be parsed. Carries the 1-based line number
/// of the offending line; what() is prefixed with "line N: ".
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A file or stream could not be opened/read/written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Players
// ---------------------------------------------------------------------------

enum class PlayerKind : std::uint8_t {
  Platform = 0,
  Search = 1,
  Recommender = 2,
  Channel = 3,
};

/// Identity of a revenue-sharing participant: the platform, the search
/// service, the recommender service, or a named content channel.
///
/// Ordering is deterministic and used everywhere reports are emitted:
/// platform < search < recommender < channels (lexicographic by name).
class PlayerId {
 public:
  PlayerId() : kind_(PlayerKind::Platform) {}

  static PlayerId platform() { return PlayerId(PlayerKind::Platform); }
  static PlayerId search() { return PlayerId(PlayerKind::Search); }
  static PlayerId recommender() { return PlayerId(PlayerKind::Recommender); }
  /// Throws ValidationError if `name` is empty.
  static PlayerId channel(std::string name);

  PlayerKind kind() const noexcept { return kind_; }
  bool is_platform() const noexcept { return kind_ == PlayerKind::Platform; }
  bool is_channel() const noexcept { return kind_ == PlayerKind::Channel; }
  /// Channel name; empty for non-channel players.
  const std::string& channel_name() const noexcept { return name_; }

  /// Wire/report encoding: "platform", "search", "recommender",
  /// "channel:<name>".
  std::string label() const;
  /// Inverse of label(). Throws ValidationError on unknown encodings.
  static PlayerId from_label(std::string_view label);

  friend auto operator<=>(const PlayerId&, const PlayerId&) = default;

 private:
  explicit PlayerId(PlayerKind kind, std::string name = {})
      : kind_(kind), name_(std::move(name)) {}

  PlayerKind kind_;
  std::string name_;  // non-empty iff kind_ == Channel
};

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

/// Monetary amount in fixed point with 6 fractional digits (micro-units).
/// Exact under addition; rule computations convert to double and compare
/// final allocations with an absolute tolerance of 1e-9.
struct Money {
  static constexpr std::int64_t kScale = 1'000'000;

  std::int64_t micros = 0;

  static constexpr Money from_micros(std::int64_t m) { return Money{m}; }
  /// Rounds half-away-from-zero to the nearest micro-unit. Throws
  /// ValidationError for non-finite or out-of-range values.
  static Money from_units(double units);

  double units() const noexcept {
    return static_cast<double>(micros) / static_cast<double>(kScale);
  }
  bool is_zero() const noexcept { return micros == 0; }

  Money& operator+=(Money other) noexcept {
    micros += other.micros;
    return *this;
  }
  Money& operator-=(Money other) noexcept {
    micros -= other.micros;
    return *this;
  }
  friend Money operator+(Money a, Money b) noexcept { return Money{a.micros + b.micros}; }
  friend Money operator-(Money a, Money b) noexcept { return Money{a.micros - b.micros}; }
  friend auto operator<=>(const Money&, const Money&) = default;
};

// ---------------------------------------------------------------------------
// Events and sessions
// ---------------------------------------------------------------------------

/// One touchpoint of a session: who owns it and what revenue it carries.
struct Event {
  PlayerId owner;
  Money revenue;
};

/// An ordered chain of events produced by one user visit. events()[0] is the
/// platform entry event e0; the remaining events are owned by the search
/// service, the recommender service, or channels. A session is monetized
/// only once finished, so windows select sessions by end time.
class Session {
 public:
  /// Validates all invariants; throws ValidationError describing the first
  /// violation (non-empty id and events, platform-first, service/channel
  /// tail, nonnegative revenues, finite timestamps, start <= end).
  Session(std::string id, double start_time, double end_time,
          std::vector<Event> events,
          std::optional<PlayerId> attractor = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  double start_time() const noexcept { return start_; }
  double end_time() const noexcept { return end_; }
  /// All events including the entry event e0.
  const std::vector<Event>& events() const noexcept { return events_; }
  /// Number of events after e0 (the session "length" n_s).
  std::size_t tail_length() const noexcept { return events_.size() - 1; }
  /// Total revenue of the session including r(e0).
  Money revenue() const noexcept { return revenue_; }
  /// Recorded but ignored by every attribution rule.
  const std::optional<PlayerId>& attractor() const noexcept { return attractor_; }

 private:
  std::string id_;
  double start_;
  double end_;
  std::vector<Event> events_;
  std::optional<PlayerId> attractor_;
  Money revenue_;
};

// ---------------------------------------------------------------------------
// Time windows
// ---------------------------------------------------------------------------

/// Half-open interval ]begin, end]: a session belongs to the window iff
/// begin < end_time <= end. begin >= end denotes the empty window.
struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;

  static TimeWindow all();  // ]0, +inf]

  bool contains_end(double t) const noexcept { return begin < t && t <= end; }
  bool empty() const noexcept { return !(begin < end); }

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// ---------------------------------------------------------------------------
// Session logs
// ---------------------------------------------------------------------------

/// An ordered collection of sessions with unique ids.
class SessionLog {
 public:
  SessionLog() = default;
  /// Throws ValidationError on duplicate session ids.
  explicit SessionLog(std::vector<Session> sessions);

  const std::vector<Session>& sessions() const noexcept { return sessions_; }
  std::size_t size() const noexcept { return sessions_.size(); }
  bool empty() const noexcept { return sessions_.empty(); }
  const Session& operator[](std::size_t i) const { return sessions_[i]; }

  auto begin() const noexcept { return sessions_.begin(); }
  auto end() const noexcept { return sessions_.end(); }

 private:
  std::vector<Session> sessions_;
};

/// Result of parsing a session-log stream: the log plus non-fatal,
/// line-numbered warnings (e.g. a platform entry event carrying revenue).
struct ParseResult {
  SessionLog log;
  std::vector<std::string> warnings;
};

enum class LogFormat { Jsonl };

/// Parses a JSON-Lines session log (one session object per line; blank lines
/// ignored). Throws ParseError with the 1-based line number on the first
/// malformed or invalid line.
ParseResult parse_session_log(std::istream& in, LogFormat format = LogFormat::Jsonl);

/// Convenience file overload. Throws IoError if the file cannot be opened.
ParseResult parse_session_log_file(const std::string& path,
                                   LogFormat format = LogFormat::Jsonl);

/// Serializes a log in the same JSONL format; output re-parses to an equal
/// log (round-trip property).
void write_session_log(std::ostream& out, const SessionLog& log,
                       LogFormat format = LogFormat::Jsonl);

// ---------------------------------------------------------------------------
// Window selection and totals
// ---------------------------------------------------------------------------

/// Sessions whose end time falls in `w`, in log order. Pointers remain valid
/// while `log` is alive.
std::vector<const Session*> window_filter(const SessionLog& log, const TimeWindow& w);

/// Sum of all event revenues over `sessions`.
Money total_revenue(std::span<const Session* const> sessions);
/// Sum over the sessions of `log` ending in `w`.
Money total_revenue(const SessionLog& log, const TimeWindow& w);

/// The player set N induced by a log: platform, search and recommender
/// services, plus every channel owning at least one event, in deterministic
/// report order.
std::vector<PlayerId> player_set(const SessionLog& log);

// ---------------------------------------------------------------------------
// Allocations
// ---------------------------------------------------------------------------

/// A monetary split of a window's revenue over players. Amounts are doubles:
/// attribution rules divide revenues by arbitrary integers, so fixed point
/// is not closed under them; efficiency holds within 1e-9.
class Allocation {
 public:
  Allocation() = default;
  Allocation(TimeWindow window, std::map<PlayerId, double> amounts)
      : window_(window), amounts_(std::move(amounts)) {}

  const TimeWindow& window() const noexcept { return window_; }
  const std::map<PlayerId, double>& amounts() const noexcept { return amounts_; }
  /// Amount for `p`, 0 if absent.
  double amount(const PlayerId& p) const;
  /// Sum over all players.
  double total() const;
  /// The "W" aggregate: platform + search + recommender.
  double website_total() const;

 private:
  TimeWindow window_;
  std::map<PlayerId, double> amounts_;
};

}  // namespace revattr
