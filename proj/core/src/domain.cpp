#include "revattr/domain.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

namespace revattr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

ParseError::ParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message),
      line_(line) {}

// ---------------------------------------------------------------------------
// PlayerId
// ---------------------------------------------------------------------------

PlayerId PlayerId::channel(std::string name) {
  if (name.empty()) {
    throw ValidationError("channel name must be non-empty");
  }
  return PlayerId(PlayerKind::Channel, std::move(name));
}

std::string PlayerId::label() const {
  switch (kind_) {
    case PlayerKind::Platform:
      return "platform";
    case PlayerKind::Search:
      return "search";
    case PlayerKind::Recommender:
      return "recommender";
    case PlayerKind::Channel:
      return "channel:" + name_;
  }
  throw std::logic_error("invalid PlayerKind");
}

PlayerId PlayerId::from_label(std::string_view label) {
  if (label == "platform") return platform();
  if (label == "search") return search();
  if (label == "recommender") return recommender();
  constexpr std::string_view kChannelPrefix = "channel:";
  if (label.starts_with(kChannelPrefix)) {
    auto name = label.substr(kChannelPrefix.size());
    if (name.empty()) {
      throw ValidationError("channel name must be non-empty in label '" +
                            std::string(label) + "'");
    }
    return channel(std::string(name));
  }
  throw ValidationError("unknown player label '" + std::string(label) +
                        "' (expected platform, search, recommender, or "
                        "channel:<name>)");
}

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

Money Money::from_units(double units) {
  if (!std::isfinite(units)) {
    throw ValidationError("monetary amount must be finite");
  }
  const double scaled = units * static_cast<double>(kScale);
  if (scaled >= 9.2e18 || scaled <= -9.2e18) {
    throw ValidationError("monetary amount out of range");
  }
  return Money{static_cast<std::int64_t>(std::llround(scaled))};
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

Session::Session(std::string id, double start_time, double end_time,
                 std::vector<Event> events, std::optional<PlayerId> attractor)
    : id_(std::move(id)),
      start_(start_time),
      end_(end_time),
      events_(std::move(events)),
      attractor_(std::move(attractor)) {
  if (id_.empty()) {
    throw ValidationError("session id must be non-empty");
  }
  if (!std::isfinite(start_) || !std::isfinite(end_)) {
    throw ValidationError("session '" + id_ + "': timestamps must be finite");
  }
  if (start_ < 0.0) {
    throw ValidationError("session '" + id_ + "': start time must be nonnegative");
  }
  if (end_ < start_) {
    throw ValidationError("session '" + id_ + "': end time precedes start time");
  }
  if (events_.empty()) {
    throw ValidationError("session '" + id_ + "': events must be non-empty");
  }
  if (!events_.front().owner.is_platform()) {
    throw ValidationError("session '" + id_ + "': first event must be platform");
  }
  for (std::size_t k = 1; k < events_.size(); ++k) {
    if (events_[k].owner.is_platform()) {
      throw ValidationError("session '" + id_ + "': event " + std::to_string(k) +
                            ": platform may own only the entry event");
    }
  }
  for (std::size_t k = 0; k < events_.size(); ++k) {
    if (events_[k].revenue.micros < 0) {
      throw ValidationError("session '" + id_ + "': event " + std::to_string(k) +
                            ": negative revenue");
    }
  }
  revenue_ = Money{};
  for (const Event& e : events_) revenue_ += e.revenue;
}

// ---------------------------------------------------------------------------
// TimeWindow
// ---------------------------------------------------------------------------

TimeWindow TimeWindow::all() {
  return TimeWindow{0.0, std::numeric_limits<double>::infinity()};
}

// ---------------------------------------------------------------------------
// SessionLog
// ---------------------------------------------------------------------------

SessionLog::SessionLog(std::vector<Session> sessions)
    : sessions_(std::move(sessions)) {
  std::set<std::string_view> seen;
  for (const Session& s : sessions_) {
    if (!seen.insert(s.id()).second) {
      throw ValidationError("duplicate session id '" + s.id() + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// JSONL parsing / serialization
// ---------------------------------------------------------------------------

namespace {

Session parse_session_json(const json& j) {
  if (!j.is_object()) {
    throw ValidationError("expected a JSON object");
  }
  const auto require = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) {
      throw ValidationError(std::string("missing required field '") + key + "'");
    }
    return *it;
  };

  const json& jid = require("id");
  if (!jid.is_string()) throw ValidationError("field 'id' must be a string");

  const json& jstart = require("start");
  const json& jend = require("end");
  if (!jstart.is_number() || !jend.is_number()) {
    throw ValidationError("fields 'start' and 'end' must be numbers");
  }

  const json& jevents = require("events");
  if (!jevents.is_array()) throw ValidationError("field 'events' must be an array");

  std::vector<Event> events;
  events.reserve(jevents.size());
  for (std::size_t k = 0; k < jevents.size(); ++k) {
    const json& je = jevents[k];
    const std::string at = "session '" + jid.get<std::string>() + "': event " +
                           std::to_string(k) + ": ";
    if (!je.is_object()) throw ValidationError(at + "expected an object");
    auto owner_it = je.find("owner");
    if (owner_it == je.end() || !owner_it->is_string()) {
      throw ValidationError(at + "field 'owner' must be a string");
    }
    auto rev_it = je.find("revenue");
    if (rev_it == je.end() || !rev_it->is_number()) {
      throw ValidationError(at + "field 'revenue' must be a number");
    }
    const double rev = rev_it->get<double>();
    if (rev < 0.0) {
      throw ValidationError(at + "negative revenue");
    }
    events.push_back(Event{PlayerId::from_label(owner_it->get<std::string>()),
                           Money::from_units(rev)});
  }

  std::optional<PlayerId> attractor;
  if (auto it = j.find("attractor"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("field 'attractor' must be a string");
    attractor = PlayerId::from_label(it->get<std::string>());
  }

  return Session(jid.get<std::string>(), jstart.get<double>(),
                 jend.get<double>(), std::move(events), std::move(attractor));
}

}  // namespace

ParseResult parse_session_log(std::istream& in, LogFormat /*format*/) {
  ParseResult result;
  std::vector<Session> sessions;
  std::unordered_map<std::string, std::size_t> id_lines;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }

    try {
      Session s = parse_session_json(j);
      if (auto [it, inserted] = id_lines.emplace(s.id(), line_no); !inserted) {
        throw ValidationError("duplicate session id '" + s.id() +
                              "' (first seen at line " +
                              std::to_string(it->second) + ")");
      }
      if (s.events().front().revenue.micros > 0) {
        std::ostringstream warning;
        warning << "line " << line_no << ": session '" << s.id()
                << "': platform entry event carries revenue "
                << s.events().front().revenue.units()
                << "; it is attributed to the platform under every rule";
        result.warnings.push_back(warning.str());
      }
      sessions.push_back(std::move(s));
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }

  result.log = SessionLog(std::move(sessions));
  return result;
}

ParseResult parse_session_log_file(const std::string& path, LogFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open session log '" + path + "'");
  }
  return parse_session_log(in, format);
}

void write_session_log(std::ostream& out, const SessionLog& log, LogFormat /*format*/) {
  for (const Session& s : log) {
    json j;
    j["id"] = s.id();
    j["start"] = s.start_time();
    j["end"] = s.end_time();
    if (s.attractor()) j["attractor"] = s.attractor()->label();
    json events = json::array();
    for (const Event& e : s.events()) {
      events.push_back({{"owner", e.owner.label()}, {"revenue", e.revenue.units()}});
    }
    j["events"] = std::move(events);
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Window selection and totals
// ---------------------------------------------------------------------------

std::vector<const Session*> window_filter(const SessionLog& log, const TimeWindow& w) {
  std::vector<const Session*> out;
  if (w.empty()) return out;
  for (const Session& s : log) {
    if (w.contains_end(s.end_time())) out.push_back(&s);
  }
  return out;
}

Money total_revenue(std::span<const Session* const> sessions) {
  Money sum;
  for (const Session* s : sessions) sum += s->revenue();
  return sum;
}

Money total_revenue(const SessionLog& log, const TimeWindow& w) {
  Money sum;
  for (const Session& s : log) {
    if (w.contains_end(s.end_time())) sum += s.revenue();
  }
  return sum;
}

std::vector<PlayerId> player_set(const SessionLog& log) {
  std::set<PlayerId> channels;
  for (const Session& s : log) {
    for (const Event& e : s.events()) {
      if (e.owner.is_channel()) channels.insert(e.owner);
    }
  }
  std::vector<PlayerId> players{PlayerId::platform(), PlayerId::search(),
                                PlayerId::recommender()};
  players.insert(players.end(), channels.begin(), channels.end());
  return players;
}

// ---------------------------------------------------------------------------
// Allocation
// ---------------------------------------------------------------------------

double Allocation::amount(const PlayerId& p) const {
  auto it = amounts_.find(p);
  return it == amounts_.end() ? 0.0 : it->second;
}

double Allocation::total() const {
  double sum = 0.0;
  for (const auto& [player, amount] : amounts_) sum += amount;
  return sum;
}

double Allocation::website_total() const {
  return amount(PlayerId::platform()) + amount(PlayerId::search()) +
         amount(PlayerId::recommender());
}

}  // namespace revattr
