#include "revattr/games.hpp"

namespace revattr {

Money session_value(const Session& s, const Coalition& f, GameKind kind) {
  if (!f.contains(PlayerId::platform())) return Money{};

  const auto& events = s.events();
  Money value = events[0].revenue;
  if (kind == GameKind::DD12) {
    // Maximal prefix: stop at the first owner outside the coalition.
    for (std::size_t k = 1; k < events.size(); ++k) {
      if (!f.contains(events[k].owner)) break;
      value += events[k].revenue;
    }
  } else {
    // Event selection: only the excluded events' revenues are removed.
    for (std::size_t k = 1; k < events.size(); ++k) {
      if (f.contains(events[k].owner)) value += events[k].revenue;
    }
  }
  return value;
}

Money window_value(const SessionLog& log, const TimeWindow& w, const Coalition& f,
                   GameKind kind) {
  Money value;
  for (const Session& s : log) {
    if (w.contains_end(s.end_time())) value += session_value(s, f, kind);
  }
  return value;
}

}  // namespace revattr
