#pragma once

// Characteristic functions of the two discrete event dynamic games.
//
// Both games value a coalition F by what it could have earned on its own:
// a session contributes nothing unless the platform is in F; given the
// platform, DD12 truncates the session at the first event owned outside F
// (removing an event ends the session), while DD13 merely skips events owned
// outside F (removing an event removes only its own revenue).

#include <initializer_list>
#include <set>

#include "revattr/domain.hpp"

namespace revattr {

enum class GameKind { DD12, DD13 };

/// A set of players F subseteq N.
class Coalition {
 public:
  Coalition() = default;
  Coalition(std::initializer_list<PlayerId> members) : members_(members) {}

  void insert(PlayerId p) { members_.insert(std::move(p)); }
  bool contains(const PlayerId& p) const { return members_.count(p) != 0; }
  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  const std::set<PlayerId>& members() const noexcept { return members_; }

  friend bool operator==(const Coalition&, const Coalition&) = default;

 private:
  std::set<PlayerId> members_;
};

/// Revenue the coalition generates from one session.
///
/// Returns 0 if the platform is outside F. Otherwise:
///  - DD12: sum of r(e_k) over the maximal prefix e_0..e_h whose owners all
///    lie in F (the session "ends" at the first excluded owner);
///  - DD13: r(e_0) plus the sum of r(e_k) over events e_k owned by F.
Money session_value(const Session& s, const Coalition& f, GameKind kind);

/// Sum of session_value over the sessions ending in `w`; 0 for an empty
/// window or empty coalition.
Money window_value(const SessionLog& log, const TimeWindow& w, const Coalition& f,
                   GameKind kind);

}  // namespace revattr
