#include <doctest.h>

#include <random>

#include "revattr/games.hpp"
#include "test_support.hpp"

using namespace revattr;
using namespace testsup;

namespace {

Coalition coalition_from_mask(const std::vector<PlayerId>& players,
                              std::uint32_t mask) {
  Coalition f;
  for (std::size_t b = 0; b < players.size(); ++b) {
    if (mask >> b & 1U) f.insert(players[b]);
  }
  return f;
}

}  // namespace

TEST_SUITE("games") {

TEST_CASE("dd12 truncates at the first excluded owner") {
  const Session s = tail_session("s", 1.0, {{ch("A"), 4}, {ch("B"), 6}});

  CHECK(session_value(s, Coalition{wp(), ch("A")}, GameKind::DD12) ==
        Money::from_units(4));  // prefix stops before B
  CHECK(session_value(s, Coalition{wp(), ch("B")}, GameKind::DD12).is_zero());
  CHECK(session_value(s, Coalition{wp(), ch("A"), ch("B")}, GameKind::DD12) ==
        Money::from_units(10));
  CHECK(session_value(s, Coalition{wp()}, GameKind::DD12).is_zero());
}

TEST_CASE("dd13 keeps every owned event") {
  const Session s = tail_session("s", 1.0, {{ch("A"), 4}, {ch("B"), 6}});

  CHECK(session_value(s, Coalition{wp(), ch("B")}, GameKind::DD13) ==
        Money::from_units(6));
  CHECK(session_value(s, Coalition{wp(), ch("A")}, GameKind::DD13) ==
        Money::from_units(4));
  CHECK(session_value(s, Coalition{wp()}, GameKind::DD13).is_zero());
  CHECK(session_value(s, Coalition{wp(), ch("A"), ch("B")}, GameKind::DD13) ==
        Money::from_units(10));
}

TEST_CASE("coalitions without the platform generate nothing") {
  const Session s = tail_session("s", 1.0, {{ch("A"), 4}, {ch("B"), 6}});
  const Coalition f{ch("A"), ch("B")};
  CHECK(session_value(s, f, GameKind::DD12).is_zero());
  CHECK(session_value(s, f, GameKind::DD13).is_zero());
}

TEST_CASE("entry revenue belongs to any platform coalition") {
  const Session s = make_session("s", 0, 1, {{wp(), 2}, {ch("A"), 4}});
  CHECK(session_value(s, Coalition{wp()}, GameKind::DD12) == Money::from_units(2));
  CHECK(session_value(s, Coalition{wp()}, GameKind::DD13) == Money::from_units(2));
  CHECK(session_value(s, Coalition{wp(), ch("A")}, GameKind::DD12) ==
        Money::from_units(6));
}

TEST_CASE("window_value sums sessions ending in the window") {
  const SessionLog log = sample_log();
  const std::vector<PlayerId> all = player_set(log);
  Coalition n;
  for (const PlayerId& p : all) n.insert(p);

  CHECK(window_value(log, TimeWindow::all(), n, GameKind::DD12) ==
        Money::from_units(90));
  CHECK(window_value(log, TimeWindow::all(), n, GameKind::DD13) ==
        Money::from_units(90));
  CHECK(window_value(log, TimeWindow::all(), Coalition{}, GameKind::DD12).is_zero());
  CHECK(window_value(log, TimeWindow{7, 3}, n, GameKind::DD12).is_zero());

  // s3 only (]20,30]), F = {w_p, w_s, channel 2}: prefix e0..e3 of s3
  CHECK(window_value(log, TimeWindow{20, 30}, Coalition{wp(), ws(), ch("2")},
                     GameKind::DD12) == Money::from_units(12));
}

TEST_CASE("window games are monotone and convex in the coalition") {
  std::mt19937_64 rng(0xC0FFEEULL);
  for (int trial = 0; trial < 40; ++trial) {
    const SessionLog log = random_log(rng, {.max_channels = 4, .max_sessions = 6,
                                            .max_tail = 6});
    const std::vector<PlayerId> players = player_set(log);
    const std::uint32_t full = (1U << players.size()) - 1;
    const TimeWindow w =
        trial % 3 == 0 ? TimeWindow{1.5, 4.5} : TimeWindow::all();

    for (const GameKind kind : {GameKind::DD12, GameKind::DD13}) {
      for (int probe = 0; probe < 25; ++probe) {
        const std::size_t i = rng() % players.size();
        const std::uint32_t bit = 1U << i;
        std::uint32_t g = static_cast<std::uint32_t>(rng()) & full & ~bit;
        std::uint32_t f = static_cast<std::uint32_t>(rng()) & g;  // F subseteq G

        const Coalition cf = coalition_from_mask(players, f);
        const Coalition cg = coalition_from_mask(players, g);
        const Coalition cfi = coalition_from_mask(players, f | bit);
        const Coalition cgi = coalition_from_mask(players, g | bit);

        const Money vf = window_value(log, w, cf, kind);
        const Money vg = window_value(log, w, cg, kind);
        const Money vfi = window_value(log, w, cfi, kind);
        const Money vgi = window_value(log, w, cgi, kind);

        CHECK(vf <= vg);                          // monotone
        CHECK(vfi - vf <= vgi - vg);              // convex (exact in micros)
      }
    }
  }
}

TEST_CASE("window games are time separable") {
  std::mt19937_64 rng(0xBEEF5ULL);
  for (int trial = 0; trial < 25; ++trial) {
    const SessionLog log = random_log(rng);
    const std::vector<PlayerId> players = player_set(log);
    const std::uint32_t full = (1U << players.size()) - 1;
    const Coalition f = coalition_from_mask(
        players, static_cast<std::uint32_t>(rng()) & full);

    const double t1 = 0.0, t3 = static_cast<double>(log.size()) + 1.0;
    const double t2 = log[rng() % log.size()].end_time();
    for (const GameKind kind : {GameKind::DD12, GameKind::DD13}) {
      const Money whole = window_value(log, TimeWindow{t1, t3}, f, kind);
      const Money left = window_value(log, TimeWindow{t1, t2}, f, kind);
      const Money right = window_value(log, TimeWindow{t2, t3}, f, kind);
      CHECK(whole == left + right);  // exact: Money arithmetic
    }
  }
}

TEST_CASE("coalition membership") {
  Coalition f{wp(), ch("A")};
  CHECK(f.contains(wp()));
  CHECK(f.contains(ch("A")));
  CHECK_FALSE(f.contains(ch("B")));
  CHECK(f.size() == 2);
  f.insert(ch("B"));
  CHECK(f.size() == 3);
  CHECK_FALSE(Coalition{}.contains(wp()));
  CHECK(Coalition{}.empty());
}

}  // TEST_SUITE
