#include <doctest.h>

#include <random>
#include <stdexcept>

#include "revattr/engine.hpp"
#include "test_support.hpp"

using namespace revattr;
using namespace testsup;

namespace {

AttenuationFn half_exp() { return AttenuationFn::exponential(0.5); }

std::vector<AttenuationFn> alpha_zoo() {
  return {AttenuationFn::exponential(0.0), AttenuationFn::exponential(0.31),
          AttenuationFn::exponential(0.5), AttenuationFn::exponential(1.0),
          AttenuationFn::from_table({1.0, 0.7, 0.7, 0.2}),
          AttenuationFn::from_table({1.0})};
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("relevance matrix layout") {
  SUBCASE("two tail events, alpha = (1/2)^d") {
    const Session s = tail_session("s", 1, {{ch("A"), 4}, {ch("B"), 6}});
    const RelevanceMatrix m = build_relevance_matrix(s, half_exp());
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 2);
    CHECK(m.at(0, 0) == 1.0);
    CHECK(m.at(1, 0) == 1.0);
    CHECK(m.at(2, 0) == 0.0);  // e2's row is below the band in column 0
    CHECK(m.at(0, 1) == 1.0);
    CHECK(m.at(1, 1) == 0.5);  // alpha(1): e1 one step before e2
    CHECK(m.at(2, 1) == 1.0);  // alpha(0)
  }
  SUBCASE("single tail event is anchor plus itself") {
    const Session s = tail_session("s", 1, {{ch("A"), 4}});
    const RelevanceMatrix m = build_relevance_matrix(s, half_exp());
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 1);
    CHECK(m.at(0, 0) == 1.0);
    CHECK(m.at(1, 0) == 1.0);
  }
  SUBCASE("theta = 1 fills the whole band with ones") {
    const Session s =
        tail_session("s", 1, {{ch("A"), 1}, {ch("B"), 1}, {ch("C"), 1}});
    const RelevanceMatrix m =
        build_relevance_matrix(s, AttenuationFn::exponential(1.0));
    REQUIRE(m.rows() == 4);
    REQUIRE(m.cols() == 3);
    for (std::size_t col = 0; col < m.cols(); ++col) {
      for (std::size_t row = 0; row < m.rows(); ++row) {
        CHECK(m.at(row, col) == (row <= col + 1 ? 1.0 : 0.0));
      }
    }
  }
}

TEST_CASE("normalize_and_credit") {
  const Session s = tail_session("s", 1, {{ch("A"), 4}, {ch("B"), 6}});
  const RelevanceMatrix m = build_relevance_matrix(s, half_exp());
  const std::vector<Money> revenues{Money::from_units(4), Money::from_units(6)};
  const std::vector<PlayerId> owners{wp(), ch("A"), ch("B")};

  SUBCASE("matches the hand-computed exp:0.5 credits") {
    const auto credit = normalize_and_credit(m, revenues, owners);
    CHECK(near(credit.at(wp()), 4.4));
    CHECK(near(credit.at(ch("A")), 3.2));
    CHECK(near(credit.at(ch("B")), 2.4));
  }
  SUBCASE("repeat owners fold into one entry") {
    const std::vector<PlayerId> folded{wp(), ch("A"), ch("A")};
    const auto credit = normalize_and_credit(m, revenues, folded);
    REQUIRE(credit.size() == 2);
    CHECK(near(credit.at(ch("A")), 3.2 + 2.4));
  }
  SUBCASE("dimension and owner validation") {
    const std::vector<Money> short_rev{Money::from_units(4)};
    CHECK_THROWS_AS((void)normalize_and_credit(m, short_rev, owners),
                    ValidationError);
    const std::vector<PlayerId> bad_owners{ch("A"), ch("A"), ch("B")};
    CHECK_THROWS_AS((void)normalize_and_credit(m, revenues, bad_owners),
                    ValidationError);
  }
  SUBCASE("zero column sum is rejected") {
    RelevanceMatrix zeroed(3, 2);
    zeroed.at(0, 0) = 1.0;
    zeroed.at(1, 0) = 1.0;  // column 1 left all-zero
    CHECK_THROWS_AS((void)normalize_and_credit(zeroed, revenues, owners),
                    std::logic_error);
  }
}

TEST_CASE("engine agrees with the closed-form rules") {
  std::mt19937_64 rng(0xE17AULL);
  for (int trial = 0; trial < 40; ++trial) {
    const SessionLog log = random_log(rng, {.max_sessions = 4, .max_tail = 50});
    for (const Session& s : log) {
      for (const AttenuationFn& alpha : alpha_zoo()) {
        const auto direct =
            attribute_session(s, RuleSpec::with_alpha(alpha));
        const auto matrix =
            engine_attribute_session(s, alpha, EnginePath::Matrix);
        CHECK(max_abs_diff(direct, matrix) <= 1e-9);
        if (alpha.exponent()) {
          const auto incremental =
              engine_attribute_session(s, alpha, EnginePath::Incremental);
          CHECK(max_abs_diff(direct, incremental) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("session engine validates its stream") {
  SessionEngine engine(half_exp());

  CHECK_THROWS_AS(engine.push_event(Event{ch("A"), Money::from_units(1)}),
                  ValidationError);  // first event must be platform-owned
  engine.push_event(Event{wp(), Money{}});
  CHECK_THROWS_AS(engine.push_event(Event{wp(), Money{}}),
                  ValidationError);  // platform may own only the entry event
  engine.push_event(Event{ch("A"), Money::from_units(4)});
  engine.push_event(Event{ch("B"), Money::from_units(6)});
  CHECK(engine.event_count() == 3);

  const auto credit = engine.finalize();
  CHECK(near(credit.at(wp()), 4.4));
  CHECK(near(credit.at(ch("A")), 3.2));
  CHECK(near(credit.at(ch("B")), 2.4));

  // finalize resets: the engine is reusable and empty
  CHECK(engine.event_count() == 0);
  CHECK_THROWS_AS((void)engine.finalize(), ValidationError);
  engine.push_event(Event{wp(), Money::from_units(3)});
  const auto entry_only = engine.finalize();
  REQUIRE(entry_only.size() == 1);
  CHECK(near(entry_only.at(wp()), 3.0));
}

TEST_CASE("incremental path requires an exponential alpha") {
  CHECK_THROWS_AS(
      SessionEngine(AttenuationFn::from_table({1.0, 0.5}), EnginePath::Incremental),
      ValidationError);
  CHECK_NOTHROW(SessionEngine(half_exp(), EnginePath::Incremental));
}

TEST_CASE("window-level engine equals the rules path") {
  const SessionLog sample = sample_log();
  const Allocation theta0 = engine_attribute_window(
      sample, TimeWindow::all(), AttenuationFn::exponential(0.0));
  CHECK(near(theta0.amount(wp()), 45.0));
  CHECK(near(theta0.amount(ws()), 0.0));
  CHECK(near(theta0.amount(wr()), 4.5));
  CHECK(near(theta0.amount(ch("1")), 9.0));
  CHECK(near(theta0.amount(ch("2")), 18.0));
  CHECK(near(theta0.amount(ch("3")), 13.5));

  std::mt19937_64 rng(0x3E0DULL);
  const SessionLog log = random_log(rng, {.max_sessions = 300});
  const TimeWindow w{2.0, 250.0};
  for (const AttenuationFn& alpha : alpha_zoo()) {
    const Allocation direct =
        attribute_window(log, w, RuleSpec::with_alpha(alpha));
    const Allocation via_matrix =
        engine_attribute_window(log, w, alpha, EnginePath::Matrix);
    CHECK(max_abs_diff(direct.amounts(), via_matrix.amounts()) <= 1e-9);
    if (alpha.exponent()) {
      const Allocation via_inc = engine_attribute_window(
          log, w, alpha, EnginePath::Incremental);
      CHECK(max_abs_diff(direct.amounts(), via_inc.amounts()) <= 1e-9);
    }
  }

  // thread count never changes the result bits
  const Allocation one =
      engine_attribute_window(log, w, half_exp(), EnginePath::Matrix, 1);
  for (unsigned threads : {2u, 5u, 16u}) {
    const Allocation many =
        engine_attribute_window(log, w, half_exp(), EnginePath::Matrix, threads);
    for (const auto& [player, amount] : one.amounts()) {
      CHECK(many.amount(player) == amount);
    }
  }
}

}  // TEST_SUITE
