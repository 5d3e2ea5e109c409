#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "revattr/simulator.hpp"
#include "test_support.hpp"

using namespace revattr;
using namespace testsup;

namespace {

constexpr const char* kPaperModelText = R"(# reference behavior model
players = search recommender channel:1 channel:2 channel:3
initial = 0.25 0.13 0.25 0.25 0.12
transition:
  0.1 0.4 0.2 0.2 0.1
  0   0   0.4 0.4 0.2
  0.1 0.5 0.4 0   0
  0.1 0.5 0   0.4 0
  0.1 0.7 0   0   0.2
revenue = channel:1 3 channel:2 6 channel:3 9 recommender 1
length = 5
sessions = 100
replications = 10
seed = 42
)";

BehaviorModel parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_behavior_model(in);
}

/// Single-state chain: every tail event is owned by the search service.
BehaviorModel chain_model() {
  BehaviorModel m;
  m.support = {ws()};
  m.initial = {1.0};
  m.transition = {{1.0}};
  m.revenue_profile[ws()] = Money::from_units(2);
  m.session_length = 4;
  m.sessions_per_window = 1;
  m.replications = 1;
  m.seed = 7;
  return m;
}

std::size_t line_of(const std::string& text, const char* needle) {
  std::istringstream in(text);
  std::string row;
  std::size_t n = 0;
  while (std::getline(in, row)) {
    ++n;
    if (row.find(needle) != std::string::npos) return n;
  }
  return 0;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("the bundled preset matches its documentation") {
  CHECK(builtin_preset_names() == std::vector<std::string>{"paper"});
  const BehaviorModel m = builtin_preset("paper");
  CHECK_NOTHROW(m.validate());

  REQUIRE(m.support.size() == 5);
  CHECK(m.support[0] == ws());
  CHECK(m.support[1] == wr());
  CHECK(m.support[2] == ch("1"));
  CHECK(m.support[3] == ch("2"));
  CHECK(m.support[4] == ch("3"));
  CHECK(m.initial == std::vector<double>{0.25, 0.13, 0.25, 0.25, 0.12});
  REQUIRE(m.transition.size() == 5);
  CHECK(m.transition[0] == std::vector<double>{0.1, 0.4, 0.2, 0.2, 0.1});
  CHECK(m.transition[1] == std::vector<double>{0.0, 0.0, 0.4, 0.4, 0.2});
  CHECK(m.transition[2] == std::vector<double>{0.1, 0.5, 0.4, 0.0, 0.0});
  CHECK(m.transition[3] == std::vector<double>{0.1, 0.5, 0.0, 0.4, 0.0});
  CHECK(m.transition[4] == std::vector<double>{0.1, 0.7, 0.0, 0.0, 0.2});
  CHECK(m.revenue_for(ch("1")) == Money::from_units(3));
  CHECK(m.revenue_for(ch("2")) == Money::from_units(6));
  CHECK(m.revenue_for(ch("3")) == Money::from_units(9));
  CHECK(m.revenue_for(wr()) == Money::from_units(1));
  CHECK(m.revenue_for(ws()) == Money{});  // absent from the profile
  CHECK(m.session_length == 5);
  CHECK(m.sessions_per_window == 100);
  CHECK(m.replications == 10);
  CHECK(m.seed == 42);
  CHECK_FALSE(m.geometric_stop.has_value());

  CHECK_THROWS_AS((void)builtin_preset("tv"), ValidationError);
}

TEST_CASE("model validation rejects each broken invariant") {
  const BehaviorModel good = builtin_preset("paper");
  CHECK_NOTHROW(good.validate());

  BehaviorModel m = good;
  m.support.clear();
  m.initial.clear();
  m.transition.clear();
  m.revenue_profile.clear();
  CHECK_THROWS_AS(m.validate(), ValidationError);  // empty support

  m = good;
  m.support[0] = wp();
  CHECK_THROWS_AS(m.validate(), ValidationError);  // platform in support

  m = good;
  m.support[1] = m.support[0];
  CHECK_THROWS_AS(m.validate(), ValidationError);  // duplicate player

  m = good;
  m.initial.pop_back();
  CHECK_THROWS_AS(m.validate(), ValidationError);  // wrong vector size

  m = good;
  m.initial[0] = 0.35;
  CHECK_THROWS_AS(m.validate(), ValidationError);  // does not sum to 1

  m = good;
  m.initial[0] = -0.25;
  m.initial[1] = 0.63;
  CHECK_THROWS_AS(m.validate(), ValidationError);  // negative entry

  m = good;
  m.transition.pop_back();
  CHECK_THROWS_AS(m.validate(), ValidationError);  // not square

  m = good;
  m.transition[2][0] = 0.2;
  CHECK_THROWS_AS(m.validate(), ValidationError);  // row does not sum to 1

  m = good;
  m.revenue_profile[ch("off-model")] = Money::from_units(1);
  CHECK_THROWS_AS(m.validate(), ValidationError);  // revenue outside support

  m = good;
  m.sessions_per_window = 0;
  CHECK_THROWS_AS(m.validate(), ValidationError);

  m = good;
  m.replications = 0;
  CHECK_THROWS_AS(m.validate(), ValidationError);

  m = good;
  m.geometric_stop = 1.5;
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("model files parse into the documented preset") {
  const BehaviorModel parsed = parse_text(kPaperModelText);
  const BehaviorModel preset = builtin_preset("paper");
  CHECK(parsed.support == preset.support);
  CHECK(parsed.initial == preset.initial);
  CHECK(parsed.transition == preset.transition);
  CHECK(parsed.revenue_profile == preset.revenue_profile);
  CHECK(parsed.session_length == preset.session_length);
  CHECK(parsed.sessions_per_window == preset.sessions_per_window);
  CHECK(parsed.replications == preset.replications);
  CHECK(parsed.seed == preset.seed);
}

TEST_CASE("model file diagnostics carry line numbers") {
  const auto parse_line = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      (void)parse_behavior_model(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;  // no ParseError raised
  };

  SUBCASE("unknown key") {
    const std::string text = "players = search\nviewers = 3\n";
    CHECK(parse_line(text) == 2);
  }
  SUBCASE("platform cannot be a support player") {
    CHECK(parse_line("players = platform search\n") == 1);
  }
  SUBCASE("bad number") {
    const std::string text = "players = search\ninitial = one\n";
    CHECK(parse_line(text) == 2);
  }
  SUBCASE("transition before players") {
    CHECK(parse_line("transition:\n") == 1);
  }
  SUBCASE("short transition row") {
    std::string text(kPaperModelText);
    const std::size_t row = line_of(text, "0   0   0.4");
    text.replace(text.find("0   0   0.4 0.4 0.2"), 19, "0 0 1");
    CHECK(parse_line(text) == row);
  }
  SUBCASE("duplicate key") {
    const std::string text = "players = search\nseed = 1\nseed = 2\n";
    CHECK(parse_line(text) == 3);
  }
  SUBCASE("negative revenue") {
    const std::string text = "players = search\nrevenue = search -1\n";
    CHECK(parse_line(text) == 2);
  }
  SUBCASE("missing sections are reported at end of file") {
    CHECK(parse_line("players = search\ninitial = 1\n") == 2);  // no transition
  }
  SUBCASE("a parseable but invalid model fails validation") {
    const std::string text =
        "players = search\ninitial = 0.5\ntransition:\n1\n";
    std::istringstream in(text);
    CHECK_THROWS_AS((void)parse_behavior_model(in), ValidationError);
  }
}

TEST_CASE("session generation follows the chain") {
  const BehaviorModel m = chain_model();

  SUBCASE("deterministic single-state walk") {
    SessionRng rng(derive_stream_seed(m.seed, 0, 0));
    const Session s = generate_session(m, rng, "walk", 2.0, 3.0);
    CHECK(s.id() == "walk");
    CHECK(s.start_time() == 2.0);
    CHECK(s.end_time() == 3.0);
    REQUIRE(s.tail_length() == 4);
    CHECK(s.events()[0].owner == wp());
    CHECK(s.events()[0].revenue == Money{});
    for (std::size_t k = 1; k < s.events().size(); ++k) {
      CHECK(s.events()[k].owner == ws());
      CHECK(s.events()[k].revenue == Money::from_units(2));
    }
    CHECK(s.revenue() == Money::from_units(8));
  }
  SUBCASE("length zero yields platform-only sessions") {
    BehaviorModel zero = m;
    zero.session_length = 0;
    SessionRng rng(1);
    const Session s = generate_session(zero, rng);
    CHECK(s.tail_length() == 0);
    CHECK(s.revenue() == Money{});
  }
  SUBCASE("geometric stop of 1 ends after the first tail event") {
    BehaviorModel stop = m;
    stop.geometric_stop = 1.0;
    SessionRng rng(1);
    const Session s = generate_session(stop, rng);
    CHECK(s.tail_length() == 1);
  }
  SUBCASE("geometric stop of 0 keeps the exact length") {
    BehaviorModel stop = m;
    stop.geometric_stop = 0.0;
    SessionRng rng(1);
    const Session s = generate_session(stop, rng);
    CHECK(s.tail_length() == 4);
  }
  SUBCASE("same seed, same session; the session index changes the stream") {
    const BehaviorModel paper = builtin_preset("paper");
    SessionRng a(derive_stream_seed(42, 3, 17));
    SessionRng b(derive_stream_seed(42, 3, 17));
    SessionRng c(derive_stream_seed(42, 3, 18));
    const Session sa = generate_session(paper, a);
    const Session sb = generate_session(paper, b);
    const Session sc = generate_session(paper, c);
    REQUIRE(sa.events().size() == sb.events().size());
    for (std::size_t k = 0; k < sa.events().size(); ++k) {
      CHECK(sa.events()[k].owner == sb.events()[k].owner);
      CHECK(sa.events()[k].revenue == sb.events()[k].revenue);
    }
    bool differs = sa.events().size() != sc.events().size();
    for (std::size_t k = 0; !differs && k < sa.events().size(); ++k) {
      differs = !(sa.events()[k].owner == sc.events()[k].owner);
    }
    CHECK(differs);
  }
}

TEST_CASE("stream seeds are pairwise distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t rep = 0; rep < 25; ++rep) {
    for (std::uint64_t idx = 0; idx < 40; ++idx) {
      seen.insert(derive_stream_seed(42, rep, idx));
    }
  }
  CHECK(seen.size() == 25 * 40);
  CHECK(derive_stream_seed(42, 0, 0) != derive_stream_seed(43, 0, 0));
}

TEST_CASE("first-event marginals track the initial distribution") {
  BehaviorModel m = builtin_preset("paper");
  m.session_length = 1;
  constexpr std::size_t kDraws = 20000;
  std::map<PlayerId, std::size_t> counts;
  for (std::size_t i = 0; i < kDraws; ++i) {
    SessionRng rng(derive_stream_seed(42, 0, i));
    const Session s = generate_session(m, rng);
    REQUIRE(s.tail_length() == 1);
    ++counts[s.events()[1].owner];
  }
  for (std::size_t j = 0; j < m.support.size(); ++j) {
    const double p = m.initial[j];
    const double freq =
        static_cast<double>(counts[m.support[j]]) / static_cast<double>(kDraws);
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(kDraws));
    CHECK_MESSAGE(std::abs(freq - p) <= 4.0 * sigma,
                  m.support[j].label() << ": " << freq << " vs " << p);
  }
}

TEST_CASE("a one-session experiment reduces to a plain attribution") {
  BehaviorModel m = builtin_preset("paper");
  m.sessions_per_window = 1;
  m.replications = 1;
  const RuleSpec rule = RuleSpec::shapley_dd12();
  const ExperimentTable table = run_experiment(m, {rule});

  SessionRng rng(derive_stream_seed(m.seed, 0, 0));
  const Session s = generate_session(m, rng, "r0-s0", 0.0, 1.0);
  const auto credit = attribute_session(s, rule);
  const double total = s.revenue().units();
  REQUIRE(total > 0.0);

  REQUIRE(table.rule_names == std::vector<std::string>{"shapley-dd12"});
  REQUIRE(table.players.size() == 6);
  double website = 0.0;
  for (std::size_t j = 0; j < table.players.size(); ++j) {
    const PlayerId& p = table.players[j];
    const auto it = credit.find(p);
    const double want = (it == credit.end() ? 0.0 : it->second) / total;
    CHECK(near(table.cell(0, j).mean, want));
    CHECK(table.cell(0, j).std_dev == 0.0);  // single replication
    if (!p.is_channel()) website += table.cell(0, j).mean;
  }
  CHECK(near(table.website[0].mean, website));
  CHECK(table.website[0].std_dev == 0.0);
}

TEST_CASE("experiment tables are deterministic and well-formed") {
  BehaviorModel m = builtin_preset("paper");
  m.sessions_per_window = 40;
  m.replications = 4;
  const std::vector<RuleSpec> rules{RuleSpec::shapley_dd12(),
                                    RuleSpec::exp_theta(0.0),
                                    RuleSpec::exp_theta(1.0)};

  const ExperimentTable one = run_experiment(m, rules, 1);
  const ExperimentTable three = run_experiment(m, rules, 3);
  REQUIRE(one.rule_names.size() == 3);
  REQUIRE(one.players.size() == 6);
  REQUIRE(one.cells.size() == 3);
  for (std::size_t r = 0; r < one.cells.size(); ++r) {
    double mean_sum = 0.0;
    for (std::size_t j = 0; j < one.players.size(); ++j) {
      CHECK(one.cell(r, j).mean == three.cell(r, j).mean);  // bit-identical
      CHECK(one.cell(r, j).std_dev == three.cell(r, j).std_dev);
      CHECK(one.cell(r, j).mean >= 0.0);
      mean_sum += one.cell(r, j).mean;
    }
    CHECK(near(mean_sum, 1.0, 1e-9));  // shares of each replication sum to 1
    CHECK(one.website[r].mean == three.website[r].mean);
  }

  // exp:0 splits every session 50/50 with the owners: the platform share is
  // exactly one half in every replication, so its spread collapses to zero.
  const std::size_t platform_col = 0;
  REQUIRE(one.players[platform_col] == wp());
  CHECK(near(one.cell(1, platform_col).mean, 0.5));
  CHECK(near(one.cell(1, platform_col).std_dev, 0.0));
}

TEST_CASE("reference-model trends at the default length") {
  // Robust length-5 facts, pinned against the shipped preset: the prefix
  // rule pays the website more than exp:1 does, and channel 1 beats
  // channel 3 under both (three cheap events outrank one expensive one).
  const BehaviorModel m = builtin_preset("paper");
  const ExperimentTable table = run_experiment(
      m, {RuleSpec::shapley_dd12(), RuleSpec::exp_theta(1.0)}, 2);
  REQUIRE(table.players.size() == 6);
  REQUIRE(table.players[3] == ch("1"));
  REQUIRE(table.players[5] == ch("3"));
  CHECK(table.website[0].mean > table.website[1].mean);
  CHECK(table.cell(0, 3).mean > table.cell(0, 5).mean);
  CHECK(table.cell(1, 3).mean > table.cell(1, 5).mean);
}

}  // TEST_SUITE
