#include <doctest.h>

#include <algorithm>
#include <set>

#include "signbench/error.hpp"
#include "signbench/mcda.hpp"
#include "signbench/rng.hpp"

using namespace signbench;
using namespace signbench::mcda;

namespace {

const std::vector<CriteriaRecord> kCohort{{"A", 10, 0.9, 0.8}, {"B", 20, 0.6, 0.5}, {"C", 30, 0.3, 0.2}};

// Straight transcription of the scoring loop, kept apart from the library.
std::vector<double> oracle_scores(const std::vector<CriteriaRecord>& c, double we, double wa, double wg) {
  double emin = 1e300, emax = -1e300, amax = 0, gmin = 1e300, gmax = -1e300;
  for (const auto& r : c) {
    emin = std::min(emin, r.efficiency);
    emax = std::max(emax, r.efficiency);
    amax = std::max(amax, r.accuracy);
    gmin = std::min(gmin, r.generalizability);
    gmax = std::max(gmax, r.generalizability);
  }
  const double sum = we + wa + wg;
  std::vector<double> out;
  for (const auto& r : c) {
    const double ne = emax == emin ? 1.0 : (r.efficiency - emin) / (emax - emin);
    const double ng = gmax == gmin ? 1.0 : (r.generalizability - gmin) / (gmax - gmin);
    out.push_back((we * ne + wa * r.accuracy / amax + wg * ng) / sum);
  }
  return out;
}

std::vector<std::string> order(const RankedResult& r) {
  std::vector<std::string> names;
  for (const auto& e : r.entries) names.push_back(e.name);
  return names;
}

std::vector<CriteriaRecord> random_cohort(SplitMix64& rng, std::size_t n) {
  std::vector<CriteriaRecord> c;
  for (std::size_t i = 0; i < n; ++i) {
    c.push_back({"alg" + std::to_string(i), rng.uniform(0.01, 5.0), rng.uniform(0.05, 1.0), rng.uniform(0.0, 1.0)});
  }
  return c;
}

}  // namespace

TEST_CASE("normalizers") {
  const std::vector<double> a{10, 20, 30};
  CHECK(normalize_minmax(a) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(normalize_minmax(std::vector<double>{5, 5, 5}) == std::vector<double>{1, 1, 1});
  CHECK(normalize_minmax(std::vector<double>{7}) == std::vector<double>{1});
  const auto r = normalize_ratio(std::vector<double>{0.9, 0.6, 0.3});
  CHECK(r[0] == 1.0);
  CHECK(r[1] == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(r[2] == doctest::Approx(0.3333).epsilon(1e-4));
  CHECK(normalize_ratio(std::vector<double>{0.42}) == std::vector<double>{1.0});
  CHECK_THROWS_AS(normalize_ratio(std::vector<double>{0, 0}), ConfigError);
  CHECK_THROWS_AS(normalize_minmax(std::vector<double>{}), ConfigError);
}

TEST_CASE("hand cohort scores and order") {
  CHECK(overall_score(0, kCohort) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(overall_score(1, kCohort) == doctest::Approx(0.5556).epsilon(1e-4));
  CHECK(overall_score(2, kCohort) == doctest::Approx(0.4444).epsilon(1e-4));
  const RankedResult r = rank(kCohort);
  CHECK(order(r) == std::vector<std::string>{"A", "B", "C"});
  CHECK(r.report() ==
        "1. A: Overall_Score = 0.6667\n2. B: Overall_Score = 0.5556\n3. C: Overall_Score = 0.4444\n");
}

TEST_CASE("weights select criteria") {
  CHECK(overall_score(1, kCohort, {1, 0, 0}) == doctest::Approx(0.5));
  CHECK(overall_score(2, kCohort, {1, 0, 0}) == doctest::Approx(1.0));
  CHECK(overall_score(2, kCohort, {0, 2, 0}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(overall_score(0, kCohort, {0, 0, 0}), ConfigError);
  CHECK_THROWS_AS(overall_score(0, kCohort, {-1, 1, 1}), ConfigError);
  CHECK_THROWS_AS(overall_score(3, kCohort), ConfigError);
}

TEST_CASE("degenerate cohorts score 1") {
  const std::vector<CriteriaRecord> same{{"x", 2, 0.5, 0.5}, {"y", 2, 0.5, 0.5}, {"z", 2, 0.5, 0.5}};
  const RankedResult r = rank(same);
  for (const auto& e : r.entries) CHECK(e.score == doctest::Approx(1.0));
  CHECK(order(r) == std::vector<std::string>{"x", "y", "z"});
  const RankedResult one = rank(std::vector<CriteriaRecord>{{"solo", 3, 0.2, 0.1}});
  CHECK(one.entries.size() == 1);
  CHECK(one.entries[0].score == doctest::Approx(1.0));
  CHECK_THROWS_AS(rank(std::vector<CriteriaRecord>{}), ConfigError);
}

TEST_CASE("invalid records are rejected") {
  CHECK_THROWS_AS(rank(std::vector<CriteriaRecord>{{"a", 0, 0.5, 0.5}}), ConfigError);
  CHECK_THROWS_AS(rank(std::vector<CriteriaRecord>{{"a", 1, 1.5, 0.5}}), ConfigError);
  CHECK_THROWS_AS(rank(std::vector<CriteriaRecord>{{"a", 1, 0.5, -0.1}}), ConfigError);
}

TEST_CASE("scores agree with an independent transcription") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto cohort = random_cohort(rng, 1 + rng.below(8));
    const Weights w{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.01, 1)};
    const auto expected = oracle_scores(cohort, w.efficiency, w.accuracy, w.generalizability);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      const double s = overall_score(i, cohort, w);
      REQUIRE(s == doctest::Approx(expected[i]).epsilon(1e-12));
      REQUIRE(s >= 0.0);
      REQUIRE(s <= 1.0 + 1e-12);
    }
    const auto r = rank(cohort, w);
    std::multiset<std::string> in, out;
    for (const auto& c : cohort) in.insert(c.name);
    for (const auto& e : r.entries) out.insert(e.name);
    REQUIRE(in == out);
    for (std::size_t i = 1; i < r.entries.size(); ++i) REQUIRE(r.entries[i - 1].score >= r.entries[i].score);
  }
}

TEST_CASE("ranking is invariant under affine column transforms") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto cohort = random_cohort(rng, 2 + rng.below(7));
    const Weights w{rng.uniform(0.05, 1), rng.uniform(0.05, 1), rng.uniform(0.05, 1)};
    const auto base = rank(cohort, w);
    const double ea = rng.uniform(0.1, 10), eb = rng.uniform(0, 5);
    const double gscale = rng.uniform(0.05, 1), ascale = rng.uniform(0.05, 1);
    auto t = cohort;
    double gmax = 0, amax = 0;
    for (const auto& c : cohort) {
      gmax = std::max(gmax, c.generalizability);
      amax = std::max(amax, c.accuracy);
    }
    // keep transformed columns inside the valid [0,1] domain
    const double ga = gscale / std::max(gmax, 1e-9), gb = rng.uniform(0, 1 - gscale);
    const double aa = ascale / amax;
    for (auto& c : t) {
      c.efficiency = ea * c.efficiency + eb;
      c.generalizability = ga * c.generalizability + gb;
      c.accuracy = aa * c.accuracy;
    }
    const auto moved = rank(t, w);
    REQUIRE(order(moved) == order(base));
    for (std::size_t i = 0; i < base.entries.size(); ++i) {
      REQUIRE(moved.entries[i].score == doctest::Approx(base.entries[i].score).epsilon(1e-9));
    }
  }
}

TEST_CASE("adding a dominated record never lifts it above its dominator") {
  SplitMix64 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    auto cohort = random_cohort(rng, 2 + rng.below(5));
    const auto& top = cohort[rng.below(cohort.size())];
    CriteriaRecord weak{"weak", top.efficiency * rng.uniform(0.2, 1.0), top.accuracy * rng.uniform(0.2, 1.0),
                        top.generalizability * rng.uniform(0.0, 1.0)};
    const std::string top_name = top.name;
    cohort.push_back(weak);
    const auto r = rank(cohort);
    double s_top = 0, s_weak = 0;
    for (const auto& e : r.entries) {
      if (e.name == top_name) s_top = e.score;
      if (e.name == "weak") s_weak = e.score;
    }
    REQUIRE(s_top >= s_weak);
  }
}

TEST_CASE("criteria CSV round trip and errors") {
  const std::string text = write_criteria_csv(kCohort);
  CHECK(text.rfind("name,efficiency,accuracy,generalizability\n", 0) == 0);
  const auto back = read_criteria_csv(text);
  REQUIRE(back.size() == 3);
  CHECK(back[1].name == "B");
  CHECK(back[1].efficiency == 20);
  CHECK(back[2].generalizability == doctest::Approx(0.2));
  CHECK(read_criteria_csv("name,efficiency,accuracy,generalizability\r\nA,1,0.5,0.5\r\n\n").size() == 1);
  CHECK_THROWS_AS(read_criteria_csv(""), DataError);
  CHECK_THROWS_AS(read_criteria_csv("a,b,c\n"), DataError);
  CHECK_THROWS_AS(read_criteria_csv("name,efficiency,accuracy,generalizability\nA,1,0.5\n"), DataError);
  CHECK_THROWS_AS(read_criteria_csv("name,efficiency,accuracy,generalizability\nA,x,0.5,0.5\n"), DataError);
}

TEST_CASE("ranking JSON carries normalized weights") {
  const std::string json = ranking_to_json(rank(kCohort), Weights{2, 1, 1});
  CHECK(json.find("\"A\"") != std::string::npos);
  CHECK(json.find("0.5") != std::string::npos);
}
