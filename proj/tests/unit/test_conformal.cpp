#include <cmath>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "liconf/conformal.hpp"
#include "liconf/diagnostics.hpp"
#include "liconf/error.hpp"

using namespace liconf;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AnswerScoreTable table(std::vector<std::pair<std::string, double>> scores) {
  AnswerScoreTable t;
  for (auto& [u, s] : scores) t.entries.push_back({u, 0.0, 0.0, s});
  return t;
}

std::vector<ExtendedScore> finite_scores(const std::vector<double>& v) {
  std::vector<ExtendedScore> out;
  for (double x : v) out.push_back(ExtendedScore::finite(x));
  return out;
}

// Captures warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningSink previous;
  WarningCapture() {
    previous = set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
};

}  // namespace

TEST_CASE("extended scores order infinity last") {
  CHECK(ExtendedScore::finite(1.0) < ExtendedScore::infinity());
  CHECK(ExtendedScore::finite(0.2) < ExtendedScore::finite(0.3));
  CHECK(ExtendedScore::infinity() == ExtendedScore::infinity());
  CHECK(ExtendedScore::infinity().value() == kInf);
  CHECK_THROWS_AS(ExtendedScore::finite(1.5), InvalidArgument);
  CHECK_THROWS_AS(ExtendedScore::finite(-0.1), InvalidArgument);
  CHECK_THROWS_AS(ExtendedScore::finite(std::nan("")), InvalidArgument);
}

TEST_CASE("nonconformity") {
  const auto t = table({{"a", 0.4}, {"b", 0.9}, {"c", 0.7}});
  CHECK(nonconformity(t, {}).is_infinite());
  const std::vector<std::string> c{"c"};
  CHECK(nonconformity(t, c).value() == doctest::Approx(0.3).epsilon(1e-15));
  const std::vector<std::string> ab{"a", "b"};
  CHECK(nonconformity(t, ab).value() == doctest::Approx(0.1).epsilon(1e-15));
  const std::vector<std::string> missing{"z"};
  CHECK_THROWS_AS(nonconformity(t, missing), InvalidArgument);
}

TEST_CASE("conformal quantile examples") {
  const auto s = finite_scores({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  CHECK(conformal_rank(9, 0.2) == 8);
  CHECK(conformal_quantile(s, 0.2).value() == 0.8);
  const std::vector<ExtendedScore> infs(5, ExtendedScore::infinity());
  CHECK(conformal_quantile(infs, 0.1).is_infinite());
  const auto one = finite_scores({0.5});
  CHECK(conformal_rank(1, 0.4) == 2);
  CHECK(conformal_quantile(one, 0.4).is_infinite());
  CHECK_THROWS_AS(conformal_quantile(s, 0.0), InvalidArgument);
  CHECK_THROWS_AS(conformal_quantile(s, 1.0), InvalidArgument);
  CHECK_THROWS_AS(conformal_quantile(std::span<const ExtendedScore>{}, 0.1), InvalidArgument);
}

TEST_CASE("conformal quantile matches sort-and-index") {
  rng::Stream s(11);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t n = 1 + s.below(60);
    std::vector<double> raw(n);
    std::vector<ExtendedScore> ext;
    for (auto& x : raw) {
      if (s.bernoulli(0.1)) {
        x = kInf;
        ext.push_back(ExtendedScore::infinity());
      } else {
        x = std::round(s.uniform() * 20.0) / 20.0;  // plenty of ties
        ext.push_back(ExtendedScore::finite(x));
      }
    }
    const std::size_t num = 1 + s.below(999);
    const double alpha = static_cast<double>(num) / 1000.0;
    // Integer rank: ceil((n + 1)(1000 - num) / 1000).
    const std::size_t k = ((n + 1) * (1000 - num) + 999) / 1000;
    CHECK(conformal_rank(n, alpha) == std::max<std::size_t>(k, 1));
    CHECK(conformal_quantile(ext, alpha).value() == fixtures::reference_quantile(raw, std::max<std::size_t>(k, 1)));
  }
}

TEST_CASE("quantile is monotone in alpha and sets nest") {
  rng::Stream s(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(5 + s.below(40));
    for (auto& x : v) x = s.uniform();
    const auto ext = finite_scores(v);
    const double a1 = 0.01 + 0.5 * s.uniform();
    const double a2 = a1 + 0.45 * s.uniform();
    const auto q1 = conformal_quantile(ext, a1);
    const auto q2 = conformal_quantile(ext, a2);
    CHECK(q1 >= q2);
    const auto t = table({{"a", s.uniform()}, {"b", s.uniform()}, {"c", s.uniform()}});
    const auto big = prediction_set(t, q1);
    for (const auto& m : prediction_set(t, q2).members) {
      CHECK(std::find(big.members.begin(), big.members.end(), m) != big.members.end());
    }
  }
}

TEST_CASE("prediction set membership") {
  const auto t = table({{"a", 0.8}, {"b", 0.6}, {"c", 0.2}});
  CHECK(prediction_set(t, ExtendedScore::finite(0.3)).members == std::vector<std::string>{"a"});
  CHECK(prediction_set(t, ExtendedScore::finite(0.4)).members == std::vector<std::string>{"a", "b"});
  CHECK(prediction_set(t, ExtendedScore::infinity()).members == std::vector<std::string>{"a", "b", "c"});
  const auto none = prediction_set(t, ExtendedScore::finite(0.0));
  CHECK(none.size == 0);
  const std::vector<std::string> adm{"b"};
  const auto s = prediction_set(t, ExtendedScore::finite(0.3), "q", std::span<const std::string>(adm));
  CHECK(s.question_id == "q");
  CHECK(s.covered == false);
  CHECK(prediction_set(t, ExtendedScore::finite(0.4), "q", std::span<const std::string>(adm)).covered == true);
  CHECK_FALSE(prediction_set(t, ExtendedScore::finite(0.4)).covered.has_value());
}

TEST_CASE("ties at the threshold are included together") {
  const auto t = table({{"a", 0.75}, {"b", 0.75}, {"c", 0.5}});
  CHECK(prediction_set(t, ExtendedScore::finite(0.25)).members == std::vector<std::string>{"a", "b"});
}

TEST_CASE("set membership ignores calibration order") {
  rng::Stream s(17);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<ExtendedScore> v;
    for (int i = 0; i < 30; ++i) v.push_back(ExtendedScore::finite(s.uniform()));
    auto w = v;
    rng::shuffle(w.begin(), w.end(), s);
    const auto t = table({{"a", s.uniform()}, {"b", s.uniform()}});
    CHECK(prediction_set(t, conformal_quantile(v, 0.2)).members == prediction_set(t, conformal_quantile(w, 0.2)).members);
  }
}

TEST_CASE("risk floor") {
  bool two[10] = {false, false, true, false, false, false, false, true, false, false};
  CHECK(risk_floor(std::span<const bool>(two)) == doctest::Approx(2.0 / 11.0).epsilon(1e-15));
  CHECK(risk_floor(10, 2) == risk_floor(std::span<const bool>(two)));
  bool none[4] = {false, false, false, false};
  CHECK(risk_floor(std::span<const bool>(none)) == 0.0);
  bool all[4] = {true, true, true, true};
  CHECK(risk_floor(std::span<const bool>(all)) == doctest::Approx(4.0 / 5.0).epsilon(1e-15));
  CHECK_THROWS_AS(risk_floor(std::span<const bool>{}), InvalidArgument);
}

TEST_CASE("calibration warns below the risk floor") {
  std::vector<ExtendedScore> v = finite_scores({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  v.push_back(ExtendedScore::infinity());
  v.push_back(ExtendedScore::infinity());
  {
    WarningCapture cap;
    const auto r = calibrate(v, 0.1);
    CHECK(r.n_cal == 10);
    CHECK(r.n_empty == 2);
    CHECK(r.risk_floor == doctest::Approx(2.0 / 11.0));
    CHECK(r.alpha_below_floor());
    CHECK(r.q_hat.is_infinite());
    REQUIRE(cap.messages.size() == 1);
    CHECK(cap.messages[0].find("below the finite-sampling risk floor") != std::string::npos);
  }
  {
    WarningCapture cap;
    calibrate(v, 0.1, false);
    CHECK(cap.messages.empty());
  }
  {
    WarningCapture cap;
    const auto r = calibrate(v, 0.3);
    CHECK_FALSE(r.alpha_below_floor());
    CHECK(cap.messages.empty());
    CHECK(r.q_hat.value() == 0.8);
  }
}
