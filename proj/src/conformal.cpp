#include "liconf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "liconf/diagnostics.hpp"
#include "liconf/error.hpp"

namespace liconf {

ExtendedScore ExtendedScore::finite(double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidArgument("finite nonconformity score must lie in [0, 1], got " + std::to_string(value));
  }
  ExtendedScore s;
  s.value_ = value;
  s.infinite_ = false;
  return s;
}

double ExtendedScore::value() const noexcept {
  return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

std::strong_ordering operator<=>(const ExtendedScore& a, const ExtendedScore& b) noexcept {
  if (a.infinite_ || b.infinite_) return a.infinite_ <=> b.infinite_;
  if (a.value_ < b.value_) return std::strong_ordering::less;
  if (a.value_ > b.value_) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const long double x = static_cast<long double>(n + 1) * (1.0L - static_cast<long double>(alpha));
  const long double nearest = std::round(x);
  const long double k = std::abs(x - nearest) <= 1e-9L ? nearest : std::ceil(x);
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, n + 1);
}

ExtendedScore nonconformity(const AnswerScoreTable& table, std::span<const std::string> admissible) {
  if (admissible.empty()) return ExtendedScore::infinity();
  double best = -1.0;
  for (const auto& id : admissible) {
    const UnitScore* s = table.find(id);
    if (!s) throw InvalidArgument("admissible unit '" + id + "' missing from score table");
    best = std::max(best, s->f_combined);
  }
  return ExtendedScore::finite(1.0 - best);
}

ExtendedScore conformal_quantile(std::span<const ExtendedScore> scores, double alpha) {
  if (scores.empty()) throw InvalidArgument("conformal quantile needs at least one calibration score");
  const std::size_t k = conformal_rank(scores.size(), alpha);
  if (k == scores.size() + 1) return ExtendedScore::infinity();  // the augmented +inf
  std::vector<ExtendedScore> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

PredictionSet prediction_set(const AnswerScoreTable& table, const ExtendedScore& q_hat, std::string question_id,
                             std::optional<std::span<const std::string>> admissible) {
  PredictionSet set;
  set.question_id = std::move(question_id);
  for (const auto& e : table.entries) {
    if (q_hat.is_infinite() || 1.0 - e.f_combined <= q_hat.value()) set.members.push_back(e.unit_id);
  }
  set.size = set.members.size();
  if (admissible) {
    bool hit = false;
    for (const auto& a : *admissible) {
      if (std::binary_search(set.members.begin(), set.members.end(), a)) {
        hit = true;
        break;
      }
    }
    set.covered = hit;
  }
  return set;
}

double risk_floor(std::size_t n, std::size_t n_empty) {
  if (n == 0) throw InvalidArgument("risk floor needs at least one calibration example");
  const double nd = static_cast<double>(n);
  return (nd / (nd + 1.0)) * (static_cast<double>(n_empty) / nd);
}

double risk_floor(std::span<const bool> empty_flags) {
  return risk_floor(empty_flags.size(),
                    static_cast<std::size_t>(std::count(empty_flags.begin(), empty_flags.end(), true)));
}

std::string risk_floor_warning(const CalibrationResult& r) {
  std::ostringstream os;
  os << "alpha " << r.alpha << " is below the finite-sampling risk floor " << r.risk_floor << " (" << r.n_empty
     << " of " << r.n_cal << " calibration pools contain no admissible answer); coverage 1 - alpha is unattainable";
  return os.str();
}

CalibrationResult calibrate(std::span<const ExtendedScore> scores, double alpha, bool emit_warning) {
  CalibrationResult r;
  r.alpha = alpha;
  r.q_hat = conformal_quantile(scores, alpha);
  r.n_cal = scores.size();
  r.n_empty = static_cast<std::size_t>(
      std::count_if(scores.begin(), scores.end(), [](const ExtendedScore& s) { return s.is_infinite(); }));
  r.risk_floor = risk_floor(r.n_cal, r.n_empty);
  if (emit_warning && r.alpha_below_floor()) warn(risk_floor_warning(r));
  return r;
}

}  // namespace liconf
