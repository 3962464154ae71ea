#pragma once

// Split conformal calibration over answer-level reliability scores.
//
// A calibration question's nonconformity is 1 - (best score among its
// admissible units), or +infinity when the sampled pool holds no admissible
// unit. The threshold is the k-th smallest of the N calibration scores plus
// one +infinity, k = ceil((N + 1)(1 - alpha)); a test unit enters the
// prediction set when 1 - score <= threshold.

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liconf/answer_agg.hpp"

namespace liconf {

class ExtendedScore {
 public:
  // Throws InvalidArgument unless 0 <= value <= 1.
  static ExtendedScore finite(double value);
  static constexpr ExtendedScore infinity() noexcept { return ExtendedScore(); }

  bool is_infinite() const noexcept { return infinite_; }
  // +inf as a double for infinite scores.
  double value() const noexcept;

  friend std::strong_ordering operator<=>(const ExtendedScore& a, const ExtendedScore& b) noexcept;
  friend bool operator==(const ExtendedScore& a, const ExtendedScore& b) noexcept = default;

 private:
  constexpr ExtendedScore() noexcept = default;
  double value_ = 0.0;
  bool infinite_ = true;
};

struct CalibrationResult {
  ExtendedScore q_hat = ExtendedScore::infinity();
  double alpha = 0.1;
  std::size_t n_cal = 0;
  double risk_floor = 0.0;
  std::size_t n_empty = 0;

  bool alpha_below_floor() const noexcept { return alpha < risk_floor; }
};

struct PredictionSet {
  std::string question_id;
  std::vector<std::string> members;  // sorted
  std::optional<bool> covered;
  std::size_t size = 0;
};

// Rank for the conformal quantile, ceil((n + 1)(1 - alpha)). Products within
// 1e-9 of an integer are snapped to it so that, e.g., n = 9, alpha = 0.2 gives
// exactly 8.
std::size_t conformal_rank(std::size_t n, double alpha);

ExtendedScore nonconformity(const AnswerScoreTable& table, std::span<const std::string> admissible);

ExtendedScore conformal_quantile(std::span<const ExtendedScore> scores, double alpha);

PredictionSet prediction_set(const AnswerScoreTable& table, const ExtendedScore& q_hat,
                             std::string question_id = {},
                             std::optional<std::span<const std::string>> admissible = std::nullopt);

double risk_floor(std::span<const bool> empty_flags);
double risk_floor(std::size_t n, std::size_t n_empty);

// Threshold plus risk floor from calibration nonconformity scores. When alpha
// is below the risk floor a warning goes through liconf::warn unless
// `emit_warning` is false (callers aggregating many trials warn once).
CalibrationResult calibrate(std::span<const ExtendedScore> scores, double alpha, bool emit_warning = true);

std::string risk_floor_warning(const CalibrationResult& r);

}  // namespace liconf
