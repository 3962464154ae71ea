#pragma once

// Answer-unit reliability scores. Response-level LI is normalized within the
// sampled pool, averaged over the responses that parse to each unit, and
// mixed with the unit's sampling frequency.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liconf/li_score.hpp"
#include "liconf/trace.hpp"

namespace liconf {

class ScoreWeights {
 public:
  ScoreWeights() = default;
  // Throws InvalidArgument unless both weights are >= 0 and sum to 1.
  ScoreWeights(double w_li, double w_f);
  static ScoreWeights from_li_weight(double w_li) { return ScoreWeights(w_li, 1.0 - w_li); }

  double w_li() const noexcept { return w_li_; }
  double w_f() const noexcept { return w_f_; }

 private:
  double w_li_ = 0.5;
  double w_f_ = 0.5;
};

enum class ScoreKind { layerwise, frequency_only, entropy_baseline };

// "layerwise", "frequency_only", "entropy_baseline".
std::string_view to_string(ScoreKind k) noexcept;
// Accepts the names above and the CLI short forms "freq" and "entropy".
ScoreKind parse_score_kind(std::string_view s);

struct UnitScore {
  std::string unit_id;
  double f_li = 0.0;
  double f_freq = 0.0;
  double f_combined = 0.0;
};

struct AnswerScoreTable {
  ScoreKind kind = ScoreKind::layerwise;
  std::vector<UnitScore> entries;  // sorted by unit_id

  const UnitScore* find(std::string_view unit_id) const noexcept;
};

struct ScoreOptions {
  ScoreKind kind = ScoreKind::layerwise;
  ScoreWeights weights;
  LayerSelection layers = LayerSelection::all();
  double eps = kDefaultEps;
};

double frequency_score(const CandidatePool& p, std::string_view unit);

// Mean of `normalized_li` over the unit's member responses.
double li_support_score(const CandidatePool& p, std::string_view unit, std::span<const double> normalized_li);

double combined_score(double f_li, double f_freq, const ScoreWeights& w);

AnswerScoreTable score_pool(const QuestionTrace& q, const CandidatePool& p, const ScoreOptions& opts);

}  // namespace liconf
