#include "liconf/answer_agg.hpp"

#include <algorithm>
#include <cmath>

#include "liconf/error.hpp"

namespace liconf {

ScoreWeights::ScoreWeights(double w_li, double w_f) : w_li_(w_li), w_f_(w_f) {
  if (!(w_li >= 0.0) || !(w_f >= 0.0)) throw InvalidArgument("score weights must be non-negative");
  if (std::abs(w_li + w_f - 1.0) > 1e-12) throw InvalidArgument("score weights must sum to 1");
}

std::string_view to_string(ScoreKind k) noexcept {
  switch (k) {
    case ScoreKind::layerwise: return "layerwise";
    case ScoreKind::frequency_only: return "frequency_only";
    case ScoreKind::entropy_baseline: return "entropy_baseline";
  }
  return "layerwise";
}

ScoreKind parse_score_kind(std::string_view s) {
  if (s == "layerwise") return ScoreKind::layerwise;
  if (s == "freq" || s == "frequency_only") return ScoreKind::frequency_only;
  if (s == "entropy" || s == "entropy_baseline") return ScoreKind::entropy_baseline;
  throw InvalidArgument("unknown score kind '" + std::string(s) + "'");
}

const UnitScore* AnswerScoreTable::find(std::string_view unit_id) const noexcept {
  auto it = std::lower_bound(entries.begin(), entries.end(), unit_id,
                             [](const UnitScore& u, std::string_view id) { return u.unit_id < id; });
  if (it == entries.end() || it->unit_id != unit_id) return nullptr;
  return &*it;
}

namespace {

const AnswerUnit& require_unit(const CandidatePool& p, std::string_view unit) {
  const AnswerUnit* u = p.find(unit);
  if (!u) throw InvalidArgument("unknown answer unit '" + std::string(unit) + "'");
  return *u;
}

// Summing in sorted order makes the mean independent of response order.
double member_mean(const AnswerUnit& u, std::span<const double> values) {
  std::vector<double> v;
  v.reserve(u.member_indices.size());
  for (auto j : u.member_indices) v.push_back(values[j]);
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

double frequency_score(const CandidatePool& p, std::string_view unit) {
  const AnswerUnit& u = require_unit(p, unit);
  return static_cast<double>(u.member_indices.size()) / static_cast<double>(p.m);
}

double li_support_score(const CandidatePool& p, std::string_view unit, std::span<const double> normalized_li) {
  const AnswerUnit& u = require_unit(p, unit);
  if (normalized_li.size() != p.m) {
    throw InvalidArgument("normalized LI has " + std::to_string(normalized_li.size()) + " entries for a pool of " +
                          std::to_string(p.m));
  }
  return member_mean(u, normalized_li);
}

double combined_score(double f_li, double f_freq, const ScoreWeights& w) {
  return w.w_li() * f_li + w.w_f() * f_freq;
}

AnswerScoreTable score_pool(const QuestionTrace& q, const CandidatePool& p, const ScoreOptions& opts) {
  if (p.m != q.responses.size()) throw InvalidArgument("pool does not match question '" + q.question_id + "'");

  const auto layers = opts.layers.resolve(q.num_layers);
  std::vector<double> raw(p.m);
  for (std::size_t j = 0; j < p.m; ++j) raw[j] = layerwise_information(q.responses[j], layers);
  const auto norm_li = normalize_pool(raw, opts.eps);

  // Entropy baseline: -H at the final layer under question context.
  std::vector<double> norm_neg_entropy;
  if (opts.kind == ScoreKind::entropy_baseline) {
    std::vector<double> neg_h(p.m);
    for (std::size_t j = 0; j < p.m; ++j) {
      neg_h[j] = -response_entropy(q.responses[j], q.num_layers - 1, Context::with_question);
    }
    norm_neg_entropy = normalize_pool(neg_h, opts.eps);
  }

  AnswerScoreTable table;
  table.kind = opts.kind;
  table.entries.reserve(p.units.size());
  for (const auto& u : p.units) {
    UnitScore s;
    s.unit_id = u.unit_id;
    s.f_li = member_mean(u, norm_li);
    s.f_freq = static_cast<double>(u.member_indices.size()) / static_cast<double>(p.m);
    switch (opts.kind) {
      case ScoreKind::layerwise: s.f_combined = combined_score(s.f_li, s.f_freq, opts.weights); break;
      case ScoreKind::frequency_only: s.f_combined = s.f_freq; break;
      case ScoreKind::entropy_baseline: s.f_combined = member_mean(u, norm_neg_entropy); break;
    }
    table.entries.push_back(std::move(s));
  }
  return table;
}

}  // namespace liconf
