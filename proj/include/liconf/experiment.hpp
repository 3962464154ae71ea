#pragma once

// Trial orchestration: random calibration/test splits, risk-budget sweeps and
// cross-domain calibration/test matrices.
//
// Scoring a pool does not depend on the split, so every question is scored
// once up front and trials only permute, threshold and count. Trials are
// independent and each derives its randomness from its own recorded seed, so
// the serial and OpenMP kernels return identical results.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liconf/answer_agg.hpp"
#include "liconf/conformal.hpp"
#include "liconf/metrics.hpp"
#include "liconf/trace.hpp"

namespace liconf {

enum class Execution { serial, parallel };

struct ExperimentConfig {
  std::vector<double> alphas{0.1, 0.2, 0.3};
  double cal_ratio = 0.5;
  std::size_t n_trials = 100;
  ScoreOptions score;
  std::size_t ssm_min_bin = kDefaultSsmMinBin;
  std::uint64_t master_seed = 0;
  // When set, every trial also reports the Fano bound over this label space.
  std::optional<std::size_t> label_space_size;

  void validate() const;
};

struct ScoredQuestion {
  std::string question_id;
  std::string domain;
  AnswerScoreTable table;
  std::vector<std::string> admissible;
  ExtendedScore calibration_score = ExtendedScore::infinity();
};

struct TrialResult {
  double alpha = 0.0;
  ScoreKind score_kind = ScoreKind::layerwise;
  ExtendedScore q_hat = ExtendedScore::infinity();
  double risk_floor = 0.0;
  bool below_risk_floor = false;
  MetricReport metrics;
  std::uint64_t trial_seed = 0;
  std::string cal_domain;
  std::string test_domain;
  std::size_t n_cal = 0;
  std::size_t n_test = 0;
  double test_empty_fraction = 0.0;  // test pools with no admissible unit
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) form; 0 for a single value
  double se() const noexcept;
  std::size_t n = 0;
};

Summary summarize(std::span<const double> values);

// Label used for the domain fields of in-domain (pooled) trials.
inline constexpr std::string_view kAllDomains = "*";

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial, std::size_t alpha_index,
                         std::string_view cal_domain, std::string_view test_domain);

ScoredQuestion score_question(const QuestionTrace& q, const ScoreOptions& opts);
std::vector<ScoredQuestion> score_questions(std::span<const QuestionTrace> data, const ScoreOptions& opts,
                                            Execution exec = Execution::parallel);

// One calibration/test split of `data` at cfg.cal_ratio, shuffled by `seed`.
// Warns through liconf::warn when alpha is below the calibration risk floor.
TrialResult run_trial(std::span<const QuestionTrace> data, const ExperimentConfig& cfg, std::uint64_t seed,
                      double alpha);

// Same as run_trial on pre-scored questions; never warns.
TrialResult run_scored_trial(std::span<const ScoredQuestion> data, const ExperimentConfig& cfg, std::uint64_t seed,
                             double alpha, ScoreKind kind, std::string_view domain_label = kAllDomains);

// Calibrate on a cal_ratio share of `cal`, test on the held-out share of
// `test`. When both spans are the same domain use run_scored_trial instead.
TrialResult run_cross_trial(std::span<const ScoredQuestion> cal, std::span<const ScoredQuestion> test,
                            const ExperimentConfig& cfg, std::uint64_t seed, double alpha, ScoreKind kind,
                            std::string_view cal_domain, std::string_view test_domain);

struct SweepRow {
  double alpha = 0.0;
  ScoreKind score_kind = ScoreKind::layerwise;
  Summary emr, apss, ssm, risk_floor;
  std::optional<Summary> fano;
  std::size_t n_below_floor = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<TrialResult> trials;  // grouped by row, trial order within each
};

// n_trials trials at every alpha in cfg.alphas for cfg.score.kind.
SweepResult sweep_budgets(std::span<const QuestionTrace> data, const ExperimentConfig& cfg,
                          Execution exec = Execution::parallel);
SweepResult sweep_scored(std::span<const ScoredQuestion> scored, const ExperimentConfig& cfg,
                         Execution exec = Execution::parallel);

struct CellAggregate {
  std::string cal_domain;
  std::string test_domain;
  Summary emr, apss, ssm, risk_floor;
  std::vector<TrialResult> trials;
};

struct CrossDomainResult {
  double alpha = 0.0;
  ScoreKind primary = ScoreKind::layerwise;
  ScoreKind compare = ScoreKind::frequency_only;
  std::vector<std::string> domains;  // sorted; rows = calibration, columns = test
  std::vector<std::vector<CellAggregate>> primary_cells;
  std::vector<std::vector<CellAggregate>> compare_cells;
  // compare minus primary, per cell, over paired trials.
  std::vector<std::vector<Summary>> emr_diff;
  std::vector<std::vector<Summary>> apss_diff;

  // Unweighted mean over off-diagonal cells of the per-cell mean.
  double offdiag_mean_emr(bool primary_kind) const;
  double offdiag_mean_apss(bool primary_kind) const;
};

CrossDomainResult cross_domain_matrix(std::span<const QuestionTrace> data, const ExperimentConfig& cfg, double alpha,
                                      ScoreKind compare, Execution exec = Execution::parallel);

// Trial kernels. `serial` is the reference; `parallel` distributes trials over
// OpenMP threads and must return bit-identical results.
std::vector<TrialResult> run_trials(std::span<const ScoredQuestion> scored, const ExperimentConfig& cfg,
                                    std::size_t alpha_index, Execution exec);

}  // namespace liconf
