#include "liconf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "liconf/diagnostics.hpp"
#include "liconf/error.hpp"
#include "liconf/rng.hpp"

namespace liconf {

void ExperimentConfig::validate() const {
  if (alphas.empty()) throw InvalidArgument("alpha list is empty");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  }
  if (!(cal_ratio > 0.0 && cal_ratio < 1.0)) throw InvalidArgument("cal_ratio must lie in (0, 1)");
  if (n_trials == 0) throw InvalidArgument("n_trials must be positive");
  if (!(score.eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (ssm_min_bin == 0) throw InvalidArgument("ssm_min_bin must be >= 1");
}

double Summary::se() const noexcept { return n ? std / std::sqrt(static_cast<double>(n)) : 0.0; }

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial, std::size_t alpha_index,
                         std::string_view cal_domain, std::string_view test_domain) {
  return rng::combine(master_seed, trial, alpha_index, rng::hash_string(cal_domain), rng::hash_string(test_domain));
}

ScoredQuestion score_question(const QuestionTrace& q, const ScoreOptions& opts) {
  ScoredQuestion s;
  s.question_id = q.question_id;
  s.domain = q.domain;
  const CandidatePool pool = build_pool(q);
  s.table = score_pool(q, pool, opts);
  s.admissible = admissible_units(pool);
  s.calibration_score = nonconformity(s.table, s.admissible);
  return s;
}

std::vector<ScoredQuestion> score_questions(std::span<const QuestionTrace> data, const ScoreOptions& opts,
                                            Execution exec) {
  std::vector<ScoredQuestion> out(data.size());
  const auto n = static_cast<std::ptrdiff_t>(data.size());
  if (exec == Execution::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = score_question(data[static_cast<std::size_t>(i)], opts);
    return out;
  }
  // Exceptions must not cross the OpenMP region boundary.
  std::vector<std::string> errors(data.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = score_question(data[k], opts);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw InvalidArgument(e);
  }
  return out;
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t key) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::Stream s(key);
  rng::shuffle(idx.begin(), idx.end(), s);
  return idx;
}

std::size_t cal_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio));
}

void check_split(std::size_t n_cal, std::size_t n_test) {
  if (n_cal == 0 || n_test == 0) throw InvalidArgument("degenerate calibration/test split (an empty side)");
}

TrialResult evaluate_split(std::span<const ScoredQuestion> cal_pool, std::span<const std::size_t> cal_idx,
                           std::span<const ScoredQuestion> test_pool, std::span<const std::size_t> test_idx,
                           const ExperimentConfig& cfg, double alpha, bool emit_warning) {
  std::vector<ExtendedScore> scores;
  scores.reserve(cal_idx.size());
  for (auto i : cal_idx) scores.push_back(cal_pool[i].calibration_score);
  const CalibrationResult cal = calibrate(scores, alpha, emit_warning);

  std::vector<PredictionSet> sets;
  sets.reserve(test_idx.size());
  std::size_t empty = 0;
  for (auto i : test_idx) {
    const ScoredQuestion& q = test_pool[i];
    sets.push_back(prediction_set(q.table, cal.q_hat, q.question_id, std::span<const std::string>(q.admissible)));
    empty += q.admissible.empty() ? 1 : 0;
  }

  TrialResult r;
  r.alpha = alpha;
  r.q_hat = cal.q_hat;
  r.risk_floor = cal.risk_floor;
  r.below_risk_floor = cal.alpha_below_floor();
  r.metrics = evaluate_sets(sets, cfg.ssm_min_bin, alpha, cal.n_cal, cfg.label_space_size);
  r.n_cal = cal.n_cal;
  r.n_test = sets.size();
  r.test_empty_fraction = static_cast<double>(empty) / static_cast<double>(sets.size());
  return r;
}

TrialResult scored_trial(std::span<const ScoredQuestion> data, const ExperimentConfig& cfg, std::uint64_t seed,
                         double alpha, ScoreKind kind, std::string_view domain_label, bool emit_warning) {
  const std::size_t n = data.size();
  if (n < 4) throw InvalidArgument("a trial needs at least 4 questions, got " + std::to_string(n));
  const std::size_t n_cal = cal_count(n, cfg.cal_ratio);
  check_split(n_cal, n - n_cal);
  const auto perm = permutation(n, seed);
  const std::span<const std::size_t> all(perm);
  TrialResult r = evaluate_split(data, all.first(n_cal), data, all.subspan(n_cal), cfg, alpha, emit_warning);
  r.score_kind = kind;
  r.trial_seed = seed;
  r.cal_domain = r.test_domain = std::string(domain_label);
  return r;
}

constexpr std::uint64_t kTestSideStream = 0x7E57'5EED'0000'0001ULL;

}  // namespace

TrialResult run_scored_trial(std::span<const ScoredQuestion> data, const ExperimentConfig& cfg, std::uint64_t seed,
                             double alpha, ScoreKind kind, std::string_view domain_label) {
  return scored_trial(data, cfg, seed, alpha, kind, domain_label, false);
}

TrialResult run_trial(std::span<const QuestionTrace> data, const ExperimentConfig& cfg, std::uint64_t seed,
                      double alpha) {
  cfg.validate();
  if (data.size() < 4) throw InvalidArgument("a trial needs at least 4 questions");
  const auto scored = score_questions(data, cfg.score, Execution::serial);
  std::string label(kAllDomains);
  if (std::all_of(data.begin(), data.end(), [&](const QuestionTrace& q) { return q.domain == data.front().domain; })) {
    label = data.front().domain;
  }
  return scored_trial(scored, cfg, seed, alpha, cfg.score.kind, label, true);
}

TrialResult run_cross_trial(std::span<const ScoredQuestion> cal, std::span<const ScoredQuestion> test,
                            const ExperimentConfig& cfg, std::uint64_t seed, double alpha, ScoreKind kind,
                            std::string_view cal_domain, std::string_view test_domain) {
  if (cal.size() < 4 || test.size() < 4) throw InvalidArgument("each domain needs at least 4 questions");
  const std::size_t n_cal = cal_count(cal.size(), cfg.cal_ratio);
  const std::size_t test_start = cal_count(test.size(), cfg.cal_ratio);
  check_split(n_cal, test.size() - test_start);
  const auto cal_perm = permutation(cal.size(), seed);
  const auto test_perm = permutation(test.size(), rng::combine(seed, kTestSideStream));
  TrialResult r = evaluate_split(cal, std::span<const std::size_t>(cal_perm).first(n_cal), test,
                                 std::span<const std::size_t>(test_perm).subspan(test_start), cfg, alpha, false);
  r.score_kind = kind;
  r.trial_seed = seed;
  r.cal_domain = std::string(cal_domain);
  r.test_domain = std::string(test_domain);
  return r;
}

std::vector<TrialResult> run_trials(std::span<const ScoredQuestion> scored, const ExperimentConfig& cfg,
                                    std::size_t alpha_index, Execution exec) {
  cfg.validate();
  if (alpha_index >= cfg.alphas.size()) throw InvalidArgument("alpha index out of range");
  if (scored.size() < 4) throw InvalidArgument("a trial needs at least 4 questions");
  check_split(cal_count(scored.size(), cfg.cal_ratio), scored.size() - cal_count(scored.size(), cfg.cal_ratio));
  const double alpha = cfg.alphas[alpha_index];
  std::vector<TrialResult> out(cfg.n_trials);
  const auto n = static_cast<std::ptrdiff_t>(cfg.n_trials);
  auto one = [&](std::size_t t) {
    const auto seed = trial_seed(cfg.master_seed, t, alpha_index, kAllDomains, kAllDomains);
    return scored_trial(scored, cfg, seed, alpha, cfg.score.kind, kAllDomains, false);
  };
  if (exec == Execution::serial) {
    for (std::ptrdiff_t t = 0; t < n; ++t) out[static_cast<std::size_t>(t)] = one(static_cast<std::size_t>(t));
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t) out[static_cast<std::size_t>(t)] = one(static_cast<std::size_t>(t));
  }
  return out;
}

namespace {

template <typename F>
Summary summarize_by(const std::vector<TrialResult>& trials, F f) {
  std::vector<double> v;
  v.reserve(trials.size());
  for (const auto& t : trials) v.push_back(f(t));
  return summarize(v);
}

}  // namespace

SweepResult sweep_scored(std::span<const ScoredQuestion> scored, const ExperimentConfig& cfg, Execution exec) {
  cfg.validate();
  SweepResult result;
  for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
    auto trials = run_trials(scored, cfg, a, exec);
    SweepRow row;
    row.alpha = cfg.alphas[a];
    row.score_kind = cfg.score.kind;
    row.emr = summarize_by(trials, [](const TrialResult& t) { return t.metrics.emr; });
    row.apss = summarize_by(trials, [](const TrialResult& t) { return t.metrics.apss; });
    row.ssm = summarize_by(trials, [](const TrialResult& t) { return t.metrics.ssm; });
    row.risk_floor = summarize_by(trials, [](const TrialResult& t) { return t.risk_floor; });
    if (cfg.label_space_size) {
      row.fano = summarize_by(trials, [](const TrialResult& t) { return t.metrics.fano_bound.value_or(0.0); });
    }
    row.n_below_floor = static_cast<std::size_t>(
        std::count_if(trials.begin(), trials.end(), [](const TrialResult& t) { return t.below_risk_floor; }));
    if (row.n_below_floor > 0) {
      std::ostringstream os;
      os << "alpha " << row.alpha << " is below the finite-sampling risk floor in " << row.n_below_floor << " of "
         << trials.size() << " trials (mean floor " << row.risk_floor.mean << ", score " << to_string(row.score_kind)
         << "); coverage 1 - alpha is unattainable";
      warn(os.str());
    }
    result.rows.push_back(row);
    for (auto& t : trials) result.trials.push_back(std::move(t));
  }
  return result;
}

SweepResult sweep_budgets(std::span<const QuestionTrace> data, const ExperimentConfig& cfg, Execution exec) {
  cfg.validate();
  const auto scored = score_questions(data, cfg.score, exec);
  return sweep_scored(scored, cfg, exec);
}

double CrossDomainResult::offdiag_mean_emr(bool primary_kind) const {
  const auto& cells = primary_kind ? primary_cells : compare_cells;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = 0; j < cells.size(); ++j)
      if (i != j) sum += cells[i][j].emr.mean, ++n;
  return n ? sum / static_cast<double>(n) : 0.0;
}

double CrossDomainResult::offdiag_mean_apss(bool primary_kind) const {
  const auto& cells = primary_kind ? primary_cells : compare_cells;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = 0; j < cells.size(); ++j)
      if (i != j) sum += cells[i][j].apss.mean, ++n;
  return n ? sum / static_cast<double>(n) : 0.0;
}

CrossDomainResult cross_domain_matrix(std::span<const QuestionTrace> data, const ExperimentConfig& cfg, double alpha,
                                      ScoreKind compare, Execution exec) {
  cfg.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");

  std::map<std::string, std::vector<QuestionTrace>> by_domain;
  for (const auto& q : data) by_domain[q.domain].push_back(q);
  if (by_domain.size() < 2) throw InvalidArgument("cross-domain evaluation needs at least 2 domains");
  for (const auto& [d, qs] : by_domain) {
    const std::size_t n_cal = cal_count(qs.size(), cfg.cal_ratio);
    if (qs.size() < 4 || n_cal == 0 || n_cal == qs.size()) {
      throw InvalidArgument("domain '" + d + "' has too few questions (" + std::to_string(qs.size()) + ")");
    }
  }

  CrossDomainResult out;
  out.alpha = alpha;
  out.primary = cfg.score.kind;
  out.compare = compare;
  for (const auto& [d, qs] : by_domain) out.domains.push_back(d);
  const std::size_t nd = out.domains.size();

  auto build = [&](ScoreKind kind) {
    ScoreOptions opts = cfg.score;
    opts.kind = kind;
    std::vector<std::vector<ScoredQuestion>> scored;
    for (const auto& d : out.domains) scored.push_back(score_questions(by_domain.at(d), opts, exec));

    // Flattened (cell, trial) index space for the kernel.
    const std::size_t total = nd * nd * cfg.n_trials;
    std::vector<TrialResult> flat(total);
    auto one = [&](std::size_t k) {
      const std::size_t cell = k / cfg.n_trials, t = k % cfg.n_trials;
      const std::size_t i = cell / nd, j = cell % nd;
      const auto seed = trial_seed(cfg.master_seed, t, 0, out.domains[i], out.domains[j]);
      if (i == j) return run_scored_trial(scored[i], cfg, seed, alpha, kind, out.domains[i]);
      return run_cross_trial(scored[i], scored[j], cfg, seed, alpha, kind, out.domains[i], out.domains[j]);
    };
    const auto n = static_cast<std::ptrdiff_t>(total);
    if (exec == Execution::serial) {
      for (std::ptrdiff_t k = 0; k < n; ++k) flat[static_cast<std::size_t>(k)] = one(static_cast<std::size_t>(k));
    } else {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < n; ++k) flat[static_cast<std::size_t>(k)] = one(static_cast<std::size_t>(k));
    }

    std::vector<std::vector<CellAggregate>> cells(nd, std::vector<CellAggregate>(nd));
    for (std::size_t i = 0; i < nd; ++i) {
      for (std::size_t j = 0; j < nd; ++j) {
        CellAggregate& c = cells[i][j];
        c.cal_domain = out.domains[i];
        c.test_domain = out.domains[j];
        const auto first = flat.begin() + static_cast<std::ptrdiff_t>((i * nd + j) * cfg.n_trials);
        c.trials.assign(first, first + static_cast<std::ptrdiff_t>(cfg.n_trials));
        c.emr = summarize_by(c.trials, [](const TrialResult& t) { return t.metrics.emr; });
        c.apss = summarize_by(c.trials, [](const TrialResult& t) { return t.metrics.apss; });
        c.ssm = summarize_by(c.trials, [](const TrialResult& t) { return t.metrics.ssm; });
        c.risk_floor = summarize_by(c.trials, [](const TrialResult& t) { return t.risk_floor; });
      }
    }
    return cells;
  };

  out.primary_cells = build(out.primary);
  out.compare_cells = build(compare);

  out.emr_diff.assign(nd, std::vector<Summary>(nd));
  out.apss_diff.assign(nd, std::vector<Summary>(nd));
  for (std::size_t i = 0; i < nd; ++i) {
    for (std::size_t j = 0; j < nd; ++j) {
      std::vector<double> de, da;
      for (std::size_t t = 0; t < cfg.n_trials; ++t) {
        const auto& p = out.primary_cells[i][j].trials[t].metrics;
        const auto& c = out.compare_cells[i][j].trials[t].metrics;
        de.push_back(c.emr - p.emr);
        da.push_back(c.apss - p.apss);
      }
      out.emr_diff[i][j] = summarize(de);
      out.apss_diff[i][j] = summarize(da);
    }
  }

  for (const auto* cells : {&out.primary_cells, &out.compare_cells}) {
    for (const auto& row : *cells) {
      for (const auto& c : row) {
        const auto below = std::count_if(c.trials.begin(), c.trials.end(),
                                         [](const TrialResult& t) { return t.below_risk_floor; });
        if (below > 0) {
          std::ostringstream os;
          os << "alpha " << alpha << " is below the finite-sampling risk floor in " << below << " of "
             << c.trials.size() << " trials (calibration domain " << c.cal_domain << ", test domain "
             << c.test_domain << ", score " << to_string(c.trials.front().score_kind) << ")";
          warn(os.str());
        }
      }
    }
  }
  return out;
}

}  // namespace liconf
