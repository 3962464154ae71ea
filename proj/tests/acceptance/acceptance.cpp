// Acceptance suite. Prints exactly one PASS/FAIL line per criterion, with
// indented detail lines underneath, and exits non-zero if any criterion fails.
//
// usage: liconf_acceptance <path to liconf executable>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "liconf/answer_agg.hpp"
#include "liconf/conformal.hpp"
#include "liconf/diagnostics.hpp"
#include "liconf/experiment.hpp"
#include "liconf/metrics.hpp"
#include "liconf/rng.hpp"
#include "liconf/synth.hpp"
#include "liconf/trace.hpp"

using namespace liconf;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void note(const std::string& s) { details.push_back(s); }
  void require(bool ok, const std::string& s) {
    details.push_back((ok ? "ok    " : "FAIL  ") + s);
    pass = pass && ok;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<ScoreKind> kAllKinds{ScoreKind::layerwise, ScoreKind::frequency_only, ScoreKind::entropy_baseline};

// Captures library warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningSink previous;
  WarningCapture() {
    previous = set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
};

SynthSpec exchangeable_spec(std::size_t n, std::size_t label_space) {
  SynthSpec s;
  s.n_questions = n;
  s.domains = {"synthetic"};
  s.m = 20;
  s.num_layers = 8;
  s.label_space_size = label_space;
  s.answer_distribution_sharpness = 1.5;
  return s;
}

// ---------------------------------------------------------------------------

Outcome marginal_validity() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const auto data = generate(exchangeable_spec(1000, 4), 101).traces;
  ExperimentConfig cfg;
  cfg.alphas = {0.1, 0.2, 0.3};
  cfg.cal_ratio = 0.5;
  cfg.n_trials = 100;
  cfg.master_seed = 2024;
  WarningCapture quiet;
  for (auto kind : kAllKinds) {
    cfg.score.kind = kind;
    const auto sweep = sweep_budgets(data, cfg);
    for (const auto& row : sweep.rows) {
      const double se = row.emr.se();
      const double hi = row.alpha + 3.0 * se;
      const double lo = row.alpha - 1.0 / 501.0 - 3.0 * se;
      o.require(row.emr.mean <= hi && row.emr.mean >= lo,
                fmt("%-16s alpha=%.1f  mean EMR=%.4f  allowed [%.4f, %.4f]  (SE %.4f, APSS %.3f)",
                    std::string(to_string(kind)).c_str(), row.alpha, row.emr.mean, lo, hi, se, row.apss.mean));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(secs < 60.0, fmt("runtime %.2f s (target < 60 s)", secs));
  return o;
}

Outcome risk_floor_check() {
  Outcome o;
  auto spec = exchangeable_spec(1000, 4);
  spec.empty_pool_rate = 0.25;
  const auto data = generate(spec, 202).traces;
  ExperimentConfig cfg;
  cfg.alphas = {0.1};
  WarningCapture cap;
  std::size_t violations = 0, floor_warnings = 0, below = 0;
  double min_floor = 1.0, min_gap = kInf;
  for (std::size_t t = 0; t < 100; ++t) {
    const std::size_t before = cap.messages.size();
    const auto r = run_trial(data, cfg, trial_seed(7, t, 0, kAllDomains, kAllDomains), 0.1);
    min_floor = std::min(min_floor, r.risk_floor);
    below += r.below_risk_floor ? 1 : 0;
    // Hard inequality: every empty test pool is a miss.
    if (r.metrics.emr < r.test_empty_fraction) ++violations;
    min_gap = std::min(min_gap, r.metrics.emr - r.test_empty_fraction);
    for (std::size_t i = before; i < cap.messages.size(); ++i) {
      if (cap.messages[i].find("below the finite-sampling risk floor") != std::string::npos) ++floor_warnings;
    }
  }
  o.note(fmt("smallest calibration risk floor %.4f; alpha 0.1 below it in %zu/100 trials", min_floor, below));
  o.require(violations == 0, fmt("trials with EMR < empty-pool fraction: %zu (min EMR - fraction = %.4f)", violations,
                                 min_gap));
  o.require(below == 100 && floor_warnings == 100, fmt("risk-floor warnings emitted: %zu of 100 trials", floor_warnings));
  if (!cap.messages.empty()) o.note("warning text: " + cap.messages.front());
  return o;
}

Outcome quantile_oracle() {
  Outcome o;
  rng::Stream s(303);
  std::size_t mismatches = 0, infinite = 0;
  for (int inst = 0; inst < 10000; ++inst) {
    const std::size_t n = 1 + s.below(200);
    const std::uint64_t num = 1 + s.below(999);  // alpha = num / 1000
    const double alpha = static_cast<double>(num) / 1000.0;
    std::vector<double> sorted;
    std::vector<ExtendedScore> scores;
    const bool coarse = s.bernoulli(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      if (s.bernoulli(0.05)) {
        scores.push_back(ExtendedScore::infinity());
        sorted.push_back(kInf);
      } else {
        const double v = coarse ? static_cast<double>(s.below(21)) / 20.0 : s.uniform();
        scores.push_back(ExtendedScore::finite(v));
        sorted.push_back(v);
      }
    }
    sorted.push_back(kInf);
    std::sort(sorted.begin(), sorted.end());
    // k = ceil((n + 1)(1000 - num) / 1000) in exact integer arithmetic.
    std::uint64_t k = ((n + 1) * (1000 - num) + 999) / 1000;
    k = std::max<std::uint64_t>(k, 1);
    const double expected = sorted[k - 1];
    const double got = conformal_quantile(scores, alpha).value();
    if (got != expected) ++mismatches;
    infinite += std::isinf(expected) ? 1 : 0;
  }
  o.note(fmt("10000 instances, %zu with an infinite threshold", infinite));
  o.require(mismatches == 0, fmt("mismatches against sort-and-index: %zu", mismatches));
  return o;
}

// Straight-line re-implementation: entropies, information, layer sum,
// pool normalization, unit aggregation, mixing, nonconformity, threshold and
// membership, with no calls into the scoring library.
struct LineUnit {
  std::string id;
  double score;
  bool admissible;
};

std::vector<LineUnit> line_scores(const QuestionTrace& q, double w_li) {
  const std::size_t m = q.responses.size();
  std::vector<double> li(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& r = q.responses[j];
    double sum = 0.0;
    for (int l = 0; l < q.num_layers; ++l) {
      double hc = 0.0, hn = 0.0;
      for (const auto& t : r.tokens) {
        hc -= t.logp_ctx[l];
        hn -= t.logp_null[l];
      }
      sum += hn / static_cast<double>(r.tokens.size()) - hc / static_cast<double>(r.tokens.size());
    }
    li[j] = sum;
  }
  const double lo = *std::min_element(li.begin(), li.end());
  const double hi = *std::max_element(li.begin(), li.end());
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t j = 0; j < m; ++j) members[q.responses[j].parsed_unit].push_back(j);
  std::vector<LineUnit> out;
  for (const auto& [id, idx] : members) {
    double acc = 0.0;
    for (auto j : idx) acc += (li[j] - lo) / (hi - lo + 1e-8);
    const double f_li = acc / static_cast<double>(idx.size());
    const double f_f = static_cast<double>(idx.size()) / static_cast<double>(m);
    out.push_back({id, w_li * f_li + (1.0 - w_li) * f_f, q.responses[idx[0]].admissible});
  }
  return out;
}

QuestionTrace random_fixture_question(rng::Stream& s, const std::string& id) {
  QuestionTrace q;
  q.question_id = id;
  q.domain = "fixture";
  q.num_layers = 1 + static_cast<int>(s.below(6));
  const std::size_t m = 2 + s.below(19);
  const std::size_t units = 1 + s.below(5);
  const std::size_t good = s.below(units);
  const bool empty = s.bernoulli(0.1);
  for (std::size_t j = 0; j < m; ++j) {
    ResponseTrace r;
    r.response_id = static_cast<std::int64_t>(j);
    const std::size_t u = s.below(units);
    r.parsed_unit = std::string(1, static_cast<char>('A' + u));
    r.admissible = !empty && u == good;
    r.tokens.resize(1 + s.below(4));
    for (auto& t : r.tokens) {
      for (int l = 0; l < q.num_layers; ++l) {
        t.logp_ctx.push_back(-3.0 * s.uniform());
        t.logp_null.push_back(-3.0 * s.uniform());
      }
    }
    q.responses.push_back(std::move(r));
  }
  return q;
}

Outcome pipeline_oracle() {
  Outcome o;
  rng::Stream s(404);
  double worst = 0.0;
  std::size_t set_mismatch = 0, threshold_mismatch = 0, checked_sets = 0;
  for (int fx = 0; fx < 100; ++fx) {
    const double w_li = static_cast<double>(s.below(11)) / 10.0;
    const double alpha = 0.05 + 0.4 * s.uniform();
    std::vector<QuestionTrace> cal, test;
    const std::size_t n_cal = 5 + s.below(40), n_test = 5 + s.below(20);
    for (std::size_t i = 0; i < n_cal; ++i) cal.push_back(random_fixture_question(s, "c" + std::to_string(i)));
    for (std::size_t i = 0; i < n_test; ++i) test.push_back(random_fixture_question(s, "t" + std::to_string(i)));

    ScoreOptions opts;
    opts.weights = ScoreWeights::from_li_weight(w_li);

    // Library path.
    const auto cal_scored = score_questions(cal, opts);
    std::vector<ExtendedScore> cal_scores;
    for (const auto& q : cal_scored) cal_scores.push_back(q.calibration_score);
    const auto calib = calibrate(cal_scores, alpha, false);

    // Straight-line path.
    std::vector<double> line_cal;
    for (std::size_t i = 0; i < n_cal; ++i) {
      const auto units = line_scores(cal[i], w_li);
      double best = -1.0;
      for (const auto& u : units) {
        if (u.admissible) best = std::max(best, u.score);
      }
      line_cal.push_back(best < 0.0 ? kInf : 1.0 - best);
      for (const auto& u : units) {
        worst = std::max(worst, std::abs(cal_scored[i].table.find(u.id)->f_combined - u.score));
      }
    }
    line_cal.push_back(kInf);
    std::sort(line_cal.begin(), line_cal.end());
    const auto k = static_cast<std::size_t>(std::ceil((n_cal + 1) * (1.0 - alpha) - 1e-9));
    const double line_q = line_cal[std::clamp<std::size_t>(k, 1, n_cal + 1) - 1];
    if (std::isinf(line_q) != calib.q_hat.is_infinite() ||
        (!std::isinf(line_q) && std::abs(line_q - calib.q_hat.value()) > 1e-10)) {
      ++threshold_mismatch;
    }

    const auto test_scored = score_questions(test, opts);
    for (std::size_t i = 0; i < n_test; ++i) {
      const auto units = line_scores(test[i], w_li);
      std::vector<std::string> line_members;
      for (const auto& u : units) {
        worst = std::max(worst, std::abs(test_scored[i].table.find(u.id)->f_combined - u.score));
        if (1.0 - u.score <= line_q) line_members.push_back(u.id);
      }
      const auto set = prediction_set(test_scored[i].table, calib.q_hat);
      ++checked_sets;
      if (set.members != line_members) ++set_mismatch;
    }
  }
  o.require(worst <= 1e-10, fmt("largest unit-score difference %.3g (tolerance 1e-10)", worst));
  o.require(threshold_mismatch == 0, fmt("thresholds differing: %zu of 100 fixtures", threshold_mismatch));
  o.require(set_mismatch == 0, fmt("prediction sets differing: %zu of %zu", set_mismatch, checked_sets));
  return o;
}

Outcome ranking_efficiency() {
  Outcome o;
  ExperimentConfig cfg;
  cfg.n_trials = 100;
  cfg.master_seed = 505;
  WarningCapture quiet;

  // Frequency informativeness degraded away from the source domain; LI
  // informativeness untouched.
  SynthSpec shifted;
  shifted.n_questions = 400;
  shifted.domains = {"source", "shift_mild", "shift_strong"};
  shifted.label_space_size = 4;
  shifted.answer_distribution_sharpness = 1.5;
  shifted.shift["shift_mild"] = {1.0, 0.3};
  shifted.shift["shift_strong"] = {1.0, 0.0};
  const auto data = generate(shifted, 505).traces;
  const auto r = cross_domain_matrix(data, cfg, 0.1, ScoreKind::frequency_only);
  std::size_t wins = 0, cells = 0;
  for (std::size_t i = 0; i < r.domains.size(); ++i) {
    for (std::size_t j = 0; j < r.domains.size(); ++j) {
      if (i == j) continue;
      ++cells;
      const double lw = r.primary_cells[i][j].apss.mean, fq = r.compare_cells[i][j].apss.mean;
      wins += lw < fq ? 1 : 0;
      o.note(fmt("cal %-12s test %-12s APSS layerwise %.3f  freq %.3f  EMR layerwise %.3f  freq %.3f",
                 r.domains[i].c_str(), r.domains[j].c_str(), lw, fq, r.primary_cells[i][j].emr.mean,
                 r.compare_cells[i][j].emr.mean));
    }
  }
  o.require(wins * 5 >= cells * 4, fmt("layerwise APSS smaller in %zu of %zu off-diagonal cells (need >= 80%%)", wins,
                                       cells));

  // Same generator without any shift: the two scores should not differ in
  // miscoverage.
  SynthSpec flat = shifted;
  flat.shift.clear();
  const auto null_data = generate(flat, 506).traces;
  const auto n = cross_domain_matrix(null_data, cfg, 0.1, ScoreKind::frequency_only);
  for (std::size_t i = 0; i < n.domains.size(); ++i) {
    for (std::size_t j = 0; j < n.domains.size(); ++j) {
      if (i == j) continue;
      const auto& d = n.emr_diff[i][j];
      o.require(std::abs(d.mean) < 3.0 * d.se(),
                fmt("no shift, cal %-12s test %-12s dEMR(freq - layerwise) %+.4f  3*SE %.4f", n.domains[i].c_str(),
                    n.domains[j].c_str(), d.mean, 3.0 * d.se()));
    }
  }
  return o;
}

Outcome fano_check() {
  Outcome o;
  // Hand-evaluated fixture.
  std::vector<PredictionSet> sets;
  for (int i = 0; i < 100; ++i) {
    PredictionSet p;
    p.members = {"A", "B"};
    p.size = 2;
    p.covered = i % 10 != 0;
    sets.push_back(p);
  }
  const double hand = fano_bound(sets, 0.1, 99, 10);
  o.require(std::abs(hand - 1.1637) < 1e-3, fmt("hand fixture bound %.5f (expected 1.1637 +/- 1e-3)", hand));

  WarningCapture quiet;
  for (std::size_t k : {4u, 10u}) {
    const auto gen = generate(exchangeable_spec(1000, k), 600 + k);
    const double h = gen.truth.h_y_given_x;
    ExperimentConfig cfg;
    cfg.n_trials = 100;
    cfg.label_space_size = k;
    cfg.master_seed = 606;
    for (auto kind : kAllKinds) {
      cfg.score.kind = kind;
      const auto sweep = sweep_budgets(gen.traces, cfg);
      for (std::size_t row = 0; row < sweep.rows.size(); ++row) {
        double lowest = kInf;
        std::size_t bad = 0;
        for (const auto& t : sweep.trials) {
          if (t.alpha != sweep.rows[row].alpha) continue;
          lowest = std::min(lowest, *t.metrics.fano_bound);
          bad += h <= *t.metrics.fano_bound ? 0 : 1;
        }
        o.require(bad == 0, fmt("|Y|=%-2zu %-16s alpha=%.1f  H(Y|X)=%.4f  lowest bound %.4f  violations %zu/100", k,
                                std::string(to_string(kind)).c_str(), sweep.rows[row].alpha, h, lowest, bad));
      }
    }
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const std::string& cli) {
  Outcome o;
  if (cli.empty()) {
    o.require(false, "no liconf executable given");
    return o;
  }
  const fs::path root = fs::temp_directory_path() / "liconf_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream spec(root / "spec.json");
    spec << R"({"n_questions": 100, "domains": ["a", "b", "c"], "label_space_size": 4, "empty_pool_rate": 0.05,)"
         << R"( "shift": {"b": {"freq": 0.3}}})" << '\n';
  }
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "synth --spec ../spec.json --seed 9 --out trace.jsonl"},
      {"validate", "validate trace.jsonl > validate.txt"},
      {"calibrate", "calibrate --trace trace.jsonl --alpha 0.1 --score layerwise --out cal.json"},
      {"predict", "predict --trace trace.jsonl --cal cal.json --out sets.json"},
      {"evaluate", "evaluate --sets sets.json --label-space 4 --out report.json"},
      {"sweep", "sweep --trace trace.jsonl --alphas 0.1,0.2,0.3 --trials 25 --seed 3 --out sweep"},
      {"crossdomain", "crossdomain --trace trace.jsonl --alpha 0.1 --compare freq --trials 25 --seed 3 --out cross"},
      {"report", "report --in cross --format svg --out rerender"},
  };
  for (const char* run : {"run1", "run2"}) {
    fs::create_directories(root / run);
    for (const auto& [name, args] : commands) {
      const std::string cmd = "cd '" + (root / run).string() + "' && '" + cli + "' " + args + " 2>> stderr.txt";
      if (std::system(cmd.c_str()) != 0) o.require(false, std::string(run) + ": command failed: " + name);
    }
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_command;  // identical, total
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "run1")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root / "run1");
    ++files;
    const fs::path other = root / "run2" / rel;
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
      ++differing;
      o.note("differs: " + rel.string());
    }
  }
  std::size_t files2 = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "run2")) files2 += e.is_regular_file() ? 1 : 0;
  o.require(files > 0 && files == files2, fmt("%zu files from %zu commands in each run", files, commands.size()));
  o.require(differing == 0, fmt("files differing between runs: %zu", differing));
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? fs::absolute(argv[1]).string() : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"marginal validity", marginal_validity},
      {"risk floor", risk_floor_check},
      {"quantile oracle", quantile_oracle},
      {"pipeline oracle", pipeline_oracle},
      {"ranking to efficiency", ranking_efficiency},
      {"Fano diagnostic", fano_check},
      {"determinism", [&] { return determinism(cli); }},
  };
  bool all = true;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << '\n';
    for (const auto& d : o.details) std::cout << "    " << d << '\n';
    std::cout.flush();
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
