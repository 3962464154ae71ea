// liconf: layer-wise information conformal prediction from trace files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "liconf/answer_agg.hpp"
#include "liconf/conformal.hpp"
#include "liconf/error.hpp"
#include "liconf/experiment.hpp"
#include "liconf/metrics.hpp"
#include "liconf/report.hpp"
#include "liconf/synth.hpp"
#include "liconf/trace.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace liconf;

namespace {

struct ScoreArgs {
  std::string score = "layerwise";
  double w_li = 0.5;
  std::string layers = "all";
  double eps = kDefaultEps;

  ScoreOptions options() const {
    ScoreOptions o;
    o.kind = parse_score_kind(score);
    o.weights = ScoreWeights::from_li_weight(w_li);
    o.layers = LayerSelection::parse(layers);
    o.eps = eps;
    return o;
  }
};

void add_score_args(CLI::App* cmd, ScoreArgs& a, bool with_kind = true) {
  if (with_kind) cmd->add_option("--score", a.score, "layerwise | freq | entropy")->capture_default_str();
  cmd->add_option("--w-li", a.w_li, "weight on LI support; frequency gets 1 - w")->capture_default_str();
  cmd->add_option("--layers", a.layers, "scored layers: all, or e.g. 0-3,7")->capture_default_str();
  cmd->add_option("--eps", a.eps, "pool-normalization epsilon")->capture_default_str();
}

ojson read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return ojson::parse(in);
  } catch (const ojson::exception& e) {
    throw Error("malformed JSON in '" + path + "': " + e.what());
  }
}

void write_json(const std::string& path, const ojson& j) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

ojson score_json(const ExtendedScore& s) { return s.is_infinite() ? ojson("inf") : ojson(s.value()); }

ExtendedScore score_from_json(const ojson& v) {
  if (v.is_string() && v.get<std::string>() == "inf") return ExtendedScore::infinity();
  if (!v.is_number()) throw Error("q_hat must be a number or \"inf\"");
  return ExtendedScore::finite(v.get<double>());
}

std::vector<double> parse_alpha_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("bad alpha '" + item + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("empty alpha list");
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_validate(const std::string& trace) {
  const auto data = read_trace_file(trace);
  std::size_t responses = 0;
  for (const auto& q : data) responses += q.responses.size();
  std::cout << "valid: " << data.size() << " questions, " << responses << " responses\n";
  return 0;
}

int cmd_calibrate(const std::string& trace, double alpha, const ScoreArgs& sa, const std::string& out) {
  const auto opts = sa.options();
  const auto data = read_trace_file(trace);
  const auto scored = score_questions(data, opts);
  std::vector<ExtendedScore> scores;
  scores.reserve(scored.size());
  for (const auto& q : scored) scores.push_back(q.calibration_score);
  const CalibrationResult cal = calibrate(scores, alpha);

  ojson j;
  j["q_hat"] = score_json(cal.q_hat);
  j["alpha"] = cal.alpha;
  j["n_cal"] = cal.n_cal;
  j["risk_floor"] = cal.risk_floor;
  j["score_kind"] = std::string(to_string(opts.kind));
  j["weights"] = {opts.weights.w_li(), opts.weights.w_f()};
  j["ssm_def"] = std::string(kSsmDefinition);
  j["n_empty"] = cal.n_empty;
  j["layers"] = opts.layers.to_string();
  j["eps"] = opts.eps;
  write_json(out, j);
  return 0;
}

int cmd_predict(const std::string& trace, const std::string& cal_path, const std::string& out) {
  const ojson cal = read_json(cal_path);
  ScoreOptions opts;
  try {
    opts.kind = parse_score_kind(cal.at("score_kind").get<std::string>());
    const auto w = cal.at("weights").get<std::vector<double>>();
    if (w.size() != 2) throw Error("weights must hold two numbers");
    opts.weights = ScoreWeights(w[0], w[1]);
    opts.layers = LayerSelection::parse(cal.value("layers", std::string("all")));
    opts.eps = cal.value("eps", kDefaultEps);
  } catch (const ojson::exception& e) {
    throw Error("malformed calibration artifact '" + cal_path + "': " + e.what());
  }
  const ExtendedScore q_hat = score_from_json(cal.at("q_hat"));

  const auto data = read_trace_file(trace);
  const auto scored = score_questions(data, opts);
  ojson sets = ojson::array();
  for (const auto& q : scored) {
    const auto s = prediction_set(q.table, q_hat, q.question_id, std::span<const std::string>(q.admissible));
    sets.push_back({{"question_id", s.question_id}, {"members", s.members}, {"size", s.size}, {"covered", *s.covered}});
  }
  ojson j;
  j["alpha"] = cal.at("alpha");
  j["q_hat"] = cal.at("q_hat");
  j["n_cal"] = cal.at("n_cal");
  j["score_kind"] = cal.at("score_kind");
  j["sets"] = std::move(sets);
  write_json(out, j);
  return 0;
}

int cmd_evaluate(const std::string& sets_path, const std::string& out, std::size_t min_bin,
                 std::optional<std::size_t> label_space) {
  const ojson j = read_json(sets_path);
  std::vector<PredictionSet> sets;
  try {
    for (const auto& s : j.at("sets")) {
      PredictionSet p;
      p.question_id = s.at("question_id").get<std::string>();
      p.members = s.at("members").get<std::vector<std::string>>();
      p.size = p.members.size();
      if (s.contains("covered") && !s.at("covered").is_null()) p.covered = s.at("covered").get<bool>();
      sets.push_back(std::move(p));
    }
  } catch (const ojson::exception& e) {
    throw Error("malformed sets file '" + sets_path + "': " + e.what());
  }
  const double alpha = j.at("alpha").get<double>();
  const auto n_cal = j.at("n_cal").get<std::size_t>();
  const MetricReport m = evaluate_sets(sets, min_bin, alpha, n_cal, label_space);

  ojson r;
  r["n_test"] = m.n_test;
  r["alpha"] = alpha;
  r["score_kind"] = j.at("score_kind");
  r["emr"] = m.emr;
  r["apss"] = m.apss;
  r["ssm"] = m.ssm;
  r["ssm_fallback"] = m.ssm_fallback;
  r["ssm_min_bin"] = min_bin;
  r["ssm_def"] = std::string(kSsmDefinition);
  r["max_set_size"] = m.max_set_size;
  r["fano_bound"] = m.fano_bound ? ojson(*m.fano_bound) : ojson(nullptr);
  write_json(out, r);
  return 0;
}

void emit_all(const ReportDocument& doc, const fs::path& dir) {
  for (auto f : {ReportFormat::json, ReportFormat::csv, ReportFormat::svg_heatmap}) emit_report(doc, f, dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction sets from layer-wise usable information"};
  app.require_subcommand(1);

  std::string trace, out, cal_path, sets_path, alphas = "0.1,0.2,0.3", in_dir, format = "svg", spec_path;
  std::string compare = "freq", scores = "layerwise,freq";
  double alpha = 0.1, cal_ratio = 0.5;
  std::size_t trials = 100, min_bin = kDefaultSsmMinBin, label_space = 0;
  std::uint64_t seed = 0;
  bool serial = false;
  ScoreArgs sa;

  auto* validate_cmd = app.add_subcommand("validate", "check a trace file against the schema");
  validate_cmd->add_option("trace", trace, "trace file")->required();

  auto* calibrate_cmd = app.add_subcommand("calibrate", "compute the conformal threshold on a trace");
  calibrate_cmd->add_option("--trace", trace)->required();
  calibrate_cmd->add_option("--alpha", alpha, "target risk")->required();
  add_score_args(calibrate_cmd, sa);
  calibrate_cmd->add_option("--out", out)->required();

  auto* predict_cmd = app.add_subcommand("predict", "build prediction sets with a calibration artifact");
  predict_cmd->add_option("--trace", trace)->required();
  predict_cmd->add_option("--cal", cal_path)->required();
  predict_cmd->add_option("--out", out)->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "EMR, APSS, SSM (and Fano bound) of prediction sets");
  evaluate_cmd->add_option("--sets", sets_path)->required();
  evaluate_cmd->add_option("--out", out)->required();
  evaluate_cmd->add_option("--min-bin", min_bin, "SSM minimum stratum size")->capture_default_str();
  evaluate_cmd->add_option("--label-space", label_space, "label space size; enables the Fano bound");

  auto* sweep_cmd = app.add_subcommand("sweep", "repeated random splits over a list of risk budgets");
  sweep_cmd->add_option("--trace", trace)->required();
  sweep_cmd->add_option("--alphas", alphas)->capture_default_str();
  sweep_cmd->add_option("--trials", trials)->capture_default_str();
  sweep_cmd->add_option("--cal-ratio", cal_ratio)->capture_default_str();
  sweep_cmd->add_option("--seed", seed)->capture_default_str();
  sweep_cmd->add_option("--scores", scores, "comma list of score kinds")->capture_default_str();
  sweep_cmd->add_option("--min-bin", min_bin)->capture_default_str();
  sweep_cmd->add_option("--label-space", label_space, "label space size; enables the Fano bound");
  sweep_cmd->add_flag("--serial", serial, "run the serial reference kernel");
  add_score_args(sweep_cmd, sa, false);
  sweep_cmd->add_option("--out", out)->required();

  auto* cross_cmd = app.add_subcommand("crossdomain", "calibrate on each domain, test on every domain");
  cross_cmd->add_option("--trace", trace)->required();
  cross_cmd->add_option("--alpha", alpha)->required();
  cross_cmd->add_option("--compare", compare, "comparator score kind")->capture_default_str();
  cross_cmd->add_option("--trials", trials)->capture_default_str();
  cross_cmd->add_option("--cal-ratio", cal_ratio)->capture_default_str();
  cross_cmd->add_option("--seed", seed)->capture_default_str();
  cross_cmd->add_option("--min-bin", min_bin)->capture_default_str();
  cross_cmd->add_flag("--serial", serial, "run the serial reference kernel");
  add_score_args(cross_cmd, sa);
  cross_cmd->add_option("--out", out)->required();

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic trace file and its truth sidecar");
  synth_cmd->add_option("--spec", spec_path)->required();
  synth_cmd->add_option("--seed", seed)->capture_default_str();
  synth_cmd->add_option("--out", out)->required();

  auto* report_cmd = app.add_subcommand("report", "re-render a saved sweep or cross-domain result");
  report_cmd->add_option("--in", in_dir)->required();
  report_cmd->add_option("--format", format, "csv | json | svg")->capture_default_str();
  report_cmd->add_option("--out", out, "output directory (default: --in)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate_cmd) return cmd_validate(trace);
    if (*calibrate_cmd) return cmd_calibrate(trace, alpha, sa, out);
    if (*predict_cmd) return cmd_predict(trace, cal_path, out);
    if (*evaluate_cmd) {
      return cmd_evaluate(sets_path, out, min_bin, label_space ? std::optional(label_space) : std::nullopt);
    }
    const Execution exec = serial ? Execution::serial : Execution::parallel;
    if (*sweep_cmd) {
      ExperimentConfig cfg;
      cfg.alphas = parse_alpha_list(alphas);
      cfg.n_trials = trials;
      cfg.cal_ratio = cal_ratio;
      cfg.master_seed = seed;
      cfg.ssm_min_bin = min_bin;
      if (label_space) cfg.label_space_size = label_space;
      cfg.score = sa.options();
      const auto data = read_trace_file(trace);
      SweepResult all;
      for (const auto& kind : split_list(scores)) {
        cfg.score.kind = parse_score_kind(kind);
        auto r = sweep_budgets(data, cfg, exec);
        all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
        all.trials.insert(all.trials.end(), r.trials.begin(), r.trials.end());
      }
      if (all.rows.empty()) throw InvalidArgument("no score kinds given");
      emit_all(sweep_document(all, RunInfo{trace, cfg}), out);
      return 0;
    }
    if (*cross_cmd) {
      ExperimentConfig cfg;
      cfg.alphas = {alpha};
      cfg.n_trials = trials;
      cfg.cal_ratio = cal_ratio;
      cfg.master_seed = seed;
      cfg.ssm_min_bin = min_bin;
      cfg.score = sa.options();
      const auto data = read_trace_file(trace);
      const auto r = cross_domain_matrix(data, cfg, alpha, parse_score_kind(compare), exec);
      emit_all(crossdomain_document(r, RunInfo{trace, cfg}), out);
      return 0;
    }
    if (*synth_cmd) {
      const SynthSpec spec = read_synth_spec(spec_path);
      const SynthOutput gen = generate(spec, seed);
      write_trace_file(out, gen.traces);
      std::ofstream truth(out + ".truth.json", std::ios::binary);
      if (!truth) throw Error("cannot write '" + out + ".truth.json'");
      write_truth_json(truth, gen.truth);
      return 0;
    }
    if (*report_cmd) {
      const auto doc = load_report(in_dir);
      emit_report(doc, parse_report_format(format), out.empty() ? fs::path(in_dir) : fs::path(out));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
