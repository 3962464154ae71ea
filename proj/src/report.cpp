#include "liconf/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "liconf/error.hpp"

namespace liconf {

using ojson = nlohmann::ordered_json;

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "svg" || s == "svg_heatmap") return ReportFormat::svg_heatmap;
  throw InvalidArgument("unknown report format '" + std::string(s) + "'");
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

ojson score_json(const ExtendedScore& s) {
  return s.is_infinite() ? ojson("inf") : ojson(s.value());
}

ojson summary_json(const Summary& s) {
  return ojson{{"mean", s.mean}, {"std", s.std}, {"se", s.se()}, {"n", s.n}};
}

void config_json(ojson& j, const RunInfo& info) {
  const auto& c = info.config;
  j["trace"] = info.trace;
  j["cal_ratio"] = c.cal_ratio;
  j["n_trials"] = c.n_trials;
  j["master_seed"] = c.master_seed;
  j["weights"] = {c.score.weights.w_li(), c.score.weights.w_f()};
  j["layers"] = c.score.layers.to_string();
  j["eps"] = c.score.eps;
  j["ssm_min_bin"] = c.ssm_min_bin;
  j["ssm_def"] = std::string(kSsmDefinition);
  j["quantile_def"] = "ceil((N+1)(1-alpha))-th order statistic of calibration scores plus one +inf";
  j["std_def"] = "sample standard deviation (n-1); se = std/sqrt(n_trials)";
  j["entropy_baseline_def"] =
      "stand-in baseline: per-response -H at the final layer under question context, min-max normalized within the "
      "pool, averaged over the unit's responses";
  if (c.label_space_size) j["label_space_size"] = *c.label_space_size;
}

ojson trial_json(const TrialResult& t, std::size_t index) {
  ojson j;
  j["score_kind"] = std::string(to_string(t.score_kind));
  j["alpha"] = t.alpha;
  j["trial"] = index;
  j["trial_seed"] = t.trial_seed;
  j["cal_domain"] = t.cal_domain;
  j["test_domain"] = t.test_domain;
  j["q_hat"] = score_json(t.q_hat);
  j["risk_floor"] = t.risk_floor;
  j["below_risk_floor"] = t.below_risk_floor;
  j["n_cal"] = t.n_cal;
  j["n_test"] = t.n_test;
  j["emr"] = t.metrics.emr;
  j["apss"] = t.metrics.apss;
  j["ssm"] = t.metrics.ssm;
  j["ssm_fallback"] = t.metrics.ssm_fallback;
  j["test_empty_fraction"] = t.test_empty_fraction;
  j["fano_bound"] = t.metrics.fano_bound ? ojson(*t.metrics.fano_bound) : ojson(nullptr);
  return j;
}

double num(const ojson& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return INFINITY;
    throw Error("unexpected string '" + s + "' where a number was expected");
  }
  if (v.is_null()) return NAN;
  return v.get<double>();
}

std::string cell_text(const ojson& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  return format_number(v.get<double>());
}

// CSV from an array of flat objects; columns follow the first object's keys.
std::string table_csv(const ojson& rows) {
  std::ostringstream os;
  if (rows.empty()) return os.str();
  std::vector<std::string> cols;
  for (const auto& [k, v] : rows.front().items()) cols.push_back(k);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cell_text(r.at(cols[i]));
    os << '\n';
  }
  return os.str();
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << (v == 0.0 ? 0.0 : v);
  return os.str();
}

std::string rgb(double r, double g, double b) {
  auto c = [](double x) { return static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  std::ostringstream os;
  os << "rgb(" << c(r) << "," << c(g) << "," << c(b) << ")";
  return os.str();
}

std::vector<std::vector<double>> matrix_from(const ojson& j) {
  std::vector<std::vector<double>> m;
  for (const auto& row : j) {
    std::vector<double> r;
    for (const auto& v : row) r.push_back(num(v));
    m.push_back(std::move(r));
  }
  return m;
}

std::string render_operating_points_svg(const ojson& points) {
  constexpr double W = 480, H = 360, L = 60, R = 20, T = 30, B = 50;
  double emr_max = 0.0, apss_max = 0.0;
  for (const auto& p : points) {
    emr_max = std::max(emr_max, p.at("emr").get<double>());
    apss_max = std::max(apss_max, p.at("apss").get<double>());
  }
  emr_max = emr_max > 0 ? emr_max * 1.1 : 1.0;
  apss_max = apss_max > 0 ? apss_max * 1.1 : 1.0;
  auto x = [&](double e) { return L + e / emr_max * (W - L - R); };
  auto y = [&](double a) { return H - B - a / apss_max * (H - T - B); };

  std::vector<std::string> kinds;
  for (const auto& p : points) {
    const auto k = p.at("score_kind").get<std::string>();
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  }
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<title>EMR-APSS operating points</title>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">EMR</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">APSS</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double e = emr_max * i / 4.0, a = apss_max * i / 4.0;
    os << "<text x=\"" << fixed(x(e), 1) << "\" y=\"" << H - B + 16 << "\" font-size=\"10\" text-anchor=\"middle\">"
       << fixed(e, 3) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << fixed(y(a), 1) << "\" font-size=\"10\" text-anchor=\"end\">"
       << fixed(a, 2) << "</text>\n";
  }
  // Segments join the operating points of different scores at the same alpha.
  std::vector<double> alphas;
  for (const auto& p : points) {
    const double a = p.at("alpha").get<double>();
    if (std::find(alphas.begin(), alphas.end(), a) == alphas.end()) alphas.push_back(a);
  }
  for (double a : alphas) {
    std::vector<const ojson*> same;
    for (const auto& p : points)
      if (p.at("alpha").get<double>() == a) same.push_back(&p);
    for (std::size_t i = 1; i < same.size(); ++i) {
      os << "<line class=\"pair\" x1=\"" << fixed(x(same[i - 1]->at("emr").get<double>()), 2) << "\" y1=\""
         << fixed(y(same[i - 1]->at("apss").get<double>()), 2) << "\" x2=\""
         << fixed(x(same[i]->at("emr").get<double>()), 2) << "\" y2=\""
         << fixed(y(same[i]->at("apss").get<double>()), 2) << "\" stroke=\"#999\"/>\n";
    }
  }
  for (const auto& p : points) {
    const auto k = p.at("score_kind").get<std::string>();
    const auto ki = static_cast<std::size_t>(std::find(kinds.begin(), kinds.end(), k) - kinds.begin());
    os << "<circle class=\"point\" data-score=\"" << escape_xml(k) << "\" data-alpha=\""
       << format_number(p.at("alpha").get<double>()) << "\" data-emr=\"" << format_number(p.at("emr").get<double>())
       << "\" data-apss=\"" << format_number(p.at("apss").get<double>()) << "\" cx=\""
       << fixed(x(p.at("emr").get<double>()), 2) << "\" cy=\"" << fixed(y(p.at("apss").get<double>()), 2)
       << "\" r=\"5\" fill=\"" << palette[ki % 5] << "\"/>\n";
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    os << "<text x=\"" << W - R - 120 << "\" y=\"" << T + 14 * static_cast<double>(i) << "\" font-size=\"11\" fill=\""
       << palette[i % 5] << "\">" << escape_xml(kinds[i]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& content, std::vector<std::filesystem::path>& out) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << content;
  if (!f) throw Error("failed writing '" + p.string() + "'");
  out.push_back(p);
}

}  // namespace

std::string render_matrix_csv(const std::vector<std::string>& domains, const std::vector<std::vector<double>>& m) {
  std::ostringstream os;
  os << "cal_domain,test_domain,value\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) os << domains[i] << ',' << domains[j] << ',' << format_number(m[i][j]) << '\n';
  return os.str();
}

std::string render_heatmap_svg(const std::string& title, const std::vector<std::string>& domains,
                               const std::vector<std::vector<double>>& m) {
  constexpr double cell = 70, left = 110, top = 60;
  const double n = static_cast<double>(domains.size());
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : m)
    for (double v : r)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = hi = 0.0;
  const bool diverging = lo < 0.0;
  const double span = diverging ? std::max(std::abs(lo), std::abs(hi)) : (hi - lo);

  auto color = [&](double v) {
    if (!std::isfinite(v)) return std::string("rgb(128,128,128)");
    if (diverging) {
      const double t = span > 0 ? v / span : 0.0;  // -1..1
      return t >= 0 ? rgb(1.0, 1.0 - t, 1.0 - t) : rgb(1.0 + t, 1.0 + t, 1.0);
    }
    const double t = span > 0 ? (v - lo) / span : 0.0;
    return rgb(1.0 - 0.8 * t, 1.0 - 0.55 * t, 1.0);
  };

  std::ostringstream os;
  const double w = left + cell * n + 20, h = top + cell * n + 20;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<title>" << escape_xml(title) << "</title>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << escape_xml(title)
     << " (rows: calibration, columns: test)</text>\n";
  for (std::size_t j = 0; j < domains.size(); ++j) {
    os << "<text x=\"" << left + cell * (static_cast<double>(j) + 0.5) << "\" y=\"" << top - 8
       << "\" font-size=\"11\" text-anchor=\"middle\">" << escape_xml(domains[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << "<text x=\"" << left - 8 << "\" y=\"" << top + cell * (static_cast<double>(i) + 0.5)
       << "\" font-size=\"11\" text-anchor=\"end\">" << escape_xml(domains[i]) << "</text>\n";
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      const double x = left + cell * static_cast<double>(j), y = top + cell * static_cast<double>(i);
      os << "<rect class=\"cell\" data-row=\"" << i << "\" data-col=\"" << j << "\" data-value=\""
         << format_number(m[i][j]) << "\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
         << cell << "\" fill=\"" << color(m[i][j]) << "\" stroke=\"#444\"/>\n";
      os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
         << "\" font-size=\"11\" text-anchor=\"middle\">" << fixed(m[i][j], 3) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

ReportDocument sweep_document(const SweepResult& result, const RunInfo& info) {
  ojson j;
  j["kind"] = "sweep";
  config_json(j, info);
  ojson rows = ojson::array();
  for (const auto& r : result.rows) {
    ojson row;
    row["score_kind"] = std::string(to_string(r.score_kind));
    row["alpha"] = r.alpha;
    row["n_trials"] = r.emr.n;
    row["emr_mean"] = r.emr.mean;
    row["emr_std"] = r.emr.std;
    row["emr_se"] = r.emr.se();
    row["apss_mean"] = r.apss.mean;
    row["apss_std"] = r.apss.std;
    row["ssm_mean"] = r.ssm.mean;
    row["ssm_std"] = r.ssm.std;
    row["risk_floor_mean"] = r.risk_floor.mean;
    row["n_below_floor"] = r.n_below_floor;
    row["fano_mean"] = r.fano ? ojson(r.fano->mean) : ojson(nullptr);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  ojson trials = ojson::array();
  std::size_t per_row = result.rows.empty() ? 0 : result.trials.size() / result.rows.size();
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    trials.push_back(trial_json(result.trials[i], per_row ? i % per_row : i));
  }
  j["trials"] = std::move(trials);
  return ReportDocument{std::move(j)};
}

ReportDocument crossdomain_document(const CrossDomainResult& r, const RunInfo& info) {
  ojson j;
  j["kind"] = "crossdomain";
  config_json(j, info);
  j["alpha"] = r.alpha;
  j["primary"] = std::string(to_string(r.primary));
  j["compare"] = std::string(to_string(r.compare));
  j["domains"] = r.domains;
  j["difference_def"] = "compare minus primary, paired over trials";
  j["averaging"] = "unweighted mean over off-diagonal cells";

  const std::size_t nd = r.domains.size();
  auto matrix = [&](auto get) {
    ojson m = ojson::array();
    for (std::size_t i = 0; i < nd; ++i) {
      ojson row = ojson::array();
      for (std::size_t k = 0; k < nd; ++k) row.push_back(get(i, k));
      m.push_back(std::move(row));
    }
    return m;
  };
  const std::string p = std::string(to_string(r.primary)), c = std::string(to_string(r.compare));
  ojson mats;
  mats["emr_" + p] = matrix([&](auto i, auto k) { return r.primary_cells[i][k].emr.mean; });
  mats["apss_" + p] = matrix([&](auto i, auto k) { return r.primary_cells[i][k].apss.mean; });
  mats["emr_" + c] = matrix([&](auto i, auto k) { return r.compare_cells[i][k].emr.mean; });
  mats["apss_" + c] = matrix([&](auto i, auto k) { return r.compare_cells[i][k].apss.mean; });
  mats["emr_diff"] = matrix([&](auto i, auto k) { return r.emr_diff[i][k].mean; });
  mats["emr_diff_se"] = matrix([&](auto i, auto k) { return r.emr_diff[i][k].se(); });
  mats["apss_diff"] = matrix([&](auto i, auto k) { return r.apss_diff[i][k].mean; });
  j["matrices"] = std::move(mats);

  j["offdiag_mean"] = {{"emr_" + p, r.offdiag_mean_emr(true)},
                       {"apss_" + p, r.offdiag_mean_apss(true)},
                       {"emr_" + c, r.offdiag_mean_emr(false)},
                       {"apss_" + c, r.offdiag_mean_apss(false)}};

  ojson cells = ojson::array();
  for (const auto* set : {&r.primary_cells, &r.compare_cells}) {
    for (const auto& row : *set) {
      for (const auto& cell : row) {
        ojson jc;
        jc["score_kind"] = std::string(to_string(cell.trials.front().score_kind));
        jc["cal_domain"] = cell.cal_domain;
        jc["test_domain"] = cell.test_domain;
        jc["emr"] = summary_json(cell.emr);
        jc["apss"] = summary_json(cell.apss);
        jc["ssm"] = summary_json(cell.ssm);
        jc["risk_floor_mean"] = cell.risk_floor.mean;
        ojson seeds = ojson::array(), emrs = ojson::array(), apsss = ojson::array();
        for (const auto& t : cell.trials) {
          seeds.push_back(t.trial_seed);
          emrs.push_back(t.metrics.emr);
          apsss.push_back(t.metrics.apss);
        }
        jc["trial_seeds"] = std::move(seeds);
        jc["trial_emr"] = std::move(emrs);
        jc["trial_apss"] = std::move(apsss);
        cells.push_back(std::move(jc));
      }
    }
  }
  j["cells"] = std::move(cells);
  return ReportDocument{std::move(j)};
}

std::vector<std::filesystem::path> emit_report(const ReportDocument& doc, ReportFormat format,
                                               const std::filesystem::path& dir) {
  const auto& j = doc.json;
  if (!j.contains("kind")) throw InvalidArgument("report document has no kind");
  const auto kind = j.at("kind").get<std::string>();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  if (kind == "sweep") {
    if (j.at("rows").empty()) throw InvalidArgument("sweep report has no rows");
    ojson points = ojson::array();
    for (const auto& r : j.at("rows")) {
      points.push_back({{"score_kind", r.at("score_kind")},
                        {"alpha", r.at("alpha")},
                        {"emr", r.at("emr_mean")},
                        {"apss", r.at("apss_mean")}});
    }
    switch (format) {
      case ReportFormat::json: write_file(dir / "sweep.json", j.dump(2) + "\n", written); break;
      case ReportFormat::csv:
        write_file(dir / "sweep.csv", table_csv(j.at("rows")), written);
        write_file(dir / "trials.csv", table_csv(j.at("trials")), written);
        write_file(dir / "operating_points.csv", table_csv(points), written);
        break;
      case ReportFormat::svg_heatmap:
        write_file(dir / "operating_points.svg", render_operating_points_svg(points), written);
        break;
    }
  } else if (kind == "crossdomain") {
    const auto domains = j.at("domains").get<std::vector<std::string>>();
    if (domains.empty()) throw InvalidArgument("cross-domain report has no domains");
    switch (format) {
      case ReportFormat::json: write_file(dir / "crossdomain.json", j.dump(2) + "\n", written); break;
      case ReportFormat::csv:
        for (const auto& [name, m] : j.at("matrices").items()) {
          write_file(dir / (name + ".csv"), render_matrix_csv(domains, matrix_from(m)), written);
        }
        break;
      case ReportFormat::svg_heatmap:
        for (const auto& [name, m] : j.at("matrices").items()) {
          write_file(dir / (name + ".svg"), render_heatmap_svg(name, domains, matrix_from(m)), written);
        }
        break;
    }
  } else {
    throw InvalidArgument("unknown report kind '" + kind + "'");
  }
  return written;
}

ReportDocument load_report(const std::filesystem::path& dir) {
  for (const char* name : {"sweep.json", "crossdomain.json"}) {
    const auto p = dir / name;
    if (!std::filesystem::exists(p)) continue;
    std::ifstream in(p);
    if (!in) throw Error("cannot read '" + p.string() + "'");
    try {
      return ReportDocument{ojson::parse(in)};
    } catch (const ojson::exception& e) {
      throw Error("malformed report '" + p.string() + "': " + e.what());
    }
  }
  throw Error("no sweep.json or crossdomain.json in '" + dir.string() + "'");
}

}  // namespace liconf
