#pragma once

// Trace builders and straight-line reference computations shared by the
// unit tests. The reference code deliberately avoids the library's scoring
// functions so that it can serve as an independent oracle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "liconf/rng.hpp"
#include "liconf/trace.hpp"

namespace fixtures {

inline liconf::ResponseTrace response(std::string unit, bool admissible,
                                      std::vector<liconf::TokenLayerLogp> tokens, std::int64_t id = 0) {
  liconf::ResponseTrace r;
  r.response_id = id;
  r.text = "answer " + unit;
  r.parsed_unit = std::move(unit);
  r.admissible = admissible;
  r.tokens = std::move(tokens);
  return r;
}

// A response whose every token has the same log-probabilities.
inline liconf::ResponseTrace flat_response(std::string unit, bool admissible, int num_layers, double ctx, double null,
                                           std::size_t tokens = 1) {
  std::vector<liconf::TokenLayerLogp> t(tokens, {std::vector<double>(num_layers, ctx),
                                                 std::vector<double>(num_layers, null)});
  return response(std::move(unit), admissible, std::move(t));
}

inline liconf::QuestionTrace question(std::string id, int num_layers, std::vector<liconf::ResponseTrace> responses,
                                      std::string domain = "d") {
  liconf::QuestionTrace q;
  q.question_id = std::move(id);
  q.domain = std::move(domain);
  q.num_layers = num_layers;
  for (std::size_t j = 0; j < responses.size(); ++j) responses[j].response_id = static_cast<std::int64_t>(j);
  q.responses = std::move(responses);
  return q;
}

// Random valid question: `units` candidate labels, one of which (chosen at
// random) is admissible, or none when `allow_empty` fires.
inline liconf::QuestionTrace random_question(std::uint64_t key, std::size_t m, int num_layers, std::size_t units,
                                             bool allow_empty = true, std::string domain = "d") {
  liconf::rng::Stream s(key);
  const std::size_t good = s.below(units);
  const bool empty = allow_empty && s.bernoulli(0.15);
  std::vector<liconf::ResponseTrace> rs;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t u = s.below(units);
    const std::size_t n_tok = 1 + s.below(5);
    std::vector<liconf::TokenLayerLogp> toks(n_tok);
    for (auto& t : toks) {
      for (int l = 0; l < num_layers; ++l) {
        t.logp_ctx.push_back(-4.0 * s.uniform());
        t.logp_null.push_back(-4.0 * s.uniform());
      }
    }
    const std::string label(1, static_cast<char>('A' + u));
    rs.push_back(response(label, !empty && u == good, std::move(toks)));
  }
  return question("q" + std::to_string(key), num_layers, std::move(rs), std::move(domain));
}

// Straight-line layerwise unit scores: entropy per layer and context as a
// token loop, information as the difference, a plain sum over all layers,
// min-max rescaling, masked mean per unit, then the convex mix.
inline std::map<std::string, double> reference_unit_scores(const liconf::QuestionTrace& q, double w_li, double w_f,
                                                           double eps = 1e-8) {
  const std::size_t m = q.responses.size();
  std::vector<double> li(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& r = q.responses[j];
    double total = 0.0;
    for (int l = 0; l < q.num_layers; ++l) {
      double h_ctx = 0.0, h_null = 0.0;
      for (const auto& t : r.tokens) {
        h_ctx += -t.logp_ctx[l];
        h_null += -t.logp_null[l];
      }
      const double T = static_cast<double>(r.tokens.size());
      total += h_null / T - h_ctx / T;
    }
    li[j] = total;
  }
  double lo = li[0], hi = li[0];
  for (double v : li) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t j = 0; j < m; ++j) {
    auto& a = acc[q.responses[j].parsed_unit];
    a.first += (li[j] - lo) / (hi - lo + eps);
    a.second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [unit, a] : acc) {
    const double f_li = a.first / static_cast<double>(a.second);
    const double f_f = static_cast<double>(a.second) / static_cast<double>(m);
    out[unit] = w_li * f_li + w_f * f_f;
  }
  return out;
}

// Sort-and-index order statistic over scores plus one +inf.
inline double reference_quantile(std::vector<double> scores, std::size_t k) {
  scores.push_back(std::numeric_limits<double>::infinity());
  std::sort(scores.begin(), scores.end());
  return scores[k - 1];
}

}  // namespace fixtures
