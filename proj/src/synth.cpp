#include "liconf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "liconf/error.hpp"
#include "liconf/rng.hpp"

namespace liconf {

using nlohmann::json;

namespace {

// Scale of the planted per-response signal and its noise terms (nats).
constexpr double kSignalScale = 3.0;
constexpr double kResponseNoise = 0.5;
constexpr double kTokenNoise = 0.3;
constexpr double kNullNllMin = 0.5;
constexpr double kNullNllSpan = 2.0;

// Stream tags for independent draws within one question.
enum Tag : std::uint64_t {
  kTagDistribution = 1,
  kTagTruth,
  kTagUnit,
  kTagResponse,
  kTagToken,
  kTagSuppression,
};

void check_knob(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0, 1]");
}

// Non-monotone depth profile: information rises through the middle layers and
// partly recedes near the top.
double layer_weight(int layer, int num_layers) {
  const double x = (static_cast<double>(layer) + 0.5) / static_cast<double>(num_layers);
  return std::sin(std::numbers::pi * x) + 0.25 * std::cos(3.0 * std::numbers::pi * x);
}

std::vector<double> softmax_draw(rng::Stream& s, std::size_t k, double sharpness) {
  std::vector<double> g(k);
  for (auto& x : g) x = s.normal();
  const double mx = *std::max_element(g.begin(), g.end());
  double z = 0.0;
  for (auto& x : g) {
    x = std::exp(sharpness * (x - mx));
    z += x;
  }
  for (auto& x : g) x /= z;
  return g;
}

std::size_t categorical(rng::Stream& s, const std::vector<double>& p) {
  const double u = s.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    last = k;
    acc += p[k];
    if (u < acc) return k;
  }
  return last;
}

double entropy_nats(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h + 0.0;
}

std::string question_label(const std::string& domain, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return domain + "-" + buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_questions < 1) throw InvalidArgument("n_questions must be >= 1");
  if (domains.empty()) throw InvalidArgument("at least one domain is required");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i].empty()) throw InvalidArgument("domain labels must be non-empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (domains[i] == domains[j]) throw InvalidArgument("duplicate domain '" + domains[i] + "'");
    }
  }
  if (m < 1) throw InvalidArgument("m must be >= 1");
  if (num_layers < 1) throw InvalidArgument("num_layers must be >= 1");
  if (tokens_per_response < 1) throw InvalidArgument("tokens_per_response must be >= 1");
  if (label_space_size < 1) throw InvalidArgument("label_space_size must be >= 1");
  if (!(answer_distribution_sharpness > 0.0)) throw InvalidArgument("answer_distribution_sharpness must be > 0");
  check_knob(li_informativeness, "li_informativeness");
  check_knob(freq_informativeness, "freq_informativeness");
  if (!(empty_pool_rate >= 0.0 && empty_pool_rate < 1.0)) throw InvalidArgument("empty_pool_rate must lie in [0, 1)");
  if (empty_pool_rate > 0.0 && label_space_size < 2) {
    throw InvalidArgument("empty pools need a label space of at least 2 units");
  }
  for (const auto& [d, s] : shift) {
    if (std::find(domains.begin(), domains.end(), d) == domains.end()) {
      throw InvalidArgument("shift names unknown domain '" + d + "'");
    }
    if (!(s.li >= 0.0) || !(s.freq >= 0.0)) throw InvalidArgument("shift multipliers must be non-negative");
    check_knob(li_informativeness * s.li, "shifted li_informativeness");
    check_knob(freq_informativeness * s.freq, "shifted freq_informativeness");
  }
}

DomainShift SynthSpec::shift_for(const std::string& domain) const {
  auto it = shift.find(domain);
  return it == shift.end() ? DomainShift{} : it->second;
}

SynthSpec parse_synth_spec(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed synth spec: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("synth spec must be a JSON object");
  SynthSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_questions") s.n_questions = v.get<std::size_t>();
      else if (key == "domains") s.domains = v.get<std::vector<std::string>>();
      else if (key == "m") s.m = v.get<std::size_t>();
      else if (key == "num_layers") s.num_layers = v.get<int>();
      else if (key == "tokens_per_response") s.tokens_per_response = v.get<std::size_t>();
      else if (key == "label_space_size") s.label_space_size = v.get<std::size_t>();
      else if (key == "answer_distribution_sharpness") s.answer_distribution_sharpness = v.get<double>();
      else if (key == "li_informativeness") s.li_informativeness = v.get<double>();
      else if (key == "freq_informativeness") s.freq_informativeness = v.get<double>();
      else if (key == "empty_pool_rate") s.empty_pool_rate = v.get<double>();
      else if (key == "task_type") {
        const auto t = v.get<std::string>();
        if (t != "mcqa" && t != "open") throw InvalidArgument("task_type must be \"mcqa\" or \"open\"");
        s.task_type = t == "mcqa" ? TaskType::mcqa : TaskType::open;
      } else if (key == "shift") {
        for (const auto& [d, m] : v.items()) {
          DomainShift ds;
          ds.li = m.value("li", 1.0);
          ds.freq = m.value("freq", 1.0);
          s.shift[d] = ds;
        }
      } else {
        throw InvalidArgument("unknown synth spec field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad synth spec value: ") + e.what());
  }
  s.validate();
  return s;
}

SynthSpec read_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open synth spec '" + path + "'");
  return parse_synth_spec(in);
}

std::string synth_spec_to_json(const SynthSpec& s) {
  nlohmann::ordered_json j;
  j["n_questions"] = s.n_questions;
  j["domains"] = s.domains;
  j["m"] = s.m;
  j["num_layers"] = s.num_layers;
  j["tokens_per_response"] = s.tokens_per_response;
  j["label_space_size"] = s.label_space_size;
  j["answer_distribution_sharpness"] = s.answer_distribution_sharpness;
  j["li_informativeness"] = s.li_informativeness;
  j["freq_informativeness"] = s.freq_informativeness;
  nlohmann::ordered_json sh = nlohmann::ordered_json::object();
  for (const auto& [d, v] : s.shift) sh[d] = {{"li", v.li}, {"freq", v.freq}};
  j["shift"] = sh;
  j["empty_pool_rate"] = s.empty_pool_rate;
  j["task_type"] = std::string(to_string(s.task_type));
  return j.dump(2);
}

std::string unit_label(std::size_t k, std::size_t size) {
  if (size <= 26) return std::string(1, static_cast<char>('A' + k));
  char buf[32];
  std::snprintf(buf, sizeof buf, "U%03zu", k);
  return buf;
}

namespace {

struct Generated {
  QuestionTrace trace;
  QuestionTruth truth;
};

Generated generate_question(const SynthSpec& spec, const std::vector<std::string>& labels, std::uint64_t seed,
                            std::size_t domain_index, std::size_t qi, bool suppressed) {
  const std::string& domain = spec.domains[domain_index];
  const DomainShift sh = spec.shift_for(domain);
  const double li_eff = spec.li_informativeness * sh.li;
  const double freq_eff = spec.freq_informativeness * sh.freq;
  const std::size_t k = spec.label_space_size;
  const std::uint64_t qkey = rng::combine(seed, rng::hash_string(domain), qi);

  rng::Stream dist_stream(rng::combine(qkey, kTagDistribution));
  const auto p = softmax_draw(dist_stream, k, spec.answer_distribution_sharpness);
  rng::Stream truth_stream(rng::combine(qkey, kTagTruth));
  const std::size_t y_star = categorical(truth_stream, p);

  std::vector<double> r(k);
  const double flat = 1.0 / static_cast<double>(k);
  for (std::size_t u = 0; u < k; ++u) r[u] = freq_eff * p[u] + (1.0 - freq_eff) * flat;
  if (suppressed) {
    r[y_star] = 0.0;
    const double z = std::accumulate(r.begin(), r.end(), 0.0);
    if (z > 0.0) {
      for (auto& x : r) x /= z;
    } else {
      for (std::size_t u = 0; u < k; ++u) r[u] = u == y_star ? 0.0 : 1.0 / static_cast<double>(k - 1);
    }
  }

  Generated g;
  QuestionTrace& q = g.trace;
  q.question_id = question_label(domain, qi);
  q.domain = domain;
  q.task_type = spec.task_type;
  q.num_layers = spec.num_layers;
  q.ground_truth_unit = labels[y_star];
  q.responses.resize(spec.m);

  const auto layers = static_cast<std::size_t>(spec.num_layers);
  std::vector<double> weights(layers);
  for (std::size_t l = 0; l < layers; ++l) weights[l] = layer_weight(static_cast<int>(l), spec.num_layers);

  for (std::size_t j = 0; j < spec.m; ++j) {
    rng::Stream unit_stream(rng::combine(qkey, kTagUnit, j));
    const std::size_t u = categorical(unit_stream, r);
    rng::Stream resp_stream(rng::combine(qkey, kTagResponse, j));
    const double mu = li_eff * kSignalScale * p[u] + kResponseNoise * resp_stream.normal();

    ResponseTrace& rt = q.responses[j];
    rt.response_id = static_cast<std::int64_t>(j);
    rt.parsed_unit = labels[u];
    rt.text = "answer " + labels[u];
    rt.admissible = u == y_star;
    rt.tokens.resize(spec.tokens_per_response);
    for (std::size_t t = 0; t < spec.tokens_per_response; ++t) {
      auto& tok = rt.tokens[t];
      tok.logp_ctx.resize(layers);
      tok.logp_null.resize(layers);
      for (std::size_t l = 0; l < layers; ++l) {
        rng::Stream s(rng::combine(qkey, kTagToken, j, t, l));
        const double null_nll = kNullNllMin + kNullNllSpan * s.uniform();
        const double kappa = weights[l] * mu + kTokenNoise * s.normal();
        tok.logp_null[l] = -null_nll;
        tok.logp_ctx[l] = -(null_nll * std::exp(-kappa));
      }
    }
  }

  g.truth.question_id = q.question_id;
  g.truth.domain = domain;
  g.truth.distribution = p;
  g.truth.ground_truth_unit = labels[y_star];
  g.truth.suppressed = suppressed;
  g.truth.entropy = entropy_nats(p);
  return g;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<std::string> labels(spec.label_space_size);
  for (std::size_t u = 0; u < labels.size(); ++u) labels[u] = unit_label(u, labels.size());

  // Exactly round(rate * n) questions per domain lose their admissible
  // responses; the subset is uniform, so each question is affected with
  // probability rate and question order stays exchangeable.
  const std::size_t nd = spec.domains.size();
  const std::size_t n = spec.n_questions;
  std::vector<char> suppressed(nd * n, 0);
  const auto n_suppressed = static_cast<std::size_t>(std::llround(spec.empty_pool_rate * static_cast<double>(n)));
  for (std::size_t di = 0; di < nd; ++di) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng::Stream s(rng::combine(seed, rng::hash_string(spec.domains[di]), kTagSuppression));
    rng::shuffle(idx.begin(), idx.end(), s);
    for (std::size_t i = 0; i < n_suppressed; ++i) suppressed[di * n + idx[i]] = 1;
  }

  std::vector<Generated> gen(nd * n);
  const auto total = static_cast<std::ptrdiff_t>(gen.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    const auto k = static_cast<std::size_t>(i);
    gen[k] = generate_question(spec, labels, seed, k / n, k % n, suppressed[k] != 0);
  }

  SynthOutput out;
  out.truth.units = labels;
  out.traces.reserve(gen.size());
  out.truth.questions.reserve(gen.size());
  for (auto& g : gen) {
    out.traces.push_back(std::move(g.trace));
    out.truth.questions.push_back(std::move(g.truth));
  }
  out.truth.h_y_given_x = truth_entropy(out.truth);
  return out;
}

double truth_entropy(const SynthTruth& truth) {
  if (truth.questions.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& q : truth.questions) sum += entropy_nats(q.distribution);
  return sum / static_cast<double>(truth.questions.size());
}

void write_truth_json(std::ostream& out, const SynthTruth& truth) {
  nlohmann::ordered_json j;
  j["h_y_given_x"] = truth.h_y_given_x;
  j["label_space_size"] = truth.units.size();
  j["units"] = truth.units;
  nlohmann::ordered_json qs = nlohmann::ordered_json::array();
  for (const auto& q : truth.questions) {
    nlohmann::ordered_json jq;
    jq["question_id"] = q.question_id;
    jq["domain"] = q.domain;
    jq["ground_truth_unit"] = q.ground_truth_unit;
    jq["suppressed"] = q.suppressed;
    jq["entropy"] = q.entropy;
    jq["distribution"] = q.distribution;
    qs.push_back(std::move(jq));
  }
  j["questions"] = std::move(qs);
  out << j.dump(2) << '\n';
}

double auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auroc: scores and labels differ in length");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double admissibility_auroc(const std::vector<QuestionTrace>& traces, const LayerSelection& sel) {
  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto& q : traces) {
    for (const auto& r : q.responses) {
      scores.push_back(layerwise_information(r, sel));
      labels.push_back(r.admissible);
    }
  }
  return auroc(scores, labels);
}

}  // namespace liconf
