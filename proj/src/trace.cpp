#include "liconf/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "json.hpp"
#include "liconf/error.hpp"

namespace liconf {

using nlohmann::json;

std::string_view to_string(TaskType t) noexcept { return t == TaskType::mcqa ? "mcqa" : "open"; }

const AnswerUnit* CandidatePool::find(std::string_view unit_id) const noexcept {
  auto it = std::lower_bound(units.begin(), units.end(), unit_id,
                             [](const AnswerUnit& u, std::string_view id) { return u.unit_id < id; });
  if (it == units.end() || it->unit_id != unit_id) return nullptr;
  return &*it;
}

namespace {

const json& require(const json& obj, const char* key, std::size_t record, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(record, path + key, "missing field");
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t record, const std::string& path) {
  const json& v = require(obj, key, record, path);
  if (!v.is_string()) throw ValidationError(record, path + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> parse_logps(const json& v, std::size_t record, const std::string& field) {
  if (!v.is_array()) throw ValidationError(record, field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw ValidationError(record, field, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

QuestionTrace parse_record(const json& rec, std::size_t record) {
  if (!rec.is_object()) throw ValidationError(record, "<record>", "expected a JSON object");
  QuestionTrace q;
  q.question_id = require_string(rec, "question_id", record, "");
  q.domain = require_string(rec, "domain", record, "");

  const std::string task = require_string(rec, "task_type", record, "");
  if (task == "mcqa") {
    q.task_type = TaskType::mcqa;
  } else if (task == "open") {
    q.task_type = TaskType::open;
  } else {
    throw ValidationError(record, "task_type", "must be \"mcqa\" or \"open\"");
  }

  const json& nl = require(rec, "num_layers", record, "");
  if (!nl.is_number_integer()) throw ValidationError(record, "num_layers", "expected an integer");
  const auto layers = nl.get<std::int64_t>();
  if (layers <= 0 || layers > 1'000'000) throw ValidationError(record, "num_layers", "must be positive");
  q.num_layers = static_cast<int>(layers);

  if (auto it = rec.find("ground_truth_unit"); it != rec.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError(record, "ground_truth_unit", "expected a string or null");
    q.ground_truth_unit = it->get<std::string>();
  }

  const json& responses = require(rec, "responses", record, "");
  if (!responses.is_array()) throw ValidationError(record, "responses", "expected an array");
  q.responses.reserve(responses.size());
  for (std::size_t j = 0; j < responses.size(); ++j) {
    const json& r = responses[j];
    const std::string path = "responses[" + std::to_string(j) + "].";
    if (!r.is_object()) throw ValidationError(record, path.substr(0, path.size() - 1), "expected an object");
    ResponseTrace rt;
    const json& rid = require(r, "response_id", record, path);
    if (!rid.is_number_integer()) throw ValidationError(record, path + "response_id", "expected an integer");
    rt.response_id = rid.get<std::int64_t>();
    rt.text = require_string(r, "text", record, path);
    rt.parsed_unit = require_string(r, "parsed_unit", record, path);
    const json& adm = require(r, "admissible", record, path);
    if (!adm.is_boolean()) throw ValidationError(record, path + "admissible", "expected a boolean");
    rt.admissible = adm.get<bool>();

    const json& toks = require(r, "tokens", record, path);
    if (!toks.is_array()) throw ValidationError(record, path + "tokens", "expected an array");
    rt.tokens.reserve(toks.size());
    for (std::size_t t = 0; t < toks.size(); ++t) {
      const std::string tpath = path + "tokens[" + std::to_string(t) + "].";
      if (!toks[t].is_object()) throw ValidationError(record, tpath.substr(0, tpath.size() - 1), "expected an object");
      TokenLayerLogp tl;
      tl.logp_ctx = parse_logps(require(toks[t], "logp_ctx", record, tpath), record, tpath + "logp_ctx");
      tl.logp_null = parse_logps(require(toks[t], "logp_null", record, tpath), record, tpath + "logp_null");
      rt.tokens.push_back(std::move(tl));
    }
    q.responses.push_back(std::move(rt));
  }
  return q;
}

void check_logps(const std::vector<double>& v, int num_layers, std::size_t record, const std::string& field) {
  if (v.size() != static_cast<std::size_t>(num_layers)) {
    throw ValidationError(record, field,
                          "length " + std::to_string(v.size()) + " does not match num_layers " +
                              std::to_string(num_layers));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError(record, field, "log-probability must be finite");
    if (x > 0.0) throw ValidationError(record, field, "log-probability must be <= 0");
  }
}

}  // namespace

void validate(const QuestionTrace& q, std::size_t record) {
  if (q.question_id.empty()) throw ValidationError(record, "question_id", "must be non-empty");
  if (q.num_layers <= 0) throw ValidationError(record, "num_layers", "must be positive");
  if (q.responses.empty()) throw ValidationError(record, "responses", "response list is empty");

  std::map<std::string_view, bool> unit_admissible;
  for (std::size_t j = 0; j < q.responses.size(); ++j) {
    const ResponseTrace& r = q.responses[j];
    const std::string path = "responses[" + std::to_string(j) + "].";
    if (r.parsed_unit.empty()) throw ValidationError(record, path + "parsed_unit", "must be non-empty");
    if (r.tokens.empty()) throw ValidationError(record, path + "tokens", "a response needs at least one token");
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      const std::string tpath = path + "tokens[" + std::to_string(t) + "].";
      check_logps(r.tokens[t].logp_ctx, q.num_layers, record, tpath + "logp_ctx");
      check_logps(r.tokens[t].logp_null, q.num_layers, record, tpath + "logp_null");
    }
    auto [it, inserted] = unit_admissible.emplace(r.parsed_unit, r.admissible);
    if (!inserted && it->second != r.admissible) {
      throw ValidationError(record, path + "admissible",
                            "conflicting admissibility labels within answer unit '" + r.parsed_unit + "'");
    }
  }
}

std::vector<QuestionTrace> parse_trace_file(std::istream& in) {
  std::vector<QuestionTrace> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(record, "<record>", std::string("malformed JSON: ") + e.what());
    }
    QuestionTrace q = parse_record(rec, record);
    validate(q, record);
    if (!seen.insert(q.question_id).second) {
      throw ValidationError(record, "question_id", "duplicate question_id '" + q.question_id + "'");
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<QuestionTrace> read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file '" + path + "'");
  return parse_trace_file(in);
}

void write_trace_file(std::ostream& out, const std::vector<QuestionTrace>& traces) {
  using ojson = nlohmann::ordered_json;
  for (const auto& q : traces) {
    ojson rec;
    rec["question_id"] = q.question_id;
    rec["domain"] = q.domain;
    rec["task_type"] = std::string(to_string(q.task_type));
    rec["num_layers"] = q.num_layers;
    rec["ground_truth_unit"] = q.ground_truth_unit ? ojson(*q.ground_truth_unit) : ojson(nullptr);
    ojson responses = ojson::array();
    for (const auto& r : q.responses) {
      ojson jr;
      jr["response_id"] = r.response_id;
      jr["text"] = r.text;
      jr["parsed_unit"] = r.parsed_unit;
      jr["admissible"] = r.admissible;
      ojson toks = ojson::array();
      for (const auto& t : r.tokens) {
        ojson jt;
        jt["logp_ctx"] = t.logp_ctx;
        jt["logp_null"] = t.logp_null;
        toks.push_back(std::move(jt));
      }
      jr["tokens"] = std::move(toks);
      responses.push_back(std::move(jr));
    }
    rec["responses"] = std::move(responses);
    out << rec.dump() << '\n';
  }
}

void write_trace_file(const std::string& path, const std::vector<QuestionTrace>& traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace file '" + path + "'");
  write_trace_file(out, traces);
  if (!out) throw Error("failed writing trace file '" + path + "'");
}

CandidatePool build_pool(const QuestionTrace& q) {
  std::map<std::string, AnswerUnit> by_id;
  for (std::size_t j = 0; j < q.responses.size(); ++j) {
    const auto& r = q.responses[j];
    auto [it, inserted] = by_id.try_emplace(r.parsed_unit);
    if (inserted) {
      it->second.unit_id = r.parsed_unit;
      it->second.admissible = true;
    }
    it->second.member_indices.push_back(j);
    it->second.admissible = it->second.admissible && r.admissible;
  }
  CandidatePool pool;
  pool.m = q.responses.size();
  pool.units.reserve(by_id.size());
  for (auto& [id, unit] : by_id) pool.units.push_back(std::move(unit));
  return pool;
}

std::vector<std::string> admissible_units(const CandidatePool& p) {
  std::vector<std::string> out;
  for (const auto& u : p.units) {
    if (u.admissible) out.push_back(u.unit_id);
  }
  return out;
}

}  // namespace liconf
