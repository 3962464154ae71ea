#pragma once

// Trace data model: one question, its sampled responses, and the per-token,
// per-layer log-probabilities (nats) of every realized token with and without
// the question in context.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace liconf {

struct TokenLayerLogp {
  std::vector<double> logp_ctx;   // one entry per scored layer, all <= 0
  std::vector<double> logp_null;  // same length as logp_ctx
};

struct ResponseTrace {
  std::int64_t response_id = 0;
  std::string text;
  std::string parsed_unit;
  bool admissible = false;
  std::vector<TokenLayerLogp> tokens;

  std::size_t num_tokens() const noexcept { return tokens.size(); }
};

enum class TaskType { mcqa, open };

std::string_view to_string(TaskType t) noexcept;

struct QuestionTrace {
  std::string question_id;
  std::string domain;
  TaskType task_type = TaskType::mcqa;
  int num_layers = 0;
  std::optional<std::string> ground_truth_unit;
  std::vector<ResponseTrace> responses;
};

// A distinct answer unit and the indices (0-based) of the responses that
// parse to it.
struct AnswerUnit {
  std::string unit_id;
  std::vector<std::size_t> member_indices;
  bool admissible = false;
};

// Units are sorted by unit_id so that a pool does not depend on response order.
struct CandidatePool {
  std::vector<AnswerUnit> units;
  std::size_t m = 0;

  const AnswerUnit* find(std::string_view unit_id) const noexcept;
};

// Parses newline-delimited trace records. Blank lines are skipped. Any
// malformed record rejects the whole stream with a ValidationError naming the
// 1-based line number and the offending field.
std::vector<QuestionTrace> parse_trace_file(std::istream& in);
std::vector<QuestionTrace> read_trace_file(const std::string& path);

// Checks one record's invariants; `record` is used in error messages.
void validate(const QuestionTrace& q, std::size_t record = 0);

// Writes records in the same schema, one per line, fields in schema order.
void write_trace_file(std::ostream& out, const std::vector<QuestionTrace>& traces);
void write_trace_file(const std::string& path, const std::vector<QuestionTrace>& traces);

CandidatePool build_pool(const QuestionTrace& q);

// Identifiers of the admissible units, sorted. May be empty.
std::vector<std::string> admissible_units(const CandidatePool& p);

}  // namespace liconf
