#pragma once

// Synthetic trace generator with a known answer distribution per question.
//
// Each question draws a true answer distribution p over the label space and
// a ground-truth answer y* ~ p. Responses are sampled from a mixture of p and
// the uniform distribution; the weight on p is the frequency informativeness,
// so at 0 the answer counts carry no information about y*. Per-token, per-layer log-probabilities are synthesized so
// that the usable information of a response grows with the true probability
// of the answer it gives, scaled by the LI informativeness. The planted signal
// lives in logp_ctx only; logp_null carries none.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "liconf/li_score.hpp"
#include "liconf/trace.hpp"

namespace liconf {

struct DomainShift {
  double li = 1.0;    // multiplier on li_informativeness
  double freq = 1.0;  // multiplier on freq_informativeness
};

struct SynthSpec {
  std::size_t n_questions = 200;  // per domain
  std::vector<std::string> domains{"synthetic"};
  std::size_t m = 20;
  int num_layers = 8;
  std::size_t tokens_per_response = 4;
  std::size_t label_space_size = 4;
  double answer_distribution_sharpness = 2.0;
  double li_informativeness = 1.0;
  double freq_informativeness = 1.0;
  std::map<std::string, DomainShift> shift;
  double empty_pool_rate = 0.0;
  TaskType task_type = TaskType::mcqa;

  // Throws InvalidArgument when a field is out of range.
  void validate() const;
  DomainShift shift_for(const std::string& domain) const;
};

SynthSpec parse_synth_spec(std::istream& in);
SynthSpec read_synth_spec(const std::string& path);
std::string synth_spec_to_json(const SynthSpec& spec);

struct QuestionTruth {
  std::string question_id;
  std::string domain;
  std::vector<double> distribution;  // over label_space_size units
  std::string ground_truth_unit;
  bool suppressed = false;  // admissible responses were removed from the pool
  double entropy = 0.0;     // nats
};

struct SynthTruth {
  std::vector<std::string> units;
  std::vector<QuestionTruth> questions;
  double h_y_given_x = 0.0;
};

struct SynthOutput {
  std::vector<QuestionTrace> traces;
  SynthTruth truth;
};

// Label of unit k in a label space of `size` units: "A".."Z" up to 26 units,
// "U000".. beyond.
std::string unit_label(std::size_t k, std::size_t size);

SynthOutput generate(const SynthSpec& spec, std::uint64_t seed);

// Mean over questions of sum_k -p_k ln p_k.
double truth_entropy(const SynthTruth& truth);

void write_truth_json(std::ostream& out, const SynthTruth& truth);

// Area under the ROC curve of raw LI as a detector of admissible responses
// (ties count one half). Returns 0.5 when either class is empty.
double admissibility_auroc(const std::vector<QuestionTrace>& traces, const LayerSelection& sel = LayerSelection::all());

// Mann-Whitney AUROC of `scores` for positives flagged in `labels`.
double auroc(const std::vector<double>& scores, const std::vector<bool>& labels);

}  // namespace liconf
