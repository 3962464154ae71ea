#pragma once

// Layer-wise usable information of a realized response: how much conditioning
// on the question lowers the per-token predictive entropy at each layer,
// summed over a layer subset. All quantities are in nats.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liconf/trace.hpp"

namespace liconf {

inline constexpr double kDefaultEps = 1e-8;

enum class Context { with_question, null };

class LayerSelection {
 public:
  static LayerSelection all() { return LayerSelection{}; }
  // Duplicates are dropped; an empty list is rejected.
  static LayerSelection explicit_layers(std::vector<int> layers);
  // "all", or a comma list of indices and inclusive ranges, e.g. "0-3,7".
  static LayerSelection parse(const std::string& spec);

  bool is_all() const noexcept { return !layers_.has_value(); }
  // Sorted layer indices for a trace with `num_layers` layers; throws
  // InvalidArgument when an explicit index is out of range.
  std::vector<int> resolve(int num_layers) const;
  std::string to_string() const;

 private:
  std::optional<std::vector<int>> layers_;
};

struct LiValue {
  double raw = 0.0;
  std::optional<double> normalized;
};

// (1/T) sum_t -logp at `layer` under the chosen context.
double response_entropy(const ResponseTrace& r, int layer, Context context);

// H(y | null) - H(y | question) at one layer. May be negative.
double per_layer_information(const ResponseTrace& r, int layer);

double layerwise_information(const ResponseTrace& r, const LayerSelection& sel);
double layerwise_information(const ResponseTrace& r, std::span<const int> layers);

// Within-pool min-max rescaling (v - min) / (max - min + eps). Output order
// matches input order; every output lies in [0, 1).
std::vector<double> normalize_pool(std::span<const double> values, double eps = kDefaultEps);

// Raw and pool-normalized LI for every response of a question.
std::vector<LiValue> pool_information(const QuestionTrace& q, const LayerSelection& sel,
                                      double eps = kDefaultEps);

}  // namespace liconf
