#include "liconf/li_score.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "liconf/error.hpp"

namespace liconf {

LayerSelection LayerSelection::explicit_layers(std::vector<int> layers) {
  if (layers.empty()) throw InvalidArgument("layer selection is empty");
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  if (layers.front() < 0) throw InvalidArgument("layer index must be non-negative");
  LayerSelection s;
  s.layers_ = std::move(layers);
  return s;
}

namespace {

int parse_index(std::string_view s, const std::string& spec) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument("bad layer selection '" + spec + "'");
  }
  return v;
}

}  // namespace

LayerSelection LayerSelection::parse(const std::string& spec) {
  if (spec == "all") return all();
  if (spec.empty()) throw InvalidArgument("empty layer selection");
  std::vector<int> layers;
  std::string_view rest(spec);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (const auto dash = item.find('-'); dash != std::string_view::npos) {
      const int lo = parse_index(item.substr(0, dash), spec);
      const int hi = parse_index(item.substr(dash + 1), spec);
      if (hi < lo) throw InvalidArgument("bad layer range in '" + spec + "'");
      for (int l = lo; l <= hi; ++l) layers.push_back(l);
    } else {
      layers.push_back(parse_index(item, spec));
    }
  }
  return explicit_layers(std::move(layers));
}

std::vector<int> LayerSelection::resolve(int num_layers) const {
  if (num_layers <= 0) throw InvalidArgument("trace has no layers");
  if (!layers_) {
    std::vector<int> out(static_cast<std::size_t>(num_layers));
    for (int l = 0; l < num_layers; ++l) out[static_cast<std::size_t>(l)] = l;
    return out;
  }
  if (layers_->back() >= num_layers) {
    throw InvalidArgument("layer " + std::to_string(layers_->back()) + " out of range for " +
                          std::to_string(num_layers) + " layers");
  }
  return *layers_;
}

std::string LayerSelection::to_string() const {
  if (!layers_) return "all";
  std::ostringstream os;
  for (std::size_t i = 0; i < layers_->size(); ++i) os << (i ? "," : "") << (*layers_)[i];
  return os.str();
}

namespace {

void check_layer(const ResponseTrace& r, int layer) {
  if (r.tokens.empty()) throw InvalidArgument("response has no tokens");
  if (layer < 0 || static_cast<std::size_t>(layer) >= r.tokens.front().logp_ctx.size()) {
    throw InvalidArgument("layer " + std::to_string(layer) + " out of range");
  }
}

}  // namespace

double response_entropy(const ResponseTrace& r, int layer, Context context) {
  check_layer(r, layer);
  const auto l = static_cast<std::size_t>(layer);
  double sum = 0.0;
  for (const auto& tok : r.tokens) {
    sum -= context == Context::with_question ? tok.logp_ctx[l] : tok.logp_null[l];
  }
  // -0.0 from a certain token reads oddly downstream.
  return sum / static_cast<double>(r.tokens.size()) + 0.0;
}

double per_layer_information(const ResponseTrace& r, int layer) {
  return response_entropy(r, layer, Context::null) - response_entropy(r, layer, Context::with_question);
}

double layerwise_information(const ResponseTrace& r, std::span<const int> layers) {
  if (layers.empty()) throw InvalidArgument("layer selection is empty");
  double li = 0.0;
  for (int l : layers) li += per_layer_information(r, l);
  return li;
}

double layerwise_information(const ResponseTrace& r, const LayerSelection& sel) {
  if (r.tokens.empty()) throw InvalidArgument("response has no tokens");
  const auto layers = sel.resolve(static_cast<int>(r.tokens.front().logp_ctx.size()));
  return layerwise_information(r, layers);
}

std::vector<double> normalize_pool(std::span<const double> values, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double denom = (*hi - min) + eps;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / denom;
  return out;
}

std::vector<LiValue> pool_information(const QuestionTrace& q, const LayerSelection& sel, double eps) {
  const auto layers = sel.resolve(q.num_layers);
  std::vector<double> raw(q.responses.size());
  for (std::size_t j = 0; j < q.responses.size(); ++j) raw[j] = layerwise_information(q.responses[j], layers);
  const auto norm = normalize_pool(raw, eps);
  std::vector<LiValue> out(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) out[j] = LiValue{raw[j], norm[j]};
  return out;
}

}  // namespace liconf
