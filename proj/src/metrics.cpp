#include "liconf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "liconf/error.hpp"

namespace liconf {

namespace {

bool is_covered(const PredictionSet& s) {
  if (!s.covered) throw InvalidArgument("prediction set for '" + s.question_id + "' carries no coverage label");
  return *s.covered;
}

}  // namespace

double emr(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw InvalidArgument("EMR of an empty list of sets");
  std::size_t miss = 0;
  for (const auto& s : sets) miss += is_covered(s) ? 0 : 1;
  return static_cast<double>(miss) / static_cast<double>(sets.size());
}

double apss(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw InvalidArgument("APSS of an empty list of sets");
  std::size_t total = 0;
  for (const auto& s : sets) total += s.size;
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

SsmResult ssm(std::span<const PredictionSet> sets, std::size_t min_bin) {
  if (min_bin < 1) throw InvalidArgument("ssm min_bin must be >= 1");
  if (sets.empty()) throw InvalidArgument("SSM of an empty list of sets");

  struct Tally {
    std::size_t count = 0;
    std::size_t miss = 0;
  };
  std::map<std::size_t, Tally> by_size;
  for (const auto& s : sets) {
    auto& t = by_size[s.size];
    ++t.count;
    t.miss += is_covered(s) ? 0 : 1;
  }

  struct Open {
    std::size_t lo, hi, count, miss;
  };
  std::vector<Open> strata;
  std::optional<Open> pending;
  for (const auto& [size, t] : by_size) {
    if (!pending) pending = Open{size, size, 0, 0};
    pending->hi = size;
    pending->count += t.count;
    pending->miss += t.miss;
    if (pending->count >= min_bin) {
      strata.push_back(*pending);
      pending.reset();
    }
  }

  SsmResult r;
  if (strata.empty()) {
    r.value = emr(sets);
    r.fallback = true;
    return r;
  }
  if (pending) {
    auto& last = strata.back();
    last.hi = pending->hi;
    last.count += pending->count;
    last.miss += pending->miss;
  }
  for (const auto& s : strata) {
    const double mis = static_cast<double>(s.miss) / static_cast<double>(s.count);
    r.strata.push_back(SizeStratum{s.lo, s.hi, s.count, mis});
    r.value = std::max(r.value, mis);
  }
  return r;
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("binary entropy argument must lie in [0, 1]");
  auto term = [](double x) { return x > 0.0 ? -x * std::log(x) : 0.0; };
  return term(p) + term(1.0 - p);
}

double fano_bound(std::span<const PredictionSet> sets, double alpha, std::size_t n_cal,
                  std::size_t label_space_size) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (sets.empty()) throw InvalidArgument("Fano bound of an empty list of sets");
  double miss_sum = 0.0, hit_sum = 0.0;
  std::size_t misses = 0, hits = 0;
  for (const auto& s : sets) {
    if (s.size > label_space_size) {
      throw InvalidArgument("prediction set of size " + std::to_string(s.size) + " exceeds label space " +
                            std::to_string(label_space_size));
    }
    if (is_covered(s)) {
      ++hits;
      hit_sum += std::log(static_cast<double>(s.size));
    } else {
      if (s.size == label_space_size) {
        throw InvalidArgument("a missed set cannot span the whole label space");
      }
      ++misses;
      miss_sum += std::log(static_cast<double>(label_space_size - s.size));
    }
  }
  const double alpha_n = alpha - 1.0 / (static_cast<double>(n_cal) + 1.0);
  const double e_miss = misses ? miss_sum / static_cast<double>(misses) : 0.0;
  const double e_hit = hits ? hit_sum / static_cast<double>(hits) : 0.0;
  return binary_entropy(alpha) + alpha * e_miss + (1.0 - alpha_n) * e_hit;
}

MetricReport evaluate_sets(std::span<const PredictionSet> sets, std::size_t ssm_min_bin, std::optional<double> alpha,
                           std::size_t n_cal, std::optional<std::size_t> label_space_size) {
  MetricReport r;
  r.emr = emr(sets);
  r.apss = apss(sets);
  const auto s = ssm(sets, ssm_min_bin);
  r.ssm = s.value;
  r.ssm_fallback = s.fallback;
  r.n_test = sets.size();
  for (const auto& set : sets) r.max_set_size = std::max(r.max_set_size, set.size);
  if (alpha && label_space_size) r.fano_bound = fano_bound(sets, *alpha, n_cal, *label_space_size);
  return r;
}

}  // namespace liconf
