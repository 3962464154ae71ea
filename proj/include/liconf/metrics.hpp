#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "liconf/conformal.hpp"

namespace liconf {

// Recorded alongside every report that carries an SSM value.
inline constexpr std::string_view kSsmDefinition =
    "max miscoverage over set-size strata; strata with fewer than min_bin sets merge into the next larger size "
    "(a short final stratum merges into the previous one); falls back to EMR when no stratum reaches min_bin";

inline constexpr std::size_t kDefaultSsmMinBin = 20;

struct SizeStratum {
  std::size_t min_size = 0;
  std::size_t max_size = 0;
  std::size_t count = 0;
  double miscoverage = 0.0;
};

struct SsmResult {
  double value = 0.0;
  bool fallback = false;  // no stratum reached min_bin; value is the marginal EMR
  std::vector<SizeStratum> strata;
};

struct MetricReport {
  double emr = 0.0;
  double apss = 0.0;
  double ssm = 0.0;
  bool ssm_fallback = false;
  std::size_t n_test = 0;
  std::size_t max_set_size = 0;
  std::optional<double> fano_bound;
};

// Fraction of sets with covered == false. Throws if a set carries no label.
double emr(std::span<const PredictionSet> sets);
double apss(std::span<const PredictionSet> sets);
SsmResult ssm(std::span<const PredictionSet> sets, std::size_t min_bin = kDefaultSsmMinBin);

// Binary entropy in nats.
double binary_entropy(double p);

// List-decoding Fano upper bound on H(Y|X), in nats:
//   h_b(alpha) + alpha * E[ln(|Y| - |C|) | miss] + (1 - alpha_N) * E[ln |C| | hit]
// with alpha_N = alpha - 1/(n_cal + 1). Conditional means are taken over the
// given sets; an empty condition contributes 0.
double fano_bound(std::span<const PredictionSet> sets, double alpha, std::size_t n_cal,
                  std::size_t label_space_size);

MetricReport evaluate_sets(std::span<const PredictionSet> sets, std::size_t ssm_min_bin = kDefaultSsmMinBin,
                           std::optional<double> alpha = std::nullopt, std::size_t n_cal = 0,
                           std::optional<std::size_t> label_space_size = std::nullopt);

}  // namespace liconf
