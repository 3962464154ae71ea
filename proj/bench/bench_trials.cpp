// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "liconf/diagnostics.hpp"
#include "liconf/experiment.hpp"
#include "liconf/synth.hpp"

using namespace liconf;

namespace {

const std::vector<QuestionTrace>& traces() {
  static const auto data = [] {
    SynthSpec spec;
    spec.n_questions = 1000;
    spec.label_space_size = 4;
    spec.answer_distribution_sharpness = 1.5;
    return generate(spec, 1).traces;
  }();
  return data;
}

const std::vector<ScoredQuestion>& scored() {
  static const auto s = score_questions(traces(), ScoreOptions{}, Execution::serial);
  return s;
}

void BM_ScoreQuestions(benchmark::State& state) {
  const auto exec = static_cast<Execution>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(score_questions(traces(), ScoreOptions{}, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(traces().size()));
}

void BM_RunTrials(benchmark::State& state) {
  const auto exec = static_cast<Execution>(state.range(0));
  ExperimentConfig cfg;
  cfg.n_trials = 100;
  cfg.label_space_size = 4;
  for (auto _ : state) benchmark::DoNotOptimize(run_trials(scored(), cfg, 0, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.n_trials));
}

void BM_CrossDomain(benchmark::State& state) {
  const auto exec = static_cast<Execution>(state.range(0));
  static const auto data = [] {
    SynthSpec spec;
    spec.n_questions = 300;
    spec.domains = {"a", "b", "c"};
    spec.shift["b"] = {1.0, 0.3};
    spec.shift["c"] = {1.0, 0.0};
    return generate(spec, 2).traces;
  }();
  ExperimentConfig cfg;
  cfg.n_trials = 50;
  auto previous = set_warning_sink([](const std::string&) {});
  for (auto _ : state) benchmark::DoNotOptimize(cross_domain_matrix(data, cfg, 0.1, ScoreKind::frequency_only, exec));
  set_warning_sink(previous);
}

void BM_Generate(benchmark::State& state) {
  SynthSpec spec;
  spec.n_questions = 500;
  for (auto _ : state) benchmark::DoNotOptimize(generate(spec, 3));
}

void exec_args(benchmark::internal::Benchmark* b) {
  b->ArgName("parallel")->Arg(static_cast<int>(Execution::serial))->Arg(static_cast<int>(Execution::parallel));
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ScoreQuestions)->Apply(exec_args);
BENCHMARK(BM_RunTrials)->Apply(exec_args);
BENCHMARK(BM_CrossDomain)->Apply(exec_args);
BENCHMARK(BM_Generate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
