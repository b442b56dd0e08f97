// Serial reference vs OpenMP kernels on simulation-sized inputs.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "tddp/kernels.hpp"
#include "tddp/rng.hpp"
#include "tddp/sticks.hpp"

using namespace tddp;

namespace {

struct AllocationInput {
  std::vector<std::vector<double>> data;
  std::vector<Atom> atoms;
  Eigen::MatrixXd omega;
  ThinningSequences ell;
  std::vector<std::vector<std::size_t>> z;
};

AllocationInput allocation_input(std::size_t per_group, std::size_t groups, std::size_t truncation) {
  AllocationInput in;
  Rng rng(1);
  in.data.resize(groups);
  for (auto& g : in.data)
    for (std::size_t i = 0; i < per_group; ++i) g.push_back(draw_normal(rng, 0.0, 5.0));
  DPParams params;
  in.ell = ThinningSequences::Ones(static_cast<Eigen::Index>(truncation), static_cast<Eigen::Index>(groups));
  const auto sticks = sample_sticks(params, in.ell, 2);
  in.atoms = sticks.atoms;
  in.omega = sticks.omega;
  in.z.assign(groups, std::vector<std::size_t>(per_group, 0));
  return in;
}

template <bool Serial>
void BM_allocate(benchmark::State& state) {
  auto in = allocation_input(static_cast<std::size_t>(state.range(0)), 10, 100);
  const kernels::AllocationModel model{&in.atoms, &in.omega, &in.ell};
  std::uint64_t key = 0;
  for (auto _ : state) {
    if constexpr (Serial)
      kernels::allocate_serial(in.data, model, ++key, in.z);
    else
      kernels::allocate(in.data, model, ++key, in.z);
    benchmark::DoNotOptimize(in.z.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}

template <bool Serial>
void BM_mixture_grid(benchmark::State& state) {
  const auto draws = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<std::vector<double>> w(draws, std::vector<double>(100)), mu(w), s2(w);
  for (std::size_t q = 0; q < draws; ++q)
    for (std::size_t k = 0; k < 100; ++k) {
      w[q][k] = uniform01(rng);
      mu[q][k] = draw_normal(rng, 0.0, 5.0);
      s2[q][k] = 0.5 + uniform01(rng);
    }
  std::vector<kernels::DrawMixture> mix;
  for (std::size_t q = 0; q < draws; ++q) mix.push_back({w[q], mu[q], s2[q]});
  std::vector<double> grid;
  for (int i = 0; i < 300; ++i) grid.push_back(-15.0 + 0.1 * i);
  Eigen::MatrixXd values;
  for (auto _ : state) {
    if constexpr (Serial)
      kernels::mixture_grid_serial(mix, grid, values);
    else
      kernels::mixture_grid(mix, grid, values);
    benchmark::DoNotOptimize(values.data());
  }
}

template <bool Serial>
void BM_similarity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<std::vector<std::uint32_t>> labels(1000, std::vector<std::uint32_t>(n));
  for (auto& d : labels)
    for (auto& x : d) x = static_cast<std::uint32_t>(rng() % 6);
  for (auto _ : state) {
    auto p = Serial ? kernels::similarity_serial(labels) : kernels::similarity(labels);
    benchmark::DoNotOptimize(p.data());
  }
}

}  // namespace

BENCHMARK(BM_allocate<true>)->Name("allocate/serial")->Arg(100)->Arg(1000)->UseRealTime();
BENCHMARK(BM_allocate<false>)->Name("allocate/openmp")->Arg(100)->Arg(1000)->UseRealTime();
BENCHMARK(BM_mixture_grid<true>)->Name("mixture_grid/serial")->Arg(1000)->UseRealTime();
BENCHMARK(BM_mixture_grid<false>)->Name("mixture_grid/openmp")->Arg(1000)->UseRealTime();
BENCHMARK(BM_similarity<true>)->Name("similarity/serial")->Arg(160)->Arg(400)->UseRealTime();
BENCHMARK(BM_similarity<false>)->Name("similarity/openmp")->Arg(160)->Arg(400)->UseRealTime();

BENCHMARK_MAIN();
