#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "advrat/lexres.hpp"
#include "advrat/rng.hpp"

namespace {

using namespace advrat;

EmbeddingTable random_table(std::size_t words, std::size_t dim) {
  EmbeddingTable table(dim);
  Rng rng(3);
  std::vector<double> v(dim);
  for (std::size_t w = 0; w < words; ++w) {
    for (auto& x : v) x = rng.normal();
    table.add("w" + std::to_string(w), v);
  }
  return table;
}

void BM_NearestNeighbor(benchmark::State& state) {
  const auto table = random_table(static_cast<std::size_t>(state.range(0)), 50);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(table.nearest_neighbor("w" + std::to_string(i)));
    i = (i + 1) % table.size();
  }
}
BENCHMARK(BM_NearestNeighbor)->Arg(100)->Arg(1000)->Arg(10000);

void BM_NearestNeighborFiltered(benchmark::State& state) {
  const auto table = random_table(static_cast<std::size_t>(state.range(0)), 50);
  const auto even = [](std::string_view w) { return (w.back() - '0') % 2 == 0; };
  for (auto _ : state) benchmark::DoNotOptimize(table.nearest_neighbor("w1", even));
}
BENCHMARK(BM_NearestNeighborFiltered)->Arg(1000);

}  // namespace
