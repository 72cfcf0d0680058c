#include <benchmark/benchmark.h>

#include "paygo/tangle.hpp"

using namespace paygo;

static void BM_Pow(benchmark::State& state) {
  const auto d = static_cast<unsigned>(state.range(0));
  tangle::TangleTx draft;
  draft.address = tangle::Address("bench");
  std::uint64_t attempts = 0;
  for (auto _ : state) {
    ++draft.timestamp_us;
    attempts += tangle::do_pow(draft, d).attempts;
  }
  state.counters["attempts"] = benchmark::Counter(static_cast<double>(attempts), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_Pow)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_AttachBundle(benchmark::State& state) {
  crypto::KeyStore keys;
  Rng rng(1);
  auto a = keys.generate(rng), b = keys.generate(rng);
  const auto from = tangle::Address::from_verkey(a.verkey), to = tangle::Address::from_verkey(b.verkey);
  auto s = tangle::TangleState::genesis({{from, 1'000'000'000}});
  for (auto _ : state) {
    auto bundle = tangle::build_value_bundle(keys, a.sigkey_handle, from, to, 1, crypto::new_nonce(rng));
    benchmark::DoNotOptimize(s.attach_bundle(bundle, static_cast<unsigned>(state.range(0)), rng));
  }
}
BENCHMARK(BM_AttachBundle)->Arg(0)->Arg(8);

static void BM_FindPayment(benchmark::State& state) {
  crypto::KeyStore keys;
  Rng rng(1);
  auto a = keys.generate(rng), b = keys.generate(rng);
  const auto from = tangle::Address::from_verkey(a.verkey), to = tangle::Address::from_verkey(b.verkey);
  auto s = tangle::TangleState::genesis({{from, 1'000'000}});
  crypto::Nonce last;
  for (int i = 0; i < state.range(0); ++i) {
    last = crypto::new_nonce(rng);
    s.attach_bundle(tangle::build_value_bundle(keys, a.sigkey_handle, from, to, 1, last), 0, rng);
  }
  const bool scan = state.range(1) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(scan ? s.find_payment_scan(to, last, 1) : s.find_payment(to, last, 1));
}
BENCHMARK(BM_FindPayment)->Args({1000, 0})->Args({1000, 1});
