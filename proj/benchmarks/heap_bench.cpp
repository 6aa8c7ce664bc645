#include <benchmark/benchmark.h>

#include "hic/event_heap.hpp"

namespace {

hic::Event make_event(int i) {
  hic::Event e;
  e.type = "notification";
  e.fields = {{"session_id", std::string("s-") + std::to_string(i % 64)}, {"n", std::int64_t{i}}};
  e.targets = {"c" + std::to_string(i % 16)};
  e.ttl = 60;
  return e;
}

void BM_PostNoSubscribers(benchmark::State& state) {
  hic::EventHeap heap;
  hic::Ticks now = 0;
  int i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(heap.post(make_event(i++)));
    if (heap.size() > 100000) heap.expire(now += 100);
  }
}
BENCHMARK(BM_PostNoSubscribers);

// Post with N subscribers, one of which matches.
void BM_PostFanOut(benchmark::State& state) {
  hic::EventHeap heap;
  std::vector<hic::Subscription> subs;
  for (int s = 0; s < state.range(0); ++s) {
    subs.push_back(heap.subscribe("c" + std::to_string(s % 16),
                                  {std::string("notification"), {{"session_id", "s-" + std::to_string(s)}}}));
  }
  hic::Ticks now = 0;
  int i = 0;
  for (auto _ : state) {
    heap.post(make_event(i++));
    if ((i & 1023) == 0) {
      for (auto& s : subs) s.queue->drain();
      heap.expire(now += 100);
    }
  }
}
BENCHMARK(BM_PostFanOut)->Arg(1)->Arg(16)->Arg(256);

void BM_ConsumeSnoop(benchmark::State& state) {
  hic::EventHeap heap;
  for (int i = 0; i < state.range(0); ++i) heap.post(make_event(i));
  const hic::EventTemplate tmpl{std::string("notification"), {{"session_id", std::string("s-3")}}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(heap.consume("c3", tmpl, hic::ConsumeMode::kSnoop));
  }
}
BENCHMARK(BM_ConsumeSnoop)->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
