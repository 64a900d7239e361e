#include <random>

#include <benchmark/benchmark.h>

#include "hapticforge/generators.hpp"
#include "hapticforge/pattern.hpp"
#include "hapticforge/playback.hpp"
#include "hapticforge/stats.hpp"

using namespace hapticforge;

namespace {

HapticPattern noise_pattern(std::size_t frames) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Frame> fs(frames);
    for (auto& f : fs) {
        for (int c = 0; c < kChannelCount; ++c) f[c] = u(rng);
    }
    return HapticPattern(kCanonicalRateHz, std::move(fs));
}

void BM_ParseCsv(benchmark::State& state) {
    const auto text = serialize_csv(noise_pattern(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(parse_csv(text));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseCsv)->Arg(100)->Arg(1000);

void BM_SerializeCsv(benchmark::State& state) {
    const auto p = noise_pattern(100);
    for (auto _ : state) benchmark::DoNotOptimize(serialize_csv(p));
}
BENCHMARK(BM_SerializeCsv);

void BM_Validate(benchmark::State& state) {
    const auto p = generate_procedural(StimulusLabel::parse("rub"), std::nullopt, kCanonicalRateHz, 0);
    for (auto _ : state) benchmark::DoNotOptimize(validate(p));
}
BENCHMARK(BM_Validate);

void BM_PwmSchedule(benchmark::State& state) {
    const auto p = noise_pattern(100);
    PwmConfig config;
    config.pwm_frequency_hz = static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(to_pwm_schedule(p, config));
}
BENCHMARK(BM_PwmSchedule)->Arg(100)->Arg(1000);

void BM_SimulatedPlayback(benchmark::State& state) {
    const auto s = to_pwm_schedule(noise_pattern(100));
    for (auto _ : state) {
        SimulatedClock clock;
        SimulatedSink sink(&clock);
        benchmark::DoNotOptimize(play(s, sink, clock));
    }
}
BENCHMARK(BM_SimulatedPlayback);

void BM_StudentTCdf(benchmark::State& state) {
    const double df = static_cast<double>(state.range(0));
    double t = -6.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(student_t_cdf(t, df));
        t = t > 6.0 ? -6.0 : t + 0.37;
    }
}
BENCHMARK(BM_StudentTCdf)->Arg(5)->Arg(31)->Arg(1000);

void BM_OneSampleT(benchmark::State& state) {
    std::vector<double> x(32);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i * 7 % 10) / 10.0;
    for (auto _ : state) benchmark::DoNotOptimize(one_sample_t(x, 0.1, Alternative::Greater));
}
BENCHMARK(BM_OneSampleT);

} // namespace
BENCHMARK_MAIN();
