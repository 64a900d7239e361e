#include "hapticforge/playback.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <thread>

namespace hapticforge {

namespace {

class SimulatedTimeline final : public Timeline {
public:
    explicit SimulatedTimeline(SimulatedClock& clock) : clock_(clock), origin_(clock.now()) {}

    bool wait_until(double offset_s, std::stop_token stop) override {
        if (stop.stop_requested()) return false;
        elapsed_ = std::max(elapsed_, offset_s);
        clock_.advance_to(origin_ + elapsed_);
        return true;
    }
    double elapsed() const override { return elapsed_; }

private:
    SimulatedClock& clock_;
    double origin_;
    double elapsed_ = 0.0;
};

class RealtimeTimeline final : public Timeline {
public:
    RealtimeTimeline() : origin_(std::chrono::steady_clock::now()) {}

    bool wait_until(double offset_s, std::stop_token stop) override {
        const auto deadline =
            origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double>(offset_s));
        // Sleep to just before the deadline, then spin for the last stretch.
        const auto coarse = deadline - std::chrono::microseconds(500);
        {
            std::mutex m;
            std::condition_variable_any cv;
            std::unique_lock lock(m);
            if (cv.wait_until(lock, stop, coarse, [] { return false; })) return false;
        }
        while (std::chrono::steady_clock::now() < deadline) {
            if (stop.stop_requested()) return false;
            std::this_thread::yield();
        }
        return !stop.stop_requested();
    }

    double elapsed() const override {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
    }

private:
    std::chrono::steady_clock::time_point origin_;
};

void force_all_off(MotorSink& sink) noexcept {
    for (int m = 0; m < kChannelCount; ++m) {
        try {
            sink.set_state(GridIndex::from_linear(m), MotorState::Off);
        } catch (...) {
        }
    }
    try {
        sink.flush();
    } catch (...) {
    }
}

} // namespace

void PwmConfig::check() const {
    if (!(pwm_frequency_hz > 0.0) || !std::isfinite(pwm_frequency_hz)) {
        throw Error("ConfigInvalid", "pwm_frequency_hz must be positive");
    }
    if (!(frame_rate_hz > 0.0) || !std::isfinite(frame_rate_hz)) {
        throw Error("ConfigInvalid", "frame_rate_hz must be positive");
    }
    if (pwm_frequency_hz < frame_rate_hz) {
        throw Error("ConfigInvalid", "pwm_frequency_hz must be at least frame_rate_hz");
    }
    if (quantization_steps < 1) throw Error("ConfigInvalid", "quantization_steps must be positive");
}

int PwmConfig::cycles_per_frame() const {
    return std::max(1, static_cast<int>(std::floor(pwm_frequency_hz / frame_rate_hz + 1e-9)));
}

int quantize_duty(double intensity, int steps) {
    const double level = std::nearbyint(std::clamp(intensity, 0.0, 1.0) * steps);
    return static_cast<int>(level);
}

PwmSchedule::PwmSchedule(PwmConfig config, std::int64_t frame_count)
    : config_(config), frame_count_(frame_count) {
    config_.check();
    ticks_per_frame_ = static_cast<std::int64_t>(config_.cycles_per_frame()) * config_.quantization_steps;
    tick_seconds_ = 1.0 / (config_.frame_rate_hz * static_cast<double>(ticks_per_frame_));
}

std::size_t PwmSchedule::edge_count() const {
    std::size_t n = 0;
    for (const auto& e : edges_) n += e.size();
    return n;
}

std::int64_t PwmSchedule::on_ticks(int motor, std::int64_t begin, std::int64_t end) const {
    std::int64_t total = 0;
    std::int64_t on_since = -1;
    for (const auto& e : edges(motor)) {
        if (e.state == MotorState::On) {
            on_since = e.tick;
        } else if (on_since >= 0) {
            total += std::max<std::int64_t>(0, std::min(e.tick, end) - std::max(on_since, begin));
            on_since = -1;
        }
    }
    return total;
}

PwmSchedule to_pwm_schedule(const HapticPattern& pattern, const PwmConfig& config) {
    config.check();
    const HapticPattern& source =
        pattern.sample_rate_hz() == config.frame_rate_hz ? pattern : resample(pattern, config.frame_rate_hz);
    PwmSchedule schedule(config, static_cast<std::int64_t>(source.frame_count()));
    const std::int64_t cycle = schedule.ticks_per_cycle();
    const int cycles = config.cycles_per_frame();

    for (int motor = 0; motor < kChannelCount; ++motor) {
        auto& edges = schedule.mutable_edges(motor);
        for (std::size_t f = 0; f < source.frame_count(); ++f) {
            const int duty = quantize_duty(source.frame(f)[motor], config.quantization_steps);
            if (duty == 0) continue;
            for (int j = 0; j < cycles; ++j) {
                const std::int64_t start = (static_cast<std::int64_t>(f) * cycles + j) * cycle;
                if (!edges.empty() && edges.back().state == MotorState::Off && edges.back().tick == start) {
                    edges.pop_back(); // contiguous On time
                } else {
                    edges.push_back({start, MotorState::On});
                }
                edges.push_back({start + duty, MotorState::Off});
            }
        }
    }
    return schedule;
}

std::unique_ptr<Timeline> SimulatedClock::start() {
    return std::make_unique<SimulatedTimeline>(*this);
}

double SimulatedClock::now() const {
    std::lock_guard lock(mutex_);
    return now_;
}

void SimulatedClock::advance_to(double t) {
    std::lock_guard lock(mutex_);
    now_ = std::max(now_, t);
}

RealtimeClock::RealtimeClock() : origin_(std::chrono::steady_clock::now()) {}

std::unique_ptr<Timeline> RealtimeClock::start() {
    return std::make_unique<RealtimeTimeline>();
}

double RealtimeClock::now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
}

void SimulatedSink::set_state(GridIndex motor, MotorState state) {
    if (!motor.valid()) throw Error("SinkFailure", "motor index out of range");
    const double t = clock_ != nullptr ? clock_->now() : 0.0;
    std::lock_guard lock(mutex_);
    events_.push_back({t, t, motor, state});
    states_[static_cast<std::size_t>(motor.linear())] = state;
}

void SimulatedSink::flush() {
    std::lock_guard lock(mutex_);
    ++flushes_;
}

std::vector<LogEntry> SimulatedSink::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::array<MotorState, kChannelCount> SimulatedSink::states() const {
    std::lock_guard lock(mutex_);
    return states_;
}

bool SimulatedSink::all_off() const {
    std::lock_guard lock(mutex_);
    return std::all_of(states_.begin(), states_.end(), [](MotorState s) { return s == MotorState::Off; });
}

std::size_t SimulatedSink::flush_count() const {
    std::lock_guard lock(mutex_);
    return flushes_;
}

std::string log_to_csv(const std::vector<LogEntry>& entries) {
    std::string out = "time_requested_s,time_actual_s,motor,state\n";
    char buf[96];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%s,%s\n", e.time_requested_s, e.time_actual_s,
                      channel_name(e.motor).c_str(), e.state == MotorState::On ? "on" : "off");
        out += buf;
    }
    return out;
}

std::string PlaybackLog::to_csv() const {
    return log_to_csv(entries);
}

PlaybackLog play(const PwmSchedule& schedule, MotorSink& sink, Clock& clock, std::stop_token stop) {
    std::unique_lock handle(sink.playback_mutex(), std::try_to_lock);
    if (!handle.owns_lock()) throw Error("SinkBusy", "another playback is using this sink");

    struct Pending {
        std::int64_t tick;
        int motor;
        MotorState state;
    };
    std::vector<Pending> order;
    order.reserve(schedule.edge_count());
    for (int m = 0; m < kChannelCount; ++m) {
        for (const auto& e : schedule.edges(m)) order.push_back({e.tick, m, e.state});
    }
    std::stable_sort(order.begin(), order.end(), [](const Pending& a, const Pending& b) { return a.tick < b.tick; });

    PlaybackLog log;
    if (order.empty()) return log;
    std::array<MotorState, kChannelCount> current{};
    auto timeline = clock.start();

    try {
        std::size_t i = 0;
        while (i < order.size()) {
            const std::int64_t tick = order[i].tick;
            const double requested = schedule.seconds(tick);
            if (!timeline->wait_until(requested, stop)) {
                log.status = PlaybackStatus::Cancelled;
                break;
            }
            for (; i < order.size() && order[i].tick == tick; ++i) {
                const auto motor = GridIndex::from_linear(order[i].motor);
                sink.set_state(motor, order[i].state);
                current[static_cast<std::size_t>(order[i].motor)] = order[i].state;
                log.entries.push_back({requested, timeline->elapsed(), motor, order[i].state});
            }
            sink.flush();
        }
        if (log.status == PlaybackStatus::Cancelled) {
            const double at = timeline->elapsed();
            for (int m = 0; m < kChannelCount; ++m) {
                sink.set_state(GridIndex::from_linear(m), MotorState::Off);
                if (current[static_cast<std::size_t>(m)] == MotorState::On) {
                    log.entries.push_back({at, at, GridIndex::from_linear(m), MotorState::Off});
                }
            }
            sink.flush();
        }
    } catch (const std::exception& e) {
        force_all_off(sink);
        throw Error("SinkFailure", std::string("motor sink failed: ") + e.what());
    }
    return log;
}

CalibrationResult calibrate_threshold(MotorSink& sink, DetectionResponder& responder, double step,
                                      const std::string& participant_id, Clock* clock) {
    if (!(step > 0.0 && step <= 1.0)) throw Error("InvalidStep", "calibration step must be in (0, 1]");
    SimulatedClock fallback;
    Clock& timing = clock != nullptr ? *clock : fallback;

    const PwmConfig config{};
    const auto frames = static_cast<std::size_t>(config.frame_rate_hz); // 1 s burst
    const GridIndex center{2, 2};

    CalibrationResult result;
    result.participant_id = participant_id;
    double sum = 0.0;
    for (int ascent = 0; ascent < kCalibrationAscents; ++ascent) {
        bool found = false;
        for (int k = 1; !found; ++k) {
            double level = std::round(k * step * 1e6) / 1e6;
            const bool last = level >= 1.0;
            level = std::min(level, 1.0);
            Frame frame;
            frame[center] = level;
            HapticPattern burst(config.frame_rate_hz, std::vector<Frame>(frames, frame));
            play(to_pwm_schedule(burst, config), sink, timing);
            const bool detected = responder.detected(level);
            result.trials.push_back({level, detected});
            if (detected) {
                sum += level;
                found = true;
            } else if (last) {
                throw Error("NeverDetected", "ascent " + std::to_string(ascent + 1) + " reached 1.0 undetected");
            }
        }
    }
    result.threshold = sum / kCalibrationAscents;
    return result;
}

HapticPattern apply_threshold(const HapticPattern& pattern, double threshold) {
    if (!(threshold >= 0.0 && threshold < 1.0)) throw Error("InvalidThreshold", "threshold must be in [0, 1)");
    std::vector<Frame> frames = pattern.frames();
    for (auto& f : frames) {
        for (auto& v : f.intensities) {
            if (v > 0.0) v = std::min(1.0, threshold + v * (1.0 - threshold));
        }
    }
    auto meta = pattern.meta();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", threshold);
    meta["threshold"] = buf;
    return HapticPattern(pattern.sample_rate_hz(), std::move(frames), pattern.label(), std::move(meta));
}

} // namespace hapticforge
