#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <vector>

#include "hapticforge/pattern.hpp"

namespace hapticforge {

enum class MotorState { Off, On };

struct PwmConfig {
    double pwm_frequency_hz = 100.0;
    double frame_rate_hz = kCanonicalRateHz;
    int quantization_steps = 256;

    /// Throws Error("ConfigInvalid").
    void check() const;
    /// Whole PWM cycles per frame: floor(pwm_frequency_hz / frame_rate_hz).
    int cycles_per_frame() const;
};

/// Duty level in [0, steps]: round(intensity * steps), clamped.
int quantize_duty(double intensity, int steps);

struct PwmEdge {
    std::int64_t tick = 0;
    MotorState state = MotorState::Off;

    friend bool operator==(const PwmEdge&, const PwmEdge&) = default;
};

/// Per-motor on/off edges on an integer tick axis. A frame spans
/// cycles_per_frame * quantization_steps ticks, so duty cycles are exact.
class PwmSchedule {
public:
    PwmSchedule(PwmConfig config, std::int64_t frame_count);

    const PwmConfig& config() const { return config_; }
    std::int64_t ticks_per_cycle() const { return config_.quantization_steps; }
    std::int64_t ticks_per_frame() const { return ticks_per_frame_; }
    std::int64_t total_ticks() const { return ticks_per_frame_ * frame_count_; }
    std::int64_t frame_count() const { return frame_count_; }
    double tick_seconds() const { return tick_seconds_; }
    double seconds(std::int64_t tick) const { return static_cast<double>(tick) * tick_seconds_; }
    double total_duration_s() const { return seconds(total_ticks()); }

    const std::vector<PwmEdge>& edges(int motor) const { return edges_.at(static_cast<std::size_t>(motor)); }
    std::vector<PwmEdge>& mutable_edges(int motor) { return edges_.at(static_cast<std::size_t>(motor)); }
    std::size_t edge_count() const;

    /// Ticks the motor is On within [begin, end).
    std::int64_t on_ticks(int motor, std::int64_t begin, std::int64_t end) const;

private:
    PwmConfig config_;
    std::int64_t frame_count_;
    std::int64_t ticks_per_frame_;
    double tick_seconds_;
    std::array<std::vector<PwmEdge>, kChannelCount> edges_;
};

/// Patterns at a different rate are resampled onto the PWM frame clock.
PwmSchedule to_pwm_schedule(const HapticPattern& pattern, const PwmConfig& config = {});

// ---- clocks -----------------------------------------------------------------

/// Time axis of one playback, starting at 0 when created.
class Timeline {
public:
    virtual ~Timeline() = default;
    /// Blocks until `offset_s` after the start; false when stop was requested.
    virtual bool wait_until(double offset_s, std::stop_token stop) = 0;
    virtual double elapsed() const = 0;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::unique_ptr<Timeline> start() = 0;
    /// Seconds since the clock was created.
    virtual double now() const = 0;
};

/// Jumps straight to each deadline; elapsed() equals the requested offset.
class SimulatedClock final : public Clock {
public:
    std::unique_ptr<Timeline> start() override;
    double now() const override;
    void advance_to(double t);

private:
    mutable std::mutex mutex_;
    double now_ = 0.0;
};

class RealtimeClock final : public Clock {
public:
    RealtimeClock();
    std::unique_ptr<Timeline> start() override;
    double now() const override;

private:
    std::chrono::steady_clock::time_point origin_;
};

// ---- sinks ------------------------------------------------------------------

/// Destination of motor switching commands. Implementations may throw to
/// signal a hardware fault. One playback at a time holds playback_mutex().
class MotorSink {
public:
    virtual ~MotorSink() = default;
    virtual void set_state(GridIndex motor, MotorState state) = 0;
    virtual void flush() {}

    std::mutex& playback_mutex() { return playback_mutex_; }

private:
    std::mutex playback_mutex_;
};

class NullSink final : public MotorSink {
public:
    void set_state(GridIndex, MotorState) override {}
};

struct LogEntry {
    double time_requested_s = 0.0;
    double time_actual_s = 0.0;
    GridIndex motor{};
    MotorState state = MotorState::Off;
};

/// Records every command, stamped with the clock's now() when one is given.
class SimulatedSink final : public MotorSink {
public:
    explicit SimulatedSink(const Clock* clock = nullptr) : clock_(clock) {}

    void set_state(GridIndex motor, MotorState state) override;
    void flush() override;

    std::vector<LogEntry> events() const;
    std::array<MotorState, kChannelCount> states() const;
    bool all_off() const;
    std::size_t flush_count() const;

private:
    const Clock* clock_;
    mutable std::mutex mutex_;
    std::vector<LogEntry> events_;
    std::array<MotorState, kChannelCount> states_{};
    std::size_t flushes_ = 0;
};

// ---- playback -----------------------------------------------------------------

enum class PlaybackStatus { Completed, Cancelled };

struct PlaybackLog {
    std::vector<LogEntry> entries;
    PlaybackStatus status = PlaybackStatus::Completed;

    /// `time_requested_s,time_actual_s,motor,state` rows.
    std::string to_csv() const;
};

std::string log_to_csv(const std::vector<LogEntry>& entries);

/// Delivers edges in time order. Cancellation through `stop` switches every
/// motor off before returning. Throws Error("SinkBusy") when another
/// playback holds the sink and Error("SinkFailure") when the sink throws.
PlaybackLog play(const PwmSchedule& schedule, MotorSink& sink, Clock& clock, std::stop_token stop = {});

// ---- perception threshold -------------------------------------------------------

class DetectionResponder {
public:
    virtual ~DetectionResponder() = default;
    virtual bool detected(double level) = 0;
};

/// Detects every probe at or above a fixed level.
class ThresholdResponder final : public DetectionResponder {
public:
    explicit ThresholdResponder(double threshold) : threshold_(threshold) {}
    bool detected(double level) override { return level >= threshold_ - 1e-12; }

private:
    double threshold_;
};

struct CalibrationTrial {
    double level = 0.0;
    bool detected = false;
};

struct CalibrationResult {
    std::string participant_id;
    double threshold = 0.0;
    std::vector<CalibrationTrial> trials;
};

inline constexpr int kCalibrationAscents = 3;

/// Ascending method of limits: three ascents of 1 s center-motor bursts at
/// step, 2*step, ... up to 1.0; threshold is the mean detection level.
/// Throws Error("NeverDetected").
CalibrationResult calibrate_threshold(MotorSink& sink, DetectionResponder& responder, double step = 0.05,
                                      const std::string& participant_id = {}, Clock* clock = nullptr);

/// Maps each nonzero intensity i to threshold + i * (1 - threshold).
HapticPattern apply_threshold(const HapticPattern& pattern, double threshold);

} // namespace hapticforge
