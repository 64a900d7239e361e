#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stop_token>
#include <string>
#include <vector>

#include "hapticforge/pattern.hpp"
#include "hapticforge/playback.hpp"
#include "hapticforge/records.hpp"

namespace hapticforge {

/// One stimulus per label, all exactly 10 s long.
struct StudyConfig {
    std::vector<HapticPattern> emotion_stimuli;
    std::vector<HapticPattern> gesture_stimuli;
    bool randomize_order = true;

    /// Throws Error("InvalidStudyConfig").
    void check() const;
    const HapticPattern& stimulus(StimulusLabel label) const;

    /// Procedural default stimuli for all 16 labels.
    static StudyConfig procedural(std::uint64_t seed = 0, double sample_rate_hz = kCanonicalRateHz);
    /// Loads `<label>.csv` for every label from `dir`.
    static StudyConfig from_directory(const std::filesystem::path& dir);
};

enum class PhaseKind { PreSession, EmotionBlock, GestureBlock, Completed };

std::string_view to_string(PhaseKind kind);

struct SessionPhase {
    PhaseKind kind = PhaseKind::PreSession;
    int index = 0;

    friend bool operator==(const SessionPhase&, const SessionPhase&) = default;
};

struct StudySession {
    std::string session_id;
    std::string participant_id;
    std::uint64_t rng_seed = 0;
    SessionPhase phase;
    std::vector<StimulusLabel> emotion_order;
    std::vector<StimulusLabel> gesture_order;
    std::optional<CalibrationResult> calibration;
    int replay_count_current = 0;
    bool presented_current = false;
    bool playing = false;
    std::size_t records_persisted = 0;
    std::string created_at;

    /// True label of the stimulus at the current block index.
    std::optional<StimulusLabel> current_stimulus() const;
};

/// Deterministic Fisher-Yates permutation of `labels` driven by `seed`.
std::vector<StimulusLabel> shuffled_order(const std::vector<StimulusLabel>& labels, std::uint64_t seed);

/// Plays one stimulus to completion or until `stop` is requested.
class StimulusPlayer {
public:
    virtual ~StimulusPlayer() = default;
    virtual void play(const HapticPattern& pattern, std::stop_token stop) = 0;
};

/// Converts to a PWM schedule and plays it on a sink.
class SchedulePlayer final : public StimulusPlayer {
public:
    SchedulePlayer(std::shared_ptr<MotorSink> sink, std::shared_ptr<Clock> clock, PwmConfig config = {});
    void play(const HapticPattern& pattern, std::stop_token stop) override;

    /// Log of the most recent playback.
    PlaybackLog last_log() const;

private:
    std::shared_ptr<MotorSink> sink_;
    std::shared_ptr<Clock> clock_;
    PwmConfig config_;
    mutable std::mutex mutex_;
    PlaybackLog last_log_;
};

struct ServiceOptions {
    std::filesystem::path data_dir = "study-data";
    /// Playback runs on a background thread; otherwise request_stimulus
    /// returns once playback has finished.
    bool async_playback = false;
};

/// The two-block protocol as a persistent state machine. Sessions live in
/// `<data_dir>/sessions/<id>/` as `head.json` plus append-only
/// `records.jsonl`; construction reloads every stored session.
class StudyService {
public:
    StudyService(StudyConfig config, std::shared_ptr<StimulusPlayer> player, ServiceOptions options);
    ~StudyService();

    StudyService(const StudyService&) = delete;
    StudyService& operator=(const StudyService&) = delete;

    StudySession create_session(const std::string& participant_id, std::uint64_t seed);
    StudySession record_calibration(const std::string& session_id, const CalibrationResult& result);
    StudySession request_stimulus(const std::string& session_id);
    StudySession replay_stimulus(const std::string& session_id);
    StudySession submit_response(const std::string& session_id, StimulusLabel chosen, std::optional<int> arousal,
                                 std::optional<int> valence);

    StudySession session(const std::string& session_id) const;
    std::vector<StudySession> sessions() const;
    /// Persisted records; Error("WrongPhase") until the session completes.
    std::vector<ResponseRecord> records(const std::string& session_id) const;

    /// Blocks until the session has no playback in flight.
    void wait_idle(const std::string& session_id) const;

    const StudyConfig& config() const { return config_; }

private:
    struct Entry;

    std::shared_ptr<Entry> find(const std::string& session_id) const;
    void start_playback(const std::shared_ptr<Entry>& entry, std::unique_lock<std::mutex>& lock);
    void load_existing();

    StudyConfig config_;
    std::shared_ptr<StimulusPlayer> player_;
    ServiceOptions options_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

} // namespace hapticforge
