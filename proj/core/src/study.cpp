#include "hapticforge/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

#include "hapticforge/generators.hpp"

namespace hapticforge {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    const auto millis =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(millis));
    return out;
}

std::string new_session_id() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    char buf[24];
    std::snprintf(buf, sizeof buf, "s-%012llx", static_cast<unsigned long long>(rng() & 0xFFFFFFFFFFFFull));
    return buf;
}

// Uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

void fsync_path(const fs::path& path) {
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

void write_file_durably(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw Error("IoError", "cannot write " + tmp.string());
    const bool ok = ::write(fd, content.data(), content.size()) == static_cast<ssize_t>(content.size()) &&
                    ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw Error("IoError", "failed writing " + tmp.string());
    fs::rename(tmp, path);
    fsync_path(path.parent_path());
}

void append_line_durably(const fs::path& path, const std::string& line) {
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error("IoError", "cannot open " + path.string());
    const std::string data = line + "\n";
    const bool ok =
        ::write(fd, data.data(), data.size()) == static_cast<ssize_t>(data.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw Error("IoError", "failed appending to " + path.string());
}

json labels_json(const std::vector<StimulusLabel>& labels) {
    json arr = json::array();
    for (auto l : labels) arr.push_back(std::string(l.name()));
    return arr;
}

std::vector<StimulusLabel> labels_from_json(const json& arr) {
    std::vector<StimulusLabel> out;
    for (const auto& v : arr) out.push_back(StimulusLabel::parse(v.get<std::string>()));
    return out;
}

json calibration_json(const CalibrationResult& c) {
    json trials = json::array();
    for (const auto& t : c.trials) trials.push_back({{"level", t.level}, {"detected", t.detected}});
    return {{"participant_id", c.participant_id}, {"threshold", c.threshold}, {"trials", trials}};
}

CalibrationResult calibration_from_json(const json& j) {
    CalibrationResult c;
    c.participant_id = j.value("participant_id", std::string{});
    c.threshold = j.at("threshold").get<double>();
    for (const auto& t : j.at("trials")) c.trials.push_back({t.at("level").get<double>(), t.at("detected").get<bool>()});
    return c;
}

json head_json(const StudySession& s) {
    return {
        {"session_id", s.session_id},
        {"participant_id", s.participant_id},
        {"rng_seed", s.rng_seed},
        {"created_at", s.created_at},
        {"emotion_order", labels_json(s.emotion_order)},
        {"gesture_order", labels_json(s.gesture_order)},
        {"calibration", s.calibration ? calibration_json(*s.calibration) : json(nullptr)},
    };
}

SessionPhase phase_after(bool calibrated, std::size_t records) {
    if (!calibrated) return {PhaseKind::PreSession, 0};
    const auto emotions = static_cast<std::size_t>(emotion_labels().size());
    const auto gestures = static_cast<std::size_t>(gesture_labels().size());
    if (records < emotions) return {PhaseKind::EmotionBlock, static_cast<int>(records)};
    if (records < emotions + gestures) return {PhaseKind::GestureBlock, static_cast<int>(records - emotions)};
    return {PhaseKind::Completed, 0};
}

void check_calibration(const CalibrationResult& c) {
    if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw Error("InvalidCalibration", "threshold must be in [0,1]");
    for (const auto& t : c.trials) {
        if (!(t.level >= 0.0 && t.level <= 1.0)) throw Error("InvalidCalibration", "trial level must be in [0,1]");
    }
}

} // namespace

std::string_view to_string(PhaseKind kind) {
    switch (kind) {
    case PhaseKind::PreSession: return "pre_session";
    case PhaseKind::EmotionBlock: return "emotion_block";
    case PhaseKind::GestureBlock: return "gesture_block";
    case PhaseKind::Completed: return "completed";
    }
    return "?";
}

std::optional<StimulusLabel> StudySession::current_stimulus() const {
    if (phase.kind == PhaseKind::EmotionBlock) return emotion_order.at(static_cast<std::size_t>(phase.index));
    if (phase.kind == PhaseKind::GestureBlock) return gesture_order.at(static_cast<std::size_t>(phase.index));
    return std::nullopt;
}

std::vector<StimulusLabel> shuffled_order(const std::vector<StimulusLabel>& labels, std::uint64_t seed) {
    std::vector<StimulusLabel> order = labels;
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded(rng, i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

void StudyConfig::check() const {
    auto check_block = [](const std::vector<HapticPattern>& stimuli, StimulusKind kind) {
        const auto& expected = labels_of(kind);
        if (stimuli.size() != expected.size()) {
            throw Error("InvalidStudyConfig", "expected " + std::to_string(expected.size()) + " " +
                                                  std::string(to_string(kind)) + " stimuli");
        }
        std::set<StimulusLabel> seen;
        for (const auto& p : stimuli) {
            if (!p.label() || p.label()->kind() != kind) {
                throw Error("InvalidStudyConfig", "every stimulus needs a " + std::string(to_string(kind)) + " label");
            }
            if (!seen.insert(*p.label()).second) {
                throw Error("InvalidStudyConfig", "duplicate stimulus for '" + std::string(p.label()->name()) + "'");
            }
            if (std::fabs(p.duration_s() - kStimulusDurationS) > 1e-6) {
                throw Error("InvalidStudyConfig", "stimulus '" + std::string(p.label()->name()) + "' is not 10 s long");
            }
        }
    };
    check_block(emotion_stimuli, StimulusKind::Emotion);
    check_block(gesture_stimuli, StimulusKind::Gesture);
}

const HapticPattern& StudyConfig::stimulus(StimulusLabel label) const {
    const auto& pool = label.kind() == StimulusKind::Emotion ? emotion_stimuli : gesture_stimuli;
    for (const auto& p : pool) {
        if (p.label() == label) return p;
    }
    throw Error("InvalidStudyConfig", "no stimulus for '" + std::string(label.name()) + "'");
}

StudyConfig StudyConfig::procedural(std::uint64_t seed, double sample_rate_hz) {
    StudyConfig config;
    for (auto l : emotion_labels()) config.emotion_stimuli.push_back(generate_procedural(l, std::nullopt, sample_rate_hz, seed));
    for (auto l : gesture_labels()) config.gesture_stimuli.push_back(generate_procedural(l, std::nullopt, sample_rate_hz, seed));
    return config;
}

StudyConfig StudyConfig::from_directory(const fs::path& dir) {
    StudyConfig config;
    for (auto l : all_labels()) {
        const auto path = dir / (std::string(l.name()) + ".csv");
        auto pattern = load_pattern(path.string()).with_label(l);
        (l.kind() == StimulusKind::Emotion ? config.emotion_stimuli : config.gesture_stimuli).push_back(std::move(pattern));
    }
    config.check();
    return config;
}

SchedulePlayer::SchedulePlayer(std::shared_ptr<MotorSink> sink, std::shared_ptr<Clock> clock, PwmConfig config)
    : sink_(std::move(sink)), clock_(std::move(clock)), config_(config) {
    config_.check();
}

void SchedulePlayer::play(const HapticPattern& pattern, std::stop_token stop) {
    auto log = hapticforge::play(to_pwm_schedule(pattern, config_), *sink_, *clock_, stop);
    std::lock_guard lock(mutex_);
    last_log_ = std::move(log);
}

PlaybackLog SchedulePlayer::last_log() const {
    std::lock_guard lock(mutex_);
    return last_log_;
}

struct StudyService::Entry {
    mutable std::mutex mutex;
    mutable std::condition_variable idle;
    StudySession session;
    std::vector<ResponseRecord> records;
    fs::path dir;
    std::string presented_at;
    std::chrono::steady_clock::time_point playback_end{};
    std::jthread worker;
};

StudyService::StudyService(StudyConfig config, std::shared_ptr<StimulusPlayer> player, ServiceOptions options)
    : config_(std::move(config)), player_(std::move(player)), options_(std::move(options)) {
    config_.check();
    if (!player_) throw Error("InvalidStudyConfig", "a stimulus player is required");
    fs::create_directories(options_.data_dir / "sessions");
    load_existing();
}

StudyService::~StudyService() {
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::unique_lock lock(sessions_mutex_);
        for (auto& [id, e] : sessions_) entries.push_back(e);
    }
    for (auto& e : entries) {
        if (e->worker.joinable()) {
            e->worker.request_stop();
            e->worker.join();
        }
    }
}

void StudyService::load_existing() {
    const fs::path root = options_.data_dir / "sessions";
    for (const auto& dir_entry : fs::directory_iterator(root)) {
        if (!dir_entry.is_directory()) continue;
        const fs::path head_path = dir_entry.path() / "head.json";
        if (!fs::exists(head_path)) continue;
        std::ifstream in(head_path);
        json head = json::parse(in, nullptr, false);
        if (head.is_discarded()) throw Error("CorruptSession", "unreadable " + head_path.string());

        auto entry = std::make_shared<Entry>();
        entry->dir = dir_entry.path();
        auto& s = entry->session;
        try {
            s.session_id = head.at("session_id").get<std::string>();
            s.participant_id = head.at("participant_id").get<std::string>();
            s.rng_seed = head.at("rng_seed").get<std::uint64_t>();
            s.created_at = head.value("created_at", std::string{});
            s.emotion_order = labels_from_json(head.at("emotion_order"));
            s.gesture_order = labels_from_json(head.at("gesture_order"));
            if (!head.at("calibration").is_null()) s.calibration = calibration_from_json(head.at("calibration"));
        } catch (const json::exception& e) {
            throw Error("CorruptSession", head_path.string() + ": " + e.what());
        }

        const fs::path records_path = entry->dir / "records.jsonl";
        if (fs::exists(records_path)) {
            std::ifstream rin(records_path, std::ios::binary);
            std::string text((std::istreambuf_iterator<char>(rin)), std::istreambuf_iterator<char>());
            // A crash can leave a torn final line; it was never acknowledged.
            const auto complete = text.rfind('\n');
            const std::size_t keep = complete == std::string::npos ? 0 : complete + 1;
            if (keep != text.size()) {
                text.resize(keep);
                fs::resize_file(records_path, keep);
            }
            entry->records = records_from_jsonl(text);
        }
        std::vector<StimulusLabel> expected = s.emotion_order;
        expected.insert(expected.end(), s.gesture_order.begin(), s.gesture_order.end());
        if (entry->records.size() > expected.size()) throw Error("CorruptSession", s.session_id + " has too many records");
        for (std::size_t i = 0; i < entry->records.size(); ++i) {
            if (!(entry->records[i].stimulus_label == expected[i])) {
                throw Error("CorruptSession", s.session_id + " record " + std::to_string(i) + " is out of order");
            }
        }
        s.records_persisted = entry->records.size();
        s.phase = phase_after(s.calibration.has_value(), entry->records.size());
        sessions_[s.session_id] = entry;
    }
}

std::shared_ptr<StudyService::Entry> StudyService::find(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error("NotFound", "no session '" + session_id + "'");
    return it->second;
}

StudySession StudyService::create_session(const std::string& participant_id, std::uint64_t seed) {
    if (participant_id.empty()) throw Error("InvalidParticipant", "participant_id must be non-empty");
    std::unique_lock lock(sessions_mutex_);
    for (const auto& [id, e] : sessions_) {
        std::lock_guard entry_lock(e->mutex);
        if (e->session.participant_id == participant_id && e->session.phase.kind != PhaseKind::Completed) {
            throw Error("DuplicateActiveSession", "participant '" + participant_id + "' already has session " + id);
        }
    }
    auto entry = std::make_shared<Entry>();
    auto& s = entry->session;
    do {
        s.session_id = new_session_id();
    } while (sessions_.count(s.session_id) != 0);
    s.participant_id = participant_id;
    s.rng_seed = seed;
    s.created_at = iso_now();
    if (config_.randomize_order) {
        s.emotion_order = shuffled_order(emotion_labels(), seed);
        s.gesture_order = shuffled_order(gesture_labels(), seed ^ 0x5DEECE66Dull);
    } else {
        for (const auto& p : config_.emotion_stimuli) s.emotion_order.push_back(*p.label());
        for (const auto& p : config_.gesture_stimuli) s.gesture_order.push_back(*p.label());
    }
    entry->dir = options_.data_dir / "sessions" / s.session_id;
    fs::create_directories(entry->dir);
    write_file_durably(entry->dir / "head.json", head_json(s).dump(2));
    sessions_[s.session_id] = entry;
    return s;
}

StudySession StudyService::record_calibration(const std::string& session_id, const CalibrationResult& result) {
    auto entry = find(session_id);
    std::unique_lock lock(entry->mutex);
    auto& s = entry->session;
    if (s.phase.kind != PhaseKind::PreSession) throw Error("WrongPhase", "calibration is only accepted before the blocks");
    check_calibration(result);
    StudySession next = s;
    next.calibration = result;
    if (next.calibration->participant_id.empty()) next.calibration->participant_id = s.participant_id;
    write_file_durably(entry->dir / "head.json", head_json(next).dump(2));
    s.calibration = next.calibration;
    s.phase = {PhaseKind::EmotionBlock, 0};
    return s;
}

void StudyService::start_playback(const std::shared_ptr<Entry>& entry, std::unique_lock<std::mutex>& lock) {
    auto& s = entry->session;
    const HapticPattern& pattern = config_.stimulus(*s.current_stimulus());
    s.playing = true;
    s.presented_current = true;
    if (entry->worker.joinable()) entry->worker.join();

    if (!options_.async_playback) {
        lock.unlock();
        std::exception_ptr failure;
        try {
            player_->play(pattern, {});
        } catch (...) {
            failure = std::current_exception();
        }
        lock.lock();
        s.playing = false;
        entry->playback_end = std::chrono::steady_clock::now();
        entry->idle.notify_all();
        if (failure) std::rethrow_exception(failure);
        return;
    }

    Entry* raw = entry.get();
    StimulusPlayer* player = player_.get();
    entry->worker = std::jthread([raw, player, &pattern](std::stop_token stop) {
        try {
            player->play(pattern, stop);
        } catch (const std::exception& e) {
            std::cerr << "playback failed for " << raw->session.session_id << ": " << e.what() << '\n';
        }
        std::lock_guard guard(raw->mutex);
        raw->session.playing = false;
        raw->playback_end = std::chrono::steady_clock::now();
        raw->idle.notify_all();
    });
}

StudySession StudyService::request_stimulus(const std::string& session_id) {
    auto entry = find(session_id);
    std::unique_lock lock(entry->mutex);
    auto& s = entry->session;
    if (s.phase.kind != PhaseKind::EmotionBlock && s.phase.kind != PhaseKind::GestureBlock) {
        throw Error("WrongPhase", "no stimulus to present in phase " + std::string(to_string(s.phase.kind)));
    }
    if (s.playing) throw Error("AlreadyPlaying", "a stimulus is already playing");
    if (s.presented_current) {
        throw Error("AlreadyPresented", "the current stimulus was already presented; submit a response or replay");
    }
    entry->presented_at = iso_now();
    start_playback(entry, lock);
    return s;
}

StudySession StudyService::replay_stimulus(const std::string& session_id) {
    auto entry = find(session_id);
    std::unique_lock lock(entry->mutex);
    auto& s = entry->session;
    if (s.phase.kind == PhaseKind::EmotionBlock) throw Error("ReplayNotAllowed", "emotion stimuli are played once");
    if (s.phase.kind != PhaseKind::GestureBlock) throw Error("WrongPhase", "replay is only available for gestures");
    if (s.playing) throw Error("AlreadyPlaying", "a stimulus is already playing");
    if (!s.presented_current) throw Error("NotPresented", "the current stimulus has not been presented yet");
    ++s.replay_count_current;
    start_playback(entry, lock);
    return s;
}

StudySession StudyService::submit_response(const std::string& session_id, StimulusLabel chosen,
                                           std::optional<int> arousal, std::optional<int> valence) {
    auto entry = find(session_id);
    std::unique_lock lock(entry->mutex);
    auto& s = entry->session;
    if (s.phase.kind != PhaseKind::EmotionBlock && s.phase.kind != PhaseKind::GestureBlock) {
        throw Error("WrongPhase", "no response expected in phase " + std::string(to_string(s.phase.kind)));
    }
    if (!s.presented_current) throw Error("NotPresented", "the current stimulus has not been presented yet");
    if (s.playing) throw Error("StillPlaying", "wait for the stimulus to finish");

    ResponseRecord r;
    r.session_id = s.session_id;
    r.participant_id = s.participant_id;
    r.phase = s.phase.kind == PhaseKind::EmotionBlock ? StimulusKind::Emotion : StimulusKind::Gesture;
    r.stimulus_label = *s.current_stimulus();
    r.presented_at = entry->presented_at;
    r.chosen_label = chosen;
    r.arousal = arousal;
    r.valence = valence;
    r.replay_count = s.replay_count_current;
    r.response_ms = std::max<std::int64_t>(
        0, std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - entry->playback_end)
               .count());
    r.check();

    append_line_durably(entry->dir / "records.jsonl", record_to_json(r));
    entry->records.push_back(std::move(r));
    s.records_persisted = entry->records.size();
    s.phase = phase_after(true, entry->records.size());
    s.replay_count_current = 0;
    s.presented_current = false;
    return s;
}

StudySession StudyService::session(const std::string& session_id) const {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    return entry->session;
}

std::vector<StudySession> StudyService::sessions() const {
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::shared_lock lock(sessions_mutex_);
        for (const auto& [id, e] : sessions_) entries.push_back(e);
    }
    std::vector<StudySession> out;
    for (const auto& e : entries) {
        std::lock_guard lock(e->mutex);
        out.push_back(e->session);
    }
    return out;
}

std::vector<ResponseRecord> StudyService::records(const std::string& session_id) const {
    auto entry = find(session_id);
    std::lock_guard lock(entry->mutex);
    if (entry->session.phase.kind != PhaseKind::Completed) {
        throw Error("WrongPhase", "records are available once the session is completed");
    }
    return entry->records;
}

void StudyService::wait_idle(const std::string& session_id) const {
    auto entry = find(session_id);
    std::unique_lock lock(entry->mutex);
    entry->idle.wait(lock, [&] { return !entry->session.playing; });
}

} // namespace hapticforge
