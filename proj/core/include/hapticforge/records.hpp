#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hapticforge/pattern.hpp"

namespace hapticforge {

inline constexpr int kRatingMin = 1;
inline constexpr int kRatingMax = 10;

/// One participant answer. Emotion records carry both ratings and no
/// replays; gesture records carry no ratings.
struct ResponseRecord {
    std::string session_id;
    std::string participant_id;
    StimulusKind phase = StimulusKind::Emotion;
    StimulusLabel stimulus_label;
    std::string presented_at; // ISO-8601 UTC
    StimulusLabel chosen_label;
    std::optional<int> arousal;
    std::optional<int> valence;
    int replay_count = 0;
    std::int64_t response_ms = 0;

    /// Throws Error("ScaleViolation"), Error("KindMismatch") or Error("BadRecord").
    void check() const;

    bool correct() const { return stimulus_label == chosen_label; }
};

/// Single-line JSON object, the JSON Lines persistence format.
std::string record_to_json(const ResponseRecord& record);
/// Throws Error("BadRecord") for malformed lines and the check() errors.
ResponseRecord record_from_json(std::string_view line);

/// CSV equivalent: fixed header, empty cells for absent ratings.
const std::string& records_csv_header();
std::string records_to_csv(const std::vector<ResponseRecord>& records);
std::vector<ResponseRecord> records_from_csv(std::string_view text);

std::vector<ResponseRecord> records_from_jsonl(std::string_view text);

} // namespace hapticforge
