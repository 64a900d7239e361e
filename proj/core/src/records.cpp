#include "hapticforge/records.hpp"

#include <charconv>
#include <sstream>

#include <json.hpp>

namespace hapticforge {

namespace {

using nlohmann::json;

void check_rating(const std::optional<int>& value, const char* name) {
    if (!value) throw Error("ScaleViolation", std::string(name) + " is required for emotion stimuli");
    if (*value < kRatingMin || *value > kRatingMax) {
        throw Error("ScaleViolation", std::string(name) + " must be between 1 and 10, got " + std::to_string(*value));
    }
}

StimulusKind parse_phase(std::string_view s) {
    if (s == "emotion") return StimulusKind::Emotion;
    if (s == "gesture") return StimulusKind::Gesture;
    throw Error("BadRecord", "unknown phase '" + std::string(s) + "'");
}

StimulusLabel parse_label(std::string_view s) {
    auto label = StimulusLabel::try_parse(s);
    if (!label) throw Error("BadRecord", "unknown label '" + std::string(s) + "'");
    return *label;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

std::optional<int> parse_optional_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("BadRecord", "not an integer: '" + s + "'");
    return v;
}

} // namespace

void ResponseRecord::check() const {
    if (participant_id.empty()) throw Error("BadRecord", "participant_id is empty");
    if (stimulus_label.kind() != phase) throw Error("KindMismatch", "stimulus label does not belong to the phase");
    if (chosen_label.kind() != phase) {
        throw Error("KindMismatch", "chosen label '" + std::string(chosen_label.name()) + "' is not a " +
                                        std::string(to_string(phase)) + " label");
    }
    if (replay_count < 0) throw Error("BadRecord", "replay_count must be >= 0");
    if (response_ms < 0) throw Error("BadRecord", "response_ms must be >= 0");
    if (phase == StimulusKind::Emotion) {
        check_rating(arousal, "arousal");
        check_rating(valence, "valence");
        if (replay_count != 0) throw Error("BadRecord", "emotion stimuli cannot be replayed");
    } else if (arousal || valence) {
        throw Error("ScaleViolation", "gesture responses carry no ratings");
    }
}

std::string record_to_json(const ResponseRecord& r) {
    json j;
    j["session_id"] = r.session_id;
    j["participant_id"] = r.participant_id;
    j["phase"] = std::string(to_string(r.phase));
    j["stimulus_label"] = std::string(r.stimulus_label.name());
    j["presented_at"] = r.presented_at;
    j["chosen_label"] = std::string(r.chosen_label.name());
    j["arousal"] = r.arousal ? json(*r.arousal) : json(nullptr);
    j["valence"] = r.valence ? json(*r.valence) : json(nullptr);
    j["replay_count"] = r.replay_count;
    j["response_ms"] = r.response_ms;
    return j.dump();
}

ResponseRecord record_from_json(std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("BadRecord", "record line is not a JSON object");
    ResponseRecord r;
    try {
        r.session_id = j.value("session_id", std::string{});
        r.participant_id = j.at("participant_id").get<std::string>();
        r.phase = parse_phase(j.at("phase").get<std::string>());
        r.stimulus_label = parse_label(j.at("stimulus_label").get<std::string>());
        r.presented_at = j.value("presented_at", std::string{});
        r.chosen_label = parse_label(j.at("chosen_label").get<std::string>());
        if (j.contains("arousal") && !j["arousal"].is_null()) r.arousal = j["arousal"].get<int>();
        if (j.contains("valence") && !j["valence"].is_null()) r.valence = j["valence"].get<int>();
        r.replay_count = j.value("replay_count", 0);
        r.response_ms = j.value("response_ms", std::int64_t{0});
    } catch (const json::exception& e) {
        throw Error("BadRecord", std::string("malformed record: ") + e.what());
    }
    r.check();
    return r;
}

std::vector<ResponseRecord> records_from_jsonl(std::string_view text) {
    std::vector<ResponseRecord> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) out.push_back(record_from_json(line));
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return out;
}

const std::string& records_csv_header() {
    static const std::string header =
        "session_id,participant_id,phase,stimulus_label,presented_at,chosen_label,arousal,valence,replay_count,"
        "response_ms";
    return header;
}

std::string records_to_csv(const std::vector<ResponseRecord>& records) {
    std::ostringstream out;
    out << records_csv_header() << '\n';
    for (const auto& r : records) {
        out << r.session_id << ',' << r.participant_id << ',' << to_string(r.phase) << ',' << r.stimulus_label.name()
            << ',' << r.presented_at << ',' << r.chosen_label.name() << ',';
        if (r.arousal) out << *r.arousal;
        out << ',';
        if (r.valence) out << *r.valence;
        out << ',' << r.replay_count << ',' << r.response_ms << '\n';
    }
    return out.str();
}

std::vector<ResponseRecord> records_from_csv(std::string_view text) {
    std::vector<ResponseRecord> out;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() : end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (header) {
            if (line != records_csv_header()) throw Error("BadRecord", "unexpected records CSV header");
            header = false;
            continue;
        }
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 10) throw Error("BadRecord", "records CSV row must have 10 cells");
        ResponseRecord r;
        r.session_id = cells[0];
        r.participant_id = cells[1];
        r.phase = parse_phase(cells[2]);
        r.stimulus_label = parse_label(cells[3]);
        r.presented_at = cells[4];
        r.chosen_label = parse_label(cells[5]);
        r.arousal = parse_optional_int(cells[6]);
        r.valence = parse_optional_int(cells[7]);
        r.replay_count = parse_optional_int(cells[8]).value_or(0);
        r.response_ms = parse_optional_int(cells[9]).value_or(0);
        r.check();
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace hapticforge
