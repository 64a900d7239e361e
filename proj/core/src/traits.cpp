#include "hapticforge/generators.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <regex>
#include <set>

namespace hapticforge {

namespace {

template <typename Enum>
struct LexiconEntry {
    Enum value;
    std::vector<std::string_view> phrases;
};

const std::vector<LexiconEntry<IntensityLevel>> kIntensityLexicon = {
    {IntensityLevel::High, {"strong", "intense", "forceful", "vigorous", "sharp", "powerful", "high intensity"}},
    {IntensityLevel::Low, {"gentle", "soft", "light", "subtle", "faint", "delicate", "weak", "low intensity"}},
    {IntensityLevel::Medium, {"moderate", "medium", "medium intensity"}},
};

const std::vector<LexiconEntry<SpatialMotion>> kMotionLexicon = {
    {SpatialMotion::Sweep,
     {"sweep", "sweeps", "sweeping", "glide", "glides", "gliding", "back and forth", "travel", "travels", "travelling",
      "traveling", "stroke", "stroking", "slide", "slides", "sliding", "moving across", "moves across"}},
    {SpatialMotion::Expand,
     {"expand", "expands", "expanding", "radiate", "radiates", "radiating", "spread", "spreads", "spreading",
      "outward", "ripple", "ripples", "rippling"}},
    {SpatialMotion::Random,
     {"random", "randomly", "scatter", "scattered", "irregular", "unpredictable", "erratic", "jumping"}},
    {SpatialMotion::Static, {"static", "stationary", "in place", "same spot", "fixed location", "does not move"}},
};

const std::vector<LexiconEntry<ContactExtent>> kExtentLexicon = {
    {ContactExtent::Small, {"small area", "single motor", "one motor", "fingertip", "pinpoint", "small contact"}},
    {ContactExtent::Medium, {"medium area", "several motors", "moderate area", "palm"}},
    {ContactExtent::Large,
     {"large area", "whole grid", "entire grid", "all motors", "broad", "wide area", "full grid", "entire sleeve"}},
};

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::size_t count_phrase(const std::string& text, std::string_view phrase) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(phrase, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
        const std::size_t end = pos + phrase.size();
        const bool right_ok = end >= text.size() || !is_word_char(text[end]);
        if (left_ok && right_ok) ++count;
        pos = end;
    }
    return count;
}

// Most frequent lexicon value; nullopt when silent or tied.
template <typename Enum>
std::optional<Enum> vote(const std::string& text, const std::vector<LexiconEntry<Enum>>& lexicon) {
    std::optional<Enum> best;
    std::size_t best_count = 0;
    bool tied = false;
    for (const auto& entry : lexicon) {
        std::size_t hits = 0;
        for (auto phrase : entry.phrases) hits += count_phrase(text, phrase);
        if (hits == 0) continue;
        if (hits > best_count) {
            best = entry.value;
            best_count = hits;
            tied = false;
        } else if (hits == best_count) {
            tied = true;
        }
    }
    if (tied) return std::nullopt;
    return best;
}

struct RhythmVote {
    bool decided = false;
    std::optional<double> period;
};

RhythmVote vote_rhythm(const std::string& text) {
    static const std::regex seconds_re(
        R"((?:every|period of|interval of|intervals of|pulses? of|cycle of)\s+(\d+(?:\.\d+)?)\s*(?:s|sec|secs|second|seconds)\b)");
    static const std::regex hertz_re(R"((\d+(?:\.\d+)?)\s*hz\b)");
    std::set<double> periods;
    for (std::sregex_iterator it(text.begin(), text.end(), seconds_re), end; it != end; ++it) {
        double p = std::stod((*it)[1].str());
        if (p > 0.0) periods.insert(p);
    }
    for (std::sregex_iterator it(text.begin(), text.end(), hertz_re), end; it != end; ++it) {
        double f = std::stod((*it)[1].str());
        if (f > 0.0) periods.insert(1.0 / f);
    }
    const bool continuous = count_phrase(text, "continuous") + count_phrase(text, "sustained") +
                                count_phrase(text, "constant pressure") + count_phrase(text, "steady") >
                            0;
    if (periods.size() == 1) return {true, *periods.begin()};
    if (periods.empty() && continuous) return {true, std::nullopt};
    return {};
}

std::map<std::string, std::string> structured_section(const std::string& text) {
    std::map<std::string, std::string> fields;
    auto start = text.find("traits:");
    if (start == std::string::npos) return fields;
    static const std::regex line_re(R"(^\s*[-*]?\s*([a-z_]+)\s*[:=]\s*([^\n]+?)\s*$)");
    std::size_t pos = text.find('\n', start);
    while (pos != std::string::npos && pos < text.size()) {
        auto next = text.find('\n', pos + 1);
        std::string line = text.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
        std::smatch m;
        if (std::regex_match(line, m, line_re)) fields[m[1].str()] = m[2].str();
        pos = next;
    }
    return fields;
}

template <typename Enum>
std::optional<Enum> lookup(const std::map<std::string, std::string>& fields, const std::string& key,
                           const std::vector<std::pair<std::string_view, Enum>>& names) {
    auto it = fields.find(key);
    if (it == fields.end()) return std::nullopt;
    for (const auto& [name, value] : names) {
        if (it->second == name) return value;
    }
    return std::nullopt;
}

} // namespace

std::string_view to_string(IntensityLevel v) {
    switch (v) {
    case IntensityLevel::Low: return "low";
    case IntensityLevel::Medium: return "medium";
    case IntensityLevel::High: return "high";
    }
    return "?";
}

std::string_view to_string(SpatialMotion v) {
    switch (v) {
    case SpatialMotion::Static: return "static";
    case SpatialMotion::Sweep: return "sweep";
    case SpatialMotion::Expand: return "expand";
    case SpatialMotion::Random: return "random";
    }
    return "?";
}

std::string_view to_string(ContactExtent v) {
    switch (v) {
    case ContactExtent::Small: return "small";
    case ContactExtent::Medium: return "medium";
    case ContactExtent::Large: return "large";
    }
    return "?";
}

ExtractedTraits extract_traits(std::string_view narrative) {
    const std::string text = lowercase(narrative);
    const auto fields = structured_section(text);
    ExtractedTraits traits;

    auto intensity = vote(text, kIntensityLexicon);
    if (!intensity) {
        intensity = lookup<IntensityLevel>(
            fields, "intensity_level",
            {{"low", IntensityLevel::Low}, {"medium", IntensityLevel::Medium}, {"high", IntensityLevel::High}});
    }
    if (intensity) traits.intensity_level = *intensity;
    traits.intensity_defaulted = !intensity.has_value();

    auto rhythm = vote_rhythm(text);
    if (!rhythm.decided) {
        if (auto it = fields.find("rhythm_period_s"); it != fields.end()) {
            if (it->second == "none" || it->second == "continuous") {
                rhythm = {true, std::nullopt};
            } else {
                try {
                    double p = std::stod(it->second);
                    if (p > 0.0) rhythm = {true, p};
                } catch (const std::exception&) {
                }
            }
        }
    }
    if (rhythm.decided) traits.rhythm_period_s = rhythm.period;
    traits.rhythm_defaulted = !rhythm.decided;

    auto motion = vote(text, kMotionLexicon);
    if (!motion) {
        motion = lookup<SpatialMotion>(fields, "spatial_motion",
                                       {{"static", SpatialMotion::Static},
                                        {"sweep", SpatialMotion::Sweep},
                                        {"expand", SpatialMotion::Expand},
                                        {"random", SpatialMotion::Random}});
    }
    if (motion) traits.spatial_motion = *motion;
    traits.motion_defaulted = !motion.has_value();

    auto extent = vote(text, kExtentLexicon);
    if (!extent) {
        extent = lookup<ContactExtent>(
            fields, "contact_extent",
            {{"small", ContactExtent::Small}, {"medium", ContactExtent::Medium}, {"large", ContactExtent::Large}});
    }
    if (extent) traits.contact_extent = *extent;
    traits.extent_defaulted = !extent.has_value();
    return traits;
}

TemplateParams generic_params() {
    return TemplateParams{};
}

TemplateParams traits_to_params(const FeatureAnalysis& analysis) {
    const auto& traits = analysis.traits;
    if (traits.all_defaulted()) return generic_params();

    TemplateParams p;
    switch (traits.intensity_level) {
    case IntensityLevel::Low: p.base_intensity = 0.35; break;
    case IntensityLevel::Medium: p.base_intensity = 0.6; break;
    case IntensityLevel::High: p.base_intensity = 0.9; break;
    }
    if (traits.rhythm_period_s) {
        p.pulse_period_s = std::clamp(*traits.rhythm_period_s, 0.2, kStimulusDurationS);
        p.attack_s = 0.3 * p.pulse_period_s;
        p.decay_s = 0.3 * p.pulse_period_s;
        p.sustain_fraction = 0.5;
    } else {
        p.pulse_period_s = kStimulusDurationS;
        p.attack_s = 1.0;
        p.decay_s = 1.0;
        p.sustain_fraction = 1.0;
    }
    switch (traits.spatial_motion) {
    case SpatialMotion::Static: p.trajectory = StaticAt{}; break;
    case SpatialMotion::Sweep: p.trajectory = ColumnSweep{2.0, true}; break;
    case SpatialMotion::Expand: p.trajectory = RadialPulse{}; break;
    case SpatialMotion::Random: p.trajectory = ScatterWalk{0}; break;
    }
    switch (traits.contact_extent) {
    case ContactExtent::Small: p.contact_radius = 0; break;
    case ContactExtent::Medium: p.contact_radius = 1; break;
    case ContactExtent::Large: p.contact_radius = 2; break;
    }
    p.jitter = 0.0;
    return p;
}

} // namespace hapticforge
