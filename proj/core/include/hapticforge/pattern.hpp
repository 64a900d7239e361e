#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hapticforge/error.hpp"

namespace hapticforge {

inline constexpr int kGridSize = 5;
inline constexpr int kChannelCount = kGridSize * kGridSize;

/// Motor position on the sleeve. Row 0 is the proximal end, numbering is
/// row-major: linear index = row * 5 + col.
struct GridIndex {
    int row = 0;
    int col = 0;

    constexpr int linear() const { return row * kGridSize + col; }
    static constexpr GridIndex from_linear(int index) { return {index / kGridSize, index % kGridSize}; }
    constexpr bool valid() const { return row >= 0 && row < kGridSize && col >= 0 && col < kGridSize; }

    friend constexpr bool operator==(GridIndex, GridIndex) = default;
};

/// "m<row><col>", the CSV column name of a motor.
std::string channel_name(GridIndex index);

/// One time step of normalized intensities, indexed by GridIndex::linear().
struct Frame {
    std::array<double, kChannelCount> intensities{};

    double& operator[](GridIndex index) { return intensities[static_cast<std::size_t>(index.linear())]; }
    double operator[](GridIndex index) const { return intensities[static_cast<std::size_t>(index.linear())]; }
    double& operator[](int linear) { return intensities[static_cast<std::size_t>(linear)]; }
    double operator[](int linear) const { return intensities[static_cast<std::size_t>(linear)]; }

    static Frame uniform(double value);

    friend bool operator==(const Frame&, const Frame&) = default;
};

enum class StimulusKind { Emotion, Gesture };

std::string_view to_string(StimulusKind kind);

/// Closed set of stimulus labels: 10 emotions followed by 6 gestures.
enum class Label {
    Anger,
    Fear,
    Disgust,
    Happiness,
    Surprise,
    Sadness,
    Confusion,
    Comfort,
    Calming,
    Attention,
    Hold,
    Pat,
    Tickle,
    Rub,
    Tap,
    Poke,
};

struct StimulusLabel {
    Label value = Label::Anger;

    StimulusKind kind() const;
    std::string_view name() const;

    /// Throws Error("UnknownLabel") for names outside the closed set.
    static StimulusLabel parse(std::string_view name);
    static std::optional<StimulusLabel> try_parse(std::string_view name);

    friend bool operator==(StimulusLabel, StimulusLabel) = default;
    friend auto operator<=>(StimulusLabel, StimulusLabel) = default;
};

const std::vector<StimulusLabel>& emotion_labels();
const std::vector<StimulusLabel>& gesture_labels();
const std::vector<StimulusLabel>& labels_of(StimulusKind kind);
const std::vector<StimulusLabel>& all_labels();

inline constexpr double kStimulusDurationS = 10.0;
inline constexpr double kCanonicalRateHz = 10.0;

/// A timed sequence of 25-channel frames. Immutable once built.
class HapticPattern {
public:
    using Meta = std::map<std::string, std::string>;

    /// Throws Error("InvalidPattern") when sample_rate_hz <= 0 or fewer than
    /// two frames are given. Intensity bounds are checked by validate().
    HapticPattern(double sample_rate_hz, std::vector<Frame> frames,
                  std::optional<StimulusLabel> label = std::nullopt, Meta meta = {});

    double sample_rate_hz() const { return sample_rate_hz_; }
    std::size_t frame_count() const { return frames_.size(); }
    double duration_s() const { return static_cast<double>(frames_.size()) / sample_rate_hz_; }
    double frame_time(std::size_t index) const { return static_cast<double>(index) / sample_rate_hz_; }

    const std::vector<Frame>& frames() const { return frames_; }
    const Frame& frame(std::size_t index) const { return frames_.at(index); }
    const std::optional<StimulusLabel>& label() const { return label_; }
    const Meta& meta() const { return meta_; }

    HapticPattern with_label(std::optional<StimulusLabel> label) const;
    HapticPattern with_meta(Meta meta) const;

    /// Intensity series of one channel across all frames.
    std::vector<double> channel(int linear) const;

private:
    double sample_rate_hz_;
    std::vector<Frame> frames_;
    std::optional<StimulusLabel> label_;
    Meta meta_;
};

struct SmoothnessPolicy {
    double max_step_delta = 0.2;
    int min_hold_frames = 3;
    double hold_epsilon = 0.02;

    /// Throws Error("InvalidPolicy") when the invariants do not hold.
    void check() const;
};

enum class ViolationRule { Bounds, Step, Hold, Duration };

std::string_view to_string(ViolationRule rule);

struct Violation {
    std::size_t frame_index = 0;
    GridIndex channel{};
    ViolationRule rule = ViolationRule::Bounds;
    double magnitude = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool passed() const { return violations.empty(); }
    std::size_t count(ViolationRule rule) const;
};

/// Errors raised by parse_csv. `row` is the 0-based data row (the header is
/// not counted), `column` the 0-based column (0 is the time column).
class CsvError : public Error {
public:
    CsvError(std::string code, const std::string& message, std::size_t row = 0, std::size_t column = 0)
        : Error(std::move(code), message), row_(row), column_(column) {}

    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// The exact header line of the pattern CSV format (without line ending).
const std::string& csv_header();

HapticPattern parse_csv(std::string_view text);
std::string serialize_csv(const HapticPattern& pattern);

HapticPattern load_pattern(const std::string& path);
void save_pattern(const HapticPattern& pattern, const std::string& path);

ValidationReport validate(const HapticPattern& pattern, const SmoothnessPolicy& policy = {});

/// Frame indices at which the series reaches a local extremum plateau held
/// for fewer than `policy.min_hold_frames` frames. Exposed for generators.
std::vector<std::pair<std::size_t, std::size_t>> short_extrema(std::span<const double> series,
                                                                const SmoothnessPolicy& policy);

/// Per-channel linear interpolation onto a new frame clock. The output has
/// round(frame_count * new_rate / old_rate) frames; samples past the last
/// input frame hold its value. Throws Error("DegenerateRate").
HapticPattern resample(const HapticPattern& pattern, double new_rate_hz);

struct Centroid {
    double row = 0.0;
    double col = 0.0;
};

/// Intensity-weighted mean grid position; nullopt for an all-zero frame.
std::optional<Centroid> spatial_centroid(const Frame& frame);

/// Round to `decimals` places, ties to even. Used for every printed value.
double round_half_even(double value, int decimals);

} // namespace hapticforge
