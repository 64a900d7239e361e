#include "hapticforge/pattern.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hapticforge {

namespace {

constexpr std::array<std::string_view, 16> kLabelNames = {
    "anger",    "fear",    "disgust", "happiness", "surprise", "sadness", "confusion", "comfort",
    "calming",  "attention", "hold",  "pat",       "tickle",   "rub",     "tap",       "poke",
};

std::vector<StimulusLabel> make_labels(int first, int last) {
    std::vector<StimulusLabel> out;
    for (int i = first; i < last; ++i) out.push_back({static_cast<Label>(i)});
    return out;
}

std::string make_header() {
    std::string header = "t";
    for (int i = 0; i < kChannelCount; ++i) {
        header += ',';
        header += channel_name(GridIndex::from_linear(i));
    }
    return header;
}

void append_fixed4(std::string& out, double value) {
    char buf[48];
    int n = std::snprintf(buf, sizeof buf, "%.4f", value);
    // "-0.0000" would break the byte-exact format.
    if (n > 0 && buf[0] == '-' && std::strtod(buf, nullptr) == 0.0) {
        out.append(buf + 1, static_cast<std::size_t>(n - 1));
        return;
    }
    out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::optional<double> parse_number(std::string_view cell) {
    if (cell.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

// Printed times are rounded to 1e-4; the row itself and the fitted step (from the
// rounded end points) each contribute up to half a quantum.
constexpr double kTimeTolerance = 1e-4 + 1e-6;

double round_significant(double value, int digits) {
    if (value == 0.0) return 0.0;
    double magnitude = std::floor(std::log10(std::fabs(value)));
    double scale = std::pow(10.0, digits - 1 - magnitude);
    return std::round(value * scale) / scale;
}

std::string format_time(double t) {
    std::string s;
    append_fixed4(s, t);
    return s;
}

// Picks the simplest rate that reproduces every printed time stamp, so that
// serialize_csv(parse_csv(text)) is byte-identical for serializer output.
double infer_rate(const std::vector<std::string_view>& time_cells, double estimate) {
    for (int digits = 1; digits <= 12; ++digits) {
        double candidate = round_significant(estimate, digits);
        if (candidate <= 0.0) continue;
        bool all_match = true;
        for (std::size_t i = 0; i < time_cells.size() && all_match; ++i) {
            all_match = format_time(static_cast<double>(i) / candidate) == time_cells[i];
        }
        if (all_match) return candidate;
    }
    return estimate;
}

} // namespace

std::string channel_name(GridIndex index) {
    std::string name = "m";
    name += static_cast<char>('0' + index.row);
    name += static_cast<char>('0' + index.col);
    return name;
}

Frame Frame::uniform(double value) {
    Frame f;
    f.intensities.fill(value);
    return f;
}

std::string_view to_string(StimulusKind kind) {
    return kind == StimulusKind::Emotion ? "emotion" : "gesture";
}

StimulusKind StimulusLabel::kind() const {
    return static_cast<int>(value) < 10 ? StimulusKind::Emotion : StimulusKind::Gesture;
}

std::string_view StimulusLabel::name() const {
    return kLabelNames[static_cast<std::size_t>(value)];
}

std::optional<StimulusLabel> StimulusLabel::try_parse(std::string_view name) {
    for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
        if (kLabelNames[i] == name) return StimulusLabel{static_cast<Label>(i)};
    }
    return std::nullopt;
}

StimulusLabel StimulusLabel::parse(std::string_view name) {
    if (auto label = try_parse(name)) return *label;
    throw Error("UnknownLabel", "unknown stimulus label '" + std::string(name) + "'");
}

const std::vector<StimulusLabel>& emotion_labels() {
    static const auto labels = make_labels(0, 10);
    return labels;
}

const std::vector<StimulusLabel>& gesture_labels() {
    static const auto labels = make_labels(10, 16);
    return labels;
}

const std::vector<StimulusLabel>& labels_of(StimulusKind kind) {
    return kind == StimulusKind::Emotion ? emotion_labels() : gesture_labels();
}

const std::vector<StimulusLabel>& all_labels() {
    static const auto labels = make_labels(0, 16);
    return labels;
}

HapticPattern::HapticPattern(double sample_rate_hz, std::vector<Frame> frames,
                             std::optional<StimulusLabel> label, Meta meta)
    : sample_rate_hz_(sample_rate_hz), frames_(std::move(frames)), label_(label), meta_(std::move(meta)) {
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
        throw Error("InvalidPattern", "sample rate must be positive");
    }
    if (frames_.size() < 2) throw Error("InvalidPattern", "a pattern needs at least 2 frames");
}

HapticPattern HapticPattern::with_label(std::optional<StimulusLabel> label) const {
    return HapticPattern(sample_rate_hz_, frames_, label, meta_);
}

HapticPattern HapticPattern::with_meta(Meta meta) const {
    return HapticPattern(sample_rate_hz_, frames_, label_, std::move(meta));
}

std::vector<double> HapticPattern::channel(int linear) const {
    std::vector<double> series;
    series.reserve(frames_.size());
    for (const auto& f : frames_) series.push_back(f[linear]);
    return series;
}

void SmoothnessPolicy::check() const {
    if (!(max_step_delta > 0.0 && max_step_delta <= 1.0)) {
        throw Error("InvalidPolicy", "max_step_delta must be in (0, 1]");
    }
    if (min_hold_frames < 1) throw Error("InvalidPolicy", "min_hold_frames must be >= 1");
    if (!(hold_epsilon >= 0.0)) throw Error("InvalidPolicy", "hold_epsilon must be >= 0");
}

std::string_view to_string(ViolationRule rule) {
    switch (rule) {
    case ViolationRule::Bounds: return "BoundsViolation";
    case ViolationRule::Step: return "StepViolation";
    case ViolationRule::Hold: return "HoldViolation";
    case ViolationRule::Duration: return "DurationViolation";
    }
    return "?";
}

std::size_t ValidationReport::count(ViolationRule rule) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [rule](const Violation& v) { return v.rule == rule; }));
}

const std::string& csv_header() {
    static const std::string header = make_header();
    return header;
}

HapticPattern parse_csv(std::string_view text) {
    std::vector<std::string_view> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines.front() != csv_header()) {
        throw CsvError("MalformedHeader", "first line must be the exact pattern header");
    }
    const std::size_t rows = lines.size() - 1;
    if (rows < 2) throw CsvError("TooFewRows", "a pattern needs at least 2 data rows", rows, 0);

    std::vector<Frame> frames(rows);
    std::vector<double> times(rows);
    std::vector<std::string_view> time_cells(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        auto cells = split(lines[r + 1], ',');
        if (cells.size() != kChannelCount + 1) {
            throw CsvError("WrongColumnCount",
                           "row " + std::to_string(r) + " has " + std::to_string(cells.size()) + " columns, expected 26",
                           r, std::min(cells.size(), static_cast<std::size_t>(kChannelCount + 1)));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            auto value = parse_number(cells[c]);
            if (!value) {
                throw CsvError("NonNumericCell",
                               "row " + std::to_string(r) + " column " + std::to_string(c) + " is not a number", r, c);
            }
            if (c == 0) {
                times[r] = *value;
                time_cells[r] = cells[c];
                continue;
            }
            if (*value < 0.0 || *value > 1.0) {
                throw CsvError("OutOfRangeValue",
                               "row " + std::to_string(r) + " column " + std::to_string(c) + " is outside [0,1]", r, c);
            }
            frames[r][static_cast<int>(c - 1)] = *value;
        }
    }

    const double step = (times.back() - times.front()) / static_cast<double>(rows - 1);
    if (!(step > 0.0)) throw CsvError("NonUniformTimestep", "time column must be increasing", 1, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        double expected = times.front() + step * static_cast<double>(r);
        if (std::fabs(times[r] - expected) > kTimeTolerance) {
            throw CsvError("NonUniformTimestep", "time step is not uniform at row " + std::to_string(r), r, 0);
        }
    }
    double rate = 1.0 / step;
    if (times.front() == 0.0) rate = infer_rate(time_cells, rate);
    return HapticPattern(rate, std::move(frames));
}

std::string serialize_csv(const HapticPattern& pattern) {
    std::string out;
    out.reserve((pattern.frame_count() + 1) * 26 * 7);
    out += csv_header();
    out += '\n';
    for (std::size_t i = 0; i < pattern.frame_count(); ++i) {
        append_fixed4(out, pattern.frame_time(i));
        for (double v : pattern.frame(i).intensities) {
            out += ',';
            append_fixed4(out, v);
        }
        out += '\n';
    }
    return out;
}

HapticPattern load_pattern(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str());
}

void save_pattern(const HapticPattern& pattern, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + path);
    out << serialize_csv(pattern);
    if (!out) throw Error("IoError", "failed writing " + path);
}

std::vector<std::pair<std::size_t, std::size_t>> short_extrema(std::span<const double> series,
                                                                const SmoothnessPolicy& policy) {
    std::vector<std::pair<std::size_t, std::size_t>> found;
    const std::size_t n = series.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && series[j + 1] == series[i]) ++j;
        if (i > 0 && j + 1 < n) {
            const double v = series[i];
            const double left = series[i - 1];
            const double right = series[j + 1];
            if ((left < v && right < v) || (left > v && right > v)) {
                std::size_t a = i;
                std::size_t b = j;
                while (a > 0 && std::fabs(series[a - 1] - v) <= policy.hold_epsilon) --a;
                while (b + 1 < n && std::fabs(series[b + 1] - v) <= policy.hold_epsilon) ++b;
                const std::size_t held = b - a + 1;
                if (held < static_cast<std::size_t>(policy.min_hold_frames)) found.emplace_back(i, held);
            }
        }
        i = j + 1;
    }
    return found;
}

ValidationReport validate(const HapticPattern& pattern, const SmoothnessPolicy& policy) {
    policy.check();
    ValidationReport report;
    const auto& frames = pattern.frames();

    for (std::size_t t = 0; t < frames.size(); ++t) {
        for (int ch = 0; ch < kChannelCount; ++ch) {
            const double v = frames[t][ch];
            if (!(v >= 0.0 && v <= 1.0)) {
                double excess = std::isnan(v) ? 1.0 : (v < 0.0 ? -v : v - 1.0);
                report.violations.push_back({t, GridIndex::from_linear(ch), ViolationRule::Bounds, excess});
            }
        }
    }
    for (std::size_t t = 1; t < frames.size(); ++t) {
        for (int ch = 0; ch < kChannelCount; ++ch) {
            const double delta = std::fabs(frames[t][ch] - frames[t - 1][ch]);
            if (delta > policy.max_step_delta) {
                report.violations.push_back({t, GridIndex::from_linear(ch), ViolationRule::Step, delta});
            }
        }
    }
    for (int ch = 0; ch < kChannelCount; ++ch) {
        const auto series = pattern.channel(ch);
        for (auto [frame, held] : short_extrema(series, policy)) {
            report.violations.push_back(
                {frame, GridIndex::from_linear(ch), ViolationRule::Hold, static_cast<double>(held)});
        }
    }
    if (pattern.label() && std::fabs(pattern.duration_s() - kStimulusDurationS) > 1e-6) {
        report.violations.push_back(
            {0, GridIndex{}, ViolationRule::Duration, std::fabs(pattern.duration_s() - kStimulusDurationS)});
    }
    return report;
}

HapticPattern resample(const HapticPattern& pattern, double new_rate_hz) {
    if (!(new_rate_hz > 0.0) || !std::isfinite(new_rate_hz)) {
        throw Error("DegenerateRate", "target rate must be positive");
    }
    const double old_rate = pattern.sample_rate_hz();
    if (new_rate_hz == old_rate) return pattern;
    const double count = std::round(static_cast<double>(pattern.frame_count()) * new_rate_hz / old_rate);
    if (count < 2.0) throw Error("DegenerateRate", "target rate yields fewer than 2 frames");

    const auto& in = pattern.frames();
    const std::size_t last = in.size() - 1;
    std::vector<Frame> out(static_cast<std::size_t>(count));
    for (std::size_t j = 0; j < out.size(); ++j) {
        double position = static_cast<double>(j) * old_rate / new_rate_hz;
        if (std::fabs(position - std::round(position)) < 1e-9) position = std::round(position);
        const auto lower = static_cast<std::size_t>(std::floor(position));
        if (lower >= last) {
            out[j] = in[last];
            continue;
        }
        const double frac = position - static_cast<double>(lower);
        for (int ch = 0; ch < kChannelCount; ++ch) {
            const double a = in[lower][ch];
            const double b = in[lower + 1][ch];
            out[j][ch] = frac == 0.0 ? a : std::clamp(a + (b - a) * frac, 0.0, 1.0);
        }
    }
    auto meta = pattern.meta();
    return HapticPattern(new_rate_hz, std::move(out), pattern.label(), std::move(meta));
}

std::optional<Centroid> spatial_centroid(const Frame& frame) {
    double total = 0.0;
    double row = 0.0;
    double col = 0.0;
    for (int i = 0; i < kChannelCount; ++i) {
        const GridIndex g = GridIndex::from_linear(i);
        total += frame[i];
        row += frame[i] * g.row;
        col += frame[i] * g.col;
    }
    if (total <= 0.0) return std::nullopt;
    return Centroid{row / total, col / total};
}

double round_half_even(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::nearbyint(value * scale) / scale;
}

} // namespace hapticforge
