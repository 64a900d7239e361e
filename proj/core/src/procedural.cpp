#include "hapticforge/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>

#include <json.hpp>

#include "hapticforge/data_dir.hpp"

namespace hapticforge {

namespace {

using nlohmann::json;

constexpr double kQuantum = 1e-4;
constexpr double kSweepDwellS = 0.5;
constexpr double kScatterHopS = 0.5;
constexpr double kScatterBlend = 0.4;

double quantize(double v) {
    return std::clamp(std::nearbyint(v / kQuantum) * kQuantum, 0.0, 1.0);
}

// Flat-top kernel: 1 within half a cell, linear to 0 at 1.5 cells.
double falloff(double distance) {
    distance = std::fabs(distance);
    if (distance <= 0.5) return 1.0;
    if (distance >= 1.5) return 0.0;
    return 1.5 - distance;
}

int chebyshev(GridIndex a, GridIndex b) {
    return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class Envelope {
public:
    explicit Envelope(const TemplateParams& p)
        : period_(p.pulse_period_s), attack_(p.attack_s), decay_(p.decay_s),
          sustain_((p.pulse_period_s - p.attack_s - p.decay_s) * p.sustain_fraction) {}

    double phase(double t) const {
        const double k = std::floor(t / period_ + 1e-9);
        return std::max(0.0, std::round((t - k * period_) * 1e9) / 1e9);
    }

    double operator()(double t) const {
        double tau = phase(t);
        if (tau < attack_) return tau / attack_;
        tau -= attack_;
        if (tau < sustain_) return 1.0;
        tau -= sustain_;
        if (tau < decay_) return 1.0 - tau / decay_;
        return 0.0;
    }

private:
    double period_;
    double attack_;
    double decay_;
    double sustain_;
};

struct SpatialField {
    const TemplateParams& params;
    const Envelope& envelope;
    std::vector<GridIndex> walk; // ScatterWalk contact points, one per hop

    double operator()(double t, GridIndex cell) const {
        const int radius = params.contact_radius;
        return std::visit(
            [&](const auto& traj) -> double {
                using T = std::decay_t<decltype(traj)>;
                if constexpr (std::is_same_v<T, StaticAt>) {
                    return chebyshev(cell, traj.center) <= radius ? 1.0 : 0.0;
                } else if constexpr (std::is_same_v<T, ColumnSweep>) {
                    if (std::abs(cell.row - 2) > radius) return 0.0;
                    return falloff(cell.col - sweep_position(t, traj));
                } else if constexpr (std::is_same_v<T, RadialPulse>) {
                    const double ring = envelope.phase(t) / params.pulse_period_s * 3.2;
                    const double dist = std::hypot(cell.row - traj.center.row, cell.col - traj.center.col);
                    return falloff(dist - ring);
                } else {
                    const auto hop = static_cast<std::size_t>(std::floor(t / kScatterHopS + 1e-9));
                    const double within = (t - static_cast<double>(hop) * kScatterHopS) / kScatterHopS;
                    const double blend = std::clamp(within / kScatterBlend, 0.0, 1.0);
                    const double from = chebyshev(cell, walk[hop]) <= radius ? 1.0 : 0.0;
                    const double to = chebyshev(cell, walk[hop + 1]) <= radius ? 1.0 : 0.0;
                    return (1.0 - blend) * from + blend * to;
                }
            },
            params.trajectory);
    }

    static double sweep_position(double t, const ColumnSweep& sweep) {
        const double travel = (kGridSize - 1) / sweep.speed_cols_per_s;
        if (sweep.bidirectional) {
            const double cycle = 2.0 * (kSweepDwellS + travel);
            double u = std::fmod(t, cycle);
            if (u < kSweepDwellS) return 0.0;
            u -= kSweepDwellS;
            if (u < travel) return u * sweep.speed_cols_per_s;
            u -= travel;
            if (u < kSweepDwellS) return kGridSize - 1.0;
            u -= kSweepDwellS;
            return kGridSize - 1.0 - u * sweep.speed_cols_per_s;
        }
        const double cycle = 2.0 * kSweepDwellS + travel;
        double u = std::fmod(t, cycle);
        if (u < kSweepDwellS) return 0.0;
        u -= kSweepDwellS;
        if (u < travel) return u * sweep.speed_cols_per_s;
        return kGridSize - 1.0;
    }
};

std::vector<GridIndex> scatter_walk(std::uint64_t seed, std::size_t hops) {
    std::mt19937_64 rng(seed);
    std::vector<GridIndex> walk{{2, 2}};
    while (walk.size() < hops) {
        const GridIndex cur = walk.back();
        std::vector<GridIndex> moves;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                GridIndex next{cur.row + dr, cur.col + dc};
                if ((dr != 0 || dc != 0) && next.valid()) moves.push_back(next);
            }
        }
        walk.push_back(moves[static_cast<std::size_t>(rng() % moves.size())]);
    }
    return walk;
}

// Flat opening (max of window minima) when `open`, closing otherwise.
std::vector<double> flat_filter(const std::vector<double>& x, int width, bool open) {
    const std::size_t n = x.size();
    const auto k = static_cast<std::size_t>(width);
    if (k <= 1 || n < k) return x;
    std::vector<double> window(n - k + 1);
    for (std::size_t w = 0; w < window.size(); ++w) {
        auto [lo, hi] = std::minmax_element(x.begin() + static_cast<std::ptrdiff_t>(w),
                                            x.begin() + static_cast<std::ptrdiff_t>(w + k));
        window[w] = open ? *lo : *hi;
    }
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t first = t + 1 >= k ? t + 1 - k : 0;
        const std::size_t last = std::min(t, window.size() - 1);
        double v = window[first];
        for (std::size_t w = first + 1; w <= last; ++w) v = open ? std::max(v, window[w]) : std::min(v, window[w]);
        out[t] = v;
    }
    return out;
}

bool channel_ok(std::span<const double> series, const SmoothnessPolicy& policy) {
    for (std::size_t t = 1; t < series.size(); ++t) {
        if (std::fabs(series[t] - series[t - 1]) > policy.max_step_delta) return false;
    }
    return short_extrema(series, policy).empty();
}

TemplateParams params_from_json(const json& j) {
    TemplateParams p;
    p.base_intensity = j.at("base_intensity").get<double>();
    p.pulse_period_s = j.at("pulse_period_s").get<double>();
    p.attack_s = j.at("attack_s").get<double>();
    p.decay_s = j.at("decay_s").get<double>();
    p.sustain_fraction = j.value("sustain_fraction", 0.5);
    p.contact_radius = j.value("contact_radius", 1);
    p.jitter = j.value("jitter", 0.0);
    const auto& traj = j.at("trajectory");
    const auto type = traj.at("type").get<std::string>();
    auto center = [&traj]() {
        auto c = traj.value("center", std::vector<int>{2, 2});
        return GridIndex{c.at(0), c.at(1)};
    };
    if (type == "static") {
        p.trajectory = StaticAt{center()};
    } else if (type == "column_sweep") {
        p.trajectory = ColumnSweep{traj.at("speed_cols_per_s").get<double>(), traj.value("bidirectional", true)};
    } else if (type == "radial_pulse") {
        p.trajectory = RadialPulse{center()};
    } else if (type == "scatter_walk") {
        p.trajectory = ScatterWalk{traj.value("seed", std::uint64_t{0})};
    } else {
        throw Error("InvalidParams", "unknown trajectory type '" + type + "'");
    }
    return p;
}

struct LabelTable {
    std::string version;
    std::vector<TemplateParams> params; // indexed by Label
};

const LabelTable& label_table() {
    static const LabelTable table = [] {
        const auto path = data_dir() / "label_params.json";
        std::ifstream in(path);
        if (!in) throw Error("IoError", "cannot open " + path.string());
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw Error("InvalidParams", path.string() + " is not valid JSON");
        LabelTable t;
        t.version = doc.at("version").get<std::string>();
        const auto& labels = doc.at("labels");
        for (const auto& label : all_labels()) {
            const std::string name(label.name());
            if (!labels.contains(name)) throw Error("InvalidParams", "label table is missing '" + name + "'");
            try {
                t.params.push_back(params_from_json(labels.at(name)));
            } catch (const json::exception& e) {
                throw Error("InvalidParams", "label table entry '" + name + "': " + e.what());
            }
            t.params.back().check();
        }
        return t;
    }();
    return table;
}

std::uint64_t label_salt(StimulusLabel label) {
    return 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(label.value) + 1);
}

std::string format_double(double v) {
    json j = v;
    return j.dump();
}

} // namespace

void TemplateParams::check() const {
    auto fail = [](const std::string& why) { throw Error("InvalidParams", why); };
    if (!(base_intensity >= 0.0 && base_intensity <= 1.0)) fail("base_intensity must be in [0,1]");
    if (!(pulse_period_s > 0.0) || !std::isfinite(pulse_period_s)) fail("pulse_period_s must be positive");
    if (!(attack_s >= 0.0) || !(decay_s >= 0.0)) fail("attack_s and decay_s must be non-negative");
    if (attack_s + decay_s > pulse_period_s + 1e-12) fail("attack_s + decay_s exceeds the pulse period");
    if (!(sustain_fraction >= 0.0 && sustain_fraction <= 1.0)) fail("sustain_fraction must be in [0,1]");
    if (contact_radius < 0 || contact_radius >= kGridSize) fail("contact_radius must be in [0,4]");
    if (!(jitter >= 0.0 && jitter <= 1.0)) fail("jitter must be in [0,1]");
    if (const auto* sweep = std::get_if<ColumnSweep>(&trajectory)) {
        if (!(sweep->speed_cols_per_s > 0.0) || !std::isfinite(sweep->speed_cols_per_s)) {
            fail("sweep speed must be positive");
        }
    }
    if (const auto* s = std::get_if<StaticAt>(&trajectory); s != nullptr && !s->center.valid()) fail("bad center");
    if (const auto* r = std::get_if<RadialPulse>(&trajectory); r != nullptr && !r->center.valid()) fail("bad center");
}

const TemplateParams& default_params(StimulusLabel label) {
    return label_table().params.at(static_cast<std::size_t>(label.value));
}

const std::string& label_table_version() {
    return label_table().version;
}

std::vector<double> condition_series(std::span<const double> series, const SmoothnessPolicy& policy) {
    policy.check();
    std::vector<double> y(series.begin(), series.end());
    for (auto& v : y) v = quantize(v);
    // Slew limit below the policy so re-quantization cannot push a step over.
    const double slope = std::floor(policy.max_step_delta * 0.95 / kQuantum) * kQuantum;
    for (std::size_t t = 1; t < y.size(); ++t) y[t] = std::min(y[t], y[t - 1] + slope);
    for (std::size_t t = y.size(); t-- > 1;) y[t - 1] = std::min(y[t - 1], y[t] + slope);
    for (auto& v : y) v = quantize(v);

    for (int round = 0; round < 64; ++round) {
        auto opened = flat_filter(y, policy.min_hold_frames, true);
        auto closed = flat_filter(opened, policy.min_hold_frames, false);
        for (auto& v : closed) v = quantize(v);
        if (closed == y) break;
        y = std::move(closed);
    }
    return y;
}

HapticPattern generate_procedural(StimulusLabel label, const std::optional<TemplateParams>& params,
                                  double sample_rate_hz, std::uint64_t seed) {
    const TemplateParams p = params ? *params : default_params(label);
    p.check();
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
        throw Error("InvalidParams", "sample rate must be positive");
    }
    const double exact_frames = kStimulusDurationS * sample_rate_hz;
    const double frame_count = std::round(exact_frames);
    if (std::fabs(exact_frames - frame_count) > 1e-9 || frame_count < 2.0) {
        throw Error("InvalidParams", "sample rate must give a whole number of frames in 10 s");
    }
    const auto n = static_cast<std::size_t>(frame_count);

    const Envelope envelope(p);
    std::vector<GridIndex> walk;
    if (const auto* scatter = std::get_if<ScatterWalk>(&p.trajectory)) {
        const auto hops = static_cast<std::size_t>(std::ceil(kStimulusDurationS / kScatterHopS)) + 2;
        walk = scatter_walk(scatter->seed ^ seed ^ label_salt(label), hops);
    }
    const SpatialField field{p, envelope, walk};
    std::mt19937_64 noise(seed ^ (label_salt(label) << 1));

    std::vector<Frame> frames(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        const double level = p.base_intensity * envelope(t);
        for (int ch = 0; ch < kChannelCount; ++ch) {
            const double u = unit_double(noise);
            const double v = level * field(t, GridIndex::from_linear(ch)) * (1.0 + p.jitter * (2.0 * u - 1.0));
            frames[i][ch] = quantize(v);
        }
    }

    const SmoothnessPolicy policy{};
    for (int ch = 0; ch < kChannelCount; ++ch) {
        std::vector<double> series(n);
        for (std::size_t i = 0; i < n; ++i) series[i] = frames[i][ch];
        if (channel_ok(series, policy)) continue;
        const auto fixed = condition_series(series, policy);
        for (std::size_t i = 0; i < n; ++i) frames[i][ch] = fixed[i];
    }

    HapticPattern::Meta meta{
        {"generator", "procedural"},
        {"label", std::string(label.name())},
        {"seed", std::to_string(seed)},
        {"sample_rate_hz", format_double(sample_rate_hz)},
        {"template", params ? "custom" : "default"},
        {"label_table_version", params ? "" : label_table_version()},
    };
    if (meta["label_table_version"].empty()) meta.erase("label_table_version");
    HapticPattern pattern(sample_rate_hz, std::move(frames), label, std::move(meta));
    if (!validate(pattern, policy).passed()) {
        throw Error("InternalError", "procedural pattern for '" + std::string(label.name()) + "' failed validation");
    }
    return pattern;
}

} // namespace hapticforge
