#include "hapticforge/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hapticforge/error.hpp"

namespace hapticforge {

namespace {

namespace fs = std::filesystem;

constexpr int kCellPx = 20;

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    out << text;
}

std::string frame_svg(const Frame& frame) {
    const int side = kGridSize * kCellPx;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side
        << "\" viewBox=\"0 0 " << side << ' ' << side << "\">\n";
    for (int r = 0; r < kGridSize; ++r) {
        for (int c = 0; c < kGridSize; ++c) {
            const double v = std::clamp(frame[GridIndex{r, c}], 0.0, 1.0);
            const int level = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            char fill[8];
            std::snprintf(fill, sizeof fill, "#%02x%02x%02x", level, level, level);
            svg << "<rect x=\"" << c * kCellPx << "\" y=\"" << r * kCellPx << "\" width=\"" << kCellPx
                << "\" height=\"" << kCellPx << "\" fill=\"" << fill << "\" stroke=\"#888888\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string markdown_p(const TTestResult& t) {
    std::string s = format_p(t.p);
    if (t.degenerate) s += " (zero variance)";
    return s;
}

void summary_table(std::ostringstream& md, const KindReport& k, const std::vector<EmotionSummary>& ratings);

void kind_section(std::ostringstream& md, const char* title, const KindReport& k, double chance,
                  const std::vector<EmotionSummary>& ratings) {
    md << "## " << title << "\n\n";
    summary_table(md, k, ratings);
    md << "| Label | Correct | Accuracy (%) | t | p |\n|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < k.matrix.labels.size(); ++i) {
        const auto label = k.matrix.labels[i];
        const auto& t = k.tests.at(label);
        md << "| " << label.name() << " | " << k.matrix.counts[i][i] << "/" << k.matrix.row_sum(i) << " | "
           << fixed(k.accuracy.at(label), 1) << " | " << (t.degenerate ? std::string("n/a") : fixed(t.t, 2)) << " | "
           << markdown_p(t) << " |\n";
    }
    md << "\nMean accuracy: " << fixed(k.mean_accuracy, 1) << "% (chance " << fixed(100.0 * chance, 1) << "%)\n\n";
    if (k.overall) {
        md << "Per-participant accuracy vs chance: t(" << static_cast<int>(k.overall->df) << ") = " << fixed(k.overall->t, 2)
           << ", p " << (k.overall->p < 0.001 ? std::string("< 0.001") : "= " + fixed(k.overall->p, 3)) << "\n\n";
    } else if (!k.overall_error.empty()) {
        md << "Per-participant test unavailable: " << k.overall_error << "\n\n";
    }
    md << "Confusion matrix (rows true, columns chosen):\n\n|  |";
    for (auto l : k.matrix.labels) md << ' ' << l.name() << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < k.matrix.labels.size(); ++i) md << "---|";
    md << '\n';
    for (std::size_t i = 0; i < k.matrix.labels.size(); ++i) {
        md << "| " << k.matrix.labels[i].name() << " |";
        for (int c : k.matrix.counts[i]) md << ' ' << c << " |";
        md << '\n';
    }
    md << '\n';
}

// Column order of the summary tables.
const std::vector<StimulusLabel>& table_order(StimulusKind kind) {
    static const std::vector<StimulusLabel> emotions = [] {
        std::vector<StimulusLabel> v;
        for (const char* n : {"happiness", "surprise", "fear", "disgust", "anger", "comfort", "attention", "calming",
                              "confusion", "sadness"}) {
            v.push_back(StimulusLabel::parse(n));
        }
        return v;
    }();
    static const std::vector<StimulusLabel> gestures = [] {
        std::vector<StimulusLabel> v;
        for (const char* n : {"hold", "pat", "poke", "rub", "tap", "tickle"}) v.push_back(StimulusLabel::parse(n));
        return v;
    }();
    return kind == StimulusKind::Emotion ? emotions : gestures;
}

void summary_table(std::ostringstream& md, const KindReport& k, const std::vector<EmotionSummary>& ratings) {
    const auto& order = table_order(k.matrix.kind);
    md << "| " << (k.matrix.kind == StimulusKind::Emotion ? "Emotions" : "Gestures") << " |";
    for (auto l : order) md << ' ' << l.name() << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < order.size(); ++i) md << "---|";
    md << '\n';
    if (!ratings.empty()) {
        auto find = [&](StimulusLabel l) -> const EmotionSummary* {
            for (const auto& s : ratings) {
                if (s.label == l) return &s;
            }
            return nullptr;
        };
        md << "| Arousal |";
        for (auto l : order) {
            const auto* s = find(l);
            md << ' ' << (s ? fixed(s->arousal_mean, 1) + "±" + fixed(s->arousal_sd, 1) : std::string("n/a")) << " |";
        }
        md << "\n| Valence |";
        for (auto l : order) {
            const auto* s = find(l);
            md << ' ' << (s ? fixed(s->valence_mean, 1) + "±" + fixed(s->valence_sd, 1) : std::string("n/a")) << " |";
        }
        md << '\n';
    }
    md << "| Accuracy |";
    for (auto l : order) md << ' ' << fixed(k.accuracy.at(l), 1) << " |";
    md << "\n| Sig.(p) |";
    for (auto l : order) md << ' ' << format_p(k.tests.at(l).p) << " |";
    md << "\n\n";
}

std::optional<KindReport> kind_report(const ResponseDataset& dataset, StimulusKind kind) {
    if (dataset.of_kind(kind).empty()) return std::nullopt;
    KindReport k;
    k.matrix = confusion_matrix(dataset, kind);
    k.accuracy = per_class_accuracy(k.matrix);
    k.mean_accuracy = mean_accuracy(k.matrix);
    k.tests = per_class_chance_tests(dataset, kind, chance_level(kind));
    try {
        k.overall = overall_chance_test(dataset, kind, chance_level(kind));
    } catch (const Error& e) {
        k.overall_error = std::string(e.code()) + ": " + e.what();
    }
    return k;
}

} // namespace

std::vector<std::string> render_frames(const HapticPattern& pattern, int stride) {
    if (stride < 1) throw Error("InvalidStride", "stride must be a positive integer");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < pattern.frame_count(); i += static_cast<std::size_t>(stride)) {
        out.push_back(frame_svg(pattern.frames()[i]));
    }
    return out;
}

std::vector<fs::path> write_frames(const HapticPattern& pattern, int stride, const fs::path& dir) {
    const auto svgs = render_frames(pattern, stride);
    fs::create_directories(dir);
    std::vector<fs::path> paths;
    for (std::size_t k = 0; k < svgs.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.svg", k * static_cast<std::size_t>(stride));
        paths.push_back(dir / name);
        write_text(paths.back(), svgs[k]);
    }
    return paths;
}

std::string export_circumplex_plot(const std::vector<EmotionSummary>& summary, double midpoint) {
    std::string out = "emotion,arousal_mean,arousal_sd,valence_mean,valence_sd,quadrant\n";
    for (const auto& s : summary) {
        out += std::string(s.label.name()) + "," + fixed(s.arousal_mean, 1) + "," + fixed(s.arousal_sd, 1) + "," +
               fixed(s.valence_mean, 1) + "," + fixed(s.valence_sd, 1) + "," +
               std::string(to_string(quadrant_of(s.arousal_mean, s.valence_mean, midpoint))) + "\n";
    }
    return out;
}

std::string confusion_csv(const ConfusionMatrix& m) {
    std::string out = "true\\chosen";
    for (auto l : m.labels) out += "," + std::string(l.name());
    out += "\n";
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        out += std::string(m.labels[i].name());
        for (int c : m.counts[i]) out += "," + std::to_string(c);
        out += "\n";
    }
    return out;
}

std::string format_p(double p) { return p < 0.01 ? "<0.01" : fixed(p, 3); }

AnalysisReport build_report(const ResponseDataset& dataset) {
    if (dataset.records().empty()) throw Error("EmptyDataset", "no records to analyse");
    AnalysisReport r;
    r.participants = dataset.participants().size();
    r.emotion = kind_report(dataset, StimulusKind::Emotion);
    r.gesture = kind_report(dataset, StimulusKind::Gesture);
    if (r.emotion) {
        r.summary = valence_arousal_summary(dataset);
        r.quadrants = quadrants(r.summary);
        if (r.emotion->overall) {
            r.baseline = overall_chance_test(dataset, StimulusKind::Emotion, kBaselineEmotionAccuracy);
        }
    }
    return r;
}

std::string render_markdown(const AnalysisReport& r) {
    std::ostringstream md;
    md << "# Study analysis\n\nParticipants: " << r.participants << "\n\n";
    if (r.emotion) {
        kind_section(md, "Emotions", *r.emotion, kEmotionChance, r.summary);
        if (r.baseline) {
            md << "Against the " << fixed(100.0 * kBaselineEmotionAccuracy, 1) << "% baseline: t("
               << static_cast<int>(r.baseline->df) << ") = " << fixed(r.baseline->t, 2)
               << ", p = " << fixed(r.baseline->p, 3) << "\n\n";
        }
        md << "| Emotion | Arousal | Valence | Quadrant |\n|---|---|---|---|\n";
        for (const auto& s : r.summary) {
            md << "| " << s.label.name() << " | " << fixed(s.arousal_mean, 1) << " ± " << fixed(s.arousal_sd, 1) << " | "
               << fixed(s.valence_mean, 1) << " ± " << fixed(s.valence_sd, 1) << " | " << to_string(r.quadrants.at(s.label))
               << " |\n";
        }
        md << '\n';
    }
    if (r.gesture) kind_section(md, "Gestures", *r.gesture, kGestureChance, {});
    return md.str();
}

void write_report(const AnalysisReport& r, const fs::path& dir) {
    fs::create_directories(dir);
    write_text(dir / "report.md", render_markdown(r));
    if (r.emotion) {
        write_text(dir / "confusion_emotion.csv", confusion_csv(r.emotion->matrix));
        write_text(dir / "circumplex.csv", export_circumplex_plot(r.summary));
    }
    if (r.gesture) write_text(dir / "confusion_gesture.csv", confusion_csv(r.gesture->matrix));
}

} // namespace hapticforge
