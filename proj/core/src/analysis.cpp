#include "hapticforge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hapticforge/error.hpp"

namespace hapticforge {

namespace {

namespace fs = std::filesystem;

double round1(double v) { return round_half_even(v, 1); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<ResponseRecord> read_records(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".jsonl") return records_from_jsonl(read_text(path));
    if (ext == ".csv") return records_from_csv(read_text(path));
    throw Error("IoError", "unsupported record file " + path.string());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

TTestResult flagged(const std::vector<double>& v, double mu0, Alternative alt) {
    TTestResult r;
    r.n = v.size();
    r.df = v.empty() ? 0.0 : static_cast<double>(v.size() - 1);
    r.mu0 = mu0;
    r.alternative = alt;
    r.mean = v.empty() ? 0.0 : mean_of(v);
    r.sd = 0.0;
    r.degenerate = true;
    const double diff = r.mean - mu0;
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    switch (alt) {
    case Alternative::Greater: r.p = diff > 0.0 ? 0.0 : 1.0; break;
    case Alternative::Less: r.p = diff < 0.0 ? 0.0 : 1.0; break;
    case Alternative::TwoSided: r.p = diff != 0.0 ? 0.0 : 1.0; break;
    }
    return r;
}

} // namespace

double chance_level(StimulusKind kind) { return kind == StimulusKind::Emotion ? kEmotionChance : kGestureChance; }

ResponseDataset::ResponseDataset(std::vector<ResponseRecord> records) {
    for (auto& r : records) add(std::move(r));
}

void ResponseDataset::add(ResponseRecord record) {
    record.check();
    auto key = std::make_tuple(record.participant_id, record.phase, record.stimulus_label);
    if (!keys_.insert(key).second) {
        throw Error("DuplicateRecord", "participant '" + record.participant_id + "' answered '" +
                                           std::string(record.stimulus_label.name()) + "' twice");
    }
    records_.push_back(std::move(record));
}

std::set<std::string> ResponseDataset::participants() const {
    std::set<std::string> out;
    for (const auto& r : records_) out.insert(r.participant_id);
    return out;
}

std::vector<ResponseRecord> ResponseDataset::of_kind(StimulusKind kind) const {
    std::vector<ResponseRecord> out;
    for (const auto& r : records_) {
        if (r.phase == kind) out.push_back(r);
    }
    return out;
}

ResponseDataset ResponseDataset::load(const fs::path& path) {
    ResponseDataset ds;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(path)) {
            const auto ext = e.path().extension().string();
            if (e.is_regular_file() && (ext == ".jsonl" || ext == ".csv")) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            for (auto& r : read_records(f)) ds.add(std::move(r));
        }
    } else {
        for (auto& r : read_records(path)) ds.add(std::move(r));
    }
    return ds;
}

std::size_t ConfusionMatrix::index_of(StimulusLabel label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw Error("KindMismatch", "label '" + std::string(label.name()) + "' not in matrix");
    return static_cast<std::size_t>(it - labels.begin());
}

int ConfusionMatrix::at(StimulusLabel truth, StimulusLabel chosen) const {
    return counts[index_of(truth)][index_of(chosen)];
}

int ConfusionMatrix::row_sum(std::size_t row) const {
    int s = 0;
    for (int c : counts.at(row)) s += c;
    return s;
}

int ConfusionMatrix::total() const {
    int s = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) s += row_sum(i);
    return s;
}

ConfusionMatrix confusion_matrix(const ResponseDataset& dataset, StimulusKind kind) {
    ConfusionMatrix m;
    m.kind = kind;
    m.labels = labels_of(kind);
    m.counts.assign(m.labels.size(), std::vector<int>(m.labels.size(), 0));
    bool any = false;
    for (const auto& r : dataset.records()) {
        if (r.phase != kind) continue;
        ++m.counts[m.index_of(r.stimulus_label)][m.index_of(r.chosen_label)];
        any = true;
    }
    if (!any) throw Error("EmptyDataset", "no " + std::string(to_string(kind)) + " records");
    return m;
}

std::map<StimulusLabel, double> per_class_accuracy_exact(const ConfusionMatrix& m) {
    std::map<StimulusLabel, double> out;
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        const int total = m.row_sum(i);
        if (total == 0) throw Error("EmptyDataset", "no responses for '" + std::string(m.labels[i].name()) + "'");
        out[m.labels[i]] = 100.0 * m.counts[i][i] / total;
    }
    return out;
}

std::map<StimulusLabel, double> per_class_accuracy(const ConfusionMatrix& m) {
    auto out = per_class_accuracy_exact(m);
    for (auto& [label, pct] : out) pct = round1(pct);
    return out;
}

double mean_accuracy(const ConfusionMatrix& m) {
    const auto exact = per_class_accuracy_exact(m);
    double s = 0.0;
    for (const auto& [label, pct] : exact) s += pct;
    return round1(s / static_cast<double>(exact.size()));
}

std::map<StimulusLabel, TTestResult> per_class_chance_tests(const ResponseDataset& dataset, StimulusKind kind,
                                                           double chance, Alternative alt) {
    std::map<StimulusLabel, std::vector<double>> vectors;
    for (const auto& r : dataset.records()) {
        if (r.phase == kind) vectors[r.stimulus_label].push_back(r.correct() ? 1.0 : 0.0);
    }
    if (vectors.empty()) throw Error("EmptyDataset", "no " + std::string(to_string(kind)) + " records");
    std::map<StimulusLabel, TTestResult> out;
    for (const auto& [label, v] : vectors) {
        if (v.size() >= 2 && sample_sd(v) > 0.0) {
            out[label] = one_sample_t(v, chance, alt);
        } else {
            out[label] = flagged(v, chance, alt);
        }
    }
    return out;
}

TTestResult overall_chance_test(const ResponseDataset& dataset, StimulusKind kind, double chance, Alternative alt) {
    const auto& labels = labels_of(kind);
    std::map<std::string, std::pair<int, int>> per_participant; // correct, answered
    for (const auto& r : dataset.records()) {
        if (r.phase != kind) continue;
        auto& [correct, answered] = per_participant[r.participant_id];
        correct += r.correct() ? 1 : 0;
        ++answered;
    }
    if (per_participant.empty()) throw Error("EmptyDataset", "no " + std::string(to_string(kind)) + " records");
    std::vector<double> accuracy;
    for (const auto& [pid, ca] : per_participant) {
        if (ca.second != static_cast<int>(labels.size())) {
            throw Error("IncompleteDataset", "participant '" + pid + "' answered " + std::to_string(ca.second) +
                                                 " of " + std::to_string(labels.size()) + " stimuli");
        }
        accuracy.push_back(static_cast<double>(ca.first) / static_cast<double>(ca.second));
    }
    return one_sample_t(accuracy, chance, alt);
}

std::vector<EmotionSummary> valence_arousal_summary(const ResponseDataset& dataset) {
    std::map<StimulusLabel, std::pair<std::vector<double>, std::vector<double>>> ratings;
    for (const auto& r : dataset.records()) {
        if (r.phase != StimulusKind::Emotion) continue;
        auto& [a, v] = ratings[r.stimulus_label];
        a.push_back(*r.arousal);
        v.push_back(*r.valence);
    }
    if (ratings.empty()) throw Error("EmptyDataset", "no emotion records");
    const auto matrix = confusion_matrix(dataset, StimulusKind::Emotion);
    const auto accuracy = per_class_accuracy(matrix);
    const auto tests = per_class_chance_tests(dataset, StimulusKind::Emotion, kEmotionChance);

    std::vector<EmotionSummary> out;
    for (auto label : emotion_labels()) {
        const auto it = ratings.find(label);
        if (it == ratings.end()) continue;
        const auto& [a, v] = it->second;
        EmotionSummary s{label};
        s.arousal_mean = round1(mean_of(a));
        s.arousal_sd = round1(sample_sd(a));
        s.valence_mean = round1(mean_of(v));
        s.valence_sd = round1(sample_sd(v));
        s.accuracy_pct = accuracy.at(label);
        s.p_vs_chance = tests.at(label).p;
        s.degenerate = tests.at(label).degenerate;
        out.push_back(s);
    }
    return out;
}

std::string_view to_string(Quadrant q) {
    switch (q) {
    case Quadrant::HighArousalPositive: return "HighArousalPositive";
    case Quadrant::HighArousalNegative: return "HighArousalNegative";
    case Quadrant::LowArousalPositive: return "LowArousalPositive";
    case Quadrant::LowArousalNegative: return "LowArousalNegative";
    case Quadrant::OnBoundary: return "OnBoundary";
    }
    return "?";
}

Quadrant quadrant_of(double arousal, double valence, double midpoint) {
    if (arousal == midpoint || valence == midpoint) return Quadrant::OnBoundary;
    const bool high = arousal > midpoint;
    const bool positive = valence > midpoint;
    if (high) return positive ? Quadrant::HighArousalPositive : Quadrant::HighArousalNegative;
    return positive ? Quadrant::LowArousalPositive : Quadrant::LowArousalNegative;
}

std::map<StimulusLabel, Quadrant> quadrants(const std::vector<EmotionSummary>& summary, double midpoint) {
    std::map<StimulusLabel, Quadrant> out;
    for (const auto& s : summary) out[s.label] = quadrant_of(s.arousal_mean, s.valence_mean, midpoint);
    return out;
}

} // namespace hapticforge
