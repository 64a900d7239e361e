#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "hapticforge/pattern.hpp"
#include "hapticforge/records.hpp"
#include "hapticforge/stats.hpp"

namespace hapticforge {

inline constexpr double kEmotionChance = 0.1;
inline constexpr double kGestureChance = 1.0 / 6.0;
/// Prior system's emotion decoding accuracy used as a comparison baseline.
inline constexpr double kBaselineEmotionAccuracy = 0.375;
inline constexpr double kCircumplexMidpoint = 5.5;

double chance_level(StimulusKind kind);

/// Records across participants; each (participant, phase, stimulus) at most once.
class ResponseDataset {
public:
    ResponseDataset() = default;
    /// Throws Error("DuplicateRecord") or the record's own check() error.
    explicit ResponseDataset(std::vector<ResponseRecord> records);

    void add(ResponseRecord record);
    const std::vector<ResponseRecord>& records() const { return records_; }
    std::set<std::string> participants() const;
    std::vector<ResponseRecord> of_kind(StimulusKind kind) const;

    /// Reads a `.jsonl` or `.csv` file, or every such file below a directory.
    static ResponseDataset load(const std::filesystem::path& path);

private:
    std::vector<ResponseRecord> records_;
    std::set<std::tuple<std::string, StimulusKind, StimulusLabel>> keys_;
};

struct ConfusionMatrix {
    StimulusKind kind = StimulusKind::Emotion;
    std::vector<StimulusLabel> labels;
    /// rows = true label, columns = chosen label
    std::vector<std::vector<int>> counts;

    std::size_t index_of(StimulusLabel label) const;
    int at(StimulusLabel truth, StimulusLabel chosen) const;
    int row_sum(std::size_t row) const;
    int total() const;
};

/// Throws Error("EmptyDataset").
ConfusionMatrix confusion_matrix(const ResponseDataset& dataset, StimulusKind kind);

/// Unrounded percentages.
std::map<StimulusLabel, double> per_class_accuracy_exact(const ConfusionMatrix& matrix);
/// Percentages rounded to 1 decimal.
std::map<StimulusLabel, double> per_class_accuracy(const ConfusionMatrix& matrix);
/// Unweighted mean of the unrounded per-class accuracies, 1 decimal.
double mean_accuracy(const ConfusionMatrix& matrix);

/// One-sided per-label tests of the binary correctness vectors. Zero-variance
/// vectors come back with `degenerate` set and p = 0 or 1.
std::map<StimulusLabel, TTestResult> per_class_chance_tests(const ResponseDataset& dataset, StimulusKind kind,
                                                           double chance, Alternative alt = Alternative::Greater);

/// Test of per-participant mean accuracies. Throws Error("IncompleteDataset")
/// unless every participant answered every stimulus of `kind`.
TTestResult overall_chance_test(const ResponseDataset& dataset, StimulusKind kind, double chance,
                                Alternative alt = Alternative::Greater);

struct EmotionSummary {
    StimulusLabel label;
    double arousal_mean = 0.0;
    double arousal_sd = 0.0;
    double valence_mean = 0.0;
    double valence_sd = 0.0;
    double accuracy_pct = 0.0;
    double p_vs_chance = 1.0;
    bool degenerate = false;
};

/// Per-emotion rating mean and sample sd plus accuracy, all rounded to 1 decimal.
/// Throws Error("EmptyDataset").
std::vector<EmotionSummary> valence_arousal_summary(const ResponseDataset& dataset);

enum class Quadrant { HighArousalPositive, HighArousalNegative, LowArousalPositive, LowArousalNegative, OnBoundary };

std::string_view to_string(Quadrant q);
Quadrant quadrant_of(double arousal, double valence, double midpoint = kCircumplexMidpoint);
std::map<StimulusLabel, Quadrant> quadrants(const std::vector<EmotionSummary>& summary,
                                            double midpoint = kCircumplexMidpoint);

} // namespace hapticforge
