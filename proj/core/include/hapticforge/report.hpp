#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hapticforge/analysis.hpp"

namespace hapticforge {

/// One SVG document per `stride`-th frame: 5x5 cells, 0 white, 1 black.
/// Throws Error("InvalidStride") for stride < 1.
std::vector<std::string> render_frames(const HapticPattern& pattern, int stride);
/// Writes frame_<index>.svg files and returns their paths.
std::vector<std::filesystem::path> write_frames(const HapticPattern& pattern, int stride,
                                                const std::filesystem::path& dir);

/// `emotion,arousal_mean,arousal_sd,valence_mean,valence_sd,quadrant`
std::string export_circumplex_plot(const std::vector<EmotionSummary>& summary,
                                   double midpoint = kCircumplexMidpoint);

std::string confusion_csv(const ConfusionMatrix& matrix);

struct KindReport {
    ConfusionMatrix matrix;
    std::map<StimulusLabel, double> accuracy;
    double mean_accuracy = 0.0;
    std::map<StimulusLabel, TTestResult> tests;
    std::optional<TTestResult> overall;
    std::string overall_error;
};

struct AnalysisReport {
    std::size_t participants = 0;
    std::optional<KindReport> emotion;
    std::optional<KindReport> gesture;
    std::vector<EmotionSummary> summary;
    std::map<StimulusLabel, Quadrant> quadrants;
    std::optional<TTestResult> baseline;
};

AnalysisReport build_report(const ResponseDataset& dataset);
std::string render_markdown(const AnalysisReport& report);
/// report.md, confusion_<kind>.csv and circumplex.csv.
void write_report(const AnalysisReport& report, const std::filesystem::path& dir);

/// "<0.01" below 0.01, otherwise three decimals.
std::string format_p(double p);

} // namespace hapticforge
