#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hapticforge/llm_client.hpp"
#include "hapticforge/pattern.hpp"
#include "hapticforge/prompts.hpp"

namespace hapticforge {

// ---- traits ---------------------------------------------------------------

enum class IntensityLevel { Low, Medium, High };
enum class SpatialMotion { Static, Sweep, Expand, Random };
enum class ContactExtent { Small, Medium, Large };

std::string_view to_string(IntensityLevel v);
std::string_view to_string(SpatialMotion v);
std::string_view to_string(ContactExtent v);

struct ExtractedTraits {
    IntensityLevel intensity_level = IntensityLevel::Medium;
    std::optional<double> rhythm_period_s; // nullopt: continuous, no pulsing
    SpatialMotion spatial_motion = SpatialMotion::Static;
    ContactExtent contact_extent = ContactExtent::Medium;

    // Set when the narrative was silent or ambiguous and the default was used.
    bool intensity_defaulted = false;
    bool rhythm_defaulted = false;
    bool motion_defaulted = false;
    bool extent_defaulted = false;

    bool all_defaulted() const {
        return intensity_defaulted && rhythm_defaulted && motion_defaulted && extent_defaulted;
    }
};

/// Keyword lexicon first; a `TRAITS:` section of `key: value` lines is the
/// fallback for anything the lexicon leaves silent or ambiguous.
ExtractedTraits extract_traits(std::string_view narrative);

struct FeatureAnalysis {
    StimulusLabel label;
    std::string narrative;
    ExtractedTraits traits;
};

// ---- procedural templates ---------------------------------------------------

struct StaticAt {
    GridIndex center{2, 2};
};
struct ColumnSweep {
    double speed_cols_per_s = 2.0;
    bool bidirectional = true;
};
struct RadialPulse {
    GridIndex center{2, 2};
};
struct ScatterWalk {
    std::uint64_t seed = 0;
};
using Trajectory = std::variant<StaticAt, ColumnSweep, RadialPulse, ScatterWalk>;

/// Envelope of one pulse period: linear attack, sustain, linear decay, rest.
/// The slack `pulse_period_s - attack_s - decay_s` is split between sustain
/// (`sustain_fraction` of it) and rest.
struct TemplateParams {
    double base_intensity = 0.6;
    double pulse_period_s = 10.0;
    double attack_s = 1.0;
    double decay_s = 1.0;
    double sustain_fraction = 1.0;
    int contact_radius = 1; // Chebyshev radius of the contact patch, 0..4
    Trajectory trajectory = StaticAt{};
    double jitter = 0.0;

    /// Throws Error("InvalidParams").
    void check() const;
};

/// Default parameters for a label, read from data_dir()/label_params.json.
const TemplateParams& default_params(StimulusLabel label);
/// Version string of the loaded parameter table.
const std::string& label_table_version();

/// Parameters used when an analysis carries no usable traits.
TemplateParams generic_params();

/// Fixed mapping from extracted traits to template parameters.
TemplateParams traits_to_params(const FeatureAnalysis& analysis);

/// Deterministic 10 s pattern for `label`. The result always passes
/// validate() under the default SmoothnessPolicy.
HapticPattern generate_procedural(StimulusLabel label, const std::optional<TemplateParams>& params,
                                  double sample_rate_hz, std::uint64_t seed);

/// Reshapes one channel so it satisfies the policy: slew limiting followed
/// by flat opening/closing so every extremum plateau lasts min_hold_frames.
std::vector<double> condition_series(std::span<const double> series, const SmoothnessPolicy& policy);

// ---- LLM chain ----------------------------------------------------------------

struct GenerationRequest {
    StimulusLabel label;
    double duration_s = kStimulusDurationS;
    double sample_rate_hz = kCanonicalRateHz;
    SmoothnessPolicy policy{};
    int max_repair_attempts = 3;
    std::string model_id = "gpt-4o";
    double temperature = 0.7;
};

enum class AttemptOutcome { Accepted, ParseFailed, ValidationFailed };

std::string_view to_string(AttemptOutcome outcome);

struct GenerationAttempt {
    int attempt_index = 0;
    std::string raw_response;
    std::optional<HapticPattern> parsed;
    std::optional<ValidationReport> report;
    AttemptOutcome outcome = AttemptOutcome::ParseFailed;
    std::string failure; // what the repair prompt quoted; empty when accepted
};

struct GenerationResult {
    HapticPattern pattern;
    std::vector<GenerationAttempt> trail;
};

class ExhaustedRepairs : public Error {
public:
    explicit ExhaustedRepairs(std::vector<GenerationAttempt> trail);
    const std::vector<GenerationAttempt>& trail() const { return trail_; }

private:
    std::vector<GenerationAttempt> trail_;
};

/// Stage one: asks the model how the label feels on the grid.
/// Throws Error("EmptyResponse") or propagates Error("LlmUnreachable").
FeatureAnalysis analyze_label(StimulusLabel label, LanguageModelClient& llm,
                              const CompletionOptions& options = {},
                              const PromptLibrary& prompts = PromptLibrary::shipped());

/// Stage two with repair loop: at most max_repair_attempts + 1 model calls.
GenerationResult generate_llm(const GenerationRequest& request, const FeatureAnalysis& analysis,
                              LanguageModelClient& llm, const PromptLibrary& prompts = PromptLibrary::shipped());

/// Body of the first fenced block (``` or ```csv) in a response, or the
/// whole response when it has none.
std::string extract_csv_block(std::string_view response);

} // namespace hapticforge
