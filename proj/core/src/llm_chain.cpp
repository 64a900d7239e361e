#include "hapticforge/generators.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace hapticforge {

namespace {

constexpr std::size_t kMaxQuotedViolations = 12;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

PromptLibrary::Vars base_vars(StimulusLabel label, double duration_s, double rate) {
    return {
        {"label", std::string(label.name())},
        {"kind", std::string(to_string(label.kind()))},
        {"duration_s", number(duration_s)},
        {"sample_rate_hz", number(rate)},
        {"frame_count", std::to_string(static_cast<long long>(std::llround(duration_s * rate)))},
        {"frame_step_s", number(1.0 / rate)},
        {"grid",
         "a 5x5 grid of vibration motors on the upper arm; rows 0-4 run from the shoulder end (row 0) "
         "to the elbow end, columns 0-4 run across the arm; motor m<row><col>"},
        {"csv_header", csv_header()},
    };
}

std::string describe(const ValidationReport& report) {
    std::ostringstream out;
    out << report.violations.size() << " violation(s):";
    std::size_t shown = 0;
    for (const auto& v : report.violations) {
        if (shown++ == kMaxQuotedViolations) {
            out << "\n- ...";
            break;
        }
        char magnitude[32];
        std::snprintf(magnitude, sizeof magnitude, "%.4f", v.magnitude);
        out << "\n- " << to_string(v.rule) << " at frame " << v.frame_index << " channel "
            << channel_name(v.channel) << " (magnitude " << magnitude << ")";
    }
    return out.str();
}

} // namespace

std::string_view to_string(AttemptOutcome outcome) {
    switch (outcome) {
    case AttemptOutcome::Accepted: return "Accepted";
    case AttemptOutcome::ParseFailed: return "ParseFailed";
    case AttemptOutcome::ValidationFailed: return "ValidationFailed";
    }
    return "?";
}

ExhaustedRepairs::ExhaustedRepairs(std::vector<GenerationAttempt> trail)
    : Error("ExhaustedRepairs", "no acceptable pattern after " + std::to_string(trail.size()) + " attempt(s)"),
      trail_(std::move(trail)) {}

std::string extract_csv_block(std::string_view response) {
    const auto open = response.find("```");
    if (open == std::string_view::npos) return trim(response);
    const auto body = response.find('\n', open);
    if (body == std::string_view::npos) return {};
    const auto close = response.find("```", body + 1);
    auto block = response.substr(body + 1, close == std::string_view::npos ? std::string_view::npos : close - body - 1);
    std::string out = trim(block);
    out += '\n';
    return out;
}

FeatureAnalysis analyze_label(StimulusLabel label, LanguageModelClient& llm, const CompletionOptions& options,
                              const PromptLibrary& prompts) {
    const auto vars = base_vars(label, kStimulusDurationS, kCanonicalRateHz);
    std::vector<ChatMessage> messages{
        {"system", prompts.render("system", vars)},
        {"user", prompts.render("analyze", vars)},
    };
    std::string narrative = trim(llm.complete(messages, options));
    if (narrative.empty()) throw Error("EmptyResponse", "model returned an empty analysis");
    FeatureAnalysis analysis{label, narrative, extract_traits(narrative)};
    return analysis;
}

GenerationResult generate_llm(const GenerationRequest& request, const FeatureAnalysis& analysis,
                              LanguageModelClient& llm, const PromptLibrary& prompts) {
    if (!(analysis.label == request.label)) {
        throw Error("LabelMismatch", "analysis label differs from the requested label");
    }
    request.policy.check();
    if (request.max_repair_attempts < 0) throw Error("InvalidRequest", "max_repair_attempts must be >= 0");

    auto vars = base_vars(request.label, request.duration_s, request.sample_rate_hz);
    vars["analysis"] = analysis.narrative;
    vars["max_step_delta"] = number(request.policy.max_step_delta);
    vars["min_hold_frames"] = std::to_string(request.policy.min_hold_frames);
    vars["hold_epsilon"] = number(request.policy.hold_epsilon);

    const auto expected_frames = static_cast<std::size_t>(std::llround(request.duration_s * request.sample_rate_hz));
    const CompletionOptions options{request.model_id, request.temperature};
    std::vector<ChatMessage> messages{
        {"system", prompts.render("system", vars)},
        {"user", prompts.render("generate", vars)},
    };
    std::vector<GenerationAttempt> trail;

    for (int attempt = 0; attempt <= request.max_repair_attempts; ++attempt) {
        GenerationAttempt record;
        record.attempt_index = attempt;
        record.raw_response = llm.complete(messages, options);

        try {
            auto pattern = parse_csv(extract_csv_block(record.raw_response)).with_label(request.label);
            record.parsed = pattern;
            record.report = validate(pattern, request.policy);
            if (pattern.frame_count() != expected_frames ||
                std::fabs(pattern.sample_rate_hz() - request.sample_rate_hz) > 1e-9) {
                record.outcome = AttemptOutcome::ValidationFailed;
                record.failure = "expected " + std::to_string(expected_frames) + " rows at " +
                                 number(1.0 / request.sample_rate_hz) + " s spacing, got " +
                                 std::to_string(pattern.frame_count()) + " rows at " +
                                 number(1.0 / pattern.sample_rate_hz()) + " s spacing";
                if (!record.report->passed()) record.failure += "; " + describe(*record.report);
            } else if (!record.report->passed()) {
                record.outcome = AttemptOutcome::ValidationFailed;
                record.failure = describe(*record.report);
            } else {
                record.outcome = AttemptOutcome::Accepted;
            }
        } catch (const CsvError& e) {
            // Well-formed numbers outside [0,1] are a bounds failure, not a format failure.
            record.outcome =
                e.code() == "OutOfRangeValue" ? AttemptOutcome::ValidationFailed : AttemptOutcome::ParseFailed;
            record.failure = e.code() + ": " + e.what();
        }

        if (record.outcome == AttemptOutcome::Accepted) {
            auto meta = record.parsed->meta();
            meta["generator"] = "llm";
            meta["label"] = std::string(request.label.name());
            meta["model_id"] = request.model_id;
            meta["temperature"] = number(request.temperature);
            meta["attempts"] = std::to_string(attempt + 1);
            meta["prompt_version"] = prompts.version();
            HapticPattern accepted = record.parsed->with_meta(std::move(meta));
            trail.push_back(std::move(record));
            return GenerationResult{std::move(accepted), std::move(trail)};
        }

        messages.push_back({"assistant", record.raw_response});
        auto repair_vars = vars;
        repair_vars["failure"] = record.failure;
        messages.push_back({"user", prompts.render("repair", repair_vars)});
        trail.push_back(std::move(record));
    }
    throw ExhaustedRepairs(std::move(trail));
}

} // namespace hapticforge
