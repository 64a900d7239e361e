#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "hapticforge/analysis.hpp"
#include "hapticforge/data_dir.hpp"
#include "hapticforge/generators.hpp"
#include "hapticforge/llm_client.hpp"
#include "hapticforge/playback.hpp"
#include "hapticforge/report.hpp"
#include "hapticforge/service_config.hpp"
#include "hapticforge/study.hpp"
#include "hapticforge/study_server.hpp"

namespace hapticforge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Failure {
    std::string code;
    std::string message;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    out << text;
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
    std::string label;
    std::string mode = "procedural";
    std::uint64_t seed = 0;
    std::string out;
    double rate = kCanonicalRateHz;
    std::string llm_mock;
    std::string llm_url = HttpClientConfig{}.base_url;
    std::string model = CompletionOptions{}.model_id;
    double temperature = CompletionOptions{}.temperature;
    int max_repairs = 3;
    std::string trail;
};

std::unique_ptr<LanguageModelClient> make_llm(const GenerateArgs& a) {
    if (!a.llm_mock.empty()) return std::make_unique<MockChatClient>(MockChatClient::responses_from_directory(a.llm_mock));
    HttpClientConfig config;
    config.base_url = a.llm_url;
    return std::make_unique<HttpChatClient>(config);
}

json trail_json(const std::vector<GenerationAttempt>& trail) {
    json arr = json::array();
    for (const auto& t : trail) {
        arr.push_back({{"attempt", t.attempt_index},
                       {"outcome", std::string(to_string(t.outcome))},
                       {"failure", t.failure},
                       {"violations", t.report ? t.report->violations.size() : 0}});
    }
    return arr;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    const auto label = StimulusLabel::parse(a.label);
    std::optional<HapticPattern> pattern;
    if (a.mode == "procedural") {
        pattern = generate_procedural(label, std::nullopt, a.rate, a.seed);
    } else {
        auto llm = make_llm(a);
        CompletionOptions options;
        options.model_id = a.model;
        options.temperature = a.temperature;
        const auto analysis = analyze_label(label, *llm, options);
        if (a.mode == "guided") {
            pattern = generate_procedural(label, traits_to_params(analysis), a.rate, a.seed);
            auto meta = pattern->meta();
            meta["generator"] = "guided";
            meta["model_id"] = a.model;
            pattern = pattern->with_meta(std::move(meta));
        } else {
            GenerationRequest request{label};
            request.sample_rate_hz = a.rate;
            request.max_repair_attempts = a.max_repairs;
            request.model_id = a.model;
            request.temperature = a.temperature;
            try {
                auto result = generate_llm(request, analysis, *llm);
                if (!a.trail.empty()) write_text(a.trail, trail_json(result.trail).dump(2) + "\n");
                pattern = std::move(result.pattern);
            } catch (const ExhaustedRepairs& e) {
                if (!a.trail.empty()) write_text(a.trail, trail_json(e.trail()).dump(2) + "\n");
                throw;
            }
        }
    }
    const auto csv = serialize_csv(*pattern);
    if (a.out.empty()) {
        out << csv;
    } else {
        write_text(a.out, csv);
        err << "wrote " << a.out << " (" << pattern->frame_count() << " frames)\n";
    }
    return 0;
}

// ---- validate ---------------------------------------------------------------

SmoothnessPolicy load_policy(const std::string& path) {
    SmoothnessPolicy p;
    if (path.empty()) return p;
    const json j = json::parse(read_text(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("InvalidPolicy", "policy file must be a JSON object");
    p.max_step_delta = j.value("max_step_delta", p.max_step_delta);
    p.min_hold_frames = j.value("min_hold_frames", p.min_hold_frames);
    p.hold_epsilon = j.value("hold_epsilon", p.hold_epsilon);
    p.check();
    return p;
}

int cmd_validate(const std::string& file, const std::string& policy_path, const std::string& label, std::ostream& out) {
    auto pattern = load_pattern(file);
    if (!label.empty()) pattern = pattern.with_label(StimulusLabel::parse(label));
    const auto report = validate(pattern, load_policy(policy_path));
    if (report.passed()) {
        out << "ok\n";
        return 0;
    }
    for (const auto& v : report.violations) {
        out << to_string(v.rule) << " frame=" << v.frame_index << " channel=" << channel_name(v.channel)
            << " magnitude=" << fixed(v.magnitude, 4) << '\n';
    }
    return 1;
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const std::string& file, double pwm_hz, int steps, const std::string& log_path, std::ostream& out) {
    const auto pattern = load_pattern(file);
    PwmConfig config;
    config.pwm_frequency_hz = pwm_hz;
    config.quantization_steps = steps;
    config.frame_rate_hz = pattern.sample_rate_hz();
    const auto schedule = to_pwm_schedule(pattern, config);
    SimulatedClock clock;
    SimulatedSink sink(&clock);
    const auto log = play(schedule, sink, clock);
    if (!log_path.empty()) write_text(log_path, log.to_csv());
    out << "edges=" << log.entries.size() << " duration_s=" << fixed(schedule.total_duration_s(), 6)
        << " all_off=" << (sink.all_off() ? "true" : "false") << '\n';
    return 0;
}

// ---- serve ------------------------------------------------------------------

class ConfiguredPlayer final : public StimulusPlayer {
public:
    ConfiguredPlayer(const ServiceConfig& config, fs::path log_dir) : log_dir_(std::move(log_dir)) {
        clock_ = config.clock == "simulated" ? std::shared_ptr<Clock>(std::make_shared<SimulatedClock>())
                                             : std::shared_ptr<Clock>(std::make_shared<RealtimeClock>());
        log_only_ = config.sink == "log-only";
        std::shared_ptr<MotorSink> sink = log_only_ ? std::shared_ptr<MotorSink>(std::make_shared<NullSink>())
                                                    : std::shared_ptr<MotorSink>(std::make_shared<SimulatedSink>(clock_.get()));
        PwmConfig pwm;
        pwm.pwm_frequency_hz = config.pwm_frequency_hz;
        player_ = std::make_unique<SchedulePlayer>(sink, clock_, pwm);
    }

    void play(const HapticPattern& pattern, std::stop_token stop) override {
        const auto seq = ++count_;
        const std::string label = pattern.label() ? std::string(pattern.label()->name()) : "unlabelled";
        if (log_only_) std::cerr << "playback " << seq << ": " << label << " " << pattern.frame_count() << " frames\n";
        player_->play(pattern, stop);
        if (!log_only_) {
            char name[48];
            std::snprintf(name, sizeof name, "%06llu-", static_cast<unsigned long long>(seq));
            write_text(log_dir_ / (name + label + ".csv"), player_->last_log().to_csv());
        }
    }

private:
    fs::path log_dir_;
    std::shared_ptr<Clock> clock_;
    std::unique_ptr<SchedulePlayer> player_;
    bool log_only_ = false;
    std::atomic<std::uint64_t> count_{0};
};

int cmd_serve(const std::string& config_path, const std::vector<std::string>& overrides, std::ostream& out) {
    ServiceConfig config = config_path.empty() ? ServiceConfig{} : load_service_config(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("ConfigInvalid", "override '" + kv + "' must be key=value");
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.check();

    StudyConfig study = config.stimulus_dir.empty() ? StudyConfig::procedural() : StudyConfig::from_directory(config.stimulus_dir);
    auto player = std::make_shared<ConfiguredPlayer>(config, config.data_dir / "playback");
    ServiceOptions options;
    options.data_dir = config.data_dir;
    options.async_playback = config.async_playback;

    // Block termination signals before any thread starts so sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    StudyService service(std::move(study), player, options);
    ServerOptions server_options;
    server_options.host = config.host();
    server_options.port = config.port();
    server_options.ui_dir = config.ui_dir;
    StudyServer server(service, server_options);
    const int port = server.bind();
    out << "listening on " << server_options.host << ":" << port << std::endl;
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.listen();
    // listen() returned without a signal (e.g. socket error): wake the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

// ---- fixtures ---------------------------------------------------------------

struct Checker {
    std::ostream& out;
    int failures = 0;

    void check(bool ok, const std::string& what, const std::string& detail) {
        out << (ok ? "PASS " : "FAIL ") << what << ": " << detail << '\n';
        if (!ok) ++failures;
    }
    void note(const std::string& what, const std::string& detail) { out << "NOTE " << what << ": " << detail << '\n'; }
};

bool p_matches(const std::string& printed, double p, bool upper_bound) {
    if (printed.rfind("<", 0) == 0) return p < std::stod(printed.substr(1));
    const double v = std::stod(printed);
    if (upper_bound) return p <= v;
    const auto dot = printed.find('.');
    const int decimals = dot == std::string::npos ? 0 : static_cast<int>(printed.size() - dot - 1);
    return std::fabs(p - v) <= 0.5 * std::pow(10.0, -decimals) + 1e-12;
}

int cmd_fixtures(const fs::path& dir, std::ostream& out) {
    const auto dataset = ResponseDataset::load(dir / "records.jsonl");
    const json targets = json::parse(read_text(dir / "targets.json"));
    const json reference = json::parse(read_text(dir / "reference.json"));
    Checker c{out};
    c.check(dataset.participants().size() == targets.at("participants").get<std::size_t>(), "participants",
            std::to_string(dataset.participants().size()));

    const auto summary = valence_arousal_summary(dataset);
    for (const auto kind : {StimulusKind::Emotion, StimulusKind::Gesture}) {
        const std::string k(to_string(kind));
        const auto matrix = confusion_matrix(dataset, kind);
        const auto accuracy = per_class_accuracy(matrix);
        const auto tests = per_class_chance_tests(dataset, kind, chance_level(kind));
        const json& tgt = targets.at(k);
        const json& ref = reference.at(k);
        for (auto label : labels_of(kind)) {
            const std::string name(label.name());
            const int correct = matrix.at(label, label);
            const auto& t = tests.at(label);
            const json& lt = tgt.at("labels").at(name);
            const json& lr = ref.at("labels").at(name);
            c.check(correct == lt.at("correct").get<int>(), k + "." + name + ".correct", std::to_string(correct));
            c.check(fixed(accuracy.at(label), 1) == lr.at("accuracy").get<std::string>(), k + "." + name + ".accuracy",
                    fixed(accuracy.at(label), 1));
            c.check(std::fabs(t.p - lt.at("p").get<double>()) < 1e-9, k + "." + name + ".p_recomputed",
                    fixed(t.p, 6) + " vs " + fixed(lt.at("p").get<double>(), 6));
            const auto printed = lr.at("p").get<std::string>();
            const bool matches = p_matches(printed, t.p, lr.value("upper_bound", false));
            if (lr.value("known_conflict", false)) {
                c.note(k + "." + name + ".p_table", "computed " + fixed(t.p, 4) + ", table " + printed +
                                                        (matches ? " (agrees)" : " (irreproducible from the counts)"));
            } else {
                c.check(matches, k + "." + name + ".p_table", fixed(t.p, 4) + " vs " + printed);
            }
            if (kind == StimulusKind::Emotion) {
                for (const auto& s : summary) {
                    if (!(s.label == label)) continue;
                    const auto a = fixed(s.arousal_mean, 1) + "±" + fixed(s.arousal_sd, 1);
                    const auto v = fixed(s.valence_mean, 1) + "±" + fixed(s.valence_sd, 1);
                    c.check(a == lr.at("arousal").get<std::string>(), k + "." + name + ".arousal", a);
                    c.check(v == lr.at("valence").get<std::string>(), k + "." + name + ".valence", v);
                }
            }
        }
        const auto mean = fixed(mean_accuracy(matrix), 1);
        c.check(mean == ref.at("mean_accuracy").get<std::string>(), k + ".mean_accuracy", mean);
        const auto overall = overall_chance_test(dataset, kind, chance_level(kind));
        c.check(std::fabs(overall.t - tgt.at("overall_t").get<double>()) < 1e-9, k + ".overall_t_recomputed",
                fixed(overall.t, 4));
        c.check(overall.p < 0.001, k + ".overall_p", fixed(overall.p, 8));
        c.note(k + ".overall_t_table", "fixture " + fixed(overall.t, 2) + ", table " + fixed(ref.at("overall_t").get<double>(), 2));
    }
    const auto baseline = overall_chance_test(dataset, StimulusKind::Emotion, kBaselineEmotionAccuracy);
    c.check(baseline.t < 0.0 && baseline.p > 0.95, "emotion.baseline", "t=" + fixed(baseline.t, 2) + " p=" + fixed(baseline.p, 3));
    c.check(std::fabs(baseline.t - targets.at("baseline").at("t").get<double>()) < 1e-9, "emotion.baseline_recomputed",
            fixed(baseline.t, 4));
    out << (c.failures == 0 ? "fixtures ok\n" : std::to_string(c.failures) + " fixture checks failed\n");
    return c.failures == 0 ? 0 : 1;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Affective vibrotactile pattern toolkit", "hapticforge"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate a 10 s stimulus pattern");
    generate->add_option("--label", gen.label, "Emotion or gesture label")->required();
    generate->add_option("--mode", gen.mode, "llm | procedural | guided")
        ->check(CLI::IsMember({"llm", "procedural", "guided"}));
    generate->add_option("--seed", gen.seed, "Seed for procedural jitter");
    generate->add_option("--out", gen.out, "Output CSV (stdout when omitted)");
    generate->add_option("--rate", gen.rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
    generate->add_option("--llm-mock", gen.llm_mock, "Directory of canned model responses")->check(CLI::ExistingDirectory);
    generate->add_option("--llm-url", gen.llm_url, "Chat-completion base URL");
    generate->add_option("--model", gen.model, "Model id");
    generate->add_option("--temperature", gen.temperature, "Sampling temperature");
    generate->add_option("--max-repairs", gen.max_repairs, "Repair attempts after the first call")->check(CLI::NonNegativeNumber);
    generate->add_option("--trail", gen.trail, "Write the attempt trail as JSON");

    std::string validate_file, policy_file, validate_label;
    auto* validate_cmd = app.add_subcommand("validate", "Check a pattern against the smoothness policy");
    validate_cmd->add_option("file", validate_file)->required();
    validate_cmd->add_option("--policy", policy_file, "JSON policy file");
    validate_cmd->add_option("--label", validate_label, "Treat as a study stimulus with this label");

    std::string render_file, render_out;
    int stride = 1;
    auto* render = app.add_subcommand("render", "Render frames as SVG");
    render->add_option("file", render_file)->required();
    render->add_option("--stride", stride)->check(CLI::PositiveNumber);
    render->add_option("--out", render_out)->required();

    std::string sim_file, sim_log;
    double pwm_hz = 100.0;
    int steps = 256;
    auto* simulate = app.add_subcommand("simulate", "Play a pattern against the simulated sink");
    simulate->add_option("file", sim_file)->required();
    simulate->add_option("--pwm-hz", pwm_hz)->check(CLI::PositiveNumber);
    simulate->add_option("--steps", steps, "Duty quantization steps")->check(CLI::PositiveNumber);
    simulate->add_option("--log", sim_log, "Playback log CSV");

    std::string serve_config;
    std::vector<std::string> serve_overrides;
    auto* serve = app.add_subcommand("serve", "Run the study service");
    serve->add_option("--config", serve_config, "TOML config file")->check(CLI::ExistingFile);
    serve->add_option("--set", serve_overrides, "Override a config key (key=value)");

    std::string records_dir, report_out;
    auto* analyze = app.add_subcommand("analyze", "Analyse response records");
    analyze->add_option("--records", records_dir)->required()->check(CLI::ExistingPath);
    analyze->add_option("--out", report_out)->required();

    bool verify = false;
    std::string fixture_dir;
    auto* fixtures = app.add_subcommand("fixtures", "Check the shipped regression dataset");
    fixtures->add_flag("--verify", verify)->required();
    fixtures->add_option("--dir", fixture_dir, "Fixture directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen, out, err);
        if (validate_cmd->parsed()) return cmd_validate(validate_file, policy_file, validate_label, out);
        if (render->parsed()) {
            const auto paths = write_frames(load_pattern(render_file), stride, render_out);
            out << paths.size() << " frames written to " << render_out << '\n';
            return 0;
        }
        if (simulate->parsed()) return cmd_simulate(sim_file, pwm_hz, steps, sim_log, out);
        if (serve->parsed()) return cmd_serve(serve_config, serve_overrides, out);
        if (analyze->parsed()) {
            const auto report = build_report(ResponseDataset::load(records_dir));
            write_report(report, report_out);
            out << "report written to " << report_out << '\n';
            return 0;
        }
        if (fixtures->parsed()) {
            return cmd_fixtures(fixture_dir.empty() ? data_dir() / "fixtures" / "study32" : fs::path(fixture_dir), out);
        }
    } catch (const Error& e) {
        err << "error: " << e.code() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: InternalError: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace hapticforge::cli
