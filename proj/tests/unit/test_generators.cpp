#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "hapticforge/data_dir.hpp"
#include "hapticforge/generators.hpp"
#include "hapticforge/llm_client.hpp"
#include "hapticforge/prompts.hpp"
#include "test_support.hpp"

using namespace hapticforge;

namespace {

std::filesystem::path llm_fixture(const std::string& name) { return data_dir() / "fixtures" / "llm" / name; }

std::string fenced(const HapticPattern& p) { return "```csv\n" + serialize_csv(p) + "```\n"; }

// Rising edges from zero, counting a nonzero first frame as an onset.
int onsets(const HapticPattern& p) {
    int count = 0;
    for (std::size_t i = 0; i < p.frame_count(); ++i) {
        bool rise = false;
        for (int c = 0; c < 25; ++c) {
            const double prev = i == 0 ? 0.0 : p.frame(i - 1)[c];
            if (prev == 0.0 && p.frame(i)[c] > 0.0) rise = true;
        }
        count += rise ? 1 : 0;
    }
    return count;
}

FeatureAnalysis analysis_for(const std::string& label, const std::string& fixture) {
    auto mock = MockChatClient::from_directory(llm_fixture(fixture));
    return analyze_label(StimulusLabel::parse(label), mock);
}

} // namespace

TEST_CASE("trait extraction: lexicon, structured section, defaults") {
    auto t = extract_traits("A strong, sharp pulse that sweeps back and forth across the whole grid.");
    CHECK(t.intensity_level == IntensityLevel::High);
    CHECK(t.spatial_motion == SpatialMotion::Sweep);
    CHECK(t.contact_extent == ContactExtent::Large);
    CHECK_FALSE(t.intensity_defaulted);

    t = extract_traits("Nothing useful here.\n\nTRAITS:\nintensity_level: low\nrhythm_period_s: 0.5\nspatial_motion: expand\n"
                       "contact_extent: small\n");
    CHECK(t.intensity_level == IntensityLevel::Low);
    REQUIRE(t.rhythm_period_s.has_value());
    CHECK(*t.rhythm_period_s == 0.5);
    CHECK(t.spatial_motion == SpatialMotion::Expand);
    CHECK(t.contact_extent == ContactExtent::Small);

    t = extract_traits("It is hard to say anything about this.");
    CHECK(t.all_defaulted());

    // tie between two motion words counts as silent
    t = extract_traits("It could sweep or it could stay static.");
    CHECK(t.motion_defaulted);
}

TEST_CASE("analyze_label with canned rub analysis") {
    const auto a = analysis_for("rub", "rub");
    CHECK_FALSE(a.narrative.empty());
    CHECK(a.traits.spatial_motion == SpatialMotion::Sweep);
    CHECK_FALSE(a.traits.motion_defaulted);

    MockChatClient empty({""});
    CHECK_THROWS_WITH_AS(analyze_label(StimulusLabel::parse("rub"), empty), doctest::Contains("empty"), Error);
    MockChatClient silent({"I have nothing specific to add."});
    CHECK(analyze_label(StimulusLabel::parse("pat"), silent).traits.all_defaulted());
    MockChatClient none({});
    try {
        analyze_label(StimulusLabel::parse("pat"), none);
        FAIL("expected LlmUnreachable");
    } catch (const Error& e) {
        CHECK(e.code() == "LlmUnreachable");
    }
}

TEST_CASE("traits_to_params table") {
    FeatureAnalysis a{StimulusLabel::parse("rub")};
    a.traits.intensity_level = IntensityLevel::High;
    a.traits.rhythm_period_s = 0.5;
    a.traits.spatial_motion = SpatialMotion::Sweep;
    a.traits.contact_extent = ContactExtent::Large;
    auto p = traits_to_params(a);
    CHECK(p.base_intensity == 0.9);
    CHECK(p.pulse_period_s == 0.5);
    CHECK(std::holds_alternative<ColumnSweep>(p.trajectory));

    FeatureAnalysis silent{StimulusLabel::parse("pat")};
    silent.traits.intensity_defaulted = silent.traits.rhythm_defaulted = true;
    silent.traits.motion_defaulted = silent.traits.extent_defaulted = true;
    const auto g = traits_to_params(silent);
    const auto generic = generic_params();
    CHECK(g.base_intensity == generic.base_intensity);
    CHECK(g.pulse_period_s == generic.pulse_period_s);
    CHECK(g.contact_radius == generic.contact_radius);
}

TEST_CASE("traits_to_params is total over the trait product") {
    int combos = 0;
    const std::vector<std::optional<double>> rhythms{std::nullopt, 0.05, 0.2, 0.5, 1.0, 3.3, 10.0, 25.0};
    for (auto i : {IntensityLevel::Low, IntensityLevel::Medium, IntensityLevel::High}) {
        for (const auto& r : rhythms) {
            for (auto m : {SpatialMotion::Static, SpatialMotion::Sweep, SpatialMotion::Expand, SpatialMotion::Random}) {
                for (auto e : {ContactExtent::Small, ContactExtent::Medium, ContactExtent::Large}) {
                    FeatureAnalysis a{StimulusLabel::parse("hold")};
                    a.traits = {i, r, m, e};
                    const auto p = traits_to_params(a);
                    CHECK_NOTHROW(p.check());
                    CHECK(p.attack_s + p.decay_s <= p.pulse_period_s + 1e-12);
                    const auto pattern = generate_procedural(a.label, p, 10.0, 0);
                    CHECK(validate(pattern).passed());
                    ++combos;
                }
            }
        }
    }
    CHECK(combos == 3 * 8 * 4 * 3);
}

TEST_CASE("procedural: all labels, determinism, meta") {
    for (auto label : all_labels()) {
        const auto p = generate_procedural(label, std::nullopt, 10.0, 0);
        CHECK(p.duration_s() == 10.0);
        CHECK(p.label() == label);
        CHECK(validate(p).passed());
        CHECK(p.meta().at("generator") == "procedural");
        CHECK(serialize_csv(p) == serialize_csv(generate_procedural(label, std::nullopt, 10.0, 0)));
    }
    const auto hold = StimulusLabel::parse("hold");
    for (double rate : {5.0, 20.0, 50.0}) {
        const auto p = generate_procedural(hold, std::nullopt, rate, 3);
        CHECK(p.duration_s() == doctest::Approx(10.0));
        CHECK(validate(p).passed());
    }
}

TEST_CASE("procedural jitter depends on the seed only") {
    TemplateParams p = default_params(StimulusLabel::parse("tickle"));
    p.jitter = 0.1;
    const auto label = StimulusLabel::parse("tickle");
    const auto a = serialize_csv(generate_procedural(label, p, 10.0, 1));
    CHECK(a == serialize_csv(generate_procedural(label, p, 10.0, 1)));
    CHECK(a != serialize_csv(generate_procedural(label, p, 10.0, 2)));
}

TEST_CASE("rub sweeps across the columns") {
    const auto p = generate_procedural(StimulusLabel::parse("rub"), std::nullopt, 10.0, 0);
    std::vector<double> cols;
    for (const auto& f : p.frames()) {
        double r = 0, c = 0;
        if (hftest::brute_centroid(f, r, c)) cols.push_back(c);
    }
    REQUIRE(cols.size() > 50);
    // direction changes only at the grid edges
    int reversals = 0;
    int dir = 0;
    for (std::size_t i = 1; i < cols.size(); ++i) {
        const double d = cols[i] - cols[i - 1];
        if (std::fabs(d) < 1e-9) continue;
        const int nd = d > 0 ? 1 : -1;
        if (dir != 0 && nd != dir) {
            ++reversals;
            CHECK((cols[i - 1] >= 3.0 || cols[i - 1] <= 1.0));
        }
        dir = nd;
    }
    CHECK(reversals >= 2);
    CHECK(*std::min_element(cols.begin(), cols.end()) <= 1.0);
    CHECK(*std::max_element(cols.begin(), cols.end()) >= 3.0);
}

TEST_CASE("tap pulses once per second") {
    const auto p = generate_procedural(StimulusLabel::parse("tap"), std::nullopt, 10.0, 0);
    CHECK(default_params(StimulusLabel::parse("tap")).pulse_period_s == 1.0);
    CHECK(onsets(p) == 10);
}

TEST_CASE("condition_series satisfies the policy") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    SmoothnessPolicy policy;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(100);
        for (auto& v : s) v = u(rng);
        const auto out = condition_series(s, policy);
        REQUIRE(out.size() == s.size());
        for (std::size_t i = 1; i < out.size(); ++i) CHECK(std::fabs(out[i] - out[i - 1]) <= policy.max_step_delta + 1e-12);
        CHECK(short_extrema(out, policy).empty());
        for (double v : out) CHECK((v >= 0 && v <= 1));
    }
}

TEST_CASE("prompts render and reject missing keys") {
    const auto& lib = PromptLibrary::shipped();
    CHECK_FALSE(lib.version().empty());
    const auto text = lib.render("analyze", {{"kind", "gesture"}, {"label", "rub"}, {"duration_s", "10"}});
    CHECK(text.find("\"rub\"") != std::string::npos);
    CHECK(text.find("{{") == std::string::npos);
    CHECK_THROWS_AS(lib.render("analyze", {{"label", "rub"}}), Error);
}

TEST_CASE("extract_csv_block") {
    CHECK(extract_csv_block("hi\n```csv\na,b\n```\nbye") == "a,b\n");
    CHECK(extract_csv_block("```\nx\n```") == "x\n");
    CHECK(extract_csv_block("plain") == "plain");
}

TEST_CASE("llm chain: happy path") {
    auto mock = MockChatClient::from_directory(llm_fixture("rub"));
    const auto analysis = analyze_label(StimulusLabel::parse("rub"), mock);
    const auto result = generate_llm(GenerationRequest{StimulusLabel::parse("rub")}, analysis, mock);
    REQUIRE(result.trail.size() == 1);
    CHECK(result.trail[0].outcome == AttemptOutcome::Accepted);
    CHECK(result.trail[0].attempt_index == 0);
    CHECK(result.pattern.frame_count() == 100);
    CHECK(result.pattern.label() == StimulusLabel::parse("rub"));
    CHECK(result.pattern.meta().at("model_id") == "gpt-4o");
    CHECK(result.pattern.meta().at("attempts") == "1");
    CHECK(result.pattern.meta().count("temperature") == 1);
    CHECK(mock.call_count() == 2);
    // the generation prompt carries the analysis and the CSV contract
    const auto req = mock.requests().back();
    const auto& user = req.back().content;
    CHECK(user.find(csv_header()) != std::string::npos);
    CHECK(user.find("sweeps") != std::string::npos);
}

TEST_CASE("llm chain: repair path") {
    auto mock = MockChatClient::from_directory(llm_fixture("rub-repair"));
    const auto analysis = analyze_label(StimulusLabel::parse("rub"), mock);
    const auto result = generate_llm(GenerationRequest{StimulusLabel::parse("rub")}, analysis, mock);
    REQUIRE(result.trail.size() == 2);
    CHECK(result.trail[0].outcome == AttemptOutcome::ValidationFailed);
    CHECK(result.trail[1].outcome == AttemptOutcome::Accepted);
    CHECK(result.pattern.meta().at("attempts") == "2");
    // repair prompt quotes the failure and keeps the conversation
    const auto req = mock.requests().back();
    REQUIRE(req.size() >= 4);
    CHECK(req[req.size() - 2].role == "assistant");
    CHECK(req.back().content.find("OutOfRangeValue") != std::string::npos);
}

TEST_CASE("llm chain: step violation and wrong length are validation failures") {
    const auto label = StimulusLabel::parse("pat");
    const auto good = generate_procedural(label, std::nullopt, 10.0, 0);
    std::vector<Frame> frames = good.frames();
    frames[50][GridIndex{0, 0}] = 1.0;
    frames[51][GridIndex{0, 0}] = 1.0;
    frames[52][GridIndex{0, 0}] = 1.0;
    const HapticPattern stepped(10.0, frames);
    const HapticPattern short_one(10.0, std::vector<Frame>(good.frames().begin(), good.frames().begin() + 60));
    MockChatClient mock({fenced(stepped), fenced(short_one), fenced(good)});
    FeatureAnalysis analysis{label, "gentle", {}};
    const auto result = generate_llm(GenerationRequest{label}, analysis, mock);
    REQUIRE(result.trail.size() == 3);
    CHECK(result.trail[0].outcome == AttemptOutcome::ValidationFailed);
    CHECK(result.trail[0].failure.find("Step") != std::string::npos);
    CHECK(result.trail[1].outcome == AttemptOutcome::ValidationFailed);
    CHECK(result.trail[2].outcome == AttemptOutcome::Accepted);
}

TEST_CASE("llm chain: exhaustion") {
    auto mock = MockChatClient::from_directory(llm_fixture("rub-exhausted"));
    const auto analysis = analyze_label(StimulusLabel::parse("rub"), mock);
    GenerationRequest request{StimulusLabel::parse("rub")};
    try {
        generate_llm(request, analysis, mock);
        FAIL("expected ExhaustedRepairs");
    } catch (const ExhaustedRepairs& e) {
        CHECK(e.code() == "ExhaustedRepairs");
        REQUIRE(e.trail().size() == static_cast<std::size_t>(request.max_repair_attempts + 1));
        for (const auto& a : e.trail()) CHECK(a.outcome == AttemptOutcome::ParseFailed);
    }
    CHECK(mock.call_count() == 1 + static_cast<std::size_t>(request.max_repair_attempts) + 1);
}

TEST_CASE("chat request/response json") {
    const auto body = build_chat_request({{"system", "s"}, {"user", "u"}}, {"m1", 0.25});
    const auto j = nlohmann::json::parse(body);
    CHECK(j["model"] == "m1");
    CHECK(j["temperature"] == 0.25);
    CHECK(j["messages"].size() == 2);
    CHECK(j["messages"][1]["content"] == "u");
    CHECK(parse_chat_response(R"({"choices":[{"message":{"role":"assistant","content":"hello"}}]})") == "hello");
    CHECK_THROWS_AS(parse_chat_response("{}"), Error);
    CHECK_THROWS_AS(parse_chat_response("not json"), Error);
}

TEST_CASE("http chat client against a local endpoint") {
    httplib::Server server;
    std::string auth, model;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        model = nlohmann::json::parse(req.body)["model"];
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"canned"}}]})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("HF_TEST_TOKEN", "secret-token", 1);
    HttpClientConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.token_env = "HF_TEST_TOKEN";
    HttpChatClient client(config);
    CHECK(client.complete({{"user", "hi"}}, {"model-x", 0.1}) == "canned");
    CHECK(auth == "Bearer secret-token");
    CHECK(model == "model-x");
    server.stop();
    t.join();

    HttpClientConfig dead = config;
    dead.timeout_s = 2;
    HttpChatClient unreachable(dead);
    try {
        unreachable.complete({{"user", "hi"}}, {});
        FAIL("expected LlmUnreachable");
    } catch (const Error& e) {
        CHECK(e.code() == "LlmUnreachable");
    }
}
