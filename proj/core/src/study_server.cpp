#include "hapticforge/study_server.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace hapticforge {

namespace {

using nlohmann::json;

json labels_json(const std::vector<StimulusLabel>& labels) {
    json arr = json::array();
    for (auto l : labels) arr.push_back(std::string(l.name()));
    return arr;
}

int block_size(PhaseKind kind) {
    if (kind == PhaseKind::EmotionBlock) return static_cast<int>(emotion_labels().size());
    if (kind == PhaseKind::GestureBlock) return static_cast<int>(gesture_labels().size());
    return 0;
}

// Participant-facing view; the stimulus label stays hidden until completion.
json session_view(const StudySession& s) {
    const bool emotion = s.phase.kind == PhaseKind::EmotionBlock;
    const bool gesture = s.phase.kind == PhaseKind::GestureBlock;
    json view = {
        {"session_id", s.session_id},
        {"participant_id", s.participant_id},
        {"phase", std::string(to_string(s.phase.kind))},
        {"index", s.phase.index},
        {"total", block_size(s.phase.kind)},
        {"calibrated", s.calibration.has_value()},
        {"playing", s.playing},
        {"presented", s.presented_current},
        {"can_replay", gesture && s.presented_current && !s.playing},
        {"replay_count", s.replay_count_current},
        {"records", s.records_persisted},
    };
    if (emotion) {
        view["label_options"] = labels_json(emotion_labels());
        view["scale"] = {{"min", kRatingMin}, {"max", kRatingMax}};
    } else if (gesture) {
        view["label_options"] = labels_json(gesture_labels());
        view["scale"] = nullptr;
    } else {
        view["label_options"] = json::array();
        view["scale"] = nullptr;
    }
    if (s.phase.kind == PhaseKind::Completed) {
        view["emotion_order"] = labels_json(s.emotion_order);
        view["gesture_order"] = labels_json(s.gesture_order);
    }
    return view;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message) {
    send_json(res, http_status_for(code), {{"error", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw Error("BadRequest", "request body must be a JSON object");
    return body;
}

std::optional<int> optional_int(const json& body, const char* key) {
    if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
    if (!body.at(key).is_number_integer()) throw Error("ScaleViolation", std::string(key) + " must be an integer");
    return body.at(key).get<int>();
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const json::exception& e) {
            send_error(res, "BadRequest", e.what());
        } catch (const std::exception& e) {
            send_error(res, "InternalError", e.what());
        }
    };
}

} // namespace

int http_status_for(const std::string& code) {
    if (code == "NotFound") return 404;
    if (code == "BadRequest") return 400;
    if (code == "WrongPhase" || code == "AlreadyPlaying" || code == "StillPlaying" || code == "ReplayNotAllowed" ||
        code == "DuplicateActiveSession" || code == "AlreadyPresented" || code == "NotPresented") {
        return 409;
    }
    if (code == "ScaleViolation" || code == "KindMismatch" || code == "UnknownLabel" || code == "BadRecord" ||
        code == "InvalidCalibration" || code == "InvalidParticipant") {
        return 422;
    }
    return 500;
}

struct StudyServer::Impl {
    StudyService& service;
    ServerOptions options;
    httplib::Server server;
    std::thread thread;
    int bound_port = -1;

    Impl(StudyService& s, ServerOptions o) : service(s), options(std::move(o)) {}
};

StudyServer::StudyServer(StudyService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
    auto& server = impl_->server;
    StudyService& svc = impl_->service;

    server.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const auto pid = body.value("participant_id", std::string{});
        std::uint64_t seed = 0;
        if (body.contains("seed")) {
            seed = body.at("seed").get<std::uint64_t>();
        } else {
            seed = std::random_device{}();
            seed = (seed << 32) ^ std::random_device{}();
        }
        send_json(res, 201, session_view(svc.create_session(pid, seed)));
    }));
    server.Post("/sessions/:id/calibration", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        CalibrationResult c;
        c.participant_id = body.value("participant_id", std::string{});
        c.threshold = body.at("threshold").get<double>();
        if (body.contains("trials")) {
            for (const auto& t : body.at("trials")) {
                c.trials.push_back({t.at("level").get<double>(), t.at("detected").get<bool>()});
            }
        }
        send_json(res, 200, session_view(svc.record_calibration(req.path_params.at("id"), c)));
    }));
    server.Post("/sessions/:id/stimulus", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, session_view(svc.request_stimulus(req.path_params.at("id"))));
    }));
    server.Post("/sessions/:id/replay", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, session_view(svc.replay_stimulus(req.path_params.at("id"))));
    }));
    server.Post("/sessions/:id/response", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const auto chosen = StimulusLabel::parse(body.at("chosen_label").get<std::string>());
        send_json(res, 200,
                  session_view(svc.submit_response(req.path_params.at("id"), chosen, optional_int(body, "arousal"),
                                                   optional_int(body, "valence"))));
    }));
    server.Get("/sessions/:id", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, session_view(svc.session(req.path_params.at("id"))));
    }));
    server.Get("/sessions/:id/records", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        json arr = json::array();
        for (const auto& r : svc.records(req.path_params.at("id"))) arr.push_back(json::parse(record_to_json(r)));
        send_json(res, 200, arr);
    }));

    const auto& ui = impl_->options.ui_dir;
    if (!ui.empty() && std::filesystem::is_directory(ui)) server.set_mount_point("/", ui.string());
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind() {
    if (impl_->bound_port >= 0) return impl_->bound_port;
    auto& o = impl_->options;
    int port = -1;
    if (o.port == 0) {
        port = impl_->server.bind_to_any_port(o.host);
    } else if (impl_->server.bind_to_port(o.host, o.port)) {
        port = o.port;
    }
    if (port < 0) throw Error("BindFailed", "cannot listen on " + o.host + ":" + std::to_string(o.port));
    impl_->bound_port = port;
    return port;
}

void StudyServer::listen() {
    bind();
    impl_->server.listen_after_bind();
}

void StudyServer::start() {
    bind();
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void StudyServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int StudyServer::port() const { return impl_->bound_port; }

} // namespace hapticforge
