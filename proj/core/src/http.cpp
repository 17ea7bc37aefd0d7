#include "esc/http.hpp"

#include <httplib.h>

#include "esc/error.hpp"

namespace esc::gateway {

using nlohmann::json;

struct HttpServer::Impl {
    ChatService* service;
    httplib::Server server;
};

namespace {

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const NotFound& e) {
        send(res, 404, {{"error", e.what()}});
    } catch (const InvalidArgument& e) {
        send(res, 400, {{"error", e.what()}});
    } catch (const ModelNotLoaded& e) {
        send(res, 503, {{"error", e.what()}});
    } catch (const json::exception& e) {
        send(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
    } catch (const std::exception& e) {
        send(res, 500, {{"error", e.what()}});
    }
}

std::string required_string(const json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || !body.at(key).is_string())
        throw InvalidArgument(std::string("request body needs a string field '") + key + "'");
    return body.at(key).get<std::string>();
}

} // namespace

HttpServer::HttpServer(ChatService& service) : impl_(std::make_unique<Impl>()) {
    impl_->service = &service;
    auto& srv = impl_->server;
    ChatService* svc = &service;

    srv.Post("/sessions", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto id = svc->create_session(required_string(json::parse(req.body), "situation"));
            send(res, 201, svc->get(id).to_json());
        });
    });
    srv.Post(R"(/sessions/([^/]+)/messages)", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto id = req.matches[1].str();
            const auto text = required_string(json::parse(req.body), "text");
            send(res, 200, svc->chat(id, text).to_json());
        });
    });
    srv.Get(R"(/sessions/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send(res, 200, svc->get(req.matches[1].str()).to_json()); });
    });
    srv.Get("/healthz", [svc](const httplib::Request&, httplib::Response& res) {
        send(res, 200, {{"status", "ok"}, {"model_loaded", svc->model_loaded()}});
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& srv = impl_->server;
    const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

} // namespace esc::gateway
