#include <doctest.h>

#include <chrono>
#include <thread>

#include "esc/gateway.hpp"
#include "esc/http.hpp"
#include "fixtures.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace esc;
using namespace esc::gateway;
using nlohmann::json;

namespace {

std::shared_ptr<Engine> make_engine() {
    auto e = std::make_shared<Engine>();
    const auto data = fixtures::conversations();
    e->vocab = std::make_unique<Vocabulary>(pipeline::build_vocabulary(data.conversations, 1, 10000));
    e->detector = std::make_unique<emotion::LexiconDetector>();
    e->graph = std::make_unique<concepts::ConceptGraph>(fixtures::graph());
    auto freq = concepts::build_frequency_table(pipeline::frequency_texts(data.conversations), *e->graph, 2);
    e->pipeline = std::make_unique<pipeline::Pipeline>(*e->vocab, e->detector.get(), e->graph.get(), freq,
                                                       pipeline::Options{});
    e->model = std::make_unique<net::Model>(net::ModelConfig::test_profile(e->vocab->size()), 17);
    e->bank = std::make_unique<membank::MemoryBank>(8, 4, 64);
    e->bank->store(0, RowVector::Random(64));
    e->decode = {1, 12};
    return e;
}

const std::shared_ptr<Engine>& engine() {
    static auto e = make_engine();
    return e;
}

} // namespace

TEST_CASE("sessions") {
    ChatService svc(engine(), std::nullopt, 1);
    const auto a = svc.create_session("I lost my job last week.");
    const auto b = svc.create_session("I lost my job last week.");
    CHECK(a != b);
    CHECK(a.size() == 16);
    CHECK(svc.session_count() == 2);
    CHECK(svc.get(a).situation == "I lost my job last week.");
    CHECK(svc.get(a).turns.empty());
    CHECK_THROWS_AS(svc.create_session("   "), InvalidArgument);
    CHECK_THROWS_AS(svc.get("nope"), NotFound);
    CHECK_THROWS_AS(svc.chat("nope", "hi"), NotFound);
    CHECK_THROWS_AS(svc.chat(a, ""), InvalidArgument);
}

TEST_CASE("a chat turn appends both sides") {
    ChatService svc(engine(), std::nullopt, 2);
    const auto id = svc.create_session("I am stressed about my exam.");
    const auto r = svc.chat(id, "I feel so nervous and worried about the exam.");
    CHECK_FALSE(r.reply.empty());
    CHECK(corpus::StrategyTaxonomy::esconv().find(r.strategy).has_value());
    REQUIRE(r.emotion.has_value());
    CHECK(*r.emotion == engine()->detector->detect("I feel so nervous and worried about the exam.").name());
    CHECK(r.latency_ms >= 0.0);
    CHECK(r.latency_ms < 2000.0);

    const auto s = svc.get(id);
    REQUIRE(s.turns.size() == 2);
    CHECK(s.turns[0].role == "seeker");
    CHECK(s.turns[1].role == "supporter");
    CHECK(s.turns[1].text == r.reply);
    CHECK(s.turns[1].strategy == r.strategy);

    const auto j = r.to_json();
    for (const char* k : {"reply", "strategy", "emotion", "concepts", "latency_ms"}) CHECK(j.contains(k));
}

TEST_CASE("same history gives the same reply, sessions do not mix") {
    ChatService svc(engine(), std::nullopt, 3);
    const auto a = svc.create_session("My friend moved away.");
    const auto b = svc.create_session("My friend moved away.");
    const auto c = svc.create_session("Work is too much.");
    svc.chat(c, "My boss keeps yelling at me.");
    const auto ra = svc.chat(a, "I feel lonely now.");
    const auto rb = svc.chat(b, "I feel lonely now.");
    CHECK(ra.reply == rb.reply);
    CHECK(ra.strategy == rb.strategy);
    CHECK(svc.get(a).turns.size() == 2);
    CHECK(svc.get(c).turns.size() == 2);
    CHECK(svc.get(c).turns[0].text == "My boss keeps yelling at me.");
}

TEST_CASE("concurrent sessions") {
    ChatService svc(engine(), std::nullopt, 4);
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) ids.push_back(svc.create_session("I cannot sleep."));
    std::vector<std::thread> th;
    for (const auto& id : ids) th.emplace_back([&svc, id] { svc.chat(id, "I keep worrying at night."); });
    for (auto& t : th) t.join();
    for (const auto& id : ids) CHECK(svc.get(id).turns.size() == 2);
    CHECK(svc.get(ids[0]).turns[1].text == svc.get(ids[2]).turns[1].text);
}

TEST_CASE("the chat context matches the training input layout") {
    const auto data = fixtures::conversations();
    const auto samples = corpus::build_samples(data.conversations);
    const auto& tax = corpus::StrategyTaxonomy::esconv();
    for (const auto& smp : samples) {
        Session s;
        s.situation = smp.situation;
        for (const auto& u : smp.context) {
            Turn t;
            t.text = u.text;
            t.role = u.speaker == corpus::Speaker::Supporter ? "supporter" : "seeker";
            if (u.strategy) t.strategy = tax.name(*u.strategy);
            s.turns.push_back(t);
        }
        const auto ctx = ChatService::context_of(s, tax);
        CHECK(ctx == smp.context);
        CHECK(engine()->pipeline->encode_context(s.situation, ctx) == engine()->pipeline->encode(smp).input);
    }
}

TEST_CASE("without a model chat is refused") {
    ChatService svc(nullptr, std::nullopt, 5);
    CHECK_FALSE(svc.model_loaded());
    const auto id = svc.create_session("hello there");
    CHECK_THROWS_AS(svc.chat(id, "hi"), ModelNotLoaded);
}

TEST_CASE("sessions persist across restarts") {
    const auto dir = fixtures::scratch("sessions");
    std::string id;
    {
        ChatService svc(engine(), dir, 6);
        id = svc.create_session("I failed my driving test.");
        svc.chat(id, "I am so embarrassed.");
    }
    ChatService again(engine(), dir, 7);
    CHECK(again.session_count() == 1);
    const auto s = again.get(id);
    CHECK(s.turns.size() == 2);
    CHECK(Session::from_json(s.to_json()).to_json() == s.to_json());
}

namespace {

struct Running {
    HttpServer server;
    int port;
    std::thread th;

    explicit Running(ChatService& svc) : server(svc), port(server.bind("127.0.0.1", 0)) {
        th = std::thread([this] { server.run(); });
    }
    ~Running() {
        server.stop();
        th.join();
    }
};

} // namespace

TEST_CASE("http endpoints") {
    ChatService svc(engine(), std::nullopt, 8);
    Running srv(svc);
    REQUIRE(srv.port > 0);
    httplib::Client cli("127.0.0.1", srv.port);
    cli.set_read_timeout(30, 0);

    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body).at("model_loaded") == true);

    auto created = cli.Post("/sessions", R"({"situation": "I broke up with my partner."})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto id = json::parse(created->body).at("id").get<std::string>();

    auto msg = cli.Post("/sessions/" + id + "/messages", R"({"text": "I feel so sad."})", "application/json");
    REQUIRE(msg);
    CHECK(msg->status == 200);
    const auto body = json::parse(msg->body);
    CHECK(body.at("reply").is_string());
    CHECK(body.at("strategy").is_string());

    auto got = cli.Get("/sessions/" + id);
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(json::parse(got->body).at("turns").size() == 2);

    auto missing = cli.Get("/sessions/ffffffffffffffff");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).contains("error"));

    auto empty = cli.Post("/sessions", R"({"situation": ""})", "application/json");
    REQUIRE(empty);
    CHECK(empty->status == 400);
    auto junk = cli.Post("/sessions", "{not json", "application/json");
    REQUIRE(junk);
    CHECK(junk->status == 400);
}

TEST_CASE("http reports a missing model as 503") {
    ChatService svc(nullptr, std::nullopt, 9);
    Running srv(svc);
    httplib::Client cli("127.0.0.1", srv.port);
    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(json::parse(health->body).at("model_loaded") == false);
    auto created = cli.Post("/sessions", R"({"situation": "hello"})", "application/json");
    REQUIRE(created);
    const auto id = json::parse(created->body).at("id").get<std::string>();
    auto msg = cli.Post("/sessions/" + id + "/messages", R"({"text": "hi"})", "application/json");
    REQUIRE(msg);
    CHECK(msg->status == 503);
}
