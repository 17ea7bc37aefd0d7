#include "esc/gateway.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "esc/error.hpp"
#include "esc/text.hpp"

namespace esc::gateway {

using nlohmann::json;

namespace {

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

} // namespace

json Turn::to_json() const {
    return {{"role", role}, {"text", text}, {"emotion", opt(emotion)}, {"strategy", opt(strategy)}, {"concepts", concepts}};
}

Turn Turn::from_json(const json& j) {
    Turn t;
    t.role = j.at("role").get<std::string>();
    t.text = j.at("text").get<std::string>();
    t.emotion = opt_string(j, "emotion");
    t.strategy = opt_string(j, "strategy");
    t.concepts = j.value("concepts", std::vector<std::string>{});
    return t;
}

json Session::to_json() const {
    json turns_json = json::array();
    for (const auto& t : turns) turns_json.push_back(t.to_json());
    return {{"id", id}, {"situation", situation}, {"turns", turns_json}};
}

Session Session::from_json(const json& j) {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.situation = j.at("situation").get<std::string>();
    for (const auto& t : j.at("turns")) s.turns.push_back(Turn::from_json(t));
    return s;
}

json ChatResponse::to_json() const {
    return {{"reply", reply},
            {"strategy", strategy},
            {"emotion", opt(emotion)},
            {"concepts", concepts},
            {"latency_ms", latency_ms}};
}

ChatService::ChatService(std::shared_ptr<const Engine> engine, std::optional<std::filesystem::path> store_dir,
                         std::uint64_t id_seed)
    : engine_(std::move(engine)), store_dir_(std::move(store_dir)), id_rng_(id_seed) {
    if (!store_dir_) return;
    std::filesystem::create_directories(*store_dir_);
    for (const auto& entry : std::filesystem::directory_iterator(*store_dir_)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        try {
            auto e = std::make_shared<Entry>();
            e->session = Session::from_json(json::parse(in));
            sessions_[e->session.id] = e;
        } catch (const std::exception& ex) {
            throw FormatError("bad session file " + entry.path().string() + ": " + ex.what());
        }
    }
}

std::string ChatService::create_session(const std::string& situation) {
    if (text::trim(situation).empty()) throw InvalidArgument("situation must not be empty");
    auto e = std::make_shared<Entry>();
    e->session.situation = situation;
    {
        std::unique_lock lock(mu_);
        char buf[17];
        do {
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
        } while (sessions_.count(buf));
        e->session.id = buf;
        sessions_[e->session.id] = e;
    }
    persist(e->session);
    return e->session.id;
}

std::shared_ptr<ChatService::Entry> ChatService::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
}

Session ChatService::get(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    return e->session;
}

std::size_t ChatService::session_count() const {
    std::shared_lock lock(mu_);
    return sessions_.size();
}

std::vector<corpus::Utterance> ChatService::context_of(const Session& s, const corpus::StrategyTaxonomy& tax) {
    std::vector<corpus::Utterance> out;
    for (const auto& t : s.turns) {
        corpus::Utterance u;
        u.text = t.text;
        if (t.role == "supporter") {
            u.speaker = corpus::Speaker::Supporter;
            u.strategy = t.strategy ? tax.index(*t.strategy) : tax.index("Others");
        }
        out.push_back(std::move(u));
    }
    return out;
}

ChatResponse ChatService::chat(const std::string& id, const std::string& message) {
    const auto start = std::chrono::steady_clock::now();
    auto e = find(id);
    if (text::trim(message).empty()) throw InvalidArgument("message must not be empty");
    if (!engine_) throw ModelNotLoaded("no model loaded");
    const Engine& eng = *engine_;

    std::lock_guard lock(e->mu);
    Session& s = e->session;
    Turn user{"seeker", message, std::nullopt, std::nullopt, {}};
    if (eng.detector) user.emotion = eng.detector->detect(message).name();

    Session next = s;
    next.turns.push_back(user);
    const auto context = context_of(next, eng.taxonomy);
    const auto features = eng.pipeline->features(context);
    const auto input = eng.pipeline->assemble(s.situation, features);
    const auto state = eng.model->prepare(input, *eng.bank, eng.no_mem);
    const auto ids = eng.decode.beam_size > 1 ? eng.model->beam_decode(state, eng.decode.beam_size, eng.decode.max_steps)
                                              : eng.model->greedy_decode(state, eng.decode.max_steps);

    ChatResponse r;
    r.reply = eng.vocab->decode(ids);
    r.strategy = eng.taxonomy.labels().at(static_cast<std::size_t>(state.prediction.predicted));
    r.emotion = user.emotion;
    r.concepts = features.concepts.selected;

    Turn reply{"supporter", r.reply, std::nullopt, r.strategy, r.concepts};
    if (eng.detector) reply.emotion = eng.detector->detect(r.reply).name();
    next.turns.push_back(std::move(reply));
    s = std::move(next);
    persist(s);

    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

void ChatService::persist(const Session& s) const {
    if (!store_dir_) return;
    const auto path = *store_dir_ / (s.id + ".json");
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write session file " + tmp);
        out << s.to_json().dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

} // namespace esc::gateway
