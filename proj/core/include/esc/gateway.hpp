#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esc/concepts.hpp"
#include "esc/corpus.hpp"
#include "esc/emotion.hpp"
#include "esc/error.hpp"
#include "esc/membank.hpp"
#include "esc/model.hpp"
#include "esc/pipeline.hpp"
#include "esc/vocab.hpp"

namespace esc::gateway {

struct DecodeOptions {
    int beam_size = 4;  // 1: greedy
    int max_steps = 64;
};

/// Everything needed to answer a chat turn. Read-only once built.
struct Engine {
    std::unique_ptr<Vocabulary> vocab;
    std::unique_ptr<emotion::EmotionDetector> detector;  // may be null
    std::unique_ptr<concepts::ConceptGraph> graph;       // may be null
    std::unique_ptr<pipeline::Pipeline> pipeline;
    std::unique_ptr<net::Model> model;
    std::unique_ptr<membank::MemoryBank> bank;
    corpus::StrategyTaxonomy taxonomy = corpus::StrategyTaxonomy::esconv();
    DecodeOptions decode;
    bool no_mem = false;
};

struct Turn {
    std::string role;  // "seeker" | "supporter"
    std::string text;
    std::optional<std::string> emotion;
    std::optional<std::string> strategy;  // supporter turns only
    std::vector<std::string> concepts;

    nlohmann::json to_json() const;
    static Turn from_json(const nlohmann::json& j);
};

struct Session {
    std::string id;
    std::string situation;
    std::vector<Turn> turns;

    nlohmann::json to_json() const;
    static Session from_json(const nlohmann::json& j);
};

struct ChatResponse {
    std::string reply;
    std::string strategy;
    std::optional<std::string> emotion;
    std::vector<std::string> concepts;
    double latency_ms = 0.0;

    nlohmann::json to_json() const;
};

/// Thrown by chat() when no engine is loaded.
struct ModelNotLoaded : Error {
    using Error::Error;
};

/// Session store plus the chat pipeline. Calls on different sessions run
/// concurrently; calls on one session are serialized.
class ChatService {
public:
    /// `engine` may be null (chat() then throws ModelNotLoaded). With a
    /// `store_dir`, sessions are written there as <id>.json and reloaded
    /// on construction.
    explicit ChatService(std::shared_ptr<const Engine> engine,
                         std::optional<std::filesystem::path> store_dir = std::nullopt,
                         std::uint64_t id_seed = std::random_device{}());

    bool model_loaded() const { return engine_ != nullptr; }

    /// Throws InvalidArgument on an empty situation.
    std::string create_session(const std::string& situation);
    /// Throws NotFound for an unknown id.
    Session get(const std::string& id) const;
    ChatResponse chat(const std::string& id, const std::string& message);
    std::size_t session_count() const;

    /// Utterances the model sees for `s`, oldest first.
    static std::vector<corpus::Utterance> context_of(const Session& s, const corpus::StrategyTaxonomy& tax);

private:
    struct Entry {
        std::mutex mu;
        Session session;
    };
    std::shared_ptr<Entry> find(const std::string& id) const;
    void persist(const Session& s) const;

    std::shared_ptr<const Engine> engine_;
    std::optional<std::filesystem::path> store_dir_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::mt19937_64 id_rng_;
};

} // namespace esc::gateway
