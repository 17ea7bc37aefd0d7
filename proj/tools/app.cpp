#include "app.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "esc/concepts.hpp"
#include "esc/corpus.hpp"
#include "esc/emotion.hpp"
#include "esc/error.hpp"
#include "esc/http.hpp"
#include "esc/membank.hpp"
#include "esc/metrics.hpp"
#include "esc/pipeline.hpp"
#include "esc/text.hpp"

namespace esc::app {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config() {
    json model = net::ModelConfig{}.to_json();
    model.erase("vocab_size");
    for (auto& [k, v] : model.items()) v = nullptr;
    model["profile"] = "base";

    json trainer = train::TrainingConfig{}.to_json();
    trainer["dim"] = nullptr;  // taken from the model
    trainer["strategies"] = nullptr;

    return {{"run_dir", "runs/default"},
            {"log_every", 10},
            {"data",
             {{"corpus", "ESConv.json"}, {"split_file", nullptr}, {"split_seed", 13}, {"merge_consecutive", true}}},
            {"emotion", {{"detector", "stub"}, {"lexicon", nullptr}, {"weights", nullptr}}},
            {"concepts",
             {{"dump", nullptr},
              {"cache", nullptr},
              {"lang", "en"},
              {"per_anchor_cap", 5},
              {"global_cap", 64},
              {"excluded", concepts::ExpandOptions::default_excluded_relations()},
              {"lemmatize", true}}},
            {"vocab", {{"min_count", 1}, {"max_size", 30000}}},
            {"model", model},
            {"trainer", trainer},
            {"decode", {{"beam_size", 4}, {"max_steps", 64}}},
            {"gateway", {{"host", "127.0.0.1"}, {"port", 8080}, {"checkpoint", "best.ckpt"}, {"session_dir", nullptr}}}};
}

namespace {

bool compatible(const json& schema, const json& value) {
    if (schema.is_null() || value.is_null()) return true;
    if (schema.is_boolean()) return value.is_boolean();
    if (schema.is_number_integer() || schema.is_number_unsigned()) return value.is_number_integer();
    if (schema.is_number()) return value.is_number();
    if (schema.is_string()) return value.is_string();
    if (schema.is_array()) return value.is_array();
    return schema.type() == value.type();
}

void check_against(const json& schema, const json& value, const std::string& where) {
    if (!value.is_object()) throw UsageError("config section '" + where + "' must be an object");
    for (const auto& [k, v] : value.items()) {
        const std::string key = where.empty() ? k : where + "." + k;
        if (!schema.contains(k)) throw UsageError("unknown config key '" + key + "'");
        const auto& s = schema.at(k);
        if (s.is_object()) check_against(s, v, key);
        else if (!compatible(s, v)) throw UsageError("config key '" + key + "' has the wrong type");
    }
}

} // namespace

void validate_config(const json& cfg) {
    check_against(default_config(), cfg, "");
    if (cfg.contains("model") && cfg["model"].contains("profile")) {
        const auto& p = cfg["model"]["profile"];
        if (p != "base" && p != "test") throw UsageError("model.profile must be 'base' or 'test'");
    }
}

json load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config file not found: " + path.string());
    json user;
    try {
        user = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    validate_config(user);
    json cfg = default_config();
    cfg.merge_patch(user);
    // merge_patch drops null members; put them back from the defaults
    json full = default_config();
    for (auto& [section, body] : full.items()) {
        if (!cfg.contains(section)) continue;
        if (body.is_object())
            for (auto& [k, v] : cfg.at(section).items()) body[k] = v;
        else
            body = cfg.at(section);
    }
    return full;
}

void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    const json schema = default_config();
    const json* s = &schema;
    json* target = &cfg;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!s->is_object() || !s->contains(part)) throw UsageError("unknown config key '" + key + "'");
        s = &s->at(part);
        if (dot == std::string::npos) {
            if (s->is_object()) throw UsageError("config key '" + key + "' is a section");
            if (!compatible(*s, value)) {
                if (s->is_string()) value = raw;
                else throw UsageError("config key '" + key + "' has the wrong type");
            }
            (*target)[part] = value;
            return;
        }
        target = &(*target)[part];
        start = dot + 1;
    }
}

fs::path resolve_path(const std::string& value, const char* env_var) {
    fs::path p(value);
    if (p.is_absolute()) return p;
    if (const char* base = std::getenv(env_var); base && *base) return fs::path(base) / p;
    return p;
}

net::ModelConfig model_config(const json& cfg, int vocab_size) {
    const json& m = cfg.at("model");
    const std::string profile = m.value("profile", "base");
    net::ModelConfig base;
    if (profile == "base") base = net::ModelConfig::base(vocab_size);
    else if (profile == "test") base = net::ModelConfig::test_profile(vocab_size);
    else throw UsageError("model.profile must be 'base' or 'test'");
    json merged = base.to_json();
    for (const auto& [k, v] : m.items())
        if (k != "profile" && !v.is_null()) merged[k] = v;
    auto mc = net::ModelConfig::from_json(merged);
    mc.vocab_size = vocab_size;
    mc.strategies = static_cast<int>(corpus::StrategyTaxonomy::esconv().size());
    mc.validate();
    return mc;
}

train::TrainingConfig training_config(const json& cfg, const net::ModelConfig& model) {
    json t = cfg.at("trainer");
    if (!t.at("dim").is_null() && t.at("dim").get<int>() != model.dim)
        throw UsageError("trainer.dim differs from the model dim");
    if (!t.at("strategies").is_null() && t.at("strategies").get<int>() != model.strategies)
        throw UsageError("trainer.strategies differs from the model");
    t["dim"] = model.dim;
    t["strategies"] = model.strategies;
    try {
        return train::TrainingConfig::from_json(t);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

namespace {

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw NotFound("missing file " + p.string());
    return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

json freq_to_json(const concepts::FrequencyTable& f) { return {{"counts", f.counts}, {"top_k", f.top_k}}; }

concepts::FrequencyTable freq_from_json(const json& j) {
    concepts::FrequencyTable f;
    f.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
    f.top_k = j.at("top_k").get<std::vector<std::string>>();
    return f;
}

fs::path run_dir_of(const json& cfg) { return resolve_path(cfg.at("run_dir").get<std::string>(), "ESC_RUN_DIR"); }

std::unique_ptr<concepts::ConceptGraph> load_graph(const json& cfg, std::ostream& err, bool build_if_missing) {
    const json& c = cfg.at("concepts");
    std::optional<fs::path> cache, dump;
    if (!c.at("cache").is_null()) cache = resolve_path(c.at("cache").get<std::string>(), "ESC_CACHE_DIR");
    if (!c.at("dump").is_null()) dump = resolve_path(c.at("dump").get<std::string>(), "ESC_DATA_DIR");
    if (cache && fs::exists(*cache))
        return std::make_unique<concepts::ConceptGraph>(concepts::ConceptGraph::load_cache(*cache));
    if (dump && build_if_missing) {
        concepts::IngestStats stats;
        auto g = std::make_unique<concepts::ConceptGraph>(
            concepts::ConceptGraph::ingest(*dump, c.at("lang").get<std::string>(), &stats));
        if (cache) g->save_cache(*cache);
        err << json{{"event", "concepts_ingested"}, {"edges", g->edge_count()}, {"skipped", stats.skipped}}.dump()
            << '\n';
        return g;
    }
    if (cache || dump) throw NotFound("concept graph not available; run 'concepts build-cache' first");
    return nullptr;
}

pipeline::Options pipeline_options(const json& cfg, const train::TrainingConfig& tc) {
    pipeline::Options o;
    o.max_len = tc.max_len;
    o.use_emotion = !tc.no_emo;
    o.use_concepts = !tc.no_kg;
    const json& c = cfg.at("concepts");
    o.expand.per_anchor_cap = c.at("per_anchor_cap").get<std::size_t>();
    o.expand.global_cap = c.at("global_cap").get<std::size_t>();
    o.expand.excluded = c.at("excluded").get<std::vector<std::string>>();
    o.match.lemmatize = c.at("lemmatize").get<bool>();
    return o;
}

// Everything prepare writes and the later verbs read back.
struct Prepared {
    std::vector<corpus::ESCSample> train, valid, test;
    Vocabulary vocab;
    concepts::FrequencyTable freq;
};

Prepared prepare(const json& cfg, std::ostream& out, std::ostream& err) {
    const auto run = run_dir_of(cfg);
    const auto& tax = corpus::StrategyTaxonomy::esconv();
    const json& d = cfg.at("data");
    corpus::LoadOptions lo;
    lo.merge_consecutive = d.at("merge_consecutive").get<bool>();
    const auto corpus_path = resolve_path(d.at("corpus").get<std::string>(), "ESC_DATA_DIR");
    auto loaded = corpus::load_corpus(corpus_path, lo);
    for (const auto& e : loaded.errors)
        err << json{{"event", "record_skipped"}, {"index", e.index}, {"reason", e.message}}.dump() << '\n';

    const corpus::Split split = d.at("split_file").is_null()
                                    ? corpus::split_corpus(loaded.conversations, d.at("split_seed").get<std::uint64_t>())
                                    : corpus::apply_split_file(loaded.conversations,
                                                               resolve_path(d.at("split_file").get<std::string>(),
                                                                            "ESC_DATA_DIR"));
    Prepared p;
    p.train = corpus::build_samples(split.train);
    p.valid = corpus::build_samples(split.valid);
    p.test = corpus::build_samples(split.test);

    const auto graph = load_graph(cfg, err, true);
    const json& t = cfg.at("trainer");
    std::vector<std::string> extra;
    if (graph) {
        concepts::MatchOptions mo;
        mo.lemmatize = cfg.at("concepts").at("lemmatize").get<bool>();
        p.freq = concepts::build_frequency_table(pipeline::frequency_texts(split.train), *graph,
                                                 t.at("top_k").get<std::size_t>(), mo);
        // Concept words that training inputs will carry go into the vocabulary.
        train::TrainingConfig tc;
        tc.max_len = t.at("max_len").get<int>();
        tc.no_emo = true;
        const Vocabulary scratch;
        const pipeline::Pipeline pl(scratch, nullptr, graph.get(), p.freq, pipeline_options(cfg, tc));
        std::set<std::string> seen;
        for (const auto& s : p.train)
            for (const auto& c : pl.features(s.context).concepts.selected)
                if (seen.insert(c).second) extra.push_back(c);
    }
    p.vocab = pipeline::build_vocabulary(split.train, cfg.at("vocab").at("min_count").get<std::size_t>(),
                                         cfg.at("vocab").at("max_size").get<std::size_t>(), extra);

    fs::create_directories(run / "data");
    corpus::write_samples(run / "data" / "train.jsonl", p.train, tax);
    corpus::write_samples(run / "data" / "valid.jsonl", p.valid, tax);
    corpus::write_samples(run / "data" / "test.jsonl", p.test, tax);
    write_json(run / "data" / "split.json", corpus::split_to_json(split));
    write_json(run / "vocab.json", p.vocab.to_json());
    write_json(run / "frequency.json", freq_to_json(p.freq));
    out << json{{"prepared", run.string()},
                {"conversations", loaded.conversations.size()},
                {"skipped_records", loaded.errors.size()},
                {"samples", {{"train", p.train.size()}, {"valid", p.valid.size()}, {"test", p.test.size()}}},
                {"vocab_size", p.vocab.size()},
                {"concept_graph", graph != nullptr}}
               .dump()
        << '\n';
    return p;
}

Prepared read_prepared(const fs::path& run) {
    const auto& tax = corpus::StrategyTaxonomy::esconv();
    Prepared p;
    p.train = corpus::read_samples(run / "data" / "train.jsonl", tax);
    p.valid = corpus::read_samples(run / "data" / "valid.jsonl", tax);
    p.test = corpus::read_samples(run / "data" / "test.jsonl", tax);
    p.vocab = Vocabulary::from_json(read_json(run / "vocab.json"));
    p.freq = freq_from_json(read_json(run / "frequency.json"));
    return p;
}

// Detector + graph + pipeline over a vocabulary, for the configured ablations.
struct Inputs {
    std::unique_ptr<emotion::EmotionDetector> detector;
    std::unique_ptr<concepts::ConceptGraph> graph;
    std::unique_ptr<pipeline::Pipeline> pipeline;
};

Inputs make_inputs(const json& cfg, const Vocabulary& vocab, const concepts::FrequencyTable& freq,
                   const train::TrainingConfig& tc, std::ostream& err) {
    Inputs in;
    in.detector = emotion::make_detector(cfg.at("emotion"));
    if (!tc.no_kg) in.graph = load_graph(cfg, err, false);
    in.pipeline = std::make_unique<pipeline::Pipeline>(vocab, tc.no_emo ? nullptr : in.detector.get(),
                                                       in.graph.get(), freq, pipeline_options(cfg, tc));
    return in;
}

fs::path checkpoint_path(const fs::path& run, const json& cfg) {
    fs::path p = run / cfg.at("gateway").at("checkpoint").get<std::string>();
    if (!fs::exists(p) && fs::exists(run / "last.ckpt")) p = run / "last.ckpt";
    if (!fs::exists(p)) throw NotFound("no checkpoint in " + run.string());
    return p;
}

int cmd_prepare(json cfg, std::ostream& out, std::ostream& err) {
    const auto run = run_dir_of(cfg);
    write_json(run / "prepare.config.json", cfg);
    prepare(cfg, out, err);
    return 0;
}

int cmd_concepts(json cfg, std::ostream& out, std::ostream& err) {
    const json& c = cfg.at("concepts");
    if (c.at("dump").is_null() || c.at("cache").is_null())
        throw UsageError("concepts build-cache needs concepts.dump and concepts.cache");
    const auto cache = resolve_path(c.at("cache").get<std::string>(), "ESC_CACHE_DIR");
    concepts::IngestStats stats;
    const auto g = concepts::ConceptGraph::ingest(resolve_path(c.at("dump").get<std::string>(), "ESC_DATA_DIR"),
                                                  c.at("lang").get<std::string>(), &stats);
    if (cache.has_parent_path()) fs::create_directories(cache.parent_path());
    g.save_cache(cache);
    write_json(run_dir_of(cfg) / "concepts.config.json", cfg);
    (void)err;
    out << json{{"cache", cache.string()},
                {"nodes", g.node_count()},
                {"edges", g.edge_count()},
                {"lines", stats.lines},
                {"skipped", stats.skipped},
                {"other_language", stats.other_language}}
               .dump()
        << '\n';
    return 0;
}

std::vector<pipeline::EncodedSample> encode(const pipeline::Pipeline& pl, const std::vector<corpus::ESCSample>& s,
                                            emotion::LabelCache* cache) {
    return pl.encode_all(s, cache);
}

int cmd_train(json cfg, std::ostream& out, std::ostream& err) {
    const auto run = run_dir_of(cfg);
    fs::create_directories(run);
    write_json(run / "config.json", cfg);
    Prepared p = fs::exists(run / "vocab.json") ? read_prepared(run) : prepare(cfg, out, err);

    const auto mc = model_config(cfg, p.vocab.size());
    const auto tc = training_config(cfg, mc);
    auto in = make_inputs(cfg, p.vocab, p.freq, tc, err);
    emotion::LabelCache labels;
    const auto label_path = run / "emotion_labels.jsonl";
    if (fs::exists(label_path)) labels.load(label_path);
    const auto train = encode(*in.pipeline, p.train, &labels);
    const auto valid = encode(*in.pipeline, p.valid, &labels);
    labels.save(label_path);

    net::Model model(mc, tc.seed);
    membank::MemoryBank bank(mc.strategies, tc.memory_capacity, mc.dim);
    train::Trainer trainer(tc, model, bank);
    const int log_every = std::max(1, cfg.at("log_every").get<int>());
    const auto result = trainer.fit(train, valid, run, [&](const train::StepRecord& r) {
        if (r.step % log_every == 0)
            err << json{{"step", r.step},      {"epoch", r.epoch},
                        {"lr", r.lr},          {"loss", r.loss.total},
                        {"L_g", r.loss.generation}, {"L_s", r.loss.strategy},
                        {"L_r", r.loss.pattern}, {"grad_norm", r.grad_norm}}
                       .dump()
                << '\n';
    });
    json summary = {{"run_dir", run.string()},
                    {"steps", result.state.step},
                    {"epochs", result.state.epoch},
                    {"ablations",
                     {{"no_mem", tc.no_mem},
                      {"no_emo", tc.no_emo},
                      {"no_kg", tc.no_kg},
                      {"no_strategy_loss", tc.no_strategy_loss},
                      {"no_pattern_loss", tc.no_pattern_loss}}}};
    if (result.best) summary["best"] = {{"path", result.best->path.string()}, {"val_ppl", result.best->val_ppl}};
    out << summary.dump() << '\n';
    return 0;
}

std::vector<int> decode_ids(const net::Model& model, const net::DecodeState& st, const json& cfg) {
    const int beam = cfg.at("decode").at("beam_size").get<int>();
    const int steps = cfg.at("decode").at("max_steps").get<int>();
    return beam > 1 ? model.beam_decode(st, beam, steps) : model.greedy_decode(st, steps);
}

int cmd_evaluate(const fs::path& run, json cfg, const std::string& split, std::ostream& out, std::ostream& err) {
    write_json(run / "evaluate.config.json", cfg);
    Prepared p = read_prepared(run);
    const auto mc = model_config(cfg, p.vocab.size());
    const auto tc = training_config(cfg, mc);
    auto in = make_inputs(cfg, p.vocab, p.freq, tc, err);
    const auto& samples = split == "valid" ? p.valid : split == "train" ? p.train : p.test;
    if (split != "valid" && split != "train" && split != "test") throw UsageError("unknown split '" + split + "'");
    emotion::LabelCache labels;
    if (fs::exists(run / "emotion_labels.jsonl")) labels.load(run / "emotion_labels.jsonl");
    const auto encoded = encode(*in.pipeline, samples, &labels);

    net::Model model(mc, tc.seed);
    membank::MemoryBank bank(mc.strategies, tc.memory_capacity, mc.dim);
    train::load_for_inference(checkpoint_path(run, cfg), model, bank);

    std::vector<std::string> hyps, refs;
    std::ofstream decoded(run / ("decoded_" + split + ".jsonl"));
    const auto& tax = corpus::StrategyTaxonomy::esconv();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        const auto st = model.prepare(encoded[i].input, bank, tc.no_mem);
        hyps.push_back(p.vocab.decode(decode_ids(model, st, cfg)));
        refs.push_back(samples[i].response);
        if (st.prediction.predicted == encoded[i].strategy) ++correct;
        decoded << json{{"conv_id", samples[i].conv_id},
                        {"turn", samples[i].turn},
                        {"strategy", tax.name(encoded[i].strategy)},
                        {"predicted_strategy", tax.name(st.prediction.predicted)},
                        {"hypothesis", hyps.back()},
                        {"reference", refs.back()}}
                       .dump()
                << '\n';
    }
    auto report = eval::corpus_metrics(hyps, refs);
    report.ppl = eval::perplexity(model, bank, encoded, tc.no_mem);
    report.has_ppl = true;
    json j = report.to_json();
    j["split"] = split;
    j["strategy_accuracy"] = encoded.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(encoded.size());
    write_json(run / ("metrics_" + split + ".json"), j);
    out << j.dump() << '\n';
    return 0;
}

int cmd_decode(const fs::path& run, json cfg, const std::string& situation, const std::vector<std::string>& messages,
               std::ostream& out) {
    write_json(run / "decode.config.json", cfg);
    gateway::ChatService svc(load_engine(run, cfg));
    const auto id = svc.create_session(situation);
    for (const auto& m : messages) out << svc.chat(id, m).to_json().dump() << '\n';
    return 0;
}

int cmd_serve(const fs::path& run, json cfg, std::ostream& out) {
    write_json(run / "serve.config.json", cfg);
    std::optional<fs::path> store;
    if (!cfg.at("gateway").at("session_dir").is_null())
        store = resolve_path(cfg.at("gateway").at("session_dir").get<std::string>(), "ESC_RUN_DIR");
    gateway::ChatService svc(load_engine(run, cfg), store);
    gateway::HttpServer server(svc);
    const int port = server.bind(cfg.at("gateway").at("host").get<std::string>(), cfg.at("gateway").at("port").get<int>());
    out << json{{"listening", port}}.dump() << std::endl;
    server.run();
    return 0;
}

json run_config(const fs::path& run, const std::vector<std::string>& overrides) {
    if (!fs::exists(run / "config.json")) throw UsageError("not a run directory: " + run.string());
    json cfg = read_json(run / "config.json");
    validate_config(cfg);
    for (const auto& o : overrides) apply_override(cfg, o);
    validate_config(cfg);
    return cfg;
}

} // namespace

std::shared_ptr<gateway::Engine> load_engine(const fs::path& run, const json& cfg) {
    auto eng = std::make_shared<gateway::Engine>();
    Prepared p = read_prepared(run);
    eng->vocab = std::make_unique<Vocabulary>(std::move(p.vocab));
    const auto mc = model_config(cfg, eng->vocab->size());
    const auto tc = training_config(cfg, mc);
    auto in = make_inputs(cfg, *eng->vocab, p.freq, tc, std::cerr);
    eng->detector = std::move(in.detector);
    eng->graph = std::move(in.graph);
    eng->pipeline = std::make_unique<pipeline::Pipeline>(*eng->vocab, tc.no_emo ? nullptr : eng->detector.get(),
                                                         eng->graph.get(), p.freq, pipeline_options(cfg, tc));
    eng->model = std::make_unique<net::Model>(mc, tc.seed);
    eng->bank = std::make_unique<membank::MemoryBank>(mc.strategies, tc.memory_capacity, mc.dim);
    train::load_for_inference(checkpoint_path(run, cfg), *eng->model, *eng->bank);
    eng->decode.beam_size = cfg.at("decode").at("beam_size").get<int>();
    eng->decode.max_steps = cfg.at("decode").at("max_steps").get<int>();
    eng->no_mem = tc.no_mem;
    return eng;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Memory-enhanced emotional support conversation model", "esc"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string run_dir, checkpoint, split = "test", situation, host;
    std::vector<std::string> messages;
    int port = -1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--set", overrides, "Override a config value, e.g. trainer.no_mem=true")->take_all();
    };
    auto* prep = app.add_subcommand("prepare", "Load, split and index the corpus");
    prep->add_option("--config", config_path, "Config file")->required();
    add_common(prep);

    auto* conc = app.add_subcommand("concepts", "Concept graph utilities");
    auto* build = conc->add_subcommand("build-cache", "Ingest the ConceptNet dump into a cache file");
    build->add_option("--config", config_path, "Config file")->required();
    add_common(build);
    conc->require_subcommand(1);

    auto* trn = app.add_subcommand("train", "Train a model (ablations via --set trainer.no_*=true)");
    trn->add_option("--config", config_path, "Config file")->required();
    trn->add_option("--run-dir", run_dir, "Same as --set run_dir=...");
    add_common(trn);

    auto* evl = app.add_subcommand("evaluate", "PPL and text metrics for a finished run");
    evl->add_option("--run", run_dir, "Run directory")->required();
    evl->add_option("--split", split, "train | valid | test");
    evl->add_option("--checkpoint", checkpoint, "Same as --set gateway.checkpoint=...");
    add_common(evl);

    auto* dec = app.add_subcommand("decode", "Reply to messages with a trained run");
    dec->add_option("--run", run_dir, "Run directory")->required();
    dec->add_option("--situation", situation, "Seeker situation")->required();
    dec->add_option("--message", messages, "Seeker message (repeatable)")->required();
    dec->add_option("--checkpoint", checkpoint, "Same as --set gateway.checkpoint=...");
    add_common(dec);

    auto* srv = app.add_subcommand("serve", "Start the HTTP chat gateway");
    srv->add_option("--run", run_dir, "Run directory")->required();
    srv->add_option("--host", host, "Same as --set gateway.host=...");
    srv->add_option("--port", port, "Same as --set gateway.port=...");
    srv->add_option("--checkpoint", checkpoint, "Same as --set gateway.checkpoint=...");
    add_common(srv);

    std::vector<std::string> argv_store{"esc"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << app.help();
        err << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
        return 2;
    }

    try {
        // flags that mirror config keys go through the same validation
        if (!checkpoint.empty()) overrides.push_back("gateway.checkpoint=" + checkpoint);
        if (!host.empty()) overrides.push_back("gateway.host=" + host);
        if (port >= 0) overrides.push_back("gateway.port=" + std::to_string(port));

        auto from_file = [&] {
            json cfg = load_config(config_path);
            for (const auto& o : overrides) apply_override(cfg, o);
            validate_config(cfg);
            return cfg;
        };
        if (prep->parsed()) return cmd_prepare(from_file(), out, err);
        if (build->parsed()) return cmd_concepts(from_file(), out, err);
        if (trn->parsed()) {
            if (!run_dir.empty()) overrides.push_back("run_dir=" + run_dir);
            return cmd_train(from_file(), out, err);
        }
        if (evl->parsed()) return cmd_evaluate(run_dir, run_config(run_dir, overrides), split, out, err);
        if (dec->parsed()) return cmd_decode(run_dir, run_config(run_dir, overrides), situation, messages, out);
        if (srv->parsed()) return cmd_serve(run_dir, run_config(run_dir, overrides), out);
        err << app.help();
        return 2;
    } catch (const UsageError& e) {
        err << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << '\n';
        return 1;
    }
}

} // namespace esc::app
