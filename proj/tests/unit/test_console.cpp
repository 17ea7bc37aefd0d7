#include <doctest.h>

#include <fstream>
#include <sstream>

#include "app.hpp"
#include "fixtures.hpp"

using esc::app::dispatch;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

json last_line(const std::string& s) {
    std::istringstream in(s);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty() && line[0] == '{') last = line;
    return json::parse(last);
}

fs::path write_config(const fs::path& dir) {
    json cfg = {{"run_dir", (dir / "run").string()},
                {"data", {{"corpus", fixtures::data("esconv_fixture.json").string()}}},
                {"concepts",
                 {{"dump", fixtures::data("conceptnet_fixture.csv").string()},
                  {"cache", (dir / "graph.cache").string()}}},
                {"model", {{"profile", "test"}, {"dim", 16}, {"heads", 2}, {"ffn", 32}}},
                {"trainer",
                 {{"batch_size", 4},
                  {"learning_rate", 1e-3},
                  {"warmup_steps", 1},
                  {"max_epochs", 1},
                  {"top_k", 2},
                  {"memory_capacity", 4}}},
                {"decode", {{"beam_size", 2}, {"max_steps", 6}}}};
    const auto p = dir / "config.json";
    std::ofstream(p) << cfg.dump(2);
    return p;
}

} // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({}).code == 2);
    const auto missing = run({"prepare", "--config", "/nonexistent/config.json"});
    CHECK(missing.code == 2);
    CHECK(last_line(missing.err).at("kind") == "usage");

    const auto dir = fixtures::scratch("console_usage");
    const auto cfg = write_config(dir);
    CHECK(run({"prepare", "--config", cfg.string(), "--set", "trainer.nonsense=1"}).code == 2);
    CHECK(run({"prepare", "--config", cfg.string(), "--set", "trainer.batch_size=\"many\""}).code == 2);
    CHECK(run({"prepare", "--config", cfg.string(), "--set", "model.profile=huge"}).code != 0);
    CHECK(run({"evaluate", "--run", (dir / "nothing").string()}).code == 2);
    CHECK(run({"--help"}).code == 0);

    std::ofstream(dir / "bad.json") << R"({"trainer": {"lamda1": 0.3}})";
    CHECK(run({"prepare", "--config", (dir / "bad.json").string()}).code == 2);
}

TEST_CASE("config overrides") {
    auto cfg = esc::app::default_config();
    esc::app::apply_override(cfg, "trainer.no_mem=true");
    esc::app::apply_override(cfg, "gateway.host=0.0.0.0");
    CHECK(cfg["trainer"]["no_mem"] == true);
    CHECK(cfg["gateway"]["host"] == "0.0.0.0");
    CHECK_THROWS_AS(esc::app::apply_override(cfg, "trainer"), esc::app::UsageError);
    CHECK_THROWS_AS(esc::app::apply_override(cfg, "trainer=1"), esc::app::UsageError);
    CHECK_THROWS_AS(esc::app::apply_override(cfg, "trainer.lamda=1"), esc::app::UsageError);
    const auto mc = esc::app::model_config(cfg, 100);
    CHECK(mc.dim == 768);
    CHECK(esc::app::training_config(cfg, mc).no_mem);
}

TEST_CASE("prepare, train, evaluate and decode on the fixtures") {
    const auto dir = fixtures::scratch("console_e2e");
    const auto cfg = write_config(dir);
    const auto runp = dir / "run";

    const auto prep = run({"prepare", "--config", cfg.string()});
    INFO(prep.err);
    REQUIRE(prep.code == 0);
    for (const char* f : {"data/train.jsonl", "data/valid.jsonl", "data/test.jsonl", "data/split.json", "vocab.json",
                          "frequency.json", "prepare.config.json"})
        CHECK(fs::exists(runp / f));
    const auto resolved = json::parse(fixtures::slurp(runp / "prepare.config.json"));
    CHECK(resolved.at("trainer").at("lambda1") == 0.3);
    CHECK(resolved.at("model").at("dim") == 16);

    const auto tr = run({"train", "--config", cfg.string()});
    INFO(tr.err);
    REQUIRE(tr.code == 0);
    CHECK(last_line(tr.out).at("epochs") == 1);
    CHECK(fs::exists(runp / "last.ckpt"));
    CHECK(fs::exists(runp / "config.json"));
    CHECK(fs::exists(runp / "metrics.jsonl"));
    CHECK(fs::exists(runp / "emotion_labels.jsonl"));

    const auto ev = run({"evaluate", "--run", runp.string(), "--split", "test"});
    INFO(ev.err);
    REQUIRE(ev.code == 0);
    const auto m = last_line(ev.out);
    for (const char* k : {"ppl", "b1", "b2", "b3", "b4", "rouge_l", "meteor", "cider"}) CHECK(m.contains(k));
    CHECK(m.at("ppl").get<double>() > 1.0);
    CHECK(fs::exists(runp / "metrics_test.json"));
    CHECK(fs::exists(runp / "decoded_test.jsonl"));
    CHECK(run({"evaluate", "--run", runp.string(), "--split", "dev"}).code == 2);

    const auto dec = run({"decode", "--run", runp.string(), "--situation", "I lost my job.", "--message",
                          "I feel hopeless.", "--message", "What should I do?"});
    INFO(dec.err);
    REQUIRE(dec.code == 0);
    int replies = 0;
    std::istringstream lines(dec.out);
    for (std::string l; std::getline(lines, l);) {
        CHECK(json::parse(l).contains("reply"));
        ++replies;
    }
    CHECK(replies == 2);

    const auto abl = run({"train", "--config", cfg.string(), "--run-dir", (dir / "run_nomem").string(), "--set",
                          "trainer.no_mem=true"});
    INFO(abl.err);
    REQUIRE(abl.code == 0);
    CHECK(last_line(abl.out).at("ablations").at("no_mem") == true);
    CHECK(json::parse(fixtures::slurp(dir / "run_nomem" / "config.json")).at("trainer").at("no_mem") == true);
}
