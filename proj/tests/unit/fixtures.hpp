#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "esc/concepts.hpp"
#include "esc/corpus.hpp"

namespace fixtures {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(ESC_TEST_DATA) / name; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline esc::corpus::LoadResult conversations() { return esc::corpus::load_corpus(data("esconv_fixture.json")); }

inline esc::concepts::ConceptGraph graph() {
    return esc::concepts::ConceptGraph::ingest(data("conceptnet_fixture.csv"), "en");
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto p = std::filesystem::temp_directory_path() / ("esc_" + tag + "_" + std::to_string(rng() % 1000000007));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace fixtures
