#pragma once

// support.hpp — shared helpers for the unit suite: canned datasets, dataset
// file loading from the repository, and a scratch directory per process.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "stads/stads.hpp"

namespace support {

namespace fs = std::filesystem;

inline std::string source_dir() { return STADS_SOURCE_DIR; }

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

inline stads::corpus::Dataset load_repo_dataset(const std::string& stem) {
    const fs::path data = fs::path(source_dir()) / "data";
    return stads::corpus::load_dataset(
        stads::harness::fs_read(data / (stem + ".descriptor.json")),
        stads::harness::fs_read(data / (stem + ".csv")));
}

// two-feature binary dataset small enough to hand-verify every rendering
inline stads::corpus::Dataset toy_dataset() {
    using namespace stads::corpus;
    Dataset d;
    d.name = "Toy";
    d.role = "savvy analyst";
    d.task_description = "predicting whether a toy example fires or not";
    d.labels.task = task_type::binary;
    d.labels.classes = {{0, "no"}, {1, "yes"}};

    FeatureSpec f1;
    f1.name = "f1";
    f1.description = "Signal level";
    f1.kind = feature_kind::categorical;
    f1.encoding = {{0, "low"}, {1, "high"}};
    FeatureSpec f2;
    f2.name = "f2";
    f2.description = "Raw magnitude";
    f2.kind = feature_kind::numeric;
    d.features = {f1, f2};

    d.rows = {
        {{"0", "1.5"}, 1}, {{"1", "2.0"}, 0}, {{"0", "0.5"}, 1}, {{"1", "0.1"}, 0},
        {{"0", "1.1"}, 1}, {{"1", "0.2"}, 0}, {{"0", "1.9"}, 1}, {{"1", "0.3"}, 0},
        {{"0", "1.2"}, 1}, {{"1", "0.4"}, 0},
    };
    return d;
}

// fresh scratch directory under the system temp root
inline std::string scratch_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path p = fs::temp_directory_path() /
                       ("stads-test-" + tag + "-" + std::to_string(++counter) + "-" +
                        std::to_string(static_cast<unsigned>(::getpid())));
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

}  // namespace support
