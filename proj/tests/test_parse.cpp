// Extraction of prediction lists and feature rankings from completion text.
// The fixture corpus in fixtures.hpp is shared with the acceptance gate.

#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "stads/stads.hpp"
#include "support.hpp"

using namespace stads;

TEST_CASE("prediction fixtures parse exactly") {
    const auto labels = fixtures::binary_labels();
    for (const auto& c : fixtures::prediction_cases()) {
        INFO(c.name << ": " << c.raw);
        const auto got = parse::parse_predictions(c.raw, labels);
        CHECK(got.values == c.values);
        CHECK(got.unknown_positions ==
              std::set<std::size_t>(c.unknown.begin(), c.unknown.end()));
        CHECK(got.note == c.note);
    }
}

TEST_CASE("the fixture corpus is large enough to be taken seriously") {
    CHECK(fixtures::prediction_cases().size() + fixtures::ranking_cases().size() >= 20);
}

TEST_CASE("parsing serialized predictions is the identity") {
    const auto labels = fixtures::binary_labels();
    for (const auto& c : fixtures::prediction_cases()) {
        const auto first = parse::parse_predictions(c.raw, labels);
        if (first.values.empty()) continue;
        const auto again =
            parse::parse_predictions(parse::serialize_predictions(first), labels);
        INFO(c.name);
        CHECK(again.values == first.values);
        CHECK(again.unknown_positions == first.unknown_positions);
        CHECK(again.note == parse::extraction_note::clean);
    }
}

TEST_CASE("ranking fixtures parse exactly") {
    const auto schema = fixtures::ranking_schema();
    for (const auto& c : fixtures::ranking_cases()) {
        INFO(c.name << ": " << c.raw);
        const auto got = parse::parse_feature_ranking(c.raw, schema);
        CHECK(got.names == c.names);
        REQUIRE(got.dropped.size() == c.dropped.size());
        for (std::size_t i = 0; i < c.dropped.size(); ++i) {
            CHECK(got.dropped[i].first == c.dropped[i].first);
            CHECK(got.dropped[i].second == c.dropped[i].second);
        }
    }
}

TEST_CASE("ranking matching is case-insensitive but returns schema spelling") {
    std::vector<corpus::FeatureSpec> schema;
    corpus::FeatureSpec f;
    f.name = "Petal_Length";
    f.kind = corpus::feature_kind::numeric;
    schema.push_back(f);
    const auto got = parse::parse_feature_ranking("petal_length", schema);
    REQUIRE(got.names.size() == 1);
    CHECK(got.names[0] == "Petal_Length");
}

TEST_CASE("alignment truncates to the shorter side") {
    parse::PredictionList pred;
    pred.values = {1, 0, 1};

    SECTION("more predictions than truth") {
        const auto pairs = parse::align(pred, {1, 0});
        CHECK(pairs.n_p == 3);
        CHECK(pairs.n_g == 2);
        REQUIRE(pairs.n_a() == 2);
        CHECK(pairs.pairs[0] == std::pair<long long, int>{1, 1});
        CHECK(pairs.pairs[1] == std::pair<long long, int>{0, 0});
    }
    SECTION("fewer predictions than truth") {
        const auto pairs = parse::align(pred, {1, 0, 1, 0, 1});
        CHECK(pairs.n_p == 3);
        CHECK(pairs.n_g == 5);
        CHECK(pairs.n_a() == 3);
    }
    SECTION("empty predictions") {
        const auto pairs = parse::align(parse::PredictionList{}, {1, 0});
        CHECK(pairs.n_a() == 0);
        CHECK(pairs.n_g == 2);
    }
}
