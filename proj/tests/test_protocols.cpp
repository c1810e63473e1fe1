#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/fau_data.hpp"
#include "core/model.hpp"
#include "core/protocols.hpp"
#include "core/rng.hpp"
#include "core/synth.hpp"

using namespace idminer;

namespace {

Eigen::MatrixXd ramp_frames(int t, double scale) {
    Eigen::MatrixXd m(t, 3);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = scale * (i + 1) + 0.1 * j;
    return m;
}

// Two test identities with two genuine videos each, one cross forgery per
// identity, and one reconstruction per first genuine video. A third identity
// exists only as a single genuine video driving its own forgery, so its
// probes cannot find references.
data::LoadedDataset protocol_dataset() {
    data::LoadedDataset dataset;
    dataset.manifest.fau_dim = 3;
    dataset.manifest.train_identities = {"p0", "p1"};
    dataset.manifest.test_identities = {"a", "b", "c"};

    double scale = 1.0;
    auto add = [&](const std::string& id, const std::string& appearance,
                   const std::string& puppeteer, data::BaseTag tag) {
        scale += 0.25;
        auto record = data::make_record(id, appearance, appearance, puppeteer, {tag, std::nullopt},
                                        ramp_frames(8, scale));
        dataset.manifest.records.push_back(
            {id, appearance, appearance, puppeteer, record.provenance, id + ".csv"});
        dataset.videos[id] = std::move(record);
    };

    add("g_a_0", "a", "a", data::BaseTag::Genuine);
    add("g_a_1", "a", "a", data::BaseTag::Genuine);
    add("g_b_0", "b", "b", data::BaseTag::Genuine);
    add("g_b_1", "b", "b", data::BaseTag::Genuine);
    add("g_c_0", "c", "c", data::BaseTag::Genuine);
    add("f_x", "a", "b", data::BaseTag::Forged);          // b puppeteers a's face
    add("f_y", "b", "a", data::BaseTag::Forged);          // a puppeteers b's face
    add("f_c", "c", "b", data::BaseTag::Forged);          // driven by c's only video
    add("r_a_0", "a", "a", data::BaseTag::Reconstructed);
    add("r_b_0", "b", "b", data::BaseTag::Reconstructed);
    dataset.manifest.metadata["driving.f_x"] = "g_b_0";
    dataset.manifest.metadata["driving.f_y"] = "g_a_0";
    dataset.manifest.metadata["driving.f_c"] = "g_c_0";
    dataset.manifest.metadata["driving.r_a_0"] = "g_a_0";
    dataset.manifest.metadata["driving.r_b_0"] = "g_b_0";
    return dataset;
}

struct FlatPair {
    std::string probe, reference;
    bool wrap_probe, wrap_reference;
    int label;

    bool operator==(const FlatPair&) const = default;
    bool operator<(const FlatPair& other) const {
        return std::tie(probe, reference) < std::tie(other.probe, other.reference);
    }
};

std::vector<FlatPair> flatten(const eval::PairSet& set) {
    std::vector<FlatPair> out;
    for (const auto& pair : set.pairs)
        out.push_back({pair.probe_id, pair.reference_id.value_or(""), pair.probe_surrogate,
                       pair.reference_surrogate, pair.label});
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("protocol names round-trip") {
    for (auto setting : {eval::ProtocolSetting::Conventional, eval::ProtocolSetting::Whitehat,
                         eval::ProtocolSetting::Surrogate})
        CHECK(eval::protocol_setting_from_string(eval::to_string(setting)) == setting);
    CHECK_THROWS_AS(eval::protocol_setting_from_string("blackhat"), Error);
}

TEST_CASE("protocol validation ties the wrap to the surrogate setting") {
    eval::ProtocolKind protocol;
    CHECK_NOTHROW(eval::validate_protocol(protocol));
    protocol.surrogate = data::SurrogateWrap{data::SurrogateKind::Jpeg, 2};
    CHECK_THROWS_AS(eval::validate_protocol(protocol), Error);
    protocol.setting = eval::ProtocolSetting::Surrogate;
    CHECK_NOTHROW(eval::validate_protocol(protocol));
    protocol.surrogate.reset();
    CHECK_THROWS_AS(eval::validate_protocol(protocol), Error);
}

TEST_CASE("reference-free conventional pairs genuine against forged") {
    const auto dataset = protocol_dataset();
    const auto set = eval::build_pairs(dataset.manifest,
                                       {eval::ProtocolSetting::Conventional, false, std::nullopt});
    CHECK(set.skipped == 0);
    CHECK(flatten(set) == std::vector<FlatPair>{{"f_c", "", false, false, 0},
                                                {"f_x", "", false, false, 0},
                                                {"f_y", "", false, false, 0},
                                                {"g_a_0", "", false, false, 1},
                                                {"g_a_1", "", false, false, 1},
                                                {"g_b_0", "", false, false, 1},
                                                {"g_b_1", "", false, false, 1},
                                                {"g_c_0", "", false, false, 1}});
}

TEST_CASE("reference-free whitehat pairs reconstructions against forged") {
    const auto dataset = protocol_dataset();
    const auto set = eval::build_pairs(dataset.manifest,
                                       {eval::ProtocolSetting::Whitehat, false, std::nullopt});
    CHECK(flatten(set) == std::vector<FlatPair>{{"f_c", "", false, false, 0},
                                                {"f_x", "", false, false, 0},
                                                {"f_y", "", false, false, 0},
                                                {"r_a_0", "", false, false, 1},
                                                {"r_b_0", "", false, false, 1}});
}

TEST_CASE("reference-free surrogate wraps every probe") {
    const auto dataset = protocol_dataset();
    const auto set = eval::build_pairs(
        dataset.manifest, {eval::ProtocolSetting::Surrogate, false,
                           data::SurrogateWrap{data::SurrogateKind::Blur, 3}});
    CHECK(flatten(set) == std::vector<FlatPair>{{"f_c", "", true, false, 0},
                                                {"f_x", "", true, false, 0},
                                                {"f_y", "", true, false, 0},
                                                {"g_a_0", "", true, false, 1},
                                                {"g_a_1", "", true, false, 1},
                                                {"g_b_0", "", true, false, 1},
                                                {"g_b_1", "", true, false, 1},
                                                {"g_c_0", "", true, false, 1}});
}

TEST_CASE("reference-based conventional compares probes to lowest-id genuine peers") {
    const auto dataset = protocol_dataset();
    const auto set = eval::build_pairs(dataset.manifest,
                                       {eval::ProtocolSetting::Conventional, true, std::nullopt});
    // g_c_0 has no second genuine video of appearance c, and f_c's only
    // candidate is its own driving video; both probes are skipped.
    CHECK(set.skipped == 2);
    REQUIRE(set.skip_notes.size() == 2);
    CHECK((set.skip_notes[0] + set.skip_notes[1]).find("g_c_0") != std::string::npos);
    CHECK((set.skip_notes[0] + set.skip_notes[1]).find("f_c") != std::string::npos);
    CHECK(flatten(set) == std::vector<FlatPair>{{"f_x", "g_a_0", false, false, 0},
                                                {"f_y", "g_b_0", false, false, 0},
                                                {"g_a_0", "g_a_1", false, false, 1},
                                                {"g_a_1", "g_a_0", false, false, 1},
                                                {"g_b_0", "g_b_1", false, false, 1},
                                                {"g_b_1", "g_b_0", false, false, 1}});
}

TEST_CASE("reference-based whitehat keeps genuine targets but reconstructed impostor references") {
    const auto dataset = protocol_dataset();
    const auto set = eval::build_pairs(dataset.manifest,
                                       {eval::ProtocolSetting::Whitehat, true, std::nullopt});
    // f_c finds no reconstruction of appearance c; g_c_0 has no genuine peer.
    CHECK(set.skipped == 2);
    CHECK(flatten(set) == std::vector<FlatPair>{{"f_x", "r_a_0", false, false, 0},
                                                {"f_y", "r_b_0", false, false, 0},
                                                {"g_a_0", "g_a_1", false, false, 1},
                                                {"g_a_1", "g_a_0", false, false, 1},
                                                {"g_b_0", "g_b_1", false, false, 1},
                                                {"g_b_1", "g_b_0", false, false, 1}});
}

TEST_CASE("reference-based surrogate wraps only the forged pairs") {
    const auto dataset = protocol_dataset();
    const auto set = eval::build_pairs(
        dataset.manifest, {eval::ProtocolSetting::Surrogate, true,
                           data::SurrogateWrap{data::SurrogateKind::Resize, 2}});
    CHECK(set.skipped == 2);
    CHECK(flatten(set) == std::vector<FlatPair>{{"f_x", "g_a_0", true, true, 0},
                                                {"f_y", "g_b_0", true, true, 0},
                                                {"g_a_0", "g_a_1", false, false, 1},
                                                {"g_a_1", "g_a_0", false, false, 1},
                                                {"g_b_0", "g_b_1", false, false, 1},
                                                {"g_b_1", "g_b_0", false, false, 1}});
}

TEST_CASE("the probe's own driving video never serves as its reference") {
    auto dataset = protocol_dataset();
    // Rename so the driving video g_a_0 would be the lowest-id candidate for
    // f_y2's appearance; the rule must step over it to g_a_1.
    auto forged = data::make_record("f_y2", "a", "a", "b", {data::BaseTag::Forged, std::nullopt},
                                    ramp_frames(8, 4.0));
    dataset.manifest.records.push_back({"f_y2", "a", "a", "b", forged.provenance, "f_y2.csv"});
    dataset.videos["f_y2"] = std::move(forged);
    dataset.manifest.metadata["driving.f_y2"] = "g_a_0";

    const auto set = eval::build_pairs(dataset.manifest,
                                       {eval::ProtocolSetting::Conventional, true, std::nullopt});
    bool found = false;
    for (const auto& pair : set.pairs) {
        if (pair.probe_id != "f_y2") continue;
        found = true;
        CHECK(pair.reference_id.value() == "g_a_1");
    }
    CHECK(found);
}

TEST_CASE("protocols fail loudly when a required record set is missing") {
    auto dataset = protocol_dataset();
    auto& records = dataset.manifest.records;
    records.erase(std::remove_if(records.begin(), records.end(),
                                 [](const data::ManifestRecord& r) {
                                     return r.provenance.base == data::BaseTag::Reconstructed;
                                 }),
                  records.end());
    CHECK_THROWS_AS(
        eval::build_pairs(dataset.manifest, {eval::ProtocolSetting::Whitehat, true, std::nullopt}),
        Error);
    CHECK_NOTHROW(eval::build_pairs(dataset.manifest,
                                    {eval::ProtocolSetting::Conventional, true, std::nullopt}));
}

TEST_CASE("pair scores come from representation similarity on the unit interval") {
    const auto dataset = protocol_dataset();
    model::ModelConfig config;
    config.encoder.input_dim = 3;
    config.encoder.widths = {6, 4};
    config.aggregator.hidden_dim = 5;
    config.aggregator.repr_dim = 4;
    num::ParamStore store;
    num::SeededRng rng(77);
    model::init_params(store, config, rng);
    const synth::SurrogateTables tables;

    const auto set = eval::build_pairs(dataset.manifest,
                                       {eval::ProtocolSetting::Conventional, true, std::nullopt});
    for (const auto& pair : set.pairs) {
        const double score = eval::score_pair(store, config, dataset, pair, std::nullopt, tables);
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
    }

    // A probe compared against itself sits at exact similarity 1.
    eval::EvaluationPair self;
    self.probe_id = "g_a_0";
    self.reference_id = "g_a_0";
    self.label = 1;
    CHECK(eval::score_pair(store, config, dataset, self, std::nullopt, tables) ==
          doctest::Approx(1.0).epsilon(1e-12));

    eval::EvaluationPair free_pair;
    free_pair.probe_id = "g_a_0";
    CHECK_THROWS_AS(eval::score_pair(store, config, dataset, free_pair, std::nullopt, tables),
                    Error);

    eval::EvaluationPair wrapped = set.pairs.front();
    wrapped.probe_surrogate = true;
    CHECK_THROWS_AS(eval::score_pair(store, config, dataset, wrapped, std::nullopt, tables), Error);

    // A level-0 wrap must reproduce the clean score bit for bit.
    const auto surrogate_set = eval::build_pairs(
        dataset.manifest, {eval::ProtocolSetting::Surrogate, true,
                           data::SurrogateWrap{data::SurrogateKind::Jpeg, 0}});
    for (const auto& pair : surrogate_set.pairs) {
        eval::EvaluationPair clean = pair;
        clean.probe_surrogate = false;
        clean.reference_surrogate = false;
        CHECK(eval::score_pair(store, config, dataset, pair,
                               data::SurrogateWrap{data::SurrogateKind::Jpeg, 0}, tables) ==
              eval::score_pair(store, config, dataset, clean, std::nullopt, tables));
    }
}

TEST_CASE("score csv round-trips and rejects malformed tables") {
    std::vector<eval::ScoredPair> rows = {{"p000000", "g_a_0", "g_a_1", 1, 0.875},
                                          {"p000001", "f_x", "g_a_0", 0, 0.125}};
    const std::string text = eval::write_score_csv(rows);
    const auto back = eval::read_score_csv(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].pair_id == "p000000");
    CHECK(back[0].reference_id == "g_a_1");
    CHECK(back[0].label == 1);
    CHECK(back[0].score == 0.875);
    CHECK(back[1].probe_id == "f_x");

    CHECK_THROWS_AS(eval::read_score_csv(""), Error);
    CHECK_THROWS_AS(eval::read_score_csv("pair,probe\np0,g\n"), Error);
    const std::string header = "pair_id,probe_id,reference_id,label,score\n";
    CHECK_THROWS_AS(eval::read_score_csv(header + "p0,g,r,2,0.5\n"), Error);
    CHECK_THROWS_AS(eval::read_score_csv(header + "p0,g,r,1,1.5\n"), Error);
    CHECK_THROWS_AS(eval::read_score_csv(header + "p0,g,r,1,nan\n"), Error);
    CHECK_THROWS_AS(eval::read_score_csv(header + "p0,g,r,1\n"), Error);
    CHECK_NOTHROW(eval::read_score_csv(header + "p0,g,,0,0.25\n"));
}

TEST_CASE("external score adapters") {
    CHECK(eval::per_frame_average({0.2, 0.4, 0.9}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(eval::per_frame_average({}), Error);
    CHECK(eval::reciprocal_distance_score(0.0) == 1.0);
    CHECK(eval::reciprocal_distance_score(3.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(eval::reciprocal_distance_score(-0.5), Error);
}
