#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "core/config_file.hpp"
#include "core/errors.hpp"
#include "core/fau_data.hpp"
#include "core/rng.hpp"

using namespace idminer;

namespace {

Eigen::MatrixXd some_frames(int t, int d) {
    Eigen::MatrixXd m(t, d);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = 0.1 * i + 0.01 * j;
    return m;
}

data::DatasetManifest small_manifest() {
    data::DatasetManifest m;
    m.fau_dim = 4;
    m.train_identities = {"ida", "idb"};
    m.test_identities = {"idc"};
    m.records.push_back({"g1", "ida", "ida", "ida", {data::BaseTag::Genuine, std::nullopt}, "fau/g1.csv"});
    m.records.push_back({"f1", "idb", "idb", "ida", {data::BaseTag::Forged, std::nullopt}, "fau/f1.csv"});
    m.records.push_back(
        {"r1", "ida", "ida", "ida", {data::BaseTag::Reconstructed, std::nullopt}, "fau/r1.csv"});
    m.metadata["driving.f1"] = "g1";
    m.metadata["driving.r1"] = "g1";
    return m;
}

}  // namespace

TEST_CASE("tag and kind names round-trip") {
    for (data::BaseTag tag :
         {data::BaseTag::Genuine, data::BaseTag::Forged, data::BaseTag::Reconstructed})
        CHECK(data::base_tag_from_string(data::to_string(tag)) == tag);
    for (data::SurrogateKind kind : data::all_surrogate_kinds())
        CHECK(data::surrogate_kind_from_string(data::to_string(kind)) == kind);
    CHECK_THROWS_AS(data::base_tag_from_string("authentic"), Error);
    CHECK_THROWS_AS(data::surrogate_kind_from_string("sharpen"), Error);
}

TEST_CASE("record invariants tie labels to provenance") {
    auto frames = some_frames(3, 2);
    CHECK_NOTHROW(data::make_record("g", "a", "a", "a", {data::BaseTag::Genuine, std::nullopt}, frames));
    CHECK_THROWS_AS(data::make_record("g", "a", "a", "b", {data::BaseTag::Genuine, std::nullopt}, frames),
                    Error);
    CHECK_NOTHROW(data::make_record("f", "a", "a", "b", {data::BaseTag::Forged, std::nullopt}, frames));
    CHECK_THROWS_AS(data::make_record("f", "a", "a", "a", {data::BaseTag::Forged, std::nullopt}, frames),
                    Error);
    CHECK_NOTHROW(
        data::make_record("r", "a", "a", "a", {data::BaseTag::Reconstructed, std::nullopt}, frames));
    CHECK_THROWS_AS(
        data::make_record("r", "a", "a", "b", {data::BaseTag::Reconstructed, std::nullopt}, frames),
        Error);
    CHECK_THROWS_AS(data::make_record("", "a", "a", "a", {data::BaseTag::Genuine, std::nullopt}, frames),
                    Error);
    CHECK_THROWS_AS(data::make_record("e", "a", "a", "a", {data::BaseTag::Genuine, std::nullopt},
                                      Eigen::MatrixXd(0, 2)),
                    Error);
    data::Provenance bad_level{data::BaseTag::Genuine, data::SurrogateWrap{data::SurrogateKind::Jpeg, 6}};
    CHECK_THROWS_AS(data::make_record("s", "a", "a", "a", bad_level, frames), Error);
}

TEST_CASE("manifest save and load round-trips exactly") {
    data::DatasetManifest m = small_manifest();
    m.records[1].provenance.surrogate = data::SurrogateWrap{data::SurrogateKind::Blur, 3};
    m.metadata["note"] = "x";
    const data::DatasetManifest back = data::load_manifest(data::save_manifest(m));
    CHECK(back == m);
    CHECK(data::save_manifest(back) == data::save_manifest(m));
}

TEST_CASE("manifest lookups work and duplicates are rejected") {
    data::DatasetManifest m = small_manifest();
    CHECK(m.record("f1").puppeteer == "ida");
    CHECK(m.driving_of("f1") == "g1");
    CHECK(m.is_train_identity("ida"));
    CHECK_FALSE(m.is_train_identity("idc"));
    CHECK_THROWS_AS(m.record("nope"), Error);
    CHECK_THROWS_AS(m.driving_of("g1"), Error);

    m.records.push_back(m.records.front());
    CHECK_THROWS_AS(data::validate_manifest(m), Error);
}

TEST_CASE("manifests with overlapping identity pools are rejected") {
    data::DatasetManifest m = small_manifest();
    m.test_identities.push_back("ida");
    CHECK_THROWS_AS(data::validate_manifest(m), Error);
}

TEST_CASE("fuzzed provenance fields never crash the parser") {
    data::DatasetManifest m = small_manifest();
    const std::string good = data::save_manifest(m);
    num::SeededRng rng(17);
    const std::string tokens = "abcdefgh\"{}[]:,0123456789";
    int rejected = 0;
    for (int trial = 0; trial < 300; ++trial) {
        std::string text = good;
        const std::size_t cut = 1 + rng.next_below(text.size() - 2);
        const std::size_t len = 1 + rng.next_below(6);
        std::string noise;
        for (std::size_t i = 0; i < len; ++i)
            noise.push_back(tokens[static_cast<std::size_t>(rng.next_below(tokens.size()))]);
        text.replace(cut, std::min(len, text.size() - cut), noise);
        try {
            (void)data::load_manifest(text);
        } catch (const Error&) {
            ++rejected;
        }
    }
    CHECK(rejected > 0);
}

TEST_CASE("fau csv round-trips through the writer and reader") {
    const auto schema = data::au_column_names(4);
    const Eigen::MatrixXd frames = some_frames(5, 4);
    const std::string text = data::write_fau_csv(frames, schema);
    std::istringstream stream(text);
    const Eigen::MatrixXd back = data::read_fau_csv(stream, schema);
    CHECK(back.rows() == 5);
    CHECK((back - frames).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reader accepts shuffled columns and drops failed rows") {
    std::istringstream stream(
        "frame, success, AU02_r, AU01_r\n"
        "0, 1, 2.5, 1.5\n"
        "1, 0, 9.0, 9.0\n"
        "2, 1, 4.5, 3.5\n");
    const Eigen::MatrixXd frames = data::read_fau_csv(stream, {"AU01_r", "AU02_r"});
    REQUIRE(frames.rows() == 2);
    CHECK(frames(0, 0) == 1.5);
    CHECK(frames(0, 1) == 2.5);
    CHECK(frames(1, 0) == 3.5);
    CHECK(frames(1, 1) == 4.5);
}

TEST_CASE("reader rejects malformed tables") {
    const std::vector<std::string> schema = {"AU01_r"};
    {
        std::istringstream s("AU01_r\n");
        CHECK_THROWS_AS(data::read_fau_csv(s, schema), Error);
    }
    {
        std::istringstream s("nope\n1.0\n");
        CHECK_THROWS_AS(data::read_fau_csv(s, schema), Error);
    }
    {
        std::istringstream s("AU01_r\nbanana\n");
        CHECK_THROWS_AS(data::read_fau_csv(s, schema), Error);
    }
    {
        std::istringstream s("AU01_r, AU02_r\n1.0\n");
        CHECK_THROWS_AS(data::read_fau_csv(s, {"AU01_r", "AU02_r"}), Error);
    }
}

TEST_CASE("the 17-channel schema is the OpenFace intensity set") {
    const auto names = data::au_column_names(17);
    REQUIRE(names.size() == 17);
    CHECK(names.front() == "AU01_r");
    CHECK(names.back() == "AU45_r");
    const auto generated = data::au_column_names(3);
    REQUIRE(generated.size() == 3);
}

TEST_CASE("key-value config parses sections, comments, and lists") {
    const auto file = data::KeyValueFile::parse(
        "# header comment\n"
        "[alpha]\n"
        "x = 3\n"
        "name = hello   # trailing\n"
        "\n"
        "[beta]\n"
        "list = 1, 2.5, 3\n"
        "; another comment\n");
    CHECK(file.has_section("alpha"));
    CHECK_FALSE(file.has_section("gamma"));
    CHECK(file.get_int("alpha", "x") == 3);
    CHECK(file.get_string("alpha", "name") == "hello");
    CHECK(file.get_double("beta", "missing", 7.5) == 7.5);
    const auto list = file.get_doubles("beta", "list", {});
    REQUIRE(list.size() == 3);
    CHECK(list[1] == 2.5);
    CHECK_THROWS_AS(file.get_string("alpha", "missing"), Error);
    CHECK_THROWS_AS(data::KeyValueFile::parse("x = 1\n"), Error);
    CHECK_THROWS_AS(data::KeyValueFile::parse("[s]\nbroken\n"), Error);
    CHECK_THROWS_AS(file.get_int("alpha", "name"), Error);
}
