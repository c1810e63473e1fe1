#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/fau_data.hpp"
#include "core/rng.hpp"
#include "core/serialize.hpp"
#include "core/synth.hpp"

using namespace idminer;

namespace {

// One AU driven by a single frequency-0.25 oscillator with no jitter, no
// coupling, and unit gain: frames(t) = 2.5 + sin(pi/2 t + phase), exactly
// periodic with period 4.
synth::IdentityProfile tone_profile() {
    synth::IdentityProfile profile;
    profile.identity = "tone";
    profile.dynamics.freq = Eigen::MatrixXd::Constant(1, 1, 0.25);
    profile.dynamics.amp = Eigen::MatrixXd::Constant(1, 1, 1.0);
    profile.dynamics.jitter = Eigen::MatrixXd::Zero(1, 1);
    profile.coupling = Eigen::MatrixXd::Identity(1, 1);
    profile.baseline = Eigen::VectorXd::Constant(1, 2.0);
    profile.offset = Eigen::VectorXd::Constant(1, 0.5);
    profile.gain = Eigen::VectorXd::Constant(1, 1.0);
    return profile;
}

synth::PopulationConfig noiseless_population(int dim) {
    synth::PopulationConfig config;
    config.fau_dim = dim;
    config.observation_noise = 0.0;
    return config;
}

Eigen::MatrixXd wave_frames(int t) {
    Eigen::MatrixXd m(t, 2);
    for (int i = 0; i < t; ++i) {
        m(i, 0) = 2.0 + std::sin(0.37 * i);
        m(i, 1) = 1.0 + 0.5 * std::cos(0.11 * i);
    }
    return m;
}

double rms(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return std::sqrt((a - b).array().square().mean());
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream stream(path, std::ios::binary);
    REQUIRE(stream.good());
    return {std::istreambuf_iterator<char>(stream), std::istreambuf_iterator<char>()};
}

synth::GenerationConfig tiny_generation() {
    synth::GenerationConfig config;
    config.train_identities = 2;
    config.test_identities = 2;
    config.videos_per_identity = 2;
    config.frames_per_video = 32;
    return config;
}

}  // namespace

TEST_CASE("sampled population statistics sit at the configured ranges") {
    const synth::PopulationConfig config;
    double baseline_sum = 0.0;
    int count = 0;
    for (int i = 0; i < 200; ++i) {
        num::SeededRng rng(num::derive_seed(4001, "identity", static_cast<std::uint64_t>(i)));
        const auto profile = synth::sample_identity(rng, config, "p");
        baseline_sum += profile.baseline.sum();
        count += static_cast<int>(profile.baseline.size());
        CHECK(profile.gain.minCoeff() >= config.gain_min);
        CHECK(profile.gain.maxCoeff() <= config.gain_max);
        CHECK(profile.dynamics.freq.minCoeff() >= config.freq_min);
        CHECK(profile.dynamics.freq.maxCoeff() <= config.freq_max);
        CHECK(Eigen::LLT<Eigen::MatrixXd>(profile.coupling).info() == Eigen::Success);
    }
    // Baselines are uniform on [1, 3]; the mean over 3400 draws stays near 2.
    CHECK(std::abs(baseline_sum / count - 2.0) < 0.05);
}

TEST_CASE("a pure tone averages to baseline plus offset over whole periods") {
    const auto profile = tone_profile();
    num::SeededRng rng(5);
    const auto record =
        synth::generate_genuine(profile, 4000, noiseless_population(1), rng, "tone_v");
    CHECK(record.frames.rows() == 4000);
    CHECK(record.frames.col(0).mean() == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("a jitter-free tone is exactly periodic") {
    const auto profile = tone_profile();
    num::SeededRng rng(6);
    const auto record =
        synth::generate_genuine(profile, 64, noiseless_population(1), rng, "tone_v");
    for (int t = 0; t + 4 < 64; ++t)
        CHECK(record.frames(t, 0) == doctest::Approx(record.frames(t + 4, 0)).epsilon(1e-9));
}

TEST_CASE("observation noise shows up as variance around the clean signal") {
    const auto profile = tone_profile();
    synth::PopulationConfig noisy = noiseless_population(1);
    noisy.observation_noise = 0.3;
    num::SeededRng clean_rng(7), noisy_rng(7);
    const auto clean = synth::generate_genuine(profile, 5000, noiseless_population(1), clean_rng, "c");
    const auto noisy_rec = synth::generate_genuine(profile, 5000, noisy, noisy_rng, "n");
    // Same seed, so the phase draw matches and the residual is pure noise.
    const double var = (noisy_rec.frames - clean.frames).array().square().mean();
    CHECK(std::abs(std::sqrt(var) - 0.3) < 0.02);
}

TEST_CASE("generation is a pure function of the seed") {
    const synth::PopulationConfig config;
    num::SeededRng id_rng_a(11), id_rng_b(11);
    const auto pa = synth::sample_identity(id_rng_a, config, "p");
    const auto pb = synth::sample_identity(id_rng_b, config, "p");
    num::SeededRng va(12), vb(12), vc(13);
    const auto ra = synth::generate_genuine(pa, 50, config, va, "v");
    const auto rb = synth::generate_genuine(pb, 50, config, vb, "v");
    const auto rc = synth::generate_genuine(pa, 50, config, vc, "v");
    CHECK((ra.frames - rb.frames).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ra.frames - rc.frames).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("the artifact signature depends on the algorithm id and seed only") {
    const auto a = synth::derive_signature("algo_a", 5, 0.6, 0.1, 0.02, 99);
    const auto b = synth::derive_signature("algo_a", 5, 0.6, 0.1, 0.02, 99);
    const auto c = synth::derive_signature("algo_b", 5, 0.6, 0.1, 0.02, 99);
    const auto d = synth::derive_signature("algo_a", 5, 0.6, 0.1, 0.02, 100);
    CHECK((a.pattern - b.pattern).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.pattern - c.pattern).cwiseAbs().maxCoeff() > 0.0);
    CHECK((a.pattern - d.pattern).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("self-transfer reduces to the white-hat reconstruction") {
    const synth::PopulationConfig config;
    num::SeededRng id_rng(21);
    const auto profile = synth::sample_identity(id_rng, config, "ida");
    num::SeededRng v_rng(22);
    const auto driving = synth::generate_genuine(profile, 60, config, v_rng, "g_v");
    const auto sig = synth::derive_signature("alg", config.fau_dim, 0.6, 0.15, 0.04, 31);

    num::SeededRng fake_rng(33), recon_rng(33);
    const auto self_fake = synth::apply_deepfake(driving, profile, profile, sig, fake_rng, "s_v");
    const auto recon = synth::apply_whitehat(driving, sig, recon_rng, "r_v");
    CHECK(self_fake.provenance.base == data::BaseTag::Reconstructed);
    CHECK(recon.provenance.base == data::BaseTag::Reconstructed);
    REQUIRE(self_fake.frames.rows() == recon.frames.rows());
    // The appearance map cancels and both consume the rng identically, so the
    // two records differ only by round-off in the cancelled map.
    CHECK((self_fake.frames - recon.frames).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("forgery and reconstruction share the same artifact channel") {
    synth::PopulationConfig config;
    num::SeededRng sub_rng(41), tgt_rng(42);
    const auto subject = synth::sample_identity(sub_rng, config, "ida");
    const auto target = synth::sample_identity(tgt_rng, config, "idb");
    num::SeededRng v_rng(43);
    const auto driving = synth::generate_genuine(subject, 40, config, v_rng, "g_v");
    // No temporal jitter, so both outputs keep the driving length and the
    // noise draws subtract out exactly.
    const auto sig = synth::derive_signature("alg", config.fau_dim, 0.6, 2.0, 0.0, 51);

    num::SeededRng fake_rng(52), recon_rng(52);
    const auto forged = synth::apply_deepfake(driving, subject, target, sig, fake_rng, "f_v");
    const auto recon = synth::apply_whitehat(driving, sig, recon_rng, "r_v");
    CHECK(forged.provenance.base == data::BaseTag::Forged);
    CHECK(forged.puppeteer == "ida");
    CHECK(forged.appearance == "idb");
    REQUIRE(forged.frames.rows() == recon.frames.rows());

    Eigen::MatrixXd expected(driving.frames.rows(), driving.frames.cols());
    for (Eigen::Index t = 0; t < driving.frames.rows(); ++t)
        for (Eigen::Index i = 0; i < driving.frames.cols(); ++i) {
            const double drive = (driving.frames(t, i) - subject.baseline(i) - subject.offset(i)) /
                                 subject.gain(i);
            expected(t, i) =
                target.baseline(i) + target.offset(i) + target.gain(i) * drive - driving.frames(t, i);
        }
    CHECK(((forged.frames - recon.frames) - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("temporal jitter changes the output length within its budget") {
    const auto profile = tone_profile();
    num::SeededRng v_rng(61);
    const auto driving =
        synth::generate_genuine(profile, 128, noiseless_population(1), v_rng, "g_v");
    const auto sig = synth::derive_signature("alg", 1, 0.0, 0.0, 0.05, 62);
    bool some_shorter = false, some_longer = false;
    for (int i = 0; i < 40; ++i) {
        num::SeededRng rng(num::derive_seed(63, "recon", static_cast<std::uint64_t>(i)));
        const auto recon = synth::apply_whitehat(driving, sig, rng, "r_v");
        CHECK(recon.frames.rows() >= 121);
        CHECK(recon.frames.rows() <= 135);
        some_shorter = some_shorter || recon.frames.rows() < 128;
        some_longer = some_longer || recon.frames.rows() > 128;
    }
    CHECK(some_shorter);
    CHECK(some_longer);
}

TEST_CASE("deepfake refuses non-genuine driving records") {
    const synth::PopulationConfig config;
    num::SeededRng id_rng(71);
    const auto profile = synth::sample_identity(id_rng, config, "ida");
    num::SeededRng v_rng(72);
    auto driving = synth::generate_genuine(profile, 20, config, v_rng, "g_v");
    const auto sig = synth::derive_signature("alg", config.fau_dim, 0.6, 0.1, 0.0, 73);
    num::SeededRng op_rng(74);
    auto recon = synth::apply_whitehat(driving, sig, op_rng, "r_v");
    CHECK_THROWS_AS(synth::apply_whitehat(recon, sig, op_rng, "r_v2"), Error);
    CHECK_THROWS_AS(synth::apply_deepfake(recon, profile, profile, sig, op_rng, "f_v"), Error);
}

TEST_CASE("surrogate level 0 is the identity for every kind") {
    const Eigen::MatrixXd frames = wave_frames(50);
    const synth::SurrogateTables tables;
    for (data::SurrogateKind kind : data::all_surrogate_kinds()) {
        const Eigen::MatrixXd out = synth::surrogate_frames(frames, {kind, 0}, tables);
        CHECK((out - frames).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("surrogate distortion grows with the level") {
    const Eigen::MatrixXd frames = wave_frames(120);
    const synth::SurrogateTables tables;
    for (data::SurrogateKind kind : data::all_surrogate_kinds()) {
        double previous = 0.0;
        for (int level = 1; level <= 5; ++level) {
            const double d = rms(synth::surrogate_frames(frames, {kind, level}, tables), frames);
            CHECK(d >= previous - 1e-9);
            previous = d;
        }
        CHECK(previous > 0.0);
    }
}

TEST_CASE("quantization and block averaging are idempotent") {
    const Eigen::MatrixXd frames = wave_frames(64);
    const synth::SurrogateTables tables;
    for (data::SurrogateKind kind : {data::SurrogateKind::Jpeg, data::SurrogateKind::Vc}) {
        for (int level = 1; level <= 5; ++level) {
            const Eigen::MatrixXd once = synth::surrogate_frames(frames, {kind, level}, tables);
            const Eigen::MatrixXd twice = synth::surrogate_frames(once, {kind, level}, tables);
            CHECK((once - twice).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("surrogate wrapping marks provenance and refuses double wraps") {
    const auto record = data::make_record("g", "a", "a", "a", {data::BaseTag::Genuine, std::nullopt},
                                          wave_frames(30));
    const synth::SurrogateTables tables;
    const auto wrapped = synth::apply_surrogate(record, {data::SurrogateKind::Blur, 2}, tables);
    CHECK(wrapped.provenance.base == data::BaseTag::Genuine);
    REQUIRE(wrapped.provenance.surrogate.has_value());
    CHECK(wrapped.provenance.surrogate->kind == data::SurrogateKind::Blur);
    CHECK(wrapped.provenance.surrogate->level == 2);
    CHECK(wrapped.subject == record.subject);
    CHECK_THROWS_AS(synth::apply_surrogate(wrapped, {data::SurrogateKind::Jpeg, 1}, tables), Error);
    CHECK_THROWS_AS(synth::surrogate_frames(record.frames, {data::SurrogateKind::Jpeg, 6}, tables),
                    Error);
}

TEST_CASE("surrogate tables are validated") {
    synth::SurrogateTables tables;
    tables.resize_factors = {1, 2, 3};
    CHECK_THROWS_AS(synth::validate_tables(tables), Error);
    tables = synth::SurrogateTables{};
    tables.jpeg_steps[0] = 0.1;
    CHECK_THROWS_AS(synth::validate_tables(tables), Error);
    tables = synth::SurrogateTables{};
    tables.blur_sigmas = {0, 2, 1, 3, 4, 5};
    CHECK_THROWS_AS(synth::validate_tables(tables), Error);
    tables = synth::SurrogateTables{};
    tables.vc_blocks = {1, 2, 2.5, 3, 4, 5};
    CHECK_THROWS_AS(synth::validate_tables(tables), Error);
}

TEST_CASE("dataset builds are byte-identical across runs") {
    const auto config = tiny_generation();
    const auto dir_a = std::filesystem::temp_directory_path() / "idminer_synth_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "idminer_synth_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    const auto manifest_a = synth::build_rddp_dataset(config, 7001, dir_a);
    const auto manifest_b = synth::build_rddp_dataset(config, 7001, dir_b);
    CHECK(data::save_manifest(manifest_a) == data::save_manifest(manifest_b));
    for (const auto& record : manifest_a.records)
        CHECK(slurp(dir_a / record.path) == slurp(dir_b / record.path));

    // 2 train + 2 test identities, 2 videos each, one forgery per video.
    CHECK(manifest_a.records.size() == 24);
    CHECK(manifest_a.train_identities.size() == 2);
    CHECK(manifest_a.test_identities.size() == 2);
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("forgery targets stay inside the driving video's split") {
    const auto config = tiny_generation();
    const auto dir = std::filesystem::temp_directory_path() / "idminer_synth_split";
    std::filesystem::remove_all(dir);
    const auto manifest = synth::build_rddp_dataset(config, 7002, dir);
    for (const auto& record : manifest.records) {
        if (record.provenance.base != data::BaseTag::Forged) continue;
        CHECK(record.appearance != record.puppeteer);
        CHECK(manifest.is_train_identity(record.appearance) ==
              manifest.is_train_identity(record.puppeteer));
        const std::string driving = manifest.driving_of(record.video_id);
        CHECK(manifest.record(driving).puppeteer == record.puppeteer);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("generation config text round-trips through the parser") {
    const std::string text =
        "[population]\n"
        "fau_dim = 5\n"
        "frames_per_video = 40\n"
        "videos_per_identity = 3\n"
        "[artifact]\n"
        "pattern_scale = 0.9\n"
        "[surrogate]\n"
        "jpeg_steps = 0, 0.2, 0.4, 0.6, 0.8, 1.0\n"
        "[split]\n"
        "train_identities = 4\n"
        "test_identities = 2\n";
    const auto config = synth::generation_config_from_text(text);
    CHECK(config.population.fau_dim == 5);
    CHECK(config.frames_per_video == 40);
    CHECK(config.videos_per_identity == 3);
    CHECK(config.pattern_scale == 0.9);
    CHECK(config.tables.jpeg_steps[1] == 0.2);
    CHECK(config.train_identities == 4);
    CHECK(config.test_identities == 2);
    CHECK_THROWS_AS(synth::generation_config_from_text("[population]\n"), Error);
    CHECK_THROWS_AS(synth::generation_config_from_text(
                        "[population]\nfau_dim = 0\n[artifact]\n[surrogate]\n[split]\n"),
                    Error);
}
