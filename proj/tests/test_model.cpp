#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/gradcheck.hpp"
#include "core/model.hpp"
#include "core/numeric.hpp"
#include "core/params.hpp"
#include "core/rng.hpp"

using namespace idminer;

namespace {

model::ModelConfig tiny_config(num::SeededRng& rng) {
    model::ModelConfig config;
    config.encoder.input_dim = 2 + static_cast<int>(rng.next_below(3));
    config.encoder.widths.clear();
    const int layers = 1 + static_cast<int>(rng.next_below(2));
    for (int i = 0; i < layers; ++i)
        config.encoder.widths.push_back(3 + static_cast<int>(rng.next_below(3)));
    config.aggregator.hidden_dim = 3 + static_cast<int>(rng.next_below(3));
    config.aggregator.repr_dim = 2 + static_cast<int>(rng.next_below(3));
    config.t_max = 16;
    return config;
}

Eigen::MatrixXd random_frames(num::SeededRng& rng, int t, int d) {
    Eigen::MatrixXd m(t, d);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("initialization is seed-deterministic and in range") {
    model::ModelConfig config;
    num::SeededRng rng_a(3), rng_b(3);
    num::ParamStore a, b;
    model::init_params(a, config, rng_a);
    model::init_params(b, config, rng_b);
    REQUIRE(a.scalar_count() == b.scalar_count());
    CHECK(a.scalar_count() > 10000);
    for (const auto& [name, p] : a.entries()) {
        CHECK((p.value - b.at(name).value).cwiseAbs().maxCoeff() == 0.0);
        CHECK(p.value.cwiseAbs().maxCoeff() <= 1.0);
    }
}

TEST_CASE("frame embeddings are unit rows") {
    model::ModelConfig config;
    num::SeededRng rng(5);
    num::ParamStore store;
    model::init_params(store, config, rng);
    const Eigen::MatrixXd frames = random_frames(rng, 7, config.encoder.input_dim);
    const Eigen::MatrixXd out = model::encode_frames(store, config, frames);
    REQUIRE(out.rows() == 7);
    REQUIRE(out.cols() == config.encoder.output_dim());
    for (int t = 0; t < 7; ++t)
        CHECK(out.row(t).norm() == doctest::Approx(1.0).epsilon(1e-12));
    const Eigen::VectorXd one = model::encode_frame(store, config, frames.row(3).transpose());
    CHECK((one.transpose() - out.row(3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("video representations are unit vectors sensitive to frame order") {
    model::ModelConfig config;
    num::SeededRng rng(8);
    num::ParamStore store;
    model::init_params(store, config, rng);
    const Eigen::MatrixXd frames = random_frames(rng, 12, config.encoder.input_dim);
    const Eigen::VectorXd rep = model::forward_video(store, config, frames);
    CHECK(rep.norm() == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::MatrixXd reversed = frames.colwise().reverse();
    const Eigen::VectorXd rep_rev = model::forward_video(store, config, reversed);
    CHECK((rep - rep_rev).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("subsampling keeps short videos and caps long ones") {
    num::SeededRng rng(9);
    const Eigen::MatrixXd frames = random_frames(rng, 10, 3);
    const Eigen::MatrixXd same = model::subsample_frames(frames, 10);
    CHECK((same - frames).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd capped = model::subsample_frames(frames, 4);
    REQUIRE(capped.rows() == 4);
    CHECK((capped.row(0) - frames.row(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((capped.row(3) - frames.row(9)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(model::subsample_frames(frames, 0), Error);
}

TEST_CASE("encoder gradients match central differences across seeded configs") {
    for (int trial = 0; trial < 10; ++trial) {
        num::SeededRng rng(num::derive_seed(100, "encoder", static_cast<std::uint64_t>(trial)));
        const model::ModelConfig config = tiny_config(rng);
        num::ParamStore store;
        model::init_params(store, config, rng);
        const Eigen::MatrixXd frames = random_frames(rng, 5, config.encoder.input_dim);
        Eigen::MatrixXd direction(5, config.encoder.output_dim());
        for (int i = 0; i < direction.size(); ++i)
            direction.data()[i] = rng.normal();

        auto loss = [&] {
            const Eigen::MatrixXd out = model::encode_frames(store, config, frames);
            return (out.array() * direction.array()).sum();
        };
        store.zero_grads();
        model::EncodeCache cache;
        model::encode_frames(store, config, frames, &cache);
        model::encode_backward(store, config, cache, direction);
        const auto report = num::gradient_check(loss, store);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("aggregator gradients match central differences across seeded configs") {
    for (int trial = 0; trial < 10; ++trial) {
        num::SeededRng rng(num::derive_seed(200, "aggregator", static_cast<std::uint64_t>(trial)));
        const model::ModelConfig config = tiny_config(rng);
        num::ParamStore store;
        model::init_params(store, config, rng);
        const int t = 3 + static_cast<int>(rng.next_below(5));
        const Eigen::MatrixXd embeddings = random_frames(rng, t, config.encoder.output_dim());
        Eigen::VectorXd direction(config.aggregator.repr_dim);
        for (int i = 0; i < direction.size(); ++i) direction(i) = rng.normal();

        auto loss = [&] {
            return model::aggregate(store, config, embeddings).dot(direction);
        };
        store.zero_grads();
        model::AggregateCache cache;
        model::aggregate(store, config, embeddings, &cache);
        model::aggregate_backward(store, config, cache, direction);
        const auto report = num::gradient_check(loss, store);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("input gradients of the full stack match central differences") {
    num::SeededRng rng(num::derive_seed(300, "stack"));
    const model::ModelConfig config = tiny_config(rng);
    num::ParamStore store;
    model::init_params(store, config, rng);
    Eigen::MatrixXd frames = random_frames(rng, 4, config.encoder.input_dim);
    Eigen::VectorXd direction(config.aggregator.repr_dim);
    for (int i = 0; i < direction.size(); ++i) direction(i) = rng.normal();

    auto loss = [&] {
        const Eigen::MatrixXd embedded = model::encode_frames(store, config, frames);
        return model::aggregate(store, config, embedded).dot(direction);
    };

    store.zero_grads();
    model::EncodeCache enc_cache;
    const Eigen::MatrixXd embedded = model::encode_frames(store, config, frames, &enc_cache);
    model::AggregateCache agg_cache;
    model::aggregate(store, config, embedded, &agg_cache);
    const Eigen::MatrixXd d_embedded =
        model::aggregate_backward(store, config, agg_cache, direction);
    const Eigen::MatrixXd d_frames = model::encode_backward(store, config, enc_cache, d_embedded);

    const double eps = 1e-6;
    for (int t = 0; t < frames.rows(); ++t)
        for (int j = 0; j < frames.cols(); ++j) {
            const double keep = frames(t, j);
            frames(t, j) = keep + eps;
            const double up = loss();
            frames(t, j) = keep - eps;
            const double down = loss();
            frames(t, j) = keep;
            CHECK(d_frames(t, j) == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-4));
        }
}

TEST_CASE("encode rejects mismatched input dimensions") {
    model::ModelConfig config;
    num::SeededRng rng(11);
    num::ParamStore store;
    model::init_params(store, config, rng);
    const Eigen::MatrixXd bad = random_frames(rng, 4, config.encoder.input_dim + 1);
    CHECK_THROWS_AS(model::encode_frames(store, config, bad), Error);
    CHECK_THROWS_AS(model::aggregate(store, config, bad), Error);
    CHECK_THROWS_AS(model::forward_video(store, config, Eigen::MatrixXd(0, 17)), Error);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    num::SeededRng rng(13);
    const model::ModelConfig config = tiny_config(rng);
    num::ParamStore store;
    model::init_params(store, config, rng);
    auto& p = store.entries().begin()->second;
    p.adam_m.setConstant(0.25);
    p.adam_v.setConstant(0.125);
    store.step_count = 42;

    const std::string text = model::save_checkpoint(config, store, "{\"epochs\":1}");
    const model::Checkpoint back = model::load_checkpoint(text);
    CHECK(back.config == config);
    CHECK(back.train_config_json == "{\"epochs\":1}");
    CHECK(back.store.step_count == 42);
    REQUIRE(back.store.scalar_count() == store.scalar_count());
    for (const auto& [name, param] : store.entries()) {
        CHECK((param.value - back.store.at(name).value).cwiseAbs().maxCoeff() == 0.0);
        CHECK((param.adam_m - back.store.at(name).adam_m).cwiseAbs().maxCoeff() == 0.0);
        CHECK((param.adam_v - back.store.at(name).adam_v).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(model::save_checkpoint(back.config, back.store, back.train_config_json) == text);

    const auto path = std::filesystem::temp_directory_path() / "idminer_ckpt_test.json";
    model::save_checkpoint_file(path, config, store, "{}");
    const model::Checkpoint from_file = model::load_checkpoint_file(path);
    CHECK(from_file.config == config);
    std::filesystem::remove(path);
}

TEST_CASE("corrupted checkpoints are rejected") {
    num::SeededRng rng(17);
    const model::ModelConfig config = tiny_config(rng);
    num::ParamStore store;
    model::init_params(store, config, rng);
    const std::string text = model::save_checkpoint(config, store, "{}");
    CHECK_THROWS_AS(model::load_checkpoint(text + "x"), Error);
    CHECK_THROWS_AS(model::load_checkpoint("{\"hello\": 1}"), Error);
    std::string renamed = text;
    const auto pos = renamed.find("\"value\"");
    REQUIRE(pos != std::string::npos);
    renamed.replace(pos, 7, "\"vaLUE\"");
    CHECK_THROWS_AS(model::load_checkpoint(renamed), Error);
}
