#include "core/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/losses.hpp"
#include "core/serialize.hpp"

namespace idminer::train {

using nlohmann::json;

void validate_train_config(const TrainConfig& config) {
    if (config.epochs < 1) raise(ErrorKind::Config, "epochs must be positive");
    if (config.steps_per_epoch < 0)
        raise(ErrorKind::Config, "steps_per_epoch must be non-negative");
    if (!(config.lr > 0.0)) raise(ErrorKind::Config, "lr must be positive");
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0))
        raise(ErrorKind::Config, "beta1 must lie in [0, 1)");
    if (!(config.beta2 >= 0.0 && config.beta2 < 1.0))
        raise(ErrorKind::Config, "beta2 must lie in [0, 1)");
    if (!(config.tau > 0.0)) raise(ErrorKind::Config, "tau must be positive");
    if (!(config.lambda >= 0.0)) raise(ErrorKind::Config, "lambda must be non-negative");
    if (config.checkpoint_every < 0)
        raise(ErrorKind::Config, "checkpoint_every must be non-negative");
}

std::string train_config_to_json(const TrainConfig& config) {
    json j;
    j["epochs"] = config.epochs;
    j["steps_per_epoch"] = config.steps_per_epoch;
    j["lr"] = config.lr;
    j["beta1"] = config.beta1;
    j["beta2"] = config.beta2;
    j["tau"] = config.tau;
    j["lambda"] = config.lambda;
    j["classes_per_batch"] = config.batch.classes_per_batch;
    j["videos_per_class"] = config.batch.videos_per_class;
    j["genuine_per_class"] = config.batch.genuine_per_class;
    j["frame_pairs_per_video"] = config.batch.frame_pairs_per_video;
    j["seed"] = config.seed;
    j["checkpoint_every"] = config.checkpoint_every;
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::Format, std::string("invalid training config JSON: ") + e.what());
    }
    TrainConfig config;
    try {
        config.epochs = j.value("epochs", config.epochs);
        config.steps_per_epoch = j.value("steps_per_epoch", config.steps_per_epoch);
        config.lr = j.value("lr", config.lr);
        config.beta1 = j.value("beta1", config.beta1);
        config.beta2 = j.value("beta2", config.beta2);
        config.tau = j.value("tau", config.tau);
        config.lambda = j.value("lambda", config.lambda);
        config.batch.classes_per_batch =
            j.value("classes_per_batch", config.batch.classes_per_batch);
        config.batch.videos_per_class = j.value("videos_per_class", config.batch.videos_per_class);
        config.batch.genuine_per_class =
            j.value("genuine_per_class", config.batch.genuine_per_class);
        config.batch.frame_pairs_per_video =
            j.value("frame_pairs_per_video", config.batch.frame_pairs_per_video);
        config.seed = j.value("seed", config.seed);
        config.checkpoint_every = j.value("checkpoint_every", config.checkpoint_every);
    } catch (const json::exception& e) {
        raise(ErrorKind::Format, std::string("invalid training config field: ") + e.what());
    }
    return config;
}

int derived_steps_per_epoch(const TrainConfig& config, const data::DatasetManifest& manifest) {
    if (config.steps_per_epoch > 0) return config.steps_per_epoch;
    int train_forged = 0;
    for (const data::ManifestRecord& record : manifest.records)
        if (record.provenance.base == data::BaseTag::Forged && !record.provenance.wrapped() &&
            manifest.is_train_identity(record.puppeteer))
            ++train_forged;
    const int forged_per_batch =
        config.batch.classes_per_batch *
        (config.batch.videos_per_class - config.batch.genuine_per_class);
    if (forged_per_batch < 1)
        raise(ErrorKind::Config, "genuine_per_class leaves no forged videos in the batch");
    const int steps = train_forged / forged_per_batch;
    if (steps < 1)
        raise(ErrorKind::Config,
              "steps_per_epoch derives to zero (" + std::to_string(train_forged) +
                  " train forged videos, " + std::to_string(forged_per_batch) +
                  " forged per batch); set it explicitly");
    return steps;
}

StepLoss batch_losses(num::ParamStore& store, const model::ModelConfig& model_config,
                      const data::LoadedDataset& dataset, const TrainingBatch& batch,
                      double tau, double lambda, bool backward) {
    const int num_videos = static_cast<int>(batch.videos.size());
    if (num_videos == 0) raise(ErrorKind::Usage, "batch_losses: empty batch");
    const int repr_dim = model_config.aggregator.repr_dim;

    // Video level: every forged video through encoder + aggregator.
    std::vector<model::EncodeCache> enc_caches(num_videos);
    std::vector<model::AggregateCache> agg_caches(num_videos);
    Eigen::MatrixXd reps(num_videos, repr_dim);
    std::vector<int> video_class(num_videos);
    std::vector<int> positive_index(num_videos);
    for (int i = 0; i < num_videos; ++i) {
        const BatchVideo& video = batch.videos[i];
        const Eigen::MatrixXd frames = model::subsample_frames(
            dataset.video(video.video_id).frames, model_config.t_max);
        const Eigen::MatrixXd embedded =
            model::encode_frames(store, model_config, frames, &enc_caches[i]);
        reps.row(i) = model::aggregate(store, model_config, embedded, &agg_caches[i]);
        video_class[i] = video.class_index;
        positive_index[i] = video.positive_index;
    }
    const losses::PooledBatchLoss identity =
        losses::pooled_contrastive_loss(reps, video_class, positive_index, tau);

    // Frame level: genuine driving frames as queries, index-aligned forged
    // frames as positives. Driving frames never reach the aggregator.
    int frame_rows = 0;
    for (const BatchVideo& video : batch.videos)
        frame_rows += static_cast<int>(video.driving_frames.size());
    if (frame_rows == 0) raise(ErrorKind::Usage, "batch_losses: no frame pairs in batch");
    const int fau_dim = model_config.encoder.input_dim;
    Eigen::MatrixXd query_in(frame_rows, fau_dim);
    Eigen::MatrixXd positive_in(frame_rows, fau_dim);
    std::vector<int> frame_class(frame_rows);
    int row = 0;
    for (const BatchVideo& video : batch.videos) {
        const Eigen::MatrixXd& driving = dataset.video(video.driving_id).frames;
        const Eigen::MatrixXd& forged = dataset.video(video.video_id).frames;
        for (std::size_t k = 0; k < video.driving_frames.size(); ++k) {
            query_in.row(row) = driving.row(video.driving_frames[k]);
            positive_in.row(row) = forged.row(video.forged_frames[k]);
            frame_class[row] = video.class_index;
            ++row;
        }
    }
    model::EncodeCache query_cache, positive_cache;
    const Eigen::MatrixXd queries =
        model::encode_frames(store, model_config, query_in, &query_cache);
    const Eigen::MatrixXd positives =
        model::encode_frames(store, model_config, positive_in, &positive_cache);
    const losses::PairedBatchLoss artifact =
        losses::paired_contrastive_loss(queries, positives, frame_class, tau);

    StepLoss result;
    result.identity = identity.loss;
    result.artifact = artifact.loss;
    result.total = losses::total_loss(identity.loss, artifact.loss, lambda);

    if (backward) {
        for (int i = 0; i < num_videos; ++i) {
            const Eigen::MatrixXd d_embedded = model::aggregate_backward(
                store, model_config, agg_caches[i], identity.d_reps.row(i).transpose());
            model::encode_backward(store, model_config, enc_caches[i], d_embedded);
        }
        if (lambda > 0.0) {
            model::encode_backward(store, model_config, query_cache,
                                   lambda * artifact.d_queries);
            model::encode_backward(store, model_config, positive_cache,
                                   lambda * artifact.d_positives);
        }
    }
    return result;
}

namespace {

std::string checkpoint_name(std::uint64_t step) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "checkpoint_step_%06llu.json",
                  static_cast<unsigned long long>(step));
    return buffer;
}

TrainResult run_training(const data::LoadedDataset& dataset,
                         const model::ModelConfig& model_config, const TrainConfig& config,
                         const std::filesystem::path& out_dir, num::ParamStore& store,
                         std::vector<std::string> notes) {
    validate_train_config(config);
    const int steps_per_epoch = derived_steps_per_epoch(config, dataset.manifest);
    const std::uint64_t total_steps =
        static_cast<std::uint64_t>(config.epochs) * static_cast<std::uint64_t>(steps_per_epoch);
    if (store.step_count > total_steps)
        raise(ErrorKind::Usage, "checkpoint is at step " + std::to_string(store.step_count) +
                                    ", past the configured total of " +
                                    std::to_string(total_steps));

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path log_path = out_dir / "loss_log.csv";
    const bool fresh_log = store.step_count == 0 || !std::filesystem::exists(log_path);
    std::ofstream log(log_path, fresh_log ? std::ios::trunc : std::ios::app);
    if (!log) raise(ErrorKind::Io, "cannot open loss log '" + log_path.string() + "'");
    if (fresh_log) log << "step,l_identity,l_artifact,l_total\n";

    const num::AdamConfig adam{config.lr, config.beta1, config.beta2, 1e-8};
    const std::string config_echo = train_config_to_json(config);

    TrainResult result;
    result.model_config = model_config;
    result.notes = std::move(notes);
    while (store.step_count < total_steps) {
        const std::uint64_t step = store.step_count;
        num::SeededRng rng(num::derive_seed(config.seed, "batch", step));
        const TrainingBatch batch = build_training_batch(dataset, config.batch, rng);
        StepLoss loss =
            batch_losses(store, model_config, dataset, batch, config.tau, config.lambda, true);
        loss.step = step;
        if (!std::isfinite(loss.identity) || !std::isfinite(loss.artifact) ||
            !std::isfinite(loss.total))
            raise(ErrorKind::Numeric, "non-finite loss at step " + std::to_string(step) +
                                          "; latest checkpoint retained");
        num::adam_step(store, adam);
        log << step << ',' << num::format_double(loss.identity) << ','
            << num::format_double(loss.artifact) << ',' << num::format_double(loss.total)
            << '\n'
            << std::flush;
        result.executed.push_back(loss);

        if (config.checkpoint_every > 0 && store.step_count < total_steps &&
            store.step_count % static_cast<std::uint64_t>(config.checkpoint_every) == 0)
            model::save_checkpoint_file(out_dir / checkpoint_name(store.step_count),
                                        model_config, store, config_echo);
    }
    result.final_checkpoint = out_dir / "checkpoint_final.json";
    model::save_checkpoint_file(result.final_checkpoint, model_config, store, config_echo);
    return result;
}

void append_diff(std::vector<std::string>& notes, const std::string& field,
                 const std::string& before, const std::string& after) {
    if (before != after)
        notes.push_back("resume override: " + field + " " + before + " -> " + after);
}

std::vector<std::string> config_diff_notes(const TrainConfig& stored, const TrainConfig& next) {
    std::vector<std::string> notes;
    append_diff(notes, "epochs", std::to_string(stored.epochs), std::to_string(next.epochs));
    append_diff(notes, "steps_per_epoch", std::to_string(stored.steps_per_epoch),
                std::to_string(next.steps_per_epoch));
    append_diff(notes, "lr", num::format_double(stored.lr), num::format_double(next.lr));
    append_diff(notes, "beta1", num::format_double(stored.beta1), num::format_double(next.beta1));
    append_diff(notes, "beta2", num::format_double(stored.beta2), num::format_double(next.beta2));
    append_diff(notes, "tau", num::format_double(stored.tau), num::format_double(next.tau));
    append_diff(notes, "lambda", num::format_double(stored.lambda),
                num::format_double(next.lambda));
    append_diff(notes, "classes_per_batch", std::to_string(stored.batch.classes_per_batch),
                std::to_string(next.batch.classes_per_batch));
    append_diff(notes, "videos_per_class", std::to_string(stored.batch.videos_per_class),
                std::to_string(next.batch.videos_per_class));
    append_diff(notes, "genuine_per_class", std::to_string(stored.batch.genuine_per_class),
                std::to_string(next.batch.genuine_per_class));
    append_diff(notes, "frame_pairs_per_video",
                std::to_string(stored.batch.frame_pairs_per_video),
                std::to_string(next.batch.frame_pairs_per_video));
    append_diff(notes, "seed", std::to_string(stored.seed), std::to_string(next.seed));
    append_diff(notes, "checkpoint_every", std::to_string(stored.checkpoint_every),
                std::to_string(next.checkpoint_every));
    return notes;
}

std::string describe_model_config(const model::ModelConfig& config) {
    std::string widths;
    for (std::size_t i = 0; i < config.encoder.widths.size(); ++i) {
        if (i) widths += "-";
        widths += std::to_string(config.encoder.widths[i]);
    }
    return "input_dim=" + std::to_string(config.encoder.input_dim) + " widths=" + widths +
           " hidden_dim=" + std::to_string(config.aggregator.hidden_dim) +
           " repr_dim=" + std::to_string(config.aggregator.repr_dim) +
           " t_max=" + std::to_string(config.t_max);
}

}  // namespace

TrainResult train(const data::LoadedDataset& dataset, const model::ModelConfig& model_config,
                  const TrainConfig& config, const std::filesystem::path& out_dir) {
    validate_train_config(config);
    num::ParamStore store;
    num::SeededRng init_rng(num::derive_seed(config.seed, "init"));
    model::init_params(store, model_config, init_rng);
    return run_training(dataset, model_config, config, out_dir, store, {});
}

TrainResult resume(const std::filesystem::path& checkpoint_path,
                   const data::LoadedDataset& dataset, const TrainConfig& config,
                   const std::filesystem::path& out_dir,
                   const model::ModelConfig* expected_model) {
    model::Checkpoint checkpoint = model::load_checkpoint_file(checkpoint_path);
    if (expected_model != nullptr && !(*expected_model == checkpoint.config))
        raise(ErrorKind::Config,
              "checkpoint model config (" + describe_model_config(checkpoint.config) +
                  ") differs from the requested one (" + describe_model_config(*expected_model) +
                  ")");
    std::vector<std::string> notes;
    if (!checkpoint.train_config_json.empty())
        notes = config_diff_notes(train_config_from_json(checkpoint.train_config_json), config);
    return run_training(dataset, checkpoint.config, config, out_dir, checkpoint.store,
                        std::move(notes));
}

}  // namespace idminer::train
