#include <idminer/idminer.h>

#include <exception>
#include <string>

#include "core/errors.hpp"
#include "core/model.hpp"
#include "core/numeric.hpp"
#include "core/pipeline.hpp"
#include "core/serialize.hpp"

namespace {

thread_local std::string g_last_error;

idm_status status_of(idminer::ErrorKind kind) {
    using idminer::ErrorKind;
    switch (kind) {
        case ErrorKind::Shape: return IDM_ERR_SHAPE;
        case ErrorKind::Domain: return IDM_ERR_DOMAIN;
        case ErrorKind::Format: return IDM_ERR_FORMAT;
        case ErrorKind::Config: return IDM_ERR_CONFIG;
        case ErrorKind::Usage: return IDM_ERR_USAGE;
        case ErrorKind::Capacity: return IDM_ERR_CAPACITY;
        case ErrorKind::Protocol: return IDM_ERR_PROTOCOL;
        case ErrorKind::Integrity: return IDM_ERR_INTEGRITY;
        case ErrorKind::Numeric: return IDM_ERR_NUMERIC;
        case ErrorKind::Io: return IDM_ERR_IO;
        case ErrorKind::Capability: return IDM_ERR_CAPABILITY;
    }
    return IDM_ERR_USAGE;
}

template <typename Fn>
idm_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return IDM_OK;
    } catch (const idminer::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IDM_ERR_USAGE;
    }
}

idm_status require_arg(const void* pointer, const char* name) {
    if (pointer != nullptr) return IDM_OK;
    g_last_error = std::string(name) + " must not be NULL";
    return IDM_ERR_USAGE;
}

Eigen::MatrixXd frames_from_buffer(const double* frames, int32_t t, int32_t d,
                                   int32_t expected_dim) {
    if (t < 1) idminer::raise(idminer::ErrorKind::Shape, "frame count must be positive");
    if (d != expected_dim)
        idminer::raise(idminer::ErrorKind::Shape,
                       "frame dimension " + std::to_string(d) + " does not match the model's " +
                           std::to_string(expected_dim));
    Eigen::MatrixXd out(t, d);
    for (int32_t r = 0; r < t; ++r)
        for (int32_t c = 0; c < d; ++c) out(r, c) = frames[static_cast<std::size_t>(r) * d + c];
    idminer::num::require_finite(out, "frames");
    return out;
}

idminer::train::TrainConfig to_train_config(const idm_train_options* options) {
    idminer::train::TrainConfig config;
    if (options == nullptr) return config;
    config.epochs = options->epochs;
    config.steps_per_epoch = options->steps_per_epoch;
    config.lr = options->lr;
    config.beta1 = options->beta1;
    config.beta2 = options->beta2;
    config.tau = options->tau;
    config.lambda = options->lambda_;
    config.batch.classes_per_batch = options->classes_per_batch;
    config.batch.videos_per_class = options->videos_per_class;
    config.batch.genuine_per_class = options->genuine_per_class;
    config.batch.frame_pairs_per_video = options->frame_pairs_per_video;
    config.seed = options->seed;
    config.checkpoint_every = options->checkpoint_every;
    return config;
}

}  // namespace

struct idm_model {
    idminer::model::Checkpoint checkpoint;
};

extern "C" {

const char* idm_last_error(void) { return g_last_error.c_str(); }

const char* idm_version(void) {
    static const std::string version =
        std::string("library ") + idminer::pipeline::kVersion + ", manifest format " +
        std::to_string(idminer::pipeline::kManifestFormat) + ", checkpoint format " +
        std::to_string(idminer::pipeline::kCheckpointFormat);
    return version.c_str();
}

idm_status idm_synth_gen(const char* config_path, const char* out_dir, uint64_t seed) {
    if (idm_status s = require_arg(config_path, "config_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_dir, "out_dir"); s != IDM_OK) return s;
    return guarded([&] { idminer::pipeline::run_synth_gen(config_path, out_dir, seed); });
}

void idm_train_options_init(idm_train_options* options) {
    if (options == nullptr) return;
    const idminer::train::TrainConfig defaults;
    options->epochs = defaults.epochs;
    options->steps_per_epoch = defaults.steps_per_epoch;
    options->lr = defaults.lr;
    options->beta1 = defaults.beta1;
    options->beta2 = defaults.beta2;
    options->tau = defaults.tau;
    options->lambda_ = defaults.lambda;
    options->classes_per_batch = defaults.batch.classes_per_batch;
    options->videos_per_class = defaults.batch.videos_per_class;
    options->genuine_per_class = defaults.batch.genuine_per_class;
    options->frame_pairs_per_video = defaults.batch.frame_pairs_per_video;
    options->seed = defaults.seed;
    options->checkpoint_every = defaults.checkpoint_every;
}

idm_status idm_train(const char* manifest_path, const char* out_dir,
                     const idm_train_options* options) {
    if (idm_status s = require_arg(manifest_path, "manifest_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_dir, "out_dir"); s != IDM_OK) return s;
    return guarded(
        [&] { idminer::pipeline::run_train(manifest_path, out_dir, to_train_config(options)); });
}

idm_status idm_resume(const char* checkpoint_path, const char* manifest_path, const char* out_dir,
                      const idm_train_options* options) {
    if (idm_status s = require_arg(checkpoint_path, "checkpoint_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(manifest_path, "manifest_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_dir, "out_dir"); s != IDM_OK) return s;
    return guarded([&] {
        idminer::pipeline::run_resume(checkpoint_path, manifest_path, out_dir,
                                      to_train_config(options));
    });
}

idm_status idm_eval(const char* manifest_path, const char* checkpoint_path, const char* protocol,
                    const char* surrogate_kind, int32_t surrogate_level, const char* detector,
                    const char* reference, const char* out_prefix) {
    if (idm_status s = require_arg(manifest_path, "manifest_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_prefix, "out_prefix"); s != IDM_OK) return s;
    return guarded([&] {
        idminer::pipeline::EvalOptions options;
        if (protocol != nullptr) options.protocol = protocol;
        if (surrogate_kind != nullptr) options.surrogate_kind = surrogate_kind;
        options.surrogate_level = surrogate_level;
        if (detector != nullptr) options.detector = detector;
        if (reference != nullptr) options.reference = reference;
        idminer::pipeline::run_eval(manifest_path,
                                    checkpoint_path == nullptr ? "" : checkpoint_path, options,
                                    out_prefix);
    });
}

idm_status idm_reid(const char* manifest_path, const char* checkpoint_path, const char* detector,
                    const char* out_prefix) {
    if (idm_status s = require_arg(manifest_path, "manifest_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_prefix, "out_prefix"); s != IDM_OK) return s;
    return guarded([&] {
        idminer::pipeline::run_reid(manifest_path,
                                    checkpoint_path == nullptr ? "" : checkpoint_path,
                                    detector == nullptr ? "idminer" : detector, out_prefix);
    });
}

idm_status idm_sweep(const char* manifest_path, const char* checkpoint_path, const char* detector,
                     const char* out_prefix) {
    if (idm_status s = require_arg(manifest_path, "manifest_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_prefix, "out_prefix"); s != IDM_OK) return s;
    return guarded([&] {
        idminer::pipeline::run_sweep(manifest_path,
                                     checkpoint_path == nullptr ? "" : checkpoint_path,
                                     detector == nullptr ? "idminer" : detector, out_prefix);
    });
}

idm_status idm_grad_check(uint64_t seed, int32_t configurations, double tolerance,
                          const char* report_path) {
    if (idm_status s = require_arg(report_path, "report_path"); s != IDM_OK) return s;
    idminer::pipeline::GradCheckSummary summary;
    const idm_status status = guarded([&] {
        summary = idminer::pipeline::run_grad_check(seed, configurations, tolerance, report_path);
    });
    if (status != IDM_OK) return status;
    if (!summary.passed) {
        g_last_error = "gradient check failed: max relative error " +
                       idminer::num::format_double(summary.max_rel_err) + " at " +
                       summary.worst_check + " (tolerance " +
                       idminer::num::format_double(tolerance) + ")";
        return IDM_ERR_NUMERIC;
    }
    return IDM_OK;
}

idm_status idm_eval_scores(const char* scores_path, int32_t average_frames,
                           const char* out_prefix) {
    if (idm_status s = require_arg(scores_path, "scores_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_prefix, "out_prefix"); s != IDM_OK) return s;
    return guarded([&] {
        idminer::pipeline::run_eval_scores(scores_path, average_frames != 0, out_prefix);
    });
}

idm_status idm_model_open(const char* checkpoint_path, idm_model** out_model) {
    if (idm_status s = require_arg(checkpoint_path, "checkpoint_path"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_model, "out_model"); s != IDM_OK) return s;
    *out_model = nullptr;
    return guarded([&] {
        auto handle = new idm_model{idminer::model::load_checkpoint_file(checkpoint_path)};
        *out_model = handle;
    });
}

void idm_model_close(idm_model* model) { delete model; }

idm_status idm_model_repr_dim(const idm_model* model, int32_t* out_dim) {
    if (idm_status s = require_arg(model, "model"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_dim, "out_dim"); s != IDM_OK) return s;
    *out_dim = model->checkpoint.config.aggregator.repr_dim;
    g_last_error.clear();
    return IDM_OK;
}

idm_status idm_model_embed(const idm_model* model, const double* frames, int32_t t, int32_t d,
                           double* out_repr) {
    if (idm_status s = require_arg(model, "model"); s != IDM_OK) return s;
    if (idm_status s = require_arg(frames, "frames"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_repr, "out_repr"); s != IDM_OK) return s;
    return guarded([&] {
        const Eigen::MatrixXd input =
            frames_from_buffer(frames, t, d, model->checkpoint.config.encoder.input_dim);
        const Eigen::VectorXd repr = idminer::model::forward_video(
            model->checkpoint.store, model->checkpoint.config, input);
        for (Eigen::Index i = 0; i < repr.size(); ++i) out_repr[i] = repr(i);
    });
}

idm_status idm_model_score_pair(const idm_model* model, const double* probe_frames,
                                int32_t probe_t, const double* reference_frames,
                                int32_t reference_t, int32_t d, double* out_score) {
    if (idm_status s = require_arg(model, "model"); s != IDM_OK) return s;
    if (idm_status s = require_arg(probe_frames, "probe_frames"); s != IDM_OK) return s;
    if (idm_status s = require_arg(reference_frames, "reference_frames"); s != IDM_OK) return s;
    if (idm_status s = require_arg(out_score, "out_score"); s != IDM_OK) return s;
    return guarded([&] {
        const int32_t dim = model->checkpoint.config.encoder.input_dim;
        const Eigen::MatrixXd probe = frames_from_buffer(probe_frames, probe_t, d, dim);
        const Eigen::MatrixXd reference =
            frames_from_buffer(reference_frames, reference_t, d, dim);
        const Eigen::VectorXd a =
            idminer::model::forward_video(model->checkpoint.store, model->checkpoint.config, probe);
        const Eigen::VectorXd b = idminer::model::forward_video(
            model->checkpoint.store, model->checkpoint.config, reference);
        *out_score = (idminer::num::cosine_similarity(a, b) + 1.0) / 2.0;
    });
}

}  // extern "C"
