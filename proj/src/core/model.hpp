#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "core/params.hpp"
#include "core/rng.hpp"

namespace idminer::model {

// Frame encoder: MLP over one FAU vector, tanh at every layer, final output
// L2-normalized. widths lists hidden and output sizes after the input.
struct EncoderConfig {
    int input_dim = 17;
    std::vector<int> widths = {64, 64, 32};

    int output_dim() const { return widths.back(); }
    bool operator==(const EncoderConfig&) const = default;
};

// GRU over the encoded frame sequence, followed by a normalized projection
// of the last hidden state.
struct AggregatorConfig {
    int hidden_dim = 64;
    int repr_dim = 64;

    bool operator==(const AggregatorConfig&) const = default;
};

struct ModelConfig {
    EncoderConfig encoder;
    AggregatorConfig aggregator;
    int t_max = 256;

    bool operator==(const ModelConfig&) const = default;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) on weights, zero biases.
void init_params(num::ParamStore& store, const ModelConfig& config, num::SeededRng& rng);

struct EncodeCache {
    Eigen::MatrixXd input;                        // T x D
    std::vector<Eigen::MatrixXd> activations;     // per layer, T x width
    Eigen::VectorXd norms;                        // per frame, pre-normalization
    Eigen::MatrixXd output;                       // T x output_dim, unit rows
};

// Encodes every row of `frames`; rows of the result are unit frame embeddings.
Eigen::MatrixXd encode_frames(const num::ParamStore& store, const ModelConfig& config,
                              const Eigen::MatrixXd& frames, EncodeCache* cache = nullptr);

Eigen::VectorXd encode_frame(const num::ParamStore& store, const ModelConfig& config,
                             const Eigen::VectorXd& frame);

// Accumulates parameter gradients for the upstream gradient d_output and
// returns the gradient with respect to the input frames.
Eigen::MatrixXd encode_backward(num::ParamStore& store, const ModelConfig& config,
                                const EncodeCache& cache, const Eigen::MatrixXd& d_output);

struct AggregateCache {
    Eigen::MatrixXd inputs;      // T x input_dim
    Eigen::MatrixXd h;           // T x hidden, h.row(t) is the state after frame t
    Eigen::MatrixXd z, r, hcand; // gate values per step
    Eigen::VectorXd projection;  // pre-normalization projection of the mean state
    double projection_norm = 0.0;
    Eigen::VectorXd output;      // unit representation
};

Eigen::VectorXd aggregate(const num::ParamStore& store, const ModelConfig& config,
                          const Eigen::MatrixXd& embeddings, AggregateCache* cache = nullptr);

// Backpropagation through time; returns gradients w.r.t. the input embeddings.
Eigen::MatrixXd aggregate_backward(num::ParamStore& store, const ModelConfig& config,
                                   const AggregateCache& cache, const Eigen::VectorXd& d_repr);

// Uniform subsampling applied before encoding whenever the video is longer
// than t_max; otherwise the identity.
Eigen::MatrixXd subsample_frames(const Eigen::MatrixXd& frames, int t_max);

Eigen::VectorXd forward_video(const num::ParamStore& store, const ModelConfig& config,
                              const Eigen::MatrixXd& frames);

// Checkpoint: canonical JSON carrying the model config, training config echo,
// every parameter with its Adam moments (base64 doubles), and step_count.
// load(save(x)) is bit-exact.
std::string save_checkpoint(const ModelConfig& config, const num::ParamStore& store,
                            const std::string& train_config_json);

struct Checkpoint {
    ModelConfig config;
    num::ParamStore store;
    std::string train_config_json;
};

Checkpoint load_checkpoint(const std::string& text);
void save_checkpoint_file(const std::filesystem::path& path, const ModelConfig& config,
                          const num::ParamStore& store, const std::string& train_config_json);
Checkpoint load_checkpoint_file(const std::filesystem::path& path);

}  // namespace idminer::model
