#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/fau_data.hpp"
#include "core/model.hpp"
#include "core/params.hpp"
#include "core/sampler.hpp"

namespace idminer::train {

struct TrainConfig {
    int epochs = 120;
    int steps_per_epoch = 0;  // 0: derive floor(#train forged / forged videos per batch)
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double tau = 0.07;
    double lambda = 0.1;
    SamplerConfig batch;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // steps between mid-run checkpoints; 0 keeps final only

    bool operator==(const TrainConfig&) const = default;
};

void validate_train_config(const TrainConfig& config);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);
int derived_steps_per_epoch(const TrainConfig& config, const data::DatasetManifest& manifest);

struct StepLoss {
    std::uint64_t step = 0;
    double identity = 0.0;
    double artifact = 0.0;
    double total = 0.0;
};

// Losses of one batch; with `backward`, gradients of
// identity + lambda * artifact accumulate into the store. The artifact loss
// is always evaluated, but lambda == 0 drops it from the gradient.
StepLoss batch_losses(num::ParamStore& store, const model::ModelConfig& model_config,
                      const data::LoadedDataset& dataset, const TrainingBatch& batch,
                      double tau, double lambda, bool backward);

struct TrainResult {
    model::ModelConfig model_config;
    std::filesystem::path final_checkpoint;
    std::vector<StepLoss> executed;      // steps run by this invocation
    std::vector<std::string> notes;      // resume overrides and similar remarks
};

// Fresh run: initializes parameters from config.seed and trains
// epochs * steps_per_epoch batches. Writes loss_log.csv, cadence checkpoints
// and checkpoint_final.json under out_dir. Every stochastic choice of step s
// draws from a generator seeded by (seed, "batch", s), so reruns and resumed
// runs replay the identical stream with no generator state in checkpoints.
TrainResult train(const data::LoadedDataset& dataset, const model::ModelConfig& model_config,
                  const TrainConfig& config, const std::filesystem::path& out_dir);

// Continues a checkpoint to the step total implied by `config`. When
// `expected_model` is given it must equal the stored model config; training
// fields that differ from the stored echo proceed and are reported in notes.
TrainResult resume(const std::filesystem::path& checkpoint_path,
                   const data::LoadedDataset& dataset, const TrainConfig& config,
                   const std::filesystem::path& out_dir,
                   const model::ModelConfig* expected_model = nullptr);

}  // namespace idminer::train
