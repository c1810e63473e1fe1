#pragma once

#include <Eigen/Dense>

#include "core/fau_data.hpp"

namespace idminer::baseline {

// Reference detector: logistic regression on per-video mean frame features.
// It keys on whatever separates genuine from forged feature means, which on
// this data is the additive artifact channel plus appearance offsets, so it
// is exactly the appearance/artifact-reliant detector the rebalanced
// protocols are designed to expose.
struct BaselineConfig {
    int iterations = 500;
    double lr = 0.05;
};

struct BaselineModel {
    Eigen::VectorXd feature_mean;   // standardization over train means
    Eigen::VectorXd feature_scale;  // per-feature stddev, floored
    Eigen::VectorXd weights;
    double bias = 0.0;
};

Eigen::VectorXd mean_feature(const Eigen::MatrixXd& frames);

// Full-batch Adam from zero weights on the train split's genuine (label 1)
// and forged (label 0) videos. No sampling, so the fit is deterministic.
BaselineModel train_baseline(const data::LoadedDataset& dataset, const BaselineConfig& config);

// P(genuine) of one video, in (0, 1).
double baseline_score(const BaselineModel& model, const Eigen::MatrixXd& frames);

// Standardized mean feature vector; the baseline's re-identification
// representation.
Eigen::VectorXd baseline_embedding(const BaselineModel& model, const Eigen::MatrixXd& frames);

}  // namespace idminer::baseline
