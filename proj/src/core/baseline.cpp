#include "core/baseline.hpp"

#include <cmath>
#include <vector>

#include "core/errors.hpp"
#include "core/numeric.hpp"
#include "core/params.hpp"

namespace idminer::baseline {

Eigen::VectorXd mean_feature(const Eigen::MatrixXd& frames) {
    if (frames.rows() == 0) raise(ErrorKind::Usage, "mean_feature of an empty video");
    num::require_finite(frames, "frames");
    return frames.colwise().mean().transpose();
}

BaselineModel train_baseline(const data::LoadedDataset& dataset, const BaselineConfig& config) {
    if (config.iterations < 1) raise(ErrorKind::Config, "iterations must be positive");
    if (!(config.lr > 0.0)) raise(ErrorKind::Config, "lr must be positive");

    std::vector<Eigen::VectorXd> features;
    std::vector<double> labels;
    for (const data::ManifestRecord& record : dataset.manifest.records) {
        if (record.provenance.wrapped()) continue;
        if (!dataset.manifest.is_train_identity(record.puppeteer)) continue;
        if (record.provenance.base == data::BaseTag::Genuine)
            labels.push_back(1.0);
        else if (record.provenance.base == data::BaseTag::Forged)
            labels.push_back(0.0);
        else
            continue;
        features.push_back(mean_feature(dataset.video(record.video_id).frames));
    }
    double positives = 0.0;
    for (double label : labels) positives += label;
    if (positives == 0.0 || positives == static_cast<double>(labels.size()))
        raise(ErrorKind::Capacity,
              "baseline training needs both genuine and forged videos in the train split");

    const Eigen::Index n = static_cast<Eigen::Index>(features.size());
    const Eigen::Index dim = features.front().size();
    Eigen::MatrixXd x(n, dim);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) = features[static_cast<std::size_t>(i)].transpose();
        y(i) = labels[static_cast<std::size_t>(i)];
    }

    BaselineModel model;
    model.feature_mean = x.colwise().mean().transpose();
    Eigen::MatrixXd centered = x.rowwise() - model.feature_mean.transpose();
    model.feature_scale =
        (centered.array().square().colwise().mean().sqrt() + 0.0).matrix().transpose();
    for (Eigen::Index d = 0; d < dim; ++d)
        if (model.feature_scale(d) < 1e-6) model.feature_scale(d) = 1e-6;
    const Eigen::MatrixXd standardized =
        centered.array().rowwise() / model.feature_scale.transpose().array();

    num::ParamStore store;
    store.add("bias", 1, 1);
    store.add("weights", dim, 1);
    const num::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
    for (int it = 0; it < config.iterations; ++it) {
        const Eigen::VectorXd logits =
            standardized * store.at("weights").value.col(0) +
            Eigen::VectorXd::Constant(n, store.at("bias").value(0, 0));
        const Eigen::VectorXd prob =
            (1.0 / (1.0 + (-logits.array()).exp())).matrix();
        const Eigen::VectorXd residual = (prob - y) / static_cast<double>(n);
        store.at("weights").grad.col(0) = standardized.transpose() * residual;
        store.at("bias").grad(0, 0) = residual.sum();
        num::adam_step(store, adam);
    }
    model.weights = store.at("weights").value.col(0);
    model.bias = store.at("bias").value(0, 0);
    return model;
}

namespace {

Eigen::VectorXd standardize(const BaselineModel& model, const Eigen::VectorXd& feature) {
    if (feature.size() != model.feature_mean.size())
        raise(ErrorKind::Shape, "feature dimension does not match the trained baseline");
    return ((feature - model.feature_mean).array() / model.feature_scale.array()).matrix();
}

}  // namespace

double baseline_score(const BaselineModel& model, const Eigen::MatrixXd& frames) {
    const Eigen::VectorXd z = standardize(model, mean_feature(frames));
    const double logit = model.weights.dot(z) + model.bias;
    return 1.0 / (1.0 + std::exp(-logit));
}

Eigen::VectorXd baseline_embedding(const BaselineModel& model, const Eigen::MatrixXd& frames) {
    return standardize(model, mean_feature(frames));
}

}  // namespace idminer::baseline
