#include "core/losses.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/numeric.hpp"

namespace idminer::losses {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0)) raise(ErrorKind::Domain, "contrastive loss: tau must be positive");
}

// Softmax over {positive} + negatives in logit space, with the max shifted
// out. Returns the loss; fills probabilities (positive first) when asked.
double stable_instance_loss(double a_pos, const std::vector<double>& a_negs,
                            std::vector<double>* probs) {
    double m = a_pos;
    for (double a : a_negs) m = std::max(m, a);
    double rest = 0.0;
    for (double a : a_negs) rest += std::exp(a - m);
    const double e_pos = std::exp(a_pos - m);
    const double loss = m == a_pos ? std::log1p(rest) : (m - a_pos) + std::log(e_pos + rest);
    if (probs) {
        const double total = e_pos + rest;
        probs->clear();
        probs->reserve(a_negs.size() + 1);
        probs->push_back(e_pos / total);
        for (double a : a_negs) probs->push_back(std::exp(a - m) / total);
    }
    return loss;
}

}  // namespace

double info_nce(const ContrastiveInstance& instance, double tau, InfoNceGrads* grads) {
    check_tau(tau);
    const Eigen::Index dim = instance.query.size();
    if (dim == 0) raise(ErrorKind::Shape, "info_nce: empty query");
    if (instance.positive.size() != dim)
        raise(ErrorKind::Shape, "info_nce: positive dimension mismatch");
    for (const auto& n : instance.negatives)
        if (n.size() != dim) raise(ErrorKind::Shape, "info_nce: negative dimension mismatch");

    if (grads) {
        grads->d_query = VectorXd::Zero(dim);
        grads->d_positive = VectorXd::Zero(dim);
        grads->d_negatives.assign(instance.negatives.size(), VectorXd::Zero(dim));
    }
    if (instance.negatives.empty()) return 0.0;

    const double a_pos = instance.query.dot(instance.positive) / tau;
    std::vector<double> a_negs(instance.negatives.size());
    for (std::size_t j = 0; j < instance.negatives.size(); ++j)
        a_negs[j] = instance.query.dot(instance.negatives[j]) / tau;

    std::vector<double> probs;
    const double loss = stable_instance_loss(a_pos, a_negs, grads ? &probs : nullptr);
    if (grads) {
        const double c_pos = (probs[0] - 1.0) / tau;
        grads->d_query = c_pos * instance.positive;
        grads->d_positive = c_pos * instance.query;
        for (std::size_t j = 0; j < instance.negatives.size(); ++j) {
            const double c = probs[j + 1] / tau;
            grads->d_query += c * instance.negatives[j];
            grads->d_negatives[j] = c * instance.query;
        }
    }
    return loss;
}

PairedBatchLoss paired_contrastive_loss(const MatrixXd& queries, const MatrixXd& positives,
                                        const std::vector<int>& row_class, double tau) {
    check_tau(tau);
    const Eigen::Index n = queries.rows();
    if (n == 0) raise(ErrorKind::Usage, "paired_contrastive_loss: no instances");
    if (positives.rows() != n || positives.cols() != queries.cols())
        raise(ErrorKind::Shape, "paired_contrastive_loss: query/positive shape mismatch");
    if (static_cast<Eigen::Index>(row_class.size()) != n)
        raise(ErrorKind::Shape, "paired_contrastive_loss: class list length mismatch");

    const MatrixXd logits = queries * positives.transpose() / tau;
    MatrixXd coef = MatrixXd::Zero(n, n);
    double loss_sum = 0.0;
    std::vector<double> a_negs;
    std::vector<double> probs;
    std::vector<Eigen::Index> neg_cols;
    for (Eigen::Index i = 0; i < n; ++i) {
        a_negs.clear();
        neg_cols.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (row_class[static_cast<std::size_t>(j)] != row_class[static_cast<std::size_t>(i)]) {
                a_negs.push_back(logits(i, j));
                neg_cols.push_back(j);
            }
        }
        if (a_negs.empty())
            raise(ErrorKind::Usage,
                  "paired_contrastive_loss: instance " + std::to_string(i) + " has no negatives");
        loss_sum += stable_instance_loss(logits(i, i), a_negs, &probs);
        coef(i, i) = (probs[0] - 1.0) / tau;
        for (std::size_t k = 0; k < neg_cols.size(); ++k) coef(i, neg_cols[k]) = probs[k + 1] / tau;
    }

    PairedBatchLoss out;
    const double scale = 1.0 / static_cast<double>(n);
    out.loss = loss_sum * scale;
    out.d_queries = scale * (coef * positives);
    out.d_positives = scale * (coef.transpose() * queries);
    return out;
}

PooledBatchLoss pooled_contrastive_loss(const MatrixXd& reps, const std::vector<int>& row_class,
                                        const std::vector<int>& positive_index, double tau) {
    check_tau(tau);
    const Eigen::Index n = reps.rows();
    if (n == 0) raise(ErrorKind::Usage, "pooled_contrastive_loss: no instances");
    if (static_cast<Eigen::Index>(row_class.size()) != n ||
        static_cast<Eigen::Index>(positive_index.size()) != n)
        raise(ErrorKind::Shape, "pooled_contrastive_loss: index list length mismatch");

    const MatrixXd logits = reps * reps.transpose() / tau;
    MatrixXd coef = MatrixXd::Zero(n, n);
    double loss_sum = 0.0;
    std::vector<double> a_negs;
    std::vector<double> probs;
    std::vector<Eigen::Index> neg_cols;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int pos = positive_index[static_cast<std::size_t>(i)];
        if (pos < 0 || pos >= n)
            raise(ErrorKind::Usage, "pooled_contrastive_loss: positive index out of range");
        if (pos == i)
            raise(ErrorKind::Usage, "pooled_contrastive_loss: instance is its own positive");
        if (row_class[static_cast<std::size_t>(pos)] != row_class[static_cast<std::size_t>(i)])
            raise(ErrorKind::Usage, "pooled_contrastive_loss: positive from a different class");
        a_negs.clear();
        neg_cols.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (row_class[static_cast<std::size_t>(j)] != row_class[static_cast<std::size_t>(i)]) {
                a_negs.push_back(logits(i, j));
                neg_cols.push_back(j);
            }
        }
        if (a_negs.empty())
            raise(ErrorKind::Usage,
                  "pooled_contrastive_loss: instance " + std::to_string(i) + " has no negatives");
        loss_sum += stable_instance_loss(logits(i, pos), a_negs, &probs);
        coef(i, pos) += (probs[0] - 1.0) / tau;
        for (std::size_t k = 0; k < neg_cols.size(); ++k) coef(i, neg_cols[k]) += probs[k + 1] / tau;
    }

    PooledBatchLoss out;
    const double scale = 1.0 / static_cast<double>(n);
    out.loss = loss_sum * scale;
    out.d_reps = scale * (coef * reps + coef.transpose() * reps);
    return out;
}

double total_loss(double identity_loss, double artifact_loss, double lambda) {
    num::require_finite(identity_loss, "total_loss: identity term");
    num::require_finite(artifact_loss, "total_loss: artifact term");
    if (lambda < 0.0) raise(ErrorKind::Domain, "total_loss: lambda must be non-negative");
    return identity_loss + lambda * artifact_loss;
}

}  // namespace idminer::losses
