#pragma once

#include <Eigen/Dense>
#include <vector>

namespace idminer::losses {

// One contrastive instance: a query pulled toward its positive and pushed
// away from every negative. Vectors are expected unit-norm; similarity is
// then the plain dot product.
struct ContrastiveInstance {
    Eigen::VectorXd query;
    Eigen::VectorXd positive;
    std::vector<Eigen::VectorXd> negatives;
};

struct InfoNceGrads {
    Eigen::VectorXd d_query;
    Eigen::VectorXd d_positive;
    std::vector<Eigen::VectorXd> d_negatives;
};

// Softmax-over-similarities loss with temperature tau. With no negatives the
// softmax is a certainty and the loss is exactly zero.
double info_nce(const ContrastiveInstance& instance, double tau, InfoNceGrads* grads = nullptr);

// Mean contrastive loss over N (query, positive) rows where the negatives of
// row i are the positive rows of every other class. Each row must see at
// least one other class. Returned gradients are gradients of the mean.
struct PairedBatchLoss {
    double loss = 0.0;
    Eigen::MatrixXd d_queries;
    Eigen::MatrixXd d_positives;
};

PairedBatchLoss paired_contrastive_loss(const Eigen::MatrixXd& queries,
                                        const Eigen::MatrixXd& positives,
                                        const std::vector<int>& row_class, double tau);

// Mean contrastive loss over B representation rows: query i's positive is row
// positive_index[i] (same class, never i itself), its negatives are all rows
// of other classes. Gradient combines every role each row plays.
struct PooledBatchLoss {
    double loss = 0.0;
    Eigen::MatrixXd d_reps;
};

PooledBatchLoss pooled_contrastive_loss(const Eigen::MatrixXd& reps,
                                        const std::vector<int>& row_class,
                                        const std::vector<int>& positive_index, double tau);

double total_loss(double identity_loss, double artifact_loss, double lambda);

}  // namespace idminer::losses
