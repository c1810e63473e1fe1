#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace idminer::eval {

struct Scored {
    double score = 0.0;
    int label = 0;
};

// Mann-Whitney statistic P(score+ > score-) + P(tie)/2, computed through
// midranks. Needs both labels present; any finite score scale is accepted
// since the statistic only reads the ordering.
double auc(const std::vector<Scored>& set);

// Fraction of items with (score >= threshold) matching the label.
double accuracy(const std::vector<Scored>& set, double threshold);

struct CalibratedAccuracy {
    double accuracy = 0.0;
    double threshold = 0.0;
};

// Accuracy-maximizing threshold over the candidate set {distinct scores, 1.0}
// under the predict-positive-at-or-above rule; ties resolve to the smallest
// threshold. Scores must lie in [0, 1].
CalibratedAccuracy calibrated_accuracy(const std::vector<Scored>& set);

struct GalleryItem {
    Eigen::VectorXd representation;
    std::string puppeteer;
};

struct ReidInstance {
    Eigen::VectorXd probe;
    std::string puppeteer;
    std::vector<GalleryItem> gallery;
};

struct ReidReport {
    double rank1 = 0.0;
    double rank5 = 0.0;
    double map = 0.0;
    int n_probes = 0;   // probes with at least one same-puppeteer gallery item
    int skipped = 0;    // probes without one, excluded from all three metrics
};

// Ranks each gallery by descending cosine similarity to the probe, ties
// broken by gallery order. Rank-k counts probes whose top k contains a
// same-puppeteer item; AP is the mean of precision at each relevant rank.
ReidReport reid_metrics(const std::vector<ReidInstance>& instances);

}  // namespace idminer::eval
