#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"
#include "core/numeric.hpp"

namespace idminer::eval {

namespace {

void check_scored(const std::vector<Scored>& set) {
    if (set.empty()) raise(ErrorKind::Domain, "no scored items");
    for (const Scored& item : set) {
        num::require_finite(item.score, "score");
        if (item.label != 0 && item.label != 1)
            raise(ErrorKind::Domain, "label must be 0 or 1");
    }
}

}  // namespace

double auc(const std::vector<Scored>& set) {
    check_scored(set);
    std::size_t positives = 0;
    for (const Scored& item : set) positives += item.label;
    const std::size_t negatives = set.size() - positives;
    if (positives == 0 || negatives == 0)
        raise(ErrorKind::Domain, "AUC needs both a positive and a negative item");

    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return set[a].score < set[b].score;
    });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && set[order[j]].score == set[order[i]].score) ++j;
        // 1-based ranks i+1 .. j share the midrank.
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (set[order[k]].label == 1) positive_rank_sum += midrank;
        i = j;
    }
    const double n1 = static_cast<double>(positives);
    const double n0 = static_cast<double>(negatives);
    return (positive_rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

double accuracy(const std::vector<Scored>& set, double threshold) {
    check_scored(set);
    if (!(threshold >= 0.0 && threshold <= 1.0))
        raise(ErrorKind::Domain, "threshold must lie in [0, 1]");
    std::size_t correct = 0;
    for (const Scored& item : set)
        if ((item.score >= threshold ? 1 : 0) == item.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

CalibratedAccuracy calibrated_accuracy(const std::vector<Scored>& set) {
    check_scored(set);
    for (const Scored& item : set)
        if (item.score < 0.0 || item.score > 1.0)
            raise(ErrorKind::Domain, "calibration needs scores in [0, 1]");
    std::vector<double> candidates;
    candidates.reserve(set.size() + 1);
    for (const Scored& item : set) candidates.push_back(item.score);
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    CalibratedAccuracy best{-1.0, 0.0};
    for (double threshold : candidates) {
        const double value = accuracy(set, threshold);
        if (value > best.accuracy) best = {value, threshold};
    }
    return best;
}

ReidReport reid_metrics(const std::vector<ReidInstance>& instances) {
    if (instances.empty()) raise(ErrorKind::Domain, "no re-identification probes");
    ReidReport report;
    double rank1_hits = 0.0, rank5_hits = 0.0, ap_sum = 0.0;
    for (const ReidInstance& instance : instances) {
        if (instance.gallery.empty())
            raise(ErrorKind::Domain, "probe '" + instance.puppeteer + "' has an empty gallery");
        bool any_relevant = false;
        for (const GalleryItem& item : instance.gallery)
            if (item.puppeteer == instance.puppeteer) any_relevant = true;
        if (!any_relevant) {
            ++report.skipped;
            continue;
        }

        std::vector<std::size_t> order(instance.gallery.size());
        std::iota(order.begin(), order.end(), 0);
        std::vector<double> similarity(instance.gallery.size());
        for (std::size_t g = 0; g < instance.gallery.size(); ++g)
            similarity[g] =
                num::cosine_similarity(instance.probe, instance.gallery[g].representation);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return similarity[a] > similarity[b];
        });

        const std::size_t top = std::min<std::size_t>(5, order.size());
        if (instance.gallery[order[0]].puppeteer == instance.puppeteer) rank1_hits += 1.0;
        for (std::size_t k = 0; k < top; ++k)
            if (instance.gallery[order[k]].puppeteer == instance.puppeteer) {
                rank5_hits += 1.0;
                break;
            }

        double hits = 0.0, precision_sum = 0.0;
        for (std::size_t rank = 1; rank <= order.size(); ++rank)
            if (instance.gallery[order[rank - 1]].puppeteer == instance.puppeteer) {
                hits += 1.0;
                precision_sum += hits / static_cast<double>(rank);
            }
        ap_sum += precision_sum / hits;
        ++report.n_probes;
    }
    if (report.n_probes == 0)
        raise(ErrorKind::Domain, "no probe has a same-puppeteer gallery item");
    report.rank1 = rank1_hits / report.n_probes;
    report.rank5 = rank5_hits / report.n_probes;
    report.map = ap_sum / report.n_probes;
    return report;
}

}  // namespace idminer::eval
