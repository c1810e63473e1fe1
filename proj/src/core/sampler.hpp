#pragma once

#include <string>
#include <vector>

#include "core/fau_data.hpp"
#include "core/rng.hpp"

namespace idminer::train {

struct SamplerConfig {
    int classes_per_batch = 8;
    int videos_per_class = 8;
    int genuine_per_class = 2;
    int frame_pairs_per_video = 16;

    bool operator==(const SamplerConfig&) const = default;
};

// One video drawn into a batch. Forged members carry their genuine driving
// video and the aligned frame-index pairs feeding the frame-level loss;
// genuine members drive themselves and contribute no frame pairs.
struct BatchVideo {
    std::string video_id;
    std::string driving_id;
    std::string puppeteer;
    bool genuine = false;
    int class_index = 0;
    int positive_index = -1;  // video-level identity positive, index into videos
    std::vector<int> driving_frames;
    std::vector<int> forged_frames;
};

struct TrainingBatch {
    std::vector<std::string> classes;  // puppeteer identity per class slot
    std::vector<BatchVideo> videos;    // classes_per_batch * videos_per_class entries
};

// Draws one class-balanced batch from the train split: classes_per_batch
// puppeteer identities without replacement, then per identity
// (videos_per_class - genuine_per_class) of its forged videos and
// genuine_per_class of its own genuine videos, each without replacement.
// Genuine members anchor the class at the point the re-identification
// gallery probes, so the video-level loss aligns a forgery with its
// puppeteer's genuine footage and not merely with sibling forgeries. The
// identity positive of a video is another batch member of the same class
// with a different appearance, preferring one driven by a different genuine
// video. Frame pairs, built for forged members only, map driving index i to
// round(i * T_forged / T_driving), capped so both indices stay valid.
TrainingBatch build_training_batch(const data::LoadedDataset& dataset,
                                   const SamplerConfig& config, num::SeededRng& rng);

}  // namespace idminer::train
