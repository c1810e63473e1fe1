#include "core/sampler.hpp"

#include <cmath>
#include <set>

#include "core/errors.hpp"

namespace idminer::train {

namespace {

void validate_sampler_config(const SamplerConfig& config) {
    if (config.classes_per_batch < 1)
        raise(ErrorKind::Config, "classes_per_batch must be positive");
    if (config.videos_per_class < 2)
        raise(ErrorKind::Config,
              "videos_per_class must be at least 2; identity positives pair two videos of "
              "one class");
    if (config.genuine_per_class < 0)
        raise(ErrorKind::Config, "genuine_per_class must be non-negative");
    if (config.genuine_per_class >= config.videos_per_class)
        raise(ErrorKind::Config,
              "genuine_per_class must leave at least one forged video per class; the "
              "frame-level loss needs driving/forged pairs");
    if (config.frame_pairs_per_video < 1)
        raise(ErrorKind::Config, "frame_pairs_per_video must be positive");
}

}  // namespace

TrainingBatch build_training_batch(const data::LoadedDataset& dataset,
                                   const SamplerConfig& config, num::SeededRng& rng) {
    validate_sampler_config(config);
    const data::DatasetManifest& manifest = dataset.manifest;
    const int forged_per_class = config.videos_per_class - config.genuine_per_class;

    // Per-identity pools in manifest record order: forged videos keyed by
    // puppeteer, genuine videos keyed by subject.
    std::map<std::string, std::vector<const data::ManifestRecord*>> forged_pools;
    std::map<std::string, std::vector<const data::ManifestRecord*>> genuine_pools;
    for (const data::ManifestRecord& record : manifest.records) {
        if (record.provenance.wrapped()) continue;
        if (record.provenance.base == data::BaseTag::Forged &&
            manifest.is_train_identity(record.puppeteer))
            forged_pools[record.puppeteer].push_back(&record);
        else if (record.provenance.base == data::BaseTag::Genuine &&
                 manifest.is_train_identity(record.subject))
            genuine_pools[record.subject].push_back(&record);
    }

    std::vector<std::string> eligible;
    for (const std::string& identity : manifest.train_identities) {
        const auto forged = forged_pools.find(identity);
        if (forged == forged_pools.end()) continue;
        if (static_cast<int>(forged->second.size()) < forged_per_class) continue;
        const auto genuine = genuine_pools.find(identity);
        const int genuine_available =
            genuine == genuine_pools.end() ? 0 : static_cast<int>(genuine->second.size());
        if (genuine_available < config.genuine_per_class) continue;
        eligible.push_back(identity);
    }
    if (static_cast<int>(eligible.size()) < config.classes_per_batch)
        raise(ErrorKind::Capacity,
              "train split has " + std::to_string(eligible.size()) +
                  " puppeteer classes with " + std::to_string(forged_per_class) +
                  " forged and " + std::to_string(config.genuine_per_class) +
                  " genuine videos; batch needs " + std::to_string(config.classes_per_batch));

    TrainingBatch batch;
    const std::vector<std::size_t> class_pick =
        rng.sample_without_replacement(eligible.size(), config.classes_per_batch);
    for (std::size_t pick : class_pick) batch.classes.push_back(eligible[pick]);

    for (int c = 0; c < config.classes_per_batch; ++c) {
        const std::string& identity = batch.classes[c];
        const std::vector<const data::ManifestRecord*>& pool = forged_pools.at(identity);

        std::vector<const data::ManifestRecord*> members;
        for (std::size_t pick :
             rng.sample_without_replacement(pool.size(), forged_per_class))
            members.push_back(pool[pick]);

        // Identity positives need two appearances inside the class draw.
        // Genuine members always supply a second appearance; a purely forged
        // draw that collapsed onto one appearance swaps its last slot for a
        // pool member that breaks the tie.
        std::set<std::string> appearances;
        for (const data::ManifestRecord* member : members) appearances.insert(member->appearance);
        if (config.genuine_per_class == 0 && appearances.size() < 2) {
            std::vector<const data::ManifestRecord*> alternates;
            for (const data::ManifestRecord* candidate : pool)
                if (candidate->appearance != members.front()->appearance)
                    alternates.push_back(candidate);
            if (alternates.empty())
                raise(ErrorKind::Capacity,
                      "puppeteer '" + identity +
                          "' is forged onto a single appearance; identity positives need two");
            members.back() = alternates[rng.next_below(alternates.size())];
        }

        for (const data::ManifestRecord* member : members) {
            BatchVideo video;
            video.video_id = member->video_id;
            video.driving_id = manifest.driving_of(video.video_id);
            video.puppeteer = identity;
            video.genuine = false;
            video.class_index = c;
            const data::ManifestRecord& driving = manifest.record(video.driving_id);
            if (driving.provenance.base != data::BaseTag::Genuine ||
                driving.provenance.wrapped())
                raise(ErrorKind::Integrity, "driving video '" + video.driving_id +
                                                "' of '" + video.video_id +
                                                "' is not an unwrapped genuine record");
            batch.videos.push_back(std::move(video));
        }

        if (config.genuine_per_class > 0) {
            const std::vector<const data::ManifestRecord*>& own = genuine_pools.at(identity);
            for (std::size_t pick :
                 rng.sample_without_replacement(own.size(), config.genuine_per_class)) {
                BatchVideo video;
                video.video_id = own[pick]->video_id;
                video.driving_id = video.video_id;
                video.puppeteer = identity;
                video.genuine = true;
                video.class_index = c;
                batch.videos.push_back(std::move(video));
            }
        }
    }

    for (std::size_t i = 0; i < batch.videos.size(); ++i) {
        BatchVideo& video = batch.videos[i];
        const std::string appearance = manifest.record(video.video_id).appearance;

        std::vector<std::size_t> candidates;
        std::vector<std::size_t> preferred;
        for (std::size_t j = 0; j < batch.videos.size(); ++j) {
            if (j == i) continue;
            const BatchVideo& other = batch.videos[j];
            if (other.class_index != video.class_index) continue;
            if (manifest.record(other.video_id).appearance == appearance) continue;
            candidates.push_back(j);
            if (other.driving_id != video.driving_id) preferred.push_back(j);
        }
        if (candidates.empty())
            raise(ErrorKind::Capacity, "no identity positive for video '" + video.video_id +
                                           "': class draw lacks a second appearance");
        const std::vector<std::size_t>& choices = preferred.empty() ? candidates : preferred;
        video.positive_index = static_cast<int>(choices[rng.next_below(choices.size())]);

        if (video.genuine) continue;
        const Eigen::Index t_driving = dataset.video(video.driving_id).length();
        const Eigen::Index t_forged = dataset.video(video.video_id).length();
        const int pairs = config.frame_pairs_per_video;
        std::vector<int> driving_frames;
        if (t_driving >= pairs) {
            for (std::size_t pick : rng.sample_without_replacement(
                     static_cast<std::size_t>(t_driving), static_cast<std::size_t>(pairs)))
                driving_frames.push_back(static_cast<int>(pick));
        } else {
            for (int k = 0; k < pairs; ++k)
                driving_frames.push_back(
                    static_cast<int>(rng.next_below(static_cast<std::uint64_t>(t_driving))));
        }
        for (int index : driving_frames) {
            const auto mapped = static_cast<Eigen::Index>(
                std::llround(index * static_cast<double>(t_forged) / t_driving));
            video.driving_frames.push_back(index);
            video.forged_frames.push_back(static_cast<int>(std::min(t_forged - 1, mapped)));
        }
    }

    return batch;
}

}  // namespace idminer::train
