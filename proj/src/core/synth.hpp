#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "core/fau_data.hpp"
#include "core/rng.hpp"

namespace idminer::synth {

// Generator of one identity's characteristic facial dynamics. Each AU owns a
// bank of K oscillators; a positive-definite coupling matrix mixes channels;
// the appearance channel is a per-AU offset and gain around a resting
// baseline. Distinct identities get distinct draws of all of it.
struct OscillatorBank {
    Eigen::MatrixXd freq;    // D x K, cycles per frame
    Eigen::MatrixXd amp;     // D x K
    Eigen::MatrixXd jitter;  // D x K, phase random-walk scale per frame
};

struct IdentityProfile {
    std::string identity;
    OscillatorBank dynamics;
    Eigen::MatrixXd coupling;  // D x D, positive definite
    Eigen::VectorXd baseline;
    Eigen::VectorXd offset;
    Eigen::VectorXd gain;  // entries strictly positive
};

struct PopulationConfig {
    int fau_dim = 17;
    int oscillators_per_au = 2;
    double freq_min = 0.02, freq_max = 0.35;
    double amp_min = 0.3, amp_max = 1.1;
    double jitter_min = 0.0, jitter_max = 0.05;
    double coupling_strength = 0.4;
    double baseline_min = 1.0, baseline_max = 3.0;
    double offset_scale = 0.5;
    double gain_min = 0.7, gain_max = 1.4;
    double observation_noise = 0.02;
};

void validate_population(const PopulationConfig& config);

IdentityProfile sample_identity(num::SeededRng& rng, const PopulationConfig& config,
                                const std::string& identity);

// Parametric model of one deepfake algorithm's trace: a fixed additive
// pattern, white observation noise, and a global speed perturbation.
// Deterministic function of (algorithm_id, seed).
struct ArtifactSignature {
    std::string algorithm_id;
    Eigen::VectorXd pattern;
    double noise_scale = 0.0;
    double temporal_jitter = 0.0;
};

ArtifactSignature derive_signature(const std::string& algorithm_id, int fau_dim,
                                   double pattern_scale, double noise_scale, double temporal_jitter,
                                   std::uint64_t seed);

data::VideoRecord generate_genuine(const IdentityProfile& profile, int length,
                                   const PopulationConfig& config, num::SeededRng& rng,
                                   const std::string& video_id);

// Action transfer onto a different face: the driving subject's appearance
// map is inverted with its profile, the target's appearance applied, and the
// artifact channel added. The puppeteer label always survives.
data::VideoRecord apply_deepfake(const data::VideoRecord& driving, const IdentityProfile& subject,
                                 const IdentityProfile& target, const ArtifactSignature& sig,
                                 num::SeededRng& rng, const std::string& video_id);

// Self-reconstruction: identical artifact channel, same appearance and
// actions. The subject's appearance map cancels exactly, so no profile is
// needed, which is what makes the transform applicable without enrollment.
data::VideoRecord apply_whitehat(const data::VideoRecord& driving, const ArtifactSignature& sig,
                                 num::SeededRng& rng, const std::string& video_id);

// Per-level parameter tables for the four attribute-space analogs.
struct SurrogateTables {
    std::vector<double> resize_factors = {1, 2, 2, 3, 4, 5};
    std::vector<double> jpeg_steps = {0, 0.1, 0.2, 0.4, 0.8, 1.2};
    std::vector<double> vc_blocks = {1, 2, 3, 4, 6, 8};
    std::vector<double> blur_sigmas = {0, 0.5, 1, 2, 3, 4};
};

void validate_tables(const SurrogateTables& tables);

// Deterministic perturbation; level 0 leaves frames bit-identical. The
// returned record keeps all labels and wraps the provenance.
data::VideoRecord apply_surrogate(const data::VideoRecord& record, data::SurrogateWrap spec,
                                  const SurrogateTables& tables);

Eigen::MatrixXd surrogate_frames(const Eigen::MatrixXd& frames, data::SurrogateWrap spec,
                                 const SurrogateTables& tables);

struct GenerationConfig {
    PopulationConfig population;
    std::string algorithm_id = "synthetic_reenactment";
    double pattern_scale = 0.6;
    double noise_scale = 0.15;
    double temporal_jitter = 0.04;
    int forgeries_per_video = 1;
    SurrogateTables tables;
    int train_identities = 16;
    int test_identities = 8;
    int videos_per_identity = 20;
    int frames_per_video = 128;

    int total_identities() const { return train_identities + test_identities; }
};

void validate_generation(const GenerationConfig& config);

GenerationConfig generation_config_from_text(const std::string& text);
GenerationConfig generation_config_from_file(const std::filesystem::path& path);

// Materializes the full protocol dataset: genuine, forged, and reconstructed
// records with disjoint train/test identity pools and forgery targets drawn
// inside each pool. CSVs land under out_dir/fau/, the manifest is returned
// (and written by the caller).
data::DatasetManifest build_rddp_dataset(const GenerationConfig& config, std::uint64_t seed,
                                         const std::filesystem::path& out_dir);

}  // namespace idminer::synth
