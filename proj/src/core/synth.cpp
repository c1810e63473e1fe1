#include "core/synth.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>

#include "core/config_file.hpp"
#include "core/errors.hpp"
#include "core/serialize.hpp"

namespace idminer::synth {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

void validate_population(const PopulationConfig& config) {
    if (config.fau_dim <= 0) raise(ErrorKind::Config, "population: fau_dim must be positive");
    if (config.oscillators_per_au <= 0)
        raise(ErrorKind::Config, "population: oscillators_per_au must be positive");
    if (!(config.freq_min > 0.0) || !(config.freq_max > config.freq_min) || config.freq_max > 0.5)
        raise(ErrorKind::Config, "population: need 0 < freq_min < freq_max <= 0.5 cycles/frame");
    if (config.amp_min < 0.0 || !(config.amp_max > config.amp_min))
        raise(ErrorKind::Config, "population: amplitude range is degenerate");
    if (config.jitter_min < 0.0 || config.jitter_max < config.jitter_min)
        raise(ErrorKind::Config, "population: invalid phase jitter range");
    if (config.coupling_strength < 0.0 || config.coupling_strength >= 1.0)
        raise(ErrorKind::Config, "population: coupling_strength must lie in [0, 1)");
    if (config.baseline_max < config.baseline_min)
        raise(ErrorKind::Config, "population: invalid baseline range");
    if (config.offset_scale < 0.0) raise(ErrorKind::Config, "population: offset_scale must be >= 0");
    if (!(config.gain_min > 0.0) || config.gain_max < config.gain_min)
        raise(ErrorKind::Config, "population: gains must be strictly positive");
    if (config.observation_noise < 0.0)
        raise(ErrorKind::Config, "population: observation_noise must be >= 0");
}

IdentityProfile sample_identity(num::SeededRng& rng, const PopulationConfig& config,
                                const std::string& identity) {
    validate_population(config);
    const int d = config.fau_dim;
    const int k = config.oscillators_per_au;

    IdentityProfile profile;
    profile.identity = identity;
    profile.dynamics.freq.resize(d, k);
    profile.dynamics.amp.resize(d, k);
    profile.dynamics.jitter.resize(d, k);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < k; ++j) {
            profile.dynamics.freq(i, j) = rng.uniform(config.freq_min, config.freq_max);
            profile.dynamics.amp(i, j) = rng.uniform(config.amp_min, config.amp_max);
            profile.dynamics.jitter(i, j) = rng.uniform(config.jitter_min, config.jitter_max);
        }
    }

    MatrixXd basis(d, d);
    for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = rng.normal();
    const double c = config.coupling_strength;
    profile.coupling = (1.0 - c) * MatrixXd::Identity(d, d) +
                       (c / static_cast<double>(d)) * (basis * basis.transpose());
    if (Eigen::LLT<MatrixXd>(profile.coupling).info() != Eigen::Success)
        raise(ErrorKind::Numeric, "sample_identity: coupling matrix is not positive definite");

    profile.baseline.resize(d);
    profile.offset.resize(d);
    profile.gain.resize(d);
    for (int i = 0; i < d; ++i) profile.baseline(i) = rng.uniform(config.baseline_min, config.baseline_max);
    for (int i = 0; i < d; ++i) profile.offset(i) = config.offset_scale * rng.normal();
    for (int i = 0; i < d; ++i) profile.gain(i) = rng.uniform(config.gain_min, config.gain_max);
    return profile;
}

ArtifactSignature derive_signature(const std::string& algorithm_id, int fau_dim,
                                   double pattern_scale, double noise_scale, double temporal_jitter,
                                   std::uint64_t seed) {
    if (fau_dim <= 0) raise(ErrorKind::Config, "derive_signature: fau_dim must be positive");
    if (pattern_scale < 0.0 || noise_scale < 0.0 || temporal_jitter < 0.0)
        raise(ErrorKind::Config, "derive_signature: scales must be non-negative");
    ArtifactSignature sig;
    sig.algorithm_id = algorithm_id;
    sig.noise_scale = noise_scale;
    sig.temporal_jitter = temporal_jitter;
    num::SeededRng rng(num::derive_seed(seed, "artifact." + algorithm_id));
    sig.pattern.resize(fau_dim);
    for (int i = 0; i < fau_dim; ++i) sig.pattern(i) = pattern_scale * rng.normal();
    return sig;
}

data::VideoRecord generate_genuine(const IdentityProfile& profile, int length,
                                   const PopulationConfig& config, num::SeededRng& rng,
                                   const std::string& video_id) {
    if (length < 1) raise(ErrorKind::Config, "generate_genuine: length must be >= 1");
    const int d = static_cast<int>(profile.baseline.size());
    const int k = static_cast<int>(profile.dynamics.freq.cols());

    MatrixXd phase(d, k);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < k; ++j) phase(i, j) = rng.uniform(0.0, kTwoPi);

    MatrixXd frames(length, d);
    VectorXd osc(d);
    for (int t = 0; t < length; ++t) {
        for (int i = 0; i < d; ++i) {
            double sum = 0.0;
            for (int j = 0; j < k; ++j)
                sum += profile.dynamics.amp(i, j) *
                       std::sin(kTwoPi * profile.dynamics.freq(i, j) * t + phase(i, j));
            osc(i) = sum;
        }
        const VectorXd motion = profile.coupling * osc;
        for (int i = 0; i < d; ++i) {
            frames(t, i) = profile.baseline(i) + profile.offset(i) +
                           profile.gain(i) * motion(i) + config.observation_noise * rng.normal();
        }
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < k; ++j) phase(i, j) += profile.dynamics.jitter(i, j) * rng.normal();
    }
    return data::make_record(video_id, profile.identity, profile.identity, profile.identity,
                             data::Provenance{data::BaseTag::Genuine, {}}, std::move(frames));
}

namespace {

// Linear time-warp to new_length samples over the same span. new_length ==
// rows gives a bit-exact copy.
MatrixXd warp_frames(const MatrixXd& frames, Eigen::Index new_length) {
    const Eigen::Index t = frames.rows();
    if (new_length == t) return frames;
    MatrixXd out(new_length, frames.cols());
    for (Eigen::Index i = 0; i < new_length; ++i) {
        const double pos = new_length == 1 ? 0.0
                                           : static_cast<double>(i) * static_cast<double>(t - 1) /
                                                 static_cast<double>(new_length - 1);
        const auto lo = static_cast<Eigen::Index>(std::floor(pos));
        const Eigen::Index hi = std::min(lo + 1, t - 1);
        const double frac = pos - static_cast<double>(lo);
        if (frac == 0.0)
            out.row(i) = frames.row(lo);
        else
            out.row(i) = (1.0 - frac) * frames.row(lo) + frac * frames.row(hi);
    }
    return out;
}

// The artifact channel shared by forgery and self-reconstruction: a global
// speed perturbation, then the signature pattern plus white noise per frame.
// Consumes the rng in a fixed order so equal seeds give the exact same
// channel regardless of the appearance path taken before it.
MatrixXd artifact_pass(const MatrixXd& frames, const ArtifactSignature& sig, num::SeededRng& rng) {
    const double u = rng.uniform(-1.0, 1.0);
    const double rate = 1.0 + sig.temporal_jitter * u;
    const auto new_length =
        std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(
                                      static_cast<double>(frames.rows()) / rate)));
    MatrixXd out = warp_frames(frames, new_length);
    for (Eigen::Index t = 0; t < out.rows(); ++t)
        for (Eigen::Index i = 0; i < out.cols(); ++i)
            out(t, i) += sig.pattern(i) + sig.noise_scale * rng.normal();
    return out;
}

void check_driving(const data::VideoRecord& driving, const char* op) {
    if (driving.provenance.base != data::BaseTag::Genuine || driving.provenance.wrapped())
        raise(ErrorKind::Usage, std::string(op) + ": driving record '" + driving.video_id +
                                    "' must be genuine");
}

}  // namespace

data::VideoRecord apply_deepfake(const data::VideoRecord& driving, const IdentityProfile& subject,
                                 const IdentityProfile& target, const ArtifactSignature& sig,
                                 num::SeededRng& rng, const std::string& video_id) {
    check_driving(driving, "apply_deepfake");
    if (driving.subject != subject.identity)
        raise(ErrorKind::Usage, "apply_deepfake: subject profile '" + subject.identity +
                                    "' does not match driving record subject '" + driving.subject +
                                    "'");
    const Eigen::Index t = driving.frames.rows();
    const Eigen::Index d = driving.frames.cols();
    MatrixXd mapped(t, d);
    for (Eigen::Index row = 0; row < t; ++row) {
        for (Eigen::Index i = 0; i < d; ++i) {
            const double drive =
                (driving.frames(row, i) - subject.baseline(i) - subject.offset(i)) / subject.gain(i);
            mapped(row, i) = target.baseline(i) + target.offset(i) + target.gain(i) * drive;
        }
    }
    MatrixXd frames = artifact_pass(mapped, sig, rng);
    const bool self = target.identity == driving.subject;
    const data::Provenance provenance{self ? data::BaseTag::Reconstructed : data::BaseTag::Forged,
                                      {}};
    return data::make_record(video_id, target.identity, target.identity, driving.puppeteer,
                             provenance, std::move(frames));
}

data::VideoRecord apply_whitehat(const data::VideoRecord& driving, const ArtifactSignature& sig,
                                 num::SeededRng& rng, const std::string& video_id) {
    check_driving(driving, "apply_whitehat");
    MatrixXd frames = artifact_pass(driving.frames, sig, rng);
    return data::make_record(video_id, driving.subject, driving.subject, driving.puppeteer,
                             data::Provenance{data::BaseTag::Reconstructed, {}}, std::move(frames));
}

void validate_tables(const SurrogateTables& tables) {
    auto check = [](const std::vector<double>& values, const char* name, double identity_value) {
        if (values.size() != 6)
            raise(ErrorKind::Config, std::string("surrogate table ") + name + " needs 6 levels");
        if (values.front() != identity_value)
            raise(ErrorKind::Config, std::string("surrogate table ") + name +
                                         " must start at the identity transform");
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] < values[i - 1])
                raise(ErrorKind::Config,
                      std::string("surrogate table ") + name + " must be non-decreasing");
    };
    check(tables.resize_factors, "resize_factors", 1.0);
    check(tables.jpeg_steps, "jpeg_steps", 0.0);
    check(tables.vc_blocks, "vc_blocks", 1.0);
    check(tables.blur_sigmas, "blur_sigmas", 0.0);
    for (double f : tables.resize_factors)
        if (f < 1.0 || f != std::floor(f))
            raise(ErrorKind::Config, "resize_factors must be integers >= 1");
    for (double b : tables.vc_blocks)
        if (b < 1.0 || b != std::floor(b))
            raise(ErrorKind::Config, "vc_blocks must be integers >= 1");
}

namespace {

MatrixXd quantize_frames(const MatrixXd& frames, double step) {
    if (step == 0.0) return frames;
    MatrixXd out(frames.rows(), frames.cols());
    for (Eigen::Index i = 0; i < frames.size(); ++i)
        out.data()[i] = std::round(frames.data()[i] / step) * step;
    return out;
}

MatrixXd resize_analog(const MatrixXd& frames, int factor) {
    if (factor == 1) return frames;
    const Eigen::Index t = frames.rows();
    const Eigen::Index kept = (t + factor - 1) / factor;
    MatrixXd down(kept, frames.cols());
    for (Eigen::Index j = 0; j < kept; ++j) down.row(j) = frames.row(j * factor);
    MatrixXd out(t, frames.cols());
    for (Eigen::Index i = 0; i < t; ++i) {
        const Eigen::Index j = i / factor;
        if (j + 1 >= kept) {
            out.row(i) = down.row(kept - 1);
            continue;
        }
        const double frac = static_cast<double>(i - j * factor) / static_cast<double>(factor);
        out.row(i) = (1.0 - frac) * down.row(j) + frac * down.row(j + 1);
    }
    return out;
}

MatrixXd block_average(const MatrixXd& frames, int block) {
    if (block == 1) return frames;
    const Eigen::Index t = frames.rows();
    MatrixXd out(t, frames.cols());
    for (Eigen::Index start = 0; start < t; start += block) {
        const Eigen::Index end = std::min<Eigen::Index>(start + block, t);
        const Eigen::RowVectorXd mean =
            frames.middleRows(start, end - start).colwise().mean();
        for (Eigen::Index i = start; i < end; ++i) out.row(i) = mean;
    }
    return out;
}

MatrixXd temporal_blur(const MatrixXd& frames, double sigma) {
    if (sigma == 0.0) return frames;
    const Eigen::Index t = frames.rows();
    const auto radius = static_cast<Eigen::Index>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (Eigen::Index k = -radius; k <= radius; ++k)
        kernel[static_cast<std::size_t>(k + radius)] =
            std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    MatrixXd out(t, frames.cols());
    for (Eigen::Index i = 0; i < t; ++i) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(frames.cols());
        double weight = 0.0;
        for (Eigen::Index k = -radius; k <= radius; ++k) {
            const Eigen::Index s = i + k;
            if (s < 0 || s >= t) continue;
            const double w = kernel[static_cast<std::size_t>(k + radius)];
            acc += w * frames.row(s);
            weight += w;
        }
        out.row(i) = acc / weight;
    }
    return out;
}

}  // namespace

MatrixXd surrogate_frames(const MatrixXd& frames, data::SurrogateWrap spec,
                          const SurrogateTables& tables) {
    if (spec.level < 0 || spec.level > 5)
        raise(ErrorKind::Domain, "surrogate level " + std::to_string(spec.level) + " outside 0..5");
    if (frames.rows() == 0) raise(ErrorKind::Usage, "surrogate: empty record");
    const auto level = static_cast<std::size_t>(spec.level);
    switch (spec.kind) {
        case data::SurrogateKind::Resize:
            return resize_analog(frames, static_cast<int>(tables.resize_factors[level]));
        case data::SurrogateKind::Jpeg:
            return quantize_frames(frames, tables.jpeg_steps[level]);
        case data::SurrogateKind::Vc:
            return quantize_frames(block_average(frames, static_cast<int>(tables.vc_blocks[level])),
                                   tables.jpeg_steps[level]);
        case data::SurrogateKind::Blur:
            return temporal_blur(frames, tables.blur_sigmas[level]);
    }
    raise(ErrorKind::Usage, "unknown surrogate kind");
}

data::VideoRecord apply_surrogate(const data::VideoRecord& record, data::SurrogateWrap spec,
                                  const SurrogateTables& tables) {
    if (record.provenance.wrapped())
        raise(ErrorKind::Usage,
              "apply_surrogate: record '" + record.video_id + "' is already surrogate-processed");
    data::VideoRecord out = record;
    out.frames = surrogate_frames(record.frames, spec, tables);
    out.provenance.surrogate = spec;
    data::validate_record(out);
    return out;
}

void validate_generation(const GenerationConfig& config) {
    validate_population(config.population);
    validate_tables(config.tables);
    if (config.pattern_scale < 0.0 || config.noise_scale < 0.0 || config.temporal_jitter < 0.0)
        raise(ErrorKind::Config, "artifact scales must be non-negative");
    if (config.forgeries_per_video < 1)
        raise(ErrorKind::Config, "forgeries_per_video must be >= 1");
    if (config.train_identities < 0 || config.test_identities < 0)
        raise(ErrorKind::Config, "split counts must be non-negative");
    if (config.total_identities() < 2)
        raise(ErrorKind::Config, "need at least 2 identities to build forgeries");
    if (config.train_identities == 1 || config.test_identities == 1)
        raise(ErrorKind::Config,
              "a non-empty split needs at least 2 identities for in-split forgery targets");
    if (config.videos_per_identity < 1) raise(ErrorKind::Config, "videos_per_identity must be >= 1");
    if (config.frames_per_video < 1) raise(ErrorKind::Config, "frames_per_video must be >= 1");
}

GenerationConfig generation_config_from_text(const std::string& text) {
    const data::KeyValueFile file = data::KeyValueFile::parse(text);
    for (const char* section : {"population", "artifact", "surrogate", "split"})
        if (!file.has_section(section))
            raise(ErrorKind::Config, std::string("missing config section [") + section + "]");

    GenerationConfig config;
    PopulationConfig& p = config.population;
    p.fau_dim = static_cast<int>(file.get_int("population", "fau_dim", p.fau_dim));
    p.oscillators_per_au =
        static_cast<int>(file.get_int("population", "oscillators_per_au", p.oscillators_per_au));
    p.freq_min = file.get_double("population", "freq_min", p.freq_min);
    p.freq_max = file.get_double("population", "freq_max", p.freq_max);
    p.amp_min = file.get_double("population", "amp_min", p.amp_min);
    p.amp_max = file.get_double("population", "amp_max", p.amp_max);
    p.jitter_min = file.get_double("population", "phase_jitter_min", p.jitter_min);
    p.jitter_max = file.get_double("population", "phase_jitter_max", p.jitter_max);
    p.coupling_strength = file.get_double("population", "coupling_strength", p.coupling_strength);
    p.baseline_min = file.get_double("population", "baseline_min", p.baseline_min);
    p.baseline_max = file.get_double("population", "baseline_max", p.baseline_max);
    p.offset_scale = file.get_double("population", "offset_scale", p.offset_scale);
    p.gain_min = file.get_double("population", "gain_min", p.gain_min);
    p.gain_max = file.get_double("population", "gain_max", p.gain_max);
    p.observation_noise = file.get_double("population", "observation_noise", p.observation_noise);
    config.videos_per_identity =
        static_cast<int>(file.get_int("population", "videos_per_identity", config.videos_per_identity));
    config.frames_per_video =
        static_cast<int>(file.get_int("population", "frames_per_video", config.frames_per_video));

    config.algorithm_id = file.get_string("artifact", "algorithm_id", config.algorithm_id);
    config.pattern_scale = file.get_double("artifact", "pattern_scale", config.pattern_scale);
    config.noise_scale = file.get_double("artifact", "noise_scale", config.noise_scale);
    config.temporal_jitter = file.get_double("artifact", "temporal_jitter", config.temporal_jitter);
    config.forgeries_per_video =
        static_cast<int>(file.get_int("artifact", "forgeries_per_video", config.forgeries_per_video));

    config.tables.resize_factors =
        file.get_doubles("surrogate", "resize_factors", config.tables.resize_factors);
    config.tables.jpeg_steps = file.get_doubles("surrogate", "jpeg_steps", config.tables.jpeg_steps);
    config.tables.vc_blocks = file.get_doubles("surrogate", "vc_blocks", config.tables.vc_blocks);
    config.tables.blur_sigmas =
        file.get_doubles("surrogate", "blur_sigmas", config.tables.blur_sigmas);

    config.train_identities =
        static_cast<int>(file.get_int("split", "train_identities", config.train_identities));
    config.test_identities =
        static_cast<int>(file.get_int("split", "test_identities", config.test_identities));

    validate_generation(config);
    return config;
}

GenerationConfig generation_config_from_file(const std::filesystem::path& path) {
    return generation_config_from_text(num::read_text_file(path));
}

namespace {

std::string identity_label(int index) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "id%03d", index);
    return buffer;
}

}  // namespace

data::DatasetManifest build_rddp_dataset(const GenerationConfig& config, std::uint64_t seed,
                                         const std::filesystem::path& out_dir) {
    validate_generation(config);
    std::filesystem::create_directories(out_dir / "fau");

    const int n = config.total_identities();
    std::vector<IdentityProfile> profiles;
    profiles.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::string label = identity_label(i);
        num::SeededRng rng(num::derive_seed(seed, "identity." + label));
        profiles.push_back(sample_identity(rng, config.population, label));
    }
    const ArtifactSignature sig =
        derive_signature(config.algorithm_id, config.population.fau_dim, config.pattern_scale,
                         config.noise_scale, config.temporal_jitter, seed);

    data::DatasetManifest manifest;
    manifest.fau_dim = config.population.fau_dim;
    for (int i = 0; i < n; ++i) {
        if (i < config.train_identities)
            manifest.train_identities.push_back(profiles[static_cast<std::size_t>(i)].identity);
        else
            manifest.test_identities.push_back(profiles[static_cast<std::size_t>(i)].identity);
    }

    const std::vector<std::string> schema = data::au_column_names(config.population.fau_dim);
    auto emit = [&](const data::VideoRecord& record) {
        const std::string rel = "fau/" + record.video_id + ".csv";
        num::write_text_file_atomic(out_dir / rel, data::write_fau_csv(record.frames, schema));
        manifest.records.push_back({record.video_id, record.subject, record.appearance,
                                    record.puppeteer, record.provenance, rel});
    };

    // Pass 1: genuine videos, kept in memory to drive the other two passes.
    std::vector<data::VideoRecord> genuine;
    genuine.reserve(static_cast<std::size_t>(n) * config.videos_per_identity);
    for (int i = 0; i < n; ++i) {
        for (int v = 0; v < config.videos_per_identity; ++v) {
            char suffix[16];
            std::snprintf(suffix, sizeof(suffix), "_v%02d", v);
            const std::string video_id = "g_" + profiles[static_cast<std::size_t>(i)].identity + suffix;
            num::SeededRng rng(num::derive_seed(seed, "video." + video_id));
            genuine.push_back(generate_genuine(profiles[static_cast<std::size_t>(i)],
                                               config.frames_per_video, config.population, rng,
                                               video_id));
            emit(genuine.back());
        }
    }

    // Pass 2: white-hat reconstructions of every genuine video.
    for (const auto& driving : genuine) {
        const std::string body = driving.video_id.substr(2);
        const std::string video_id = "r_" + body;
        num::SeededRng rng(num::derive_seed(seed, "recon." + driving.video_id));
        emit(apply_whitehat(driving, sig, rng, video_id));
        manifest.metadata["driving." + video_id] = driving.video_id;
    }

    // Pass 3: forgeries, with targets drawn inside the driving video's split.
    for (const auto& driving : genuine) {
        int subject_index = -1;
        for (int i = 0; i < n; ++i)
            if (profiles[static_cast<std::size_t>(i)].identity == driving.subject) subject_index = i;
        const bool train = subject_index < config.train_identities;
        const int pool_begin = train ? 0 : config.train_identities;
        const int pool_end = train ? config.train_identities : n;
        for (int f = 0; f < config.forgeries_per_video; ++f) {
            num::SeededRng rng(num::derive_seed(
                seed, "forge." + driving.video_id + "." + std::to_string(f)));
            const int pool = pool_end - pool_begin - 1;
            auto pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(pool)));
            int target_index = pool_begin + pick;
            if (target_index >= subject_index) ++target_index;
            const IdentityProfile& target = profiles[static_cast<std::size_t>(target_index)];
            const std::string body = driving.video_id.substr(2);
            const std::string video_id =
                "f_" + body + "_" + std::to_string(f) + "_" + target.identity;
            emit(apply_deepfake(driving, profiles[static_cast<std::size_t>(subject_index)], target,
                                sig, rng, video_id));
            manifest.metadata["driving." + video_id] = driving.video_id;
        }
    }

    validate_manifest(manifest);
    return manifest;
}

}  // namespace idminer::synth
