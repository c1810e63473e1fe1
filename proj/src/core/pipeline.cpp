#include "core/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "core/baseline.hpp"
#include "core/errors.hpp"
#include "core/gradcheck.hpp"
#include "core/losses.hpp"
#include "core/numeric.hpp"
#include "core/sampler.hpp"
#include "core/serialize.hpp"
#include "core/synth.hpp"

namespace idminer::pipeline {

using nlohmann::json;

namespace {

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buffer[20];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

std::string file_hash(const std::filesystem::path& path) {
    return fnv1a_hex(num::read_text_file(path));
}

json version_block() {
    json v;
    v["library"] = kVersion;
    v["manifest_format"] = kManifestFormat;
    v["checkpoint_format"] = kCheckpointFormat;
    return v;
}

void write_json_file(const std::filesystem::path& path, const json& value) {
    num::write_text_file_atomic(path, value.dump(2) + "\n");
}

enum class Detector { IdMiner, MeanFeat };

Detector detector_from_string(const std::string& text) {
    if (text == "idminer") return Detector::IdMiner;
    if (text == "meanfeat") return Detector::MeanFeat;
    raise(ErrorKind::Config, "unknown detector '" + text + "' (idminer or meanfeat)");
}

bool resolve_reference_based(Detector detector, const std::string& mode) {
    if (mode == "auto") return detector == Detector::IdMiner;
    if (mode == "based") return true;
    if (mode == "free") {
        if (detector == Detector::IdMiner)
            raise(ErrorKind::Capability,
                  "the identity detector scores similarity against a reference; "
                  "reference-free evaluation is unsupported for it");
        return false;
    }
    raise(ErrorKind::Config, "unknown reference mode '" + mode + "' (auto, based or free)");
}

std::vector<double> parse_level_table(const std::string& text, const std::string& key) {
    std::istringstream stream(text);
    std::vector<double> values;
    double value = 0.0;
    while (stream >> value) values.push_back(value);
    if (values.size() != 6)
        raise(ErrorKind::Format, "manifest metadata '" + key + "' must list 6 level values");
    return values;
}

// The generator records its perturbation tables in the manifest so that
// evaluation applies bit-identical transforms without seeing the generation
// config.
synth::SurrogateTables tables_from_manifest(const data::DatasetManifest& manifest) {
    synth::SurrogateTables tables;
    auto load = [&](const char* key, std::vector<double>& into) {
        auto it = manifest.metadata.find(key);
        if (it != manifest.metadata.end()) into = parse_level_table(it->second, key);
    };
    load("surrogate.resize", tables.resize_factors);
    load("surrogate.jpeg", tables.jpeg_steps);
    load("surrogate.vc", tables.vc_blocks);
    load("surrogate.blur", tables.blur_sigmas);
    synth::validate_tables(tables);
    return tables;
}

std::string table_to_metadata(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += num::format_double(values[i]);
    }
    return out;
}

model::ModelConfig checkpoint_model_for(const data::DatasetManifest& manifest,
                                        const model::Checkpoint& checkpoint) {
    if (checkpoint.config.encoder.input_dim != manifest.fau_dim)
        raise(ErrorKind::Shape,
              "checkpoint encodes " + std::to_string(checkpoint.config.encoder.input_dim) +
                  "-dimensional features but the manifest has " +
                  std::to_string(manifest.fau_dim));
    return checkpoint.config;
}

// Caches one representation per (video, wrapped) so repeated pairings and
// sweep levels never re-run the model on identical frames.
struct IdMinerScorer {
    const num::ParamStore& store;
    const model::ModelConfig config;
    const data::LoadedDataset& dataset;
    const synth::SurrogateTables& tables;
    std::optional<data::SurrogateWrap> wrap;
    std::map<std::string, Eigen::VectorXd> clean;
    std::map<std::string, Eigen::VectorXd> wrapped;

    void set_wrap(const std::optional<data::SurrogateWrap>& next) {
        if (wrap != next) {
            wrapped.clear();
            wrap = next;
        }
    }

    const Eigen::VectorXd& representation(const std::string& video_id, bool use_wrap) {
        auto& cache = use_wrap ? wrapped : clean;
        auto it = cache.find(video_id);
        if (it != cache.end()) return it->second;
        const data::VideoRecord& record = dataset.video(video_id);
        Eigen::VectorXd rep;
        if (use_wrap) {
            if (!wrap.has_value())
                raise(ErrorKind::Usage, "surrogate side requested without an active wrap");
            rep = model::forward_video(store, config,
                                       synth::apply_surrogate(record, *wrap, tables).frames);
        } else {
            rep = model::forward_video(store, config, record.frames);
        }
        return cache.emplace(video_id, std::move(rep)).first->second;
    }

    double score(const eval::EvaluationPair& pair) {
        if (!pair.reference_id.has_value())
            raise(ErrorKind::Capability,
                  "reference-free scoring is unsupported for the identity detector");
        const Eigen::VectorXd& a = representation(pair.probe_id, pair.probe_surrogate);
        const Eigen::VectorXd& b = representation(*pair.reference_id, pair.reference_surrogate);
        return (num::cosine_similarity(a, b) + 1.0) / 2.0;
    }
};

struct MeanFeatScorer {
    const baseline::BaselineModel& model;
    const data::LoadedDataset& dataset;
    const synth::SurrogateTables& tables;
    std::optional<data::SurrogateWrap> wrap;
    std::map<std::string, double> clean;
    std::map<std::string, double> wrapped;

    void set_wrap(const std::optional<data::SurrogateWrap>& next) {
        if (wrap != next) {
            wrapped.clear();
            wrap = next;
        }
    }

    double probe_score(const std::string& video_id, bool use_wrap) {
        auto& cache = use_wrap ? wrapped : clean;
        auto it = cache.find(video_id);
        if (it != cache.end()) return it->second;
        const data::VideoRecord& record = dataset.video(video_id);
        double value = 0.0;
        if (use_wrap) {
            if (!wrap.has_value())
                raise(ErrorKind::Usage, "surrogate side requested without an active wrap");
            value = baseline::baseline_score(
                model, synth::apply_surrogate(record, *wrap, tables).frames);
        } else {
            value = baseline::baseline_score(model, record.frames);
        }
        cache.emplace(video_id, value);
        return value;
    }

    // The reference, when a protocol provides one, is ignored: this detector
    // judges the probe alone.
    double score(const eval::EvaluationPair& pair) {
        return probe_score(pair.probe_id, pair.probe_surrogate);
    }
};

struct ProtocolEntry {
    std::string name;
    eval::ProtocolSetting setting;
    std::optional<data::SurrogateWrap> wrap;
};

std::vector<ProtocolEntry> protocol_entries(const EvalOptions& options) {
    if (options.protocol == "conventional")
        return {{"conventional", eval::ProtocolSetting::Conventional, std::nullopt}};
    if (options.protocol == "whitehat")
        return {{"whitehat", eval::ProtocolSetting::Whitehat, std::nullopt}};
    if (options.protocol == "surrogate") {
        const data::SurrogateWrap wrap{
            data::surrogate_kind_from_string(options.surrogate_kind), options.surrogate_level};
        return {{"surrogate", eval::ProtocolSetting::Surrogate, wrap}};
    }
    if (options.protocol == "all") {
        std::vector<ProtocolEntry> entries{
            {"conventional", eval::ProtocolSetting::Conventional, std::nullopt},
            {"whitehat", eval::ProtocolSetting::Whitehat, std::nullopt}};
        for (data::SurrogateKind kind : data::all_surrogate_kinds())
            entries.push_back({"surrogate_" + data::to_string(kind),
                               eval::ProtocolSetting::Surrogate,
                               data::SurrogateWrap{kind, options.surrogate_level}});
        return entries;
    }
    raise(ErrorKind::Config, "unknown protocol '" + options.protocol +
                                 "' (conventional, whitehat, surrogate or all)");
}

struct ScoredProtocol {
    MetricsSummary summary;
    std::vector<eval::ScoredPair> rows;
    std::vector<std::string> skip_notes;
};

ScoredProtocol score_protocol(const data::LoadedDataset& dataset, const ProtocolEntry& entry,
                              bool reference_based,
                              const std::function<double(const eval::EvaluationPair&)>& score) {
    eval::ProtocolKind protocol;
    protocol.setting = entry.setting;
    protocol.reference_based = reference_based;
    protocol.surrogate = entry.wrap;
    const eval::PairSet pairs = eval::build_pairs(dataset.manifest, protocol);

    ScoredProtocol out;
    out.skip_notes = pairs.skip_notes;
    std::vector<eval::Scored> scored;
    scored.reserve(pairs.pairs.size());
    char pair_id[20];
    for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
        const eval::EvaluationPair& pair = pairs.pairs[i];
        std::snprintf(pair_id, sizeof(pair_id), "p%06zu", i);
        eval::ScoredPair row;
        row.pair_id = pair_id;
        row.probe_id = pair.probe_id;
        row.reference_id = pair.reference_id.value_or("");
        row.label = pair.label;
        row.score = score(pair);
        scored.push_back({row.score, row.label});
        out.rows.push_back(std::move(row));
    }

    out.summary.protocol = entry.name;
    out.summary.wrap = entry.wrap;
    out.summary.auc = eval::auc(scored);
    out.summary.acc = eval::accuracy(scored, 0.5);
    const eval::CalibratedAccuracy calibrated = eval::calibrated_accuracy(scored);
    out.summary.acc_calibrated = calibrated.accuracy;
    out.summary.calibration_threshold = calibrated.threshold;
    out.summary.n_pairs = static_cast<int>(out.rows.size());
    out.summary.skipped = pairs.skipped;
    return out;
}

json summary_to_json(const MetricsSummary& summary) {
    json j;
    j["protocol"] = summary.protocol;
    if (summary.wrap.has_value()) {
        j["surrogate_kind"] = data::to_string(summary.wrap->kind);
        j["surrogate_level"] = summary.wrap->level;
    }
    j["auc"] = summary.auc;
    j["acc"] = summary.acc;
    j["acc_calibrated"] = summary.acc_calibrated;
    j["calibration_threshold"] = summary.calibration_threshold;
    j["n_pairs"] = summary.n_pairs;
    j["skipped"] = summary.skipped;
    return j;
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& tail) {
    return prefix.parent_path() / (prefix.filename().string() + tail);
}

}  // namespace

std::filesystem::path run_synth_gen(const std::filesystem::path& config_path,
                                    const std::filesystem::path& out_dir, std::uint64_t seed) {
    const std::string config_text = num::read_text_file(config_path);
    const synth::GenerationConfig config = synth::generation_config_from_text(config_text);
    data::DatasetManifest manifest = synth::build_rddp_dataset(config, seed, out_dir);
    manifest.metadata["surrogate.resize"] = table_to_metadata(config.tables.resize_factors);
    manifest.metadata["surrogate.jpeg"] = table_to_metadata(config.tables.jpeg_steps);
    manifest.metadata["surrogate.vc"] = table_to_metadata(config.tables.vc_blocks);
    manifest.metadata["surrogate.blur"] = table_to_metadata(config.tables.blur_sigmas);
    const std::filesystem::path manifest_path = out_dir / "manifest.json";
    data::save_manifest_file(manifest, manifest_path);

    json run;
    run["command"] = "synth-gen";
    run["versions"] = version_block();
    run["seed"] = seed;
    run["inputs"]["config"] = config_path.string();
    run["inputs"]["config_hash"] = fnv1a_hex(config_text);
    run["outputs"]["manifest"] = manifest_path.string();
    run["outputs"]["records"] = manifest.records.size();
    write_json_file(out_dir / "run.json", run);
    return manifest_path;
}

namespace {

train::TrainResult run_train_common(const std::filesystem::path& manifest_path,
                                    const std::filesystem::path& out_dir,
                                    const train::TrainConfig& config,
                                    const std::filesystem::path* resume_checkpoint) {
    const data::LoadedDataset dataset = data::load_dataset(manifest_path);
    train::TrainResult result;
    if (resume_checkpoint == nullptr) {
        model::ModelConfig model_config;
        model_config.encoder.input_dim = dataset.manifest.fau_dim;
        result = train::train(dataset, model_config, config, out_dir);
    } else {
        result = train::resume(*resume_checkpoint, dataset, config, out_dir);
    }

    json run;
    run["command"] = "train";
    run["versions"] = version_block();
    run["seed"] = config.seed;
    run["inputs"]["manifest"] = manifest_path.string();
    run["inputs"]["manifest_hash"] = file_hash(manifest_path);
    if (resume_checkpoint != nullptr) run["inputs"]["resume"] = resume_checkpoint->string();
    run["options"] = json::parse(train::train_config_to_json(config));
    run["outputs"]["checkpoint"] = result.final_checkpoint.string();
    run["outputs"]["steps_executed"] = result.executed.size();
    run["notes"] = result.notes;
    write_json_file(out_dir / "run.json", run);
    return result;
}

}  // namespace

train::TrainResult run_train(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& out_dir,
                             const train::TrainConfig& config) {
    return run_train_common(manifest_path, out_dir, config, nullptr);
}

train::TrainResult run_resume(const std::filesystem::path& checkpoint_path,
                              const std::filesystem::path& manifest_path,
                              const std::filesystem::path& out_dir,
                              const train::TrainConfig& config) {
    return run_train_common(manifest_path, out_dir, config, &checkpoint_path);
}

EvalResult run_eval(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& checkpoint_path, const EvalOptions& options,
                    const std::filesystem::path& out_prefix) {
    const data::LoadedDataset dataset = data::load_dataset(manifest_path);
    const synth::SurrogateTables tables = tables_from_manifest(dataset.manifest);
    const Detector detector = detector_from_string(options.detector);
    const bool reference_based = resolve_reference_based(detector, options.reference);
    const std::vector<ProtocolEntry> entries = protocol_entries(options);

    model::Checkpoint checkpoint;
    std::optional<IdMinerScorer> idminer;
    baseline::BaselineModel baseline_model;
    std::optional<MeanFeatScorer> meanfeat;
    if (detector == Detector::IdMiner) {
        checkpoint = model::load_checkpoint_file(checkpoint_path);
        idminer.emplace(IdMinerScorer{checkpoint.store,
                                      checkpoint_model_for(dataset.manifest, checkpoint),
                                      dataset, tables});
    } else {
        baseline_model = baseline::train_baseline(dataset, baseline::BaselineConfig{});
        meanfeat.emplace(MeanFeatScorer{baseline_model, dataset, tables});
    }

    if (out_prefix.has_parent_path()) std::filesystem::create_directories(out_prefix.parent_path());

    EvalResult result;
    json protocols_json;
    std::vector<std::string> all_skip_notes;
    const bool multi = entries.size() > 1;
    for (const ProtocolEntry& entry : entries) {
        std::function<double(const eval::EvaluationPair&)> score;
        if (idminer.has_value()) {
            idminer->set_wrap(entry.wrap);
            score = [&](const eval::EvaluationPair& pair) { return idminer->score(pair); };
        } else {
            meanfeat->set_wrap(entry.wrap);
            score = [&](const eval::EvaluationPair& pair) { return meanfeat->score(pair); };
        }
        ScoredProtocol scored = score_protocol(dataset, entry, reference_based, score);
        const std::string tail = multi ? "_" + entry.name + "_scores.csv" : "_scores.csv";
        num::write_text_file_atomic(with_suffix(out_prefix, tail),
                                    eval::write_score_csv(scored.rows));
        protocols_json[entry.name] = summary_to_json(scored.summary);
        for (const std::string& note : scored.skip_notes)
            all_skip_notes.push_back(entry.name + ": " + note);
        result.by_name.emplace(entry.name, std::move(scored.summary));
    }

    json metrics;
    metrics["detector"] = options.detector;
    metrics["reference"] = reference_based ? "based" : "free";
    if (multi) {
        const double conventional = result.by_name.at("conventional").auc;
        if (conventional <= 0.0)
            raise(ErrorKind::Numeric, "conventional AUC is zero; relative drop is undefined");
        double drop_sum = 0.0;
        int drops = 0;
        for (const auto& [name, summary] : result.by_name) {
            if (name == "conventional") continue;
            drop_sum += (conventional - summary.auc) / conventional;
            ++drops;
        }
        result.avg_drop = drop_sum / drops;
        metrics["protocols"] = protocols_json;
        metrics["avg_drop"] = *result.avg_drop;
    } else {
        metrics.update(protocols_json.begin().value());
    }
    result.metrics_path = with_suffix(out_prefix, "_metrics.json");
    write_json_file(result.metrics_path, metrics);

    json run;
    run["command"] = "eval";
    run["versions"] = version_block();
    run["inputs"]["manifest"] = manifest_path.string();
    run["inputs"]["manifest_hash"] = file_hash(manifest_path);
    if (detector == Detector::IdMiner) {
        run["inputs"]["checkpoint"] = checkpoint_path.string();
        run["inputs"]["checkpoint_hash"] = file_hash(checkpoint_path);
    }
    run["options"]["protocol"] = options.protocol;
    run["options"]["detector"] = options.detector;
    run["options"]["reference"] = reference_based ? "based" : "free";
    if (options.protocol == "surrogate" || options.protocol == "all") {
        run["options"]["surrogate_level"] = options.surrogate_level;
        if (options.protocol == "surrogate")
            run["options"]["surrogate_kind"] = options.surrogate_kind;
    }
    run["outputs"]["metrics"] = result.metrics_path.string();
    run["skip_notes"] = all_skip_notes;
    write_json_file(with_suffix(out_prefix, ".run.json"), run);
    return result;
}

ReidResult run_reid(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& checkpoint_path, const std::string& detector_name,
                    const std::filesystem::path& out_prefix) {
    const data::LoadedDataset dataset = data::load_dataset(manifest_path);
    const Detector detector = detector_from_string(detector_name);

    std::function<Eigen::VectorXd(const data::VideoRecord&)> embed;
    model::Checkpoint checkpoint;
    baseline::BaselineModel baseline_model;
    if (detector == Detector::IdMiner) {
        checkpoint = model::load_checkpoint_file(checkpoint_path);
        const model::ModelConfig config = checkpoint_model_for(dataset.manifest, checkpoint);
        embed = [&dataset, checkpoint = &checkpoint, config](const data::VideoRecord& record) {
            return model::forward_video(checkpoint->store, config, record.frames);
        };
    } else {
        baseline_model = baseline::train_baseline(dataset, baseline::BaselineConfig{});
        embed = [&baseline_model](const data::VideoRecord& record) {
            return baseline::baseline_embedding(baseline_model, record.frames);
        };
    }

    std::vector<const data::ManifestRecord*> probes;
    std::vector<const data::ManifestRecord*> gallery;
    for (const data::ManifestRecord& record : dataset.manifest.records) {
        if (record.provenance.wrapped()) continue;
        if (dataset.manifest.is_train_identity(record.puppeteer)) continue;
        if (!std::count(dataset.manifest.test_identities.begin(),
                        dataset.manifest.test_identities.end(), record.puppeteer))
            continue;
        if (record.provenance.base == data::BaseTag::Genuine) probes.push_back(&record);
        if (record.provenance.base == data::BaseTag::Forged) gallery.push_back(&record);
    }
    auto by_id = [](const data::ManifestRecord* a, const data::ManifestRecord* b) {
        return a->video_id < b->video_id;
    };
    std::sort(probes.begin(), probes.end(), by_id);
    std::sort(gallery.begin(), gallery.end(), by_id);
    if (probes.empty())
        raise(ErrorKind::Protocol, "re-identification needs genuine records in the test split");
    if (gallery.empty())
        raise(ErrorKind::Protocol, "re-identification needs forged records in the test split");

    std::vector<eval::GalleryItem> items;
    items.reserve(gallery.size());
    for (const data::ManifestRecord* record : gallery)
        items.push_back({embed(dataset.video(record->video_id)), record->puppeteer});

    std::vector<eval::ReidInstance> instances;
    instances.reserve(probes.size());
    for (const data::ManifestRecord* record : probes) {
        eval::ReidInstance instance;
        instance.probe = embed(dataset.video(record->video_id));
        instance.puppeteer = record->puppeteer;
        instance.gallery = items;
        instances.push_back(std::move(instance));
    }

    ReidResult result;
    result.report = eval::reid_metrics(instances);
    result.n_gallery = static_cast<int>(items.size());

    if (out_prefix.has_parent_path()) std::filesystem::create_directories(out_prefix.parent_path());
    json report;
    report["detector"] = detector_name;
    report["rank1"] = result.report.rank1;
    report["rank5"] = result.report.rank5;
    report["map"] = result.report.map;
    report["n_probes"] = result.report.n_probes;
    report["skipped"] = result.report.skipped;
    report["n_gallery"] = result.n_gallery;
    result.report_path = with_suffix(out_prefix, "_reid.json");
    write_json_file(result.report_path, report);

    json run;
    run["command"] = "reid";
    run["versions"] = version_block();
    run["inputs"]["manifest"] = manifest_path.string();
    run["inputs"]["manifest_hash"] = file_hash(manifest_path);
    if (detector == Detector::IdMiner) {
        run["inputs"]["checkpoint"] = checkpoint_path.string();
        run["inputs"]["checkpoint_hash"] = file_hash(checkpoint_path);
    }
    run["options"]["detector"] = detector_name;
    run["outputs"]["report"] = result.report_path.string();
    write_json_file(with_suffix(out_prefix, ".run.json"), run);
    return result;
}

SweepResult run_sweep(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& checkpoint_path, const std::string& detector_name,
                      const std::filesystem::path& out_prefix) {
    const data::LoadedDataset dataset = data::load_dataset(manifest_path);
    const synth::SurrogateTables tables = tables_from_manifest(dataset.manifest);
    const Detector detector = detector_from_string(detector_name);
    const bool reference_based = detector == Detector::IdMiner;

    model::Checkpoint checkpoint;
    std::optional<IdMinerScorer> idminer;
    baseline::BaselineModel baseline_model;
    std::optional<MeanFeatScorer> meanfeat;
    if (detector == Detector::IdMiner) {
        checkpoint = model::load_checkpoint_file(checkpoint_path);
        idminer.emplace(IdMinerScorer{checkpoint.store,
                                      checkpoint_model_for(dataset.manifest, checkpoint),
                                      dataset, tables});
    } else {
        baseline_model = baseline::train_baseline(dataset, baseline::BaselineConfig{});
        meanfeat.emplace(MeanFeatScorer{baseline_model, dataset, tables});
    }

    SweepResult result;
    std::string csv = "kind,level,auc,acc_calibrated,n_pairs\n";
    for (data::SurrogateKind kind : data::all_surrogate_kinds()) {
        for (int level = 0; level <= 5; ++level) {
            const ProtocolEntry entry{"surrogate_" + data::to_string(kind),
                                      eval::ProtocolSetting::Surrogate,
                                      data::SurrogateWrap{kind, level}};
            std::function<double(const eval::EvaluationPair&)> score;
            if (idminer.has_value()) {
                idminer->set_wrap(entry.wrap);
                score = [&](const eval::EvaluationPair& pair) { return idminer->score(pair); };
            } else {
                meanfeat->set_wrap(entry.wrap);
                score = [&](const eval::EvaluationPair& pair) { return meanfeat->score(pair); };
            }
            const ScoredProtocol scored = score_protocol(dataset, entry, reference_based, score);
            SweepRow row;
            row.kind = data::to_string(kind);
            row.level = level;
            row.auc = scored.summary.auc;
            row.acc_calibrated = scored.summary.acc_calibrated;
            row.n_pairs = scored.summary.n_pairs;
            csv += row.kind + ',' + std::to_string(row.level) + ',' +
                   num::format_double(row.auc) + ',' + num::format_double(row.acc_calibrated) +
                   ',' + std::to_string(row.n_pairs) + '\n';
            result.rows.push_back(std::move(row));
        }
    }

    if (out_prefix.has_parent_path()) std::filesystem::create_directories(out_prefix.parent_path());
    result.csv_path = with_suffix(out_prefix, "_sweep.csv");
    num::write_text_file_atomic(result.csv_path, csv);

    json run;
    run["command"] = "sweep";
    run["versions"] = version_block();
    run["inputs"]["manifest"] = manifest_path.string();
    run["inputs"]["manifest_hash"] = file_hash(manifest_path);
    if (detector == Detector::IdMiner) {
        run["inputs"]["checkpoint"] = checkpoint_path.string();
        run["inputs"]["checkpoint_hash"] = file_hash(checkpoint_path);
    }
    run["options"]["detector"] = detector_name;
    run["outputs"]["table"] = result.csv_path.string();
    write_json_file(with_suffix(out_prefix, ".run.json"), run);
    return result;
}

namespace {

// A miniature two-identity dataset living purely in memory; enough structure
// for the training composition without touching disk.
data::LoadedDataset tiny_gradcheck_dataset(num::SeededRng& rng, int fau_dim) {
    data::LoadedDataset dataset;
    dataset.manifest.fau_dim = fau_dim;
    dataset.manifest.train_identities = {"gc_a", "gc_b"};
    auto random_frames = [&](int rows) {
        Eigen::MatrixXd frames(rows, fau_dim);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < fau_dim; ++c) frames(r, c) = rng.normal();
        return frames;
    };
    const std::vector<std::string> identities = {"gc_a", "gc_b"};
    for (int i = 0; i < 2; ++i) {
        const std::string& self = identities[static_cast<std::size_t>(i)];
        const std::string& other = identities[static_cast<std::size_t>(1 - i)];
        for (int v = 0; v < 2; ++v) {
            const std::string genuine_id = self + "_g" + std::to_string(v);
            const std::string forged_id = self + "_f" + std::to_string(v);
            const int t_genuine = 5 + static_cast<int>(rng.next_below(4));
            const int t_forged = 5 + static_cast<int>(rng.next_below(4));
            dataset.videos.emplace(
                genuine_id, data::make_record(genuine_id, self, self, self, {},
                                              random_frames(t_genuine)));
            dataset.videos.emplace(
                forged_id,
                data::make_record(forged_id, other, other, self,
                                  {data::BaseTag::Forged, std::nullopt},
                                  random_frames(t_forged)));
            dataset.manifest.metadata["driving." + forged_id] = genuine_id;
        }
    }
    return dataset;
}

train::TrainingBatch tiny_gradcheck_batch(const data::LoadedDataset& dataset,
                                          num::SeededRng& rng, int frame_pairs) {
    train::TrainingBatch batch;
    batch.classes = {"gc_a", "gc_b"};
    const std::vector<std::pair<std::string, int>> layout = {
        {"gc_a_f0", 0}, {"gc_a_f1", 0}, {"gc_b_f0", 1}, {"gc_b_f1", 1}};
    for (const auto& [forged_id, class_index] : layout) {
        train::BatchVideo video;
        video.video_id = forged_id;
        video.driving_id = dataset.manifest.driving_of(forged_id);
        video.puppeteer = batch.classes[static_cast<std::size_t>(class_index)];
        video.class_index = class_index;
        const Eigen::Index t_driving = dataset.video(video.driving_id).length();
        const Eigen::Index t_forged = dataset.video(video.video_id).length();
        for (int k = 0; k < frame_pairs; ++k) {
            const int d = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(t_driving)));
            const auto mapped = static_cast<Eigen::Index>(
                std::llround(d * static_cast<double>(t_forged) / t_driving));
            video.driving_frames.push_back(d);
            video.forged_frames.push_back(static_cast<int>(std::min(t_forged - 1, mapped)));
        }
        batch.videos.push_back(std::move(video));
    }
    // One genuine member per class, mirroring the sampler's mixed batches:
    // drives itself, contributes no frame pairs.
    for (int c = 0; c < 2; ++c) {
        train::BatchVideo video;
        video.video_id = batch.classes[static_cast<std::size_t>(c)] + "_g0";
        video.driving_id = video.video_id;
        video.puppeteer = batch.classes[static_cast<std::size_t>(c)];
        video.genuine = true;
        video.class_index = c;
        batch.videos.push_back(std::move(video));
    }
    batch.videos[0].positive_index = 4;
    batch.videos[1].positive_index = 4;
    batch.videos[2].positive_index = 5;
    batch.videos[3].positive_index = 5;
    batch.videos[4].positive_index = 0;
    batch.videos[5].positive_index = 2;
    return batch;
}

model::ModelConfig random_tiny_model(num::SeededRng& rng, int fau_dim) {
    model::ModelConfig config;
    config.encoder.input_dim = fau_dim;
    config.encoder.widths.clear();
    const int layers = 1 + static_cast<int>(rng.next_below(2));
    for (int l = 0; l < layers; ++l)
        config.encoder.widths.push_back(3 + static_cast<int>(rng.next_below(3)));
    config.aggregator.hidden_dim = 3 + static_cast<int>(rng.next_below(3));
    config.aggregator.repr_dim = 2 + static_cast<int>(rng.next_below(3));
    config.t_max = 8;
    return config;
}

}  // namespace

GradCheckSummary run_grad_check(std::uint64_t seed, int configurations, double tolerance,
                                const std::filesystem::path& report_path) {
    if (configurations < 1) raise(ErrorKind::Config, "configurations must be positive");
    if (!(tolerance > 0.0)) raise(ErrorKind::Config, "tolerance must be positive");

    GradCheckSummary summary;
    json checks = json::array();
    for (int c = 0; c < configurations; ++c) {
        num::SeededRng rng(num::derive_seed(seed, "gradcheck", static_cast<std::uint64_t>(c)));
        const int fau_dim = 2 + static_cast<int>(rng.next_below(4));
        const model::ModelConfig config = random_tiny_model(rng, fau_dim);
        const double tau = 0.2 + rng.uniform() * 0.8;
        const double lambda = 0.1 + rng.uniform();

        num::ParamStore store;
        model::init_params(store, config, rng);

        auto record_check = [&](const char* name, const num::GradCheckReport& report) {
            json entry;
            entry["configuration"] = c;
            entry["check"] = name;
            entry["max_rel_err"] = report.max_rel_err;
            entry["worst_param"] = report.worst_param;
            checks.push_back(entry);
            if (report.max_rel_err > summary.max_rel_err) {
                summary.max_rel_err = report.max_rel_err;
                summary.worst_check = "configuration " + std::to_string(c) + " " + name + " (" +
                                      report.worst_param + ")";
            }
        };

        {
            // Encoder + frame-level loss: random frame pairs over two classes.
            const int rows = 6;
            Eigen::MatrixXd q_in(rows, fau_dim), p_in(rows, fau_dim);
            for (int r = 0; r < rows; ++r)
                for (int d = 0; d < fau_dim; ++d) {
                    q_in(r, d) = rng.normal();
                    p_in(r, d) = rng.normal();
                }
            const std::vector<int> row_class = {0, 0, 0, 1, 1, 1};
            auto loss_fn = [&]() {
                const Eigen::MatrixXd q = model::encode_frames(store, config, q_in);
                const Eigen::MatrixXd p = model::encode_frames(store, config, p_in);
                return losses::paired_contrastive_loss(q, p, row_class, tau).loss;
            };
            store.zero_grads();
            model::EncodeCache qc, pc;
            const Eigen::MatrixXd q = model::encode_frames(store, config, q_in, &qc);
            const Eigen::MatrixXd p = model::encode_frames(store, config, p_in, &pc);
            const losses::PairedBatchLoss loss =
                losses::paired_contrastive_loss(q, p, row_class, tau);
            model::encode_backward(store, config, qc, loss.d_queries);
            model::encode_backward(store, config, pc, loss.d_positives);
            record_check("encoder_frame_loss", num::gradient_check(loss_fn, store));
        }

        {
            // Aggregator + video-level loss over fixed random embedding
            // sequences; exercises the recurrence backward in isolation.
            const int videos = 4;
            const int enc_dim = config.encoder.output_dim();
            std::vector<Eigen::MatrixXd> sequences;
            for (int v = 0; v < videos; ++v) {
                const int t = 4 + static_cast<int>(rng.next_below(4));
                Eigen::MatrixXd seq(t, enc_dim);
                for (int r = 0; r < t; ++r)
                    for (int d = 0; d < enc_dim; ++d) seq(r, d) = rng.normal();
                sequences.push_back(std::move(seq));
            }
            const std::vector<int> row_class = {0, 0, 1, 1};
            const std::vector<int> positive = {1, 0, 3, 2};
            auto loss_fn = [&]() {
                Eigen::MatrixXd reps(videos, config.aggregator.repr_dim);
                for (int v = 0; v < videos; ++v)
                    reps.row(v) = model::aggregate(store, config,
                                                   sequences[static_cast<std::size_t>(v)]);
                return losses::pooled_contrastive_loss(reps, row_class, positive, tau).loss;
            };
            store.zero_grads();
            std::vector<model::AggregateCache> caches(videos);
            Eigen::MatrixXd reps(videos, config.aggregator.repr_dim);
            for (int v = 0; v < videos; ++v)
                reps.row(v) = model::aggregate(store, config,
                                               sequences[static_cast<std::size_t>(v)],
                                               &caches[static_cast<std::size_t>(v)]);
            const losses::PooledBatchLoss loss =
                losses::pooled_contrastive_loss(reps, row_class, positive, tau);
            for (int v = 0; v < videos; ++v)
                model::aggregate_backward(store, config, caches[static_cast<std::size_t>(v)],
                                          loss.d_reps.row(v).transpose());
            record_check("aggregator_video_loss", num::gradient_check(loss_fn, store));
        }

        {
            // Full training composition on an in-memory dataset.
            const data::LoadedDataset dataset = tiny_gradcheck_dataset(rng, fau_dim);
            const train::TrainingBatch batch = tiny_gradcheck_batch(dataset, rng, 3);
            auto loss_fn = [&]() {
                return train::batch_losses(store, config, dataset, batch, tau, lambda, false)
                    .total;
            };
            store.zero_grads();
            train::batch_losses(store, config, dataset, batch, tau, lambda, true);
            record_check("training_composition", num::gradient_check(loss_fn, store));
        }
    }
    summary.passed = summary.max_rel_err < tolerance;

    json report;
    report["seed"] = seed;
    report["configurations"] = configurations;
    report["tolerance"] = tolerance;
    report["max_rel_err"] = summary.max_rel_err;
    report["worst_check"] = summary.worst_check;
    report["passed"] = summary.passed;
    report["checks"] = checks;
    if (report_path.has_parent_path())
        std::filesystem::create_directories(report_path.parent_path());
    write_json_file(report_path, report);
    summary.report_path = report_path;
    return summary;
}

EvalResult run_eval_scores(const std::filesystem::path& scores_path, bool average_frames,
                           const std::filesystem::path& out_prefix) {
    const std::string text = num::read_text_file(scores_path);
    const std::vector<eval::ScoredPair> rows = eval::read_score_csv(text);
    if (rows.empty()) raise(ErrorKind::Format, "score CSV has no data rows");

    std::vector<eval::Scored> scored;
    if (average_frames) {
        std::vector<std::string> order;
        std::map<std::string, std::vector<double>> groups;
        std::map<std::string, int> labels;
        for (const eval::ScoredPair& row : rows) {
            auto it = groups.find(row.pair_id);
            if (it == groups.end()) {
                order.push_back(row.pair_id);
                groups[row.pair_id] = {row.score};
                labels[row.pair_id] = row.label;
            } else {
                if (labels[row.pair_id] != row.label)
                    raise(ErrorKind::Format,
                          "pair '" + row.pair_id + "' has conflicting labels across frames");
                it->second.push_back(row.score);
            }
        }
        for (const std::string& pair_id : order)
            scored.push_back({eval::per_frame_average(groups[pair_id]), labels[pair_id]});
    } else {
        for (const eval::ScoredPair& row : rows) scored.push_back({row.score, row.label});
    }

    MetricsSummary summary;
    summary.protocol = "external";
    summary.auc = eval::auc(scored);
    summary.acc = eval::accuracy(scored, 0.5);
    const eval::CalibratedAccuracy calibrated = eval::calibrated_accuracy(scored);
    summary.acc_calibrated = calibrated.accuracy;
    summary.calibration_threshold = calibrated.threshold;
    summary.n_pairs = static_cast<int>(scored.size());

    if (out_prefix.has_parent_path()) std::filesystem::create_directories(out_prefix.parent_path());
    json metrics = summary_to_json(summary);
    metrics["source"] = scores_path.string();
    metrics["averaged_frames"] = average_frames;

    EvalResult result;
    result.metrics_path = with_suffix(out_prefix, "_metrics.json");
    write_json_file(result.metrics_path, metrics);
    result.by_name.emplace("external", summary);

    json run;
    run["command"] = "eval-scores";
    run["versions"] = version_block();
    run["inputs"]["scores"] = scores_path.string();
    run["inputs"]["scores_hash"] = fnv1a_hex(text);
    run["options"]["average_frames"] = average_frames;
    run["outputs"]["metrics"] = result.metrics_path.string();
    write_json_file(with_suffix(out_prefix, ".run.json"), run);
    return result;
}

}  // namespace idminer::pipeline
