#include "core/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "core/errors.hpp"
#include "core/numeric.hpp"
#include "core/serialize.hpp"

namespace idminer::eval {

std::string to_string(ProtocolSetting setting) {
    switch (setting) {
        case ProtocolSetting::Conventional: return "conventional";
        case ProtocolSetting::Whitehat: return "whitehat";
        case ProtocolSetting::Surrogate: return "surrogate";
    }
    raise(ErrorKind::Usage, "unknown protocol setting");
}

ProtocolSetting protocol_setting_from_string(const std::string& text) {
    if (text == "conventional") return ProtocolSetting::Conventional;
    if (text == "whitehat") return ProtocolSetting::Whitehat;
    if (text == "surrogate") return ProtocolSetting::Surrogate;
    raise(ErrorKind::Config, "unknown protocol '" + text + "'");
}

void validate_protocol(const ProtocolKind& protocol) {
    if (protocol.setting == ProtocolSetting::Surrogate) {
        if (!protocol.surrogate.has_value())
            raise(ErrorKind::Config, "surrogate protocol needs a surrogate kind and level");
    } else if (protocol.surrogate.has_value()) {
        raise(ErrorKind::Config,
              "surrogate kind/level given for the " + to_string(protocol.setting) + " protocol");
    }
}

namespace {

struct TestSplit {
    std::vector<const data::ManifestRecord*> genuine;
    std::vector<const data::ManifestRecord*> forged;
    std::vector<const data::ManifestRecord*> reconstructed;
};

bool in_test_split(const data::DatasetManifest& manifest, const data::ManifestRecord& record) {
    return std::find(manifest.test_identities.begin(), manifest.test_identities.end(),
                     record.puppeteer) != manifest.test_identities.end();
}

TestSplit collect_test_split(const data::DatasetManifest& manifest) {
    TestSplit split;
    for (const data::ManifestRecord& record : manifest.records) {
        if (record.provenance.wrapped()) continue;
        if (!in_test_split(manifest, record)) continue;
        switch (record.provenance.base) {
            case data::BaseTag::Genuine: split.genuine.push_back(&record); break;
            case data::BaseTag::Forged: split.forged.push_back(&record); break;
            case data::BaseTag::Reconstructed: split.reconstructed.push_back(&record); break;
        }
    }
    auto by_id = [](const data::ManifestRecord* a, const data::ManifestRecord* b) {
        return a->video_id < b->video_id;
    };
    std::sort(split.genuine.begin(), split.genuine.end(), by_id);
    std::sort(split.forged.begin(), split.forged.end(), by_id);
    std::sort(split.reconstructed.begin(), split.reconstructed.end(), by_id);
    return split;
}

void require_set(const std::vector<const data::ManifestRecord*>& records, const char* what,
                 const ProtocolKind& protocol) {
    if (records.empty())
        raise(ErrorKind::Protocol, "the " + to_string(protocol.setting) +
                                       " protocol needs " + what +
                                       " records in the test split and the manifest has none");
}

std::string driving_or_empty(const data::DatasetManifest& manifest, const std::string& video_id) {
    auto it = manifest.metadata.find("driving." + video_id);
    return it == manifest.metadata.end() ? std::string() : it->second;
}

// Lowest-id candidate claiming the probe's appearance, never the probe itself
// and never its driving video.
const data::ManifestRecord* pick_reference(
    const std::vector<const data::ManifestRecord*>& pool, const data::ManifestRecord& probe,
    const std::string& probe_driving) {
    for (const data::ManifestRecord* candidate : pool) {
        if (candidate->appearance != probe.appearance) continue;
        if (candidate->video_id == probe.video_id) continue;
        if (!probe_driving.empty() && candidate->video_id == probe_driving) continue;
        return candidate;
    }
    return nullptr;
}

void add_reference_pairs(PairSet& out, const data::DatasetManifest& manifest,
                         const std::vector<const data::ManifestRecord*>& probes,
                         const std::vector<const data::ManifestRecord*>& reference_pool,
                         const char* pool_name, int label, bool wrap_both) {
    for (const data::ManifestRecord* probe : probes) {
        const std::string driving = driving_or_empty(manifest, probe->video_id);
        const data::ManifestRecord* reference = pick_reference(reference_pool, *probe, driving);
        if (reference == nullptr) {
            ++out.skipped;
            out.skip_notes.push_back("probe '" + probe->video_id + "' skipped: no eligible " +
                                     pool_name + " reference of appearance '" +
                                     probe->appearance + "'");
            continue;
        }
        EvaluationPair pair;
        pair.probe_id = probe->video_id;
        pair.reference_id = reference->video_id;
        pair.probe_surrogate = wrap_both;
        pair.reference_surrogate = wrap_both;
        pair.label = label;
        out.pairs.push_back(std::move(pair));
    }
}

void add_single_pairs(PairSet& out, const std::vector<const data::ManifestRecord*>& probes,
                      int label, bool wrap) {
    for (const data::ManifestRecord* probe : probes) {
        EvaluationPair pair;
        pair.probe_id = probe->video_id;
        pair.probe_surrogate = wrap;
        pair.label = label;
        out.pairs.push_back(std::move(pair));
    }
}

}  // namespace

PairSet build_pairs(const data::DatasetManifest& manifest, const ProtocolKind& protocol) {
    validate_protocol(protocol);
    const TestSplit split = collect_test_split(manifest);
    PairSet out;

    if (!protocol.reference_based) {
        switch (protocol.setting) {
            case ProtocolSetting::Conventional:
                require_set(split.genuine, "genuine", protocol);
                require_set(split.forged, "forged", protocol);
                add_single_pairs(out, split.genuine, 1, false);
                add_single_pairs(out, split.forged, 0, false);
                break;
            case ProtocolSetting::Whitehat:
                require_set(split.reconstructed, "reconstructed (white-hat)", protocol);
                require_set(split.forged, "forged", protocol);
                add_single_pairs(out, split.reconstructed, 1, false);
                add_single_pairs(out, split.forged, 0, false);
                break;
            case ProtocolSetting::Surrogate:
                require_set(split.genuine, "genuine", protocol);
                require_set(split.forged, "forged", protocol);
                add_single_pairs(out, split.genuine, 1, true);
                add_single_pairs(out, split.forged, 0, true);
                break;
        }
        return out;
    }

    switch (protocol.setting) {
        case ProtocolSetting::Conventional:
            require_set(split.genuine, "genuine", protocol);
            require_set(split.forged, "forged", protocol);
            add_reference_pairs(out, manifest, split.genuine, split.genuine, "genuine", 1, false);
            add_reference_pairs(out, manifest, split.forged, split.genuine, "genuine", 0, false);
            break;
        case ProtocolSetting::Whitehat:
            require_set(split.genuine, "genuine", protocol);
            require_set(split.reconstructed, "reconstructed (white-hat)", protocol);
            require_set(split.forged, "forged", protocol);
            add_reference_pairs(out, manifest, split.genuine, split.genuine, "genuine", 1, false);
            add_reference_pairs(out, manifest, split.forged, split.reconstructed,
                                "reconstructed", 0, false);
            break;
        case ProtocolSetting::Surrogate:
            require_set(split.genuine, "genuine", protocol);
            require_set(split.forged, "forged", protocol);
            // Genuine pairs stay clean; the perturbation lands on both sides
            // of every forged pair, equalizing the noise floor the detector
            // could otherwise key on.
            add_reference_pairs(out, manifest, split.genuine, split.genuine, "genuine", 1, false);
            add_reference_pairs(out, manifest, split.forged, split.genuine, "genuine", 0, true);
            break;
    }
    return out;
}

double score_pair(const num::ParamStore& store, const model::ModelConfig& config,
                  const data::LoadedDataset& dataset, const EvaluationPair& pair,
                  const std::optional<data::SurrogateWrap>& wrap,
                  const synth::SurrogateTables& tables) {
    if (!pair.reference_id.has_value())
        raise(ErrorKind::Capability,
              "reference-free scoring is unsupported for the identity detector; use a "
              "reference-based protocol");
    if ((pair.probe_surrogate || pair.reference_surrogate) && !wrap.has_value())
        raise(ErrorKind::Usage, "pair flags a surrogate side but no wrap was given");
    const data::VideoRecord* probe = &dataset.video(pair.probe_id);
    const data::VideoRecord* reference = &dataset.video(*pair.reference_id);
    data::VideoRecord wrapped_probe, wrapped_reference;
    if (pair.probe_surrogate) {
        wrapped_probe = synth::apply_surrogate(*probe, *wrap, tables);
        probe = &wrapped_probe;
    }
    if (pair.reference_surrogate) {
        wrapped_reference = synth::apply_surrogate(*reference, *wrap, tables);
        reference = &wrapped_reference;
    }
    const Eigen::VectorXd a = model::forward_video(store, config, probe->frames);
    const Eigen::VectorXd b = model::forward_video(store, config, reference->frames);
    return (num::cosine_similarity(a, b) + 1.0) / 2.0;
}

std::string write_score_csv(const std::vector<ScoredPair>& rows) {
    std::string out = "pair_id,probe_id,reference_id,label,score\n";
    for (const ScoredPair& row : rows) {
        out += row.pair_id;
        out += ',';
        out += row.probe_id;
        out += ',';
        out += row.reference_id;
        out += ',';
        out += std::to_string(row.label);
        out += ',';
        out += num::format_double(row.score);
        out += '\n';
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace

std::vector<ScoredPair> read_score_csv(const std::string& text) {
    std::istringstream stream(text);
    std::string line;
    if (!std::getline(stream, line)) raise(ErrorKind::Format, "score CSV is empty");
    if (line == "pair_id,probe_id,reference_id,label,score\r")
        line.pop_back();
    if (line != "pair_id,probe_id,reference_id,label,score")
        raise(ErrorKind::Format, "score CSV header mismatch: '" + line + "'");
    std::vector<ScoredPair> rows;
    int line_number = 1;
    while (std::getline(stream, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 5)
            raise(ErrorKind::Format, "score CSV line " + std::to_string(line_number) + " has " +
                                         std::to_string(fields.size()) + " fields, expected 5");
        ScoredPair row;
        row.pair_id = fields[0];
        row.probe_id = fields[1];
        row.reference_id = fields[2];
        if (fields[3] == "0")
            row.label = 0;
        else if (fields[3] == "1")
            row.label = 1;
        else
            raise(ErrorKind::Format, "score CSV line " + std::to_string(line_number) +
                                         ": label must be 0 or 1, got '" + fields[3] + "'");
        char* end = nullptr;
        row.score = std::strtod(fields[4].c_str(), &end);
        if (end == fields[4].c_str() || *end != '\0' || !std::isfinite(row.score))
            raise(ErrorKind::Format, "score CSV line " + std::to_string(line_number) +
                                         ": unreadable score '" + fields[4] + "'");
        if (row.score < 0.0 || row.score > 1.0)
            raise(ErrorKind::Format, "score CSV line " + std::to_string(line_number) +
                                         ": score " + fields[4] + " outside [0, 1]");
        rows.push_back(std::move(row));
    }
    return rows;
}

double per_frame_average(const std::vector<double>& frame_scores) {
    if (frame_scores.empty())
        raise(ErrorKind::Usage, "per_frame_average needs at least one frame score");
    double sum = 0.0;
    for (double score : frame_scores) {
        num::require_finite(score, "frame score");
        sum += score;
    }
    return sum / static_cast<double>(frame_scores.size());
}

double reciprocal_distance_score(double distance) {
    num::require_finite(distance, "distance");
    if (distance < 0.0) raise(ErrorKind::Domain, "distance must be non-negative");
    return 1.0 / (1.0 + distance);
}

}  // namespace idminer::eval
