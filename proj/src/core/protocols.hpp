#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/fau_data.hpp"
#include "core/model.hpp"
#include "core/synth.hpp"

namespace idminer::eval {

enum class ProtocolSetting { Conventional, Whitehat, Surrogate };

std::string to_string(ProtocolSetting setting);
ProtocolSetting protocol_setting_from_string(const std::string& text);

// A full protocol choice: which rebalancing applies and whether probes are
// judged against a reference video. The surrogate wrap is fixed per run and
// required exactly for the surrogate setting.
struct ProtocolKind {
    ProtocolSetting setting = ProtocolSetting::Conventional;
    bool reference_based = true;
    std::optional<data::SurrogateWrap> surrogate;
};

void validate_protocol(const ProtocolKind& protocol);

// One labeled evaluation item. The surrogate flags say whether the run's wrap
// applies to that side; records themselves stay untouched in the manifest.
struct EvaluationPair {
    std::string probe_id;
    std::optional<std::string> reference_id;
    bool probe_surrogate = false;
    bool reference_surrogate = false;
    int label = 0;
};

struct PairSet {
    std::vector<EvaluationPair> pairs;
    int skipped = 0;                      // probes without an eligible reference
    std::vector<std::string> skip_notes;
};

// Labels follow the protocol truth tables over the test split:
//   reference-free   conventional: genuine->1, forged->0
//                    whitehat:     reconstructed->1, forged->0
//                    surrogate:    wrapped genuine->1, wrapped forged->0
//   reference-based  conventional: (genuine, genuine ref, 1), (forged, genuine ref, 0)
//                    whitehat:     (genuine, genuine ref, 1), (forged, reconstructed ref, 0)
//                    surrogate:    (genuine, genuine ref, 1), (wrapped forged, wrapped genuine ref, 0)
// The reference is the lowest-id other video of the appearance identity the
// probe claims, never the probe's own driving video.
PairSet build_pairs(const data::DatasetManifest& manifest, const ProtocolKind& protocol);

// Similarity of the two video representations mapped onto [0, 1]. `wrap` is
// the run's surrogate choice, applied to whichever sides the pair flags. The
// reference-free form has no pair to compare and is rejected as a
// capability error.
double score_pair(const num::ParamStore& store, const model::ModelConfig& config,
                  const data::LoadedDataset& dataset, const EvaluationPair& pair,
                  const std::optional<data::SurrogateWrap>& wrap,
                  const synth::SurrogateTables& tables);

struct ScoredPair {
    std::string pair_id;
    std::string probe_id;
    std::string reference_id;  // empty in reference-free mode
    int label = 0;
    double score = 0.0;
};

std::string write_score_csv(const std::vector<ScoredPair>& rows);
std::vector<ScoredPair> read_score_csv(const std::string& text);

// Adapters for ingesting external detector outputs: frame-wise scores
// averaged into a video score, and distances mapped monotonically into (0, 1].
double per_frame_average(const std::vector<double>& frame_scores);
double reciprocal_distance_score(double distance);

}  // namespace idminer::eval
