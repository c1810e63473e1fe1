#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace idminer::data {

enum class BaseTag { Genuine, Forged, Reconstructed };

enum class SurrogateKind { Resize, Jpeg, Vc, Blur };

std::string to_string(BaseTag tag);
std::string to_string(SurrogateKind kind);
BaseTag base_tag_from_string(const std::string& text);
SurrogateKind surrogate_kind_from_string(const std::string& text);
std::vector<SurrogateKind> all_surrogate_kinds();

struct SurrogateWrap {
    SurrogateKind kind;
    int level;
    bool operator==(const SurrogateWrap&) const = default;
};

// Provenance is a base tag optionally wrapped by one surrogate transform.
// The wrap never alters identity labels, only marks the applied perturbation.
struct Provenance {
    BaseTag base = BaseTag::Genuine;
    std::optional<SurrogateWrap> surrogate;

    bool wrapped() const { return surrogate.has_value(); }
    bool operator==(const Provenance&) const = default;
};

// One FAU trajectory: frames.row(t) is the length-D attribute vector of
// frame t. Identity labels: subject owns the face/appearance channel the
// record claims, puppeteer owns the action sequence.
struct VideoRecord {
    std::string video_id;
    std::string subject;
    std::string appearance;
    std::string puppeteer;
    Provenance provenance;
    Eigen::MatrixXd frames;

    Eigen::Index length() const { return frames.rows(); }
    Eigen::Index dim() const { return frames.cols(); }
};

// Enforces the label/provenance invariants; raises on violation.
void validate_record(const VideoRecord& record);

VideoRecord make_record(std::string video_id, std::string subject, std::string appearance,
                        std::string puppeteer, Provenance provenance, Eigen::MatrixXd frames);

struct ManifestRecord {
    std::string video_id;
    std::string subject;
    std::string appearance;
    std::string puppeteer;
    Provenance provenance;
    std::string path;  // CSV location relative to the manifest's directory

    bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
    int fau_dim = 0;
    std::vector<std::string> train_identities;
    std::vector<std::string> test_identities;
    std::vector<ManifestRecord> records;
    std::map<std::string, std::string> metadata;

    bool operator==(const DatasetManifest&) const = default;

    const ManifestRecord& record(const std::string& video_id) const;
    // Driving genuine video of a forged or reconstructed record, from metadata.
    std::string driving_of(const std::string& video_id) const;
    bool is_train_identity(const std::string& identity) const;
};

void validate_manifest(const DatasetManifest& manifest);

std::string save_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& text);
void save_manifest_file(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest_file(const std::filesystem::path& path);

// AU intensity column names: the 17 OpenFace intensity outputs when dim == 17,
// otherwise a generated AU##_r sequence of the requested length.
std::vector<std::string> au_column_names(int dim);

// Parses an OpenFace-style CSV: header row, one frame per row, the schema
// columns in any order. Rows whose `success` column reads 0 are dropped.
Eigen::MatrixXd read_fau_csv(std::istream& source, const std::vector<std::string>& schema);

VideoRecord ingest_fau_csv(std::istream& source, const std::vector<std::string>& schema,
                           std::string video_id, std::string subject, std::string appearance,
                           std::string puppeteer, Provenance provenance);

std::string write_fau_csv(const Eigen::MatrixXd& frames, const std::vector<std::string>& schema);

// Reads the record's CSV from disk and attaches the manifest labels.
VideoRecord load_record_frames(const std::filesystem::path& manifest_dir,
                               const ManifestRecord& record, int fau_dim);

// A manifest with every record's frames resident in memory. Frame counts are
// data properties (temporal jitter changes forged lengths), so anything that
// samples frame indices works from this rather than the bare manifest.
struct LoadedDataset {
    DatasetManifest manifest;
    std::map<std::string, VideoRecord> videos;

    const VideoRecord& video(const std::string& video_id) const;
};

LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace idminer::data
