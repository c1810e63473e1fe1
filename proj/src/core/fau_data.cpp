#include "core/fau_data.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/numeric.hpp"
#include "core/serialize.hpp"

namespace idminer::data {

using nlohmann::json;

std::string to_string(BaseTag tag) {
    switch (tag) {
        case BaseTag::Genuine: return "genuine";
        case BaseTag::Forged: return "forged";
        case BaseTag::Reconstructed: return "reconstructed";
    }
    raise(ErrorKind::Usage, "unknown base tag");
}

std::string to_string(SurrogateKind kind) {
    switch (kind) {
        case SurrogateKind::Resize: return "resize";
        case SurrogateKind::Jpeg: return "jpeg";
        case SurrogateKind::Vc: return "vc";
        case SurrogateKind::Blur: return "blur";
    }
    raise(ErrorKind::Usage, "unknown surrogate kind");
}

BaseTag base_tag_from_string(const std::string& text) {
    if (text == "genuine") return BaseTag::Genuine;
    if (text == "forged") return BaseTag::Forged;
    if (text == "reconstructed") return BaseTag::Reconstructed;
    raise(ErrorKind::Format, "unknown provenance tag '" + text + "'");
}

SurrogateKind surrogate_kind_from_string(const std::string& text) {
    if (text == "resize") return SurrogateKind::Resize;
    if (text == "jpeg") return SurrogateKind::Jpeg;
    if (text == "vc") return SurrogateKind::Vc;
    if (text == "blur") return SurrogateKind::Blur;
    raise(ErrorKind::Format, "unknown surrogate kind '" + text + "'");
}

std::vector<SurrogateKind> all_surrogate_kinds() {
    return {SurrogateKind::Resize, SurrogateKind::Jpeg, SurrogateKind::Vc, SurrogateKind::Blur};
}

void validate_record(const VideoRecord& record) {
    if (record.video_id.empty()) raise(ErrorKind::Integrity, "record with empty video_id");
    if (record.frames.rows() == 0)
        raise(ErrorKind::Integrity, "record '" + record.video_id + "' has no frames");
    num::require_finite(record.frames, "frames of '" + record.video_id + "'");
    switch (record.provenance.base) {
        case BaseTag::Genuine:
            if (record.appearance != record.puppeteer || record.subject != record.appearance)
                raise(ErrorKind::Integrity, "genuine record '" + record.video_id +
                                                "' must have subject == appearance == puppeteer");
            break;
        case BaseTag::Forged:
            if (record.appearance == record.puppeteer)
                raise(ErrorKind::Integrity, "forged record '" + record.video_id +
                                                "' must have appearance != puppeteer");
            break;
        case BaseTag::Reconstructed:
            if (record.appearance != record.puppeteer)
                raise(ErrorKind::Integrity, "reconstructed record '" + record.video_id +
                                                "' must have appearance == puppeteer");
            break;
    }
    if (record.provenance.surrogate) {
        const int level = record.provenance.surrogate->level;
        if (level < 0 || level > 5)
            raise(ErrorKind::Integrity, "record '" + record.video_id + "' has surrogate level " +
                                            std::to_string(level) + " outside 0..5");
    }
}

VideoRecord make_record(std::string video_id, std::string subject, std::string appearance,
                        std::string puppeteer, Provenance provenance, Eigen::MatrixXd frames) {
    VideoRecord record{std::move(video_id), std::move(subject), std::move(appearance),
                       std::move(puppeteer), provenance, std::move(frames)};
    validate_record(record);
    return record;
}

const ManifestRecord& DatasetManifest::record(const std::string& video_id) const {
    for (const auto& r : records)
        if (r.video_id == video_id) return r;
    raise(ErrorKind::Usage, "manifest has no record '" + video_id + "'");
}

std::string DatasetManifest::driving_of(const std::string& video_id) const {
    auto it = metadata.find("driving." + video_id);
    if (it == metadata.end())
        raise(ErrorKind::Integrity, "manifest records no driving video for '" + video_id + "'");
    return it->second;
}

bool DatasetManifest::is_train_identity(const std::string& identity) const {
    return std::find(train_identities.begin(), train_identities.end(), identity) !=
           train_identities.end();
}

void validate_manifest(const DatasetManifest& manifest) {
    if (manifest.fau_dim <= 0) raise(ErrorKind::Integrity, "manifest fau_dim must be positive");
    std::set<std::string> ids;
    for (const auto& r : manifest.records) {
        if (!ids.insert(r.video_id).second)
            raise(ErrorKind::Integrity, "duplicate video_id '" + r.video_id + "'");
    }
    std::set<std::string> train(manifest.train_identities.begin(), manifest.train_identities.end());
    for (const auto& identity : manifest.test_identities) {
        if (train.count(identity))
            raise(ErrorKind::Integrity,
                  "identity '" + identity + "' appears in both train and test splits");
    }
    std::set<std::string> all = train;
    all.insert(manifest.test_identities.begin(), manifest.test_identities.end());
    for (const auto& r : manifest.records) {
        if (!all.count(r.puppeteer))
            raise(ErrorKind::Integrity,
                  "record '" + r.video_id + "' has puppeteer outside both splits");
    }
}

namespace {

json provenance_to_json(const Provenance& p) {
    json out;
    out["tag"] = to_string(p.base);
    if (p.surrogate) {
        out["surrogate_kind"] = to_string(p.surrogate->kind);
        out["surrogate_level"] = p.surrogate->level;
    }
    return out;
}

Provenance provenance_from_json(const json& j) {
    Provenance p;
    p.base = base_tag_from_string(j.at("tag").get<std::string>());
    if (j.contains("surrogate_kind") || j.contains("surrogate_level")) {
        if (!j.contains("surrogate_kind") || !j.contains("surrogate_level"))
            raise(ErrorKind::Format, "provenance needs both surrogate_kind and surrogate_level");
        p.surrogate = SurrogateWrap{surrogate_kind_from_string(j.at("surrogate_kind").get<std::string>()),
                                    j.at("surrogate_level").get<int>()};
    }
    return p;
}

}  // namespace

std::string save_manifest(const DatasetManifest& manifest) {
    validate_manifest(manifest);
    json root;
    root["version"] = 1;
    root["fau_dim"] = manifest.fau_dim;
    root["split"]["train"] = manifest.train_identities;
    root["split"]["test"] = manifest.test_identities;
    root["records"] = json::array();
    for (const auto& r : manifest.records) {
        json item;
        item["video_id"] = r.video_id;
        item["subject"] = r.subject;
        item["appearance"] = r.appearance;
        item["puppeteer"] = r.puppeteer;
        item["provenance"] = provenance_to_json(r.provenance);
        item["path"] = r.path;
        root["records"].push_back(std::move(item));
    }
    root["metadata"] = manifest.metadata;
    return root.dump(2) + "\n";
}

DatasetManifest load_manifest(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::Format, std::string("manifest is not valid JSON: ") + e.what());
    }
    try {
        const int version = root.at("version").get<int>();
        if (version != 1)
            raise(ErrorKind::Integrity,
                  "manifest version " + std::to_string(version) + " unsupported (expected 1)");
        DatasetManifest manifest;
        manifest.fau_dim = root.at("fau_dim").get<int>();
        manifest.train_identities = root.at("split").at("train").get<std::vector<std::string>>();
        manifest.test_identities = root.at("split").at("test").get<std::vector<std::string>>();
        for (const auto& item : root.at("records")) {
            ManifestRecord r;
            r.video_id = item.at("video_id").get<std::string>();
            r.subject = item.at("subject").get<std::string>();
            r.appearance = item.at("appearance").get<std::string>();
            r.puppeteer = item.at("puppeteer").get<std::string>();
            r.provenance = provenance_from_json(item.at("provenance"));
            r.path = item.at("path").get<std::string>();
            manifest.records.push_back(std::move(r));
        }
        if (root.contains("metadata"))
            manifest.metadata = root.at("metadata").get<std::map<std::string, std::string>>();
        validate_manifest(manifest);
        return manifest;
    } catch (const json::exception& e) {
        raise(ErrorKind::Format, std::string("manifest layout error: ") + e.what());
    }
}

void save_manifest_file(const DatasetManifest& manifest, const std::filesystem::path& path) {
    num::write_text_file_atomic(path, save_manifest(manifest));
}

DatasetManifest load_manifest_file(const std::filesystem::path& path) {
    return load_manifest(num::read_text_file(path));
}

std::vector<std::string> au_column_names(int dim) {
    if (dim <= 0) raise(ErrorKind::Config, "au_column_names: dim must be positive");
    static const int kOpenFaceAus[] = {1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 45};
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(dim));
    char buffer[16];
    if (dim == 17) {
        for (int au : kOpenFaceAus) {
            std::snprintf(buffer, sizeof(buffer), "AU%02d_r", au);
            names.emplace_back(buffer);
        }
    } else {
        for (int i = 1; i <= dim; ++i) {
            std::snprintf(buffer, sizeof(buffer), "AU%02d_r", i);
            names.emplace_back(buffer);
        }
    }
    return names;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ') ++start;
        cells.push_back(cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row_index) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(value))
        raise(ErrorKind::Format, "non-numeric cell '" + cell + "' at data row " +
                                     std::to_string(row_index));
    return value;
}

}  // namespace

Eigen::MatrixXd read_fau_csv(std::istream& source, const std::vector<std::string>& schema) {
    if (schema.empty()) raise(ErrorKind::Config, "read_fau_csv: empty schema");
    std::string line;
    if (!std::getline(source, line)) raise(ErrorKind::Format, "read_fau_csv: missing header row");
    const std::vector<std::string> header = split_csv_line(line);
    std::vector<std::size_t> columns;
    columns.reserve(schema.size());
    for (const auto& name : schema) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            raise(ErrorKind::Format, "read_fau_csv: missing column '" + name + "'");
        columns.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::ptrdiff_t success_column = -1;
    if (auto it = std::find(header.begin(), header.end(), "success"); it != header.end())
        success_column = it - header.begin();

    std::vector<std::vector<double>> rows;
    std::size_t row_index = 0;
    while (std::getline(source, line)) {
        ++row_index;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() < header.size())
            raise(ErrorKind::Format, "read_fau_csv: row " + std::to_string(row_index) + " has " +
                                         std::to_string(cells.size()) + " cells, header has " +
                                         std::to_string(header.size()));
        if (success_column >= 0) {
            const double success = parse_cell(cells[static_cast<std::size_t>(success_column)], row_index);
            if (success == 0.0) continue;
        }
        std::vector<double> row;
        row.reserve(schema.size());
        for (std::size_t c : columns) row.push_back(parse_cell(cells[c], row_index));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) raise(ErrorKind::Format, "read_fau_csv: no usable data rows");
    Eigen::MatrixXd frames(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(schema.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < schema.size(); ++c)
            frames(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return frames;
}

VideoRecord ingest_fau_csv(std::istream& source, const std::vector<std::string>& schema,
                           std::string video_id, std::string subject, std::string appearance,
                           std::string puppeteer, Provenance provenance) {
    Eigen::MatrixXd frames = read_fau_csv(source, schema);
    return make_record(std::move(video_id), std::move(subject), std::move(appearance),
                       std::move(puppeteer), provenance, std::move(frames));
}

std::string write_fau_csv(const Eigen::MatrixXd& frames, const std::vector<std::string>& schema) {
    if (frames.cols() != static_cast<Eigen::Index>(schema.size()))
        raise(ErrorKind::Shape, "write_fau_csv: schema length does not match frame dimension");
    std::string out;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c) out += ',';
        out += schema[c];
    }
    out += '\n';
    for (Eigen::Index r = 0; r < frames.rows(); ++r) {
        for (Eigen::Index c = 0; c < frames.cols(); ++c) {
            if (c) out += ',';
            out += num::format_double(frames(r, c));
        }
        out += '\n';
    }
    return out;
}

VideoRecord load_record_frames(const std::filesystem::path& manifest_dir,
                               const ManifestRecord& record, int fau_dim) {
    const std::filesystem::path csv_path = manifest_dir / record.path;
    const std::string content = num::read_text_file(csv_path);
    std::istringstream stream(content);
    return ingest_fau_csv(stream, au_column_names(fau_dim), record.video_id, record.subject,
                          record.appearance, record.puppeteer, record.provenance);
}

const VideoRecord& LoadedDataset::video(const std::string& video_id) const {
    auto it = videos.find(video_id);
    if (it == videos.end())
        raise(ErrorKind::Integrity, "no loaded frames for video '" + video_id + "'");
    return it->second;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
    LoadedDataset dataset;
    dataset.manifest = load_manifest_file(manifest_path);
    const std::filesystem::path dir = manifest_path.parent_path();
    for (const ManifestRecord& record : dataset.manifest.records) {
        dataset.videos.emplace(record.video_id,
                               load_record_frames(dir, record, dataset.manifest.fau_dim));
    }
    return dataset;
}

}  // namespace idminer::data
