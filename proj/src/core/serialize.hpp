#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace idminer::num {

// Shortest round-trip decimal of a double ("%.17g"); the single formatting
// rule for every CSV cell and human-readable number the artifact writes, so
// repeat runs are byte-comparable.
std::string format_double(double value);

// Doubles as base64 of their little-endian IEEE-754 bytes, for checkpoint
// payloads. Matrices are flattened column-major (Eigen's storage order).
std::string encode_doubles(const Eigen::MatrixXd& values);
void decode_doubles(const std::string& text, Eigen::MatrixXd& out);

std::string read_text_file(const std::filesystem::path& path);

// Write to a sibling temp file, then rename over the target, so readers never
// observe a partial file.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace idminer::num
