#pragma once

#include <map>
#include <string>
#include <vector>

namespace idminer::data {

// Minimal sectioned key-value format:
//   [section]
//   key = value            # trailing comments allowed
// Blank lines and lines starting with '#' or ';' are ignored.
class KeyValueFile {
public:
    static KeyValueFile parse(const std::string& text);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_int(const std::string& section, const std::string& key) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace idminer::data
