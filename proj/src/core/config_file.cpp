#include "core/config_file.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "core/errors.hpp"

namespace idminer::data {

namespace {

std::string trim(const std::string& text) {
    std::size_t begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    std::size_t end = text.find_last_not_of(" \t\r");
    return text.substr(begin, end - begin + 1);
}

double parse_double(const std::string& text, const std::string& where) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(value))
        raise(ErrorKind::Config, where + ": '" + text + "' is not a number");
    return value;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text) {
    KeyValueFile file;
    std::istringstream stream(text);
    std::string line;
    std::string section;
    std::size_t line_number = 0;
    while (std::getline(stream, line)) {
        ++line_number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (auto semi = line.find(';'); semi != std::string::npos) line.resize(semi);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                raise(ErrorKind::Config,
                      "config line " + std::to_string(line_number) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                raise(ErrorKind::Config,
                      "config line " + std::to_string(line_number) + ": empty section name");
            file.sections_[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorKind::Config,
                  "config line " + std::to_string(line_number) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            raise(ErrorKind::Config, "config line " + std::to_string(line_number) + ": empty key");
        if (section.empty())
            raise(ErrorKind::Config,
                  "config line " + std::to_string(line_number) + ": key outside any section");
        file.sections_[section][key] = trim(line.substr(eq + 1));
    }
    return file;
}

bool KeyValueFile::has_section(const std::string& section) const {
    return sections_.count(section) != 0;
}

bool KeyValueFile::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) != 0;
}

std::string KeyValueFile::get_string(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) raise(ErrorKind::Config, "missing config section [" + section + "]");
    auto kv = it->second.find(key);
    if (kv == it->second.end())
        raise(ErrorKind::Config, "missing config key '" + key + "' in section [" + section + "]");
    return kv->second;
}

std::string KeyValueFile::get_string(const std::string& section, const std::string& key,
                                     const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
}

double KeyValueFile::get_double(const std::string& section, const std::string& key) const {
    return parse_double(get_string(section, key), "[" + section + "] " + key);
}

double KeyValueFile::get_double(const std::string& section, const std::string& key,
                                double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long KeyValueFile::get_int(const std::string& section, const std::string& key) const {
    const double value = get_double(section, key);
    const long rounded = static_cast<long>(value);
    if (static_cast<double>(rounded) != value)
        raise(ErrorKind::Config, "[" + section + "] " + key + ": expected an integer");
    return rounded;
}

long KeyValueFile::get_int(const std::string& section, const std::string& key, long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

std::vector<double> KeyValueFile::get_doubles(const std::string& section, const std::string& key,
                                              const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    const std::string text = get_string(section, key);
    std::vector<double> values;
    std::istringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item = trim(item);
        if (item.empty())
            raise(ErrorKind::Config, "[" + section + "] " + key + ": empty list entry");
        values.push_back(parse_double(item, "[" + section + "] " + key));
    }
    if (values.empty()) raise(ErrorKind::Config, "[" + section + "] " + key + ": empty list");
    return values;
}

}  // namespace idminer::data
