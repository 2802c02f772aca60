#pragma once

#include <map>
#include <string>
#include <vector>

#include "errors.hpp"

namespace wswm {

// Flat `key = value` configuration with `#` comments and no nesting.
// Every key carries a documented default; unknown keys are rejected.
class RunConfig {
public:
    // Parses text and validates keys against the documented set.
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);
    static RunConfig defaults() { return RunConfig(); }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value);

    std::string get_str(const std::string& key) const;
    double get_num(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    // The full documented key -> default table.
    static const std::map<std::string, std::string>& known_keys();

private:
    std::map<std::string, std::string> values_;
};

// Shared by RunConfig and the checkpoint config section.
std::map<std::string, std::string> parse_kv_text(const std::string& text);

}  // namespace wswm
