#include "runconfig.hpp"

#include <fstream>
#include <sstream>

namespace wswm {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

const std::map<std::string, std::string>& RunConfig::known_keys() {
    static const std::map<std::string, std::string> keys = {
        // training
        {"phase", "joint12"},
        {"learning_rate", "0.001"},
        {"batch_size", "8"},
        {"steps", "1000"},
        {"lambda_ssim", "0.1"},
        {"seed", "0"},
        {"augment_reverse", "true"},
        {"augment_static", "true"},
        {"static_prob", "0.25"},
        {"reverse_prob", "0.5"},
        {"log_every", "25"},
        // model
        {"action_dim", "4"},
        {"inr_depth", "6"},
        {"inr_width", "12"},
        {"inr_bands", "6"},
        {"inr_raw_coords", "true"},
        {"enc_channels", "64,128,256,512"},
        {"enc_kernel", "3"},
        {"enc_stride", "2"},
        {"enc_proj_scale", "1.0"},
        {"idm_width", "0"},
        {"idm_depth", "4"},
        {"idm_out_scale", "1.0"},
        {"fdm_mode", "additive"},
        {"fdm_width", "0"},
        {"fdm_depth", "4"},
        {"fdm_out_scale", "1.0"},
        {"gcm_kind", "gru"},
        {"gcm_hidden", "256"},
        {"gcm_blocks", "4"},
        {"gcm_heads", "8"},
        {"gcm_mlp_ratio", "4"},
        {"gcm_max_t", "32"},
        {"gcm_decode_hidden", "256"},
        {"use_codebook", "false"},
        {"codebook_size", "200"},
        {"commitment_weight", "0.25"},
        // rollout
        {"t_inf", "20"},
        {"rho", "0.5"},
        {"scale", "1.0"},
        {"apply_mask", "true"},
        // data generation
        {"data_kind", "sprites"},
        {"data_n", "100"},
        {"data_t", "20"},
        {"data_h", "64"},
        {"data_w", "64"},
        {"n_sprites", "2"},
        {"glyph_kinds", "6"},
        {"speed_min", "0.5"},
        {"speed_max", "2.0"},
        {"radius_min", "0.06"},
        {"radius_max", "0.10"},
        {"radius_min_ood", "0.12"},
        {"radius_max_ood", "0.16"},
        {"speed_min_ood", "0.04"},
        {"speed_max_ood", "0.06"},
        {"ood", "false"},
        // evaluation
        {"hist_bins", "64"},
        {"color_tau", "0.8"},
    };
    return keys;
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    for (const auto& [key, value] : parse_kv_text(text)) cfg.set(key, value);
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (known_keys().count(key) == 0) throw ConfigError("unknown config key: " + key);
    values_[key] = value;
}

std::string RunConfig::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    auto def = known_keys().find(key);
    if (def == known_keys().end()) throw ConfigError("unknown config key: " + key);
    return def->second;
}

double RunConfig::get_num(const std::string& key) const {
    const std::string s = get_str(key);
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a number: " + s);
    }
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    const std::string s = get_str(key);
    try {
        std::size_t used = 0;
        std::int64_t v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not an integer: " + s);
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string s = get_str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key " + key + ": not a boolean: " + s);
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    const std::string s = get_str(key);
    std::vector<int> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not an integer list: " + s);
        }
    }
    if (out.empty()) throw ConfigError("config key " + key + ": empty list");
    return out;
}

}  // namespace wswm
