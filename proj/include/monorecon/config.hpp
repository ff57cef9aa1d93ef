#pragma once

// key=value configuration files (UTF-8 text, '#' comments). Used for gantry
// setups, filter parameters and simulation manifests.

#include "monorecon/camera.hpp"
#include "monorecon/types.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace monorecon {

class KeyValueFile {
public:
    static KeyValueFile parse_text(const std::string& text) {
        KeyValueFile kv;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                std::ostringstream os;
                os << "config line " << lineno << ": expected key=value, got '" << trimmed << "'";
                throw InvalidConfig(os.str());
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) throw InvalidConfig("config: empty key");
            kv.values_[key] = value;
        }
        return kv;
    }

    static KeyValueFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_text(buf.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::string& get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw InvalidConfig("config: missing key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key) const {
        const std::string& s = get_string(key);
        try {
            size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw InvalidConfig("config: key '" + key + "' is not a number: '" + s + "'");
        }
    }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const {
        const std::string& s = get_string(key);
        try {
            size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw InvalidConfig("config: key '" + key + "' is not an integer: '" + s + "'");
        }
    }

    long get_int(const std::string& key, long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    /// Every present key must be in `allowed`; missing keys are fine.
    void reject_unknown_keys(const std::set<std::string>& allowed) const {
        for (const auto& [key, value] : values_) {
            (void)value;
            if (!allowed.count(key)) throw InvalidConfig("config: unknown key '" + key + "'");
        }
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return {};
        const auto end = s.find_last_not_of(" \t\r\n");
        return s.substr(begin, end - begin + 1);
    }

    std::map<std::string, std::string> values_;
};

/// One C-arm view: intrinsics plus gantry pose.
struct GantryConfig {
    Intrinsics intrinsics;
    GantryPose pose;

    Extrinsics extrinsics() const { return extrinsics_from_gantry(pose); }
    ProjectionMatrix full() const { return full_projection(intrinsics, extrinsics()); }
};

inline const std::set<std::string>& gantry_config_keys() {
    static const std::set<std::string> keys = {
        "focal_length_mm", "image_px",      "intensifier_mm",
        "primary_deg",     "secondary_deg", "source_to_object_mm",
    };
    return keys;
}

inline GantryConfig gantry_from_keyvalues(const KeyValueFile& kv) {
    kv.reject_unknown_keys(gantry_config_keys());
    GantryConfig g;
    const double f = kv.get_double("focal_length_mm");
    const long px = kv.get_int("image_px");
    const double intensifier = kv.get_double("intensifier_mm");
    if (px <= 0) throw InvalidConfig("gantry: image_px must be positive");
    g.intrinsics = Intrinsics::square(f, static_cast<int>(px), intensifier);
    g.pose.primary_deg = kv.get_double("primary_deg");
    g.pose.secondary_deg = kv.get_double("secondary_deg");
    g.pose.source_to_object_mm = kv.get_double("source_to_object_mm");
    g.pose.validate(f);
    return g;
}

inline GantryConfig load_gantry_config(const std::string& path) {
    return gantry_from_keyvalues(KeyValueFile::load(path));
}

inline std::string gantry_to_text(const GantryConfig& g) {
    std::ostringstream os;
    os << "focal_length_mm=" << g.intrinsics.f << "\n"
       << "image_px=" << g.intrinsics.image_width << "\n"
       << "intensifier_mm=" << g.intrinsics.intensifier_width_mm << "\n"
       << "primary_deg=" << g.pose.primary_deg << "\n"
       << "secondary_deg=" << g.pose.secondary_deg << "\n"
       << "source_to_object_mm=" << g.pose.source_to_object_mm << "\n";
    return os.str();
}

}  // namespace monorecon
