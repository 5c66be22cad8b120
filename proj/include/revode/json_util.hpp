#pragma once

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "revode/errors.hpp"

namespace revode {

// Rejects unknown keys so config typos fail loudly instead of silently
// falling back to defaults.
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError(context + ": unknown key '" + key + "'");
    }
}

template <typename T>
T json_get(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template <typename T>
T json_require(const nlohmann::json& j, const char* key, const std::string& context) {
    if (!j.contains(key)) throw ConfigError(context + ": missing required key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(context + ": bad value for '" + key + "': " + e.what());
    }
}

}  // namespace revode
