#pragma once

// JSON report assembly: fixed key order, 12-significant-digit numbers and a
// provenance block so identical inputs give byte-identical output.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "cosmicbell/pipeline/io.hpp"

namespace cosmicbell::pipeline {

inline constexpr const char* kVersion = "0.1.0";

/// Rounds to 12 significant digits; non-finite values become strings so the
/// output stays valid JSON.
inline json num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::stod(buf);
}

inline std::string config_hash(const json& config) { return hex64(fnv1a(config.dump())); }

inline json provenance(const json& config, std::uint64_t seed) {
    json p;
    p["config_hash"] = config_hash(config);
    p["seed"] = seed;
    p["version"] = kVersion;
    return p;
}

inline std::string render(const json& report) { return report.dump(2) + "\n"; }

}  // namespace cosmicbell::pipeline
