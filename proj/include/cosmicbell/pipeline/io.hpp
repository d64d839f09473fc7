#pragma once

// CSV and JSON ingestion for counts, trial streams, time tags, bits, star
// catalogs, sites and timing budgets. Row errors carry 1-based line numbers.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cosmicbell/core.hpp"
#include "cosmicbell/cosmicrng.hpp"
#include "cosmicbell/spacetime.hpp"

namespace cosmicbell::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, std::string_view body) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + p.string() + "'");
    out << body;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string file_hash(const fs::path& p) { return hex64(fnv1a(read_file(p))); }

namespace csv {

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Reads a headed CSV; the header must equal `expected` exactly. Blank lines
/// and lines starting with '#' are skipped.
inline std::vector<Row> read(const fs::path& path, const std::vector<std::string>& expected) {
    const std::string body = read_file(path);
    std::istringstream in(body);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::vector<Row> rows;
    const std::string where = path.filename().string();
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto fields = split(t);
        if (!have_header) {
            if (fields != expected) {
                std::string want;
                for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
                throw ValidationError(where + ":" + std::to_string(lineno) + ": expected header '" + want + "'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != expected.size())
            throw ValidationError(where + ":" + std::to_string(lineno) + ": expected " + std::to_string(expected.size()) +
                                  " fields, got " + std::to_string(fields.size()));
        rows.push_back({lineno, std::move(fields)});
    }
    if (!have_header) throw ValidationError(where + ": empty file, missing header");
    return rows;
}

template <class T>
T parse_int(const Row& row, std::size_t i, std::string_view what) {
    const auto& s = row.fields[i];
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ValidationError("line " + std::to_string(row.line) + ": bad " + std::string(what) + " '" + s + "'");
    return v;
}

inline double parse_double(const Row& row, std::size_t i, std::string_view what) {
    const auto& s = row.fields[i];
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
        throw ValidationError("line " + std::to_string(row.line) + ": bad " + std::string(what) + " '" + s + "'");
    return v;
}

inline std::uint8_t parse_bit(const Row& row, std::size_t i, std::string_view what) {
    const auto v = parse_int<int>(row, i, what);
    if (v != 0 && v != 1)
        throw ValidationError("line " + std::to_string(row.line) + ": " + std::string(what) + " must be 0 or 1");
    return static_cast<std::uint8_t>(v);
}

}  // namespace csv

/// Counts CSV `x,y,a,b,count`; repeated cells accumulate.
inline CountsTable ingest_counts(const fs::path& path) {
    CountsTable t;
    for (const auto& row : csv::read(path, {"x", "y", "a", "b", "count"})) {
        const int x = csv::parse_bit(row, 0, "x"), y = csv::parse_bit(row, 1, "y");
        const int a = csv::parse_bit(row, 2, "a"), b = csv::parse_bit(row, 3, "b");
        t(a, b, x, y) += csv::parse_int<std::uint64_t>(row, 4, "count");
    }
    return t;
}

inline std::string counts_csv(const CountsTable& t) {
    std::string out = "x,y,a,b,count\n";
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    out += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(a) + "," +
                           std::to_string(b) + "," + std::to_string(t(a, b, x, y)) + "\n";
    return out;
}

/// Trial CSV `index,period,x,y,a,b` with strictly increasing indices.
inline std::vector<TrialRecord> ingest_trials(const fs::path& path) {
    std::vector<TrialRecord> out;
    for (const auto& row : csv::read(path, {"index", "period", "x", "y", "a", "b"})) {
        TrialRecord r;
        r.index = csv::parse_int<std::uint64_t>(row, 0, "index");
        r.period = csv::parse_int<int>(row, 1, "period");
        r.x = csv::parse_bit(row, 2, "x");
        r.y = csv::parse_bit(row, 3, "y");
        r.a = csv::parse_bit(row, 4, "a");
        r.b = csv::parse_bit(row, 5, "b");
        if (!out.empty() && r.index <= out.back().index)
            throw ValidationError("line " + std::to_string(row.line) + ": trial index " + std::to_string(r.index) +
                                  " is not greater than the previous index");
        out.push_back(r);
    }
    return out;
}

inline void write_trials(const fs::path& path, const std::vector<TrialRecord>& trials) {
    std::string out = "index,period,x,y,a,b\n";
    out.reserve(out.size() + trials.size() * 24);
    for (const auto& r : trials) {
        out += std::to_string(r.index);
        out += ',';
        out += std::to_string(r.period);
        for (int v : {r.x, r.y, r.a, r.b}) {
            out += ',';
            out += static_cast<char>('0' + v);
        }
        out += '\n';
    }
    write_file(path, out);
}

/// Time-tag CSV `timestamp_ps,channel`; timestamps must not decrease.
inline cosmicrng::PhotonEventStream ingest_timetags(const fs::path& path) {
    cosmicrng::PhotonEventStream out;
    for (const auto& row : csv::read(path, {"timestamp_ps", "channel"})) {
        cosmicrng::PhotonEvent ev;
        ev.t_ps = csv::parse_int<std::int64_t>(row, 0, "timestamp_ps");
        try {
            ev.channel = cosmicrng::parse_channel(row.fields[1]);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(row.line) + ": " + e.what());
        }
        if (!out.empty() && ev.t_ps < out.back().t_ps)
            throw ValidationError("line " + std::to_string(row.line) + ": timestamps decrease");
        out.push_back(ev);
    }
    return out;
}

inline void write_timetags(const fs::path& path, const cosmicrng::PhotonEventStream& events) {
    std::string out = "timestamp_ps,channel\n";
    for (const auto& e : events) {
        out += std::to_string(e.t_ps);
        out += ',';
        out += cosmicrng::to_string(e.channel);
        out += '\n';
    }
    write_file(path, out);
}

inline void write_bits(const fs::path& path, const std::vector<cosmicrng::BitRecord>& bits) {
    std::string out = "timestamp_ps,clock_index,bit\n";
    for (const auto& b : bits) {
        out += std::to_string(b.t_ps);
        out += ',';
        out += std::to_string(b.clock_index);
        out += ',';
        out += static_cast<char>('0' + b.bit);
        out += '\n';
    }
    write_file(path, out);
}

inline std::vector<cosmicrng::BitRecord> ingest_bits(const fs::path& path) {
    std::vector<cosmicrng::BitRecord> out;
    for (const auto& row : csv::read(path, {"timestamp_ps", "clock_index", "bit"}))
        out.push_back({csv::parse_int<std::int64_t>(row, 0, "timestamp_ps"), csv::parse_bit(row, 2, "bit"),
                       csv::parse_int<std::int64_t>(row, 1, "clock_index")});
    return out;
}

inline std::map<int, spacetime::StarEntry> ingest_stars(const fs::path& path) {
    std::map<int, spacetime::StarEntry> out;
    for (const auto& row : csv::read(path, {"hip_id", "ra_deg", "dec_deg", "dist_ly", "sigma_ly"})) {
        spacetime::StarEntry s{csv::parse_int<int>(row, 0, "hip_id"), csv::parse_double(row, 1, "ra_deg"),
                               csv::parse_double(row, 2, "dec_deg"), csv::parse_double(row, 3, "dist_ly"),
                               csv::parse_double(row, 4, "sigma_ly")};
        try {
            s.validate();
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(row.line) + ": " + e.what());
        }
        if (!out.emplace(s.hip_id, s).second)
            throw ValidationError("line " + std::to_string(row.line) + ": duplicate star HIP " + std::to_string(s.hip_id));
    }
    return out;
}

inline std::map<std::string, spacetime::Site> ingest_sites(const fs::path& path) {
    std::map<std::string, spacetime::Site> out;
    for (const auto& row : csv::read(path, {"name", "lat_deg", "lon_deg", "elev_m"})) {
        spacetime::Site s{row.fields[0], csv::parse_double(row, 1, "lat_deg"), csv::parse_double(row, 2, "lon_deg"),
                          csv::parse_double(row, 3, "elev_m")};
        try {
            s.validate();
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(row.line) + ": " + e.what());
        }
        if (!out.emplace(s.name, s).second) throw ValidationError("line " + std::to_string(row.line) + ": duplicate site " + s.name);
    }
    return out;
}

/// Budget JSON: each key is either a number or {"value": v, "sigma": s}.
inline spacetime::TimingBudget budget_from_json(const json& j) {
    spacetime::TimingBudget b;
    auto take = [&](const char* key, double& v, double& sigma) {
        if (!j.contains(key)) throw ValidationError(std::string("timing budget is missing '") + key + "'");
        const auto& e = j.at(key);
        if (e.is_number()) {
            v = e.get<double>();
        } else if (e.is_object() && e.contains("value")) {
            v = e.at("value").get<double>();
            sigma = e.value("sigma", 0.0);
        } else {
            throw ValidationError(std::string("timing budget entry '") + key + "' must be a number or {value, sigma}");
        }
    };
    take("T_P", b.t_p, b.sigma_t_p);
    take("T_R_A", b.t_r_a, b.sigma_t_r_a);
    take("T_R_B", b.t_r_b, b.sigma_t_r_b);
    take("T_PC_A", b.t_pc_a, b.sigma_t_pc_a);
    take("T_PC_B", b.t_pc_b, b.sigma_t_pc_b);
    take("T_M_A", b.t_m_a, b.sigma_t_m_a);
    take("T_M_B", b.t_m_b, b.sigma_t_m_b);
    take("path_A", b.path_a, b.sigma_path_a);
    take("path_B", b.path_b, b.sigma_path_b);
    take("baseline", b.baseline, b.sigma_baseline);
    b.validate();
    return b;
}

inline json parse_json_file(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ValidationError(p.filename().string() + ": " + e.what());
    }
}

inline spacetime::TimingBudget ingest_budget(const fs::path& path) { return budget_from_json(parse_json_file(path)); }

}  // namespace cosmicbell::pipeline
