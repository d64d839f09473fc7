#pragma once

// The four batch commands. Each takes the parsed JSON config and returns the
// report; file outputs go under the run's output directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cosmicbell/chstats.hpp"
#include "cosmicbell/cosmicrng.hpp"
#include "cosmicbell/pbr.hpp"
#include "cosmicbell/pipeline/io.hpp"
#include "cosmicbell/pipeline/report.hpp"
#include "cosmicbell/polytopes.hpp"
#include "cosmicbell/qsim.hpp"
#include "cosmicbell/spacetime.hpp"

namespace cosmicbell::pipeline {

struct RunContext {
    json config;
    fs::path base_dir = ".";  // relative paths in the config resolve here
    fs::path out_dir = ".";

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }
    std::uint64_t seed() const { return config.value("seed", std::uint64_t{0}); }
};

/// Loads a config file; `--seed` and `--out` overrides are folded in before
/// hashing so the provenance reflects the effective run.
inline RunContext load_context(const fs::path& config_path, std::optional<fs::path> out, std::optional<std::uint64_t> seed) {
    RunContext ctx;
    ctx.config = parse_json_file(config_path);
    if (!ctx.config.is_object()) throw ValidationError("config must be a JSON object");
    ctx.base_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
    if (seed) ctx.config["seed"] = *seed;
    if (out) {
        ctx.out_dir = *out;
    } else if (ctx.config.contains("out")) {
        ctx.out_dir = ctx.resolve(ctx.config.at("out").get<std::string>());
    }
    return ctx;
}

/// Every referenced fixture must match its recorded FNV-1a hash.
inline void verify_fixtures(const RunContext& ctx) {
    if (!ctx.config.contains("fixture_hashes")) return;
    for (const auto& [name, want] : ctx.config.at("fixture_hashes").items()) {
        const auto got = file_hash(ctx.resolve(name));
        if (got != want.get<std::string>())
            throw ValidationError("fixture '" + name + "' hash mismatch: expected " + want.get<std::string>() + ", got " + got);
    }
}

inline json envelope(const char* command, const RunContext& ctx, json results) {
    json r;
    r["command"] = command;
    r["provenance"] = provenance(ctx.config, ctx.seed());
    r["results"] = std::move(results);
    return r;
}

// ---------------------------------------------------------------------------
// analyze

struct PeriodConfig {
    int id = 0;
    pbr::PeriodBias bias;
    std::optional<int> blocks;
};

inline std::vector<PeriodConfig> parse_periods(const json& cfg) {
    std::vector<PeriodConfig> out;
    if (!cfg.contains("periods")) return out;
    for (const auto& p : cfg.at("periods")) {
        PeriodConfig pc;
        pc.id = p.at("id").get<int>();
        pc.bias.eps_a = p.value("eps_a", 0.0);
        pc.bias.eps_b = p.value("eps_b", 0.0);
        JointSettingDistribution::check_bias(pc.bias.eps_a);
        JointSettingDistribution::check_bias(pc.bias.eps_b);
        if (p.contains("blocks")) pc.blocks = p.at("blocks").get<int>();
        for (const auto& prev : out)
            if (prev.id == pc.id) throw ValidationError("period " + std::to_string(pc.id) + " is listed twice");
        out.push_back(pc);
    }
    return out;
}

inline const PeriodConfig& find_period(const std::vector<PeriodConfig>& periods, int id) {
    for (const auto& p : periods)
        if (p.id == id) return p;
    throw ValidationError("unknown period id " + std::to_string(id));
}

inline json ztests_json(const CountsTable& counts) {
    static constexpr const char* names[] = {"alice_x0", "alice_x1", "bob_y0", "bob_y1"};
    json out = json::array();
    const auto tests = chstats::nosignaling_ztests(counts);
    for (std::size_t i = 0; i < tests.size(); ++i)
        out.push_back({{"condition", names[i]}, {"z", num(tests[i].z)}, {"p_value", num(tests[i].p_value)},
                       {"degenerate", tests[i].degenerate}});
    return out;
}

inline json pbr_json(const pbr::AnalysisResult& res) {
    json blocks = json::array();
    for (const auto& b : res.per_block)
        blocks.push_back({{"period", b.period},
                          {"trials", b.end - b.begin},
                          {"trivial", b.trivial},
                          {"gain_estimate", num(b.gain_estimate)},
                          {"log_contribution", num(b.log_contribution)}});
    return {{"p_value_bound", num(res.p_value_bound)},
            {"log_product", num(res.log_product)},
            {"total_log_inverse_p", num(res.total_log_inverse_p)},
            {"blocks", blocks}};
}

inline json cmd_analyze(const RunContext& ctx) {
    const json& cfg = ctx.config;
    verify_fixtures(ctx);
    const bool has_counts = cfg.contains("counts"), has_trials = cfg.contains("trials");
    if (has_counts == has_trials) throw ValidationError("analyze needs exactly one of 'counts' or 'trials'");
    const auto hypothesis = pbr::parse_hypothesis(cfg.value("hypothesis", std::string("LHV")));
    const auto periods = parse_periods(cfg);

    std::vector<TrialRecord> trials;
    CountsTable counts;
    if (has_trials) {
        trials = ingest_trials(ctx.resolve(cfg.at("trials").get<std::string>()));
        if (trials.empty()) throw ValidationError("trial file has no rows");
        for (const auto& t : trials) find_period(periods, t.period);
        counts = count_trials(trials);
    } else {
        counts = ingest_counts(ctx.resolve(cfg.at("counts").get<std::string>()));
    }
    if (counts.total() == 0) throw ValidationError("no trials in the input");

    json results;
    results["trials"] = counts.total();
    results["J"] = num(chstats::ch_j(counts));
    results["J_ml_no_signaling"] = num(chstats::ch_j(polytopes::ml_no_signaling(counts)));
    results["no_signaling_ztests"] = ztests_json(counts);

    // Bias estimates from the ratio/SNR monitors, per period and side.
    json bias = json::array();
    if (cfg.contains("bias_monitors")) {
        for (const auto& m : cfg.at("bias_monitors")) {
            const int id = m.at("period").get<int>();
            find_period(periods, id);
            json entry{{"period", id}};
            for (const char* side : {"alice", "bob"}) {
                const auto& s = m.at(side);
                chstats::BiasMonitor bm;
                bm.r = s.at("r").get<double>();
                bm.snr = s.at("snr").get<double>();
                entry[side] = {{"r", num(bm.r)}, {"snr", num(bm.snr)}, {"eps", num(chstats::bias_estimate(bm))}};
            }
            bias.push_back(entry);
        }
    }
    results["bias_estimates"] = bias;

    json consistency = json::array();
    if (cfg.contains("consistency")) {
        for (const auto& c : cfg.at("consistency")) {
            const int id = c.at("period").get<int>();
            const auto& pc = find_period(periods, id);
            json entry{{"period", id}};
            for (const char* side : {"alice", "bob"}) {
                const auto n = c.at(side).get<std::array<std::uint64_t, 2>>();
                const double eps = std::string(side) == "alice" ? pc.bias.eps_a : pc.bias.eps_b;
                const auto h = chstats::hoeffding_consistency(n[0], n[1], eps);
                entry[side] = {{"n0", n[0]},
                               {"n1", n[1]},
                               {"eps", num(eps)},
                               {"lower_bound", num(h.lower_bound)},
                               {"log10_tail", num(h.log10_tail)}};
            }
            consistency.push_back(entry);
        }
    }
    results["consistency"] = consistency;

    json pbr_out;
    pbr_out["hypothesis"] = std::string(pbr::to_string(hypothesis));
    if (has_trials) {
        std::map<int, pbr::PeriodBias> biased, unbiased;
        std::map<int, int> blocks_per_period;
        for (const auto& p : periods) {
            biased[p.id] = p.bias;
            unbiased[p.id] = {};
            if (p.blocks) blocks_per_period[p.id] = *p.blocks;
        }
        const auto block_size = cfg.value("block_size", std::uint64_t{1'500'000});
        const auto plan = pbr::make_block_plan(trials, biased, block_size, blocks_per_period);
        auto plan0 = plan;
        plan0.biases = unbiased;
        pbr_out["with_bias"] = pbr_json(pbr::run_blocked(trials, plan, hypothesis));
        pbr_out["zero_bias"] = pbr_json(pbr::run_blocked(trials, plan0, hypothesis));
    } else {
        // Without trial order only a single block exists, and its PBR is trivial.
        pbr::AnalysisResult single;
        single.per_block.push_back({counts.period.value_or(0), 0, static_cast<std::size_t>(counts.total()), true, 0.0, 0.0});
        pbr_out["with_bias"] = pbr_json(single);
        pbr_out["zero_bias"] = pbr_json(single);
    }
    results["pbr"] = pbr_out;
    return envelope("analyze", ctx, results);
}

// ---------------------------------------------------------------------------
// simulate

inline qsim::QuantumModel quantum_from_json(const json& q) {
    qsim::QuantumModel m;
    m.r = q.value("r", 1.0);
    m.angles_a = q.at("angles_a").get<std::array<double, 2>>();
    m.angles_b = q.at("angles_b").get<std::array<double, 2>>();
    m.eta_a = q.value("eta_a", 1.0);
    m.eta_b = q.value("eta_b", 1.0);
    m.p_dark = q.value("p_dark", 0.0);
    m.validate();
    return m;
}

/// Source behavior: empirical frequencies of a counts file, a quantum model,
/// or 16 explicit values.
inline Behavior source_behavior(const RunContext& ctx, const json& src) {
    if (src.contains("counts")) return ingest_counts(ctx.resolve(src.at("counts").get<std::string>())).empirical();
    if (src.contains("quantum")) return qsim::model_behavior(quantum_from_json(src.at("quantum")));
    if (src.contains("behavior")) return Behavior::from_array(src.at("behavior").get<CellArray>(), 1e-9);
    throw ValidationError("simulate source needs 'counts', 'quantum' or 'behavior'");
}

inline json cmd_simulate(const RunContext& ctx) {
    const json& cfg = ctx.config;
    verify_fixtures(ctx);
    const Behavior p = source_behavior(ctx, cfg.at("source"));
    const auto chunk = cfg.value("chunk", qsim::kDefaultChunk);
    const bool write = cfg.value("write_trials", true);

    struct Spec {
        int id;
        std::uint64_t n;
        double qa0, qb0;
    };
    std::vector<Spec> specs;
    const json settings = cfg.value("settings", json::object());
    const double qa0 = settings.value("qa0", 0.5), qb0 = settings.value("qb0", 0.5);
    if (cfg.contains("periods")) {
        for (const auto& pj : cfg.at("periods"))
            specs.push_back({pj.at("id").get<int>(), pj.at("trials").get<std::uint64_t>(), pj.value("qa0", qa0), pj.value("qb0", qb0)});
    } else {
        specs.push_back({1, cfg.at("trials").get<std::uint64_t>(), qa0, qb0});
    }
    if (specs.empty()) throw ValidationError("simulate: no periods given");

    std::vector<TrialRecord> trials;
    CountsTable total;
    json per_period = json::array();
    std::uint64_t next_index = 0;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto& s = specs[k];
        if (s.n == 0) throw ValidationError("simulate: period " + std::to_string(s.id) + " requests zero trials");
        const auto q = JointSettingDistribution::from_marginals(s.qa0, s.qb0);
        const std::uint64_t seed = qsim::splitmix64(ctx.seed() + k);
        CountsTable c;
        if (write) {
            const std::size_t before = trials.size();
            qsim::simulate_trials(trials, p, q, s.n, seed, s.id, next_index, chunk);
            c = count_trials(std::span<const TrialRecord>(trials).subspan(before));
        } else {
            c = qsim::simulate_counts(p, q, s.n, seed, chunk);
        }
        next_index += s.n;
        total += c;
        per_period.push_back({{"period", s.id}, {"trials", s.n}, {"qa0", num(s.qa0)}, {"qb0", num(s.qb0)}});
    }

    if (write) write_trials(ctx.out_dir / "trials.csv", trials);
    write_file(ctx.out_dir / "counts.csv", counts_csv(total));

    json results;
    results["trials"] = total.total();
    results["periods"] = per_period;
    results["source_J"] = num(chstats::ch_j(p));
    results["sample_J"] = num(chstats::ch_j(total));
    json files = json::array();
    if (write) files.push_back("trials.csv");
    files.push_back("counts.csv");
    results["files"] = files;
    return envelope("simulate", ctx, results);
}

// ---------------------------------------------------------------------------
// spacetime

inline json altaz_json(const spacetime::Horizontal& h) {
    return {{"azimuth_deg", num(h.azimuth_deg)}, {"altitude_deg", num(h.altitude_deg)}};
}

inline json cmd_spacetime(const RunContext& ctx) {
    const json& cfg = ctx.config;
    verify_fixtures(ctx);
    const auto stars = ingest_stars(ctx.resolve(cfg.at("stars").get<std::string>()));
    const auto sites = ingest_sites(ctx.resolve(cfg.at("sites").get<std::string>()));
    const auto budget = ingest_budget(ctx.resolve(cfg.at("budget").get<std::string>()));
    auto site = [&](const char* key, const char* dflt) {
        const auto name = cfg.value(key, std::string(dflt));
        const auto it = sites.find(name);
        if (it == sites.end()) throw ValidationError("unknown site '" + name + "'");
        return it->second;
    };
    auto star = [&](int hip) {
        const auto it = stars.find(hip);
        if (it == stars.end()) throw ValidationError("unknown star HIP " + std::to_string(hip));
        return it->second;
    };
    const auto site_a = site("site_a", "A"), site_b = site("site_b", "B");
    spacetime::ThetaBounds bounds;
    if (cfg.contains("theta_bounds")) {
        const auto tb = cfg.at("theta_bounds").get<std::array<double, 2>>();
        bounds = {tb[0], tb[1]};
    }
    const bool scan = cfg.value("scan", true);

    const auto bl = spacetime::baseline(site_a, site_b);
    json results;
    results["baseline"] = {{"geodetic_length_lns", num(bl.length_lns)},
                           {"azimuth_deg", num(bl.azimuth_deg)},
                           {"budget_length_lns", num(budget.baseline)}};
    json runs = json::array();
    for (const auto& rj : cfg.at("runs")) {
        const auto sa = star(rj.at("star_a").get<int>()), sb = star(rj.at("star_b").get<int>());
        json run;
        run["name"] = rj.value("name", std::string());
        run["star_a"] = sa.hip_id;
        run["star_b"] = sb.hip_id;
        std::vector<spacetime::UtcTime> times;
        for (const char* key : {"start", "end"})
            if (rj.contains(key)) times.push_back(spacetime::parse_utc(rj.at(key).get<std::string>()));
        if (times.empty()) throw ValidationError("run '" + run["name"].get<std::string>() + "' needs a start time");
        const auto first = spacetime::evaluate(sa, sb, site_a, site_b, budget, times.front());
        run["alpha_deg"] = num(first.alpha);
        run["tau_ab_years"] = num(first.tau_ab);
        run["sigma_tau_years"] = num(first.sigma_tau);
        json at = json::array();
        for (const auto t : times) {
            const auto r = spacetime::evaluate(sa, sb, site_a, site_b, budget, t);
            at.push_back({{"utc", spacetime::format_utc(t)},
                          {"theta_a_deg", num(r.theta_a)},
                          {"theta_b_deg", num(r.theta_b)},
                          {"gamma_a_ns", num(r.gamma_a)},
                          {"gamma_b_ns", num(r.gamma_b)},
                          {"star_a_at_site_a", altaz_json(spacetime::radec_to_altaz(sa, site_a, t))},
                          {"star_b_at_site_b", altaz_json(spacetime::radec_to_altaz(sb, site_b, t))}});
        }
        run["epochs"] = at;
        if (scan) {
            json windows = json::array();
            for (const auto& w : spacetime::validity_window(sa, sb, site_a, site_b, budget, times.front(), bounds))
                windows.push_back({{"begin", spacetime::format_utc(w.begin)}, {"end", spacetime::format_utc(w.end)}});
            run["validity_windows"] = windows;
        }
        runs.push_back(run);
    }
    results["runs"] = runs;
    return envelope("spacetime", ctx, results);
}

// ---------------------------------------------------------------------------
// rng

struct StreamInput {
    cosmicrng::PhotonEventStream events;
    double duration_s = 0.0;
};

inline StreamInput stream_from_json(const RunContext& ctx, const json& j, std::uint64_t seed,
                                    const cosmicrng::ExtractorConfig& ex) {
    StreamInput in;
    if (j.contains("timetags")) {
        in.events = ingest_timetags(ctx.resolve(j.at("timetags").get<std::string>()));
        if (j.contains("duration_s")) {
            in.duration_s = j.at("duration_s").get<double>();
        } else if (!in.events.empty()) {
            in.duration_s = static_cast<double>(in.events.back().t_ps - in.events.front().t_ps + 1) * 1e-12;
        }
        return in;
    }
    if (!j.contains("simulate")) throw ValidationError("stream needs 'timetags' or 'simulate'");
    const auto& s = j.at("simulate");
    const double rs = s.value("rate_signal_hz", 0.0), rb = s.value("rate_background_hz", 0.0);
    in.duration_s = s.at("duration_s").get<double>();
    const double late = s.value("late_factor", 1.0);
    if (late == 1.0) {
        in.events = cosmicrng::simulate_arrivals(rs, rb, in.duration_s, seed);
    } else {
        const auto boost = cosmicrng::late_half_boost(late, ex);
        const auto sig = cosmicrng::simulate_thinned(rs, in.duration_s, qsim::splitmix64(seed ^ 0x5167ULL),
                                                     cosmicrng::Channel::Signal, boost);
        const auto bkg = cosmicrng::simulate_thinned(rb, in.duration_s, qsim::splitmix64(seed ^ 0xb4c6ULL),
                                                     cosmicrng::Channel::Background, {});
        in.events = cosmicrng::merge_streams(sig, bkg);
    }
    return in;
}

inline json cmd_rng(const RunContext& ctx) {
    const json& cfg = ctx.config;
    verify_fixtures(ctx);
    cosmicrng::ExtractorConfig ex;
    if (cfg.contains("extractor")) {
        const auto& e = cfg.at("extractor");
        ex = cosmicrng::ExtractorConfig::from_units(e.value("clock_period_ns", 500.0), e.value("window_ns", 133.2),
                                                    e.value("deadtime_us", 5.0));
    }
    const auto on = stream_from_json(ctx, cfg, ctx.seed(), ex);
    const auto bits = cosmicrng::extract_bits(on.events, ex);
    write_bits(ctx.out_dir / "bits.csv", bits);
    if (cfg.value("write_timetags", false)) write_timetags(ctx.out_dir / "timetags.csv", on.events);

    std::int64_t min_gap = -1;
    for (std::size_t i = 1; i < bits.size(); ++i) {
        const auto g = bits[i].t_ps - bits[i - 1].t_ps;
        if (min_gap < 0 || g < min_gap) min_gap = g;
    }
    const auto c = cosmicrng::count_bits(bits);
    json results;
    results["events"] = on.events.size();
    results["duration_s"] = num(on.duration_s);
    results["bits"] = bits.size();
    results["zeros"] = c.zeros;
    results["ones"] = c.ones;
    results["bit_rate_hz"] = on.duration_s > 0.0 ? num(static_cast<double>(bits.size()) / on.duration_s) : json(nullptr);
    results["min_gap_ps"] = min_gap < 0 ? json(nullptr) : json(min_gap);
    if (cfg.contains("dark")) {
        const auto dark = stream_from_json(ctx, cfg.at("dark"), qsim::splitmix64(ctx.seed() ^ 0xda7cULL), ex);
        const auto dark_bits = cosmicrng::extract_bits(dark.events, ex);
        const auto m = cosmicrng::ratio_snr(bits, on.duration_s, dark_bits, dark.duration_s);
        results["monitor"] = {{"r", num(m.r)}, {"snr", num(m.snr)}, {"degenerate", m.degenerate}};
        if (!m.degenerate) results["monitor"]["eps"] = num(chstats::bias_estimate(m));
    }
    results["files"] = json::array({"bits.csv"});
    if (cfg.value("write_timetags", false)) results["files"].push_back("timetags.csv");
    return envelope("rng", ctx, results);
}

}  // namespace cosmicbell::pipeline
