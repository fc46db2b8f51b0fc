#include "iffsm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "iffsm/baselines.hpp"

namespace iffsm {

namespace {

enum class Kind { Int, Dbl, Bool, Str, U64 };

struct FieldDef {
    const char* section;
    const char* key;
    Kind kind;
    void* (*get)(ExperimentConfig&);
};

#define IFFSM_FIELD(sec, name, kindv, member)                                       \
    FieldDef {                                                                      \
        sec, name, Kind::kindv, [](ExperimentConfig& c) -> void* { return &(c.member); } \
    }

const FieldDef kFields[] = {
    IFFSM_FIELD("run", "name", Str, name),
    IFFSM_FIELD("run", "point", Str, point),
    IFFSM_FIELD("run", "sweep_key", Str, sweep_key),
    IFFSM_FIELD("run", "n_seeds", Int, n_seeds),
    IFFSM_FIELD("run", "base_seed", U64, base_seed),
    IFFSM_FIELD("run", "synth_channel", Bool, synth_channel),
    IFFSM_FIELD("scenario", "t", Int, scenario.T),
    IFFSM_FIELD("scenario", "d", Int, scenario.D),
    IFFSM_FIELD("scenario", "l", Int, scenario.L),
    IFFSM_FIELD("scenario", "n_t", Int, scenario.N_t),
    IFFSM_FIELD("scenario", "constellation", Str, scenario.constellation),
    IFFSM_FIELD("scenario", "sigma_y2", Dbl, scenario.sigma_y2),
    IFFSM_FIELD("scenario", "burst_len", Int, scenario.burst_len),
    IFFSM_FIELD("scenario", "channel_file", Str, scenario.channel_file),
    IFFSM_FIELD("hyper", "alpha", Dbl, hyper.alpha),
    IFFSM_FIELD("hyper", "beta0", Dbl, hyper.beta0),
    IFFSM_FIELD("hyper", "beta1", Dbl, hyper.beta1),
    IFFSM_FIELD("hyper", "sigma_h2", Dbl, hyper.sigma_h2),
    IFFSM_FIELD("hyper", "lambda", Dbl, hyper.lambda),
    IFFSM_FIELD("hyper", "kappa", Dbl, hyper.kappa),
    IFFSM_FIELD("hyper", "a_prior0", Dbl, hyper.a_prior0),
    IFFSM_FIELD("hyper", "a_prior1", Dbl, hyper.a_prior1),
    IFFSM_FIELD("inference", "l", Int, inference.L),
    IFFSM_FIELD("inference", "particles", Int, inference.particles),
    IFFSM_FIELD("inference", "particles_min", Int, inference.particles_min),
    IFFSM_FIELD("inference", "particles_max", Int, inference.particles_max),
    IFFSM_FIELD("inference", "temper_iters", Int, inference.temper_iters),
    IFFSM_FIELD("inference", "exploit_iters", Int, inference.exploit_iters),
    IFFSM_FIELD("inference", "temper_mode", Str, inference.temper_mode),
    IFFSM_FIELD("inference", "sigma_start2", Dbl, inference.sigma_start2),
    IFFSM_FIELD("inference", "temper_decay", Dbl, inference.temper_decay),
    IFFSM_FIELD("inference", "slice", Str, inference.slice),
    IFFSM_FIELD("inference", "systematic", Bool, inference.systematic),
    IFFSM_FIELD("inference", "block_size", Int, inference.block_size),
    IFFSM_FIELD("inference", "blockwise_after", Int, inference.blockwise_after),
    IFFSM_FIELD("inference", "map_window", Int, inference.map_window),
    IFFSM_FIELD("inference", "snapshot_every", Int, inference.snapshot_every),
    IFFSM_FIELD("inference", "max_chains", Int, inference.max_chains),
    IFFSM_FIELD("baselines", "genie_pgas", Bool, baselines.genie_pgas),
    IFFSM_FIELD("baselines", "genie_ffbs", Bool, baselines.genie_ffbs),
    IFFSM_FIELD("baselines", "genie_bcjr", Bool, baselines.genie_bcjr),
    IFFSM_FIELD("baselines", "genie_a", Dbl, baselines.genie_a),
    IFFSM_FIELD("baselines", "genie_b", Dbl, baselines.genie_b),
    IFFSM_FIELD("baselines", "genie_iters", Int, baselines.genie_iters),
    IFFSM_FIELD("baselines", "genie_keep", Int, baselines.genie_keep),
    IFFSM_FIELD("baselines", "state_cap", Dbl, baselines.state_cap),
};

#undef IFFSM_FIELD

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_field(const FieldDef& f, const ExperimentConfig& cfg) {
    void* p = f.get(const_cast<ExperimentConfig&>(cfg));
    switch (f.kind) {
        case Kind::Int: return std::to_string(*static_cast<int*>(p));
        case Kind::Dbl: return g17(*static_cast<double*>(p));
        case Kind::Bool: return *static_cast<bool*>(p) ? "true" : "false";
        case Kind::Str: return *static_cast<std::string*>(p);
        case Kind::U64: return std::to_string(*static_cast<std::uint64_t*>(p));
    }
    return {};
}

void set_field(const FieldDef& f, ExperimentConfig& cfg, const std::string& value) {
    void* p = f.get(cfg);
    std::size_t used = 0;
    switch (f.kind) {
        case Kind::Int:
            *static_cast<int*>(p) = std::stoi(value, &used);
            break;
        case Kind::Dbl:
            *static_cast<double*>(p) = std::stod(value, &used);
            break;
        case Kind::Bool: {
            if (value == "true" || value == "1")
                *static_cast<bool*>(p) = true;
            else if (value == "false" || value == "0")
                *static_cast<bool*>(p) = false;
            else
                throw std::invalid_argument("expected true/false");
            used = value.size();
            break;
        }
        case Kind::Str:
            *static_cast<std::string*>(p) = value;
            used = value.size();
            break;
        case Kind::U64:
            *static_cast<std::uint64_t*>(p) = std::stoull(value, &used);
            break;
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters in value");
}

const FieldDef* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : kFields)
        if (section == f.section && key == f.key) return &f;
    return nullptr;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

Constellation make_constellation(const std::string& name) {
    if (name.rfind("file:", 0) == 0) return Constellation::from_file(name.substr(5));
    return Constellation::named(name);
}

SliceMode parse_slice_mode(const std::string& name) {
    if (name == "power") return SliceMode::power;
    if (name == "uniform") return SliceMode::uniform;
    if (name == "beta") return SliceMode::beta;
    throw std::invalid_argument("inference: slice must be power, uniform or beta");
}

} // namespace

void InferenceConfig::validate() const {
    if (L < 1) throw std::invalid_argument("inference: l must be >= 1");
    if (particles < 2) throw std::invalid_argument("inference: particles must be >= 2");
    if (temper_iters < 0 || exploit_iters < 0 || total_iters() < 1)
        throw std::invalid_argument("inference: need at least one iteration");
    if (temper_mode != "off" && temper_mode != "geometric" && temper_mode != "linear_db")
        throw std::invalid_argument("inference: temper_mode must be off, geometric or linear_db");
    parse_slice_mode(slice); // throws on unknown values
    if (!(temper_decay > 0.0 && temper_decay < 1.0))
        throw std::invalid_argument("inference: temper_decay must lie in (0, 1)");
    if (map_window < 1) throw std::invalid_argument("inference: map_window must be >= 1");
    if (block_size < 0 || max_chains < 0 || snapshot_every < 0)
        throw std::invalid_argument("inference: negative size");
    if ((particles_min == 0) != (particles_max == 0))
        throw std::invalid_argument("inference: set both particle bounds or neither");
    if (particles_min > 0 && (particles_min < 2 || particles_min > particles_max))
        throw std::invalid_argument("inference: need 2 <= particles_min <= particles_max");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        const FieldDef* f = find_field(section, key);
        if (!f)
            throw std::runtime_error("config line " + std::to_string(lineno) + ": unknown key '" +
                                     section + "." + key + "'");
        try {
            set_field(*f, cfg, value);
        } catch (const std::exception& e) {
            throw std::runtime_error("config line " + std::to_string(lineno) + ": bad value for '" +
                                     section + "." + key + "': " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& f : kFields) {
        if (section != f.section) {
            if (!out.empty()) out += "\n";
            section = f.section;
            out += "[" + section + "]\n";
        }
        out += std::string(f.key) + " = " + format_field(f, cfg) + "\n";
    }
    return out;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("override must be section.key=value: " + assignment);
    std::string key = trim(assignment.substr(0, eq));
    std::string value = trim(assignment.substr(eq + 1));
    std::size_t dot = key.find('.');
    if (dot == std::string::npos)
        throw std::invalid_argument("override must be section.key=value: " + assignment);
    const FieldDef* f = find_field(key.substr(0, dot), key.substr(dot + 1));
    if (!f) throw std::invalid_argument("unknown config key: " + key);
    try {
        set_field(*f, cfg, value);
    } catch (const std::exception& e) {
        throw std::invalid_argument("bad value for " + key + ": " + e.what());
    }
}

double config_field_value(const ExperimentConfig& cfg, const std::string& dotted_key) {
    std::size_t dot = dotted_key.find('.');
    if (dot == std::string::npos) throw std::invalid_argument("expected section.key: " + dotted_key);
    const FieldDef* f = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
    if (!f) throw std::invalid_argument("unknown config key: " + dotted_key);
    void* p = f->get(const_cast<ExperimentConfig&>(cfg));
    switch (f->kind) {
        case Kind::Int: return *static_cast<int*>(p);
        case Kind::Dbl: return *static_cast<double*>(p);
        case Kind::Bool: return *static_cast<bool*>(p) ? 1.0 : 0.0;
        case Kind::U64: return static_cast<double>(*static_cast<std::uint64_t*>(p));
        case Kind::Str: break;
    }
    throw std::invalid_argument("config key is not numeric: " + dotted_key);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::string s = serialize_config(cfg);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

double symbol_error_rate(const LatentMatrices& est, const LatentMatrices& truth) {
    if (est.T != truth.T || est.M != truth.M)
        throw std::invalid_argument("symbol_error_rate: shapes differ");
    long err = 0;
    for (std::size_t i = 0; i < est.x.size(); ++i)
        if (est.x[i] != truth.x[i]) ++err;
    return static_cast<double>(err) / static_cast<double>(est.x.size());
}

RunRecord run_single(const ExperimentConfig& cfg, int seed_index, const std::string& snapshot_dir) {
    cfg.scenario.validate();
    cfg.hyper.validate();
    cfg.inference.validate();
    if (!(cfg.scenario.sigma_y2 > 0.0))
        throw std::invalid_argument("run_single: inference requires a positive noise variance");

    RunRecord rec;
    rec.config = cfg;
    rec.seed_index = seed_index;
    rec.seed = cfg.base_seed + static_cast<std::uint64_t>(seed_index);
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    rec.config_hash_hex = hex;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.gpgas_ser = rec.gffbs_ser = rec.gbcjr_ser = nan;

    Constellation cst = make_constellation(cfg.scenario.constellation);
    Rng data_rng = Rng::stream(rec.seed, 0);
    SimulatedScenario sc = simulate(cfg.scenario, cfg.hyper, cst, data_rng);
    rec.snr_db = snr_db(cfg.scenario.D, cfg.scenario.L, cfg.scenario.sigma_y2);

    const InferenceConfig& inf = cfg.inference;
    TemperSchedule sched;
    sched.sigma_y2 = cfg.scenario.sigma_y2;
    sched.temper_iters = inf.temper_iters;
    sched.decay = inf.temper_decay;
    double start2 = inf.sigma_start2 > 0.0 ? inf.sigma_start2
                                           : std::max(std::pow(10.0, 1.2), sched.sigma_y2);
    sched.sigma_start2 = std::max(start2, sched.sigma_y2);
    if (inf.temper_mode == "off" || inf.temper_iters == 0 ||
        sched.sigma_start2 <= sched.sigma_y2) {
        sched.mode = TemperSchedule::Mode::off;
    } else if (inf.temper_mode == "geometric") {
        sched.mode = TemperSchedule::Mode::geometric;
    } else {
        sched.mode = TemperSchedule::Mode::linear_db;
    }
    sched.validate();

    SamplerOptions opt;
    opt.slice = parse_slice_mode(inf.slice);
    opt.max_chains = inf.max_chains;
    opt.pgas.systematic = inf.systematic;

    Rng samp_rng = Rng::stream(rec.seed, 1);
    SamplerState st = init_state(cfg.scenario.T, inf.L, cfg.scenario.D, cfg.hyper, samp_rng);

    std::deque<LatentMatrices> win;
    std::deque<std::vector<double>> sig_win;
    int last_M = st.latents.M;

    auto t0 = std::chrono::steady_clock::now();
    for (int it = 0; it < inf.total_iters(); ++it) {
        opt.block_size = (inf.blockwise_after >= 0 && it >= inf.blockwise_after)
                             ? std::max(1, inf.block_size)
                             : 0;
        if (inf.particles_min > 0)
            opt.pgas.particles = std::clamp(inf.particles * std::max(1, st.latents.M),
                                            inf.particles_min, inf.particles_max);
        else
            opt.pgas.particles = inf.particles;
        full_iteration(st, sc.obs, cst, cfg.hyper, sched, opt, samp_rng);
        rec.loglik_trace.push_back(st.loglik);
        if (st.latents.M != last_M) {
            win.clear();
            sig_win.clear();
            last_M = st.latents.M;
        }
        win.push_back(st.latents);
        sig_win.push_back(st.globals.sigma_l2);
        if (static_cast<int>(win.size()) > inf.map_window) {
            win.pop_front();
            sig_win.pop_front();
        }
        if (inf.snapshot_every > 0 && !snapshot_dir.empty() &&
            (it + 1) % inf.snapshot_every == 0) {
            std::ofstream os(snapshot_dir + "/seed" + std::to_string(seed_index) + "_iter" +
                             std::to_string(it + 1) + ".snap");
            write_snapshot(os, st);
        }
    }
    rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<LatentMatrices> samples(win.begin(), win.end());
    std::vector<double> sig(static_cast<std::size_t>(inf.L), 0.0);
    for (const auto& v : sig_win)
        for (int l = 0; l < inf.L; ++l) sig[static_cast<std::size_t>(l)] += v[static_cast<std::size_t>(l)];
    for (double& v : sig) v /= static_cast<double>(sig_win.size());

    MapEstimate est = map_estimate(samples, sc.obs, cst, inf.L, sig, cfg.scenario.sigma_y2);
    Alignment al = align_chains(est, sc.taps, cst);
    rec.metrics = compute_metrics(est, al, sc.latents, sc.taps, cst);

    const BaselineConfig& bl = cfg.baselines;
    if (bl.genie_pgas || bl.genie_ffbs || bl.genie_bcjr) {
        GenieConfig gc;
        gc.taps = sc.taps;
        gc.a = bl.genie_a;
        gc.b = bl.genie_b;
        gc.sigma_y2 = cfg.scenario.sigma_y2;
        gc.state_cap = bl.state_cap;
        const int keep = std::min(bl.genie_keep, bl.genie_iters);
        if (bl.genie_pgas) {
            Rng r = Rng::stream(rec.seed, 2);
            PgasOptions po;
            po.particles = inf.particles;
            po.systematic = inf.systematic;
            auto smp = genie_pgas(sc.obs, cst, gc, po, bl.genie_iters, keep, r);
            rec.gpgas_ser = symbol_error_rate(vote_map_symbols(smp), sc.latents);
        }
        if (bl.genie_ffbs) {
            Rng r = Rng::stream(rec.seed, 3);
            try {
                auto smp = genie_ffbs(sc.obs, cst, gc, bl.genie_iters, keep, r);
                rec.gffbs_ser = symbol_error_rate(vote_map_symbols(smp), sc.latents);
            } catch (const std::runtime_error& e) {
                std::fprintf(stderr, "genie ffbs skipped: %s\n", e.what());
            }
        }
        if (bl.genie_bcjr) {
            try {
                BcjrResult r = bcjr_joint(sc.obs, cst, gc);
                rec.gbcjr_ser = symbol_error_rate(r.map, sc.latents);
            } catch (const std::runtime_error& e) {
                std::fprintf(stderr, "genie bcjr skipped: %s\n", e.what());
            }
        }
    }
    return rec;
}

namespace {

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double null_or_double(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

} // namespace

void write_runrecord(const std::string& path, const RunRecord& rec) {
    nlohmann::json j;
    j["format"] = "iffsm-runrecord/1";
    j["config_hash"] = rec.config_hash_hex;
    j["seed_index"] = rec.seed_index;
    j["seed"] = rec.seed;
    j["snr_db"] = rec.snr_db;
    j["runtime_s"] = rec.runtime_s;
    j["metrics"] = {
        {"m_plus", rec.metrics.m_plus},   {"matched", rec.metrics.matched},
        {"recovered", rec.metrics.recovered}, {"ader", rec.metrics.ader},
        {"ser", rec.metrics.ser},         {"mse_mean", finite_or_null(rec.metrics.mse_mean)},
        {"mse", rec.metrics.mse},
    };
    j["baselines"] = {
        {"gpgas_ser", finite_or_null(rec.gpgas_ser)},
        {"gffbs_ser", finite_or_null(rec.gffbs_ser)},
        {"gbcjr_ser", finite_or_null(rec.gbcjr_ser)},
    };
    j["loglik_trace"] = rec.loglik_trace;
    j["config"] = serialize_config(rec.config);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write run record: " + path);
    os << j.dump(2) << "\n";
}

RunRecord read_runrecord(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open run record: " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    if (j.value("format", "") != "iffsm-runrecord/1")
        throw std::runtime_error("not a run record: " + path);
    RunRecord rec;
    rec.config_hash_hex = j.at("config_hash").get<std::string>();
    rec.seed_index = j.at("seed_index").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.snr_db = j.at("snr_db").get<double>();
    rec.runtime_s = j.at("runtime_s").get<double>();
    const auto& m = j.at("metrics");
    rec.metrics.m_plus = m.at("m_plus").get<int>();
    rec.metrics.matched = m.at("matched").get<int>();
    rec.metrics.recovered = m.at("recovered").get<int>();
    rec.metrics.ader = m.at("ader").get<double>();
    rec.metrics.ser = m.at("ser").get<double>();
    rec.metrics.mse_mean = null_or_double(m.at("mse_mean"));
    rec.metrics.mse = m.at("mse").get<std::vector<double>>();
    const auto& b = j.at("baselines");
    rec.gpgas_ser = null_or_double(b.at("gpgas_ser"));
    rec.gffbs_ser = null_or_double(b.at("gffbs_ser"));
    rec.gbcjr_ser = null_or_double(b.at("gbcjr_ser"));
    rec.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
    rec.config = parse_config_text(j.at("config").get<std::string>());
    return rec;
}

std::string results_csv_text(const std::vector<RunRecord>& recs) {
    std::string out =
        "seed,m_plus,matched,recovered,ader,ser,mse_mean,snr_db,gpgas_ser,gffbs_ser,gbcjr_ser,"
        "runtime_s\n";
    auto cell = [](double v) { return std::isfinite(v) ? g17(v) : std::string(); };
    for (const auto& r : recs) {
        out += std::to_string(r.seed) + "," + std::to_string(r.metrics.m_plus) + "," +
               std::to_string(r.metrics.matched) + "," + std::to_string(r.metrics.recovered) +
               "," + cell(r.metrics.ader) + "," + cell(r.metrics.ser) + "," +
               cell(r.metrics.mse_mean) + "," + cell(r.snr_db) + "," + cell(r.gpgas_ser) + "," +
               cell(r.gffbs_ser) + "," + cell(r.gbcjr_ser) + "," + cell(r.runtime_s) + "\n";
    }
    return out;
}

void write_results_csv(const std::string& path, const std::vector<RunRecord>& recs) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write results csv: " + path);
    os << results_csv_text(recs);
}

void write_summary_json(const std::string& path, const std::vector<RunRecord>& recs) {
    if (recs.empty()) throw std::invalid_argument("write_summary_json: no records");
    nlohmann::json j;
    j["name"] = recs[0].config.name;
    j["point"] = recs[0].config.point;
    j["config_hash"] = recs[0].config_hash_hex;
    j["n_runs"] = recs.size();
    j["percentile_rule"] = "linear interpolation at q*(n-1) over the sorted values";

    auto add = [&](const char* key, auto getter) {
        std::vector<double> v;
        for (const auto& r : recs) {
            double x = getter(r);
            if (std::isfinite(x)) v.push_back(x);
        }
        if (v.empty()) {
            j["metrics"][key] = nullptr;
            return;
        }
        BoxStats s = summarize_values(v);
        j["metrics"][key] = {{"p25", s.p25}, {"p50", s.p50}, {"p75", s.p75},
                             {"min", s.min}, {"max", s.max}, {"mean", s.mean},
                             {"n", v.size()}};
    };
    add("ser", [](const RunRecord& r) { return r.metrics.ser; });
    add("ader", [](const RunRecord& r) { return r.metrics.ader; });
    add("mse_mean", [](const RunRecord& r) { return r.metrics.mse_mean; });
    add("m_plus", [](const RunRecord& r) { return double(r.metrics.m_plus); });
    add("matched", [](const RunRecord& r) { return double(r.metrics.matched); });
    add("recovered", [](const RunRecord& r) { return double(r.metrics.recovered); });
    add("gpgas_ser", [](const RunRecord& r) { return r.gpgas_ser; });
    add("gffbs_ser", [](const RunRecord& r) { return r.gffbs_ser; });
    add("gbcjr_ser", [](const RunRecord& r) { return r.gbcjr_ser; });
    add("runtime_s", [](const RunRecord& r) { return r.runtime_s; });

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write summary: " + path);
    os << j.dump(2) << "\n";
}

namespace {

ExperimentConfig preset_base(bool full) {
    ExperimentConfig c;
    c.n_seeds = full ? 50 : 10;
    if (full) {
        c.inference.temper_iters = 18000;
        c.inference.exploit_iters = 2000;
        c.inference.temper_decay = 0.9995;
        c.inference.map_window = 2000;
        c.baselines.genie_iters = 10000;
        c.baselines.genie_keep = 2000;
    } else {
        c.inference.temper_iters = 600;
        c.inference.exploit_iters = 200;
        c.inference.temper_decay = 0.99;
        c.inference.map_window = 200;
        c.baselines.genie_iters = 300;
        c.baselines.genie_keep = 100;
    }
    c.baselines.genie_pgas = true;
    // The reference activation/persistence pair handed to the genie
    // detectors: rare starts, long holds.
    c.baselines.genie_a = 0.002;
    c.baselines.genie_b = 0.998;
    return c;
}

std::string db_label(double snr) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snr%gdb", snr);
    return buf;
}

struct PresetDef {
    const char* name;
    const char* description;
    Preset (*build)(bool);
};

Preset build_rayleigh_base(bool full) {
    Preset p;
    ExperimentConfig c = preset_base(full);
    c.name = "rayleigh-base";
    c.point = "base";
    c.baselines.genie_ffbs = true;
    p.points.push_back(c);
    return p;
}

Preset build_sweep_snr(bool full) {
    Preset p;
    const double exps[] = {1.2, 0.9, 0.6, 0.3, 0.0};
    for (double e : exps) {
        ExperimentConfig c = preset_base(full);
        c.name = "sweep-snr";
        c.sweep_key = "scenario.sigma_y2";
        c.scenario.sigma_y2 = std::pow(10.0, e);
        c.point = db_label(snr_db(c.scenario.D, c.scenario.L, c.scenario.sigma_y2));
        c.baselines.genie_ffbs = true;
        p.points.push_back(c);
    }
    return p;
}

Preset build_sweep_transmitters(bool full) {
    Preset p;
    for (int n = 2; n <= 6; ++n) {
        ExperimentConfig c = preset_base(full);
        c.name = "sweep-transmitters";
        c.sweep_key = "scenario.n_t";
        c.scenario.N_t = n;
        c.point = "nt" + std::to_string(n);
        c.baselines.genie_ffbs = true;
        p.points.push_back(c);
    }
    return p;
}

Preset build_sweep_receivers(bool full) {
    Preset p;
    for (int d : {2, 6, 10, 20, 30}) {
        ExperimentConfig c = preset_base(full);
        c.name = "sweep-receivers";
        c.sweep_key = "scenario.d";
        c.scenario.D = d;
        c.point = "d" + std::to_string(d);
        c.baselines.genie_ffbs = true;
        p.points.push_back(c);
    }
    return p;
}

Preset build_sweep_l(bool full) {
    Preset p;
    for (int l = 1; l <= 5; ++l) {
        ExperimentConfig c = preset_base(full);
        c.name = "sweep-l";
        c.sweep_key = "scenario.l";
        c.scenario.L = l;
        c.inference.L = l;
        c.scenario.sigma_y2 = std::pow(10.0, 0.9);
        c.point = "l" + std::to_string(l);
        c.baselines.genie_ffbs = l < 5; // state budget explodes at l = 5
        p.points.push_back(c);
    }
    return p;
}

Preset build_sweep_snr_l5(bool full) {
    Preset p;
    const double exps[] = {1.8, 1.5, 1.2, 0.9};
    for (double e : exps) {
        ExperimentConfig c = preset_base(full);
        c.name = "sweep-snr-l5";
        c.sweep_key = "scenario.sigma_y2";
        c.scenario.L = 5;
        c.inference.L = 5;
        c.scenario.sigma_y2 = std::pow(10.0, e);
        c.point = db_label(snr_db(c.scenario.D, c.scenario.L, c.scenario.sigma_y2));
        p.points.push_back(c);
    }
    return p;
}

Preset build_sweep_l_mismatch(bool full) {
    Preset p;
    for (int l = 1; l <= 5; ++l) {
        ExperimentConfig c = preset_base(full);
        c.name = "sweep-l-mismatch";
        c.sweep_key = "inference.l";
        c.scenario.L = 1;
        c.inference.L = l;
        c.point = "il" + std::to_string(l);
        p.points.push_back(c);
    }
    return p;
}

Preset build_qam1024(bool full) {
    Preset p;
    const double exps[] = {1.5, 1.8, 2.1, 2.4};
    for (double e : exps) {
        ExperimentConfig c = preset_base(full);
        c.name = "qam1024";
        c.sweep_key = "scenario.sigma_y2";
        c.scenario.constellation = "qam1024";
        c.scenario.sigma_y2 = std::pow(10.0, e);
        // Joint sweeps first, then single-chain blocks to help mixing over
        // the large alphabet.
        c.inference.block_size = 1;
        if (full) {
            c.inference.blockwise_after = 5000;
            c.inference.temper_iters = 18000;
            c.inference.exploit_iters = 7000;
        } else {
            c.inference.blockwise_after = 300;
            c.inference.temper_iters = 450;
            c.inference.exploit_iters = 150;
        }
        c.point = "sigma" + std::to_string(e).substr(0, 3);
        p.points.push_back(c);
    }
    return p;
}

Preset build_sweep_particles(bool full) {
    Preset p;
    for (int np : {300, 1000, 3000, 10000, 30000}) {
        ExperimentConfig c = preset_base(full);
        c.name = "sweep-particles";
        c.sweep_key = "inference.particles";
        c.n_seeds = 1;
        c.scenario.N_t = 10;
        c.scenario.sigma_y2 = std::pow(10.0, 0.3);
        c.inference.particles = np;
        if (full) {
            c.inference.temper_iters = 9000;
            c.inference.exploit_iters = 1000;
            c.inference.map_window = 1000;
        } else {
            c.scenario.T = 300;
            c.scenario.burst_len = 150;
            c.inference.temper_iters = 300;
            c.inference.exploit_iters = 100;
            c.inference.map_window = 100;
        }
        c.point = "p" + std::to_string(np);
        p.points.push_back(c);
    }
    return p;
}

Preset build_wifi_style(bool full) {
    Preset p;
    for (int l = 1; l <= 5; ++l) {
        ExperimentConfig c = preset_base(full);
        c.name = "wifi-style";
        c.sweep_key = "inference.l";
        c.synth_channel = true;
        c.scenario.D = 12;
        c.scenario.N_t = 12;
        c.scenario.constellation = "qpsk";
        c.scenario.sigma_y2 = 7.96e-9;
        c.hyper.sigma_h2 = 0.01;
        c.inference.L = l;
        c.scenario.L = std::min(l, 3); // synthesized ground truth memory
        c.inference.temper_mode = "linear_db";
        c.inference.sigma_start2 = 15.85;
        c.baselines.genie_pgas = false;
        if (full) {
            c.scenario.T = 2000;
            c.scenario.burst_len = 1000;
            c.inference.temper_iters = 26600;
            c.inference.exploit_iters = 3400;
            c.inference.map_window = 2000;
            c.n_seeds = 5;
        } else {
            c.scenario.T = 300;
            c.scenario.burst_len = 150;
            c.inference.temper_iters = 500;
            c.inference.exploit_iters = 150;
            c.inference.map_window = 150;
            c.n_seeds = 2;
        }
        c.point = "l" + std::to_string(l);
        p.points.push_back(c);
    }
    return p;
}

const PresetDef kPresets[] = {
    {"rayleigh-base",
     "Base multipath scenario: T=1000, D=20, QPSK, 5 transmitters, memoryless channel",
     build_rayleigh_base},
    {"sweep-snr", "Noise variance sweep from 10^1.2 down to 1 (memoryless channel)",
     build_sweep_snr},
    {"sweep-transmitters", "True transmitter count sweep from 2 to 6", build_sweep_transmitters},
    {"sweep-receivers", "Receive antenna sweep over 2..30", build_sweep_receivers},
    {"sweep-l", "Channel memory sweep L=1..5 at sigma_y2=10^0.9 (matched inference)",
     build_sweep_l},
    {"sweep-snr-l5", "Noise variance sweep at channel memory L=5", build_sweep_snr_l5},
    {"sweep-l-mismatch", "Memoryless data, inference memory swept over 1..5",
     build_sweep_l_mismatch},
    {"qam1024", "1024-QAM constellation over a noise variance sweep, blockwise mixing phase",
     build_qam1024},
    {"sweep-particles", "Particle count sweep 300..30000 with 10 transmitters (single run)",
     build_sweep_particles},
    {"wifi-style", "Dense indoor setup: 12x12 links, bursty traffic, dB-linear tempering",
     build_wifi_style},
};

} // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& p : kPresets) names.push_back(p.name);
    return names;
}

std::string preset_description(const std::string& name) {
    for (const auto& p : kPresets)
        if (name == p.name) return p.description;
    throw std::invalid_argument("unknown preset: " + name);
}

Preset make_preset(const std::string& name, bool full_scale) {
    for (const auto& p : kPresets) {
        if (name != p.name) continue;
        Preset out = p.build(full_scale);
        out.name = p.name;
        out.description = p.description;
        return out;
    }
    std::string msg = "unknown preset: " + name + "; known presets:";
    for (const auto& p : kPresets) msg += std::string(" ") + p.name;
    throw std::invalid_argument(msg);
}

} // namespace iffsm
