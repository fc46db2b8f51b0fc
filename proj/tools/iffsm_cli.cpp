#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "iffsm/experiment.hpp"
#include "iffsm/kernels.hpp"
#include "iffsm/simulator.hpp"

namespace fs = std::filesystem;
using namespace iffsm;

namespace {

std::string pick_out_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("IFFSM_OUT_ROOT")) return env;
    return "runs";
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Fixed channel shared by every seed of a point, written next to the results
// so the run can be repeated against the same environment.
void synthesize_channel(ExperimentConfig& cfg, const std::string& dir) {
    std::vector<double> vars(static_cast<std::size_t>(cfg.scenario.L));
    for (int l = 0; l < cfg.scenario.L; ++l)
        vars[static_cast<std::size_t>(l)] = cfg.hyper.mean_tap_var(l);
    Rng rng = Rng::stream(cfg.base_seed, 99);
    ChannelTaps taps =
        gen_channel_rayleigh(cfg.scenario.N_t, cfg.scenario.D, cfg.scenario.L, vars, rng);
    std::string path = dir + "/channel.txt";
    export_channel_file(path, taps, 100.0);
    cfg.scenario.channel_file = path;
}

std::vector<RunRecord> run_point(const ExperimentConfig& cfg_in, const std::string& dir,
                                 int jobs) {
    ExperimentConfig cfg = cfg_in;
    fs::create_directories(dir);
    if (cfg.synth_channel && cfg.scenario.channel_file.empty()) synthesize_channel(cfg, dir);
    std::string snapdir;
    if (cfg.inference.snapshot_every > 0) {
        snapdir = dir + "/snapshots";
        fs::create_directories(snapdir);
    }

    const int n = cfg.n_seeds;
    std::vector<RunRecord> recs(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mx;
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                recs[static_cast<std::size_t>(i)] = run_single(cfg, i, snapdir);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mx);
                if (!failed.exchange(true)) first_error = e.what();
                return;
            }
        }
    };
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw std::runtime_error("seed run failed: " + first_error);

    for (int i = 0; i < n; ++i)
        write_runrecord(dir + "/runrecord_seed" + std::to_string(i) + ".json",
                        recs[static_cast<std::size_t>(i)]);
    write_results_csv(dir + "/results.csv", recs);
    write_summary_json(dir + "/summary.json", recs);
    return recs;
}

void print_point_line(const ExperimentConfig& cfg, const std::vector<RunRecord>& recs) {
    std::vector<double> ser, mplus, recov;
    for (const auto& r : recs) {
        if (std::isfinite(r.metrics.ser)) ser.push_back(r.metrics.ser);
        mplus.push_back(r.metrics.m_plus);
        recov.push_back(r.metrics.recovered);
    }
    std::string line = cfg.name + "/" + cfg.point + ": ";
    if (!ser.empty()) line += "median ser " + g17(summarize_values(ser).p50);
    line += ", median m_plus " + g17(summarize_values(mplus).p50);
    line += ", median recovered " + g17(summarize_values(recov).p50);
    double rt = 0.0;
    for (const auto& r : recs) rt += r.runtime_s;
    char buf[48];
    std::snprintf(buf, sizeof buf, " (%.1fs total)", rt);
    std::printf("%s%s\n", line.c_str(), buf);
}

void write_plotdata(const std::string& path, const std::vector<ExperimentConfig>& cfgs,
                    const std::vector<std::vector<RunRecord>>& all) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write plot data: " + path);
    os << "point,x,ser_p25,ser_p50,ser_p75,ader_p50,mse_mean_p50,m_plus_p50,recovered_p50,"
          "gpgas_ser_p50,gffbs_ser_p50,gbcjr_ser_p50\n";
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        const auto& cfg = cfgs[i];
        double x = static_cast<double>(i);
        if (!cfg.sweep_key.empty()) {
            try {
                x = config_field_value(cfg, cfg.sweep_key);
            } catch (const std::exception&) {
            }
        }
        auto col = [&](auto getter) -> std::string {
            std::vector<double> v;
            for (const auto& r : all[i]) {
                double val = getter(r);
                if (std::isfinite(val)) v.push_back(val);
            }
            if (v.empty()) return "";
            return g17(summarize_values(v).p50);
        };
        std::vector<double> ser;
        for (const auto& r : all[i])
            if (std::isfinite(r.metrics.ser)) ser.push_back(r.metrics.ser);
        std::string s25, s50, s75;
        if (!ser.empty()) {
            BoxStats st = summarize_values(ser);
            s25 = g17(st.p25);
            s50 = g17(st.p50);
            s75 = g17(st.p75);
        }
        os << cfg.point << "," << g17(x) << "," << s25 << "," << s50 << "," << s75 << ","
           << col([](const RunRecord& r) { return r.metrics.ader; }) << ","
           << col([](const RunRecord& r) { return r.metrics.mse_mean; }) << ","
           << col([](const RunRecord& r) { return double(r.metrics.m_plus); }) << ","
           << col([](const RunRecord& r) { return double(r.metrics.recovered); }) << ","
           << col([](const RunRecord& r) { return r.gpgas_ser; }) << ","
           << col([](const RunRecord& r) { return r.gffbs_ser; }) << ","
           << col([](const RunRecord& r) { return r.gbcjr_ser; }) << "\n";
    }
}

bool double_eq(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return true;
    return a == b;
}

int cmd_replay(const std::string& record_path) {
    RunRecord ref = read_runrecord(record_path);
    std::printf("replaying seed index %d of %s/%s\n", ref.seed_index, ref.config.name.c_str(),
                ref.config.point.c_str());
    RunRecord re = run_single(ref.config, ref.seed_index);
    int bad = 0;
    auto check = [&](const char* what, bool ok) {
        std::printf("  %-12s %s\n", what, ok ? "identical" : "MISMATCH");
        if (!ok) ++bad;
    };
    check("m_plus", ref.metrics.m_plus == re.metrics.m_plus);
    check("matched", ref.metrics.matched == re.metrics.matched);
    check("recovered", ref.metrics.recovered == re.metrics.recovered);
    check("ader", double_eq(ref.metrics.ader, re.metrics.ader));
    check("ser", double_eq(ref.metrics.ser, re.metrics.ser));
    check("mse_mean", double_eq(ref.metrics.mse_mean, re.metrics.mse_mean));
    bool mse_ok = ref.metrics.mse.size() == re.metrics.mse.size();
    if (mse_ok)
        for (std::size_t i = 0; i < ref.metrics.mse.size(); ++i)
            mse_ok = mse_ok && double_eq(ref.metrics.mse[i], re.metrics.mse[i]);
    check("mse", mse_ok);
    check("snr_db", double_eq(ref.snr_db, re.snr_db));
    bool ll_ok = ref.loglik_trace.size() == re.loglik_trace.size();
    if (ll_ok)
        for (std::size_t i = 0; i < ref.loglik_trace.size(); ++i)
            ll_ok = ll_ok && double_eq(ref.loglik_trace[i], re.loglik_trace[i]);
    check("loglik", ll_ok);
    check("gpgas_ser", double_eq(ref.gpgas_ser, re.gpgas_ser));
    check("gffbs_ser", double_eq(ref.gffbs_ser, re.gffbs_ser));
    check("gbcjr_ser", double_eq(ref.gbcjr_ser, re.gbcjr_ser));
    if (bad == 0) {
        std::printf("replay: identical\n");
        return 0;
    }
    std::printf("replay: %d field(s) differ\n", bad);
    return 1;
}

int cmd_summarize(const std::string& dir) {
    std::vector<RunRecord> recs;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("runrecord_", 0) == 0 && entry.path().extension() == ".json")
            paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) recs.push_back(read_runrecord(p.string()));
    if (recs.empty()) {
        std::fprintf(stderr, "no run records found in %s\n", dir.c_str());
        return 1;
    }
    std::string tmp = dir + "/summary.json";
    write_summary_json(tmp, recs);
    std::ifstream is(tmp);
    std::printf("%s", std::string(std::istreambuf_iterator<char>(is), {}).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blind multiuser detection over an unbounded transmitter set"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a preset or a config file");
    std::string preset_name, config_path, out_flag, point_filter;
    std::vector<std::string> overrides;
    bool full_scale = false;
    int seeds_override = -1;
    long long base_seed_override = -1;
    int jobs = 1;
    run->add_option("--preset", preset_name, "Preset name (see preset-list)");
    run->add_option("--config", config_path, "Config file path");
    run->add_option("--out", out_flag, "Output root (default $IFFSM_OUT_ROOT or ./runs)");
    run->add_option("--set", overrides, "Config override section.key=value (repeatable)");
    run->add_option("--point", point_filter, "Run only the named sweep point");
    run->add_option("--seeds", seeds_override, "Override the number of seeds");
    run->add_option("--base-seed", base_seed_override, "Override the base seed");
    run->add_option("--jobs", jobs, "Concurrent seed runs (default 1)");
    run->add_flag("--full-scale", full_scale, "Publication-scale iteration counts");

    auto* plist = app.add_subcommand("preset-list", "List available presets");

    auto* rep = app.add_subcommand("replay", "Re-run a run record and compare bit-exactly");
    std::string record_path;
    rep->add_option("--record", record_path, "runrecord_*.json path")->required();

    auto* summ = app.add_subcommand("summarize", "Summarize the run records in a directory");
    std::string summ_dir;
    summ->add_option("--dir", summ_dir, "Directory holding runrecord_*.json files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (plist->parsed()) {
            for (const auto& name : preset_names()) {
                Preset p = make_preset(name, false);
                std::printf("%-20s %s (%zu points)\n", name.c_str(), p.description.c_str(),
                            p.points.size());
            }
            return 0;
        }
        if (rep->parsed()) return cmd_replay(record_path);
        if (summ->parsed()) return cmd_summarize(summ_dir);

        // run
        if (preset_name.empty() == config_path.empty())
            throw std::runtime_error("run: pass exactly one of --preset or --config");
        std::vector<ExperimentConfig> points;
        if (!preset_name.empty()) {
            points = make_preset(preset_name, full_scale).points;
        } else {
            points.push_back(parse_config_file(config_path));
        }
        std::vector<ExperimentConfig> selected;
        for (auto& cfg : points) {
            if (!point_filter.empty() && cfg.point != point_filter) continue;
            if (seeds_override > 0) cfg.n_seeds = seeds_override;
            if (base_seed_override >= 0)
                cfg.base_seed = static_cast<std::uint64_t>(base_seed_override);
            for (const auto& ov : overrides) apply_override(cfg, ov);
            selected.push_back(cfg);
        }
        if (selected.empty()) throw std::runtime_error("run: no matching sweep point");

        std::string root = pick_out_root(out_flag);
        std::printf("kernels: %s\n", kernels::active().name);
        std::vector<std::vector<RunRecord>> all;
        for (const auto& cfg : selected) {
            std::string dir = root + "/" + cfg.name + "/" + cfg.point;
            all.push_back(run_point(cfg, dir, jobs));
            print_point_line(cfg, all.back());
        }
        if (selected.size() > 1)
            write_plotdata(root + "/" + selected[0].name + "/plotdata.csv", selected, all);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
