// Experiment harness: config round trips, overrides, hashing, presets, the
// CSV/JSON artifacts, and end-to-end determinism of a tiny run.

#include "check.hpp"
#include "iffsm/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace iffsm;

static ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.point = "p0";
    cfg.n_seeds = 1;
    cfg.base_seed = 7;
    cfg.scenario.T = 60;
    cfg.scenario.D = 4;
    cfg.scenario.N_t = 2;
    cfg.scenario.L = 1;
    cfg.scenario.burst_len = 30;
    cfg.scenario.sigma_y2 = 0.5;
    cfg.inference.particles = 120;
    cfg.inference.temper_iters = 40;
    cfg.inference.exploit_iters = 20;
    cfg.inference.temper_decay = 0.9;
    cfg.inference.map_window = 20;
    cfg.inference.max_chains = 6;
    cfg.baselines.genie_pgas = true;
    cfg.baselines.genie_a = 0.002;
    cfg.baselines.genie_b = 0.998;
    cfg.baselines.genie_iters = 40;
    cfg.baselines.genie_keep = 10;
    return cfg;
}

static void config_round_trip() {
    const ExperimentConfig cfg = tiny_config();
    const std::string text = serialize_config(cfg);
    const ExperimentConfig back = parse_config_text(text);
    checks::check(serialize_config(back) == text, "serialize -> parse -> serialize is a fixed point");
    checks::check(config_hash(back) == config_hash(cfg), "config hash survives the round trip");

    // Parsing accepts comments, blank lines and a partial key set.
    const std::string partial =
        "# comment\n[scenario]\nt = 33\n\n[inference]\nparticles = 55\n";
    const ExperimentConfig p = parse_config_text(partial);
    checks::check(p.scenario.T == 33 && p.inference.particles == 55,
                  "partial configs override just the named keys");
    checks::check(p.scenario.D == ExperimentConfig{}.scenario.D,
                  "unnamed keys keep their defaults");

    bool threw = false;
    try {
        parse_config_text("[scenario]\nnot_a_key = 1\n");
    } catch (const std::exception&) {
        threw = true;
    }
    checks::check(threw, "unknown keys are rejected");

    threw = false;
    try {
        parse_config_text("no_section = 1\n");
    } catch (const std::exception&) {
        threw = true;
    }
    checks::check(threw, "keys outside any section are rejected");
}

static void overrides_and_field_values() {
    ExperimentConfig cfg = tiny_config();
    const std::uint64_t h0 = config_hash(cfg);
    apply_override(cfg, "scenario.sigma_y2=2.5");
    checks::check(cfg.scenario.sigma_y2 == 2.5, "override sets a double field");
    checks::check(config_hash(cfg) != h0, "the hash tracks field changes");
    apply_override(cfg, "inference.temper_mode=linear_db");
    checks::check(cfg.inference.temper_mode == "linear_db", "override sets a string field");
    apply_override(cfg, "baselines.genie_ffbs=true");
    checks::check(cfg.baselines.genie_ffbs, "override sets a boolean field");
    apply_override(cfg, "run.n_seeds=3");
    checks::check(cfg.n_seeds == 3, "override reaches the run section");

    checks::check_near(config_field_value(cfg, "scenario.sigma_y2"), 2.5, 0.0,
                       "config_field_value reads a double");
    checks::check_near(config_field_value(cfg, "inference.particles"), 120.0, 0.0,
                       "config_field_value reads an int");

    bool threw = false;
    try {
        apply_override(cfg, "scenario.bogus=1");
    } catch (const std::exception&) {
        threw = true;
    }
    checks::check(threw, "overrides of unknown keys are rejected");
    threw = false;
    try {
        apply_override(cfg, "missing-equals");
    } catch (const std::exception&) {
        threw = true;
    }
    checks::check(threw, "malformed override syntax is rejected");
}

static void preset_catalog() {
    const std::vector<std::string> names = preset_names();
    checks::check(names.size() == 10, "ten presets are registered");
    bool described = true;
    for (const auto& n : names) described &= !preset_description(n).empty();
    checks::check(described, "every preset carries a description");

    const Preset base = make_preset("rayleigh-base", false);
    checks::check(base.points.size() == 1, "rayleigh-base is a single point");
    checks::check(base.points[0].inference.temper_iters == 600 &&
                      base.points[0].inference.exploit_iters == 200,
                  "desk scale uses the short schedule");
    checks::check(base.points[0].baselines.genie_a == 0.002 &&
                      base.points[0].baselines.genie_b == 0.998,
                  "genie transition knobs match the scenario dynamics");

    const Preset basef = make_preset("rayleigh-base", true);
    checks::check(basef.points[0].inference.temper_iters == 18000 &&
                      basef.points[0].inference.exploit_iters == 2000 &&
                      basef.points[0].n_seeds == 50,
                  "full scale uses the long schedule");
    checks::check(basef.points[0].inference.temper_decay == 0.9995,
                  "full scale uses the slow decay");

    const Preset snr = make_preset("sweep-snr", false);
    checks::check(snr.points.size() == 5, "the SNR sweep has five points");
    bool sweep_key_ok = true;
    for (const auto& p : snr.points) sweep_key_ok &= (p.sweep_key == "scenario.sigma_y2");
    checks::check(sweep_key_ok, "sweep points share the sweep key");
    checks::check_near(snr.points[0].scenario.sigma_y2, std::pow(10.0, 1.2), 1e-12,
                       "the SNR sweep starts at the highest noise level");

    const Preset qam = make_preset("qam1024", false);
    checks::check(qam.points[0].scenario.constellation == "qam1024" &&
                      qam.points[0].inference.block_size == 1 &&
                      qam.points[0].inference.blockwise_after >= 0,
                  "the dense-constellation preset switches to single-chain blocks");

    const Preset wifi = make_preset("wifi-style", false);
    checks::check(wifi.points[0].synth_channel && wifi.points[0].scenario.D == 12 &&
                      wifi.points[0].scenario.N_t == 12,
                  "the indoor preset synthesizes a 12x12 channel");
    checks::check_near(wifi.points[0].scenario.sigma_y2, 7.96e-9, 1e-12,
                       "the indoor preset uses the measured noise floor");
    checks::check(wifi.points[0].inference.temper_mode == "linear_db",
                  "the indoor preset switches to the linear-dB schedule");

    const Preset lsweep = make_preset("sweep-l", false);
    bool matched_l = true;
    for (const auto& p : lsweep.points) matched_l &= (p.scenario.L == p.inference.L);
    checks::check(matched_l, "the channel-length sweep keeps inference L matched");

    const Preset mism = make_preset("sweep-l-mismatch", false);
    bool data_l1 = true;
    for (const auto& p : mism.points) data_l1 &= (p.scenario.L == 1);
    checks::check(data_l1 && mism.points.back().inference.L == 5,
                  "the mismatch sweep fixes the data at L=1 and varies inference L");

    bool threw = false;
    try {
        make_preset("no-such-preset", false);
    } catch (const std::invalid_argument& e) {
        threw = std::string(e.what()).find("rayleigh-base") != std::string::npos;
    }
    checks::check(threw, "unknown preset names list the catalog");
}

static void ser_and_csv() {
    LatentMatrices a(3, 2), b(3, 2);
    a.at(0, 0) = 1;
    a.at(1, 1) = 2;
    b.at(0, 0) = 1;
    checks::check_near(symbol_error_rate(a, b), 1.0 / 6.0, 1e-15,
                       "symbol error rate counts differing entries");

    RunRecord r1;
    r1.seed_index = 0;
    r1.seed = 7;
    r1.snr_db = 10.0;
    r1.metrics.m_plus = 3;
    r1.metrics.matched = 2;
    r1.metrics.recovered = 2;
    r1.metrics.ader = 0.012345678901234567;
    r1.metrics.ser = 1.0 / 3.0;
    r1.metrics.mse_mean = 0.25;
    r1.gpgas_ser = 0.125;
    r1.gffbs_ser = std::nan("");
    r1.gbcjr_ser = std::nan("");
    r1.runtime_s = 1.5;
    const std::string csv = results_csv_text({r1});
    std::istringstream lines(csv);
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    checks::check(header ==
                      "seed,m_plus,matched,recovered,ader,ser,mse_mean,snr_db,gpgas_ser,"
                      "gffbs_ser,gbcjr_ser,runtime_s",
                  "CSV header names the columns with runtime last");
    checks::check(row.find(",,") != std::string::npos, "NaN cells are left empty");
    // The SER cell parses back to the exact double.
    std::vector<std::string> cells;
    {
        std::istringstream rs(row);
        std::string cell;
        while (std::getline(rs, cell, ',')) cells.push_back(cell);
    }
    checks::check(cells.size() == 12, "CSV rows carry 12 cells");
    checks::check(std::strtod(cells[5].c_str(), nullptr) == 1.0 / 3.0,
                  "%.17g cells parse back bit-exactly");
}

static void runrecord_round_trip() {
    RunRecord rec;
    rec.config = tiny_config();
    rec.config_hash_hex = "00000000deadbeef";
    rec.seed_index = 2;
    rec.seed = 9;
    rec.snr_db = 9.0309;
    rec.metrics.m_plus = 2;
    rec.metrics.matched = 2;
    rec.metrics.recovered = 1;
    rec.metrics.ader = 0.01;
    rec.metrics.ser = 0.07;
    rec.metrics.mse = {0.001, 0.002};
    rec.metrics.mse_mean = 0.0015;
    rec.gpgas_ser = 0.05;
    rec.gffbs_ser = std::nan("");
    rec.gbcjr_ser = std::nan("");
    rec.runtime_s = 2.0;
    rec.loglik_trace = {-100.5, -90.25, -80.125};

    const std::string path = "test_experiment_record.json";
    write_runrecord(path, rec);
    const RunRecord back = read_runrecord(path);
    checks::check(back.config_hash_hex == rec.config_hash_hex && back.seed == rec.seed &&
                      back.seed_index == rec.seed_index,
                  "record identity fields survive the JSON round trip");
    checks::check(back.metrics.mse == rec.metrics.mse && back.metrics.ser == rec.metrics.ser &&
                      back.metrics.m_plus == rec.metrics.m_plus,
                  "metrics survive bit-exactly");
    checks::check(std::isnan(back.gffbs_ser) && std::isnan(back.gbcjr_ser) &&
                      back.gpgas_ser == rec.gpgas_ser,
                  "absent baselines round trip as NaN");
    checks::check(back.loglik_trace == rec.loglik_trace, "the likelihood trace survives");
    checks::check(serialize_config(back.config) == serialize_config(rec.config),
                  "the embedded config text is canonical");
    std::remove(path.c_str());
}

static void tiny_run_determinism() {
    const ExperimentConfig cfg = tiny_config();
    const RunRecord r1 = run_single(cfg, 0);
    const RunRecord r2 = run_single(cfg, 0);
    checks::check(r1.seed == cfg.base_seed + 0, "the seed is base_seed plus the index");
    checks::check(r1.metrics.ser == r2.metrics.ser && r1.metrics.ader == r2.metrics.ader &&
                      r1.metrics.m_plus == r2.metrics.m_plus &&
                      r1.metrics.mse == r2.metrics.mse,
                  "metrics are bit-identical across reruns");
    checks::check(r1.loglik_trace == r2.loglik_trace, "likelihood traces are bit-identical");
    checks::check(r1.gpgas_ser == r2.gpgas_ser, "the genie baseline is bit-identical");
    checks::check(std::isnan(r1.gffbs_ser) && std::isnan(r1.gbcjr_ser),
                  "disabled baselines report NaN");
    checks::check(static_cast<int>(r1.loglik_trace.size()) == cfg.inference.total_iters(),
                  "one likelihood value per iteration");
    checks::check(std::isfinite(r1.metrics.ser) && r1.metrics.ser >= 0.0 && r1.metrics.ser <= 1.0,
                  "SER lands in [0,1]");

    // A different seed index gives a different simulation.
    const RunRecord r3 = run_single(cfg, 1);
    checks::check(r3.seed == cfg.base_seed + 1 && r3.loglik_trace != r1.loglik_trace,
                  "seed indices decorrelate runs");

    // summary json over two records
    const std::string dir_file = "test_experiment_summary.json";
    write_summary_json(dir_file, {r1, r3});
    std::ifstream in(dir_file);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string summary = ss.str();
    checks::check(summary.find("\"ser\"") != std::string::npos &&
                      summary.find("\"p50\"") != std::string::npos,
                  "the summary carries box statistics per metric");
    std::remove(dir_file.c_str());
}

int main() {
    config_round_trip();
    overrides_and_field_values();
    preset_catalog();
    ser_and_csv();
    runrecord_round_trip();
    tiny_run_determinism();
    return checks::summary("experiment");
}
