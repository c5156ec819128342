// Experiment harness: `ber` (modulation error-rate cells vs the semi-analytic
// oracle), `train` (one federated run to a round-metrics CSV), and `sweep`
// (train or the aggregation-error fast path across an axis, plus a summary
// CSV). Every output CSV gets a sidecar copy of the resolved configuration;
// reruns with the same config and seed are byte-identical, for any --jobs.
#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "airfl/channel.hpp"
#include "airfl/config.hpp"
#include "airfl/fl.hpp"
#include "airfl/metrics.hpp"
#include "airfl/modem.hpp"
#include "airfl/rng.hpp"
#include "json.hpp"

namespace {

using airfl::config::RunConfig;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::runtime_error("failed writing " + path);
}

std::string summary_path(const std::string& output) {
    const std::string suffix = ".csv";
    if (output.size() > suffix.size() &&
        output.compare(output.size() - suffix.size(), suffix.size(), suffix) == 0)
        return output.substr(0, output.size() - suffix.size()) + ".summary.csv";
    return output + ".summary.csv";
}

// Options shared by train and sweep: config resolution + --jobs.
struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    std::string output;
    int jobs = 1;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* output_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--preset", preset, "desk | paper-mnist");
        cmd->add_option("--set", sets,
                        "dotted override, e.g. --set transport.order=16");
        seed_opt = cmd->add_option("--seed", seed, "master seed");
        output_opt = cmd->add_option("--output", output, "output CSV path");
        cmd->add_option("--jobs", jobs, "worker threads (results identical)");
    }

    RunConfig resolve() const {
        RunConfig cfg = airfl::config::defaults();
        if (!preset.empty()) airfl::config::apply_preset(cfg, preset);
        if (!config_path.empty()) airfl::config::apply_file(cfg, config_path);
        for (const auto& s : sets) airfl::config::apply_override(cfg, s);
        if (seed_opt && *seed_opt) cfg.params.seed = seed;
        if (output_opt && *output_opt) cfg.output = output;
        if (jobs < 1)
            throw std::invalid_argument("config: --jobs must be >= 1");
        airfl::config::validate(cfg);
        cfg.params.jobs = jobs;
        return cfg;
    }
};

int cmd_ber(const std::vector<int>& orders, const std::vector<double>& snrs,
            std::uint64_t bits, std::uint64_t seed, const std::string& output,
            int jobs) {
    if (bits == 0)
        throw std::invalid_argument("config: ber --bits must be >= 1");
    if (jobs < 1) throw std::invalid_argument("config: --jobs must be >= 1");
    for (int o : orders)
        airfl::modem::Constellation::get(o);  // validates the order
    if (snrs.empty())
        throw std::invalid_argument("config: ber needs at least one --snr");

    struct Cell {
        int order;
        double snr;
        airfl::channel::BerEstimate est;
        double oracle;
    };
    std::vector<Cell> cells;
    for (int o : orders)
        for (double s : snrs) cells.push_back({o, s, {}, 0.0});

    airfl::fl::parallel_for(cells.size(), jobs, [&](std::size_t i) {
        Cell& c = cells[i];
        // Per-cell seed so cells draw independent noise.
        const std::uint64_t cs = airfl::rng::derive_seed(
            {seed, std::uint64_t(c.order),
             std::bit_cast<std::uint64_t>(c.snr)});
        c.est = airfl::channel::measure_ber(c.order, c.snr, bits, cs);
        c.oracle = airfl::channel::rayleigh_ber_oracle(c.order, c.snr);
    });

    nlohmann::json echo;
    echo["command"] = "ber";
    echo["orders"] = orders;
    echo["snrs"] = snrs;
    echo["bits"] = bits;
    echo["seed"] = seed;
    echo["output"] = output;
    write_text(output + ".config.json", echo.dump(2) + "\n");

    std::ofstream f(output, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + output + " for writing");
    f << "order,snr_db,ber,ci_halfwidth,oracle_ber\n";
    char line[256];
    for (const Cell& c : cells) {
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g\n", c.order,
                      c.snr, c.est.ber, c.est.half_width, c.oracle);
        f << line;
        std::printf("ber order=%-3d snr=%6.2f dB: %.6g (oracle %.6g, ±%.2g)\n",
                    c.order, c.snr, c.est.ber, c.oracle, c.est.half_width);
    }
    if (!f) throw std::runtime_error("failed writing " + output);
    std::printf("wrote %s (%zu cells)\n", output.c_str(), cells.size());
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    RunConfig cfg = opts.resolve();
    const auto train = airfl::config::load_train(cfg.dataset, cfg.params.seed);
    const auto test = airfl::config::load_test(cfg.dataset);

    write_text(cfg.output + ".config.json", airfl::config::to_json_text(cfg));
    airfl::metrics::CsvWriter csv(cfg.output);
    const auto rows = airfl::fl::run_training(
        cfg.params, train, test,
        [&](const airfl::metrics::RoundMetrics& r) { csv.write(r); });

    std::printf("train: %d rounds, final accuracy %.4f, l2 %.6g -> %s\n",
                int(rows.size()), rows.back().test_accuracy,
                rows.back().l2_error, cfg.output.c_str());
    return 0;
}

struct SweepResult {
    double value = 0.0;
    int rounds = 0;
    double avg_l2 = 0.0;
    double final_accuracy = 0.0;
    std::uint64_t payload_bits = 0;
    std::uint64_t coded_bits = 0;
    std::uint64_t airtime_symbols = 0;
};

int cmd_sweep(const CommonOpts& opts, const std::string& axis,
              const std::vector<double>& values, const std::string& mode,
              std::size_t grad_size) {
    if (values.empty())
        throw std::invalid_argument("config: sweep needs at least one --value");
    if (mode != "train" && mode != "agg-error")
        throw std::invalid_argument(
            "config: sweep --mode must be train or agg-error");
    if (grad_size == 0)
        throw std::invalid_argument("config: sweep --grad-size must be >= 1");

    RunConfig base = opts.resolve();
    auto apply_axis = [&](RunConfig& cfg, double v) {
        auto integral = [&](const char* what) {
            const int n = int(v);
            if (double(n) != v)
                throw std::invalid_argument(std::string("config: sweep axis ") +
                                            what + " needs integer values");
            return n;
        };
        if (axis == "snr")
            cfg.params.channel.snr_db = v;
        else if (axis == "users")
            cfg.params.clients = integral("users");
        else if (axis == "sparsity")
            cfg.params.scheme.sparsity = v;
        else if (axis == "modulation")
            cfg.params.scheme.order = integral("modulation");
        else
            throw std::invalid_argument(
                "config: sweep --axis must be snr, users, sparsity, or "
                "modulation");
        airfl::config::validate(cfg);
    };
    for (double v : values) {  // validate the whole axis before any work
        RunConfig probe = base;
        apply_axis(probe, v);
    }

    // Datasets are only needed for full training runs.
    airfl::data::Dataset train, test;
    if (mode == "train") {
        train = airfl::config::load_train(base.dataset, base.params.seed);
        test = airfl::config::load_test(base.dataset);
    }

    write_text(base.output + ".config.json", airfl::config::to_json_text(base));
    airfl::metrics::CsvWriter csv(base.output);

    std::vector<SweepResult> summary;
    for (double v : values) {
        RunConfig cfg = base;
        apply_axis(cfg, v);
        std::vector<airfl::metrics::RoundMetrics> rows;
        const auto sink = [&](const airfl::metrics::RoundMetrics& r) {
            csv.write(r);
        };
        if (mode == "train")
            rows = airfl::fl::run_training(cfg.params, train, test, sink);
        else
            rows = airfl::fl::run_aggregation_error(
                cfg.params, grad_size, cfg.params.training.rounds, sink);

        SweepResult s;
        s.value = v;
        s.rounds = int(rows.size());
        double l2_sum = 0.0;
        int l2_n = 0;
        for (const auto& r : rows) {
            if (std::isfinite(r.l2_error)) {
                l2_sum += r.l2_error;
                ++l2_n;
            }
            s.payload_bits += r.payload_bits;
            s.coded_bits += r.coded_bits;
            s.airtime_symbols += r.airtime_symbols;
        }
        s.avg_l2 = l2_n ? l2_sum / double(l2_n)
                        : std::numeric_limits<double>::quiet_NaN();
        s.final_accuracy = rows.back().test_accuracy;
        summary.push_back(s);
        std::printf("sweep %s=%g: avg l2 %.6g over %d rounds\n", axis.c_str(),
                    v, s.avg_l2, s.rounds);
    }

    const std::string spath = summary_path(base.output);
    write_text(spath + ".config.json", airfl::config::to_json_text(base));
    std::ofstream f(spath, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + spath + " for writing");
    f << "axis,value,rounds,avg_l2_error,final_accuracy,payload_bits,"
         "coded_bits,airtime_symbols\n";
    char line[320];
    for (const SweepResult& s : summary) {
        std::snprintf(line, sizeof line,
                      "%s,%.9g,%d,%.9g,%.9g,%" PRIu64 ",%" PRIu64 ",%" PRIu64
                      "\n",
                      axis.c_str(), s.value, s.rounds, s.avg_l2,
                      s.final_accuracy, s.payload_bits, s.coded_bits,
                      s.airtime_symbols);
        f << line;
    }
    if (!f) throw std::runtime_error("failed writing " + spath);
    std::printf("wrote %s and %s\n", base.output.c_str(), spath.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Federated learning over a lossy wireless uplink: approximate "
        "(bit-masking) transport vs exact FEC+retransmission and a naive "
        "baseline.\nData files resolve under $AIRFL_DATA_DIR (default "
        "./data)."};
    app.require_subcommand(1);

    // ber
    std::vector<int> orders = {4, 16, 256};
    std::vector<double> snrs = {0.0, 10.0, 20.0};
    std::uint64_t bits = 10'000'000;
    std::uint64_t ber_seed = 1;
    std::string ber_output = "ber.csv";
    int ber_jobs = 1;
    auto* ber = app.add_subcommand(
        "ber", "Monte-Carlo bit error rate per (modulation, SNR) cell");
    ber->add_option("--order", orders, "modulation orders (4/16/256)");
    ber->add_option("--snr", snrs, "SNR values in dB");
    ber->add_option("--bits", bits, "payload bits per cell");
    ber->add_option("--seed", ber_seed, "master seed");
    ber->add_option("--output", ber_output, "output CSV path");
    ber->add_option("--jobs", ber_jobs, "worker threads (results identical)");

    // train
    auto* tr = app.add_subcommand("train", "one federated training run");
    CommonOpts tr_opts;
    tr_opts.attach(tr);

    // sweep
    auto* sw = app.add_subcommand(
        "sweep", "repeat train or an aggregation-error fast path over an axis");
    CommonOpts sw_opts;
    sw_opts.attach(sw);
    std::string axis = "snr";
    std::vector<double> values;
    std::string mode = "agg-error";
    std::size_t grad_size = 1024;
    sw->add_option("--axis", axis, "snr | users | sparsity | modulation");
    sw->add_option("--value", values, "axis values")->required();
    sw->add_option("--mode", mode,
                   "train (full runs) or agg-error (synthetic-gradient fast "
                   "path, default)");
    sw->add_option("--grad-size", grad_size,
                   "synthetic gradient length for agg-error mode");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ber->parsed())
            return cmd_ber(orders, snrs, bits, ber_seed, ber_output, ber_jobs);
        if (tr->parsed()) return cmd_train(tr_opts);
        return cmd_sweep(sw_opts, axis, values, mode, grad_size);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
