// forecast_lab: command-line front end.
//
//   forecast_lab simulate   --config F [--set s.k=v]... [--seed N] [--output trace.csv]
//   forecast_lab experiment --config F [--set s.k=v]... [--seed N] [--jobs N] [--records F] [--summary F]
//   forecast_lab entropy    --config F [--set s.k=v]...
//   forecast_lab verify
//
// Exit codes: 0 success, 2 config error, 3 search budget exceeded, 4 verification failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "forecast_lab/forecast_lab.hpp"

namespace fl = forecast_lab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;
constexpr int kExitVerify = 4;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

fl::LoadedConfig load(const CommonArgs& args) {
    auto cfg = fl::load_config(args.config_path, args.overrides);
    if (args.seed) {
        cfg.experiment.master_seed = *args.seed;
    } else if (const char* env = std::getenv("FORECAST_LAB_SEED")) {
        try {
            std::size_t used = 0;
            const std::string text(env);
            cfg.experiment.master_seed = std::stoull(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
        } catch (const std::exception&) {
            throw fl::ConfigError(std::string("bad FORECAST_LAB_SEED: ") + env);
        }
    }
    return cfg;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fl::ConfigError("cannot write " + path);
    out << content;
}

std::string block_text(const fl::BitSequence& bits, std::uint64_t end, std::size_t len) {
    constexpr std::size_t kShown = 32;
    std::string s;
    if (len > kShown) s = "...";
    const std::size_t shown = std::min(len, kShown);
    for (std::uint64_t i = end + 1 - shown; i <= end; ++i) s += bits[i] ? '1' : '0';
    return s;
}

int cmd_simulate(const CommonArgs& args, const std::string& output) {
    const auto cfg = load(args);
    const auto& ex = cfg.experiment;
    const std::uint64_t seed = fl::derive_run_seed(ex.master_seed, 0);

    std::ostringstream trace;
    trace << "# seed " << seed << "\n";
    char line[512];
    std::snprintf(line, sizeof line, "# %4s %10s %12s %-35s %4s %-14s %-14s %s\n", "k", "eta", "zeta", "block",
                  "succ", "g", "oracle_p", "abs_err");
    trace << line;
    auto observer = [&](const fl::ForwardScheme& scheme, const fl::ExperimentRecord& r) {
        std::snprintf(line, sizeof line, "  %4zu %10llu %12llu %-35s %4d %-14s %-14s %s\n", r.k,
                      static_cast<unsigned long long>(r.eta_k), static_cast<unsigned long long>(r.zeta_k),
                      block_text(scheme.bits(), r.zeta_k, r.k).c_str(), static_cast<int>(r.successor),
                      fl::format_real(r.g_k).c_str(), fl::format_real(r.oracle_p).c_str(),
                      fl::format_real(r.abs_err).c_str());
        trace << line;
    };
    const auto run = fl::run_single(ex.spec, 0, seed, ex.k_max, ex.max_steps, observer);
    if (run.truncated) trace << "# search budget exceeded at level " << run.failed_level << "\n";
    std::cout << trace.str();

    const std::string csv_path = output.empty() ? cfg.output.trace : output;
    if (!csv_path.empty()) write_file(csv_path, fl::records_csv({run}));
    return run.truncated ? kExitBudget : 0;
}

int cmd_experiment(const CommonArgs& args, std::size_t jobs, const std::string& records_out,
                   const std::string& summary_out) {
    const auto cfg = load(args);
    const auto& ex = cfg.experiment;
    const auto runs = fl::run_experiment_runs(ex, jobs == 0 ? fl::default_jobs() : jobs);

    const std::string records_path = records_out.empty() ? cfg.output.records : records_out;
    const std::string summary_path = summary_out.empty() ? cfg.output.summary : summary_out;
    if (!records_path.empty()) write_file(records_path, fl::records_csv(runs));

    const auto summary = fl::summarize(ex, runs, cfg.smb);
    auto json = fl::summary_json(summary);
    json["master_seed"] = ex.master_seed;
    json["runs"] = ex.runs;
    json["k_max"] = ex.k_max;
    if (!summary_path.empty()) write_file(summary_path, json.dump(2) + "\n");

    std::size_t complete = 0;
    for (const auto& r : runs)
        if (!r.truncated) ++complete;
    std::cout << "runs " << ex.runs << ", completed level " << ex.k_max << ": " << complete << "\n";
    std::cout << "entropy rate " << fl::format_real(summary.entropy.rate) << " +/- "
              << fl::format_real(summary.entropy.ci_halfwidth) << "\n";
    if (!summary.error_curve.empty()) {
        const auto& last = summary.error_curve.back();
        std::cout << "mean |g_k - p| at k=" << last.k << ": " << fl::format_real(last.mean_abs_err) << "\n";
    }
    if (summary.tv)
        std::cout << "tilde " << summary.tv->block_length << "-block TV: " << fl::format_real(summary.tv->tv) << "\n";
    if (summary_path.empty()) std::cout << json.dump(2) << "\n";

    return 10 * complete >= 9 * ex.runs ? 0 : kExitBudget;
}

int cmd_entropy(const CommonArgs& args) {
    const auto cfg = load(args);
    const auto h = fl::entropy_rate(cfg.experiment.spec, cfg.smb);
    std::cout << "entropy_rate " << fl::format_real(h.rate) << "\n"
              << "entropy_ci " << fl::format_real(h.ci_halfwidth) << "\n";
    return 0;
}

int cmd_verify() {
    bool ok = true;
    for (const auto& suite : fl::verify::run_all()) {
        std::cout << (suite.passed() ? "PASS " : "FAIL ") << suite.name << " (" << suite.cases << " cases, "
                  << suite.failures << " failures)";
        if (!suite.passed() && !suite.first_failure.empty()) std::cout << " first: " << suite.first_failure;
        std::cout << "\n";
        ok = ok && suite.passed();
    }
    return ok ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation lab for recurrence-time forecasting of binary time series"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string sim_output;
    std::size_t jobs = 0;
    std::string records_out;
    std::string summary_out;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config_path, "Experiment config file")->required();
        sub->add_option("--set", common.overrides, "Override a config key: section.key=value");
        sub->add_option("--seed", common.seed, "Master seed (overrides FORECAST_LAB_SEED and the config)");
    };

    auto* simulate = app.add_subcommand("simulate", "Trace one trajectory level by level");
    add_common(simulate);
    simulate->add_option("-o,--output", sim_output, "CSV output path");

    auto* experiment = app.add_subcommand("experiment", "Run all seeds and write records CSV and summary JSON");
    add_common(experiment);
    experiment->add_option("-j,--jobs", jobs, "Worker threads (default: available cores)");
    experiment->add_option("--records", records_out, "Records CSV path");
    experiment->add_option("--summary", summary_out, "Summary JSON path");

    auto* entropy = app.add_subcommand("entropy", "Print the entropy rate of the configured process");
    add_common(entropy);

    auto* verify = app.add_subcommand("verify", "Run the exact invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*simulate) return cmd_simulate(common, sim_output);
        if (*experiment) return cmd_experiment(common, jobs, records_out, summary_out);
        if (*entropy) return cmd_entropy(common);
        if (*verify) return cmd_verify();
    } catch (const fl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
