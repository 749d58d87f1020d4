#pragma once

// Experiment config files, the records CSV and the summary JSON.
//
// Config files are INI-style with three sections:
//
//   [process]     type = bernoulli | markov | hmm, plus
//                 p = <prob>                               (bernoulli)
//                 order = <r>, kernel = <2^r probs>        (markov; context bits oldest-first, newest is LSB)
//                 transition = <row>; <row>; ...           (hmm)
//                 emission = <S probs>
//   [experiment]  runs, master_seed, k_max, max_steps, epsilon, marginal_depth, smb_length, smb_runs
//   [output]      records, summary, trace                  (file paths)
//
// Any key can be overridden with "section.key=value".

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "processes.hpp"

namespace forecast_lab {

struct OutputPaths {
    std::string records;
    std::string summary;
    std::string trace;
};

struct LoadedConfig {
    ExperimentConfig experiment;
    SmbOptions smb;
    OutputPaths output;
};

/// Decimal text with 12 significant digits, the precision used in every CSV field.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace detail {

inline std::vector<double> parse_reals(std::string_view text, const std::string& key) {
    std::vector<double> out;
    std::string cleaned(text);
    for (char& c : cleaned)
        if (c == ',') c = ' ';
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + tok + "' in " + key);
        }
    }
    return out;
}

template <class T>
T get_value(const boost::property_tree::ptree& pt, const std::string& path, T fallback) {
    const auto node = pt.get_optional<std::string>(path);
    if (!node) return fallback;
    if constexpr (std::is_unsigned_v<T>)
        if (node->find('-') != std::string::npos) throw ConfigError("negative value for " + path);
    std::istringstream in(*node);
    T v{};
    if (!(in >> v) || !(in >> std::ws).eof()) throw ConfigError("bad value for " + path + ": '" + *node + "'");
    return v;
}

inline ProcessSpec parse_process(const boost::property_tree::ptree& pt) {
    const auto type = pt.get_optional<std::string>("process.type");
    if (!type) throw ConfigError("missing process.type");
    try {
        if (*type == "bernoulli") {
            return ProcessSpec::bernoulli(get_value<double>(pt, "process.p", std::nan("")));
        }
        if (*type == "markov") {
            const auto order = get_value<std::size_t>(pt, "process.order", 0);
            const auto kernel = parse_reals(pt.get<std::string>("process.kernel", ""), "process.kernel");
            return ProcessSpec::markov(order, kernel);
        }
        if (*type == "hmm") {
            const std::string text = pt.get<std::string>("process.transition", "");
            std::vector<std::vector<double>> rows;
            std::istringstream in(text);
            std::string row;
            while (std::getline(in, row, ';'))
                if (row.find_first_not_of(" \t") != std::string::npos) rows.push_back(parse_reals(row, "process.transition"));
            const auto emission = parse_reals(pt.get<std::string>("process.emission", ""), "process.emission");
            const auto n = static_cast<Eigen::Index>(rows.size());
            Matrix t(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
                    throw ConfigError("process.transition must be square");
                for (Eigen::Index j = 0; j < n; ++j) t(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
            return ProcessSpec::hmm(std::move(t), emission);
        }
    } catch (const InvalidSpec& e) {
        throw ConfigError(std::string("invalid process: ") + e.what());
    } catch (const NotIrreducible& e) {
        throw ConfigError(std::string("invalid process: ") + e.what());
    }
    throw ConfigError("unknown process.type '" + *type + "'");
}

}  // namespace detail

/// Applies "section.key=value" overrides.
inline void apply_overrides(boost::property_tree::ptree& pt, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like section.key=value: " + o);
        std::string key = o.substr(0, eq);
        std::string value = o.substr(eq + 1);
        if (key.find('.') == std::string::npos) throw ConfigError("override key needs a section: " + key);
        pt.put(key, value);
    }
}

inline LoadedConfig parse_config(std::istream& in, const std::vector<std::string>& overrides = {}) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    apply_overrides(pt, overrides);

    LoadedConfig cfg;
    using detail::get_value;
    auto& ex = cfg.experiment;
    ex.spec = detail::parse_process(pt);
    ex.runs = get_value<std::size_t>(pt, "experiment.runs", ex.runs);
    ex.master_seed = get_value<std::uint64_t>(pt, "experiment.master_seed", ex.master_seed);
    ex.k_max = get_value<std::size_t>(pt, "experiment.k_max", ex.k_max);
    ex.max_steps = get_value<std::uint64_t>(pt, "experiment.max_steps", ex.max_steps);
    ex.epsilon = get_value<double>(pt, "experiment.epsilon", ex.epsilon);
    ex.marginal_depth = get_value<std::size_t>(pt, "experiment.marginal_depth", ex.marginal_depth);
    cfg.smb.length = get_value<std::size_t>(pt, "experiment.smb_length", cfg.smb.length);
    cfg.smb.runs = get_value<std::size_t>(pt, "experiment.smb_runs", cfg.smb.runs);
    cfg.output.records = pt.get<std::string>("output.records", "");
    cfg.output.summary = pt.get<std::string>("output.summary", "");
    cfg.output.trace = pt.get<std::string>("output.trace", "");
    ex.validate();
    return cfg;
}

inline LoadedConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in, overrides);
}

/// [process] section for a spec, probabilities written with 17 significant digits.
inline std::string format_process_section(const ProcessSpec& spec) {
    auto real = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto join = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + real(v[i]);
        return s;
    };
    std::string out = "[process]\n";
    if (const auto* b = std::get_if<Bernoulli>(&spec.variant())) {
        out += "type = bernoulli\np = " + real(b->p) + "\n";
    } else if (const auto* mc = std::get_if<MarkovChain>(&spec.variant())) {
        out += "type = markov\norder = " + std::to_string(mc->order) + "\nkernel = " + join(mc->kernel) + "\n";
    } else {
        const auto& h = std::get<BinaryHMM>(spec.variant());
        out += "type = hmm\ntransition = ";
        for (Eigen::Index i = 0; i < h.transition.rows(); ++i) {
            std::vector<double> row(h.transition.row(i).begin(), h.transition.row(i).end());
            out += (i ? "; " : "") + join(row);
        }
        out += "\nemission = " + join(h.emission) + "\n";
    }
    return out;
}

inline constexpr std::string_view kRecordsHeader =
    "run_id,seed,k,zeta_k,eta_k,g_k,oracle_p,abs_err,growth,gamma_partial,truncated";

inline void write_record_row(std::ostream& out, const ExperimentRecord& r) {
    out << r.run_id << ',' << r.seed << ',' << r.k << ',' << r.zeta_k << ',' << r.eta_k << ',' << format_real(r.g_k)
        << ',' << format_real(r.oracle_p) << ',' << format_real(r.abs_err) << ',' << format_real(r.growth) << ','
        << format_real(r.gamma_partial) << ',' << (r.truncated ? 1 : 0) << '\n';
}

/// Records CSV in (run_id, k) order. A truncated run that completed no level
/// still gets a marker row with k = 0 and nan statistics.
inline void write_records_csv(std::ostream& out, const std::vector<RunResult>& runs) {
    out << kRecordsHeader << '\n';
    std::vector<const RunResult*> ordered;
    for (const auto& r : runs) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->run_id < b->run_id; });
    for (const auto* run : ordered) {
        for (const auto& rec : run->records) write_record_row(out, rec);
        if (run->records.empty()) {
            ExperimentRecord marker;
            marker.run_id = run->run_id;
            marker.seed = run->seed;
            marker.g_k = marker.oracle_p = marker.abs_err = marker.growth = marker.gamma_partial = std::nan("");
            marker.truncated = run->truncated;
            write_record_row(out, marker);
        }
    }
}

inline std::string records_csv(const std::vector<RunResult>& runs) {
    std::ostringstream out;
    write_records_csv(out, runs);
    return out.str();
}

inline nlohmann::json summary_json(const SummaryStats& s) {
    using nlohmann::json;
    json j;
    j["entropy_rate"] = s.entropy.rate;
    j["entropy_ci"] = s.entropy.ci_halfwidth;

    j["error_curve"] = json::array();
    for (const auto& p : s.error_curve)
        j["error_curve"].push_back(
            {{"k", p.k}, {"mean_abs_err", p.mean_abs_err}, {"median_abs_err", p.median_abs_err}, {"count", p.count}});

    j["growth"] = json::array();
    for (const auto& g : s.growth)
        j["growth"].push_back({{"k", g.k},
                               {"violation_fraction", g.violation_fraction},
                               {"q05", g.q05},
                               {"q25", g.q25},
                               {"median", g.median},
                               {"q75", g.q75},
                               {"q95", g.q95},
                               {"count", g.count}});

    j["martingale"] = json::array();
    j["martingale_skipped_levels"] = json::array();
    if (s.martingale) {
        for (const auto& p : s.martingale->points) {
            json ex = json::array();
            for (const auto& e : p.exceedances)
                ex.push_back({{"epsilon", e.epsilon},
                              {"frequency", e.frequency},
                              {"envelope", e.envelope},
                              {"slack", e.slack},
                              {"within", e.within}});
            j["martingale"].push_back(
                {{"k", p.k}, {"mean_abs_gamma", p.mean_abs_gamma}, {"count", p.count}, {"exceedances", ex}});
        }
        j["martingale_skipped_levels"] = s.martingale->skipped_levels;
    }

    j["tv_check"] = json::array();
    if (s.tv) j["tv_check"].push_back({{"block_length", s.tv->block_length}, {"samples", s.tv->samples}, {"tv", s.tv->tv}});

    j["completion"] = json::array();
    for (const auto& c : s.completion)
        j["completion"].push_back({{"k", c.k}, {"completed", c.completed}, {"fraction", c.fraction}});
    return j;
}

}  // namespace forecast_lab
