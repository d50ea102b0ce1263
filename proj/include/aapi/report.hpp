#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aapi/attacks.hpp"

namespace aapi {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct SummaryRow {
    std::string attack;
    double epsilon = 0.0;
    double mean = 0.0;
    double stderr_ = 0.0;
    int n = 0;
    std::vector<double> per_seed_means;
};

struct RunSummary {
    std::string env_id;
    std::string algorithm;
    std::vector<SummaryRow> rows;
};

inline nlohmann::json summary_to_json(const RunSummary& s) {
    nlohmann::json j;
    j["env"] = s.env_id;
    j["algorithm"] = s.algorithm;
    j["results"] = nlohmann::json::array();
    for (const SummaryRow& r : s.rows)
        j["results"].push_back({{"attack", r.attack},
                                {"epsilon", r.epsilon},
                                {"mean", r.mean},
                                {"stderr", r.stderr_},
                                {"n", r.n},
                                {"per_seed_means", r.per_seed_means}});
    return j;
}

inline RunSummary summary_from_json(const nlohmann::json& j) {
    RunSummary s;
    try {
        s.env_id = j.at("env").get<std::string>();
        s.algorithm = j.at("algorithm").get<std::string>();
        for (const nlohmann::json& r : j.at("results")) {
            SummaryRow row;
            row.attack = r.at("attack").get<std::string>();
            row.epsilon = r.at("epsilon").get<double>();
            row.mean = r.at("mean").get<double>();
            row.stderr_ = r.at("stderr").get<double>();
            row.n = r.at("n").get<int>();
            row.per_seed_means = r.at("per_seed_means").get<std::vector<double>>();
            s.rows.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("summary: ") + e.what());
    }
    return s;
}

/// Text table with one row per attack, lossless for parse_summary_table.
inline std::string render_summary_table(const RunSummary& s) {
    std::ostringstream out;
    out << "# env=" << s.env_id << " algorithm=" << s.algorithm << "\n";
    out << "attack\tepsilon\tmean\tstderr\tn\tper_seed_means\n";
    for (const SummaryRow& r : s.rows) {
        out << r.attack << '\t' << format_double(r.epsilon) << '\t' << format_double(r.mean) << '\t'
            << format_double(r.stderr_) << '\t' << r.n << '\t';
        for (std::size_t i = 0; i < r.per_seed_means.size(); ++i) {
            if (i) out << ',';
            out << format_double(r.per_seed_means[i]);
        }
        out << '\n';
    }
    return out.str();
}

inline RunSummary parse_summary_table(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    RunSummary s;
    if (!std::getline(in, line) || line.rfind("# env=", 0) != 0)
        throw ConfigError("summary table: missing header line");
    std::size_t alg = line.find(" algorithm=");
    if (alg == std::string::npos) throw ConfigError("summary table: missing algorithm tag");
    s.env_id = line.substr(6, alg - 6);
    s.algorithm = line.substr(alg + 11);
    if (!std::getline(in, line)) throw ConfigError("summary table: missing column line");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        SummaryRow row;
        std::string eps, mean, se, n, seeds;
        if (!std::getline(ls, row.attack, '\t') || !std::getline(ls, eps, '\t') ||
            !std::getline(ls, mean, '\t') || !std::getline(ls, se, '\t') ||
            !std::getline(ls, n, '\t'))
            throw ConfigError("summary table: malformed row '" + line + "'");
        std::getline(ls, seeds, '\t');
        row.epsilon = std::stod(eps);
        row.mean = std::stod(mean);
        row.stderr_ = std::stod(se);
        row.n = std::stoi(n);
        std::istringstream ss(seeds);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) row.per_seed_means.push_back(std::stod(item));
        s.rows.push_back(std::move(row));
    }
    return s;
}

struct NScoreRow {
    std::string run;
    std::string attack;
    double epsilon = 0.0;
    double mean_n_score = 0.0;
    double stderr_ = 0.0;
    int n = 0;
};

inline const SummaryRow* find_row(const RunSummary& s, const std::string& attack, double epsilon) {
    for (const SummaryRow& r : s.rows)
        if (r.attack == attack && r.epsilon == epsilon) return &r;
    return nullptr;
}

/// Per-run n-scores against the weak (z0) and strong (z1) baseline runs,
/// matched attack-by-attack; per-seed means are scored then aggregated.
inline std::vector<NScoreRow> n_score_table(const std::vector<std::pair<std::string, RunSummary>>& runs,
                                            const RunSummary& z0, const RunSummary& z1) {
    std::vector<NScoreRow> out;
    for (const auto& [name, run] : runs) {
        for (const SummaryRow& r : run.rows) {
            const SummaryRow* b0 = find_row(z0, r.attack, r.epsilon);
            const SummaryRow* b1 = find_row(z1, r.attack, r.epsilon);
            if (!b0)
                throw ConfigError("report: Z0 baseline has no entry for attack '" + r.attack + "'");
            if (!b1)
                throw ConfigError("report: Z1 baseline has no entry for attack '" + r.attack + "'");
            NScoreRow row;
            row.run = name;
            row.attack = r.attack;
            row.epsilon = r.epsilon;
            std::vector<double> vals = r.per_seed_means;
            if (vals.empty()) vals.push_back(r.mean);
            std::vector<double> scores;
            for (double v : vals) scores.push_back(n_score(v, b0->mean, b1->mean));
            row.n = static_cast<int>(scores.size());
            for (double v : scores) row.mean_n_score += v / row.n;
            if (row.n > 1) {
                double var = 0.0;
                for (double v : scores)
                    var += (v - row.mean_n_score) * (v - row.mean_n_score) / (row.n - 1);
                row.stderr_ = std::sqrt(var / row.n);
            }
            out.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace aapi
