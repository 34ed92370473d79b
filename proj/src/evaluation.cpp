#include "tmc/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "tmc/errors.hpp"

namespace tmc {

namespace {

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

TruthTable truth_table(const std::vector<TruthEntry>& entries) {
    TruthTable table;
    for (const auto& [id, mode] : entries) {
        if (!table.emplace(id, mode).second)
            throw DataError("truth table: duplicate record_id " + std::to_string(id));
    }
    return table;
}

MetricsReport score(const std::vector<Prediction>& predictions, const TruthTable& truth) {
    if (predictions.empty()) throw DataError("score: no predictions");
    std::set<std::int64_t> seen;
    MetricsReport report;
    report.n = predictions.size();

    for (const auto& p : predictions) {
        if (!seen.insert(p.query_doc_id).second)
            throw DataError("score: duplicate prediction for id " +
                            std::to_string(p.query_doc_id));
        auto it = truth.find(p.query_doc_id);
        if (it == truth.end())
            throw DataError("score: no ground truth for id " + std::to_string(p.query_doc_id));
        ++report.confusion[mode_index(it->second)][mode_index(p.mode)];
        if (p.fallback_used) ++report.fallback_count;
    }

    std::size_t correct = 0;
    for (int c = 0; c < kNumModes; ++c) correct += report.confusion[c][c];
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n);

    for (int c = 0; c < kNumModes; ++c) {
        std::size_t tp = report.confusion[c][c];
        std::size_t fn = 0, fp = 0;
        for (int o = 0; o < kNumModes; ++o) {
            if (o == c) continue;
            fn += report.confusion[c][o];
            fp += report.confusion[o][c];
        }
        ClassMetrics& m = report.per_class[c];
        m.support = tp + fn;
        if (tp + fp == 0) {
            m.precision = 0.0;
            m.zero_division = true;
        } else {
            m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        }
        if (tp + fn == 0) {
            m.recall = 0.0;
            m.zero_division = true;
        } else {
            m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;

        double weight = static_cast<double>(m.support) / static_cast<double>(report.n);
        report.weighted_precision += weight * m.precision;
        report.weighted_recall += weight * m.recall;
        report.weighted_f1 += weight * m.f1;
    }
    return report;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    j["accuracy"] = accuracy;
    j["weighted_precision"] = weighted_precision;
    j["weighted_recall"] = weighted_recall;
    j["weighted_f1"] = weighted_f1;
    j["n"] = n;
    j["fallback_count"] = fallback_count;
    nlohmann::json per;
    for (int c = 0; c < kNumModes; ++c) {
        const ClassMetrics& m = per_class[c];
        per[std::string(to_string(kModeOrder[c]))] = {
            {"precision", m.precision}, {"recall", m.recall},          {"f1", m.f1},
            {"support", m.support},     {"zero_division", m.zero_division}};
    }
    j["per_class"] = std::move(per);
    nlohmann::json conf = nlohmann::json::array();
    for (int r = 0; r < kNumModes; ++r) conf.push_back(confusion[r]);
    j["confusion"] = std::move(conf);
    return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.weighted_precision = j.at("weighted_precision").get<double>();
    r.weighted_recall = j.at("weighted_recall").get<double>();
    r.weighted_f1 = j.at("weighted_f1").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.fallback_count = j.at("fallback_count").get<std::size_t>();
    for (int c = 0; c < kNumModes; ++c) {
        const auto& m = j.at("per_class").at(std::string(to_string(kModeOrder[c])));
        r.per_class[c].precision = m.at("precision").get<double>();
        r.per_class[c].recall = m.at("recall").get<double>();
        r.per_class[c].f1 = m.at("f1").get<double>();
        r.per_class[c].support = m.at("support").get<std::size_t>();
        r.per_class[c].zero_division = m.at("zero_division").get<bool>();
    }
    for (int row = 0; row < kNumModes; ++row)
        r.confusion[row] = j.at("confusion").at(row).get<std::array<std::size_t, kNumModes>>();
    return r;
}

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    out << "n=" << n << "  accuracy=" << fmt3(accuracy) << "  f1=" << fmt3(weighted_f1)
        << "  recall=" << fmt3(weighted_recall) << "  precision=" << fmt3(weighted_precision)
        << "  fallbacks=" << fallback_count << "\n";
    out << "class                precision  recall     f1         support\n";
    for (int c = 0; c < kNumModes; ++c) {
        const ClassMetrics& m = per_class[c];
        char line[128];
        std::snprintf(line, sizeof(line), "%-20s %-10s %-10s %-10s %zu%s\n",
                      std::string(to_string(kModeOrder[c])).c_str(), fmt3(m.precision).c_str(),
                      fmt3(m.recall).c_str(), fmt3(m.f1).c_str(), m.support,
                      m.zero_division ? "  (zero-division)" : "");
        out << line;
    }
    out << "confusion (rows=true, cols=predicted; Drive Walk Transit Bike/Micromobility):\n";
    for (int r = 0; r < kNumModes; ++r) {
        for (int c = 0; c < kNumModes; ++c) out << (c ? " " : "  ") << confusion[r][c];
        out << "\n";
    }
    return out.str();
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "metric,value\n";
    out << "accuracy," << fmt3(accuracy) << "\n";
    out << "weighted_f1," << fmt3(weighted_f1) << "\n";
    out << "weighted_recall," << fmt3(weighted_recall) << "\n";
    out << "weighted_precision," << fmt3(weighted_precision) << "\n";
    out << "n," << n << "\n";
    out << "fallback_count," << fallback_count << "\n";
    return out.str();
}

ComparisonTable compare(std::vector<ComparisonRow> rows) {
    if (rows.empty()) throw DataError("compare: need at least one report");
    return ComparisonTable{std::move(rows)};
}

namespace {

struct BestFlags {
    std::size_t accuracy = 0, f1 = 0, recall = 0, precision = 0;
};

BestFlags find_best(const std::vector<ComparisonRow>& rows) {
    BestFlags best;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const MetricsReport& r = rows[i].report;
        if (r.accuracy > rows[best.accuracy].report.accuracy) best.accuracy = i;
        if (r.weighted_f1 > rows[best.f1].report.weighted_f1) best.f1 = i;
        if (r.weighted_recall > rows[best.recall].report.weighted_recall) best.recall = i;
        if (r.weighted_precision > rows[best.precision].report.weighted_precision)
            best.precision = i;
    }
    return best;
}

}  // namespace

std::string ComparisonTable::to_text() const {
    BestFlags best = find_best(rows);
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-36s %-10s %-10s %-10s %-10s\n", "run", "accuracy",
                  "f1", "recall", "precision");
    out << line;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MetricsReport& r = rows[i].report;
        auto cell = [&](double v, bool flag) { return fmt3(v) + (flag ? "*" : ""); };
        std::snprintf(line, sizeof(line), "%-36s %-10s %-10s %-10s %-10s\n",
                      rows[i].name.c_str(), cell(r.accuracy, i == best.accuracy).c_str(),
                      cell(r.weighted_f1, i == best.f1).c_str(),
                      cell(r.weighted_recall, i == best.recall).c_str(),
                      cell(r.weighted_precision, i == best.precision).c_str());
        out << line;
    }
    out << "(* = best value per column)\n";
    return out.str();
}

std::string ComparisonTable::to_csv() const {
    BestFlags best = find_best(rows);
    std::ostringstream out;
    out << "run,accuracy,f1,recall,precision,best_accuracy\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MetricsReport& r = rows[i].report;
        out << rows[i].name << "," << fmt3(r.accuracy) << "," << fmt3(r.weighted_f1) << ","
            << fmt3(r.weighted_recall) << "," << fmt3(r.weighted_precision) << ","
            << (i == best.accuracy ? 1 : 0) << "\n";
    }
    return out.str();
}

nlohmann::json ComparisonTable::to_json() const {
    BestFlags best = find_best(rows);
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MetricsReport& r = rows[i].report;
        j.push_back({{"run", rows[i].name},
                     {"accuracy", r.accuracy},
                     {"f1", r.weighted_f1},
                     {"recall", r.weighted_recall},
                     {"precision", r.weighted_precision},
                     {"best_accuracy", i == best.accuracy}});
    }
    return j;
}

}  // namespace tmc
