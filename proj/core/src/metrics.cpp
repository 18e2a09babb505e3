#include "rsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rsim/errors.hpp"

namespace rsim {

std::vector<double> penalized_ranks(const std::vector<int>& ranks, int k_limit) {
    if (k_limit < 1) throw ValueError("penalized_ranks: k_limit must be >= 1");
    std::vector<double> out;
    out.reserve(ranks.size());
    for (int r : ranks) {
        if (r < 1) throw ValueError("penalized_ranks: ranks are 1-based");
        out.push_back(r <= k_limit ? static_cast<double>(r) : 1.25 * k_limit);
    }
    return out;
}

double nmrr(const std::vector<int>& relevant_ranks, int ground_truth, int k_limit) {
    if (ground_truth < 1) throw ValueError("nmrr: ground truth size must be >= 1");
    if (static_cast<int>(relevant_ranks.size()) != ground_truth)
        throw ValueError("nmrr: expected " + std::to_string(ground_truth) + " ranks, got " +
                         std::to_string(relevant_ranks.size()));
    const std::vector<double> pr = penalized_ranks(relevant_ranks, k_limit);
    double avr = 0.0;
    for (double r : pr) avr += r;
    avr /= static_cast<double>(ground_truth);
    const double g = ground_truth;
    const double lo = 0.5 * (1.0 + g);          // AVR of a perfect ranking
    const double hi = 1.25 * k_limit;           // AVR when everything is penalized
    return (avr - lo) / (hi - lo);
}

namespace {

std::vector<int> relevant_rank_list(const std::vector<char>& rel) {
    std::vector<int> ranks;
    for (std::size_t i = 0; i < rel.size(); ++i)
        if (rel[i]) ranks.push_back(static_cast<int>(i) + 1);
    return ranks;
}

} // namespace

double nmrr(const std::vector<char>& ranked_relevance) {
    const std::vector<int> ranks = relevant_rank_list(ranked_relevance);
    const int g = static_cast<int>(ranks.size());
    if (g == 0) throw ValueError("nmrr: ranking contains no relevant item");
    return nmrr(ranks, g, 2 * g);
}

double average_precision(const std::vector<char>& ranked_relevance, int ground_truth) {
    if (ground_truth < 1) throw ValueError("average_precision: ground truth size must be >= 1");
    double sum = 0.0;
    int hits = 0;
    for (std::size_t i = 0; i < ranked_relevance.size(); ++i) {
        if (!ranked_relevance[i]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / static_cast<double>(ground_truth);
}

double average_precision(const std::vector<char>& ranked_relevance) {
    int g = 0;
    for (char c : ranked_relevance) g += c ? 1 : 0;
    if (g == 0) throw ValueError("average_precision: ranking contains no relevant item");
    return average_precision(ranked_relevance, g);
}

double precision_at_k(const std::vector<char>& ranked_relevance, int k) {
    if (k < 1) throw ValueError("precision_at_k: k must be >= 1");
    int hits = 0;
    const std::size_t upto = std::min(ranked_relevance.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < upto; ++i) hits += ranked_relevance[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(k);
}

MetricsReport compute_metrics(const std::vector<RankedQuery>& queries,
                              const std::vector<int>& precision_ks, int n_retrieved) {
    if (queries.empty()) throw ValueError("compute_metrics: no queries");

    // Collect the class roster and the default confusion depth.
    std::map<std::string, int> class_queries;
    int min_own = std::numeric_limits<int>::max();
    for (const auto& q : queries) {
        class_queries[q.query_label]; // ensure the class exists even if never retrieved
        int own = 0;
        for (const auto& label : q.ranked_labels) {
            class_queries[label];
            if (label == q.query_label) ++own;
        }
        if (own == 0)
            throw ValueError("compute_metrics: query of class '" + q.query_label +
                             "' has no relevant candidate");
        min_own = std::min(min_own, own);
    }
    if (n_retrieved == 0) n_retrieved = min_own;
    if (n_retrieved < 1) throw ValueError("compute_metrics: n_retrieved must be >= 1");

    MetricsReport rep;
    rep.query_count = queries.size();

    std::vector<std::string> classes;
    classes.reserve(class_queries.size());
    for (const auto& [name, cnt] : class_queries) classes.push_back(name);
    std::map<std::string, std::size_t> class_pos;
    for (std::size_t i = 0; i < classes.size(); ++i) class_pos[classes[i]] = i;

    rep.confusion.classes = classes;
    rep.confusion.n_retrieved = n_retrieved;
    rep.confusion.rows.assign(classes.size(), std::vector<double>(classes.size(), 0.0));
    std::vector<double> row_queries(classes.size(), 0.0);

    std::map<std::string, double> class_nmrr_sum;
    std::map<std::string, int> class_nmrr_cnt;

    for (const auto& q : queries) {
        std::vector<char> rel;
        rel.reserve(q.ranked_labels.size());
        for (const auto& label : q.ranked_labels) rel.push_back(label == q.query_label ? 1 : 0);

        const double qn = nmrr(rel);
        rep.anmrr += qn;
        rep.mean_ap += average_precision(rel);
        for (int k : precision_ks) rep.precision_at[k] += precision_at_k(rel, k);
        class_nmrr_sum[q.query_label] += qn;
        class_nmrr_cnt[q.query_label] += 1;

        const std::size_t row = class_pos.at(q.query_label);
        row_queries[row] += 1.0;
        const std::size_t upto = std::min(q.ranked_labels.size(), static_cast<std::size_t>(n_retrieved));
        for (std::size_t i = 0; i < upto; ++i)
            rep.confusion.rows[row][class_pos.at(q.ranked_labels[i])] += 1.0;
    }

    const auto nq = static_cast<double>(queries.size());
    rep.anmrr /= nq;
    rep.mean_ap /= nq;
    for (auto& [k, v] : rep.precision_at) v /= nq;
    for (const auto& [label, sum] : class_nmrr_sum)
        rep.anmrr_per_class[label] = sum / class_nmrr_cnt[label];

    for (std::size_t r = 0; r < classes.size(); ++r) {
        if (row_queries[r] == 0.0) continue;
        const double denom = row_queries[r] * static_cast<double>(n_retrieved);
        for (auto& cell : rep.confusion.rows[r]) cell = 100.0 * cell / denom;
    }
    return rep;
}

std::string to_text(const MetricsReport& rep) {
    std::ostringstream os;
    char buf[64];
    os << "queries: " << rep.query_count << "\n";
    std::snprintf(buf, sizeof buf, "%.4f", rep.anmrr);
    os << "ANMRR: " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * rep.mean_ap);
    os << "mAP (x100): " << buf << "\n";
    for (const auto& [k, v] : rep.precision_at) {
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
        os << "P@" << k << " (x100): " << buf << "\n";
    }
    os << "per-class ANMRR:\n";
    for (const auto& [label, v] : rep.anmrr_per_class) {
        std::snprintf(buf, sizeof buf, "%.4f", v);
        os << "  " << label << ": " << buf << "\n";
    }
    os << "confusion (top-" << rep.confusion.n_retrieved << " percentages, rows = query class):\n";
    for (std::size_t r = 0; r < rep.confusion.classes.size(); ++r) {
        os << "  " << rep.confusion.classes[r] << ":";
        for (double cell : rep.confusion.rows[r]) {
            std::snprintf(buf, sizeof buf, " %6.1f", cell);
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

std::string to_csv(const MetricsReport& rep) {
    std::ostringstream os;
    char buf[64];
    os << "metric,value\n";
    os << "queries," << rep.query_count << "\n";
    std::snprintf(buf, sizeof buf, "%.10g", rep.anmrr);
    os << "anmrr," << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.10g", rep.mean_ap);
    os << "map," << buf << "\n";
    for (const auto& [k, v] : rep.precision_at) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        os << "p_at_" << k << "," << buf << "\n";
    }
    for (const auto& [label, v] : rep.anmrr_per_class) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        os << "anmrr_class_" << label << "," << buf << "\n";
    }
    os << "confusion_class";
    for (const auto& c : rep.confusion.classes) os << "," << c;
    os << "\n";
    for (std::size_t r = 0; r < rep.confusion.classes.size(); ++r) {
        os << rep.confusion.classes[r];
        for (double cell : rep.confusion.rows[r]) {
            std::snprintf(buf, sizeof buf, "%.10g", cell);
            os << "," << buf;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace rsim
