#pragma once

// Rank-based retrieval quality measures. All take rankings best-first.
// Conventions, for a query q with G(q) relevant candidates:
//   penalty window K(q) = 2 * G(q); a relevant item ranked past K counts
//   as rank 1.25 * K.
//   NMRR(q) = (AVR - 0.5 * (1 + G)) / (1.25 * K - 0.5 * (1 + G)), where AVR
//   is the mean penalized rank; 0 is perfect, 1 is worst. ANMRR averages
//   NMRR over queries.
//   AP divides the precision sum by G(q), so relevant items missing from a
//   truncated ranking cost their full share. mAP is stored in [0,1] and
//   conventionally displayed x100.
//   P@k divides by k even when fewer than k candidates exist.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rsim {

// Applies the late-rank penalty: ranks (1-based) beyond k_limit become
// 1.25 * k_limit.
std::vector<double> penalized_ranks(const std::vector<int>& ranks, int k_limit);

// relevant_ranks: 1-based ranks of every relevant item (any order);
// ground_truth = G(q), k_limit = K(q).
double nmrr(const std::vector<int>& relevant_ranks, int ground_truth, int k_limit);
// Infers ranks and G from a best-first relevance list; K = 2G.
double nmrr(const std::vector<char>& ranked_relevance);

double average_precision(const std::vector<char>& ranked_relevance, int ground_truth);
double average_precision(const std::vector<char>& ranked_relevance); // G = total relevant

double precision_at_k(const std::vector<char>& ranked_relevance, int k);

// Row-stochastic percentage matrix: rows/cols follow `classes` (sorted);
// rows[i][j] = percentage of the top-n retrievals for class-i queries that
// belonged to class j. Rows of classes that received queries sum to 100
// when every query has at least n candidates.
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<double>> rows;
    int n_retrieved = 0;
};

// One evaluated query: its class plus the candidate classes best-first.
struct RankedQuery {
    std::string query_label;
    std::vector<std::string> ranked_labels;
};

struct MetricsReport {
    std::size_t query_count = 0;
    double anmrr = 0.0;
    double mean_ap = 0.0; // [0,1]
    std::map<int, double> precision_at;        // k -> mean P@k
    std::map<std::string, double> anmrr_per_class;
    ConfusionMatrix confusion;
};

// Aggregates every measure over the queries. n_retrieved 0 picks the
// default confusion depth: the smallest own-class candidate count any query
// sees. Queries must be non-empty.
MetricsReport compute_metrics(const std::vector<RankedQuery>& queries,
                              const std::vector<int>& precision_ks = {5, 10, 50, 100, 1000},
                              int n_retrieved = 0);

// Human-readable multi-line summary (mAP and precision shown x100).
std::string to_text(const MetricsReport& report);
// Flat machine-readable form: metric,value rows, then confusion rows.
std::string to_csv(const MetricsReport& report);

} // namespace rsim
