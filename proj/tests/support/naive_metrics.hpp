#pragma once

// Brute-force reference implementations of the retrieval measures, written
// directly from their definitions and kept deliberately independent of the
// library code they cross-check. Relevance lists are best-first; G is the
// number of relevant entries in the list and K = 2G.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace testsupport {

inline int naive_relevant_count(const std::vector<char>& rel) {
    int g = 0;
    for (std::size_t i = 0; i < rel.size(); ++i)
        if (rel[i]) ++g;
    return g;
}

inline double naive_nmrr(const std::vector<char>& rel) {
    const int g = naive_relevant_count(rel);
    const int k = 2 * g;
    double avr = 0.0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
        if (!rel[i]) continue;
        const double rank = static_cast<double>(i + 1);
        avr += (rank <= k) ? rank : 1.25 * k;
    }
    avr /= g;
    const double best = 0.5 * (1.0 + g);
    return (avr - best) / (1.25 * k - best);
}

inline double naive_ap(const std::vector<char>& rel) {
    const int g = naive_relevant_count(rel);
    double sum = 0.0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
        if (!rel[i]) continue;
        int hits = 0;
        for (std::size_t j = 0; j <= i; ++j)
            if (rel[j]) ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / g;
}

inline double naive_p_at_k(const std::vector<char>& rel, int k) {
    int hits = 0;
    for (std::size_t i = 0; i < rel.size() && i < static_cast<std::size_t>(k); ++i)
        if (rel[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

struct NaiveAggregate {
    double anmrr = 0.0;
    double mean_ap = 0.0;
    std::map<int, double> p_at;
    std::map<std::string, double> anmrr_per_class;
};

inline NaiveAggregate naive_aggregate(const std::vector<std::string>& query_labels,
                                      const std::vector<std::vector<std::string>>& rankings,
                                      const std::vector<int>& ks) {
    NaiveAggregate agg;
    std::map<std::string, double> class_sum;
    std::map<std::string, int> class_cnt;
    for (std::size_t q = 0; q < query_labels.size(); ++q) {
        std::vector<char> rel;
        for (const std::string& l : rankings[q]) rel.push_back(l == query_labels[q] ? 1 : 0);
        const double n = naive_nmrr(rel);
        agg.anmrr += n;
        agg.mean_ap += naive_ap(rel);
        for (int k : ks) agg.p_at[k] += naive_p_at_k(rel, k);
        class_sum[query_labels[q]] += n;
        class_cnt[query_labels[q]] += 1;
    }
    const double nq = static_cast<double>(query_labels.size());
    agg.anmrr /= nq;
    agg.mean_ap /= nq;
    for (auto& [k, v] : agg.p_at) v /= nq;
    for (const auto& [label, sum] : class_sum)
        agg.anmrr_per_class[label] = sum / class_cnt[label];
    return agg;
}

} // namespace testsupport
