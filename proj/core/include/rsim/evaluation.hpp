#pragma once

// End-to-end evaluation drivers over a feature store. Two protocols:
//   retrieval: each query ranks the whole store except itself. Measures
//   content-based search quality over everything indexed.
//   matching: each query ranks the held-out test split, itself included, so
//   a sound scorer should put the query's own record first.
// Queries are always drawn from the test side of a stratified split of the
// store, optionally capped per class (seeded sample).

#include <cstdint>
#include <string>
#include <vector>

#include "rsim/feature_store.hpp"
#include "rsim/metrics.hpp"
#include "rsim/retrieval.hpp"
#include "rsim/training.hpp"

namespace rsim {

enum class EvalProtocol { retrieval, matching };

EvalProtocol eval_protocol_from_name(const std::string& name);
std::string to_string(EvalProtocol protocol);

struct EvalOptions {
    EvalProtocol protocol = EvalProtocol::retrieval;
    SplitSpec split;           // train/test split of the store's records
    int queries_per_class = 0; // 0 = every test record queries
    int confusion_depth = 0;   // 0 = smallest own-class candidate count
    std::vector<int> precision_ks = {5, 10, 50, 100, 1000};
};

struct EvalQueryRecord {
    std::string id;
    std::string label;
    std::string top_id;   // best-ranked candidate
    std::string top_label;
    int self_rank = 0;    // 1-based rank of the query's own record; 0 when excluded
};

struct EvalResult {
    MetricsReport report;
    std::vector<EvalQueryRecord> queries;
};

EvalResult run_evaluation(const FeatureStore& store, const Scorer& scorer, const EvalOptions& options);

} // namespace rsim
