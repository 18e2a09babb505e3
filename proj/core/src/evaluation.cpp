#include "rsim/evaluation.hpp"

#include <algorithm>

#include "rsim/errors.hpp"

namespace rsim {

EvalProtocol eval_protocol_from_name(const std::string& name) {
    if (name == "retrieval") return EvalProtocol::retrieval;
    if (name == "matching") return EvalProtocol::matching;
    throw ValueError("unknown protocol '" + name + "' (expected retrieval or matching)");
}

std::string to_string(EvalProtocol protocol) {
    return protocol == EvalProtocol::retrieval ? "retrieval" : "matching";
}

EvalResult run_evaluation(const FeatureStore& store, const Scorer& scorer, const EvalOptions& opt) {
    if (store.empty()) throw ValueError("evaluation: empty feature store");
    if (opt.queries_per_class < 0) throw ValueError("evaluation: queries_per_class must be >= 0");

    const std::vector<std::string> labels = store.labels();
    const DatasetSplit split = split_indices(labels, opt.split);
    const std::vector<std::size_t>& test = split.test;

    // Query pick: per class (sorted order), the class's test records,
    // seeded-shuffled and capped when queries_per_class is set.
    std::vector<std::size_t> queries;
    std::uint64_t class_ordinal = 0;
    for (const auto& [label, members] : store.label_index()) {
        std::vector<std::size_t> in_test;
        std::set_intersection(members.begin(), members.end(), test.begin(), test.end(),
                              std::back_inserter(in_test));
        if (opt.queries_per_class > 0 && in_test.size() > static_cast<std::size_t>(opt.queries_per_class)) {
            Rng rng(mix_seed(opt.split.seed, 4, class_ordinal));
            rng.shuffle(in_test);
            in_test.resize(static_cast<std::size_t>(opt.queries_per_class));
            std::sort(in_test.begin(), in_test.end());
        }
        queries.insert(queries.end(), in_test.begin(), in_test.end());
        ++class_ordinal;
    }
    if (queries.empty()) throw ValueError("evaluation: split produced no queries");

    EvalResult res;
    res.queries.reserve(queries.size());
    std::vector<RankedQuery> ranked_queries;
    ranked_queries.reserve(queries.size());

    for (std::size_t qi : queries) {
        const FeatureRecord& qrec = store.record(qi);
        const Tensor qfeat = store.features_as_tensor(qi);

        std::vector<RankedMatch> ranking;
        if (opt.protocol == EvalProtocol::retrieval)
            ranking = rank_all(store, qfeat, scorer, qrec.id);
        else
            ranking = rank_candidates(store, qfeat, scorer, test);
        if (ranking.empty()) throw ValueError("evaluation: query has no candidates");

        RankedQuery rq;
        rq.query_label = qrec.label;
        rq.ranked_labels.reserve(ranking.size());
        EvalQueryRecord er;
        er.id = qrec.id;
        er.label = qrec.label;
        er.top_id = store.record(ranking.front().index).id;
        er.top_label = store.record(ranking.front().index).label;
        for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
            const auto idx = ranking[pos].index;
            rq.ranked_labels.push_back(store.record(idx).label);
            if (idx == qi) er.self_rank = static_cast<int>(pos) + 1;
        }
        ranked_queries.push_back(std::move(rq));
        res.queries.push_back(std::move(er));
    }

    res.report = compute_metrics(ranked_queries, opt.precision_ks, opt.confusion_depth);
    return res;
}

} // namespace rsim
