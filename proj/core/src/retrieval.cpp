#include "rsim/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rsim/errors.hpp"
#include "rsim/threading.hpp"

namespace rsim {

ScorerKind scorer_kind_from_name(const std::string& name) {
    if (name == "discriminator") return ScorerKind::discriminator;
    if (name == "manhattan") return ScorerKind::manhattan;
    if (name == "euclidean") return ScorerKind::euclidean;
    if (name == "cosine") return ScorerKind::cosine;
    throw ValueError("unknown scorer '" + name +
                     "' (expected discriminator, manhattan, euclidean, or cosine)");
}

std::string to_string(ScorerKind kind) {
    switch (kind) {
    case ScorerKind::discriminator: return "discriminator";
    case ScorerKind::manhattan: return "manhattan";
    case ScorerKind::euclidean: return "euclidean";
    case ScorerKind::cosine: return "cosine";
    }
    return "?";
}

namespace {

void check_same_length(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size())
        throw ShapeError("distance: vectors differ in length, " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
}

} // namespace

double manhattan_distance(const std::vector<float>& a, const std::vector<float>& b) {
    check_same_length(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    return s;
}

double euclidean_distance(const std::vector<float>& a, const std::vector<float>& b) {
    check_same_length(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
    check_same_length(a, b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<float> narrowed(const Tensor& query) {
    std::vector<float> q;
    q.reserve(query.data.size());
    for (double v : query.data) q.push_back(static_cast<float>(v));
    return q;
}

class DistanceScorer final : public Scorer {
public:
    explicit DistanceScorer(ScorerKind kind) : kind_(kind) {}
    ScorerKind kind() const override { return kind_; }
    bool higher_is_better() const override { return kind_ == ScorerKind::cosine; }

    std::vector<double> score(const FeatureStore& store, const Tensor& query,
                              const std::vector<std::size_t>& candidates) const override {
        if (query.shape != store.extents())
            throw ShapeError("query features " + shape_str(query.shape) + ", store holds " +
                             shape_str(store.extents()));
        // The query is narrowed to f32 like every stored record, so a query
        // that is also in the store compares against itself at distance 0.
        const std::vector<float> q = narrowed(query);
        std::vector<double> out(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& v = store.record(candidates[i]).values;
            switch (kind_) {
            case ScorerKind::manhattan: out[i] = manhattan_distance(q, v); break;
            case ScorerKind::euclidean: out[i] = euclidean_distance(q, v); break;
            case ScorerKind::cosine: out[i] = cosine_similarity(q, v); break;
            default: throw ValueError("distance scorer cannot run the discriminator");
            }
        }
        return out;
    }

private:
    ScorerKind kind_;
};

class DiscriminatorScorer final : public Scorer {
public:
    DiscriminatorScorer(const NetworkConfig& cfg, DiscriminatorParams params, int batch_size)
        : cfg_(cfg), params_(std::move(params)), batch_(batch_size) {
        if (batch_ < 1) throw ValueError("discriminator scorer: batch size must be >= 1");
        cfg_.validate();
        if (cfg_.discriminator.empty()) throw ValueError("config has no discriminator stages");
    }

    ScorerKind kind() const override { return ScorerKind::discriminator; }
    bool higher_is_better() const override { return true; }

    std::vector<double> score(const FeatureStore& store, const Tensor& query,
                              const std::vector<std::size_t>& candidates) const override {
        const Shape latent = cfg_.latent_shape();
        if (store.extents() != latent)
            throw ShapeError("store holds " + shape_str(store.extents()) +
                             ", discriminator expects " + shape_str(latent));
        if (query.shape != latent)
            throw ShapeError("query features " + shape_str(query.shape) +
                             ", discriminator expects " + shape_str(latent));

        // Same f32 round-trip as stored records: a self-match scores like a
        // stored copy of the query.
        Tensor q(latent);
        {
            const std::vector<float> qf = narrowed(query);
            for (std::size_t i = 0; i < qf.size(); ++i) q.data[i] = static_cast<double>(qf[i]);
        }

        std::vector<double> out(candidates.size());
        const auto nchunks =
            static_cast<std::int64_t>((candidates.size() + static_cast<std::size_t>(batch_) - 1) /
                                      static_cast<std::size_t>(batch_));
        parallel_for(nchunks, [&](std::int64_t chunk) {
            const std::size_t start = static_cast<std::size_t>(chunk) * static_cast<std::size_t>(batch_);
            const std::size_t end = std::min(candidates.size(), start + static_cast<std::size_t>(batch_));

            std::vector<Tensor> cand_tensors;
            cand_tensors.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                cand_tensors.push_back(store.features_as_tensor(candidates[i]));
            std::vector<const Tensor*> qa(end - start, &q);
            std::vector<const Tensor*> cb;
            cb.reserve(end - start);
            for (const auto& t : cand_tensors) cb.push_back(&t);

            Graph g;
            Var probs = discriminate(g, g.input(stack_batch(qa)), g.input(stack_batch(cb)), cfg_, params_);
            const Tensor& pv = g.value(probs);
            for (std::size_t i = start; i < end; ++i)
                out[i] = pv.data[2 * (i - start)]; // column 0 is p(match)
        });
        return out;
    }

private:
    NetworkConfig cfg_;
    DiscriminatorParams params_;
    int batch_;
};

} // namespace

std::unique_ptr<Scorer> make_distance_scorer(ScorerKind kind) {
    if (kind == ScorerKind::discriminator)
        throw ValueError("discriminator scorer needs network parameters");
    return std::make_unique<DistanceScorer>(kind);
}

std::unique_ptr<Scorer> make_discriminator_scorer(const NetworkConfig& cfg, DiscriminatorParams params,
                                                  int batch_size) {
    return std::make_unique<DiscriminatorScorer>(cfg, std::move(params), batch_size);
}

std::vector<RankedMatch> rank_candidates(const FeatureStore& store, const Tensor& query,
                                         const Scorer& scorer,
                                         const std::vector<std::size_t>& candidates) {
    const std::vector<double> scores = scorer.score(store, query, candidates);
    std::vector<RankedMatch> out(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = {candidates[i], scores[i]};
    const bool higher = scorer.higher_is_better();
    // stable sort keeps stored-order tie-breaking (candidates arrive sorted)
    std::stable_sort(out.begin(), out.end(), [higher](const RankedMatch& a, const RankedMatch& b) {
        return higher ? a.score > b.score : a.score < b.score;
    });
    return out;
}

std::vector<RankedMatch> rank_all(const FeatureStore& store, const Tensor& query, const Scorer& scorer,
                                  const std::optional<std::string>& exclude_id) {
    std::vector<std::size_t> candidates;
    if (exclude_id) {
        candidates = store.records_except(*exclude_id);
    } else {
        candidates.resize(store.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    }
    return rank_candidates(store, query, scorer, candidates);
}

std::vector<RankedMatch> top_n(const FeatureStore& store, const Tensor& query, const Scorer& scorer,
                               std::size_t n, const std::optional<std::string>& exclude_id) {
    auto ranking = rank_all(store, query, scorer, exclude_id);
    if (ranking.size() > n) ranking.resize(n);
    return ranking;
}

void export_ranking_csv(const std::filesystem::path& path, const FeatureStore& store,
                        const std::vector<RankedMatch>& ranking) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "rank,image_id,class_label,score\n";
    char score[40];
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const FeatureRecord& rec = store.record(ranking[i].index);
        std::snprintf(score, sizeof score, "%.10g", ranking[i].score);
        out << (i + 1) << ',' << rec.id << ',' << rec.label << ',' << score << '\n';
    }
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace rsim
