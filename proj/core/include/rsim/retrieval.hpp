#pragma once

// Query-against-store ranking. A Scorer turns (query features, candidate
// records) into scores; rankings sort best-first with ties broken by stored
// record order. Distance scorers treat lower as better; the discriminator
// and cosine scorers treat higher as better.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rsim/feature_store.hpp"
#include "rsim/network.hpp"

namespace rsim {

enum class ScorerKind { discriminator, manhattan, euclidean, cosine };

ScorerKind scorer_kind_from_name(const std::string& name); // ValueError on unknown names
std::string to_string(ScorerKind kind);

double manhattan_distance(const std::vector<float>& a, const std::vector<float>& b);
double euclidean_distance(const std::vector<float>& a, const std::vector<float>& b);
// Zero for orthogonal vectors, 1 for parallel; zero vectors score 0.
double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

struct RankedMatch {
    std::size_t index = 0; // record index within the store
    double score = 0.0;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual ScorerKind kind() const = 0;
    virtual bool higher_is_better() const = 0;
    // Scores the query feature volume (shape store.extents()) against each
    // candidate record, in candidate order.
    virtual std::vector<double> score(const FeatureStore& store, const Tensor& query,
                                      const std::vector<std::size_t>& candidates) const = 0;
};

// manhattan / euclidean / cosine over flattened features.
std::unique_ptr<Scorer> make_distance_scorer(ScorerKind kind);

// p(match) from the discriminator, evaluated in eval mode over candidate
// batches (batching does not change eval-mode results). Scoring across
// batches runs on the worker-thread budget.
std::unique_ptr<Scorer> make_discriminator_scorer(const NetworkConfig& cfg, DiscriminatorParams params,
                                                  int batch_size = 64);

// Ranks every record (minus exclude_id, when given) against the query.
std::vector<RankedMatch> rank_all(const FeatureStore& store, const Tensor& query, const Scorer& scorer,
                                  const std::optional<std::string>& exclude_id = std::nullopt);
// Explicit candidate set variant (indices into the store).
std::vector<RankedMatch> rank_candidates(const FeatureStore& store, const Tensor& query,
                                         const Scorer& scorer,
                                         const std::vector<std::size_t>& candidates);
std::vector<RankedMatch> top_n(const FeatureStore& store, const Tensor& query, const Scorer& scorer,
                               std::size_t n,
                               const std::optional<std::string>& exclude_id = std::nullopt);

// Columns: rank,image_id,class_label,score. One row per match, best first.
void export_ranking_csv(const std::filesystem::path& path, const FeatureStore& store,
                        const std::vector<RankedMatch>& ranking);

} // namespace rsim
