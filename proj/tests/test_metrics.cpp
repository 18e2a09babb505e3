#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "rsim/errors.hpp"
#include "rsim/metrics.hpp"
#include "rsim/rng.hpp"
#include "support/naive_metrics.hpp"

using namespace rsim;

TEST_CASE("penalized ranks clip past the window") {
    const auto pr = penalized_ranks({1, 4, 5, 9}, 4);
    CHECK(pr == std::vector<double>{1.0, 4.0, 5.0, 5.0});
    CHECK_THROWS_AS(penalized_ranks({0}, 4), ValueError);
    CHECK_THROWS_AS(penalized_ranks({1}, 0), ValueError);
}

TEST_CASE("nmrr closed forms") {
    // G=2, K=4, relevant at ranks 1 and 3: AVR=2, best=1.5, worst=5.
    CHECK(nmrr({1, 3}, 2, 4) == doctest::Approx(0.5 / 3.5).epsilon(1e-12));
    // Perfect ranking scores 0.
    CHECK(nmrr({1, 2, 3}, 3, 6) == doctest::Approx(0.0).epsilon(1e-12));
    // Everything beyond the window scores 1.
    CHECK(nmrr({7, 8}, 2, 4) == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<char> perfect{1, 1, 0, 0, 0};
    CHECK(nmrr(perfect) == doctest::Approx(0.0).epsilon(1e-12));
    const std::vector<char> miss{0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
    CHECK(nmrr(miss) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(nmrr(std::vector<char>{0, 0}), ValueError);
}

TEST_CASE("average precision closed forms") {
    const std::vector<char> rel{1, 0, 1};
    CHECK(average_precision(rel, 2) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(average_precision(rel) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    // A relevant item missing from the list still costs its share of G.
    CHECK(average_precision({1, 0, 0}, 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(average_precision({1, 1, 1}, 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("precision at k always divides by k") {
    const std::vector<char> rel{1, 1, 0};
    CHECK(precision_at_k(rel, 2) == doctest::Approx(1.0));
    CHECK(precision_at_k(rel, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(precision_at_k(rel, 10) == doctest::Approx(0.2)); // short list, same divisor
    CHECK_THROWS_AS(precision_at_k(rel, 0), ValueError);
}

TEST_CASE("compute_metrics aggregates a hand-checked instance") {
    std::vector<RankedQuery> queries;
    queries.push_back({"a", {"a", "b", "a", "b"}}); // NMRR({1,3},2,4), AP=5/6
    queries.push_back({"b", {"b", "b", "a", "a"}}); // perfect: NMRR 0, AP 1
    const MetricsReport rep = compute_metrics(queries, {1, 2});

    CHECK(rep.query_count == 2);
    CHECK(rep.anmrr == doctest::Approx(0.5 * (0.5 / 3.5)).epsilon(1e-12));
    CHECK(rep.mean_ap == doctest::Approx(0.5 * (5.0 / 6.0 + 1.0)).epsilon(1e-12));
    CHECK(rep.precision_at.at(1) == doctest::Approx(1.0));
    CHECK(rep.precision_at.at(2) == doctest::Approx(0.75));
    CHECK(rep.anmrr_per_class.at("a") == doctest::Approx(0.5 / 3.5));
    CHECK(rep.anmrr_per_class.at("b") == doctest::Approx(0.0));

    // Default confusion depth = min own-class candidates = 2.
    CHECK(rep.confusion.n_retrieved == 2);
    REQUIRE(rep.confusion.classes == std::vector<std::string>{"a", "b"});
    CHECK(rep.confusion.rows[0][0] == doctest::Approx(50.0));
    CHECK(rep.confusion.rows[0][1] == doctest::Approx(50.0));
    CHECK(rep.confusion.rows[1][1] == doctest::Approx(100.0));
}

TEST_CASE("queries without a relevant candidate are rejected") {
    std::vector<RankedQuery> queries{{"a", {"b", "b"}}};
    CHECK_THROWS_AS(compute_metrics(queries), ValueError);
    CHECK_THROWS_AS(compute_metrics({}), ValueError);
}

TEST_CASE("metrics match the brute-force oracle on randomized instances") {
    Rng rng(2025);
    const std::vector<std::string> class_names{"c0", "c1", "c2", "c3"};
    const std::vector<int> ks{1, 2, 5, 10};

    for (int instance = 0; instance < 200; ++instance) {
        const int n_classes = rng.uniform_int(1, 4);
        const int n_queries = rng.uniform_int(1, 6);
        std::vector<RankedQuery> queries;
        std::vector<std::string> qlabels;
        std::vector<std::vector<std::string>> rankings;
        for (int q = 0; q < n_queries; ++q) {
            const std::string own = class_names[static_cast<std::size_t>(
                rng.uniform_int(0, n_classes - 1))];
            const int n_items = rng.uniform_int(1, 20);
            std::vector<std::string> ranked;
            ranked.push_back(own); // ensure at least one relevant candidate
            for (int i = 1; i < n_items; ++i)
                ranked.push_back(class_names[static_cast<std::size_t>(
                    rng.uniform_int(0, n_classes - 1))]);
            rng.shuffle(ranked);
            queries.push_back({own, ranked});
            qlabels.push_back(own);
            rankings.push_back(queries.back().ranked_labels);
        }

        const MetricsReport rep = compute_metrics(queries, ks);
        const testsupport::NaiveAggregate naive = testsupport::naive_aggregate(qlabels, rankings, ks);

        CHECK(std::abs(rep.anmrr - naive.anmrr) <= 1e-12);
        CHECK(std::abs(rep.mean_ap - naive.mean_ap) <= 1e-12);
        for (int k : ks) CHECK(std::abs(rep.precision_at.at(k) - naive.p_at.at(k)) <= 1e-12);
        for (const auto& [label, v] : naive.anmrr_per_class)
            CHECK(std::abs(rep.anmrr_per_class.at(label) - v) <= 1e-12);
    }
}

TEST_CASE("text and csv reports carry the headline numbers") {
    std::vector<RankedQuery> queries{{"a", {"a", "b"}}, {"b", {"b", "a"}}};
    const MetricsReport rep = compute_metrics(queries, {1});
    const std::string text = to_text(rep);
    CHECK(text.find("ANMRR: 0.0000") != std::string::npos);
    CHECK(text.find("mAP (x100): 100.00") != std::string::npos);
    const std::string csv = to_csv(rep);
    CHECK(csv.find("anmrr,0\n") != std::string::npos);
    CHECK(csv.find("map,1\n") != std::string::npos);
    CHECK(csv.find("p_at_1,1\n") != std::string::npos);
    CHECK(csv.rfind("confusion_class,a,b") != std::string::npos);
}
