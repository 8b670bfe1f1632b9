#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "rgbx/errors.hpp"
#include "rgbx/mtw.hpp"

using namespace rgbx;

namespace {

std::string filler(int i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    return buf;
}

// Mirror of the engineered mini corpus: 100 tokens per side, |vocab| = 100,
// "thermal" exclusive, "heat" at in-rate 0.1 vs pooled-other count 1,
// "the" relatively rarer inside thermal than outside.
TokenCorpus mini_corpus() {
    TokenCorpus corpus;
    std::vector<std::string> thermal, depth, event;
    for (int i = 0; i < 10; ++i) thermal.push_back("thermal");
    for (int i = 0; i < 10; ++i) thermal.push_back("heat");
    for (int i = 0; i < 10; ++i) thermal.push_back("the");
    for (int i = 1; i <= 70; ++i) thermal.push_back(filler(i));

    depth.push_back("heat");
    for (int i = 0; i < 10; ++i) depth.push_back("the");
    for (int i = 71; i <= 84; ++i) depth.push_back(filler(i));
    for (int i = 1; i <= 25; ++i) depth.push_back(filler(i));

    for (int i = 0; i < 10; ++i) event.push_back("the");
    for (int i = 85; i <= 97; ++i) event.push_back(filler(i));
    for (int i = 26; i <= 52; ++i) event.push_back(filler(i));

    corpus.add_tokens(Modality::Thermal, thermal);
    corpus.add_tokens(Modality::Depth, depth);
    corpus.add_tokens(Modality::Event, event);
    return corpus;
}

} // namespace

TEST_CASE("tokenizer lowercases and splits on punctuation") {
    CHECK(tokenize_words("Modality: Thermal, tracking!") ==
          std::vector<std::string>{"modality", "thermal", "tracking"});
    CHECK(tokenize_words("").empty());
    CHECK(tokenize_words("  \n\t ").empty());
}

TEST_CASE("corpus bookkeeping") {
    const auto corpus = mini_corpus();
    CHECK(corpus.total_tokens(Modality::Thermal) == 100);
    CHECK(corpus.total_tokens(Modality::Depth) == 50);
    CHECK(corpus.total_tokens(Modality::Event) == 50);
    CHECK(corpus.vocabulary().size() == 100);
    CHECK(corpus.count("thermal", Modality::Thermal) == 10);
    CHECK(corpus.count("thermal", Modality::Depth) == 0);
    CHECK(corpus.count("heat", Modality::Depth) == 1);
}

TEST_CASE("hand-verified P and Q for the engineered token") {
    const auto dist = build_distributions(mini_corpus());
    const auto& s = dist.at(Modality::Thermal).at("heat");
    // In-rate 10/100; pooled-other (1 + 0.5) / (100 + 0.5 * 100).
    CHECK(s.p == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(s.q == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(s.contrib == doctest::Approx(0.1 * std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("smoothing keeps absent tokens positive") {
    const auto dist = build_distributions(mini_corpus());
    const auto& s = dist.at(Modality::Thermal).at("thermal");
    // Absent from the pooled other modalities: q = 0.5 / (100 + 0.5 * 100).
    CHECK(s.q == doctest::Approx(0.5 / 150.0).epsilon(1e-12));
    CHECK(s.q > 0.0);
}

TEST_CASE("P and the smoothed Q are probability distributions") {
    const auto corpus = mini_corpus();
    const auto vocab = corpus.vocabulary();
    const MtwConfig cfg;
    for (Modality m : corpus.modalities()) {
        double p_sum = 0.0;
        double q_sum = 0.0;
        double n_other = 0.0;
        for (Modality o : corpus.modalities()) {
            if (o != m) n_other += static_cast<double>(corpus.total_tokens(o));
        }
        for (const auto& t : vocab) {
            p_sum += static_cast<double>(corpus.count(t, m)) /
                     static_cast<double>(corpus.total_tokens(m));
            double f_other = 0.0;
            for (Modality o : corpus.modalities()) {
                if (o != m) f_other += static_cast<double>(corpus.count(t, o));
            }
            q_sum += (f_other + cfg.smoothing) /
                     (n_other + cfg.smoothing * static_cast<double>(vocab.size()));
        }
        CHECK(p_sum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(q_sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("contribution hand cases") {
    CHECK(contribution(0.1, 0.01) == doctest::Approx(0.2302585092994046).epsilon(1e-12));
    CHECK(contribution(0.05, 0.05) == 0.0);
    CHECK(contribution(0.01, 0.1) == doctest::Approx(-0.02302585092994046).epsilon(1e-12));
    CHECK(contribution(0.0, 0.2) == 0.0);
}

TEST_CASE("single-modality corpus is a configuration error") {
    TokenCorpus corpus;
    corpus.add_document(Modality::Thermal, "just one modality here");
    CHECK_THROWS_AS(build_distributions(corpus), ConfigError);
}

TEST_CASE("weight endpoints on the engineered corpus") {
    const auto table = build_weight_table(mini_corpus());
    // Modality-exclusive token sits at the top of the range.
    CHECK(table.weight("thermal", Modality::Thermal) == doctest::Approx(1.0).epsilon(1e-6));
    // The relatively-rarer-inside stop token floors exactly.
    CHECK(table.weight("the", Modality::Thermal) == 0.05);
    // Unseen tokens fall back to the floor.
    CHECK(table.weight("never_seen", Modality::Thermal) == 0.05);
    // All weights stay inside the range.
    for (const auto& [m, entries] : table.entries()) {
        for (const auto& [token, s] : entries) {
            CHECK(s.weight >= 0.05);
            CHECK(s.weight <= 1.0);
        }
    }
}

TEST_CASE("weights are monotone in contribution within a modality") {
    const auto table = build_weight_table(mini_corpus());
    for (const auto& [m, entries] : table.entries()) {
        std::vector<TokenStats> stats;
        for (const auto& [token, s] : entries) stats.push_back(s);
        std::sort(stats.begin(), stats.end(),
                  [](const TokenStats& a, const TokenStats& b) { return a.contrib < b.contrib; });
        for (std::size_t i = 1; i < stats.size(); ++i) {
            CHECK(stats[i].weight >= stats[i - 1].weight);
        }
    }
}

TEST_CASE("exclusive token outweighs a uniform token") {
    TokenCorpus corpus;
    corpus.add_document(Modality::Thermal, "special common common filler1 filler2");
    corpus.add_document(Modality::Depth, "common common filler3 filler4 filler5");
    corpus.add_document(Modality::Event, "common common filler6 filler7 filler8");
    const auto table = build_weight_table(corpus);
    CHECK(table.weight("special", Modality::Thermal) >
          table.weight("common", Modality::Thermal));
}

TEST_CASE("degenerate modalities map to the floor") {
    TokenCorpus corpus;
    corpus.add_document(Modality::Thermal, "solo");
    corpus.add_document(Modality::Depth, "alpha beta gamma");
    const auto table = build_weight_table(corpus);
    CHECK(table.weight("solo", Modality::Thermal) == 0.05);
}

TEST_CASE("table is order independent") {
    TokenCorpus shuffled;
    std::vector<std::pair<Modality, std::string>> docs = {
        {Modality::Event, "motion dots red the the"},
        {Modality::Thermal, "heat heat bright the"},
        {Modality::Depth, "closer farther the the"},
        {Modality::Thermal, "warm heat the"},
    };
    TokenCorpus in_order;
    for (const auto& [m, text] : docs) in_order.add_document(m, text);
    std::mt19937_64 rng(5);
    std::shuffle(docs.begin(), docs.end(), rng);
    for (const auto& [m, text] : docs) shuffled.add_document(m, text);
    CHECK(build_weight_table(in_order).to_jsonl() ==
          build_weight_table(shuffled).to_jsonl());
}

TEST_CASE("weight table snapshot round-trips") {
    const auto table = build_weight_table(mini_corpus());
    const auto text = table.to_jsonl();
    const auto back = TokenWeightTable::from_jsonl(text);
    CHECK(back.to_jsonl() == text);
}

TEST_CASE("weighted loss hand case and reductions") {
    CHECK(weighted_sft_loss({1.0, 0.05}, {-0.1, -2.0}) ==
          doctest::Approx(0.2).epsilon(1e-12));
    CHECK(weighted_sft_loss({1.0, 1.0, 1.0}, {-0.5, -1.0, -0.25}) ==
          doctest::Approx(1.75));
    CHECK(weighted_sft_loss({0.0, 0.0}, {-3.0, -4.0}) == 0.0);
    CHECK_THROWS_AS(weighted_sft_loss({1.0}, {-0.1, -0.2}), ArgumentError);
}

TEST_CASE("weighted loss is linear in weights and logprobs") {
    std::mt19937_64 rng(9);
    auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + rng() % 8;
        std::vector<double> w1(n), w2(n), lp(n), lp2(n);
        for (std::size_t i = 0; i < n; ++i) {
            w1[i] = unit();
            w2[i] = unit();
            lp[i] = -unit() * 3.0;
            lp2[i] = -unit() * 3.0;
        }
        const double a = unit() * 2.0, b = unit() * 2.0;
        std::vector<double> w_comb(n), lp_comb(n);
        for (std::size_t i = 0; i < n; ++i) {
            w_comb[i] = a * w1[i] + b * w2[i];
            lp_comb[i] = a * lp[i] + b * lp2[i];
        }
        CHECK(weighted_sft_loss(w_comb, lp) ==
              doctest::Approx(a * weighted_sft_loss(w1, lp) +
                              b * weighted_sft_loss(w2, lp)).epsilon(1e-9));
        CHECK(weighted_sft_loss(w1, lp_comb) ==
              doctest::Approx(a * weighted_sft_loss(w1, lp) +
                              b * weighted_sft_loss(w1, lp2)).epsilon(1e-9));
    }
}

TEST_CASE("loss lookup by surface token") {
    const auto table = build_weight_table(mini_corpus());
    const double loss = weighted_sft_loss(table, Modality::Thermal,
                                          {"thermal", "the", "unknown"},
                                          {-1.0, -1.0, -1.0});
    const double w_thermal = table.weight("thermal", Modality::Thermal);
    CHECK(loss == doctest::Approx(w_thermal + 0.05 + 0.05));
}
