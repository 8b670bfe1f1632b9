#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rgbx/errors.hpp"
#include "rgbx/reward.hpp"

using namespace rgbx;

namespace {

// IoU exactly 0.5 against (0,0,10,10).
const BBox kHalf{0, 0, 10, 5};
const BBox kFull{0, 0, 10, 10};

std::vector<std::optional<BBox>> full_gt(int n) {
    return std::vector<std::optional<BBox>>(static_cast<std::size_t>(n), kFull);
}

} // namespace

TEST_CASE("frame-weighted reward, three frames at IoU one half") {
    const double r = spatio_temporal_reward({25, 50, 75}, {kHalf, kHalf, kHalf},
                                            full_gt(3), 5.0);
    CHECK(r == doctest::Approx(1.9582269742749626).epsilon(1e-6));
}

TEST_CASE("frame-weighted reward, single frame") {
    CHECK(spatio_temporal_reward({24}, {kFull}, full_gt(1), 5.0) ==
          doctest::Approx(0.6989700043360189).epsilon(1e-6));
}

TEST_CASE("zero overlap gives zero reward") {
    CHECK(spatio_temporal_reward({25, 50, 75},
                                 {{20, 20, 30, 30}, {20, 20, 30, 30}, {20, 20, 30, 30}},
                                 full_gt(3), 5.0) == 0.0);
}

TEST_CASE("frame weights grow strictly with the interval") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 500; ++rep) {
        // Sorted distinct intervals; moving the single good frame later in
        // the sequence must strictly increase the reward.
        std::vector<int> dt;
        int v = 20 + static_cast<int>(rng() % 10);
        const int n = 3 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            dt.push_back(v);
            v += 1 + static_cast<int>(rng() % 40);
        }
        double prev = -1.0;
        for (int good = 0; good < n; ++good) {
            std::vector<BBox> pred(static_cast<std::size_t>(n), BBox{20, 20, 30, 30});
            pred[static_cast<std::size_t>(good)] = kFull;
            const double r = spatio_temporal_reward(dt, pred, full_gt(n), 5.0);
            CHECK(r > prev);
            prev = r;
        }
    }
}

TEST_CASE("reward is linear in each frame IoU") {
    // Doubling the overlap on one frame doubles that frame's term.
    const std::vector<int> dt{25, 50, 75};
    const BBox quarter{0, 0, 10, 2.5};
    const double base = spatio_temporal_reward(dt, {kFull, quarter, kFull}, full_gt(3), 5.0);
    const double more = spatio_temporal_reward(dt, {kFull, kHalf, kFull}, full_gt(3), 5.0);
    const double w1 = std::log10(50 - 25 + 5.0);
    CHECK(more - base == doctest::Approx(w1 * (0.5 - 0.25)).epsilon(1e-9));
}

TEST_CASE("absent frames pay full weight only for the sentinel") {
    std::vector<std::optional<BBox>> gt{kFull, std::nullopt, kFull};
    const std::vector<int> dt{25, 50, 75};
    const double claimed =
        spatio_temporal_reward(dt, {kFull, kAbsenceSentinel, kFull}, gt, 5.0);
    const double missed =
        spatio_temporal_reward(dt, {kFull, BBox{1, 1, 2, 2}, kFull}, gt, 5.0);
    const double w1 = std::log10(50 - 25 + 5.0);
    CHECK(claimed - missed == doctest::Approx(w1).epsilon(1e-9));
}

TEST_CASE("argument and config errors") {
    CHECK_THROWS_AS(spatio_temporal_reward({25, 50}, {kFull}, full_gt(1), 5.0),
                    ArgumentError);
    CHECK_THROWS_AS(spatio_temporal_reward({25}, {kFull}, full_gt(1), 0.0), ConfigError);
    CHECK_THROWS_AS(spatio_temporal_reward({25}, {kFull}, full_gt(1), -1.0), ConfigError);
}

TEST_CASE("mean-IoU ablation variant") {
    CHECK(mean_iou_reward({kHalf, kFull}, full_gt(2)) == doctest::Approx(0.75));
}

TEST_CASE("reward is zero exactly when every frame misses") {
    std::mt19937_64 rng(29);
    auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int rep = 0; rep < 500; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 4);
        std::vector<int> dt;
        std::vector<BBox> pred;
        std::vector<std::optional<BBox>> gt;
        int v = 24;
        for (int i = 0; i < n; ++i) {
            dt.push_back(v);
            v += 24 + static_cast<int>(rng() % 6);
            const double x = unit() * 50.0;
            const double y = unit() * 50.0;
            pred.push_back(BBox{x, y, x + 10, y + 10});
            const double gx = unit() * 50.0;
            const double gy = unit() * 50.0;
            gt.emplace_back(BBox{gx, gy, gx + 10, gy + 10});
        }
        double max_iou = 0.0;
        for (int i = 0; i < n; ++i) {
            max_iou = std::max(max_iou, slot_iou(pred[static_cast<std::size_t>(i)],
                                                 gt[static_cast<std::size_t>(i)]));
        }
        const double r = spatio_temporal_reward(dt, pred, gt, 5.0);
        if (max_iou == 0.0) {
            CHECK(r == 0.0);
        } else {
            CHECK(r > 0.0);
        }
    }
}

TEST_CASE("token accuracy reward") {
    SUBCASE("identical text scores one") {
        CHECK(modality_reward(Modality::Thermal, Modality::Thermal, false,
                              "modality: thermal. target drifts",
                              "modality: thermal. target drifts") == 1.0);
    }
    SUBCASE("wrong classification zeroes the reward") {
        CHECK(modality_reward(Modality::Depth, Modality::Thermal, false,
                              "modality: depth. target drifts",
                              "modality: thermal. target drifts") == 0.0);
        CHECK(modality_reward(std::nullopt, Modality::Thermal, false, "no claim here",
                              "modality: thermal") == 0.0);
    }
    SUBCASE("known modality skips the classification gate") {
        CHECK(modality_reward(std::nullopt, Modality::Thermal, true,
                              "alpha beta", "alpha beta") == 1.0);
    }
    SUBCASE("two of four reference positions match") {
        CHECK(modality_reward(std::nullopt, Modality::Thermal, true,
                              "alpha wrong gamma", "alpha beta gamma delta") == 0.5);
    }
    SUBCASE("short predictions are counted as misses") {
        CHECK(modality_reward(std::nullopt, Modality::Thermal, true,
                              "alpha", "alpha beta gamma delta") == 0.25);
    }
    SUBCASE("surplus prediction tokens are misses too") {
        CHECK(modality_reward(std::nullopt, Modality::Thermal, true,
                              "alpha beta gamma delta", "alpha beta") == 0.5);
        // Only an identical sequence reaches 1.
        CHECK(modality_reward(std::nullopt, Modality::Thermal, true,
                              "alpha beta extra", "alpha beta") < 1.0);
    }
    SUBCASE("empty reference is a configuration error") {
        CHECK_THROWS_AS(modality_reward(std::nullopt, Modality::Thermal, true, "x", ""),
                        ConfigError);
    }
}

TEST_CASE("modality claim extraction") {
    CHECK(extract_modality_claim("modality: thermal. more text") == Modality::Thermal);
    CHECK(extract_modality_claim("I think the Modality: DEPTH here") == Modality::Depth);
    CHECK_FALSE(extract_modality_claim("no declaration").has_value());
    CHECK_FALSE(extract_modality_claim("modality: banana").has_value());
}

TEST_CASE("composed reward on a perfect response") {
    RewardContext ctx;
    ctx.frame_intervals = {25, 50, 75};
    ctx.ground_truth = full_gt(3);
    ctx.true_modality = Modality::Thermal;
    ctx.modality_known = false;
    ctx.reference_cot = "modality: thermal. steady target";

    const auto parsed = parse_response(
        serialize_response("modality: thermal. steady target", {kFull, kFull, kFull}), 3);
    const auto b = total_reward(parsed, ctx);
    CHECK(b.format == 1.0);
    CHECK(b.modality == 1.0);
    CHECK(b.spatio_temporal == doctest::Approx(3.916453948549925).epsilon(1e-6));
    CHECK(b.total == doctest::Approx(5.916453948549925).epsilon(1e-6));
    CHECK(b.total == b.spatio_temporal + b.modality + b.format);
}

TEST_CASE("composed reward on a fully malformed response") {
    RewardContext ctx;
    ctx.frame_intervals = {25, 50, 75};
    ctx.ground_truth = full_gt(3);
    ctx.reference_cot = "modality: thermal. steady target";

    const auto b = total_reward(parse_response("complete nonsense", 3), ctx);
    CHECK(b.spatio_temporal == 0.0);
    CHECK(b.modality == 0.0);
    CHECK(b.format == 0.0);
    CHECK(b.total == 0.0);
}

TEST_CASE("correct format, wrong modality, zero overlap totals one") {
    RewardContext ctx;
    ctx.frame_intervals = {25, 50, 75};
    ctx.ground_truth = full_gt(3);
    ctx.true_modality = Modality::Thermal;
    ctx.modality_known = false;
    ctx.reference_cot = "modality: thermal. steady target";

    const BBox far{40, 40, 50, 50};
    const auto parsed = parse_response(
        serialize_response("modality: depth. steady target", {far, far, far}), 3);
    const auto b = total_reward(parsed, ctx);
    CHECK(b.format == 1.0);
    CHECK(b.modality == 0.0);
    CHECK(b.spatio_temporal == 0.0);
    CHECK(b.total == 1.0);
}

TEST_CASE("extractable boxes keep the spatial reward despite a format break") {
    RewardContext ctx;
    ctx.frame_intervals = {25, 50, 75};
    ctx.ground_truth = full_gt(3);
    ctx.reference_cot = "modality: thermal. steady target";

    // No think block: format and token accuracy fail, boxes still score.
    const auto parsed = parse_response(
        "<answer>[[0,0,10,10],[0,0,10,10],[0,0,10,10]]</answer>", 3);
    const auto b = total_reward(parsed, ctx);
    CHECK(b.format == 0.0);
    CHECK(b.modality == 0.0);
    CHECK(b.spatio_temporal == doctest::Approx(3.916453948549925).epsilon(1e-6));

    // Wrong box count: no spatial reward either.
    const auto short_parsed = parse_response("<answer>[[0,0,10,10]]</answer>", 3);
    const auto b2 = total_reward(short_parsed, ctx);
    CHECK(b2.spatio_temporal == 0.0);
    CHECK(b2.total == 0.0);
}

TEST_CASE("invalid predicted geometry scores zero instead of throwing") {
    RewardContext ctx;
    ctx.frame_intervals = {25, 50};
    ctx.ground_truth = full_gt(2);
    ctx.reference_cot = "modality: thermal. steady target";

    // Second box has reversed corners; the response is well formed text-wise.
    const auto parsed =
        parse_response("<think>modality: thermal. steady target</think> "
                       "<answer>[[0,0,10,10],[9,9,1,1]]</answer>", 2);
    CHECK(parsed.well_formed);
    const auto b = total_reward(parsed, ctx);
    CHECK(b.spatio_temporal == doctest::Approx(std::log10(5.0)).epsilon(1e-9));
}
