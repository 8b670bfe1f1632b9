#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rgbx/dataset.hpp"
#include "rgbx/eval.hpp"
#include "rgbx/fixtures.hpp"
#include "rgbx/grpo.hpp"
#include "rgbx/mtw.hpp"
#include "rgbx/response.hpp"
#include "rgbx/reward.hpp"
#include "rgbx/types.hpp"

using namespace rgbx;
namespace fs = std::filesystem;

namespace {

fs::path fresh_tree(const char* name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fixtures::generate_fixtures(dir.string(), 1);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("regeneration is byte-identical") {
    const auto a = fresh_tree("rgbx_fix_a");
    const auto b = fresh_tree("rgbx_fix_b");
    CHECK(fixtures::lockfile_for_tree(a.string()) ==
          fixtures::lockfile_for_tree(b.string()));
    CHECK(slurp(a / "corpus" / "vmcot_corpus.jsonl") ==
          slurp(b / "corpus" / "vmcot_corpus.jsonl"));
}

TEST_CASE("lockfile matches the committed golden hashes") {
    const auto tree = fresh_tree("rgbx_fix_lock");
    const std::string produced = fixtures::lockfile_for_tree(tree.string());
    const std::string committed = slurp(fs::path(RGBX_TEST_DATA_DIR) / "fixtures.lock");
    REQUIRE_FALSE(committed.empty());
    CHECK(produced == committed);
}

TEST_CASE("fixture corpus carries the engineered frequency structure") {
    const auto tree = fresh_tree("rgbx_fix_corpus");
    TokenCorpus corpus;
    std::ifstream in(tree / "corpus" / "vmcot_corpus.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        corpus.add_document(*parse_modality(j.at("modality").get<std::string>()),
                            j.at("text").get<std::string>());
    }
    CHECK(corpus.total_tokens(Modality::Thermal) == 100);
    CHECK(corpus.total_tokens(Modality::Depth) + corpus.total_tokens(Modality::Event) == 100);
    CHECK(corpus.vocabulary().size() == 100);
    CHECK(corpus.count("thermal", Modality::Depth) == 0);
    CHECK(corpus.count("thermal", Modality::Event) == 0);

    const auto table = build_weight_table(corpus);
    CHECK(table.weight("thermal", Modality::Thermal) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(table.weight("the", Modality::Thermal) == 0.05);
}

TEST_CASE("fixture videos have the advertised shapes") {
    const auto tree = fresh_tree("rgbx_fix_videos");
    BuildConfig cfg;
    cfg.seed = 1;

    const auto short_video = load_video_index((tree / "videos" / "short_60.json").string());
    CHECK(short_video.total_frames() == 60);
    const auto groups = sample_keyframes(short_video, cfg);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0] == std::vector<int>{0, 13, 26, 39});

    const auto long_video = load_video_index((tree / "videos" / "long_5000.json").string());
    CHECK(sample_keyframes(long_video, cfg).size() == 8);

    const auto absent = load_video_index((tree / "videos" / "absent_gt.json").string());
    int missing = 0;
    for (const auto& f : absent.frames) {
        if (!f.gt.has_value()) ++missing;
    }
    CHECK(missing == 40);
}

TEST_CASE("response cases agree with the parser") {
    const auto tree = fresh_tree("rgbx_fix_resp");
    std::ifstream in(tree / "responses" / "cases.jsonl");
    std::string line;
    int n_cases = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto parsed = parse_response(j.at("text").get<std::string>(),
                                           j.at("expected_n").get<int>());
        INFO(j.at("name").get<std::string>());
        CHECK(parsed.well_formed == j.at("well_formed").get<bool>());
        ++n_cases;
    }
    CHECK(n_cases >= 15);
}

TEST_CASE("fixture rollout traces load and validate") {
    const auto tree = fresh_tree("rgbx_fix_traces");
    const auto rollouts = load_rollouts((tree / "traces" / "rollouts.jsonl").string());
    REQUIRE(rollouts.size() == 2);
    for (const auto& r : rollouts) {
        r.validate();
        CHECK(std::isfinite(grpo_objective(r, GrpoConfig{})));
    }
}

TEST_CASE("golden cases replay against the implementations") {
    int checked = 0;
    for (const auto& c : fixtures::golden_cases()) {
        INFO(c.name);
        if (c.kind == "iou") {
            auto box = [&](const char* key) {
                const auto& a = c.inputs.at(key);
                return BBox{a[0], a[1], a[2], a[3]};
            };
            CHECK(iou(box("a"), box("b")) ==
                  doctest::Approx(c.expected.get<double>()).epsilon(
                      std::max(c.tolerance, 1e-15)));
        } else if (c.kind == "st_reward") {
            std::vector<BBox> pred;
            std::vector<std::optional<BBox>> gt;
            for (const auto& q : c.inputs.at("pred")) pred.push_back(BBox{q[0], q[1], q[2], q[3]});
            for (const auto& q : c.inputs.at("gt")) gt.emplace_back(BBox{q[0], q[1], q[2], q[3]});
            CHECK(spatio_temporal_reward(c.inputs.at("intervals").get<std::vector<int>>(),
                                         pred, gt, c.inputs.at("delta").get<double>()) ==
                  doctest::Approx(c.expected.get<double>()).epsilon(c.tolerance));
        } else if (c.kind == "advantages") {
            const auto got =
                group_advantages(c.inputs.at("rewards").get<std::vector<double>>());
            const auto want = c.expected.get<std::vector<double>>();
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i] == doctest::Approx(want[i]).epsilon(c.tolerance));
            }
        } else if (c.kind == "clipped_term") {
            CHECK(clipped_term(c.inputs.at("ratio").get<double>(),
                               c.inputs.at("advantage").get<double>(),
                               c.inputs.at("clip").get<double>()) ==
                  doctest::Approx(c.expected.get<double>()));
        } else if (c.kind == "kl") {
            CHECK(kl_penalty(c.inputs.at("logp_new").get<double>(),
                             c.inputs.at("logp_ref").get<double>()) ==
                  doctest::Approx(c.expected.get<double>()).epsilon(
                      std::max(c.tolerance, 1e-15)));
        } else if (c.kind == "contribution") {
            CHECK(contribution(c.inputs.at("p").get<double>(),
                               c.inputs.at("q").get<double>()) ==
                  doctest::Approx(c.expected.get<double>()).epsilon(
                      std::max(c.tolerance, 1e-15)));
        } else if (c.kind == "weighted_loss") {
            CHECK(weighted_sft_loss(c.inputs.at("weights").get<std::vector<double>>(),
                                    c.inputs.at("logprobs").get<std::vector<double>>()) ==
                  doctest::Approx(c.expected.get<double>()).epsilon(c.tolerance));
        } else if (c.kind == "acc") {
            MIGSample s;
            s.sample_id = "golden";
            for (const auto& q : c.inputs.at("gt")) {
                s.search_images.push_back({"i", Modality::Rgb, 1});
                s.ground_truth.emplace_back(BBox{q[0], q[1], q[2], q[3]});
            }
            PredictionRecord p;
            p.sample_id = "golden";
            for (const auto& q : c.inputs.at("pred")) p.boxes.push_back(BBox{q[0], q[1], q[2], q[3]});
            CHECK(acc_at_threshold(p, s, c.inputs.at("threshold").get<double>()) ==
                  doctest::Approx(c.expected.get<double>()).epsilon(
                      std::max(c.tolerance, 1e-15)));
        } else if (c.kind == "serialize") {
            std::vector<BBox> boxes;
            for (const auto& q : c.inputs.at("boxes")) boxes.push_back(BBox{q[0], q[1], q[2], q[3]});
            CHECK(serialize_response(c.inputs.at("think").get<std::string>(), boxes) ==
                  c.expected.get<std::string>());
        } else if (c.kind == "keyframes_short") {
            VideoIndex v;
            v.video_id = "golden";
            v.subset = "g";
            v.split = "train";
            v.modality = Modality::Thermal;
            for (int f = 0; f < c.inputs.at("frames").get<int>(); ++f) {
                v.frames.push_back({"r", "x", BBox{0, 0, 1, 1}});
            }
            const auto groups = sample_keyframes(v, BuildConfig{});
            REQUIRE(groups.size() == 1);
            CHECK(groups[0] == c.expected.get<std::vector<int>>());
        } else {
            FAIL("unhandled golden case kind: " << c.kind);
        }
        // Every oracle-sourced case names its oracle.
        if (c.source == "oracle") CHECK_FALSE(c.oracle.empty());
        ++checked;
    }
    CHECK(checked >= 18);
}
