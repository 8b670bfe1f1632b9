#include "rgbx/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "rgbx/dataset.hpp"
#include "rgbx/errors.hpp"
#include "rgbx/geometry.hpp"
#include "rgbx/grpo.hpp"
#include "rgbx/response.hpp"
#include "rgbx/types.hpp"

namespace rgbx::fixtures {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % span;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return lo + static_cast<int>(draw % span);
}

double gaussian(std::mt19937_64& rng) {
    const double u1 = std::max(uniform01(rng), 1e-300);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write fixture: " + path.string());
    }
    out << content;
}

/// Synthetic tracking video: fixed-size box on a clamped random walk.
/// Frames in [absent_from, absent_to) lose the target.
VideoIndex make_video(const std::string& id, const std::string& subset,
                      const std::string& split, Modality modality, int frames,
                      std::uint64_t seed, int absent_from = -1, int absent_to = -1) {
    VideoIndex v;
    v.video_id = id;
    v.subset = subset;
    v.split = split;
    v.modality = modality;

    std::mt19937_64 rng(splitmix64(seed));
    const double width = 640.0, height = 480.0;
    const double bw = 40.0 + uniform01(rng) * 40.0;
    const double bh = 40.0 + uniform01(rng) * 40.0;
    double cx = bw / 2 + uniform01(rng) * (width - bw);
    double cy = bh / 2 + uniform01(rng) * (height - bh);

    for (int f = 0; f < frames; ++f) {
        VideoFrame frame;
        frame.rgb_image = "videos/" + id + "/rgb/" + std::to_string(f) + ".png";
        frame.x_image = "videos/" + id + "/x/" + std::to_string(f) + ".png";
        if (!(f >= absent_from && f < absent_to)) {
            cx = std::clamp(cx + gaussian(rng) * 3.0, bw / 2, width - bw / 2);
            cy = std::clamp(cy + gaussian(rng) * 3.0, bh / 2, height - bh / 2);
            // Pin to one decimal so the JSON stays compact and stable.
            const double x1 = std::round((cx - bw / 2) * 10.0) / 10.0;
            const double y1 = std::round((cy - bh / 2) * 10.0) / 10.0;
            frame.gt = BBox{x1, y1, std::round((x1 + bw) * 10.0) / 10.0,
                            std::round((y1 + bh) * 10.0) / 10.0};
        }
        v.frames.push_back(std::move(frame));
    }
    return v;
}

void write_standalone_videos(const fs::path& root, std::uint64_t seed) {
    fs::create_directories(root / "videos");
    save_video_index((root / "videos" / "short_60.json").string(),
                     make_video("short_60", "lasher_like", "train", Modality::Thermal,
                                60, splitmix64(seed ^ 11)));
    save_video_index((root / "videos" / "mid_300.json").string(),
                     make_video("mid_300", "depthtrack_like", "train", Modality::Depth,
                                300, splitmix64(seed ^ 12)));
    save_video_index((root / "videos" / "long_5000.json").string(),
                     make_video("long_5000", "visevent_like", "train", Modality::Event,
                                5000, splitmix64(seed ^ 13)));
    save_video_index((root / "videos" / "absent_gt.json").string(),
                     make_video("absent_gt", "lasher_like", "train", Modality::Thermal,
                                200, splitmix64(seed ^ 14), 80, 120));
}

void write_mixed_corpus(const fs::path& root, std::uint64_t seed) {
    struct SubsetPlan {
        const char* name;
        Modality modality;
        int train_long;
        int test_long;
        int train_mid;    // ~280 frames, usually ends in a shorter trailing sample
        int train_short;  // < 80 frames, fixed short interval
    };
    // Long videos cap out at exactly 8 full groups, which keeps the
    // train:test sample ratios close to the planned subset proportions.
    const SubsetPlan plans[] = {
        {"lasher_like", Modality::Thermal, 19, 6, 1, 1},
        {"rgbt_like", Modality::Thermal, 6, 2, 1, 0},
        {"depthtrack_like", Modality::Depth, 6, 2, 1, 0},
        {"rgbd_like", Modality::Depth, 6, 1, 0, 0},
        {"visevent_like", Modality::Event, 7, 5, 1, 1},
    };
    fs::create_directories(root / "mixed");
    int serial = 0;
    for (const auto& plan : plans) {
        auto emit = [&](const std::string& tag, int count, const std::string& split,
                        int frames) {
            for (int i = 0; i < count; ++i) {
                const std::string id =
                    std::string(plan.name) + "_" + tag + "_" + std::to_string(i);
                save_video_index(
                    (root / "mixed" / (id + ".json")).string(),
                    make_video(id, plan.name, split, plan.modality, frames,
                               splitmix64(seed ^ (0x1000ull + serial++))));
            }
        };
        emit("train", plan.train_long, "train", 960);
        emit("test", plan.test_long, "test", 960);
        emit("mid", plan.train_mid, "train", 280);
        emit("short", plan.train_short, "train", 60);
    }
}

/// The mini corpus is engineered so the endpoint claims are exact:
/// - "thermal" appears only in the thermal split -> max contribution, weight 1
/// - "heat" has in-modality rate 0.1 and pooled-other rate 1/100 so its
///   smoothed Q is exactly 0.01 (|vocab| = 100, smoothing 0.5)
/// - "the" is relatively rarer inside thermal than outside, so its
///   contribution goes negative and floors to the minimum weight 0.05
void write_token_corpus(const fs::path& root) {
    auto join = [](const std::vector<std::string>& tokens) {
        std::string out;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) out += ' ';
            out += tokens[i];
        }
        return out;
    };
    auto filler = [](int i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "w%02d", i);
        return std::string(buf);
    };

    std::vector<std::string> thermal;
    for (int i = 0; i < 10; ++i) thermal.push_back("thermal");
    for (int i = 0; i < 10; ++i) thermal.push_back("heat");
    for (int i = 0; i < 10; ++i) thermal.push_back("the");
    for (int i = 1; i <= 70; ++i) thermal.push_back(filler(i));

    std::vector<std::string> depth;
    depth.push_back("heat");
    for (int i = 0; i < 10; ++i) depth.push_back("the");
    for (int i = 71; i <= 84; ++i) depth.push_back(filler(i));
    for (int i = 1; i <= 25; ++i) depth.push_back(filler(i));

    std::vector<std::string> event;
    for (int i = 0; i < 10; ++i) event.push_back("the");
    for (int i = 85; i <= 97; ++i) event.push_back(filler(i));
    for (int i = 26; i <= 52; ++i) event.push_back(filler(i));

    std::string out;
    auto emit = [&](const char* modality, const std::vector<std::string>& tokens) {
        nlohmann::json j{{"modality", modality}, {"text", join(tokens)}};
        out += j.dump();
        out += '\n';
    };
    emit("thermal", thermal);
    emit("depth", depth);
    emit("event", event);
    write_file(root / "corpus" / "vmcot_corpus.jsonl", out);
}

void write_response_cases(const fs::path& root, std::uint64_t seed) {
    nlohmann::json cases = nlohmann::json::array();
    auto add = [&](const std::string& name, const std::string& text, int n, bool ok) {
        cases.push_back({{"name", name}, {"text", text}, {"expected_n", n}, {"well_formed", ok}});
    };

    add("valid_minimal", "<think>t</think><answer>[[1,2,3,4],[5,6,7,8]]</answer>", 2, true);
    add("valid_prefix_suffix",
        "Sure, here is my reasoning. <think>target drifts right</think> "
        "<answer>[[0,0,4,4]]</answer> Done.",
        1, true);
    add("missing_think", "<answer>[[1,2,3,4]]</answer>", 1, false);
    add("dims_mismatch", "<think>t</think><answer>[[1,2,3,4]]</answer>", 6, false);
    add("duplicated_pair",
        "<think>a</think><think>b</think><answer>[[1,2,3,4]]</answer>", 1, false);
    add("overlapping",
        "<think>a<answer>[[1,2,3,4]]</answer>b</think>", 1, false);
    add("reversed_order", "<answer>[[1,2,3,4]]</answer><think>t</think>", 1, false);
    add("nan_coordinate", "<think>t</think><answer>[[NaN,2,3,4]]</answer>", 1, false);
    add("inf_coordinate", "<think>t</think><answer>[[Infinity,2,3,4]]</answer>", 1, false);
    add("not_numbers", "<think>t</think><answer>[[\"a\",2,3,4]]</answer>", 1, false);
    add("empty", "", 1, false);

    std::mt19937_64 rng(splitmix64(seed ^ 21));
    for (int i = 0; i < 4; ++i) {
        std::vector<BBox> boxes;
        const int n = uniform_int(rng, 1, 6);
        for (int b = 0; b < n; ++b) {
            const double x1 = std::round(uniform01(rng) * 500.0) / 10.0;
            const double y1 = std::round(uniform01(rng) * 400.0) / 10.0;
            boxes.push_back(BBox{x1, y1, x1 + uniform_int(rng, 5, 60),
                                 y1 + uniform_int(rng, 5, 60)});
        }
        add("valid_random_" + std::to_string(i),
            serialize_response("step " + std::to_string(i), boxes), n, true);
    }

    std::string out;
    for (const auto& c : cases) {
        out += c.dump();
        out += '\n';
    }
    write_file(root / "responses" / "cases.jsonl", out);
}

void write_rollout_traces(const fs::path& root, std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed ^ 31));
    std::vector<GroupRollout> groups;
    for (int g = 0; g < 2; ++g) {
        GroupRollout group;
        group.query_id = "fixture_q" + std::to_string(g);
        const int responses = 3 + g;
        for (int i = 0; i < responses; ++i) {
            ResponseTrace r;
            const int len = uniform_int(rng, 2, 4);
            for (int t = 0; t < len; ++t) {
                r.logprobs_new.push_back(-0.05 - std::abs(gaussian(rng)));
                r.logprobs_old.push_back(-0.05 - std::abs(gaussian(rng)));
                r.logprobs_ref.push_back(-0.05 - std::abs(gaussian(rng)));
            }
            r.reward = std::round(uniform01(rng) * 500.0) / 100.0;
            group.responses.push_back(std::move(r));
        }
        groups.push_back(std::move(group));
    }
    std::string out;
    for (const auto& g : groups) {
        out += rollout_to_jsonl_line(g);
        out += '\n';
    }
    write_file(root / "traces" / "rollouts.jsonl", out);
}

} // namespace

std::vector<GoldenCase> golden_cases() {
    std::vector<GoldenCase> cases;
    auto add = [&](GoldenCase c) { cases.push_back(std::move(c)); };

    add({"iou_identical", "iou",
         {{"a", {0, 0, 10, 10}}, {"b", {0, 0, 10, 10}}},
         1.0, "direct", "", 0.0});
    add({"iou_disjoint", "iou",
         {{"a", {0, 0, 10, 10}}, {"b", {20, 20, 30, 30}}},
         0.0, "direct", "", 0.0});
    add({"iou_quarter_overlap", "iou",
         {{"a", {0, 0, 10, 10}}, {"b", {5, 5, 15, 15}}},
         25.0 / 175.0, "oracle", "pixel rasterization count on the integer grid", 1e-12});

    add({"st_three_frames_half_iou", "st_reward",
         {{"intervals", {25, 50, 75}},
          {"pred", {{0, 0, 10, 5}, {0, 0, 10, 5}, {0, 0, 10, 5}}},
          {"gt", {{0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}}},
          {"delta", 5.0}},
         1.9582269742749626, "oracle",
         "per-frame log10 weight table times IoU, summed by hand", 1e-6});
    add({"st_single_frame", "st_reward",
         {{"intervals", {24}},
          {"pred", {{0, 0, 10, 10}}},
          {"gt", {{0, 0, 10, 10}}},
          {"delta", 5.0}},
         0.6989700043360189, "oracle", "single-term log10 evaluation", 1e-6});

    add({"advantages_0_1_2", "advantages", {{"rewards", {0.0, 1.0, 2.0}}},
         {-1.224744871391589, 0.0, 1.224744871391589}, "oracle",
         "closed-form mean and population std", 1e-6});
    add({"advantages_two_point", "advantages", {{"rewards", {0.0, 2.0}}},
         {-1.0, 1.0}, "oracle", "two-point case, population std = 1", 1e-6});

    add({"clip_up", "clipped_term",
         {{"ratio", 1.5}, {"advantage", 1.0}, {"clip", 0.2}}, 1.2, "oracle",
         "hand evaluation of min(ratio*A, clip*A)", 0.0});
    add({"clip_down", "clipped_term",
         {{"ratio", 0.5}, {"advantage", -1.0}, {"clip", 0.2}}, -0.8, "oracle",
         "hand evaluation of min(ratio*A, clip*A)", 0.0});
    add({"clip_identity", "clipped_term",
         {{"ratio", 1.0}, {"advantage", 0.7}, {"clip", 0.2}}, 0.7, "direct", "", 0.0});

    add({"kl_ratio_two", "kl",
         {{"logp_new", -1.0}, {"logp_ref", -1.0 + std::log(2.0)}},
         0.3068528194400547, "oracle", "rho - ln rho - 1 at rho = 2", 1e-12});
    add({"kl_ratio_half", "kl",
         {{"logp_new", -1.0}, {"logp_ref", -1.0 - std::log(2.0)}},
         0.1931471805599453, "oracle", "rho - ln rho - 1 at rho = 1/2", 1e-12});

    add({"contrib_ten_to_one", "contribution", {{"p", 0.1}, {"q", 0.01}},
         0.2302585092994046, "oracle", "0.1 * ln 10", 1e-12});
    add({"contrib_negative", "contribution", {{"p", 0.01}, {"q", 0.1}},
         -0.02302585092994046, "oracle", "0.01 * ln 0.1", 1e-12});
    add({"contrib_equal", "contribution", {{"p", 0.05}, {"q", 0.05}},
         0.0, "direct", "", 0.0});

    add({"weighted_loss_hand", "weighted_loss",
         {{"weights", {1.0, 0.05}}, {"logprobs", {-0.1, -2.0}}},
         0.2, "oracle", "hand arithmetic: 0.1 + 0.1", 1e-12});

    add({"acc_two_of_three", "acc",
         {{"gt", {{0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}}},
          {"pred", {{0, 0, 10, 6}, {0, 0, 10, 4}, {0, 0, 10, 9}}},
          {"threshold", 0.5}},
         2.0 / 3.0, "oracle", "hand count of per-frame IoUs 0.6, 0.4, 0.9", 1e-12});

    add({"serialize_minimal", "serialize",
         {{"think", "t"}, {"boxes", {{1, 2, 3, 4}}}},
         "<think>t</think> <answer>[[1, 2, 3, 4]]</answer>", "direct", "", 0.0});

    add({"short_video_keyframes", "keyframes_short",
         {{"frames", 60}}, {0, 13, 26, 39}, "reported",
         "fixed minimum interval for sub-80-frame videos", 0.0});

    return cases;
}

void generate_fixtures(const std::string& out_dir, std::uint64_t seed) {
    const fs::path root(out_dir);
    fs::create_directories(root);

    write_standalone_videos(root, seed);
    write_mixed_corpus(root, seed);
    write_token_corpus(root);
    write_response_cases(root, seed);
    write_rollout_traces(root, seed);

    std::string golden;
    for (const auto& c : golden_cases()) {
        nlohmann::json j{{"name", c.name},       {"kind", c.kind},
                         {"inputs", c.inputs},   {"expected", c.expected},
                         {"source", c.source},   {"oracle", c.oracle},
                         {"tolerance", c.tolerance}};
        golden += j.dump();
        golden += '\n';
    }
    write_file(root / "golden" / "cases.jsonl", golden);
}

std::string lockfile_for_tree(const std::string& dir) {
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    const fs::path root(dir);
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::uint64_t h = 14695981039346656037ull;
        char c;
        while (in.get(c)) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        entries.emplace_back(fs::relative(entry.path(), root).generic_string(), h);
    }
    std::sort(entries.begin(), entries.end());

    std::string out = "fixture_version " + std::to_string(kFixtureVersion) + "\n";
    for (const auto& [path, hash] : entries) {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(hash));
        out += std::string(buf) + " " + path + "\n";
    }
    return out;
}

} // namespace rgbx::fixtures
