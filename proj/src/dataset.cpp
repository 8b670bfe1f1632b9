#include "rgbx/dataset.hpp"

#include <fstream>
#include <random>

#include <json.hpp>

#include "rgbx/errors.hpp"
#include "rgbx/log.hpp"

namespace rgbx {

namespace {

std::uint64_t fnv1a(const std::string& text, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ull ^ seed;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Bounded draw with rejection, so results depend only on the engine
// stream and not on the standard library's distribution implementation.
int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % span;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return lo + static_cast<int>(draw % span);
}

nlohmann::json bbox_to_json(const BBox& b) {
    return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2});
}

BBox bbox_from_json(const nlohmann::json& j, BoxFormat format) {
    if (!j.is_array() || j.size() != 4) {
        throw IoError("box must be a 4-element array");
    }
    return bbox_from_quad({j[0].get<double>(), j[1].get<double>(),
                           j[2].get<double>(), j[3].get<double>()},
                          format);
}

} // namespace

void BuildConfig::validate() const {
    if (interval_min <= 0 || interval_max < interval_min) {
        throw ConfigError("keyframe intervals must satisfy 0 < interval_min <= interval_max");
    }
    if (short_interval <= 0 || short_video_threshold <= 0 ||
        max_groups_per_video <= 0 || keyframes_per_group < 3 || first_keyframe < 0) {
        throw ConfigError("build config fields must be positive (keyframes_per_group >= 3)");
    }
}

VideoIndex load_video_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open video index: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("video index " + path + ": " + e.what());
    }
    VideoIndex v;
    v.video_id = j.at("video_id").get<std::string>();
    v.subset = j.value("subset", "default");
    v.split = j.value("split", "");
    const auto m = parse_modality(j.at("modality").get<std::string>());
    if (!m || *m == Modality::Rgb) {
        throw IoError("video index " + path + ": modality must be thermal, depth or event");
    }
    v.modality = *m;
    const BoxFormat fmt =
        parse_box_format(j.value("bbox_format", "xyxy")).value_or(BoxFormat::Xyxy);
    for (const auto& fj : j.at("frames")) {
        VideoFrame f;
        f.rgb_image = fj.at("rgb").get<std::string>();
        f.x_image = fj.at("x").get<std::string>();
        if (fj.contains("gt") && !fj["gt"].is_null()) {
            f.gt = bbox_from_json(fj["gt"], fmt);
        }
        v.frames.push_back(std::move(f));
    }
    return v;
}

void save_video_index(const std::string& path, const VideoIndex& video) {
    nlohmann::json j;
    j["video_id"] = video.video_id;
    j["subset"] = video.subset;
    j["split"] = video.split;
    j["modality"] = to_string(video.modality);
    j["bbox_format"] = "xyxy";
    auto& frames = j["frames"] = nlohmann::json::array();
    for (const auto& f : video.frames) {
        nlohmann::json fj{{"rgb", f.rgb_image}, {"x", f.x_image}};
        fj["gt"] = f.gt ? bbox_to_json(*f.gt) : nlohmann::json();
        frames.push_back(std::move(fj));
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write video index: " + path);
    }
    out << j.dump(2) << '\n';
}

std::vector<std::vector<int>> sample_keyframes(const VideoIndex& video,
                                               const BuildConfig& cfg) {
    cfg.validate();
    const int total = video.total_frames();
    const bool short_video = total < cfg.short_video_threshold;

    std::mt19937_64 rng(fnv1a(video.video_id, cfg.seed));

    std::vector<int> keyframes;
    int frame = cfg.first_keyframe;
    const int max_keyframes = cfg.max_groups_per_video * cfg.keyframes_per_group;
    while (frame < total && static_cast<int>(keyframes.size()) < max_keyframes) {
        keyframes.push_back(frame);
        const int gap = short_video
                            ? cfg.short_interval
                            : uniform_int(rng, cfg.interval_min, cfg.interval_max);
        frame += gap;
    }

    std::vector<std::vector<int>> groups;
    std::size_t i = 0;
    while (i + cfg.keyframes_per_group <= keyframes.size()) {
        groups.emplace_back(keyframes.begin() + i,
                            keyframes.begin() + i + cfg.keyframes_per_group);
        i += cfg.keyframes_per_group;
    }
    // A trailing group one keyframe short still makes a (shorter) sample.
    const std::size_t leftover = keyframes.size() - i;
    if (leftover == static_cast<std::size_t>(cfg.keyframes_per_group - 1) &&
        static_cast<int>(groups.size()) < cfg.max_groups_per_video) {
        groups.emplace_back(keyframes.begin() + i, keyframes.end());
    }
    if (groups.empty()) {
        log::info("video " + video.video_id + " skipped: " + std::to_string(total) +
                  " frames is too short for a keyframe group");
    }
    return groups;
}

std::optional<MIGSample> build_sample(const std::vector<int>& group,
                                      const VideoIndex& video, int group_number,
                                      std::string* skip_reason) {
    if (group.size() < 3) {
        if (skip_reason) *skip_reason = "group has fewer than 3 keyframes";
        return std::nullopt;
    }
    const int template_frame = group[0];
    const auto& tf = video.frames.at(template_frame);
    if (!tf.gt.has_value()) {
        if (skip_reason) {
            *skip_reason = "template keyframe " + std::to_string(template_frame) + " has no box";
        }
        return std::nullopt;
    }

    MIGSample s;
    s.sample_id = video.video_id + "_g" + std::to_string(group_number);
    s.query = "Locate the target marked in the template images across every search image.";
    s.subset = video.subset;
    s.split = video.split;
    s.template_frame_index = template_frame;
    s.template_rgb = {tf.rgb_image, *tf.gt};
    s.template_x = {tf.x_image, video.modality};

    for (std::size_t k = 1; k < group.size(); ++k) {
        const int frame = group[k];
        const auto& vf = video.frames.at(frame);
        s.search_images.push_back({vf.rgb_image, Modality::Rgb, frame});
        s.search_images.push_back({vf.x_image, video.modality, frame});
        s.ground_truth.push_back(vf.gt);
        s.ground_truth.push_back(vf.gt);
    }
    s.validate();
    return s;
}

std::vector<MIGSample> build_video_samples(const VideoIndex& video,
                                           const BuildConfig& cfg) {
    if (video.split != "train" && video.split != "test") {
        throw ConfigError("video " + video.video_id +
                          " has no split; sources without predefined splits must be "
                          "partitioned first (see assign_split)");
    }
    std::vector<MIGSample> out;
    const auto groups = sample_keyframes(video, cfg);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::string reason;
        auto sample = build_sample(groups[g], video, static_cast<int>(g + 1), &reason);
        if (sample) {
            out.push_back(std::move(*sample));
        } else {
            log::info("video " + video.video_id + " group " + std::to_string(g + 1) +
                      " skipped: " + reason);
        }
    }
    return out;
}

std::string assign_split(const std::string& video_id, double train_fraction,
                         std::uint64_t seed) {
    const std::uint64_t h = fnv1a(video_id, seed);
    const double u = static_cast<double>(h % 1000000ull) / 1000000.0;
    return u < train_fraction ? "train" : "test";
}

ManifestStats manifest_stats(const std::vector<MIGSample>& samples) {
    ManifestStats stats;
    for (const auto& s : samples) {
        ++stats.samples;
        stats.images += 2 + s.n();
        ++stats.by_subset_split[s.subset][s.split];
        ++stats.by_modality[to_string(s.template_x.modality)];
        ++stats.by_structure["n" + std::to_string(s.n())];
    }
    return stats;
}

ManifestStats emit_manifest(const std::vector<MIGSample>& samples,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write manifest: " + path);
    }
    for (const auto& s : samples) {
        s.validate();
        nlohmann::json j;
        j["schema_version"] = 1;
        j["sample_id"] = s.sample_id;
        j["query"] = s.query;
        j["bbox_format"] = "xyxy";
        j["subset"] = s.subset;
        j["split"] = s.split;
        j["modality"] = to_string(s.template_x.modality);
        j["modality_known"] = s.modality_known;
        j["template"] = {{"rgb_image", s.template_rgb.image},
                         {"x_image", s.template_x.image},
                         {"frame_index", s.template_frame_index},
                         {"box", bbox_to_json(s.template_rgb.box)}};
        auto& search = j["search"] = nlohmann::json::array();
        for (const auto& img : s.search_images) {
            search.push_back({{"image", img.image},
                              {"modality", to_string(img.modality)},
                              {"frame_index", img.frame_index}});
        }
        auto& gt = j["ground_truth"] = nlohmann::json::array();
        for (const auto& slot : s.ground_truth) {
            gt.push_back(slot ? bbox_to_json(*slot) : nlohmann::json());
        }
        out << j.dump() << '\n';
    }

    const ManifestStats stats = manifest_stats(samples);
    nlohmann::json sj;
    sj["schema_version"] = 1;
    sj["totals"] = {{"samples", stats.samples}, {"images", stats.images}};
    sj["by_subset_split"] = stats.by_subset_split;
    sj["by_modality"] = stats.by_modality;
    sj["by_structure"] = stats.by_structure;
    std::ofstream stats_out(path + ".stats.json");
    if (!stats_out) {
        throw IoError("cannot write manifest stats: " + path + ".stats.json");
    }
    stats_out << sj.dump(2) << '\n';
    return stats;
}

std::vector<MIGSample> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest: " + path);
    }
    std::vector<MIGSample> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw IoError("manifest " + path + " line " + std::to_string(line_no) +
                          ": malformed JSON");
        }
        const BoxFormat fmt =
            parse_box_format(j.value("bbox_format", "xyxy")).value_or(BoxFormat::Xyxy);
        MIGSample s;
        s.sample_id = j.at("sample_id").get<std::string>();
        s.query = j.value("query", "");
        s.subset = j.value("subset", "default");
        s.split = j.value("split", "train");
        s.modality_known = j.value("modality_known", true);
        s.bbox_format = fmt;
        const auto m = parse_modality(j.at("modality").get<std::string>());
        if (!m) throw IoError("manifest: unknown modality on line " + std::to_string(line_no));
        const auto& tj = j.at("template");
        s.template_frame_index = tj.at("frame_index").get<int>();
        s.template_rgb = {tj.at("rgb_image").get<std::string>(),
                          bbox_from_json(tj.at("box"), fmt)};
        s.template_x = {tj.at("x_image").get<std::string>(), *m};
        for (const auto& ij : j.at("search")) {
            const auto im = parse_modality(ij.at("modality").get<std::string>());
            if (!im) throw IoError("manifest: unknown search modality on line " + std::to_string(line_no));
            s.search_images.push_back({ij.at("image").get<std::string>(), *im,
                                       ij.at("frame_index").get<int>()});
        }
        for (const auto& gj : j.at("ground_truth")) {
            if (gj.is_null()) {
                s.ground_truth.emplace_back(std::nullopt);
            } else {
                s.ground_truth.emplace_back(bbox_from_json(gj, fmt));
            }
        }
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open predictions: " + path);
    }
    std::vector<PredictionRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw IoError("predictions " + path + " line " + std::to_string(line_no) +
                          ": malformed JSON");
        }
        const BoxFormat fmt =
            parse_box_format(j.value("bbox_format", "xyxy")).value_or(BoxFormat::Xyxy);
        PredictionRecord p;
        p.sample_id = j.at("sample_id").get<std::string>();
        for (const auto& bj : j.at("boxes")) {
            p.boxes.push_back(bbox_from_json(bj, fmt));
        }
        if (j.contains("modality_guess") && !j["modality_guess"].is_null()) {
            p.modality_guess = parse_modality(j["modality_guess"].get<std::string>());
        }
        if (j.contains("think_text") && !j["think_text"].is_null()) {
            p.think_text = j["think_text"].get<std::string>();
        }
        out.push_back(std::move(p));
    }
    return out;
}

void save_predictions(const std::string& path,
                      const std::vector<PredictionRecord>& preds) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write predictions: " + path);
    }
    for (const auto& p : preds) {
        nlohmann::json j;
        j["sample_id"] = p.sample_id;
        j["bbox_format"] = "xyxy";
        auto& boxes = j["boxes"] = nlohmann::json::array();
        for (const auto& b : p.boxes) boxes.push_back(bbox_to_json(b));
        if (p.modality_guess) j["modality_guess"] = to_string(*p.modality_guess);
        if (p.think_text) j["think_text"] = *p.think_text;
        out << j.dump() << '\n';
    }
}

} // namespace rgbx
