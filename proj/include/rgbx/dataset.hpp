#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rgbx/types.hpp"

namespace rgbx {

/// One frame of a normalized RGBX tracking video: aligned RGB and X image
/// paths plus the annotated target box (absent when the target is out of
/// frame).
struct VideoFrame {
    std::string rgb_image;
    std::string x_image;
    std::optional<BBox> gt;
};

/// Normalized ingestion format for one source video. Adapters for the
/// source datasets' native annotation formats are out of scope; this JSON
/// shape is the builder's input contract.
struct VideoIndex {
    std::string video_id;
    std::string subset;
    std::string split;  // "train" | "test"
    Modality modality = Modality::Thermal;
    std::vector<VideoFrame> frames;

    int total_frames() const { return static_cast<int>(frames.size()); }
};

VideoIndex load_video_index(const std::string& path);
void save_video_index(const std::string& path, const VideoIndex& video);

struct BuildConfig {
    int interval_min = 24;
    int interval_max = 29;
    int short_video_threshold = 80;  // below this, the fixed short interval applies
    int short_interval = 13;
    int max_groups_per_video = 8;
    int keyframes_per_group = 4;
    int first_keyframe = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Keyframe index groups for one video. Full groups have
/// keyframes_per_group keyframes; a trailing group may degrade to one
/// fewer when the video ends, producing a shorter sample. Spacing is drawn
/// uniformly from [interval_min, interval_max] per gap (deterministic
/// under the seed), or fixed at short_interval for short videos. Videos
/// too short for even a degraded group yield an empty list.
std::vector<std::vector<int>> sample_keyframes(const VideoIndex& video,
                                               const BuildConfig& cfg);

/// Assemble one grounding sample from a keyframe group: the first keyframe
/// becomes the RGB+X template pair, the rest contribute interleaved RGB/X
/// search images with per-image ground-truth slots. Returns nothing (with
/// the reason) when the template keyframe has no box.
std::optional<MIGSample> build_sample(const std::vector<int>& group,
                                      const VideoIndex& video, int group_number,
                                      std::string* skip_reason = nullptr);

/// All samples for one video under the config.
std::vector<MIGSample> build_video_samples(const VideoIndex& video,
                                           const BuildConfig& cfg);

/// Deterministic video-level split for sources without a predefined one:
/// hashes (seed, video_id) and assigns "train" below the fraction.
std::string assign_split(const std::string& video_id, double train_fraction,
                         std::uint64_t seed);

struct ManifestStats {
    int samples = 0;
    int images = 0;
    std::map<std::string, std::map<std::string, int>> by_subset_split;
    std::map<std::string, int> by_modality;
    std::map<std::string, int> by_structure;  // "n6" / "n4" sample shapes
};

/// Write samples as JSONL (one validated sample per line, stable field
/// order) plus a <path>.stats.json sidecar with corpus counts.
ManifestStats emit_manifest(const std::vector<MIGSample>& samples,
                            const std::string& path);

/// Load and validate a manifest written by emit_manifest.
std::vector<MIGSample> load_manifest(const std::string& path);

ManifestStats manifest_stats(const std::vector<MIGSample>& samples);

/// Prediction records as JSONL; each line carries its bbox_format
/// (defaulting to corner form) and is converted on read.
std::vector<PredictionRecord> load_predictions(const std::string& path);
void save_predictions(const std::string& path,
                      const std::vector<PredictionRecord>& preds);

} // namespace rgbx
