#include "rgbx/reward.hpp"

#include <algorithm>
#include <cmath>

#include "rgbx/errors.hpp"
#include "rgbx/log.hpp"
#include "rgbx/mtw.hpp"

namespace rgbx {

double spatio_temporal_reward(const std::vector<int>& frame_intervals,
                              const std::vector<BBox>& pred,
                              const std::vector<std::optional<BBox>>& gt,
                              double delta) {
    if (delta <= 0.0) {
        throw ConfigError("spatio_temporal_reward: delta must be > 0");
    }
    if (delta <= 1.0) {
        // Legal but surprising: the earliest frame's weight becomes <= 0.
        log::warn("spatio_temporal_reward: delta <= 1 gives the earliest frame a non-positive weight");
    }
    if (frame_intervals.empty() || frame_intervals.size() != pred.size() ||
        pred.size() != gt.size()) {
        throw ArgumentError("spatio_temporal_reward: interval/pred/gt lengths must match and be >= 1");
    }
    const int dt_min = *std::min_element(frame_intervals.begin(), frame_intervals.end());
    double reward = 0.0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        const double w = std::log10(static_cast<double>(frame_intervals[n] - dt_min) + delta);
        reward += w * slot_iou(pred[n], gt[n]);
    }
    return reward;
}

double mean_iou_reward(const std::vector<BBox>& pred,
                       const std::vector<std::optional<BBox>>& gt) {
    if (pred.empty() || pred.size() != gt.size()) {
        throw ArgumentError("mean_iou_reward: pred/gt lengths must match and be >= 1");
    }
    double sum = 0.0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        sum += slot_iou(pred[n], gt[n]);
    }
    return sum / static_cast<double>(pred.size());
}

std::optional<Modality> extract_modality_claim(const std::string& think_text) {
    const auto tokens = tokenize_words(think_text);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (tokens[i] == "modality") {
            return parse_modality(tokens[i + 1]);
        }
    }
    return std::nullopt;
}

double modality_reward(const std::optional<Modality>& pred_modality,
                       Modality true_modality, bool modality_known,
                       const std::string& think_text,
                       const std::string& reference) {
    if (reference.empty()) {
        throw ConfigError("modality_reward: reference trace must be non-empty");
    }
    if (!modality_known) {
        if (!pred_modality.has_value() || *pred_modality != true_modality) {
            return 0.0;
        }
    }
    const auto ref_tokens = tokenize_words(reference);
    if (ref_tokens.empty()) {
        throw ConfigError("modality_reward: reference trace has no tokens");
    }
    const auto pred_tokens = tokenize_words(think_text);
    const std::size_t overlap = std::min(ref_tokens.size(), pred_tokens.size());
    std::size_t matches = 0;
    for (std::size_t i = 0; i < overlap; ++i) {
        if (pred_tokens[i] == ref_tokens[i]) ++matches;
    }
    // Length mismatches count as misses on either side, so only an
    // identical token sequence reaches 1.
    const std::size_t span = std::max(ref_tokens.size(), pred_tokens.size());
    return static_cast<double>(matches) / static_cast<double>(span);
}

RewardBreakdown total_reward(const ParsedResponse& p, const RewardContext& ctx,
                             const RewardConfig& cfg) {
    RewardBreakdown out;
    out.format = format_reward(p);

    // Spatial reward survives a format violation as long as the box list
    // itself came out with the right count; the format reward alone
    // penalizes the grammar.
    if (p.answer_boxes.size() == ctx.ground_truth.size() && !p.answer_boxes.empty()) {
        out.spatio_temporal =
            ctx.use_mean_iou
                ? mean_iou_reward(p.answer_boxes, ctx.ground_truth)
                : spatio_temporal_reward(ctx.frame_intervals, p.answer_boxes,
                                         ctx.ground_truth, cfg.delta);
    }

    out.modality = modality_reward(extract_modality_claim(p.think_text),
                                   ctx.true_modality, ctx.modality_known,
                                   p.think_text, ctx.reference_cot);

    out.total = out.spatio_temporal + out.modality + out.format;
    return out;
}

} // namespace rgbx
