#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgbx/geometry.hpp"
#include "rgbx/response.hpp"
#include "rgbx/types.hpp"

namespace rgbx {

struct RewardConfig {
    /// Offset inside the log10 frame weight; must be > 0. Values <= 1 give
    /// the earliest frame a non-positive weight, which is legal here but
    /// worth knowing about.
    double delta = 5.0;
};

/// One scored response, decomposed into its three components.
/// total == spatio_temporal + modality + format, exactly.
struct RewardBreakdown {
    double spatio_temporal = 0.0;
    double modality = 0.0;
    double format = 0.0;
    double total = 0.0;
};

/// Frame-weighted IoU reward: sum_n log10(dt_n - dt_min + delta) * IoU_n.
/// Later frames carry strictly larger weights, so accurate grounding late
/// in the sequence pays more than coincidental matches early on.
/// Absent-target frames score IoU 1 when the prediction is the absence
/// sentinel, 0 otherwise.
double spatio_temporal_reward(const std::vector<int>& frame_intervals,
                              const std::vector<BBox>& pred,
                              const std::vector<std::optional<BBox>>& gt,
                              double delta);

/// Plain mean-IoU variant, for the ablation that drops frame weighting.
double mean_iou_reward(const std::vector<BBox>& pred,
                       const std::vector<std::optional<BBox>>& gt);

/// Mean token accuracy of the reasoning text against a reference trace:
/// positional matches over the longer of the two token sequences, so
/// missing and surplus positions are both misses and only an identical
/// sequence scores 1. Modality-unknown samples additionally require a
/// correct modality classification; a wrong or missing classification
/// zeroes the reward. Modality-known samples skip the gate.
double modality_reward(const std::optional<Modality>& pred_modality,
                       Modality true_modality, bool modality_known,
                       const std::string& think_text,
                       const std::string& reference);

/// Reads a `modality: <name>` declaration out of reasoning text.
std::optional<Modality> extract_modality_claim(const std::string& think_text);

/// Everything about the sample a response is scored against.
struct RewardContext {
    std::vector<int> frame_intervals;
    std::vector<std::optional<BBox>> ground_truth;
    Modality true_modality = Modality::Thermal;
    bool modality_known = true;
    std::string reference_cot;
    bool use_mean_iou = false;  // ablation switch: mean IoU instead of frame-weighted
};

/// Compose the three components for one parsed response. A malformed
/// response keeps its spatial reward as long as the boxes were extractable
/// with the right count; the modality classification is read from the
/// think block.
RewardBreakdown total_reward(const ParsedResponse& p, const RewardContext& ctx,
                             const RewardConfig& cfg = {});

} // namespace rgbx
