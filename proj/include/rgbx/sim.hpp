#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rgbx/geometry.hpp"
#include "rgbx/grpo.hpp"
#include "rgbx/reward.hpp"
#include "rgbx/types.hpp"

namespace rgbx::sim {

struct EnvConfig {
    int grid = 64;                     // square coordinate space
    int n_frames = 3;                  // search frames per episode
    int gap_min = 24;                  // frame-interval schedule bounds
    int gap_max = 29;
    double box_side = 10.0;            // target box edge length
    double drift_per_frame = 0.18;     // linear drift speed, pixels per frame
    double jitter = 1.5;               // per-frame trajectory noise
    double p_modality_unknown = 0.2;   // fraction of episodes hiding the X modality
    /// Snap the trajectory onto policy-representable boxes so an oracle
    /// policy can reach IoU 1 (used by probe tests).
    bool grid_aligned = false;
    int align_cells = 8;
    std::uint64_t seed = 0;
};

/// Which streams lose useful signal on a frame (metadata mirroring the
/// degraded conditions real sequences exhibit; scoring ignores it).
struct FrameDegradation {
    bool rgb = false;
    bool x = false;
};

/// One synthetic grounding episode: a template box at frame 0 and a
/// drifting target across N search frames. Deterministic under the seed.
struct SyntheticEnv {
    EnvConfig cfg;
    BBox template_box;
    std::vector<int> frame_intervals;
    std::vector<std::optional<BBox>> ground_truth;
    std::vector<FrameDegradation> degradation;
    Modality modality = Modality::Thermal;
    bool modality_known = true;
    std::string reference_cot;

    static SyntheticEnv make(const EnvConfig& cfg);
    int n_frames() const { return static_cast<int>(ground_truth.size()); }
    RewardContext reward_context(bool use_mean_iou) const;
};

struct PolicyConfig {
    int grid_cells = 8;                       // K: box centers on a KxK lattice
    std::vector<double> size_bins{6.0, 10.0, 16.0};
    double temperature = 1.0;
    /// When set, the response grammar is controlled by a learned two-way
    /// head (well-formed vs think-less output) instead of always emitting
    /// well-formed text.
    bool policy_format = true;

    int actions_per_frame() const {
        return grid_cells * grid_cells * static_cast<int>(size_bins.size());
    }
};

/// Independent categorical heads: one optional format head followed by one
/// head per search frame. Tokens of a response are exactly these choices.
struct PolicyParams {
    std::vector<std::vector<double>> heads;

    static PolicyParams uniform(const PolicyConfig& cfg, int n_frames);
    bool finite() const;
};

/// Decode a frame-head action index into its box.
BBox decode_action(int action, const PolicyConfig& cfg, int grid);

/// Action with the highest IoU against a target box (exhaustive scan).
int best_action_for(const BBox& target, const PolicyConfig& cfg, int grid);

/// Log-probabilities of one head at the configured temperature.
std::vector<double> head_logprobs(const std::vector<double>& logits, double temperature);

/// One sampled response plus the bookkeeping the sim keeps next to the
/// grpo-core trace.
struct SimResponse {
    std::vector<int> actions;
    std::vector<BBox> boxes;
    std::string raw_text;
    RewardBreakdown breakdown;
};

struct SimRollout {
    GroupRollout group;
    std::vector<SimResponse> responses;
};

/// Sample G responses from the behavior policy, serialize each through the
/// response grammar, re-parse, score with the composed reward, and record
/// exact per-token logprobs under the new/old/reference parameters.
SimRollout rollout_group(const SyntheticEnv& env, const PolicyParams& params_new,
                         const PolicyParams& params_old, const PolicyParams& params_ref,
                         int group_size, std::uint64_t seed,
                         const PolicyConfig& pcfg, const RewardConfig& rcfg,
                         bool use_mean_iou);

/// Re-evaluate the group objective for candidate parameters against a
/// fixed rollout (actions, behavior/reference traces and rewards stay
/// put). This is the function the analytic gradient differentiates.
double objective_for_params(const PolicyParams& candidate, const SimRollout& rollout,
                            const PolicyConfig& pcfg, const GrpoConfig& gcfg);

/// Analytic gradient of objective_for_params at `params`.
std::vector<std::vector<double>> objective_gradient(const PolicyParams& params,
                                                    const SimRollout& rollout,
                                                    const PolicyConfig& pcfg,
                                                    const GrpoConfig& gcfg);

struct TrainConfig {
    int steps = 500;
    int group_size = 8;
    double learning_rate = 1.0;
    std::uint64_t seed = 0;
    GrpoConfig grpo;
    RewardConfig reward;
    PolicyConfig policy;
    bool use_mean_iou = false;  // ablation: mean-IoU reward instead of frame-weighted
    /// Control knob for no-signal experiments: every response reward is
    /// replaced by this constant when set.
    std::optional<double> reward_override;
};

struct TraceRow {
    int step = 0;
    double st_mean = 0.0;
    double mu_mean = 0.0;
    double format_mean = 0.0;
    double total_mean = 0.0;
    double kl_mean = 0.0;
};

struct TrainResult {
    PolicyParams params;
    std::vector<TraceRow> trace;
};

/// Gradient-ascent loop: rollout, group advantages, analytic step. The
/// behavior policy refreshes every step; the reference stays at the
/// initial parameters. Throws on non-finite parameters.
TrainResult train(const SyntheticEnv& env, const PolicyParams& init,
                  const TrainConfig& cfg);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

/// Mean exact KL between the two policies' head distributions.
double policy_kl(const PolicyParams& a, const PolicyParams& b, const PolicyConfig& cfg);

/// Diagnoses coordinate-pattern guessing: does the policy's output track
/// the moving target or stay glued to the template coordinates?
struct GuessingProbeReport {
    std::vector<double> frame_mean_iou;  // sampled, per frame
    double template_affinity = 0.0;      // mean IoU(prediction, template box)
    double target_affinity = 0.0;        // mean IoU(prediction, ground truth)
    double greedy_acc_at_half = 0.0;     // Acc@0.5 of the greedy decode
    bool template_locked = false;
};

GuessingProbeReport guessing_probe(const SyntheticEnv& env, const PolicyParams& params,
                                   const PolicyConfig& pcfg, int n_rollouts = 64,
                                   std::uint64_t seed = 1);

} // namespace rgbx::sim
