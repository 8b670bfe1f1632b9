#pragma once

#include <string>
#include <vector>

namespace rgbx {

/// One sampled response inside a rollout group: the reward it earned and
/// its per-token log-probabilities under the current, behavior, and
/// reference policies. The three traces must have equal length.
struct ResponseTrace {
    std::vector<double> logprobs_new;
    std::vector<double> logprobs_old;
    std::vector<double> logprobs_ref;
    double reward = 0.0;

    std::size_t length() const { return logprobs_new.size(); }
};

/// G responses sampled for one query.
struct GroupRollout {
    std::string query_id;
    std::vector<ResponseTrace> responses;

    std::vector<double> rewards() const;
    /// Throws ArgumentError when G < 2, trace lengths disagree across
    /// policies, or any logprob is positive or non-finite.
    void validate() const;
};

struct GrpoConfig {
    double clip = 0.2;       // ratio clip half-width, in (0,1)
    double beta = 0.05;      // KL regularization coefficient, >= 0
    double std_guard = 1e-8; // added to the reward std before dividing
    bool sample_std = false; // population std by default
    /// Pessimistic min(ratio*A, clip(ratio)*A) surrogate by default; the
    /// clip-only single-term variant is kept for fidelity experiments.
    bool pessimistic = true;

    void validate() const;
};

/// Group-standardized advantages: (r_i - mean) / (std + guard).
/// Population standard deviation unless sample_std is set.
/// Throws ArgumentError when fewer than two rewards are given.
std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double std_guard = 1e-8,
                                     bool sample_std = false);

/// Probability ratio exp(logp_new - logp_old). Throws ArgumentError on
/// non-finite input.
double prob_ratio(double logp_new, double logp_old);

/// Clipped surrogate for one token: min(ratio*adv, clip(ratio, 1+-eps)*adv)
/// in the pessimistic form, or the clipped term alone when pessimistic is
/// off.
double clipped_term(double ratio, double advantage, double clip_eps,
                    bool pessimistic = true);

/// Non-negative per-token KL estimator rho - log(rho) - 1 with
/// rho = exp(logp_ref - logp_new). Zero exactly when the policies agree on
/// the token.
double kl_penalty(double logp_new, double logp_ref);

/// The group objective: mean over responses of the length-normalized sum of
/// clipped surrogate terms minus beta times the per-token KL penalty, with
/// each response's advantage broadcast to all of its tokens.
double grpo_objective(const GroupRollout& rollout, const GrpoConfig& cfg = {});

/// JSONL bridge for rollouts produced by external trainers: one group per
/// line with rewards and the three logprob arrays.
std::string rollout_to_jsonl_line(const GroupRollout& rollout);
GroupRollout rollout_from_jsonl_line(const std::string& line);
std::vector<GroupRollout> load_rollouts(const std::string& path);
void save_rollouts(const std::string& path, const std::vector<GroupRollout>& rollouts);

} // namespace rgbx
