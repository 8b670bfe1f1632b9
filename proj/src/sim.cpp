#include "rgbx/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include "rgbx/errors.hpp"
#include "rgbx/response.hpp"

namespace rgbx::sim {

namespace {

constexpr const char* kThinkPhrase =
    "the target keeps its appearance across frames so both modalities agree on its position";

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

// Box-Muller, one value per call; deterministic across platforms.
double gaussian(std::mt19937_64& rng) {
    const double u1 = std::max(uniform01(rng), 1e-300);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}

std::string build_think(Modality declared) {
    return "modality: " + to_string(declared) + ". " + kThinkPhrase;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace

SyntheticEnv SyntheticEnv::make(const EnvConfig& cfg) {
    SyntheticEnv env;
    env.cfg = cfg;
    std::mt19937_64 rng(splitmix64(cfg.seed));

    const double grid = static_cast<double>(cfg.grid);
    const double side = cfg.box_side;
    const double margin = side / 2.0 + 1.0;

    double cx = margin + uniform01(rng) * (grid - 2.0 * margin);
    double cy = margin + uniform01(rng) * (grid - 2.0 * margin);
    const double angle = uniform01(rng) * 2.0 * 3.141592653589793;
    const double vx = cfg.drift_per_frame * std::cos(angle);
    const double vy = cfg.drift_per_frame * std::sin(angle);

    const double cell = grid / static_cast<double>(cfg.align_cells);
    auto make_box = [&](double x, double y) {
        if (cfg.grid_aligned) {
            x = (std::floor(std::clamp(x, 0.0, grid - 1e-9) / cell) + 0.5) * cell;
            y = (std::floor(std::clamp(y, 0.0, grid - 1e-9) / cell) + 0.5) * cell;
        }
        x = std::clamp(x, side / 2.0, grid - side / 2.0);
        y = std::clamp(y, side / 2.0, grid - side / 2.0);
        return BBox{x - side / 2.0, y - side / 2.0, x + side / 2.0, y + side / 2.0};
    };

    env.template_box = make_box(cx, cy);

    int frame = 0;
    for (int n = 0; n < cfg.n_frames; ++n) {
        frame += uniform_int(rng, cfg.gap_min, cfg.gap_max);
        env.frame_intervals.push_back(frame);
        const double jx = cfg.grid_aligned ? 0.0 : gaussian(rng) * cfg.jitter;
        const double jy = cfg.grid_aligned ? 0.0 : gaussian(rng) * cfg.jitter;
        env.ground_truth.emplace_back(
            make_box(cx + vx * frame + jx, cy + vy * frame + jy));
    }

    env.modality = kXModalities[static_cast<std::size_t>(uniform_int(rng, 0, 2))];
    env.modality_known = uniform01(rng) >= cfg.p_modality_unknown;
    env.reference_cot = build_think(env.modality);
    for (int n = 0; n < cfg.n_frames; ++n) {
        // At most one stream degrades per frame, like the source sequences.
        FrameDegradation d;
        const double u = uniform01(rng);
        if (u < 0.2) {
            d.rgb = true;
        } else if (u < 0.4) {
            d.x = true;
        }
        env.degradation.push_back(d);
    }
    return env;
}

RewardContext SyntheticEnv::reward_context(bool use_mean_iou) const {
    RewardContext ctx;
    ctx.frame_intervals = frame_intervals;
    ctx.ground_truth = ground_truth;
    ctx.true_modality = modality;
    ctx.modality_known = modality_known;
    ctx.reference_cot = reference_cot;
    ctx.use_mean_iou = use_mean_iou;
    return ctx;
}

PolicyParams PolicyParams::uniform(const PolicyConfig& cfg, int n_frames) {
    PolicyParams p;
    if (cfg.policy_format) {
        p.heads.emplace_back(2, 0.0);
    }
    for (int i = 0; i < n_frames; ++i) {
        p.heads.emplace_back(static_cast<std::size_t>(cfg.actions_per_frame()), 0.0);
    }
    return p;
}

bool PolicyParams::finite() const {
    for (const auto& head : heads) {
        for (double v : head) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

BBox decode_action(int action, const PolicyConfig& cfg, int grid) {
    const int s = static_cast<int>(cfg.size_bins.size());
    const int size_idx = action % s;
    const int cell_idx = action / s;
    const int cx_idx = cell_idx % cfg.grid_cells;
    const int cy_idx = cell_idx / cfg.grid_cells;
    const double cell = static_cast<double>(grid) / cfg.grid_cells;
    const double side = cfg.size_bins[static_cast<std::size_t>(size_idx)];
    double cx = (cx_idx + 0.5) * cell;
    double cy = (cy_idx + 0.5) * cell;
    cx = std::clamp(cx, side / 2.0, grid - side / 2.0);
    cy = std::clamp(cy, side / 2.0, grid - side / 2.0);
    return BBox{cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0};
}

int best_action_for(const BBox& target, const PolicyConfig& cfg, int grid) {
    int best = 0;
    double best_iou = -1.0;
    for (int a = 0; a < cfg.actions_per_frame(); ++a) {
        const double v = iou(decode_action(a, cfg, grid), target);
        if (v > best_iou) {
            best_iou = v;
            best = a;
        }
    }
    return best;
}

std::vector<double> head_logprobs(const std::vector<double>& logits, double temperature) {
    std::vector<double> z(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) z[i] = logits[i] / temperature;
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (auto& v : z) v -= lse;
    return z;
}

namespace {

std::vector<double> head_probs(const std::vector<double>& logits, double temperature) {
    auto lp = head_logprobs(logits, temperature);
    for (auto& v : lp) v = std::exp(v);
    return lp;
}

int sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

} // namespace

SimRollout rollout_group(const SyntheticEnv& env, const PolicyParams& params_new,
                         const PolicyParams& params_old, const PolicyParams& params_ref,
                         int group_size, std::uint64_t seed,
                         const PolicyConfig& pcfg, const RewardConfig& rcfg,
                         bool use_mean_iou) {
    if (group_size < 2) {
        throw ArgumentError("rollout_group: group size must be >= 2");
    }
    const int n = env.n_frames();
    const std::size_t n_heads = params_old.heads.size();
    const std::size_t expected = static_cast<std::size_t>(n) + (pcfg.policy_format ? 1 : 0);
    if (n_heads != expected || params_new.heads.size() != n_heads ||
        params_ref.heads.size() != n_heads) {
        throw ArgumentError("rollout_group: policy head count does not match the env");
    }

    std::mt19937_64 rng(splitmix64(seed ^ 0x726f6c6c6f757421ull));
    const RewardContext ctx = env.reward_context(use_mean_iou);

    // Per-head distributions are shared across the group.
    std::vector<std::vector<double>> probs_old(n_heads);
    std::vector<std::vector<double>> lp_new(n_heads), lp_old(n_heads), lp_ref(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        probs_old[h] = head_probs(params_old.heads[h], pcfg.temperature);
        lp_new[h] = head_logprobs(params_new.heads[h], pcfg.temperature);
        lp_old[h] = head_logprobs(params_old.heads[h], pcfg.temperature);
        lp_ref[h] = head_logprobs(params_ref.heads[h], pcfg.temperature);
    }

    SimRollout out;
    out.group.query_id = "env" + std::to_string(env.cfg.seed);
    for (int i = 0; i < group_size; ++i) {
        SimResponse resp;
        bool well_formed_emission = true;
        for (std::size_t h = 0; h < n_heads; ++h) {
            const int a = sample_index(probs_old[h], rng);
            resp.actions.push_back(a);
            if (pcfg.policy_format && h == 0) {
                well_formed_emission = (a == 0);
            } else {
                resp.boxes.push_back(decode_action(a, pcfg, env.cfg.grid));
            }
        }

        Modality declared = env.modality;
        if (!env.modality_known) {
            declared = kXModalities[static_cast<std::size_t>(uniform_int(rng, 0, 2))];
        }
        if (well_formed_emission) {
            resp.raw_text = serialize_response(build_think(declared), resp.boxes);
        } else {
            // Think-less emission: boxes stay extractable, the grammar breaks.
            const std::string full = serialize_response(build_think(declared), resp.boxes);
            resp.raw_text = full.substr(full.find("<answer>"));
        }

        const ParsedResponse parsed = parse_response(resp.raw_text, n);
        resp.breakdown = total_reward(parsed, ctx, rcfg);

        ResponseTrace trace;
        trace.reward = resp.breakdown.total;
        for (std::size_t h = 0; h < n_heads; ++h) {
            const auto a = static_cast<std::size_t>(resp.actions[h]);
            trace.logprobs_new.push_back(lp_new[h][a]);
            trace.logprobs_old.push_back(lp_old[h][a]);
            trace.logprobs_ref.push_back(lp_ref[h][a]);
        }
        out.group.responses.push_back(std::move(trace));
        out.responses.push_back(std::move(resp));
    }
    return out;
}

double objective_for_params(const PolicyParams& candidate, const SimRollout& rollout,
                            const PolicyConfig& pcfg, const GrpoConfig& gcfg) {
    GroupRollout group = rollout.group;
    std::vector<std::vector<double>> lp(candidate.heads.size());
    for (std::size_t h = 0; h < candidate.heads.size(); ++h) {
        lp[h] = head_logprobs(candidate.heads[h], pcfg.temperature);
    }
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
        auto& trace = group.responses[i];
        const auto& actions = rollout.responses[i].actions;
        for (std::size_t h = 0; h < actions.size(); ++h) {
            trace.logprobs_new[h] = lp[h][static_cast<std::size_t>(actions[h])];
        }
    }
    return grpo_objective(group, gcfg);
}

std::vector<std::vector<double>> objective_gradient(const PolicyParams& params,
                                                    const SimRollout& rollout,
                                                    const PolicyConfig& pcfg,
                                                    const GrpoConfig& gcfg) {
    gcfg.validate();
    const auto advantages =
        group_advantages(rollout.group.rewards(), gcfg.std_guard, gcfg.sample_std);

    std::vector<std::vector<double>> probs(params.heads.size());
    std::vector<std::vector<double>> lp(params.heads.size());
    for (std::size_t h = 0; h < params.heads.size(); ++h) {
        probs[h] = head_probs(params.heads[h], pcfg.temperature);
        lp[h] = head_logprobs(params.heads[h], pcfg.temperature);
    }

    std::vector<std::vector<double>> grad(params.heads.size());
    for (std::size_t h = 0; h < params.heads.size(); ++h) {
        grad[h].assign(params.heads[h].size(), 0.0);
    }

    const double g_count = static_cast<double>(rollout.group.responses.size());
    for (std::size_t i = 0; i < rollout.group.responses.size(); ++i) {
        const auto& trace = rollout.group.responses[i];
        const auto& actions = rollout.responses[i].actions;
        const double inv_len = 1.0 / static_cast<double>(actions.size());
        for (std::size_t h = 0; h < actions.size(); ++h) {
            const auto a = static_cast<std::size_t>(actions[h]);
            const double lp_here = lp[h][a];
            const double ratio = std::exp(lp_here - trace.logprobs_old[h]);
            const double adv = advantages[i];

            // d(surrogate)/d(logp_new): ratio*adv on the active branch, 0 when
            // the clip freezes the term.
            double coeff = 0.0;
            if (gcfg.pessimistic) {
                const bool active = (adv >= 0.0 && ratio <= 1.0 + gcfg.clip) ||
                                    (adv < 0.0 && ratio >= 1.0 - gcfg.clip);
                if (active) coeff = ratio * adv;
            } else {
                if (ratio > 1.0 - gcfg.clip && ratio < 1.0 + gcfg.clip) coeff = ratio * adv;
            }
            // d(-beta*kl)/d(logp_new) with kl = e^d - d - 1, d = lp_ref - lp_new.
            const double d = trace.logprobs_ref[h] - lp_here;
            coeff += gcfg.beta * (std::exp(d) - 1.0);

            const double scale = coeff * inv_len / g_count / pcfg.temperature;
            auto& gh = grad[h];
            const auto& ph = probs[h];
            for (std::size_t k = 0; k < gh.size(); ++k) {
                gh[k] -= scale * ph[k];
            }
            gh[a] += scale;
        }
    }
    return grad;
}

TrainResult train(const SyntheticEnv& env, const PolicyParams& init,
                  const TrainConfig& cfg) {
    if (cfg.steps < 1) {
        throw ArgumentError("train: steps must be >= 1");
    }
    cfg.grpo.validate();

    TrainResult result;
    result.params = init;
    const PolicyParams ref = init;

    for (int step = 0; step < cfg.steps; ++step) {
        const PolicyParams old = result.params;
        const std::uint64_t step_seed =
            splitmix64(cfg.seed + 0x5749u) ^ splitmix64(static_cast<std::uint64_t>(step));
        SimRollout rollout = rollout_group(env, result.params, old, ref,
                                           cfg.group_size, step_seed, cfg.policy,
                                           cfg.reward, cfg.use_mean_iou);
        if (cfg.reward_override) {
            for (auto& r : rollout.group.responses) r.reward = *cfg.reward_override;
        }

        TraceRow row;
        row.step = step;
        double kl_sum = 0.0;
        std::size_t kl_count = 0;
        for (std::size_t i = 0; i < rollout.responses.size(); ++i) {
            const auto& b = rollout.responses[i].breakdown;
            row.st_mean += b.spatio_temporal;
            row.mu_mean += b.modality;
            row.format_mean += b.format;
            row.total_mean += b.total;
            const auto& t = rollout.group.responses[i];
            for (std::size_t h = 0; h < t.length(); ++h) {
                kl_sum += kl_penalty(t.logprobs_new[h], t.logprobs_ref[h]);
                ++kl_count;
            }
        }
        const double g = static_cast<double>(rollout.responses.size());
        row.st_mean /= g;
        row.mu_mean /= g;
        row.format_mean /= g;
        row.total_mean /= g;
        row.kl_mean = kl_count == 0 ? 0.0 : kl_sum / static_cast<double>(kl_count);
        result.trace.push_back(row);

        const auto grad = objective_gradient(result.params, rollout, cfg.policy, cfg.grpo);
        for (std::size_t h = 0; h < result.params.heads.size(); ++h) {
            for (std::size_t k = 0; k < result.params.heads[h].size(); ++k) {
                result.params.heads[h][k] += cfg.learning_rate * grad[h][k];
            }
        }
        if (!result.params.finite()) {
            throw Error("training diverged: non-finite parameters at step " +
                        std::to_string(step));
        }
    }
    return result;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write trace: " + path);
    }
    out << "step,r_st_mean,r_mu_mean,r_format_mean,total_mean,kl_mean\n";
    for (const auto& r : rows) {
        out << r.step << ',' << format_double(r.st_mean) << ',' << format_double(r.mu_mean)
            << ',' << format_double(r.format_mean) << ',' << format_double(r.total_mean)
            << ',' << format_double(r.kl_mean) << '\n';
    }
}

double policy_kl(const PolicyParams& a, const PolicyParams& b, const PolicyConfig& cfg) {
    if (a.heads.size() != b.heads.size()) {
        throw ArgumentError("policy_kl: head count mismatch");
    }
    double total = 0.0;
    for (std::size_t h = 0; h < a.heads.size(); ++h) {
        const auto lpa = head_logprobs(a.heads[h], cfg.temperature);
        const auto lpb = head_logprobs(b.heads[h], cfg.temperature);
        for (std::size_t k = 0; k < lpa.size(); ++k) {
            total += std::exp(lpa[k]) * (lpa[k] - lpb[k]);
        }
    }
    return total / static_cast<double>(a.heads.size());
}

GuessingProbeReport guessing_probe(const SyntheticEnv& env, const PolicyParams& params,
                                   const PolicyConfig& pcfg, int n_rollouts,
                                   std::uint64_t seed) {
    GuessingProbeReport report;
    const int n = env.n_frames();
    report.frame_mean_iou.assign(static_cast<std::size_t>(n), 0.0);

    std::mt19937_64 rng(splitmix64(seed ^ 0x70726f6265ull));
    const std::size_t frame_head0 = pcfg.policy_format ? 1 : 0;

    double template_sum = 0.0;
    double target_sum = 0.0;
    for (int r = 0; r < n_rollouts; ++r) {
        for (int f = 0; f < n; ++f) {
            const auto& head = params.heads.at(frame_head0 + static_cast<std::size_t>(f));
            const int a = sample_index(head_probs(head, pcfg.temperature), rng);
            const BBox box = decode_action(a, pcfg, env.cfg.grid);
            const double vs_gt = slot_iou(box, env.ground_truth[static_cast<std::size_t>(f)]);
            report.frame_mean_iou[static_cast<std::size_t>(f)] += vs_gt;
            template_sum += iou_or_zero(box, env.template_box);
            target_sum += vs_gt;
        }
    }
    const double denom = static_cast<double>(n_rollouts) * n;
    for (auto& v : report.frame_mean_iou) v /= static_cast<double>(n_rollouts);
    report.template_affinity = template_sum / denom;
    report.target_affinity = target_sum / denom;
    report.template_locked = report.template_affinity > report.target_affinity;

    int correct = 0;
    for (int f = 0; f < n; ++f) {
        const auto& head = params.heads.at(frame_head0 + static_cast<std::size_t>(f));
        const auto lp = head_logprobs(head, pcfg.temperature);
        const int a = static_cast<int>(
            std::max_element(lp.begin(), lp.end()) - lp.begin());
        if (slot_iou(decode_action(a, pcfg, env.cfg.grid),
                     env.ground_truth[static_cast<std::size_t>(f)]) > 0.5) {
            ++correct;
        }
    }
    report.greedy_acc_at_half = static_cast<double>(correct) / static_cast<double>(n);
    return report;
}

} // namespace rgbx::sim
