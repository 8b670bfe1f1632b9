#include "rgbx/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rgbx/errors.hpp"

namespace rgbx {

std::vector<double> GroupRollout::rewards() const {
    std::vector<double> out;
    out.reserve(responses.size());
    for (const auto& r : responses) out.push_back(r.reward);
    return out;
}

void GroupRollout::validate() const {
    if (responses.size() < 2) {
        throw ArgumentError("rollout group must contain at least 2 responses");
    }
    for (const auto& r : responses) {
        if (r.logprobs_new.empty() ||
            r.logprobs_new.size() != r.logprobs_old.size() ||
            r.logprobs_new.size() != r.logprobs_ref.size()) {
            throw ArgumentError("rollout traces must be non-empty with equal lengths across policies");
        }
        auto check = [](const std::vector<double>& lp) {
            for (double v : lp) {
                if (!std::isfinite(v) || v > 0.0) {
                    throw ArgumentError("log-probabilities must be finite and <= 0");
                }
            }
        };
        check(r.logprobs_new);
        check(r.logprobs_old);
        check(r.logprobs_ref);
        if (!std::isfinite(r.reward)) {
            throw ArgumentError("rewards must be finite");
        }
    }
}

void GrpoConfig::validate() const {
    if (!(clip > 0.0 && clip < 1.0)) {
        throw ConfigError("clip epsilon must lie in (0,1)");
    }
    if (beta < 0.0) {
        throw ConfigError("KL coefficient must be >= 0");
    }
    if (std_guard <= 0.0) {
        throw ConfigError("std guard must be > 0");
    }
}

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double std_guard, bool sample_std) {
    const std::size_t g = rewards.size();
    if (g < 2) {
        throw ArgumentError("group_advantages: need at least 2 rewards");
    }
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);

    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(sample_std ? g - 1 : g);
    const double std = std::sqrt(var);

    std::vector<double> out;
    out.reserve(g);
    for (double r : rewards) {
        out.push_back((r - mean) / (std + std_guard));
    }
    return out;
}

double prob_ratio(double logp_new, double logp_old) {
    if (!std::isfinite(logp_new) || !std::isfinite(logp_old)) {
        throw ArgumentError("prob_ratio: log-probabilities must be finite");
    }
    return std::exp(logp_new - logp_old);
}

double clipped_term(double ratio, double advantage, double clip_eps,
                    bool pessimistic) {
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if (!pessimistic) {
        return clipped;
    }
    return std::min(ratio * advantage, clipped);
}

double kl_penalty(double logp_new, double logp_ref) {
    const double d = logp_ref - logp_new;
    // rho - log(rho) - 1 with rho = exp(d); >= 0 with equality at rho = 1.
    return std::exp(d) - d - 1.0;
}

double grpo_objective(const GroupRollout& rollout, const GrpoConfig& cfg) {
    rollout.validate();
    cfg.validate();

    const auto advantages =
        group_advantages(rollout.rewards(), cfg.std_guard, cfg.sample_std);

    double total = 0.0;
    for (std::size_t i = 0; i < rollout.responses.size(); ++i) {
        const auto& r = rollout.responses[i];
        double acc = 0.0;
        for (std::size_t t = 0; t < r.length(); ++t) {
            const double ratio = prob_ratio(r.logprobs_new[t], r.logprobs_old[t]);
            acc += clipped_term(ratio, advantages[i], cfg.clip, cfg.pessimistic);
            acc -= cfg.beta * kl_penalty(r.logprobs_new[t], r.logprobs_ref[t]);
        }
        total += acc / static_cast<double>(r.length());
    }
    return total / static_cast<double>(rollout.responses.size());
}

std::string rollout_to_jsonl_line(const GroupRollout& rollout) {
    nlohmann::json j;
    j["query_id"] = rollout.query_id;
    auto& rewards = j["rewards"] = nlohmann::json::array();
    auto& lp_new = j["logprobs_new"] = nlohmann::json::array();
    auto& lp_old = j["logprobs_old"] = nlohmann::json::array();
    auto& lp_ref = j["logprobs_ref"] = nlohmann::json::array();
    for (const auto& r : rollout.responses) {
        rewards.push_back(r.reward);
        lp_new.push_back(r.logprobs_new);
        lp_old.push_back(r.logprobs_old);
        lp_ref.push_back(r.logprobs_ref);
    }
    return j.dump();
}

GroupRollout rollout_from_jsonl_line(const std::string& line) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
        throw IoError("rollout trace: malformed JSONL line");
    }
    GroupRollout out;
    out.query_id = j.value("query_id", "");
    const auto& rewards = j.at("rewards");
    const auto& lp_new = j.at("logprobs_new");
    const auto& lp_old = j.at("logprobs_old");
    const auto& lp_ref = j.at("logprobs_ref");
    if (rewards.size() != lp_new.size() || rewards.size() != lp_old.size() ||
        rewards.size() != lp_ref.size()) {
        throw IoError("rollout trace: array sizes disagree");
    }
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        ResponseTrace r;
        r.reward = rewards[i].get<double>();
        r.logprobs_new = lp_new[i].get<std::vector<double>>();
        r.logprobs_old = lp_old[i].get<std::vector<double>>();
        r.logprobs_ref = lp_ref[i].get<std::vector<double>>();
        out.responses.push_back(std::move(r));
    }
    out.validate();
    return out;
}

std::vector<GroupRollout> load_rollouts(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open rollout trace file: " + path);
    }
    std::vector<GroupRollout> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(rollout_from_jsonl_line(line));
    }
    return out;
}

void save_rollouts(const std::string& path, const std::vector<GroupRollout>& rollouts) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write rollout trace file: " + path);
    }
    for (const auto& r : rollouts) {
        out << rollout_to_jsonl_line(r) << '\n';
    }
}

} // namespace rgbx
