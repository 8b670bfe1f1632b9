#pragma once

#include <string>

#include <json.hpp>

#include "rgbx/chat_client.hpp"
#include "rgbx/dataset.hpp"
#include "rgbx/grpo.hpp"
#include "rgbx/reward.hpp"
#include "rgbx/sim.hpp"

namespace rgbx {

/// Knobs for the `simulate` subcommand that do not live in the shared
/// reward/grpo configs.
struct SimSection {
    int steps = 500;
    int group_size = 8;
    double learning_rate = 1.0;
    std::uint64_t seed = 0;
    int n_frames = 3;
    double temperature = 1.0;
    bool policy_format = true;
    bool use_mean_iou = false;
    double p_modality_unknown = 0.2;
};

/// Whole-app configuration file. Loading rejects unknown keys and
/// validates ranges; dump -> load -> dump is the identity.
struct AppConfig {
    std::string log_level = "info";

    struct Paths {
        std::string manifest;
        std::string predictions;
        std::string responses;
        std::string references;
        std::string weights;
        std::string records;
        std::string trace;
        std::string out;
    } paths;

    RewardConfig reward;
    GrpoConfig grpo;
    BuildConfig build;
    EndpointConfig endpoint;
    SimSection sim;

    nlohmann::json to_json() const;
    static AppConfig from_json(const nlohmann::json& j);

    std::string dump() const;
    static AppConfig load(const std::string& path);
    void save(const std::string& path) const;
};

} // namespace rgbx
