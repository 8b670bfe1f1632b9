#include "rgbx/config.hpp"

#include <fstream>
#include <set>

#include "rgbx/errors.hpp"
#include "rgbx/log.hpp"

namespace rgbx {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                    const std::string& section) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown config key '" + key + "' in " + section);
        }
    }
}

} // namespace

nlohmann::json AppConfig::to_json() const {
    nlohmann::json j;
    j["log_level"] = log_level;
    j["paths"] = {{"manifest", paths.manifest},
                  {"predictions", paths.predictions},
                  {"responses", paths.responses},
                  {"references", paths.references},
                  {"weights", paths.weights},
                  {"records", paths.records},
                  {"trace", paths.trace},
                  {"out", paths.out}};
    j["reward"] = {{"delta", reward.delta}};
    j["grpo"] = {{"clip", grpo.clip},
                 {"beta", grpo.beta},
                 {"std_guard", grpo.std_guard},
                 {"sample_std", grpo.sample_std},
                 {"pessimistic", grpo.pessimistic}};
    j["build"] = {{"interval_min", build.interval_min},
                  {"interval_max", build.interval_max},
                  {"short_video_threshold", build.short_video_threshold},
                  {"short_interval", build.short_interval},
                  {"max_groups_per_video", build.max_groups_per_video},
                  {"keyframes_per_group", build.keyframes_per_group},
                  {"first_keyframe", build.first_keyframe},
                  {"seed", build.seed}};
    j["endpoint"] = {{"base_url_env", endpoint.base_url_env},
                     {"api_key_env", endpoint.api_key_env},
                     {"model", endpoint.model},
                     {"path", endpoint.path},
                     {"timeout_seconds", endpoint.timeout_seconds}};
    j["sim"] = {{"steps", sim.steps},
                {"group_size", sim.group_size},
                {"learning_rate", sim.learning_rate},
                {"seed", sim.seed},
                {"n_frames", sim.n_frames},
                {"temperature", sim.temperature},
                {"policy_format", sim.policy_format},
                {"use_mean_iou", sim.use_mean_iou},
                {"p_modality_unknown", sim.p_modality_unknown}};
    return j;
}

AppConfig AppConfig::from_json(const nlohmann::json& j) {
    AppConfig cfg;
    reject_unknown(j, {"log_level", "paths", "reward", "grpo", "build", "endpoint", "sim"},
                   "config root");
    cfg.log_level = j.value("log_level", cfg.log_level);
    log::parse_level(cfg.log_level);  // range check

    if (j.contains("paths")) {
        const auto& p = j["paths"];
        reject_unknown(p, {"manifest", "predictions", "responses", "references",
                           "weights", "records", "trace", "out"}, "paths");
        cfg.paths.manifest = p.value("manifest", "");
        cfg.paths.predictions = p.value("predictions", "");
        cfg.paths.responses = p.value("responses", "");
        cfg.paths.references = p.value("references", "");
        cfg.paths.weights = p.value("weights", "");
        cfg.paths.records = p.value("records", "");
        cfg.paths.trace = p.value("trace", "");
        cfg.paths.out = p.value("out", "");
    }
    if (j.contains("reward")) {
        const auto& r = j["reward"];
        reject_unknown(r, {"delta"}, "reward");
        cfg.reward.delta = r.value("delta", cfg.reward.delta);
        if (cfg.reward.delta <= 0.0) {
            throw ConfigError("reward.delta must be > 0");
        }
    }
    if (j.contains("grpo")) {
        const auto& g = j["grpo"];
        reject_unknown(g, {"clip", "beta", "std_guard", "sample_std", "pessimistic"},
                       "grpo");
        cfg.grpo.clip = g.value("clip", cfg.grpo.clip);
        cfg.grpo.beta = g.value("beta", cfg.grpo.beta);
        cfg.grpo.std_guard = g.value("std_guard", cfg.grpo.std_guard);
        cfg.grpo.sample_std = g.value("sample_std", cfg.grpo.sample_std);
        cfg.grpo.pessimistic = g.value("pessimistic", cfg.grpo.pessimistic);
        cfg.grpo.validate();
    }
    if (j.contains("build")) {
        const auto& b = j["build"];
        reject_unknown(b, {"interval_min", "interval_max", "short_video_threshold",
                           "short_interval", "max_groups_per_video",
                           "keyframes_per_group", "first_keyframe", "seed"}, "build");
        cfg.build.interval_min = b.value("interval_min", cfg.build.interval_min);
        cfg.build.interval_max = b.value("interval_max", cfg.build.interval_max);
        cfg.build.short_video_threshold =
            b.value("short_video_threshold", cfg.build.short_video_threshold);
        cfg.build.short_interval = b.value("short_interval", cfg.build.short_interval);
        cfg.build.max_groups_per_video =
            b.value("max_groups_per_video", cfg.build.max_groups_per_video);
        cfg.build.keyframes_per_group =
            b.value("keyframes_per_group", cfg.build.keyframes_per_group);
        cfg.build.first_keyframe = b.value("first_keyframe", cfg.build.first_keyframe);
        cfg.build.seed = b.value("seed", cfg.build.seed);
        cfg.build.validate();
    }
    if (j.contains("endpoint")) {
        const auto& e = j["endpoint"];
        reject_unknown(e, {"base_url_env", "api_key_env", "model", "path",
                           "timeout_seconds"}, "endpoint");
        cfg.endpoint.base_url_env = e.value("base_url_env", cfg.endpoint.base_url_env);
        cfg.endpoint.api_key_env = e.value("api_key_env", cfg.endpoint.api_key_env);
        cfg.endpoint.model = e.value("model", cfg.endpoint.model);
        cfg.endpoint.path = e.value("path", cfg.endpoint.path);
        cfg.endpoint.timeout_seconds =
            e.value("timeout_seconds", cfg.endpoint.timeout_seconds);
    }
    if (j.contains("sim")) {
        const auto& s = j["sim"];
        reject_unknown(s, {"steps", "group_size", "learning_rate", "seed", "n_frames",
                           "temperature", "policy_format", "use_mean_iou",
                           "p_modality_unknown"}, "sim");
        cfg.sim.steps = s.value("steps", cfg.sim.steps);
        cfg.sim.group_size = s.value("group_size", cfg.sim.group_size);
        cfg.sim.learning_rate = s.value("learning_rate", cfg.sim.learning_rate);
        cfg.sim.seed = s.value("seed", cfg.sim.seed);
        cfg.sim.n_frames = s.value("n_frames", cfg.sim.n_frames);
        cfg.sim.temperature = s.value("temperature", cfg.sim.temperature);
        cfg.sim.policy_format = s.value("policy_format", cfg.sim.policy_format);
        cfg.sim.use_mean_iou = s.value("use_mean_iou", cfg.sim.use_mean_iou);
        cfg.sim.p_modality_unknown =
            s.value("p_modality_unknown", cfg.sim.p_modality_unknown);
        if (cfg.sim.steps < 1 || cfg.sim.group_size < 2 || cfg.sim.n_frames < 1 ||
            cfg.sim.temperature <= 0.0) {
            throw ConfigError("sim section out of range");
        }
    }
    return cfg;
}

std::string AppConfig::dump() const { return to_json().dump(2) + "\n"; }

AppConfig AppConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return from_json(j);
}

void AppConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write config: " + path);
    }
    out << dump();
}

} // namespace rgbx
