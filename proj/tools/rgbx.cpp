#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgbx/chat_client.hpp"
#include "rgbx/config.hpp"
#include "rgbx/dataset.hpp"
#include "rgbx/errors.hpp"
#include "rgbx/eval.hpp"
#include "rgbx/log.hpp"
#include "rgbx/mtw.hpp"
#include "rgbx/response.hpp"
#include "rgbx/reward.hpp"
#include "rgbx/sim.hpp"
#include "rgbx/uav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> collect_video_files(const std::vector<std::string>& inputs) {
    std::vector<std::string> files;
    for (const auto& input : inputs) {
        if (fs::is_directory(input)) {
            for (const auto& entry : fs::directory_iterator(input)) {
                if (entry.is_regular_file() && entry.path().extension() == ".json") {
                    files.push_back(entry.path().string());
                }
            }
        } else {
            files.push_back(input);
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

int run_build_dataset(const rgbx::AppConfig& app,
                      const std::vector<std::string>& videos,
                      const std::string& out, bool auto_split,
                      double train_fraction) {
    rgbx::BuildConfig cfg = app.build;
    std::vector<rgbx::MIGSample> samples;
    for (const auto& file : collect_video_files(videos)) {
        rgbx::VideoIndex video = rgbx::load_video_index(file);
        if (video.split.empty()) {
            if (!auto_split) {
                throw rgbx::ConfigError("video " + video.video_id +
                                        " has no split; pass --auto-split to partition");
            }
            video.split = rgbx::assign_split(video.video_id, train_fraction, cfg.seed);
        }
        auto built = rgbx::build_video_samples(video, cfg);
        samples.insert(samples.end(), built.begin(), built.end());
    }
    const auto stats = rgbx::emit_manifest(samples, out);
    std::cout << "wrote " << stats.samples << " samples (" << stats.images
              << " images) to " << out << "\n";
    return 0;
}

int run_eval(const rgbx::AppConfig& app, const std::string& manifest,
             const std::string& preds, double threshold, bool lenient,
             const std::string& out, const std::string& name) {
    (void)app;
    const auto samples = rgbx::load_manifest(manifest);
    const auto predictions = rgbx::load_predictions(preds);
    rgbx::EvalOptions opts;
    opts.threshold = threshold;
    opts.strict = !lenient;
    const auto report = rgbx::evaluate_manifest(samples, predictions, opts);
    std::cout << report.to_table(name);
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw rgbx::IoError("cannot write report: " + out);
        f << report.to_json().dump(2) << "\n";
    }
    return 0;
}

int run_mtw_weights(const std::string& corpus_path, const std::string& out,
                    double floor_weight, double smoothing) {
    std::ifstream in(corpus_path);
    if (!in) throw rgbx::IoError("cannot open corpus: " + corpus_path);
    rgbx::TokenCorpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw rgbx::IoError("corpus: malformed JSONL line");
        const auto m = rgbx::parse_modality(j.at("modality").get<std::string>());
        if (!m) throw rgbx::IoError("corpus: unknown modality");
        corpus.add_document(*m, j.at("text").get<std::string>());
    }
    rgbx::MtwConfig cfg;
    cfg.floor_weight = floor_weight;
    cfg.smoothing = smoothing;
    const auto table = rgbx::build_weight_table(corpus, cfg);
    std::ofstream f(out);
    if (!f) throw rgbx::IoError("cannot write weights: " + out);
    f << table.to_jsonl();
    std::cout << "wrote weight table to " << out << "\n";
    return 0;
}

int run_reward(const rgbx::AppConfig& app, const std::string& manifest,
               const std::string& responses_path, const std::string& refs_path,
               const std::string& out, bool use_mean_iou) {
    const auto samples = rgbx::load_manifest(manifest);
    std::map<std::string, const rgbx::MIGSample*> by_id;
    for (const auto& s : samples) by_id[s.sample_id] = &s;

    std::map<std::string, std::string> refs;
    for (const auto& r : rgbx::uav::load_records(refs_path)) {
        refs[r.sample_id] = r.summary;
    }

    std::ifstream in(responses_path);
    if (!in) throw rgbx::IoError("cannot open responses: " + responses_path);
    std::ofstream f(out);
    if (!f) throw rgbx::IoError("cannot write rewards: " + out);

    std::string line;
    int scored = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw rgbx::IoError("responses: malformed JSONL line");
        const std::string id = j.at("sample_id").get<std::string>();
        auto sit = by_id.find(id);
        auto rit = refs.find(id);
        if (sit == by_id.end() || rit == refs.end() || rit->second.empty()) {
            rgbx::log::warn("skipping response for " + id + ": no sample or reference");
            continue;
        }
        const rgbx::MIGSample& s = *sit->second;
        rgbx::RewardContext ctx;
        ctx.frame_intervals = s.frame_intervals();
        ctx.ground_truth = s.ground_truth;
        ctx.true_modality = s.template_x.modality;
        ctx.modality_known = s.modality_known;
        ctx.reference_cot = rit->second;
        ctx.use_mean_iou = use_mean_iou;

        auto parsed = rgbx::parse_response(j.at("response").get<std::string>(), s.n());
        parsed.answer_boxes = rgbx::answer_boxes_as(parsed, s.bbox_format);
        const auto b = rgbx::total_reward(parsed, ctx, app.reward);
        f << json{{"sample_id", id},
                  {"r_st", b.spatio_temporal},
                  {"r_mu", b.modality},
                  {"r_format", b.format},
                  {"total", b.total},
                  {"well_formed", parsed.well_formed}}
                 .dump()
          << '\n';
        ++scored;
    }
    std::cout << "scored " << scored << " responses into " << out << "\n";
    return 0;
}

// Offline stand-in for the generator: the reply is a pure function of the
// request, so parallel runs stay byte-identical.
class MockGeneratorClient : public rgbx::ChatClient {
public:
    rgbx::ChatReply complete(const rgbx::ChatRequest& request) override {
        const std::string& p = request.prompt;
        if (p.find("Using only the RGB modality") != std::string::npos) {
            return rgbx::ok_reply("mock understanding of the target");
        }
        if (p.find("Establish spatial correspondence") != std::string::npos) {
            return rgbx::ok_reply("mock association across modalities");
        }
        if (p.find("analyze the complementary relationship") != std::string::npos) {
            return rgbx::ok_reply("mock validation over the search frames");
        }
        if (p.find("Assess whether the reasoning") != std::string::npos) {
            return rgbx::ok_reply("pass: the reasoning matches the boxes");
        }
        return rgbx::ok_reply("mock summary of the reasoning chain");
    }
};

int run_gen_cot(const rgbx::AppConfig& app, const std::string& manifest,
                const std::string& out, int jobs, bool mock, bool no_filter) {
    const auto samples = rgbx::load_manifest(manifest);
    std::unique_ptr<rgbx::ChatClient> client;
    if (mock) {
        client = std::make_unique<MockGeneratorClient>();
    } else {
        client = rgbx::make_http_chat_client(app.endpoint);
    }
    rgbx::uav::GenerationConfig gen;
    const auto records =
        rgbx::uav::run_pipeline(samples, *client, rgbx::uav::PromptTemplateSet::defaults(),
                                gen, jobs, !no_filter);
    rgbx::uav::save_records(out, records);
    const auto stats = rgbx::uav::retention_stats(records);
    std::cout << "generated " << stats.total << " records: " << stats.accepted
              << " accepted, " << stats.rejected << " rejected, " << stats.pending
              << " pending, " << stats.failed << " failed\n";
    return 0;
}

int run_simulate(const rgbx::AppConfig& app, const std::string& out) {
    rgbx::sim::EnvConfig env_cfg;
    env_cfg.n_frames = app.sim.n_frames;
    env_cfg.p_modality_unknown = app.sim.p_modality_unknown;
    env_cfg.seed = app.sim.seed;
    const auto env = rgbx::sim::SyntheticEnv::make(env_cfg);

    rgbx::sim::TrainConfig cfg;
    cfg.steps = app.sim.steps;
    cfg.group_size = app.sim.group_size;
    cfg.learning_rate = app.sim.learning_rate;
    cfg.seed = app.sim.seed;
    cfg.grpo = app.grpo;
    cfg.reward = app.reward;
    cfg.policy.temperature = app.sim.temperature;
    cfg.policy.policy_format = app.sim.policy_format;
    cfg.use_mean_iou = app.sim.use_mean_iou;

    const auto init = rgbx::sim::PolicyParams::uniform(cfg.policy, env.n_frames());
    const auto result = rgbx::sim::train(env, init, cfg);
    rgbx::sim::write_trace_csv(out, result.trace);

    const auto& last = result.trace.back();
    std::cout << "wrote " << result.trace.size() << " steps to " << out
              << " (final total_mean " << last.total_mean << ")\n";
    const auto probe = rgbx::sim::guessing_probe(env, result.params, cfg.policy);
    std::cout << "probe: target_affinity " << probe.target_affinity
              << ", template_affinity " << probe.template_affinity
              << (probe.template_locked ? " (template-locked)" : "") << "\n";
    return 0;
}

int run_review_export(const std::string& records_path, const std::string& out) {
    const auto records = rgbx::uav::load_records(records_path);
    const int n = rgbx::uav::export_review_queue(records, out);
    std::cout << "exported " << n << " pending records to " << out << "\n";
    return 0;
}

int run_review_import(const std::string& records_path, const std::string& decisions,
                      const std::string& out) {
    auto records = rgbx::uav::load_records(records_path);
    const auto counts = rgbx::uav::import_review_decisions(records, decisions);
    rgbx::uav::save_records(out.empty() ? records_path : out, records);
    std::cout << "applied " << counts.accepted << " accepts, " << counts.rejected
              << " rejects (" << counts.unknown << " unknown ids)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"RGB+X multi-image grounding toolkit"};
    cli.require_subcommand(1);

    std::string config_path;
    std::string log_level;
    cli.add_option("--config", config_path, "JSON config file");
    cli.add_option("--log-level", log_level, "debug|info|warn|error|off");

    // build-dataset
    auto* build = cli.add_subcommand("build-dataset", "Convert video indexes into a grounding manifest");
    std::vector<std::string> build_videos;
    std::string build_out;
    std::uint64_t build_seed = 0;
    bool build_auto_split = false;
    double build_train_fraction = 0.8;
    build->add_option("--videos", build_videos, "video index files or directories")->required();
    build->add_option("--out", build_out, "output manifest JSONL")->required();
    build->add_option("--seed", build_seed, "keyframe sampling seed");
    build->add_flag("--auto-split", build_auto_split, "assign 80/20 splits to unsplit videos");
    build->add_option("--train-fraction", build_train_fraction, "auto-split train fraction");

    // eval
    auto* eval = cli.add_subcommand("eval", "Score predictions against a manifest");
    std::string eval_manifest, eval_preds, eval_out, eval_name = "run";
    double eval_threshold = 0.5;
    bool eval_lenient = false;
    eval->add_option("--manifest", eval_manifest)->required();
    eval->add_option("--preds", eval_preds)->required();
    eval->add_option("--threshold", eval_threshold, "IoU threshold (strict >)");
    eval->add_flag("--lenient", eval_lenient, "exclude unscored samples from means");
    eval->add_option("--out", eval_out, "JSON report path");
    eval->add_option("--name", eval_name, "row label in the text table");

    // mtw-weights
    auto* mtw = cli.add_subcommand("mtw-weights", "Build the token weight table from a reasoning corpus");
    std::string mtw_corpus, mtw_out;
    double mtw_floor = 0.05, mtw_smoothing = 0.5;
    mtw->add_option("--corpus", mtw_corpus, "JSONL of {modality, text}")->required();
    mtw->add_option("--out", mtw_out)->required();
    mtw->add_option("--floor", mtw_floor, "low end of the weight range");
    mtw->add_option("--smoothing", mtw_smoothing, "additive smoothing mass");

    // reward
    auto* reward = cli.add_subcommand("reward", "Score raw responses with the composed reward");
    std::string reward_manifest, reward_responses, reward_refs, reward_out;
    double reward_delta = 5.0;
    bool reward_mi = false;
    reward->add_option("--manifest", reward_manifest)->required();
    reward->add_option("--responses", reward_responses, "JSONL of {sample_id, response}")->required();
    reward->add_option("--refs", reward_refs, "reasoning records JSONL (summaries)")->required();
    reward->add_option("--out", reward_out)->required();
    reward->add_option("--delta", reward_delta, "frame-weight offset");
    reward->add_flag("--mi", reward_mi, "mean-IoU spatial reward instead of frame-weighted");

    // gen-cot
    auto* gen = cli.add_subcommand("gen-cot", "Generate reasoning traces through the chat endpoint");
    std::string gen_manifest, gen_out;
    int gen_jobs = 1;
    bool gen_mock = false, gen_no_filter = false;
    gen->add_option("--manifest", gen_manifest)->required();
    gen->add_option("--out", gen_out)->required();
    gen->add_option("--jobs", gen_jobs, "parallel samples");
    gen->add_flag("--mock", gen_mock, "deterministic offline endpoint");
    gen->add_flag("--no-filter", gen_no_filter, "skip the self-assessment pass");

    // simulate
    auto* simulate = cli.add_subcommand("simulate", "Train the toy policy with group-relative updates");
    int sim_steps = 500, sim_g = 8, sim_frames = 3;
    std::uint64_t sim_seed = 0;
    std::string sim_reward_mode = "st", sim_out = "trace.csv";
    double sim_beta = 0.05, sim_clip = 0.2, sim_lr = 1.0, sim_temp = 1.0, sim_delta = 5.0;
    bool sim_fixed_format = false;
    simulate->add_option("--steps", sim_steps);
    simulate->add_option("--seed", sim_seed);
    simulate->add_option("--reward", sim_reward_mode, "st|mi")
        ->check(CLI::IsMember({"st", "mi"}));
    simulate->add_option("--beta", sim_beta, "KL coefficient");
    simulate->add_option("--clip", sim_clip, "ratio clip half-width");
    simulate->add_option("--g", sim_g, "group size");
    simulate->add_option("--lr", sim_lr, "learning rate");
    simulate->add_option("--temperature", sim_temp);
    simulate->add_option("--frames", sim_frames, "search frames per episode");
    simulate->add_option("--delta", sim_delta, "frame-weight offset");
    simulate->add_flag("--fixed-format", sim_fixed_format,
                       "always emit well-formed text instead of the learned format head");
    simulate->add_option("--out", sim_out, "trace CSV path");

    // review-export / review-import
    auto* rexport = cli.add_subcommand("review-export", "Export pending records for human review");
    std::string rexp_records, rexp_out;
    rexport->add_option("--records", rexp_records)->required();
    rexport->add_option("--out", rexp_out)->required();

    auto* rimport = cli.add_subcommand("review-import", "Apply human accept/reject decisions");
    std::string rimp_records, rimp_decisions, rimp_out;
    rimport->add_option("--records", rimp_records)->required();
    rimport->add_option("--decisions", rimp_decisions)->required();
    rimport->add_option("--out", rimp_out, "updated records path (defaults to --records)");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        rgbx::AppConfig app;
        if (!config_path.empty()) {
            app = rgbx::AppConfig::load(config_path);
        }
        if (!log_level.empty()) {
            app.log_level = log_level;
        }
        rgbx::log::set_threshold(rgbx::log::parse_level(app.log_level));

        if (*build) {
            if (build->count("--seed")) app.build.seed = build_seed;
            return run_build_dataset(app, build_videos, build_out, build_auto_split,
                                     build_train_fraction);
        }
        if (*eval) {
            return run_eval(app, eval_manifest, eval_preds, eval_threshold,
                            eval_lenient, eval_out, eval_name);
        }
        if (*mtw) {
            return run_mtw_weights(mtw_corpus, mtw_out, mtw_floor, mtw_smoothing);
        }
        if (*reward) {
            if (reward->count("--delta")) app.reward.delta = reward_delta;
            return run_reward(app, reward_manifest, reward_responses, reward_refs,
                              reward_out, reward_mi);
        }
        if (*gen) {
            return run_gen_cot(app, gen_manifest, gen_out, gen_jobs, gen_mock,
                               gen_no_filter);
        }
        if (*simulate) {
            if (simulate->count("--steps")) app.sim.steps = sim_steps;
            if (simulate->count("--seed")) app.sim.seed = sim_seed;
            if (simulate->count("--g")) app.sim.group_size = sim_g;
            if (simulate->count("--lr")) app.sim.learning_rate = sim_lr;
            if (simulate->count("--temperature")) app.sim.temperature = sim_temp;
            if (simulate->count("--frames")) app.sim.n_frames = sim_frames;
            if (simulate->count("--fixed-format")) app.sim.policy_format = false;
            if (simulate->count("--reward")) app.sim.use_mean_iou = sim_reward_mode == "mi";
            if (simulate->count("--beta")) app.grpo.beta = sim_beta;
            if (simulate->count("--clip")) app.grpo.clip = sim_clip;
            if (simulate->count("--delta")) app.reward.delta = sim_delta;
            return run_simulate(app, sim_out);
        }
        if (*rexport) {
            return run_review_export(rexp_records, rexp_out);
        }
        if (*rimport) {
            return run_review_import(rimp_records, rimp_decisions, rimp_out);
        }
        std::cerr << cli.help();
        return 2;
    } catch (const rgbx::ConfigError& e) {
        std::cerr << json{{"error", {{"kind", "config"}, {"detail", e.what()}}}}.dump()
                  << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"kind", "runtime"}, {"detail", e.what()}}}}.dump()
                  << "\n";
        return 1;
    }
}
