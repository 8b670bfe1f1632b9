#include "rgbx/uav.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include "rgbx/errors.hpp"
#include "rgbx/log.hpp"
#include "rgbx/mtw.hpp"
#include "rgbx/response.hpp"

namespace rgbx::uav {

namespace {

std::string substitute(const std::string& tmpl,
                       const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        const std::size_t close = tmpl.find('}', open + 1);
        if (close == std::string::npos) {
            throw TemplateError("unterminated placeholder in template: " + tmpl.substr(open));
        }
        out.append(tmpl, pos, open - pos);
        const std::string key = tmpl.substr(open + 1, close - open - 1);
        auto it = values.find(key);
        if (it == values.end()) {
            throw TemplateError("unresolved placeholder {" + key + "}");
        }
        out += it->second;
        pos = close + 1;
    }
    return out;
}

std::string format_box(const BBox& b) {
    std::vector<BBox> one{b};
    // Reuse the response serializer's number formatting for the inner list.
    const std::string s = serialize_response("", one);
    const std::size_t open = s.find("[[");
    const std::size_t close = s.find("]]");
    return s.substr(open + 1, close - open);
}

std::string format_gt_boxes(const std::vector<std::optional<BBox>>& gt) {
    std::string out = "[";
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (i > 0) out += ", ";
        out += gt[i] ? format_box(*gt[i]) : "null";
    }
    out += "]";
    return out;
}

} // namespace

PromptTemplateSet PromptTemplateSet::defaults() {
    PromptTemplateSet t;
    t.task_template =
        "A total of {num} images are provided, consisting of alternating RGB and "
        "{modality} images. Each RGB image is paired with the subsequent {modality} "
        "image, which is spatially and temporally aligned. The final task is to "
        "predict the target's location in each of the subsequent images, based on "
        "the target marked by the green bounding box. Green box coordinates: {box}.";

    t.modality_prompts[Modality::Thermal] =
        "The thermal infrared modality is based on temperature sensing. Regions with "
        "higher temperatures have higher grayscale values, appearing white or light "
        "gray; conversely, lower temperatures appear as dark gray or black. For "
        "example, a pedestrian target in the RGB modality exhibits a higher "
        "temperature and appears as a gray-white human-shaped region in the infrared "
        "modality, while cooler backgrounds such as roads appear black.";
    t.modality_prompts[Modality::Depth] =
        "The depth modality is based on the distance of objects from the camera. The "
        "closer an object is to the viewpoint, the lower its grayscale value, "
        "appearing dark gray or black; the farther it is, the whiter it appears. For "
        "instance, if the target is a ball positioned near the camera, it appears as "
        "a dark circular region in the depth modality.";
    t.modality_prompts[Modality::Event] =
        "The event modality is based on changes in pixel intensity. A response is "
        "triggered only when brightness increases or decreases beyond a threshold, "
        "with red indicating increased intensity and blue indicating decreased "
        "intensity. For example, the headlights of a car in the RGB modality appear "
        "as small circular clusters of red pixels in the event modality, indicating "
        "the emergence of a brighter object in that region.";

    t.understand_prompt =
        "Using only the RGB modality, describe the target inside the green box, "
        "along with any other objects or scene context related to the target (if "
        "applicable). For example, {example}.";
    t.associate_prompt =
        "Establish spatial correspondence between the two modalities. Based on the "
        "RGB modality and the description of the last step, interpret the target "
        "information at the corresponding positions in each {modality} image. Here "
        "is the principle of {modality}: {modality prompt}. For example, {example}. "
        "The reasoning process for this step should not exceed 200 words.";
    t.validate_prompt =
        "First, analyze the complementary relationship between the two modalities in "
        "target grounding. Specifically, for each image, determine whether one "
        "modality experiences information degradation and whether the other modality "
        "provides complementary cues. Avoid general statements about modality "
        "contribution—perform image-specific analysis. Finally, verify the "
        "target location based on the cross-modal complementarity and describe the "
        "target position. For example, {example}. The reasoning process for this "
        "step should not exceed 400 words.";
    t.summarize_prompt =
        "Merge the three step outputs above into one structured reasoning summary. "
        "Remove content that repeats across steps and keep the "
        "understand-associate-validate order, ending with the target's position in "
        "each search image.";
    t.prev_answer_template = "Answer from the previous step: {prev}";
    t.self_assessment_template =
        "Below is a reasoning summary for a grounding task together with the "
        "ground-truth boxes {gt_boxes}. Assess whether the reasoning is plausible "
        "and consistent with the ground truth. Reply with a single word, pass or "
        "fail, followed by a short rationale.\n\n{summary}";

    t.examples["understand"] =
        "the target is a dark backpack carried by a person walking along the path";
    t.examples["associate"] =
        "the backpack region in the second modality shows a uniform block matching "
        "the RGB location";
    t.examples["validate"] =
        "image 3 loses RGB contrast at night while the second modality keeps a "
        "clear silhouette, so the target stays near the left lamp post";
    return t;
}

std::string to_string(SelfAssessment s) {
    switch (s) {
        case SelfAssessment::Pass: return "pass";
        case SelfAssessment::Fail: return "fail";
        default: return "none";
    }
}

std::string to_string(ReviewStatus s) {
    switch (s) {
        case ReviewStatus::Accepted: return "accepted";
        case ReviewStatus::Rejected: return "rejected";
        default: return "pending";
    }
}

namespace {

SelfAssessment parse_assessment(const std::string& name) {
    if (name == "pass") return SelfAssessment::Pass;
    if (name == "fail") return SelfAssessment::Fail;
    return SelfAssessment::None;
}

ReviewStatus parse_review_status(const std::string& name) {
    if (name == "accepted") return ReviewStatus::Accepted;
    if (name == "rejected") return ReviewStatus::Rejected;
    return ReviewStatus::Pending;
}

} // namespace

std::string assemble_step_prompt(int step, const MIGSample& sample,
                                 const std::optional<std::string>& prev_answer,
                                 const PromptTemplateSet& templates) {
    if (step < 1 || step > 4) {
        throw ArgumentError("assemble_step_prompt: step must be 1..4");
    }
    if (step >= 2 && !prev_answer.has_value()) {
        throw ArgumentError("assemble_step_prompt: steps 2-4 need the previous answer");
    }

    const Modality xm = sample.template_x.modality;
    auto mp = templates.modality_prompts.find(xm);
    if (mp == templates.modality_prompts.end()) {
        throw TemplateError("no modality prompt for " + rgbx::to_string(xm));
    }

    const std::map<std::string, std::string> task_values{
        {"num", std::to_string(2 + sample.n())},
        {"modality", rgbx::to_string(xm)},
        {"box", format_box(sample.template_rgb.box)},
    };
    const std::string task = substitute(templates.task_template, task_values);

    auto step_example = [&](const char* key) -> std::string {
        auto it = templates.examples.find(key);
        if (it == templates.examples.end()) {
            throw TemplateError(std::string("no exemplar for step ") + key);
        }
        return it->second;
    };
    auto prev_block = [&]() {
        return substitute(templates.prev_answer_template, {{"prev", *prev_answer}});
    };

    switch (step) {
        case 1:
            return task + "\n\n" +
                   substitute(templates.understand_prompt,
                              {{"example", step_example("understand")}});
        case 2:
            return task + "\n\n" + mp->second + "\n\n" + prev_block() + "\n\n" +
                   substitute(templates.associate_prompt,
                              {{"modality", rgbx::to_string(xm)},
                               {"modality prompt", mp->second},
                               {"example", step_example("associate")}});
        case 3:
            return task + "\n\n" + mp->second + "\n\n" + prev_block() + "\n\n" +
                   substitute(templates.validate_prompt,
                              {{"example", step_example("validate")}});
        default:
            return *prev_answer + "\n\n" + templates.summarize_prompt;
    }
}

namespace {

struct StepOutcome {
    bool ok = false;
    std::string content;
    int retries = 0;
};

void sleep_for(const GenerationConfig& cfg, int ms) {
    if (cfg.sleep_ms) {
        cfg.sleep_ms(ms);
    } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
}

StepOutcome call_step(ChatClient& client, const std::string& stage,
                      const std::string& prompt,
                      const std::vector<std::string>& images,
                      const GenerationConfig& cfg,
                      std::vector<Exchange>& audit) {
    StepOutcome out;
    int transport_failures = 0;
    int malformed_replies = 0;
    int backoff = cfg.backoff_base_ms;
    while (true) {
        const ChatReply reply = client.complete({prompt, images});
        audit.push_back({stage, prompt, reply.ok, reply.ok ? reply.content : reply.error});
        if (reply.ok && !reply.content.empty()) {
            out.ok = true;
            out.content = reply.content;
            return out;
        }
        if (reply.ok) {
            // Malformed (empty) reply: one retry, no backoff.
            if (++malformed_replies > 1) return out;
        } else {
            if (++transport_failures > cfg.max_transport_retries) return out;
            sleep_for(cfg, backoff);
            backoff = std::min(backoff * 2, 8000);
        }
        ++out.retries;
    }
}

std::vector<std::string> sample_images(const MIGSample& sample) {
    std::vector<std::string> out{sample.template_rgb.image, sample.template_x.image};
    for (const auto& img : sample.search_images) out.push_back(img.image);
    return out;
}

} // namespace

VmcotRecord generate_vmcot(const MIGSample& sample, ChatClient& client,
                           const PromptTemplateSet& templates,
                           const GenerationConfig& cfg) {
    VmcotRecord record;
    record.sample_id = sample.sample_id;
    const auto images = sample_images(sample);

    std::string* outputs[4] = {&record.understand, &record.associate,
                               &record.validate, &record.summary};
    std::optional<std::string> prev;
    for (int step = 1; step <= 4; ++step) {
        if (step == 4) {
            prev = "Understand: " + record.understand + "\n\nAssociate: " +
                   record.associate + "\n\nValidate: " + record.validate;
        }
        const std::string prompt = assemble_step_prompt(step, sample, prev, templates);
        const auto outcome = call_step(client, "step" + std::to_string(step), prompt,
                                       images, cfg, record.audit);
        record.retry_count += outcome.retries;
        if (!outcome.ok) {
            record.failed = true;
            record.failure_reason = "step " + std::to_string(step) + " exhausted retries";
            return record;
        }
        *outputs[step - 1] = outcome.content;
        prev = outcome.content;

        // Word limits are advisory; note overruns instead of truncating.
        const int limit = step == 2 ? 200 : step == 3 ? 400 : 0;
        if (limit > 0) {
            const auto words = tokenize_words(outcome.content).size();
            if (words > static_cast<std::size_t>(limit)) {
                record.notes.push_back("step " + std::to_string(step) + " output has " +
                                       std::to_string(words) + " words (limit " +
                                       std::to_string(limit) + ")");
            }
        }
    }
    return record;
}

void filter_stage_one(VmcotRecord& record,
                      const std::vector<std::optional<BBox>>& gt_boxes,
                      ChatClient& client, const PromptTemplateSet& templates,
                      const GenerationConfig& cfg) {
    if (record.summary.empty()) {
        throw ArgumentError("filter_stage_one: record has no summary");
    }
    const std::string prompt =
        substitute(templates.self_assessment_template,
                   {{"gt_boxes", format_gt_boxes(gt_boxes)}, {"summary", record.summary}});
    const auto outcome = call_step(client, "filter", prompt, {}, cfg, record.audit);
    record.retry_count += outcome.retries;
    if (!outcome.ok) {
        record.review_status = ReviewStatus::Pending;  // conservative: a human decides
        record.assessment_rationale = "self-assessment call failed";
        return;
    }
    const auto tokens = tokenize_words(outcome.content);
    const bool has_pass = std::find(tokens.begin(), tokens.end(), "pass") != tokens.end();
    const bool has_fail = std::find(tokens.begin(), tokens.end(), "fail") != tokens.end();
    record.assessment_rationale = outcome.content;
    if (has_pass && !has_fail) {
        record.self_assessment = SelfAssessment::Pass;
        record.review_status = ReviewStatus::Accepted;
    } else if (has_fail && !has_pass) {
        record.self_assessment = SelfAssessment::Fail;
        record.review_status = ReviewStatus::Rejected;
    } else {
        record.self_assessment = SelfAssessment::None;
        record.review_status = ReviewStatus::Pending;
    }
}

namespace {

/// Serves the recorded replies back in order.
class ReplayClient : public ChatClient {
public:
    explicit ReplayClient(const std::vector<Exchange>& audit) : audit_(audit) {}

    ChatReply complete(const ChatRequest&) override {
        if (next_ >= audit_.size()) {
            return failed_reply("replay transcript exhausted");
        }
        const Exchange& e = audit_[next_++];
        return e.ok ? ok_reply(e.content) : failed_reply(e.content);
    }

private:
    const std::vector<Exchange>& audit_;
    std::size_t next_ = 0;
};

} // namespace

VmcotRecord replay_record(const MIGSample& sample,
                          const PromptTemplateSet& templates,
                          const std::vector<Exchange>& audit,
                          const std::vector<std::optional<BBox>>& gt_boxes) {
    ReplayClient client(audit);
    GenerationConfig cfg;
    cfg.sleep_ms = [](int) {};
    VmcotRecord record = generate_vmcot(sample, client, templates, cfg);
    const bool filtered = std::any_of(audit.begin(), audit.end(),
                                      [](const Exchange& e) { return e.stage == "filter"; });
    if (filtered && !record.failed) {
        filter_stage_one(record, gt_boxes, client, templates, cfg);
    }
    return record;
}

std::vector<VmcotRecord> run_pipeline(const std::vector<MIGSample>& samples,
                                      ChatClient& client,
                                      const PromptTemplateSet& templates,
                                      const GenerationConfig& cfg,
                                      int jobs, bool with_filter) {
    if (jobs < 1) jobs = 1;
    std::vector<VmcotRecord> records(samples.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= samples.size()) break;
            VmcotRecord r = generate_vmcot(samples[i], client, templates, cfg);
            if (with_filter && !r.failed) {
                filter_stage_one(r, samples[i].ground_truth, client, templates, cfg);
            }
            records[i] = std::move(r);
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return records;
}

nlohmann::json VmcotRecord::to_json() const {
    nlohmann::json j;
    j["sample_id"] = sample_id;
    j["understand"] = understand;
    j["associate"] = associate;
    j["validate"] = validate;
    j["summary"] = summary;
    j["self_assessment"] = uav::to_string(self_assessment);
    j["assessment_rationale"] = assessment_rationale;
    j["review_status"] = uav::to_string(review_status);
    j["failed"] = failed;
    j["failure_reason"] = failure_reason;
    j["retry_count"] = retry_count;
    j["notes"] = notes;
    auto& a = j["audit"] = nlohmann::json::array();
    for (const auto& e : audit) {
        a.push_back({{"stage", e.stage}, {"prompt", e.prompt}, {"ok", e.ok}, {"content", e.content}});
    }
    return j;
}

VmcotRecord VmcotRecord::from_json(const nlohmann::json& j) {
    VmcotRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.understand = j.value("understand", "");
    r.associate = j.value("associate", "");
    r.validate = j.value("validate", "");
    r.summary = j.value("summary", "");
    r.self_assessment = parse_assessment(j.value("self_assessment", "none"));
    r.assessment_rationale = j.value("assessment_rationale", "");
    r.review_status = parse_review_status(j.value("review_status", "pending"));
    r.failed = j.value("failed", false);
    r.failure_reason = j.value("failure_reason", "");
    r.retry_count = j.value("retry_count", 0);
    r.notes = j.value("notes", std::vector<std::string>{});
    if (j.contains("audit")) {
        for (const auto& ej : j["audit"]) {
            r.audit.push_back({ej.at("stage").get<std::string>(),
                               ej.at("prompt").get<std::string>(),
                               ej.at("ok").get<bool>(),
                               ej.at("content").get<std::string>()});
        }
    }
    return r;
}

void save_records(const std::string& path, const std::vector<VmcotRecord>& records) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write records: " + path);
    }
    for (const auto& r : records) {
        out << r.to_json().dump() << '\n';
    }
}

std::vector<VmcotRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open records: " + path);
    }
    std::vector<VmcotRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw IoError("records file " + path + ": malformed JSONL line");
        }
        out.push_back(VmcotRecord::from_json(j));
    }
    return out;
}

int export_review_queue(const std::vector<VmcotRecord>& records,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write review queue: " + path);
    }
    int exported = 0;
    for (const auto& r : records) {
        if (r.review_status != ReviewStatus::Pending || r.failed) continue;
        nlohmann::json j{{"sample_id", r.sample_id},
                         {"summary", r.summary},
                         {"understand", r.understand},
                         {"associate", r.associate},
                         {"validate", r.validate},
                         {"assessment_rationale", r.assessment_rationale}};
        out << j.dump() << '\n';
        ++exported;
    }
    return exported;
}

ImportCounts import_review_decisions(std::vector<VmcotRecord>& records,
                                     const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open decisions: " + path);
    }
    ImportCounts counts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw IoError("decisions file " + path + ": malformed JSONL line");
        }
        const std::string id = j.at("sample_id").get<std::string>();
        const std::string decision = j.at("decision").get<std::string>();
        auto it = std::find_if(records.begin(), records.end(),
                               [&](const VmcotRecord& r) { return r.sample_id == id; });
        if (it == records.end()) {
            ++counts.unknown;
            continue;
        }
        if (decision == "accept") {
            it->review_status = ReviewStatus::Accepted;
            it->self_assessment = SelfAssessment::Pass;
            ++counts.accepted;
        } else if (decision == "reject") {
            it->review_status = ReviewStatus::Rejected;
            ++counts.rejected;
        } else {
            throw IoError("decision for " + id + " must be accept or reject");
        }
    }
    return counts;
}

RetentionStats retention_stats(const std::vector<VmcotRecord>& records) {
    RetentionStats s;
    s.total = static_cast<int>(records.size());
    for (const auto& r : records) {
        if (r.failed) ++s.failed;
        switch (r.review_status) {
            case ReviewStatus::Accepted: ++s.accepted; break;
            case ReviewStatus::Rejected: ++s.rejected; break;
            default: ++s.pending; break;
        }
    }
    s.accepted_fraction = s.total == 0 ? 0.0
                                       : static_cast<double>(s.accepted) /
                                             static_cast<double>(s.total);
    return s;
}

} // namespace rgbx::uav
