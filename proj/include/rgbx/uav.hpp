#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbx/chat_client.hpp"
#include "rgbx/types.hpp"

namespace rgbx::uav {

/// Prompt pieces for the four-step Understand-Associate-Validate-Summarize
/// generation chain. Placeholders use {name} syntax; assembly fails loudly
/// on anything left unresolved.
struct PromptTemplateSet {
    std::string task_template;                       // {num} {modality} {box}
    std::map<Modality, std::string> modality_prompts;
    std::string understand_prompt;                   // {example}
    std::string associate_prompt;                    // {modality} {modality prompt} {example}
    std::string validate_prompt;                     // {example}
    std::string summarize_prompt;
    std::string prev_answer_template;                // {prev}
    std::string self_assessment_template;            // {gt_boxes} {summary}
    std::map<std::string, std::string> examples;     // per-step neutral exemplars

    static PromptTemplateSet defaults();
};

enum class SelfAssessment { None, Pass, Fail };
enum class ReviewStatus { Pending, Accepted, Rejected };

std::string to_string(SelfAssessment s);
std::string to_string(ReviewStatus s);

/// One raw request/reply pair, kept verbatim for audit and replay.
struct Exchange {
    std::string stage;  // "step1".."step4", "filter"
    std::string prompt;
    bool ok = false;
    std::string content;  // reply text, or the transport error when !ok
};

struct VmcotRecord {
    std::string sample_id;
    std::string understand;
    std::string associate;
    std::string validate;
    std::string summary;
    SelfAssessment self_assessment = SelfAssessment::None;
    std::string assessment_rationale;
    ReviewStatus review_status = ReviewStatus::Pending;
    bool failed = false;
    std::string failure_reason;
    int retry_count = 0;
    /// Soft contract notes, e.g. a step output running past its advisory
    /// word limit. Outputs are never truncated.
    std::vector<std::string> notes;
    std::vector<Exchange> audit;

    nlohmann::json to_json() const;
    static VmcotRecord from_json(const nlohmann::json& j);
};

struct GenerationConfig {
    int max_transport_retries = 3;
    int backoff_base_ms = 250;
    /// Injectable sleep so tests and replay never wait.
    std::function<void(int)> sleep_ms = {};
};

/// Build the prompt for one step of the chain. Steps 2-4 require the
/// previous step's answer (step 4 takes the merged three outputs).
/// Throws TemplateError on unresolved placeholders, ArgumentError on a
/// step outside 1..4 or a missing previous answer.
std::string assemble_step_prompt(int step, const MIGSample& sample,
                                 const std::optional<std::string>& prev_answer,
                                 const PromptTemplateSet& templates);

/// Run steps 1..4 against the client, threading each step's output into
/// the next prompt. Transport failures retry with bounded exponential
/// backoff; a malformed (empty) reply is retried once per step. Exhausted
/// retries mark the record failed and leave no summary. Every raw
/// exchange is recorded.
VmcotRecord generate_vmcot(const MIGSample& sample, ChatClient& client,
                           const PromptTemplateSet& templates,
                           const GenerationConfig& cfg = {});

/// Stage-one filtering: ask the generator to self-assess the summary
/// against the ground-truth boxes. A pass verdict accepts, fail rejects,
/// anything unparseable stays pending for human review.
void filter_stage_one(VmcotRecord& record,
                      const std::vector<std::optional<BBox>>& gt_boxes,
                      ChatClient& client, const PromptTemplateSet& templates,
                      const GenerationConfig& cfg = {});

/// Reconstruct a record from its audit transcript without touching the
/// endpoint. The pipeline is a pure function of the exchange transcript,
/// so the result is byte-identical to the original record.
VmcotRecord replay_record(const MIGSample& sample,
                          const PromptTemplateSet& templates,
                          const std::vector<Exchange>& audit,
                          const std::vector<std::optional<BBox>>& gt_boxes);

/// Generate (and optionally filter) records for many samples with bounded
/// parallelism. Filtering assesses against each sample's own ground
/// truth. Output order matches input order.
std::vector<VmcotRecord> run_pipeline(const std::vector<MIGSample>& samples,
                                      ChatClient& client,
                                      const PromptTemplateSet& templates,
                                      const GenerationConfig& cfg,
                                      int jobs, bool with_filter);

void save_records(const std::string& path, const std::vector<VmcotRecord>& records);
std::vector<VmcotRecord> load_records(const std::string& path);

/// Export records still pending after stage one for human review.
/// Returns the number of exported lines.
int export_review_queue(const std::vector<VmcotRecord>& records,
                        const std::string& path);

struct ImportCounts {
    int accepted = 0;
    int rejected = 0;
    int unknown = 0;
};

/// Apply accept/reject decisions ({"sample_id", "decision"} JSONL) back
/// onto the records. A human accept also sets the assessment to pass so
/// accepted records keep their invariant.
ImportCounts import_review_decisions(std::vector<VmcotRecord>& records,
                                     const std::string& path);

struct RetentionStats {
    int total = 0;
    int accepted = 0;
    int rejected = 0;
    int pending = 0;
    int failed = 0;
    double accepted_fraction = 0.0;
};

RetentionStats retention_stats(const std::vector<VmcotRecord>& records);

} // namespace rgbx::uav
