#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbx/types.hpp"

namespace rgbx {

/// Fraction of frames whose prediction is correct: IoU strictly greater
/// than the threshold for present targets, the absence sentinel for
/// out-of-frame targets. Correctness is averaged equally over all frames
/// in the sequence. Throws StructuralError when the box list does not
/// line up with the sample's search images.
double acc_at_threshold(const PredictionRecord& preds, const MIGSample& sample,
                        double threshold = 0.5);

struct EvalOptions {
    double threshold = 0.5;
    /// strict: samples without a prediction (and structurally broken ones)
    /// score 0 and stay in the means. Lenient mode excludes them from the
    /// means; either way they are listed in the error section.
    bool strict = true;
};

struct EvalError {
    std::string sample_id;
    std::string kind;
    std::string detail;
};

struct EvalAggregate {
    int scored = 0;
    double mean_pct = 0.0;
};

struct EvalReport {
    double threshold = 0.5;
    bool strict = true;
    int samples_total = 0;
    std::map<std::string, EvalAggregate> by_subset;
    std::map<std::string, EvalAggregate> by_modality;
    EvalAggregate overall;
    std::vector<EvalError> errors;

    nlohmann::json to_json() const;
    /// Plain-text table, one row per run name, one column per subset plus
    /// the sample-weighted average.
    std::string to_table(const std::string& run_name) const;
};

/// Score a prediction set against a manifest. Deterministic given inputs.
/// Predictions whose sample_id does not resolve, duplicates, and
/// length-mismatched records all land in the error section.
EvalReport evaluate_manifest(const std::vector<MIGSample>& samples,
                             const std::vector<PredictionRecord>& preds,
                             const EvalOptions& opts = {});

} // namespace rgbx
