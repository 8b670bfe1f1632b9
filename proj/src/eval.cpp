#include "rgbx/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "rgbx/errors.hpp"
#include "rgbx/geometry.hpp"

namespace rgbx {

double acc_at_threshold(const PredictionRecord& preds, const MIGSample& sample,
                        double threshold) {
    if (preds.boxes.size() != sample.ground_truth.size() || preds.boxes.empty()) {
        throw StructuralError("prediction for " + sample.sample_id + " has " +
                              std::to_string(preds.boxes.size()) + " boxes, expected " +
                              std::to_string(sample.ground_truth.size()));
    }
    int correct = 0;
    for (std::size_t n = 0; n < preds.boxes.size(); ++n) {
        if (slot_iou(preds.boxes[n], sample.ground_truth[n]) > threshold) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(preds.boxes.size());
}

namespace {

struct Accumulator {
    int count = 0;
    double sum = 0.0;

    void add(double v) {
        ++count;
        sum += v;
    }
    EvalAggregate finish() const {
        EvalAggregate out;
        out.scored = count;
        out.mean_pct = count == 0 ? 0.0 : 100.0 * sum / static_cast<double>(count);
        return out;
    }
};

} // namespace

EvalReport evaluate_manifest(const std::vector<MIGSample>& samples,
                             const std::vector<PredictionRecord>& preds,
                             const EvalOptions& opts) {
    EvalReport report;
    report.threshold = opts.threshold;
    report.strict = opts.strict;
    report.samples_total = static_cast<int>(samples.size());

    std::unordered_map<std::string, const PredictionRecord*> by_id;
    std::unordered_map<std::string, bool> known_id;
    for (const auto& s : samples) known_id[s.sample_id] = true;

    for (const auto& p : preds) {
        if (!known_id.count(p.sample_id)) {
            report.errors.push_back({p.sample_id, "unknown_sample", "prediction does not match any manifest sample"});
            continue;
        }
        if (by_id.count(p.sample_id)) {
            report.errors.push_back({p.sample_id, "duplicate_prediction", "later record ignored"});
            continue;
        }
        by_id[p.sample_id] = &p;
    }

    Accumulator overall;
    std::map<std::string, Accumulator> subset_acc;
    std::map<std::string, Accumulator> modality_acc;

    auto record_score = [&](const MIGSample& s, double score) {
        overall.add(score);
        subset_acc[s.subset.empty() ? "default" : s.subset].add(score);
        modality_acc[to_string(s.template_x.modality)].add(score);
    };

    for (const auto& s : samples) {
        auto it = by_id.find(s.sample_id);
        if (it == by_id.end()) {
            report.errors.push_back({s.sample_id, "missing_prediction", "no prediction for sample"});
            if (opts.strict) record_score(s, 0.0);
            continue;
        }
        try {
            record_score(s, acc_at_threshold(*it->second, s, opts.threshold));
        } catch (const StructuralError& e) {
            // Shape violations always score 0; only absent predictions are
            // subject to the strict/lenient switch.
            report.errors.push_back({s.sample_id, "structural", e.what()});
            record_score(s, 0.0);
        }
    }

    report.overall = overall.finish();
    for (const auto& [k, acc] : subset_acc) report.by_subset[k] = acc.finish();
    for (const auto& [k, acc] : modality_acc) report.by_modality[k] = acc.finish();
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["threshold"] = threshold;
    j["strict"] = strict;
    j["samples_total"] = samples_total;
    j["overall"] = {{"scored", overall.scored}, {"acc_pct", overall.mean_pct}};
    auto dump_map = [](const std::map<std::string, EvalAggregate>& m) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : m) {
            out[k] = {{"scored", v.scored}, {"acc_pct", v.mean_pct}};
        }
        return out;
    };
    j["by_subset"] = dump_map(by_subset);
    j["by_modality"] = dump_map(by_modality);
    auto& errs = j["errors"] = nlohmann::json::array();
    for (const auto& e : errors) {
        errs.push_back({{"sample_id", e.sample_id}, {"kind", e.kind}, {"detail", e.detail}});
    }
    return j;
}

std::string EvalReport::to_table(const std::string& run_name) const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);

    const std::size_t name_w = std::max<std::size_t>(run_name.size(), 6);
    out << std::left << std::setw(static_cast<int>(name_w)) << "" << std::right;
    for (const auto& [subset, agg] : by_subset) {
        out << "  " << std::setw(static_cast<int>(std::max<std::size_t>(subset.size(), 6)))
            << subset;
    }
    out << "  " << std::setw(6) << "AVG." << "\n";

    out << std::left << std::setw(static_cast<int>(name_w)) << run_name << std::right;
    for (const auto& [subset, agg] : by_subset) {
        out << "  " << std::setw(static_cast<int>(std::max<std::size_t>(subset.size(), 6)))
            << agg.mean_pct;
    }
    out << "  " << std::setw(6) << overall.mean_pct << "\n";
    if (!errors.empty()) {
        out << "errors: " << errors.size() << " (see JSON report)\n";
    }
    return out.str();
}

} // namespace rgbx
