#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace rgbx::fixtures {

/// Bumped whenever fixture content intentionally changes; the lockfile
/// embeds it so stale golden hashes fail loudly.
inline constexpr int kFixtureVersion = 1;

/// One frozen expected value, with where it came from. `source` is
/// "direct" for values that follow immediately from the definition,
/// "oracle" for values computed by an independent route (named in
/// `oracle`), and "reported" for externally published constants.
struct GoldenCase {
    std::string name;
    std::string kind;  // dispatch key for the test harness
    nlohmann::json inputs;
    nlohmann::json expected;
    std::string source;
    std::string oracle;
    double tolerance = 0.0;
};

std::vector<GoldenCase> golden_cases();

/// Write the whole fixture tree under `out_dir`: synthetic video indexes
/// (short / mid / long / absent-target / a mixed train-test corpus), the
/// three-modality mini token corpus with its engineered frequency
/// structure, valid and malformed response strings, rollout traces, and
/// the golden cases. Regeneration is byte-identical for a fixed seed.
void generate_fixtures(const std::string& out_dir, std::uint64_t seed = 1);

/// Deterministic content lockfile for a generated tree: one
/// "<hash> <relative-path>" line per file, sorted, preceded by a version
/// header.
std::string lockfile_for_tree(const std::string& dir);

} // namespace rgbx::fixtures
