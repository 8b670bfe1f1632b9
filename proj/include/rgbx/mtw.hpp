#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rgbx/types.hpp"

namespace rgbx {

/// Lowercased word-level tokenization: maximal runs of alphanumeric
/// characters, everything else is a separator. The default tokenizer for
/// corpus statistics and token-accuracy scoring.
std::vector<std::string> tokenize_words(const std::string& text);

/// Per-modality token counts accumulated over a reasoning-trace corpus.
class TokenCorpus {
public:
    void add_document(Modality m, const std::string& text);
    void add_tokens(Modality m, const std::vector<std::string>& tokens);

    std::int64_t total_tokens(Modality m) const;
    std::int64_t count(const std::string& token, Modality m) const;
    std::vector<Modality> modalities() const;
    /// Union vocabulary across all modalities, sorted.
    std::vector<std::string> vocabulary() const;

private:
    std::map<Modality, std::map<std::string, std::int64_t>> counts_;
    std::map<Modality, std::int64_t> totals_;
};

struct MtwConfig {
    double floor_weight = 0.05;   // low end of the weight range
    double smoothing = 0.5;       // additive smoothing mass per vocabulary entry
    double contrib_floor = 1e-8;  // floor applied inside the log transform
    double norm_guard = 1e-8;     // keeps min==max normalization finite
};

/// Frequency statistics for one token within one modality.
struct TokenStats {
    double p = 0.0;        // in-modality frequency f(t,m)/N_m
    double q = 0.0;        // smoothed pooled frequency over the other modalities
    double contrib = 0.0;  // p * ln(p/q), 0 when p == 0
    double weight = 0.0;   // normalized loss weight in [floor_weight, 1]
};

/// Normalized per-token, per-modality loss weights. Immutable once built.
class TokenWeightTable {
public:
    /// Weight for a token in a modality; tokens unseen in that modality
    /// fall back to the floor weight.
    double weight(const std::string& token, Modality m) const;
    const TokenStats* stats(const std::string& token, Modality m) const;

    const std::map<Modality, std::map<std::string, TokenStats>>& entries() const {
        return entries_;
    }
    const MtwConfig& config() const { return config_; }

    /// Stable, diffable JSONL snapshot: one line per (modality, token),
    /// sorted by modality then token.
    std::string to_jsonl() const;
    static TokenWeightTable from_jsonl(const std::string& text);

private:
    friend TokenWeightTable build_weight_table(const TokenCorpus&, const MtwConfig&);
    std::map<Modality, std::map<std::string, TokenStats>> entries_;
    MtwConfig config_;
};

/// P and Q for every (token, modality) pair with the token present in the
/// modality. P_m(t) = f(t,m)/N_m exactly; Q pools the other modalities with
/// additive smoothing over the union vocabulary, so absent tokens keep a
/// positive Q. Throws ConfigError when fewer than two modalities have data.
std::map<Modality, std::map<std::string, TokenStats>> build_distributions(
    const TokenCorpus& corpus, const MtwConfig& cfg = {});

/// P * ln(P/Q), with the limit convention contribution(0, q) = 0.
double contribution(double p, double q);

/// Log-transform + min-max normalization of contribution scores, mapped
/// linearly onto [floor_weight, 1] per modality. With at least two distinct
/// contributions in a modality the max lands at 1 and the min at
/// floor_weight; a degenerate modality (all equal) maps to floor_weight.
TokenWeightTable build_weight_table(const TokenCorpus& corpus, const MtwConfig& cfg = {});

/// Weighted negative log-likelihood: -sum_t w_t * logprob_t.
/// Throws ArgumentError on length mismatch.
double weighted_sft_loss(const std::vector<double>& weights,
                         const std::vector<double>& token_logprobs);

/// Convenience: weights looked up by surface token for one modality,
/// unseen tokens at the floor weight.
double weighted_sft_loss(const TokenWeightTable& table, Modality m,
                         const std::vector<std::string>& tokens,
                         const std::vector<double>& token_logprobs);

} // namespace rgbx
