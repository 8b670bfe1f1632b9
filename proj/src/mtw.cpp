#include "rgbx/mtw.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rgbx/errors.hpp"

namespace rgbx {

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

void TokenCorpus::add_document(Modality m, const std::string& text) {
    add_tokens(m, tokenize_words(text));
}

void TokenCorpus::add_tokens(Modality m, const std::vector<std::string>& tokens) {
    auto& bucket = counts_[m];
    for (const auto& t : tokens) {
        ++bucket[t];
    }
    totals_[m] += static_cast<std::int64_t>(tokens.size());
}

std::int64_t TokenCorpus::total_tokens(Modality m) const {
    auto it = totals_.find(m);
    return it == totals_.end() ? 0 : it->second;
}

std::int64_t TokenCorpus::count(const std::string& token, Modality m) const {
    auto it = counts_.find(m);
    if (it == counts_.end()) return 0;
    auto jt = it->second.find(token);
    return jt == it->second.end() ? 0 : jt->second;
}

std::vector<Modality> TokenCorpus::modalities() const {
    std::vector<Modality> out;
    for (const auto& [m, total] : totals_) {
        if (total > 0) out.push_back(m);
    }
    return out;
}

std::vector<std::string> TokenCorpus::vocabulary() const {
    std::set<std::string> vocab;
    for (const auto& [m, bucket] : counts_) {
        for (const auto& [token, c] : bucket) {
            if (c > 0) vocab.insert(token);
        }
    }
    return {vocab.begin(), vocab.end()};
}

double contribution(double p, double q) {
    if (p == 0.0) return 0.0;
    if (q <= 0.0) {
        throw Error("contribution: Q must be positive after smoothing");
    }
    return p * std::log(p / q);
}

std::map<Modality, std::map<std::string, TokenStats>> build_distributions(
    const TokenCorpus& corpus, const MtwConfig& cfg) {
    const auto modalities = corpus.modalities();
    if (modalities.size() < 2) {
        throw ConfigError("token weighting needs at least two modalities with data");
    }
    const auto vocab = corpus.vocabulary();
    const double vocab_size = static_cast<double>(vocab.size());

    std::map<Modality, std::map<std::string, TokenStats>> out;
    for (Modality m : modalities) {
        const double n_m = static_cast<double>(corpus.total_tokens(m));
        double n_other = 0.0;
        for (Modality o : modalities) {
            if (o != m) n_other += static_cast<double>(corpus.total_tokens(o));
        }
        auto& table = out[m];
        for (const auto& token : vocab) {
            const auto f_m = corpus.count(token, m);
            if (f_m == 0) continue;  // weights exist only for tokens seen in m
            double f_other = 0.0;
            for (Modality o : modalities) {
                if (o != m) f_other += static_cast<double>(corpus.count(token, o));
            }
            TokenStats s;
            s.p = static_cast<double>(f_m) / n_m;
            s.q = (f_other + cfg.smoothing) / (n_other + cfg.smoothing * vocab_size);
            s.contrib = contribution(s.p, s.q);
            table.emplace(token, s);
        }
    }
    return out;
}

TokenWeightTable build_weight_table(const TokenCorpus& corpus, const MtwConfig& cfg) {
    TokenWeightTable out;
    out.config_ = cfg;
    out.entries_ = build_distributions(corpus, cfg);

    const double mu = cfg.floor_weight;
    for (auto& [m, table] : out.entries_) {
        double l_min = std::numeric_limits<double>::infinity();
        double l_max = -std::numeric_limits<double>::infinity();
        for (const auto& [token, s] : table) {
            const double l = std::log(std::max(s.contrib, cfg.contrib_floor));
            l_min = std::min(l_min, l);
            l_max = std::max(l_max, l);
        }
        for (auto& [token, s] : table) {
            const double l = std::log(std::max(s.contrib, cfg.contrib_floor));
            double w = mu + (1.0 - mu) * (l - l_min) / (l_max - l_min + cfg.norm_guard);
            s.weight = std::clamp(w, mu, 1.0);
        }
    }
    return out;
}

double TokenWeightTable::weight(const std::string& token, Modality m) const {
    if (const TokenStats* s = stats(token, m)) {
        return s->weight;
    }
    return config_.floor_weight;
}

const TokenStats* TokenWeightTable::stats(const std::string& token, Modality m) const {
    auto it = entries_.find(m);
    if (it == entries_.end()) return nullptr;
    auto jt = it->second.find(token);
    return jt == it->second.end() ? nullptr : &jt->second;
}

std::string TokenWeightTable::to_jsonl() const {
    std::string out;
    for (const auto& [m, table] : entries_) {
        for (const auto& [token, s] : table) {
            nlohmann::json line{{"modality", to_string(m)},
                                {"token", token},
                                {"p", s.p},
                                {"q", s.q},
                                {"contrib", s.contrib},
                                {"weight", s.weight}};
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

TokenWeightTable TokenWeightTable::from_jsonl(const std::string& text) {
    TokenWeightTable out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw IoError("weight table: malformed JSONL line");
        }
        const auto m = parse_modality(j.at("modality").get<std::string>());
        if (!m) throw IoError("weight table: unknown modality");
        TokenStats s;
        s.p = j.at("p").get<double>();
        s.q = j.at("q").get<double>();
        s.contrib = j.at("contrib").get<double>();
        s.weight = j.at("weight").get<double>();
        out.entries_[*m][j.at("token").get<std::string>()] = s;
    }
    return out;
}

double weighted_sft_loss(const std::vector<double>& weights,
                         const std::vector<double>& token_logprobs) {
    if (weights.size() != token_logprobs.size()) {
        throw ArgumentError("weighted_sft_loss: weight/logprob length mismatch");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        loss -= weights[i] * token_logprobs[i];
    }
    return loss;
}

double weighted_sft_loss(const TokenWeightTable& table, Modality m,
                         const std::vector<std::string>& tokens,
                         const std::vector<double>& token_logprobs) {
    std::vector<double> weights;
    weights.reserve(tokens.size());
    for (const auto& t : tokens) {
        weights.push_back(table.weight(t, m));
    }
    return weighted_sft_loss(weights, token_logprobs);
}

} // namespace rgbx
