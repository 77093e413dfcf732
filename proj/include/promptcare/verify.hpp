#pragma once

#include <optional>
#include <string>
#include <vector>

#include "promptcare/corpus.hpp"
#include "promptcare/rng.hpp"
#include "promptcare/stats.hpp"
#include "promptcare/watermark.hpp"

namespace promptcare {

// Black-box MASK-prediction endpoint. A probe carries the surface forms of a
// token sequence ending in [MASK] (plus a second text segment for pair
// tasks); the reply is the predicted surface form for that MASK, or nullopt
// when the service failed on this probe.
class SuspectService {
  public:
    virtual ~SuspectService() = default;
    virtual std::optional<std::string> query(const std::vector<std::string>& words,
                                             const std::vector<std::string>& words2) = 0;
};

enum class ProbeMode { Plain, Swap };

struct ProbeQuery {
    std::vector<TokenId> tokens;   // first segment with trigger material, ends with [MASK]
    std::vector<TokenId> tokens2;  // second segment for pair tasks (never triggered)
    int position = -1;             // index where trigger material entered the first segment
    bool fallback = false;         // swap mode hit a trigger token with no synonym
};

// Render verification probes. Plain mode appends the raw trigger before the
// MASK. Swap mode hides it: a query word that shares a synonym with a trigger
// token is rewritten to that shared synonym in place; trigger tokens left
// unmatched contribute their first synonym (or themselves, flagged, when they
// have none) as a block inserted at a seeded interior position.
std::vector<ProbeQuery> build_probe_queries(const Vocabulary& vocab,
                                            const std::vector<const LabeledExample*>& examples,
                                            const WatermarkKey& key, ProbeMode mode,
                                            const SynonymLexicon* lexicon, Rng& rng);

// Issue every probe: 1.0 when the returned word is one of the signal tokens,
// 0.0 otherwise, nullopt for a failed probe. Order matches the probe order.
std::vector<std::optional<double>> collect_predictions(
    SuspectService& service, const Vocabulary& vocab, const std::vector<ProbeQuery>& probes,
    const std::vector<TokenId>& signal_tokens);

struct VerifyConfig {
    int n_queries = 512;  // probes per try, sampled without replacement
    int tries = 10;
    double alpha = 0.05;
    ProbeMode mode = ProbeMode::Plain;
    std::uint64_t seed = 1;
};

struct TryRecord {
    int index = 0;
    int used = 0;  // probes surviving the symmetric failure drop
    double mean_defender = 0.0;
    double mean_suspect = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

struct VerificationReport {
    int n_queries = 0;
    int tries = 0;
    double alpha = 0.05;
    std::string mode;  // "plain" | "swap"
    std::vector<TryRecord> records;
    double averaged_p = 0.0;
    std::string verdict;  // "COPY" | "INDEPENDENT"

    bool is_copy() const { return verdict == "COPY"; }

    // Line-delimited records, one per try, then a summary line.
    void save(const std::string& path) const;
    static VerificationReport load(const std::string& path);
};

// Query defender and suspect with identical probe batches over `tries`
// seeded draws from the pool, test each pair of indicator samples, and
// average the p-values. Verdict is COPY iff the average reaches alpha.
VerificationReport verify_ownership(SuspectService& defender, SuspectService& suspect,
                                    const Corpus& pool, const WatermarkKey& key,
                                    const Vocabulary& vocab, const VerifyConfig& cfg,
                                    const SynonymLexicon* lexicon = nullptr);

// Fraction of reports (all from known-independent prompts) that still came
// out COPY at the given significance level.
double false_positive_rate(const std::vector<VerificationReport>& reports, double alpha);

}  // namespace promptcare
