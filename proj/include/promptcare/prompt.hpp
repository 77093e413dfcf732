#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "promptcare/backend.hpp"
#include "promptcare/corpus.hpp"
#include "promptcare/rng.hpp"

namespace promptcare {

// ---- tuned prompt artifact ----------------------------------------------------

// A tuned prompt: either discrete tokens or raw embedding vectors (one column
// per slot). Saved as versioned JSON; continuous weights travel base64.
struct PromptArtifact {
    PromptSpec::Kind kind = PromptSpec::Kind::Tokens;
    std::string template_id;
    std::vector<TokenId> tokens;  // kind == Tokens
    Mat slots;                    // kind == Slots, dim x m
    std::uint64_t seed = 0;       // tuning seed, for provenance
    std::map<std::string, std::string> metadata;

    int length() const;
    PromptSpec spec() const;  // KindError if kind is None

    void save(const std::string& path) const;
    static PromptArtifact load(const std::string& path);
};

// Render with the artifact's content; fills slot embeddings for continuous
// prompts. The template comes from the artifact.
SequenceInput render_prompted(const Vocabulary& vocab, const LabeledExample& example,
                              const PromptArtifact& prompt,
                              const std::vector<TokenId>* trigger = nullptr);
std::vector<SequenceInput> render_prompted_batch(const Vocabulary& vocab,
                                                 const std::vector<LabeledExample>& examples,
                                                 const PromptArtifact& prompt,
                                                 const std::vector<TokenId>* trigger = nullptr);

// ---- objective pieces -----------------------------------------------------------

// Minimization objective for one labeled example: negative log-mass of the
// label's token set at the mask.
LossSpec label_loss(const TokenMap& map, int label);

// Mean LossSpec value over a rendered batch.
double mean_loss(const LmBackend& m, const std::vector<SequenceInput>& seqs,
                 const std::vector<LossSpec>& losses);

// First-order replacement scores: e(w) . direction for each pool token, where
// `direction` is a descent direction in embedding space.
std::vector<double> candidate_scores(const LmBackend& m, const Vec& direction,
                                     const std::vector<TokenId>& pool);

// Top-k pool tokens by candidate score, ties to the lowest id.
std::vector<TokenId> top_candidates(const LmBackend& m, const Vec& direction,
                                    const std::vector<TokenId>& pool, int k);

// All non-special vocabulary ids.
std::vector<TokenId> non_special_pool(const Vocabulary& vocab);

// One plain gradient-descent step on continuous prompt slots:
// slots <- slots - lr * grad. KindError unless the artifact is continuous.
void update_continuous(PromptArtifact& prompt, const Mat& grad, double lr);

// ---- tuning ----------------------------------------------------------------------

struct PromptTrainConfig {
    PromptSpec::Kind kind = PromptSpec::Kind::Tokens;
    int m = 4;           // prompt length (tokens or slots)
    int steps = 60;      // discrete: replacement rounds; continuous: SGD steps
    int batch_size = 16;
    int grad_accum = 8;  // batches averaged into each discrete gradient estimate
    int k = 10;          // candidates scored per replacement round
    double lr = 0.05;    // continuous step size
    bool cosine = true;  // decay the continuous step size over `steps`
    std::uint64_t seed = 1;
};

// One batch of the tuning objective: examples, the label map scoring them,
// and an optional trigger to render with. Providers let a caller interleave
// objectives (clean vs. trigger-carrying batches) through one optimizer.
struct TuningBatch {
    std::vector<const LabeledExample*> examples;
    const TokenMap* map = nullptr;
    const std::vector<TokenId>* trigger = nullptr;
};
using BatchProvider = std::function<TuningBatch(Rng&)>;

// Core optimizer driving a prompt against whatever the provider serves.
// Starts from `warm_start` when given (its kind/length win over cfg), else
// from a seeded random prompt. cfg.steps batches are consumed per call for
// continuous prompts; discrete replacement rounds consume cfg.grad_accum + 1
// provider calls each (gradient estimate plus scoring batch).
PromptArtifact tune_prompt_stream(const LmBackend& m, const Template& tmpl,
                                  const BatchProvider& next, const PromptTrainConfig& cfg,
                                  Rng& rng, const PromptArtifact* warm_start = nullptr,
                                  std::vector<double>* trace = nullptr);

// Tune a prompt on a labeled corpus against the label map's token sets.
// Discrete: coordinate-wise first-order replacement search (gradient ranks k
// candidates per position, the batch loss picks the winner, keeping the
// incumbent when no candidate beats it). Continuous: SGD on the slot matrix.
// `trace`, if given, receives the scoring-batch loss after every step.
PromptArtifact train_prompt(const LmBackend& m, const Template& tmpl, const Corpus& corpus,
                            const TokenMap& map, const PromptTrainConfig& cfg,
                            std::vector<double>* trace = nullptr);

// Classification accuracy: predicted class = argmax over classes of the
// summed mask probability of that class's tokens, ties to the lowest class.
double downstream_accuracy(const LmBackend& m, const Corpus& corpus, const TokenMap& map,
                           const PromptArtifact& prompt,
                           const std::vector<TokenId>* trigger = nullptr);

}  // namespace promptcare
