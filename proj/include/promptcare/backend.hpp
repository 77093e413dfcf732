#pragma once

#include <Eigen/Core>
#include <vector>

#include "promptcare/vocab.hpp"

namespace promptcare {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// One model input: a token sequence in which some positions may carry a raw
// embedding vector instead of a token (continuous prompt slots). A token
// entry of kEmbedSlot means "take the next vector from `slot_embeddings`",
// in left-to-right order. Exactly one [MASK] token must be present.
struct SequenceInput {
    static constexpr TokenId kEmbedSlot = -1;

    std::vector<TokenId> tokens;
    std::vector<Vec> slot_embeddings;

    // Spans the renderer fills in so optimizers can address the prompt block
    // and the trigger block by position. -1 begin = absent.
    int prompt_begin = -1, prompt_len = 0;
    int trigger_begin = -1, trigger_len = 0;

    int length() const { return static_cast<int>(tokens.size()); }
    int mask_position() const;  // throws unless exactly one [MASK]
};

// Distribution over the vocabulary at the [MASK] position. `probabilities`
// sums to 1; `top` is the argmax with ties resolved to the lowest token id.
struct MaskPrediction {
    Vec probabilities;
    TokenId top = 0;
};

// Loss ℓ = sign · log Σ_{w ∈ target_set} P(MASK = w). The positive-mass form
// (sign=+1) is a log-likelihood to maximize; callers minimizing a loss use
// sign=-1. Gradients follow the same sign convention.
struct LossSpec {
    std::vector<TokenId> target_set;
    double sign = -1.0;
};

// Per-sequence result of a batched loss/gradient evaluation.
struct BatchEval {
    std::vector<double> loss;              // sign · log-mass per sequence
    std::vector<Mat> input_grads;          // length x dim, per sequence
    std::vector<MaskPrediction> preds;
};

// Read-only inference surface of a masked language model. This is the only
// surface prompt tuning, watermark injection, and verification see; the
// bundled reference transformer implements it, and an adapter for an
// external model would implement the same contract.
class LmBackend {
  public:
    virtual ~LmBackend() = default;

    virtual const Vocabulary& vocab() const = 0;
    virtual int embed_dim() const = 0;
    virtual int max_sequence_length() const = 0;

    // Row of the (tied) input embedding table.
    virtual Vec embedding(TokenId id) const = 0;

    virtual MaskPrediction mask_distribution(const SequenceInput& seq) const = 0;
    virtual std::vector<MaskPrediction> mask_distribution_batch(
        const std::vector<SequenceInput>& seqs) const = 0;

    // Gradient of the LossSpec objective with respect to every input
    // embedding row (token positions included, so discrete search can rank
    // replacements). Shape: length x dim.
    virtual Mat grad_wrt_input_embeddings(const SequenceInput& seq,
                                          const LossSpec& loss) const = 0;
    virtual BatchEval eval_batch(const std::vector<SequenceInput>& seqs,
                                 const std::vector<LossSpec>& losses) const = 0;
};

}  // namespace promptcare
