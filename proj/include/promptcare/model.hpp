#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "promptcare/backend.hpp"
#include "promptcare/rng.hpp"

namespace promptcare {

struct ModelConfig {
    int dim = 64;
    int heads = 4;
    int layers = 2;
    int ffn_mult = 4;
    int max_len = 64;
    double ln_eps = 1e-5;

    int head_dim() const { return dim / heads; }
    int ffn_dim() const { return dim * ffn_mult; }
    void validate() const;
};

struct LayerParams {
    Mat wq, wk, wv, wo;           // dim x dim
    Vec ln1_g, ln1_b, ln2_g, ln2_b;
    Mat w1, w2;                    // dim x ffn, ffn x dim
    Vec b1, b2;
};

// All trainable tensors. The same struct doubles as a gradient accumulator.
struct Params {
    Mat embed;                     // vocab x dim (tied with the output head)
    Mat pos;                       // max_len x dim
    Vec out_bias;                  // vocab
    std::vector<LayerParams> layers;
    Vec lnf_g, lnf_b;

    // Fixed-order iteration over every tensor, for the optimizer and
    // checkpoint serialization. Vectors are visited as column matrices.
    void visit(const std::function<void(const std::string&, Mat&)>& fn_mat,
               const std::function<void(const std::string&, Vec&)>& fn_vec);

    static Params zeros_like(const Params& shape);
    void scale(double factor);
};

// Internal activations kept by the packed forward pass for backprop.
struct ForwardCache;

struct TrainConfig {
    int steps = 6000;
    int batch_size = 32;
    double lr = 2e-3;
    int warmup_steps = 50;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    int log_every = 100;
};

// One masked-prediction training example: a full sequence containing [MASK]
// and the token the mask should resolve to.
struct PretrainExample {
    std::vector<TokenId> tokens;
    TokenId target = 0;
};

// Two-layer pre-LN transformer encoder with bidirectional attention, learned
// positional embeddings, exact-GELU feed-forward blocks, and a weight-tied
// output head read at the [MASK] position. Double precision throughout; all
// forward/backward passes are single-threaded and deterministic.
class TransformerModel final : public LmBackend {
  public:
    TransformerModel(ModelConfig cfg, Vocabulary vocab, std::uint64_t init_seed);

    // LmBackend surface.
    const Vocabulary& vocab() const override { return vocab_; }
    int embed_dim() const override { return cfg_.dim; }
    int max_sequence_length() const override { return cfg_.max_len; }
    Vec embedding(TokenId id) const override;
    MaskPrediction mask_distribution(const SequenceInput& seq) const override;
    std::vector<MaskPrediction> mask_distribution_batch(
        const std::vector<SequenceInput>& seqs) const override;
    Mat grad_wrt_input_embeddings(const SequenceInput& seq,
                                  const LossSpec& loss) const override;
    BatchEval eval_batch(const std::vector<SequenceInput>& seqs,
                         const std::vector<LossSpec>& losses) const override;

    // Training surface (specific to the reference model, not the interface).
    // Returns the mean cross-entropy over the batch and accumulates parameter
    // gradients (averaged over the batch) into `grads`.
    double supervised_step_gradients(const std::vector<PretrainExample>& batch,
                                     Params& grads) const;

    const ModelConfig& config() const { return cfg_; }
    const Params& params() const { return params_; }
    Params& mutable_params() { return params_; }

    // Checkpoint round-trip: versioned header + raw little-endian doubles.
    void save(const std::string& path) const;
    static std::unique_ptr<TransformerModel> load(const std::string& path);

    // Stable content hash over all parameters (for artifact metadata and
    // frozen-model assertions).
    std::uint64_t params_fingerprint() const;

  private:
    ModelConfig cfg_;
    Vocabulary vocab_;
    Params params_;

    friend struct PackedBatch;
};

// Masked-prediction trainer (Adam, linear warmup + cosine decay). The stream
// callback supplies one example per call; it is invoked batch_size times per
// step. Returns the training-loss trace (one mean loss per log interval).
std::vector<double> train_reference_model(TransformerModel& model,
                                          const std::function<PretrainExample(Rng&)>& stream,
                                          const TrainConfig& tc);

}  // namespace promptcare
