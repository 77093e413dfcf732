#pragma once

#include <functional>
#include <utility>

#include "promptcare/backend.hpp"
#include "promptcare/errors.hpp"
#include "promptcare/util.hpp"

namespace promptcare::testing {

// Inference stub with caller-chosen embeddings and mask distributions.
// Gradient entry points are deliberately unimplemented; tests that need
// real gradients use a small TransformerModel instead.
class MockBackend final : public LmBackend {
  public:
    MockBackend(Vocabulary vocab, int dim) : vocab_(std::move(vocab)), dim_(dim) {
        embeds_.assign(static_cast<std::size_t>(vocab_.size()), Vec::Zero(dim));
        distribution = [this](const SequenceInput&) {
            return Vec::Constant(vocab_.size(), 1.0 / vocab_.size());
        };
    }

    std::function<Vec(const SequenceInput&)> distribution;

    void set_embedding(TokenId id, Vec e) { embeds_[static_cast<std::size_t>(id)] = std::move(e); }

    const Vocabulary& vocab() const override { return vocab_; }
    int embed_dim() const override { return dim_; }
    int max_sequence_length() const override { return 64; }
    Vec embedding(TokenId id) const override {
        if (id < 0 || id >= vocab_.size()) throw ConfigError("mock: token id out of range");
        return embeds_[static_cast<std::size_t>(id)];
    }
    MaskPrediction mask_distribution(const SequenceInput& seq) const override {
        Vec p = distribution(seq);
        MaskPrediction out;
        out.top = argmax_lowest(p, static_cast<int>(p.size()));
        out.probabilities = std::move(p);
        return out;
    }
    std::vector<MaskPrediction> mask_distribution_batch(
        const std::vector<SequenceInput>& seqs) const override {
        std::vector<MaskPrediction> out;
        out.reserve(seqs.size());
        for (const auto& s : seqs) out.push_back(mask_distribution(s));
        return out;
    }
    Mat grad_wrt_input_embeddings(const SequenceInput&, const LossSpec&) const override {
        throw Error("mock backend has no gradients");
    }
    BatchEval eval_batch(const std::vector<SequenceInput>&,
                         const std::vector<LossSpec>&) const override {
        throw Error("mock backend has no gradients");
    }

  private:
    Vocabulary vocab_;
    int dim_;
    std::vector<Vec> embeds_;
};

}  // namespace promptcare::testing
