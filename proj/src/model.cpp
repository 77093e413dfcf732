#include "promptcare/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "promptcare/util.hpp"

namespace promptcare {

using nlohmann::json;

// ---- input handling ---------------------------------------------------------

int SequenceInput::mask_position() const {
    int pos = -1;
    for (int i = 0; i < length(); ++i) {
        if (tokens[static_cast<std::size_t>(i)] == Vocabulary::kMask) {
            if (pos >= 0) throw ConfigError("sequence has more than one [MASK]");
            pos = i;
        }
    }
    if (pos < 0) throw ConfigError("sequence has no [MASK]");
    return pos;
}

void ModelConfig::validate() const {
    if (layers < 1) throw ConfigError("model: needs at least one layer");
    if (dim < 1 || heads < 1 || dim % heads != 0)
        throw ConfigError("model: dim must be a positive multiple of heads");
    if (ffn_mult < 1 || max_len < 2) throw ConfigError("model: bad ffn_mult or max_len");
}

// ---- parameter plumbing -----------------------------------------------------

void Params::visit(const std::function<void(const std::string&, Mat&)>& fn_mat,
                   const std::function<void(const std::string&, Vec&)>& fn_vec) {
    fn_mat("embed", embed);
    fn_mat("pos", pos);
    fn_vec("out_bias", out_bias);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerParams& lp = layers[l];
        fn_mat(p + "wq", lp.wq);
        fn_mat(p + "wk", lp.wk);
        fn_mat(p + "wv", lp.wv);
        fn_mat(p + "wo", lp.wo);
        fn_vec(p + "ln1_g", lp.ln1_g);
        fn_vec(p + "ln1_b", lp.ln1_b);
        fn_vec(p + "ln2_g", lp.ln2_g);
        fn_vec(p + "ln2_b", lp.ln2_b);
        fn_mat(p + "w1", lp.w1);
        fn_vec(p + "b1", lp.b1);
        fn_mat(p + "w2", lp.w2);
        fn_vec(p + "b2", lp.b2);
    }
    fn_vec("lnf_g", lnf_g);
    fn_vec("lnf_b", lnf_b);
}

Params Params::zeros_like(const Params& shape) {
    Params z = shape;
    z.visit([](const std::string&, Mat& m) { m.setZero(); },
            [](const std::string&, Vec& v) { v.setZero(); });
    return z;
}

void Params::scale(double factor) {
    visit([factor](const std::string&, Mat& m) { m *= factor; },
          [factor](const std::string&, Vec& v) { v *= factor; });
}

namespace {

struct TensorRefs {
    std::vector<Mat*> mats;
    std::vector<Vec*> vecs;
};

TensorRefs collect(Params& p) {
    TensorRefs r;
    p.visit([&](const std::string&, Mat& m) { r.mats.push_back(&m); },
            [&](const std::string&, Vec& v) { r.vecs.push_back(&v); });
    return r;
}

// ---- numerics ---------------------------------------------------------------

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_deriv(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

Vec softmax_stable(const Vec& logits) {
    const double mx = logits.maxCoeff();
    Vec e = ((logits.array() - mx).exp()).matrix();
    return e / e.sum();
}

// Row-wise softmax in place.
void softmax_rows(Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = ((m.row(r).array() - mx).exp()).matrix();
        m.row(r) /= m.row(r).sum();
    }
}

// y = xhat .* g + b per row, with xhat = (x - mean) * inv_std.
void layer_norm_rows(const Mat& x, const Vec& g, const Vec& b, double eps,
                     Mat& y, Mat& xhat, Vec& inv) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    y.resize(rows, cols);
    xhat.resize(rows, cols);
    inv.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const double is = 1.0 / std::sqrt(var + eps);
        inv(r) = is;
        xhat.row(r) = (x.row(r).array() - mean) * is;
        y.row(r) = (xhat.row(r).array() * g.transpose().array() + b.transpose().array()).matrix();
    }
}

// Backward of layer_norm_rows. Accumulates dg/db when given, returns dX.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& inv, const Vec& g,
                        Vec* dg, Vec* db) {
    const auto rows = dy.rows();
    const auto cols = dy.cols();
    Mat dx(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::RowVectorXd dxhat = (dy.row(r).array() * g.transpose().array()).matrix();
        const double m1 = dxhat.mean();
        const double m2 = (dxhat.array() * xhat.row(r).array()).mean();
        dx.row(r) = inv(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
    }
    if (dg) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            (*dg)(c) += (dy.col(c).array() * xhat.col(c).array()).sum();
            (*db)(c) += dy.col(c).sum();
        }
    }
    return dx;
}

}  // namespace

// ---- packed batch -----------------------------------------------------------

// Sequences are concatenated into one row-block matrix so the big GEMMs
// (QKV, projections, FFN) run once per batch; only the attention scores are
// computed per sequence.
struct PackedBatch {
    int total = 0;
    std::vector<int> offset;
    std::vector<int> length;
    std::vector<int> mask_row;       // absolute row index of [MASK] per sequence
    std::vector<TokenId> row_token;  // kEmbedSlot for injected rows
    std::vector<int> row_pos;
    Mat x0;                          // total x dim
};

namespace {

PackedBatch pack_inputs(const ModelConfig& cfg, const Params& params, const Vocabulary& vocab,
                        const std::vector<SequenceInput>& seqs) {
    PackedBatch pb;
    for (const auto& s : seqs) {
        if (s.length() < 1) throw ConfigError("empty sequence");
        if (s.length() > cfg.max_len)
            throw ConfigError("sequence length " + std::to_string(s.length()) +
                              " exceeds model maximum " + std::to_string(cfg.max_len));
        pb.total += s.length();
    }
    pb.x0.resize(pb.total, cfg.dim);
    pb.row_token.resize(static_cast<std::size_t>(pb.total));
    pb.row_pos.resize(static_cast<std::size_t>(pb.total));
    int row = 0;
    for (const auto& s : seqs) {
        pb.offset.push_back(row);
        pb.length.push_back(s.length());
        pb.mask_row.push_back(row + s.mask_position());
        std::size_t slot = 0;
        for (int i = 0; i < s.length(); ++i) {
            const TokenId t = s.tokens[static_cast<std::size_t>(i)];
            if (t == SequenceInput::kEmbedSlot) {
                if (slot >= s.slot_embeddings.size())
                    throw ConfigError("sequence has more embedding slots than vectors");
                const Vec& e = s.slot_embeddings[slot++];
                if (e.size() != cfg.dim) throw ConfigError("embedding slot has wrong dimension");
                pb.x0.row(row) = e.transpose();
            } else {
                if (t < 0 || t >= vocab.size()) throw ConfigError("token id out of range");
                pb.x0.row(row) = params.embed.row(t);
            }
            pb.x0.row(row) += params.pos.row(i);
            pb.row_token[static_cast<std::size_t>(row)] = t;
            pb.row_pos[static_cast<std::size_t>(row)] = i;
            ++row;
        }
        if (slot != s.slot_embeddings.size())
            throw ConfigError("sequence has more embedding vectors than slots");
    }
    return pb;
}

struct LayerCache {
    Mat a, q, k, v, ctx, x1, b, u, h;
    Mat xhat1, xhat2;
    Vec inv1, inv2;
    std::vector<std::vector<Mat>> attn;  // [seq][head], each L x L
};

}  // namespace

struct ForwardCache {
    PackedBatch pb;
    std::vector<LayerCache> layers;
    Mat hf, xhatf;
    Vec invf;
    std::vector<Vec> probs;  // softmax at [MASK], per sequence
};

// ---- model ------------------------------------------------------------------

TransformerModel::TransformerModel(ModelConfig cfg, Vocabulary vocab, std::uint64_t init_seed)
    : cfg_(cfg), vocab_(std::move(vocab)) {
    cfg_.validate();
    if (vocab_.size() < Vocabulary::kNumSpecials + 1)
        throw ConfigError("model: vocabulary too small");
    Rng rng(init_seed);
    auto norm_init = [&](Mat& m, Eigen::Index r, Eigen::Index c) {
        m.resize(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, 0.02);
    };
    norm_init(params_.embed, vocab_.size(), cfg_.dim);
    norm_init(params_.pos, cfg_.max_len, cfg_.dim);
    params_.out_bias = Vec::Zero(vocab_.size());
    params_.layers.resize(static_cast<std::size_t>(cfg_.layers));
    for (auto& lp : params_.layers) {
        norm_init(lp.wq, cfg_.dim, cfg_.dim);
        norm_init(lp.wk, cfg_.dim, cfg_.dim);
        norm_init(lp.wv, cfg_.dim, cfg_.dim);
        norm_init(lp.wo, cfg_.dim, cfg_.dim);
        lp.ln1_g = Vec::Ones(cfg_.dim);
        lp.ln1_b = Vec::Zero(cfg_.dim);
        lp.ln2_g = Vec::Ones(cfg_.dim);
        lp.ln2_b = Vec::Zero(cfg_.dim);
        norm_init(lp.w1, cfg_.dim, cfg_.ffn_dim());
        lp.b1 = Vec::Zero(cfg_.ffn_dim());
        norm_init(lp.w2, cfg_.ffn_dim(), cfg_.dim);
        lp.b2 = Vec::Zero(cfg_.dim);
    }
    params_.lnf_g = Vec::Ones(cfg_.dim);
    params_.lnf_b = Vec::Zero(cfg_.dim);
}

Vec TransformerModel::embedding(TokenId id) const {
    if (id < 0 || id >= vocab_.size()) throw ConfigError("embedding: token id out of range");
    return params_.embed.row(id).transpose();
}

namespace {

// Forward pass over a packed batch; fills the cache.
void forward_packed(const ModelConfig& cfg, const Params& params, ForwardCache& fc) {
    const int dh = cfg.head_dim();
    const double alpha = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto nseq = fc.pb.offset.size();
    Mat x = fc.pb.x0;
    fc.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        LayerCache& c = fc.layers[static_cast<std::size_t>(l)];
        const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
        layer_norm_rows(x, lp.ln1_g, lp.ln1_b, cfg.ln_eps, c.a, c.xhat1, c.inv1);
        c.q.noalias() = c.a * lp.wq;
        c.k.noalias() = c.a * lp.wk;
        c.v.noalias() = c.a * lp.wv;
        c.ctx.resize(x.rows(), cfg.dim);
        c.attn.assign(nseq, {});
        for (std::size_t s = 0; s < nseq; ++s) {
            const int off = fc.pb.offset[s];
            const int len = fc.pb.length[s];
            c.attn[s].resize(static_cast<std::size_t>(cfg.heads));
            for (int h = 0; h < cfg.heads; ++h) {
                auto qs = c.q.block(off, h * dh, len, dh);
                auto ks = c.k.block(off, h * dh, len, dh);
                auto vs = c.v.block(off, h * dh, len, dh);
                Mat scores = alpha * (qs * ks.transpose());
                softmax_rows(scores);
                c.ctx.block(off, h * dh, len, dh).noalias() = scores * vs;
                c.attn[s][static_cast<std::size_t>(h)] = std::move(scores);
            }
        }
        c.x1.noalias() = x + c.ctx * lp.wo;
        layer_norm_rows(c.x1, lp.ln2_g, lp.ln2_b, cfg.ln_eps, c.b, c.xhat2, c.inv2);
        c.u.noalias() = c.b * lp.w1;
        c.u.rowwise() += lp.b1.transpose();
        c.h = c.u.unaryExpr([](double v) { return gelu(v); });
        x = c.x1;
        x.noalias() += c.h * lp.w2;
        x.rowwise() += lp.b2.transpose();
    }
    layer_norm_rows(x, params.lnf_g, params.lnf_b, cfg.ln_eps, fc.hf, fc.xhatf, fc.invf);
    fc.probs.resize(nseq);
    for (std::size_t s = 0; s < nseq; ++s) {
        Vec logits = params.embed * fc.hf.row(fc.pb.mask_row[s]).transpose();
        logits += params.out_bias;
        fc.probs[s] = softmax_stable(logits);
    }
}

// Backward pass from per-sequence gradients at the logits. Returns gradients
// with respect to the packed input embedding rows; optionally accumulates
// parameter gradients (including the tied output head and the touched rows
// of the embedding / positional tables).
Mat backward_packed(const ModelConfig& cfg, const Params& params, const ForwardCache& fc,
                    const std::vector<Vec>& dlogits, Params* grads) {
    const int dh = cfg.head_dim();
    const double alpha = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto nseq = fc.pb.offset.size();
    const auto rows = fc.pb.x0.rows();

    Mat dhf = Mat::Zero(rows, cfg.dim);
    for (std::size_t s = 0; s < nseq; ++s) {
        const int mr = fc.pb.mask_row[s];
        dhf.row(mr) += dlogits[s].transpose() * params.embed;
        if (grads) {
            grads->out_bias += dlogits[s];
            grads->embed.noalias() += dlogits[s] * fc.hf.row(mr);
        }
    }
    Mat dx = layer_norm_backward(dhf, fc.xhatf, fc.invf, params.lnf_g,
                                 grads ? &grads->lnf_g : nullptr,
                                 grads ? &grads->lnf_b : nullptr);

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerCache& c = fc.layers[static_cast<std::size_t>(l)];
        const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
        LayerParams* gl = grads ? &grads->layers[static_cast<std::size_t>(l)] : nullptr;

        // FFN block: x_out = x1 + gelu(ln2(x1) w1 + b1) w2 + b2
        const Mat& df = dx;
        Mat dhid = df * lp.w2.transpose();
        if (gl) {
            gl->w2.noalias() += c.h.transpose() * df;
            gl->b2 += df.colwise().sum().transpose();
        }
        Mat du = dhid.cwiseProduct(c.u.unaryExpr([](double v) { return gelu_deriv(v); }));
        Mat db = du * lp.w1.transpose();
        if (gl) {
            gl->w1.noalias() += c.b.transpose() * du;
            gl->b1 += du.colwise().sum().transpose();
        }
        Mat dx1 = dx + layer_norm_backward(db, c.xhat2, c.inv2, lp.ln2_g,
                                           gl ? &gl->ln2_g : nullptr,
                                           gl ? &gl->ln2_b : nullptr);

        // Attention block: x1 = x + (softmax(q k^T / sqrt(dh)) v) wo
        const Mat& dO = dx1;
        Mat dctx = dO * lp.wo.transpose();
        if (gl) gl->wo.noalias() += c.ctx.transpose() * dO;
        Mat dq = Mat::Zero(rows, cfg.dim);
        Mat dk = Mat::Zero(rows, cfg.dim);
        Mat dv = Mat::Zero(rows, cfg.dim);
        for (std::size_t s = 0; s < nseq; ++s) {
            const int off = fc.pb.offset[s];
            const int len = fc.pb.length[s];
            for (int h = 0; h < cfg.heads; ++h) {
                const Mat& p = c.attn[s][static_cast<std::size_t>(h)];
                auto dctx_s = dctx.block(off, h * dh, len, dh);
                auto qs = c.q.block(off, h * dh, len, dh);
                auto ks = c.k.block(off, h * dh, len, dh);
                auto vs = c.v.block(off, h * dh, len, dh);
                Mat dp = dctx_s * vs.transpose();
                dv.block(off, h * dh, len, dh).noalias() = p.transpose() * dctx_s;
                Vec rs = (dp.cwiseProduct(p)).rowwise().sum();
                Mat ds = p.cwiseProduct(dp.colwise() - rs);
                dq.block(off, h * dh, len, dh).noalias() = alpha * (ds * ks);
                dk.block(off, h * dh, len, dh).noalias() = alpha * (ds.transpose() * qs);
            }
        }
        Mat da = dq * lp.wq.transpose();
        da.noalias() += dk * lp.wk.transpose();
        da.noalias() += dv * lp.wv.transpose();
        if (gl) {
            gl->wq.noalias() += c.a.transpose() * dq;
            gl->wk.noalias() += c.a.transpose() * dk;
            gl->wv.noalias() += c.a.transpose() * dv;
        }
        dx = dx1 + layer_norm_backward(da, c.xhat1, c.inv1, lp.ln1_g,
                                       gl ? &gl->ln1_g : nullptr,
                                       gl ? &gl->ln1_b : nullptr);
    }

    if (grads) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            const TokenId t = fc.pb.row_token[static_cast<std::size_t>(r)];
            if (t != SequenceInput::kEmbedSlot) grads->embed.row(t) += dx.row(r);
            grads->pos.row(fc.pb.row_pos[static_cast<std::size_t>(r)]) += dx.row(r);
        }
    }
    return dx;
}

MaskPrediction prediction_from_probs(const Vec& p) {
    MaskPrediction mp;
    mp.probabilities = p;
    mp.top = static_cast<TokenId>(argmax_lowest(p, static_cast<int>(p.size())));
    return mp;
}

// Gradient of sign·log Σ_{target} p at the logits.
Vec logmass_dlogits(const Vec& p, const LossSpec& spec, double* loss_out) {
    if (spec.target_set.empty()) throw ConfigError("loss: empty target set");
    double mass = 0.0;
    std::vector<char> in_set(static_cast<std::size_t>(p.size()), 0);
    for (TokenId t : spec.target_set) {
        if (t < 0 || t >= p.size()) throw ConfigError("loss: target token out of range");
        if (!in_set[static_cast<std::size_t>(t)]) {
            in_set[static_cast<std::size_t>(t)] = 1;
            mass += p(t);
        }
    }
    const double safe_mass = std::max(mass, 1e-300);
    if (loss_out) *loss_out = spec.sign * std::log(safe_mass);
    Vec dl(p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double member = in_set[static_cast<std::size_t>(j)] ? p(j) / safe_mass : 0.0;
        dl(j) = spec.sign * (member - p(j));
    }
    return dl;
}

}  // namespace

MaskPrediction TransformerModel::mask_distribution(const SequenceInput& seq) const {
    ForwardCache fc;
    fc.pb = pack_inputs(cfg_, params_, vocab_, {seq});
    forward_packed(cfg_, params_, fc);
    return prediction_from_probs(fc.probs[0]);
}

std::vector<MaskPrediction> TransformerModel::mask_distribution_batch(
    const std::vector<SequenceInput>& seqs) const {
    std::vector<MaskPrediction> out;
    if (seqs.empty()) return out;
    ForwardCache fc;
    fc.pb = pack_inputs(cfg_, params_, vocab_, seqs);
    forward_packed(cfg_, params_, fc);
    out.reserve(seqs.size());
    for (const auto& p : fc.probs) out.push_back(prediction_from_probs(p));
    return out;
}

Mat TransformerModel::grad_wrt_input_embeddings(const SequenceInput& seq,
                                                const LossSpec& loss) const {
    BatchEval ev = eval_batch({seq}, {loss});
    return std::move(ev.input_grads[0]);
}

BatchEval TransformerModel::eval_batch(const std::vector<SequenceInput>& seqs,
                                       const std::vector<LossSpec>& losses) const {
    if (seqs.size() != losses.size()) throw ConfigError("eval_batch: size mismatch");
    BatchEval ev;
    if (seqs.empty()) return ev;
    ForwardCache fc;
    fc.pb = pack_inputs(cfg_, params_, vocab_, seqs);
    forward_packed(cfg_, params_, fc);
    std::vector<Vec> dlogits(seqs.size());
    ev.loss.resize(seqs.size());
    ev.preds.reserve(seqs.size());
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        dlogits[s] = logmass_dlogits(fc.probs[s], losses[s], &ev.loss[s]);
        ev.preds.push_back(prediction_from_probs(fc.probs[s]));
    }
    Mat dx = backward_packed(cfg_, params_, fc, dlogits, nullptr);
    ev.input_grads.reserve(seqs.size());
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        ev.input_grads.push_back(dx.middleRows(fc.pb.offset[s], fc.pb.length[s]));
    }
    return ev;
}

double TransformerModel::supervised_step_gradients(const std::vector<PretrainExample>& batch,
                                                   Params& grads) const {
    if (batch.empty()) throw ConfigError("training batch is empty");
    std::vector<SequenceInput> seqs;
    seqs.reserve(batch.size());
    for (const auto& ex : batch) {
        if (ex.target < 0 || ex.target >= vocab_.size())
            throw ConfigError("training target out of range");
        seqs.push_back(SequenceInput{ex.tokens, {}});
    }
    ForwardCache fc;
    fc.pb = pack_inputs(cfg_, params_, vocab_, seqs);
    forward_packed(cfg_, params_, fc);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<Vec> dlogits(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Vec& p = fc.probs[s];
        loss -= std::log(std::max(p(batch[s].target), 1e-300));
        dlogits[s] = p * inv_b;
        dlogits[s](batch[s].target) -= inv_b;
    }
    backward_packed(cfg_, params_, fc, dlogits, &grads);
    return loss * inv_b;
}

// ---- training ---------------------------------------------------------------

std::vector<double> train_reference_model(TransformerModel& model,
                                          const std::function<PretrainExample(Rng&)>& stream,
                                          const TrainConfig& tc) {
    if (tc.steps < 1 || tc.batch_size < 1) throw ConfigError("train: bad steps/batch size");
    Rng data_rng(derive_seed(tc.seed, 0xDA7A));
    Params grads = Params::zeros_like(model.params());
    Params m = Params::zeros_like(model.params());
    Params v = Params::zeros_like(model.params());
    TensorRefs pr = collect(model.mutable_params());
    TensorRefs gr = collect(grads);
    TensorRefs mr = collect(m);
    TensorRefs vr = collect(v);

    std::vector<double> trace;
    double window = 0.0;
    int window_n = 0;
    for (int step = 1; step <= tc.steps; ++step) {
        std::vector<PretrainExample> batch;
        batch.reserve(static_cast<std::size_t>(tc.batch_size));
        for (int i = 0; i < tc.batch_size; ++i) batch.push_back(stream(data_rng));

        grads.visit([](const std::string&, Mat& g) { g.setZero(); },
                    [](const std::string&, Vec& g) { g.setZero(); });
        window += model.supervised_step_gradients(batch, grads);
        ++window_n;

        double lr = tc.lr;
        if (step <= tc.warmup_steps) {
            lr *= static_cast<double>(step) / static_cast<double>(tc.warmup_steps);
        } else if (tc.steps > tc.warmup_steps) {
            const double t = static_cast<double>(step - tc.warmup_steps) /
                             static_cast<double>(tc.steps - tc.warmup_steps);
            lr *= 0.5 * (1.0 + std::cos(t * M_PI));
        }
        const double bc1 = 1.0 - std::pow(tc.adam_beta1, step);
        const double bc2 = 1.0 - std::pow(tc.adam_beta2, step);
        auto adam = [&](auto& p, const auto& g, auto& m1, auto& m2) {
            m1 = tc.adam_beta1 * m1 + (1.0 - tc.adam_beta1) * g;
            m2.array() = tc.adam_beta2 * m2.array() + (1.0 - tc.adam_beta2) * g.array().square();
            p.array() -= lr * (m1.array() / bc1) /
                         ((m2.array() / bc2).sqrt() + tc.adam_eps);
        };
        for (std::size_t i = 0; i < pr.mats.size(); ++i)
            adam(*pr.mats[i], *gr.mats[i], *mr.mats[i], *vr.mats[i]);
        for (std::size_t i = 0; i < pr.vecs.size(); ++i)
            adam(*pr.vecs[i], *gr.vecs[i], *mr.vecs[i], *vr.vecs[i]);

        if (step % tc.log_every == 0 || step == tc.steps) {
            trace.push_back(window / window_n);
            window = 0.0;
            window_n = 0;
        }
    }
    return trace;
}

// ---- checkpoint I/O ----------------------------------------------------------

namespace {

constexpr char kModelMagic[8] = {'P', 'C', 'M', 'O', 'D', 'E', 'L', '1'};

void write_blob(std::ofstream& out, const double* data, std::size_t count) {
    const std::uint64_t n = count;
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_blob(std::ifstream& in, double* data, std::size_t count) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n != count) throw FormatError("model checkpoint: tensor size mismatch");
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
    if (!in) throw FormatError("model checkpoint: truncated tensor data");
}

}  // namespace

void TransformerModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("model: cannot write " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    json header = {
        {"format_version", 1},
        {"dim", cfg_.dim},
        {"heads", cfg_.heads},
        {"layers", cfg_.layers},
        {"ffn_mult", cfg_.ffn_mult},
        {"max_len", cfg_.max_len},
        {"ln_eps", cfg_.ln_eps},
        {"vocab", vocab_.tokens()},
    };
    const std::string hs = header.dump();
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    Params& p = const_cast<Params&>(params_);
    p.visit([&](const std::string&, Mat& t) { write_blob(out, t.data(), static_cast<std::size_t>(t.size())); },
            [&](const std::string&, Vec& t) { write_blob(out, t.data(), static_cast<std::size_t>(t.size())); });
    if (!out) throw ConfigError("model: write failed for " + path);
}

std::unique_ptr<TransformerModel> TransformerModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("model: cannot read " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw FormatError("model checkpoint: bad magic");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen > (1u << 26)) throw FormatError("model checkpoint: bad header length");
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw FormatError("model checkpoint: truncated header");
    json header = json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw FormatError("model checkpoint: header is not valid JSON");
    if (header.value("format_version", 0) != 1)
        throw FormatError("model checkpoint: unsupported format version");

    ModelConfig cfg;
    cfg.dim = header.at("dim").get<int>();
    cfg.heads = header.at("heads").get<int>();
    cfg.layers = header.at("layers").get<int>();
    cfg.ffn_mult = header.at("ffn_mult").get<int>();
    cfg.max_len = header.at("max_len").get<int>();
    cfg.ln_eps = header.at("ln_eps").get<double>();
    auto words = header.at("vocab").get<std::vector<std::string>>();
    if (words.size() < Vocabulary::kNumSpecials) throw FormatError("model checkpoint: bad vocab");
    std::vector<std::string> tail(words.begin() + Vocabulary::kNumSpecials, words.end());
    auto model = std::make_unique<TransformerModel>(cfg, Vocabulary(tail), 0);
    model->mutable_params().visit(
        [&](const std::string&, Mat& t) { read_blob(in, t.data(), static_cast<std::size_t>(t.size())); },
        [&](const std::string&, Vec& t) { read_blob(in, t.data(), static_cast<std::size_t>(t.size())); });
    return model;
}

std::uint64_t TransformerModel::params_fingerprint() const {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    auto mix = [&hash](const double* data, std::size_t count) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < count * 8; ++i) {
            hash ^= bytes[i];
            hash *= 0x100000001B3ULL;
        }
    };
    Params& p = const_cast<Params&>(params_);
    p.visit([&](const std::string&, Mat& t) { mix(t.data(), static_cast<std::size_t>(t.size())); },
            [&](const std::string&, Vec& t) { mix(t.data(), static_cast<std::size_t>(t.size())); });
    return hash;
}

}  // namespace promptcare
