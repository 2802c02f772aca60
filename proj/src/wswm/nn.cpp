#include "nn.hpp"

#include <cmath>

namespace wswm {

Mat init_uniform(Rng& rng, int rows, int cols, double bound) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
    return m;
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng, double out_scale) {
    double bound = out_scale / std::sqrt(static_cast<double>(in));
    weight = Param(name + ".weight", {out, in}, init_uniform(rng, out, in, bound));
    bias = Param(name + ".bias", {out}, Mat::Zero(1, out));
}

Value Linear::apply(Graph& g, Value x) const {
    Value w = g.param(const_cast<Param&>(weight));
    Value b = g.param(const_cast<Param&>(bias));
    return g.add_rowvec(g.matmul(x, g.transpose(w)), b);
}

void Linear::collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Mlp::Mlp(const std::string& name, const std::vector<int>& sizes, Rng& rng, double out_scale) {
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        double s = (i + 2 == sizes.size()) ? out_scale : 1.0;
        layers.emplace_back(name + ".l" + std::to_string(i), sizes[i], sizes[i + 1], rng, s);
    }
}

Value Mlp::apply(Graph& g, Value x) const {
    Value h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].apply(g, h);
        if (i + 1 < layers.size()) h = g.relu(h);
    }
    return h;
}

void Mlp::collect(std::vector<Param*>& out) {
    for (Linear& l : layers) l.collect(out);
}

std::int64_t Mlp::param_count() const {
    std::int64_t n = 0;
    for (const Linear& l : layers) n += l.weight.value.size() + l.bias.value.size();
    return n;
}

GruCell::GruCell(const std::string& name, int in, int hidden_, Rng& rng) : hidden(hidden_) {
    double bi = 1.0 / std::sqrt(static_cast<double>(in));
    double bh = 1.0 / std::sqrt(static_cast<double>(hidden_));
    w_ih = Param(name + ".w_ih", {3 * hidden_, in}, init_uniform(rng, 3 * hidden_, in, bi));
    w_hh = Param(name + ".w_hh", {3 * hidden_, hidden_}, init_uniform(rng, 3 * hidden_, hidden_, bh));
    b_ih = Param(name + ".b_ih", {3 * hidden_}, Mat::Zero(1, 3 * hidden_));
    b_hh = Param(name + ".b_hh", {3 * hidden_}, Mat::Zero(1, 3 * hidden_));
}

Value GruCell::step(Graph& g, Value x, Value h) const {
    Value wi = g.param(const_cast<Param&>(w_ih));
    Value wh = g.param(const_cast<Param&>(w_hh));
    Value bi = g.param(const_cast<Param&>(b_ih));
    Value bh = g.param(const_cast<Param&>(b_hh));
    Value gi = g.add_rowvec(g.matmul(x, g.transpose(wi)), bi);  // (N, 3H)
    Value gh = g.add_rowvec(g.matmul(h, g.transpose(wh)), bh);
    Value r = g.sigmoid(g.add(g.slice_cols(gi, 0, hidden), g.slice_cols(gh, 0, hidden)));
    Value z = g.sigmoid(g.add(g.slice_cols(gi, hidden, hidden), g.slice_cols(gh, hidden, hidden)));
    Value n = g.tanh(g.add(g.slice_cols(gi, 2 * hidden, hidden),
                           g.mul(r, g.slice_cols(gh, 2 * hidden, hidden))));
    // h' = (1 - z) * n + z * h
    return g.add(g.sub(n, g.mul(z, n)), g.mul(z, h));
}

void GruCell::collect(std::vector<Param*>& out) {
    out.push_back(&w_ih);
    out.push_back(&w_hh);
    out.push_back(&b_ih);
    out.push_back(&b_hh);
}

LstmCell::LstmCell(const std::string& name, int in, int hidden_, Rng& rng) : hidden(hidden_) {
    double bi = 1.0 / std::sqrt(static_cast<double>(in));
    double bh = 1.0 / std::sqrt(static_cast<double>(hidden_));
    w_ih = Param(name + ".w_ih", {4 * hidden_, in}, init_uniform(rng, 4 * hidden_, in, bi));
    w_hh = Param(name + ".w_hh", {4 * hidden_, hidden_}, init_uniform(rng, 4 * hidden_, hidden_, bh));
    b_ih = Param(name + ".b_ih", {4 * hidden_}, Mat::Zero(1, 4 * hidden_));
    b_hh = Param(name + ".b_hh", {4 * hidden_}, Mat::Zero(1, 4 * hidden_));
}

std::pair<Value, Value> LstmCell::step(Graph& g, Value x, Value h, Value c) const {
    Value wi = g.param(const_cast<Param&>(w_ih));
    Value wh = g.param(const_cast<Param&>(w_hh));
    Value bi = g.param(const_cast<Param&>(b_ih));
    Value bh = g.param(const_cast<Param&>(b_hh));
    Value gates = g.add(g.add_rowvec(g.matmul(x, g.transpose(wi)), bi),
                        g.add_rowvec(g.matmul(h, g.transpose(wh)), bh));
    Value i = g.sigmoid(g.slice_cols(gates, 0, hidden));
    Value f = g.sigmoid(g.slice_cols(gates, hidden, hidden));
    Value cand = g.tanh(g.slice_cols(gates, 2 * hidden, hidden));
    Value o = g.sigmoid(g.slice_cols(gates, 3 * hidden, hidden));
    Value c2 = g.add(g.mul(f, c), g.mul(i, cand));
    Value h2 = g.mul(o, g.tanh(c2));
    return {h2, c2};
}

void LstmCell::collect(std::vector<Param*>& out) {
    out.push_back(&w_ih);
    out.push_back(&w_hh);
    out.push_back(&b_ih);
    out.push_back(&b_hh);
}

Value layer_norm(Graph& g, Value x, Value gamma, Value beta) {
    const int cols = static_cast<int>(x.cols());
    const int rows = static_cast<int>(x.rows());
    Value mu = g.scale(g.row_sum(x), 1.0 / cols);                       // (N,1)
    Value mu_b = g.matmul(mu, g.constant(Mat::Ones(1, cols)));          // (N,cols)
    Value centered = g.sub(x, mu_b);
    Value var = g.scale(g.row_sum(g.square(centered)), 1.0 / cols);     // (N,1)
    // 1/sqrt(var+eps) built from elementwise ops
    Value denom = g.div(g.constant(Mat::Ones(rows, 1)),
                        g.sqrt_of(g.add_scalar(var, 1e-5)));
    Value denom_b = g.matmul(denom, g.constant(Mat::Ones(1, cols)));
    Value normed = g.mul(centered, denom_b);
    Value gamma_b = g.matmul(g.constant(Mat::Ones(rows, 1)), gamma);
    Value beta_b = g.matmul(g.constant(Mat::Ones(rows, 1)), beta);
    return g.add(g.mul(normed, gamma_b), beta_b);
}

TransformerBlock::TransformerBlock(const std::string& name, int dim_, int heads_, int mlp_ratio,
                                   Rng& rng)
    : dim(dim_), heads(heads_) {
    ln1_g = Param(name + ".ln1.gamma", {dim_}, Mat::Ones(1, dim_));
    ln1_b = Param(name + ".ln1.beta", {dim_}, Mat::Zero(1, dim_));
    ln2_g = Param(name + ".ln2.gamma", {dim_}, Mat::Ones(1, dim_));
    ln2_b = Param(name + ".ln2.beta", {dim_}, Mat::Zero(1, dim_));
    qkv = Linear(name + ".attn.qkv", dim_, 3 * dim_, rng);
    attn_out = Linear(name + ".attn.out", dim_, dim_, rng);
    mlp_in = Linear(name + ".mlp.in", dim_, mlp_ratio * dim_, rng);
    mlp_out = Linear(name + ".mlp.out", mlp_ratio * dim_, dim_, rng);
}

Value TransformerBlock::apply(Graph& g, Value x) const {
    const int t = static_cast<int>(x.rows());
    const int dh = dim / heads;
    Value n1 = layer_norm(g, x, g.param(const_cast<Param&>(ln1_g)), g.param(const_cast<Param&>(ln1_b)));
    Value qkv_all = qkv.apply(g, n1);  // (T, 3D)
    std::vector<Value> head_outs;
    head_outs.reserve(heads);
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int hItr = 0; hItr < heads; ++hItr) {
        Value q = g.slice_cols(qkv_all, hItr * dh, dh);
        Value k = g.slice_cols(qkv_all, dim + hItr * dh, dh);
        Value v = g.slice_cols(qkv_all, 2 * dim + hItr * dh, dh);
        Value scores = g.scale(g.matmul(q, g.transpose(k)), inv_scale);  // (T,T)
        Value attn = g.softmax_causal(scores);
        head_outs.push_back(g.matmul(attn, v));  // (T, dh)
    }
    Value merged = g.concat_cols(head_outs);  // (T, D)
    Value x1 = g.add(x, attn_out.apply(g, merged));
    Value n2 = layer_norm(g, x1, g.param(const_cast<Param&>(ln2_g)), g.param(const_cast<Param&>(ln2_b)));
    Value x2 = g.add(x1, mlp_out.apply(g, g.gelu(mlp_in.apply(g, n2))));
    (void)t;
    return x2;
}

void TransformerBlock::collect(std::vector<Param*>& out) {
    out.push_back(&ln1_g);
    out.push_back(&ln1_b);
    out.push_back(&ln2_g);
    out.push_back(&ln2_b);
    qkv.collect(out);
    attn_out.collect(out);
    mlp_in.collect(out);
    mlp_out.collect(out);
}

void Adam::step(std::vector<Param*>& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (Param* p : params) {
        if (p->adam_m.size() == 0) {
            p->adam_m = Mat::Zero(p->value.rows(), p->value.cols());
            p->adam_v = Mat::Zero(p->value.rows(), p->value.cols());
        }
        p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * p->grad;
        p->adam_v = beta2_ * p->adam_v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
        Mat mhat = p->adam_m / bc1;
        Mat vhat = p->adam_v / bc2;
        p->value -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
        p->quantize_f32();
    }
}

}  // namespace wswm
