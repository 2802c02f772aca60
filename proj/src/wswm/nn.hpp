#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graph.hpp"
#include "rng.hpp"

namespace wswm {

// Fan-in scaled uniform init, drawn on the float32 grid so that a freshly
// initialised model serializes losslessly.
Mat init_uniform(Rng& rng, int rows, int cols, double bound);

struct Linear {
    Param weight;  // (out, in)
    Param bias;    // (1, out)

    Linear() = default;
    Linear(const std::string& name, int in, int out, Rng& rng, double out_scale = 1.0);

    Value apply(Graph& g, Value x) const;  // x: (N, in) -> (N, out)
    int in_dim() const { return static_cast<int>(weight.value.cols()); }
    int out_dim() const { return static_cast<int>(weight.value.rows()); }
    void collect(std::vector<Param*>& out);
};

// Plain ReLU MLP; the last layer is affine. `out_scale` shrinks the final
// layer's weights at init, which keeps early weight-space offsets small.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(const std::string& name, const std::vector<int>& sizes, Rng& rng, double out_scale = 1.0);

    Value apply(Graph& g, Value x) const;
    void collect(std::vector<Param*>& out);
    std::int64_t param_count() const;
};

// GRU cell following the standard gate layout (reset, update, candidate).
struct GruCell {
    Param w_ih, w_hh;  // (3H, in), (3H, H)
    Param b_ih, b_hh;  // (1, 3H)
    int hidden = 0;

    GruCell() = default;
    GruCell(const std::string& name, int in, int hidden, Rng& rng);
    Value step(Graph& g, Value x, Value h) const;  // x: (N,in), h: (N,H) -> (N,H)
    void collect(std::vector<Param*>& out);
};

struct LstmCell {
    Param w_ih, w_hh;  // (4H, in), (4H, H) gates ordered i,f,g,o
    Param b_ih, b_hh;
    int hidden = 0;

    LstmCell() = default;
    LstmCell(const std::string& name, int in, int hidden, Rng& rng);
    // Returns {h', c'}.
    std::pair<Value, Value> step(Graph& g, Value x, Value h, Value c) const;
    void collect(std::vector<Param*>& out);
};

// Pre-norm causal transformer block (MHA + GELU MLP).
struct TransformerBlock {
    Param ln1_g, ln1_b, ln2_g, ln2_b;  // (1, D)
    Linear qkv;                        // D -> 3D
    Linear attn_out;                   // D -> D
    Linear mlp_in;                     // D -> ratio*D
    Linear mlp_out;                    // ratio*D -> D
    int dim = 0, heads = 0;

    TransformerBlock() = default;
    TransformerBlock(const std::string& name, int dim, int heads, int mlp_ratio, Rng& rng);
    Value apply(Graph& g, Value x) const;  // x: (T, D) causal over rows
    void collect(std::vector<Param*>& out);
};

Value layer_norm(Graph& g, Value x, Value gamma, Value beta);

class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Param*>& params);
    void zero_grad(std::vector<Param*>& params) {
        for (Param* p : params) p->zero_grad();
    }
    int iterations() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
};

}  // namespace wswm
