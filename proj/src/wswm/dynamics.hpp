#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nn.hpp"
#include "rng.hpp"

namespace wswm {

// Inverse dynamics: action explaining the transition between two encoded
// states. Input is the concatenation (z_t, z_next).
struct IdmConfig {
    int state_dim = 0;   // d_z
    int action_dim = 4;  // d_u
    int hidden_width = 0;  // defaults to d_z
    int depth = 4;         // affine layers including the output head
    double out_init_scale = 1.0;
};

class Idm {
public:
    Idm() = default;
    Idm(const IdmConfig& cfg, std::uint64_t seed);

    const IdmConfig& config() const { return cfg_; }
    // z_t, z_next: (N, d_z) -> (N, d_u)
    Value apply(Graph& g, Value z_t, Value z_next) const;
    Vec infer(const Vec& z_t, const Vec& z_next) const;
    void collect(std::vector<Param*>& out) { net_.collect(out); }
    std::int64_t param_count() const { return net_.param_count(); }

private:
    IdmConfig cfg_;
    Mlp net_;
};

enum class FdmMode { kAdditive, kJoint };

struct FdmConfig {
    FdmMode mode = FdmMode::kAdditive;
    int state_dim = 0;
    int action_dim = 4;
    int hidden_width = 0;  // defaults to 2*d_z (additive); joint width is matched
    int depth = 4;
    double out_init_scale = 1.0;
};

// Hidden width for a joint FDM that matches the additive parameter budget
// within 5%.
int fdm_joint_width(int state_dim, int action_dim, int additive_width, int depth);

// Forward dynamics. Additive mode keeps two independent networks
// A: state -> state and B: action -> state whose outputs sum; joint mode is
// one MLP over the concatenated (state, action).
class Fdm {
public:
    Fdm() = default;
    Fdm(const FdmConfig& cfg, std::uint64_t seed);

    const FdmConfig& config() const { return cfg_; }
    Value apply(Graph& g, Value z_t, Value u_t) const;
    Vec step(const Vec& z_t, const Vec& u_t) const;
    // Additive-only sub-networks (throws in joint mode).
    Value apply_a(Graph& g, Value z_t) const;
    Value apply_b(Graph& g, Value u_t) const;
    void collect(std::vector<Param*>& out);
    std::int64_t param_count() const;

private:
    FdmConfig cfg_;
    Mlp a_, b_, joint_;
};

enum class GcmKind { kGru, kLstm, kTransformer };

struct GcmConfig {
    GcmKind kind = GcmKind::kGru;
    int state_dim = 0;
    int action_dim = 4;
    int hidden = 256;    // recurrent state / token dim
    int blocks = 4;      // transformer depth
    int heads = 8;
    int mlp_ratio = 4;
    int max_t = 32;      // transformer buffer rows
    int decode_hidden = 256;
};

// Rollout memory. Recurrent kinds carry hidden vectors; the transformer
// carries a fixed buffer whose row t is written exactly once.
struct GcmMemory {
    Vec h;            // recurrent hidden (zeros at init)
    Vec cell;         // lstm cell state
    Mat buffer;       // (max_t, hidden) zero-initialised token rows
    int cursor = 1;   // next row to write, 1-based
    std::vector<bool> written;
};

class Gcm {
public:
    Gcm() = default;
    Gcm(const GcmConfig& cfg, std::uint64_t seed);

    const GcmConfig& config() const { return cfg_; }

    GcmMemory init_memory() const;

    // Decode the action at step t (1-based) from memory and the current
    // state. Transformer decoding sees buffer rows < t plus a query row
    // built from (z_t, zero action); recurrent decoding is a pure function
    // of (m_t, z_t).
    Value decode(Graph& g, const GcmMemory& m, Value z_t, int t) const;

    // Write step t into memory: recurrent cell update, or permanent
    // assignment of row t. Throws on a second write to the same row.
    GcmMemory encode(Graph& g, const GcmMemory& m, Value z_t, Value u_t, int t) const;

    // Teacher-forced unroll used by the action-matching loss: decodes at
    // every step, then feeds the provided action into memory.
    // z_seq: (T, d_z), u_seq: (T-1, d_u) -> predictions (T-1, d_u).
    Value unroll(Graph& g, const Mat& z_seq, Value u_seq) const;

    void collect(std::vector<Param*>& out);
    std::int64_t param_count() const;

private:
    GcmConfig cfg_;
    GruCell gru_;
    LstmCell lstm_;
    Mlp decode_mlp_;                     // recurrent: [m, z] -> u
    Linear token_in_;                    // transformer: [z, u] -> token
    Param pos_emb_;                      // (max_t, hidden)
    std::vector<TransformerBlock> blocks_;
    Param final_ln_g_, final_ln_b_;
    Linear token_out_;                   // token -> u

    Value transformer_decode(Graph& g, const Mat& buffer, Value z_t, int t) const;
};

// Nearest-codebook quantization with deterministic lowest-index tie-break.
struct Codebook {
    Mat vectors;  // (n_codes, d_u)
    Vec ema_counts;
    Mat ema_sums;

    static Codebook init(int n_codes, int dim, std::uint64_t seed);
    // Returns the index; `out` receives the codebook row.
    int nearest(const Vec& u, Vec& out) const;
    // Exponential-moving-average refresh from a batch of raw actions and
    // their assigned indices.
    void ema_update(const Mat& u_rows, const std::vector<int>& indices, double gamma = 0.99);
};

struct QuantizeResult {
    Vec quantized;
    int index = -1;
};

QuantizeResult quantize(const Vec& u, const Codebook& codebook);

// Training-mode quantization: value is the codebook row, gradient passes
// straight through to u (identity Jacobian).
Value quantize_st(Graph& g, Value u, const Codebook& codebook, std::vector<int>* indices = nullptr);

}  // namespace wswm
