#include "dynamics.hpp"

#include <cmath>

namespace wswm {

Idm::Idm(const IdmConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.state_dim < 1 || cfg.action_dim < 1) throw ConfigError("Idm: dims unset");
    if (cfg.depth < 2) throw ConfigError("Idm: depth must be >= 2");
    cfg_.hidden_width = cfg.hidden_width > 0 ? cfg.hidden_width : cfg.state_dim;
    Rng rng(seed);
    std::vector<int> sizes{2 * cfg.state_dim};
    for (int i = 0; i < cfg.depth - 1; ++i) sizes.push_back(cfg_.hidden_width);
    sizes.push_back(cfg.action_dim);
    net_ = Mlp("idm", sizes, rng, cfg.out_init_scale);
}

Value Idm::apply(Graph& g, Value z_t, Value z_next) const {
    if (z_t.cols() != cfg_.state_dim || z_next.cols() != cfg_.state_dim)
        throw DimensionError("Idm: state dim mismatch");
    if (z_t.rows() != z_next.rows()) throw DimensionError("Idm: batch mismatch");
    return net_.apply(g, g.concat_cols({z_t, z_next}));
}

Vec Idm::infer(const Vec& z_t, const Vec& z_next) const {
    Graph g;
    Value out = apply(g, g.constant(z_t.transpose()), g.constant(z_next.transpose()));
    return out.val().row(0).transpose();
}

int fdm_joint_width(int state_dim, int action_dim, int additive_width, int depth) {
    auto mlp_params = [](const std::vector<int>& sizes) {
        std::int64_t n = 0;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
            n += static_cast<std::int64_t>(sizes[i]) * sizes[i + 1] + sizes[i + 1];
        return n;
    };
    auto tower = [&](int in, int width) {
        std::vector<int> sizes{in};
        for (int i = 0; i < depth - 1; ++i) sizes.push_back(width);
        sizes.push_back(state_dim);
        return sizes;
    };
    std::int64_t target = mlp_params(tower(state_dim, additive_width)) +
                          mlp_params(tower(action_dim, additive_width));
    // widest joint tower whose budget stays within the additive budget
    int lo = 1, hi = 4 * additive_width + state_dim + action_dim;
    while (lo < hi) {
        int mid = (lo + hi + 1) / 2;
        if (mlp_params(tower(state_dim + action_dim, mid)) <= target)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

Fdm::Fdm(const FdmConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.state_dim < 1 || cfg.action_dim < 1) throw ConfigError("Fdm: dims unset");
    if (cfg.depth < 2) throw ConfigError("Fdm: depth must be >= 2");
    if (cfg_.hidden_width <= 0) cfg_.hidden_width = 2 * cfg.state_dim;
    Rng rng(seed);
    auto tower = [&](int in, int width) {
        std::vector<int> sizes{in};
        for (int i = 0; i < cfg.depth - 1; ++i) sizes.push_back(width);
        sizes.push_back(cfg.state_dim);
        return sizes;
    };
    if (cfg_.mode == FdmMode::kAdditive) {
        a_ = Mlp("fdm.a", tower(cfg.state_dim, cfg_.hidden_width), rng, cfg.out_init_scale);
        b_ = Mlp("fdm.b", tower(cfg.action_dim, cfg_.hidden_width), rng, cfg.out_init_scale);
    } else {
        int width = fdm_joint_width(cfg.state_dim, cfg.action_dim, cfg_.hidden_width, cfg.depth);
        joint_ = Mlp("fdm.joint", tower(cfg.state_dim + cfg.action_dim, width), rng,
                     cfg.out_init_scale);
    }
}

namespace {

// Snap a value to the float32 grid with a straight-through gradient. Both
// additive branches live on that grid, so their double-precision sum is
// exact and fdm(z,u1) - fdm(z,u2) cancels the state branch to the bit.
Value quantize_f32_st(Graph& g, Value v) {
    Mat q = v.val();
    double* p = q.data();
    for (Eigen::Index i = 0; i < q.size(); ++i) p[i] = static_cast<double>(static_cast<float>(p[i]));
    return g.passthrough(v, std::move(q));
}

}  // namespace

Value Fdm::apply(Graph& g, Value z_t, Value u_t) const {
    if (z_t.cols() != cfg_.state_dim) throw DimensionError("Fdm: state dim mismatch");
    if (u_t.cols() != cfg_.action_dim) throw DimensionError("Fdm: action dim mismatch");
    if (z_t.rows() != u_t.rows()) throw DimensionError("Fdm: batch mismatch");
    if (cfg_.mode == FdmMode::kAdditive)
        return g.add(quantize_f32_st(g, a_.apply(g, z_t)), quantize_f32_st(g, b_.apply(g, u_t)));
    return joint_.apply(g, g.concat_cols({z_t, u_t}));
}

Value Fdm::apply_a(Graph& g, Value z_t) const {
    if (cfg_.mode != FdmMode::kAdditive) throw StateError("Fdm: A network exists only in additive mode");
    return quantize_f32_st(g, a_.apply(g, z_t));
}

Value Fdm::apply_b(Graph& g, Value u_t) const {
    if (cfg_.mode != FdmMode::kAdditive) throw StateError("Fdm: B network exists only in additive mode");
    return quantize_f32_st(g, b_.apply(g, u_t));
}

Vec Fdm::step(const Vec& z_t, const Vec& u_t) const {
    Graph g;
    Value out = apply(g, g.constant(z_t.transpose()), g.constant(u_t.transpose()));
    return out.val().row(0).transpose();
}

void Fdm::collect(std::vector<Param*>& out) {
    if (cfg_.mode == FdmMode::kAdditive) {
        a_.collect(out);
        b_.collect(out);
    } else {
        joint_.collect(out);
    }
}

std::int64_t Fdm::param_count() const {
    if (cfg_.mode == FdmMode::kAdditive) return a_.param_count() + b_.param_count();
    return joint_.param_count();
}

Gcm::Gcm(const GcmConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.state_dim < 1 || cfg.action_dim < 1) throw ConfigError("Gcm: dims unset");
    Rng rng(seed);
    const int in = cfg.state_dim + cfg.action_dim;
    switch (cfg.kind) {
        case GcmKind::kGru:
            gru_ = GruCell("gcm.gru", in, cfg.hidden, rng);
            decode_mlp_ = Mlp("gcm.decode", {cfg.hidden + cfg.state_dim, cfg.decode_hidden, cfg.action_dim}, rng);
            break;
        case GcmKind::kLstm:
            lstm_ = LstmCell("gcm.lstm", in, cfg.hidden, rng);
            decode_mlp_ = Mlp("gcm.decode", {cfg.hidden + cfg.state_dim, cfg.decode_hidden, cfg.action_dim}, rng);
            break;
        case GcmKind::kTransformer: {
            token_in_ = Linear("gcm.token_in", in, cfg.hidden, rng);
            pos_emb_ = Param("gcm.pos_emb", {cfg.max_t, cfg.hidden},
                             init_uniform(rng, cfg.max_t, cfg.hidden, 0.02));
            for (int b = 0; b < cfg.blocks; ++b)
                blocks_.emplace_back("gcm.block" + std::to_string(b), cfg.hidden, cfg.heads,
                                     cfg.mlp_ratio, rng);
            final_ln_g_ = Param("gcm.final_ln.gamma", {cfg.hidden}, Mat::Ones(1, cfg.hidden));
            final_ln_b_ = Param("gcm.final_ln.beta", {cfg.hidden}, Mat::Zero(1, cfg.hidden));
            token_out_ = Linear("gcm.token_out", cfg.hidden, cfg.action_dim, rng);
            break;
        }
    }
}

GcmMemory Gcm::init_memory() const {
    GcmMemory m;
    switch (cfg_.kind) {
        case GcmKind::kGru:
            m.h = Vec::Zero(cfg_.hidden);
            break;
        case GcmKind::kLstm:
            m.h = Vec::Zero(cfg_.hidden);
            m.cell = Vec::Zero(cfg_.hidden);
            break;
        case GcmKind::kTransformer:
            m.buffer = Mat::Zero(cfg_.max_t, cfg_.hidden);
            m.written.assign(cfg_.max_t, false);
            break;
    }
    m.cursor = 1;
    return m;
}

Value Gcm::transformer_decode(Graph& g, const Mat& buffer, Value z_t, int t) const {
    // Query token from (z_t, zero action) replaces row t; only rows <= t are
    // processed, which realises the causal mask exactly.
    Value zero_u = g.constant(Mat::Zero(z_t.rows(), cfg_.action_dim));
    Value query = token_in_.apply(g, g.concat_cols({z_t, zero_u}));  // (1, hidden)
    Value rows = g.constant(buffer.topRows(t));
    Value buf = g.set_row(rows, t - 1, query);
    Value pos = g.slice_rows(g.param(const_cast<Param&>(pos_emb_)), 0, t);
    Value h = g.add(buf, pos);
    for (const TransformerBlock& blk : blocks_) h = blk.apply(g, h);
    h = layer_norm(g, h, g.param(const_cast<Param&>(final_ln_g_)),
                   g.param(const_cast<Param&>(final_ln_b_)));
    return token_out_.apply(g, g.slice_rows(h, t - 1, 1));
}

Value Gcm::decode(Graph& g, const GcmMemory& m, Value z_t, int t) const {
    if (z_t.rows() != 1 || z_t.cols() != cfg_.state_dim)
        throw DimensionError("Gcm::decode: z_t must be (1, d_z)");
    switch (cfg_.kind) {
        case GcmKind::kGru:
        case GcmKind::kLstm: {
            if (t < 1) throw StateError("Gcm::decode: step index must be >= 1");
            Value mem = g.constant(m.h.transpose());
            return decode_mlp_.apply(g, g.concat_cols({mem, z_t}));
        }
        case GcmKind::kTransformer: {
            if (t < 1 || t > cfg_.max_t)
                throw StateError("Gcm::decode: step " + std::to_string(t) + " outside [1, " +
                                 std::to_string(cfg_.max_t) + "]");
            return transformer_decode(g, m.buffer, z_t, t);
        }
    }
    throw StateError("Gcm::decode: unreachable");
}

GcmMemory Gcm::encode(Graph& g, const GcmMemory& m, Value z_t, Value u_t, int t) const {
    if (z_t.rows() != 1 || u_t.rows() != 1) throw DimensionError("Gcm::encode: batch of one expected");
    GcmMemory next = m;
    switch (cfg_.kind) {
        case GcmKind::kGru: {
            if (t < 1) throw StateError("Gcm::encode: step index must be >= 1");
            Value h = g.constant(m.h.transpose());
            Value x = g.concat_cols({z_t, u_t});
            next.h = gru_.step(g, x, h).val().row(0).transpose();
            break;
        }
        case GcmKind::kLstm: {
            if (t < 1) throw StateError("Gcm::encode: step index must be >= 1");
            Value h = g.constant(m.h.transpose());
            Value c = g.constant(m.cell.transpose());
            auto [h2, c2] = lstm_.step(g, g.concat_cols({z_t, u_t}), h, c);
            next.h = h2.val().row(0).transpose();
            next.cell = c2.val().row(0).transpose();
            break;
        }
        case GcmKind::kTransformer: {
            if (t < 1 || t > cfg_.max_t)
                throw StateError("Gcm::encode: step " + std::to_string(t) + " outside [1, " +
                                 std::to_string(cfg_.max_t) + "]");
            if (next.written[t - 1])
                throw StateError("Gcm::encode: buffer row " + std::to_string(t) + " written twice");
            Value token = token_in_.apply(g, g.concat_cols({z_t, u_t}));
            next.buffer.row(t - 1) = token.val().row(0);
            next.written[t - 1] = true;
            break;
        }
    }
    next.cursor = t + 1;
    return next;
}

Value Gcm::unroll(Graph& g, const Mat& z_seq, Value u_seq) const {
    const int steps = static_cast<int>(z_seq.rows()) - 1;
    if (steps < 1) throw DimensionError("Gcm::unroll: need at least two states");
    if (u_seq.rows() != steps) throw DimensionError("Gcm::unroll: need T-1 teacher actions");
    std::vector<Value> preds;
    preds.reserve(steps);
    switch (cfg_.kind) {
        case GcmKind::kGru:
        case GcmKind::kLstm: {
            Value h = g.constant(Mat::Zero(1, cfg_.hidden));
            Value c = g.constant(Mat::Zero(1, cfg_.hidden));
            for (int t = 0; t < steps; ++t) {
                Value z = g.constant(z_seq.row(t));
                preds.push_back(decode_mlp_.apply(g, g.concat_cols({h, z})));
                Value x = g.concat_cols({z, g.slice_rows(u_seq, t, 1)});
                if (cfg_.kind == GcmKind::kGru) {
                    h = gru_.step(g, x, h);
                } else {
                    auto [h2, c2] = lstm_.step(g, x, h, c);
                    h = h2;
                    c = c2;
                }
            }
            break;
        }
        case GcmKind::kTransformer: {
            if (steps > cfg_.max_t) throw StateError("Gcm::unroll: sequence longer than max_t");
            Value buf = g.constant(Mat::Zero(cfg_.max_t, cfg_.hidden));
            for (int t = 0; t < steps; ++t) {
                Value z = g.constant(z_seq.row(t));
                // decode with the running buffer, then write the teacher action
                Value zero_u = g.constant(Mat::Zero(1, cfg_.action_dim));
                Value query = token_in_.apply(g, g.concat_cols({z, zero_u}));
                Value rows = g.slice_rows(buf, 0, t + 1);
                Value qbuf = g.set_row(rows, t, query);
                Value pos = g.slice_rows(g.param(const_cast<Param&>(pos_emb_)), 0, t + 1);
                Value h = g.add(qbuf, pos);
                for (const TransformerBlock& blk : blocks_) h = blk.apply(g, h);
                h = layer_norm(g, h, g.param(const_cast<Param&>(final_ln_g_)),
                               g.param(const_cast<Param&>(final_ln_b_)));
                preds.push_back(token_out_.apply(g, g.slice_rows(h, t, 1)));
                Value token = token_in_.apply(g, g.concat_cols({z, g.slice_rows(u_seq, t, 1)}));
                buf = g.set_row(buf, t, token);
            }
            break;
        }
    }
    return g.concat_rows(preds);
}

void Gcm::collect(std::vector<Param*>& out) {
    switch (cfg_.kind) {
        case GcmKind::kGru:
            gru_.collect(out);
            decode_mlp_.collect(out);
            break;
        case GcmKind::kLstm:
            lstm_.collect(out);
            decode_mlp_.collect(out);
            break;
        case GcmKind::kTransformer:
            token_in_.collect(out);
            out.push_back(&pos_emb_);
            for (TransformerBlock& b : blocks_) b.collect(out);
            out.push_back(&final_ln_g_);
            out.push_back(&final_ln_b_);
            token_out_.collect(out);
            break;
    }
}

std::int64_t Gcm::param_count() const {
    std::vector<Param*> ps;
    const_cast<Gcm*>(this)->collect(ps);
    std::int64_t n = 0;
    for (Param* p : ps) n += p->value.size();
    return n;
}

Codebook Codebook::init(int n_codes, int dim, std::uint64_t seed) {
    if (n_codes < 1 || dim < 1) throw ConfigError("Codebook: bad shape");
    Rng rng(seed);
    Codebook cb;
    cb.vectors = init_uniform(rng, n_codes, dim, 1.0);
    return cb;
}

int Codebook::nearest(const Vec& u, Vec& out) const {
    if (vectors.rows() < 1) throw StateError("Codebook: empty");
    if (u.size() != vectors.cols()) throw DimensionError("Codebook: dim mismatch");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < vectors.rows(); ++i) {
        double d = (vectors.row(i).transpose() - u).squaredNorm();
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = i;
        }
    }
    out = vectors.row(best).transpose();
    return best;
}

void Codebook::ema_update(const Mat& u_rows, const std::vector<int>& indices, double gamma) {
    if (u_rows.rows() != static_cast<Eigen::Index>(indices.size()))
        throw DimensionError("Codebook::ema_update: rows and indices disagree");
    if (ema_counts.size() == 0) {
        ema_counts = Vec::Ones(vectors.rows());
        ema_sums = vectors;
    }
    Vec batch_counts = Vec::Zero(vectors.rows());
    Mat batch_sums = Mat::Zero(vectors.rows(), vectors.cols());
    for (Eigen::Index r = 0; r < u_rows.rows(); ++r) {
        batch_counts(indices[r]) += 1.0;
        batch_sums.row(indices[r]) += u_rows.row(r);
    }
    ema_counts = gamma * ema_counts + (1.0 - gamma) * batch_counts;
    ema_sums = gamma * ema_sums + (1.0 - gamma) * batch_sums;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i)
        if (ema_counts(i) > 1e-6) vectors.row(i) = ema_sums.row(i) / ema_counts(i);
}

QuantizeResult quantize(const Vec& u, const Codebook& codebook) {
    QuantizeResult r;
    r.index = codebook.nearest(u, r.quantized);
    return r;
}

Value quantize_st(Graph& g, Value u, const Codebook& codebook, std::vector<int>* indices) {
    const Mat& um = u.val();
    Mat q(um.rows(), um.cols());
    if (indices) indices->clear();
    for (Eigen::Index r = 0; r < um.rows(); ++r) {
        Vec row = um.row(r).transpose();
        Vec nn;
        int idx = codebook.nearest(row, nn);
        q.row(r) = nn.transpose();
        if (indices) indices->push_back(idx);
    }
    // u + sg(q - u): the forward value is the codebook row bit-exactly and
    // the Jacobian w.r.t. u is the identity.
    return g.passthrough(u, std::move(q));
}

}  // namespace wswm
