#include "model.hpp"

#include <cmath>

namespace wswm {

EncoderConfig ModelSpec::encoder_config() const {
    EncoderConfig cfg;
    cfg.conv_channels = enc_channels;
    cfg.kernel = enc_kernel;
    cfg.stride = enc_stride;
    cfg.out_dim = state_dim();
    cfg.in_h = frame_h;
    cfg.in_w = frame_w;
    cfg.in_c = frame_c;
    cfg.proj_init_scale = enc_proj_scale;
    return cfg;
}

IdmConfig ModelSpec::idm_config() const {
    IdmConfig cfg;
    cfg.state_dim = state_dim();
    cfg.action_dim = action_dim;
    cfg.hidden_width = idm_width;
    cfg.depth = idm_depth;
    cfg.out_init_scale = idm_out_scale;
    return cfg;
}

FdmConfig ModelSpec::fdm_config() const {
    FdmConfig cfg;
    cfg.mode = fdm_mode;
    cfg.state_dim = state_dim();
    cfg.action_dim = action_dim;
    cfg.hidden_width = fdm_width;
    cfg.depth = fdm_depth;
    cfg.out_init_scale = fdm_out_scale;
    return cfg;
}

GcmConfig ModelSpec::gcm_config() const {
    GcmConfig cfg;
    cfg.kind = gcm_kind;
    cfg.state_dim = state_dim();
    cfg.action_dim = action_dim;
    cfg.hidden = gcm_hidden;
    cfg.blocks = gcm_blocks;
    cfg.heads = gcm_heads;
    cfg.mlp_ratio = gcm_mlp_ratio;
    cfg.max_t = gcm_max_t;
    cfg.decode_hidden = gcm_decode_hidden;
    return cfg;
}

Mat inr_weight_init(const InrArchitecture& arch, Rng& rng) {
    Mat z(1, param_count(arch));
    std::int64_t off = 0;
    int in = arch.embed_dim();
    for (int l = 0; l < arch.depth; ++l) {
        int out = (l + 1 == arch.depth) ? arch.out_channels : arch.width;
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(out) * in + out; ++i)
            z(0, off + i) = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
        off += static_cast<std::int64_t>(out) * in + out;
        in = out;
    }
    return z;
}

void ModelState::ensure_encoder(std::uint64_t seed) {
    if (!encoder) encoder.emplace(spec.encoder_config(), Rng(seed).fork(1).next_u64());
}

void ModelState::ensure_dynamics(std::uint64_t seed) {
    Rng rng(seed);
    std::uint64_t s_idm = rng.fork(2).next_u64();
    std::uint64_t s_fdm = rng.fork(3).next_u64();
    if (!idm) idm.emplace(spec.idm_config(), s_idm);
    if (!fdm) fdm.emplace(spec.fdm_config(), s_fdm);
}

void ModelState::ensure_gcm(std::uint64_t seed) {
    if (!gcm) gcm.emplace(spec.gcm_config(), Rng(seed).fork(4).next_u64());
}

void ModelState::ensure_codebook(std::uint64_t seed) {
    if (!codebook) codebook = Codebook::init(spec.codebook_size, spec.action_dim,
                                             Rng(seed).fork(5).next_u64());
}

std::vector<Param*> ModelState::all_params() {
    std::vector<Param*> ps;
    ps.push_back(&z_base);
    if (encoder) encoder->collect(ps);
    if (idm) idm->collect(ps);
    if (fdm) fdm->collect(ps);
    if (gcm) gcm->collect(ps);
    return ps;
}

ModelState make_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.inr.validate();
    ModelState st;
    st.spec = spec;
    Rng rng(seed);
    st.z_base = Param("zbar", {spec.state_dim()}, inr_weight_init(spec.inr, rng));
    st.meta.seed = seed;
    return st;
}

}  // namespace wswm
