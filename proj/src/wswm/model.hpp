#pragma once

#include <optional>

#include "dynamics.hpp"
#include "encoder.hpp"
#include "inr.hpp"

namespace wswm {

struct ModelMeta {
    int phase = 0;  // 0: fresh, 1/2/3, 12: joint
    std::int64_t step = 0;
    std::uint64_t seed = 0;
};

// Architecture choices for one experiment; everything a checkpoint needs to
// rebuild the model before loading weights.
struct ModelSpec {
    InrArchitecture inr;
    int action_dim = 4;
    int frame_h = 64, frame_w = 64, frame_c = 1;

    std::vector<int> enc_channels = {64, 128, 256, 512};
    int enc_kernel = 3;
    int enc_stride = 2;
    double enc_proj_scale = 1.0;

    int idm_width = 0;  // 0: d_z
    int idm_depth = 4;
    double idm_out_scale = 1.0;

    FdmMode fdm_mode = FdmMode::kAdditive;
    int fdm_width = 0;  // 0: 2*d_z
    int fdm_depth = 4;
    double fdm_out_scale = 1.0;

    GcmKind gcm_kind = GcmKind::kGru;
    int gcm_hidden = 256;
    int gcm_blocks = 4;
    int gcm_heads = 8;
    int gcm_mlp_ratio = 4;
    int gcm_max_t = 32;
    int gcm_decode_hidden = 256;

    bool use_codebook = false;
    int codebook_size = 200;

    int state_dim() const { return static_cast<int>(param_count(inr)); }
    EncoderConfig encoder_config() const;
    IdmConfig idm_config() const;
    FdmConfig fdm_config() const;
    GcmConfig gcm_config() const;
};

// The trainable world model: base weights plus whichever submodels the
// training phases have created so far.
struct ModelState {
    ModelSpec spec;
    Param z_base;  // (1, d_z)
    std::optional<Encoder> encoder;
    std::optional<Idm> idm;
    std::optional<Fdm> fdm;
    std::optional<Gcm> gcm;
    std::optional<Codebook> codebook;
    ModelMeta meta;

    // Components required by a training phase are created on demand with
    // seeds forked from `seed`.
    void ensure_encoder(std::uint64_t seed);
    void ensure_dynamics(std::uint64_t seed);  // idm + fdm
    void ensure_gcm(std::uint64_t seed);
    void ensure_codebook(std::uint64_t seed);

    std::vector<Param*> all_params();
    Vec base_weights() const { return z_base.value.row(0).transpose(); }
};

// Fresh state with base weights drawn like a standalone renderer init
// (fan-in uniform per layer).
ModelState make_model(const ModelSpec& spec, std::uint64_t seed);

// Fan-in scaled flat init for the renderer weight vector.
Mat inr_weight_init(const InrArchitecture& arch, Rng& rng);

}  // namespace wswm
