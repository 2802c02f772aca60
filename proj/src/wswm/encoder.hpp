#pragma once

#include <vector>

#include "nn.hpp"
#include "rng.hpp"

namespace wswm {

// Strided convolutional backbone plus a linear projection into weight space.
// Every conv uses kernel `kernel`, stride `stride` and same padding, so each
// stage halves the spatial dims at the default stride of 2.
struct EncoderConfig {
    std::vector<int> conv_channels = {64, 128, 256, 512};
    int kernel = 3;
    int stride = 2;
    int out_dim = 0;  // d_z, must match the paired renderer's param_count
    int in_h = 64, in_w = 64, in_c = 1;
    // Shrinks the projection weights at init so fresh encodings start as
    // small offsets around the base weights.
    double proj_init_scale = 1.0;

    void validate() const;
    // Spatial dims after all conv stages.
    std::pair<int, int> tail_shape() const;
    std::int64_t flat_dim() const;
};

struct ConvLayer {
    Param weight;  // (c_out, c_in*k*k)
    Param bias;    // (1, c_out)
    int c_in = 0, c_out = 0;
};

class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }

    // frames: (N, H*W*C) rows in HWC pixel order, values in [0,1].
    // Frames are data, never parameters; gradients flow to the encoder only.
    // Returns (N, d_z).
    Value apply(Graph& g, const Mat& frames) const;

    // Convenience non-graph call for a batch of frames.
    Mat encode(const Mat& frames) const;

    void collect(std::vector<Param*>& out);
    std::int64_t param_count() const;

private:
    EncoderConfig cfg_;
    std::vector<ConvLayer> convs_;
    Linear proj_;
};

// Reorder one HWC frame row into the CHW layout the conv stack expects.
Mat hwc_to_chw(const Mat& frames, int h, int w, int c);

}  // namespace wswm
