#include "encoder.hpp"

#include <cmath>

namespace wswm {

void EncoderConfig::validate() const {
    if (conv_channels.empty()) throw ConfigError("EncoderConfig: need at least one conv stage");
    if (stride < 1) throw ConfigError("EncoderConfig: stride must be >= 1");
    if (out_dim < 1) throw ConfigError("EncoderConfig: out_dim must be set");
    if (in_h < 1 || in_w < 1 || in_c < 1) throw ConfigError("EncoderConfig: bad input shape");
    auto [th, tw] = tail_shape();
    if (th < 1 || tw < 1) throw ConfigError("EncoderConfig: conv stack collapses the input");
}

std::pair<int, int> EncoderConfig::tail_shape() const {
    int h = in_h, w = in_w;
    int pad = kernel / 2;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
        h = (h + 2 * pad - kernel) / stride + 1;
        w = (w + 2 * pad - kernel) / stride + 1;
    }
    return {h, w};
}

std::int64_t EncoderConfig::flat_dim() const {
    auto [h, w] = tail_shape();
    return static_cast<std::int64_t>(h) * w * conv_channels.back();
}

Encoder::Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    int c_in = cfg.in_c;
    for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
        int c_out = cfg.conv_channels[i];
        int fan_in = c_in * cfg.kernel * cfg.kernel;
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        ConvLayer layer;
        layer.c_in = c_in;
        layer.c_out = c_out;
        layer.weight = Param("encoder.conv" + std::to_string(i) + ".weight",
                             {c_out, c_in, cfg.kernel, cfg.kernel},
                             init_uniform(rng, c_out, fan_in, bound));
        layer.bias = Param("encoder.conv" + std::to_string(i) + ".bias", {c_out}, Mat::Zero(1, c_out));
        convs_.push_back(std::move(layer));
        c_in = c_out;
    }
    proj_ = Linear("encoder.proj", static_cast<int>(cfg_.flat_dim()), cfg.out_dim, rng,
                   cfg.proj_init_scale);
}

Value Encoder::apply(Graph& g, const Mat& frames) const {
    if (frames.cols() != static_cast<Eigen::Index>(cfg_.in_h) * cfg_.in_w * cfg_.in_c)
        throw DimensionError("Encoder: frame row length " + std::to_string(frames.cols()) +
                             " does not match configured " +
                             std::to_string(static_cast<std::int64_t>(cfg_.in_h) * cfg_.in_w * cfg_.in_c));
    Value h = g.constant(hwc_to_chw(frames, cfg_.in_h, cfg_.in_w, cfg_.in_c));
    int cur_h = cfg_.in_h, cur_w = cfg_.in_w;
    int pad = cfg_.kernel / 2;
    for (const ConvLayer& layer : convs_) {
        h = g.conv2d(h, g.param(const_cast<Param&>(layer.weight)),
                     g.param(const_cast<Param&>(layer.bias)), layer.c_in, cur_h, cur_w,
                     cfg_.kernel, cfg_.stride, pad);
        cur_h = (cur_h + 2 * pad - cfg_.kernel) / cfg_.stride + 1;
        cur_w = (cur_w + 2 * pad - cfg_.kernel) / cfg_.stride + 1;
        h = g.relu(h);
    }
    return proj_.apply(g, h);
}

Mat Encoder::encode(const Mat& frames) const {
    Graph g;
    Value out = apply(g, frames);
    return out.val();
}

void Encoder::collect(std::vector<Param*>& out) {
    for (ConvLayer& l : convs_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    proj_.collect(out);
}

std::int64_t Encoder::param_count() const {
    std::int64_t n = 0;
    for (const ConvLayer& l : convs_) n += l.weight.value.size() + l.bias.value.size();
    n += proj_.weight.value.size() + proj_.bias.value.size();
    return n;
}

Mat hwc_to_chw(const Mat& frames, int h, int w, int c) {
    Mat out(frames.rows(), frames.cols());
    for (Eigen::Index s = 0; s < frames.rows(); ++s) {
        const double* src = frames.data() + s * frames.cols();
        double* dst = out.data() + s * out.cols();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch)
                    dst[(static_cast<Eigen::Index>(ch) * h + y) * w + x] =
                        src[(static_cast<Eigen::Index>(y) * w + x) * c + ch];
    }
    return out;
}

}  // namespace wswm
