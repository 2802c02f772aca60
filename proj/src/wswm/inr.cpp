#include "inr.hpp"

#include <cmath>
#include <string>

namespace wswm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void InrArchitecture::validate() const {
    if (depth < 2) throw DimensionError("InrArchitecture: depth must be >= 2");
    if (width < 1) throw DimensionError("InrArchitecture: width must be >= 1");
    if (fourier_bands < 1) throw DimensionError("InrArchitecture: fourier_bands must be >= 1");
    if (out_channels < 1) throw DimensionError("InrArchitecture: out_channels must be >= 1");
}

std::int64_t param_count(const InrArchitecture& arch) {
    arch.validate();
    std::int64_t total = 0;
    int in = arch.embed_dim();
    for (int l = 0; l < arch.depth; ++l) {
        int out = (l + 1 == arch.depth) ? arch.out_channels : arch.width;
        total += static_cast<std::int64_t>(in) * out + out;
        in = out;
    }
    return total;
}

FrequencyMask FrequencyMask::all_pass(int bands) {
    FrequencyMask m;
    m.x_keep.assign(bands, true);
    m.y_keep.assign(bands, true);
    return m;
}

FrequencyMask nyquist_mask(int train_h, int train_w, int bands) {
    if (train_h < 2 || train_w < 2) throw DimensionError("nyquist_mask: resolution must be >= 2");
    FrequencyMask m;
    m.x_keep.assign(bands, false);
    m.y_keep.assign(bands, false);
    double ky = std::log2(static_cast<double>(train_h)) - 1.0;
    double kx = std::log2(static_cast<double>(train_w)) - 1.0;
    for (int k = 0; k < bands; ++k) {
        m.y_keep[k] = static_cast<double>(k) < ky;
        m.x_keep[k] = static_cast<double>(k) < kx;
    }
    return m;
}

CoordinateGrid CoordinateGrid::regular(int rows, int cols) {
    if (rows < 1 || cols < 1) throw DimensionError("CoordinateGrid: empty grid");
    CoordinateGrid gr;
    gr.rows = rows;
    gr.cols = cols;
    gr.ys.resize(rows);
    gr.xs.resize(cols);
    for (int i = 0; i < rows; ++i) gr.ys[i] = -1.0 + 2.0 * i / rows;
    for (int j = 0; j < cols; ++j) gr.xs[j] = -1.0 + 2.0 * j / cols;
    return gr;
}

std::vector<double> fourier_embed(double x, double y, int bands, const FrequencyMask& mask,
                                  bool raw) {
    if (mask.bands() != bands) throw DimensionError("fourier_embed: mask band count mismatch");
    std::vector<double> e;
    e.reserve(4 * bands + (raw ? 2 : 0));
    for (int k = 0; k < bands; ++k) {
        double s = std::pow(2.0, k) * kPi;
        double keep = mask.x_keep[k] ? 1.0 : 0.0;
        e.push_back(keep * std::sin(s * x));
        e.push_back(keep * std::cos(s * x));
    }
    for (int k = 0; k < bands; ++k) {
        double s = std::pow(2.0, k) * kPi;
        double keep = mask.y_keep[k] ? 1.0 : 0.0;
        e.push_back(keep * std::sin(s * y));
        e.push_back(keep * std::cos(s * y));
    }
    if (raw) {
        e.push_back(x);
        e.push_back(y);
    }
    return e;
}

Mat embed_matrix(const CoordinateGrid& grid, int bands, const FrequencyMask& mask, bool raw) {
    const int dim = 4 * bands + (raw ? 2 : 0);
    Mat e(static_cast<Eigen::Index>(grid.rows) * grid.cols, dim);
    for (int i = 0; i < grid.rows; ++i) {
        for (int j = 0; j < grid.cols; ++j) {
            std::vector<double> row = fourier_embed(grid.xs[j], grid.ys[i], bands, mask, raw);
            for (int d = 0; d < dim; ++d) e(static_cast<Eigen::Index>(i) * grid.cols + j, d) = row[d];
        }
    }
    return e;
}

std::vector<InrLayer> unflatten(const Vec& weights, const InrArchitecture& arch) {
    arch.validate();
    const std::int64_t expect = param_count(arch);
    if (weights.size() != expect)
        throw DimensionError("unflatten: weight vector has length " + std::to_string(weights.size()) +
                             ", architecture needs " + std::to_string(expect));
    std::vector<InrLayer> layers;
    layers.reserve(arch.depth);
    std::int64_t off = 0;
    int in = arch.embed_dim();
    for (int l = 0; l < arch.depth; ++l) {
        int out = (l + 1 == arch.depth) ? arch.out_channels : arch.width;
        InrLayer layer;
        layer.weight = Eigen::Map<const Mat>(weights.data() + off, out, in);
        off += static_cast<std::int64_t>(out) * in;
        layer.bias = Eigen::Map<const Vec>(weights.data() + off, out);
        off += out;
        layers.push_back(std::move(layer));
        in = out;
    }
    return layers;
}

Vec flatten(const std::vector<InrLayer>& layers) {
    std::int64_t total = 0;
    for (const InrLayer& l : layers) total += l.weight.size() + l.bias.size();
    Vec out(total);
    std::int64_t off = 0;
    for (const InrLayer& l : layers) {
        Eigen::Map<Mat>(out.data() + off, l.weight.rows(), l.weight.cols()) = l.weight;
        off += l.weight.size();
        Eigen::Map<Vec>(out.data() + off, l.bias.size()) = l.bias;
        off += l.bias.size();
    }
    return out;
}

Frame render(const Vec& weights, const CoordinateGrid& grid, const InrArchitecture& arch,
             const FrequencyMask& mask) {
    if (mask.bands() != arch.fourier_bands)
        throw DimensionError("render: mask band count does not match architecture");
    std::vector<InrLayer> layers = unflatten(weights, arch);

    Frame f;
    f.h = grid.rows;
    f.w = grid.cols;
    f.c = arch.out_channels;
    f.pix.resize(static_cast<std::size_t>(grid.rows) * grid.cols * arch.out_channels);

    // Chunk over pixels; large super-resolution grids would otherwise hold
    // the full embedding matrix in memory at once.
    const std::int64_t total = static_cast<std::int64_t>(grid.rows) * grid.cols;
    const std::int64_t chunk = 1 << 16;
    const int dim = arch.embed_dim();
    for (std::int64_t p0 = 0; p0 < total; p0 += chunk) {
        const std::int64_t n = std::min(chunk, total - p0);
        Mat h(n, dim);
        for (std::int64_t p = 0; p < n; ++p) {
            std::int64_t pix = p0 + p;
            int i = static_cast<int>(pix / grid.cols);
            int j = static_cast<int>(pix % grid.cols);
            std::vector<double> row = fourier_embed(grid.xs[j], grid.ys[i], arch.fourier_bands,
                                                    mask, arch.include_raw_coords);
            for (int d = 0; d < dim; ++d) h(p, d) = row[d];
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            h = (h * layers[l].weight.transpose()).eval();
            h.rowwise() += layers[l].bias.transpose();
            if (l + 1 < layers.size()) h = h.cwiseMax(0.0);
        }
        for (std::int64_t p = 0; p < n; ++p)
            for (int ch = 0; ch < arch.out_channels; ++ch)
                f.pix[(p0 + p) * arch.out_channels + ch] = h(p, ch);
    }
    return f;
}

Value render_batch(Graph& g, Value weights, const Mat& embed, const InrArchitecture& arch) {
    if (weights.cols() != param_count(arch))
        throw DimensionError("render_batch: weights must have param_count columns");
    if (embed.cols() != arch.embed_dim()) throw DimensionError("render_batch: embedding dim mismatch");
    const int n = static_cast<int>(weights.rows());
    const int pixels = static_cast<int>(embed.rows());
    const int depth = arch.depth;

    // layer dims and flat offsets
    std::vector<int> dims{arch.embed_dim()};
    for (int l = 0; l < depth; ++l)
        dims.push_back(l + 1 == depth ? arch.out_channels : arch.width);
    std::vector<int> w_off(depth), b_off(depth);
    {
        int off = 0;
        for (int l = 0; l < depth; ++l) {
            w_off[l] = off;
            off += dims[l] * dims[l + 1];
            b_off[l] = off;
            off += dims[l + 1];
        }
    }

    // forward, keeping post-activation maps per layer for the backward pass
    auto acts = std::make_shared<std::vector<Mat>>();  // depth mats of (n*pixels, width/out)
    acts->reserve(depth);
    const Mat& wm = weights.val();
    for (int l = 0; l < depth; ++l) {
        Mat out(static_cast<Eigen::Index>(n) * pixels, dims[l + 1]);
        for (int s = 0; s < n; ++s) {
            Eigen::Map<const Mat> w_l(wm.data() + s * wm.cols() + w_off[l], dims[l + 1], dims[l]);
            Eigen::Map<const Eigen::RowVectorXd> b_l(wm.data() + s * wm.cols() + b_off[l], dims[l + 1]);
            auto dst = out.middleRows(static_cast<Eigen::Index>(s) * pixels, pixels);
            if (l == 0)
                dst.noalias() = embed * w_l.transpose();
            else
                dst.noalias() = (*acts)[l - 1].middleRows(static_cast<Eigen::Index>(s) * pixels, pixels) *
                                w_l.transpose();
            dst.rowwise() += b_l;
        }
        if (l + 1 < depth) out = out.cwiseMax(0.0);
        acts->push_back(std::move(out));
    }

    Mat out = acts->back();
    Mat embed_copy = embed;
    return g.make_node(std::move(out), g.needs_grad(weights),
                       [weights, acts, embed_copy, dims, w_off, b_off, n, pixels, depth](Graph& gg,
                                                                                         Graph::Node& node) {
                           Mat dw = Mat::Zero(n, weights.val().cols());
                           const Mat& wm = weights.val();
                           for (int s = 0; s < n; ++s) {
                               Mat dh = node.grad.middleRows(static_cast<Eigen::Index>(s) * pixels, pixels);
                               for (int l = depth - 1; l >= 0; --l) {
                                   Eigen::Map<const Mat> w_l(wm.data() + s * wm.cols() + w_off[l],
                                                             dims[l + 1], dims[l]);
                                   Eigen::Map<Mat> dw_l(dw.data() + s * dw.cols() + w_off[l],
                                                        dims[l + 1], dims[l]);
                                   Eigen::Map<Eigen::RowVectorXd> db_l(dw.data() + s * dw.cols() + b_off[l],
                                                                       dims[l + 1]);
                                   const auto prev =
                                       l == 0 ? embed_copy.middleRows(0, pixels)
                                              : (*acts)[l - 1].middleRows(
                                                    static_cast<Eigen::Index>(s) * pixels, pixels);
                                   dw_l.noalias() += dh.transpose() * prev;
                                   db_l += dh.colwise().sum();
                                   if (l > 0) {
                                       Mat dprev = dh * w_l;
                                       dprev = dprev.cwiseProduct(
                                           ((*acts)[l - 1]
                                                .middleRows(static_cast<Eigen::Index>(s) * pixels, pixels)
                                                .array() > 0.0)
                                               .cast<double>()
                                               .matrix());
                                       dh = std::move(dprev);
                                   }
                               }
                           }
                           gg.add_grad(weights.id, dw);
                       });
}

Value render_value(Graph& g, Value weights, const Mat& embed, const InrArchitecture& arch) {
    if (weights.rows() != 1 || weights.cols() != param_count(arch))
        throw DimensionError("render_value: weights must be (1, param_count)");
    if (embed.cols() != arch.embed_dim())
        throw DimensionError("render_value: embedding dim mismatch");
    Value h = g.constant_view(embed);
    int off = 0;
    int in = arch.embed_dim();
    for (int l = 0; l < arch.depth; ++l) {
        int out = (l + 1 == arch.depth) ? arch.out_channels : arch.width;
        Value w = g.reshape(g.slice_cols(weights, off, out * in), out, in);
        off += out * in;
        Value b = g.slice_cols(weights, off, out);
        off += out;
        h = g.add_rowvec(g.matmul(h, g.transpose(w)), b);
        if (l + 1 < arch.depth) h = g.relu(h);
        in = out;
    }
    return h;
}

}  // namespace wswm
