#include "graph.hpp"

#include <cmath>

namespace wswm {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Value Graph::make(Mat val, bool need_grad, std::function<void(Graph&, Node&)> back) {
    auto n = std::make_unique<Node>();
    n->val = std::move(val);
    n->need_grad = need_grad;
    n->back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::add_grad(int id, const Mat& g) {
    Node& n = *nodes_[id];
    if (!n.need_grad) return;
    ensure_grad(n);
    n.grad += g;
}

Value Graph::param(Param& p) {
    Value v = make(p.value, true, {});
    at(v).param = &p;
    return v;
}

Value Graph::constant(Mat m) { return make(std::move(m), false, {}); }

Value Graph::constant_view(const Mat& m) { return make(m, false, {}); }

Value Graph::add(Value a, Value b) {
    if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols())
        throw DimensionError("add: shape mismatch");
    bool ng = at(a).need_grad || at(b).need_grad;
    return make(a.val() + b.val(), ng, [a, b](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad);
        g.add_grad(b.id, n.grad);
    });
}

Value Graph::sub(Value a, Value b) {
    if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols())
        throw DimensionError("sub: shape mismatch");
    bool ng = at(a).need_grad || at(b).need_grad;
    return make(a.val() - b.val(), ng, [a, b](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad);
        g.add_grad(b.id, -n.grad);
    });
}

Value Graph::mul(Value a, Value b) {
    if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols())
        throw DimensionError("mul: shape mismatch");
    bool ng = at(a).need_grad || at(b).need_grad;
    return make(a.val().cwiseProduct(b.val()), ng, [a, b](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad.cwiseProduct(b.val()));
        g.add_grad(b.id, n.grad.cwiseProduct(a.val()));
    });
}

Value Graph::div(Value a, Value b) {
    if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols())
        throw DimensionError("div: shape mismatch");
    bool ng = at(a).need_grad || at(b).need_grad;
    Mat out = a.val().cwiseQuotient(b.val());
    return make(std::move(out), ng, [a, b](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad.cwiseQuotient(b.val()));
        g.add_grad(b.id, -n.grad.cwiseProduct(n.val).cwiseQuotient(b.val()));
    });
}

Value Graph::scale(Value a, double s) {
    return make(a.val() * s, at(a).need_grad, [a, s](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad * s);
    });
}

Value Graph::add_scalar(Value a, double s) {
    return make(a.val().array() + s, at(a).need_grad, [a](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad);
    });
}

Value Graph::matmul(Value a, Value b) {
    if (a.val().cols() != b.val().rows()) throw DimensionError("matmul: inner dims differ");
    bool ng = at(a).need_grad || at(b).need_grad;
    return make(a.val() * b.val(), ng, [a, b](Graph& g, Node& n) {
        if (g.at(a).need_grad) g.add_grad(a.id, n.grad * b.val().transpose());
        if (g.at(b).need_grad) g.add_grad(b.id, a.val().transpose() * n.grad);
    });
}

Value Graph::transpose(Value a) {
    return make(a.val().transpose(), at(a).need_grad, [a](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad.transpose());
    });
}

Value Graph::add_rowvec(Value a, Value b) {
    if (b.val().rows() != 1 || b.val().cols() != a.val().cols())
        throw DimensionError("add_rowvec: bias must be 1 x cols(a)");
    bool ng = at(a).need_grad || at(b).need_grad;
    Mat out = a.val();
    out.rowwise() += Eigen::RowVectorXd(b.val().row(0));
    return make(std::move(out), ng, [a, b](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad);
        if (g.at(b).need_grad) g.add_grad(b.id, n.grad.colwise().sum());
    });
}

Value Graph::relu(Value a) {
    return make(a.val().cwiseMax(0.0), at(a).need_grad, [a](Graph& g, Node& n) {
        Mat m = (a.val().array() > 0.0).cast<double>();
        g.add_grad(a.id, n.grad.cwiseProduct(m));
    });
}

Value Graph::sigmoid(Value a) {
    Mat out = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
    return make(std::move(out), at(a).need_grad, [a](Graph& g, Node& n) {
        Mat d = n.val.array() * (1.0 - n.val.array());
        g.add_grad(a.id, n.grad.cwiseProduct(d));
    });
}

Value Graph::tanh(Value a) {
    Mat out = a.val().array().tanh().matrix();
    return make(std::move(out), at(a).need_grad, [a](Graph& g, Node& n) {
        Mat d = 1.0 - n.val.array().square();
        g.add_grad(a.id, n.grad.cwiseProduct(d));
    });
}

Value Graph::gelu(Value a) {
    // Exact form x * Phi(x) with the Gaussian CDF.
    Mat out = a.val();
    double* p = out.data();
    const double* x = a.val().data();
    for (Eigen::Index i = 0; i < out.size(); ++i)
        p[i] = x[i] * 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
    return make(std::move(out), at(a).need_grad, [a](Graph& g, Node& n) {
        Mat d = a.val();
        double* q = d.data();
        const double* x = a.val().data();
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            double phi = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
            q[i] = phi + x[i] * pdf;
        }
        g.add_grad(a.id, n.grad.cwiseProduct(d));
    });
}

Value Graph::square(Value a) {
    return make(a.val().array().square().matrix(), at(a).need_grad, [a](Graph& g, Node& n) {
        g.add_grad(a.id, 2.0 * n.grad.cwiseProduct(a.val()));
    });
}

Value Graph::sqrt_of(Value a) {
    Mat out = a.val().array().sqrt().matrix();
    return make(std::move(out), at(a).need_grad, [a](Graph& g, Node& n) {
        Mat d = 0.5 * n.grad.array() / n.val.array();
        g.add_grad(a.id, d);
    });
}

Value Graph::reshape(Value a, int rows, int cols) {
    if (rows * cols != a.val().size()) throw DimensionError("reshape: element count differs");
    Mat out = Eigen::Map<const Mat>(a.val().data(), rows, cols);
    return make(std::move(out), at(a).need_grad, [a](Graph& g, Node& n) {
        Mat back = Eigen::Map<const Mat>(n.grad.data(), a.val().rows(), a.val().cols());
        g.add_grad(a.id, back);
    });
}

Value Graph::slice_cols(Value a, int col0, int ncols) {
    if (col0 < 0 || col0 + ncols > a.val().cols()) throw DimensionError("slice_cols: out of range");
    return make(a.val().middleCols(col0, ncols), at(a).need_grad,
                [a, col0, ncols](Graph& g, Node& n) {
                    Mat full = Mat::Zero(a.val().rows(), a.val().cols());
                    full.middleCols(col0, ncols) = n.grad;
                    g.add_grad(a.id, full);
                });
}

Value Graph::slice_rows(Value a, int row0, int nrows) {
    if (row0 < 0 || row0 + nrows > a.val().rows()) throw DimensionError("slice_rows: out of range");
    return make(a.val().middleRows(row0, nrows), at(a).need_grad,
                [a, row0, nrows](Graph& g, Node& n) {
                    Mat full = Mat::Zero(a.val().rows(), a.val().cols());
                    full.middleRows(row0, nrows) = n.grad;
                    g.add_grad(a.id, full);
                });
}

Value Graph::concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: empty");
    Eigen::Index rows = parts[0].val().rows();
    Eigen::Index cols = 0;
    bool ng = false;
    for (const Value& p : parts) {
        if (p.val().rows() != rows) throw DimensionError("concat_cols: row mismatch");
        cols += p.val().cols();
        ng = ng || at(p).need_grad;
    }
    Mat out(rows, cols);
    Eigen::Index off = 0;
    for (const Value& p : parts) {
        out.middleCols(off, p.val().cols()) = p.val();
        off += p.val().cols();
    }
    std::vector<Value> ps = parts;
    return make(std::move(out), ng, [ps](Graph& g, Node& n) {
        Eigen::Index off = 0;
        for (const Value& p : ps) {
            g.add_grad(p.id, n.grad.middleCols(off, p.val().cols()));
            off += p.val().cols();
        }
    });
}

Value Graph::concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: empty");
    Eigen::Index cols = parts[0].val().cols();
    Eigen::Index rows = 0;
    bool ng = false;
    for (const Value& p : parts) {
        if (p.val().cols() != cols) throw DimensionError("concat_rows: col mismatch");
        rows += p.val().rows();
        ng = ng || at(p).need_grad;
    }
    Mat out(rows, cols);
    Eigen::Index off = 0;
    for (const Value& p : parts) {
        out.middleRows(off, p.val().rows()) = p.val();
        off += p.val().rows();
    }
    std::vector<Value> ps = parts;
    return make(std::move(out), ng, [ps](Graph& g, Node& n) {
        Eigen::Index off = 0;
        for (const Value& p : ps) {
            g.add_grad(p.id, n.grad.middleRows(off, p.val().rows()));
            off += p.val().rows();
        }
    });
}

Value Graph::set_row(Value a, int row, Value r) {
    if (r.val().rows() != 1 || r.val().cols() != a.val().cols())
        throw DimensionError("set_row: row shape mismatch");
    if (row < 0 || row >= a.val().rows()) throw DimensionError("set_row: index out of range");
    bool ng = at(a).need_grad || at(r).need_grad;
    Mat out = a.val();
    out.row(row) = r.val().row(0);
    return make(std::move(out), ng, [a, r, row](Graph& g, Node& n) {
        if (g.at(a).need_grad) {
            Mat ga = n.grad;
            ga.row(row).setZero();
            g.add_grad(a.id, ga);
        }
        if (g.at(r).need_grad) g.add_grad(r.id, n.grad.row(row));
    });
}

Value Graph::gather_rows(Value a, std::vector<int> rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), a.val().cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= a.val().rows()) throw DimensionError("gather_rows: out of range");
        out.row(static_cast<Eigen::Index>(i)) = a.val().row(rows[i]);
    }
    return make(std::move(out), at(a).need_grad, [a, rows = std::move(rows)](Graph& g, Node& n) {
        Mat back = Mat::Zero(a.val().rows(), a.val().cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            back.row(rows[i]) += n.grad.row(static_cast<Eigen::Index>(i));
        g.add_grad(a.id, back);
    });
}

Value Graph::sum(Value a) {
    Mat out(1, 1);
    out(0, 0) = a.val().sum();
    return make(std::move(out), at(a).need_grad, [a](Graph& g, Node& n) {
        g.add_grad(a.id, Mat::Constant(a.val().rows(), a.val().cols(), n.grad(0, 0)));
    });
}

Value Graph::mean(Value a) {
    double inv = 1.0 / static_cast<double>(a.val().size());
    Mat out(1, 1);
    out(0, 0) = a.val().sum() * inv;
    return make(std::move(out), at(a).need_grad, [a, inv](Graph& g, Node& n) {
        g.add_grad(a.id, Mat::Constant(a.val().rows(), a.val().cols(), n.grad(0, 0) * inv));
    });
}

Value Graph::row_sum(Value a) {
    Mat out = a.val().rowwise().sum();
    return make(std::move(out), at(a).need_grad, [a](Graph& g, Node& n) {
        Mat back = n.grad * Mat::Ones(1, a.val().cols());
        g.add_grad(a.id, back);
    });
}

Value Graph::col_mean(Value a) {
    double inv = 1.0 / static_cast<double>(a.val().rows());
    Mat out = a.val().colwise().sum() * inv;
    return make(std::move(out), at(a).need_grad, [a, inv](Graph& g, Node& n) {
        Mat back = Mat::Ones(a.val().rows(), 1) * (n.grad * inv);
        g.add_grad(a.id, back);
    });
}

Value Graph::detach(Value a) { return make(a.val(), false, {}); }

Value Graph::passthrough(Value a, Mat forward_value) {
    if (forward_value.rows() != a.val().rows() || forward_value.cols() != a.val().cols())
        throw DimensionError("passthrough: shape mismatch");
    return make(std::move(forward_value), at(a).need_grad, [a](Graph& g, Node& n) {
        g.add_grad(a.id, n.grad);
    });
}

Value Graph::conv2d(Value x, Value w, Value b, int c_in, int h, int w_in,
                    int k, int stride, int pad) {
    const Mat& xm = x.val();
    const int n = static_cast<int>(xm.rows());
    if (xm.cols() != static_cast<Eigen::Index>(c_in) * h * w_in)
        throw DimensionError("conv2d: input cols != c_in*h*w");
    const int c_out = static_cast<int>(w.val().rows());
    if (w.val().cols() != static_cast<Eigen::Index>(c_in) * k * k)
        throw DimensionError("conv2d: weight cols != c_in*k*k");
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w_in + 2 * pad - k) / stride + 1;
    const int npos = oh * ow;

    // im2col panel for the whole batch: one GEMM per conv keeps the math on
    // large matrices and the accumulation order deterministic.
    Mat panel = Mat::Zero(static_cast<Eigen::Index>(n) * npos, static_cast<Eigen::Index>(c_in) * k * k);
    for (int s = 0; s < n; ++s) {
        const double* img = xm.data() + static_cast<Eigen::Index>(s) * xm.cols();
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double* dst = panel.data() + (static_cast<Eigen::Index>(s) * npos + oy * ow + ox) * panel.cols();
                for (int c = 0; c < c_in; ++c) {
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) { dst += k; continue; }
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride - pad + kx;
                            if (ix >= 0 && ix < w_in)
                                *dst = img[(static_cast<Eigen::Index>(c) * h + iy) * w_in + ix];
                            ++dst;
                        }
                    }
                }
            }
        }
    }

    Mat y = panel * w.val().transpose();  // (n*npos, c_out)
    y.rowwise() += Eigen::RowVectorXd(b.val().row(0));

    // Scatter to per-sample CHW rows.
    Mat out(n, static_cast<Eigen::Index>(c_out) * npos);
    for (int s = 0; s < n; ++s)
        for (int c = 0; c < c_out; ++c)
            for (int p = 0; p < npos; ++p)
                out(s, static_cast<Eigen::Index>(c) * npos + p) = y(static_cast<Eigen::Index>(s) * npos + p, c);

    bool ng = at(x).need_grad || at(w).need_grad || at(b).need_grad;
    auto panel_ptr = std::make_shared<Mat>(std::move(panel));
    return make(std::move(out), ng,
                [x, w, b, c_in, h, w_in, k, stride, pad, oh, ow, c_out, panel_ptr](Graph& g, Node& n_) {
                    const int n = static_cast<int>(x.val().rows());
                    const int npos = oh * ow;
                    Mat dy(static_cast<Eigen::Index>(n) * npos, c_out);
                    for (int s = 0; s < n; ++s)
                        for (int c = 0; c < c_out; ++c)
                            for (int p = 0; p < npos; ++p)
                                dy(static_cast<Eigen::Index>(s) * npos + p, c) =
                                    n_.grad(s, static_cast<Eigen::Index>(c) * npos + p);
                    if (g.at(w).need_grad) g.add_grad(w.id, dy.transpose() * (*panel_ptr));
                    if (g.at(b).need_grad) g.add_grad(b.id, dy.colwise().sum());
                    if (g.at(x).need_grad) {
                        Mat dpanel = dy * w.val();  // (n*npos, c_in*k*k)
                        Mat dx = Mat::Zero(n, x.val().cols());
                        for (int s = 0; s < n; ++s) {
                            double* img = dx.data() + static_cast<Eigen::Index>(s) * dx.cols();
                            for (int oy = 0; oy < oh; ++oy) {
                                for (int ox = 0; ox < ow; ++ox) {
                                    const double* src = dpanel.data() +
                                        (static_cast<Eigen::Index>(s) * npos + oy * ow + ox) * dpanel.cols();
                                    for (int c = 0; c < c_in; ++c) {
                                        for (int ky = 0; ky < k; ++ky) {
                                            int iy = oy * stride - pad + ky;
                                            if (iy < 0 || iy >= h) { src += k; continue; }
                                            for (int kx = 0; kx < k; ++kx) {
                                                int ix = ox * stride - pad + kx;
                                                if (ix >= 0 && ix < w_in)
                                                    img[(static_cast<Eigen::Index>(c) * h + iy) * w_in + ix] += *src;
                                                ++src;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        g.add_grad(x.id, dx);
                    }
                });
}

Value Graph::conv2d_fixed_valid(Value x, const Mat& kernel, int h, int w_in) {
    const int k = static_cast<int>(kernel.rows());
    if (kernel.cols() != k) throw DimensionError("conv2d_fixed_valid: kernel must be square");
    const Mat& xm = x.val();
    if (xm.cols() != static_cast<Eigen::Index>(h) * w_in)
        throw DimensionError("conv2d_fixed_valid: input cols != h*w");
    if (h < k || w_in < k) throw DimensionError("conv2d_fixed_valid: image smaller than kernel");
    const int n = static_cast<int>(xm.rows());
    const int oh = h - k + 1, ow = w_in - k + 1;
    Mat out(n, static_cast<Eigen::Index>(oh) * ow);
    for (int s = 0; s < n; ++s) {
        const double* img = xm.data() + static_cast<Eigen::Index>(s) * xm.cols();
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < k; ++ky) {
                    const double* row = img + static_cast<Eigen::Index>(oy + ky) * w_in + ox;
                    const double* kr = kernel.data() + static_cast<Eigen::Index>(ky) * k;
                    for (int kx = 0; kx < k; ++kx) acc += row[kx] * kr[kx];
                }
                out(s, static_cast<Eigen::Index>(oy) * ow + ox) = acc;
            }
    }
    Mat ker = kernel;
    return make(std::move(out), at(x).need_grad, [x, ker, h, w_in, k](Graph& g, Node& n_) {
        const int n = static_cast<int>(x.val().rows());
        const int oh = h - k + 1, ow = w_in - k + 1;
        Mat dx = Mat::Zero(n, x.val().cols());
        for (int s = 0; s < n; ++s) {
            double* img = dx.data() + static_cast<Eigen::Index>(s) * dx.cols();
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double gv = n_.grad(s, static_cast<Eigen::Index>(oy) * ow + ox);
                    if (gv == 0.0) continue;
                    for (int ky = 0; ky < k; ++ky) {
                        double* row = img + static_cast<Eigen::Index>(oy + ky) * w_in + ox;
                        const double* kr = ker.data() + static_cast<Eigen::Index>(ky) * k;
                        for (int kx = 0; kx < k; ++kx) row[kx] += gv * kr[kx];
                    }
                }
        }
        g.add_grad(x.id, dx);
    });
}

namespace {

// Horizontal then vertical valid-mode 1D correlation of row-major images.
Mat sepconv_forward(const Mat& x, const Vec& k, int h, int w, int oh, int ow) {
    const int n = static_cast<int>(x.rows());
    const int klen = static_cast<int>(k.size());
    Mat out(n, static_cast<Eigen::Index>(oh) * ow);
    Mat tmp(h, ow);
    for (int s = 0; s < n; ++s) {
        Eigen::Map<const Mat> img(x.data() + static_cast<Eigen::Index>(s) * x.cols(), h, w);
        tmp.setZero();
        for (int kx = 0; kx < klen; ++kx) tmp.noalias() += k(kx) * img.middleCols(kx, ow);
        Eigen::Map<Mat> dst(out.data() + static_cast<Eigen::Index>(s) * out.cols(), oh, ow);
        dst.setZero();
        for (int ky = 0; ky < klen; ++ky) dst.noalias() += k(ky) * tmp.middleRows(ky, oh);
    }
    return out;
}

Mat sepconv_backward(const Mat& dy, const Vec& k, int h, int w, int oh, int ow) {
    const int n = static_cast<int>(dy.rows());
    const int klen = static_cast<int>(k.size());
    Mat dx = Mat::Zero(n, static_cast<Eigen::Index>(h) * w);
    Mat tmp(h, ow);
    for (int s = 0; s < n; ++s) {
        Eigen::Map<const Mat> gy(dy.data() + static_cast<Eigen::Index>(s) * dy.cols(), oh, ow);
        tmp.setZero();
        for (int ky = 0; ky < klen; ++ky) tmp.middleRows(ky, oh).noalias() += k(ky) * gy;
        Eigen::Map<Mat> gx(dx.data() + static_cast<Eigen::Index>(s) * dx.cols(), h, w);
        for (int kx = 0; kx < klen; ++kx) gx.middleCols(kx, ow).noalias() += k(kx) * tmp;
    }
    return dx;
}

}  // namespace

Value Graph::sepconv_fixed_valid(Value x, const Vec& k1d, int h, int w_in) {
    const int klen = static_cast<int>(k1d.size());
    if (x.val().cols() != static_cast<Eigen::Index>(h) * w_in)
        throw DimensionError("sepconv_fixed_valid: input cols != h*w");
    if (h < klen || w_in < klen) throw DimensionError("sepconv_fixed_valid: image smaller than kernel");
    const int oh = h - klen + 1, ow = w_in - klen + 1;
    Mat out = sepconv_forward(x.val(), k1d, h, w_in, oh, ow);
    Vec k = k1d;
    return make(std::move(out), at(x).need_grad, [x, k, h, w_in, oh, ow](Graph& g, Node& n) {
        g.add_grad(x.id, sepconv_backward(n.grad, k, h, w_in, oh, ow));
    });
}

Value Graph::softmax_causal(Value scores) {
    const Mat& s = scores.val();
    if (s.rows() != s.cols()) throw DimensionError("softmax_causal: scores must be square");
    const int t = static_cast<int>(s.rows());
    Mat out = Mat::Zero(t, t);
    for (int i = 0; i < t; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= i; ++j) mx = std::max(mx, s(i, j));
        double z = 0.0;
        for (int j = 0; j <= i; ++j) {
            out(i, j) = std::exp(s(i, j) - mx);
            z += out(i, j);
        }
        for (int j = 0; j <= i; ++j) out(i, j) /= z;
    }
    return make(std::move(out), at(scores).need_grad, [scores, t](Graph& g, Node& n) {
        Mat ds = Mat::Zero(t, t);
        for (int i = 0; i < t; ++i) {
            double dot = 0.0;
            for (int j = 0; j <= i; ++j) dot += n.grad(i, j) * n.val(i, j);
            for (int j = 0; j <= i; ++j) ds(i, j) = n.val(i, j) * (n.grad(i, j) - dot);
        }
        g.add_grad(scores.id, ds);
    });
}

void Graph::backward(Value loss) {
    Node& ln = at(loss);
    if (ln.val.size() != 1) throw DimensionError("backward: loss must be scalar");
    ensure_grad(ln);
    ln.grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = *nodes_[i];
        if (!n.need_grad || n.grad.size() == 0) continue;
        if (n.back) n.back(*this, n);
        if (n.param != nullptr) n.param->grad += n.grad;
    }
}

}  // namespace wswm
