#include "training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "checkpoint.hpp"

namespace wswm {

namespace {

Vec ssim_gaussian_1d() {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    Vec k(kWin);
    double total = 0.0;
    for (int i = 0; i < kWin; ++i) {
        double d = i - 5.0;
        k(i) = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
        total += k(i);
    }
    return k / total;
}

std::string fmt_loss(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

TrainPhase parse_phase(const std::string& s) {
    if (s == "1") return TrainPhase::kPhase1;
    if (s == "2") return TrainPhase::kPhase2;
    if (s == "3") return TrainPhase::kPhase3;
    if (s == "joint12" || s == "12") return TrainPhase::kJoint12;
    throw ConfigError("unknown training phase: " + s);
}

std::string phase_name(TrainPhase p) {
    switch (p) {
        case TrainPhase::kPhase1: return "1";
        case TrainPhase::kPhase2: return "2";
        case TrainPhase::kPhase3: return "3";
        case TrainPhase::kJoint12: return "joint12";
    }
    return "?";
}

Mat sequence_matrix(const VideoDataset& ds, std::int64_t seq) {
    Mat out(ds.t, static_cast<Eigen::Index>(ds.frame_size()));
    for (int t = 0; t < ds.t; ++t) {
        const float* src = ds.frame_ptr(seq, t);
        for (std::size_t i = 0; i < ds.frame_size(); ++i) out(t, static_cast<Eigen::Index>(i)) = src[i];
    }
    return out;
}

Mat augment_reverse(const Mat& seq) {
    Mat out(seq.rows(), seq.cols());
    for (Eigen::Index t = 0; t < seq.rows(); ++t) out.row(t) = seq.row(seq.rows() - 1 - t);
    return out;
}

Mat augment_static(const Mat& seq, int t_out) {
    const int keep = t_out - 2;
    if (keep < 1) throw DimensionError("augment_static: output length must be >= 3");
    if (seq.rows() < keep)
        throw DimensionError("augment_static: sequence shorter than required " + std::to_string(keep) +
                             " frames");
    Mat out(t_out, seq.cols());
    out.row(0) = seq.row(0);
    for (int i = 0; i < keep; ++i) out.row(1 + i) = seq.row(i);
    out.row(t_out - 1) = seq.row(keep - 1);
    return out;
}

Value ssim_value(Graph& g, Value a, Value b, int h, int w) {
    static const Vec win = ssim_gaussian_1d();
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    Value mu_a = g.sepconv_fixed_valid(a, win, h, w);
    Value mu_b = g.sepconv_fixed_valid(b, win, h, w);
    Value e_aa = g.sepconv_fixed_valid(g.mul(a, a), win, h, w);
    Value e_bb = g.sepconv_fixed_valid(g.mul(b, b), win, h, w);
    Value e_ab = g.sepconv_fixed_valid(g.mul(a, b), win, h, w);
    Value var_a = g.sub(e_aa, g.mul(mu_a, mu_a));
    Value var_b = g.sub(e_bb, g.mul(mu_b, mu_b));
    Value cov = g.sub(e_ab, g.mul(mu_a, mu_b));
    Value num = g.mul(g.add_scalar(g.scale(g.mul(mu_a, mu_b), 2.0), c1),
                      g.add_scalar(g.scale(cov, 2.0), c2));
    Value den = g.mul(g.add_scalar(g.add(g.mul(mu_a, mu_a), g.mul(mu_b, mu_b)), c1),
                      g.add_scalar(g.add(var_a, var_b), c2));
    return g.mean(g.div(num, den));
}

namespace {

// MSE + lambda*(1 - SSIM) between a rendered (P, C) value and a target frame
// row; SSIM averaged over channels.
Value pixel_loss(Graph& g, Value rendered, const Mat& target_row, int h, int w, int c,
                 double lambda) {
    Value target = g.constant(Eigen::Map<const Mat>(target_row.data(), static_cast<Eigen::Index>(h) * w, c));
    Value mse = g.mean(g.square(g.sub(rendered, target)));
    Value ssim_acc;
    for (int ch = 0; ch < c; ++ch) {
        Value ach = g.reshape(g.slice_cols(rendered, ch, 1), 1, h * w);
        Value bch = g.reshape(g.slice_cols(target, ch, 1), 1, h * w);
        Value s = ssim_value(g, ach, bch, h, w);
        ssim_acc = ch == 0 ? s : g.add(ssim_acc, s);
    }
    Value ssim_mean = g.scale(ssim_acc, 1.0 / c);
    // lambda * (1 - ssim) = lambda - lambda*ssim
    return g.add_scalar(g.sub(mse, g.scale(ssim_mean, lambda)), lambda);
}

Value broadcast_rows(Graph& g, Value row, int n) {
    return g.matmul(g.constant(Mat::Ones(n, 1)), row);
}

}  // namespace

Value loss_phase1(Graph& g, const Mat& seq, ModelState& state, const Mat& embed, double lambda) {
    if (!state.encoder) throw StateError("loss_phase1: encoder missing");
    const int t = static_cast<int>(seq.rows());
    const int h = state.spec.frame_h, w = state.spec.frame_w, c = state.spec.frame_c;
    Value z = state.encoder->apply(g, seq);                       // (T, d_z)
    Value zb = broadcast_rows(g, g.param(state.z_base), t);
    Value z_full = g.add(z, zb);
    Value acc;
    for (int i = 0; i < t; ++i) {
        Value rendered = render_value(g, g.slice_rows(z_full, i, 1), embed, state.spec.inr);
        Mat row = seq.row(i);
        Value term = pixel_loss(g, rendered, row, h, w, c, lambda);
        acc = i == 0 ? term : g.add(acc, term);
    }
    return g.scale(acc, 1.0 / t);
}

Value loss_phase2(Graph& g, const Mat& seq, ModelState& state, bool encoder_in_graph,
                  double commitment_weight) {
    if (!state.encoder) throw StateError("loss_phase2: encoder missing");
    if (!state.idm || !state.fdm) throw StateError("loss_phase2: dynamics missing");
    const int t = static_cast<int>(seq.rows());
    if (t < 2) throw DimensionError("loss_phase2: need at least two frames");

    Value z_t, z_next;
    if (encoder_in_graph) {
        Value z = state.encoder->apply(g, seq);
        z_t = g.slice_rows(z, 0, t - 1);
        z_next = g.detach(g.slice_rows(z, 1, t - 1));
    } else {
        Mat z = state.encoder->encode(seq);
        z_t = g.constant(z.topRows(t - 1));
        z_next = g.constant(z.bottomRows(t - 1));
    }
    Value u = state.idm->apply(g, z_t, z_next);
    Value loss;
    if (state.codebook) {
        Value uq = quantize_st(g, u, *state.codebook);
        Value pred = state.fdm->apply(g, z_t, uq);
        Value diff = g.sub(z_next, pred);
        loss = g.scale(g.sum(g.square(diff)), 1.0 / (t - 1));
        // commitment: pull raw actions toward their codes
        Value commit =
            g.scale(g.sum(g.square(g.sub(u, g.detach(uq)))), commitment_weight / (t - 1));
        loss = g.add(loss, commit);
    } else {
        Value pred = state.fdm->apply(g, z_t, u);
        Value diff = g.sub(z_next, pred);
        loss = g.scale(g.sum(g.square(diff)), 1.0 / (t - 1));
    }
    return loss;
}

Value loss_phase3(Graph& g, const Mat& seq, ModelState& state) {
    if (!state.encoder || !state.idm) throw StateError("loss_phase3: need encoder and inverse dynamics");
    if (!state.gcm) throw StateError("loss_phase3: control model missing");
    const int t = static_cast<int>(seq.rows());
    if (t < 2) throw DimensionError("loss_phase3: need at least two frames");

    Mat z = state.encoder->encode(seq);  // (T, d_z), frozen
    Mat u(t - 1, state.spec.action_dim);
    {
        Graph scratch;
        Value uu = state.idm->apply(scratch, scratch.constant(z.topRows(t - 1)),
                                    scratch.constant(z.bottomRows(t - 1)));
        u = uu.val();
    }
    Value preds = state.gcm->unroll(g, z, g.constant(u));
    Value diff = g.sub(preds, g.constant(u));
    return g.scale(g.sum(g.square(diff)), 1.0 / (t - 1));
}

Value loss_joint12(Graph& g, const Mat& seq, ModelState& state, const Mat& embed,
                   double lambda, double commitment_weight) {
    if (!state.encoder || !state.idm || !state.fdm)
        throw StateError("loss_joint12: encoder and dynamics required");
    const int t = static_cast<int>(seq.rows());
    if (t < 2) throw DimensionError("loss_joint12: need at least two frames");
    const int h = state.spec.frame_h, w = state.spec.frame_w, c = state.spec.frame_c;

    Value z = state.encoder->apply(g, seq);  // (T, d_z)
    Value zb1 = g.param(state.z_base);

    // per-frame reconstruction
    Value z_full = g.add(z, broadcast_rows(g, zb1, t));
    Value recon;
    for (int i = 0; i < t; ++i) {
        Value rendered = render_value(g, g.slice_rows(z_full, i, 1), embed, state.spec.inr);
        Mat row = seq.row(i);
        Value term = pixel_loss(g, rendered, row, h, w, c, lambda);
        recon = i == 0 ? term : g.add(recon, term);
    }
    recon = g.scale(recon, 1.0 / t);

    // pixel-space reconstruction of the rendered forward prediction
    Value z_t = g.slice_rows(z, 0, t - 1);
    Value z_next_sg = g.detach(g.slice_rows(z, 1, t - 1));
    Value u = state.idm->apply(g, z_t, z_next_sg);
    Value commit;
    if (state.codebook) {
        Value uq = quantize_st(g, u, *state.codebook);
        commit = g.scale(g.sum(g.square(g.sub(u, g.detach(uq)))), commitment_weight / (t - 1));
        u = uq;
    }
    Value z_pred = state.fdm->apply(g, z_t, u);
    Value z_pred_full = g.add(z_pred, broadcast_rows(g, zb1, t - 1));
    Value dyn;
    for (int i = 0; i + 1 < t; ++i) {
        Value rendered = render_value(g, g.slice_rows(z_pred_full, i, 1), embed, state.spec.inr);
        Mat row = seq.row(i + 1);
        Value term = pixel_loss(g, rendered, row, h, w, c, lambda);
        dyn = i == 0 ? term : g.add(dyn, term);
    }
    dyn = g.scale(dyn, 1.0 / (t - 1));
    Value total = g.add(recon, dyn);
    if (state.codebook) total = g.add(total, commit);
    return total;
}

TrainResult train(const TrainConfig& cfg, const VideoDataset& data, ModelState& state,
                  const std::function<void(int, double)>& progress) {
    if (data.n < 1) throw StateError("train: empty dataset");
    if (cfg.batch_size < 1 || cfg.learning_rate <= 0.0) throw ConfigError("train: bad optimizer settings");
    if (data.h != state.spec.frame_h || data.w != state.spec.frame_w || data.c != state.spec.frame_c)
        throw DimensionError("train: dataset frames do not match the model's frame shape");

    // Phase prerequisites and freezing rules.
    std::uint64_t seed = cfg.seed;
    switch (cfg.phase) {
        case TrainPhase::kPhase1:
            state.ensure_encoder(seed);
            break;
        case TrainPhase::kPhase2:
            if (!state.encoder)
                throw StateError("phase 2 needs a phase-1 (or joint) checkpoint with an encoder");
            state.ensure_dynamics(seed);
            break;
        case TrainPhase::kPhase3:
            if (!state.encoder || !state.idm || !state.fdm)
                throw StateError("phase 3 needs a phase-2 (or joint) checkpoint with encoder and dynamics");
            state.ensure_gcm(seed);
            break;
        case TrainPhase::kJoint12:
            state.ensure_encoder(seed);
            state.ensure_dynamics(seed);
            break;
    }
    if (state.spec.use_codebook &&
        (cfg.phase == TrainPhase::kPhase2 || cfg.phase == TrainPhase::kJoint12))
        state.ensure_codebook(seed);

    std::vector<Param*> trainable;
    switch (cfg.phase) {
        case TrainPhase::kPhase1:
            trainable.push_back(&state.z_base);
            state.encoder->collect(trainable);
            break;
        case TrainPhase::kPhase2:
            state.idm->collect(trainable);
            state.fdm->collect(trainable);
            break;
        case TrainPhase::kPhase3:
            state.gcm->collect(trainable);
            break;
        case TrainPhase::kJoint12:
            trainable.push_back(&state.z_base);
            state.encoder->collect(trainable);
            state.idm->collect(trainable);
            state.fdm->collect(trainable);
            break;
    }

    const FrequencyMask all = FrequencyMask::all_pass(state.spec.inr.fourier_bands);
    const Mat embed = embed_matrix(CoordinateGrid::regular(data.h, data.w),
                                   state.spec.inr.fourier_bands, all,
                                   state.spec.inr.include_raw_coords);

    auto batch_loss = [&](Graph& g, const std::vector<Mat>& seqs) {
        Value acc;
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            Value term;
            switch (cfg.phase) {
                case TrainPhase::kPhase1:
                    term = loss_phase1(g, seqs[i], state, embed, cfg.lambda_ssim);
                    break;
                case TrainPhase::kPhase2:
                    term = loss_phase2(g, seqs[i], state, false, cfg.commitment_weight);
                    break;
                case TrainPhase::kPhase3:
                    term = loss_phase3(g, seqs[i], state);
                    break;
                case TrainPhase::kJoint12:
                    term = loss_joint12(g, seqs[i], state, embed, cfg.lambda_ssim,
                                        cfg.commitment_weight);
                    break;
            }
            acc = i == 0 ? term : g.add(acc, term);
        }
        return g.scale(acc, 1.0 / static_cast<double>(seqs.size()));
    };

    // Fixed probe set for the initial/final loss report.
    const int probe_n = static_cast<int>(std::min<std::int64_t>(data.n, 32));
    auto probe_loss = [&]() {
        double total = 0.0;
        for (int i = 0; i < probe_n; ++i) {
            Graph g;
            std::vector<Mat> one{sequence_matrix(data, i)};
            total += batch_loss(g, one).val()(0, 0);
        }
        return total / probe_n;
    };

    TrainResult result;
    result.initial_loss = probe_loss();

    Rng rng(cfg.seed ^ 0x7261696e5f726e67ULL);
    Adam opt(cfg.learning_rate);
    std::ostringstream log;
    const auto t_start = std::chrono::steady_clock::now();

    for (int step = 0; step < cfg.steps; ++step) {
        if (cfg.max_seconds > 0.0) {
            double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            if (elapsed > cfg.max_seconds) break;
        }
        std::vector<Mat> seqs;
        seqs.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            Mat seq = sequence_matrix(data, static_cast<std::int64_t>(rng.below(data.n)));
            if (cfg.augment_static && data.t >= 3 && rng.uniform() < cfg.static_prob)
                seq = augment_static(seq, data.t);
            if (cfg.augment_reverse && rng.uniform() < cfg.reverse_prob) seq = augment_reverse(seq);
            seqs.push_back(std::move(seq));
        }
        Graph g;
        Value loss = batch_loss(g, seqs);
        double loss_v = loss.val()(0, 0);
        opt.zero_grad(trainable);
        g.backward(loss);
        opt.step(trainable);

        // EMA codebook refresh from the raw actions this batch produced.
        if (state.codebook &&
            (cfg.phase == TrainPhase::kPhase2 || cfg.phase == TrainPhase::kJoint12)) {
            for (const Mat& seq : seqs) {
                Mat z = state.encoder->encode(seq);
                Graph scratch;
                Value u = state.idm->apply(scratch, scratch.constant(z.topRows(z.rows() - 1)),
                                           scratch.constant(z.bottomRows(z.rows() - 1)));
                std::vector<int> idx;
                quantize_st(scratch, u, *state.codebook, &idx);
                state.codebook->ema_update(u.val(), idx);
            }
        }
        log << step << "\t" << phase_name(cfg.phase) << "\t" << fmt_loss(loss_v) << "\n";
        if (progress && (step % std::max(1, cfg.log_every) == 0)) progress(step, loss_v);
        result.steps_run = step + 1;
        state.meta.step += 1;
    }
    state.meta.phase = cfg.phase == TrainPhase::kJoint12 ? 2 : static_cast<int>(cfg.phase);

    result.final_loss = probe_loss();
    result.loss_log = log.str();
    return result;
}

}  // namespace wswm
