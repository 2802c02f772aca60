#include "rollout.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "metrics.hpp"
#include "training.hpp"

namespace wswm {

namespace {

Vec encode_one(ModelState& state, const VideoDataset& ds, std::int64_t seq, int step) {
    Mat frame(1, static_cast<Eigen::Index>(ds.frame_size()));
    const float* src = ds.frame_ptr(seq, step);
    for (std::size_t i = 0; i < ds.frame_size(); ++i) frame(0, static_cast<Eigen::Index>(i)) = src[i];
    return state.encoder->encode(frame).row(0).transpose();
}

// Core of Alg. 1/Alg. 2. The final step renders only: its action would never
// influence an emitted frame, so the loop degenerates cleanly at t_inf = 1.
RolloutTrace run_rollout(const VideoDataset& ref, std::int64_t seq, const RolloutConfig& cfg,
                         ModelState& state, const CoordinateGrid& grid, const Intervention* iv) {
    if (!state.encoder || !state.fdm) throw StateError("rollout: encoder and forward dynamics required");
    if (cfg.t_inf < 1) throw StateError("rollout: t_inf must be >= 1");
    if (cfg.rho < 0.0 || cfg.rho > 1.0) throw StateError("rollout: rho outside [0,1]");
    if (ref.t < 1) throw StateError("rollout: empty reference video");
    if (cfg.rho > 0.0) {
        int needed = static_cast<int>(std::ceil(cfg.rho * cfg.t_inf)) + 1;
        if (ref.t < needed)
            throw StateError("rollout: context ratio " + std::to_string(cfg.rho) + " over " +
                             std::to_string(cfg.t_inf) + " steps needs " + std::to_string(needed) +
                             " reference frames, got " + std::to_string(ref.t));
        if (!state.idm) throw StateError("rollout: context ratio > 0 requires the inverse dynamics model");
    }
    if (cfg.rho < 1.0 && cfg.t_inf > 1 && !state.gcm)
        throw StateError("rollout: context ratio < 1 requires the control model");
    if (iv) iv->validate(state.spec.action_dim, state.spec.state_dim());

    const FrequencyMask all = FrequencyMask::all_pass(state.spec.inr.fourier_bands);
    const Vec z_base = state.base_weights();
    const double ref_len = static_cast<double>(ref.t);

    RolloutTrace trace;
    Vec z = encode_one(state, ref, seq, 0);
    GcmMemory memory = state.gcm ? state.gcm->init_memory() : GcmMemory{};

    for (int t = 1; t <= cfg.t_inf; ++t) {
        trace.latents.push_back(z);
        Vec weights = z_base + z;
        trace.frames.push_back(render(weights, grid, state.spec.inr, all));
        if (t == cfg.t_inf) break;

        Vec u;
        ActionSource source;
        if (static_cast<double>(t) / ref_len < cfg.rho) {
            Vec z_next = encode_one(state, ref, seq, t);  // frame o_{t+1}
            u = state.idm->infer(z, z_next);
            source = ActionSource::kIdm;
        } else {
            Graph g;
            u = state.gcm->decode(g, memory, g.constant(z.transpose()), t).val().row(0).transpose();
            source = ActionSource::kGcm;
        }
        if (state.codebook) u = quantize(u, *state.codebook).quantized;

        if (state.gcm) {
            Graph g;
            memory = state.gcm->encode(g, memory, g.constant(z.transpose()),
                                       g.constant(u.transpose()), t);
        }

        // Interventions land after the memory update and before the forward step.
        if (iv && iv->steps.count(t)) {
            auto zs = iv->alien_states.find(t);
            if (zs != iv->alien_states.end()) z = zs->second;
            auto us = iv->alien_actions.find(t);
            if (us != iv->alien_actions.end()) {
                u = us->second;
                source = ActionSource::kAlien;
            }
        }
        trace.actions.push_back(u);
        trace.sources.push_back(source);
        z = state.fdm->step(z, u);
    }
    return trace;
}

}  // namespace

void Intervention::validate(int action_dim, int state_dim) const {
    for (const auto& [step, v] : alien_states) {
        if (steps.count(step) == 0) throw StateError("Intervention: state map step not in the step set");
        if (v.size() != state_dim) throw DimensionError("Intervention: alien state has wrong length");
    }
    for (const auto& [step, v] : alien_actions) {
        if (steps.count(step) == 0) throw StateError("Intervention: action map step not in the step set");
        if (v.size() != action_dim) throw DimensionError("Intervention: alien action has wrong length");
    }
}

RolloutTrace generate(const VideoDataset& ref, std::int64_t seq, const RolloutConfig& cfg,
                      ModelState& state, const CoordinateGrid& grid) {
    return run_rollout(ref, seq, cfg, state, grid, nullptr);
}

RolloutTrace retarget(const VideoDataset& ref, std::int64_t seq, const RolloutConfig& cfg,
                      ModelState& state, const CoordinateGrid& grid, const Intervention& iv) {
    return run_rollout(ref, seq, cfg, state, grid, &iv);
}

std::vector<Frame> superresolve(const std::vector<Vec>& latents, ModelState& state, double scale,
                                bool apply_mask) {
    if (scale <= 0.0) throw StateError("superresolve: scale must be positive");
    const int train_h = state.spec.frame_h, train_w = state.spec.frame_w;
    const int out_h = std::max(1, static_cast<int>(std::lround(scale * train_h)));
    const int out_w = std::max(1, static_cast<int>(std::lround(scale * train_w)));
    const CoordinateGrid grid = CoordinateGrid::regular(out_h, out_w);
    const FrequencyMask mask = apply_mask
                                   ? nyquist_mask(train_h, train_w, state.spec.inr.fourier_bands)
                                   : FrequencyMask::all_pass(state.spec.inr.fourier_bands);
    const Vec z_base = state.base_weights();
    std::vector<Frame> out;
    out.reserve(latents.size());
    for (const Vec& z : latents) {
        Vec weights = z_base + z;
        out.push_back(render(weights, grid, state.spec.inr, mask));
    }
    return out;
}

std::string trace_table(const RolloutTrace& trace) {
    std::ostringstream out;
    out << "step\tsource\taction\n";
    for (std::size_t i = 0; i < trace.actions.size(); ++i) {
        const char* src = trace.sources[i] == ActionSource::kIdm   ? "idm"
                          : trace.sources[i] == ActionSource::kGcm ? "gcm"
                                                                   : "alien";
        out << (i + 1) << "\t" << src << "\t";
        out.precision(17);
        for (Eigen::Index d = 0; d < trace.actions[i].size(); ++d)
            out << (d ? "," : "") << trace.actions[i](d);
        out << "\n";
    }
    return out.str();
}

VideoDataset trace_to_dataset(const std::vector<RolloutTrace>& traces) {
    if (traces.empty()) throw StateError("trace_to_dataset: no traces");
    const Frame& first = traces[0].frames.at(0);
    VideoDataset ds;
    ds.n = static_cast<std::int64_t>(traces.size());
    ds.t = static_cast<int>(traces[0].frames.size());
    ds.h = first.h;
    ds.w = first.w;
    ds.c = first.c;
    ds.frames.resize(static_cast<std::size_t>(ds.n) * ds.t * ds.frame_size());
    for (std::size_t s = 0; s < traces.size(); ++s) {
        if (static_cast<int>(traces[s].frames.size()) != ds.t)
            throw DimensionError("trace_to_dataset: ragged trace lengths");
        for (int t = 0; t < ds.t; ++t) {
            const Frame& f = traces[s].frames[t];
            if (f.h != ds.h || f.w != ds.w || f.c != ds.c)
                throw DimensionError("trace_to_dataset: frame shape mismatch");
            float* dst = ds.frame_ptr(static_cast<std::int64_t>(s), t);
            for (std::size_t i = 0; i < ds.frame_size(); ++i)
                dst[i] = static_cast<float>(std::clamp(f.pix[i], 0.0, 1.0));
        }
    }
    return ds;
}

}  // namespace wswm
