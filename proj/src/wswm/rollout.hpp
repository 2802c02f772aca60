#pragma once

#include <map>
#include <set>

#include "model.hpp"
#include "synthdata.hpp"

namespace wswm {

struct RolloutConfig {
    int t_inf = 20;
    double rho = 0.0;     // context ratio in [0,1]
    double scale = 1.0;   // render scale factor for superresolve
    bool apply_mask = true;
};

enum class ActionSource { kIdm, kGcm, kAlien };

// Inference-time substitutions: at each step in `steps`, the current state
// and/or action is replaced after the memory update and before the forward
// dynamics step.
struct Intervention {
    std::set<int> steps;
    std::map<int, Vec> alien_states;
    std::map<int, Vec> alien_actions;

    void validate(int action_dim, int state_dim) const;
};

struct RolloutTrace {
    std::vector<Frame> frames;            // t_inf rendered frames
    std::vector<Vec> latents;             // t_inf weight offsets z_t
    std::vector<Vec> actions;             // t_inf - 1 chosen actions
    std::vector<ActionSource> sources;    // t_inf - 1 per-step tags
};

// Context-conditioned generation. The first reference frame seeds z_1; at
// step t the action comes from the inverse dynamics model on the next
// reference frame while t / len(ref) < rho, and from the control model
// afterwards. Latents always advance through the forward dynamics model.
// Frames render on `grid` (resolution never feeds back into the latents).
RolloutTrace generate(const VideoDataset& ref, std::int64_t seq, const RolloutConfig& cfg,
                      ModelState& state, const CoordinateGrid& grid);

// Same loop with interventions applied after the memory update at each step
// in the intervention set.
RolloutTrace retarget(const VideoDataset& ref, std::int64_t seq, const RolloutConfig& cfg,
                      ModelState& state, const CoordinateGrid& grid, const Intervention& iv);

// Renders stored weight offsets at scale * (train resolution). The band mask
// always comes from the training grid, regardless of the query resolution.
std::vector<Frame> superresolve(const std::vector<Vec>& latents, ModelState& state, double scale,
                                bool apply_mask);

// Sidecar table of one rollout: per-step action source and action vector.
std::string trace_table(const RolloutTrace& trace);

// Frames of a trace packed into a dataset container (clamped to [0,1]).
VideoDataset trace_to_dataset(const std::vector<RolloutTrace>& traces);

}  // namespace wswm
