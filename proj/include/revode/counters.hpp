#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace revode {

// Deterministic work and memory instrumentation, shared by all gradient
// engines so their cost profiles are directly comparable.
//
// Units: steps_* count solver time steps (one coupled step of the scheme);
// psi_evals counts base-solver step evaluations (a coupled step costs two);
// stored_state_peak counts retained d-dimensional state vectors, so one
// stored (y, z) snapshot contributes two — the convention under which the
// reversible engine's live pair reads as the 2-checkpoint equivalent.
struct SolveCounters {
    std::int64_t steps_forward = 0;
    std::int64_t steps_backward = 0;
    std::int64_t psi_evals = 0;
    std::int64_t vjp_evals = 0;
    std::int64_t stored_state_peak = 0;
    std::int64_t checkpoint_slots_peak = 0;  // snapshot slots, checkpointed engine only
    std::int64_t live_adjoint_vectors_peak = 0;
    std::int64_t accepted_steps = 0;
    std::int64_t rejected_steps = 0;

    nlohmann::json to_json() const {
        return {{"steps_forward", steps_forward},
                {"steps_backward", steps_backward},
                {"psi_evals", psi_evals},
                {"vjp_evals", vjp_evals},
                {"stored_state_peak", stored_state_peak},
                {"checkpoint_slots_peak", checkpoint_slots_peak},
                {"live_adjoint_vectors_peak", live_adjoint_vectors_peak},
                {"accepted_steps", accepted_steps},
                {"rejected_steps", rejected_steps}};
    }
};

}  // namespace revode
