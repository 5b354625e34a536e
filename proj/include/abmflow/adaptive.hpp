#pragma once

#include <span>

#include "abmflow/fields.hpp"
#include "abmflow/solvers.hpp"

namespace abmflow {

/// What to do when a step's error estimate exceeds the tolerance.
/// AcceptAlways matches the plain error-controlled update rule, which only
/// sets the NEXT step; RejectRetry additionally redoes the offending step at
/// the reduced size (rejected attempts still cost evaluations).
enum class RejectionPolicy { AcceptAlways, RejectRetry };

enum class ErrorNorm { L2Total, L2Rms };

/// Tunables of the error-controlled step-size rule
/// h_next = h * (epsilon / E)^(1/(p+1)), p = 2, clamped to [h_min, h_max].
///
/// Step fields left at zero are derived when a run starts: h_init from the
/// nominal grid, h_min = h_init, h_max = 4 * h_init. The first warmup_steps
/// steps and the terminal cooldown region (remaining span <=
/// cooldown_steps * h_init) are frozen at h_init.
struct StepController {
    double epsilon = 0.1;
    int order_p = 2;
    double h_init = 0.0;
    double h_min = 0.0;
    double h_max = 0.0;
    int warmup_steps = 5;
    int cooldown_steps = 5;
    RejectionPolicy rejection = RejectionPolicy::AcceptAlways;
    ErrorNorm error_norm = ErrorNorm::L2Total;

    /// Copy with h_init/h_min/h_max filled in from a base step.
    [[nodiscard]] StepController resolved(double h_base) const;
};

/// Discrepancy between the predictor and corrector states.
/// L2Total is the plain Euclidean norm; L2Rms divides by sqrt(dim) so a
/// tolerance can be carried across state dimensions.
[[nodiscard]] double error_estimate(std::span<const double> z_pred,
                                    std::span<const double> z_corr,
                                    ErrorNorm norm = ErrorNorm::L2Total);

/// Error-controlled update rule for the next step size. E = 0 saturates at
/// the h_max clamp. Requires a resolved controller and h > 0.
[[nodiscard]] double next_step_size(double h, double e,
                                    const StepController& ctrl);

/// ABM run with per-step error-controlled step sizes.
///
/// h_init = |t_end - t_start| / nominal_steps. The first warmup_steps steps
/// (the first being the RK2 bootstrap) and the terminal cooldown region run
/// frozen at h_init; adjustable steps are clamped to [h_min, h_max] and
/// capped so they do not eat into the reserved cooldown span. The final
/// step is truncated so the terminal time lands on t_end within 1e-12.
/// per_step records every decision, including rejected attempts.
[[nodiscard]] SolverRun adaptive_abm_solve(const VelocityField& field,
                                           std::span<const double> z_start,
                                           double t_start, double t_end,
                                           const StepController& ctrl,
                                           int nominal_steps,
                                           PcMode mode = PcMode::Pece);

struct AdaptiveRoundTrip {
    Vec z_noise;
    Vec z_recon;
    long total_nfe = 0;
    std::size_t steps_taken = 0;
    std::size_t rejected_steps = 0;
};

/// Adaptive inversion 0 -> 1 followed by adaptive reconstruction 1 -> 0.
[[nodiscard]] AdaptiveRoundTrip adaptive_round_trip(
    const VelocityField& field, std::span<const double> z_data,
    const StepController& ctrl, int nominal_steps, PcMode mode = PcMode::Pece);

}  // namespace abmflow
