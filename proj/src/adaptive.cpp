#include "abmflow/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace abmflow {

namespace {

constexpr double kSnapTol = 1e-12;
constexpr int kMaxRetriesPerStep = 32;

}  // namespace

StepController StepController::resolved(double h_base) const {
    StepController rc = *this;
    rc.h_init = (h_init > 0.0) ? h_init : h_base;
    rc.h_min = (h_min > 0.0) ? h_min : rc.h_init;
    rc.h_max = (h_max > 0.0) ? h_max : 4.0 * rc.h_init;
    if (!(rc.epsilon > 0.0)) {
        throw std::invalid_argument("tolerance epsilon must be positive");
    }
    if (rc.order_p != 2) {
        throw std::invalid_argument(
            "the controller is calibrated for the second-order method");
    }
    if (rc.h_min > rc.h_max) {
        throw std::invalid_argument("step clamps require h_min <= h_max");
    }
    if (rc.warmup_steps < 0 || rc.cooldown_steps < 0) {
        throw std::invalid_argument("warmup/cooldown must be nonnegative");
    }
    return rc;
}

double error_estimate(std::span<const double> z_pred,
                      std::span<const double> z_corr, ErrorNorm norm) {
    if (z_pred.size() != z_corr.size() || z_pred.empty()) {
        throw std::invalid_argument("error estimate needs states of one size");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < z_pred.size(); ++i) {
        const double d = z_pred[i] - z_corr[i];
        s += d * d;
    }
    const double l2 = std::sqrt(s);
    return norm == ErrorNorm::L2Total
               ? l2
               : l2 / std::sqrt(static_cast<double>(z_pred.size()));
}

double next_step_size(double h, double e, const StepController& ctrl) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("current step size must be positive");
    }
    if (!(ctrl.h_min > 0.0 && ctrl.h_max > 0.0)) {
        throw std::logic_error("controller step clamps are not resolved");
    }
    if (e <= 0.0) return ctrl.h_max;
    const double exponent = 1.0 / static_cast<double>(ctrl.order_p + 1);
    const double proposal = h * std::pow(ctrl.epsilon / e, exponent);
    return std::clamp(proposal, ctrl.h_min, ctrl.h_max);
}

SolverRun adaptive_abm_solve(const VelocityField& field,
                             std::span<const double> z_start, double t_start,
                             double t_end, const StepController& ctrl,
                             int nominal_steps, PcMode mode) {
    if (z_start.size() != static_cast<std::size_t>(field.dim())) {
        throw std::invalid_argument("state dimension mismatch");
    }
    if (nominal_steps < ctrl.warmup_steps + ctrl.cooldown_steps + 1) {
        throw std::invalid_argument(
            "nominal_steps must exceed warmup_steps + cooldown_steps");
    }
    const double span = t_end - t_start;
    if (std::abs(span) <= kSnapTol) {
        throw std::invalid_argument("empty integration span");
    }
    const double dir = (span > 0.0) ? 1.0 : -1.0;
    const StepController rc =
        ctrl.resolved(std::abs(span) / static_cast<double>(nominal_steps));
    const double cooldown_span =
        static_cast<double>(rc.cooldown_steps) * rc.h_init;

    SolverRun run;
    const VelocityField counted = detail::counted_view(field, run.nfe);

    Vec z(z_start.begin(), z_start.end());
    double t = t_start;
    run.trajectory.push_back({t, z});

    // First step: RK2 bootstrap at the nominal size.
    double h_mag = std::min(rc.h_init, std::abs(t_end - t));
    double t_next = (std::abs(t_end - t) - h_mag <= kSnapTol) ? t_end
                                                              : t + dir * h_mag;
    auto [z_init, history] = rk2_init(counted, z, t, t_next - t, mode);
    run.per_step.push_back({t, t_next, t_next - t, std::nullopt, std::nullopt,
                            rc.h_init, true, rc.warmup_steps > 0});
    z = std::move(z_init);
    t = t_next;
    run.trajectory.push_back({t, z});

    int step_index = 1;
    double h_last = h_mag;
    std::optional<double> last_e;

    while (std::abs(t_end - t) > kSnapTol) {
        const double remaining = std::abs(t_end - t);
        const bool in_warmup = step_index < rc.warmup_steps;
        const bool in_cooldown = remaining <= cooldown_span + kSnapTol;
        const bool frozen = in_warmup || in_cooldown;
        if (frozen) {
            h_mag = std::min(rc.h_init, remaining);
        } else {
            const double proposal =
                last_e ? next_step_size(h_last, *last_e, rc) : rc.h_init;
            // Never step into the reserved cooldown span, but never below
            // h_min either; a small overshoot shortens the cooldown instead.
            const double cap = std::max(remaining - cooldown_span, rc.h_min);
            h_mag = std::min(proposal, cap);
        }

        for (int attempt = 0;; ++attempt) {
            t_next = (remaining - h_mag <= kSnapTol) ? t_end : t + dir * h_mag;
            const double h = t_next - t;
            const Ab2Mode ab_mode =
                std::abs(h - history.step_between()) <=
                        1e-12 * std::abs(history.step_between())
                    ? Ab2Mode::Uniform
                    : Ab2Mode::Variable;
            Vec z_pred = ab2_predict(z, history, h, ab_mode);
            auto [z_corr, v_pred] =
                am2_correct(counted, z, z_pred, t_next, history.curr().v, h);
            const double e = error_estimate(z_pred, z_corr, rc.error_norm);
            const double h_next = next_step_size(std::abs(h), e, rc);

            const bool reject = !frozen &&
                                rc.rejection == RejectionPolicy::RejectRetry &&
                                e > rc.epsilon &&
                                h_mag > rc.h_min * (1.0 + 1e-12) &&
                                attempt < kMaxRetriesPerStep;
            if (reject) {
                run.per_step.push_back({t, t_next, h, std::move(z_pred), e,
                                        h_next, false, false});
                h_mag = std::min(h_next,
                                 std::max(remaining - cooldown_span, rc.h_min));
                continue;
            }

            if (mode == PcMode::Pece) {
                history.advance({t_next, counted(z_corr, t_next)});
            } else {
                history.advance({t_next, std::move(v_pred)});
            }
            run.per_step.push_back({t, t_next, h, std::move(z_pred), e,
                                    frozen ? rc.h_init : h_next, true, frozen});
            z = std::move(z_corr);
            t = t_next;
            run.trajectory.push_back({t, z});
            last_e = e;
            h_last = std::abs(h);
            ++step_index;
            break;
        }
    }
    return run;
}

AdaptiveRoundTrip adaptive_round_trip(const VelocityField& field,
                                      std::span<const double> z_data,
                                      const StepController& ctrl,
                                      int nominal_steps, PcMode mode) {
    const SolverRun up =
        adaptive_abm_solve(field, z_data, 0.0, 1.0, ctrl, nominal_steps, mode);
    const SolverRun down = adaptive_abm_solve(field, up.terminal_state(), 1.0,
                                              0.0, ctrl, nominal_steps, mode);
    return {up.terminal_state(), down.terminal_state(), up.nfe + down.nfe,
            up.steps_taken() + down.steps_taken(),
            up.rejected_steps() + down.rejected_steps()};
}

}  // namespace abmflow
