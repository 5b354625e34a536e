#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abmflow/fields.hpp"

namespace abmflow {

/// Integration direction over t in [0,1]: inversion runs 0 -> 1, sampling
/// runs 1 -> 0. Both use the same signed-step update; the sign of h encodes
/// the direction.
enum class Direction { Inversion, Sampling };

/// Strictly monotone schedule of integration times.
class TimeGrid {
public:
    explicit TimeGrid(Vec times);

    /// Equispaced grid with both endpoints exact.
    [[nodiscard]] static TimeGrid uniform(double t_start, double t_end,
                                          int n_intervals);

    [[nodiscard]] Direction direction() const noexcept { return direction_; }
    [[nodiscard]] std::size_t n_points() const noexcept { return times_.size(); }
    [[nodiscard]] std::size_t n_intervals() const noexcept {
        return times_.size() - 1;
    }
    [[nodiscard]] double time(std::size_t i) const { return times_.at(i); }
    [[nodiscard]] double t_start() const noexcept { return times_.front(); }
    [[nodiscard]] double t_end() const noexcept { return times_.back(); }
    /// Signed step h_i = t_{i+1} - t_i.
    [[nodiscard]] double step(std::size_t i) const;
    [[nodiscard]] const Vec& times() const noexcept { return times_; }
    [[nodiscard]] TimeGrid reversed() const;

private:
    Vec times_;
    Direction direction_;
};

/// Exactly two retained (time, velocity) samples; all a two-step method may
/// keep. prev precedes curr in integration order.
class HistoryPair {
public:
    struct Entry {
        double t = 0.0;
        Vec v;
    };

    HistoryPair() = default;
    HistoryPair(Entry prev, Entry curr);

    [[nodiscard]] bool valid() const noexcept { return valid_; }
    [[nodiscard]] const Entry& prev() const;
    [[nodiscard]] const Entry& curr() const;
    /// Signed step between the retained samples, curr.t - prev.t.
    [[nodiscard]] double step_between() const;
    /// Shift: prev <- curr, curr <- next.
    void advance(Entry next);

private:
    Entry prev_;
    Entry curr_;
    bool valid_ = false;
};

/// Per-step record kept by every driver.
struct StepRecord {
    double t_from = 0.0;
    double t_to = 0.0;
    double h = 0.0;  // signed
    std::optional<Vec> predictor_state;
    std::optional<double> error_estimate;  // predictor-corrector discrepancy
    std::optional<double> next_h;          // adaptive proposal for the next step
    bool accepted = true;
    bool frozen = false;  // warmup/cooldown step of the adaptive driver
};

/// Trajectory, per-step records and the exact count of velocity-field
/// evaluations made by the run.
struct SolverRun {
    struct Point {
        double t = 0.0;
        Vec z;
    };

    std::vector<Point> trajectory;
    std::vector<StepRecord> per_step;
    long nfe = 0;

    [[nodiscard]] const Vec& terminal_state() const {
        return trajectory.back().z;
    }
    [[nodiscard]] double terminal_time() const { return trajectory.back().t; }
    [[nodiscard]] std::size_t steps_taken() const;      // accepted steps
    [[nodiscard]] std::size_t rejected_steps() const;
};

enum class PcMode { Pece, Pec };
enum class Ab2Mode { Uniform, Variable };
enum class SolverKind { Euler, Midpoint, AbmPece, AbmPec };

[[nodiscard]] SolverKind solver_kind_from_string(const std::string& s);
[[nodiscard]] std::string to_string(SolverKind kind);

// ---------------------------------------------------------------------------
// Single-step building blocks. All take a signed step h; both t and t+h must
// stay inside [0,1] up to kEndpointTol.
// ---------------------------------------------------------------------------

/// Forward Euler: z + h v(z,t). One evaluation.
[[nodiscard]] Vec euler_step(const VelocityField& field,
                             std::span<const double> z, double t, double h);

/// Classical midpoint rule. Two evaluations.
[[nodiscard]] Vec midpoint_step(const VelocityField& field,
                                std::span<const double> z, double t, double h);

struct Rk2Result {
    Vec state;
    HistoryPair history;
};

/// Heun-type RK2 bootstrap for the first interval of a multistep run.
/// k1 = v(z,t), k2 = v(z + h k1, t + h), z' = z + (h/2)(k1 + k2).
/// In Pece mode the history's current entry is re-evaluated at the
/// accepted state z' (three evaluations total); in Pec mode it reuses k2
/// (two evaluations).
[[nodiscard]] Rk2Result rk2_init(const VelocityField& field,
                                 std::span<const double> z, double t, double h,
                                 PcMode mode = PcMode::Pece);

/// Two-step Adams-Bashforth extrapolation. No evaluations: reuses history.
///
/// Uniform mode applies z + (h/2)(3 v_curr - v_prev). Variable mode applies
/// z + h[(1 + r) v_curr - r v_prev] with r = h / (2 h_prev), which reduces
/// to the uniform coefficients bit-for-bit when h == h_prev. Both are
/// computed as z + h v_curr + h r (v_curr - v_prev) so constant fields are
/// advanced exactly.
[[nodiscard]] Vec ab2_predict(std::span<const double> z,
                              const HistoryPair& history, double h,
                              Ab2Mode mode);

struct Am2Result {
    Vec state;
    Vec v_predicted;  // velocity at the predicted point, reusable as history
};

/// Adams-Moulton trapezoidal correction through the predicted state:
/// z + (h/2)(v(z_pred, t_next) + v_curr). One evaluation.
[[nodiscard]] Am2Result am2_correct(const VelocityField& field,
                                    std::span<const double> z,
                                    std::span<const double> z_pred,
                                    double t_next,
                                    std::span<const double> v_curr, double h);

// ---------------------------------------------------------------------------
// Whole-grid drivers.
// ---------------------------------------------------------------------------

/// Predictor-corrector driver: RK2 on the first interval, then
/// Adams-Bashforth prediction and Adams-Moulton correction per interval.
/// Pece re-evaluates the field at each corrected state and keeps that as
/// history (2 evaluations per step after init); Pec keeps the predicted-point
/// evaluation (1 per step). Consecutive intervals differing by more than
/// 1e-12 relative switch the predictor to variable coefficients.
[[nodiscard]] SolverRun abm_solve(const VelocityField& field,
                                  std::span<const double> z_start,
                                  const TimeGrid& grid,
                                  PcMode mode = PcMode::Pece);

/// Fixed-grid run with the chosen scheme (Euler / midpoint / ABM).
[[nodiscard]] SolverRun solve_grid(const VelocityField& field,
                                   std::span<const double> z_start,
                                   const TimeGrid& grid, SolverKind kind);

/// One predict+correct step seeded with exact history, measured against the
/// exact solution at t+h. The trajectory is anchored so the exact solution
/// passes through z_at_t at time t (a vector of ones when omitted).
/// Requires a field with a closed form and t-h, t+h inside [0,1].
[[nodiscard]] double local_truncation_probe(const VelocityField& field,
                                            double t, double h);
[[nodiscard]] double local_truncation_probe(const VelocityField& field,
                                            double t, double h,
                                            std::span<const double> z_at_t);

struct RoundTrip {
    Vec z_noise;
    Vec z_recon;
    long total_nfe = 0;
};

/// Integrate 0 -> 1 along +v (inversion), then back 1 -> 0 on the reversed
/// grid (reconstruction). The grid must run in the inversion direction.
[[nodiscard]] RoundTrip invert_then_reconstruct(const VelocityField& field,
                                                std::span<const double> z_data,
                                                const TimeGrid& grid,
                                                SolverKind kind);

namespace detail {

/// Counting view over a field: forwards evaluations and increments an
/// external counter. Drivers route every call through one of these so
/// SolverRun.nfe is exact by construction.
[[nodiscard]] VelocityField counted_view(const VelocityField& field,
                                         long& counter);

}  // namespace detail

}  // namespace abmflow
