#include "abmflow/solvers.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace abmflow {

namespace {

void check_step_domain(double t, double h) {
    const double t_next = t + h;
    if (!(t >= kTimeLo - kEndpointTol && t <= kTimeHi + kEndpointTol) ||
        !(t_next >= kTimeLo - kEndpointTol && t_next <= kTimeHi + kEndpointTol)) {
        throw std::domain_error("step from t=" + std::to_string(t) + " by h=" +
                                std::to_string(h) + " leaves [0,1]");
    }
}

[[nodiscard]] bool steps_match(double h, double h_prev) {
    return std::abs(h - h_prev) <= 1e-12 * std::abs(h_prev);
}

}  // namespace

// --------------------------------------------------------------------------
// TimeGrid
// --------------------------------------------------------------------------

TimeGrid::TimeGrid(Vec times) : times_(std::move(times)) {
    if (times_.size() < 2) {
        throw std::invalid_argument("grid needs at least two time points");
    }
    const bool ascending = times_.back() > times_.front();
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
        const double d = times_[i + 1] - times_[i];
        if (!(ascending ? d > 0.0 : d < 0.0)) {
            throw std::invalid_argument("grid times must be strictly monotone");
        }
    }
    for (double t : times_) {
        if (!(t >= kTimeLo - kEndpointTol && t <= kTimeHi + kEndpointTol)) {
            throw std::domain_error("grid time outside [0,1]");
        }
    }
    direction_ = ascending ? Direction::Inversion : Direction::Sampling;
}

TimeGrid TimeGrid::uniform(double t_start, double t_end, int n_intervals) {
    if (n_intervals < 1) {
        throw std::invalid_argument("grid needs at least one interval");
    }
    Vec times(static_cast<std::size_t>(n_intervals) + 1);
    for (int i = 0; i <= n_intervals; ++i) {
        times[static_cast<std::size_t>(i)] =
            t_start + (t_end - t_start) * static_cast<double>(i) /
                          static_cast<double>(n_intervals);
    }
    times.front() = t_start;
    times.back() = t_end;
    return TimeGrid(std::move(times));
}

double TimeGrid::step(std::size_t i) const {
    return times_.at(i + 1) - times_.at(i);
}

TimeGrid TimeGrid::reversed() const {
    Vec rev(times_.rbegin(), times_.rend());
    return TimeGrid(std::move(rev));
}

// --------------------------------------------------------------------------
// HistoryPair / SolverRun
// --------------------------------------------------------------------------

HistoryPair::HistoryPair(Entry prev, Entry curr)
    : prev_(std::move(prev)), curr_(std::move(curr)), valid_(true) {}

const HistoryPair::Entry& HistoryPair::prev() const {
    if (!valid_) throw std::logic_error("history not initialized");
    return prev_;
}

const HistoryPair::Entry& HistoryPair::curr() const {
    if (!valid_) throw std::logic_error("history not initialized");
    return curr_;
}

double HistoryPair::step_between() const { return curr().t - prev().t; }

void HistoryPair::advance(Entry next) {
    if (!valid_) throw std::logic_error("history not initialized");
    prev_ = std::move(curr_);
    curr_ = std::move(next);
}

std::size_t SolverRun::steps_taken() const {
    std::size_t n = 0;
    for (const auto& rec : per_step) n += rec.accepted ? 1 : 0;
    return n;
}

std::size_t SolverRun::rejected_steps() const {
    return per_step.size() - steps_taken();
}

SolverKind solver_kind_from_string(const std::string& s) {
    if (s == "euler") return SolverKind::Euler;
    if (s == "midpoint") return SolverKind::Midpoint;
    if (s == "abm" || s == "abm_pece") return SolverKind::AbmPece;
    if (s == "abm_pec") return SolverKind::AbmPec;
    throw std::invalid_argument("unknown solver '" + s + "'");
}

std::string to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::Euler: return "euler";
        case SolverKind::Midpoint: return "midpoint";
        case SolverKind::AbmPece: return "abm_pece";
        case SolverKind::AbmPec: return "abm_pec";
    }
    return "unknown";
}

// --------------------------------------------------------------------------
// Step primitives
// --------------------------------------------------------------------------

Vec euler_step(const VelocityField& field, std::span<const double> z, double t,
               double h) {
    check_step_domain(t, h);
    Vec v = field(z, t);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = z[i] + h * v[i];
    return v;
}

Vec midpoint_step(const VelocityField& field, std::span<const double> z,
                  double t, double h) {
    check_step_domain(t, h);
    const Vec v1 = field(z, t);
    Vec mid(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) mid[i] = z[i] + 0.5 * h * v1[i];
    Vec v2 = field(mid, t + 0.5 * h);
    for (std::size_t i = 0; i < v2.size(); ++i) v2[i] = z[i] + h * v2[i];
    return v2;
}

Rk2Result rk2_init(const VelocityField& field, std::span<const double> z,
                   double t, double h, PcMode mode) {
    check_step_domain(t, h);
    const double t_next = t + h;
    Vec k1 = field(z, t);
    Vec pred(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) pred[i] = z[i] + h * k1[i];
    const Vec k2 = field(pred, t_next);
    Vec next(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        next[i] = z[i] + 0.5 * h * (k1[i] + k2[i]);
    }
    // Pece keeps history at accepted states, so the post-init state is
    // re-evaluated once; Pec keeps predicted-point values and reuses k2.
    Vec v_curr = (mode == PcMode::Pece) ? field(next, t_next) : k2;
    HistoryPair history({t, std::move(k1)}, {t_next, std::move(v_curr)});
    return {std::move(next), std::move(history)};
}

Vec ab2_predict(std::span<const double> z, const HistoryPair& history, double h,
                Ab2Mode mode) {
    if (!history.valid()) {
        throw std::logic_error(
            "predictor history missing: initialize the run with rk2_init");
    }
    const Vec& v_curr = history.curr().v;
    const Vec& v_prev = history.prev().v;
    if (v_curr.size() != z.size() || v_prev.size() != z.size()) {
        throw std::invalid_argument("history dimension mismatch");
    }
    const double r =
        (mode == Ab2Mode::Uniform) ? 0.5 : h / (2.0 * history.step_between());
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("predictor step opposes history direction");
    }
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = z[i] + h * v_curr[i] + h * r * (v_curr[i] - v_prev[i]);
    }
    return out;
}

Am2Result am2_correct(const VelocityField& field, std::span<const double> z,
                      std::span<const double> z_pred, double t_next,
                      std::span<const double> v_curr, double h) {
    if (z_pred.size() != z.size() || v_curr.size() != z.size()) {
        throw std::invalid_argument("corrector dimension mismatch");
    }
    Vec v_pred = field(z_pred, t_next);
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = z[i] + 0.5 * h * (v_pred[i] + v_curr[i]);
    }
    return {std::move(out), std::move(v_pred)};
}

// --------------------------------------------------------------------------
// Drivers
// --------------------------------------------------------------------------

namespace detail {

VelocityField counted_view(const VelocityField& field, long& counter) {
    auto eval = [&field, &counter](std::span<const double> z, double t,
                                   std::span<double> out) {
        ++counter;
        field.eval_into(z, t, out);
    };
    return {field.name(), field.dim(), std::move(eval),
            field.lipschitz_bound(), nullptr};
}

}  // namespace detail

namespace {

double l2_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

SolverRun abm_solve(const VelocityField& field, std::span<const double> z_start,
                    const TimeGrid& grid, PcMode mode) {
    if (grid.n_intervals() < 2) {
        throw std::invalid_argument("the two-step method needs >= 2 intervals");
    }
    if (z_start.size() != static_cast<std::size_t>(field.dim())) {
        throw std::invalid_argument("state dimension mismatch");
    }
    SolverRun run;
    const VelocityField counted = detail::counted_view(field, run.nfe);

    Vec z(z_start.begin(), z_start.end());
    run.trajectory.push_back({grid.time(0), z});

    auto [z_next, history] = rk2_init(counted, z, grid.time(0), grid.step(0), mode);
    z = std::move(z_next);
    run.trajectory.push_back({grid.time(1), z});
    run.per_step.push_back({grid.time(0), grid.time(1), grid.step(0),
                            std::nullopt, std::nullopt, std::nullopt, true,
                            false});

    for (std::size_t i = 1; i < grid.n_intervals(); ++i) {
        const double h = grid.step(i);
        const double t_next = grid.time(i + 1);
        const Ab2Mode ab_mode = steps_match(h, history.step_between())
                                    ? Ab2Mode::Uniform
                                    : Ab2Mode::Variable;
        Vec z_pred = ab2_predict(z, history, h, ab_mode);
        auto [z_corr, v_pred] =
            am2_correct(counted, z, z_pred, t_next, history.curr().v, h);
        const double discrepancy = l2_distance(z_pred, z_corr);

        if (mode == PcMode::Pece) {
            history.advance({t_next, counted(z_corr, t_next)});
        } else {
            history.advance({t_next, std::move(v_pred)});
        }
        run.per_step.push_back({grid.time(i), t_next, h, std::move(z_pred),
                                discrepancy, std::nullopt, true, false});
        z = std::move(z_corr);
        run.trajectory.push_back({t_next, z});
    }
    return run;
}

SolverRun solve_grid(const VelocityField& field, std::span<const double> z_start,
                     const TimeGrid& grid, SolverKind kind) {
    if (kind == SolverKind::AbmPece || kind == SolverKind::AbmPec) {
        return abm_solve(field, z_start, grid,
                         kind == SolverKind::AbmPece ? PcMode::Pece
                                                     : PcMode::Pec);
    }
    if (z_start.size() != static_cast<std::size_t>(field.dim())) {
        throw std::invalid_argument("state dimension mismatch");
    }
    SolverRun run;
    const VelocityField counted = detail::counted_view(field, run.nfe);
    Vec z(z_start.begin(), z_start.end());
    run.trajectory.push_back({grid.time(0), z});
    for (std::size_t i = 0; i < grid.n_intervals(); ++i) {
        const double t = grid.time(i);
        const double h = grid.step(i);
        z = (kind == SolverKind::Euler) ? euler_step(counted, z, t, h)
                                        : midpoint_step(counted, z, t, h);
        run.trajectory.push_back({grid.time(i + 1), z});
        run.per_step.push_back({t, grid.time(i + 1), h, std::nullopt,
                                std::nullopt, std::nullopt, true, false});
    }
    return run;
}

double local_truncation_probe(const VelocityField& field, double t, double h) {
    const Vec ones(static_cast<std::size_t>(field.dim()), 1.0);
    return local_truncation_probe(field, t, h, ones);
}

double local_truncation_probe(const VelocityField& field, double t, double h,
                              std::span<const double> z_at_t) {
    if (!field.has_exact()) {
        throw std::logic_error("local truncation probe needs a field with a "
                               "closed-form solution");
    }
    check_step_domain(t, -h);
    check_step_domain(t, h);

    const Vec z_prev = field.exact(z_at_t, t, t - h);
    const Vec z_curr(z_at_t.begin(), z_at_t.end());
    HistoryPair history({t - h, field(z_prev, t - h)}, {t, field(z_curr, t)});

    const Vec z_pred = ab2_predict(z_curr, history, h, Ab2Mode::Uniform);
    const auto corrected =
        am2_correct(field, z_curr, z_pred, t + h, history.curr().v, h);
    const Vec z_true = field.exact(z_at_t, t, t + h);
    return l2_distance(corrected.state, z_true);
}

RoundTrip invert_then_reconstruct(const VelocityField& field,
                                  std::span<const double> z_data,
                                  const TimeGrid& grid, SolverKind kind) {
    if (grid.direction() != Direction::Inversion) {
        throw std::invalid_argument(
            "round trip expects a grid in the inversion direction (0 -> 1)");
    }
    const SolverRun up = solve_grid(field, z_data, grid, kind);
    const SolverRun down =
        solve_grid(field, up.terminal_state(), grid.reversed(), kind);
    return {up.terminal_state(), down.terminal_state(), up.nfe + down.nfe};
}

}  // namespace abmflow
