#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace abmflow {

using Vec = std::vector<double>;

/// Time domain for every field. Evaluations outside [0,1] (beyond a small
/// endpoint slack for accumulated rounding) are rejected, not extrapolated.
inline constexpr double kTimeLo = 0.0;
inline constexpr double kTimeHi = 1.0;
inline constexpr double kEndpointTol = 1e-12;

/// A pure, deterministic velocity field v(z, t) on t in [0,1].
///
/// Fields are immutable after construction and safe to evaluate from any
/// number of concurrent runs. Evaluation does not count function calls;
/// accounting is the solver's job.
class VelocityField {
public:
    using EvalFn = std::function<void(std::span<const double> z, double t,
                                      std::span<double> out)>;
    /// Closed-form flow map: exact(z, t0, t1) integrates the ODE from t0 to
    /// t1 (either direction) starting at state z.
    using ExactFn = std::function<Vec(std::span<const double> z, double t0,
                                      double t1)>;

    VelocityField(std::string name, int dim, EvalFn eval,
                  std::optional<double> lipschitz_bound = std::nullopt,
                  ExactFn exact = nullptr);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] std::optional<double> lipschitz_bound() const noexcept {
        return lipschitz_;
    }
    [[nodiscard]] bool has_exact() const noexcept {
        return static_cast<bool>(exact_);
    }

    /// Evaluate v(z, t). Throws std::invalid_argument on a dimension
    /// mismatch and std::domain_error when t leaves [0,1] by more than
    /// kEndpointTol.
    [[nodiscard]] Vec operator()(std::span<const double> z, double t) const;
    [[nodiscard]] Vec operator()(std::initializer_list<double> z,
                                 double t) const {
        return (*this)(std::span<const double>(z.begin(), z.size()), t);
    }

    /// Same checks as operator(), writing into a caller-provided buffer.
    void eval_into(std::span<const double> z, double t,
                   std::span<double> out) const;

    /// Closed-form solution from (z, t_start) to t_end.
    /// Throws std::logic_error when the field has none.
    [[nodiscard]] Vec exact(std::span<const double> z, double t_start,
                            double t_end) const;

private:
    std::string name_;
    int dim_;
    EvalFn eval_;
    std::optional<double> lipschitz_;
    ExactFn exact_;
};

/// Endpoint pair of a straight-line trajectory; induces the constant
/// velocity z1 - z0.
struct RectifiedPair {
    Vec z0;
    Vec z1;
};

// Built-in catalog. Parameter defaults are artifact configuration chosen so
// every field is non-stiff on the default grids.
[[nodiscard]] VelocityField make_constant_field(Vec c);
[[nodiscard]] VelocityField make_zero_field(int dim);
[[nodiscard]] VelocityField make_decay_field(int dim, double lambda = 1.0);
[[nodiscard]] VelocityField make_rotation_field(double omega = 1.0);
[[nodiscard]] VelocityField make_time_sine_field(int dim);
/// Smooth nonlinear field v(z,t) = a*tanh(z) + b*cos(2*pi*t); no closed
/// form, reference_solve is its ground truth.
[[nodiscard]] VelocityField make_surrogate_field(int dim, double a = 0.5,
                                                 double b = 0.3);
[[nodiscard]] VelocityField make_rectified_field(const RectifiedPair& pair);

/// Catalog lookup by name: constant, zero, decay, rotation, timesine,
/// surrogate, rectified. Throws std::invalid_argument on unknown names.
[[nodiscard]] VelocityField field_by_name(const std::string& name, int dim);
[[nodiscard]] std::vector<std::string> field_catalog();

/// High-accuracy reference via classical fourth-order one-step integration
/// on a uniform grid. Serves as ground truth for fields without a closed
/// form; callers should size oracle_steps at least 1000x the step count of
/// whatever run it certifies.
[[nodiscard]] Vec reference_solve(const VelocityField& field,
                                  std::span<const double> z_start,
                                  double t_start, double t_end,
                                  long oracle_steps);

}  // namespace abmflow
