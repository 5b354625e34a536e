#include "abmflow/fields.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace abmflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_time(double t) {
    if (!(t >= kTimeLo - kEndpointTol && t <= kTimeHi + kEndpointTol)) {
        throw std::domain_error("time " + std::to_string(t) +
                                " outside [0,1]");
    }
}

}  // namespace

VelocityField::VelocityField(std::string name, int dim, EvalFn eval,
                             std::optional<double> lipschitz_bound,
                             ExactFn exact)
    : name_(std::move(name)),
      dim_(dim),
      eval_(std::move(eval)),
      lipschitz_(lipschitz_bound),
      exact_(std::move(exact)) {
    if (dim_ < 1) {
        throw std::invalid_argument("field dimension must be positive");
    }
    if (!eval_) {
        throw std::invalid_argument("field requires an evaluator");
    }
}

void VelocityField::eval_into(std::span<const double> z, double t,
                              std::span<double> out) const {
    if (z.size() != static_cast<std::size_t>(dim_) || out.size() != z.size()) {
        throw std::invalid_argument("state dimension mismatch for field '" +
                                    name_ + "'");
    }
    check_time(t);
    eval_(z, t, out);
}

Vec VelocityField::operator()(std::span<const double> z, double t) const {
    Vec out(static_cast<std::size_t>(dim_));
    eval_into(z, t, out);
    return out;
}

Vec VelocityField::exact(std::span<const double> z, double t_start,
                         double t_end) const {
    if (!exact_) {
        throw std::logic_error("field '" + name_ +
                               "' has no closed-form solution");
    }
    if (z.size() != static_cast<std::size_t>(dim_)) {
        throw std::invalid_argument("state dimension mismatch for field '" +
                                    name_ + "'");
    }
    check_time(t_start);
    check_time(t_end);
    return exact_(z, t_start, t_end);
}

VelocityField make_constant_field(Vec c) {
    const int dim = static_cast<int>(c.size());
    double lip = 0.0;
    auto eval = [c](std::span<const double>, double, std::span<double> out) {
        for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i];
    };
    auto exact = [c](std::span<const double> z, double t0, double t1) {
        Vec r(z.begin(), z.end());
        for (std::size_t i = 0; i < c.size(); ++i) r[i] += (t1 - t0) * c[i];
        return r;
    };
    return {"constant", dim, std::move(eval), lip, std::move(exact)};
}

VelocityField make_zero_field(int dim) {
    auto eval = [](std::span<const double>, double, std::span<double> out) {
        for (auto& v : out) v = 0.0;
    };
    auto exact = [](std::span<const double> z, double, double) {
        return Vec(z.begin(), z.end());
    };
    return {"zero", dim, std::move(eval), 0.0, std::move(exact)};
}

VelocityField make_decay_field(int dim, double lambda) {
    auto eval = [lambda](std::span<const double> z, double,
                         std::span<double> out) {
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = -lambda * z[i];
    };
    auto exact = [lambda](std::span<const double> z, double t0, double t1) {
        const double s = std::exp(-lambda * (t1 - t0));
        Vec r(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) r[i] = s * z[i];
        return r;
    };
    return {"decay", dim, std::move(eval), std::abs(lambda), std::move(exact)};
}

VelocityField make_rotation_field(double omega) {
    auto eval = [omega](std::span<const double> z, double,
                        std::span<double> out) {
        out[0] = -omega * z[1];
        out[1] = omega * z[0];
    };
    auto exact = [omega](std::span<const double> z, double t0, double t1) {
        const double a = omega * (t1 - t0);
        const double c = std::cos(a);
        const double s = std::sin(a);
        return Vec{c * z[0] - s * z[1], s * z[0] + c * z[1]};
    };
    return {"rotation", 2, std::move(eval), std::abs(omega), std::move(exact)};
}

VelocityField make_time_sine_field(int dim) {
    auto eval = [](std::span<const double> z, double t, std::span<double> out) {
        const double s = std::sin(kTwoPi * t);
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = s * z[i];
    };
    // dZ/dt = sin(2*pi*t) Z  =>  Z(t1) = Z(t0) exp((cos(2*pi*t0) - cos(2*pi*t1)) / (2*pi))
    auto exact = [](std::span<const double> z, double t0, double t1) {
        const double s =
            std::exp((std::cos(kTwoPi * t0) - std::cos(kTwoPi * t1)) / kTwoPi);
        Vec r(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) r[i] = s * z[i];
        return r;
    };
    return {"timesine", dim, std::move(eval), 1.0, std::move(exact)};
}

VelocityField make_surrogate_field(int dim, double a, double b) {
    auto eval = [a, b](std::span<const double> z, double t,
                       std::span<double> out) {
        const double drift = b * std::cos(kTwoPi * t);
        for (std::size_t i = 0; i < z.size(); ++i) {
            out[i] = a * std::tanh(z[i]) + drift;
        }
    };
    return {"surrogate", dim, std::move(eval), std::abs(a), nullptr};
}

VelocityField make_rectified_field(const RectifiedPair& pair) {
    if (pair.z0.size() != pair.z1.size() || pair.z0.empty()) {
        throw std::invalid_argument("rectified pair endpoints disagree");
    }
    Vec c(pair.z0.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = pair.z1[i] - pair.z0[i];
    const int dim = static_cast<int>(c.size());
    auto eval = [c](std::span<const double>, double, std::span<double> out) {
        for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i];
    };
    auto exact = [c](std::span<const double> z, double t0, double t1) {
        Vec r(z.begin(), z.end());
        for (std::size_t i = 0; i < c.size(); ++i) r[i] += (t1 - t0) * c[i];
        return r;
    };
    return {"rectified", dim, std::move(eval), 0.0, std::move(exact)};
}

VelocityField field_by_name(const std::string& name, int dim) {
    if (name == "constant") return make_constant_field(Vec(dim, 2.0));
    if (name == "zero") return make_zero_field(dim);
    if (name == "decay") return make_decay_field(dim);
    if (name == "rotation") return make_rotation_field();
    if (name == "timesine") return make_time_sine_field(dim);
    if (name == "surrogate") return make_surrogate_field(dim);
    if (name == "rectified") {
        RectifiedPair pair{Vec(dim, 0.0), Vec(dim)};
        for (int i = 0; i < dim; ++i) {
            pair.z1[static_cast<std::size_t>(i)] = 1.0 + 0.5 * i;
        }
        return make_rectified_field(pair);
    }
    throw std::invalid_argument("unknown field '" + name + "'");
}

std::vector<std::string> field_catalog() {
    return {"constant", "zero",      "decay",    "rotation",
            "timesine", "surrogate", "rectified"};
}

Vec reference_solve(const VelocityField& field, std::span<const double> z_start,
                    double t_start, double t_end, long oracle_steps) {
    if (oracle_steps < 1) {
        throw std::invalid_argument("oracle_steps must be positive");
    }
    const std::size_t d = z_start.size();
    if (d != static_cast<std::size_t>(field.dim())) {
        throw std::invalid_argument("state dimension mismatch in reference_solve");
    }
    const double h = (t_end - t_start) / static_cast<double>(oracle_steps);
    Vec z(z_start.begin(), z_start.end());
    Vec k1(d), k2(d), k3(d), k4(d), tmp(d);
    for (long i = 0; i < oracle_steps; ++i) {
        const double t = t_start + static_cast<double>(i) * h;
        const double t_mid = t + 0.5 * h;
        const double t_next =
            (i + 1 == oracle_steps) ? t_end : t + h;
        field.eval_into(z, t, k1);
        for (std::size_t j = 0; j < d; ++j) tmp[j] = z[j] + 0.5 * h * k1[j];
        field.eval_into(tmp, t_mid, k2);
        for (std::size_t j = 0; j < d; ++j) tmp[j] = z[j] + 0.5 * h * k2[j];
        field.eval_into(tmp, t_mid, k3);
        for (std::size_t j = 0; j < d; ++j) tmp[j] = z[j] + h * k3[j];
        field.eval_into(tmp, t_next, k4);
        for (std::size_t j = 0; j < d; ++j) {
            z[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    return z;
}

}  // namespace abmflow
