#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "abmflow/adaptive.hpp"
#include "abmflow/fields.hpp"
#include "abmflow/mgfi.hpp"
#include "abmflow/solvers.hpp"

namespace abmflow {

/// Slope acceptance windows for the empirical order checks. The asymptotic
/// orders are exact; the windows absorb finite-h effects.
struct OrderWindows {
    double first_lo = 0.9;
    double first_hi = 1.1;
    double second_lo = 1.8;
    double second_hi = 2.2;
    double local_lo = 2.7;
    double local_hi = 3.3;
};

/// One study invocation. A fixed config (seed included) reproduces its
/// report files byte for byte.
struct StudyConfig {
    std::string field_name = "decay";
    SolverKind solver = SolverKind::AbmPece;
    std::vector<int> steps_list = {10, 20, 40, 80};
    double epsilon = 0.1;
    std::vector<double> epsilon_list = {0.1, 0.01, 0.001, 0.0001};
    PcMode mode = PcMode::Pece;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";

    int dim = 4;
    int nominal_steps = 15;
    int warmup_steps = 5;
    int cooldown_steps = 5;
    RejectionPolicy rejection = RejectionPolicy::AcceptAlways;
    ErrorNorm error_norm = ErrorNorm::L2Total;

    double tau = kDefaultTau;
    double perturbation = 2.0;
    int positions = 64;
    int channels = 16;

    bool plot = false;
    OrderWindows windows;

    void validate() const;
};

/// Parse "key = value" / "key value" lines; '#' starts a comment.
[[nodiscard]] std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path);

/// Apply one configuration key to cfg. Unknown keys or malformed values
/// throw std::invalid_argument. Shared by the config file and CLI override
/// paths so precedence is purely the order of application.
void apply_config_key(StudyConfig& cfg, const std::string& key,
                      const std::string& value);

/// Ordinary least squares on (log h, log error); points with error <= 1e-14
/// are dropped first. Requires at least 3 surviving points.
[[nodiscard]] std::pair<double, double> fit_loglog_slope(
    const std::vector<std::pair<double, double>>& points);

struct ConvergenceRow {
    int steps = 0;
    double h = 0.0;
    double terminal_error = 0.0;
    long nfe = 0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    std::optional<double> fitted_slope;
    std::optional<double> fitted_intercept;
    bool exact = false;  // every error under 1e-12; the fit is skipped
};

struct RoundTripRow {
    int steps = 0;
    double recon_error = 0.0;
    double psnr_proxy = 0.0;
    long nfe = 0;
};

struct RoundTripReport {
    std::vector<RoundTripRow> rows;
    std::optional<double> fitted_slope;
    bool exact = false;
};

struct AdaptiveRow {
    double epsilon = 0.0;
    long nfe = 0;
    double terminal_error = 0.0;
    long steps_taken = 0;
    long rejections = 0;
};

struct AdaptiveReport {
    std::vector<AdaptiveRow> rows;
};

struct MgfiReport {
    double mask_density = 0.0;
    std::vector<std::pair<double, double>> tau_sweep;           // (tau, density)
    std::vector<std::pair<double, double>> perturbation_sweep;  // (mag, density)
};

/// Deterministic study start state: entries uniform in [0.5, 1.5).
[[nodiscard]] Vec initial_state(int dim, std::uint64_t seed);

/// Ground truth at t_end for a field, exact when available, otherwise the
/// reference oracle sized for the largest step count it certifies.
[[nodiscard]] Vec ground_truth(const VelocityField& field,
                               std::span<const double> z0, double t_start,
                               double t_end, int max_steps);

// Studies. Each writes <name>.csv and summary.json (plus plot.svg when
// cfg.plot) into cfg.output_dir via write-temp-then-rename, and returns the
// in-memory report.
ConvergenceReport run_convergence_study(const StudyConfig& cfg);
RoundTripReport run_roundtrip_study(const StudyConfig& cfg);
AdaptiveReport run_adaptive_study(const StudyConfig& cfg);
MgfiReport run_mgfi_demo(const StudyConfig& cfg);

/// Write-temp-then-rename so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path,
                  const std::string& content);

}  // namespace abmflow
