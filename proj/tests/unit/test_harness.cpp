#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "abmflow/harness.hpp"

using namespace abmflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "abmflow_tests" / name;
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("loglog fit recovers synthetic power laws") {
    SUBCASE("error = h^2 gives slope 2") {
        const auto [slope, intercept] = fit_loglog_slope(
            {{0.1, 0.01}, {0.05, 0.0025}, {0.025, 0.000625}, {0.0125, 0.00015625}});
        CHECK(std::abs(slope - 2.0) <= 1e-9);
        CHECK(std::abs(intercept) <= 1e-9);
    }
    SUBCASE("error = 3h gives slope 1, intercept log 3") {
        const auto [slope, intercept] =
            fit_loglog_slope({{1.0, 3.0}, {0.5, 1.5}, {0.25, 0.75}});
        CHECK(slope == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    }
    SUBCASE("two points are insufficient") {
        CHECK_THROWS_AS((void)fit_loglog_slope({{0.1, 0.01}, {0.05, 0.0025}}),
                        std::invalid_argument);
    }
    SUBCASE("points at the error floor are dropped before counting") {
        CHECK_THROWS_AS((void)fit_loglog_slope(
                            {{0.1, 1e-16}, {0.05, 1e-16}, {0.025, 1e-16}}),
                        std::invalid_argument);
    }
}

TEST_CASE("config keys parse and validate") {
    StudyConfig cfg;
    apply_config_key(cfg, "field", "surrogate");
    apply_config_key(cfg, "solver", "euler");
    apply_config_key(cfg, "steps", "8,16,32");
    apply_config_key(cfg, "epsilon", "0.05");
    apply_config_key(cfg, "mode", "pec");
    apply_config_key(cfg, "tau", "0.4");
    apply_config_key(cfg, "seed", "99");
    apply_config_key(cfg, "dim", "6");
    CHECK(cfg.field_name == "surrogate");
    CHECK(cfg.solver == SolverKind::Euler);
    CHECK(cfg.steps_list == std::vector<int>{8, 16, 32});
    CHECK(cfg.epsilon == 0.05);
    CHECK(cfg.mode == PcMode::Pec);
    CHECK(cfg.seed == 99);
    cfg.validate();

    CHECK_THROWS_AS(apply_config_key(cfg, "nosuchkey", "1"),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_config_key(cfg, "solver", "rk9"),
                    std::invalid_argument);

    StudyConfig bad;
    bad.steps_list = {10, 10};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.steps_list = {3, 10};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("config file overrides defaults, CLI overrides the file") {
    const fs::path dir = fresh_dir("config");
    fs::create_directories(dir);
    const fs::path file = dir / "study.cfg";
    {
        std::ofstream out(file);
        out << "# study configuration\n";
        out << "field = rotation\n";
        out << "steps 6,12,24   # inline comment\n";
        out << "seed = 5\n";
    }
    StudyConfig cfg;
    for (const auto& [k, v] : parse_config_file(file)) {
        apply_config_key(cfg, k, v);
    }
    CHECK(cfg.field_name == "rotation");
    CHECK(cfg.steps_list == std::vector<int>{6, 12, 24});
    CHECK(cfg.seed == 5);

    // the CLI layer applies after the file and wins
    apply_config_key(cfg, "field", "decay");
    CHECK(cfg.field_name == "decay");

    CHECK_THROWS_AS((void)parse_config_file(dir / "missing.cfg"),
                    std::runtime_error);
}

TEST_CASE("initial state is deterministic in the seed") {
    CHECK(initial_state(4, 7) == initial_state(4, 7));
    CHECK(initial_state(4, 7) != initial_state(4, 8));
    for (double x : initial_state(16, 3)) {
        CHECK(x >= 0.5);
        CHECK(x < 1.5);
    }
}

TEST_CASE("convergence study fits the expected orders") {
    StudyConfig cfg;
    cfg.field_name = "decay";
    cfg.steps_list = {10, 20, 40, 80};
    cfg.output_dir = fresh_dir("conv_decay");

    SUBCASE("abm is second order") {
        cfg.solver = SolverKind::AbmPece;
        const auto report = run_convergence_study(cfg);
        REQUIRE(report.fitted_slope.has_value());
        CHECK(*report.fitted_slope > 1.8);
        CHECK(*report.fitted_slope < 2.2);
        // row bookkeeping: pece evaluation formula and grid spacing
        for (const auto& row : report.rows) {
            CHECK(row.nfe == 3 + 2 * (row.steps - 1));
            CHECK(row.h == doctest::Approx(1.0 / row.steps));
        }
    }
    SUBCASE("euler is first order") {
        cfg.solver = SolverKind::Euler;
        const auto report = run_convergence_study(cfg);
        REQUIRE(report.fitted_slope.has_value());
        CHECK(*report.fitted_slope > 0.9);
        CHECK(*report.fitted_slope < 1.1);
    }
    SUBCASE("constant fields skip the fit with an exact marker") {
        cfg.field_name = "constant";
        cfg.solver = SolverKind::AbmPece;
        const auto report = run_convergence_study(cfg);
        CHECK(report.exact);
        CHECK(!report.fitted_slope.has_value());
        for (const auto& row : report.rows) {
            CHECK(row.terminal_error < 1e-12);
        }
        const std::string summary = slurp(cfg.output_dir / "summary.json");
        CHECK(summary.find("\"exact\": true") != std::string::npos);
    }
}

TEST_CASE("convergence study writes the report files") {
    StudyConfig cfg;
    cfg.steps_list = {10, 20, 40};
    cfg.output_dir = fresh_dir("conv_files");
    cfg.plot = true;
    (void)run_convergence_study(cfg);
    CHECK(fs::exists(cfg.output_dir / "convergence.csv"));
    CHECK(fs::exists(cfg.output_dir / "summary.json"));
    CHECK(fs::exists(cfg.output_dir / "plot.svg"));
    // atomic writes leave no temporaries behind
    for (const auto& entry : fs::directory_iterator(cfg.output_dir)) {
        CHECK(entry.path().extension() != ".tmp");
    }
    const std::string csv = slurp(cfg.output_dir / "convergence.csv");
    CHECK(csv.rfind("steps,h,terminal_error,nfe\n", 0) == 0);
}

TEST_CASE("roundtrip study on a rectified pair is exact") {
    StudyConfig cfg;
    cfg.field_name = "rectified";
    cfg.steps_list = {8, 16, 32};
    cfg.output_dir = fresh_dir("round_rect");
    const auto report = run_roundtrip_study(cfg);
    CHECK(report.exact);
    for (const auto& row : report.rows) {
        CHECK(row.recon_error < 1e-12);
        CHECK(std::isinf(row.psnr_proxy));
    }
}

TEST_CASE("roundtrip study beats euler at matched budget on the surrogate") {
    StudyConfig cfg;
    cfg.field_name = "surrogate";
    cfg.steps_list = {10, 15, 20};
    cfg.output_dir = fresh_dir("round_abm");
    cfg.solver = SolverKind::AbmPece;
    const auto abm = run_roundtrip_study(cfg);

    StudyConfig euler_cfg = cfg;
    euler_cfg.solver = SolverKind::Euler;
    euler_cfg.steps_list = {21, 31, 41};  // 2n+1 matches the pece budget
    euler_cfg.output_dir = fresh_dir("round_euler");
    const auto euler = run_roundtrip_study(euler_cfg);

    for (std::size_t i = 0; i < abm.rows.size(); ++i) {
        CHECK(abm.rows[i].nfe == euler.rows[i].nfe);
        CHECK(abm.rows[i].recon_error < euler.rows[i].recon_error);
    }
}

TEST_CASE("psnr proxy is 10 log10(range^2 / mse) over the state vector") {
    StudyConfig cfg;
    cfg.field_name = "surrogate";
    cfg.steps_list = {10, 20, 40};
    cfg.output_dir = fresh_dir("round_psnr");
    const auto report = run_roundtrip_study(cfg);
    const Vec z0 = initial_state(cfg.dim, cfg.seed);
    const double range =
        *std::max_element(z0.begin(), z0.end()) -
        *std::min_element(z0.begin(), z0.end());
    for (const auto& row : report.rows) {
        const double mse = row.recon_error * row.recon_error /
                           static_cast<double>(cfg.dim);
        CHECK(row.psnr_proxy ==
              doctest::Approx(10.0 * std::log10(range * range / mse))
                  .epsilon(1e-12));
    }
}

TEST_CASE("adaptive study reports the tolerance sweep") {
    StudyConfig cfg;
    cfg.field_name = "decay";
    cfg.output_dir = fresh_dir("adaptive");
    const auto report = run_adaptive_study(cfg);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows[0].epsilon == 0.1);
    CHECK(report.rows[0].nfe >= 40);
    CHECK(report.rows[0].nfe <= 60);
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].nfe >= report.rows[i - 1].nfe);
        CHECK(report.rows[i].terminal_error <=
              report.rows[i - 1].terminal_error * (1.0 + 1e-12));
    }
    const std::string csv = slurp(cfg.output_dir / "adaptive.csv");
    CHECK(csv.rfind("epsilon,nfe,terminal_error,steps_taken,rejections\n", 0) ==
          0);
}

TEST_CASE("mgfi demo writes mask and blended tensors") {
    StudyConfig cfg;
    cfg.output_dir = fresh_dir("mgfi");

    SUBCASE("zero perturbation yields an all-ones mask") {
        cfg.perturbation = 0.0;
        const auto report = run_mgfi_demo(cfg);
        CHECK(report.mask_density == 1.0);
        const std::string mask = slurp(cfg.output_dir / "mask.txt");
        CHECK(mask.find('0') == std::string::npos);
    }
    SUBCASE("densities fall as tau and perturbation grow") {
        const auto report = run_mgfi_demo(cfg);
        for (std::size_t i = 1; i < report.tau_sweep.size(); ++i) {
            CHECK(report.tau_sweep[i].second <=
                  report.tau_sweep[i - 1].second);
        }
        for (std::size_t i = 1; i < report.perturbation_sweep.size(); ++i) {
            CHECK(report.perturbation_sweep[i].second <=
                  report.perturbation_sweep[i - 1].second);
        }
        CHECK(fs::exists(cfg.output_dir / "blended.txt"));
        CHECK(fs::exists(cfg.output_dir / "mgfi.csv"));
    }
}

TEST_CASE("identical configs reproduce reports byte for byte") {
    StudyConfig cfg;
    cfg.field_name = "surrogate";
    cfg.steps_list = {10, 20, 40};
    cfg.seed = 123;
    cfg.output_dir = fresh_dir("determinism_a");
    (void)run_convergence_study(cfg);
    const std::string csv_a = slurp(cfg.output_dir / "convergence.csv");
    const std::string sum_a = slurp(cfg.output_dir / "summary.json");

    // rerun in place
    (void)run_convergence_study(cfg);
    CHECK(slurp(cfg.output_dir / "convergence.csv") == csv_a);
    CHECK(slurp(cfg.output_dir / "summary.json") == sum_a);

    // the report content is independent of where it is written
    StudyConfig moved = cfg;
    moved.output_dir = fresh_dir("determinism_b");
    (void)run_convergence_study(moved);
    CHECK(slurp(moved.output_dir / "convergence.csv") == csv_a);
    CHECK(slurp(moved.output_dir / "summary.json") == sum_a);
}
