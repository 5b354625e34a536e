#include "abmflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "abmflow/detail/rng.hpp"

namespace abmflow {

namespace {

using nlohmann::json;

constexpr double kErrorFloor = 1e-14;
constexpr double kExactThreshold = 1e-12;

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt3(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

double l2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// 10 log10(range^2 / MSE) over the state vector; infinite for a perfect
/// reconstruction, -inf for constant data that came back wrong.
double psnr_proxy(std::span<const double> reference,
                  std::span<const double> candidate) {
    double lo = reference[0];
    double hi = reference[0];
    double mse = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        lo = std::min(lo, reference[i]);
        hi = std::max(hi, reference[i]);
        const double d = reference[i] - candidate[i];
        mse += d * d;
    }
    mse /= static_cast<double>(reference.size());
    const double range = hi - lo;
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(range * range / mse);
}

json windows_json(const OrderWindows& w) {
    return json{{"first_order", {w.first_lo, w.first_hi}},
                {"second_order", {w.second_lo, w.second_hi}},
                {"local_order", {w.local_lo, w.local_hi}}};
}

json config_json(const StudyConfig& cfg) {
    // The output path is deliberately not echoed: reports must not depend
    // on where they are written.
    return json{{"field", cfg.field_name},
                {"solver", to_string(cfg.solver)},
                {"mode", cfg.mode == PcMode::Pece ? "pece" : "pec"},
                {"dim", cfg.dim},
                {"seed", cfg.seed},
                {"steps", cfg.steps_list},
                {"epsilon", cfg.epsilon},
                {"nominal_steps", cfg.nominal_steps},
                {"tau", cfg.tau}};
}

void write_json(const std::filesystem::path& path, const json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

/// Minimal log-log scatter+line plot; purely deterministic text.
std::string svg_loglog(const std::vector<std::pair<double, double>>& pts,
                       const std::string& x_label,
                       const std::string& y_label) {
    std::vector<std::pair<double, double>> logs;
    for (const auto& [x, y] : pts) {
        if (x > 0.0 && y > kErrorFloor) logs.emplace_back(std::log10(x),
                                                          std::log10(y));
    }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" "
          "height=\"360\" viewBox=\"0 0 480 360\">\n";
    os << "<rect width=\"480\" height=\"360\" fill=\"white\"/>\n";
    if (logs.size() >= 2) {
        double x0 = logs[0].first, x1 = logs[0].first;
        double y0 = logs[0].second, y1 = logs[0].second;
        for (const auto& [x, y] : logs) {
            x0 = std::min(x0, x); x1 = std::max(x1, x);
            y0 = std::min(y0, y); y1 = std::max(y1, y);
        }
        const double xpad = (x1 - x0 > 0) ? 0.08 * (x1 - x0) : 0.5;
        const double ypad = (y1 - y0 > 0) ? 0.08 * (y1 - y0) : 0.5;
        x0 -= xpad; x1 += xpad; y0 -= ypad; y1 += ypad;
        auto px = [&](double x) { return 50.0 + (x - x0) / (x1 - x0) * 400.0; };
        auto py = [&](double y) { return 320.0 - (y - y0) / (y1 - y0) * 280.0; };
        os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
              "points=\"";
        for (const auto& [x, y] : logs) {
            os << fmt3(px(x)) << ',' << fmt3(py(y)) << ' ';
        }
        os << "\"/>\n";
        for (const auto& [x, y] : logs) {
            os << "<circle cx=\"" << fmt3(px(x)) << "\" cy=\"" << fmt3(py(y))
               << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
        }
        os << "<line x1=\"50\" y1=\"320\" x2=\"450\" y2=\"320\" "
              "stroke=\"black\"/>\n";
        os << "<line x1=\"50\" y1=\"40\" x2=\"50\" y2=\"320\" "
              "stroke=\"black\"/>\n";
    }
    os << "<text x=\"240\" y=\"350\" text-anchor=\"middle\" "
          "font-size=\"12\">" << x_label << "</text>\n";
    os << "<text x=\"14\" y=\"180\" text-anchor=\"middle\" font-size=\"12\" "
          "transform=\"rotate(-90 14 180)\">" << y_label << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty integer list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "off" || s == "no") return false;
    throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

}  // namespace

void StudyConfig::validate() const {
    if (steps_list.empty()) {
        throw std::invalid_argument("steps list must not be empty");
    }
    for (std::size_t i = 0; i < steps_list.size(); ++i) {
        if (steps_list[i] < 4) {
            throw std::invalid_argument("steps entries must be >= 4");
        }
        if (i > 0 && steps_list[i] <= steps_list[i - 1]) {
            throw std::invalid_argument("steps must be strictly increasing");
        }
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    for (double e : epsilon_list) {
        if (!(e > 0.0)) {
            throw std::invalid_argument("epsilon sweep values must be positive");
        }
    }
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (!(tau >= -1.0 && tau <= 1.0)) {
        throw std::invalid_argument("tau must lie in [-1, 1]");
    }
    if (positions < 1 || channels < 1) {
        throw std::invalid_argument("tensor shape must be at least 1x1");
    }
    if (nominal_steps < warmup_steps + cooldown_steps + 1) {
        throw std::invalid_argument(
            "nominal_steps must exceed warmup + cooldown");
    }
}

std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path.string());
    }
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::string key;
        std::string value;
        std::stringstream ss(line);
        if (!(ss >> key)) continue;  // blank line
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key.erase(eq);
            if (value.empty()) ss >> value;
        } else {
            ss >> value;
            if (value == "=") ss >> value;
        }
        if (value.empty()) {
            throw std::invalid_argument("config line without value: " + line);
        }
        out[key] = value;
    }
    return out;
}

void apply_config_key(StudyConfig& cfg, const std::string& key,
                      const std::string& value) {
    if (key == "field") {
        cfg.field_name = value;
    } else if (key == "solver") {
        cfg.solver = solver_kind_from_string(value);
    } else if (key == "steps") {
        cfg.steps_list = parse_int_list(value);
    } else if (key == "epsilon") {
        const auto list = parse_double_list(value);
        cfg.epsilon = list.front();
        cfg.epsilon_list = list;
    } else if (key == "epsilons") {
        cfg.epsilon_list = parse_double_list(value);
    } else if (key == "mode") {
        if (value == "pece") cfg.mode = PcMode::Pece;
        else if (value == "pec") cfg.mode = PcMode::Pec;
        else throw std::invalid_argument("mode must be pece or pec");
    } else if (key == "tau") {
        cfg.tau = std::stod(value);
    } else if (key == "seed") {
        cfg.seed = std::stoull(value);
    } else if (key == "out") {
        cfg.output_dir = value;
    } else if (key == "dim") {
        cfg.dim = std::stoi(value);
    } else if (key == "nominal_steps") {
        cfg.nominal_steps = std::stoi(value);
    } else if (key == "warmup") {
        cfg.warmup_steps = std::stoi(value);
    } else if (key == "cooldown") {
        cfg.cooldown_steps = std::stoi(value);
    } else if (key == "rejection") {
        if (value == "accept_always") cfg.rejection = RejectionPolicy::AcceptAlways;
        else if (value == "reject_retry") cfg.rejection = RejectionPolicy::RejectRetry;
        else throw std::invalid_argument(
            "rejection must be accept_always or reject_retry");
    } else if (key == "norm") {
        if (value == "l2_total") cfg.error_norm = ErrorNorm::L2Total;
        else if (value == "l2_rms") cfg.error_norm = ErrorNorm::L2Rms;
        else throw std::invalid_argument("norm must be l2_total or l2_rms");
    } else if (key == "perturbation") {
        cfg.perturbation = std::stod(value);
    } else if (key == "positions") {
        cfg.positions = std::stoi(value);
    } else if (key == "channels") {
        cfg.channels = std::stoi(value);
    } else if (key == "plot") {
        cfg.plot = parse_bool(value);
    } else {
        throw std::invalid_argument("unknown configuration key '" + key + "'");
    }
}

std::pair<double, double> fit_loglog_slope(
    const std::vector<std::pair<double, double>>& points) {
    std::vector<std::pair<double, double>> logs;
    for (const auto& [h, err] : points) {
        if (err > kErrorFloor) {
            if (!(h > 0.0)) {
                throw std::invalid_argument("step sizes must be positive");
            }
            logs.emplace_back(std::log(h), std::log(err));
        }
    }
    if (logs.size() < 3) {
        throw std::invalid_argument(
            "slope fit needs at least 3 points above the error floor");
    }
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : logs) {
        sx += x;
        sy += y;
    }
    const double n = static_cast<double>(logs.size());
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : logs) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("slope fit needs distinct step sizes");
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

Vec initial_state(int dim, std::uint64_t seed) {
    detail::Rng rng(seed ^ 0xa0761d6478bd642fULL);
    Vec z(static_cast<std::size_t>(dim));
    for (auto& x : z) x = 0.5 + rng.uniform();
    return z;
}

Vec ground_truth(const VelocityField& field, std::span<const double> z0,
                 double t_start, double t_end, int max_steps) {
    if (field.has_exact()) return field.exact(z0, t_start, t_end);
    return reference_solve(field, z0, t_start, t_end, 1000L * max_steps);
}

void atomic_write(const std::filesystem::path& path,
                  const std::string& content) {
    if (!path.parent_path().empty()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

ConvergenceReport run_convergence_study(const StudyConfig& cfg) {
    cfg.validate();
    const VelocityField field = field_by_name(cfg.field_name, cfg.dim);
    const Vec z0 = initial_state(field.dim(), cfg.seed);
    const Vec truth =
        ground_truth(field, z0, 0.0, 1.0, cfg.steps_list.back());

    ConvergenceReport report;
    for (int n : cfg.steps_list) {
        const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, n);
        const SolverRun run = solve_grid(field, z0, grid, cfg.solver);
        report.rows.push_back({n, 1.0 / static_cast<double>(n),
                               l2(run.terminal_state(), truth), run.nfe});
    }
    report.exact = std::all_of(
        report.rows.begin(), report.rows.end(),
        [](const auto& r) { return r.terminal_error < kExactThreshold; });
    if (!report.exact) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : report.rows) {
            pts.emplace_back(r.h, r.terminal_error);
        }
        const auto [slope, intercept] = fit_loglog_slope(pts);
        report.fitted_slope = slope;
        report.fitted_intercept = intercept;
    }

    std::ostringstream csv;
    csv << "steps,h,terminal_error,nfe\n";
    for (const auto& r : report.rows) {
        csv << r.steps << ',' << fmt(r.h) << ',' << fmt(r.terminal_error)
            << ',' << r.nfe << '\n';
    }
    atomic_write(cfg.output_dir / "convergence.csv", csv.str());

    json summary{{"study", "convergence"},
                 {"config", config_json(cfg)},
                 {"windows", windows_json(cfg.windows)},
                 {"exact", report.exact}};
    if (report.fitted_slope) {
        summary["fitted_slope"] = *report.fitted_slope;
        summary["fitted_intercept"] = *report.fitted_intercept;
    } else {
        summary["fit"] = "exact";
    }
    write_json(cfg.output_dir / "summary.json", summary);

    if (cfg.plot) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : report.rows) {
            pts.emplace_back(r.h, r.terminal_error);
        }
        atomic_write(cfg.output_dir / "plot.svg",
                     svg_loglog(pts, "log10 h", "log10 error"));
    }
    return report;
}

RoundTripReport run_roundtrip_study(const StudyConfig& cfg) {
    cfg.validate();
    const VelocityField field = field_by_name(cfg.field_name, cfg.dim);
    const Vec z0 = initial_state(field.dim(), cfg.seed);

    RoundTripReport report;
    for (int n : cfg.steps_list) {
        const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, n);
        const RoundTrip rt = invert_then_reconstruct(field, z0, grid, cfg.solver);
        report.rows.push_back({n, l2(rt.z_recon, z0), psnr_proxy(z0, rt.z_recon),
                               rt.total_nfe});
    }
    report.exact = std::all_of(
        report.rows.begin(), report.rows.end(),
        [](const auto& r) { return r.recon_error < kExactThreshold; });
    if (!report.exact) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : report.rows) {
            pts.emplace_back(1.0 / static_cast<double>(r.steps), r.recon_error);
        }
        report.fitted_slope = fit_loglog_slope(pts).first;
    }

    std::ostringstream csv;
    csv << "steps,recon_error,psnr_proxy,nfe\n";
    for (const auto& r : report.rows) {
        csv << r.steps << ',' << fmt(r.recon_error) << ',' << fmt(r.psnr_proxy)
            << ',' << r.nfe << '\n';
    }
    atomic_write(cfg.output_dir / "roundtrip.csv", csv.str());

    json summary{{"study", "roundtrip"},
                 {"config", config_json(cfg)},
                 {"exact", report.exact}};
    if (report.fitted_slope) summary["fitted_slope"] = *report.fitted_slope;
    write_json(cfg.output_dir / "summary.json", summary);

    if (cfg.plot) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : report.rows) {
            pts.emplace_back(1.0 / static_cast<double>(r.steps), r.recon_error);
        }
        atomic_write(cfg.output_dir / "plot.svg",
                     svg_loglog(pts, "log10 h", "log10 recon error"));
    }
    return report;
}

AdaptiveReport run_adaptive_study(const StudyConfig& cfg) {
    cfg.validate();
    const VelocityField field = field_by_name(cfg.field_name, cfg.dim);
    const Vec z0 = initial_state(field.dim(), cfg.seed);
    // terminal_error is the inversion-leg error against ground truth; the
    // recon-vs-data distance retraces the discrete path and cancels, which
    // would hide what the tolerance actually buys.
    const Vec truth = ground_truth(field, z0, 0.0, 1.0, cfg.nominal_steps);

    AdaptiveReport report;
    for (double eps : cfg.epsilon_list) {
        StepController ctrl;
        ctrl.epsilon = eps;
        ctrl.warmup_steps = cfg.warmup_steps;
        ctrl.cooldown_steps = cfg.cooldown_steps;
        ctrl.rejection = cfg.rejection;
        ctrl.error_norm = cfg.error_norm;
        const AdaptiveRoundTrip rt = adaptive_round_trip(
            field, z0, ctrl, cfg.nominal_steps, cfg.mode);
        report.rows.push_back({eps, rt.total_nfe, l2(rt.z_noise, truth),
                               static_cast<long>(rt.steps_taken),
                               static_cast<long>(rt.rejected_steps)});
    }

    std::ostringstream csv;
    csv << "epsilon,nfe,terminal_error,steps_taken,rejections\n";
    for (const auto& r : report.rows) {
        csv << fmt(r.epsilon) << ',' << r.nfe << ',' << fmt(r.terminal_error)
            << ',' << r.steps_taken << ',' << r.rejections << '\n';
    }
    atomic_write(cfg.output_dir / "adaptive.csv", csv.str());

    json summary{{"study", "adaptive"},
                 {"config", config_json(cfg)},
                 {"epsilon_sweep", cfg.epsilon_list},
                 {"rejection", cfg.rejection == RejectionPolicy::AcceptAlways
                                   ? "accept_always"
                                   : "reject_retry"}};
    write_json(cfg.output_dir / "summary.json", summary);
    return report;
}

MgfiReport run_mgfi_demo(const StudyConfig& cfg) {
    cfg.validate();
    const auto seed = cfg.seed;
    const FeatureTensor inv_curr =
        random_tensor(cfg.positions, cfg.channels, seed);
    const FeatureTensor smp_curr =
        perturbed_copy(inv_curr, cfg.perturbation, seed ^ 0x6a09e667f3bcc909ULL);
    const FeatureTensor inv_next =
        random_tensor(cfg.positions, cfg.channels, seed + 1);
    const FeatureTensor smp_next =
        perturbed_copy(inv_next, cfg.perturbation, seed ^ 0xbb67ae8584caa73bULL);

    const SimilarityMap sim = cosine_similarity_map(inv_curr, smp_curr);
    const BinaryMask mask = threshold_mask(sim, cfg.tau);
    const FeatureTensor blended = masked_blend(mask, inv_next, smp_next);

    MgfiReport report;
    report.mask_density = mask.density();
    for (double tau : {0.0, 0.2, 0.5, 0.9}) {
        report.tau_sweep.emplace_back(tau,
                                      threshold_mask(sim, tau).density());
    }
    for (double mag : {0.0, 0.5, 1.0, 2.0, 3.0}) {
        const FeatureTensor perturbed =
            perturbed_copy(inv_curr, mag, seed ^ 0x6a09e667f3bcc909ULL);
        const auto m =
            threshold_mask(cosine_similarity_map(inv_curr, perturbed), cfg.tau);
        report.perturbation_sweep.emplace_back(mag, m.density());
    }

    std::ostringstream mask_os;
    write_mask(mask_os, mask);
    atomic_write(cfg.output_dir / "mask.txt", mask_os.str());

    std::ostringstream blend_os;
    write_tensor(blend_os, blended);
    atomic_write(cfg.output_dir / "blended.txt", blend_os.str());

    std::ostringstream csv;
    csv << "sweep,value,density\n";
    for (const auto& [tau, density] : report.tau_sweep) {
        csv << "tau," << fmt(tau) << ',' << fmt(density) << '\n';
    }
    for (const auto& [mag, density] : report.perturbation_sweep) {
        csv << "perturbation," << fmt(mag) << ',' << fmt(density) << '\n';
    }
    atomic_write(cfg.output_dir / "mgfi.csv", csv.str());

    json summary{{"study", "mgfi"},
                 {"config", config_json(cfg)},
                 {"positions", cfg.positions},
                 {"channels", cfg.channels},
                 {"perturbation", cfg.perturbation},
                 {"mask_density", report.mask_density}};
    write_json(cfg.output_dir / "summary.json", summary);
    return report;
}

}  // namespace abmflow
