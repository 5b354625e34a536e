#include "abmflow/mgfi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "abmflow/detail/rng.hpp"

namespace abmflow {

namespace {

using detail::Rng;

void check_shape(int p, int c) {
    if (p < 1 || c < 1) {
        throw std::invalid_argument("tensor shape must be at least 1x1");
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

FeatureTensor::FeatureTensor(int p, int c)
    : positions(p), channels(c),
      data(static_cast<std::size_t>(p) * static_cast<std::size_t>(c), 0.0) {
    check_shape(p, c);
}

FeatureTensor::FeatureTensor(int p, int c, std::vector<double> values)
    : positions(p), channels(c), data(std::move(values)) {
    check_shape(p, c);
    if (data.size() != static_cast<std::size_t>(p) * static_cast<std::size_t>(c)) {
        throw std::invalid_argument("tensor data size does not match shape");
    }
    for (double x : data) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("tensor entries must be finite");
        }
    }
}

std::span<const double> FeatureTensor::row(int p) const {
    return {data.data() + static_cast<std::size_t>(p) * channels,
            static_cast<std::size_t>(channels)};
}

std::span<double> FeatureTensor::row(int p) {
    return {data.data() + static_cast<std::size_t>(p) * channels,
            static_cast<std::size_t>(channels)};
}

double BinaryMask::density() const {
    if (bits.empty()) return 0.0;
    std::size_t ones = 0;
    for (auto b : bits) ones += b;
    return static_cast<double>(ones) / static_cast<double>(bits.size());
}

SimilarityMap cosine_similarity_map(const FeatureTensor& a,
                                    const FeatureTensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("similarity needs tensors of one shape");
    }
    SimilarityMap s;
    s.values.resize(static_cast<std::size_t>(a.positions));
    for (int p = 0; p < a.positions; ++p) {
        const auto ra = a.row(p);
        const auto rb = b.row(p);
        const double na = norm(ra);
        const double nb = norm(rb);
        if (na < kZeroNormTol || nb < kZeroNormTol) {
            s.values[static_cast<std::size_t>(p)] = 0.0;
        } else {
            s.values[static_cast<std::size_t>(p)] =
                std::clamp(dot(ra, rb) / (na * nb), -1.0, 1.0);
        }
    }
    return s;
}

BinaryMask threshold_mask(const SimilarityMap& s, double tau) {
    if (!(tau >= -1.0 && tau <= 1.0)) {
        throw std::invalid_argument("tau must lie in [-1, 1]");
    }
    BinaryMask m;
    m.tau = tau;
    m.bits.resize(s.values.size());
    for (std::size_t p = 0; p < s.values.size(); ++p) {
        m.bits[p] = s.values[p] >= tau ? 1 : 0;
    }
    return m;
}

FeatureTensor masked_blend(const BinaryMask& mask, const FeatureTensor& inv,
                           const FeatureTensor& smp) {
    if (!inv.same_shape(smp)) {
        throw std::invalid_argument("blend needs tensors of one shape");
    }
    if (mask.bits.size() != static_cast<std::size_t>(inv.positions)) {
        throw std::invalid_argument("mask length must equal tensor positions");
    }
    FeatureTensor out(inv.positions, inv.channels);
    for (int p = 0; p < inv.positions; ++p) {
        const auto src = mask.bits[static_cast<std::size_t>(p)] ? inv.row(p)
                                                                : smp.row(p);
        std::copy(src.begin(), src.end(), out.row(p).begin());
    }
    return out;
}

FeatureTensor mgfi_apply(const FeatureTensor& inv_curr,
                         const FeatureTensor& smp_curr,
                         const FeatureTensor& inv_next,
                         const FeatureTensor& smp_next, double tau) {
    if (!inv_curr.same_shape(smp_curr) || !inv_next.same_shape(smp_next) ||
        !inv_curr.same_shape(inv_next)) {
        throw std::invalid_argument("mgfi needs four tensors of one shape");
    }
    const BinaryMask mask =
        threshold_mask(cosine_similarity_map(inv_curr, smp_curr), tau);
    return masked_blend(mask, inv_next, smp_next);
}

FeatureTensor random_tensor(int positions, int channels, std::uint64_t seed) {
    check_shape(positions, channels);
    FeatureTensor t(positions, channels);
    Rng rng(seed);
    for (auto& x : t.data) x = rng.normal();
    return t;
}

FeatureTensor perturbed_copy(const FeatureTensor& base, double magnitude,
                             std::uint64_t seed) {
    if (base.channels < 2) {
        throw std::invalid_argument(
            "in-plane perturbation needs at least two channels");
    }
    if (magnitude < 0.0) {
        throw std::invalid_argument("perturbation magnitude must be >= 0");
    }
    FeatureTensor out = base;
    Rng rng(seed);
    std::vector<double> w(static_cast<std::size_t>(base.channels));
    for (int p = 0; p < base.positions; ++p) {
        const auto src = base.row(p);
        const double u = 0.5 + 0.5 * rng.uniform();
        // Direction draws stay in lockstep across calls regardless of the
        // per-row outcome so different magnitudes perturb identical planes.
        for (auto& x : w) x = rng.normal();
        const double n = norm(src);
        if (n < kZeroNormTol) continue;
        const double angle =
            std::clamp(magnitude * u, 0.0, std::numbers::pi);
        // Orthonormalize w against the row; fall back to a basis vector when
        // the draw is almost parallel.
        const double proj = dot(w, src) / (n * n);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= proj * src[i];
        double wn = norm(w);
        if (wn < 1e-9) {
            std::size_t k = 0;
            for (std::size_t i = 1; i < src.size(); ++i) {
                if (std::abs(src[i]) < std::abs(src[k])) k = i;
            }
            std::fill(w.begin(), w.end(), 0.0);
            w[k] = 1.0;
            const double pk = dot(w, src) / (n * n);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= pk * src[i];
            wn = norm(w);
        }
        const double ca = std::cos(angle);
        const double sa = std::sin(angle);
        auto dst = out.row(p);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = ca * src[i] + sa * (n / wn) * w[i];
        }
    }
    return out;
}

void write_tensor(std::ostream& os, const FeatureTensor& t) {
    os << t.positions << ' ' << t.channels << '\n';
    char buf[40];
    for (int p = 0; p < t.positions; ++p) {
        const auto r = t.row(p);
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", r[i]);
            if (i) os << ' ';
            os << buf;
        }
        os << '\n';
    }
}

FeatureTensor read_tensor(std::istream& is) {
    int p = 0;
    int c = 0;
    if (!(is >> p >> c)) {
        throw std::runtime_error("tensor header 'P C' missing");
    }
    check_shape(p, c);
    std::vector<double> values(static_cast<std::size_t>(p) *
                               static_cast<std::size_t>(c));
    for (auto& x : values) {
        if (!(is >> x)) throw std::runtime_error("tensor data truncated");
    }
    return {p, c, std::move(values)};
}

void write_mask(std::ostream& os, const BinaryMask& m) {
    std::string line(m.bits.size(), '0');
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
        if (m.bits[i]) line[i] = '1';
    }
    os << line << '\n';
}

BinaryMask read_mask(std::istream& is) {
    std::string line;
    if (!(is >> line) || line.empty()) {
        throw std::runtime_error("mask line missing");
    }
    BinaryMask m;
    m.bits.resize(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] != '0' && line[i] != '1') {
            throw std::runtime_error("mask must be 0/1 characters");
        }
        m.bits[i] = static_cast<std::uint8_t>(line[i] - '0');
    }
    return m;
}

}  // namespace abmflow
