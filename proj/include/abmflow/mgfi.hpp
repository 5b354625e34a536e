#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace abmflow {

/// positions x channels real array, row-major. One row per spatial position.
struct FeatureTensor {
    int positions = 0;
    int channels = 0;
    std::vector<double> data;  // positions * channels, row-major

    FeatureTensor() = default;
    FeatureTensor(int p, int c);
    FeatureTensor(int p, int c, std::vector<double> values);

    [[nodiscard]] std::span<const double> row(int p) const;
    [[nodiscard]] std::span<double> row(int p);
    [[nodiscard]] bool same_shape(const FeatureTensor& other) const noexcept {
        return positions == other.positions && channels == other.channels;
    }
};

/// Per-position cosine similarity, every entry in [-1, 1].
struct SimilarityMap {
    std::vector<double> values;
};

/// Per-position selector: 1 keeps the inversion-side row, 0 the
/// sampling-side row.
struct BinaryMask {
    std::vector<std::uint8_t> bits;
    double tau = 0.2;

    [[nodiscard]] double density() const;  // fraction of ones
};

inline constexpr double kDefaultTau = 0.2;
/// Rows with a norm below this are treated as direction-free: their
/// similarity is 0, which routes them to the editable (sampling) branch.
inline constexpr double kZeroNormTol = 1e-12;

/// Per position p: dot(a_p, b_p) / (|a_p| |b_p|), clamped to [-1, 1];
/// 0 when either row norm is below kZeroNormTol. Shapes must agree.
[[nodiscard]] SimilarityMap cosine_similarity_map(const FeatureTensor& a,
                                                  const FeatureTensor& b);

/// Elementwise indicator of s >= tau (boundary included). tau in [-1, 1].
[[nodiscard]] BinaryMask threshold_mask(const SimilarityMap& s, double tau);

/// Position p of the result is inv's row where bits[p] = 1, else smp's row;
/// the mask broadcasts across channels. Rows are copied bit-identically.
[[nodiscard]] FeatureTensor masked_blend(const BinaryMask& mask,
                                         const FeatureTensor& inv,
                                         const FeatureTensor& smp);

/// Full operator: the mask is estimated from the current-timestep pair and
/// applied to blend the following timestep's pair.
[[nodiscard]] FeatureTensor mgfi_apply(const FeatureTensor& inv_curr,
                                       const FeatureTensor& smp_curr,
                                       const FeatureTensor& inv_next,
                                       const FeatureTensor& smp_next,
                                       double tau = kDefaultTau);

// ---------------------------------------------------------------------------
// Synthetic feature generator (desk-scale stand-in for attention values).
// ---------------------------------------------------------------------------

/// Deterministic pseudo-random tensor with standard-normal entries.
[[nodiscard]] FeatureTensor random_tensor(int positions, int channels,
                                          std::uint64_t seed);

/// Copy of base with every row rotated in-plane by
/// angle = clamp(magnitude * u_p, 0, pi), u_p seeded per row in [0.5, 1].
/// Row similarity to the original is cos(angle), so mask density is
/// non-increasing in the magnitude. Needs channels >= 2.
[[nodiscard]] FeatureTensor perturbed_copy(const FeatureTensor& base,
                                           double magnitude,
                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Text serialization: header line "P C", then P rows of C decimal values;
// masks are one line of P contiguous 0/1 characters.
// ---------------------------------------------------------------------------

void write_tensor(std::ostream& os, const FeatureTensor& t);
[[nodiscard]] FeatureTensor read_tensor(std::istream& is);
void write_mask(std::ostream& os, const BinaryMask& m);
[[nodiscard]] BinaryMask read_mask(std::istream& is);

}  // namespace abmflow
