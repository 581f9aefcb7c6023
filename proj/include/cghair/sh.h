#pragma once

#include <cstddef>

namespace cghair {

// Real spherical harmonics in the ordering and sign convention used by the
// Gaussian splatting ecosystem. Coefficient layout per Gaussian is
// basis-major: coeff[b * 3 + channel].
inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                    -1.0925484305920792, 0.5462742152960396};
inline constexpr double kShC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                    0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                                    -0.5900435899266435};

// Added to the evaluated SH color before clamping at zero.
inline constexpr double kShColorOffset = 0.5;

inline constexpr std::size_t kMaxShDegree = 3;

constexpr std::size_t sh_basis_count(std::size_t degree) { return (degree + 1) * (degree + 1); }
constexpr std::size_t sh_coeff_count(std::size_t degree) { return 3 * sh_basis_count(degree); }

// DC coefficient that makes the (pre-clamp) color equal `color`.
constexpr double sh_dc_for_color(double color) { return (color - kShColorOffset) / kShC0; }

}  // namespace cghair
