#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cghair/random.h"
#include "cghair/types.h"

namespace testutil {

inline cghair::Strand random_strand(cghair::Rng& rng, std::size_t n, double step = 0.1) {
    cghair::Strand s;
    cghair::Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (std::size_t i = 0; i < n; ++i) {
        s.points.push_back(p);
        p += cghair::Vec3(rng.uniform(0.2, 1.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)) * step;
    }
    return s;
}

// Values exactly representable as float32, so file round trips compare bitwise.
inline cghair::Strand random_float_strand(cghair::Rng& rng, std::size_t n) {
    cghair::Strand s = random_strand(rng, n);
    for (auto& p : s.points)
        for (int i = 0; i < 3; ++i) p[i] = static_cast<double>(static_cast<float>(p[i]));
    return s;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cghair_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline double max_abs_diff(const cghair::Mat3& a, const cghair::Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testutil
