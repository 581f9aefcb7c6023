#include "cghair/bspline.h"

#include <algorithm>

#include <Eigen/QR>

#include "cghair/error.h"

namespace cghair {

std::vector<double> clamped_uniform_knots(std::size_t n_ctrl) {
    constexpr std::size_t p = 3;
    std::vector<double> knots(n_ctrl + p + 1, 0.0);
    const std::size_t spans = n_ctrl - p;
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (i <= p) knots[i] = 0.0;
        else if (i >= n_ctrl) knots[i] = 1.0;
        else knots[i] = static_cast<double>(i - p) / static_cast<double>(spans);
    }
    return knots;
}

Eigen::RowVectorXd cubic_basis(const std::vector<double>& knots, std::size_t n_ctrl, double t) {
    constexpr std::size_t p = 3;
    t = std::clamp(t, 0.0, 1.0);
    // Span index s with knots[s] <= t < knots[s+1]; the last span is closed.
    std::size_t s = p;
    while (s + 1 < n_ctrl && knots[s + 1] <= t) ++s;

    // Cox-de Boor, triangular form.
    double n[p + 1] = {1.0, 0.0, 0.0, 0.0};
    double left[p + 1], right[p + 1];
    for (std::size_t j = 1; j <= p; ++j) {
        left[j] = t - knots[s + 1 - j];
        right[j] = knots[s + j] - t;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double tmp = denom != 0.0 ? n[r] / denom : 0.0;
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n_ctrl));
    for (std::size_t j = 0; j <= p; ++j) row(static_cast<Eigen::Index>(s - p + j)) = n[j];
    return row;
}

Eigen::VectorXd CubicBSpline::operator()(double t) const {
    const auto basis = cubic_basis(knots_, static_cast<std::size_t>(control_.rows()), t);
    return (basis * control_).transpose();
}

Eigen::MatrixXd CubicBSpline::sample(std::size_t n) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), control_.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        out.row(static_cast<Eigen::Index>(i)) = (*this)(t).transpose();
    }
    return out;
}

CubicBSpline fit_cubic_bspline(const Eigen::MatrixXd& points, std::size_t n_ctrl) {
    const auto m = static_cast<std::size_t>(points.rows());
    if (m < 4) throw Error(ErrorCode::TooFewPoints, "B-spline fit needs at least 4 points");
    if (n_ctrl < 4) throw Error(ErrorCode::InvalidArgument, "B-spline fit needs at least 4 control points");
    n_ctrl = std::min(n_ctrl, m);

    std::vector<double> t(m, 0.0);
    for (std::size_t i = 1; i < m; ++i)
        t[i] = t[i - 1] + (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(i - 1))).norm();
    if (t.back() > 0.0) {
        for (auto& v : t) v /= t.back();
    } else {
        for (std::size_t i = 0; i < m; ++i) t[i] = static_cast<double>(i) / static_cast<double>(m - 1);
    }

    auto knots = clamped_uniform_knots(n_ctrl);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n_ctrl));
    for (std::size_t i = 0; i < m; ++i) a.row(static_cast<Eigen::Index>(i)) = cubic_basis(knots, n_ctrl, t[i]);
    Eigen::MatrixXd control = a.completeOrthogonalDecomposition().solve(points);
    return CubicBSpline(std::move(control), std::move(knots));
}

}  // namespace cghair
