#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace cghair {

// Clamped uniform cubic B-spline over t in [0, 1].
class CubicBSpline {
public:
    CubicBSpline(Eigen::MatrixXd control, std::vector<double> knots)
        : control_(std::move(control)), knots_(std::move(knots)) {}

    // Evaluates at t (clamped to [0, 1]); returns a dim-length vector.
    Eigen::VectorXd operator()(double t) const;
    // Evaluates at n uniform parameters; one row per sample.
    Eigen::MatrixXd sample(std::size_t n) const;

    const Eigen::MatrixXd& control() const { return control_; }
    const std::vector<double>& knots() const { return knots_; }

private:
    Eigen::MatrixXd control_;  // n_ctrl x dim
    std::vector<double> knots_;
};

// Least-squares fit to `points` (one row per point, chord-length
// parameterized). n_ctrl is clamped to the number of points.
CubicBSpline fit_cubic_bspline(const Eigen::MatrixXd& points, std::size_t n_ctrl);

// Values of the n_ctrl cubic basis functions at t for a clamped uniform knot vector.
Eigen::RowVectorXd cubic_basis(const std::vector<double>& knots, std::size_t n_ctrl, double t);
std::vector<double> clamped_uniform_knots(std::size_t n_ctrl);

}  // namespace cghair
