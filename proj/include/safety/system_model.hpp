#pragma once

#include "safety/func_core.hpp"

#include <Eigen/Dense>

#include <functional>

namespace safety {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

using VectorField = std::function<Vec(const Vec&)>;
using MatrixField = std::function<Mat(const Vec&)>;

/// dx = f(x) dt + g1(x) d + g2(x) u. f, g1, g2 are assumed locally Lipschitz.
struct ControlAffineSystem {
    int n = 1;
    int m1 = 0;
    int m2 = 1;
    VectorField f;
    MatrixField g1;
    MatrixField g2;

    Vec eval_f(const Vec& x) const;
    Mat eval_g1(const Vec& x) const;
    Mat eval_g2(const Vec& x) const;
};

/** @brief Barrier function candidate h with gradient and Hessian.
 *
 * Missing derivatives fall back to central differences with step
 * 1e-6 * (1 + |x_i|); the Hessian differences the gradient.
 */
class BarrierFunction {
public:
    using ValueFn = std::function<double(const Vec&)>;
    using GradFn = std::function<RowVec(const Vec&)>;
    using HessFn = std::function<Mat(const Vec&)>;

    BarrierFunction(ValueFn h, GradFn grad = {}, HessFn hess = {}, double inf_h = -kInf, double sup_h = kInf);

    double value(const Vec& x) const { return h_(x); }
    double operator()(const Vec& x) const { return h_(x); }
    RowVec gradient(const Vec& x) const;
    Mat hessian(const Vec& x) const;
    RowVec fd_gradient(const Vec& x) const;

    bool has_analytic_gradient() const { return static_cast<bool>(grad_); }
    double inf_h() const { return inf_h_; }
    double sup_h() const { return sup_h_; }

private:
    ValueFn h_;
    GradFn grad_;
    HessFn hess_;
    double inf_h_, sup_h_;
};

using NominalController = std::function<Vec(const Vec& x, double t)>;

struct LieData {
    double h_val = 0.0;
    double Lfh = 0.0;
    RowVec Lg1h;
    RowVec Lg2h;
    double trace_term = 0.0;  // 0.5 * Tr(g1' H g1)
    double frob_term = 0.0;   // |g1' H g1|_F
    Mat curvature;            // g1' H g1, m1 x m1

    // Lie derivative along f + g2 u0
    double drift_with(const Vec& u0) const { return Lfh + Lg2h.dot(u0); }
};

LieData lie_data(const ControlAffineSystem& sys, const BarrierFunction& bf, const Vec& x);

/// Max relative error between the analytic and central-difference gradients.
double check_gradient(const BarrierFunction& bf, const Vec& x);

inline Vec vec1(double v) { return Vec::Constant(1, v); }
inline Mat mat1(double v) { return Mat::Constant(1, 1, v); }

}  // namespace safety
