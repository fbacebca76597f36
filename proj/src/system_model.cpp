#include "safety/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace safety {

namespace {

double fd_step(double xi) { return 1e-6 * (1.0 + std::abs(xi)); }

void check_shape(const Mat& m, long rows, long cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols)
        throw std::invalid_argument(std::string(what) + ": wrong shape " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()));
}

}  // namespace

Vec ControlAffineSystem::eval_f(const Vec& x) const {
    if (!f) return Vec::Zero(n);
    Vec v = f(x);
    if (v.size() != n) throw std::invalid_argument("f: wrong dimension");
    return v;
}

Mat ControlAffineSystem::eval_g1(const Vec& x) const {
    if (!g1 || m1 == 0) return Mat::Zero(n, m1);
    Mat m = g1(x);
    check_shape(m, n, m1, "g1");
    return m;
}

Mat ControlAffineSystem::eval_g2(const Vec& x) const {
    if (!g2) return Mat::Zero(n, m2);
    Mat m = g2(x);
    check_shape(m, n, m2, "g2");
    return m;
}

BarrierFunction::BarrierFunction(ValueFn h, GradFn grad, HessFn hess, double inf_h, double sup_h)
    : h_(std::move(h)), grad_(std::move(grad)), hess_(std::move(hess)), inf_h_(inf_h), sup_h_(sup_h) {
    if (!h_) throw std::invalid_argument("BarrierFunction: h is empty");
    if (!(inf_h_ < 0.0 && 0.0 < sup_h_)) throw std::invalid_argument("BarrierFunction: need inf h < 0 < sup h");
}

RowVec BarrierFunction::fd_gradient(const Vec& x) const {
    RowVec g(x.size());
    Vec xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double s = fd_step(x[i]);
        xp[i] = x[i] + s;
        xm[i] = x[i] - s;
        g[i] = (h_(xp) - h_(xm)) / (2.0 * s);
        xp[i] = xm[i] = x[i];
    }
    return g;
}

RowVec BarrierFunction::gradient(const Vec& x) const {
    if (!grad_) return fd_gradient(x);
    RowVec g = grad_(x);
    if (g.size() != x.size()) throw std::invalid_argument("BarrierFunction: gradient has wrong dimension");
    return g;
}

Mat BarrierFunction::hessian(const Vec& x) const {
    const auto n = x.size();
    if (hess_) {
        Mat H = hess_(x);
        check_shape(H, n, n, "hessian");
        return H;
    }
    Mat H(n, n);
    Vec xp = x, xm = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = fd_step(x[i]);
        xp[i] = x[i] + s;
        xm[i] = x[i] - s;
        H.row(i) = (gradient(xp) - gradient(xm)) / (2.0 * s);
        xp[i] = xm[i] = x[i];
    }
    return 0.5 * (H + H.transpose());
}

LieData lie_data(const ControlAffineSystem& sys, const BarrierFunction& bf, const Vec& x) {
    if (x.size() != sys.n) throw std::invalid_argument("lie_data: state has wrong dimension");
    if (!x.allFinite()) throw DomainError("lie_data: non-finite state");
    LieData d;
    d.h_val = bf.value(x);
    const RowVec dh = bf.gradient(x);
    d.Lfh = dh.dot(sys.eval_f(x));
    const Mat g1 = sys.eval_g1(x);
    d.Lg1h = dh * g1;
    d.Lg2h = dh * sys.eval_g2(x);
    if (sys.m1 > 0 && !g1.isZero(0.0)) {
        d.curvature = g1.transpose() * bf.hessian(x) * g1;
        d.trace_term = 0.5 * d.curvature.trace();
        d.frob_term = d.curvature.norm();
    } else {
        d.curvature = Mat::Zero(sys.m1, sys.m1);
    }
    const bool finite = std::isfinite(d.h_val) && std::isfinite(d.Lfh) && d.Lg1h.allFinite() &&
                        d.Lg2h.allFinite() && std::isfinite(d.trace_term) && std::isfinite(d.frob_term);
    if (!finite) throw DomainError("lie_data: non-finite value (model blow-up?)");
    return d;
}

double check_gradient(const BarrierFunction& bf, const Vec& x) {
    const RowVec a = bf.gradient(x);
    const RowVec n = bf.fd_gradient(x);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double err = std::abs(a[i] - n[i]) / std::max(1.0, std::abs(a[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace safety
