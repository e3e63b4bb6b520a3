#include "mtfl/qp1qc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <vector>

namespace mtfl::qp1qc {

namespace {

void check_instance(const Instance& inst) {
    if (inst.b.size() != inst.a.size() || inst.c.size() != inst.a.size()) {
        throw Error(ErrorCode::DimensionMismatch, "qp1qc instance vectors differ in length");
    }
    if (!(inst.delta >= 0.0) || !std::isfinite(inst.delta)) {
        throw Error(ErrorCode::InvalidConfig, "qp1qc radius must be finite and nonnegative");
    }
    for (Index t = 0; t < inst.size(); ++t) {
        if (!(inst.a[t] >= 0.0) || !(inst.b[t] >= 0.0) || !std::isfinite(inst.a[t]) || !std::isfinite(inst.b[t]) ||
            !std::isfinite(inst.c[t])) {
            throw Error(ErrorCode::InvalidConfig, "qp1qc needs finite a_t >= 0 and b_t >= 0");
        }
        if (inst.a[t] == 0.0 && inst.b[t] != 0.0) {
            throw Error(ErrorCode::InvalidConfig, "qp1qc needs b_t = 0 wherever a_t = 0");
        }
    }
}

}  // namespace

const char* to_string(Branch b) {
    switch (b) {
        case Branch::PointBall: return "point";
        case Branch::ClosedForm: return "closed_form";
        case Branch::Newton: return "newton";
    }
    return "unknown";
}

Instance make_instance(const Eigen::Ref<const Eigen::VectorXd>& col_norms,
                       const Eigen::Ref<const Eigen::VectorXd>& center_corr, double delta) {
    Instance inst;
    inst.a = col_norms.cwiseAbs2();
    inst.b = col_norms.cwiseProduct(center_corr.cwiseAbs());
    inst.c = center_corr;
    inst.delta = delta;
    return inst;
}

namespace {

// Raw view of one instance; the screening loop fills these in place.
struct View {
    const double* a;
    const double* b;
    const double* c;
    Index T;
    double delta;
};

struct CoreResult {
    Branch branch = Branch::ClosedForm;
    double shift = 0.0;  // alpha* - 2 rho
    double s_value = 0.0;
    int iters = 0;
};

// u(shift)_t = 2 b_t / (shift + 2 (rho - a_t)); the gap rho - a_t is exact
// for the top set, which keeps u accurate as shift -> 0. Returns ||u||^2 and
// sets curv = sum u_t^2 / denom_t.
double eval_u(const View& v, double rho, double shift, double* u, double& curv) {
    double nn = 0.0;
    curv = 0.0;
    for (Index t = 0; t < v.T; ++t) {
        if (v.b[t] == 0.0) {
            u[t] = 0.0;
            continue;
        }
        const double inv = 1.0 / (shift + 2.0 * (rho - v.a[t]));
        const double ut = 2.0 * v.b[t] * inv;
        u[t] = ut;
        nn += ut * ut;
        curv += ut * ut * inv;
    }
    return nn;
}

double value(const View& v, double rho, double shift, const double* u) {
    // sum c^2 + (alpha/2) delta^2 - 1/2 q^T u with alpha = 2 rho + shift, q = -2b.
    double s = (rho + 0.5 * shift) * v.delta * v.delta;
    for (Index t = 0; t < v.T; ++t) s += v.c[t] * v.c[t] + v.b[t] * u[t];
    return s;
}

// The maximizer is written to u (length T).
CoreResult solve_core(const View& v, const NewtonOptions& opts, double* u) {
    const Index T = v.T;
    const double delta = v.delta;
    double rho = 0.0;
    double bb = 0.0;
    for (Index t = 0; t < T; ++t) {
        rho = std::max(rho, v.a[t]);
        bb += v.b[t] * v.b[t];
        u[t] = 0.0;
    }

    CoreResult res;
    if (delta == 0.0) {
        res.branch = Branch::PointBall;
        res.s_value = value(v, rho, 0.0, u);
        return res;
    }

    bool top_has_mass = false;
    Index first_top = -1;
    for (Index t = 0; t < T; ++t) {
        if (v.a[t] == rho) {
            if (first_top < 0) first_top = t;
            if (v.b[t] != 0.0) top_has_mass = true;
        }
    }

    if (!top_has_mass) {
        // Candidate at alpha = 2 rho: finite because the top set carries no b.
        double nn = 0.0;
        for (Index t = 0; t < T; ++t) {
            if (v.a[t] != rho) {
                u[t] = v.b[t] / (rho - v.a[t]);
                nn += u[t] * u[t];
            }
        }
        if (nn <= delta * delta) {
            res.branch = Branch::ClosedForm;
            u[first_top] += std::sqrt(std::max(0.0, delta * delta - nn));
            res.s_value = value(v, rho, 0.0, u);
            return res;
        }
    }

    // Newton on phi(alpha) = 1/||u(alpha)|| - 1/delta, in the shifted variable
    // alpha = 2 rho + shift. The root lies in (0, ||q|| / delta].
    res.branch = Branch::Newton;
    const double scale = std::max(delta, 1.0);
    double lo = 0.0;
    double hi = 2.0 * std::sqrt(bb) / delta;
    double shift = top_has_mass ? 1e-12 * std::max(rho, 1.0) : 0.0;
    // At the root every |u_t| <= delta, so shift >= 2 b_t / delta - 2 (rho - a_t)
    // for each t; starting there saves most of the approach from the pole.
    for (Index t = 0; t < T; ++t) {
        shift = std::max(shift, 2.0 * v.b[t] / delta - 2.0 * (rho - v.a[t]));
    }
    if (shift >= hi) shift = 0.5 * hi;

    double curv = 0.0;
    double err = std::numeric_limits<double>::infinity();
    int k = 0;
    while (k < opts.max_iters) {
        ++k;
        const double nu = std::sqrt(eval_u(v, rho, shift, u, curv));
        err = std::abs(nu - delta);
        if (err <= opts.stop_tol * scale) break;
        if (nu > delta) {
            lo = shift;
        } else {
            hi = shift;
        }
        double next = shift + nu * nu * (nu - delta) / (delta * curv);
        if (!std::isfinite(next) || next <= lo || next >= hi) {
            next = 0.5 * (lo + hi);
        }
        if (next == shift) break;
        shift = next;
    }
    if (!(err <= opts.fail_tol * scale)) {
        std::ostringstream os;
        os << "secular equation not solved after " << k << " iterations, | ||u|| - delta | = " << err;
        throw Error(ErrorCode::NoConvergence, os.str());
    }
    res.iters = k;
    res.shift = shift;
    res.s_value = value(v, rho, shift, u);
    return res;
}

}  // namespace

double secular(const Instance& inst, double shift) {
    Eigen::VectorXd u(inst.size());
    double curv = 0.0;
    const View v{inst.a.data(), inst.b.data(), inst.c.data(), inst.size(), inst.delta};
    return 1.0 / std::sqrt(eval_u(v, inst.rho(), shift, u.data(), curv)) - 1.0 / inst.delta;
}

Solution solve(const Instance& inst, const NewtonOptions& opts) {
    check_instance(inst);
    Solution sol;
    sol.u_star = Eigen::VectorXd::Zero(inst.size());
    const View v{inst.a.data(), inst.b.data(), inst.c.data(), inst.size(), inst.delta};
    const CoreResult r = solve_core(v, opts, sol.u_star.data());
    sol.branch = r.branch;
    sol.alpha_star = 2.0 * inst.rho() + r.shift;
    sol.s_value = r.s_value;
    sol.newton_iters = r.iters;
    return sol;
}

Instance build_instance(const MultiTaskDataset& ds, const dual::DualBall& ball, Index ell) {
    if (ell < 0 || ell >= ds.num_features()) {
        throw Error(ErrorCode::IndexOutOfRange, "feature " + std::to_string(ell));
    }
    if (ball.center.size() != ds.total_samples()) {
        throw Error(ErrorCode::DimensionMismatch, "ball center length differs from N");
    }
    Eigen::VectorXd corr(ds.num_tasks());
    for (Index t = 0; t < ds.num_tasks(); ++t) {
        corr[t] = ds.X(t).col(ell).dot(ball.center.segment(ds.offset(t), ds.samples(t)));
    }
    return make_instance(ds.column_norms().row(ell).transpose(), corr, ball.radius);
}

double s_ell(const MultiTaskDataset& ds, const dual::DualBall& ball, Index ell) {
    return solve(build_instance(ds, ball, ell)).s_value;
}

Eigen::VectorXd s_all(const MultiTaskDataset& ds, const dual::DualBall& ball) {
    if (ball.center.size() != ds.total_samples()) {
        throw Error(ErrorCode::DimensionMismatch, "ball center length differs from N");
    }
    return s_all(ds, dual::correlations(ds, DualPoint(ball.center, ds)), ball.radius);
}

namespace {

// Fills a, b from feature l's norms and c; u is scratch. All four have length T.
double score_row(const MultiTaskDataset& ds, Index l, double* a, double* b, const double* c, double* u, double radius,
                 bool bounded) {
    const Index T = ds.num_tasks();
    const auto& norms = ds.column_norms();
    const auto& sq_norms = ds.column_sq_norms();
    for (Index t = 0; t < T; ++t) {
        a[t] = sq_norms(l, t);
        b[t] = norms(l, t) * std::abs(c[t]);
        if (!std::isfinite(b[t])) throw Error(ErrorCode::NonFinite, "non-finite ball correlation");
    }
    if (bounded) {
        // Cheap two-sided bounds first; Newton only when they straddle 1.
        // Upper: triangle inequality on the vector |c_t| + ||x_t|| |u_t|.
        // Lower: the feasible point u = radius b / ||b||.
        double cc = 0.0, bb = 0.0, rho = 0.0, abb = 0.0;
        for (Index t = 0; t < T; ++t) {
            cc += c[t] * c[t];
            bb += b[t] * b[t];
            abb += a[t] * b[t] * b[t];
            rho = std::max(rho, a[t]);
        }
        const double upper = std::pow(std::sqrt(cc) + std::sqrt(rho) * radius, 2);
        if (upper < 1.0) return upper;
        const double lower = bb > 0.0 ? cc + 2.0 * radius * std::sqrt(bb) + radius * radius * abb / bb : cc;
        if (lower >= 1.0) return lower;
    }
    return solve_core(View{a, b, c, T, radius}, NewtonOptions{}, u).s_value;
}

Eigen::VectorXd scores(const MultiTaskDataset& ds, const Eigen::MatrixXd& center_corr, double radius, bool bounded) {
    const Index d = ds.num_features();
    const Index T = ds.num_tasks();
    if (center_corr.rows() != d || center_corr.cols() != T) {
        throw Error(ErrorCode::DimensionMismatch, "center correlations must be d x T");
    }
    Eigen::VectorXd s(d);
    std::exception_ptr failure;
#pragma omp parallel
    {
        std::vector<double> buf(static_cast<std::size_t>(4 * T));
        double* a = buf.data();
        double* b = a + T;
        double* c = b + T;
        double* u = c + T;
#pragma omp for schedule(static)
        for (Index l = 0; l < d; ++l) {
            try {
                for (Index t = 0; t < T; ++t) c[t] = center_corr(l, t);
                s[l] = score_row(ds, l, a, b, c, u, radius, bounded);
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return s;
}

}  // namespace

Eigen::VectorXd s_all(const MultiTaskDataset& ds, const Eigen::MatrixXd& center_corr, double radius) {
    return scores(ds, center_corr, radius, false);
}

Eigen::VectorXd s_screen(const MultiTaskDataset& ds, const Eigen::MatrixXd& center_corr, double radius) {
    return scores(ds, center_corr, radius, true);
}

double s_screen_one(const MultiTaskDataset& ds, Index ell, const double* center_corr, double radius) {
    const Index T = ds.num_tasks();
    thread_local std::vector<double> buf;
    buf.resize(static_cast<std::size_t>(3 * T));
    return score_row(ds, ell, buf.data(), buf.data() + T, center_corr, buf.data() + 2 * T, radius, true);
}

}  // namespace mtfl::qp1qc
