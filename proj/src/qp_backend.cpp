/*
 Copyright 2026 The sgpmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "sgpmpc/qp_backend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sgpmpc {

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Largest alpha in (0, 1] keeping v + alpha * dv >= 0 on the masked entries.
double max_step(const Vector& v, const Vector& dv, const Vector& mask) {
    double alpha = 1.0;
    for (Index i = 0; i < v.size(); ++i) {
        if (mask(i) != 0.0 && dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    }
    return alpha;
}

struct Direction {
    Vector dx, dy, dz, ds, dt, dw;
};

}  // namespace

const char* to_string(QpStatus status) {
    switch (status) {
        case QpStatus::Optimal:
            return "optimal";
        case QpStatus::MaxIterations:
            return "max_iter";
        case QpStatus::Infeasible:
            return "infeasible";
    }
    return "unknown";
}

void DenseQp::validate() const {
    const Index n = q.size();
    if (P.rows() != n || P.cols() != n) throw InvalidArgument("QP: Hessian shape mismatch");
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
        throw InvalidArgument("QP: equality shape mismatch");
    if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n))
        throw InvalidArgument("QP: inequality shape mismatch");
    if (!soft.empty() && static_cast<Index>(soft.size()) != h.size())
        throw InvalidArgument("QP: soft flags must match inequality rows");
    if (!(soft_weight > 0.0)) throw InvalidArgument("QP: soft weight must be positive");
    if (!P.allFinite() || !q.allFinite() || !A.allFinite() || !b.allFinite() || !G.allFinite() ||
        !h.allFinite())
        throw InvalidArgument("QP: non-finite data");
}

QpSolution solve_qp(const DenseQp& qp, const QpOptions& options) {
    qp.validate();
    const Index n = qp.variables();
    const Index p = qp.equalities();
    const Index m = qp.inequalities();
    const double rho = qp.soft_weight;

    Vector soft_mask = Vector::Zero(m);
    for (Index i = 0; i < m; ++i) soft_mask(i) = qp.is_soft(i) ? 1.0 : 0.0;
    const Vector all = Vector::Ones(m);
    const double pairs = static_cast<double>(m) + soft_mask.sum();

    Matrix A = p > 0 ? qp.A : Matrix(0, n);
    Matrix G = m > 0 ? qp.G : Matrix(0, n);

    const double scale_d = 1.0 + inf_norm(qp.q);
    const double scale_p = 1.0 + std::max(inf_norm(qp.b), inf_norm(qp.h));

    // Factorizes the reduced system once per iteration and solves for any
    // complementarity right-hand side.
    Matrix K(n, n);
    Eigen::LLT<Matrix> llt;
    Eigen::LDLT<Matrix> ldlt;
    Eigen::PartialPivLU<Matrix> lu;
    bool use_llt = true;
    auto factor = [&](const Vector& D) {
        K = qp.P;
        if (m > 0) K.noalias() += G.transpose() * D.cwiseInverse().asDiagonal() * G;
        if (p == 0) {
            llt.compute(K);
            use_llt = llt.info() == Eigen::Success;
            if (!use_llt) ldlt.compute(K);
        } else {
            Matrix kkt = Matrix::Zero(n + p, n + p);
            kkt.topLeftCorner(n, n) = K;
            kkt.topRightCorner(n, p) = A.transpose();
            kkt.bottomLeftCorner(p, n) = A;
            lu.compute(kkt);
        }
    };

    auto linear_solve = [&](const Vector& rhs_x, const Vector& rhs_y, Vector& dx, Vector& dy) {
        if (p == 0) {
            if (use_llt)
                dx = llt.solve(rhs_x);
            else
                dx = ldlt.solve(rhs_x);
            dy.resize(0);
        } else {
            Vector rhs(n + p);
            rhs << rhs_x, rhs_y;
            const Vector sol = lu.solve(rhs);
            dx = sol.head(n);
            dy = sol.tail(p);
        }
    };

    // Initial point: equality-constrained minimizer, then shifted slacks.
    Vector x(n), y(p);
    {
        const Vector D0 = Vector::Constant(m, 1e6);  // weak inequality influence
        factor(D0);
        linear_solve(-qp.q, qp.b, x, y);
    }
    Vector s(m), z = Vector::Ones(m), t = Vector::Zero(m), w = Vector::Zero(m);
    const Vector gap0 = m > 0 ? Vector(qp.h - G * x) : Vector(0);
    for (Index i = 0; i < m; ++i) {
        s(i) = std::max(gap0(i), 1.0);
        if (soft_mask(i) != 0.0) {
            t(i) = std::max(-gap0(i), 0.0) + 1.0;
            w(i) = std::max(rho - z(i), 1.0);
        }
    }

    QpSolution sol;
    auto residuals = [&](Vector& r_x, Vector& r_y, Vector& r_p, Vector& r_t) {
        r_x = qp.P * x + qp.q;
        if (p > 0) r_x.noalias() += A.transpose() * y;
        if (m > 0) r_x.noalias() += G.transpose() * z;
        r_y = p > 0 ? Vector(A * x - qp.b) : Vector(0);
        r_p = m > 0 ? Vector(G * x + s - soft_mask.cwiseProduct(t) - qp.h) : Vector(0);
        r_t = soft_mask.cwiseProduct(Vector::Constant(m, rho) - z - w);
    };

    auto direction = [&](const Vector& r_x, const Vector& r_y, const Vector& r_p, const Vector& r_t,
                         const Vector& D, const Vector& r_sz, const Vector& r_tw) {
        Direction d;
        Vector rho_tilde = r_p - r_sz.cwiseQuotient(z);
        for (Index i = 0; i < m; ++i)
            if (soft_mask(i) != 0.0) rho_tilde(i) += (r_tw(i) + t(i) * r_t(i)) / w(i);
        Vector rhs_x = -r_x;
        if (m > 0) rhs_x.noalias() -= G.transpose() * rho_tilde.cwiseQuotient(D);
        linear_solve(rhs_x, -r_y, d.dx, d.dy);
        d.dz = m > 0 ? Vector((G * d.dx + rho_tilde).cwiseQuotient(D)) : Vector(0);
        d.ds = (-r_sz - s.cwiseProduct(d.dz)).cwiseQuotient(z);
        d.dw = soft_mask.cwiseProduct(r_t - d.dz);
        d.dt = Vector::Zero(m);
        for (Index i = 0; i < m; ++i)
            if (soft_mask(i) != 0.0) d.dt(i) = (-r_tw(i) - t(i) * d.dw(i)) / w(i);
        return d;
    };

    auto step_length = [&](const Direction& d) {
        double alpha = std::min(max_step(s, d.ds, all), max_step(z, d.dz, all));
        alpha = std::min(alpha, std::min(max_step(t, d.dt, soft_mask), max_step(w, d.dw, soft_mask)));
        return alpha;
    };

    // Stationarity and primal residuals are measured relative to the data
    // scale, complementarity in absolute terms. The best iterate is kept so
    // that a late loss of accuracy (tiny slacks against huge multipliers)
    // cannot spoil an already usable point.
    const double scale_mu = 1.0;
    auto merit = [&](double stat, double prim, double comp) {
        return std::max({stat / scale_d, prim / scale_p, comp / scale_mu});
    };
    struct Snapshot {
        Vector x, y, z, s, t;
        double stat, prim, comp;
    };
    Snapshot best{x, y, z, s, t, 0.0, 0.0, 0.0};
    double best_merit = std::numeric_limits<double>::infinity();
    int stalled = 0;

    Vector r_x, r_y, r_p, r_t;
    for (int iter = 0;; ++iter) {
        residuals(r_x, r_y, r_p, r_t);
        const double mu = pairs > 0 ? (s.dot(z) + t.dot(w)) / pairs : 0.0;
        // complementarity is judged pairwise, not on the average
        const double comp = m > 0 ? std::max(inf_norm(s.cwiseProduct(z)), inf_norm(t.cwiseProduct(w))) : 0.0;
        const double stat = inf_norm(r_x);
        const double prim = std::max({inf_norm(r_y), inf_norm(r_p), inf_norm(r_t) / (1.0 + rho)});
        sol.iterations = iter;

        const double current = merit(stat, prim, comp);
        if (std::isfinite(current) && current < best_merit) {
            if (current < 0.5 * best_merit) stalled = 0;
            best_merit = current;
            best = {x, y, z, s, t, stat, prim, comp};
        } else {
            ++stalled;
        }
        if (stat <= options.tol * scale_d && prim <= options.tol * scale_p && comp <= options.tol * scale_mu) {
            sol.status = QpStatus::Optimal;
            break;
        }
        if (m > 0 && inf_norm(z) > 1e12 && prim > options.tol * scale_p) {
            sol.status = QpStatus::Infeasible;
            break;
        }
        if (iter >= options.max_iter || stalled >= 15 || !std::isfinite(current)) {
            sol.status = QpStatus::MaxIterations;
            break;
        }

        Vector D = s.cwiseQuotient(z);
        for (Index i = 0; i < m; ++i)
            if (soft_mask(i) != 0.0) D(i) += t(i) / w(i);
        factor(D);

        // predictor
        const Vector r_sz_aff = s.cwiseProduct(z);
        const Vector r_tw_aff = t.cwiseProduct(w);
        const Direction aff = direction(r_x, r_y, r_p, r_t, D, r_sz_aff, r_tw_aff);
        if (m == 0) {
            x += aff.dx;
            y += aff.dy;
            continue;
        }
        const double alpha_aff = step_length(aff);
        const double mu_aff = ((s + alpha_aff * aff.ds).dot(z + alpha_aff * aff.dz) +
                               (t + alpha_aff * aff.dt).dot(w + alpha_aff * aff.dw)) /
                              pairs;
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        // corrector
        const Vector r_sz = r_sz_aff + aff.ds.cwiseProduct(aff.dz) - Vector::Constant(m, sigma * mu);
        Vector r_tw = r_tw_aff + aff.dt.cwiseProduct(aff.dw) - Vector::Constant(m, sigma * mu);
        r_tw = r_tw.cwiseProduct(soft_mask);
        const Direction d = direction(r_x, r_y, r_p, r_t, D, r_sz, r_tw);
        const double alpha = std::min(1.0, 0.995 * step_length(d));

        x += alpha * d.dx;
        y += alpha * d.dy;
        z += alpha * d.dz;
        s += alpha * d.ds;
        t += alpha * d.dt;
        w += alpha * d.dw;
    }

    if (sol.status != QpStatus::Optimal && std::isfinite(best_merit)) {
        x = best.x;
        y = best.y;
        z = best.z;
        t = best.t;
        sol.stationarity = best.stat;
        sol.primal_residual = best.prim;
        sol.complementarity = best.comp;
    } else {
        residuals(r_x, r_y, r_p, r_t);
        sol.stationarity = inf_norm(r_x);
        sol.primal_residual = std::max({inf_norm(r_y), inf_norm(r_p), inf_norm(r_t) / (1.0 + rho)});
        sol.complementarity = m > 0 ? std::max(inf_norm(s.cwiseProduct(z)), inf_norm(t.cwiseProduct(w))) : 0.0;
    }
    if (!x.allFinite()) sol.status = QpStatus::Infeasible;

    sol.x = x;
    sol.y = y;
    sol.z = z;
    sol.slack = t;
    return sol;
}

Matrix regularize_hessian(const Matrix& hessian, double floor) {
    if (hessian.rows() != hessian.cols()) throw InvalidArgument("Hessian must be square");
    Matrix sym = 0.5 * (hessian + hessian.transpose());
    if (sym.rows() == 0) return sym;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    const double eps = std::max(0.0, floor - eig.eigenvalues().minCoeff());
    sym.diagonal().array() += eps;
    return sym;
}

OcpQp::OcpQp(Index samples_, Index horizon_, Index n_x_, Index n_u_)
    : samples(samples_), horizon(horizon_), n_x(n_x_), n_u(n_u_) {
    if (samples < 1 || horizon < 1 || n_x < 1 || n_u < 1)
        throw InvalidArgument("OCP dimensions must be positive");
    const auto N = static_cast<std::size_t>(samples);
    const auto H = static_cast<std::size_t>(horizon);
    x0_offset.assign(N, Vector::Zero(n_x));
    A.assign(N, std::vector<Matrix>(H, Matrix::Identity(n_x, n_x)));
    B.assign(N, std::vector<Matrix>(H, Matrix::Zero(n_x, n_u)));
    c.assign(N, std::vector<Vector>(H, Vector::Zero(n_x)));
    hessian.assign(N, std::vector<Matrix>(H + 1, Matrix::Zero(n_x + n_u, n_x + n_u)));
    gradient.assign(N, std::vector<Vector>(H + 1, Vector::Zero(n_x + n_u)));
    StageRows empty{Matrix(0, n_x), Matrix(0, n_u), Vector(0), {}};
    state_rows.assign(N, std::vector<StageRows>(H + 1, empty));
    input_rows.assign(H, empty);
    for (auto& per_sample : hessian) per_sample[H] = Matrix::Zero(n_x, n_x);
    for (auto& per_sample : gradient) per_sample[H] = Vector::Zero(n_x);
}

void OcpQp::validate() const {
    const auto N = static_cast<std::size_t>(samples);
    const auto H = static_cast<std::size_t>(horizon);
    auto fail = [](const char* what) { throw InvalidArgument(std::string("OCP QP: ") + what); };
    if (x0_offset.size() != N || A.size() != N || B.size() != N || c.size() != N ||
        hessian.size() != N || gradient.size() != N || state_rows.size() != N || input_rows.size() != H)
        fail("per-sample containers have the wrong size");
    for (std::size_t n = 0; n < N; ++n) {
        if (x0_offset[n].size() != n_x) fail("initial offset shape");
        if (A[n].size() != H || B[n].size() != H || c[n].size() != H) fail("dynamics length");
        if (hessian[n].size() != H + 1 || gradient[n].size() != H + 1 || state_rows[n].size() != H + 1)
            fail("stage data length");
        for (std::size_t i = 0; i <= H; ++i) {
            const Index dim = i < H ? n_x + n_u : n_x;
            if (hessian[n][i].rows() != dim || hessian[n][i].cols() != dim) fail("Hessian block shape");
            if (gradient[n][i].size() != dim) fail("gradient block shape");
            const auto& r = state_rows[n][i];
            if (r.Cx.rows() != r.size() || (r.size() > 0 && r.Cx.cols() != n_x)) fail("state row shape");
            if (i < H && r.size() > 0 && (r.Cu.rows() != r.size() || r.Cu.cols() != n_u))
                fail("state row input shape");
            if (i < H) {
                if (A[n][i].rows() != n_x || A[n][i].cols() != n_x) fail("A shape");
                if (B[n][i].rows() != n_x || B[n][i].cols() != n_u) fail("B shape");
                if (c[n][i].size() != n_x) fail("c shape");
            }
        }
    }
    for (const auto& r : input_rows)
        if (r.Cu.rows() != r.size() || (r.size() > 0 && r.Cu.cols() != n_u)) fail("input row shape");
}

void OcpQp::regularize(double floor) {
    for (auto& per_sample : hessian)
        for (auto& block : per_sample) block = regularize_hessian(block, floor);
}

namespace {

bool row_soft(const StageRows& r, Index k) {
    return !r.soft.empty() && r.soft[static_cast<std::size_t>(k)];
}

Index count_rows(const OcpQp& ocp) {
    Index rows = 0;
    for (const auto& per_sample : ocp.state_rows)
        for (const auto& r : per_sample) rows += r.size();
    for (const auto& r : ocp.input_rows) rows += r.size();
    return rows;
}

// Locates the first stage whose hard rows are violated by the primal point.
Index first_violation(const DenseQp& qp, const Vector& x, const std::vector<Index>& row_stage) {
    if (qp.inequalities() == 0) return -1;
    const Vector viol = qp.G * x - qp.h;
    const double tol = 1e-6 * (1.0 + inf_norm(qp.h));
    Index stage = -1;
    for (Index k = 0; k < viol.size(); ++k) {
        if (qp.is_soft(k) || viol(k) <= tol) continue;
        const Index s = row_stage[static_cast<std::size_t>(k)];
        if (stage < 0 || s < stage) stage = s;
    }
    return stage;
}

}  // namespace

CondensedQp condense(const OcpQp& ocp) {
    ocp.validate();
    const Index N = ocp.samples, H = ocp.horizon, nx = ocp.n_x, nu = ocp.n_u;
    const Index nv = H * nu;
    CondensedQp out;
    out.offset.assign(static_cast<std::size_t>(N), {});
    out.gamma.assign(static_cast<std::size_t>(N), {});

    DenseQp& qp = out.qp;
    qp.P = Matrix::Zero(nv, nv);
    qp.q = Vector::Zero(nv);
    qp.A.resize(0, nv);
    qp.b.resize(0);
    qp.soft_weight = ocp.soft_weight;
    const Index rows = count_rows(ocp);
    qp.G.resize(rows, nv);
    qp.h.resize(rows);
    qp.soft.assign(static_cast<std::size_t>(rows), 0);
    out.row_stage.assign(static_cast<std::size_t>(rows), 0);
    Index row = 0;

    Matrix M(nx + nu, nv);
    for (Index n = 0; n < N; ++n) {
        const auto sn = static_cast<std::size_t>(n);
        auto& off = out.offset[sn];
        auto& gam = out.gamma[sn];
        off.resize(static_cast<std::size_t>(H + 1));
        gam.resize(static_cast<std::size_t>(H + 1));
        off[0] = ocp.x0_offset[sn];
        gam[0] = Matrix::Zero(nx, nv);
        for (Index i = 0; i < H; ++i) {
            const auto si = static_cast<std::size_t>(i);
            off[si + 1] = ocp.A[sn][si] * off[si] + ocp.c[sn][si];
            gam[si + 1] = ocp.A[sn][si] * gam[si];
            gam[si + 1].middleCols(i * nu, nu) += ocp.B[sn][si];
        }

        for (Index i = 0; i <= H; ++i) {
            const auto si = static_cast<std::size_t>(i);
            const Matrix& Hs = ocp.hessian[sn][si];
            const Vector& g = ocp.gradient[sn][si];
            if (i < H) {
                M.topRows(nx) = gam[si];
                M.bottomRows(nu).setZero();
                M.bottomRows(nu).middleCols(i * nu, nu).setIdentity();
                Vector e = Vector::Zero(nx + nu);
                e.head(nx) = off[si];
                qp.P.noalias() += M.transpose() * Hs * M;
                qp.q.noalias() += M.transpose() * (Hs * e + g);
            } else {
                qp.P.noalias() += gam[si].transpose() * Hs * gam[si];
                qp.q.noalias() += gam[si].transpose() * (Hs * off[si] + g);
            }

            const StageRows& r = ocp.state_rows[sn][si];
            for (Index k = 0; k < r.size(); ++k, ++row) {
                qp.G.row(row) = r.Cx.row(k) * gam[si];
                if (i < H) qp.G.row(row).segment(i * nu, nu) += r.Cu.row(k);
                qp.h(row) = r.d(k) - r.Cx.row(k).dot(off[si]);
                qp.soft[static_cast<std::size_t>(row)] = row_soft(r, k);
                out.row_stage[static_cast<std::size_t>(row)] = i;
            }
        }
    }
    for (Index i = 0; i < H; ++i) {
        const StageRows& r = ocp.input_rows[static_cast<std::size_t>(i)];
        for (Index k = 0; k < r.size(); ++k, ++row) {
            qp.G.row(row).setZero();
            qp.G.row(row).segment(i * nu, nu) = r.Cu.row(k);
            qp.h(row) = r.d(k);
            qp.soft[static_cast<std::size_t>(row)] = row_soft(r, k);
            out.row_stage[static_cast<std::size_t>(row)] = i;
        }
    }
    qp.P = 0.5 * (qp.P + qp.P.transpose()).eval();
    return out;
}

OcpSolution CondensedQp::expand(const QpSolution& solution, const OcpQp& ocp) const {
    OcpSolution out;
    const Index H = ocp.horizon, nu = ocp.n_u, nx = ocp.n_x;
    out.du = Eigen::Map<const Matrix>(solution.x.data(), nu, H);
    out.dx.resize(static_cast<std::size_t>(ocp.samples));
    for (std::size_t n = 0; n < out.dx.size(); ++n) {
        out.dx[n].resize(nx, H + 1);
        for (Index i = 0; i <= H; ++i) {
            const auto si = static_cast<std::size_t>(i);
            out.dx[n].col(i) = offset[n][si] + gamma[n][si] * solution.x;
        }
    }
    out.status = solution.status;
    out.iterations = solution.iterations;
    out.max_slack = solution.slack.size() > 0 ? solution.slack.maxCoeff() : 0.0;
    out.first_violated_stage = first_violation(qp, solution.x, row_stage);
    return out;
}

OcpSolution solve_condensed(const OcpQp& ocp, const QpOptions& options) {
    const CondensedQp condensed = condense(ocp);
    const QpSolution r = solve_qp(condensed.qp, options);
    return condensed.expand(r, ocp);
}

OcpSolution solve_sparse(const OcpQp& ocp, const QpOptions& options) {
    ocp.validate();
    const Index N = ocp.samples, H = ocp.horizon, nx = ocp.n_x, nu = ocp.n_u;
    const Index nu_total = H * nu;
    const Index nv = nu_total + N * (H + 1) * nx;
    auto xi = [&](Index n, Index i) { return nu_total + (n * (H + 1) + i) * nx; };

    DenseQp qp;
    qp.soft_weight = ocp.soft_weight;
    qp.P = Matrix::Zero(nv, nv);
    qp.q = Vector::Zero(nv);
    const Index neq = N * (H + 1) * nx;
    qp.A = Matrix::Zero(neq, nv);
    qp.b = Vector::Zero(neq);
    const Index rows = count_rows(ocp);
    qp.G = Matrix::Zero(rows, nv);
    qp.h.resize(rows);
    qp.soft.assign(static_cast<std::size_t>(rows), 0);
    std::vector<Index> row_stage(static_cast<std::size_t>(rows), 0);

    Index eq = 0, row = 0;
    for (Index n = 0; n < N; ++n) {
        const auto sn = static_cast<std::size_t>(n);
        qp.A.block(eq, xi(n, 0), nx, nx).setIdentity();
        qp.b.segment(eq, nx) = ocp.x0_offset[sn];
        eq += nx;
        for (Index i = 0; i < H; ++i) {
            const auto si = static_cast<std::size_t>(i);
            qp.A.block(eq, xi(n, i + 1), nx, nx).setIdentity();
            qp.A.block(eq, xi(n, i), nx, nx) = -ocp.A[sn][si];
            qp.A.block(eq, i * nu, nx, nu) = -ocp.B[sn][si];
            qp.b.segment(eq, nx) = ocp.c[sn][si];
            eq += nx;
        }
        for (Index i = 0; i <= H; ++i) {
            const auto si = static_cast<std::size_t>(i);
            const Matrix& Hs = ocp.hessian[sn][si];
            const Vector& g = ocp.gradient[sn][si];
            const Index x0 = xi(n, i);
            qp.P.block(x0, x0, nx, nx) += Hs.topLeftCorner(nx, nx);
            qp.q.segment(x0, nx) += g.head(nx);
            if (i < H) {
                const Index u0 = i * nu;
                qp.P.block(x0, u0, nx, nu) += Hs.topRightCorner(nx, nu);
                qp.P.block(u0, x0, nu, nx) += Hs.bottomLeftCorner(nu, nx);
                qp.P.block(u0, u0, nu, nu) += Hs.bottomRightCorner(nu, nu);
                qp.q.segment(u0, nu) += g.tail(nu);
            }
            const StageRows& r = ocp.state_rows[sn][si];
            for (Index k = 0; k < r.size(); ++k, ++row) {
                qp.G.row(row).segment(x0, nx) = r.Cx.row(k);
                if (i < H) qp.G.row(row).segment(i * nu, nu) = r.Cu.row(k);
                qp.h(row) = r.d(k);
                qp.soft[static_cast<std::size_t>(row)] = row_soft(r, k);
                row_stage[static_cast<std::size_t>(row)] = i;
            }
        }
    }
    for (Index i = 0; i < H; ++i) {
        const StageRows& r = ocp.input_rows[static_cast<std::size_t>(i)];
        for (Index k = 0; k < r.size(); ++k, ++row) {
            qp.G.row(row).segment(i * nu, nu) = r.Cu.row(k);
            qp.h(row) = r.d(k);
            qp.soft[static_cast<std::size_t>(row)] = row_soft(r, k);
            row_stage[static_cast<std::size_t>(row)] = i;
        }
    }

    const QpSolution sol = solve_qp(qp, options);
    OcpSolution out;
    out.du = Eigen::Map<const Matrix>(sol.x.data(), nu, H);
    out.dx.resize(static_cast<std::size_t>(N));
    for (Index n = 0; n < N; ++n)
        out.dx[static_cast<std::size_t>(n)] = Eigen::Map<const Matrix>(sol.x.data() + xi(n, 0), nx, H + 1);
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.max_slack = sol.slack.size() > 0 ? sol.slack.maxCoeff() : 0.0;
    out.first_violated_stage = first_violation(qp, sol.x, row_stage);
    return out;
}

}  // namespace sgpmpc
