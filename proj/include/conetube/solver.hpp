#ifndef CONETUBE_SOLVER_HPP
#define CONETUBE_SOLVER_HPP

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <functional>

#include "conetube/l2class.hpp"

namespace conetube {

struct RadialMesh {
    double a = 0.0;
    int M = 0;
    double gamma = 2.0;
    std::vector<double> nodes;  // nodes[i-1] = a (i/M)^gamma for i = 1..M

    double r(int i) const { return nodes[static_cast<size_t>(i - 1)]; }
    double rprime_xi(double xi) const { return a * gamma * std::pow(xi, gamma - 1.0); }
};

inline RadialMesh graded_mesh(double a, int M, double gamma = 2.0) {
    if (!(a > 0.0)) throw validation_error("graded_mesh: tube radius must be positive");
    if (M < 16) throw validation_error("graded_mesh: need at least 16 mesh intervals");
    if (!(gamma >= 1.0)) throw validation_error("graded_mesh: grading power must be >= 1");
    RadialMesh mesh;
    mesh.a = a;
    mesh.M = M;
    mesh.gamma = gamma;
    mesh.nodes.resize(static_cast<size_t>(M));
    for (int i = 1; i <= M; ++i)
        mesh.nodes[static_cast<size_t>(i - 1)] =
            a * std::pow(static_cast<double>(i) / M, gamma);
    return mesh;
}

struct BVPSolution {
    RadialMesh mesh;
    int m = 0;
    Eigen::MatrixXcd values;          // (M-1) x m nodal values, Dirichlet node omitted
    double solution_norm = 0.0;       // weighted L2 norm of the solution
    double rhs_norm = 0.0;            // weighted L2 norm of the data
    double residual = 0.0;            // scaled max FD residual on free interior nodes
    Eigen::VectorXcd inner_matching;  // coefficients against the admissible branches
    std::vector<double> inner_exponents;
};

namespace detail_solver {

using SpMat = Eigen::SparseMatrix<cplx>;

struct ModeSystem {
    RadialMesh mesh;
    int m = 0;
    int n_match = 0;
    int n_adm = 0;
    SpMat A;    // full stiffness (energy form), size m(M-1)
    SpMat Phi;  // constraint basis, maps reduced dofs to nodal values
    SpMat B;    // reduced stiffness Phi^* A Phi
    SpMat Wr;   // reduced mass Phi^* W Phi
    std::vector<double> W;  // nodal volume weights, i = 1..M-1
    std::vector<double> admissible_exponents;
};

/// Discretizes the energy form of -u'' - P u' + Q u in divergence shape,
///   sum over edges of (V/r') |du/dxi|^2 + sum over nodes of V r' Q |u|^2,
/// on the uniform xi-grid behind the graded mesh. The left end has no
/// degree of freedom: the volume weight vanishes at r=0 and the admissible
/// behavior is imposed by constraining the first n_match nodes to the span
/// of the admissible local solution branches.
inline ModeSystem assemble(const RadialOperator& op, const RadialMesh& mesh, int n_match,
                           int N_series) {
    const Geometry& geom = op.geometry();
    if (!(geom.beta > 1.0))
        throw validation_error(
            "solver requires every cone angle below 2*pi (beta > 1); for wider angles the "
            "two extension domains differ and the kernel audit reports the witnesses");
    if (std::abs(mesh.a - geom.a) > 1e-12 * geom.a)
        throw validation_error("mesh radius does not match the geometry");
    if (n_match < 1 || n_match + 4 > mesh.M)
        throw validation_error("matching window must lie well inside the mesh");

    ModeSystem sys;
    sys.mesh = mesh;
    sys.m = op.m();
    sys.n_match = n_match;

    const int M = mesh.M;
    const int m = sys.m;
    const int nf = m * (M - 1);
    const double dxi = 1.0 / M;
    auto V = [&](double r) { return geom.V(r); };

    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<size_t>(nf) * (m + 2));
    sys.W.assign(static_cast<size_t>(M - 1), 0.0);

    auto idx = [&](int i, int c) { return (i - 1) * m + c; };  // node i = 1..M-1

    // Edge conductances E_i between nodes i and i+1 (node M is the Dirichlet wall,
    // node 0 carries no unknown and no flux).
    std::vector<double> E(static_cast<size_t>(M), 0.0);
    for (int i = 1; i < M; ++i) {
        double xi_mid = (i + 0.5) * dxi;
        double r_mid = mesh.a * std::pow(xi_mid, mesh.gamma);
        E[static_cast<size_t>(i)] = V(r_mid) / mesh.rprime_xi(xi_mid) / dxi;
    }

    for (int i = 1; i <= M - 1; ++i) {
        double xi = i * dxi;
        double ri = mesh.r(i);
        double w = V(ri) * mesh.rprime_xi(xi) * dxi;
        sys.W[static_cast<size_t>(i - 1)] = w;

        double diag = E[static_cast<size_t>(i)] + (i > 1 ? E[static_cast<size_t>(i - 1)] : 0.0);
        Eigen::MatrixXcd Qi = op.Q(ri);
        for (int c = 0; c < m; ++c) {
            trip.emplace_back(idx(i, c), idx(i, c), cplx(diag));
            for (int d = 0; d < m; ++d) {
                cplx q = w * Qi(c, d);
                if (q != cplx(0.0)) trip.emplace_back(idx(i, c), idx(i, d), q);
            }
            if (i + 1 <= M - 1) {
                trip.emplace_back(idx(i, c), idx(i + 1, c), cplx(-E[static_cast<size_t>(i)]));
                trip.emplace_back(idx(i + 1, c), idx(i, c), cplx(-E[static_cast<size_t>(i)]));
            }
        }
    }
    sys.A.resize(nf, nf);
    sys.A.setFromTriplets(trip.begin(), trip.end());

    // Constraint basis: the first n_match nodes follow the admissible branches,
    // the rest are free. Branch columns are scaled to unit max entry for
    // conditioning; the scale is folded into the matching coefficients.
    auto basis = admissible_basis(op, N_series);
    sys.n_adm = static_cast<int>(basis.admissible.size());
    std::vector<Eigen::Triplet<cplx>> ptrip;
    for (int j = 0; j < sys.n_adm; ++j) {
        const auto& br = basis.branches[basis.admissible[static_cast<size_t>(j)]];
        sys.admissible_exponents.push_back(br.k);
        Eigen::MatrixXcd col(n_match, m);
        double scale = 0.0;
        for (int i = 1; i <= n_match; ++i) {
            col.row(i - 1) = evaluate_branch(br, mesh.r(i)).u.transpose();
            scale = std::max(scale, col.row(i - 1).lpNorm<Eigen::Infinity>());
        }
        if (scale <= 0.0) throw internal_error("admissible branch vanished on the mesh");
        for (int i = 1; i <= n_match; ++i)
            for (int c = 0; c < m; ++c) {
                cplx v = col(i - 1, c) / scale;
                if (v != cplx(0.0)) ptrip.emplace_back(idx(i, c), j, v);
            }
    }
    for (int i = n_match + 1; i <= M - 1; ++i)
        for (int c = 0; c < m; ++c)
            ptrip.emplace_back(idx(i, c), sys.n_adm + idx(i, c) - idx(n_match + 1, 0),
                               cplx(1.0));
    const int nr = sys.n_adm + m * (M - 1 - n_match);
    sys.Phi.resize(nf, nr);
    sys.Phi.setFromTriplets(ptrip.begin(), ptrip.end());

    SpMat Wfull(nf, nf);
    std::vector<Eigen::Triplet<cplx>> wtrip;
    for (int i = 1; i <= M - 1; ++i)
        for (int c = 0; c < m; ++c)
            wtrip.emplace_back(idx(i, c), idx(i, c), cplx(sys.W[static_cast<size_t>(i - 1)]));
    Wfull.setFromTriplets(wtrip.begin(), wtrip.end());

    sys.B = (sys.Phi.adjoint() * sys.A * sys.Phi).pruned();
    sys.Wr = (sys.Phi.adjoint() * Wfull * sys.Phi).pruned();
    sys.B.makeCompressed();
    sys.Wr.makeCompressed();
    return sys;
}

inline double weighted_norm(const ModeSystem& sys, const Eigen::VectorXcd& full) {
    double s = 0.0;
    const int m = sys.m;
    for (int i = 0; i < sys.mesh.M - 1; ++i)
        s += sys.W[static_cast<size_t>(i)] * full.segment(i * m, m).squaredNorm();
    return std::sqrt(s);
}

} // namespace detail_solver

/// Smallest eigenvalue of the discretized form on the admissible space,
/// generalized against the volume-weight mass matrix. A short inverse-power
/// phase brings the shift near the bottom of the spectrum and Rayleigh
/// iteration polishes it to round-off.
inline double mode_eigmin(const RadialOperator& op, const RadialMesh& mesh, int n_match = 5,
                          int N_series = 20) {
    using detail_solver::SpMat;
    auto sys = detail_solver::assemble(op, mesh, n_match, N_series);
    const int n = static_cast<int>(sys.B.rows());

    Eigen::VectorXcd x = Eigen::VectorXcd::Constant(n, cplx(1.0));
    for (int i = 0; i < n; ++i)
        x(i) += cplx(0.0, 1e-3 * ((static_cast<unsigned>(i) * 2654435761u) % 97u));
    auto wnorm = [&](const Eigen::VectorXcd& v) {
        return std::sqrt(std::real(v.dot(sys.Wr * v)));
    };
    auto rq = [&](const Eigen::VectorXcd& v) {
        return std::real(v.dot(sys.B * v)) / std::real(v.dot(sys.Wr * v));
    };
    x /= wnorm(x);

    Eigen::SparseLU<SpMat> lu;
    lu.compute(sys.B);
    if (lu.info() != Eigen::Success)
        throw internal_error("reduced stiffness factorization failed");
    for (int it = 0; it < 20; ++it) {
        Eigen::VectorXcd y = lu.solve(sys.Wr * x);
        x = y / wnorm(y);
    }
    double sigma = rq(x);

    for (int it = 0; it < 12; ++it) {
        SpMat S = sys.B - sigma * sys.Wr;
        S.makeCompressed();
        Eigen::SparseLU<SpMat> slu;
        slu.compute(S);
        if (slu.info() != Eigen::Success) {
            sigma += 1e-9 * (1.0 + std::abs(sigma));
            continue;
        }
        Eigen::VectorXcd y = slu.solve(sys.Wr * x);
        double ny = wnorm(y);
        if (!(ny > 0.0) || !std::isfinite(ny)) break;
        x = y / ny;
        double next = rq(x);
        bool done = std::abs(next - sigma) < 1e-12 * (1.0 + std::abs(next));
        sigma = next;
        if (done) break;
    }
    return sigma;
}

/// Solves L u = rhs on the graded mesh with admissible inner behavior and a
/// homogeneous Dirichlet outer condition.
inline BVPSolution solve_mode(const RadialOperator& op,
                              const std::function<Eigen::VectorXcd(double)>& rhs,
                              const RadialMesh& mesh, int n_match = 5, int N_series = 20) {
    using detail_solver::SpMat;
    auto sys = detail_solver::assemble(op, mesh, n_match, N_series);
    const int M = mesh.M;
    const int m = sys.m;
    const int nf = m * (M - 1);

    Eigen::VectorXcd f(nf), wf(nf);
    for (int i = 1; i <= M - 1; ++i) {
        Eigen::VectorXcd fi = rhs(mesh.r(i));
        if (fi.size() != m) throw validation_error("rhs dimension does not match the block");
        f.segment((i - 1) * m, m) = fi;
        wf.segment((i - 1) * m, m) = sys.W[static_cast<size_t>(i - 1)] * fi;
    }

    Eigen::VectorXcd fr = sys.Phi.adjoint() * wf;
    Eigen::SparseLU<SpMat> lu;
    lu.compute(sys.B);
    if (lu.info() != Eigen::Success)
        throw internal_error("reduced stiffness factorization failed");
    Eigen::VectorXcd c = lu.solve(fr);
    Eigen::VectorXcd full = sys.Phi * c;

    BVPSolution sol;
    sol.mesh = mesh;
    sol.m = m;
    sol.values.resize(M - 1, m);
    for (int i = 0; i < M - 1; ++i) sol.values.row(i) = full.segment(i * m, m).transpose();
    sol.solution_norm = detail_solver::weighted_norm(sys, full);
    sol.rhs_norm = detail_solver::weighted_norm(sys, f);
    sol.inner_matching = c.head(sys.n_adm);
    sol.inner_exponents = sys.admissible_exponents;

    // FD residual per unit weight on the free interior nodes.
    Eigen::VectorXcd res = sys.A * full - wf;
    double rmax = 0.0;
    for (int i = n_match + 1; i <= M - 2; ++i) {
        double wi = sys.W[static_cast<size_t>(i - 1)];
        rmax = std::max(rmax, res.segment((i - 1) * m, m).norm() / wi);
    }
    double fscale = 0.0;
    for (int i = 1; i <= M - 1; ++i)
        fscale = std::max(fscale, f.segment((i - 1) * m, m).norm());
    sol.residual = rmax / std::max(1.0, fscale);
    return sol;
}

struct BlockAudit {
    std::string block;
    double eigmin = 0.0;
    bool kernel_empty = false;
};

struct DomainWitness {
    std::string block;
    double k = 0.0;
    double grad_u_exponent = 0.0;
};

struct AuditReport {
    bool wide_angle = false;  // some cone angle is 2*pi or more (beta <= 1)
    std::vector<BlockAudit> blocks;
    std::vector<DomainWitness> witnesses;
    bool all_kernel_empty = false;
};

/// Certifies kernel triviality block by block for beta > 1; for beta <= 1 it
/// instead lists the branches that are admissible for (u, du) yet leave the
/// gradient route, the exponent-level failure of domain equality.
inline AuditReport kernel_audit(const Geometry& geom, const std::vector<ModeBlock>& blocks,
                                int M = 256, int n_match = 5, int N_series = 20) {
    AuditReport rep;
    if (!(geom.beta > 1.0)) {
        rep.wide_angle = true;
        for (const auto& blk : blocks) {
            auto op = radial_operator(geom, blk, OperatorForm::shifted);
            auto ab = admissible_basis(op, N_series);
            for (size_t i = 0; i < ab.branches.size(); ++i) {
                const auto& mc = ab.classes[i];
                if (mc.admissible && !mc.grad_u.in_L2)
                    rep.witnesses.push_back(
                        {block_key(blk), ab.branches[i].k, mc.grad_u.exponent});
            }
        }
        rep.all_kernel_empty = false;
        return rep;
    }
    auto mesh = graded_mesh(geom.a, M);
    rep.all_kernel_empty = true;
    for (const auto& blk : blocks) {
        auto op = radial_operator(geom, blk, OperatorForm::shifted);
        BlockAudit ba;
        ba.block = block_key(blk);
        ba.eigmin = mode_eigmin(op, mesh, n_match, N_series);
        ba.kernel_empty = ba.eigmin >= (geom.n - 1.0) - 1e-2;
        rep.all_kernel_empty = rep.all_kernel_empty && ba.kernel_empty;
        rep.blocks.push_back(ba);
    }
    return rep;
}

struct FieldSolution {
    std::vector<std::string> block_keys;
    std::vector<BVPSolution> solutions;
    double aggregate_solution_norm = 0.0;
    double aggregate_rhs_norm = 0.0;
};

/// Per-mode solves plus Parseval aggregation of the weighted norms.
inline FieldSolution solve_field(
    const Geometry& geom, const std::vector<ModeBlock>& blocks,
    const std::vector<std::function<Eigen::VectorXcd(double)>>& rhs, const RadialMesh& mesh,
    int n_match = 5, int N_series = 20) {
    if (blocks.size() != rhs.size())
        throw validation_error("one rhs function per block is required");
    FieldSolution out;
    double s2 = 0.0, f2 = 0.0;
    for (size_t b = 0; b < blocks.size(); ++b) {
        auto op = radial_operator(geom, blocks[b], OperatorForm::shifted);
        out.block_keys.push_back(block_key(blocks[b]));
        out.solutions.push_back(solve_mode(op, rhs[b], mesh, n_match, N_series));
        s2 += sq(out.solutions.back().solution_norm);
        f2 += sq(out.solutions.back().rhs_norm);
    }
    out.aggregate_solution_norm = std::sqrt(s2);
    out.aggregate_rhs_norm = std::sqrt(f2);
    return out;
}

} // namespace conetube

#endif
