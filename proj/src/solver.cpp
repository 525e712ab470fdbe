#include "lodqn/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <chrono>

namespace lodqn {

namespace {

using Clock = std::chrono::steady_clock;

double relativeH1Error(const StructuredMesh& mesh, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& ref)
{
    const double denom = h1Seminorm(mesh, ref);
    return h1Seminorm(mesh, u - ref) / denom;
}

} // namespace

SolveResult solveReference(const StructuredMesh& mesh, const CombinedCoefficient& coeff,
                           const NodalVector& load, double tol, int max_iter,
                           const Eigen::VectorXd& u0, const Eigen::VectorXd* reference)
{
    if (!(tol > 0.0))
        throw std::invalid_argument("solveReference: tol must be positive");
    if (u0.size() != mesh.nodeCount())
        throw std::invalid_argument("solveReference: u0 not on mesh nodes");

    const auto t0 = Clock::now();
    SolveResult out;
    out.solution.tag = MeshTag::fine;

    const Eigen::VectorXd b = restrictFree(mesh, load.values);
    Eigen::VectorXd u = u0;
    Eigen::ArrayXd alpha_prev;
    if (reference)
        out.trace.errors.push_back(relativeH1Error(mesh, u, *reference));

    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::ArrayXd alpha = elementwiseAlpha(coeff, mesh, u);
        if (it > 1 && (alpha == alpha_prev).all()) {
            // The frozen operator did not change, so every further iterate
            // would repeat the current one exactly.
            out.trace.converged = true;
            out.trace.coefficient_fixed_point = true;
            break;
        }
        alpha_prev = alpha;

        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(
            restrictFree(mesh, assembleStiffness(mesh, alpha)).mat);
        if (ldlt.info() != Eigen::Success)
            throw SolverError("solveReference: stiffness factorization failed");
        const Eigen::VectorXd u_free = ldlt.solve(b);
        if (!u_free.allFinite())
            throw SolverError("solveReference: non-finite iterate");
        const Eigen::VectorXd u_new = extendFree(mesh, u_free);

        const double denom = u_new.norm();
        const double inc = denom > 0.0 ? (u_new - u).norm() / denom : (u_new - u).norm();
        out.trace.increments.push_back(inc);
        out.trace.iterations = it;
        u = u_new;
        if (reference)
            out.trace.errors.push_back(relativeH1Error(mesh, u, *reference));
        if (inc <= tol) {
            out.trace.converged = true;
            break;
        }
    }
    out.trace.hit_max_iterations = !out.trace.converged;
    out.solution.values = u;
    out.trace.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    return out;
}

MultiscaleBasis buildBasis(const MeshPair& pair, const TransferOperators& tr,
                           const CorrectorSet& correctors)
{
    if (correctors.coarse_n != pair.coarse.n() || correctors.fine_n != pair.fine.n())
        throw std::invalid_argument("buildBasis: corrector set built for different meshes");

    MultiscaleBasis basis;
    basis.coarse_n = correctors.coarse_n;
    basis.fine_n = correctors.fine_n;
    basis.k = correctors.k;
    basis.kind = correctors.kind;
    basis.fingerprint = correctors.fingerprint;

    std::vector<Eigen::Triplet<double>> trip;
    for (int l = 0; l < pair.coarse.freeCount(); ++l) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(tr.prolong_free, l); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), l, it.value());
        for (const auto& [node, value] : correctors.entries[l]) {
            const int fr = pair.fine.freeIndexOf(node);
            if (fr >= 0 && value != 0.0)
                trip.emplace_back(fr, l, -value);
        }
    }
    basis.phi.resize(pair.fine.freeCount(), pair.coarse.freeCount());
    basis.phi.setFromTriplets(trip.begin(), trip.end());
    basis.phi.makeCompressed();
    return basis;
}

SolveResult solveLod(const MeshPair& pair, const TransferOperators& tr,
                     const MultiscaleBasis& basis, const CombinedCoefficient& coeff,
                     const NodalVector& load, double tol, int max_iter,
                     const Eigen::VectorXd& u0, LodMode mode, const Eigen::VectorXd* reference)
{
    const StructuredMesh& fine = pair.fine;
    if (!(tol > 0.0))
        throw std::invalid_argument("solveLod: tol must be positive");
    if (u0.size() != fine.nodeCount())
        throw std::invalid_argument("solveLod: u0 must be a fine-mesh function");

    const auto t0 = Clock::now();
    SolveResult out;
    out.solution.tag = MeshTag::fine;

    const Eigen::SparseMatrix<double>& phi = basis.phi;
    const Eigen::VectorXd b = restrictFree(fine, load.values);
    const Eigen::VectorXd b_red = mode == LodMode::galerkin
                                      ? Eigen::VectorXd(phi.transpose() * b)
                                      : Eigen::VectorXd(tr.prolong_free.transpose() * b);
    const bool dense_path = phi.cols() <= 4096;

    Eigen::VectorXd u = u0;
    Eigen::VectorXd c = restrictFree(pair.coarse, interpolate(tr, pair, u0));
    Eigen::ArrayXd alpha_prev;
    if (reference)
        out.trace.errors.push_back(relativeH1Error(fine, u, *reference));

    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::ArrayXd alpha = elementwiseAlpha(coeff, fine, u);
        if (it > 1 && (alpha == alpha_prev).all()) {
            out.trace.converged = true;
            out.trace.coefficient_fixed_point = true;
            break;
        }
        alpha_prev = alpha;

        const Eigen::SparseMatrix<double> a_free =
            restrictFree(fine, assembleStiffness(fine, alpha)).mat;
        const Eigen::SparseMatrix<double> a_phi = a_free * phi;
        const Eigen::SparseMatrix<double> reduced =
            mode == LodMode::galerkin
                ? Eigen::SparseMatrix<double>(phi.transpose() * a_phi)
                : Eigen::SparseMatrix<double>(tr.prolong_free.transpose() * a_phi);

        Eigen::VectorXd c_new;
        if (dense_path) {
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(reduced)};
            c_new = lu.solve(b_red);
        } else {
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(reduced);
            if (lu.info() != Eigen::Success)
                throw SolverError("solveLod: reduced system factorization failed");
            c_new = lu.solve(b_red);
        }
        if (!c_new.allFinite())
            throw SolverError("solveLod: non-finite iterate");

        const double denom = c_new.norm();
        const double inc = denom > 0.0 ? (c_new - c).norm() / denom : (c_new - c).norm();
        out.trace.increments.push_back(inc);
        out.trace.iterations = it;
        c = c_new;
        u = extendFree(fine, phi * c);
        if (reference)
            out.trace.errors.push_back(relativeH1Error(fine, u, *reference));
        if (inc <= tol) {
            out.trace.converged = true;
            break;
        }
    }
    out.trace.hit_max_iterations = !out.trace.converged;
    out.solution.values = u;
    out.trace.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    return out;
}

std::vector<StageResult> iterateLod(const MeshPair& pair, const TransferOperators& tr,
                                    const CombinedCoefficient& coeff, const NodalVector& load,
                                    Linearization kind, int k, double tol, int max_iter,
                                    const Eigen::VectorXd& p_star_initial, int stages, int threads)
{
    if (stages < 1)
        throw std::invalid_argument("iterateLod: stages must be >= 1");
    std::vector<StageResult> results;
    Eigen::VectorXd p_star = p_star_initial;
    for (int s = 0; s < stages; ++s) {
        const LinearizationData lin = buildLinearization(coeff, kind, p_star, pair.fine);
        const CorrectorSet set = assembleCorrectorSet(pair, tr, k, lin, threads);
        const MultiscaleBasis basis = buildBasis(pair, tr, set);
        SolveResult solve = solveLod(pair, tr, basis, coeff, load, tol, max_iter, p_star);
        StageResult stage;
        stage.p_star = p_star;
        stage.solution = solve.solution.values;
        stage.trace = solve.trace;
        results.push_back(std::move(stage));
        p_star = results.back().solution;
    }
    return results;
}

} // namespace lodqn
