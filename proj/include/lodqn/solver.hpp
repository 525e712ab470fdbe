#pragma once

#include "lodqn/coefficient.hpp"
#include "lodqn/corrector.hpp"
#include "lodqn/fem.hpp"
#include "lodqn/interpolation.hpp"
#include "lodqn/mesh.hpp"

#include <optional>
#include <vector>

namespace lodqn {

/// One Kacanov fixed-point run. increments[i] is the relative Euclidean
/// increment after solve i+1; errors (when a reference was supplied) start
/// with the error of the initial guess at index 0. coefficient_fixed_point
/// marks convergence detected through a bit-identical coefficient array, in
/// which case further iterates could not change.
struct SolveTrace {
    int iterations = 0;
    std::vector<double> increments;
    std::vector<double> errors;
    bool converged = false;
    bool hit_max_iterations = false;
    bool coefficient_fixed_point = false;
    double wall_ms = 0.0;
};

struct SolveResult {
    NodalVector solution;  // all nodes of the solve mesh
    SolveTrace trace;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fine (or coarse) FEM reference solve of the nonlinear problem by Kacanov
/// iteration: u^{n+1} solves the linear system with alpha frozen at u^n.
SolveResult solveReference(const StructuredMesh& mesh, const CombinedCoefficient& coeff,
                           const NodalVector& load, double tol, int max_iter,
                           const Eigen::VectorXd& u0,
                           const Eigen::VectorXd* reference = nullptr);

/// Corrected coarse space (id - Q^k) V_H as a sparse fine-free x coarse-free
/// basis matrix.
struct MultiscaleBasis {
    Eigen::SparseMatrix<double> phi;
    int coarse_n = 0;
    int fine_n = 0;
    int k = 0;
    Linearization kind = Linearization::kacanov;
    Fingerprint fingerprint{};
};

MultiscaleBasis buildBasis(const MeshPair& pair, const TransferOperators& tr,
                           const CorrectorSet& correctors);

enum class LodMode { galerkin, petrov_galerkin };

/// Kacanov iteration on the multiscale space. Each step assembles the fine
/// stiffness at the current iterate and solves Phi^T A Phi c = Phi^T b
/// (Galerkin) or Psi^T A Phi c = Psi^T b with coarse-hat tests Psi
/// (Petrov-Galerkin). u0 is a fine-mesh function; the increment is measured
/// on the coarse coefficient vector.
SolveResult solveLod(const MeshPair& pair, const TransferOperators& tr,
                     const MultiscaleBasis& basis, const CombinedCoefficient& coeff,
                     const NodalVector& load, double tol, int max_iter,
                     const Eigen::VectorXd& u0, LodMode mode = LodMode::galerkin,
                     const Eigen::VectorXd* reference = nullptr);

struct StageResult {
    Eigen::VectorXd p_star;
    Eigen::VectorXd solution;
    SolveTrace trace;
};

/// Cascade of LOD solves: stage s linearizes the correctors at p*_s and the
/// next stage reuses the resulting solution as its linearization point.
std::vector<StageResult> iterateLod(const MeshPair& pair, const TransferOperators& tr,
                                    const CombinedCoefficient& coeff, const NodalVector& load,
                                    Linearization kind, int k, double tol, int max_iter,
                                    const Eigen::VectorXd& p_star_initial, int stages,
                                    int threads = 0);

} // namespace lodqn
