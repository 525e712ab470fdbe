#pragma once

#include "lodqn/fem.hpp"
#include "lodqn/mesh.hpp"

#include <Eigen/SparseCholesky>

#include <memory>
#include <vector>

namespace lodqn {

/// Coarse<->fine transfer for the L^2 projection I_H.
///
/// prolong maps all coarse nodes to all fine nodes (fine nodal values of each
/// coarse hat; exact because the meshes are nested). cross_mass C[l,j] =
/// int Lambda_l phi_j over coarse/fine free nodes, assembled directly on the
/// fine mesh; it agrees with P^T M_h entrywise. coarse_mass is M_H on free
/// nodes, kept factorized for interpolate().
struct TransferOperators {
    Eigen::SparseMatrix<double> prolong;      // fine nodes x coarse nodes
    Eigen::SparseMatrix<double> prolong_free; // fine free x coarse free
    Eigen::SparseMatrix<double> cross_mass;   // coarse free x fine free
    Eigen::SparseMatrix<double> coarse_mass;  // coarse free x coarse free
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> coarse_mass_solver;
};

TransferOperators buildTransfer(const MeshPair& pair);

/// L^2 projection onto V_H with zero boundary values: M_H^{-1} C v.
/// Input and output are full-length nodal vectors.
Eigen::VectorXd interpolate(const TransferOperators& tr, const MeshPair& pair,
                            const Eigen::VectorXd& v_fine);

/// Fine nodal values of the coarse function with full-length coefficients w.
Eigen::VectorXd prolong(const TransferOperators& tr, const Eigen::VectorXd& w_coarse);

/// Rows of C restricted to the patch: columns are patch.fine_interior_nodes,
/// rows the coarse free nodes whose basis support meets the patch interior.
/// For w supported in the patch, C_patch w = 0 iff the global I_H w = 0.
struct KernelConstraints {
    std::vector<int> coarse_nodes;  // global coarse node indices of the rows
    Eigen::SparseMatrix<double> rows;
};

KernelConstraints kernelConstraintRows(const TransferOperators& tr, const MeshPair& pair,
                                       const Patch& patch);

} // namespace lodqn
