#pragma once

#include "lodqn/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <vector>

namespace lodqn {

enum class MeshTag { coarse, fine };

/// Coefficient vector of a Q1 function; constrained (boundary) entries are
/// kept in the vector and are exactly zero for H^1_0 functions.
struct NodalVector {
    MeshTag tag = MeshTag::fine;
    Eigen::VectorXd values;
};

/// Sparse matrix over all nodes or over free nodes of one mesh, with a flag
/// recording whether the assembled form is symmetric.
struct SparseOperator {
    Eigen::SparseMatrix<double> mat;
    bool symmetric = false;
};

/// Local Q1 matrices on a square element, corner order SW, SE, NW, NE.
/// The stiffness matrix is independent of the element size in 2D.
Eigen::Matrix4d localStiffnessQ1(double coefficient);
Eigen::Matrix4d localMassQ1(double h);
/// B_loc[i][j] = int_K phi_j (beta . grad phi_i) for constant beta=(bx,by).
Eigen::Matrix4d localGradCouplingQ1(double h, double bx, double by);

/// Stiffness with elementwise-constant coefficient, assembled over all nodes
/// (element-major, local-index-minor triplet order).
SparseOperator assembleStiffness(const StructuredMesh& mesh, const Eigen::ArrayXd& elem_coeff);

SparseOperator assembleMass(const StructuredMesh& mesh);

/// B[i,j] = sum_K int_K phi_j (beta_K . grad phi_i); generally nonsymmetric.
SparseOperator assembleGradientCoupling(const StructuredMesh& mesh,
                                        const Eigen::Matrix<double, Eigen::Dynamic, 2>& beta);

/// First matching region wins; elements whose midpoint is in no region get
/// the fallback value.
struct PiecewiseRhs {
    struct Region {
        double x0, x1, y0, y1;
        double value;
    };
    std::vector<Region> regions;
    double fallback = 0.0;

    double at(double x, double y) const;
};

/// Load vector (all nodes) with per-element midpoint evaluation of f.
NodalVector assembleLoad(const StructuredMesh& mesh, const PiecewiseRhs& f, MeshTag tag = MeshTag::fine);
NodalVector assembleLoad(const StructuredMesh& mesh, const std::function<double(double, double)>& f,
                         MeshTag tag = MeshTag::fine);

/// Drop rows/columns (entries) at constrained nodes.
SparseOperator restrictFree(const StructuredMesh& mesh, const SparseOperator& op);
Eigen::VectorXd restrictFree(const StructuredMesh& mesh, const Eigen::VectorXd& all_nodes);
/// Zero-extend a free-node vector back to all nodes.
Eigen::VectorXd extendFree(const StructuredMesh& mesh, const Eigen::VectorXd& free_values);

/// sqrt(v^T A v) with unit-coefficient stiffness / sqrt(v^T M v), over all
/// nodes (boundary values participate).
double h1Seminorm(const StructuredMesh& mesh, const Eigen::VectorXd& v);
double l2Norm(const StructuredMesh& mesh, const Eigen::VectorXd& v);

/// Rows/columns of a sparse matrix at the given (ascending) indices.
Eigen::SparseMatrix<double> extractSubmatrix(const Eigen::SparseMatrix<double>& m,
                                             const std::vector<int>& rows,
                                             const std::vector<int>& cols);

} // namespace lodqn
