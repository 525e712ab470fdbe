#pragma once

#include "lodqn/coefficient.hpp"
#include "lodqn/fem.hpp"
#include "lodqn/interpolation.hpp"
#include "lodqn/mesh.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lodqn {

enum class Linearization : std::uint8_t { kacanov = 0, frechet = 1 };

const char* linearizationName(Linearization kind);

using Fingerprint = std::array<std::uint8_t, 32>;

/// Elementwise data of the linearized form
///   A_L(p*, v, w) = int alpha(x,p*) grad v . grad w + int v beta . grad w
/// with beta = alpha_s(x,p*) grad p* for Frechet and beta = 0 for Kacanov.
/// The affine constant of the Frechet derivative cancels against the test
/// gradient and is dropped. beta_sup = max element |beta| is the computable
/// surrogate for the Lipschitz factor of the linearization point.
struct LinearizationData {
    Linearization kind = Linearization::kacanov;
    Eigen::VectorXd p_star;  // fine, all nodes
    Eigen::ArrayXd alpha_elem;
    Eigen::Matrix<double, Eigen::Dynamic, 2> beta_elem;
    double beta_sup = 0.0;

    bool hasCoupling() const { return kind == Linearization::frechet && beta_sup > 0.0; }
};

LinearizationData buildLinearization(const CombinedCoefficient& coeff, Linearization kind,
                                     const Eigen::VectorXd& p_star_fine,
                                     const StructuredMesh& fine);

/// Thrown when a patch saddle-point factorization or solve fails.
struct CorrectorSolveError : std::runtime_error {
    int element;
    CorrectorSolveError(int element_, const std::string& what)
        : std::runtime_error(what)
        , element(element_)
    {
    }
};

/// Fine-scale corrections Q^k Lambda of every free coarse hat, stored sparsely
/// (each correction is supported on the k-patch union of the hat's elements).
struct CorrectorSet {
    int coarse_n = 0;
    int fine_n = 0;
    int k = 0;
    Linearization kind = Linearization::kacanov;
    Fingerprint fingerprint{};
    // per coarse free node: (fine node index, value), ascending by node
    std::vector<std::vector<std::pair<int, double>>> entries;

    Eigen::VectorXd dense(int coarse_free_index, int fine_node_count) const;
};

/// Solution of the local saddle problem for one coarse element T and one of
/// its four corner hats: find q in W_h(N^k(T)) with
///   (A_L)_patch(q, w) = (A_L)_T(hat, w)  for all w in W_h(N^k(T)),
/// imposed via Lagrange multipliers on the kernel constraints. Returns q
/// zero-extended to all fine nodes.
Eigen::VectorXd solveElementCorrector(const MeshPair& pair, const TransferOperators& tr,
                                      const Patch& patch, const LinearizationData& lin,
                                      int local_basis_index);

/// Q^k per coarse free node, summing element corrections in element order
/// regardless of the number of threads (0 = hardware concurrency).
CorrectorSet assembleCorrectorSet(const MeshPair& pair, const TransferOperators& tr, int k,
                                  const LinearizationData& lin, int threads = 0);

/// Q^k v_H for a coarse coefficient vector (all coarse nodes, boundary zero);
/// one patch solve per coarse element. Returns a full fine vector.
Eigen::VectorXd applyCorrector(const MeshPair& pair, const TransferOperators& tr, int k,
                               const LinearizationData& lin, const Eigen::VectorXd& v_coarse,
                               int threads = 0);

/// d_k = |Q^{full} v_H - Q^k v_H|_1 for k = 1..k_max, with the saturated
/// patch (k = n-1) standing in for the unlocalized corrector.
std::vector<double> decayProfile(const MeshPair& pair, const TransferOperators& tr,
                                 const LinearizationData& lin, const Eigen::VectorXd& v_coarse,
                                 int k_max, int threads = 0);

/// Surrogate smallness product H * sup|beta|; values >= 1 signal that the
/// Frechet corrector problems may lose coercivity.
double frechetCoercivityPrecheck(const LinearizationData& lin, double H);

/// max_l ||C q_l||_inf / ||q_l||_inf over the set (0 for empty correctors);
/// kernel-membership residual used by tests.
double kernelResidual(const CorrectorSet& set, const TransferOperators& tr, const MeshPair& pair);

} // namespace lodqn
