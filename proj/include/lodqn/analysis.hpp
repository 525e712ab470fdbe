#pragma once

#include "lodqn/coefficient.hpp"
#include "lodqn/corrector.hpp"
#include "lodqn/interpolation.hpp"
#include "lodqn/mesh.hpp"

namespace lodqn {

/// e_lod: relative H^1-seminorm error of the multiscale solution against the
/// fine reference; e_h: relative L^2 error of its coarse (interpolated) part.
struct ErrorReport {
    double e_lod = 0.0;
    double e_h = 0.0;
    double ref_h1 = 0.0;
    double ref_l2 = 0.0;
    double diff_h1 = 0.0;
    double diff_l2 = 0.0;
};

ErrorReport relativeErrors(const MeshPair& pair, const TransferOperators& tr,
                           const Eigen::VectorXd& u_ref, const Eigen::VectorXd& u_lod);

/// || (alpha(x,p*) - alpha(x,u)) grad v_Hk
///    + (alpha(x,u_lod) - alpha(x,p*)) grad u_lod ||_0
/// with elementwise-midpoint evaluation; v_Hk = (id - Q^k) I_H u_ref is
/// supplied by the caller.
double diagnosticG(const StructuredMesh& fine, const CombinedCoefficient& coeff,
                   const Eigen::VectorXd& u_ref, const Eigen::VectorXd& u_lod,
                   const Eigen::VectorXd& p_star, const Eigen::VectorXd& v_hk);

/// Computable upper surrogates for the linearization error:
///   kacanov:  ||p* - u||_inf |u|_1
///   frechet:  max_seg |alpha_ss| |grad q| * ||u - p*||_0^2 / 2,
/// where the segment factor is sampled at q = p* + t(u - p*) for a fixed grid
/// of t in [0,1]. Upper surrogates, not eta itself.
double etaBound(Linearization kind, const StructuredMesh& fine, const CombinedCoefficient& coeff,
                const Eigen::VectorXd& u_ref, const Eigen::VectorXd& p_star);

} // namespace lodqn
