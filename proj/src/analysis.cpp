#include "lodqn/analysis.hpp"

#include "lodqn/fem.hpp"

#include <cmath>
#include <stdexcept>

namespace lodqn {

ErrorReport relativeErrors(const MeshPair& pair, const TransferOperators& tr,
                           const Eigen::VectorXd& u_ref, const Eigen::VectorXd& u_lod)
{
    const StructuredMesh& fine = pair.fine;
    if (u_ref.size() != fine.nodeCount() || u_lod.size() != fine.nodeCount())
        throw std::invalid_argument("relativeErrors: vectors must live on the fine mesh");

    ErrorReport r;
    r.ref_h1 = h1Seminorm(fine, u_ref);
    r.ref_l2 = l2Norm(fine, u_ref);
    if (r.ref_h1 == 0.0 || r.ref_l2 == 0.0)
        throw std::invalid_argument("relativeErrors: reference norm is zero");

    r.diff_h1 = h1Seminorm(fine, u_ref - u_lod);
    r.e_lod = r.diff_h1 / r.ref_h1;

    const Eigen::VectorXd coarse_part = prolong(tr, interpolate(tr, pair, u_lod));
    r.diff_l2 = l2Norm(fine, u_ref - coarse_part);
    r.e_h = r.diff_l2 / r.ref_l2;
    return r;
}

double diagnosticG(const StructuredMesh& fine, const CombinedCoefficient& coeff,
                   const Eigen::VectorXd& u_ref, const Eigen::VectorXd& u_lod,
                   const Eigen::VectorXd& p_star, const Eigen::VectorXd& v_hk)
{
    const Eigen::ArrayXd mid_p = elementMidpointValues(fine, p_star);
    const Eigen::ArrayXd mid_u = elementMidpointValues(fine, u_ref);
    const Eigen::ArrayXd mid_l = elementMidpointValues(fine, u_lod);
    const auto grad_v = elementMidpointGradients(fine, v_hk);
    const auto grad_l = elementMidpointGradients(fine, u_lod);

    const double area = fine.h() * fine.h();
    double acc = 0.0;
    for (int e = 0; e < fine.elementCount(); ++e) {
        const double a_p = coeff.alphaAt(e, mid_p[e]);
        const double a_u = coeff.alphaAt(e, mid_u[e]);
        const double a_l = coeff.alphaAt(e, mid_l[e]);
        const Eigen::Vector2d field =
            (a_p - a_u) * grad_v.row(e).transpose() + (a_l - a_p) * grad_l.row(e).transpose();
        acc += field.squaredNorm() * area;
    }
    return std::sqrt(acc);
}

double etaBound(Linearization kind, const StructuredMesh& fine, const CombinedCoefficient& coeff,
                const Eigen::VectorXd& u_ref, const Eigen::VectorXd& p_star)
{
    if (kind == Linearization::kacanov) {
        const double sup = (u_ref - p_star).lpNorm<Eigen::Infinity>();
        return sup * h1Seminorm(fine, u_ref);
    }

    // Sample the segment q_t = p* + t(u - p*); the only s-dependence of the
    // remainder factor is through alpha, so it reduces to |alpha_ss| |grad q|.
    constexpr int kSegmentSamples = 5;
    double factor = 0.0;
    for (int step = 0; step < kSegmentSamples; ++step) {
        const double t = static_cast<double>(step) / (kSegmentSamples - 1);
        const Eigen::VectorXd q = p_star + t * (u_ref - p_star);
        const Eigen::ArrayXd mid = elementMidpointValues(fine, q);
        const auto grad = elementMidpointGradients(fine, q);
        for (int e = 0; e < fine.elementCount(); ++e)
            factor = std::max(factor,
                              std::abs(coeff.alphaSSAt(e, mid[e])) * grad.row(e).norm());
    }
    const double dist = l2Norm(fine, u_ref - p_star);
    return 0.5 * factor * dist * dist;
}

} // namespace lodqn
