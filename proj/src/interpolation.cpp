#include "lodqn/interpolation.hpp"

#include <cmath>
#include <stdexcept>

namespace lodqn {

namespace {

double hat1d(int coarse_idx, double fine_pos_in_coarse_units)
{
    return std::max(0.0, 1.0 - std::abs(fine_pos_in_coarse_units - coarse_idx));
}

} // namespace

TransferOperators buildTransfer(const MeshPair& pair)
{
    const StructuredMesh& coarse = pair.coarse;
    const StructuredMesh& fine = pair.fine;
    const int r = pair.ratio;

    TransferOperators tr;

    // Prolongation: tensor-product hat values at the fine nodes of each
    // coarse hat's support.
    {
        std::vector<Eigen::Triplet<double>> trip;
        for (int cj = 0; cj <= coarse.n(); ++cj)
            for (int ci = 0; ci <= coarse.n(); ++ci) {
                const int col = coarse.nodeIndex(ci, cj);
                const int filo = std::max(0, (ci - 1) * r), fihi = std::min(fine.n(), (ci + 1) * r);
                const int fjlo = std::max(0, (cj - 1) * r), fjhi = std::min(fine.n(), (cj + 1) * r);
                for (int fj = fjlo; fj <= fjhi; ++fj)
                    for (int fi = filo; fi <= fihi; ++fi) {
                        const double v = hat1d(ci, static_cast<double>(fi) / r) *
                                         hat1d(cj, static_cast<double>(fj) / r);
                        if (v != 0.0)
                            trip.emplace_back(fine.nodeIndex(fi, fj), col, v);
                    }
            }
        tr.prolong.resize(fine.nodeCount(), coarse.nodeCount());
        tr.prolong.setFromTriplets(trip.begin(), trip.end());
        tr.prolong.makeCompressed();
    }

    // Free x free view of the prolongation. Coarse interior hats vanish on
    // the domain boundary, so no information is lost.
    {
        std::vector<Eigen::Triplet<double>> trip;
        for (int c = 0; c < coarse.freeCount(); ++c) {
            const int col = coarse.freeNodes()[c];
            for (Eigen::SparseMatrix<double>::InnerIterator it(tr.prolong, col); it; ++it) {
                const int fr = fine.freeIndexOf(static_cast<int>(it.row()));
                if (fr >= 0)
                    trip.emplace_back(fr, c, it.value());
            }
        }
        tr.prolong_free.resize(fine.freeCount(), coarse.freeCount());
        tr.prolong_free.setFromTriplets(trip.begin(), trip.end());
        tr.prolong_free.makeCompressed();
    }

    // Cross mass assembled directly on the fine mesh: on each fine element the
    // coarse hats are bilinear, so their fine interpolants integrate exactly
    // through the local fine mass matrix.
    {
        const Eigen::Matrix4d mass_loc = localMassQ1(fine.h());
        std::vector<Eigen::Triplet<double>> trip;
        for (int e = 0; e < fine.elementCount(); ++e) {
            const auto [fi, fj] = fine.elementCoords(e);
            const auto fine_nodes = fine.elementNodes(e);
            const int ci = fi / r, cj = fj / r;  // containing coarse element
            const int coarse_corners[4] = {coarse.nodeIndex(ci, cj), coarse.nodeIndex(ci + 1, cj),
                                           coarse.nodeIndex(ci, cj + 1),
                                           coarse.nodeIndex(ci + 1, cj + 1)};
            for (int a = 0; a < 4; ++a) {
                const int coarse_free = coarse.freeIndexOf(coarse_corners[a]);
                if (coarse_free < 0)
                    continue;
                const auto [cci, ccj] = coarse.nodeCoords(coarse_corners[a]);
                Eigen::Vector4d lambda;
                for (int b = 0; b < 4; ++b) {
                    const auto [ni, nj] = fine.nodeCoords(fine_nodes[b]);
                    lambda[b] = hat1d(cci, static_cast<double>(ni) / r) *
                                hat1d(ccj, static_cast<double>(nj) / r);
                }
                const Eigen::Vector4d row = mass_loc * lambda;
                for (int b = 0; b < 4; ++b) {
                    const int fine_free = fine.freeIndexOf(fine_nodes[b]);
                    if (fine_free >= 0 && row[b] != 0.0)
                        trip.emplace_back(coarse_free, fine_free, row[b]);
                }
            }
        }
        tr.cross_mass.resize(coarse.freeCount(), fine.freeCount());
        tr.cross_mass.setFromTriplets(trip.begin(), trip.end());
        tr.cross_mass.makeCompressed();
    }

    tr.coarse_mass = restrictFree(coarse, assembleMass(coarse)).mat;
    tr.coarse_mass_solver = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    if (coarse.freeCount() > 0) {
        tr.coarse_mass_solver->compute(tr.coarse_mass);
        if (tr.coarse_mass_solver->info() != Eigen::Success)
            throw std::runtime_error("buildTransfer: coarse mass factorization failed");
    }
    return tr;
}

Eigen::VectorXd interpolate(const TransferOperators& tr, const MeshPair& pair,
                            const Eigen::VectorXd& v_fine)
{
    if (v_fine.size() != pair.fine.nodeCount())
        throw std::invalid_argument("interpolate: vector not on fine nodes");
    if (pair.coarse.freeCount() == 0)
        return Eigen::VectorXd::Zero(pair.coarse.nodeCount());
    const Eigen::VectorXd rhs = tr.cross_mass * restrictFree(pair.fine, v_fine);
    return extendFree(pair.coarse, tr.coarse_mass_solver->solve(rhs));
}

Eigen::VectorXd prolong(const TransferOperators& tr, const Eigen::VectorXd& w_coarse)
{
    if (w_coarse.size() != tr.prolong.cols())
        throw std::invalid_argument("prolong: vector not on coarse nodes");
    return tr.prolong * w_coarse;
}

KernelConstraints kernelConstraintRows(const TransferOperators& tr, const MeshPair& pair,
                                       const Patch& patch)
{
    const StructuredMesh& coarse = pair.coarse;
    const StructuredMesh& fine = pair.fine;

    KernelConstraints kc;
    // Coarse nodes whose hat support meets the open patch rectangle: exactly
    // the nodes of the closed patch element range, intersected with the free
    // nodes.
    for (int cj = patch.jlo; cj <= patch.jhi + 1; ++cj)
        for (int ci = patch.ilo; ci <= patch.ihi + 1; ++ci) {
            const int node = coarse.nodeIndex(ci, cj);
            if (coarse.freeIndexOf(node) >= 0)
                kc.coarse_nodes.push_back(node);
        }

    std::vector<int> fine_free_cols(patch.fine_interior_nodes.size());
    for (std::size_t c = 0; c < patch.fine_interior_nodes.size(); ++c)
        fine_free_cols[c] = fine.freeIndexOf(patch.fine_interior_nodes[c]);

    std::vector<int> coarse_free_rows(kc.coarse_nodes.size());
    for (std::size_t r = 0; r < kc.coarse_nodes.size(); ++r)
        coarse_free_rows[r] = coarse.freeIndexOf(kc.coarse_nodes[r]);

    // cross_mass is coarse x fine; extract the patch block.
    Eigen::SparseMatrix<double> cm_t = tr.cross_mass.transpose();
    kc.rows = extractSubmatrix(cm_t, fine_free_cols, coarse_free_rows).transpose();
    kc.rows.makeCompressed();
    return kc;
}

} // namespace lodqn
