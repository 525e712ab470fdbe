#include "lodqn/corrector.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace lodqn {

const char* linearizationName(Linearization kind)
{
    return kind == Linearization::kacanov ? "kacanov" : "frechet";
}

LinearizationData buildLinearization(const CombinedCoefficient& coeff, Linearization kind,
                                     const Eigen::VectorXd& p_star_fine,
                                     const StructuredMesh& fine)
{
    if (p_star_fine.size() != fine.nodeCount())
        throw std::invalid_argument("buildLinearization: p* not on fine nodes");

    LinearizationData lin;
    lin.kind = kind;
    lin.p_star = p_star_fine;

    const Eigen::ArrayXd mid = elementMidpointValues(fine, p_star_fine);
    lin.alpha_elem.resize(fine.elementCount());
    for (int e = 0; e < fine.elementCount(); ++e) {
        lin.alpha_elem[e] = coeff.alphaAt(e, mid[e]);
        if (!(lin.alpha_elem[e] > 0.0))
            throw std::domain_error("buildLinearization: ellipticity violated, alpha(x,p*) <= 0 "
                                    "on element " +
                                    std::to_string(e));
    }

    lin.beta_elem = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(fine.elementCount(), 2);
    lin.beta_sup = 0.0;
    if (kind == Linearization::frechet) {
        const auto grad = elementMidpointGradients(fine, p_star_fine);
        for (int e = 0; e < fine.elementCount(); ++e) {
            lin.beta_elem.row(e) = coeff.alphaSAt(e, mid[e]) * grad.row(e);
            lin.beta_sup = std::max(lin.beta_sup, lin.beta_elem.row(e).norm());
        }
    }
    return lin;
}

Eigen::VectorXd CorrectorSet::dense(int coarse_free_index, int fine_node_count) const
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(fine_node_count);
    for (const auto& [node, value] : entries[coarse_free_index])
        v[node] += value;
    return v;
}

namespace {

Eigen::SparseMatrix<double> assembleLinearizedOperator(const StructuredMesh& fine,
                                                       const LinearizationData& lin)
{
    Eigen::SparseMatrix<double> s = assembleStiffness(fine, lin.alpha_elem).mat;
    if (lin.hasCoupling())
        s = s + assembleGradientCoupling(fine, lin.beta_elem).mat;
    return s;
}

/// Factorized saddle system [[S_p, C_p^T],[C_p, 0]] of one patch, reusable
/// across the (up to four) right-hand sides of elements with the same patch
/// rectangle.
struct FactorizedPatch {
    std::array<int, 4> rect{-1, -1, -1, -1};
    std::vector<int> dofs;          // global fine node ids
    std::vector<int> local_of_node; // fine node -> patch dof or -1
    Eigen::Index n_dofs = 0;
    Eigen::Index n_constraints = 0;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;

    bool matches(const Patch& p) const
    {
        return rect == std::array<int, 4>{p.ilo, p.ihi, p.jlo, p.jhi};
    }
};

void factorizePatch(FactorizedPatch& fp, const MeshPair& pair, const TransferOperators& tr,
                    const Eigen::SparseMatrix<double>& s_all, const Patch& patch)
{
    fp.rect = {patch.ilo, patch.ihi, patch.jlo, patch.jhi};
    fp.dofs = patch.fine_interior_nodes;
    fp.local_of_node.assign(pair.fine.nodeCount(), -1);
    for (std::size_t i = 0; i < fp.dofs.size(); ++i)
        fp.local_of_node[fp.dofs[i]] = static_cast<int>(i);
    fp.n_dofs = static_cast<Eigen::Index>(fp.dofs.size());
    fp.lu.reset();
    if (fp.n_dofs == 0)
        return;

    const Eigen::SparseMatrix<double> s_p = extractSubmatrix(s_all, fp.dofs, fp.dofs);
    KernelConstraints kc = kernelConstraintRows(tr, pair, patch);

    // Drop constraint rows that are identically zero on the patch.
    std::vector<Eigen::Triplet<double>> ctrip;
    Eigen::Index kept = 0;
    Eigen::SparseMatrix<double, Eigen::RowMajor> rows_rm(kc.rows);
    for (int row = 0; row < rows_rm.rows(); ++row) {
        bool any = false;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows_rm, row); it; ++it)
            if (it.value() != 0.0) {
                any = true;
                break;
            }
        if (!any)
            continue;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows_rm, row); it; ++it)
            ctrip.emplace_back(static_cast<int>(kept), static_cast<int>(it.col()), it.value());
        ++kept;
    }
    fp.n_constraints = kept;

    const Eigen::Index dim = fp.n_dofs + fp.n_constraints;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(s_p.nonZeros()) + 2 * ctrip.size());
    for (int c = 0; c < s_p.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(s_p, c); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), c, it.value());
    for (const auto& t : ctrip) {
        trip.emplace_back(static_cast<int>(fp.n_dofs) + t.row(), t.col(), t.value());
        trip.emplace_back(t.col(), static_cast<int>(fp.n_dofs) + t.row(), t.value());
    }

    Eigen::SparseMatrix<double> saddle(dim, dim);
    saddle.setFromTriplets(trip.begin(), trip.end());
    saddle.makeCompressed();

    fp.lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    fp.lu->compute(saddle);
    if (fp.lu->info() != Eigen::Success)
        throw CorrectorSolveError(patch.center, "corrector saddle factorization failed on patch "
                                                "of element " +
                                                    std::to_string(patch.center));
}

/// Values of the Q1 function on coarse element T with corner values w at the
/// four nodes of the fine element (fi, fj) inside T.
Eigen::Vector4d bilinearOnFineElement(const MeshPair& pair, int coarse_elem,
                                      const Eigen::Vector4d& w, int fi, int fj)
{
    const int r = pair.ratio;
    const auto [ti, tj] = pair.coarse.elementCoords(coarse_elem);
    Eigen::Vector4d out;
    const int base_i = ti * r, base_j = tj * r;
    const std::array<std::array<int, 2>, 4> corners = {{{fi, fj}, {fi + 1, fj}, {fi, fj + 1}, {fi + 1, fj + 1}}};
    for (int c = 0; c < 4; ++c) {
        const double xi = static_cast<double>(corners[c][0] - base_i) / r;
        const double eta = static_cast<double>(corners[c][1] - base_j) / r;
        out[c] = w[0] * (1 - xi) * (1 - eta) + w[1] * xi * (1 - eta) + w[2] * (1 - xi) * eta +
                 w[3] * xi * eta;
    }
    return out;
}

/// Right-hand side (A_L)_T(v, phi_i) over the patch dofs, where v is the Q1
/// function on T with the given corner values, integrated over T only.
Eigen::VectorXd elementRhs(const MeshPair& pair, const LinearizationData& lin,
                           const FactorizedPatch& fp, int coarse_elem,
                           const Eigen::Vector4d& corner_values)
{
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(fp.n_dofs + fp.n_constraints);
    const int r = pair.ratio;
    const auto [ti, tj] = pair.coarse.elementCoords(coarse_elem);
    const double h = pair.fine.h();
    const bool coupled = lin.hasCoupling();
    for (int j = tj * r; j < (tj + 1) * r; ++j)
        for (int i = ti * r; i < (ti + 1) * r; ++i) {
            const int e = pair.fine.elementIndex(i, j);
            Eigen::Matrix4d loc = localStiffnessQ1(lin.alpha_elem[e]);
            if (coupled)
                loc += localGradCouplingQ1(h, lin.beta_elem(e, 0), lin.beta_elem(e, 1));
            const Eigen::Vector4d lambda =
                bilinearOnFineElement(pair, coarse_elem, corner_values, i, j);
            const Eigen::Vector4d contrib = loc * lambda;
            const auto nd = pair.fine.elementNodes(e);
            for (int a = 0; a < 4; ++a) {
                const int li = fp.local_of_node[nd[a]];
                if (li >= 0)
                    rhs[li] += contrib[a];
            }
        }
    return rhs;
}

Eigen::VectorXd solvePatchRhs(const FactorizedPatch& fp, const Eigen::VectorXd& rhs,
                              int element_for_error)
{
    const Eigen::VectorXd sol = fp.lu->solve(rhs);
    if (fp.lu->info() != Eigen::Success || !sol.allFinite())
        throw CorrectorSolveError(element_for_error,
                                  "corrector saddle solve failed on patch of element " +
                                      std::to_string(element_for_error));
    return sol.head(fp.n_dofs);
}

struct ElementCorrections {
    std::vector<int> dofs;
    std::array<Eigen::VectorXd, 4> q;  // per local corner; empty if skipped
};

int resolveThreads(int threads, int jobs)
{
    if (threads <= 0)
        threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1)
        threads = 1;
    return std::min(threads, std::max(1, jobs));
}

/// Runs fn(element, cache) for every coarse element. Elements are ordered so
/// that equal (clipped) patch rectangles are adjacent and each worker's
/// single-slot factorization cache gets maximal reuse; results are keyed by
/// element, so the schedule does not affect the output.
template <typename Fn>
void forEachElement(const MeshPair& pair, int k, int threads, Fn&& fn)
{
    const int element_count = pair.coarse.elementCount();
    std::vector<int> order(element_count);
    for (int e = 0; e < element_count; ++e)
        order[e] = e;
    std::vector<std::array<int, 4>> rects(element_count);
    for (int e = 0; e < element_count; ++e) {
        const Patch p = buildPatch(pair, e, k);
        rects[e] = {p.ilo, p.ihi, p.jlo, p.jhi};
    }
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::tie(rects[a], a) < std::tie(rects[b], b); });

    const int n_workers = resolveThreads(threads, element_count);
    if (n_workers == 1) {
        FactorizedPatch cache;
        for (int e : order)
            fn(e, cache);
        return;
    }
    std::vector<std::thread> workers;
    std::exception_ptr error;
    std::mutex error_mutex;
    const int per = (element_count + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
        const int lo = w * per, hi = std::min(element_count, (w + 1) * per);
        workers.emplace_back([&, lo, hi] {
            FactorizedPatch cache;
            try {
                for (int i = lo; i < hi; ++i)
                    fn(order[i], cache);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        });
    }
    for (auto& t : workers)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace

Eigen::VectorXd solveElementCorrector(const MeshPair& pair, const TransferOperators& tr,
                                      const Patch& patch, const LinearizationData& lin,
                                      int local_basis_index)
{
    if (local_basis_index < 0 || local_basis_index > 3)
        throw std::invalid_argument("solveElementCorrector: local basis index must be 0..3");
    Eigen::VectorXd q = Eigen::VectorXd::Zero(pair.fine.nodeCount());
    if (pair.ratio == 1 || patch.fine_interior_nodes.empty())
        return q;  // W_h is trivial

    const Eigen::SparseMatrix<double> s_all = assembleLinearizedOperator(pair.fine, lin);
    FactorizedPatch fp;
    factorizePatch(fp, pair, tr, s_all, patch);

    Eigen::Vector4d corner = Eigen::Vector4d::Zero();
    corner[local_basis_index] = 1.0;
    const Eigen::VectorXd local =
        solvePatchRhs(fp, elementRhs(pair, lin, fp, patch.center, corner), patch.center);
    for (std::size_t i = 0; i < fp.dofs.size(); ++i)
        q[fp.dofs[i]] = local[i];
    return q;
}

CorrectorSet assembleCorrectorSet(const MeshPair& pair, const TransferOperators& tr, int k,
                                  const LinearizationData& lin, int threads)
{
    const StructuredMesh& coarse = pair.coarse;
    CorrectorSet set;
    set.coarse_n = coarse.n();
    set.fine_n = pair.fine.n();
    set.k = k;
    set.kind = lin.kind;
    set.entries.assign(coarse.freeCount(), {});
    if (pair.ratio == 1 || coarse.freeCount() == 0)
        return set;

    const Eigen::SparseMatrix<double> s_all = assembleLinearizedOperator(pair.fine, lin);
    std::vector<ElementCorrections> results(coarse.elementCount());

    forEachElement(pair, k, threads, [&](int e, FactorizedPatch& cache) {
        const Patch patch = buildPatch(pair, e, k);
        if (!cache.matches(patch))
            factorizePatch(cache, pair, tr, s_all, patch);
        ElementCorrections& res = results[e];
        res.dofs = cache.dofs;
        const auto corners = coarse.elementNodes(e);
        for (int c = 0; c < 4; ++c) {
            if (coarse.freeIndexOf(corners[c]) < 0)
                continue;  // boundary hats are not coarse basis functions
            Eigen::Vector4d w = Eigen::Vector4d::Zero();
            w[c] = 1.0;
            res.q[c] = solvePatchRhs(cache, elementRhs(pair, lin, cache, e, w), e);
        }
    });

    // Deterministic reduction in element order.
    std::vector<std::map<int, double>> acc(coarse.freeCount());
    for (int e = 0; e < coarse.elementCount(); ++e) {
        const ElementCorrections& res = results[e];
        const auto corners = coarse.elementNodes(e);
        for (int c = 0; c < 4; ++c) {
            const int free_idx = coarse.freeIndexOf(corners[c]);
            if (free_idx < 0 || res.q[c].size() == 0)
                continue;
            auto& m = acc[free_idx];
            for (std::size_t i = 0; i < res.dofs.size(); ++i)
                m[res.dofs[i]] += res.q[c][i];
        }
    }
    for (int l = 0; l < coarse.freeCount(); ++l) {
        set.entries[l].assign(acc[l].begin(), acc[l].end());
    }
    return set;
}

Eigen::VectorXd applyCorrector(const MeshPair& pair, const TransferOperators& tr, int k,
                               const LinearizationData& lin, const Eigen::VectorXd& v_coarse,
                               int threads)
{
    if (v_coarse.size() != pair.coarse.nodeCount())
        throw std::invalid_argument("applyCorrector: vector not on coarse nodes");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(pair.fine.nodeCount());
    if (pair.ratio == 1)
        return out;

    const Eigen::SparseMatrix<double> s_all = assembleLinearizedOperator(pair.fine, lin);
    const int n_elem = pair.coarse.elementCount();
    std::vector<std::vector<int>> dof_lists(n_elem);
    std::vector<Eigen::VectorXd> qs(n_elem);

    forEachElement(pair, k, threads, [&](int e, FactorizedPatch& cache) {
        const Patch patch = buildPatch(pair, e, k);
        if (!cache.matches(patch))
            factorizePatch(cache, pair, tr, s_all, patch);
        const auto corners = pair.coarse.elementNodes(e);
        Eigen::Vector4d w;
        for (int c = 0; c < 4; ++c)
            w[c] = v_coarse[corners[c]];
        dof_lists[e] = cache.dofs;
        qs[e] = solvePatchRhs(cache, elementRhs(pair, lin, cache, e, w), e);
    });

    for (int e = 0; e < n_elem; ++e)
        for (std::size_t i = 0; i < dof_lists[e].size(); ++i)
            out[dof_lists[e][i]] += qs[e][i];
    return out;
}

std::vector<double> decayProfile(const MeshPair& pair, const TransferOperators& tr,
                                 const LinearizationData& lin, const Eigen::VectorXd& v_coarse,
                                 int k_max, int threads)
{
    if (k_max > pair.coarse.n() - 1)
        throw std::invalid_argument("decayProfile: k_max must be <= coarse n - 1");
    const int k_full = pair.coarse.n() - 1;  // saturated patch covers the grid
    const Eigen::VectorXd q_full = applyCorrector(pair, tr, k_full, lin, v_coarse, threads);
    std::vector<double> decay;
    decay.reserve(k_max);
    for (int k = 1; k <= k_max; ++k) {
        const Eigen::VectorXd q_k = applyCorrector(pair, tr, k, lin, v_coarse, threads);
        decay.push_back(h1Seminorm(pair.fine, q_full - q_k));
    }
    return decay;
}

double frechetCoercivityPrecheck(const LinearizationData& lin, double H)
{
    return H * lin.beta_sup;
}

double kernelResidual(const CorrectorSet& set, const TransferOperators& tr, const MeshPair& pair)
{
    double worst = 0.0;
    for (std::size_t l = 0; l < set.entries.size(); ++l) {
        const Eigen::VectorXd q = set.dense(static_cast<int>(l), pair.fine.nodeCount());
        const double q_inf = q.lpNorm<Eigen::Infinity>();
        if (q_inf == 0.0)
            continue;
        const Eigen::VectorXd c_q = tr.cross_mass * restrictFree(pair.fine, q);
        worst = std::max(worst, c_q.lpNorm<Eigen::Infinity>() / q_inf);
    }
    return worst;
}

} // namespace lodqn
