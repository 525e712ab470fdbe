#include "lodqn/fem.hpp"
#include "lodqn/interpolation.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <random>
#include <set>

using namespace lodqn;

TEST_SUITE_BEGIN("interpolation");

namespace {

// Dense normal-equations L2 projection onto the free coarse hats.
Eigen::VectorXd denseProjectionOracle(const MeshPair& pair, const TransferOperators& tr,
                                      const Eigen::VectorXd& v_fine)
{
    const Eigen::MatrixXd mass = Eigen::MatrixXd(assembleMass(pair.fine).mat);
    const int nc = pair.coarse.freeCount();
    Eigen::MatrixXd hats(pair.fine.nodeCount(), nc);
    for (int l = 0; l < nc; ++l) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(pair.coarse.nodeCount());
        e[pair.coarse.freeNodes()[l]] = 1.0;
        hats.col(l) = prolong(tr, e);
    }
    const Eigen::MatrixXd gram = hats.transpose() * mass * hats;
    const Eigen::VectorXd rhs = hats.transpose() * mass * v_fine;
    return gram.ldlt().solve(rhs);
}

} // namespace

TEST_CASE("ratio one: prolongation is the identity and C the fine mass")
{
    const MeshPair pair(4, 4);
    const TransferOperators tr = buildTransfer(pair);
    CHECK(Eigen::MatrixXd(tr.prolong).isIdentity(1e-15));
    const Eigen::MatrixXd mh =
        Eigen::MatrixXd(restrictFree(pair.fine, assembleMass(pair.fine)).mat);
    CHECK((Eigen::MatrixXd(tr.cross_mass) - mh).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("coarse hat values on the twice-refined mesh")
{
    const MeshPair pair(1, 2);
    const TransferOperators tr = buildTransfer(pair);
    Eigen::VectorXd sw = Eigen::VectorXd::Zero(4);
    sw[pair.coarse.nodeIndex(0, 0)] = 1.0;
    const Eigen::VectorXd fine_vals = prolong(tr, sw);
    CHECK(fine_vals[pair.fine.nodeIndex(0, 0)] == 1.0);
    CHECK(fine_vals[pair.fine.nodeIndex(1, 0)] == 0.5);
    CHECK(fine_vals[pair.fine.nodeIndex(0, 1)] == 0.5);
    CHECK(fine_vals[pair.fine.nodeIndex(1, 1)] == 0.25);
    CHECK(fine_vals[pair.fine.nodeIndex(2, 2)] == 0.0);
}

TEST_CASE("prolongation is exact on bilinear functions")
{
    const MeshPair pair(4, 20);
    const TransferOperators tr = buildTransfer(pair);
    Eigen::VectorXd w(pair.coarse.nodeCount());
    const auto f = [](double x, double y) { return 2.0 + 3.0 * x - y + 0.5 * x * y; };
    for (int node = 0; node < pair.coarse.nodeCount(); ++node) {
        const auto [i, j] = pair.coarse.nodeCoords(node);
        w[node] = f(i * pair.coarse.h(), j * pair.coarse.h());
    }
    const Eigen::VectorXd fine_vals = prolong(tr, w);
    for (int node = 0; node < pair.fine.nodeCount(); ++node) {
        const auto [i, j] = pair.fine.nodeCoords(node);
        CHECK(fine_vals[node] ==
              doctest::Approx(f(i * pair.fine.h(), j * pair.fine.h())).epsilon(1e-13));
    }
}

TEST_CASE("cross mass equals P^T M_h entrywise")
{
    const MeshPair pair(4, 16);
    const TransferOperators tr = buildTransfer(pair);
    const Eigen::MatrixXd mh =
        Eigen::MatrixXd(restrictFree(pair.fine, assembleMass(pair.fine)).mat);
    const Eigen::MatrixXd via_prolong = Eigen::MatrixXd(tr.prolong_free).transpose() * mh;
    CHECK((Eigen::MatrixXd(tr.cross_mass) - via_prolong).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("C row sums reproduce the coarse load of f=1")
{
    const MeshPair pair(4, 12);
    const TransferOperators tr = buildTransfer(pair);
    PiecewiseRhs one;
    one.fallback = 1.0;
    const Eigen::VectorXd coarse_load =
        restrictFree(pair.coarse, assembleLoad(pair.coarse, one, MeshTag::coarse).values);

    // Partition-of-unity oracle over all fine hats: (P^T M_h 1)_l = int Lambda_l.
    const Eigen::MatrixXd mh_all = Eigen::MatrixXd(assembleMass(pair.fine).mat);
    const Eigen::VectorXd full_sums_all =
        Eigen::MatrixXd(tr.prolong).transpose() * mh_all * Eigen::VectorXd::Ones(pair.fine.nodeCount());
    for (int l = 0; l < pair.coarse.freeCount(); ++l)
        CHECK(full_sums_all[pair.coarse.freeNodes()[l]] ==
              doctest::Approx(coarse_load[l]).epsilon(1e-13));

    // C itself has free-only columns, so the identity holds exactly for hats
    // whose support stays away from the boundary ring.
    const Eigen::VectorXd row_sums =
        tr.cross_mass * Eigen::VectorXd::Ones(pair.fine.freeCount());
    for (int l = 0; l < pair.coarse.freeCount(); ++l) {
        const auto [i, j] = pair.coarse.nodeCoords(pair.coarse.freeNodes()[l]);
        if (i >= 2 && i <= pair.coarse.n() - 2 && j >= 2 && j <= pair.coarse.n() - 2)
            CHECK(row_sums[l] == doctest::Approx(coarse_load[l]).epsilon(1e-13));
    }
}

TEST_CASE("projectivity on random coarse vectors")
{
    const MeshPair pair(8, 64);
    const TransferOperators tr = buildTransfer(pair);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(pair.coarse.nodeCount());
        for (int node : pair.coarse.freeNodes())
            w[node] = unit(rng);
        const Eigen::VectorXd back = interpolate(tr, pair, prolong(tr, w));
        CHECK((back - w).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("interpolation of zero is zero")
{
    const MeshPair pair(2, 8);
    const TransferOperators tr = buildTransfer(pair);
    CHECK(interpolate(tr, pair, Eigen::VectorXd::Zero(pair.fine.nodeCount())).isZero(0.0));
}

TEST_CASE("fine hat projects like the dense oracle")
{
    const MeshPair pair(2, 8);
    const TransferOperators tr = buildTransfer(pair);
    Eigen::VectorXd hat = Eigen::VectorXd::Zero(pair.fine.nodeCount());
    hat[pair.fine.nodeIndex(2, 2)] = 1.0;  // interior to the SW coarse element
    const Eigen::VectorXd ours = restrictFree(pair.coarse, interpolate(tr, pair, hat));
    const Eigen::VectorXd ref = denseProjectionOracle(pair, tr, hat);
    CHECK((ours - ref).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("kernel constraints: full-domain patch recovers C")
{
    const MeshPair pair(4, 16);
    const TransferOperators tr = buildTransfer(pair);
    const Patch patch = buildPatch(pair, 5, 3);
    REQUIRE(patch.coversWholeGrid(pair.coarse));
    const KernelConstraints kc = kernelConstraintRows(tr, pair, patch);
    CHECK(kc.rows.rows() == pair.coarse.freeCount());
    CHECK(kc.rows.cols() == pair.fine.freeCount());
    CHECK((Eigen::MatrixXd(kc.rows) - Eigen::MatrixXd(tr.cross_mass)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("kernel constraints on a single-element patch")
{
    const MeshPair pair(2, 4);
    const TransferOperators tr = buildTransfer(pair);
    const Patch patch = buildPatch(pair, 0, 0);  // SW coarse element
    const KernelConstraints kc = kernelConstraintRows(tr, pair, patch);
    REQUIRE(kc.coarse_nodes.size() == 1);  // only the center coarse node is free
    CHECK(kc.coarse_nodes[0] == pair.coarse.nodeIndex(1, 1));
    CHECK(kc.rows.cols() == static_cast<int>(patch.fine_interior_nodes.size()));

    // Null space of C_patch (zero-extended) equals {w in patch : I_H w = 0}.
    const Eigen::MatrixXd cp = Eigen::MatrixXd(kc.rows);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(cp);
    const Eigen::MatrixXd null_basis = lu.kernel();
    for (int c = 0; c < null_basis.cols(); ++c) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(pair.fine.nodeCount());
        for (std::size_t i = 0; i < patch.fine_interior_nodes.size(); ++i)
            w[patch.fine_interior_nodes[i]] = null_basis(i, c);
        CHECK(interpolate(tr, pair, w).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("coarse functions are not in the kernel")
{
    const MeshPair pair(2, 8);
    const TransferOperators tr = buildTransfer(pair);
    const Patch patch = buildPatch(pair, 0, 1);
    const KernelConstraints kc = kernelConstraintRows(tr, pair, patch);

    Eigen::VectorXd e = Eigen::VectorXd::Zero(pair.coarse.nodeCount());
    e[pair.coarse.nodeIndex(1, 1)] = 1.0;
    const Eigen::VectorXd hat_fine = prolong(tr, e);
    Eigen::VectorXd w(patch.fine_interior_nodes.size());
    for (std::size_t i = 0; i < patch.fine_interior_nodes.size(); ++i)
        w[i] = hat_fine[patch.fine_interior_nodes[i]];
    CHECK((kc.rows * w).lpNorm<Eigen::Infinity>() > 1e-3);
}

TEST_CASE("kernel equivalence by rank counting on a small pair")
{
    const MeshPair pair(2, 8);
    const TransferOperators tr = buildTransfer(pair);
    const Patch patch = buildPatch(pair, 1, 1);  // covers the whole 2x2 grid
    const KernelConstraints kc = kernelConstraintRows(tr, pair, patch);

    const Eigen::MatrixXd cp = Eigen::MatrixXd(kc.rows);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(cp);
    const int null_dim = static_cast<int>(cp.cols()) - static_cast<int>(lu.rank());

    // Dense global count: functions supported on patch-interior nodes with
    // interpolate(w) = 0.
    Eigen::MatrixXd global(pair.coarse.freeCount(), patch.fine_interior_nodes.size());
    for (std::size_t i = 0; i < patch.fine_interior_nodes.size(); ++i) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(pair.fine.nodeCount());
        w[patch.fine_interior_nodes[i]] = 1.0;
        global.col(i) = restrictFree(pair.coarse, interpolate(tr, pair, w));
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> glu(global);
    CHECK(null_dim == static_cast<int>(global.cols()) - static_cast<int>(glu.rank()));
}

TEST_CASE("structural locality: disjoint coarse rows are zero")
{
    const MeshPair pair(8, 32);
    const TransferOperators tr = buildTransfer(pair);
    const Patch patch = buildPatch(pair, pair.coarse.elementIndex(1, 1), 1);
    std::vector<int> fine_cols(patch.fine_interior_nodes.size());
    for (std::size_t i = 0; i < fine_cols.size(); ++i)
        fine_cols[i] = pair.fine.freeIndexOf(patch.fine_interior_nodes[i]);

    const std::set<int> kept(kernelConstraintRows(tr, pair, patch).coarse_nodes.begin(),
                             kernelConstraintRows(tr, pair, patch).coarse_nodes.end());
    const Eigen::MatrixXd full = Eigen::MatrixXd(tr.cross_mass);
    for (int l = 0; l < pair.coarse.freeCount(); ++l) {
        if (kept.count(pair.coarse.freeNodes()[l]))
            continue;
        for (int c : fine_cols)
            CHECK(full(l, c) == 0.0);
    }
}

TEST_SUITE_END();
