#include "lodqn/analysis.hpp"
#include "lodqn/harness.hpp"
#include "lodqn/solver.hpp"

#include <doctest.h>

#include <Eigen/Dense>

using namespace lodqn;

TEST_SUITE_BEGIN("analysis");

namespace {

struct Setup {
    MeshPair pair;
    TransferOperators tr;
    CombinedCoefficient coeff;
    NodalVector load;
    Eigen::VectorXd u_ref;

    explicit Setup(int coarse_n = 4, int fine_n = 32)
        : pair(coarse_n, fine_n)
        , tr(buildTransfer(pair))
        , coeff(singleTerm(generateSpatialField(pair.fine, 42, fine_n / 2, 0.05, 1.0,
                                                ChannelSpec{0.5, 1.0, 0.05, 0.15, 50.0}),
                           makeModel(ModelKind::exp2)))
        , load(assembleLoad(pair.fine, makeRhs("default")))
    {
        u_ref = solveReference(pair.fine, coeff, load, 1e-12, 25,
                               Eigen::VectorXd::Zero(pair.fine.nodeCount()))
                    .solution.values;
    }
};

Eigen::VectorXd lodSolution(Setup& s, const Eigen::VectorXd& p_star, int k = 2)
{
    const LinearizationData lin =
        buildLinearization(s.coeff, Linearization::kacanov, p_star, s.pair.fine);
    const MultiscaleBasis basis =
        buildBasis(s.pair, s.tr, assembleCorrectorSet(s.pair, s.tr, k, lin));
    return solveLod(s.pair, s.tr, basis, s.coeff, s.load, 1e-12, 25, p_star).solution.values;
}

} // namespace

TEST_CASE("relative errors: identity, zero, and scaling")
{
    Setup s;
    const ErrorReport same = relativeErrors(s.pair, s.tr, s.u_ref, s.u_ref);
    CHECK(same.e_lod == 0.0);
    // e_h of the exact solution is its own interpolation error, not zero
    const Eigen::VectorXd coarse_part = prolong(s.tr, interpolate(s.tr, s.pair, s.u_ref));
    const double interp_err =
        l2Norm(s.pair.fine, s.u_ref - coarse_part) / l2Norm(s.pair.fine, s.u_ref);
    CHECK(same.e_h == doctest::Approx(interp_err).epsilon(1e-14));
    CHECK(same.e_h > 0.0);

    const ErrorReport zero =
        relativeErrors(s.pair, s.tr, s.u_ref, Eigen::VectorXd::Zero(s.pair.fine.nodeCount()));
    CHECK(zero.e_lod == 1.0);

    const ErrorReport scaled = relativeErrors(s.pair, s.tr, 3.7 * s.u_ref,
                                              3.7 * lodSolution(s, Eigen::VectorXd::Zero(
                                                                       s.pair.fine.nodeCount())));
    const ErrorReport plain = relativeErrors(s.pair, s.tr, s.u_ref,
                                             lodSolution(s, Eigen::VectorXd::Zero(
                                                                s.pair.fine.nodeCount())));
    CHECK(scaled.e_lod == doctest::Approx(plain.e_lod).epsilon(1e-12));
    CHECK(scaled.e_h == doctest::Approx(plain.e_h).epsilon(1e-12));

    CHECK_THROWS_AS(relativeErrors(s.pair, s.tr, Eigen::VectorXd::Zero(s.pair.fine.nodeCount()),
                                   s.u_ref),
                    std::invalid_argument);
}

TEST_CASE("e_h dominates the relative L2 best-approximation error")
{
    Setup s;
    const Eigen::VectorXd u_lod =
        lodSolution(s, Eigen::VectorXd::Zero(s.pair.fine.nodeCount()));
    const ErrorReport err = relativeErrors(s.pair, s.tr, s.u_ref, u_lod);

    const Eigen::MatrixXd mass = Eigen::MatrixXd(assembleMass(s.pair.fine).mat);
    Eigen::MatrixXd hats(s.pair.fine.nodeCount(), s.pair.coarse.freeCount());
    for (int l = 0; l < s.pair.coarse.freeCount(); ++l) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(s.pair.coarse.nodeCount());
        e[s.pair.coarse.freeNodes()[l]] = 1.0;
        hats.col(l) = prolong(s.tr, e);
    }
    const Eigen::VectorXd best = hats * (hats.transpose() * mass * hats)
                                            .ldlt()
                                            .solve(hats.transpose() * mass * s.u_ref);
    const double best_rel =
        l2Norm(s.pair.fine, s.u_ref - best) / l2Norm(s.pair.fine, s.u_ref);
    CHECK(err.e_h >= best_rel - 1e-14);
}

TEST_CASE("diagnostic G: vanishing, single-term oracle, and asymmetry")
{
    Setup s(4, 16);
    const Eigen::VectorXd u_lod =
        lodSolution(s, Eigen::VectorXd::Zero(s.pair.fine.nodeCount()));
    const Eigen::VectorXd i_h_u = interpolate(s.tr, s.pair, s.u_ref);
    const LinearizationData lin = buildLinearization(s.coeff, Linearization::kacanov,
                                                     Eigen::VectorXd::Zero(
                                                         s.pair.fine.nodeCount()),
                                                     s.pair.fine);
    const Eigen::VectorXd v_hk =
        prolong(s.tr, i_h_u) - applyCorrector(s.pair, s.tr, 2, lin, i_h_u);

    CHECK(diagnosticG(s.pair.fine, s.coeff, s.u_ref, s.u_ref, s.u_ref, v_hk) == 0.0);

    // p* = u_lod: only the first term is active; recompute it independently
    const double ours = diagnosticG(s.pair.fine, s.coeff, s.u_ref, u_lod, u_lod, v_hk);
    const Eigen::ArrayXd mid_u = elementMidpointValues(s.pair.fine, s.u_ref);
    const Eigen::ArrayXd mid_l = elementMidpointValues(s.pair.fine, u_lod);
    const auto grad_v = elementMidpointGradients(s.pair.fine, v_hk);
    double acc = 0.0;
    for (int e = 0; e < s.pair.fine.elementCount(); ++e) {
        const double da = s.coeff.alphaAt(e, mid_l[e]) - s.coeff.alphaAt(e, mid_u[e]);
        acc += da * da * grad_v.row(e).squaredNorm();
    }
    const double oracle = std::sqrt(acc) * s.pair.fine.h();
    CHECK(ours == doctest::Approx(oracle).epsilon(1e-12));

    const double swapped = diagnosticG(s.pair.fine, s.coeff, u_lod, s.u_ref, u_lod, v_hk);
    CHECK(std::abs(ours - swapped) > 1e-12);
}

TEST_CASE("diagnostic G decreases for linearization points closer to the solution")
{
    Setup s(8, 32);
    const Eigen::VectorXd g1 = nodalInterpolant(s.pair.fine, g1Function);
    const CombinedCoefficient sampled = sampleOnMesh(s.coeff, s.pair.fine, s.pair.coarse);
    const Eigen::VectorXd u_coarse =
        prolong(s.tr, solveReference(s.pair.coarse, sampled,
                                     assembleLoad(s.pair.coarse, makeRhs("default"),
                                                  MeshTag::coarse),
                                     1e-12, 25,
                                     Eigen::VectorXd::Zero(s.pair.coarse.nodeCount()))
                          .solution.values);

    const auto g_for = [&](const Eigen::VectorXd& p_star) {
        const Eigen::VectorXd u_lod = lodSolution(s, p_star);
        const LinearizationData lin =
            buildLinearization(s.coeff, Linearization::kacanov, p_star, s.pair.fine);
        const Eigen::VectorXd i_h_u = interpolate(s.tr, s.pair, s.u_ref);
        const Eigen::VectorXd v_hk =
            prolong(s.tr, i_h_u) - applyCorrector(s.pair, s.tr, 2, lin, i_h_u);
        return diagnosticG(s.pair.fine, s.coeff, s.u_ref, u_lod, p_star, v_hk);
    };
    CHECK(g_for(u_coarse) < g_for(g1));
}

TEST_CASE("eta bounds: zero at the solution, Kacanov closed form, monotone ordering")
{
    Setup s(8, 32);
    CHECK(etaBound(Linearization::kacanov, s.pair.fine, s.coeff, s.u_ref, s.u_ref) == 0.0);
    CHECK(etaBound(Linearization::frechet, s.pair.fine, s.coeff, s.u_ref, s.u_ref) == 0.0);

    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(s.pair.fine.nodeCount());
    const double bound = etaBound(Linearization::kacanov, s.pair.fine, s.coeff, s.u_ref, zero);
    const double expected =
        s.u_ref.lpNorm<Eigen::Infinity>() * h1Seminorm(s.pair.fine, s.u_ref);
    CHECK(bound == doctest::Approx(expected).epsilon(1e-13));

    const Eigen::VectorXd g = nodalInterpolant(s.pair.fine, gFunction);
    const Eigen::VectorXd g1 = nodalInterpolant(s.pair.fine, g1Function);
    const CombinedCoefficient sampled = sampleOnMesh(s.coeff, s.pair.fine, s.pair.coarse);
    const Eigen::VectorXd u_coarse =
        prolong(s.tr, solveReference(s.pair.coarse, sampled,
                                     assembleLoad(s.pair.coarse, makeRhs("default"),
                                                  MeshTag::coarse),
                                     1e-12, 25,
                                     Eigen::VectorXd::Zero(s.pair.coarse.nodeCount()))
                          .solution.values);
    const double b_g1 = etaBound(Linearization::kacanov, s.pair.fine, s.coeff, s.u_ref, g1);
    const double b_g = etaBound(Linearization::kacanov, s.pair.fine, s.coeff, s.u_ref, g);
    const double b_uh = etaBound(Linearization::kacanov, s.pair.fine, s.coeff, s.u_ref, u_coarse);
    CHECK(b_g1 >= b_g);
    CHECK(b_g >= b_uh);
}

TEST_CASE("diagnostics are bit-stable across repeated evaluation")
{
    Setup s(4, 16);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(s.pair.fine.nodeCount());
    const Eigen::VectorXd u_lod = lodSolution(s, zero);
    const double a = diagnosticG(s.pair.fine, s.coeff, s.u_ref, u_lod, zero, u_lod);
    const double b = diagnosticG(s.pair.fine, s.coeff, s.u_ref, u_lod, zero, u_lod);
    CHECK(a == b);
    const double ea = etaBound(Linearization::frechet, s.pair.fine, s.coeff, s.u_ref, zero);
    const double eb = etaBound(Linearization::frechet, s.pair.fine, s.coeff, s.u_ref, zero);
    CHECK(ea == eb);
}

TEST_SUITE_END();
