#include "lodqn/fem.hpp"
#include "lodqn/harness.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Dense>

using namespace lodqn;

TEST_SUITE_BEGIN("fem");

TEST_CASE("local stiffness matches the quadrature oracle")
{
    for (double c : {1.0, 0.37, 12.5}) {
        const Eigen::Matrix4d ours = localStiffnessQ1(c);
        const Eigen::Matrix4d ref = oracle::stiffnessOracle(c);
        CHECK((ours - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff());
    }
    CHECK(localStiffnessQ1(0.0).isZero(0.0));
    // gradients of the constant function: rows sum to zero
    CHECK(localStiffnessQ1(3.1).rowwise().sum().cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("local mass matches the quadrature oracle")
{
    for (double h : {1.0, 0.25, 1.0 / 128}) {
        const Eigen::Matrix4d ours = localMassQ1(h);
        const Eigen::Matrix4d ref = oracle::massOracle(h);
        CHECK((ours - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("local gradient coupling matches the quadrature oracle")
{
    for (const auto& [h, bx, by] :
         {std::tuple{1.0, 1.0, 0.0}, std::tuple{0.5, 0.0, 1.0}, std::tuple{0.125, -2.0, 3.0}}) {
        const Eigen::Matrix4d ours = localGradCouplingQ1(h, bx, by);
        const Eigen::Matrix4d ref = oracle::couplingOracle(h, bx, by);
        CHECK((ours - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff() + 1e-300);
    }
    CHECK(localGradCouplingQ1(0.3, 0.0, 0.0).isZero(0.0));
}

TEST_CASE("n=2 unit-coefficient free system is 8/3")
{
    const StructuredMesh mesh(2);
    const SparseOperator a =
        restrictFree(mesh, assembleStiffness(mesh, Eigen::ArrayXd::Ones(4)));
    REQUIRE(a.mat.rows() == 1);
    CHECK(Eigen::MatrixXd(a.mat)(0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("assembly linearity and zero coefficient")
{
    const StructuredMesh mesh(4);
    const Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(mesh.elementCount());
    const Eigen::MatrixXd a1 = Eigen::MatrixXd(assembleStiffness(mesh, ones).mat);
    const Eigen::MatrixXd a2 = Eigen::MatrixXd(assembleStiffness(mesh, 2.0 * ones).mat);
    CHECK((a2 - 2.0 * a1).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(Eigen::MatrixXd(assembleStiffness(mesh, 0.0 * ones).mat).isZero(0.0));
    CHECK_THROWS_AS(assembleStiffness(mesh, Eigen::ArrayXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("stiffness kernel contains constants before restriction")
{
    const StructuredMesh mesh(5);
    Eigen::ArrayXd coeff(mesh.elementCount());
    for (int e = 0; e < mesh.elementCount(); ++e)
        coeff[e] = 0.5 + 0.01 * e;
    const SparseOperator a = assembleStiffness(mesh, coeff);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.nodeCount());
    CHECK((a.mat * ones).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(a.symmetric);
}

TEST_CASE("restricted stiffness is SPD for positive coefficients")
{
    for (int n : {2, 4, 8}) {
        const StructuredMesh mesh(n);
        Eigen::ArrayXd coeff(mesh.elementCount());
        for (int e = 0; e < mesh.elementCount(); ++e)
            coeff[e] = 0.1 + (e % 7) * 0.3;
        const Eigen::MatrixXd a =
            Eigen::MatrixXd(restrictFree(mesh, assembleStiffness(mesh, coeff)).mat);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("mass total sum is the domain area")
{
    for (int n : {1, 3, 16}) {
        const StructuredMesh mesh(n);
        const SparseOperator m = assembleMass(mesh);
        CHECK(Eigen::MatrixXd(m.mat).sum() == doctest::Approx(1.0).epsilon(1e-13));
    }
    const StructuredMesh single(1);
    const Eigen::MatrixXd m = Eigen::MatrixXd(assembleMass(single).mat);
    CHECK((m - localMassQ1(1.0)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("gradient coupling examples")
{
    const StructuredMesh mesh(2);
    using Beta = Eigen::Matrix<double, Eigen::Dynamic, 2>;

    CHECK(Eigen::MatrixXd(assembleGradientCoupling(mesh, Beta::Zero(4, 2)).mat).isZero(0.0));
    CHECK_THROWS_AS(assembleGradientCoupling(mesh, Beta::Zero(3, 2)), std::invalid_argument);

    // (B 1)[i] = sum_K beta_K . int_K grad phi_i, against the oracle.
    Beta beta(4, 2);
    beta << 1.0, -0.5, 0.25, 2.0, -1.0, 0.75, 0.5, 0.5;
    const Eigen::MatrixXd b = Eigen::MatrixXd(assembleGradientCoupling(mesh, beta).mat);
    const Eigen::VectorXd b_ones = b * Eigen::VectorXd::Ones(mesh.nodeCount());
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(mesh.nodeCount());
    for (int e = 0; e < mesh.elementCount(); ++e) {
        const Eigen::Matrix4d loc = oracle::couplingOracle(mesh.h(), beta(e, 0), beta(e, 1));
        const auto nd = mesh.elementNodes(e);
        for (int a = 0; a < 4; ++a)
            for (int j = 0; j < 4; ++j)
                expected[nd[a]] += loc(a, j);
    }
    CHECK((b_ones - expected).cwiseAbs().maxCoeff() <= 1e-14);

    // beta=(1,0) on n=1 reproduces the x-derivative table.
    const StructuredMesh one(1);
    Beta ex(1, 2);
    ex << 1.0, 0.0;
    const Eigen::MatrixXd bx = Eigen::MatrixXd(assembleGradientCoupling(one, ex).mat);
    CHECK((bx - oracle::couplingOracle(1.0, 1.0, 0.0)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(!assembleGradientCoupling(one, ex).symmetric);
}

TEST_CASE("load vector: partition of unity and the default split")
{
    const StructuredMesh mesh(8);
    PiecewiseRhs one;
    one.fallback = 1.0;
    CHECK(assembleLoad(mesh, one).values.sum() == doctest::Approx(1.0).epsilon(1e-13));

    PiecewiseRhs zero;
    CHECK(assembleLoad(mesh, zero).values.isZero(0.0));

    const StructuredMesh fine(128);
    const NodalVector load = assembleLoad(fine, makeRhs("default"));
    const double total = load.values.sum();
    // exact integral 0.91 up to the midpoint-rule band h*0.9
    CHECK(total >= 0.91 - fine.h() * 0.9);
    CHECK(total <= 0.91 + fine.h() * 0.9);
}

TEST_CASE("free restriction dimensions")
{
    for (int n : {1, 2, 4}) {
        const StructuredMesh mesh(n);
        const SparseOperator a =
            restrictFree(mesh, assembleStiffness(mesh, Eigen::ArrayXd::Ones(mesh.elementCount())));
        const int expected = (n - 1) * (n - 1);
        CHECK(a.mat.rows() == expected);
        CHECK(a.mat.cols() == expected);
    }
    const StructuredMesh mesh(4);
    const Eigen::VectorXd v = Eigen::VectorXd::Random(mesh.nodeCount());
    const Eigen::VectorXd free = restrictFree(mesh, v);
    CHECK(free.size() == 9);
    const Eigen::VectorXd back = extendFree(mesh, free);
    for (int node = 0; node < mesh.nodeCount(); ++node)
        CHECK(back[node] == (mesh.freeIndexOf(node) >= 0 ? v[node] : 0.0));
}

TEST_CASE("norms")
{
    const StructuredMesh mesh(16);
    CHECK(h1Seminorm(mesh, Eigen::VectorXd::Zero(mesh.nodeCount())) == 0.0);
    CHECK(l2Norm(mesh, Eigen::VectorXd::Zero(mesh.nodeCount())) == 0.0);

    // interpolant of x (boundary values kept): gradient is exactly (1,0)
    Eigen::VectorXd x_interp(mesh.nodeCount());
    for (int node = 0; node < mesh.nodeCount(); ++node)
        x_interp[node] = mesh.nodeCoords(node)[0] * mesh.h();
    CHECK(h1Seminorm(mesh, x_interp) == doctest::Approx(1.0).epsilon(1e-13));

    // bubble interpolant: L2 norm converges to the analytic 1/30
    const StructuredMesh mesh64(64);
    Eigen::VectorXd bubble(mesh64.nodeCount());
    for (int node = 0; node < mesh64.nodeCount(); ++node) {
        const auto [i, j] = mesh64.nodeCoords(node);
        const double x = i * mesh64.h(), y = j * mesh64.h();
        bubble[node] = x * (1 - x) * y * (1 - y);
    }
    CHECK(std::abs(l2Norm(mesh64, bubble) - 1.0 / 30.0) <= 1e-3);
}

TEST_SUITE_END();
