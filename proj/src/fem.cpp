#include "lodqn/fem.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <stdexcept>
#include <string>

namespace lodqn {

Eigen::Matrix4d localStiffnessQ1(double coefficient)
{
    // Exact integrals of grad(phi_i).grad(phi_j) for bilinears on a square,
    // corner order SW, SE, NW, NE. Opposite corners couple with -1/3.
    static const Eigen::Matrix4d ref = (Eigen::Matrix4d() <<
         2.0 / 3.0, -1.0 / 6.0, -1.0 / 6.0, -1.0 / 3.0,
        -1.0 / 6.0,  2.0 / 3.0, -1.0 / 3.0, -1.0 / 6.0,
        -1.0 / 6.0, -1.0 / 3.0,  2.0 / 3.0, -1.0 / 6.0,
        -1.0 / 3.0, -1.0 / 6.0, -1.0 / 6.0,  2.0 / 3.0).finished();
    return coefficient * ref;
}

Eigen::Matrix4d localMassQ1(double h)
{
    static const Eigen::Matrix4d ref = (Eigen::Matrix4d() <<
        4.0, 2.0, 2.0, 1.0,
        2.0, 4.0, 1.0, 2.0,
        2.0, 1.0, 4.0, 2.0,
        1.0, 2.0, 2.0, 4.0).finished() / 36.0;
    return (h * h) * ref;
}

Eigen::Matrix4d localGradCouplingQ1(double h, double bx, double by)
{
    // Gx[i][j] = int phi_j d/dx phi_i on the unit square; Gy analogous.
    static const Eigen::Matrix4d gx = (Eigen::Matrix4d() <<
        -2.0, -2.0, -1.0, -1.0,
         2.0,  2.0,  1.0,  1.0,
        -1.0, -1.0, -2.0, -2.0,
         1.0,  1.0,  2.0,  2.0).finished() / 12.0;
    static const Eigen::Matrix4d gy = (Eigen::Matrix4d() <<
        -2.0, -1.0, -2.0, -1.0,
        -1.0, -2.0, -1.0, -2.0,
         2.0,  1.0,  2.0,  1.0,
         1.0,  2.0,  1.0,  2.0).finished() / 12.0;
    return h * (bx * gx + by * gy);
}

namespace {

SparseOperator assembleFromLocal(const StructuredMesh& mesh,
                                 const std::function<Eigen::Matrix4d(int)>& local, bool symmetric)
{
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.elementCount()) * 16);
    for (int e = 0; e < mesh.elementCount(); ++e) {
        const Eigen::Matrix4d loc = local(e);
        const auto nd = mesh.elementNodes(e);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                triplets.emplace_back(nd[a], nd[b], loc(a, b));
    }
    SparseOperator op;
    op.symmetric = symmetric;
    op.mat.resize(mesh.nodeCount(), mesh.nodeCount());
    op.mat.setFromTriplets(triplets.begin(), triplets.end());
    op.mat.makeCompressed();
    return op;
}

} // namespace

SparseOperator assembleStiffness(const StructuredMesh& mesh, const Eigen::ArrayXd& elem_coeff)
{
    if (elem_coeff.size() != mesh.elementCount())
        throw std::invalid_argument("assembleStiffness: coefficient array length " +
                                    std::to_string(elem_coeff.size()) + " != element count " +
                                    std::to_string(mesh.elementCount()));
    if (!elem_coeff.isFinite().all())
        throw std::invalid_argument("assembleStiffness: non-finite coefficient");
    return assembleFromLocal(
        mesh, [&](int e) { return localStiffnessQ1(elem_coeff[e]); }, true);
}

SparseOperator assembleMass(const StructuredMesh& mesh)
{
    const Eigen::Matrix4d loc = localMassQ1(mesh.h());
    return assembleFromLocal(
        mesh, [&](int) { return loc; }, true);
}

SparseOperator assembleGradientCoupling(const StructuredMesh& mesh,
                                        const Eigen::Matrix<double, Eigen::Dynamic, 2>& beta)
{
    if (beta.rows() != mesh.elementCount())
        throw std::invalid_argument("assembleGradientCoupling: beta array length mismatch");
    return assembleFromLocal(
        mesh, [&](int e) { return localGradCouplingQ1(mesh.h(), beta(e, 0), beta(e, 1)); }, false);
}

double PiecewiseRhs::at(double x, double y) const
{
    for (const Region& r : regions)
        if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1)
            return r.value;
    return fallback;
}

NodalVector assembleLoad(const StructuredMesh& mesh, const std::function<double(double, double)>& f,
                         MeshTag tag)
{
    NodalVector load;
    load.tag = tag;
    load.values = Eigen::VectorXd::Zero(mesh.nodeCount());
    const double quarter_area = 0.25 * mesh.h() * mesh.h();
    for (int e = 0; e < mesh.elementCount(); ++e) {
        const auto [cx, cy] = mesh.elementCenter(e);
        const double contrib = f(cx, cy) * quarter_area;
        for (int node : mesh.elementNodes(e))
            load.values[node] += contrib;
    }
    return load;
}

NodalVector assembleLoad(const StructuredMesh& mesh, const PiecewiseRhs& f, MeshTag tag)
{
    return assembleLoad(
        mesh, [&](double x, double y) { return f.at(x, y); }, tag);
}

SparseOperator restrictFree(const StructuredMesh& mesh, const SparseOperator& op)
{
    if (op.mat.rows() != mesh.nodeCount())
        throw std::invalid_argument("restrictFree: operator not on all nodes");
    SparseOperator out;
    out.symmetric = op.symmetric;
    out.mat = extractSubmatrix(op.mat, mesh.freeNodes(), mesh.freeNodes());
    return out;
}

Eigen::VectorXd restrictFree(const StructuredMesh& mesh, const Eigen::VectorXd& all_nodes)
{
    if (all_nodes.size() != mesh.nodeCount())
        throw std::invalid_argument("restrictFree: vector not on all nodes");
    Eigen::VectorXd out(mesh.freeCount());
    for (int i = 0; i < mesh.freeCount(); ++i)
        out[i] = all_nodes[mesh.freeNodes()[i]];
    return out;
}

Eigen::VectorXd extendFree(const StructuredMesh& mesh, const Eigen::VectorXd& free_values)
{
    if (free_values.size() != mesh.freeCount())
        throw std::invalid_argument("extendFree: vector not on free nodes");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.nodeCount());
    for (int i = 0; i < mesh.freeCount(); ++i)
        out[mesh.freeNodes()[i]] = free_values[i];
    return out;
}

namespace {

double quadraticForm(const StructuredMesh& mesh, const Eigen::VectorXd& v,
                     const Eigen::Matrix4d& loc)
{
    if (v.size() != mesh.nodeCount())
        throw std::invalid_argument("norm: vector not on all nodes");
    double acc = 0.0;
    for (int e = 0; e < mesh.elementCount(); ++e) {
        const auto nd = mesh.elementNodes(e);
        Eigen::Vector4d vl(v[nd[0]], v[nd[1]], v[nd[2]], v[nd[3]]);
        acc += vl.dot(loc * vl);
    }
    return std::sqrt(std::max(0.0, acc));
}

} // namespace

double h1Seminorm(const StructuredMesh& mesh, const Eigen::VectorXd& v)
{
    return quadraticForm(mesh, v, localStiffnessQ1(1.0));
}

double l2Norm(const StructuredMesh& mesh, const Eigen::VectorXd& v)
{
    return quadraticForm(mesh, v, localMassQ1(mesh.h()));
}

Eigen::SparseMatrix<double> extractSubmatrix(const Eigen::SparseMatrix<double>& m,
                                             const std::vector<int>& rows,
                                             const std::vector<int>& cols)
{
    std::vector<int> row_of(m.rows(), -1);
    for (std::size_t r = 0; r < rows.size(); ++r)
        row_of[rows[r]] = static_cast<int>(r);

    Eigen::SparseMatrix<double> out(static_cast<Eigen::Index>(rows.size()),
                                    static_cast<Eigen::Index>(cols.size()));
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, cols[c]); it; ++it) {
            const int r = row_of[it.row()];
            if (r >= 0)
                triplets.emplace_back(r, static_cast<int>(c), it.value());
        }
    }
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

} // namespace lodqn
