#include "lodqn/mesh.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lodqn {

StructuredMesh::StructuredMesh(int n_per_side)
    : n_(n_per_side)
{
    if (n_per_side < 1)
        throw std::invalid_argument("StructuredMesh: n_per_side must be >= 1, got " +
                                    std::to_string(n_per_side));
    h_ = 1.0 / n_;
    free_index_.assign(nodeCount(), -1);
    for (int j = 1; j < n_; ++j)
        for (int i = 1; i < n_; ++i) {
            free_index_[nodeIndex(i, j)] = static_cast<int>(free_nodes_.size());
            free_nodes_.push_back(nodeIndex(i, j));
        }
}

std::array<int, 4> StructuredMesh::elementNodes(int elem) const
{
    const auto [i, j] = elementCoords(elem);
    return {nodeIndex(i, j), nodeIndex(i + 1, j), nodeIndex(i, j + 1), nodeIndex(i + 1, j + 1)};
}

std::array<double, 2> StructuredMesh::elementCenter(int elem) const
{
    const auto [i, j] = elementCoords(elem);
    return {(i + 0.5) * h_, (j + 0.5) * h_};
}

bool StructuredMesh::isBoundaryNode(int node) const
{
    const auto [i, j] = nodeCoords(node);
    return i == 0 || i == n_ || j == 0 || j == n_;
}

StructuredMesh buildMesh(int n_per_side)
{
    return StructuredMesh(n_per_side);
}

MeshPair::MeshPair(int coarse_n, int fine_n)
    : coarse(coarse_n)
    , fine(fine_n)
{
    if (fine_n % coarse_n != 0)
        throw std::invalid_argument("MeshPair: fine n (" + std::to_string(fine_n) +
                                    ") must be a multiple of coarse n (" +
                                    std::to_string(coarse_n) + ")");
    ratio = fine_n / coarse_n;
}

Patch buildPatch(const MeshPair& pair, int center_element, int k)
{
    const StructuredMesh& coarse = pair.coarse;
    if (center_element < 0 || center_element >= coarse.elementCount())
        throw std::invalid_argument("buildPatch: invalid center element index");
    if (k < 0)
        throw std::invalid_argument("buildPatch: k must be non-negative");

    Patch p;
    p.center = center_element;
    p.k = k;
    const auto [ci, cj] = coarse.elementCoords(center_element);
    p.ilo = std::max(0, ci - k);
    p.ihi = std::min(coarse.n() - 1, ci + k);
    p.jlo = std::max(0, cj - k);
    p.jhi = std::min(coarse.n() - 1, cj + k);

    p.elements.reserve((p.ihi - p.ilo + 1) * (p.jhi - p.jlo + 1));
    for (int j = p.jlo; j <= p.jhi; ++j)
        for (int i = p.ilo; i <= p.ihi; ++i)
            p.elements.push_back(coarse.elementIndex(i, j));

    // Fine nodes strictly inside the patch rectangle. Nodes on the patch
    // boundary are excluded so zero-extension stays H^1-conforming; nodes on
    // the domain boundary never qualify because the strict bounds clip them.
    const int r = pair.ratio;
    const int filo = p.ilo * r, fihi = (p.ihi + 1) * r;
    const int fjlo = p.jlo * r, fjhi = (p.jhi + 1) * r;
    p.fine_interior_nodes.reserve(std::max(0, (fihi - filo - 1)) * std::max(0, (fjhi - fjlo - 1)));
    for (int j = fjlo + 1; j < fjhi; ++j)
        for (int i = filo + 1; i < fihi; ++i)
            p.fine_interior_nodes.push_back(pair.fine.nodeIndex(i, j));
    return p;
}

int patchCountBound(const StructuredMesh& mesh, int k)
{
    if (k < 0)
        throw std::invalid_argument("patchCountBound: k must be non-negative");
    const int span = std::min(2 * k + 1, mesh.n());
    return span * span;
}

} // namespace lodqn
