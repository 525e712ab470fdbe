#pragma once

#include <array>
#include <vector>

namespace lodqn {

/// Uniform quadrilateral partition of the unit square [0,1]^2.
///
/// Nodes are indexed lexicographically with x fastest: node (i,j) has index
/// j*(n+1)+i and sits at (i*h, j*h). Element (i,j) has index j*n+i and covers
/// [i*h,(i+1)*h] x [j*h,(j+1)*h]. Its four corner nodes are listed in tensor
/// order SW, SE, NW, NE, i.e. {(i,j),(i+1,j),(i,j+1),(i+1,j+1)}.
/// Homogeneous Dirichlet conditions: a node is constrained iff it lies on the
/// boundary of the square; the remaining interior nodes are "free".
class StructuredMesh {
public:
    StructuredMesh() = default;
    explicit StructuredMesh(int n_per_side);

    int n() const { return n_; }
    double h() const { return h_; }
    int nodeCount() const { return (n_ + 1) * (n_ + 1); }
    int elementCount() const { return n_ * n_; }

    int nodeIndex(int i, int j) const { return j * (n_ + 1) + i; }
    int elementIndex(int i, int j) const { return j * n_ + i; }
    std::array<int, 2> nodeCoords(int node) const { return {node % (n_ + 1), node / (n_ + 1)}; }
    std::array<int, 2> elementCoords(int elem) const { return {elem % n_, elem / n_}; }

    /// Corner nodes of an element in SW, SE, NW, NE order.
    std::array<int, 4> elementNodes(int elem) const;

    /// Midpoint of an element.
    std::array<double, 2> elementCenter(int elem) const;

    bool isBoundaryNode(int node) const;

    /// Interior (non-Dirichlet) nodes in ascending node order.
    const std::vector<int>& freeNodes() const { return free_nodes_; }
    int freeCount() const { return static_cast<int>(free_nodes_.size()); }

    /// Position of a node within freeNodes(), or -1 if constrained.
    int freeIndexOf(int node) const { return free_index_[node]; }

private:
    int n_ = 0;
    double h_ = 0.0;
    std::vector<int> free_nodes_;
    std::vector<int> free_index_;
};

StructuredMesh buildMesh(int n_per_side);

/// Nested coarse/fine pair; fine.n must be an integer multiple of coarse.n.
struct MeshPair {
    StructuredMesh coarse;
    StructuredMesh fine;
    int ratio = 1;

    MeshPair() = default;
    MeshPair(int coarse_n, int fine_n);
};

/// k-layer patch N^k(T) around a coarse element T, together with the fine
/// nodes strictly inside the patch. On a structured grid the closure-
/// intersection rule (vertex neighbors included) makes N^k(T) the Chebyshev
/// ball of radius k in element coordinates, clipped to the grid.
struct Patch {
    int center = 0;
    int k = 0;
    // inclusive coarse-element ranges covered by the patch
    int ilo = 0, ihi = 0, jlo = 0, jhi = 0;
    std::vector<int> elements;             // coarse element indices, ascending
    std::vector<int> fine_interior_nodes;  // fine node indices, ascending

    bool coversWholeGrid(const StructuredMesh& coarse) const
    {
        return ilo == 0 && jlo == 0 && ihi == coarse.n() - 1 && jhi == coarse.n() - 1;
    }
};

Patch buildPatch(const MeshPair& pair, int center_element, int k);

/// max_T |N^k(T)|; equals min(2k+1, n)^2 on the structured grid.
int patchCountBound(const StructuredMesh& mesh, int k);

} // namespace lodqn
