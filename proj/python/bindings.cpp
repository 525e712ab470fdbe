#include "lodqn/analysis.hpp"
#include "lodqn/coefficient.hpp"
#include "lodqn/corrector.hpp"
#include "lodqn/fem.hpp"
#include "lodqn/harness.hpp"
#include "lodqn/interpolation.hpp"
#include "lodqn/io.hpp"
#include "lodqn/mesh.hpp"
#include "lodqn/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace lodqn;

namespace {

ModelKind parseKind(const std::string& kind)
{
    if (kind == "exp4") return ModelKind::exp4;
    if (kind == "exp2") return ModelKind::exp2;
    if (kind == "van_genuchten" || kind == "vg") return ModelKind::van_genuchten;
    if (kind == "quadratic") return ModelKind::quadratic;
    throw std::invalid_argument("unknown model kind: " + kind);
}

PiecewiseRhs rhsFromAny(const py::object& rhs)
{
    if (py::isinstance<py::str>(rhs))
        return makeRhs(rhs.cast<std::string>());
    PiecewiseRhs f;
    const py::dict d = rhs.cast<py::dict>();
    f.fallback = d["fallback"].cast<double>();
    if (d.contains("regions"))
        for (const auto& item : d["regions"].cast<py::list>()) {
            const auto t = item.cast<std::tuple<double, double, double, double, double>>();
            f.regions.push_back({std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t),
                                 std::get<4>(t)});
        }
    return f;
}

CombinedCoefficient coefficientFromTerms(
    int fine_n, const std::vector<std::pair<Eigen::ArrayXd, NonlinearModel>>& terms)
{
    const StructuredMesh fine(fine_n);
    CombinedCoefficient coeff;
    for (const auto& [values, model] : terms) {
        if (values.size() != fine.elementCount())
            throw std::invalid_argument("field length must equal fine element count");
        SpatialField f;
        f.n = fine_n;
        f.eps_cells = 1;
        f.values = values;
        f.base_lo = f.minValue();
        f.base_hi = f.maxValue();
        coeff.terms.push_back({std::move(f), model});
    }
    return coeff;
}

} // namespace

PYBIND11_MODULE(_lodqn, m)
{
    m.doc() = "Localized orthogonal decomposition solver for quasilinear diffusion problems";

    py::class_<StructuredMesh>(m, "Mesh")
        .def(py::init<int>(), py::arg("n"))
        .def_property_readonly("n", &StructuredMesh::n)
        .def_property_readonly("h", &StructuredMesh::h)
        .def_property_readonly("node_count", &StructuredMesh::nodeCount)
        .def_property_readonly("element_count", &StructuredMesh::elementCount)
        .def_property_readonly("free_count", &StructuredMesh::freeCount)
        .def("is_boundary_node", &StructuredMesh::isBoundaryNode)
        .def("__repr__", [](const StructuredMesh& mesh) {
            return "Mesh(n=" + std::to_string(mesh.n()) + ")";
        });

    py::class_<NonlinearModel>(m, "Model")
        .def(py::init([](const std::string& kind, double param) {
                 return makeModel(parseKind(kind), param);
             }),
             py::arg("kind"), py::arg("param") = 0.0)
        .def("k", &NonlinearModel::k, py::arg("s"))
        .def("dk", &NonlinearModel::dk, py::arg("s"))
        .def("descriptor", &NonlinearModel::descriptor);

    py::class_<CombinedCoefficient>(m, "Coefficient")
        .def(py::init(&coefficientFromTerms), py::arg("fine_n"), py::arg("terms"))
        .def("alpha_elementwise",
             [](const CombinedCoefficient& coeff, const StructuredMesh& fine,
                const Eigen::VectorXd& v) { return elementwiseAlpha(coeff, fine, v); });

    m.def(
        "generate_spatial_field",
        [](int fine_n, std::uint64_t seed, int eps_cells, double lo, double hi,
           const py::object& channel) {
            const StructuredMesh fine(fine_n);
            std::optional<ChannelSpec> ch;
            if (!channel.is_none()) {
                const auto t = channel.cast<std::tuple<double, double, double, double, double>>();
                ch = ChannelSpec{std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t),
                                 std::get<4>(t)};
            }
            return Eigen::ArrayXd(
                generateSpatialField(fine, seed, eps_cells, lo, hi, ch).values);
        },
        py::arg("fine_n"), py::arg("seed"), py::arg("eps_cells"), py::arg("base_lo"),
        py::arg("base_hi"), py::arg("channel") = py::none(),
        "Log-uniform eps-grid field with optional (x0,x1,y0,y1,value) channel");

    py::class_<MeshPair>(m, "MeshPair")
        .def(py::init<int, int>(), py::arg("coarse_n"), py::arg("fine_n"))
        .def_property_readonly("ratio", [](const MeshPair& p) { return p.ratio; })
        .def_property_readonly("coarse", [](const MeshPair& p) { return p.coarse; })
        .def_property_readonly("fine", [](const MeshPair& p) { return p.fine; });

    py::class_<TransferOperators>(m, "Transfer");
    m.def("build_transfer", &buildTransfer, py::arg("pair"));
    m.def(
        "interpolate",
        [](const TransferOperators& tr, const MeshPair& pair, const Eigen::VectorXd& v) {
            return interpolate(tr, pair, v);
        },
        py::arg("transfer"), py::arg("pair"), py::arg("v_fine"), "L2 projection onto V_H");
    m.def(
        "prolong",
        [](const TransferOperators& tr, const Eigen::VectorXd& w) { return prolong(tr, w); },
        py::arg("transfer"), py::arg("w_coarse"));

    m.def(
        "assemble_load",
        [](const StructuredMesh& mesh, const py::object& rhs) {
            return assembleLoad(mesh, rhsFromAny(rhs)).values;
        },
        py::arg("mesh"), py::arg("rhs"));

    m.def("h1_seminorm", &h1Seminorm, py::arg("mesh"), py::arg("v"));
    m.def("l2_norm", &l2Norm, py::arg("mesh"), py::arg("v"));

    py::class_<SolveTrace>(m, "SolveTrace")
        .def_readonly("iterations", &SolveTrace::iterations)
        .def_readonly("increments", &SolveTrace::increments)
        .def_readonly("errors", &SolveTrace::errors)
        .def_readonly("converged", &SolveTrace::converged)
        .def_readonly("coefficient_fixed_point", &SolveTrace::coefficient_fixed_point);

    m.def(
        "solve_reference",
        [](const StructuredMesh& mesh, const CombinedCoefficient& coeff, const py::object& rhs,
           double tol, int max_iter) {
            const NodalVector load = assembleLoad(mesh, rhsFromAny(rhs));
            SolveResult res = solveReference(mesh, coeff, load, tol, max_iter,
                                             Eigen::VectorXd::Zero(mesh.nodeCount()));
            return py::make_tuple(res.solution.values, res.trace);
        },
        py::arg("mesh"), py::arg("coefficient"), py::arg("rhs"), py::arg("tol") = 1e-12,
        py::arg("max_iter") = 10, "Kacanov fine solve from u0 = 0");

    py::class_<CorrectorSet>(m, "CorrectorSet")
        .def_readonly("coarse_n", &CorrectorSet::coarse_n)
        .def_readonly("fine_n", &CorrectorSet::fine_n)
        .def_readonly("k", &CorrectorSet::k)
        .def("dense", &CorrectorSet::dense, py::arg("coarse_free_index"),
             py::arg("fine_node_count"));

    m.def(
        "assemble_correctors",
        [](const MeshPair& pair, const TransferOperators& tr, int k,
           const CombinedCoefficient& coeff, const std::string& linearization,
           const Eigen::VectorXd& p_star, int threads) {
            const LinearizationData lin =
                buildLinearization(coeff, parseLinearization(linearization), p_star, pair.fine);
            return assembleCorrectorSet(pair, tr, k, lin, threads);
        },
        py::arg("pair"), py::arg("transfer"), py::arg("k"), py::arg("coefficient"),
        py::arg("linearization"), py::arg("p_star"), py::arg("threads") = 0);

    py::class_<MultiscaleBasis>(m, "Basis").def_readonly("k", &MultiscaleBasis::k);
    m.def("build_basis", &buildBasis, py::arg("pair"), py::arg("transfer"),
          py::arg("correctors"));

    m.def(
        "solve_lod",
        [](const MeshPair& pair, const TransferOperators& tr, const MultiscaleBasis& basis,
           const CombinedCoefficient& coeff, const py::object& rhs, double tol, int max_iter,
           const Eigen::VectorXd& u0, const std::string& mode) {
            const NodalVector load = assembleLoad(pair.fine, rhsFromAny(rhs));
            SolveResult res =
                solveLod(pair, tr, basis, coeff, load, tol, max_iter, u0, parseMode(mode));
            return py::make_tuple(res.solution.values, res.trace);
        },
        py::arg("pair"), py::arg("transfer"), py::arg("basis"), py::arg("coefficient"),
        py::arg("rhs"), py::arg("tol") = 1e-12, py::arg("max_iter") = 10, py::arg("u0"),
        py::arg("mode") = "galerkin");

    m.def(
        "relative_errors",
        [](const MeshPair& pair, const TransferOperators& tr, const Eigen::VectorXd& u_ref,
           const Eigen::VectorXd& u_lod) {
            const ErrorReport r = relativeErrors(pair, tr, u_ref, u_lod);
            return py::make_tuple(r.e_lod, r.e_h);
        },
        py::arg("pair"), py::arg("transfer"), py::arg("u_ref"), py::arg("u_lod"));

    m.def(
        "decay_profile",
        [](const MeshPair& pair, const TransferOperators& tr, const CombinedCoefficient& coeff,
           const std::string& linearization, const Eigen::VectorXd& p_star,
           const Eigen::VectorXd& v_coarse, int k_max, int threads) {
            const LinearizationData lin =
                buildLinearization(coeff, parseLinearization(linearization), p_star, pair.fine);
            return decayProfile(pair, tr, lin, v_coarse, k_max, threads);
        },
        py::arg("pair"), py::arg("transfer"), py::arg("coefficient"), py::arg("linearization"),
        py::arg("p_star"), py::arg("v_coarse"), py::arg("k_max"), py::arg("threads") = 0);

    m.def(
        "write_field",
        [](const std::filesystem::path& path, const Eigen::ArrayXd& values, int n) {
            SpatialField f;
            f.n = n;
            f.eps_cells = 1;
            f.values = values;
            if (values.size() != static_cast<Eigen::Index>(n) * n)
                throw std::invalid_argument("field length must be n*n");
            writeFieldFile(path, f);
        },
        py::arg("path"), py::arg("values"), py::arg("n"));
    m.def(
        "read_field",
        [](const std::filesystem::path& path) {
            return Eigen::ArrayXd(readFieldFile(path).values);
        },
        py::arg("path"));
}
