#pragma once

#include "lodqn/analysis.hpp"
#include "lodqn/coefficient.hpp"
#include "lodqn/corrector.hpp"
#include "lodqn/interpolation.hpp"
#include "lodqn/io.hpp"
#include "lodqn/mesh.hpp"
#include "lodqn/solver.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace lodqn {

/// Experiment description; defaults reproduce the standard study setup
/// (fine reference at n=128, coarse sweep 2..64, oversampling 1..4).
///
/// p_star accepts: zero | g | g1 | reference | coarse_fem:<n> |
/// ulod:<n>:<k>:<p_star>.
struct ExperimentConfig {
    std::string model = "exp2";  // exp2|exp4|vg|quadratic|combined_vg|combined_exp_vg
    double vg_a = 0.005;
    std::string rhs = "default";  // default|exp1
    int fine_n = 128;
    std::vector<int> coarse = {2, 4, 8, 16, 32, 64};
    std::vector<int> k_list = {1, 2, 3, 4};
    Linearization linearization = Linearization::kacanov;
    std::string p_star = "zero";
    std::string mode = "galerkin";  // galerkin|petrov_galerkin
    double tol = 1e-12;
    int max_iter = 10;
    int stages = 1;
    std::uint64_t seed = 42;
    int eps_cells = 64;
    double base_lo = 0.05;
    double base_hi = 1.0;
    bool use_channel = true;
    ChannelSpec channel{0.5, 1.0, 0.05, 0.15, 50.0};
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path output_dir = "out";
    int threads = 0;
    bool timing = true;
};

ExperimentConfig loadConfigFile(const std::filesystem::path& path);
/// Merge JSON text over an existing config (flags handled by the CLI).
void applyConfigJson(ExperimentConfig& cfg, const std::string& json_text);

PiecewiseRhs makeRhs(const std::string& id);
LodMode parseMode(const std::string& mode);
Linearization parseLinearization(const std::string& name);

/// Nodal interpolants of the two analytic linearization points.
double gFunction(double x, double y);
double g1Function(double x, double y);
Eigen::VectorXd nodalInterpolant(const StructuredMesh& mesh, double (*f)(double, double));

/// Samples each spatial field at coarse element midpoints, for plain coarse
/// FEM solves with the multiscale coefficient.
CombinedCoefficient sampleOnMesh(const CombinedCoefficient& coeff, const StructuredMesh& fine,
                                 const StructuredMesh& target);

/// Lazily built, cached experiment state: meshes, transfer operators, the
/// coefficient, the fine reference solution and corrector sets. Reference
/// solutions and corrector sets are also cached on disk under cache_dir,
/// keyed by content fingerprints; a mismatching fingerprint is a miss.
class ExperimentContext {
public:
    explicit ExperimentContext(ExperimentConfig cfg);

    const ExperimentConfig& config() const { return cfg_; }
    const StructuredMesh& fineMesh() const { return fine_; }
    const CombinedCoefficient& coefficient() const { return coeff_; }
    const PiecewiseRhs& rhs() const { return rhs_; }
    const NodalVector& load() const { return load_; }

    const MeshPair& pairFor(int coarse_n);
    const TransferOperators& transferFor(int coarse_n);

    /// Fine reference solution (disk-cached). The trace reflects the solve
    /// that produced it; a cache hit reports zero iterations.
    const Eigen::VectorXd& reference();
    const SolveTrace& referenceTrace();

    Eigen::VectorXd realizePStar(const std::string& spec);

    CorrectorSet correctorsFor(int coarse_n, int k, Linearization kind,
                               const Eigen::VectorXd& p_star);

    std::filesystem::path referenceCachePath() const;

private:
    ExperimentConfig cfg_;
    StructuredMesh fine_;
    CombinedCoefficient coeff_;
    PiecewiseRhs rhs_;
    NodalVector load_;
    std::map<int, MeshPair> pairs_;
    std::map<int, TransferOperators> transfers_;
    bool have_reference_ = false;
    Eigen::VectorXd reference_;
    SolveTrace reference_trace_;
};

CombinedCoefficient buildCoefficient(const ExperimentConfig& cfg, const StructuredMesh& fine);

struct StudyRow {
    std::string model, linearization, p_star;
    double H = 0.0;
    int k = 0;
    int iterations = 0;
    double e_lod = std::numeric_limits<double>::quiet_NaN();
    double e_h = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = 0.0;
    std::string status = "ok";
    SolveTrace trace;  // not serialized; used by callers for diagnostics
};

struct StudyResult {
    std::vector<StudyRow> rows;
    std::filesystem::path table_path;
    bool all_ok = true;
};

/// One row per (H, k) in (H ascending, k ascending) order; failures are
/// recorded in the status column and the study continues.
StudyResult runConvergenceStudy(const ExperimentConfig& cfg);

struct IterationRow {
    std::string model, linearization, p_star;
    double H = 0.0;
    int k = 0;
    int iteration = 0;
    double e_lod = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

struct IterationStudyResult {
    std::vector<IterationRow> rows;
    std::filesystem::path table_path;
    bool all_ok = true;
};

/// Error after every Kacanov iterate (iteration 0 is the error of u0).
IterationStudyResult runIterationStudy(const ExperimentConfig& cfg);

void writeStudyTable(const std::filesystem::path& path, const std::vector<StudyRow>& rows,
                     bool timing);
void writeIterationTable(const std::filesystem::path& path, const std::vector<IterationRow>& rows);

/// Column-based log-log plot of a study table as a standalone SVG with an
/// order-1 reference slope line (omitted for single-point tables).
struct PlotSpec {
    std::string x = "H";
    std::string y = "e_lod";
    std::string series = "k";
};

void emitPlot(const std::filesystem::path& table_path, const PlotSpec& spec,
              const std::filesystem::path& out_path);

/// Cache directory listing/maintenance for the CLI.
struct CacheEntry {
    std::filesystem::path path;
    std::string kind;  // field|vector|correctors|other
    std::uintmax_t bytes = 0;
    std::string detail;
};
std::vector<CacheEntry> inspectCache(const std::filesystem::path& cache_dir);
std::size_t clearCache(const std::filesystem::path& cache_dir);

} // namespace lodqn
