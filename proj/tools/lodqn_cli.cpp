#include "lodqn/analysis.hpp"
#include "lodqn/harness.hpp"
#include "lodqn/io.hpp"
#include "lodqn/solver.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace lodqn;

struct CommonOpts {
    std::string config_file;
    ExperimentConfig cfg;
};

void addConfigFlags(CLI::App* cmd, CommonOpts& opts)
{
    cmd->add_option("--config", opts.config_file, "JSON config file; flags override its values");
    // Every flag mirrors an ExperimentConfig field.
    cmd->add_option("--model", opts.cfg.model,
                    "exp2|exp4|vg|quadratic|combined_vg|combined_exp_vg");
    cmd->add_option("--vg-a", opts.cfg.vg_a, "Van Genuchten parameter a");
    cmd->add_option("--rhs", opts.cfg.rhs, "default|exp1");
    cmd->add_option("--fine-n", opts.cfg.fine_n, "fine mesh elements per side");
    cmd->add_option("--coarse", opts.cfg.coarse, "coarse mesh sizes")->delimiter(',');
    cmd->add_option("--k", opts.cfg.k_list, "oversampling parameters")->delimiter(',');
    cmd->add_option_function<std::string>(
        "--linearization",
        [&opts](const std::string& v) { opts.cfg.linearization = parseLinearization(v); },
        "kacanov|frechet");
    cmd->add_option("--p-star", opts.cfg.p_star,
                    "zero|g|g1|reference|coarse_fem:<n>|ulod:<n>:<k>:<p_star>");
    cmd->add_option("--mode", opts.cfg.mode, "galerkin|petrov_galerkin");
    cmd->add_option("--tol", opts.cfg.tol, "Kacanov stopping tolerance");
    cmd->add_option("--max-iter", opts.cfg.max_iter, "Kacanov iteration cap");
    cmd->add_option("--stages", opts.cfg.stages, "iterated-LOD cascade depth (solve-lod)");
    cmd->add_option("--seed", opts.cfg.seed, "coefficient seed");
    cmd->add_option("--eps-cells", opts.cfg.eps_cells, "epsilon-grid cells per side");
    cmd->add_option("--base-lo", opts.cfg.base_lo, "coefficient range lower bound");
    cmd->add_option("--base-hi", opts.cfg.base_hi, "coefficient range upper bound");
    cmd->add_flag("--no-channel", [&opts](std::int64_t) { opts.cfg.use_channel = false; },
                  "disable the high-contrast channel");
    cmd->add_option("--channel-value", opts.cfg.channel.value, "channel coefficient value");
    cmd->add_option("--cache-dir", opts.cfg.cache_dir, "cache directory");
    cmd->add_option("--output-dir", opts.cfg.output_dir, "output directory");
    cmd->add_option("--threads", opts.cfg.threads, "worker threads (0 = hardware)");
    cmd->add_flag("--no-timing", [&opts](std::int64_t) { opts.cfg.timing = false; },
                  "write wall_ms as 0 for byte-reproducible tables");
}

/// Flags must override file values, so the config file is loaded into the
/// defaults before CLI11 parses the command line.
void preloadConfig(CommonOpts& opts, int argc, char** argv)
{
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc)
            opts.cfg = loadConfigFile(argv[i + 1]);
        else if (a.rfind("--config=", 0) == 0)
            opts.cfg = loadConfigFile(a.substr(9));
    }
}

int cmdGenCoefficient(const CommonOpts& opts, const std::string& out)
{
    const StructuredMesh fine(opts.cfg.fine_n);
    const CombinedCoefficient coeff = buildCoefficient(opts.cfg, fine);
    int idx = 0;
    for (const auto& term : coeff.terms) {
        std::filesystem::path path = out;
        if (coeff.terms.size() > 1)
            path = path.parent_path() /
                   (path.stem().string() + "_" + std::to_string(idx) + path.extension().string());
        writeFieldFile(path, term.c);
        std::cout << path.string() << ": n=" << term.c.n << " min=" << term.c.minValue()
                  << " max=" << term.c.maxValue() << " contrast=" << term.c.contrast() << "\n";
        ++idx;
    }
    return 0;
}

int cmdSolveReference(const CommonOpts& opts, const std::string& out)
{
    ExperimentContext ctx(opts.cfg);
    const Eigen::VectorXd& u = ctx.reference();
    const SolveTrace& trace = ctx.referenceTrace();
    if (!out.empty())
        writeVectorFile(out, u, opts.cfg.fine_n);
    std::cout << "reference solved: n=" << opts.cfg.fine_n << " iterations=" << trace.iterations
              << " converged=" << (trace.converged ? "yes" : "no")
              << " |u|_1=" << h1Seminorm(ctx.fineMesh(), u) << "\n"
              << "cache: " << ctx.referenceCachePath().string() << "\n";
    return trace.converged ? 0 : 1;
}

int cmdCorrectors(const CommonOpts& opts)
{
    ExperimentContext ctx(opts.cfg);
    const Eigen::VectorXd p_star = ctx.realizePStar(opts.cfg.p_star);
    int failures = 0;
    for (int n : opts.cfg.coarse)
        for (int k : opts.cfg.k_list) {
            try {
                const CorrectorSet set =
                    ctx.correctorsFor(n, k, opts.cfg.linearization, p_star);
                std::cout << "correctors H=1/" << n << " k=" << k << " nodes="
                          << set.entries.size() << " fingerprint="
                          << toHex(set.fingerprint, 8) << "\n";
            } catch (const std::exception& e) {
                std::cerr << "correctors H=1/" << n << " k=" << k << " failed: " << e.what()
                          << "\n";
                ++failures;
            }
        }
    return failures == 0 ? 0 : 1;
}

int cmdSolveLod(const CommonOpts& opts, const std::string& out)
{
    if (opts.cfg.coarse.size() != 1 || opts.cfg.k_list.size() != 1)
        throw CLI::ValidationError("solve-lod expects exactly one --coarse and one --k value");
    const int n = opts.cfg.coarse.front();
    const int k = opts.cfg.k_list.front();

    ExperimentContext ctx(opts.cfg);
    const MeshPair& pair = ctx.pairFor(n);
    const TransferOperators& tr = ctx.transferFor(n);
    Eigen::VectorXd p_star = ctx.realizePStar(opts.cfg.p_star);

    Eigen::VectorXd u;
    SolveTrace trace;
    if (opts.cfg.stages <= 1) {
        const CorrectorSet set = ctx.correctorsFor(n, k, opts.cfg.linearization, p_star);
        const MultiscaleBasis basis = buildBasis(pair, tr, set);
        SolveResult res = solveLod(pair, tr, basis, ctx.coefficient(), ctx.load(), opts.cfg.tol,
                                   opts.cfg.max_iter, p_star, parseMode(opts.cfg.mode));
        u = res.solution.values;
        trace = res.trace;
    } else {
        auto stages = iterateLod(pair, tr, ctx.coefficient(), ctx.load(),
                                 opts.cfg.linearization, k, opts.cfg.tol, opts.cfg.max_iter,
                                 p_star, opts.cfg.stages, opts.cfg.threads);
        u = stages.back().solution;
        trace = stages.back().trace;
    }

    const ErrorReport err = relativeErrors(pair, tr, ctx.reference(), u);
    if (!out.empty())
        writeVectorFile(out, u, opts.cfg.fine_n);
    std::cout << "lod solved: H=1/" << n << " k=" << k
              << " mode=" << opts.cfg.mode << " iterations=" << trace.iterations
              << " converged=" << (trace.converged ? "yes" : "no") << " e_lod=" << err.e_lod
              << " e_h=" << err.e_h << "\n";
    return trace.converged ? 0 : 1;
}

int cmdStudy(const CommonOpts& opts, const std::string& out_table)
{
    ExperimentConfig cfg = opts.cfg;
    StudyResult res = runConvergenceStudy(cfg);
    if (!out_table.empty()) {
        std::filesystem::copy_file(res.table_path, out_table,
                                   std::filesystem::copy_options::overwrite_existing);
        res.table_path = out_table;
    }
    std::cout << "study table: " << res.table_path.string() << "\n";
    for (const StudyRow& r : res.rows)
        std::cout << "  H=" << r.H << " k=" << r.k << " e_lod=" << r.e_lod << " e_h=" << r.e_h
                  << " iters=" << r.iterations << " status=" << r.status << "\n";
    return res.all_ok ? 0 : 1;
}

int cmdIterationStudy(const CommonOpts& opts, const std::string& out_table)
{
    IterationStudyResult res = runIterationStudy(opts.cfg);
    if (!out_table.empty()) {
        std::filesystem::copy_file(res.table_path, out_table,
                                   std::filesystem::copy_options::overwrite_existing);
        res.table_path = out_table;
    }
    std::cout << "iteration table: " << res.table_path.string() << "\n";
    return res.all_ok ? 0 : 1;
}

int cmdPlot(const std::string& table, const PlotSpec& spec, const std::string& out)
{
    emitPlot(table, spec, out);
    std::cout << "plot: " << out << "\n";
    return 0;
}

int cmdCache(const std::string& action, const std::filesystem::path& dir)
{
    if (action == "inspect") {
        const auto entries = inspectCache(dir);
        for (const auto& e : entries)
            std::cout << e.kind << "\t" << e.bytes << "\t" << e.path.string() << "\n";
        std::cout << entries.size() << " entries\n";
        return 0;
    }
    if (action == "clear") {
        std::cout << "removed " << clearCache(dir) << " entries\n";
        return 0;
    }
    std::cerr << "unknown cache action: " << action << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Localized orthogonal decomposition solver for quasilinear "
                 "diffusion problems on the unit square"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_file, out_table, table_file;
    PlotSpec plot_spec;
    std::string cache_action = "inspect";
    std::filesystem::path cache_dir = "cache";

    auto* gen = app.add_subcommand("gen-coefficient", "generate and save a spatial field");
    addConfigFlags(gen, opts);
    gen->add_option("--out", out_file, "output .lodf path")->required();

    auto* ref = app.add_subcommand("solve-reference", "solve the fine reference problem");
    addConfigFlags(ref, opts);
    ref->add_option("--out", out_file, "also write the solution as .lodu");

    auto* corr = app.add_subcommand("correctors", "compute and cache corrector sets");
    addConfigFlags(corr, opts);

    auto* lod = app.add_subcommand("solve-lod", "solve the multiscale problem for one (H,k)");
    addConfigFlags(lod, opts);
    lod->add_option("--out", out_file, "also write the solution as .lodu");

    auto* study = app.add_subcommand("study", "run the (H,k) convergence study");
    addConfigFlags(study, opts);
    study->add_option("--out-table", out_table, "copy the table to this path");

    auto* iter = app.add_subcommand("iteration-study", "error per Kacanov iteration");
    addConfigFlags(iter, opts);
    iter->add_option("--out-table", out_table, "copy the table to this path");

    auto* plot = app.add_subcommand("plot", "render a study table as SVG");
    plot->add_option("--table", table_file, "input CSV table")->required();
    plot->add_option("--out", out_file, "output SVG path")->required();
    plot->add_option("--x", plot_spec.x, "x column (default H)");
    plot->add_option("--y", plot_spec.y, "y column (default e_lod)");
    plot->add_option("--series", plot_spec.series, "series column (default k)");

    auto* cache = app.add_subcommand("cache", "inspect or clear the cache directory");
    cache->add_option("action", cache_action, "inspect|clear");
    cache->add_option("--cache-dir", cache_dir, "cache directory");

    try {
        preloadConfig(opts, argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmdGenCoefficient(opts, out_file);
        if (ref->parsed())
            return cmdSolveReference(opts, out_file);
        if (corr->parsed())
            return cmdCorrectors(opts);
        if (lod->parsed())
            return cmdSolveLod(opts, out_file);
        if (study->parsed())
            return cmdStudy(opts, out_table);
        if (iter->parsed())
            return cmdIterationStudy(opts, out_table);
        if (plot->parsed())
            return cmdPlot(table_file, plot_spec, out_file);
        if (cache->parsed())
            return cmdCache(cache_action, cache_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
