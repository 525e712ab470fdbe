#include "lodqn/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lodqn {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v)
{
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void putString(std::vector<std::uint8_t>& buf, const std::string& s)
{
    buf.insert(buf.end(), s.begin(), s.end());
    buf.push_back(0);
}

void putDouble(std::vector<std::uint8_t>& buf, double v)
{
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf.insert(buf.end(), p, p + 8);
}

} // namespace

PiecewiseRhs makeRhs(const std::string& id)
{
    PiecewiseRhs f;
    if (id == "default") {
        f.regions.push_back({0.0, 1.0, 0.0, 0.1, 0.1});
        f.fallback = 1.0;
    } else if (id == "exp1") {
        f.regions.push_back({0.0, 1.0, 0.0, 0.25, 100.0});
        f.fallback = 2.0;
    } else {
        throw std::invalid_argument("unknown rhs id: " + id);
    }
    return f;
}

LodMode parseMode(const std::string& mode)
{
    if (mode == "galerkin")
        return LodMode::galerkin;
    if (mode == "petrov_galerkin" || mode == "pg")
        return LodMode::petrov_galerkin;
    throw std::invalid_argument("unknown mode: " + mode);
}

Linearization parseLinearization(const std::string& name)
{
    if (name == "kacanov")
        return Linearization::kacanov;
    if (name == "frechet")
        return Linearization::frechet;
    throw std::invalid_argument("unknown linearization: " + name);
}

double gFunction(double x, double y)
{
    return 10.0 * x * y * y * (1.0 - x) * (1.0 - y);
}

double g1Function(double x, double y)
{
    return 0.5 * x * y * y * (1.0 - x) * (1.0 - y) * std::exp(5.0 * (x + y));
}

Eigen::VectorXd nodalInterpolant(const StructuredMesh& mesh, double (*f)(double, double))
{
    Eigen::VectorXd v(mesh.nodeCount());
    for (int node = 0; node < mesh.nodeCount(); ++node) {
        const auto [i, j] = mesh.nodeCoords(node);
        v[node] = f(i * mesh.h(), j * mesh.h());
    }
    return v;
}

CombinedCoefficient sampleOnMesh(const CombinedCoefficient& coeff, const StructuredMesh& fine,
                                 const StructuredMesh& target)
{
    CombinedCoefficient out;
    for (const auto& term : coeff.terms) {
        SpatialField sampled;
        sampled.n = target.n();
        sampled.eps_cells = 1;
        sampled.values.resize(target.elementCount());
        for (int e = 0; e < target.elementCount(); ++e) {
            const auto [cx, cy] = target.elementCenter(e);
            const int fi = std::min(fine.n() - 1, static_cast<int>(cx * fine.n()));
            const int fj = std::min(fine.n() - 1, static_cast<int>(cy * fine.n()));
            sampled.values[e] = term.c.values[fine.elementIndex(fi, fj)];
        }
        sampled.base_lo = sampled.minValue();
        sampled.base_hi = sampled.maxValue();
        out.terms.push_back({std::move(sampled), term.model});
    }
    return out;
}

CombinedCoefficient buildCoefficient(const ExperimentConfig& cfg, const StructuredMesh& fine)
{
    const std::optional<ChannelSpec> channel =
        cfg.use_channel ? std::optional<ChannelSpec>(cfg.channel) : std::nullopt;
    const auto defaultField = [&] {
        return generateSpatialField(fine, cfg.seed, cfg.eps_cells, cfg.base_lo, cfg.base_hi,
                                    channel);
    };
    // The low-contrast companion field of the combined models: same layout,
    // milder range and channel.
    const auto mildField = [&] {
        std::optional<ChannelSpec> mild = channel;
        if (mild)
            mild->value = 5.0;
        return generateSpatialField(fine, cfg.seed + 1, cfg.eps_cells, 0.5, 1.0, mild);
    };

    if (cfg.model == "exp2")
        return singleTerm(defaultField(), makeModel(ModelKind::exp2));
    if (cfg.model == "exp4")
        return singleTerm(defaultField(), makeModel(ModelKind::exp4));
    if (cfg.model == "vg" || cfg.model == "van_genuchten")
        return singleTerm(defaultField(), makeModel(ModelKind::van_genuchten, cfg.vg_a));
    if (cfg.model == "quadratic")
        return singleTerm(defaultField(), makeModel(ModelKind::quadratic));
    if (cfg.model == "combined_vg") {
        CombinedCoefficient coeff;
        coeff.terms.push_back({mildField(), makeModel(ModelKind::van_genuchten, 5.0)});
        coeff.terms.push_back({defaultField(), makeModel(ModelKind::van_genuchten, cfg.vg_a)});
        return coeff;
    }
    if (cfg.model == "combined_exp_vg") {
        CombinedCoefficient coeff;
        coeff.terms.push_back({mildField(), makeModel(ModelKind::van_genuchten, 5.0)});
        coeff.terms.push_back({defaultField(), makeModel(ModelKind::exp2)});
        return coeff;
    }
    throw std::invalid_argument("unknown model: " + cfg.model);
}

void applyConfigJson(ExperimentConfig& cfg, const std::string& json_text)
{
    const nlohmann::json j = nlohmann::json::parse(json_text);
    if (j.contains("model")) cfg.model = j["model"].get<std::string>();
    if (j.contains("vg_a")) cfg.vg_a = j["vg_a"].get<double>();
    if (j.contains("rhs")) cfg.rhs = j["rhs"].get<std::string>();
    if (j.contains("fine_n")) cfg.fine_n = j["fine_n"].get<int>();
    if (j.contains("coarse")) cfg.coarse = j["coarse"].get<std::vector<int>>();
    if (j.contains("k")) cfg.k_list = j["k"].get<std::vector<int>>();
    if (j.contains("linearization"))
        cfg.linearization = parseLinearization(j["linearization"].get<std::string>());
    if (j.contains("p_star")) cfg.p_star = j["p_star"].get<std::string>();
    if (j.contains("mode")) cfg.mode = j["mode"].get<std::string>();
    if (j.contains("tol")) cfg.tol = j["tol"].get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j["max_iter"].get<int>();
    if (j.contains("stages")) cfg.stages = j["stages"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("eps_cells")) cfg.eps_cells = j["eps_cells"].get<int>();
    if (j.contains("base_range")) {
        cfg.base_lo = j["base_range"][0].get<double>();
        cfg.base_hi = j["base_range"][1].get<double>();
    }
    if (j.contains("channel")) {
        if (j["channel"].is_null()) {
            cfg.use_channel = false;
        } else {
            cfg.use_channel = true;
            cfg.channel.x0 = j["channel"]["x0"].get<double>();
            cfg.channel.x1 = j["channel"]["x1"].get<double>();
            cfg.channel.y0 = j["channel"]["y0"].get<double>();
            cfg.channel.y1 = j["channel"]["y1"].get<double>();
            cfg.channel.value = j["channel"]["value"].get<double>();
        }
    }
    if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    if (j.contains("timing")) cfg.timing = j["timing"].get<bool>();
}

ExperimentConfig loadConfigFile(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig cfg;
    applyConfigJson(cfg, ss.str());
    return cfg;
}

ExperimentContext::ExperimentContext(ExperimentConfig cfg)
    : cfg_(std::move(cfg))
    , fine_(cfg_.fine_n)
    , coeff_(buildCoefficient(cfg_, fine_))
    , rhs_(makeRhs(cfg_.rhs))
    , load_(assembleLoad(fine_, rhs_))
{
    for (int n : cfg_.coarse)
        if (n < 1 || cfg_.fine_n % n != 0)
            throw std::invalid_argument("coarse n " + std::to_string(n) +
                                        " does not divide fine n");
}

const MeshPair& ExperimentContext::pairFor(int coarse_n)
{
    auto it = pairs_.find(coarse_n);
    if (it == pairs_.end())
        it = pairs_.emplace(coarse_n, MeshPair(coarse_n, cfg_.fine_n)).first;
    return it->second;
}

const TransferOperators& ExperimentContext::transferFor(int coarse_n)
{
    auto it = transfers_.find(coarse_n);
    if (it == transfers_.end())
        it = transfers_.emplace(coarse_n, buildTransfer(pairFor(coarse_n))).first;
    return it->second;
}

std::filesystem::path ExperimentContext::referenceCachePath() const
{
    std::vector<std::uint8_t> key;
    putString(key, "reference-v1");
    putString(key, coeff_.descriptor());
    for (const auto& term : coeff_.terms) {
        const auto bytes = serializeField(term.c);
        key.insert(key.end(), bytes.begin(), bytes.end());
    }
    putString(key, cfg_.rhs);
    putDouble(key, cfg_.tol);
    putDouble(key, static_cast<double>(cfg_.max_iter));
    putDouble(key, static_cast<double>(cfg_.fine_n));
    return cfg_.cache_dir / ("ref_" + toHex(sha256(key), 8) + ".lodu");
}

const Eigen::VectorXd& ExperimentContext::reference()
{
    if (have_reference_)
        return reference_;
    const std::filesystem::path path = referenceCachePath();
    if (std::filesystem::exists(path)) {
        try {
            int n = 0;
            Eigen::VectorXd v = readVectorFile(path, n);
            if (n == cfg_.fine_n) {
                reference_ = std::move(v);
                reference_trace_ = SolveTrace{};
                reference_trace_.converged = true;
                have_reference_ = true;
                return reference_;
            }
        } catch (const FormatError& e) {
            std::cerr << "warning: ignoring corrupt reference cache " << path << ": " << e.what()
                      << "\n";
        }
    }
    SolveResult res = solveReference(fine_, coeff_, load_, cfg_.tol, cfg_.max_iter,
                                     Eigen::VectorXd::Zero(fine_.nodeCount()));
    reference_ = res.solution.values;
    reference_trace_ = res.trace;
    have_reference_ = true;
    writeVectorFile(path, reference_, cfg_.fine_n);
    return reference_;
}

const SolveTrace& ExperimentContext::referenceTrace()
{
    reference();
    return reference_trace_;
}

Eigen::VectorXd ExperimentContext::realizePStar(const std::string& spec)
{
    if (spec == "zero")
        return Eigen::VectorXd::Zero(fine_.nodeCount());
    if (spec == "g")
        return nodalInterpolant(fine_, gFunction);
    if (spec == "g1")
        return nodalInterpolant(fine_, g1Function);
    if (spec == "reference")
        return reference();
    if (spec.rfind("coarse_fem:", 0) == 0) {
        const int n = std::stoi(spec.substr(11));
        if (n < 1 || cfg_.fine_n % n != 0)
            throw std::invalid_argument("coarse_fem mesh size must divide fine n: " + spec);
        const StructuredMesh& coarse = pairFor(n).coarse;
        const CombinedCoefficient sampled = sampleOnMesh(coeff_, fine_, coarse);
        const NodalVector coarse_load = assembleLoad(coarse, rhs_, MeshTag::coarse);
        SolveResult res = solveReference(coarse, sampled, coarse_load, cfg_.tol, cfg_.max_iter,
                                         Eigen::VectorXd::Zero(coarse.nodeCount()));
        return prolong(transferFor(n), res.solution.values);
    }
    if (spec.rfind("ulod:", 0) == 0) {
        // ulod:<coarse_n>:<k>:<inner p_star spec>
        const std::string rest = spec.substr(5);
        const auto c1 = rest.find(':');
        const auto c2 = rest.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("ulod spec must be ulod:<n>:<k>:<p_star>: " + spec);
        const int n = std::stoi(rest.substr(0, c1));
        const int k = std::stoi(rest.substr(c1 + 1, c2 - c1 - 1));
        const std::string inner = rest.substr(c2 + 1);
        const Eigen::VectorXd p_inner = realizePStar(inner);
        const MeshPair& pair = pairFor(n);
        const TransferOperators& tr = transferFor(n);
        const CorrectorSet set = correctorsFor(n, k, cfg_.linearization, p_inner);
        const MultiscaleBasis basis = buildBasis(pair, tr, set);
        SolveResult res = solveLod(pair, tr, basis, coeff_, load_, cfg_.tol, cfg_.max_iter,
                                   p_inner, parseMode(cfg_.mode));
        return res.solution.values;
    }
    throw std::invalid_argument("unknown p_star spec: " + spec);
}

CorrectorSet ExperimentContext::correctorsFor(int coarse_n, int k, Linearization kind,
                                              const Eigen::VectorXd& p_star)
{
    const MeshPair& pair = pairFor(coarse_n);
    const TransferOperators& tr = transferFor(coarse_n);
    const Fingerprint fp = correctorFingerprint(p_star, coeff_);

    std::vector<std::uint8_t> key(fp.begin(), fp.end());
    putString(key, "correctors-v1");
    putDouble(key, static_cast<double>(coarse_n));
    putDouble(key, static_cast<double>(cfg_.fine_n));
    putDouble(key, static_cast<double>(k));
    key.push_back(static_cast<std::uint8_t>(kind));
    const std::filesystem::path path =
        cfg_.cache_dir / ("corr_" + toHex(sha256(key), 8) + ".lodc");

    if (std::filesystem::exists(path)) {
        auto cached = readCorrectorFile(path, pair, k, kind, fp);
        if (cached)
            return std::move(*cached);
        std::cerr << "warning: corrector cache mismatch for " << path << ", recomputing\n";
    }
    const LinearizationData lin = buildLinearization(coeff_, kind, p_star, fine_);
    CorrectorSet set = assembleCorrectorSet(pair, tr, k, lin, cfg_.threads);
    set.fingerprint = fp;
    writeCorrectorFile(path, set, pair);
    return set;
}

namespace {

std::string sanitize(std::string s)
{
    for (char& c : s)
        if (c == ':' || c == '/' || c == '\\')
            c = '-';
    return s;
}

} // namespace

void writeStudyTable(const std::filesystem::path& path, const std::vector<StudyRow>& rows,
                     bool timing)
{
    std::ostringstream out;
    out << "model,linearization,p_star,H,k,iterations,e_lod,e_h,wall_ms,status\n";
    for (const StudyRow& r : rows) {
        out << r.model << ',' << r.linearization << ',' << sanitize(r.p_star) << ',' << fmt(r.H)
            << ',' << r.k << ',' << r.iterations << ',' << fmt(r.e_lod) << ',' << fmt(r.e_h)
            << ',' << (timing ? static_cast<long long>(std::llround(r.wall_ms)) : 0LL) << ','
            << r.status << '\n';
    }
    const std::string text = out.str();
    atomicWrite(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void writeIterationTable(const std::filesystem::path& path, const std::vector<IterationRow>& rows)
{
    std::ostringstream out;
    out << "model,linearization,p_star,H,k,iteration,e_lod,status\n";
    for (const IterationRow& r : rows) {
        out << r.model << ',' << r.linearization << ',' << sanitize(r.p_star) << ',' << fmt(r.H)
            << ',' << r.k << ',' << r.iteration << ',' << fmt(r.e_lod) << ',' << r.status << '\n';
    }
    const std::string text = out.str();
    atomicWrite(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

StudyResult runConvergenceStudy(const ExperimentConfig& cfg)
{
    ExperimentContext ctx(cfg);
    StudyResult result;

    std::vector<int> coarse = cfg.coarse;
    std::sort(coarse.begin(), coarse.end(), std::greater<int>());  // H ascending
    std::vector<int> ks = cfg.k_list;
    std::sort(ks.begin(), ks.end());

    const std::string lin_name = linearizationName(cfg.linearization);
    bool p_star_ok = true;
    Eigen::VectorXd p_star;
    std::string p_star_error;
    try {
        p_star = ctx.realizePStar(cfg.p_star);
    } catch (const std::exception& e) {
        p_star_ok = false;
        p_star_error = e.what();
        std::cerr << "error: p_star realization failed: " << e.what() << "\n";
    }

    const Eigen::VectorXd* ref = nullptr;
    if (p_star_ok)
        ref = &ctx.reference();

    for (int n : coarse) {
        for (int k : ks) {
            StudyRow row;
            row.model = cfg.model;
            row.linearization = lin_name;
            row.p_star = cfg.p_star;
            row.H = 1.0 / n;
            row.k = k;
            if (!p_star_ok) {
                row.status = "failed";
                result.rows.push_back(row);
                continue;
            }
            const auto t0 = Clock::now();
            try {
                const MeshPair& pair = ctx.pairFor(n);
                const TransferOperators& tr = ctx.transferFor(n);
                if (cfg.linearization == Linearization::frechet) {
                    const LinearizationData lin =
                        buildLinearization(ctx.coefficient(), cfg.linearization, p_star,
                                           ctx.fineMesh());
                    const double smallness = frechetCoercivityPrecheck(lin, row.H);
                    if (smallness >= 1.0)
                        std::cerr << "warning: H*sup|beta| = " << smallness << " >= 1 at H=1/"
                                  << n << "; Frechet correctors may be ill-posed\n";
                }
                const CorrectorSet set = ctx.correctorsFor(n, k, cfg.linearization, p_star);
                const MultiscaleBasis basis = buildBasis(pair, tr, set);
                SolveResult solve = solveLod(pair, tr, basis, ctx.coefficient(), ctx.load(),
                                             cfg.tol, cfg.max_iter, p_star,
                                             parseMode(cfg.mode));
                const ErrorReport err = relativeErrors(pair, tr, *ref, solve.solution.values);
                row.iterations = solve.trace.iterations;
                row.e_lod = err.e_lod;
                row.e_h = err.e_h;
                row.trace = solve.trace;
                const bool finite = std::isfinite(err.e_lod) && std::isfinite(err.e_h);
                row.status = (solve.trace.converged && finite) ? "ok" : "failed";
            } catch (const std::exception& e) {
                std::cerr << "row H=1/" << n << " k=" << k << " failed: " << e.what() << "\n";
                row.status = "failed";
            }
            row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
            result.rows.push_back(row);
        }
    }

    for (const StudyRow& r : result.rows)
        if (r.status != "ok")
            result.all_ok = false;

    std::filesystem::create_directories(cfg.output_dir);
    result.table_path =
        cfg.output_dir / ("study_" + cfg.model + "_" + lin_name + "_" + sanitize(cfg.p_star) +
                          "_" + cfg.mode + ".csv");
    writeStudyTable(result.table_path, result.rows, cfg.timing);
    return result;
}

IterationStudyResult runIterationStudy(const ExperimentConfig& cfg)
{
    ExperimentContext ctx(cfg);
    IterationStudyResult result;

    std::vector<int> coarse = cfg.coarse;
    std::sort(coarse.begin(), coarse.end(), std::greater<int>());
    const int k = cfg.k_list.front();
    const std::string lin_name = linearizationName(cfg.linearization);

    const Eigen::VectorXd p_star = ctx.realizePStar(cfg.p_star);
    const Eigen::VectorXd& ref = ctx.reference();

    for (int n : coarse) {
        std::vector<IterationRow> rows_for_h;
        std::string status = "ok";
        try {
            const MeshPair& pair = ctx.pairFor(n);
            const TransferOperators& tr = ctx.transferFor(n);
            const CorrectorSet set = ctx.correctorsFor(n, k, cfg.linearization, p_star);
            const MultiscaleBasis basis = buildBasis(pair, tr, set);
            SolveResult solve = solveLod(pair, tr, basis, ctx.coefficient(), ctx.load(), cfg.tol,
                                         cfg.max_iter, p_star, parseMode(cfg.mode), &ref);
            for (std::size_t it = 0; it < solve.trace.errors.size(); ++it) {
                IterationRow row;
                row.model = cfg.model;
                row.linearization = lin_name;
                row.p_star = cfg.p_star;
                row.H = 1.0 / n;
                row.k = k;
                row.iteration = static_cast<int>(it);
                row.e_lod = solve.trace.errors[it];
                rows_for_h.push_back(row);
            }
            if (!solve.trace.converged)
                status = "failed";
        } catch (const std::exception& e) {
            std::cerr << "iteration study H=1/" << n << " failed: " << e.what() << "\n";
            status = "failed";
            IterationRow row;
            row.model = cfg.model;
            row.linearization = lin_name;
            row.p_star = cfg.p_star;
            row.H = 1.0 / n;
            row.k = k;
            rows_for_h.push_back(row);
        }
        for (auto& r : rows_for_h) {
            r.status = status;
            if (status != "ok")
                result.all_ok = false;
            result.rows.push_back(r);
        }
    }

    std::filesystem::create_directories(cfg.output_dir);
    result.table_path = cfg.output_dir / ("iterations_" + cfg.model + "_" + lin_name + "_" +
                                          sanitize(cfg.p_star) + ".csv");
    writeIterationTable(result.table_path, result.rows);
    return result;
}

std::vector<CacheEntry> inspectCache(const std::filesystem::path& cache_dir)
{
    std::vector<CacheEntry> entries;
    if (!std::filesystem::exists(cache_dir))
        return entries;
    for (const auto& de : std::filesystem::directory_iterator(cache_dir)) {
        if (!de.is_regular_file())
            continue;
        CacheEntry e;
        e.path = de.path();
        e.bytes = de.file_size();
        const auto ext = de.path().extension();
        if (ext == ".lodf")
            e.kind = "field";
        else if (ext == ".lodu")
            e.kind = "vector";
        else if (ext == ".lodc")
            e.kind = "correctors";
        else
            e.kind = "other";
        entries.push_back(e);
    }
    std::sort(entries.begin(), entries.end(),
              [](const CacheEntry& a, const CacheEntry& b) { return a.path < b.path; });
    return entries;
}

std::size_t clearCache(const std::filesystem::path& cache_dir)
{
    std::size_t removed = 0;
    for (const CacheEntry& e : inspectCache(cache_dir)) {
        if (e.kind != "other") {
            std::filesystem::remove(e.path);
            ++removed;
        }
    }
    return removed;
}

} // namespace lodqn
