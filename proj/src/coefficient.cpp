#include "lodqn/coefficient.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace lodqn {

namespace {

// Top-53-bit mapping keeps the stream independent of the standard library's
// uniform_real_distribution, which is implementation-defined.
double nextUnit(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool rectanglesOverlap(double ax0, double ax1, double ay0, double ay1, const ChannelSpec& ch)
{
    return ax0 < ch.x1 && ax1 > ch.x0 && ay0 < ch.y1 && ay1 > ch.y0;
}

} // namespace

SpatialField generateSpatialField(const StructuredMesh& fine, std::uint64_t seed, int eps_cells,
                                  double base_lo, double base_hi,
                                  const std::optional<ChannelSpec>& channel)
{
    if (eps_cells < 1 || fine.n() % eps_cells != 0)
        throw std::invalid_argument("generateSpatialField: eps_cells (" +
                                    std::to_string(eps_cells) + ") must divide fine n (" +
                                    std::to_string(fine.n()) + ")");
    if (!(base_lo > 0.0) || !(base_hi >= base_lo))
        throw std::invalid_argument("generateSpatialField: base range must be positive");

    SpatialField f;
    f.n = fine.n();
    f.seed = seed;
    f.eps_cells = eps_cells;
    f.base_lo = base_lo;
    f.base_hi = base_hi;
    f.channel = channel;

    const double eps = 1.0 / eps_cells;
    const double log_lo = std::log(base_lo), log_hi = std::log(base_hi);

    std::mt19937_64 rng(seed);
    Eigen::ArrayXd cell_values(eps_cells * eps_cells);
    for (int cy = 0; cy < eps_cells; ++cy)
        for (int cx = 0; cx < eps_cells; ++cx) {
            double v = std::exp(log_lo + (log_hi - log_lo) * nextUnit(rng));
            if (channel &&
                rectanglesOverlap(cx * eps, (cx + 1) * eps, cy * eps, (cy + 1) * eps, *channel))
                v = channel->value;
            cell_values[cy * eps_cells + cx] = v;
        }

    const int r = fine.n() / eps_cells;
    f.values.resize(fine.elementCount());
    for (int j = 0; j < fine.n(); ++j)
        for (int i = 0; i < fine.n(); ++i)
            f.values[fine.elementIndex(i, j)] = cell_values[(j / r) * eps_cells + (i / r)];
    return f;
}

SpatialField constantField(const StructuredMesh& fine, double value)
{
    if (!(value > 0.0))
        throw std::invalid_argument("constantField: value must be positive");
    SpatialField f;
    f.n = fine.n();
    f.eps_cells = 1;
    f.base_lo = f.base_hi = value;
    f.values = Eigen::ArrayXd::Constant(fine.elementCount(), value);
    return f;
}

namespace {

// exp(700) is near the double overflow limit; clamping the argument keeps the
// evaluation finite for extreme iterates instead of silently producing inf.
constexpr double kExpArgCap = 700.0;

double saturatedExp(double arg)
{
    if (arg > kExpArgCap) arg = kExpArgCap;
    if (arg < -kExpArgCap) arg = -kExpArgCap;
    return std::exp(arg);
}

// Van Genuchten in t = a|s|: k = (1+w)^2/(1+t^2) with w = t/sqrt(1+t^2).
double vgValue(double t)
{
    const double one_t2 = 1.0 + t * t;
    const double w = t / std::sqrt(one_t2);
    const double num = 1.0 + w;
    return num * num / one_t2;
}

// dk/dt = 2(1+w)[(1+t^2)^{-1/2} - t - wt] / (1+t^2)^2
double vgDerivativeT(double t)
{
    const double one_t2 = 1.0 + t * t;
    const double inv_sqrt = 1.0 / std::sqrt(one_t2);
    const double w = t * inv_sqrt;
    return 2.0 * (1.0 + w) * (inv_sqrt - t - w * t) / (one_t2 * one_t2);
}

} // namespace

double NonlinearModel::k(double s) const
{
    if (!std::isfinite(s))
        throw std::invalid_argument("NonlinearModel::k: non-finite argument");
    switch (kind) {
    case ModelKind::exp4: return saturatedExp(4.0 * s);
    case ModelKind::exp2: return saturatedExp(2.0 * s);
    case ModelKind::van_genuchten: return vgValue(param * std::abs(s));
    case ModelKind::quadratic: return 1.0 + s * s;
    }
    throw std::logic_error("NonlinearModel::k: unknown kind");
}

double NonlinearModel::dk(double s) const
{
    if (!std::isfinite(s))
        throw std::invalid_argument("NonlinearModel::dk: non-finite argument");
    switch (kind) {
    case ModelKind::exp4: return 4.0 * saturatedExp(4.0 * s);
    case ModelKind::exp2: return 2.0 * saturatedExp(2.0 * s);
    case ModelKind::van_genuchten: {
        const double sign = (s > 0.0) - (s < 0.0);
        return sign * param * vgDerivativeT(param * std::abs(s));
    }
    case ModelKind::quadratic: return 2.0 * s;
    }
    throw std::logic_error("NonlinearModel::dk: unknown kind");
}

double NonlinearModel::d2k(double s) const
{
    switch (kind) {
    case ModelKind::exp4: return 16.0 * saturatedExp(4.0 * s);
    case ModelKind::exp2: return 4.0 * saturatedExp(2.0 * s);
    case ModelKind::van_genuchten: {
        const double step = 1e-5;
        return (dk(s + step) - dk(s - step)) / (2.0 * step);
    }
    case ModelKind::quadratic: return 2.0;
    }
    throw std::logic_error("NonlinearModel::d2k: unknown kind");
}

std::string NonlinearModel::descriptor() const
{
    switch (kind) {
    case ModelKind::exp4: return "exp4";
    case ModelKind::exp2: return "exp2";
    case ModelKind::van_genuchten: {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "van_genuchten(a=%.17g)", param);
        return buf;
    }
    case ModelKind::quadratic: return "quadratic";
    }
    return "unknown";
}

std::array<double, 3> NonlinearModel::sampleBounds(double s_min, double s_max, int samples) const
{
    std::array<double, 3> b = {std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (int i = 0; i < samples; ++i) {
        const double s = s_min + (s_max - s_min) * i / (samples - 1);
        const double v = k(s);
        b[0] = std::min(b[0], v);
        b[1] = std::max(b[1], v);
        b[2] = std::max(b[2], std::abs(dk(s)));
    }
    return b;
}

NonlinearModel makeModel(ModelKind kind, double param)
{
    return NonlinearModel{kind, param};
}

int CombinedCoefficient::fineN() const
{
    return terms.empty() ? 0 : terms.front().c.n;
}

double CombinedCoefficient::alphaAt(int element, double s) const
{
    double a = 0.0;
    for (const Term& t : terms)
        a += t.c.values[element] * t.model.k(s);
    return a;
}

double CombinedCoefficient::alphaSAt(int element, double s) const
{
    double a = 0.0;
    for (const Term& t : terms)
        a += t.c.values[element] * t.model.dk(s);
    return a;
}

double CombinedCoefficient::alphaSSAt(int element, double s) const
{
    double a = 0.0;
    for (const Term& t : terms)
        a += t.c.values[element] * t.model.d2k(s);
    return a;
}

std::string CombinedCoefficient::descriptor() const
{
    std::string d;
    for (const Term& t : terms) {
        if (!d.empty()) d += "+";
        d += t.model.descriptor();
    }
    return d;
}

CombinedCoefficient singleTerm(SpatialField c, NonlinearModel model)
{
    CombinedCoefficient coeff;
    coeff.terms.push_back({std::move(c), model});
    return coeff;
}

Eigen::ArrayXd elementMidpointValues(const StructuredMesh& mesh, const Eigen::VectorXd& v)
{
    Eigen::ArrayXd mid(mesh.elementCount());
    for (int e = 0; e < mesh.elementCount(); ++e) {
        const auto nd = mesh.elementNodes(e);
        mid[e] = 0.25 * (v[nd[0]] + v[nd[1]] + v[nd[2]] + v[nd[3]]);
    }
    return mid;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> elementMidpointGradients(const StructuredMesh& mesh,
                                                                  const Eigen::VectorXd& v)
{
    Eigen::Matrix<double, Eigen::Dynamic, 2> grad(mesh.elementCount(), 2);
    const double inv2h = 1.0 / (2.0 * mesh.h());
    for (int e = 0; e < mesh.elementCount(); ++e) {
        const auto nd = mesh.elementNodes(e);  // SW, SE, NW, NE
        grad(e, 0) = (v[nd[1]] - v[nd[0]] + v[nd[3]] - v[nd[2]]) * inv2h;
        grad(e, 1) = (v[nd[2]] - v[nd[0]] + v[nd[3]] - v[nd[1]]) * inv2h;
    }
    return grad;
}

Eigen::ArrayXd elementwiseAlpha(const CombinedCoefficient& coeff, const StructuredMesh& fine,
                                const Eigen::VectorXd& v)
{
    if (coeff.fineN() != fine.n())
        throw std::invalid_argument("elementwiseAlpha: coefficient and mesh sizes differ");
    if (v.size() != fine.nodeCount())
        throw std::invalid_argument("elementwiseAlpha: v has wrong length");
    const Eigen::ArrayXd mid = elementMidpointValues(fine, v);
    Eigen::ArrayXd alpha(fine.elementCount());
    for (int e = 0; e < fine.elementCount(); ++e)
        alpha[e] = coeff.alphaAt(e, mid[e]);
    return alpha;
}

} // namespace lodqn
