#pragma once

#include "lodqn/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lodqn {

/// Axis-aligned rectangle, used for the high-contrast channel of c(x).
struct ChannelSpec {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
    double value = 1.0;
};

/// Piecewise-constant multiscale coefficient c(x) on the fine mesh.
///
/// Values live on fine elements but are constant on an eps-grid of
/// eps_cells x eps_cells cells, each drawn log-uniformly from base_range and
/// optionally overwritten inside a channel rectangle. The full generator
/// descriptor is kept so a field can be regenerated (and fingerprinted)
/// exactly.
struct SpatialField {
    int n = 0;                 // fine elements per side
    Eigen::ArrayXd values;     // n*n entries, element order

    std::uint64_t seed = 0;
    int eps_cells = 0;
    double base_lo = 1.0, base_hi = 1.0;
    std::optional<ChannelSpec> channel;

    double minValue() const { return values.minCoeff(); }
    double maxValue() const { return values.maxCoeff(); }
    double contrast() const { return maxValue() / minValue(); }
};

/// Deterministic for fixed arguments: the eps-cells are visited in
/// lexicographic order (x fastest) and each consumes exactly one draw from a
/// mt19937_64 stream mapped to [0,1) via the top 53 bits, so the produced
/// array is bit-identical across platforms.
SpatialField generateSpatialField(const StructuredMesh& fine, std::uint64_t seed, int eps_cells,
                                  double base_lo, double base_hi,
                                  const std::optional<ChannelSpec>& channel);

/// Constant field c(x) = value.
SpatialField constantField(const StructuredMesh& fine, double value);

enum class ModelKind { exp4, exp2, van_genuchten, quadratic };

/// Scalar nonlinearity k(s) with analytic first derivative.
///
/// exp4:          k(s) = exp(4s)
/// exp2:          k(s) = exp(2s)
/// van_genuchten: k(s) = (1 + a|s|(1+(a|s|)^2)^{-1/2})^2 / (1+(a|s|)^2)
/// quadratic:     k(s) = 1 + s^2
///
/// The exponential evaluations saturate: arguments are clamped so the result
/// stays finite (never NaN/inf) for extreme s. At s=0 the Van Genuchten
/// derivative uses sign(0)=0.
struct NonlinearModel {
    ModelKind kind = ModelKind::exp2;
    double param = 0.0;  // Van Genuchten a

    double k(double s) const;
    double dk(double s) const;
    /// Second derivative; analytic for exp/quadratic, centered difference of
    /// the analytic dk for van_genuchten (surrogate use only).
    double d2k(double s) const;

    std::string descriptor() const;

    /// Sampled ellipticity data over [s_min, s_max]: {min k, max k, max |dk|}.
    /// These are the testable stand-ins for (lambda, Lambda_1, Lambda_0); for
    /// the exponential models they are only sample-local.
    std::array<double, 3> sampleBounds(double s_min, double s_max, int samples) const;
};

NonlinearModel makeModel(ModelKind kind, double param = 0.0);

/// alpha(x,s) = sum_i c_i(x) k_i(s), all fields on the same fine mesh.
struct CombinedCoefficient {
    struct Term {
        SpatialField c;
        NonlinearModel model;
    };
    std::vector<Term> terms;

    int fineN() const;
    double alphaAt(int element, double s) const;
    double alphaSAt(int element, double s) const;
    double alphaSSAt(int element, double s) const;
    std::string descriptor() const;
};

CombinedCoefficient singleTerm(SpatialField c, NonlinearModel model);

/// Per-element alpha(x, v(x)): c at the element's constant value, k at the
/// element-midpoint value of v (mean of the four corner coefficients).
Eigen::ArrayXd elementwiseAlpha(const CombinedCoefficient& coeff, const StructuredMesh& fine,
                                const Eigen::VectorXd& v);

/// Element-midpoint values of a Q1 function (mean of corner values).
Eigen::ArrayXd elementMidpointValues(const StructuredMesh& mesh, const Eigen::VectorXd& v);

/// Element-midpoint gradients of a Q1 function.
Eigen::Matrix<double, Eigen::Dynamic, 2> elementMidpointGradients(const StructuredMesh& mesh,
                                                                  const Eigen::VectorXd& v);

} // namespace lodqn
