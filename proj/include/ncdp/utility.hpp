#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ncdp {

/// Scalar attached to terminal nodes, with a constant fallback for ids
/// without an explicit entry.
struct NodeScalar {
    double constant = 0.0;
    std::map<std::string, double> per_node;

    NodeScalar() = default;
    NodeScalar(double value) : constant(value) {} // NOLINT(google-explicit-constructor)

    double at(const std::string& id) const {
        auto it = per_node.find(id);
        return it == per_node.end() ? constant : it->second;
    }
    double max_value() const {
        double m = constant;
        for (const auto& [id, v] : per_node) m = std::max(m, v);
        return m;
    }
    bool all_nonneg() const {
        if (constant < 0.0) return false;
        for (const auto& [id, v] : per_node)
            if (v < 0.0) return false;
        return true;
    }
};

/// Piecewise polynomial on [knots[0], +inf), coefficients in local
/// coordinates (x - knot[j]); the last piece extends past the last knot.
struct PiecewisePolynomial {
    std::vector<double> knots;
    std::vector<std::vector<double>> coeffs;

    double eval(double x) const;
    double derivative(double x) const;
};

/// Bounded, non-concave terminal payoff with unit slope recurring on every
/// integer-centered middle segment:
///   f(n) = 1/2 - 1/(n+1),  a_n = 1/(4(n+1)(n+2)),
///   f(n+1/2-a_n) = f(n)+a_n,  f(n+1/2+a_n) = f(n+1)-a_n,
/// linear between the listed points. Returns the value and the one-sided
/// slope of the containing open segment (nullopt exactly at a kink).
std::pair<double, std::optional<double>> kramkov_f(double x);

enum class UtilityFamily { power, two_piece_power, ramp, kramkov_f, piecewise_polynomial };

std::string family_name(UtilityFamily family);

/// Non-decreasing continuous terminal utility, possibly shifted by a
/// nonnegative reference point B per terminal node: u(x, node) = core(x - B).
/// Core families not defined below their natural domain are extended by
/// their left-endpoint value, which keeps u continuous and non-decreasing.
class UtilityModel {
public:
    static UtilityModel power(double exponent, double scale = 1.0);
    static UtilityModel two_piece_power(double gain_exponent, double loss_exponent,
                                        double gain_scale, double loss_scale);
    static UtilityModel ramp(double low, double high, double height = 1.0);
    static UtilityModel kramkov();
    static UtilityModel piecewise_polynomial(PiecewisePolynomial pieces);

    UtilityModel with_reference(NodeScalar reference) const;

    UtilityFamily family() const { return family_; }
    double reference(const std::string& node) const { return reference_.at(node); }
    double max_reference() const { return reference_.max_value(); }

    /// u(x, node); x must be nonnegative.
    double eval(double x, const std::string& node = {}) const;
    double eval_plus(double x, const std::string& node = {}) const {
        return std::max(eval(x, node), 0.0);
    }

    /// Kink locations of x -> u(x, node) inside [lo, hi], ascending.
    std::vector<double> breakpoints(double lo, double hi, const std::string& node = {}) const;

    /// Grid check of monotonicity (and, for shifted cores, of the extension):
    /// throws when a downward step above 1e-9 shows up.
    void check_shape(double hi, const std::vector<std::string>& nodes = {{}}) const;

private:
    UtilityModel() = default;
    double core(double y) const;
    double core_floor() const; // left end of the core's natural domain

    UtilityFamily family_ = UtilityFamily::power;
    double p0_ = 0.0, p1_ = 0.0, p2_ = 0.0, p3_ = 0.0;
    PiecewisePolynomial pieces_;
    NodeScalar reference_{0.0};
};

/// (gamma_bar, x_bar, c) such that u(lambda x) <= lambda^gamma_bar u(x) +
/// lambda^gamma_bar c for lambda >= 1, x >= x_bar; C_lifted extends the bound
/// to all x >= 0 through C = u+(x_bar) + c.
struct GrowthCertificate {
    double gamma_bar = 1.0;
    double x_bar = 0.0;
    NodeScalar c{0.0};
    std::optional<NodeScalar> C_lifted;
};

struct GrowthCounterexample {
    double lambda = 0.0;
    double x = 0.0;
    std::string node;
    double lhs = 0.0;
    double rhs = 0.0;
};

class GrowthFalsifiedError : public std::runtime_error {
public:
    GrowthFalsifiedError(GrowthCounterexample cex, const std::string& what)
        : std::runtime_error(what), counterexample(std::move(cex)) {}
    GrowthCounterexample counterexample;
};

std::vector<double> default_lambda_grid();
std::vector<double> default_x_grid(const GrowthCertificate& cert);

/// Scans the grids for a violation of the growth inequality (slack 1e-9).
/// A falsifier, not a prover: the inequality quantifies over a continuum.
std::optional<GrowthCounterexample> falsify_growth(const UtilityModel& model,
                                                   const GrowthCertificate& cert,
                                                   const std::vector<double>& lambda_grid,
                                                   const std::vector<double>& x_grid,
                                                   const std::vector<std::string>& nodes = {{}});

/// Populates C_lifted(node) = u+(x_bar, node) + c(node) after re-running the
/// falsifier on the default grids, then spot-checks the lifted inequality on
/// grids that include points below x_bar. Throws GrowthFalsifiedError.
GrowthCertificate lift_growth(const UtilityModel& model, const GrowthCertificate& cert,
                              const std::vector<std::string>& nodes = {{}});

/// Central finite-difference estimate of x u'(x) / u(x, node). Diagnostic.
double empirical_elasticity(const UtilityModel& model, const std::string& node, double x,
                            double h);

/// Growth certificate for a reference-shifted utility u(x) = core(x - B),
/// given a certificate (gamma_bar, x_tilde, C) of the core, a Lipschitz bound
/// K valid from x_hat on, and B_max = the largest reference value:
///   x_bar = max(x_tilde, x_hat) + B_max,  c = K B_max + C.
GrowthCertificate refpoint_certificate(double gamma_bar, double x_tilde, double C, double K,
                                       double x_hat, double B_max);

/// Parsed utility document:
///   {"family": "...", "params": {...},
///    "reference": {"type": "constant"|"per_node", "value": ...},
///    "growth": {"gamma_bar": g, "x_bar": x, "c": number|{id: number}}}
struct UtilitySpec {
    UtilityModel model = UtilityModel::power(1.0);
    std::optional<GrowthCertificate> growth;
};

UtilitySpec parse_utility(const std::string& text);

} // namespace ncdp
