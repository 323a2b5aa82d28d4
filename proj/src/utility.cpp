#include "ncdp/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace ncdp {

namespace {

double poly_eval(const std::vector<double>& c, double y) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * y + *it;
    return v;
}

double poly_derivative(const std::vector<double>& c, double y) {
    double v = 0.0;
    for (int i = static_cast<int>(c.size()) - 1; i >= 1; --i) v = v * y + i * c[i];
    return v;
}

} // namespace

double PiecewisePolynomial::eval(double x) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    const int piece = std::max<int>(0, static_cast<int>(it - knots.begin()) - 1);
    return poly_eval(coeffs[piece], x - knots[piece]);
}

double PiecewisePolynomial::derivative(double x) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    const int piece = std::max<int>(0, static_cast<int>(it - knots.begin()) - 1);
    return poly_derivative(coeffs[piece], x - knots[piece]);
}

std::pair<double, std::optional<double>> kramkov_f(double x) {
    if (x < 0.0) throw std::invalid_argument("kramkov_f: x must be nonnegative");
    const double n = std::floor(x);
    // integer knot values (n-1)/(2(n+1)): one correctly rounded division
    const double fn = (n - 1.0) / (2.0 * (n + 1.0));
    if (x == n) return {fn, std::nullopt};
    const double fn1 = n / (2.0 * (n + 2.0));
    const double a = 0.25 / ((n + 1.0) * (n + 2.0));
    const double t1 = n + 0.5 - a;
    const double t2 = n + 0.5 + a;
    if (!(t1 > n && t2 < n + 1.0 && t2 > t1)) {
        // a underflows against the knot spacing at astronomic x
        const double slope = fn1 - fn;
        return {fn + (x - n) * slope, slope};
    }
    const double v1 = fn + a;
    const double v2 = fn1 - a;
    if (x < t1) {
        const double slope = (v1 - fn) / (t1 - n);
        return {fn + (x - n) * slope, slope};
    }
    if (x == t1) return {v1, std::nullopt};
    if (x < t2) return {v1 + (x - t1), 1.0}; // middle segment has slope one
    if (x == t2) return {v2, std::nullopt};
    const double slope = (fn1 - v2) / (n + 1.0 - t2);
    return {v2 + (x - t2) * slope, slope};
}

std::string family_name(UtilityFamily family) {
    switch (family) {
        case UtilityFamily::power: return "power";
        case UtilityFamily::two_piece_power: return "two_piece_power";
        case UtilityFamily::ramp: return "ramp";
        case UtilityFamily::kramkov_f: return "kramkov_f";
        case UtilityFamily::piecewise_polynomial: return "piecewise_polynomial";
    }
    return "?";
}

UtilityModel UtilityModel::power(double exponent, double scale) {
    if (!(exponent > 0.0)) throw std::invalid_argument("utility: power exponent must be positive");
    if (!(scale > 0.0)) throw std::invalid_argument("utility: power scale must be positive");
    UtilityModel m;
    m.family_ = UtilityFamily::power;
    m.p0_ = exponent;
    m.p1_ = scale;
    return m;
}

UtilityModel UtilityModel::two_piece_power(double gain_exponent, double loss_exponent,
                                           double gain_scale, double loss_scale) {
    if (!(gain_exponent > 0.0) || !(loss_exponent > 0.0))
        throw std::invalid_argument("utility: two-piece exponents must be positive");
    if (gain_scale < 0.0 || loss_scale < 0.0)
        throw std::invalid_argument("utility: two-piece scales must be nonnegative");
    UtilityModel m;
    m.family_ = UtilityFamily::two_piece_power;
    m.p0_ = gain_exponent;
    m.p1_ = loss_exponent;
    m.p2_ = gain_scale;
    m.p3_ = loss_scale;
    return m;
}

UtilityModel UtilityModel::ramp(double low, double high, double height) {
    if (!(low < high)) throw std::invalid_argument("utility: ramp needs low < high");
    if (height < 0.0) throw std::invalid_argument("utility: ramp height must be nonnegative");
    UtilityModel m;
    m.family_ = UtilityFamily::ramp;
    m.p0_ = low;
    m.p1_ = high;
    m.p2_ = height;
    return m;
}

UtilityModel UtilityModel::kramkov() {
    UtilityModel m;
    m.family_ = UtilityFamily::kramkov_f;
    return m;
}

UtilityModel UtilityModel::piecewise_polynomial(PiecewisePolynomial pieces) {
    if (pieces.knots.empty() || pieces.knots.size() != pieces.coeffs.size())
        throw std::invalid_argument("utility: piecewise polynomial needs one coefficient row per knot");
    if (pieces.knots.front() != 0.0)
        throw std::invalid_argument("utility: piecewise polynomial must start at 0");
    for (std::size_t i = 1; i < pieces.knots.size(); ++i)
        if (!(pieces.knots[i] > pieces.knots[i - 1]))
            throw std::invalid_argument("utility: piecewise knots must be strictly increasing");
    for (const auto& row : pieces.coeffs)
        if (row.empty()) throw std::invalid_argument("utility: empty coefficient row");

    // continuity at the knots: snap exact, reject genuine jumps
    for (std::size_t i = 0; i + 1 < pieces.knots.size(); ++i) {
        const double left = poly_eval(pieces.coeffs[i], pieces.knots[i + 1] - pieces.knots[i]);
        const double right = pieces.coeffs[i + 1][0];
        if (std::abs(left - right) > 1e-9 * std::max(1.0, std::abs(left)))
            throw std::invalid_argument("utility: piecewise pieces disagree at knot " +
                                        std::to_string(pieces.knots[i + 1]));
        pieces.coeffs[i + 1][0] = left;
    }

    UtilityModel m;
    m.family_ = UtilityFamily::piecewise_polynomial;
    m.pieces_ = std::move(pieces);

    // non-decreasing, checked as derivative signs on per-piece grids
    const auto& pw = m.pieces_;
    for (std::size_t i = 0; i < pw.knots.size(); ++i) {
        const double lo = pw.knots[i];
        const double hi = i + 1 < pw.knots.size() ? pw.knots[i + 1] : pw.knots[i] + std::max(1.0, pw.knots.back());
        for (int j = 0; j <= 32; ++j) {
            const double x = lo + (hi - lo) * j / 32.0;
            if (poly_derivative(pw.coeffs[i], x - pw.knots[i]) < -1e-9)
                throw std::invalid_argument("utility: piecewise polynomial decreases near x=" +
                                            std::to_string(x));
        }
    }
    return m;
}

UtilityModel UtilityModel::with_reference(NodeScalar reference) const {
    if (!reference.all_nonneg())
        throw std::invalid_argument("utility: reference point must be nonnegative");
    UtilityModel m = *this;
    m.reference_ = std::move(reference);
    return m;
}

double UtilityModel::core_floor() const {
    switch (family_) {
        case UtilityFamily::power: return 0.0;
        case UtilityFamily::kramkov_f: return 0.0;
        case UtilityFamily::piecewise_polynomial: return pieces_.knots.front();
        case UtilityFamily::two_piece_power:
        case UtilityFamily::ramp: return -std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

double UtilityModel::core(double y) const {
    switch (family_) {
        case UtilityFamily::power:
            return p1_ * std::pow(y, p0_);
        case UtilityFamily::two_piece_power:
            return y >= 0.0 ? p2_ * std::pow(y, p0_) : -p3_ * std::pow(-y, p1_);
        case UtilityFamily::ramp:
            if (y <= p0_) return 0.0;
            if (y >= p1_) return p2_;
            return p2_ * (y - p0_) / (p1_ - p0_);
        case UtilityFamily::kramkov_f:
            return kramkov_f(y).first;
        case UtilityFamily::piecewise_polynomial:
            return pieces_.eval(y);
    }
    return 0.0;
}

double UtilityModel::eval(double x, const std::string& node) const {
    if (x < 0.0) throw std::invalid_argument("utility: wealth must be nonnegative");
    const double y = x - reference_.at(node);
    const double floor = core_floor();
    return core(std::max(y, floor));
}

std::vector<double> UtilityModel::breakpoints(double lo, double hi, const std::string& node) const {
    std::vector<double> pts;
    const double b = reference_.at(node);
    auto push = [&](double y) {
        const double x = y + b;
        if (x > lo && x < hi) pts.push_back(x);
    };
    switch (family_) {
        case UtilityFamily::power:
            break;
        case UtilityFamily::two_piece_power:
            push(0.0);
            break;
        case UtilityFamily::ramp:
            push(p0_);
            push(p1_);
            break;
        case UtilityFamily::kramkov_f: {
            const double top = std::min(hi - b, 4096.0);
            for (double n = 0.0; n <= top; n += 1.0) {
                const double a = 0.25 / ((n + 1.0) * (n + 2.0));
                push(n);
                push(n + 0.5 - a);
                push(n + 0.5 + a);
            }
            break;
        }
        case UtilityFamily::piecewise_polynomial:
            for (double k : pieces_.knots) push(k);
            break;
    }
    if (b > 0.0 && core_floor() > -std::numeric_limits<double>::infinity()) {
        // joint between the constant extension and the core
        const double x = core_floor() + b;
        if (x > lo && x < hi) pts.push_back(x);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

void UtilityModel::check_shape(double hi, const std::vector<std::string>& nodes) const {
    for (const std::string& node : nodes) {
        if (!std::isfinite(eval(0.0, node)))
            throw std::invalid_argument("utility: u(0) must be finite at node '" + node + "'");
        double prev = -std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 512; ++i) {
            const double x = hi * i / 512.0;
            const double v = eval(x, node);
            if (!std::isfinite(v))
                throw std::invalid_argument("utility: non-finite value at x=" + std::to_string(x));
            if (v < prev - 1e-9)
                throw std::invalid_argument("utility: decreasing near x=" + std::to_string(x) +
                                            " at node '" + node + "'");
            prev = std::max(prev, v);
        }
    }
}

std::vector<double> default_lambda_grid() { return {1.0, 1.5, 2.0, 4.0, 8.0, 16.0}; }

std::vector<double> default_x_grid(const GrowthCertificate& cert) {
    std::vector<double> xs;
    const double lo = std::max(cert.x_bar, 1e-4);
    const double hi = 100.0 * (cert.x_bar + 1.0);
    for (int i = 0; i < 40; ++i)
        xs.push_back(lo * std::pow(hi / lo, i / 39.0));
    xs.front() = std::max(cert.x_bar, xs.front());
    return xs;
}

std::optional<GrowthCounterexample> falsify_growth(const UtilityModel& model,
                                                   const GrowthCertificate& cert,
                                                   const std::vector<double>& lambda_grid,
                                                   const std::vector<double>& x_grid,
                                                   const std::vector<std::string>& nodes) {
    if (!(cert.gamma_bar > 0.0)) throw std::invalid_argument("growth: gamma_bar must be positive");
    if (cert.x_bar < 0.0) throw std::invalid_argument("growth: x_bar must be nonnegative");
    if (!cert.c.all_nonneg()) throw std::invalid_argument("growth: c must be nonnegative");
    for (double lambda : lambda_grid) {
        if (lambda < 1.0) continue;
        const double lg = std::pow(lambda, cert.gamma_bar);
        for (double x : x_grid) {
            if (x < cert.x_bar) continue;
            for (const std::string& node : nodes) {
                const double lhs = model.eval(lambda * x, node);
                const double rhs = lg * model.eval(x, node) + lg * cert.c.at(node);
                if (lhs > rhs + 1e-9) return GrowthCounterexample{lambda, x, node, lhs, rhs};
            }
        }
    }
    return std::nullopt;
}

GrowthCertificate lift_growth(const UtilityModel& model, const GrowthCertificate& cert,
                              const std::vector<std::string>& nodes) {
    if (auto cex = falsify_growth(model, cert, default_lambda_grid(), default_x_grid(cert), nodes)) {
        std::ostringstream os;
        os << "growth certificate falsified at lambda=" << cex->lambda << ", x=" << cex->x;
        throw GrowthFalsifiedError(*cex, os.str());
    }
    GrowthCertificate lifted = cert;
    NodeScalar C;
    C.constant = model.eval_plus(cert.x_bar) + cert.c.constant;
    for (const std::string& node : nodes)
        if (!node.empty())
            C.per_node[node] = model.eval_plus(cert.x_bar, node) + cert.c.at(node);
    lifted.C_lifted = C;

    // spot-check of the lifted bound, including points below x_bar
    std::vector<double> xs = default_x_grid(cert);
    for (int i = 0; i < 20; ++i) xs.push_back(cert.x_bar * i / 20.0);
    for (double lambda : default_lambda_grid()) {
        const double lg = std::pow(lambda, cert.gamma_bar);
        for (double x : xs) {
            for (const std::string& node : nodes) {
                const double lhs = model.eval_plus(lambda * x, node);
                const double rhs = lg * model.eval_plus(x, node) + lg * C.at(node);
                if (lhs > rhs + 1e-9) {
                    GrowthCounterexample cex{lambda, x, node, lhs, rhs};
                    throw GrowthFalsifiedError(cex, "lifted growth bound falsified");
                }
            }
        }
    }
    return lifted;
}

double empirical_elasticity(const UtilityModel& model, const std::string& node, double x,
                            double h) {
    if (!(x > 0.0)) throw std::invalid_argument("elasticity: x must be positive");
    if (!(h > 0.0) || h >= x) throw std::invalid_argument("elasticity: step must lie in (0, x)");
    const double u = model.eval(x, node);
    if (u == 0.0) throw std::invalid_argument("elasticity: u(x) vanishes");
    const double du = (model.eval(x + h, node) - model.eval(x - h, node)) / (2.0 * h);
    return x * du / u;
}

GrowthCertificate refpoint_certificate(double gamma_bar, double x_tilde, double C, double K,
                                       double x_hat, double B_max) {
    if (!(gamma_bar > 0.0)) throw std::invalid_argument("refpoint: gamma_bar must be positive");
    if (x_tilde < 0.0 || x_hat < 0.0 || C < 0.0 || K < 0.0 || B_max < 0.0)
        throw std::invalid_argument("refpoint: inputs must be nonnegative");
    GrowthCertificate cert;
    cert.gamma_bar = gamma_bar;
    cert.x_bar = std::max(x_tilde, x_hat) + B_max;
    cert.c = NodeScalar(K * B_max + C);
    return cert;
}

namespace {
UtilitySpec parse_utility_impl(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    if (!doc.is_object() || !doc.contains("family"))
        throw std::invalid_argument("utility: document must carry a family");
    const std::string fam = doc["family"].get<std::string>();
    const nlohmann::json params = doc.value("params", nlohmann::json::object());

    auto need = [&](const char* key) {
        if (!params.contains(key))
            throw std::invalid_argument(std::string("utility: missing param '") + key + "'");
        return params[key].get<double>();
    };

    UtilitySpec spec;
    if (fam == "power") {
        spec.model = UtilityModel::power(need("exponent"), params.value("scale", 1.0));
    } else if (fam == "two_piece_power") {
        spec.model = UtilityModel::two_piece_power(need("gain_exponent"), need("loss_exponent"),
                                                   need("gain_scale"), need("loss_scale"));
    } else if (fam == "ramp") {
        spec.model = UtilityModel::ramp(need("low"), need("high"), params.value("height", 1.0));
    } else if (fam == "kramkov_f") {
        spec.model = UtilityModel::kramkov();
    } else if (fam == "piecewise_polynomial") {
        PiecewisePolynomial pw;
        if (!params.contains("knots") || !params.contains("coefficients"))
            throw std::invalid_argument("utility: piecewise polynomial needs knots and coefficients");
        pw.knots = params["knots"].get<std::vector<double>>();
        pw.coeffs = params["coefficients"].get<std::vector<std::vector<double>>>();
        spec.model = UtilityModel::piecewise_polynomial(std::move(pw));
    } else {
        throw std::invalid_argument("utility: unknown family '" + fam + "'");
    }

    if (doc.contains("reference") && !doc["reference"].is_null()) {
        const auto& ref = doc["reference"];
        NodeScalar b;
        const std::string type = ref.value("type", "constant");
        if (type == "constant") {
            b.constant = ref.at("value").get<double>();
        } else if (type == "per_node") {
            b.constant = 0.0;
            for (const auto& [id, v] : ref.at("value").items())
                b.per_node[id] = v.get<double>();
        } else {
            throw std::invalid_argument("utility: unknown reference type '" + type + "'");
        }
        spec.model = spec.model.with_reference(std::move(b));
    }

    if (doc.contains("growth") && !doc["growth"].is_null()) {
        const auto& g = doc["growth"];
        GrowthCertificate cert;
        cert.gamma_bar = g.at("gamma_bar").get<double>();
        cert.x_bar = g.at("x_bar").get<double>();
        if (g.contains("c")) {
            if (g["c"].is_number()) {
                cert.c = NodeScalar(g["c"].get<double>());
            } else {
                for (const auto& [id, v] : g["c"].items()) cert.c.per_node[id] = v.get<double>();
            }
        }
        if (!(cert.gamma_bar > 0.0))
            throw std::invalid_argument("utility: growth gamma_bar must be positive");
        if (cert.x_bar < 0.0 || !cert.c.all_nonneg())
            throw std::invalid_argument("utility: growth x_bar and c must be nonnegative");
        spec.growth = std::move(cert);
    }
    return spec;
}
} // namespace

UtilitySpec parse_utility(const std::string& text) {
    try {
        return parse_utility_impl(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("utility: ") + e.what());
    }
}

} // namespace ncdp
