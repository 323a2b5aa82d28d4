#include "ncdp/value_curve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ncdp {

ValueCurve::ValueCurve(std::vector<double> wealth, std::vector<double> value)
    : wealth_(std::move(wealth)), value_(std::move(value)) {
    if (wealth_.empty() || wealth_.size() != value_.size())
        throw std::invalid_argument("curve: wealth and value sizes differ or are empty");
    if (wealth_.front() != 0.0) throw std::invalid_argument("curve: grid must start at 0");
    for (std::size_t i = 1; i < wealth_.size(); ++i) {
        if (!(wealth_[i] > wealth_[i - 1]))
            throw std::invalid_argument("curve: wealth grid must be strictly increasing");
        if (value_[i] < value_[i - 1])
            throw std::invalid_argument("curve: values must be non-decreasing");
    }
    for (double v : value_)
        if (!std::isfinite(v)) throw std::invalid_argument("curve: non-finite value");
}

double ValueCurve::eval(double x, bool* extrapolated) const {
    if (x < 0.0) throw std::invalid_argument("curve: negative wealth");
    if (extrapolated) *extrapolated = false;
    if (x <= wealth_.front()) return value_.front();
    if (x >= wealth_.back()) {
        if (x == wealth_.back()) return value_.back();
        if (extrapolated) *extrapolated = true;
        if (wealth_.size() == 1) return value_.back();
        const std::size_t i = wealth_.size() - 1;
        const double slope = (value_[i] - value_[i - 1]) / (wealth_[i] - wealth_[i - 1]);
        return value_[i] + slope * (x - wealth_[i]);
    }
    const auto it = std::upper_bound(wealth_.begin(), wealth_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - wealth_.begin());
    const double t = (x - wealth_[i - 1]) / (wealth_[i] - wealth_[i - 1]);
    return value_[i - 1] + t * (value_[i] - value_[i - 1]);
}

std::vector<double> make_wealth_grid(double hi, int n, double lo_frac,
                                     const std::vector<double>& extra) {
    if (hi < 0.0) throw std::invalid_argument("grid: negative upper bound");
    if (n < 1) throw std::invalid_argument("grid: need at least one point");
    if (!(lo_frac > 0.0) || lo_frac >= 1.0) throw std::invalid_argument("grid: lo_frac outside (0,1)");
    std::vector<double> grid{0.0};
    if (hi == 0.0) return grid;
    const double lo = hi * lo_frac;
    for (int j = 0; j < n; ++j)
        grid.push_back(lo * std::pow(hi / lo, n == 1 ? 1.0 : static_cast<double>(j) / (n - 1)));
    grid.back() = hi;
    for (double x : extra)
        if (x > 0.0 && x < hi) grid.push_back(x);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-13 * std::max(1.0, std::abs(a)); }),
               grid.end());
    return grid;
}

} // namespace ncdp
