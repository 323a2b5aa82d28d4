#pragma once

#include <vector>

namespace ncdp {

/// Monotone piecewise-linear value-of-wealth curve on [0, last knot].
/// Evaluation above the last knot extrapolates with the last segment's slope
/// and raises the out-of-range flag; negative wealth is rejected.
class ValueCurve {
public:
    ValueCurve() = default;
    ValueCurve(std::vector<double> wealth, std::vector<double> value);

    const std::vector<double>& wealth() const { return wealth_; }
    const std::vector<double>& values() const { return value_; }
    double max_wealth() const { return wealth_.back(); }
    int size() const { return static_cast<int>(wealth_.size()); }

    double eval(double x, bool* extrapolated = nullptr) const;

private:
    std::vector<double> wealth_; // strictly increasing, starts at 0
    std::vector<double> value_;  // non-decreasing
};

/// Geometric wealth grid {0} + n points ending at hi, optionally enriched
/// with extra interior points (kinks of the interpolated function).
std::vector<double> make_wealth_grid(double hi, int n, double lo_frac,
                                     const std::vector<double>& extra = {});

} // namespace ncdp
