#pragma once

#include <vector>

#include "volfactor/errors.hpp"

namespace volfactor {

// Function of time sampled on a uniform grid; evaluation by monotone cubic
// (Fritsch-Carlson) interpolation. Immutable after construction.
class SampledTimeFn {
public:
    SampledTimeFn() = default;
    SampledTimeFn(double t0, double t1, std::vector<double> values);

    double operator()(double t) const;
    double t0() const { return t0_; }
    double t1() const { return t1_; }
    double step() const { return h_; }
    const std::vector<double>& values() const { return v_; }

private:
    double t0_ = 0.0, t1_ = 1.0, h_ = 1.0;
    std::vector<double> v_;
    std::vector<double> d_;   // node derivatives (monotone-limited)
};

// Prefix integral of uniformly sampled values, fourth-order (cubic segment rule).
// out[k] = integral over [t0, t0 + k h]; out.size() == values.size().
std::vector<double> cumulative_integral(double h, const std::vector<double>& values);

} // namespace volfactor
