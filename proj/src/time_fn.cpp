#include "volfactor/time_fn.hpp"

#include <algorithm>
#include <cmath>

namespace volfactor {

SampledTimeFn::SampledTimeFn(double t0, double t1, std::vector<double> values)
    : t0_(t0), t1_(t1), v_(std::move(values)) {
    if (v_.size() < 2 || !(t1 > t0))
        throw QuadratureError("SampledTimeFn needs >= 2 nodes on a positive interval");
    const std::size_t n = v_.size();
    h_ = (t1_ - t0_) / double(n - 1);
    // Fritsch-Carlson monotone slopes
    std::vector<double> del(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) del[i] = (v_[i + 1] - v_[i]) / h_;
    d_.assign(n, 0.0);
    d_[0] = del[0];
    d_[n - 1] = del[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (del[i - 1] * del[i] <= 0.0) {
            d_[i] = 0.0;
        } else {
            // harmonic mean keeps the interpolant monotone on monotone data
            d_[i] = 2.0 * del[i - 1] * del[i] / (del[i - 1] + del[i]);
        }
    }
}

double SampledTimeFn::operator()(double t) const {
    const std::size_t n = v_.size();
    double s = (t - t0_) / h_;
    if (s <= 0.0) return v_.front();
    if (s >= double(n - 1)) return v_.back();
    std::size_t i = std::min<std::size_t>(std::size_t(s), n - 2);
    const double u = s - double(i);
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * v_[i] + h10 * h_ * d_[i] + h01 * v_[i + 1] + h11 * h_ * d_[i + 1];
}

std::vector<double> cumulative_integral(double h, const std::vector<double>& f) {
    const std::size_t n = f.size();
    if (n < 4) throw QuadratureError("cumulative_integral needs >= 4 nodes");
    std::vector<double> out(n, 0.0);
    // closed cubic segment rules, O(h^4) end to end
    out[1] = out[0] + h / 24.0 * (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]);
    for (std::size_t k = 1; k + 2 < n; ++k)
        out[k + 1] = out[k] + h / 24.0 * (-f[k - 1] + 13 * f[k] + 13 * f[k + 1] - f[k + 2]);
    out[n - 1] = out[n - 2] + h / 24.0 * (f[n - 4] - 5 * f[n - 3] + 19 * f[n - 2] + 9 * f[n - 1]);
    return out;
}

} // namespace volfactor
