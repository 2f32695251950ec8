#pragma once

// Independent numerical oracles used by the tests only. These never call into
// the library's solution paths they are checking.

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// classical RK4, integrating y' = f(t, y) backward from t = T (y(T) = yT) and
// returning y sampled at n_out uniform nodes on [0, T] (index 0 = t = 0)
inline std::vector<double> rk4_backward(const std::function<double(double, double)>& f,
                                        double T, double yT, int n_steps, int n_out) {
    std::vector<double> traj(n_steps + 1);
    double y = yT;
    traj[n_steps] = y;
    const double h = -T / n_steps;
    for (int k = n_steps; k > 0; --k) {
        const double t = T * double(k) / n_steps;
        const double k1 = f(t, y);
        const double k2 = f(t + h / 2, y + h / 2 * k1);
        const double k3 = f(t + h / 2, y + h / 2 * k2);
        const double k4 = f(t + h, y + h * k3);
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        traj[k - 1] = y;
    }
    std::vector<double> out(n_out);
    for (int i = 0; i < n_out; ++i) {
        const double t = T * double(i) / (n_out - 1);
        const double s = t / T * n_steps;
        const int k = std::min(int(s), n_steps - 1);
        const double w = s - k;
        out[i] = (1 - w) * traj[k] + w * traj[k + 1];
    }
    return out;
}

// composite Simpson over [a, b] (n_intervals even)
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int n_intervals) {
    const double h = (b - a) / n_intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < n_intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// tiny deterministic generator for property-style tests
struct Lcg {
    unsigned long long s;
    explicit Lcg(unsigned long long seed) : s(seed) {}
    double uniform(double lo, double hi) {
        s = s * 6364136223846793005ull + 1442695040888963407ull;
        return lo + (hi - lo) * (double(s >> 11) / 9007199254740992.0);
    }
};

} // namespace oracles
