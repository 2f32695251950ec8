#include "volfactor/mc.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <cstdlib>
#include <thread>

#include <Eigen/Dense>

#include "volfactor/closed_form.hpp"

namespace volfactor {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

} // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t path_index) {
    const std::uint64_t s0 = splitmix64(seed ^ splitmix64(path_index));
    const std::uint64_t s1 = splitmix64(path_index + 0x632BE59BD9B4E019ull);
    state_ = 0u;
    inc_ = (s1 << 1u) | 1u;
    next_u32();
    state_ += s0;
    next_u32();
}

std::uint32_t PathRng::next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    const std::uint32_t xorshifted = std::uint32_t(((old >> 18u) ^ old) >> 27u);
    const std::uint32_t rot = std::uint32_t(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

double PathRng::uniform() {
    return (double(next_u32()) + 0.5) * (1.0 / 4294967296.0);
}

double PathRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

void CorrFactor::apply(const double g[3], double out[3]) const {
    for (int i = 0; i < 3; ++i)
        out[i] = l[i][0] * g[0] + l[i][1] * g[1] + l[i][2] * g[2];
}

CorrFactor correlation_factor(double rho1, double rho2, double rho12) {
    const auto verdict = validate_correlations(rho1, rho2, rho12);
    if (!verdict.valid)
        throw InvalidCorrelation("correlation matrix is not PSD, determinant = "
                                 + std::to_string(verdict.determinant));
    Eigen::Matrix3d c;
    c << 1.0, rho1, rho2,
         rho1, 1.0, rho12,
         rho2, rho12, 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
    Eigen::Vector3d ev = es.eigenvalues();
    const double cut = 1e-14 * std::max(ev.maxCoeff(), 1.0);
    for (int i = 0; i < 3; ++i) ev[i] = ev[i] > cut ? std::sqrt(ev[i]) : 0.0;
    Eigen::Matrix3d L = es.eigenvectors() * ev.asDiagonal();
    CorrFactor out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out.l[i][j] = L(i, j);
    return out;
}

int worker_count() {
    if (const char* env = std::getenv("VOLFACTOR_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

namespace {

struct ChunkStats {
    double sum = 0.0, sumsq = 0.0;
    long n = 0, escaped = 0;
    bool nonfinite = false;
};

// fixed chunk layout; per-sample callback gets the sample (pair-averaged when
// antithetic) so serial and threaded runs combine identically
template <typename SampleFn>
McEstimate run_chunked(const SimConfig& config, long n_units, SampleFn fn, long* escaped_out) {
    constexpr long kChunk = 2048;
    const long n_chunks = (n_units + kChunk - 1) / kChunk;
    std::vector<ChunkStats> stats(static_cast<std::size_t>(n_chunks));
    std::atomic<long> next{0};
    auto work = [&]() {
        for (;;) {
            const long c = next.fetch_add(1);
            if (c >= n_chunks) break;
            ChunkStats& s = stats[std::size_t(c)];
            const long lo = c * kChunk;
            const long hi = std::min(n_units, lo + kChunk);
            for (long u = lo; u < hi; ++u) {
                long esc = 0;
                const double y = fn(std::uint64_t(u), &esc);
                if (!std::isfinite(y)) {
                    s.nonfinite = true;
                    break;
                }
                s.sum += y;
                s.sumsq += y * y;
                s.n += 1;
                s.escaped += esc;
            }
        }
    };
    const int workers = std::min<long>(worker_count(), n_chunks);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    double sum = 0.0, sumsq = 0.0;
    long n = 0, escaped = 0;
    for (const auto& s : stats) {
        if (s.nonfinite)
            throw NonFiniteUtility("path produced a non-finite sample");
        sum += s.sum;
        sumsq += s.sumsq;
        n += s.n;
        escaped += s.escaped;
    }
    if (escaped_out) *escaped_out = escaped;
    const double mean = sum / double(n);
    const double var = n > 1 ? std::max(0.0, (sumsq - double(n) * mean * mean) / double(n - 1)) : 0.0;
    return {mean, std::sqrt(var / double(n)), n};
}

struct PathSpec {
    GeneralCoefficients co;
    CorrFactor corr;
    double t0, T, dt;
    int n_steps;
};

} // namespace

PathBundle simulate_factor_paths(const ModelInstance& model, const CorrelationScheme& scheme,
                                 const SimConfig& config, double z1_0, double z2_0) {
    if (config.n_paths < 2 || config.n_steps < 1)
        throw DomainError("need n_paths >= 2 and n_steps >= 1");
    if (std::size_t(config.n_paths) * config.n_steps > std::size_t(5e7))
        throw DomainError("path bundle too large to materialize; use the estimators");
    const auto pc = perturbed_correlations(scheme);
    const auto corr = correlation_factor(pc.rho1, pc.rho2, pc.rho12);
    const auto co = model.coefficients();
    PathBundle b;
    b.n_paths = int(config.n_paths);
    b.n_steps = config.n_steps;
    b.dt = co.T / config.n_steps;
    b.z1.resize(std::size_t(b.n_paths) * (b.n_steps + 1));
    b.z2.resize(std::size_t(b.n_paths) * (b.n_steps + 1));
    b.w_inc.resize(std::size_t(b.n_paths) * b.n_steps);
    const double sdt = std::sqrt(b.dt);
    for (int p = 0; p < b.n_paths; ++p) {
        PathRng rng(config.seed, std::uint64_t(p));
        double za = z1_0, zb = z2_0;
        b.z1[std::size_t(p) * (b.n_steps + 1)] = za;
        b.z2[std::size_t(p) * (b.n_steps + 1)] = zb;
        for (int k = 0; k < b.n_steps; ++k) {
            double g[3] = {rng.normal(), rng.normal(), rng.normal()};
            double dwb[3];
            corr.apply(g, dwb);
            const double zap = std::max(za, 0.0);
            const double zbp = std::max(zb, 0.0);
            za += co.alpha1(zap) * b.dt + co.beta1(zap) * dwb[1] * sdt;
            zb += co.alpha2(zbp) * b.dt + co.beta2(zbp) * dwb[2] * sdt;
            b.w_inc[std::size_t(p) * b.n_steps + k] = dwb[0] * sdt;
            b.z1[std::size_t(p) * (b.n_steps + 1) + k + 1] = za;
            b.z2[std::size_t(p) * (b.n_steps + 1) + k + 1] = zb;
        }
    }
    return b;
}

McEstimate estimate_expected_utility(const ModelInstance& model, const DistortionConstants& consts,
                                     const Strategy& strategy, const SimConfig& config,
                                     const WealthState& initial, long* escaped_paths) {
    if (config.n_paths < 2 || config.n_steps < 1)
        throw DomainError("need n_paths >= 2 and n_steps >= 1");
    if (!(initial.x > 0.0)) throw DomainError("wealth must be positive");
    const auto pc = perturbed_correlations(config.scheme);
    const auto corr = correlation_factor(pc.rho1, pc.rho2, pc.rho12);
    const auto co = model.coefficients();
    const double T = co.T;
    const double t0 = initial.t;
    const int n_steps = config.n_steps;
    const double dt = (T - t0) / n_steps;
    const double sdt = std::sqrt(std::max(dt, 0.0));
    const double p = consts.p;

    const bool anti = config.antithetic;
    const long n_units = anti ? config.n_paths / 2 : config.n_paths;
    if (n_units < 1) throw DomainError("too few paths");

    auto one_path = [&](PathRng& rng, double sign, long* escaped) {
        double z1 = initial.z1, z2 = initial.z2, lx = 0.0;
        bool esc = false;
        for (int k = 0; k < n_steps; ++k) {
            double g[3] = {rng.normal(), rng.normal(), rng.normal()};
            double dwb[3];
            corr.apply(g, dwb);
            const double t = t0 + k * dt;
            const double z1p = std::max(z1, 0.0);
            const double z2p = std::max(z2, 0.0);
            const double x = initial.x * std::exp(lx);
            double pi;
            try {
                pi = strategy({t, x, z1p, z2p});
            } catch (const OutOfDomain&) {
                // park the position when the state leaves the strategy's domain
                esc = true;
                pi = 0.0;
            }
            const double w = pi / x;
            if (w != 0.0) {
                const double mu = co.mu(z1p, z2p);
                const double ws = w * co.sigma(z1p, z2p);
                lx += w * mu * dt - 0.5 * ws * ws * dt + ws * sign * dwb[0] * sdt;
            }
            z1 += co.alpha1(z1p) * dt + co.beta1(z1p) * sign * dwb[1] * sdt;
            z2 += co.alpha2(z2p) * dt + co.beta2(z2p) * sign * dwb[2] * sdt;
        }
        if (esc && escaped) ++*escaped;
        if (!std::isfinite(lx)) return std::numeric_limits<double>::quiet_NaN();
        return std::pow(initial.x * std::exp(lx), p) / p;
    };

    if (dt == 0.0) {
        const double u = std::pow(initial.x, p) / p;
        return {u, 0.0, config.n_paths};
    }

    auto sample = [&](std::uint64_t unit, long* escaped) {
        PathRng rng(config.seed, unit);
        if (!anti) return one_path(rng, 1.0, escaped);
        const double ya = one_path(rng, 1.0, escaped);
        PathRng rng2(config.seed, unit);
        const double yb = one_path(rng2, -1.0, escaped);
        return 0.5 * (ya + yb);
    };
    return run_chunked(config, n_units, sample, escaped_paths);
}

McEstimate estimate_expected_utility(const ModelInstance& model, const DistortionConstants& consts,
                                     const Strategy& strategy, const SimConfig& config,
                                     const WealthState& initial) {
    return estimate_expected_utility(model, consts, strategy, config, initial, nullptr);
}

McEstimate feynman_kac_psi0(const ModelInstance& model, const DistortionConstants& consts,
                            double rho, double t, double z1, double z2,
                            const SimConfig& config) {
    const auto co = model.coefficients();
    const double T = co.T;
    if (t > T) throw DomainError("t must be <= T");
    const int n_steps = config.n_steps;
    const double dt = (T - t) / n_steps;
    if (dt == 0.0) return {1.0, 0.0, config.n_paths};
    const double sdt = std::sqrt(dt);
    const bool anti = config.antithetic;
    const long n_units = anti ? config.n_paths / 2 : config.n_paths;

    auto one_path = [&](PathRng& rng, double sign) {
        double za = z1, zb = z2, integral = 0.0;
        for (int k = 0; k < n_steps; ++k) {
            const double g = sign * rng.normal() * sdt;   // shared driver, rho12 = 1
            const double zap = std::max(za, 0.0);
            const double zbp = std::max(zb, 0.0);
            const double lam = co.lambda(zap, zbp);
            integral += lam * lam * dt;
            za += (co.alpha1(zap) + consts.gamma * rho * lam * co.beta1(zap)) * dt
                + co.beta1(zap) * g;
            zb += (co.alpha2(zbp) + consts.gamma * rho * lam * co.beta2(zbp)) * dt
                + co.beta2(zbp) * g;
        }
        return std::exp(consts.gamma / (2.0 * consts.q) * integral);
    };
    auto sample = [&](std::uint64_t unit, long*) {
        PathRng rng(config.seed, unit);
        if (!anti) return one_path(rng, 1.0);
        const double ya = one_path(rng, 1.0);
        PathRng rng2(config.seed, unit);
        const double yb = one_path(rng2, -1.0);
        return 0.5 * (ya + yb);
    };
    return run_chunked(config, n_units, sample, nullptr);
}

GapResult near_optimality_gap(const ModelInstance& model, const CorrelationScheme& scheme,
                              const DistortionConstants& consts, const PsiSurface& psi_full,
                              const PsiSurface& psi0_surface, const SimConfig& config,
                              const WealthState& initial) {
    const auto co = model.coefficients();
    const double psi_f = psi_full.value(initial.t, initial.z1, initial.z2);
    const double v_pde = std::pow(initial.x, consts.p) / consts.p * std::pow(psi_f, consts.q);

    Strategy strat = [&](const WealthState& s) {
        return pi0_general(s, psi0_surface, consts, co, scheme.rho);
    };
    SimConfig cfg = config;
    cfg.scheme = scheme;
    long escaped = 0;
    const auto est = estimate_expected_utility(model, consts, strat, cfg, initial, &escaped);
    GapResult out;
    out.utility = est;
    out.v_pde = v_pde;
    out.gap = v_pde - est.mean;
    out.std_error = est.std_error;
    out.escaped_paths = escaped;
    if (double(out.escaped_paths) > 0.001 * double(config.n_paths))
        throw OutOfDomain("more than 0.1% of paths escaped the padded grid");
    return out;
}

} // namespace volfactor
