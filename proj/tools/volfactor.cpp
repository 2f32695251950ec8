#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "volfactor/closed_form.hpp"
#include "volfactor/config.hpp"
#include "volfactor/mc.hpp"
#include "volfactor/pde1d.hpp"
#include "volfactor/pde2d.hpp"
#include "volfactor/report.hpp"
#include "volfactor/two_asset.hpp"
#include "volfactor/verifier.hpp"

namespace vf = volfactor;
using nlohmann::json;

namespace {

std::vector<double> uniform_grid(double T, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = T * double(i) / double(n - 1);
    return g;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct Surfaces {
    vf::PsiSurface psi0, psi1;
};

Surfaces solve_base_surfaces(const vf::ExperimentConfig& cfg) {
    const auto consts = vf::distortion_constants(cfg.p, cfg.scheme.rho);
    const auto coeffs = vf::make_coefficients(cfg.model);
    vf::Pde2dOptions opts;
    opts.theta = cfg.theta;
    Surfaces s;
    s.psi0 = vf::solve_psi0_2d(coeffs, consts, cfg.scheme.rho, cfg.grid, opts);
    s.psi1 = vf::solve_psi1_2d(coeffs, consts, cfg.scheme, s.psi0, cfg.grid, opts);
    return s;
}

int run_approx(const vf::ExperimentConfig& cfg) {
    Timer timer;
    const auto consts = vf::distortion_constants(cfg.p, cfg.scheme.rho);
    const auto tg = uniform_grid(cfg.model.T, 1601);
    const auto ric = vf::solve_AB(consts, cfg.model, cfg.scheme.rho, tg);
    const auto corr = vf::solve_A1B1(ric, cfg.scheme, consts);
    vf::ensure_dir(cfg.output_dir);

    std::vector<std::vector<double>> trows;
    const auto slopes = vf::source_slopes(cfg.scheme, consts, cfg.model);
    for (int k = 0; k <= 400; ++k) {
        const double t = cfg.model.T * k / 400.0;
        trows.push_back({t, ric.A(t), ric.B(t), corr.A1(t), corr.B1(t),
                         vf::fbar1(t, ric, slopes)});
    }
    vf::write_csv(cfg.output_dir + "/approx_time.csv", "t,A,B,A1,B1,fbar1", trows);

    std::vector<std::vector<double>> zrows;
    for (int i = 0; i <= 400; ++i) {
        const double z = cfg.grid.z_max * i / 400.0;
        vf::WealthState st{0.0, cfg.mc.x0, z, z};
        zrows.push_back({z, vf::psi0_tilde(0.0, z, ric), vf::psi1_tilde(0.0, z, ric, corr),
                         vf::pi0_diagonal(st, ric, consts, cfg.model, cfg.scheme.rho)});
    }
    vf::write_csv(cfg.output_dir + "/approx_diagonal.csv", "z,psi0_tilde,psi1_tilde,pi0", zrows);

    vf::write_text(cfg.output_dir + "/manifest.json",
               vf::manifest_json(cfg, {"approx_time.csv", "approx_diagonal.csv"}, timer.seconds()));
    std::printf("approx: a+ %.12g a- %.12g A(0) %.12g B(0) %.12g A1(0) %.12g B1(0) %.12g\n",
                ric.a_plus(), ric.a_minus(), ric.A(0), ric.B(0), corr.A1(0), corr.B1(0));
    return 0;
}

int run_pde(const vf::ExperimentConfig& cfg) {
    Timer timer;
    const auto consts = vf::distortion_constants(cfg.p, cfg.scheme.rho);
    const auto coeffs = vf::make_coefficients(cfg.model);
    vf::ensure_dir(cfg.output_dir);
    vf::Pde2dOptions opts;
    opts.theta = cfg.theta;
    vf::SolveDiagnostics d0{}, d1{}, df{};
    auto s = solve_base_surfaces(cfg);
    vf::Pde2dOptions fopts = opts;
    fopts.time_stride = cfg.grid.n_t;
    const auto psif = vf::solve_psi_full(coeffs, consts, cfg.scheme, cfg.grid, fopts, &df);
    const auto rows = vf::diagonal_error_curves(psif, s.psi0, s.psi1, cfg.scheme.eps);
    vf::write_diagonal_csv(cfg.output_dir + "/diagonal.csv", rows);
    double sup0 = 0, sup1 = 0;
    for (const auto& r : rows) {
        sup0 = std::max(sup0, std::abs(r.err0));
        sup1 = std::max(sup1, std::abs(r.err1));
    }
    json diag{{"eps", cfg.scheme.eps},
              {"sup_err0", sup0},
              {"sup_err1", sup1},
              {"positivity_stencil_failures", df.positivity_stencil_failures},
              {"added_diffusion", df.added_diffusion}};
    vf::write_text(cfg.output_dir + "/pde_diagnostics.json", diag.dump(2));
    vf::write_text(cfg.output_dir + "/manifest.json",
               vf::manifest_json(cfg, {"diagonal.csv", "pde_diagnostics.json"}, timer.seconds()));
    std::printf("pde: eps %.4g sup|err0| %.6g sup|err1| %.6g\n", cfg.scheme.eps, sup0, sup1);
    return 0;
}

int run_mc(const vf::ExperimentConfig& cfg) {
    Timer timer;
    const auto consts = vf::distortion_constants(cfg.p, cfg.scheme.rho);
    vf::ensure_dir(cfg.output_dir);
    const vf::ModelInstance model{cfg.model};
    vf::SimConfig sim{cfg.mc.n_paths, cfg.mc.n_steps, cfg.mc.seed, cfg.scheme, cfg.mc.antithetic};

    const auto fk = vf::feynman_kac_psi0(model, consts, cfg.scheme.rho, 0.0, cfg.mc.z0,
                                         cfg.mc.z0, sim);
    const auto tg = uniform_grid(cfg.model.T, 1601);
    const auto ric = vf::solve_AB(consts, cfg.model, cfg.scheme.rho, tg);
    const double fk_closed = vf::psi0_tilde(0.0, cfg.mc.z0, ric);
    json fkj = json::parse(vf::mc_report_json(fk, cfg.mc, 0));
    fkj["closed_form"] = fk_closed;
    fkj["abs_err_in_se"] = fk.std_error > 0 ? std::abs(fk.mean - fk_closed) / fk.std_error : 0.0;
    vf::write_text(cfg.output_dir + "/fk.json", fkj.dump(2));

    auto s = solve_base_surfaces(cfg);
    const auto coeffs = vf::make_coefficients(cfg.model);
    vf::Strategy strat = [&](const vf::WealthState& st) {
        return vf::pi0_general(st, s.psi0, consts, coeffs, cfg.scheme.rho);
    };
    long escaped = 0;
    const vf::WealthState init{0.0, cfg.mc.x0, cfg.mc.z0, cfg.mc.z0};
    const auto util = vf::estimate_expected_utility(model, consts, strat, sim, init, &escaped);
    json uj = json::parse(vf::mc_report_json(util, cfg.mc, escaped));
    const auto corr = vf::solve_A1B1(ric, cfg.scheme, consts);
    uj["value_order0"] = vf::value_approx(init, 0, ric, &corr, consts, cfg.scheme.eps);
    uj["value_order1"] = vf::value_approx(init, 1, ric, &corr, consts, cfg.scheme.eps);
    vf::write_text(cfg.output_dir + "/utility.json", uj.dump(2));
    vf::write_text(cfg.output_dir + "/manifest.json",
               vf::manifest_json(cfg, {"fk.json", "utility.json"}, timer.seconds()));
    std::printf("mc: fk %.8g (closed %.8g, %.2f se) utility %.8g (se %.3g)\n", fk.mean,
                fk_closed, fkj["abs_err_in_se"].get<double>(), util.mean, util.std_error);
    return 0;
}

int run_verify(const vf::ExperimentConfig& cfg) {
    Timer timer;
    const auto consts = vf::distortion_constants(cfg.p, cfg.scheme.rho);
    const auto coeffs = vf::make_coefficients(cfg.model);
    vf::ensure_dir(cfg.output_dir);
    auto s = solve_base_surfaces(cfg);

    vf::VerificationReport rep;
    // M from the diagonal band sample; closed-form derivative surrogates
    const auto tg = uniform_grid(cfg.model.T, 1601);
    const auto ric = vf::solve_AB(consts, cfg.model, cfg.scheme.rho, tg);
    const auto corr = vf::solve_A1B1(ric, cfg.scheme, consts);
    std::vector<vf::MSample> samples;
    for (int it = 0; it <= 20; ++it) {
        const double t = cfg.model.T * it / 20.0;
        for (int iz = 1; iz <= 40; ++iz) {
            const double z = cfg.grid.z_max * iz / 40.0;
            samples.push_back({vf::derivs_from_closed(t, z, ric, corr, cfg.model), t,
                               2.0 * cfg.model.lambda_bar() * cfg.model.lambda_bar() * z});
        }
    }
    rep.M = vf::choose_M(samples, consts, cfg.scheme, cfg.model.T);

    // quarter-identity measurement at t = 0
    for (double zq : {10.0, 50.0, 100.0}) {
        const int i = int(std::lround(zq / cfg.grid.dz()));
        if (i < 2 || i >= s.psi0.n() - 2) continue;
        const double fd = s.psi0.d12(0, i, i);
        const double closed = 0.25 * ric.A(0) * ric.A(0) * vf::psi0_tilde(0, zq, ric);
        rep.psi12_quarter_identity.emplace_back(zq, fd / closed);
    }

    vf::Pde2dOptions fopts;
    fopts.theta = cfg.theta;
    fopts.time_stride = std::max(1, cfg.grid.n_t / 40);
    while (cfg.grid.n_t % fopts.time_stride != 0) --fopts.time_stride;
    json gaps = json::array();
    for (double eps : cfg.figure_eps) {
        vf::CorrelationScheme sc = cfg.scheme;
        sc.eps = eps;
        const auto psif = vf::solve_psi_full(coeffs, consts, sc, cfg.grid, fopts);
        vf::SubSuperPair pair{rep.M, consts.p < 0.0, eps, &s.psi0, &s.psi1};
        const auto sw = vf::sandwich_check(pair, psif);
        rep.sandwich_violation_fraction.emplace_back(eps, sw.violation_fraction);
        const vf::ModelInstance model{cfg.model};
        vf::SimConfig sim{cfg.mc.n_paths, cfg.mc.n_steps, cfg.mc.seed, sc, cfg.mc.antithetic};
        const vf::WealthState init{0.0, cfg.mc.x0, cfg.mc.z0, cfg.mc.z0};
        const auto gap = vf::near_optimality_gap(model, sc, consts, psif, s.psi0, sim, init);
        gaps.push_back({{"eps", eps}, {"gap", gap.gap}, {"std_error", gap.std_error},
                        {"v_pde", gap.v_pde}, {"utility", gap.utility.mean},
                        {"escaped_paths", gap.escaped_paths},
                        {"conclusive", std::abs(gap.gap) > 5.0 * gap.std_error}});
    }
    rep.residual = vf::residual_order_regression({0.025, 0.05, 0.1}, s.psi0, s.psi1, consts,
                                                 coeffs, cfg.scheme);
    rep.phi = vf::phi_consistency(s.psi0, s.psi1, consts, coeffs, cfg.scheme);

    json out = json::parse(vf::verification_report_json(rep));
    out["near_optimality_gap"] = gaps;
    vf::write_text(cfg.output_dir + "/verification_report.json", out.dump(2));
    vf::write_text(cfg.output_dir + "/manifest.json",
               vf::manifest_json(cfg, {"verification_report.json"}, timer.seconds()));
    std::printf("verify: M %.6g fitted_order %.3f noise_floor %.3g\n", rep.M,
                rep.residual.fitted_order, rep.residual.noise_floor);
    for (const auto& [eps, f] : rep.sandwich_violation_fraction)
        std::printf("verify: sandwich eps %.4g violation fraction %.4f\n", eps, f);
    return 0;
}

int run_figures(const vf::ExperimentConfig& cfg) {
    Timer timer;
    const auto consts = vf::distortion_constants(cfg.p, cfg.scheme.rho);
    const auto coeffs = vf::make_coefficients(cfg.model);
    vf::ensure_dir(cfg.output_dir);
    auto s = solve_base_surfaces(cfg);
    vf::Pde2dOptions fopts;
    fopts.theta = cfg.theta;
    fopts.time_stride = cfg.grid.n_t;
    json summary = json::array();
    std::vector<std::string> artifacts;
    for (double eps : cfg.figure_eps) {
        vf::CorrelationScheme sc = cfg.scheme;
        sc.eps = eps;
        const auto psif = vf::solve_psi_full(coeffs, consts, sc, cfg.grid, fopts);
        const auto rows = vf::diagonal_error_curves(psif, s.psi0, s.psi1, eps);
        char name[64];
        std::snprintf(name, sizeof name, "figure_eps%g.csv", eps);
        vf::write_diagonal_csv(cfg.output_dir + "/" + name, rows);
        artifacts.push_back(name);
        double sup0 = 0, sup1 = 0;
        for (const auto& r : rows) {
            sup0 = std::max(sup0, std::abs(r.err0));
            sup1 = std::max(sup1, std::abs(r.err1));
        }
        summary.push_back({{"eps", eps}, {"sup_err0", sup0}, {"sup_err1", sup1}});
        std::printf("figures: eps %.4g sup|err0| %.6g sup|err1| %.6g\n", eps, sup0, sup1);
    }
    json out{{"runs", summary}};
    json ratios = json::array();
    for (std::size_t a = 0; a + 1 < summary.size(); ++a) {
        ratios.push_back({{"eps_hi", summary[a]["eps"]},
                          {"eps_lo", summary[a + 1]["eps"]},
                          {"ratio_err0", summary[a]["sup_err0"].get<double>()
                                             / summary[a + 1]["sup_err0"].get<double>()},
                          {"ratio_err1", summary[a]["sup_err1"].get<double>()
                                             / summary[a + 1]["sup_err1"].get<double>()}});
    }
    out["ratios"] = ratios;
    vf::write_text(cfg.output_dir + "/figures_summary.json", out.dump(2));
    artifacts.push_back("figures_summary.json");
    vf::write_text(cfg.output_dir + "/manifest.json", vf::manifest_json(cfg, artifacts, timer.seconds()));
    return 0;
}

int run_two_asset(const vf::ExperimentConfig& cfg) {
    Timer timer;
    vf::ensure_dir(cfg.output_dir);
    vf::TwoAssetModel m;
    m.m = cfg.model.m;
    m.beta_bar = cfg.model.beta_bar;
    m.T = cfg.model.T;
    m.rho1 = cfg.scheme.rho;
    m.rho2 = cfg.scheme.rho - 0.1;   // asymmetric stock-factor correlations
    m.rhoW12 = 0.3;
    m.rho_slope[0][0] = cfg.scheme.rho1_slope;
    m.rho_slope[0][1] = cfg.scheme.rho2_slope;
    m.rho_slope[1][0] = cfg.scheme.rho1_slope;
    m.rho_slope[1][1] = cfg.scheme.rho2_slope;
    m.rho12B_slope = cfg.scheme.rho12_slope;

    const auto consts = vf::q_two_asset(cfg.p, m.rho1, m.rho2, m.rhoW12);
    const auto [lam_sq, lam_bb] = vf::effective_lambdas(m);
    const auto tg = uniform_grid(m.T, 1601);
    const auto ric = vf::solve_CD_two_asset(m, cfg.p, tg);
    const auto corr = vf::solve_C1D1_two_asset(m, cfg.p, ric);

    std::vector<std::vector<double>> trows;
    for (int k = 0; k <= 400; ++k) {
        const double t = m.T * k / 400.0;
        trows.push_back({t, ric.A(t), ric.B(t), corr.A1(t), corr.B1(t)});
    }
    vf::write_csv(cfg.output_dir + "/two_asset_time.csv", "t,C,D,C1,D1", trows);

    std::vector<std::vector<double>> prow;
    for (int i = 0; i <= 200; ++i) {
        const double z = cfg.grid.z_max * i / 200.0;
        vf::WealthState st{0.0, cfg.mc.x0, z, z};
        const auto [p1, p2] = vf::pi0_two_asset_diagonal(st, ric, m, cfg.p);
        prow.push_back({z, 1.0, p1});
        prow.push_back({z, 2.0, p2});
    }
    vf::write_csv(cfg.output_dir + "/two_asset_pi0.csv", "z,asset,pi0", prow);

    // small 2-D solve: diagonal agreement with the engine closed form, plus the
    // typeset drift variant (extra factor rho) for the report
    vf::Grid2D g2 = cfg.grid;
    g2.n_z = std::min(cfg.grid.n_z, 101);
    g2.n_t = std::min(cfg.grid.n_t, 200);
    vf::Pde2dOptions opts;
    opts.theta = cfg.theta;
    const auto psi0 = vf::solve_psi0_two_asset(m, cfg.p, g2, opts);
    double sup_engine = 0.0, sup_typeset = 0.0;
    vf::DiagonalParams typeset = vf::diagonal_params_two_asset(m, cfg.p);
    typeset.coupling *= m.rho1;   // the typeset drift reads 2 G rho lambda_bb beta z
    const auto ric_typeset = vf::solve_AB(typeset, tg);
    for (int i = 0; i < psi0.n(); ++i) {
        const double z = g2.z(i);
        if (z > g2.z_max) break;
        const double num = psi0.node(0, i, i);
        sup_engine = std::max(sup_engine, std::abs(num - vf::psi0_tilde(0.0, z, ric)));
        sup_typeset = std::max(sup_typeset, std::abs(num - vf::psi0_tilde(0.0, z, ric_typeset)));
    }
    json rep{{"q", consts.q},
             {"lambda_sq_eff", lam_sq},
             {"lambda_bar_bar", lam_bb},
             {"C0", ric.A(0)},
             {"D0", ric.B(0)},
             {"diag_sup_err_engine_drift", sup_engine},
             {"diag_sup_err_typeset_drift", sup_typeset}};
    vf::write_text(cfg.output_dir + "/two_asset_report.json", rep.dump(2));
    vf::write_text(cfg.output_dir + "/manifest.json",
               vf::manifest_json(cfg, {"two_asset_time.csv", "two_asset_pi0.csv",
                                   "two_asset_report.json"},
                             timer.seconds()));
    std::printf("two-asset: q %.8g lambda_bb %.8g diag err engine %.3g typeset %.3g\n",
                consts.q, lam_bb, sup_engine, sup_typeset);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"volfactor: asymptotic approximation laboratory for optimal investment "
                 "with two correlated stochastic volatility factors"};
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (defaults when omitted)");

    std::vector<std::function<void(vf::ExperimentConfig&)>> overrides;
    auto add_num = [&](const std::string& name, auto setter, const char* desc) {
        auto holder = std::make_shared<double>();
        CLI::Option* opt = app.add_option(name, *holder, desc);
        overrides.push_back([opt, holder, setter](vf::ExperimentConfig& c) {
            if (opt->count()) setter(c, *holder);
        });
    };
    add_num("--model.mu_bar", [](auto& c, double v) { c.model.mu_bar = v; }, "stock drift");
    add_num("--model.sigma_bar", [](auto& c, double v) { c.model.sigma_bar = v; }, "vol scale");
    add_num("--model.m", [](auto& c, double v) { c.model.m = v; }, "factor mean level");
    add_num("--model.beta_bar", [](auto& c, double v) { c.model.beta_bar = v; }, "vol of vol");
    add_num("--model.p", [](auto& c, double v) { c.p = v; }, "utility exponent");
    add_num("--model.T", [](auto& c, double v) { c.model.T = v; }, "horizon");
    add_num("--correlation.rho", [](auto& c, double v) { c.scheme.rho = v; }, "base correlation");
    add_num("--correlation.rho1_slope", [](auto& c, double v) { c.scheme.rho1_slope = v; }, "");
    add_num("--correlation.rho2_slope", [](auto& c, double v) { c.scheme.rho2_slope = v; }, "");
    add_num("--correlation.rho12_slope", [](auto& c, double v) { c.scheme.rho12_slope = v; }, "");
    add_num("--correlation.eps", [](auto& c, double v) { c.scheme.eps = v; }, "perturbation size");
    add_num("--grid.z_max", [](auto& c, double v) { c.grid.z_max = v; }, "reported factor cap");
    add_num("--grid.n_z", [](auto& c, double v) { c.grid.n_z = int(v); }, "nodes on [0, z_max]");
    add_num("--grid.n_t", [](auto& c, double v) { c.grid.n_t = int(v); }, "time steps");
    add_num("--grid.pad_factor", [](auto& c, double v) { c.grid.pad_factor = v; }, "box padding");
    add_num("--grid.theta", [](auto& c, double v) { c.theta = v; }, "time scheme weight");
    add_num("--mc.n_paths", [](auto& c, double v) { c.mc.n_paths = long(v); }, "paths");
    add_num("--mc.n_steps", [](auto& c, double v) { c.mc.n_steps = int(v); }, "steps");
    add_num("--mc.seed", [](auto& c, double v) { c.mc.seed = std::uint64_t(v); }, "seed");
    add_num("--mc.x0", [](auto& c, double v) { c.mc.x0 = v; }, "initial wealth");
    add_num("--mc.z0", [](auto& c, double v) { c.mc.z0 = v; }, "initial factor level");
    add_num("--paths", [](auto& c, double v) { c.mc.n_paths = long(v); }, "alias of --mc.n_paths");
    std::string out_dir_flag;
    CLI::Option* out_opt = app.add_option("--out", out_dir_flag, "output directory");
    overrides.push_back([&, out_opt](vf::ExperimentConfig& c) {
        if (out_opt->count()) c.output_dir = out_dir_flag;
    });
    std::vector<double> eps_flags;
    CLI::Option* eps_opt = app.add_option("--eps", eps_flags, "figure eps list (repeatable)");
    overrides.push_back([&, eps_opt](vf::ExperimentConfig& c) {
        if (eps_opt->count()) c.figure_eps = eps_flags;
    });

    auto* sub_approx = app.add_subcommand("approx", "closed-form tables and pi0 curve");
    auto* sub_pde = app.add_subcommand("pde", "2-D solves and diagonal error CSV");
    auto* sub_mc = app.add_subcommand("mc", "utility / Feynman-Kac estimates");
    auto* sub_verify = app.add_subcommand("verify", "Phi, Theta^2, M, sandwich, residual order");
    auto* sub_figures = app.add_subcommand("figures", "per-eps nonlinear solves and error CSVs");
    auto* sub_two = app.add_subcommand("two-asset", "two-asset pipeline");
    app.require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        vf::ExperimentConfig cfg =
            config_path.empty() ? vf::default_config() : vf::load_config(config_path);
        for (auto& f : overrides) f(cfg);
        vf::validate(cfg);
        if (sub_approx->parsed()) return run_approx(cfg);
        if (sub_pde->parsed()) return run_pde(cfg);
        if (sub_mc->parsed()) return run_mc(cfg);
        if (sub_verify->parsed()) return run_verify(cfg);
        if (sub_figures->parsed()) return run_figures(cfg);
        if (sub_two->parsed()) return run_two_asset(cfg);
        return 2;
    } catch (const vf::ParseError& e) {
        std::cerr << json{{"error", "parse"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const vf::ValidationError& e) {
        std::cerr << json{{"error", "validation"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const vf::InvalidCorrelation& e) {
        std::cerr << json{{"error", "validation"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const vf::Error& e) {
        std::cerr << json{{"error", "solver"}, {"message", e.what()}}.dump() << "\n";
        return 3;
    }
}
