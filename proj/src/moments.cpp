#include "gridfreq/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridfreq/errors.hpp"

namespace gridfreq::moments {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Precomputed pieces of the closed-form solution for one (params, init) pair.
//
// Deterministic part, y = (mu_theta, mu_omega):
//   eigenvalues l1 < l2 < 0, eigenvectors (1, l_i);
//   y_h(t) = a1 (1,l1) e^{l1 t} + a2 (1,l2) e^{l2 t}.
// Stochastic part, y = (var_theta, cov, var_omega):
//   modes m = (l1+l2, 2 l1, 2 l2) with eigenvectors
//   w1 = (1, (l1+l2)/2, l1 l2), w2 = (1, l1, l1^2), w3 = (1, l2, l2^2).
struct AnalyticContext {
    double l1, l2;      // deterministic eigenvalues
    double den;         // l2 - l1
    double a1, a2;      // homogeneous mean coefficients
    double b1, b2, b3;  // homogeneous covariance mode coefficients
    double c1, c2, c3;  // D^2-driven inhomogeneous covariance coefficients
    double q, r;
};

// Stable eigenvalue pair: l2 through the product identity l1*l2 = 1/kappa^2
// avoids the sqrt cancellation for kappa >> tau.
void deterministic_eigenvalues(const SystemParams& p, double& l1, double& l2) {
    const double ratio = 2.0 * p.tau / p.kappa;
    const double s = std::sqrt((1.0 - ratio) * (1.0 + ratio));
    l1 = -(1.0 + s) / (2.0 * p.tau);
    l2 = -2.0 * p.tau / (p.kappa * p.kappa * (1.0 + s));
}

AnalyticContext make_context(const SystemParams& p, const MomentState& init) {
    p.validate();
    p.require_analytic_path();
    AnalyticContext ctx;
    deterministic_eigenvalues(p, ctx.l1, ctx.l2);
    ctx.den = ctx.l2 - ctx.l1;
    ctx.a1 = (ctx.l2 * init.mu_theta - init.mu_omega) / ctx.den;
    ctx.a2 = (init.mu_omega - ctx.l1 * init.mu_theta) / ctx.den;
    const double d2 = ctx.den * ctx.den;
    ctx.b1 = (-2.0 * ctx.l1 * ctx.l2 * init.var_theta +
              2.0 * (ctx.l1 + ctx.l2) * init.cov_theta_omega - 2.0 * init.var_omega) /
             d2;
    ctx.b2 = (ctx.l2 * ctx.l2 * init.var_theta - 2.0 * ctx.l2 * init.cov_theta_omega +
              init.var_omega) /
             d2;
    ctx.b3 = (ctx.l1 * ctx.l1 * init.var_theta - 2.0 * ctx.l1 * init.cov_theta_omega +
              init.var_omega) /
             d2;
    const double dd = p.D * p.D / d2;
    ctx.c1 = -2.0 * dd;
    ctx.c2 = dd;
    ctx.c3 = dd;
    ctx.q = p.q;
    ctx.r = p.r;
    return ctx;
}

// Assembles the state at time t from E1 = e^{l1 t}, E2 = e^{l2 t} and the
// corresponding expm1 values (passed separately so callers can choose
// between the exact and the recurrence evaluation of the exponentials).
MomentState eval_context(const AnalyticContext& ctx, double t, double E1, double E2,
                         double em1, double em2) {
    const double l1 = ctx.l1, l2 = ctx.l2;

    // Means: inhomogeneous integrals for P(t) = q + r t are
    //   g_i = (e^{l_i t} - 1)/l_i,  h_i = (e^{l_i t} - 1 - l_i t)/l_i^2.
    const double g1 = em1 / l1;
    const double g2 = em2 / l2;
    const double h1 = (em1 - l1 * t) / (l1 * l1);
    const double h2 = (em2 - l2 * t) / (l2 * l2);
    const double ci1 = -(ctx.q * g1 + ctx.r * h1) / ctx.den;
    const double ci2 = (ctx.q * g2 + ctx.r * h2) / ctx.den;

    MomentState out;
    out.mu_theta = ctx.a1 * E1 + ctx.a2 * E2 + ci1 + ci2;
    out.mu_omega = ctx.a1 * l1 * E1 + ctx.a2 * l2 * E2 + l1 * ci1 + l2 * ci2;

    // Covariances: modes m1 = l1+l2, m2 = 2 l1, m3 = 2 l2.
    const double m1 = l1 + l2, m2 = 2.0 * l1, m3 = 2.0 * l2;
    const double F1 = E1 * E2, F2 = E1 * E1, F3 = E2 * E2;
    const double G1 = (em1 + em2 + em1 * em2) / m1;  // expm1((l1+l2) t) / m1
    const double G2 = em1 * (E1 + 1.0) / m2;         // expm1(2 l1 t) / m2
    const double G3 = em2 * (E2 + 1.0) / m3;
    const double k1 = ctx.b1 * F1 + ctx.c1 * G1;
    const double k2 = ctx.b2 * F2 + ctx.c2 * G2;
    const double k3 = ctx.b3 * F3 + ctx.c3 * G3;
    out.var_theta = k1 + k2 + k3;
    out.cov_theta_omega = k1 * 0.5 * m1 + k2 * l1 + k3 * l2;
    out.var_omega = k1 * l1 * l2 + k2 * l1 * l1 + k3 * l2 * l2;
    return out;
}

// Variance scale used for the internal-consistency guard.
double variance_scale(const SystemParams& p, const MomentState& init) {
    return init.var_omega + p.D * p.D * p.tau * 0.5 +
           init.var_theta / (p.kappa * p.kappa) + std::abs(init.cov_theta_omega) / p.tau;
}

double guard_variance(double v, double scale) {
    if (v < -1e-9 * (scale + std::numeric_limits<double>::min())) {
        throw NegativeVariance("var_omega evaluated negative beyond tolerance");
    }
    return std::max(v, 0.0);
}

}  // namespace

void SystemParams::validate() const {
    // D = 0 is admitted as the noiseless limit (deterministic dynamics).
    if (!(tau > 0.0) || !(kappa > 0.0) || !(D >= 0.0)) {
        throw NonPositiveInput("SystemParams requires tau > 0, kappa > 0, D >= 0");
    }
    if (!std::isfinite(tau) || !std::isfinite(kappa) || !std::isfinite(D) ||
        !std::isfinite(q) || !std::isfinite(r)) {
        throw NonPositiveInput("SystemParams must be finite");
    }
}

bool SystemParams::analytic_path() const {
    return kappa > 2.0 * tau * (1.0 + std::numeric_limits<double>::epsilon());
}

void SystemParams::require_analytic_path() const {
    if (!analytic_path()) {
        throw DegenerateEigenvalues(
            "analytic solution requires kappa > 2*tau (distinct real eigenvalues)");
    }
}

void MomentState::validate() const {
    if (var_theta < 0.0 || var_omega < 0.0) {
        throw NegativeVariance("MomentState variances must be non-negative");
    }
    const double bound = var_theta * var_omega;
    const double c2 = cov_theta_omega * cov_theta_omega;
    if (c2 > bound * (1.0 + 1e-12) + 1e-300) {
        throw NegativeVariance("covariance violates the Cauchy-Schwarz bound");
    }
}

EigenSet eigenvalues(const SystemParams& p) {
    p.validate();
    p.require_analytic_path();
    double l1, l2;
    deterministic_eigenvalues(p, l1, l2);
    return EigenSet{l1, l2, -1.0 / p.tau, 2.0 * l1, 2.0 * l2};
}

MomentState solve_analytic(const SystemParams& p, const MomentState& init, double t) {
    if (!(t >= 0.0)) {
        throw TOutOfRange("solve_analytic requires t >= 0");
    }
    const AnalyticContext ctx = make_context(p, init);
    const double em1 = std::expm1(ctx.l1 * t);
    const double em2 = std::expm1(ctx.l2 * t);
    MomentState out = eval_context(ctx, t, em1 + 1.0, em2 + 1.0, em1, em2);
    const double scale = variance_scale(p, init);
    out.var_omega = guard_variance(out.var_omega, scale);
    out.var_theta = std::max(out.var_theta, 0.0);
    return out;
}

std::vector<MomentState> solve_analytic_series(const SystemParams& p,
                                               const MomentState& init, double dt,
                                               std::size_t n) {
    if (!(dt > 0.0)) {
        throw NonPositiveInput("solve_analytic_series requires dt > 0");
    }
    const AnalyticContext ctx = make_context(p, init);
    const double e1 = std::exp(ctx.l1 * dt);
    const double e2 = std::exp(ctx.l2 * dt);
    const double scale = variance_scale(p, init);
    std::vector<MomentState> out;
    out.reserve(n);
    double E1 = 1.0, E2 = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        MomentState s = eval_context(ctx, t, E1, E2, E1 - 1.0, E2 - 1.0);
        s.var_omega = guard_variance(s.var_omega, scale);
        s.var_theta = std::max(s.var_theta, 0.0);
        out.push_back(s);
        E1 *= e1;
        E2 *= e2;
    }
    return out;
}

double mean_omega(const SystemParams& p, const MomentState& init, double t) {
    return solve_analytic(p, init, t).mu_omega;
}

double var_omega(const SystemParams& p, const MomentState& init, double t) {
    return solve_analytic(p, init, t).var_omega;
}

GaussianMarginal marginal(const SystemParams& p, const MomentState& init, double t) {
    const MomentState s = solve_analytic(p, init, t);
    return GaussianMarginal{s.mu_omega, std::max(std::sqrt(s.var_omega), kSigmaFloor)};
}

std::vector<GaussianMarginal> marginal_series(const SystemParams& p,
                                              const MomentState& init, double dt,
                                              std::size_t n) {
    const std::vector<MomentState> states = solve_analytic_series(p, init, dt, n);
    std::vector<GaussianMarginal> out;
    out.reserve(states.size());
    for (const MomentState& s : states) {
        out.push_back({s.mu_omega, std::max(std::sqrt(s.var_omega), kSigmaFloor)});
    }
    return out;
}

MomentState moment_ode_rhs(const MomentState& state, const SystemParams& p, double t) {
    const double ik2 = 1.0 / (p.kappa * p.kappa);
    MomentState d;
    d.mu_theta = state.mu_omega;
    d.mu_omega = p.q + p.r * t - state.mu_omega / p.tau - state.mu_theta * ik2;
    d.var_theta = 2.0 * state.cov_theta_omega;
    d.var_omega =
        -2.0 * state.var_omega / p.tau - 2.0 * state.cov_theta_omega * ik2 + p.D * p.D;
    d.cov_theta_omega =
        state.var_omega - state.cov_theta_omega / p.tau - state.var_theta * ik2;
    return d;
}

namespace {

MomentState axpy(const MomentState& y, double a, const MomentState& d) {
    return MomentState{y.mu_theta + a * d.mu_theta, y.mu_omega + a * d.mu_omega,
                       y.var_theta + a * d.var_theta, y.var_omega + a * d.var_omega,
                       y.cov_theta_omega + a * d.cov_theta_omega};
}

}  // namespace

std::vector<MomentState> solve_numeric(const SystemParams& p, const MomentState& init,
                                       std::span<const double> grid) {
    p.validate();
    if (grid.empty()) {
        throw EmptySeries("solve_numeric requires a non-empty grid");
    }
    if (grid.front() != 0.0) {
        throw TOutOfRange("time grid must start at 0");
    }
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double dt = grid[k] - grid[k - 1];
        if (!(dt > 0.0)) {
            throw TOutOfRange("time grid must be strictly increasing");
        }
        if (dt > p.tau / 10.0) {
            throw StepTooLarge("RK4 step exceeds tau/10");
        }
    }
    std::vector<MomentState> out;
    out.reserve(grid.size());
    out.push_back(init);
    MomentState y = init;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double t = grid[k - 1];
        const double dt = grid[k] - grid[k - 1];
        const MomentState k1 = moment_ode_rhs(y, p, t);
        const MomentState k2 = moment_ode_rhs(axpy(y, 0.5 * dt, k1), p, t + 0.5 * dt);
        const MomentState k3 = moment_ode_rhs(axpy(y, 0.5 * dt, k2), p, t + 0.5 * dt);
        const MomentState k4 = moment_ode_rhs(axpy(y, dt, k3), p, t + dt);
        y.mu_theta += dt / 6.0 *
                      (k1.mu_theta + 2.0 * k2.mu_theta + 2.0 * k3.mu_theta + k4.mu_theta);
        y.mu_omega += dt / 6.0 *
                      (k1.mu_omega + 2.0 * k2.mu_omega + 2.0 * k3.mu_omega + k4.mu_omega);
        y.var_theta += dt / 6.0 * (k1.var_theta + 2.0 * k2.var_theta +
                                   2.0 * k3.var_theta + k4.var_theta);
        y.var_omega += dt / 6.0 * (k1.var_omega + 2.0 * k2.var_omega +
                                   2.0 * k3.var_omega + k4.var_omega);
        y.cov_theta_omega += dt / 6.0 *
                             (k1.cov_theta_omega + 2.0 * k2.cov_theta_omega +
                              2.0 * k3.cov_theta_omega + k4.cov_theta_omega);
        out.push_back(y);
    }
    return out;
}

double gaussian_nll_term(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return kHalfLog2Pi + std::log(sigma) + 0.5 * z * z;
}

double nll(const SystemParams& p, const MomentState& init,
           std::span<const double> omega_series, double dt) {
    if (omega_series.empty()) {
        throw EmptySeries("nll requires a non-empty omega series");
    }
    if (!(dt > 0.0)) {
        throw NonPositiveInput("nll requires dt > 0");
    }
    const std::vector<GaussianMarginal> m =
        marginal_series(p, init, dt, omega_series.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < omega_series.size(); ++k) {
        sum += gaussian_nll_term(omega_series[k], m[k].mu, m[k].sigma);
    }
    return sum;
}

EffectiveParams rescale_physical(double M, double K1, double K2, double D_bar) {
    if (!(M > 0.0) || !(K1 > 0.0) || !(K2 > 0.0) || !(D_bar > 0.0)) {
        throw NonPositiveInput("rescale_physical requires positive inputs");
    }
    constexpr double kTwoPi = 6.28318530717958647693;
    return EffectiveParams{kTwoPi * M / K1, std::sqrt(kTwoPi * M / K2), D_bar / M};
}

EffectiveParams from_per_unit(double K1_pu, double K2_pu, double P0, double f_ref,
                              double M, double D_bar) {
    if (!(P0 > 0.0) || !(f_ref > 0.0)) {
        throw NonPositiveInput("from_per_unit requires positive P0 and f_ref");
    }
    return rescale_physical(M, K1_pu * P0 / f_ref, K2_pu * P0 / f_ref, D_bar);
}

double zero_mean_ramp_rate(double q, double t_max) {
    if (!(t_max > 0.0)) {
        throw NonPositiveInput("zero_mean_ramp_rate requires t_max > 0");
    }
    return -2.0 * q / t_max;
}

}  // namespace gridfreq::moments
