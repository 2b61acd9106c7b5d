#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gridfreq::moments {

/// Floor on the marginal standard deviation [rad/s]. Keeps every Gaussian
/// log-density (and hence the NLL) finite even for degenerate predictions.
inline constexpr double kSigmaFloor = 1e-6;

/// Effective dynamical parameters of one 15-minute interval.
///
/// The grid frequency deviation omega = 2*pi*(f - f_ref) and its running
/// integral theta follow the linear SDE
///
///   dtheta = omega dt
///   domega = (q + r t - omega/tau - theta/kappa^2) dt + D dW_t
///
/// where -omega/tau is proportional (primary) control, -theta/kappa^2 is
/// integral (secondary) control and q + r t is the deterministic power
/// mismatch of the interval. All parameters are effective, i.e. rescaled
/// by the aggregated inertia.
struct SystemParams {
    double tau;    ///< primary control time constant [s]
    double kappa;  ///< intrinsic secondary control time scale [s]
    double D;      ///< noise amplitude [s^-3/2]
    double q;      ///< power step [s^-2]
    double r;      ///< power drift [s^-3]

    /// Throws NonPositiveInput unless tau, kappa > 0 and D >= 0 (D = 0 is
    /// the noiseless limit).
    void validate() const;

    /// True when kappa > 2*tau with a machine-epsilon guard, i.e. both
    /// deterministic eigenvalues are real and distinct and the closed-form
    /// solution applies.
    bool analytic_path() const;

    /// Throws DegenerateEigenvalues when !analytic_path().
    void require_analytic_path() const;
};

/// Means and (co)variances of the Gaussian solution at one instant.
struct MomentState {
    double mu_theta = 0.0;         ///< [rad s]
    double mu_omega = 0.0;         ///< [rad/s]
    double var_theta = 0.0;        ///< [rad^2 s^2]
    double var_omega = 0.0;        ///< [rad^2/s^2]
    double cov_theta_omega = 0.0;  ///< [rad^2]

    /// Throws NegativeVariance on a negative variance or a covariance
    /// violating cov^2 <= var_theta * var_omega (with a small tolerance).
    void validate() const;
};

/// Marginal distribution of omega at one instant; sigma is floored.
struct GaussianMarginal {
    double mu;     ///< [rad/s]
    double sigma;  ///< [rad/s], >= kSigmaFloor
};

/// The five decay rates of the moment equations.
///
/// Deterministic pair: lambda_{d,1/2} = -+ (1/2tau) sqrt(1 - 4 tau^2/kappa^2) - 1/(2tau).
/// Stochastic triple: lambda_{s,1} = -1/tau, lambda_{s,2/3} = 2*lambda_{d,1/2}.
struct EigenSet {
    double lambda_d1;  ///< fast deterministic rate [1/s]
    double lambda_d2;  ///< slow deterministic rate [1/s]
    double lambda_s1;  ///< [1/s]
    double lambda_s2;  ///< [1/s]
    double lambda_s3;  ///< [1/s]
};

/// Closed-form eigenvalues; requires the analytic path (kappa > 2*tau).
EigenSet eigenvalues(const SystemParams& p);

/// Full closed-form moment state at time t >= 0 for P(t) = q + r*t.
///
/// Homogeneous part via the eigendecomposition of the moment matrices,
/// inhomogeneous part via the exact integrals for an affine drift. All
/// exponents are <= 0 on the analytic path, so evaluation is stable for
/// arbitrarily large t.
MomentState solve_analytic(const SystemParams& p, const MomentState& init, double t);

/// Closed-form states on the uniform grid t_k = k*dt, k = 0..n-1.
///
/// Single pair of exp() calls, then an exponential recurrence; agrees with
/// pointwise solve_analytic to ~1e-12. This is the fast path used by the
/// likelihood.
std::vector<MomentState> solve_analytic_series(const SystemParams& p,
                                               const MomentState& init, double dt,
                                               std::size_t n);

/// mu_omega(t) of the closed-form solution.
double mean_omega(const SystemParams& p, const MomentState& init, double t);

/// sigma_omega^2(t) of the closed-form solution; guarded to be >= 0.
double var_omega(const SystemParams& p, const MomentState& init, double t);

/// (mean_omega, max(sqrt(var_omega), kSigmaFloor)) at time t.
GaussianMarginal marginal(const SystemParams& p, const MomentState& init, double t);

/// Floored marginals on the uniform grid t_k = k*dt (fast path).
std::vector<GaussianMarginal> marginal_series(const SystemParams& p,
                                              const MomentState& init, double dt,
                                              std::size_t n);

/// Right-hand side of the moment ODEs with P(t) = q + r*t:
///
///   mu_theta'  = mu_omega
///   mu_omega'  = P(t) - mu_omega/tau - mu_theta/kappa^2
///   var_theta' = 2 cov
///   var_omega' = -2 var_omega/tau - 2 cov/kappa^2 + D^2
///   cov'       = var_omega - cov/tau - var_theta/kappa^2
MomentState moment_ode_rhs(const MomentState& state, const SystemParams& p, double t);

/// Fixed-step RK4 integration of moment_ode_rhs over `grid`.
///
/// Works for any positive tau, kappa including the oscillatory regime
/// kappa < 2*tau where the closed form does not apply. The grid must be
/// non-empty, start at 0 and be strictly increasing; every step must
/// satisfy dt <= tau/10 (StepTooLarge otherwise). Returns one state per
/// grid point, the first being `init`.
std::vector<MomentState> solve_numeric(const SystemParams& p, const MomentState& init,
                                       std::span<const double> grid);

/// -log N(x; mu, sigma) for one observation.
double gaussian_nll_term(double x, double mu, double sigma);

/// Negative log-likelihood of `omega_series` sampled at t_k = k*dt under
/// the closed-form marginals. Throws EmptySeries / NonPositiveInput.
double nll(const SystemParams& p, const MomentState& init,
           std::span<const double> omega_series, double dt);

/// Effective (tau, kappa, D) from physical constants.
struct EffectiveParams {
    double tau;    ///< [s]
    double kappa;  ///< [s]
    double D;      ///< [s^-3/2]
};

/// Rescales the aggregated swing equation by the inertia M:
/// 1/tau = K1/(2 pi M), 1/kappa^2 = K2/(2 pi M), D = D_bar/M.
/// The dynamics are invariant under a common scaling of M, which is why
/// only these ratios are identifiable.
EffectiveParams rescale_physical(double M, double K1, double K2, double D_bar);

/// Per-unit helper: K1 = K1_pu * P0 / f_ref and K2 = K2_pu * P0 / f_ref,
/// then rescale_physical.
EffectiveParams from_per_unit(double K1_pu, double K2_pu, double P0, double f_ref,
                              double M, double D_bar);

/// Ramp rate with zero interval-averaged mismatch: <q + r t> = 0 over
/// [0, t_max] gives r = -2 q / t_max.
double zero_mean_ramp_rate(double q, double t_max);

}  // namespace gridfreq::moments
