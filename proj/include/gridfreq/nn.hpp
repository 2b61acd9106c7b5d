#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "gridfreq/dataset.hpp"
#include "gridfreq/moments.hpp"
#include "gridfreq/rng.hpp"

namespace gridfreq::nn {

inline constexpr std::size_t kThetaDim = 8;

enum class Activation { kSigmoid, kTanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct MlpConfig {
    std::size_t input_dim = 0;
    std::size_t n_hidden_layers = 1;   ///< N_h
    std::size_t units_per_layer = 64;  ///< N_u
    Activation activation = Activation::kTanh;
    double dropout_rate = 0.0;         ///< hidden layers only, inverted convention

    void validate() const;
};

/// Dense feed-forward network weights. Layer l maps layer input a to
/// w[l] * a + b[l]; hidden layers apply the activation (and dropout when
/// training), the output layer is linear with kThetaDim units.
struct Weights {
    MlpConfig config;
    std::vector<Eigen::MatrixXd> w;  ///< (out x in) per layer
    std::vector<Eigen::VectorXd> b;

    std::size_t n_layers() const { return w.size(); }
    void validate() const;
};

/// Glorot-uniform initialisation: entries uniform in
/// +-sqrt(6/(fan_in+fan_out)), biases zero, deterministic per seed.
Weights glorot_init(const MlpConfig& cfg, std::uint64_t seed);

/// Scaling and constraint layer configuration (s2, s4 have no scaling).
struct ConstraintSpec {
    double s1 = 0.01, s3 = 0.1, s5 = 100.0, s6 = 0.01, s7 = 1e-3, s8 = 1e-6;
    double v1 = 1e-3, v3 = 1e-3, v4 = 10.0, v5 = 30.0, v6 = 1e-4;
    double delta = 0.999;

    void validate() const;
    /// All scalings 1, minima and delta unchanged ("no scaling" variant).
    static ConstraintSpec none();
};

/// The eight constrained outputs: initial covariances plus the dynamical
/// system parameters of one interval.
struct ThetaVector {
    double sigma_theta0;  ///< [rad s]
    double cov0;          ///< [rad^2]
    double sigma_omega0;  ///< [rad/s]
    double tau;           ///< [s]
    double kappa;         ///< [s]
    double D;             ///< [s^-3/2]
    double q;             ///< [s^-2]
    double r;             ///< [s^-3]

    double operator[](std::size_t j) const;
    double& operator[](std::size_t j);

    moments::SystemParams system() const { return {tau, kappa, D, q, r}; }
    /// Moment state at t = t_i from the data-derived means.
    moments::MomentState initial_state(double mu_theta0, double mu_omega0) const;
};

/// Canonical parameter names in ThetaVector order.
std::span<const char* const> theta_names();

/// Constraint layer theta_j = nu_j(u). Softplus floors for the scales,
/// tanh for the covariance bound |cov0| <= delta * sigma_theta0 * sigma_omega0,
/// a sigmoid for v4 < tau < kappa/2, linear scalings for q and r.
/// Evaluation order 1,3,2,5,4,6,7,8 resolves the cross-dependencies.
ThetaVector constrain(const Eigen::VectorXd& u, const ConstraintSpec& spec);

/// Jacobian d theta / d u (8x8; rows follow ThetaVector order). Non-zero
/// off-diagonals: (2,1), (2,3) through the covariance product and (4,5)
/// through the kappa/2 upper bound.
Eigen::Matrix<double, 8, 8> constrain_jacobian(const Eigen::VectorXd& u,
                                               const ConstraintSpec& spec);

/// Per-layer activations recorded during a forward pass, as needed for
/// backpropagation. mask[l] holds the inverted-dropout factors (0 or
/// 1/keep) of hidden layer l; empty when dropout was inactive.
struct ForwardCache {
    std::vector<Eigen::VectorXd> inputs;  ///< input to each layer
    std::vector<Eigen::VectorXd> pre;     ///< pre-activation per layer
    std::vector<Eigen::VectorXd> mask;    ///< dropout factors per hidden layer
};

/// Forward pass for one feature vector (normalised). With training=true,
/// inverted dropout is applied to hidden activations using `gen`; inference
/// needs no rescaling.
Eigen::VectorXd forward(const Weights& w, const Eigen::VectorXd& x, bool training = false,
                        rng::SplitMix64* gen = nullptr);

Eigen::VectorXd forward_cached(const Weights& w, const Eigen::VectorXd& x, bool training,
                               rng::SplitMix64* gen, ForwardCache& cache);

/// Inference forward pass over a batch (columns = samples).
Eigen::MatrixXd forward_batch(const Weights& w, const Eigen::MatrixXd& X);

struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    static Gradients zeros_like(const Weights& weights);
    void add(const Gradients& other);
    void scale(double factor);
};

/// Backpropagates dL/du through the cached forward pass, accumulating into
/// `out` (which must be shaped like the weights).
void backprop(const Weights& w, const ForwardCache& cache, const Eigen::VectorXd& dl_du,
              Gradients& out);

/// NLL of one interval under theta: Gaussian marginals of the closed-form
/// solution on the 1 Hz grid, first n_samples points of the stored series.
double interval_nll(const ThetaVector& theta, const IntervalSample& sample,
                    std::size_t n_samples);

/// dNLL/dtheta by central finite differences on the closed-form solution,
/// step h_j = 1e-6 * max(1, |theta_j|).
Eigen::Matrix<double, 8, 1> interval_nll_grad_theta(const ThetaVector& theta,
                                                    const IntervalSample& sample,
                                                    std::size_t n_samples);

struct GradientOptions {
    std::size_t n_samples = 900;   ///< omega samples per interval (1 Hz)
    bool training = true;          ///< apply dropout
    std::uint64_t dropout_seed = 0;  ///< combined with sample index per mask
    unsigned threads = 1;          ///< fixed-chunk parallelism, result-invariant
};

struct BatchGradient {
    Gradients grads;      ///< gradient of the mean per-interval NLL
    double mean_nll = 0;  ///< mean per-interval NLL over the batch
};

/// Gradient of the batch-mean NLL with respect to all weights:
/// dNLL/dtheta (finite differences) composed with the constraint Jacobian
/// and network backpropagation. X columns must be the normalised features
/// of `batch` in order. Throws NonFiniteLoss on a non-finite loss.
BatchGradient nll_gradient(const Weights& w, const ConstraintSpec& spec,
                           const Eigen::MatrixXd& X,
                           std::span<const IntervalSample* const> batch,
                           const GradientOptions& opts);

/// ADAM optimiser state; step counts the number of updates applied.
struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    long step = 0;

    static AdamState zeros_like(const Weights& weights);
};

/// Standard ADAM update with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and
/// bias correction.
void adam_step(Weights& w, const Gradients& grads, AdamState& state, double lr);

}  // namespace gridfreq::nn
