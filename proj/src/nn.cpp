#include "gridfreq/nn.hpp"

#include <array>
#include <cmath>
#include <future>
#include <string>

#include "gridfreq/errors.hpp"

namespace gridfreq::nn {

namespace {

double softplus(double x) {
    if (x > 30.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double apply_activation(Activation a, double x) {
    return a == Activation::kTanh ? std::tanh(x) : sigmoid(x);
}

double activation_derivative(Activation a, double pre) {
    if (a == Activation::kTanh) {
        const double t = std::tanh(pre);
        return 1.0 - t * t;
    }
    const double s = sigmoid(pre);
    return s * (1.0 - s);
}

constexpr std::array<const char*, kThetaDim> kThetaNames = {
    "sigma_theta0", "cov0", "sigma_omega0", "tau", "kappa", "D", "q", "r"};

}  // namespace

const char* activation_name(Activation a) {
    return a == Activation::kTanh ? "tanh" : "sigmoid";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::kTanh;
    if (name == "sigmoid") return Activation::kSigmoid;
    throw ConfigError("unknown activation: " + name);
}

void MlpConfig::validate() const {
    if (input_dim < 1 || n_hidden_layers < 1 || units_per_layer < 1) {
        throw ConfigError("MlpConfig requires input_dim, N_h, N_u >= 1");
    }
    if (!(dropout_rate >= 0.0) || dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must lie in [0, 1)");
    }
}

void Weights::validate() const {
    config.validate();
    if (w.size() != config.n_hidden_layers + 1 || b.size() != w.size()) {
        throw DimensionMismatch("weight layer count does not match config");
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(
            l == 0 ? config.input_dim : config.units_per_layer);
        const auto out = static_cast<Eigen::Index>(
            l + 1 == w.size() ? kThetaDim : config.units_per_layer);
        if (w[l].rows() != out || w[l].cols() != in || b[l].size() != out) {
            throw DimensionMismatch("weight shapes do not match config");
        }
        if (!w[l].allFinite() || !b[l].allFinite()) {
            throw NumericError("non-finite weights");
        }
    }
}

Weights glorot_init(const MlpConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Weights weights;
    weights.config = cfg;
    rng::SplitMix64 gen(seed);
    const std::size_t n_layers = cfg.n_hidden_layers + 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t fan_in = l == 0 ? cfg.input_dim : cfg.units_per_layer;
        const std::size_t fan_out = l + 1 == n_layers ? kThetaDim : cfg.units_per_layer;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = gen.next_uniform(-limit, limit);
            }
        }
        weights.w.push_back(std::move(w));
        weights.b.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out)));
    }
    return weights;
}

void ConstraintSpec::validate() const {
    const double scalings[] = {s1, s3, s5, s6, s7, s8};
    for (double s : scalings) {
        if (!(s > 0.0)) throw ConfigError("constraint scalings must be positive");
    }
    const double minima[] = {v1, v3, v4, v5, v6};
    for (double v : minima) {
        if (!(v > 0.0)) throw ConfigError("constraint minima must be positive");
    }
    if (!(delta > 0.0) || !(delta < 1.0)) {
        throw ConfigError("safety factor delta must lie in (0, 1)");
    }
    if (!(v4 < v5 / 2.0)) {
        throw ConfigError("constraint layer requires v4 < v5/2");
    }
}

ConstraintSpec ConstraintSpec::none() {
    ConstraintSpec spec;
    spec.s1 = spec.s3 = spec.s5 = spec.s6 = spec.s7 = spec.s8 = 1.0;
    return spec;
}

double ThetaVector::operator[](std::size_t j) const {
    return const_cast<ThetaVector&>(*this)[j];
}

double& ThetaVector::operator[](std::size_t j) {
    switch (j) {
        case 0: return sigma_theta0;
        case 1: return cov0;
        case 2: return sigma_omega0;
        case 3: return tau;
        case 4: return kappa;
        case 5: return D;
        case 6: return q;
        case 7: return r;
        default: throw DimensionMismatch("ThetaVector index out of range");
    }
}

std::span<const char* const> theta_names() {
    return {kThetaNames.data(), kThetaNames.size()};
}

moments::MomentState ThetaVector::initial_state(double mu_theta0,
                                                double mu_omega0) const {
    moments::MomentState s;
    s.mu_theta = mu_theta0;
    s.mu_omega = mu_omega0;
    s.var_theta = sigma_theta0 * sigma_theta0;
    s.var_omega = sigma_omega0 * sigma_omega0;
    s.cov_theta_omega = cov0;
    return s;
}

ThetaVector constrain(const Eigen::VectorXd& u, const ConstraintSpec& spec) {
    if (u.size() != static_cast<Eigen::Index>(kThetaDim)) {
        throw DimensionMismatch("constrain expects an 8-vector");
    }
    ThetaVector theta{};
    theta.sigma_theta0 = softplus(u[0]) * spec.s1 + spec.v1;                    // nu_1
    theta.sigma_omega0 = softplus(u[2]) * spec.s3 + spec.v3;                    // nu_3
    theta.cov0 = spec.delta * std::tanh(u[1]) * theta.sigma_theta0 *
                 theta.sigma_omega0;                                            // nu_2
    theta.kappa = softplus(u[4]) * spec.s5 + spec.v5;                           // nu_5
    theta.tau = spec.v4 + spec.delta * sigmoid(u[3]) *
                              (theta.kappa / 2.0 - spec.v4);                    // nu_4
    theta.D = softplus(u[5]) * spec.s6 + spec.v6;                               // nu_6
    theta.q = u[6] * spec.s7;                                                   // nu_7
    theta.r = u[7] * spec.s8;                                                   // nu_8
    return theta;
}

Eigen::Matrix<double, 8, 8> constrain_jacobian(const Eigen::VectorXd& u,
                                               const ConstraintSpec& spec) {
    if (u.size() != static_cast<Eigen::Index>(kThetaDim)) {
        throw DimensionMismatch("constrain_jacobian expects an 8-vector");
    }
    const double nu1 = softplus(u[0]) * spec.s1 + spec.v1;
    const double nu3 = softplus(u[2]) * spec.s3 + spec.v3;
    const double nu5 = softplus(u[4]) * spec.s5 + spec.v5;
    const double d_nu1 = sigmoid(u[0]) * spec.s1;
    const double d_nu3 = sigmoid(u[2]) * spec.s3;
    const double d_nu5 = sigmoid(u[4]) * spec.s5;
    const double t2 = std::tanh(u[1]);
    const double sig4 = sigmoid(u[3]);

    Eigen::Matrix<double, 8, 8> jac = Eigen::Matrix<double, 8, 8>::Zero();
    jac(0, 0) = d_nu1;
    jac(1, 0) = spec.delta * t2 * d_nu1 * nu3;
    jac(1, 1) = spec.delta * (1.0 - t2 * t2) * nu1 * nu3;
    jac(1, 2) = spec.delta * t2 * nu1 * d_nu3;
    jac(2, 2) = d_nu3;
    jac(3, 3) = spec.delta * sig4 * (1.0 - sig4) * (nu5 / 2.0 - spec.v4);
    jac(3, 4) = spec.delta * sig4 * d_nu5 / 2.0;
    jac(4, 4) = d_nu5;
    jac(5, 5) = sigmoid(u[5]) * spec.s6;
    jac(6, 6) = spec.s7;
    jac(7, 7) = spec.s8;
    return jac;
}

Eigen::VectorXd forward_cached(const Weights& w, const Eigen::VectorXd& x, bool training,
                               rng::SplitMix64* gen, ForwardCache& cache) {
    if (x.size() != static_cast<Eigen::Index>(w.config.input_dim)) {
        throw DimensionMismatch("input dimension mismatch");
    }
    const std::size_t n_layers = w.n_layers();
    const bool dropout = training && w.config.dropout_rate > 0.0;
    if (dropout && gen == nullptr) {
        throw ConfigError("training-mode forward with dropout requires an RNG");
    }
    cache.inputs.assign(n_layers, {});
    cache.pre.assign(n_layers, {});
    cache.mask.assign(n_layers, {});

    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        cache.inputs[l] = a;
        Eigen::VectorXd pre = w.w[l] * a + w.b[l];
        cache.pre[l] = pre;
        if (l + 1 == n_layers) {
            a = std::move(pre);  // linear output head, no dropout
            break;
        }
        Eigen::VectorXd act(pre.size());
        for (Eigen::Index i = 0; i < pre.size(); ++i) {
            act[i] = apply_activation(w.config.activation, pre[i]);
        }
        if (dropout) {
            const double keep = 1.0 - w.config.dropout_rate;
            Eigen::VectorXd mask(act.size());
            for (Eigen::Index i = 0; i < act.size(); ++i) {
                mask[i] = gen->next_unit() >= w.config.dropout_rate ? 1.0 / keep : 0.0;
            }
            cache.mask[l] = mask;
            act = act.cwiseProduct(mask);
        }
        a = std::move(act);
    }
    return a;
}

Eigen::VectorXd forward(const Weights& w, const Eigen::VectorXd& x, bool training,
                        rng::SplitMix64* gen) {
    ForwardCache cache;
    return forward_cached(w, x, training, gen, cache);
}

Eigen::MatrixXd forward_batch(const Weights& w, const Eigen::MatrixXd& X) {
    if (X.rows() != static_cast<Eigen::Index>(w.config.input_dim)) {
        throw DimensionMismatch("input dimension mismatch");
    }
    Eigen::MatrixXd a = X;
    const std::size_t n_layers = w.n_layers();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd pre = (w.w[l] * a).colwise() + w.b[l];
        if (l + 1 == n_layers) {
            return pre;
        }
        a = pre.unaryExpr([&](double v) { return apply_activation(w.config.activation, v); });
    }
    return a;
}

Gradients Gradients::zeros_like(const Weights& weights) {
    Gradients g;
    for (std::size_t l = 0; l < weights.n_layers(); ++l) {
        g.w.push_back(Eigen::MatrixXd::Zero(weights.w[l].rows(), weights.w[l].cols()));
        g.b.push_back(Eigen::VectorXd::Zero(weights.b[l].size()));
    }
    return g;
}

void Gradients::add(const Gradients& other) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] += other.w[l];
        b[l] += other.b[l];
    }
}

void Gradients::scale(double factor) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] *= factor;
        b[l] *= factor;
    }
}

void backprop(const Weights& w, const ForwardCache& cache, const Eigen::VectorXd& dl_du,
              Gradients& out) {
    const std::size_t n_layers = w.n_layers();
    Eigen::VectorXd delta = dl_du;  // gradient w.r.t. the layer pre-activation
    for (std::size_t l = n_layers; l-- > 0;) {
        out.w[l] += delta * cache.inputs[l].transpose();
        out.b[l] += delta;
        if (l == 0) break;
        Eigen::VectorXd onto_prev = w.w[l].transpose() * delta;
        if (cache.mask[l - 1].size() > 0) {
            onto_prev = onto_prev.cwiseProduct(cache.mask[l - 1]);
        }
        const Eigen::VectorXd& pre = cache.pre[l - 1];
        delta.resize(pre.size());
        for (Eigen::Index i = 0; i < pre.size(); ++i) {
            delta[i] = onto_prev[i] * activation_derivative(w.config.activation, pre[i]);
        }
    }
}

double interval_nll(const ThetaVector& theta, const IntervalSample& sample,
                    std::size_t n_samples) {
    if (n_samples == 0 || n_samples > sample.omega.size()) {
        throw DimensionMismatch("n_samples exceeds the stored omega series");
    }
    const moments::SystemParams p = theta.system();
    const moments::MomentState init =
        theta.initial_state(sample.mu_theta0, sample.mu_omega0);
    return moments::nll(p, init, {sample.omega.data(), n_samples}, 1.0);
}

Eigen::Matrix<double, 8, 1> interval_nll_grad_theta(const ThetaVector& theta,
                                                    const IntervalSample& sample,
                                                    std::size_t n_samples) {
    Eigen::Matrix<double, 8, 1> grad;
    for (std::size_t j = 0; j < kThetaDim; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
        ThetaVector plus = theta, minus = theta;
        plus[j] += h;
        minus[j] -= h;
        grad[static_cast<Eigen::Index>(j)] =
            (interval_nll(plus, sample, n_samples) -
             interval_nll(minus, sample, n_samples)) /
            (2.0 * h);
    }
    return grad;
}

BatchGradient nll_gradient(const Weights& w, const ConstraintSpec& spec,
                           const Eigen::MatrixXd& X,
                           std::span<const IntervalSample* const> batch,
                           const GradientOptions& opts) {
    if (batch.empty()) {
        throw EmptySeries("nll_gradient requires a non-empty batch");
    }
    if (X.cols() != static_cast<Eigen::Index>(batch.size())) {
        throw DimensionMismatch("feature matrix does not match the batch");
    }

    struct Partial {
        Gradients grads;
        double loss = 0.0;
    };
    auto run_range = [&](std::size_t begin, std::size_t end) {
        Partial part{Gradients::zeros_like(w), 0.0};
        ForwardCache cache;
        for (std::size_t j = begin; j < end; ++j) {
            const IntervalSample& sample = *batch[j];
            rng::SplitMix64 gen =
                rng::SplitMix64::substream(opts.dropout_seed, sample.index);
            const Eigen::VectorXd u =
                forward_cached(w, X.col(static_cast<Eigen::Index>(j)), opts.training,
                               &gen, cache);
            const ThetaVector theta = constrain(u, spec);
            part.loss += interval_nll(theta, sample, opts.n_samples);
            const Eigen::Matrix<double, 8, 1> g_theta =
                interval_nll_grad_theta(theta, sample, opts.n_samples);
            const Eigen::VectorXd dl_du =
                constrain_jacobian(u, spec).transpose() * g_theta;
            backprop(w, cache, dl_du, part.grads);
        }
        return part;
    };

    // Fixed chunk size and in-order reduction keep the floating-point
    // summation independent of the thread count, so training stays
    // bit-reproducible for any opts.threads.
    constexpr std::size_t kChunk = 64;
    BatchGradient out{Gradients::zeros_like(w), 0.0};
    double loss_sum = 0.0;
    if (opts.threads <= 1) {
        for (std::size_t begin = 0; begin < batch.size(); begin += kChunk) {
            const Partial part = run_range(begin, std::min(begin + kChunk, batch.size()));
            out.grads.add(part.grads);
            loss_sum += part.loss;
        }
    } else {
        std::vector<std::future<Partial>> futures;
        for (std::size_t begin = 0; begin < batch.size(); begin += kChunk) {
            const std::size_t end = std::min(begin + kChunk, batch.size());
            futures.push_back(std::async(std::launch::async, run_range, begin, end));
        }
        for (auto& f : futures) {
            const Partial part = f.get();
            out.grads.add(part.grads);
            loss_sum += part.loss;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    out.grads.scale(inv_n);
    out.mean_nll = loss_sum * inv_n;
    if (!std::isfinite(out.mean_nll)) {
        throw NonFiniteLoss("batch NLL is not finite");
    }
    return out;
}

AdamState AdamState::zeros_like(const Weights& weights) {
    AdamState s;
    for (std::size_t l = 0; l < weights.n_layers(); ++l) {
        s.mw.push_back(Eigen::MatrixXd::Zero(weights.w[l].rows(), weights.w[l].cols()));
        s.vw.push_back(Eigen::MatrixXd::Zero(weights.w[l].rows(), weights.w[l].cols()));
        s.mb.push_back(Eigen::VectorXd::Zero(weights.b[l].size()));
        s.vb.push_back(Eigen::VectorXd::Zero(weights.b[l].size()));
    }
    return s;
}

void adam_step(Weights& w, const Gradients& grads, AdamState& state, double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    if (grads.w.size() != w.n_layers()) {
        throw DimensionMismatch("gradient shapes do not match weights");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < w.n_layers(); ++l) {
        state.mw[l] = kBeta1 * state.mw[l] + (1.0 - kBeta1) * grads.w[l];
        state.vw[l] =
            kBeta2 * state.vw[l].array() + (1.0 - kBeta2) * grads.w[l].array().square();
        state.mb[l] = kBeta1 * state.mb[l] + (1.0 - kBeta1) * grads.b[l];
        state.vb[l] =
            kBeta2 * state.vb[l].array() + (1.0 - kBeta2) * grads.b[l].array().square();
        w.w[l].array() -= lr * (state.mw[l].array() / bc1) /
                          ((state.vw[l].array() / bc2).sqrt() + kEps);
        w.b[l].array() -= lr * (state.mb[l].array() / bc1) /
                          ((state.vb[l].array() / bc2).sqrt() + kEps);
    }
}

}  // namespace gridfreq::nn
