#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tilt/dataset.hpp"
#include "tilt/error.hpp"
#include "tilt/loss.hpp"
#include "tilt/numeric.hpp"
#include "tilt/random.hpp"

namespace tilt {

enum class model_family { linear_squared, logistic_crossentropy, mlp };
enum class activation_kind { relu, tanh };

// A differentiable model family; parameters are a flat vector whose layout is
// fixed by the family and dimensions (see param_count).
struct ModelSpec {
    model_family family = model_family::linear_squared;
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_layers;  // empty for linear/logistic
    activation_kind activation = activation_kind::relu;
    // Linear/logistic intercept as an appended constant feature. MLPs always
    // carry per-layer biases; the flag must stay true for them.
    bool fit_intercept = true;

    void validate() const {
        if (input_dim < 1) throw invalid_parameter("input_dim must be >= 1");
        if (family == model_family::mlp) {
            if (hidden_layers.empty())
                throw invalid_parameter("mlp requires at least one hidden layer");
            for (std::size_t w : hidden_layers)
                if (w < 1) throw invalid_parameter("hidden layer width must be >= 1");
            if (!fit_intercept)
                throw invalid_parameter("mlp models always carry bias terms");
        } else if (!hidden_layers.empty()) {
            throw invalid_parameter("hidden layers are only valid for mlp");
        }
    }

    std::size_t param_count() const {
        if (family != model_family::mlp)
            return input_dim + (fit_intercept ? 1 : 0);
        std::size_t count = 0;
        std::size_t in = input_dim;
        for (std::size_t width : hidden_layers) {
            count += width * in + width;
            in = width;
        }
        count += in + 1;  // output weights + bias
        return count;
    }

    std::string id() const {
        switch (family) {
            case model_family::linear_squared: return "linear";
            case model_family::logistic_crossentropy: return "logistic";
            case model_family::mlp: return "mlp" + std::to_string(hidden_layers.size());
        }
        return "?";
    }

    // Zeros for linear/logistic; uniform +-1/sqrt(fan_in) per layer for mlp.
    std::vector<double> initial_params(std::uint64_t seed) const {
        validate();
        std::vector<double> theta(param_count(), 0.0);
        if (family != model_family::mlp) return theta;
        Rng rng(seed);
        std::size_t pos = 0;
        std::size_t in = input_dim;
        auto fill_layer = [&](std::size_t out_width, std::size_t fan_in) {
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t k = 0; k < out_width * fan_in + out_width; ++k)
                theta[pos++] = rng.uniform(-bound, bound);
        };
        for (std::size_t width : hidden_layers) {
            fill_layer(width, in);
            in = width;
        }
        fill_layer(1, in);
        return theta;
    }
};

struct SampleLossGrad {
    double loss;
    std::vector<double> grad;
};

namespace detail {

inline constexpr double prob_clamp = 1e-12;

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double crossentropy(double prob, double y) {
    double p = std::clamp(prob, prob_clamp, 1.0 - prob_clamp);
    return -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

inline double activate(activation_kind a, double z) {
    return a == activation_kind::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

inline double activate_derivative(activation_kind a, double z) {
    if (a == activation_kind::relu) return z > 0.0 ? 1.0 : 0.0;
    double t = std::tanh(z);
    return 1.0 - t * t;
}

inline void check_sample(const ModelSpec& spec, std::span<const double> theta,
                         std::span<const double> x, double y) {
    if (x.size() != spec.input_dim)
        throw dimension_error("feature vector has " + std::to_string(x.size()) +
                              " entries, model expects " +
                              std::to_string(spec.input_dim));
    if (theta.size() != spec.param_count())
        throw dimension_error("parameter vector has " + std::to_string(theta.size()) +
                              " entries, model expects " +
                              std::to_string(spec.param_count()));
    if (!std::isfinite(y)) throw invalid_input("target is not finite");
    if (spec.family != model_family::linear_squared && y != 0.0 && y != 1.0)
        throw invalid_input("classification target must be 0 or 1");
}

// theta^T x plus optional intercept (last parameter).
inline double affine_score(const ModelSpec& spec, std::span<const double> theta,
                           std::span<const double> x) {
    KahanSum<> acc;
    for (std::size_t j = 0; j < x.size(); ++j) acc.add(theta[j] * x[j]);
    if (spec.fit_intercept) acc.add(theta[x.size()]);
    return acc.value();
}

// Scratch buffers for mlp forward/backward; reusable across samples.
struct MlpWorkspace {
    std::vector<std::vector<double>> pre;    // z_l per hidden layer
    std::vector<std::vector<double>> act;    // a_l per hidden layer
    std::vector<std::vector<double>> delta;  // backprop residuals

    void resize(const ModelSpec& spec) {
        pre.resize(spec.hidden_layers.size());
        act.resize(spec.hidden_layers.size());
        delta.resize(spec.hidden_layers.size());
        for (std::size_t l = 0; l < spec.hidden_layers.size(); ++l) {
            pre[l].resize(spec.hidden_layers[l]);
            act[l].resize(spec.hidden_layers[l]);
            delta[l].resize(spec.hidden_layers[l]);
        }
    }
};

inline double mlp_logit(const ModelSpec& spec, std::span<const double> theta,
                        std::span<const double> x, MlpWorkspace& ws) {
    ws.resize(spec);
    std::size_t pos = 0;
    std::span<const double> input = x;
    for (std::size_t l = 0; l < spec.hidden_layers.size(); ++l) {
        std::size_t width = spec.hidden_layers[l];
        const double* w = theta.data() + pos;
        const double* b = w + width * input.size();
        for (std::size_t u = 0; u < width; ++u) {
            KahanSum<> acc;
            const double* row = w + u * input.size();
            for (std::size_t j = 0; j < input.size(); ++j) acc.add(row[j] * input[j]);
            acc.add(b[u]);
            ws.pre[l][u] = acc.value();
            ws.act[l][u] = activate(spec.activation, ws.pre[l][u]);
        }
        pos += width * input.size() + width;
        input = ws.act[l];
    }
    KahanSum<> acc;
    for (std::size_t j = 0; j < input.size(); ++j) acc.add(theta[pos + j] * input[j]);
    acc.add(theta[pos + input.size()]);  // output bias
    return acc.value();
}

// Accumulates weight * per-sample gradient into grad_out (size d).
inline double mlp_loss_grad(const ModelSpec& spec, std::span<const double> theta,
                            std::span<const double> x, double y, double weight,
                            std::span<double> grad_out, MlpWorkspace& ws) {
    double logit = mlp_logit(spec, theta, x, ws);
    double p = sigmoid(logit);
    double dlogit = (p - y) * weight;

    const std::size_t depth = spec.hidden_layers.size();
    // Offset of each layer's parameters in theta.
    std::vector<std::size_t> offset(depth + 1);
    std::size_t pos = 0;
    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < depth; ++l) {
        offset[l] = pos;
        pos += spec.hidden_layers[l] * in + spec.hidden_layers[l];
        in = spec.hidden_layers[l];
    }
    offset[depth] = pos;

    // Output layer.
    const std::vector<double>& top = ws.act[depth - 1];
    for (std::size_t j = 0; j < top.size(); ++j)
        grad_out[offset[depth] + j] += dlogit * top[j];
    grad_out[offset[depth] + top.size()] += dlogit;

    // delta for the top hidden layer.
    for (std::size_t u = 0; u < top.size(); ++u)
        ws.delta[depth - 1][u] = dlogit * theta[offset[depth] + u] *
                                 activate_derivative(spec.activation, ws.pre[depth - 1][u]);

    for (std::size_t l = depth; l-- > 0;) {
        std::span<const double> below =
            l == 0 ? x : std::span<const double>(ws.act[l - 1]);
        std::size_t width = spec.hidden_layers[l];
        double* gw = grad_out.data() + offset[l];
        double* gb = gw + width * below.size();
        for (std::size_t u = 0; u < width; ++u) {
            double d = ws.delta[l][u];
            double* grow = gw + u * below.size();
            for (std::size_t j = 0; j < below.size(); ++j) grow[j] += d * below[j];
            gb[u] += d;
        }
        if (l > 0) {
            const double* w = theta.data() + offset[l];
            std::size_t below_width = spec.hidden_layers[l - 1];
            for (std::size_t j = 0; j < below_width; ++j) {
                KahanSum<> acc;
                for (std::size_t u = 0; u < width; ++u)
                    acc.add(w[u * below_width + j] * ws.delta[l][u]);
                ws.delta[l - 1][j] = acc.value() *
                                     activate_derivative(spec.activation, ws.pre[l - 1][j]);
            }
        }
    }
    return crossentropy(p, y);
}

}  // namespace detail

inline double per_sample_loss(const ModelSpec& spec, std::span<const double> theta,
                              std::span<const double> x, double y) {
    detail::check_sample(spec, theta, x, y);
    switch (spec.family) {
        case model_family::linear_squared: {
            double r = detail::affine_score(spec, theta, x) - y;
            return r * r;
        }
        case model_family::logistic_crossentropy:
            return detail::crossentropy(detail::sigmoid(detail::affine_score(spec, theta, x)), y);
        case model_family::mlp: {
            detail::MlpWorkspace ws;
            return detail::crossentropy(
                detail::sigmoid(detail::mlp_logit(spec, theta, x, ws)), y);
        }
    }
    throw invalid_parameter("unknown model family");
}

// Adds weight * grad l_i(theta) into grad_out and returns the sample loss.
inline double accumulate_sample_grad(const ModelSpec& spec, std::span<const double> theta,
                                     std::span<const double> x, double y, double weight,
                                     std::span<double> grad_out,
                                     detail::MlpWorkspace& ws) {
    detail::check_sample(spec, theta, x, y);
    switch (spec.family) {
        case model_family::linear_squared: {
            double r = detail::affine_score(spec, theta, x) - y;
            double scale = 2.0 * r * weight;
            for (std::size_t j = 0; j < x.size(); ++j) grad_out[j] += scale * x[j];
            if (spec.fit_intercept) grad_out[x.size()] += scale;
            return r * r;
        }
        case model_family::logistic_crossentropy: {
            double z = detail::affine_score(spec, theta, x);
            double p = detail::sigmoid(z);
            double scale = (p - y) * weight;
            for (std::size_t j = 0; j < x.size(); ++j) grad_out[j] += scale * x[j];
            if (spec.fit_intercept) grad_out[x.size()] += scale;
            return detail::crossentropy(p, y);
        }
        case model_family::mlp:
            return detail::mlp_loss_grad(spec, theta, x, y, weight, grad_out, ws);
    }
    throw invalid_parameter("unknown model family");
}

inline SampleLossGrad per_sample_grad(const ModelSpec& spec,
                                      std::span<const double> theta,
                                      std::span<const double> x, double y) {
    SampleLossGrad out;
    out.grad.assign(spec.param_count(), 0.0);
    detail::MlpWorkspace ws;
    out.loss = accumulate_sample_grad(spec, theta, x, y, 1.0, out.grad, ws);
    if (!std::isfinite(out.loss) || !all_finite(out.grad))
        throw invalid_input("non-finite loss or gradient");
    return out;
}

// Per-sample losses over a dataset. Chunk-deterministic; identical output for
// every thread count.
inline LossProfile loss_profile(const ModelSpec& spec, std::span<const double> theta,
                                const Dataset& data, int threads = 1) {
    if (data.n == 0) throw data_error("dataset is empty");
    for (std::size_t i = 0; i < data.n; ++i)
        detail::check_sample(spec, theta, data.row(i), data.targets[i]);
    std::vector<double> losses(data.n);
    std::size_t n_chunks = (data.n + detail::reduce_chunk - 1) / detail::reduce_chunk;
    detail::run_chunks(n_chunks, threads, [&](std::size_t c) {
        std::size_t lo = c * detail::reduce_chunk;
        std::size_t hi = std::min<std::size_t>(data.n, lo + detail::reduce_chunk);
        detail::MlpWorkspace ws;
        for (std::size_t i = lo; i < hi; ++i) {
            switch (spec.family) {
                case model_family::linear_squared: {
                    double r = detail::affine_score(spec, theta, data.row(i)) -
                               data.targets[i];
                    losses[i] = r * r;
                    break;
                }
                case model_family::logistic_crossentropy:
                    losses[i] = detail::crossentropy(
                        detail::sigmoid(detail::affine_score(spec, theta, data.row(i))),
                        data.targets[i]);
                    break;
                case model_family::mlp:
                    losses[i] = detail::crossentropy(
                        detail::sigmoid(detail::mlp_logit(spec, theta, data.row(i), ws)),
                        data.targets[i]);
                    break;
            }
        }
    });
    return LossProfile(std::move(losses));
}

struct Objective {
    double value;
    std::vector<double> grad;
};

namespace detail {

// sum_i weights[i] * grad l_i(theta), chunked with fixed combine order.
inline std::vector<double> weighted_gradient(const ModelSpec& spec,
                                             std::span<const double> theta,
                                             const Dataset& data,
                                             std::span<const double> weights,
                                             int threads) {
    const std::size_t d = spec.param_count();
    std::size_t n_chunks = (data.n + reduce_chunk - 1) / reduce_chunk;
    std::vector<double> partial(n_chunks * d, 0.0);
    run_chunks(n_chunks, threads, [&](std::size_t c) {
        std::size_t lo = c * reduce_chunk;
        std::size_t hi = std::min<std::size_t>(data.n, lo + reduce_chunk);
        MlpWorkspace ws;
        std::span<double> slot(partial.data() + c * d, d);
        for (std::size_t i = lo; i < hi; ++i)
            accumulate_sample_grad(spec, theta, data.row(i), data.targets[i],
                                   weights[i], slot, ws);
    });
    std::vector<double> grad(d, 0.0);
    std::vector<KahanSum<>> acc(d);
    for (std::size_t c = 0; c < n_chunks; ++c)
        for (std::size_t j = 0; j < d; ++j) acc[j].add(partial[c * d + j]);
    for (std::size_t j = 0; j < d; ++j) grad[j] = acc[j].value();
    return grad;
}

}  // namespace detail

// L(theta; lambda) over the dataset and its gradient sum_i w_i grad l_i.
inline Objective tilted_objective_and_grad(const ModelSpec& spec,
                                           std::span<const double> theta,
                                           const Dataset& data, const TiltParam& tilt,
                                           int threads = 1) {
    LossProfile profile = loss_profile(spec, theta, data, threads);
    Objective out;
    out.value = tilted_value(profile, tilt);
    std::vector<double> weights = tilt_weights(profile, tilt);
    out.grad = detail::weighted_gradient(spec, theta, data, weights, threads);
    return out;
}

// Mean loss and its gradient; the lambda -> 0 objective.
inline Objective mean_objective_and_grad(const ModelSpec& spec,
                                         std::span<const double> theta,
                                         const Dataset& data, int threads = 1) {
    LossProfile profile = loss_profile(spec, theta, data, threads);
    Objective out;
    out.value = utilitarian_value(profile);
    std::vector<double> weights(data.n, 1.0 / static_cast<double>(data.n));
    out.grad = detail::weighted_gradient(spec, theta, data, weights, threads);
    return out;
}

// "linear", "logistic", or "mlpK". Hidden widths default to 32 per layer; a
// single provided width is replicated across layers.
inline ModelSpec make_model(const std::string& id, std::size_t input_dim,
                            std::vector<std::size_t> hidden = {},
                            activation_kind act = activation_kind::relu) {
    ModelSpec spec;
    spec.input_dim = input_dim;
    spec.activation = act;
    if (id == "linear") {
        spec.family = model_family::linear_squared;
    } else if (id == "logistic") {
        spec.family = model_family::logistic_crossentropy;
    } else if (id.rfind("mlp", 0) == 0 && id.size() > 3) {
        spec.family = model_family::mlp;
        std::size_t depth = 0;
        for (std::size_t k = 3; k < id.size(); ++k) {
            if (id[k] < '0' || id[k] > '9')
                throw config_error("unknown model id '" + id + "'");
            depth = depth * 10 + static_cast<std::size_t>(id[k] - '0');
        }
        if (depth < 1) throw config_error("mlp depth must be >= 1");
        if (hidden.empty()) hidden.assign(depth, 32);
        else if (hidden.size() == 1) hidden.assign(depth, hidden[0]);
        else if (hidden.size() != depth)
            throw config_error("expected " + std::to_string(depth) +
                               " hidden widths, got " + std::to_string(hidden.size()));
        spec.hidden_layers = std::move(hidden);
    } else {
        throw config_error("unknown model id '" + id + "'");
    }
    spec.validate();
    return spec;
}

}  // namespace tilt
