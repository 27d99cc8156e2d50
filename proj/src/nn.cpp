#include "gridcast/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gridcast::nn {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
    data.assign(shape_size(shape), fill);
}

ConvLayer::ConvLayer(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw)
    : in_channels(in_ch), out_channels(out_ch), kernel_h(kh), kernel_w(kw) {
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("ConvLayer: kernel sides must be odd for exact same-padding");
    kernels.assign(out_ch * in_ch * kh * kw, 0.0);
    bias.assign(out_ch, 0.0);
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out) : in_size(in), out_size(out) {
    weights.assign(in * out, 0.0);
    bias.assign(out, 0.0);
}

std::size_t parameter_count(const ConvLayer& layer) { return layer.kernels.size() + layer.bias.size(); }
std::size_t parameter_count(const DenseLayer& layer) { return layer.weights.size() + layer.bias.size(); }

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
    if (input.shape.size() != 3 || input.dim(0) != layer.in_channels)
        throw std::invalid_argument("conv2d_forward: input channels do not match layer");
    const std::size_t h = input.dim(1), w = input.dim(2);
    const std::ptrdiff_t pad_y = static_cast<std::ptrdiff_t>(layer.kernel_h / 2);
    const std::ptrdiff_t pad_x = static_cast<std::ptrdiff_t>(layer.kernel_w / 2);

    Tensor out({layer.out_channels, h, w});
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                double acc = layer.bias[o];
                for (std::size_t dy = 0; dy < layer.kernel_h; ++dy) {
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + dy) - pad_y;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t dx = 0; dx < layer.kernel_w; ++dx) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + dx) - pad_x;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        for (std::size_t c = 0; c < layer.in_channels; ++c) {
                            acc += input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                                   layer.kernel_at(o, c, dy, dx);
                        }
                    }
                }
                out.at(o, y, x) = acc;
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer) {
    if (input.shape.size() != 3 || input.dim(0) != layer.in_channels)
        throw std::invalid_argument("conv2d_backward: input channels do not match layer");
    if (grad_out.shape.size() != 3 || grad_out.dim(0) != layer.out_channels ||
        grad_out.dim(1) != input.dim(1) || grad_out.dim(2) != input.dim(2))
        throw std::invalid_argument("conv2d_backward: grad_out shape does not match forward pass");

    const std::size_t h = input.dim(1), w = input.dim(2);
    const std::ptrdiff_t pad_y = static_cast<std::ptrdiff_t>(layer.kernel_h / 2);
    const std::ptrdiff_t pad_x = static_cast<std::ptrdiff_t>(layer.kernel_w / 2);

    ConvGrads grads;
    grads.input = Tensor(input.shape);
    grads.kernels.assign(layer.kernels.size(), 0.0);
    grads.bias.assign(layer.bias.size(), 0.0);

    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const double g = grad_out.at(o, y, x);
                grads.bias[o] += g;
                if (g == 0.0) continue;
                for (std::size_t dy = 0; dy < layer.kernel_h; ++dy) {
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + dy) - pad_y;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t dx = 0; dx < layer.kernel_w; ++dx) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + dx) - pad_x;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        for (std::size_t c = 0; c < layer.in_channels; ++c) {
                            const double in_v =
                                input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                            grads.kernels[((o * layer.in_channels + c) * layer.kernel_h + dy) * layer.kernel_w + dx] +=
                                g * in_v;
                            grads.input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                                g * layer.kernel_at(o, c, dy, dx);
                        }
                    }
                }
            }
        }
    }
    return grads;
}

MaxPoolResult maxpool_forward(const Tensor& input) {
    if (input.shape.size() != 3 || input.dim(1) < 2 || input.dim(2) < 2)
        throw std::invalid_argument("maxpool_forward: input must be CxHxW with H,W >= 2");
    const std::size_t channels = input.dim(0);
    const std::size_t out_h = input.dim(1) / 2;
    const std::size_t out_w = input.dim(2) / 2;

    MaxPoolResult result;
    result.output = Tensor({channels, out_h, out_w});
    result.argmax.resize(channels * out_h * out_w);
    result.input_shape = input.shape;

    std::size_t out_idx = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                std::size_t best_idx = (c * input.dim(1) + 2 * y) * input.dim(2) + 2 * x;
                double best = input.data[best_idx];
                for (std::size_t wy = 0; wy < 2; ++wy) {
                    for (std::size_t wx = 0; wx < 2; ++wx) {
                        std::size_t idx = (c * input.dim(1) + 2 * y + wy) * input.dim(2) + 2 * x + wx;
                        if (input.data[idx] > best) { // strict: first occurrence wins ties
                            best = input.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                result.output.at(c, y, x) = best;
                result.argmax[out_idx++] = best_idx;
            }
        }
    }
    return result;
}

Tensor maxpool_backward(const Tensor& grad_out, const MaxPoolResult& cache) {
    if (grad_out.data.size() != cache.argmax.size())
        throw std::invalid_argument("maxpool_backward: grad_out does not match cached forward pass");
    Tensor grad_in(cache.input_shape);
    for (std::size_t i = 0; i < cache.argmax.size(); ++i)
        grad_in.data[cache.argmax[i]] += grad_out.data[i];
    return grad_in;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape);
    for (std::size_t i = 0; i < input.data.size(); ++i)
        out.data[i] = input.data[i] > 0.0 ? input.data[i] : 0.0;
    return out;
}

std::vector<double> relu(const std::vector<double>& input) {
    std::vector<double> out(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& pre_activation) {
    Tensor out(grad_out.shape);
    for (std::size_t i = 0; i < grad_out.data.size(); ++i)
        out.data[i] = pre_activation.data[i] > 0.0 ? grad_out.data[i] : 0.0;
    return out;
}

std::vector<double> relu_backward(const std::vector<double>& grad_out,
                                  const std::vector<double>& pre_activation) {
    std::vector<double> out(grad_out.size());
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        out[i] = pre_activation[i] > 0.0 ? grad_out[i] : 0.0;
    return out;
}

std::vector<double> dense_forward(const std::vector<double>& input, const DenseLayer& layer) {
    if (input.size() != layer.in_size)
        throw std::invalid_argument("dense_forward: input size does not match layer");
    std::vector<double> out(layer.out_size);
    for (std::size_t o = 0; o < layer.out_size; ++o) {
        double acc = layer.bias[o];
        const double* w = layer.weights.data() + o * layer.in_size;
        for (std::size_t i = 0; i < layer.in_size; ++i) acc += w[i] * input[i];
        out[o] = acc;
    }
    return out;
}

DenseGrads dense_backward(const std::vector<double>& grad_out, const std::vector<double>& input,
                          const DenseLayer& layer) {
    if (grad_out.size() != layer.out_size || input.size() != layer.in_size)
        throw std::invalid_argument("dense_backward: shapes do not match layer");
    DenseGrads grads;
    grads.input.assign(layer.in_size, 0.0);
    grads.weights.assign(layer.weights.size(), 0.0);
    grads.bias = grad_out;
    for (std::size_t o = 0; o < layer.out_size; ++o) {
        const double g = grad_out[o];
        const double* w = layer.weights.data() + o * layer.in_size;
        double* gw = grads.weights.data() + o * layer.in_size;
        for (std::size_t i = 0; i < layer.in_size; ++i) {
            gw[i] = g * input[i];
            grads.input[i] += g * w[i];
        }
    }
    return grads;
}

std::vector<double> flatten(const Tensor& input) { return input.data; }

Tensor unflatten(const std::vector<double>& data, std::vector<std::size_t> shape) {
    if (data.size() != shape_size(shape))
        throw std::invalid_argument("unflatten: data length does not match shape");
    Tensor out;
    out.shape = std::move(shape);
    out.data = data;
    return out;
}

MseResult mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw std::invalid_argument("mse_loss: vectors must be equal-length and non-empty");
    MseResult result;
    result.grad.resize(pred.size());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred[i] - target[i];
        result.loss += diff * diff;
        result.grad[i] = 2.0 * inv_n * diff;
    }
    result.loss *= inv_n;
    return result;
}

AdamState make_adam_state(const std::vector<std::span<double>>& params) {
    AdamState state;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto& p : params) {
        state.m.emplace_back(p.size(), 0.0);
        state.v.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::vector<std::span<double>> params, std::vector<std::span<const double>> grads,
               AdamState& state, const AdamConfig& config) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient/state block counts differ");
    ++state.step;
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size() || params[b].size() != state.m[b].size())
            throw std::invalid_argument("adam_step: block size mismatch");
        double* m = state.m[b].data();
        double* v = state.v[b].data();
        double* p = params[b].data();
        const double* g = grads[b].data();
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

void he_init(std::span<double> weights, std::size_t fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& w : weights) w = dist(rng);
}

void init_params(ConvLayer& layer, std::mt19937_64& rng) {
    he_init(layer.kernels, layer.in_channels * layer.kernel_h * layer.kernel_w, rng);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

void init_params(DenseLayer& layer, std::mt19937_64& rng) {
    he_init(layer.weights, layer.in_size, rng);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

GradCheckReport gradient_check(std::vector<std::span<double>> params,
                               std::vector<std::span<const double>> analytic_grads,
                               const std::function<double(std::uint64_t*)>& loss_fn,
                               const GradCheckOptions& options) {
    if (params.size() != analytic_grads.size())
        throw std::invalid_argument("gradient_check: parameter/gradient block counts differ");

    std::size_t total = 0;
    for (const auto& p : params) total += p.size();
    if (total == 0) throw std::invalid_argument("gradient_check: no parameters");

    {
        double base = loss_fn(nullptr);
        if (!std::isfinite(base)) throw std::runtime_error("gradient_check: non-finite loss");
    }

    // Choose a random subset of flat parameter indices (all of them when the
    // network is small).
    std::vector<std::size_t> selected;
    if (total <= options.min_params) {
        selected.resize(total);
        std::iota(selected.begin(), selected.end(), std::size_t{0});
    } else {
        std::mt19937_64 rng(options.seed);
        std::uniform_int_distribution<std::size_t> dist(0, total - 1);
        std::vector<bool> taken(total, false);
        while (selected.size() < options.min_params) {
            std::size_t idx = dist(rng);
            if (!taken[idx]) {
                taken[idx] = true;
                selected.push_back(idx);
            }
        }
    }

    auto locate = [&](std::size_t flat) -> double* {
        for (auto& block : params) {
            if (flat < block.size()) return block.data() + flat;
            flat -= block.size();
        }
        return nullptr;
    };
    auto analytic_at = [&](std::size_t flat) -> double {
        for (const auto& block : analytic_grads) {
            if (flat < block.size()) return block[flat];
            flat -= block.size();
        }
        return 0.0;
    };

    GradCheckReport report;
    for (std::size_t flat : selected) {
        double* p = locate(flat);
        const double saved = *p;

        std::uint64_t sig_plus = 0, sig_minus = 0;
        *p = saved + options.epsilon;
        const double loss_plus = loss_fn(&sig_plus);
        *p = saved - options.epsilon;
        const double loss_minus = loss_fn(&sig_minus);
        *p = saved;

        if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus))
            throw std::runtime_error("gradient_check: non-finite loss under perturbation");

        if (sig_plus != sig_minus) {
            // The perturbation crossed a ReLU/pooling kink; the finite
            // difference is meaningless there.
            ++report.skipped;
            continue;
        }

        const double numeric = (loss_plus - loss_minus) / (2.0 * options.epsilon);
        const double analytic = analytic_at(flat);
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-12});
        const double rel = std::fabs(analytic - numeric) / denom;
        report.max_rel_error = std::max(report.max_rel_error, rel);
        ++report.checked;
    }
    return report;
}

} // namespace gridcast::nn
