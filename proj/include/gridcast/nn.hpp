#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace gridcast::nn {

// Dense row-major tensor of 64-bit floats. Everything in this engine is
// double precision: gradient checking to 1e-5 is unreliable in 32-bit and the
// networks involved are tiny.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    // 3-d access (channel, y, x)
    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    // 2-d access
    double& at(std::size_t y, std::size_t x) { return data[y * shape[1] + x]; }
    double at(std::size_t y, std::size_t x) const { return data[y * shape[1] + x]; }

    bool operator==(const Tensor&) const = default;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

// "Same"-padded 2-d convolution. Odd kernel sides keep the zero padding
// symmetric so the output spatial size equals the input's.
struct ConvLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::vector<double> kernels; // [out][in][kh][kw]
    std::vector<double> bias;    // [out]

    ConvLayer() = default;
    ConvLayer(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw);

    double& kernel_at(std::size_t o, std::size_t c, std::size_t dy, std::size_t dx) {
        return kernels[((o * in_channels + c) * kernel_h + dy) * kernel_w + dx];
    }
    double kernel_at(std::size_t o, std::size_t c, std::size_t dy, std::size_t dx) const {
        return kernels[((o * in_channels + c) * kernel_h + dy) * kernel_w + dx];
    }
};

struct DenseLayer {
    std::size_t in_size = 0;
    std::size_t out_size = 0;
    std::vector<double> weights; // [out][in]
    std::vector<double> bias;    // [out]

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out);
};

std::size_t parameter_count(const ConvLayer& layer);
std::size_t parameter_count(const DenseLayer& layer);

// out[o][y][x] = bias[o] + sum over (dy, dx, c) of
//   in[c][y+dy-kh/2][x+dx-kw/2] * K[o][c][dy][dx], zero outside bounds.
// Accumulation order is pinned to dy, dx, c ascending (out-of-bounds terms
// skipped), which makes results bitwise reproducible against a direct-loop
// reference.
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

struct ConvGrads {
    Tensor input;
    std::vector<double> kernels;
    std::vector<double> bias;
};
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer);

// 2x2/stride-2 max pooling with floor semantics: a trailing odd row/column is
// dropped. argmax holds the flat input index chosen per output element,
// first occurrence winning ties in row-major window scan order.
struct MaxPoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;
    std::vector<std::size_t> input_shape;
};
MaxPoolResult maxpool_forward(const Tensor& input);
Tensor maxpool_backward(const Tensor& grad_out, const MaxPoolResult& cache);

// f(x) = max(0, x); the derivative at exactly 0 is taken as 0.
Tensor relu(const Tensor& input);
std::vector<double> relu(const std::vector<double>& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& pre_activation);
std::vector<double> relu_backward(const std::vector<double>& grad_out,
                                  const std::vector<double>& pre_activation);

std::vector<double> dense_forward(const std::vector<double>& input, const DenseLayer& layer);
struct DenseGrads {
    std::vector<double> input;
    std::vector<double> weights;
    std::vector<double> bias;
};
DenseGrads dense_backward(const std::vector<double>& grad_out, const std::vector<double>& input,
                          const DenseLayer& layer);

// Row-major flatten: channel-major, then row, then column.
std::vector<double> flatten(const Tensor& input);
Tensor unflatten(const std::vector<double>& data, std::vector<std::size_t> shape);

struct MseResult {
    double loss = 0;
    std::vector<double> grad;
};
// loss = (1/n) * sum (p - y)^2, grad = (2/n) * (p - y)
MseResult mse_loss(std::span<const double> pred, std::span<const double> target);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;
};
AdamState make_adam_state(const std::vector<std::span<double>>& params);

// Standard bias-corrected Adam update, applied in place.
void adam_step(std::vector<std::span<double>> params, std::vector<std::span<const double>> grads,
               AdamState& state, const AdamConfig& config = {});

// He-normal initialization: weights ~ N(0, 2/fan_in) drawn from the given
// mt19937_64, biases zero.
void he_init(std::span<double> weights, std::size_t fan_in, std::mt19937_64& rng);
void init_params(ConvLayer& layer, std::mt19937_64& rng);
void init_params(DenseLayer& layer, std::mt19937_64& rng);

struct GradCheckOptions {
    double epsilon = 1e-5;
    std::size_t min_params = 200;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_rel_error = 0;
    std::size_t checked = 0;
    std::size_t skipped = 0; // parameters whose perturbation crossed a ReLU/pool decision
};

// Central-difference check of analytic gradients over a random subset of at
// least min_params parameters. loss_fn evaluates the full loss at the current
// parameter values; when the pointer argument is non-null it must also store
// a signature of the network's ReLU/pooling decision pattern, used to detect
// and exclude perturbations that cross a kink. Relative error is
// |g_a - g_n| / max(|g_a|, |g_n|, 1e-12). Throws on non-finite loss.
GradCheckReport gradient_check(std::vector<std::span<double>> params,
                               std::vector<std::span<const double>> analytic_grads,
                               const std::function<double(std::uint64_t*)>& loss_fn,
                               const GradCheckOptions& options = {});

} // namespace gridcast::nn
