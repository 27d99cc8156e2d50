#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridcast/features.hpp"
#include "gridcast/nn.hpp"

namespace gridcast {

// Architecture of the demand CNN:
//   conv1 -> relu -> pool -> conv2 -> relu -> pool -> flatten
//   -> dense(dense_units) -> relu -> dense(zones * k_max, linear)
struct CnnConfig {
    std::size_t conv1_filters = 32;
    std::size_t conv1_kernel = 3;
    std::size_t conv2_filters = 64;
    std::size_t conv2_kernel = 3;
    std::size_t dense_units = 256;
    std::size_t k_max = 6;
    std::size_t input_channels = 6; // look-back window m
    std::size_t input_height = 11;  // grid rows + context row
    std::size_t input_width = 10;

    std::size_t zones() const { return (input_height - 1) * input_width; }
    std::size_t output_size() const { return zones() * k_max; }
    void validate() const; // throws std::invalid_argument

    bool operator==(const CnnConfig&) const = default;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::size_t patience = 10;         // early-stop patience, in epochs, on validation WMAPE
    double validation_fraction = 0.1;  // chronological tail of the training set; 0 disables validation
    std::size_t workers = 1;           // per-sample gradient fan-out; results identical for any value

    void validate() const;
};

struct Network {
    CnnConfig config;
    nn::ConvLayer conv1;
    nn::ConvLayer conv2;
    nn::DenseLayer dense1;
    nn::DenseLayer dense2;
};

/// Builds and He-initializes the network. Identical (config, seed) pairs
/// produce bitwise-identical parameters.
Network build_model(const CnnConfig& config, std::uint64_t seed);

std::size_t count_parameters(const Network& network);

// Parameter blocks in declared layer order (conv1 kernels, conv1 bias,
// conv2 kernels, conv2 bias, dense1 weights, dense1 bias, dense2 weights,
// dense2 bias). This order also fixes the model-file layout.
std::vector<std::span<double>> param_blocks(Network& network);
std::vector<std::span<const double>> param_blocks(const Network& network);

struct ForwardCache {
    nn::Tensor conv1_pre;
    nn::MaxPoolResult pool1;
    nn::Tensor conv2_pre;
    nn::MaxPoolResult pool2;
    std::vector<double> flat;
    std::vector<double> dense1_pre;
    std::vector<double> dense1_act;
};

/// Runs the network on one input tensor. The cache, when supplied, is filled
/// for use by backward(); pattern_signature, when supplied, receives a hash
/// of all ReLU sign and pooling argmax decisions.
std::vector<double> forward(const Network& network, const nn::Tensor& input,
                            ForwardCache* cache = nullptr, std::uint64_t* pattern_signature = nullptr);

struct NetworkGrads {
    std::vector<double> conv1_kernels, conv1_bias;
    std::vector<double> conv2_kernels, conv2_bias;
    std::vector<double> dense1_weights, dense1_bias;
    std::vector<double> dense2_weights, dense2_bias;

    std::vector<std::span<const double>> blocks() const;
    void accumulate(const NetworkGrads& other);
    void scale(double factor);
};
NetworkGrads zero_grads(const Network& network);

/// MSE loss of one sample plus gradients for every parameter block.
double loss_and_gradients(const Network& network, const nn::Tensor& input,
                          const std::vector<double>& target, NetworkGrads& grads);

struct EpochStats {
    std::size_t epoch = 0;      // 0-based
    double train_mse = 0;
    double val_wmape = 0;       // NaN when validation is disabled
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

/// Mini-batch Adam on MSE with a seeded per-epoch shuffle. When validation
/// is enabled the best-validation weights are restored at the end; training
/// stops once validation WMAPE fails to improve for `patience` epochs.
/// Throws std::runtime_error on non-finite loss.
TrainResult train(Network& network, const std::vector<Sample>& train_samples,
                  const TrainConfig& config);

struct Prediction {
    std::size_t k_max = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> fractional; // horizon-major, zone order, clamped at 0
    std::vector<double> rounded;    // fractional rounded to the nearest count

    double frac(std::size_t horizon, std::size_t row, std::size_t col) const; // all 1-based
    double round(std::size_t horizon, std::size_t row, std::size_t col) const;
};

/// Runs the network and reshapes the outputs horizon-major to k_max grids of
/// non-negative demand (raw linear outputs clamped at 0).
Prediction predict(const Network& network, const nn::Tensor& input);

/// The persistence ("instanton") baseline: the last observed demand is the
/// prediction at every horizon.
std::vector<double> persistence_predict(const std::vector<double>& last_demand, std::size_t k_max);

/// Model file: text manifest (format version, config, block sizes) followed
/// by raw little-endian 64-bit float parameter blocks in declared order.
/// save -> load -> save produces identical bytes.
void save_model(const Network& network, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path); // throws std::runtime_error

/// Gradient check of the full network loss on one sample (see
/// nn::gradient_check). ReLU/pool kink crossings are excluded via the
/// forward pattern signature.
nn::GradCheckReport gradient_check(Network& network, const Sample& sample,
                                   const nn::GradCheckOptions& options = {});

} // namespace gridcast
