#include "gridcast/model.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace gridcast {

void CnnConfig::validate() const {
    if (conv1_kernel % 2 == 0 || conv2_kernel % 2 == 0)
        throw std::invalid_argument("CnnConfig: kernel sides must be odd");
    if (k_max < 1) throw std::invalid_argument("CnnConfig: k_max must be >= 1");
    if (dense_units < 1) throw std::invalid_argument("CnnConfig: dense_units must be >= 1");
    if (conv1_filters < 1 || conv2_filters < 1)
        throw std::invalid_argument("CnnConfig: filter counts must be >= 1");
    if (input_channels < 1 || input_height < 2 || input_width < 1)
        throw std::invalid_argument("CnnConfig: bad input shape");
    if (input_height / 2 < 2 || input_width / 2 < 2)
        throw std::invalid_argument("CnnConfig: input too small for two 2x2 poolings");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw std::invalid_argument("TrainConfig: validation_fraction must be in [0,1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
}

Network build_model(const CnnConfig& config, std::uint64_t seed) {
    config.validate();
    Network net;
    net.config = config;
    net.conv1 = nn::ConvLayer(config.input_channels, config.conv1_filters, config.conv1_kernel,
                              config.conv1_kernel);
    net.conv2 = nn::ConvLayer(config.conv1_filters, config.conv2_filters, config.conv2_kernel,
                              config.conv2_kernel);
    const std::size_t pooled_h = (config.input_height / 2) / 2;
    const std::size_t pooled_w = (config.input_width / 2) / 2;
    const std::size_t flat = config.conv2_filters * pooled_h * pooled_w;
    net.dense1 = nn::DenseLayer(flat, config.dense_units);
    net.dense2 = nn::DenseLayer(config.dense_units, config.output_size());

    std::mt19937_64 rng(seed);
    nn::init_params(net.conv1, rng);
    nn::init_params(net.conv2, rng);
    nn::init_params(net.dense1, rng);
    nn::init_params(net.dense2, rng);
    return net;
}

std::size_t count_parameters(const Network& network) {
    return nn::parameter_count(network.conv1) + nn::parameter_count(network.conv2) +
           nn::parameter_count(network.dense1) + nn::parameter_count(network.dense2);
}

std::vector<std::span<double>> param_blocks(Network& net) {
    return {net.conv1.kernels, net.conv1.bias, net.conv2.kernels, net.conv2.bias,
            net.dense1.weights, net.dense1.bias, net.dense2.weights, net.dense2.bias};
}

std::vector<std::span<const double>> param_blocks(const Network& net) {
    return {net.conv1.kernels, net.conv1.bias, net.conv2.kernels, net.conv2.bias,
            net.dense1.weights, net.dense1.bias, net.dense2.weights, net.dense2.bias};
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void hash_bit(std::uint64_t& h, bool bit) {
    h ^= bit ? 0x9eu : 0x31u;
    h *= kFnvPrime;
}

void hash_value(std::uint64_t& h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xffu;
        h *= kFnvPrime;
    }
}

void hash_signs(std::uint64_t& h, const std::vector<double>& values) {
    for (double v : values) hash_bit(h, v > 0.0);
}

void hash_argmax(std::uint64_t& h, const std::vector<std::size_t>& argmax) {
    for (std::size_t a : argmax) hash_value(h, a);
}

} // namespace

std::vector<double> forward(const Network& net, const nn::Tensor& input, ForwardCache* cache,
                            std::uint64_t* pattern_signature) {
    if (input.shape.size() != 3 || input.dim(0) != net.config.input_channels ||
        input.dim(1) != net.config.input_height || input.dim(2) != net.config.input_width)
        throw std::invalid_argument("forward: input shape does not match network config");

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;

    c.conv1_pre = nn::conv2d_forward(input, net.conv1);
    nn::Tensor act1 = nn::relu(c.conv1_pre);
    c.pool1 = nn::maxpool_forward(act1);
    c.conv2_pre = nn::conv2d_forward(c.pool1.output, net.conv2);
    nn::Tensor act2 = nn::relu(c.conv2_pre);
    c.pool2 = nn::maxpool_forward(act2);
    c.flat = nn::flatten(c.pool2.output);
    c.dense1_pre = nn::dense_forward(c.flat, net.dense1);
    c.dense1_act = nn::relu(c.dense1_pre);
    std::vector<double> out = nn::dense_forward(c.dense1_act, net.dense2);

    if (pattern_signature) {
        std::uint64_t h = kFnvOffset;
        hash_signs(h, c.conv1_pre.data);
        hash_argmax(h, c.pool1.argmax);
        hash_signs(h, c.conv2_pre.data);
        hash_argmax(h, c.pool2.argmax);
        hash_signs(h, c.dense1_pre);
        *pattern_signature = h;
    }
    return out;
}

std::vector<std::span<const double>> NetworkGrads::blocks() const {
    return {conv1_kernels, conv1_bias, conv2_kernels, conv2_bias,
            dense1_weights, dense1_bias, dense2_weights, dense2_bias};
}

void NetworkGrads::accumulate(const NetworkGrads& other) {
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(conv1_kernels, other.conv1_kernels);
    add(conv1_bias, other.conv1_bias);
    add(conv2_kernels, other.conv2_kernels);
    add(conv2_bias, other.conv2_bias);
    add(dense1_weights, other.dense1_weights);
    add(dense1_bias, other.dense1_bias);
    add(dense2_weights, other.dense2_weights);
    add(dense2_bias, other.dense2_bias);
}

void NetworkGrads::scale(double factor) {
    for (auto* block : {&conv1_kernels, &conv1_bias, &conv2_kernels, &conv2_bias, &dense1_weights,
                        &dense1_bias, &dense2_weights, &dense2_bias})
        for (double& v : *block) v *= factor;
}

NetworkGrads zero_grads(const Network& net) {
    NetworkGrads g;
    g.conv1_kernels.assign(net.conv1.kernels.size(), 0.0);
    g.conv1_bias.assign(net.conv1.bias.size(), 0.0);
    g.conv2_kernels.assign(net.conv2.kernels.size(), 0.0);
    g.conv2_bias.assign(net.conv2.bias.size(), 0.0);
    g.dense1_weights.assign(net.dense1.weights.size(), 0.0);
    g.dense1_bias.assign(net.dense1.bias.size(), 0.0);
    g.dense2_weights.assign(net.dense2.weights.size(), 0.0);
    g.dense2_bias.assign(net.dense2.bias.size(), 0.0);
    return g;
}

double loss_and_gradients(const Network& net, const nn::Tensor& input,
                          const std::vector<double>& target, NetworkGrads& grads) {
    ForwardCache cache;
    std::vector<double> pred = forward(net, input, &cache);
    nn::MseResult mse = nn::mse_loss(pred, target);

    nn::DenseGrads d2 = nn::dense_backward(mse.grad, cache.dense1_act, net.dense2);
    std::vector<double> g_dense1_act = nn::relu_backward(d2.input, cache.dense1_pre);
    nn::DenseGrads d1 = nn::dense_backward(g_dense1_act, cache.flat, net.dense1);
    nn::Tensor g_pool2 = nn::unflatten(d1.input, cache.pool2.output.shape);
    nn::Tensor g_act2 = nn::maxpool_backward(g_pool2, cache.pool2);
    nn::Tensor g_conv2_pre = nn::relu_backward(g_act2, cache.conv2_pre);
    nn::ConvGrads c2 = nn::conv2d_backward(g_conv2_pre, cache.pool1.output, net.conv2);
    nn::Tensor g_act1 = nn::maxpool_backward(c2.input, cache.pool1);
    nn::Tensor g_conv1_pre = nn::relu_backward(g_act1, cache.conv1_pre);
    nn::ConvGrads c1 = nn::conv2d_backward(g_conv1_pre, input, net.conv1);

    grads.conv1_kernels = std::move(c1.kernels);
    grads.conv1_bias = std::move(c1.bias);
    grads.conv2_kernels = std::move(c2.kernels);
    grads.conv2_bias = std::move(c2.bias);
    grads.dense1_weights = std::move(d1.weights);
    grads.dense1_bias = std::move(d1.bias);
    grads.dense2_weights = std::move(d2.weights);
    grads.dense2_bias = std::move(d2.bias);
    return mse.loss;
}

namespace {

// Pooled WMAPE of clamped predictions over a sample range; NaN when the
// denominator is zero.
double pooled_wmape(const Network& net, const std::vector<Sample>& samples, std::size_t begin,
                    std::size_t end) {
    double num = 0, den = 0;
    for (std::size_t i = begin; i < end; ++i) {
        Prediction p = predict(net, samples[i].input);
        for (std::size_t j = 0; j < p.fractional.size(); ++j) {
            num += std::fabs(samples[i].target[j] - p.fractional[j]);
            den += std::fabs(samples[i].target[j]);
        }
    }
    if (den == 0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * num / den;
}

struct ParamSnapshot {
    std::vector<std::vector<double>> blocks;
};

ParamSnapshot snapshot(const Network& net) {
    ParamSnapshot s;
    for (auto block : param_blocks(net)) s.blocks.emplace_back(block.begin(), block.end());
    return s;
}

void restore(Network& net, const ParamSnapshot& s) {
    auto blocks = param_blocks(net);
    for (std::size_t b = 0; b < blocks.size(); ++b)
        std::copy(s.blocks[b].begin(), s.blocks[b].end(), blocks[b].begin());
}

// Computes per-sample gradients for one batch. Each sample writes into its
// own slot, so the later in-order reduction is bitwise identical no matter
// how many workers ran.
void batch_gradients(const Network& net, const std::vector<Sample>& samples,
                     const std::vector<std::size_t>& batch, std::size_t workers,
                     std::vector<NetworkGrads>& slots, std::vector<double>& losses) {
    const std::size_t n = batch.size();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const Sample& s = samples[batch[i]];
            losses[i] = loss_and_gradients(net, s.input, s.target, slots[i]);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            const Sample& s = samples[batch[i]];
            losses[i] = loss_and_gradients(net, s.input, s.target, slots[i]);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min(workers, n);
    pool.reserve(spawn);
    for (std::size_t w = 0; w < spawn; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
}

} // namespace

TrainResult train(Network& net, const std::vector<Sample>& train_samples, const TrainConfig& config) {
    config.validate();
    if (train_samples.empty()) throw std::invalid_argument("train: empty training set");

    // Validation split: chronological tail of the training samples.
    std::size_t n_val = static_cast<std::size_t>(
        std::floor(config.validation_fraction * static_cast<double>(train_samples.size())));
    if (n_val >= train_samples.size()) n_val = train_samples.size() - 1;
    const std::size_t n_fit = train_samples.size() - n_val;
    const bool use_validation = n_val > 0;

    auto params = param_blocks(net);
    nn::AdamState adam = nn::make_adam_state(params);
    nn::AdamConfig adam_config;
    adam_config.learning_rate = config.learning_rate;

    std::vector<std::size_t> order(n_fit);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    ParamSnapshot best = snapshot(net);
    std::size_t epochs_since_improvement = 0;

    std::vector<NetworkGrads> slots;
    std::vector<double> losses;
    NetworkGrads batch_grads = zero_grads(net);

    std::mt19937_64 shuffle_rng(config.seed);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < n_fit; start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, n_fit);
            std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
            const std::size_t b = batch.size();
            slots.resize(b);
            losses.assign(b, 0.0);
            batch_gradients(net, train_samples, batch, config.workers, slots, losses);

            // Mean gradient, accumulated in fixed sample order.
            batch_grads = std::move(slots[0]);
            for (std::size_t i = 1; i < b; ++i) batch_grads.accumulate(slots[i]);
            batch_grads.scale(1.0 / static_cast<double>(b));
            slots[0] = zero_grads(net);

            double batch_loss = 0;
            for (double l : losses) batch_loss += l;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error(
                    "train: loss became non-finite; lower the learning rate or rescale the inputs");
            epoch_loss += batch_loss;
            seen += b;

            adam_step(params, batch_grads.blocks(), adam, adam_config);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = epoch_loss / static_cast<double>(seen);
        stats.val_wmape = std::numeric_limits<double>::quiet_NaN();

        if (use_validation) {
            stats.val_wmape = pooled_wmape(net, train_samples, n_fit, train_samples.size());
            if (std::isfinite(stats.val_wmape) && stats.val_wmape < best_val) {
                best_val = stats.val_wmape;
                best = snapshot(net);
                result.best_epoch = epoch;
                epochs_since_improvement = 0;
            } else {
                ++epochs_since_improvement;
            }
        } else {
            result.best_epoch = epoch;
        }
        result.history.push_back(stats);

        if (use_validation && epochs_since_improvement >= config.patience) {
            result.early_stopped = true;
            break;
        }
    }

    if (use_validation) restore(net, best);
    return result;
}

double Prediction::frac(std::size_t horizon, std::size_t row, std::size_t col) const {
    return fractional[(horizon - 1) * rows * cols + (row - 1) * cols + (col - 1)];
}

double Prediction::round(std::size_t horizon, std::size_t row, std::size_t col) const {
    return rounded[(horizon - 1) * rows * cols + (row - 1) * cols + (col - 1)];
}

Prediction predict(const Network& net, const nn::Tensor& input) {
    std::vector<double> raw = forward(net, input);
    Prediction p;
    p.k_max = net.config.k_max;
    p.rows = net.config.input_height - 1;
    p.cols = net.config.input_width;
    p.fractional.resize(raw.size());
    p.rounded.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double clamped = raw[i] > 0.0 ? raw[i] : 0.0;
        p.fractional[i] = clamped;
        p.rounded[i] = std::nearbyint(clamped);
    }
    return p;
}

std::vector<double> persistence_predict(const std::vector<double>& last_demand, std::size_t k_max) {
    std::vector<double> out;
    out.reserve(last_demand.size() * k_max);
    for (std::size_t h = 0; h < k_max; ++h)
        out.insert(out.end(), last_demand.begin(), last_demand.end());
    return out;
}

namespace {

constexpr std::string_view kModelMagic = "gridcast-model v1";

void write_f64_le(std::ostream& out, double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (i * 8)) & 0xffu);
    out.write(bytes, 8);
}

double read_f64_le(std::istream& in) {
    char bytes[8];
    in.read(bytes, 8);
    if (!in) throw std::runtime_error("model file: truncated parameter data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (i * 8);
    double value;
    std::memcpy(&value, &bits, sizeof(value));
    return value;
}

constexpr std::array<std::string_view, 8> kBlockNames = {
    "conv1.kernels", "conv1.bias", "conv2.kernels", "conv2.bias",
    "dense1.weights", "dense1.bias", "dense2.weights", "dense2.bias"};

} // namespace

void save_model(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path.string());
    out << kModelMagic << '\n';
    out << "conv1_filters=" << net.config.conv1_filters << '\n';
    out << "conv1_kernel=" << net.config.conv1_kernel << '\n';
    out << "conv2_filters=" << net.config.conv2_filters << '\n';
    out << "conv2_kernel=" << net.config.conv2_kernel << '\n';
    out << "dense_units=" << net.config.dense_units << '\n';
    out << "k_max=" << net.config.k_max << '\n';
    out << "input_channels=" << net.config.input_channels << '\n';
    out << "input_height=" << net.config.input_height << '\n';
    out << "input_width=" << net.config.input_width << '\n';
    auto blocks = param_blocks(net);
    for (std::size_t b = 0; b < blocks.size(); ++b)
        out << "block " << kBlockNames[b] << ' ' << blocks[b].size() << '\n';
    out << "data\n";
    for (const auto& block : blocks)
        for (double v : block) write_f64_le(out, v);
    if (!out) throw std::runtime_error("save_model: write failed for " + path.string());
}

Network load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kModelMagic)
        throw std::runtime_error("load_model: unsupported format or version (expected '" +
                                 std::string(kModelMagic) + "')");

    CnnConfig config;
    auto read_kv = [&](std::string_view key) -> std::size_t {
        if (!std::getline(in, line)) throw std::runtime_error("load_model: truncated manifest");
        auto pos = line.find('=');
        if (pos == std::string::npos || std::string_view(line).substr(0, pos) != key)
            throw std::runtime_error("load_model: expected key '" + std::string(key) + "', got '" +
                                     line + "'");
        return static_cast<std::size_t>(std::stoull(line.substr(pos + 1)));
    };
    config.conv1_filters = read_kv("conv1_filters");
    config.conv1_kernel = read_kv("conv1_kernel");
    config.conv2_filters = read_kv("conv2_filters");
    config.conv2_kernel = read_kv("conv2_kernel");
    config.dense_units = read_kv("dense_units");
    config.k_max = read_kv("k_max");
    config.input_channels = read_kv("input_channels");
    config.input_height = read_kv("input_height");
    config.input_width = read_kv("input_width");

    Network net = build_model(config, 0);
    auto blocks = param_blocks(net);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (!std::getline(in, line)) throw std::runtime_error("load_model: truncated manifest");
        std::istringstream ls(line);
        std::string tag, name;
        std::size_t size = 0;
        ls >> tag >> name >> size;
        if (tag != "block" || name != kBlockNames[b] || size != blocks[b].size())
            throw std::runtime_error("load_model: block declaration mismatch on '" + line + "'");
    }
    if (!std::getline(in, line) || line != "data")
        throw std::runtime_error("load_model: missing data section");
    for (auto& block : blocks)
        for (double& v : block) v = read_f64_le(in);
    return net;
}

nn::GradCheckReport gradient_check(Network& net, const Sample& sample,
                                   const nn::GradCheckOptions& options) {
    NetworkGrads grads = zero_grads(net);
    loss_and_gradients(net, sample.input, sample.target, grads);
    auto loss_fn = [&](std::uint64_t* signature) {
        std::vector<double> pred = forward(net, sample.input, nullptr, signature);
        return nn::mse_loss(pred, sample.target).loss;
    };
    return nn::gradient_check(param_blocks(net), grads.blocks(), loss_fn, options);
}

} // namespace gridcast
