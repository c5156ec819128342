// From-scratch dense and convolutional networks with hand-derived backprop.
//
// All internal arithmetic is double precision; the transport layer is the only
// place values are narrowed to binary32. Parameters live in one flat vector,
// laid out layer by layer (weights, then biases). Conventions:
//
//  * tensors are stored channel-major: plane (c, h, w) flattens to
//    ((c * H) + y) * W + x;
//  * conv layers are valid cross-correlation (no kernel flip), square kernels;
//  * pool layers are 2x2 max-pool with stride 2; on ties the first element in
//    row-major window order wins, and its flat input index is recorded for the
//    backward routing;
//  * the final dense layer has identity activation; class log-probabilities
//    are log-softmax of its output (computed with max subtraction);
//  * initialization is uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per
//    layer, weights then biases, from a per-layer derived stream.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace airfl::nn {

enum class Act { identity, relu, sigmoid };

struct LayerSpec {
    enum class Kind { dense, conv, pool, flatten };
    Kind kind = Kind::dense;
    int in = 0;        // dense: input width; conv: input channels
    int out = 0;       // dense: output width; conv: output channels
    int ksize = 0;     // conv kernel side
    Act act = Act::identity;

    static LayerSpec dense(int in, int out, Act act) {
        return {Kind::dense, in, out, 0, act};
    }
    static LayerSpec conv(int in_ch, int out_ch, int ksize, Act act) {
        return {Kind::conv, in_ch, out_ch, ksize, act};
    }
    static LayerSpec pool() { return {Kind::pool, 0, 0, 0, Act::identity}; }
    static LayerSpec flatten() { return {Kind::flatten, 0, 0, 0, Act::identity}; }
};

struct NetworkSpec {
    std::string name;
    int input_c = 1, input_h = 0, input_w = 0;
    int classes = 10;
    std::vector<LayerSpec> layers;

    // Named presets: "dense-small", "cnn-mnist", "cnn-fashion", "cnn-cifar".
    static NetworkSpec by_name(const std::string& name);
};

struct Shape {
    int c = 0, h = 0, w = 0;
    std::size_t flat() const {
        return std::size_t(c) * std::size_t(h) * std::size_t(w);
    }
};

// Per-sample forward state kept for the backward pass.
struct Trace {
    std::vector<std::vector<double>> z;        // pre-activations per layer
    std::vector<std::vector<double>> a;        // activations per layer
    std::vector<std::vector<std::size_t>> arg; // pool layers: winner input index
    std::vector<double> logp;                  // class log-probabilities
};

class Network {
  public:
    explicit Network(NetworkSpec spec);

    const NetworkSpec& spec() const { return spec_; }
    std::size_t param_count() const { return n_params_; }
    Shape input_shape() const { return shapes_.front(); }

    std::vector<double> init_params(std::uint64_t seed) const;

    void forward(const double* params, const double* x, Trace& t) const;
    // Cross-entropy loss of the traced forward pass against a class label.
    double loss(const Trace& t, int label) const;
    // Accumulates d(mean batch loss)/d(params) for one sample with weight
    // `scale` into grad (caller zeroes it and sets scale = 1/batch).
    void backward(const double* params, const double* x, const Trace& t,
                  int label, double scale, double* grad) const;

    // Offset bookkeeping for tests and checkpoints.
    struct ParamBlock {
        std::size_t w_off, w_len, b_off, b_len;
        int layer;  // index into spec().layers
    };
    const std::vector<ParamBlock>& blocks() const { return blocks_; }

  private:
    NetworkSpec spec_;
    std::vector<Shape> shapes_;  // shapes_[i] = input shape of layer i; back() = output
    std::vector<ParamBlock> blocks_;
    std::size_t n_params_ = 0;

    friend struct NetAccess;
};

// w[i] -= eta * g[i]
void sgd_step(std::vector<double>& w, const std::vector<double>& g, double eta);

// Central finite differences (step h) of the per-sample loss, with coordinates
// whose two evaluations take different ReLU branches or pool winners flagged
// (the analytic gradient is one-sided there, so the comparison is skipped).
struct FdResult {
    std::vector<double> grad;
    std::vector<std::uint8_t> kink;  // 1 = routing changed between w+h and w-h
};
FdResult finite_difference_grad(const Network& net,
                                const std::vector<double>& params,
                                const double* x, int label, double h = 1e-5);

// Flat binary model checkpoint: magic, spec hash, parameter count, then
// parameters as binary32 in layer order.
void save_checkpoint(const std::string& path, const Network& net,
                     const std::vector<double>& params);
std::vector<double> load_checkpoint(const std::string& path, const Network& net);

}  // namespace airfl::nn
