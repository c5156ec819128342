#include "airfl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "airfl/kernels.hpp"
#include "airfl/rng.hpp"

namespace airfl::nn {
namespace {

double act_apply(Act a, double z) {
    switch (a) {
        case Act::identity: return z;
        case Act::relu: return z > 0.0 ? z : 0.0;
        case Act::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

// Derivative expressed through z and a = act(z); sigmoid uses a*(1-a).
double act_deriv(Act act, double z, double a) {
    switch (act) {
        case Act::identity: return 1.0;
        case Act::relu: return z > 0.0 ? 1.0 : 0.0;
        case Act::sigmoid: return a * (1.0 - a);
    }
    (void)z;
    return 1.0;
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t spec_hash(const NetworkSpec& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s.name) h = fnv1a(h, std::uint64_t(std::uint8_t(c)));
    h = fnv1a(h, std::uint64_t(s.input_c));
    h = fnv1a(h, std::uint64_t(s.input_h));
    h = fnv1a(h, std::uint64_t(s.input_w));
    h = fnv1a(h, std::uint64_t(s.classes));
    for (const auto& l : s.layers) {
        h = fnv1a(h, std::uint64_t(l.kind));
        h = fnv1a(h, std::uint64_t(l.in));
        h = fnv1a(h, std::uint64_t(l.out));
        h = fnv1a(h, std::uint64_t(l.ksize));
        h = fnv1a(h, std::uint64_t(l.act));
    }
    return h;
}

}  // namespace

NetworkSpec NetworkSpec::by_name(const std::string& name) {
    using L = LayerSpec;
    NetworkSpec s;
    s.name = name;
    if (name == "dense-small") {
        s.input_c = 1, s.input_h = 28, s.input_w = 28;
        s.layers = {L::flatten(), L::dense(784, 32, Act::relu),
                    L::dense(32, 10, Act::identity)};
    } else if (name == "cnn-mnist") {
        s.input_c = 1, s.input_h = 28, s.input_w = 28;
        s.layers = {L::conv(1, 10, 5, Act::relu),  L::pool(),
                    L::conv(10, 20, 5, Act::relu), L::pool(),
                    L::flatten(),                  L::dense(320, 50, Act::relu),
                    L::dense(50, 10, Act::identity)};
    } else if (name == "cnn-fashion") {
        s.input_c = 1, s.input_h = 28, s.input_w = 28;
        s.layers = {L::conv(1, 16, 5, Act::relu),  L::pool(),
                    L::conv(16, 32, 5, Act::relu), L::pool(),
                    L::flatten(),                  L::dense(512, 100, Act::relu),
                    L::dense(100, 10, Act::identity)};
    } else if (name == "cnn-cifar") {
        s.input_c = 3, s.input_h = 32, s.input_w = 32;
        s.layers = {L::conv(3, 6, 5, Act::relu),  L::pool(),
                    L::conv(6, 16, 5, Act::relu), L::pool(),
                    L::flatten(),                 L::dense(400, 120, Act::relu),
                    L::dense(120, 84, Act::relu), L::dense(84, 10, Act::identity)};
    } else {
        throw std::invalid_argument("unknown network spec \"" + name + "\"");
    }
    return s;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.layers.empty()) throw std::invalid_argument("network: no layers");
    shapes_.push_back({spec_.input_c, spec_.input_h, spec_.input_w});
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        const Shape in = shapes_.back();
        Shape out;
        switch (l.kind) {
            case LayerSpec::Kind::dense: {
                if (in.c != 1 || in.h != 1)
                    throw std::invalid_argument(
                        "network: dense layer " + std::to_string(i) +
                        " needs a flat input (add a flatten layer)");
                if (std::size_t(l.in) != in.flat())
                    throw std::invalid_argument(
                        "network: dense layer " + std::to_string(i) +
                        " input width " + std::to_string(l.in) +
                        " != incoming size " + std::to_string(in.flat()));
                if (l.out <= 0) throw std::invalid_argument("network: dense out");
                out = {1, 1, l.out};
                ParamBlock b;
                b.layer = int(i);
                b.w_off = n_params_;
                b.w_len = std::size_t(l.out) * std::size_t(l.in);
                b.b_off = b.w_off + b.w_len;
                b.b_len = std::size_t(l.out);
                n_params_ = b.b_off + b.b_len;
                blocks_.push_back(b);
                break;
            }
            case LayerSpec::Kind::conv: {
                if (l.in != in.c)
                    throw std::invalid_argument(
                        "network: conv layer " + std::to_string(i) +
                        " expects " + std::to_string(l.in) + " channels, got " +
                        std::to_string(in.c));
                if (l.ksize <= 0 || in.h < l.ksize || in.w < l.ksize)
                    throw std::invalid_argument(
                        "network: conv layer " + std::to_string(i) +
                        " kernel does not fit the input plane");
                out = {l.out, in.h - l.ksize + 1, in.w - l.ksize + 1};
                ParamBlock b;
                b.layer = int(i);
                b.w_off = n_params_;
                b.w_len = std::size_t(l.out) * std::size_t(l.in) *
                          std::size_t(l.ksize) * std::size_t(l.ksize);
                b.b_off = b.w_off + b.w_len;
                b.b_len = std::size_t(l.out);
                n_params_ = b.b_off + b.b_len;
                blocks_.push_back(b);
                break;
            }
            case LayerSpec::Kind::pool: {
                if (in.h % 2 != 0 || in.w % 2 != 0)
                    throw std::invalid_argument(
                        "network: pool layer " + std::to_string(i) +
                        " needs even input dimensions");
                out = {in.c, in.h / 2, in.w / 2};
                break;
            }
            case LayerSpec::Kind::flatten: {
                out = {1, 1, int(in.flat())};
                break;
            }
        }
        shapes_.push_back(out);
    }
    const LayerSpec& last = spec_.layers.back();
    if (last.kind != LayerSpec::Kind::dense || last.act != Act::identity)
        throw std::invalid_argument(
            "network: final layer must be a dense identity layer (class "
            "log-probabilities are log-softmax of its output)");
    if (last.out != spec_.classes)
        throw std::invalid_argument("network: final width " +
                                    std::to_string(last.out) + " != classes " +
                                    std::to_string(spec_.classes));
}

std::vector<double> Network::init_params(std::uint64_t seed) const {
    std::vector<double> p(n_params_);
    for (const auto& b : blocks_) {
        const LayerSpec& l = spec_.layers[std::size_t(b.layer)];
        const double fan_in =
            l.kind == LayerSpec::Kind::dense
                ? double(l.in)
                : double(l.in) * double(l.ksize) * double(l.ksize);
        const double bound = 1.0 / std::sqrt(fan_in);
        rng::Stream st(
            rng::derive_seed({seed, rng::tag::init, std::uint64_t(b.layer)}));
        for (std::size_t i = 0; i < b.w_len; ++i)
            p[b.w_off + i] = st.uniform(-bound, bound);
        for (std::size_t i = 0; i < b.b_len; ++i)
            p[b.b_off + i] = st.uniform(-bound, bound);
    }
    return p;
}

void Network::forward(const double* params, const double* x, Trace& t) const {
    const std::size_t n_layers = spec_.layers.size();
    t.z.resize(n_layers);
    t.a.resize(n_layers);
    t.arg.resize(n_layers);
    std::size_t block_i = 0;
    const double* a_prev = x;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const LayerSpec& l = spec_.layers[i];
        const Shape in = shapes_[i];
        const Shape out = shapes_[i + 1];
        std::vector<double>& z = t.z[i];
        std::vector<double>& a = t.a[i];
        z.resize(out.flat());
        a.resize(out.flat());
        switch (l.kind) {
            case LayerSpec::Kind::dense: {
                const ParamBlock& b = blocks_[block_i++];
                kern::active().matvec(params + b.w_off, std::size_t(l.out),
                                      std::size_t(l.in), a_prev,
                                      params + b.b_off, z.data());
                for (std::size_t j = 0; j < z.size(); ++j)
                    a[j] = act_apply(l.act, z[j]);
                break;
            }
            case LayerSpec::Kind::conv: {
                const ParamBlock& b = blocks_[block_i++];
                const int K = l.ksize, IH = in.h, IW = in.w, OH = out.h,
                          OW = out.w;
                const double* W = params + b.w_off;
                const double* bias = params + b.b_off;
                for (int o = 0; o < l.out; ++o) {
                    for (int y = 0; y < OH; ++y) {
                        for (int xo = 0; xo < OW; ++xo) {
                            double acc = bias[o];
                            for (int ic = 0; ic < l.in; ++ic) {
                                const double* plane =
                                    a_prev + std::size_t(ic) * IH * IW;
                                const double* ker =
                                    W + ((std::size_t(o) * l.in + ic) * K) * K;
                                for (int p = 0; p < K; ++p)
                                    for (int q = 0; q < K; ++q)
                                        acc += ker[p * K + q] *
                                               plane[(y + p) * IW + (xo + q)];
                            }
                            z[(std::size_t(o) * OH + y) * OW + xo] = acc;
                        }
                    }
                }
                for (std::size_t j = 0; j < z.size(); ++j)
                    a[j] = act_apply(l.act, z[j]);
                break;
            }
            case LayerSpec::Kind::pool: {
                std::vector<std::size_t>& arg = t.arg[i];
                arg.resize(out.flat());
                const int IH = in.h, IW = in.w, OH = out.h, OW = out.w;
                for (int c = 0; c < in.c; ++c) {
                    const double* plane = a_prev + std::size_t(c) * IH * IW;
                    for (int y = 0; y < OH; ++y) {
                        for (int xo = 0; xo < OW; ++xo) {
                            std::size_t best =
                                std::size_t(2 * y) * IW + std::size_t(2 * xo);
                            double bv = plane[best];
                            for (int dy = 0; dy < 2; ++dy) {
                                for (int dx = 0; dx < 2; ++dx) {
                                    const std::size_t ii =
                                        std::size_t(2 * y + dy) * IW +
                                        std::size_t(2 * xo + dx);
                                    if (plane[ii] > bv) {  // ties keep first
                                        bv = plane[ii];
                                        best = ii;
                                    }
                                }
                            }
                            const std::size_t oi =
                                (std::size_t(c) * OH + y) * OW + xo;
                            z[oi] = bv;
                            a[oi] = bv;
                            arg[oi] = std::size_t(c) * IH * IW + best;
                        }
                    }
                }
                break;
            }
            case LayerSpec::Kind::flatten: {
                std::copy(a_prev, a_prev + in.flat(), z.begin());
                a = z;
                break;
            }
        }
        a_prev = a.data();
    }
    // log-softmax with max subtraction
    const std::vector<double>& last = t.a.back();
    t.logp.resize(last.size());
    double m = last[0];
    for (double v : last) m = std::max(m, v);
    double s = 0.0;
    for (double v : last) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < last.size(); ++j) t.logp[j] = last[j] - lse;
}

double Network::loss(const Trace& t, int label) const {
    if (label < 0 || std::size_t(label) >= t.logp.size())
        throw std::invalid_argument("loss: label out of range");
    return -t.logp[std::size_t(label)];
}

void Network::backward(const double* params, const double* x, const Trace& t,
                       int label, double scale, double* grad) const {
    if (label < 0 || std::size_t(label) >= t.logp.size())
        throw std::invalid_argument("backward: label out of range");
    const std::size_t n_layers = spec_.layers.size();
    // d = dC/d(output activations of the current layer); starts as the
    // softmax/cross-entropy delta (the final layer has identity activation).
    std::vector<double> d(t.logp.size());
    for (std::size_t j = 0; j < d.size(); ++j)
        d[j] = scale * (std::exp(t.logp[j]) - (std::size_t(label) == j ? 1.0 : 0.0));

    std::size_t block_i = blocks_.size();
    std::vector<double> d_prev;
    for (std::size_t ii = n_layers; ii-- > 0;) {
        const LayerSpec& l = spec_.layers[ii];
        const Shape in = shapes_[ii];
        const double* a_in = ii == 0 ? x : t.a[ii - 1].data();
        switch (l.kind) {
            case LayerSpec::Kind::dense: {
                const ParamBlock& b = blocks_[--block_i];
                // d(z) = d(a) * act'(z)
                for (std::size_t j = 0; j < d.size(); ++j)
                    d[j] *= act_deriv(l.act, t.z[ii][j], t.a[ii][j]);
                kern::active().outer_acc(grad + b.w_off, d.data(),
                                         std::size_t(l.out), a_in,
                                         std::size_t(l.in));
                for (std::size_t j = 0; j < b.b_len; ++j)
                    grad[b.b_off + j] += d[j];
                if (ii == 0) return;
                d_prev.assign(in.flat(), 0.0);
                kern::active().matvec_t_acc(params + b.w_off, std::size_t(l.out),
                                            std::size_t(l.in), d.data(),
                                            d_prev.data());
                break;
            }
            case LayerSpec::Kind::conv: {
                const ParamBlock& b = blocks_[--block_i];
                const Shape out = shapes_[ii + 1];
                for (std::size_t j = 0; j < d.size(); ++j)
                    d[j] *= act_deriv(l.act, t.z[ii][j], t.a[ii][j]);
                const int K = l.ksize, IH = in.h, IW = in.w, OH = out.h,
                          OW = out.w;
                double* gW = grad + b.w_off;
                double* gB = grad + b.b_off;
                const double* W = params + b.w_off;
                if (ii > 0) d_prev.assign(in.flat(), 0.0);
                for (int o = 0; o < l.out; ++o) {
                    for (int y = 0; y < OH; ++y) {
                        for (int xo = 0; xo < OW; ++xo) {
                            const double dv =
                                d[(std::size_t(o) * OH + y) * OW + xo];
                            if (dv == 0.0) continue;
                            gB[o] += dv;
                            for (int ic = 0; ic < l.in; ++ic) {
                                const double* plane =
                                    a_in + std::size_t(ic) * IH * IW;
                                double* gker =
                                    gW + ((std::size_t(o) * l.in + ic) * K) * K;
                                const double* ker =
                                    W + ((std::size_t(o) * l.in + ic) * K) * K;
                                double* dplane =
                                    ii > 0 ? d_prev.data() +
                                                 std::size_t(ic) * IH * IW
                                           : nullptr;
                                for (int p = 0; p < K; ++p) {
                                    for (int q = 0; q < K; ++q) {
                                        gker[p * K + q] +=
                                            dv * plane[(y + p) * IW + (xo + q)];
                                        if (dplane)
                                            dplane[(y + p) * IW + (xo + q)] +=
                                                dv * ker[p * K + q];
                                    }
                                }
                            }
                        }
                    }
                }
                if (ii == 0) return;
                break;
            }
            case LayerSpec::Kind::pool: {
                if (ii == 0) return;
                d_prev.assign(in.flat(), 0.0);
                const std::vector<std::size_t>& arg = t.arg[ii];
                for (std::size_t j = 0; j < d.size(); ++j)
                    d_prev[arg[j]] += d[j];
                break;
            }
            case LayerSpec::Kind::flatten: {
                if (ii == 0) return;
                d_prev = d;  // same data, different logical shape
                break;
            }
        }
        d.swap(d_prev);
    }
}

void sgd_step(std::vector<double>& w, const std::vector<double>& g, double eta) {
    if (w.size() != g.size())
        throw std::invalid_argument("sgd_step: size mismatch");
    kern::active().axpy(-eta, g.data(), w.data(), w.size());
}

FdResult finite_difference_grad(const Network& net,
                                const std::vector<double>& params,
                                const double* x, int label, double h) {
    if (params.size() != net.param_count())
        throw std::invalid_argument("finite_difference_grad: size mismatch");
    FdResult r;
    r.grad.resize(params.size());
    r.kink.assign(params.size(), 0);
    std::vector<double> p = params;
    Trace t;
    // Loss plus the routing signature: ReLU branch bits and pool winners.
    std::vector<std::size_t> sig_a, sig_b;
    const auto eval = [&](std::vector<std::size_t>& sig) {
        net.forward(p.data(), x, t);
        sig.clear();
        const auto& layers = net.spec().layers;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].kind == LayerSpec::Kind::pool) {
                sig.insert(sig.end(), t.arg[i].begin(), t.arg[i].end());
            } else if (layers[i].act == Act::relu) {
                for (double z : t.z[i]) sig.push_back(z > 0.0 ? 1 : 0);
            }
        }
        return net.loss(t, label);
    };
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + h;
        const double lp = eval(sig_a);
        p[i] = orig - h;
        const double lm = eval(sig_b);
        p[i] = orig;
        r.grad[i] = (lp - lm) / (2.0 * h);
        if (sig_a != sig_b) r.kink[i] = 1;
    }
    return r;
}

namespace {
constexpr std::uint64_t kCkptMagic = 0x31544b434c464125ull;  // "%AFLCKT1" bytes
void put_u64(std::ofstream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xffu);
    os.write(b, 8);
}
std::uint64_t get_u64(std::ifstream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const Network& net,
                     const std::vector<double>& params) {
    if (params.size() != net.param_count())
        throw std::invalid_argument("save_checkpoint: size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    put_u64(os, kCkptMagic);
    put_u64(os, spec_hash(net.spec()));
    put_u64(os, params.size());
    for (double v : params) {
        const float f = float(v);
        char b[4];
        std::memcpy(b, &f, 4);
        os.write(b, 4);
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

std::vector<double> load_checkpoint(const std::string& path,
                                    const Network& net) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    if (get_u64(is) != kCkptMagic)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    if (get_u64(is) != spec_hash(net.spec()))
        throw std::runtime_error(
            "load_checkpoint: checkpoint was written for a different network "
            "spec: " +
            path);
    const std::uint64_t n = get_u64(is);
    if (n != net.param_count())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    std::vector<double> p(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        char b[4];
        is.read(b, 4);
        float f;
        std::memcpy(&f, b, 4);
        p[i] = double(f);
    }
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return p;
}

}  // namespace airfl::nn
