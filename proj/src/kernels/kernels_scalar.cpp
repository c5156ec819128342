#include "airfl/kernels.hpp"

#include <bit>
#include <cmath>

// Reference backend. Every loop here defines the exact arithmetic the SIMD
// backends must reproduce bit-for-bit.

namespace airfl::kern {
namespace {

constexpr std::uint32_t kExpMsbClear = 0xBFFFFFFFu;

void s_mask_words(std::uint32_t* w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w[i] &= kExpMsbClear;
}

void s_clip(double* x, std::size_t n, double lo, double hi) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = x[i];
        v = v < lo ? lo : v;
        v = v > hi ? hi : v;
        x[i] = v;
    }
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        acc0 += a[i + 0] * b[i + 0];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    double s = (acc0 + acc1) + (acc2 + acc3);
    for (std::size_t i = n4; i < n; ++i) s += a[i] * b[i];
    return s;
}

double s_l2diff_sq(const double* a, const double* b, std::size_t n) {
    double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const double d0 = a[i + 0] - b[i + 0];
        const double d1 = a[i + 1] - b[i + 1];
        const double d2 = a[i + 2] - b[i + 2];
        const double d3 = a[i + 3] - b[i + 3];
        acc0 += d0 * d0;
        acc1 += d1 * d1;
        acc2 += d2 * d2;
        acc3 += d3 * d3;
    }
    double s = (acc0 + acc1) + (acc2 + acc3);
    for (std::size_t i = n4; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void s_matvec(const double* W, std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        double v = s_dot(W + r * cols, x, cols);
        if (bias) v += bias[r];
        out[r] = v;
    }
}

void s_matvec_t_acc(const double* W, std::size_t rows, std::size_t cols,
                    const double* dz, double* dx) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double d = dz[r];
        const double* row = W + r * cols;
        for (std::size_t c = 0; c < cols; ++c) dx[c] += d * row[c];
    }
}

void s_outer_acc(double* G, const double* u, std::size_t rows, const double* v,
                 std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ur = u[r];
        double* row = G + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += ur * v[c];
    }
}

void s_equalize(const double* r_re, const double* r_im, const double* c_re,
                const double* c_im, std::size_t n, double* y_re, double* y_im,
                std::uint8_t* erased) {
    for (std::size_t i = 0; i < n; ++i) {
        const double den = c_re[i] * c_re[i] + c_im[i] * c_im[i];
        const double nre = r_re[i] * c_re[i] + r_im[i] * c_im[i];
        const double nim = r_im[i] * c_re[i] - r_re[i] * c_im[i];
        y_re[i] = nre / den;
        y_im[i] = nim / den;
        erased[i] = den == 0.0 ? 1 : 0;
    }
}

inline std::uint32_t gray_of(std::int32_t level) {
    const std::uint32_t u = std::uint32_t(level);
    return u ^ (u >> 1);
}

// Nearest grid level on one axis, exact midpoint tie -> smaller Gray code.
// Grid coordinate of level l is 2l - (levels-1); u is the equalized sample
// scaled back into grid coordinates.
inline std::uint32_t slice_axis(double u, int levels) {
    const double pos = (u + double(levels - 1)) * 0.5;  // level coordinate
    double f = std::floor(pos);
    if (f < 0.0) f = 0.0;
    const double fmax = double(levels - 2);
    if (f > fmax) f = fmax;
    const std::int32_t lo = std::int32_t(f);
    const std::int32_t hi = lo + 1;
    const double a_lo = double(2 * lo - (levels - 1));
    const double a_hi = double(2 * hi - (levels - 1));
    const double d_lo = u - a_lo;
    const double d_hi = a_hi - u;
    if (d_lo < d_hi) return gray_of(lo);
    if (d_hi < d_lo) return gray_of(hi);
    const std::uint32_t g_lo = gray_of(lo), g_hi = gray_of(hi);
    return g_lo < g_hi ? g_lo : g_hi;
}

void s_slice(const double* y_re, const double* y_im, const std::uint8_t* erased,
             std::size_t n, int levels, double scale, std::uint32_t* labels) {
    int axis_bits = 0;
    for (int l = levels; l > 1; l >>= 1) ++axis_bits;
    for (std::size_t i = 0; i < n; ++i) {
        if (erased[i]) {
            labels[i] = 0;
            continue;
        }
        const std::uint32_t gi = slice_axis(y_re[i] * scale, levels);
        const std::uint32_t gq = slice_axis(y_im[i] * scale, levels);
        labels[i] = (gi << axis_bits) | gq;
    }
}

std::uint64_t s_mask_violations(std::uint64_t begin, std::uint64_t end) {
    std::uint64_t bad = 0;
    for (std::uint64_t v = begin; v < end; ++v) {
        const std::uint32_t m = std::uint32_t(v) & kExpMsbClear;
        const float f = std::bit_cast<float>(m);
        if (!(std::fabs(f) < 2.0f)) ++bad;
    }
    return bad;
}

}  // namespace

const Ops& scalar() {
    static const Ops ops = {
        "scalar",    s_mask_words, s_clip,     s_axpy,
        s_dot,       s_l2diff_sq,  s_matvec,   s_matvec_t_acc,
        s_outer_acc, s_equalize,   s_slice,    s_mask_violations,
    };
    return ops;
}

}  // namespace airfl::kern
