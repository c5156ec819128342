#include "airfl/kernels.hpp"

// AVX2 backend. Mirrors the scalar reference exactly: same striping, same
// operation order, no FMA. Compiled with -mavx2 only; callers go through
// dispatch, which checks CPU support at runtime.

#if defined(AIRFL_BUILD_AVX2) && defined(__AVX2__)

#include <immintrin.h>

#include <bit>
#include <cmath>

namespace airfl::kern {
namespace {

constexpr std::uint32_t kExpMsbClear = 0xBFFFFFFFu;

void v_mask_words(std::uint32_t* w, std::size_t n) {
    const __m256i m = _mm256_set1_epi32(std::int32_t(kExpMsbClear));
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(w + i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(w + i),
                            _mm256_and_si256(v, m));
    }
    for (; i < n; ++i) w[i] &= kExpMsbClear;
}

void v_clip(double* x, std::size_t n, double lo, double hi) {
    const __m256d vlo = _mm256_set1_pd(lo), vhi = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        // bounds as first operand: NaN lanes propagate v, like the scalar code
        v = _mm256_max_pd(vlo, v);
        v = _mm256_min_pd(vhi, v);
        _mm256_storeu_pd(x + i, v);
    }
    for (; i < n; ++i) {
        double v = x[i];
        v = v < lo ? lo : v;
        v = v > hi ? hi : v;
        x[i] = v;
    }
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

// (acc0+acc1) + (acc2+acc3), matching the scalar combine exactly.
inline double hsum_striped(__m256d acc) {
    const __m128d lo = _mm256_castpd256_pd128(acc);     // lanes 0,1
    const __m128d hi = _mm256_extractf128_pd(acc, 1);   // lanes 2,3
    const __m128d h = _mm_hadd_pd(lo, hi);              // [a0+a1, a2+a3]
    return _mm_cvtsd_f64(h) + _mm_cvtsd_f64(_mm_unpackhi_pd(h, h));
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d p = _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                        _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, p);
    }
    double s = hsum_striped(acc);
    for (std::size_t i = n4; i < n; ++i) s += a[i] * b[i];
    return s;
}

double v_l2diff_sq(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                        _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum_striped(acc);
    for (std::size_t i = n4; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void v_matvec(const double* W, std::size_t rows, std::size_t cols,
              const double* x, const double* bias, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        double v = v_dot(W + r * cols, x, cols);
        if (bias) v += bias[r];
        out[r] = v;
    }
}

void v_matvec_t_acc(const double* W, std::size_t rows, std::size_t cols,
                    const double* dz, double* dx) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double d = dz[r];
        const __m256d vd = _mm256_set1_pd(d);
        const double* row = W + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d p = _mm256_mul_pd(vd, _mm256_loadu_pd(row + c));
            _mm256_storeu_pd(dx + c, _mm256_add_pd(_mm256_loadu_pd(dx + c), p));
        }
        for (; c < cols; ++c) dx[c] += d * row[c];
    }
}

void v_outer_acc(double* G, const double* u, std::size_t rows, const double* v,
                 std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ur = u[r];
        const __m256d vu = _mm256_set1_pd(ur);
        double* row = G + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            const __m256d p = _mm256_mul_pd(vu, _mm256_loadu_pd(v + c));
            _mm256_storeu_pd(row + c, _mm256_add_pd(_mm256_loadu_pd(row + c), p));
        }
        for (; c < cols; ++c) row[c] += ur * v[c];
    }
}

void v_equalize(const double* r_re, const double* r_im, const double* c_re,
                const double* c_im, std::size_t n, double* y_re, double* y_im,
                std::uint8_t* erased) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d cre = _mm256_loadu_pd(c_re + i);
        const __m256d cim = _mm256_loadu_pd(c_im + i);
        const __m256d rre = _mm256_loadu_pd(r_re + i);
        const __m256d rim = _mm256_loadu_pd(r_im + i);
        const __m256d den = _mm256_add_pd(_mm256_mul_pd(cre, cre),
                                          _mm256_mul_pd(cim, cim));
        const __m256d nre = _mm256_add_pd(_mm256_mul_pd(rre, cre),
                                          _mm256_mul_pd(rim, cim));
        const __m256d nim = _mm256_sub_pd(_mm256_mul_pd(rim, cre),
                                          _mm256_mul_pd(rre, cim));
        _mm256_storeu_pd(y_re + i, _mm256_div_pd(nre, den));
        _mm256_storeu_pd(y_im + i, _mm256_div_pd(nim, den));
        const int z = _mm256_movemask_pd(_mm256_cmp_pd(den, zero, _CMP_EQ_OQ));
        erased[i + 0] = (z >> 0) & 1;
        erased[i + 1] = (z >> 1) & 1;
        erased[i + 2] = (z >> 2) & 1;
        erased[i + 3] = (z >> 3) & 1;
    }
    for (; i < n; ++i) {
        const double den = c_re[i] * c_re[i] + c_im[i] * c_im[i];
        const double nre = r_re[i] * c_re[i] + r_im[i] * c_im[i];
        const double nim = r_im[i] * c_re[i] - r_re[i] * c_im[i];
        y_re[i] = nre / den;
        y_im[i] = nim / den;
        erased[i] = den == 0.0 ? 1 : 0;
    }
}

inline std::uint32_t s_gray_of(std::int32_t level) {
    const std::uint32_t u = std::uint32_t(level);
    return u ^ (u >> 1);
}

inline std::uint32_t s_slice_axis(double u, int levels) {
    const double pos = (u + double(levels - 1)) * 0.5;
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
    if (d_lo < d_hi) return s_gray_of(lo);
    if (d_hi < d_lo) return s_gray_of(hi);
    const std::uint32_t g_lo = s_gray_of(lo), g_hi = s_gray_of(hi);
    return g_lo < g_hi ? g_lo : g_hi;
}

// One axis, 4 samples -> 4 Gray codes in a __m128i.
inline __m128i v_slice_axis4(__m256d y, __m256d vscale, int levels) {
    const __m256d lm1 = _mm256_set1_pd(double(levels - 1));
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d u = _mm256_mul_pd(y, vscale);
    const __m256d pos = _mm256_mul_pd(_mm256_add_pd(u, lm1), half);
    __m256d f = _mm256_floor_pd(pos);
    f = _mm256_max_pd(f, _mm256_setzero_pd());
    f = _mm256_min_pd(f, _mm256_set1_pd(double(levels - 2)));
    const __m128i lo32 = _mm256_cvttpd_epi32(f);  // f integral, exact
    // grid coordinates from f: a_lo = 2f - (levels-1), a_hi = a_lo + 2
    const __m256d a_lo = _mm256_sub_pd(_mm256_add_pd(f, f), lm1);
    const __m256d a_hi = _mm256_add_pd(a_lo, _mm256_set1_pd(2.0));
    const __m256d d_lo = _mm256_sub_pd(u, a_lo);
    const __m256d d_hi = _mm256_sub_pd(a_hi, u);
    const __m256d lt = _mm256_cmp_pd(d_lo, d_hi, _CMP_LT_OQ);  // pick lo
    const __m256d gt = _mm256_cmp_pd(d_hi, d_lo, _CMP_LT_OQ);  // pick hi
    // compress 64-bit lane masks to 32-bit lanes
    const __m256i perm = _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0);
    const __m128i mlt = _mm256_castsi256_si128(_mm256_permutevar8x32_epi32(
        _mm256_castpd_si256(lt), perm));
    const __m128i mgt = _mm256_castsi256_si128(_mm256_permutevar8x32_epi32(
        _mm256_castpd_si256(gt), perm));
    const __m128i hi32 = _mm_add_epi32(lo32, _mm_set1_epi32(1));
    const __m128i g_lo = _mm_xor_si128(lo32, _mm_srli_epi32(lo32, 1));
    const __m128i g_hi = _mm_xor_si128(hi32, _mm_srli_epi32(hi32, 1));
    const __m128i g_min = _mm_min_epu32(g_lo, g_hi);  // tie rule
    __m128i g = g_min;
    g = _mm_blendv_epi8(g, g_lo, mlt);
    g = _mm_blendv_epi8(g, g_hi, _mm_andnot_si128(mlt, mgt));
    return g;
}

void v_slice(const double* y_re, const double* y_im, const std::uint8_t* erased,
             std::size_t n, int levels, double scale, std::uint32_t* labels) {
    int axis_bits = 0;
    for (int l = levels; l > 1; l >>= 1) ++axis_bits;
    const __m256d vscale = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m128i gi = v_slice_axis4(_mm256_loadu_pd(y_re + i), vscale, levels);
        const __m128i gq = v_slice_axis4(_mm256_loadu_pd(y_im + i), vscale, levels);
        __m128i lab = _mm_or_si128(_mm_slli_epi32(gi, axis_bits), gq);
        // zero the erased lanes
        std::int32_t er4;
        __builtin_memcpy(&er4, erased + i, 4);
        const __m128i er = _mm_cvtepu8_epi32(_mm_cvtsi32_si128(er4));
        lab = _mm_andnot_si128(_mm_cmpgt_epi32(er, _mm_setzero_si128()), lab);
        _mm_storeu_si128(reinterpret_cast<__m128i*>(labels + i), lab);
    }
    for (; i < n; ++i) {
        if (erased[i]) {
            labels[i] = 0;
            continue;
        }
        const std::uint32_t gi = s_slice_axis(y_re[i] * scale, levels);
        const std::uint32_t gq = s_slice_axis(y_im[i] * scale, levels);
        labels[i] = (gi << axis_bits) | gq;
    }
}

std::uint64_t v_mask_violations(std::uint64_t begin, std::uint64_t end) {
    const __m256i vmask = _mm256_set1_epi32(std::int32_t(kExpMsbClear));
    const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7FFFFFFF));
    const __m256 two = _mm256_set1_ps(2.0f);
    const __m256i step = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
    std::uint64_t bad = 0;
    std::uint64_t v = begin;
    for (; v + 8 <= end; v += 8) {
        const __m256i idx = _mm256_add_epi32(_mm256_set1_epi32(std::int32_t(v)),
                                             step);
        const __m256i m = _mm256_and_si256(idx, vmask);
        const __m256 f = _mm256_castsi256_ps(m);
        const __m256 a = _mm256_and_ps(f, abs_mask);
        // ordered LT: NaN compares false and would be counted as a violation
        const __m256 ok = _mm256_cmp_ps(a, two, _CMP_LT_OQ);
        bad += 8 - __builtin_popcount(std::uint32_t(_mm256_movemask_ps(ok)));
    }
    for (; v < end; ++v) {
        const std::uint32_t m = std::uint32_t(v) & kExpMsbClear;
        const float f = std::bit_cast<float>(m);
        if (!(std::fabs(f) < 2.0f)) ++bad;
    }
    return bad;
}

const Ops avx2_ops = {
    "avx2",      v_mask_words, v_clip,     v_axpy,
    v_dot,       v_l2diff_sq,  v_matvec,   v_matvec_t_acc,
    v_outer_acc, v_equalize,   v_slice,    v_mask_violations,
};

}  // namespace

const Ops* avx2_ops_or_null() { return &avx2_ops; }

}  // namespace airfl::kern

#else  // no AVX2 at build time

namespace airfl::kern {
const Ops* avx2_ops_or_null() { return nullptr; }
}  // namespace airfl::kern

#endif
