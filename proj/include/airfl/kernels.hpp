#pragma once

// Data-parallel inner loops with interchangeable backends. The scalar backend
// is the reference; the AVX2 backend must produce bit-identical results, which
// the contract below makes possible:
//
//  * reductions (dot, l2diff_sq, matvec rows) keep four striped partial sums,
//    acc[j] accumulating elements i with i % 4 == j over the aligned prefix,
//    combined as (acc0+acc1) + (acc2+acc3), tail elements added last in order;
//  * no fused multiply-add anywhere (the build also disables fp contraction);
//  * complex equalization is spelled out as y = r*conj(c) / (re^2 + im^2) with
//    a fixed evaluation order;
//  * the QAM slicer works per axis on equalized symbols: candidate grid levels
//    bracket the sample, signed distances are compared, and an exact tie picks
//    the level with the smaller Gray code (lowest-label rule).
//
// Backend selection: runtime CPU detection, overridable with force() or the
// AIRFL_KERNELS environment variable ("scalar" / "avx2").

#include <cstddef>
#include <cstdint>

namespace airfl::kern {

struct Ops {
    const char* name;

    // words &= 0xBFFFFFFF  (clear IEEE-754 binary32 exponent MSB, bit index 1)
    void (*mask_words)(std::uint32_t* w, std::size_t n);

    // x[i] = min(max(x[i], lo), hi)
    void (*clip)(double* x, std::size_t n, double lo, double hi);

    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    // striped-4 reduction, see contract above
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*l2diff_sq)(const double* a, const double* b, std::size_t n);

    // out[r] = dot(W[r,:], x) + (bias ? bias[r] : 0); W row-major rows x cols
    void (*matvec)(const double* W, std::size_t rows, std::size_t cols,
                   const double* x, const double* bias, double* out);

    // dx[c] += sum_r dz[r] * W[r,c], accumulated row by row
    void (*matvec_t_acc)(const double* W, std::size_t rows, std::size_t cols,
                         const double* dz, double* dx);

    // G[r,c] += u[r] * v[c]
    void (*outer_acc)(double* G, const double* u, std::size_t rows,
                      const double* v, std::size_t cols);

    // y = r * conj(c) / |c|^2 elementwise; erased[i] = 1 where |c|^2 == 0
    void (*equalize)(const double* r_re, const double* r_im,
                     const double* c_re, const double* c_im, std::size_t n,
                     double* y_re, double* y_im, std::uint8_t* erased);

    // Per-axis Gray slicer. levels = grid levels per axis (2/4/16), scale maps
    // the unit-energy constellation back to odd-integer grid coordinates.
    // labels[i] = (gray_i << axis_bits) | gray_q, or 0 where erased.
    void (*slice)(const double* y_re, const double* y_im,
                  const std::uint8_t* erased, std::size_t n, int levels,
                  double scale, std::uint32_t* labels);

    // Count bit patterns v in [begin, end) whose masked float violates the
    // containment guarantee, i.e. !(|bitcast(v & 0xBFFFFFFF)| < 2.0f).
    std::uint64_t (*mask_violations)(std::uint64_t begin, std::uint64_t end);
};

const Ops& scalar();
bool avx2_available();   // compiled in and supported by this CPU
const Ops& avx2();       // valid only if avx2_available()
const Ops& active();
void force(const char* name);  // "scalar" | "avx2" | nullptr to reset to auto

}  // namespace airfl::kern
