#pragma once

// Gray-coded square QAM (orders 4 / 16 / 256), unit average symbol energy.
//
// Labels concatenate the two axis codes, in-phase half first: with h bits per
// axis, label = (gray_i << h) | gray_q, and the first bit on the wire is the
// label MSB. Each axis uses the reflected Gray code over amplitude-ascending
// levels {-(L-1), ..., -1, +1, ..., +L-1} / sqrt(E), so axis-adjacent points
// differ in exactly one label bit.
//
// Demodulation assumes perfect channel knowledge: the receiver equalizes
// y = r/c and picks the nearest constellation point, which for a square grid
// separates per axis; an exact tie picks the lowest label, a zero channel
// gain yields label 0 (erased).

#include <complex>
#include <cstdint>
#include <ostream>
#include <vector>

namespace airfl::modem {

struct Constellation {
    int order;        // 4, 16, 256
    int bps;          // bits per symbol
    int levels;       // per axis
    double scale;     // sqrt(2*mean(level^2)): grid coordinate = point * scale
    std::vector<std::complex<double>> points;  // indexed by label

    static const Constellation& get(int order);  // throws on unsupported order
};

// bits -> symbols; bits.size() must be a multiple of bps (one bit per byte).
std::vector<std::complex<double>> modulate(const std::vector<std::uint8_t>& bits,
                                           int order);

// received/gains -> hard-decision bits (the ML rule above).
std::vector<std::uint8_t> demodulate(const std::vector<std::complex<double>>& received,
                                     const std::vector<std::complex<double>>& gains,
                                     int order);

// Exhaustive-search ML demodulation of one symbol: argmin over all points of
// |r - c*s|^2, ties to the lowest label. Reference implementation for tests.
std::uint32_t demod_symbol_reference(std::complex<double> r,
                                     std::complex<double> c, int order);

// Per-symbol single-error model: a transmitted symbol is misread as one of
// its grid neighbours, with weight 1 (in units of the elementary error
// probability rho) per axis-adjacent neighbour and sqrt(2) per diagonal
// neighbour. Symbols are indexed over the grid row-major starting at the
// (+I, +Q) corner, I descending along a row, Q descending across rows (the
// usual constellation-map reading order).
struct SymbolErrorEntry {
    std::uint32_t label;                 // bit label of this grid position
    std::vector<std::uint32_t> neighbors;  // labels of possible error symbols
    // weight[k] = (a, b) meaning (a + b*sqrt(2)) * rho for label bit k flips
    std::vector<std::pair<int, int>> bit_weight;
};
std::vector<SymbolErrorEntry> neighbor_error_table(int order);

// Label bit positions sorted most-reliable first: ascending total flip weight
// over the neighbor table, ties by position index.
std::vector<int> bit_reliability_order(int order);

// CSV dump: header + one "label,i,q" row per point, label ascending.
void dump_constellation_csv(int order, std::ostream& os);

}  // namespace airfl::modem
