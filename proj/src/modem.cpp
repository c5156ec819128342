#include "airfl/modem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "airfl/kernels.hpp"

namespace airfl::modem {
namespace {

std::uint32_t gray(std::uint32_t v) { return v ^ (v >> 1); }

int bits_of(int order) {
    switch (order) {
        case 4: return 2;
        case 16: return 4;
        case 256: return 8;
        default:
            throw std::invalid_argument("modem: unsupported order " +
                                        std::to_string(order));
    }
}

Constellation build(int order) {
    Constellation c;
    c.order = order;
    c.bps = bits_of(order);
    c.levels = 1 << (c.bps / 2);
    const int L = c.levels;
    double e = 0.0;
    for (int l = 0; l < L; ++l) {
        const double a = double(2 * l - (L - 1));
        e += a * a;
    }
    e = 2.0 * e / L;            // E[|s|^2] on the odd-integer grid
    c.scale = std::sqrt(e);
    c.points.assign(std::size_t(order), {});
    const int h = c.bps / 2;
    for (int li = 0; li < L; ++li) {
        const double ai = double(2 * li - (L - 1)) / c.scale;
        for (int lq = 0; lq < L; ++lq) {
            const double aq = double(2 * lq - (L - 1)) / c.scale;
            const std::uint32_t label =
                (gray(std::uint32_t(li)) << h) | gray(std::uint32_t(lq));
            c.points[label] = {ai, aq};
        }
    }
    return c;
}

}  // namespace

const Constellation& Constellation::get(int order) {
    static const Constellation c4 = build(4);
    static const Constellation c16 = build(16);
    static const Constellation c256 = build(256);
    switch (order) {
        case 4: return c4;
        case 16: return c16;
        case 256: return c256;
        default:
            throw std::invalid_argument("modem: unsupported order " +
                                        std::to_string(order));
    }
}

std::vector<std::complex<double>> modulate(const std::vector<std::uint8_t>& bits,
                                           int order) {
    const Constellation& c = Constellation::get(order);
    if (bits.size() % std::size_t(c.bps) != 0)
        throw std::invalid_argument("modulate: bit count not divisible by bps");
    const std::size_t n = bits.size() / std::size_t(c.bps);
    std::vector<std::complex<double>> sym(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t label = 0;
        for (int j = 0; j < c.bps; ++j)
            label = (label << 1) | bits[i * std::size_t(c.bps) + std::size_t(j)];
        sym[i] = c.points[label];
    }
    return sym;
}

std::vector<std::uint8_t> demodulate(const std::vector<std::complex<double>>& received,
                                     const std::vector<std::complex<double>>& gains,
                                     int order) {
    const Constellation& c = Constellation::get(order);
    if (received.size() != gains.size())
        throw std::invalid_argument("demodulate: received/gains size mismatch");
    const std::size_t n = received.size();
    std::vector<double> rre(n), rim(n), cre(n), cim(n), yre(n), yim(n);
    std::vector<std::uint8_t> erased(n);
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        rre[i] = received[i].real();
        rim[i] = received[i].imag();
        cre[i] = gains[i].real();
        cim[i] = gains[i].imag();
    }
    const kern::Ops& k = kern::active();
    k.equalize(rre.data(), rim.data(), cre.data(), cim.data(), n, yre.data(),
               yim.data(), erased.data());
    k.slice(yre.data(), yim.data(), erased.data(), n, c.levels, c.scale,
            labels.data());
    std::vector<std::uint8_t> bits(n * std::size_t(c.bps));
    for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < c.bps; ++j)
            bits[i * std::size_t(c.bps) + std::size_t(j)] =
                std::uint8_t((labels[i] >> (c.bps - 1 - j)) & 1u);
    return bits;
}

std::uint32_t demod_symbol_reference(std::complex<double> r,
                                     std::complex<double> c, int order) {
    const Constellation& cons = Constellation::get(order);
    if (c.real() == 0.0 && c.imag() == 0.0) return 0;  // erased
    std::uint32_t best = 0;
    double best_d = 0.0;
    bool first = true;
    for (std::uint32_t label = 0; label < std::uint32_t(order); ++label) {
        const std::complex<double> d = r - c * cons.points[label];
        const double dist = d.real() * d.real() + d.imag() * d.imag();
        if (first || dist < best_d) {  // lowest label wins ties
            best = label;
            best_d = dist;
            first = false;
        }
    }
    return best;
}

namespace {

// Grid position of symbol index s (see header): row-major from the (+I, +Q)
// corner. Returns per-axis level indices (amplitude-ascending).
struct GridPos {
    int li, lq;
};
GridPos grid_pos(int s, int L) {
    const int row = s / L, col = s % L;
    return {L - 1 - col, L - 1 - row};
}

std::uint32_t label_at(const GridPos& p, int h) {
    return (gray(std::uint32_t(p.li)) << h) | gray(std::uint32_t(p.lq));
}

}  // namespace

std::vector<SymbolErrorEntry> neighbor_error_table(int order) {
    const Constellation& c = Constellation::get(order);
    const int L = c.levels, h = c.bps / 2;
    std::vector<SymbolErrorEntry> table(static_cast<std::size_t>(order));
    for (int s = 0; s < order; ++s) {
        const GridPos p = grid_pos(s, L);
        SymbolErrorEntry& e = table[std::size_t(s)];
        e.label = label_at(p, h);
        e.bit_weight.assign(std::size_t(c.bps), {0, 0});
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const int row = s / L + dr, col = s % L + dc;
                if (row < 0 || row >= L || col < 0 || col >= L) continue;
                const GridPos q = grid_pos(row * L + col, L);
                const std::uint32_t ql = label_at(q, h);
                e.neighbors.push_back(ql);
                const bool diagonal = dr != 0 && dc != 0;
                const std::uint32_t flips = e.label ^ ql;
                for (int k = 0; k < c.bps; ++k) {
                    if (!((flips >> (c.bps - 1 - k)) & 1u)) continue;
                    if (diagonal)
                        e.bit_weight[std::size_t(k)].second += 1;  // +sqrt(2)
                    else
                        e.bit_weight[std::size_t(k)].first += 1;   // +1
                }
            }
        }
        std::sort(e.neighbors.begin(), e.neighbors.end());
    }
    return table;
}

std::vector<int> bit_reliability_order(int order) {
    const auto table = neighbor_error_table(order);
    const int bps = bits_of(order);
    // Accumulate exact integer (a, b) totals meaning a + b*sqrt(2), so that
    // symmetric bits (equal totals) tie exactly and keep their index order.
    std::vector<long long> wa(std::size_t(bps), 0), wb(std::size_t(bps), 0);
    for (const auto& e : table) {
        for (int k = 0; k < bps; ++k) {
            wa[std::size_t(k)] += e.bit_weight[std::size_t(k)].first;
            wb[std::size_t(k)] += e.bit_weight[std::size_t(k)].second;
        }
    }
    std::vector<int> order_out(static_cast<std::size_t>(bps));
    for (int k = 0; k < bps; ++k) order_out[std::size_t(k)] = k;
    std::stable_sort(order_out.begin(), order_out.end(), [&](int x, int y) {
        if (wa[std::size_t(x)] == wa[std::size_t(y)] &&
            wb[std::size_t(x)] == wb[std::size_t(y)])
            return false;
        const double vx = double(wa[std::size_t(x)]) +
                          double(wb[std::size_t(x)]) * 1.41421356237309504880;
        const double vy = double(wa[std::size_t(y)]) +
                          double(wb[std::size_t(y)]) * 1.41421356237309504880;
        return vx < vy;
    });
    return order_out;
}

void dump_constellation_csv(int order, std::ostream& os) {
    const Constellation& c = Constellation::get(order);
    os << "label,i,q\n";
    char buf[80];
    for (std::uint32_t label = 0; label < std::uint32_t(order); ++label) {
        std::snprintf(buf, sizeof buf, "%u,%.9g,%.9g\n", label,
                      c.points[label].real(), c.points[label].imag());
        os << buf;
    }
}

}  // namespace airfl::modem
