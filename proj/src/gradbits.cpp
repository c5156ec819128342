#include "airfl/gradbits.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "airfl/kernels.hpp"

namespace airfl::gradbits {

void clip(std::vector<double>& g, double c) {
    if (!(c > 0.0) || !std::isfinite(c))
        throw std::invalid_argument("clip: threshold must be finite and > 0");
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
            throw std::invalid_argument("clip: non-finite element at index " +
                                        std::to_string(i));
    kern::active().clip(g.data(), g.size(), -c, c);
}

std::vector<std::uint32_t> encode_f32(const std::vector<double>& g) {
    std::vector<std::uint32_t> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i]))
            throw std::invalid_argument("encode_f32: non-finite element at index " +
                                        std::to_string(i));
        out[i] = std::bit_cast<std::uint32_t>(static_cast<float>(g[i]));
    }
    return out;
}

std::vector<double> decode_f32(const std::vector<std::uint32_t>& words) {
    std::vector<double> out(words.size());
    for (std::size_t i = 0; i < words.size(); ++i)
        out[i] = double(std::bit_cast<float>(words[i]));
    return out;
}

void mask_exp_msb(std::vector<std::uint32_t>& words) {
    kern::active().mask_words(words.data(), words.size());
}

std::vector<std::uint8_t> interleave(const std::vector<std::uint32_t>& words,
                                     std::size_t depth) {
    if (depth == 0) throw std::invalid_argument("interleave: depth must be >= 1");
    const std::size_t padded = (words.size() + depth - 1) / depth * depth;
    std::vector<std::uint8_t> bits(padded * 32);
    std::size_t o = 0;
    for (std::size_t base = 0; base < padded; base += depth) {
        for (int c = 0; c < 32; ++c) {
            for (std::size_t r = 0; r < depth; ++r) {
                const std::size_t w = base + r;
                bits[o++] =
                    w < words.size() ? std::uint8_t(get_bit(words[w], c)) : 0;
            }
        }
    }
    return bits;
}

std::vector<std::uint32_t> deinterleave(const std::vector<std::uint8_t>& bits,
                                        std::size_t payload_words,
                                        std::size_t depth) {
    if (depth == 0) throw std::invalid_argument("deinterleave: depth must be >= 1");
    const std::size_t padded = (payload_words + depth - 1) / depth * depth;
    if (bits.size() != padded * 32)
        throw std::invalid_argument("deinterleave: stream length mismatch");
    std::vector<std::uint32_t> words(payload_words, 0);
    std::size_t o = 0;
    for (std::size_t base = 0; base < padded; base += depth) {
        for (int c = 0; c < 32; ++c) {
            for (std::size_t r = 0; r < depth; ++r, ++o) {
                const std::size_t w = base + r;
                if (w < payload_words && bits[o])
                    words[w] = with_bit(words[w], c, 1);
            }
        }
    }
    return words;
}

namespace {

// stream position of the bit carried by (symbol s, slot j) within one block
std::vector<std::size_t> cell_to_stream(std::size_t block_bits, int bps,
                                        const std::vector<int>& order) {
    const std::size_t n_sym = block_bits / std::size_t(bps);
    std::vector<std::size_t> rank_of_slot(order.size());
    for (std::size_t r = 0; r < order.size(); ++r)
        rank_of_slot[std::size_t(order[r])] = r;
    // stream bit i -> symbol i % n_sym, slot with rank i / n_sym
    std::vector<std::size_t> src(block_bits);
    for (std::size_t s = 0; s < n_sym; ++s)
        for (int j = 0; j < bps; ++j)
            src[s * std::size_t(bps) + std::size_t(j)] =
                rank_of_slot[std::size_t(j)] * n_sym + s;
    return src;
}

void check_pack_args(std::size_t nbits, std::size_t block_bits, int bps,
                     const std::vector<int>& order) {
    if (block_bits == 0 || block_bits % std::size_t(bps) != 0 ||
        block_bits % 32 != 0)
        throw std::invalid_argument("pack: bad block size");
    if (nbits % block_bits != 0)
        throw std::invalid_argument("pack: stream not a whole number of blocks");
    if (order.size() != std::size_t(bps))
        throw std::invalid_argument("pack: reliability order size mismatch");
}

}  // namespace

std::vector<std::uint8_t> pack_msb_aligned(const std::vector<std::uint8_t>& bits,
                                           std::size_t block_bits, int bps,
                                           const std::vector<int>& order) {
    check_pack_args(bits.size(), block_bits, bps, order);
    const auto src = cell_to_stream(block_bits, bps, order);
    std::vector<std::uint8_t> out(bits.size());
    for (std::size_t b = 0; b < bits.size(); b += block_bits)
        for (std::size_t i = 0; i < block_bits; ++i)
            out[b + i] = bits[b + src[i]];
    return out;
}

std::vector<std::uint8_t> unpack_msb_aligned(const std::vector<std::uint8_t>& bits,
                                             std::size_t block_bits, int bps,
                                             const std::vector<int>& order) {
    check_pack_args(bits.size(), block_bits, bps, order);
    const auto src = cell_to_stream(block_bits, bps, order);
    std::vector<std::uint8_t> out(bits.size());
    for (std::size_t b = 0; b < bits.size(); b += block_bits)
        for (std::size_t i = 0; i < block_bits; ++i)
            out[b + src[i]] = bits[b + i];
    return out;
}

}  // namespace airfl::gradbits
