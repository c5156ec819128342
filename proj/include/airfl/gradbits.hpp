#pragma once

// Gradient <-> bit plumbing for the lossy uplink.
//
// Bit indexing convention (used everywhere, including on the wire): bit 0 is
// the IEEE-754 binary32 sign, bit 1 the exponent MSB, ..., bit 31 the fraction
// LSB. Uninterleaved wire order is word-major with bit 0 first.
//
// Receive-side masking clears bit 1. A cleared exponent MSB caps the biased
// exponent at 127, so any masked pattern decodes to a finite float with
// |v| < 2, never NaN/Inf; subnormals survive untouched. The transmitter clips
// into [-c, c] (c <= 1), for which the mask is the identity, so an error-free
// link is transparent.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace airfl::gradbits {

inline constexpr std::uint32_t kMask = 0xBFFFFFFFu;  // clears bit index 1

inline int get_bit(std::uint32_t w, int i) { return int((w >> (31 - i)) & 1u); }
inline std::uint32_t with_bit(std::uint32_t w, int i, int v) {
    const std::uint32_t m = 1u << (31 - i);
    return v ? (w | m) : (w & ~m);
}

// In-place clip to [-c, c]; throws std::invalid_argument naming the first
// offending index if any element is NaN/Inf.
void clip(std::vector<double>& g, double c);

// double -> binary32 bit patterns (round to nearest) and back.
std::vector<std::uint32_t> encode_f32(const std::vector<double>& g);
std::vector<double> decode_f32(const std::vector<std::uint32_t>& words);

// words[i] &= kMask
void mask_exp_msb(std::vector<std::uint32_t>& words);

// Block row-column interleaver. Frames are padded with zero words to a whole
// number of depth-word blocks (one row per word); within a block the output
// reads column-major, so the bit of word r at bit index c leaves at position
// c*depth + r. A burst of up to 32 consecutive channel errors inside a block
// then lands on 32 distinct words. depth == 1 is the identity.
// Returned stream holds one bit per byte; length = 32 * padded word count.
std::vector<std::uint8_t> interleave(const std::vector<std::uint32_t>& words,
                                     std::size_t depth);
std::vector<std::uint32_t> deinterleave(const std::vector<std::uint8_t>& bits,
                                        std::size_t payload_words,
                                        std::size_t depth);

// Significance-major symbol packing for orders > 4. Within each block of
// block_bits stream bits (use the interleaver block, depth*32), the bit stream
// is laid into (symbol, slot) cells: symbols advance fastest, slots are taken
// in decreasing reliability (reliability_order[0] = most reliable slot), and
// earlier stream bits — which after interleaving are the lower, more
// significant bit indices of every word — claim the better slots.
// bits.size() must be a multiple of block_bits; block_bits a multiple of
// 32 and of bps. Identity when bps == 1 slot... (QPSK uses 2 equal slots and
// callers skip packing there).
std::vector<std::uint8_t> pack_msb_aligned(const std::vector<std::uint8_t>& bits,
                                           std::size_t block_bits, int bps,
                                           const std::vector<int>& reliability_order);
std::vector<std::uint8_t> unpack_msb_aligned(const std::vector<std::uint8_t>& bits,
                                             std::size_t block_bits, int bps,
                                             const std::vector<int>& reliability_order);

}  // namespace airfl::gradbits
