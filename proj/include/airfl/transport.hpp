// The three uplink schemes for gradient delivery over the wireless channel,
// plus magnitude sparsification and air-time accounting.
//
//  * approximate: clip -> sparsify -> binary32 encode -> interleave ->
//    (msb-aligned pack when enabled and order > 4) -> modulate -> channel ->
//    demodulate -> unpack -> deinterleave -> clear each word's exponent MSB ->
//    decode -> desparsify. No FEC, no retransmission; received bit errors
//    stay in the output, but the mask bounds every element to (-2, 2).
//  * naive: the same pipeline without the mask step; bit errors can produce
//    huge, infinite, or NaN elements.
//  * ecrt: exact delivery. The payload is split into 324-bit info blocks,
//    each carried by a rate-1/2 codeword (648 coded bits; a final partial
//    block is shortened to 2x its info bits). A codeword with at most
//    `correctable` bit errors is accepted, anything worse is retransmitted in
//    the next batch over a fresh channel realization. Outstanding codewords
//    are striped round-robin across the batch's symbols, and every
//    transmission is scrambled (modeled as fresh uniform coded bits).
//    A codeword still rejected after 10^4 attempts aborts with a diagnostic:
//    at such an SNR the ECRT baseline is meaningless.
//
// Air-time: symbols on air = charged bits / bits-per-symbol. Interleaver pad
// words and the zero bits that round a batch up to a whole symbol are
// physically transmitted but not charged. Sparsified index lists ride an
// error-free side channel and are free by default; charge_index_bits adds
// ceil(log2 N_g) bits per kept index to the coded-bit and symbol charges.
//
// Determinism: everything is a pure function of (gradient, scheme, channel
// params, seed); per-attempt streams are derived from the seed.
#pragma once

#include <cstdint>
#include <vector>

#include "airfl/channel.hpp"

namespace airfl::transport {

enum class Kind { approximate, ecrt, naive };
enum class Packing { sequential, msb_aligned };

Kind kind_from_string(const std::string& s);
const char* to_string(Kind k);
Packing packing_from_string(const std::string& s);
const char* to_string(Packing p);

struct Fec {
    int codeword_len = 648;  // rate 1/2: info bits = codeword_len / 2
    int correctable = 7;     // floor((d_min - 1) / 2) with d_min = 15
};

struct Scheme {
    Kind kind = Kind::approximate;
    int order = 4;  // 4, 16, or 256
    Packing packing = Packing::sequential;
    double sparsity = 1.0;  // fraction of gradients kept, (0, 1]
    double clip = 1.0;
    int interleave_depth = 32;  // words per interleaver block
    bool charge_index_bits = false;
    Fec fec;

    void validate() const;  // throws std::invalid_argument on bad fields
};

struct LedgerEntry {
    std::uint64_t payload_bits = 0;
    std::uint64_t coded_bits = 0;
    std::uint64_t retx_codewords = 0;
    std::uint64_t airtime_symbols = 0;

    LedgerEntry& operator+=(const LedgerEntry& o) {
        payload_bits += o.payload_bits;
        coded_bits += o.coded_bits;
        retx_codewords += o.retx_codewords;
        airtime_symbols += o.airtime_symbols;
        return *this;
    }
};

struct SendResult {
    std::vector<double> delivered;  // same length as the input gradient
    LedgerEntry ledger;
};

SendResult send_approximate(const std::vector<double>& g, const Scheme& s,
                            const channel::ChannelParams& ch,
                            std::uint64_t seed);
SendResult send_naive(const std::vector<double>& g, const Scheme& s,
                      const channel::ChannelParams& ch, std::uint64_t seed);
SendResult send_ecrt(const std::vector<double>& g, const Scheme& s,
                     const channel::ChannelParams& ch, std::uint64_t seed);

// Dispatch on s.kind.
SendResult send(const std::vector<double>& g, const Scheme& s,
                const channel::ChannelParams& ch, std::uint64_t seed);

// What an error-free transport delivers: clip -> sparsify -> binary32 round
// trip -> desparsify. send_ecrt's output equals this exactly; the l2
// aggregation error of the lossy schemes is measured against it, so the
// metric isolates channel damage from clipping/sparsification/quantization.
std::vector<double> reference_delivery(const std::vector<double>& g,
                                       const Scheme& s);

// Top-k selection by |value| (k = ceil(rate * size), ties keep the lower
// index); indices are reported in ascending order. desparsify scatters the
// values back and zero-fills the rest.
struct Sparse {
    std::vector<double> values;
    std::vector<std::uint32_t> indices;
};
Sparse sparsify(const std::vector<double>& g, double rate);
std::vector<double> desparsify(const std::vector<double>& values,
                               const std::vector<std::uint32_t>& indices,
                               std::size_t n);

}  // namespace airfl::transport
