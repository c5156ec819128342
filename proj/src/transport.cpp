#include "airfl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "airfl/gradbits.hpp"
#include "airfl/modem.hpp"
#include "airfl/rng.hpp"

namespace airfl::transport {

Kind kind_from_string(const std::string& s) {
    if (s == "approximate") return Kind::approximate;
    if (s == "ecrt") return Kind::ecrt;
    if (s == "naive") return Kind::naive;
    throw std::invalid_argument("transport: unknown scheme \"" + s + "\"");
}

const char* to_string(Kind k) {
    switch (k) {
        case Kind::approximate: return "approximate";
        case Kind::ecrt: return "ecrt";
        case Kind::naive: return "naive";
    }
    return "?";
}

Packing packing_from_string(const std::string& s) {
    if (s == "sequential") return Packing::sequential;
    if (s == "msb_aligned") return Packing::msb_aligned;
    throw std::invalid_argument("transport: unknown packing \"" + s + "\"");
}

const char* to_string(Packing p) {
    return p == Packing::sequential ? "sequential" : "msb_aligned";
}

void Scheme::validate() const {
    if (order != 4 && order != 16 && order != 256)
        throw std::invalid_argument("transport: modulation order must be 4, 16, "
                                    "or 256, got " +
                                    std::to_string(order));
    if (!(sparsity > 0.0 && sparsity <= 1.0))
        throw std::invalid_argument("transport: sparsity must be in (0, 1]");
    if (!(clip > 0.0) || !std::isfinite(clip))
        throw std::invalid_argument("transport: clip must be a positive real");
    if (interleave_depth < 1)
        throw std::invalid_argument("transport: interleave depth must be >= 1");
    if (fec.codeword_len < 2 || fec.codeword_len % 2 != 0)
        throw std::invalid_argument("transport: codeword length must be even "
                                    "and positive (rate 1/2)");
    if (fec.correctable < 0 || fec.correctable >= fec.codeword_len)
        throw std::invalid_argument("transport: correctable bits out of range");
}

Sparse sparsify(const std::vector<double>& g, double rate) {
    if (g.empty()) throw std::invalid_argument("sparsify: empty gradient");
    if (!(rate > 0.0 && rate <= 1.0))
        throw std::invalid_argument("sparsify: rate must be in (0, 1]");
    const std::size_t n = g.size();
    const std::size_t k =
        std::min(n, std::size_t(std::ceil(rate * double(n))));
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::nth_element(idx.begin(), idx.begin() + std::ptrdiff_t(k - 1), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ma = std::fabs(g[a]), mb = std::fabs(g[b]);
                         if (ma != mb) return ma > mb;
                         return a < b;  // ties keep the lower index
                     });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    Sparse out;
    out.indices = std::move(idx);
    out.values.resize(k);
    for (std::size_t i = 0; i < k; ++i) out.values[i] = g[out.indices[i]];
    return out;
}

std::vector<double> desparsify(const std::vector<double>& values,
                               const std::vector<std::uint32_t>& indices,
                               std::size_t n) {
    if (values.size() != indices.size())
        throw std::invalid_argument("desparsify: value/index length mismatch");
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (indices[i] >= n)
            throw std::invalid_argument("desparsify: index " +
                                        std::to_string(indices[i]) +
                                        " out of range for length " +
                                        std::to_string(n));
        g[indices[i]] = values[i];
    }
    return g;
}

namespace {

// clip -> sparsify, shared head of every scheme.
Sparse prepare(const std::vector<double>& g, const Scheme& s) {
    std::vector<double> clipped = g;
    gradbits::clip(clipped, s.clip);
    return sparsify(clipped, s.sparsity);
}

std::uint64_t index_side_channel_bits(const Scheme& s, std::size_t n_g,
                                      std::size_t kept) {
    if (!s.charge_index_bits || s.sparsity >= 1.0 || n_g < 2) return 0;
    std::uint64_t bits_per_index = 0;
    for (std::size_t v = n_g - 1; v != 0; v >>= 1) ++bits_per_index;
    return bits_per_index * kept;
}

// approximate/naive share the whole pipeline except the mask step.
SendResult send_unprotected(const std::vector<double>& g, const Scheme& s,
                            const channel::ChannelParams& ch,
                            std::uint64_t seed, bool mask) {
    s.validate();
    const modem::Constellation& cons = modem::Constellation::get(s.order);
    Sparse sp = prepare(g, s);
    const std::vector<std::uint32_t> words = gradbits::encode_f32(sp.values);

    std::vector<std::uint8_t> bits =
        gradbits::interleave(words, s.interleave_depth);
    // The pack block equals the interleaver block: its column-major layout is
    // already significance-major (bit 0 of every word, then bit 1, ...), so
    // the rank->slot mapping puts the most significant slice of each block
    // into the most reliable symbol positions.
    const bool packed = s.packing == Packing::msb_aligned && s.order > 4;
    const int pack_block = 32 * s.interleave_depth;
    if (packed)
        bits = gradbits::pack_msb_aligned(bits, pack_block, cons.bps,
                                          modem::bit_reliability_order(s.order));

    const auto symbols = modem::modulate(bits, s.order);
    const auto tx = channel::transmit(symbols, ch, seed);
    std::vector<std::uint8_t> rx =
        modem::demodulate(tx.received, tx.realization.gains, s.order);

    if (packed)
        rx = gradbits::unpack_msb_aligned(rx, pack_block, cons.bps,
                                          modem::bit_reliability_order(s.order));
    std::vector<std::uint32_t> rx_words =
        gradbits::deinterleave(rx, words.size(), s.interleave_depth);
    if (mask) gradbits::mask_exp_msb(rx_words);

    SendResult out;
    out.delivered =
        desparsify(gradbits::decode_f32(rx_words), sp.indices, g.size());
    out.ledger.payload_bits = std::uint64_t(words.size()) * 32u;
    out.ledger.coded_bits = out.ledger.payload_bits +
                            index_side_channel_bits(s, g.size(), words.size());
    out.ledger.airtime_symbols =
        (out.ledger.coded_bits + std::uint64_t(cons.bps) - 1) /
        std::uint64_t(cons.bps);
    return out;
}

}  // namespace

SendResult send_approximate(const std::vector<double>& g, const Scheme& s,
                            const channel::ChannelParams& ch,
                            std::uint64_t seed) {
    return send_unprotected(g, s, ch, seed, /*mask=*/true);
}

SendResult send_naive(const std::vector<double>& g, const Scheme& s,
                      const channel::ChannelParams& ch, std::uint64_t seed) {
    return send_unprotected(g, s, ch, seed, /*mask=*/false);
}

std::vector<double> reference_delivery(const std::vector<double>& g,
                                       const Scheme& s) {
    s.validate();
    Sparse sp = prepare(g, s);
    return desparsify(gradbits::decode_f32(gradbits::encode_f32(sp.values)),
                      sp.indices, g.size());
}

SendResult send_ecrt(const std::vector<double>& g, const Scheme& s,
                     const channel::ChannelParams& ch, std::uint64_t seed) {
    s.validate();
    const modem::Constellation& cons = modem::Constellation::get(s.order);
    constexpr int kMaxAttempts = 10000;

    Sparse sp = prepare(g, s);
    const std::size_t payload_bits = sp.values.size() * 32u;
    const std::size_t info_len = std::size_t(s.fec.codeword_len) / 2;
    const std::size_t n_cw = (payload_bits + info_len - 1) / info_len;
    const std::size_t rem = payload_bits % info_len;
    // Coded length per codeword: rate-1/2, final partial block shortened.
    const auto cw_len = [&](std::size_t c) -> std::size_t {
        if (c + 1 == n_cw && rem != 0) return 2 * rem;
        return std::size_t(s.fec.codeword_len);
    };

    SendResult out;
    out.ledger.payload_bits = payload_bits;
    out.ledger.coded_bits =
        index_side_channel_bits(s, g.size(), sp.values.size());
    out.ledger.airtime_symbols =
        (out.ledger.coded_bits + std::uint64_t(cons.bps) - 1) /
        std::uint64_t(cons.bps);

    std::vector<std::size_t> pending(n_cw);
    std::iota(pending.begin(), pending.end(), std::size_t{0});
    std::vector<std::size_t> owner;     // stream position -> pending slot
    std::vector<std::size_t> errors(n_cw);

    for (int attempt = 0; !pending.empty(); ++attempt) {
        if (attempt >= kMaxAttempts)
            throw std::runtime_error(
                "ecrt: " + std::to_string(pending.size()) +
                " codeword(s) still rejected after " +
                std::to_string(kMaxAttempts) +
                " attempts; the ECRT baseline is meaningless at snr_db = " +
                std::to_string(ch.snr_db));

        std::size_t batch_bits = 0;
        std::size_t max_len = 0;
        for (std::size_t c : pending) {
            batch_bits += cw_len(c);
            max_len = std::max(max_len, cw_len(c));
        }
        // Stripe codewords round-robin across the batch so the bits of one
        // codeword land in distinct symbols (per-codeword errors then follow
        // the i.i.d. binomial model the acceptance oracle assumes).
        owner.clear();
        owner.reserve(batch_bits);
        for (std::size_t j = 0; j < max_len; ++j)
            for (std::size_t slot = 0; slot < pending.size(); ++slot)
                if (j < cw_len(pending[slot])) owner.push_back(slot);

        // Scrambled transmission: fresh uniform coded bits each attempt.
        rng::Stream bit_stream(
            rng::derive_seed({seed, 0x11, std::uint64_t(attempt)}));
        std::vector<std::uint8_t> bits(batch_bits);
        for (auto& b : bits) b = std::uint8_t(bit_stream.u64() & 1u);

        // Round up to whole symbols with uncharged zero bits.
        const std::size_t padded =
            (batch_bits + std::size_t(cons.bps) - 1) / cons.bps * cons.bps;
        bits.resize(padded, 0);

        const auto symbols = modem::modulate(bits, s.order);
        const auto tx = channel::transmit(
            symbols, ch,
            rng::derive_seed({seed, 0x12, std::uint64_t(attempt)}));
        const auto rx =
            modem::demodulate(tx.received, tx.realization.gains, s.order);

        std::fill(errors.begin(), errors.end(), 0u);
        for (std::size_t i = 0; i < batch_bits; ++i)
            if (bits[i] != rx[i]) ++errors[pending[owner[i]]];

        out.ledger.coded_bits += batch_bits;
        out.ledger.airtime_symbols += padded / std::size_t(cons.bps);
        if (attempt > 0) out.ledger.retx_codewords += pending.size();

        std::vector<std::size_t> still;
        for (std::size_t c : pending)
            if (errors[c] > std::size_t(s.fec.correctable)) still.push_back(c);
        pending.swap(still);
    }

    out.delivered =
        desparsify(gradbits::decode_f32(gradbits::encode_f32(sp.values)),
                   sp.indices, g.size());
    return out;
}

SendResult send(const std::vector<double>& g, const Scheme& s,
                const channel::ChannelParams& ch, std::uint64_t seed) {
    switch (s.kind) {
        case Kind::approximate: return send_approximate(g, s, ch, seed);
        case Kind::ecrt: return send_ecrt(g, s, ch, seed);
        case Kind::naive: return send_naive(g, s, ch, seed);
    }
    throw std::logic_error("transport: bad kind");
}

}  // namespace airfl::transport
