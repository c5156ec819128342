#include "airfl/channel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "airfl/modem.hpp"
#include "airfl/rng.hpp"

namespace airfl::channel {

double ChannelParams::amplitude() const {
    return std::sqrt(tx_power * std::pow(distance_m, -pathloss_exp));
}

double ChannelParams::noise_var() const {
    if (fading == Fading::none) return 0.0;
    const double a = amplitude();
    return a * a / std::pow(10.0, snr_db / 10.0);
}

Fading fading_from_string(const std::string& s) {
    if (s == "rayleigh_fast" || s == "fast") return Fading::rayleigh_fast;
    if (s == "rayleigh_block" || s == "block") return Fading::rayleigh_block;
    if (s == "none") return Fading::none;
    throw std::invalid_argument("channel: unknown fading mode \"" + s + "\"");
}

const char* to_string(Fading f) {
    switch (f) {
        case Fading::rayleigh_fast: return "rayleigh_fast";
        case Fading::rayleigh_block: return "rayleigh_block";
        case Fading::none: return "none";
    }
    return "?";
}

TransmitResult transmit(const std::vector<std::complex<double>>& symbols,
                        const ChannelParams& params, std::uint64_t seed) {
    const std::size_t n = symbols.size();
    TransmitResult out;
    out.received.resize(n);
    out.realization.gains.resize(n);
    out.realization.noise.resize(n);
    out.realization.seed = seed;
    const double amp = params.amplitude();

    if (params.fading == Fading::none) {
        for (std::size_t k = 0; k < n; ++k) {
            out.realization.gains[k] = amp;
            out.realization.noise[k] = 0.0;
            out.received[k] = amp * symbols[k];
        }
        return out;
    }

    rng::Stream stream(seed);
    const double nsig = std::sqrt(params.noise_var());
    std::complex<double> h = 0.0;
    if (params.fading == Fading::rayleigh_block) h = stream.cgaussian();
    for (std::size_t k = 0; k < n; ++k) {
        if (params.fading == Fading::rayleigh_fast) h = stream.cgaussian();
        const std::complex<double> c = amp * h;
        const std::complex<double> nk = nsig * stream.cgaussian();
        out.realization.gains[k] = c;
        out.realization.noise[k] = nk;
        out.received[k] = c * symbols[k] + nk;
    }
    return out;
}

BerEstimate measure_ber(int order, double snr_db, std::uint64_t n_bits,
                        std::uint64_t seed) {
    const modem::Constellation& cons = modem::Constellation::get(order);
    const std::uint64_t bps = std::uint64_t(cons.bps);
    ChannelParams params;
    params.snr_db = snr_db;
    params.fading = Fading::rayleigh_fast;

    constexpr std::uint64_t kChunkBits = std::uint64_t(1) << 20;
    BerEstimate est;
    std::uint64_t chunk = 0;
    std::uint64_t remaining = (n_bits + bps - 1) / bps * bps;
    while (remaining > 0) {
        const std::uint64_t take = remaining < kChunkBits ? remaining : kChunkBits;
        rng::Stream bit_stream(rng::derive_seed({seed, rng::tag::ber, chunk, 1}));
        std::vector<std::uint8_t> bits(take);
        for (std::uint64_t i = 0; i < take; ++i)
            bits[i] = std::uint8_t(bit_stream.u64() & 1u);
        const auto symbols = modem::modulate(bits, order);
        const auto tx = transmit(symbols, params,
                                 rng::derive_seed({seed, rng::tag::ber, chunk, 2}));
        const auto decoded =
            modem::demodulate(tx.received, tx.realization.gains, order);
        for (std::uint64_t i = 0; i < take; ++i)
            est.bit_errors += bits[i] != decoded[i];
        est.bits += take;
        remaining -= take;
        ++chunk;
    }
    est.ber = est.bits ? double(est.bit_errors) / double(est.bits) : 0.0;
    est.half_width =
        est.bits ? 1.96 * std::sqrt(est.ber * (1.0 - est.ber) / double(est.bits))
                 : 0.0;
    return est;
}

double rayleigh_ber_oracle(int order, double snr_db) {
    const modem::Constellation& cons = modem::Constellation::get(order);
    const int L = cons.levels;
    const int h = cons.bps / 2;
    const double gbar = std::pow(10.0, snr_db / 10.0);

    // E over exponential fading power of Q(a*sqrt(gamma)), a >= 0.
    const auto favg = [gbar](double a) {
        const double x = a * a * gbar / 2.0;
        return 0.5 * (1.0 - std::sqrt(x / (1.0 + x)));
    };
    // Same, extended to signed and infinite arguments (Q through the origin).
    const auto avg_q = [&](double a) {
        if (a == std::numeric_limits<double>::infinity()) return 0.0;
        if (a == -std::numeric_limits<double>::infinity()) return 1.0;
        return a >= 0.0 ? favg(a) : 1.0 - favg(-a);
    };

    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (int b = 0; b < h; ++b) {
        double pb = 0.0;
        for (int l = 0; l < L; ++l) {
            const double amp = double(2 * l - (L - 1)) / cons.scale;
            const std::uint32_t gl = std::uint32_t(l) ^ (std::uint32_t(l) >> 1);
            const std::uint32_t bit_l = (gl >> (h - 1 - b)) & 1u;
            for (int m = 0; m < L; ++m) {
                const std::uint32_t gm = std::uint32_t(m) ^ (std::uint32_t(m) >> 1);
                if (((gm >> (h - 1 - b)) & 1u) == bit_l) continue;
                // Decision region of level m: (t_lo, t_hi), thresholds halfway
                // between adjacent levels. Q argument scales as (t - amp)*sqrt(2).
                const double t_lo =
                    m == 0 ? -inf : double(2 * m - 1 - (L - 1)) / cons.scale;
                const double t_hi =
                    m == L - 1 ? inf : double(2 * m + 1 - (L - 1)) / cons.scale;
                const double a_lo = t_lo == -inf
                                        ? -inf
                                        : (t_lo - amp) * 1.41421356237309504880;
                const double a_hi =
                    t_hi == inf ? inf : (t_hi - amp) * 1.41421356237309504880;
                pb += avg_q(a_lo) - avg_q(a_hi);
            }
        }
        total += pb / double(L);
    }
    return total / double(h);
}

}  // namespace airfl::channel
