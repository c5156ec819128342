// Rayleigh flat-fading channel with distance path loss and AWGN, plus a BER
// measurement harness and a semi-analytic fading-averaged BER reference.
//
// Model: r_k = c_k * s_k + n_k, with c_k = sqrt(p * d^-alpha) * h_k,
// h_k ~ CN(0,1), n_k ~ CN(0, noise_var). snr_db is the *average received
// per-symbol* SNR: E[|c|^2]/noise_var (unit-energy constellations), so
// noise_var = p * d^-alpha / 10^(snr_db/10).
//
// Fading modes:
//   rayleigh_fast  -- h_k i.i.d. per symbol (default).
//   rayleigh_block -- one h per transmit() call, noise still per symbol.
//   none           -- deterministic zero-noise limit: r_k = sqrt(p*d^-alpha)*s_k,
//                     no RNG draws at all (snr_db ignored).
//
// Determinism: transmit draws, in order, h then noise for each symbol (fast),
// or h once then per-symbol noise (block), from a Stream seeded with the given
// seed. Same (symbols, params, seed) => bit-identical output.
#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace airfl::channel {

enum class Fading { rayleigh_fast, rayleigh_block, none };

struct ChannelParams {
    double snr_db = 20.0;
    double distance_m = 10.0;
    double pathloss_exp = 3.0;
    double tx_power = 1.0;
    Fading fading = Fading::rayleigh_fast;

    // sqrt(p * d^-alpha): deterministic amplitude factor of the channel gain.
    double amplitude() const;
    // p * d^-alpha / 10^(snr_db/10); zero in fading mode "none".
    double noise_var() const;
};

Fading fading_from_string(const std::string& s);
const char* to_string(Fading f);

struct ChannelRealization {
    std::vector<std::complex<double>> gains;  // c_k, one per symbol
    std::vector<std::complex<double>> noise;  // n_k, one per symbol
    std::uint64_t seed = 0;
};

struct TransmitResult {
    std::vector<std::complex<double>> received;
    ChannelRealization realization;
};

TransmitResult transmit(const std::vector<std::complex<double>>& symbols,
                        const ChannelParams& params, std::uint64_t seed);

struct BerEstimate {
    double ber = 0.0;
    double half_width = 0.0;  // 95% binomial confidence half-width
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
};

// End-to-end Monte Carlo: random bits -> modulate -> fast-fading transmit ->
// demodulate -> compare. d=10, alpha=3, p=1. n_bits is rounded up to a whole
// number of symbols. Work is split into fixed 2^20-bit chunks with per-chunk
// derived seeds and summed in order, so the result is independent of how the
// caller batches it.
BerEstimate measure_ber(int order, double snr_db, std::uint64_t n_bits,
                        std::uint64_t seed);

// Fading-averaged gray-QAM bit error probability (independent reference for
// measure_ber). Exact per-axis decision-region expansion of the AWGN BER in
// which each Q(a*sqrt(gamma)) term is averaged over the exponential fading
// power density in closed form. For QPSK this reduces to the textbook
// 0.5*(1 - sqrt(x/(1+x))) with x = snr_linear/2.
double rayleigh_ber_oracle(int order, double snr_db);

}  // namespace airfl::channel
