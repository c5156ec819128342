#include "airfl/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "airfl/kernels.hpp"

namespace airfl::metrics {

double l2_error_norm(const std::vector<double>& g,
                     const std::vector<double>& g_hat) {
    if (g.size() != g_hat.size())
        throw std::invalid_argument("l2_error_norm: length mismatch: " +
                                    std::to_string(g.size()) + " vs " +
                                    std::to_string(g_hat.size()));
    return std::sqrt(kern::active().l2diff_sq(g.data(), g_hat.data(), g.size()));
}

RelativeError relative_error(const std::vector<double>& g,
                             const std::vector<double>& g_hat) {
    if (g.size() != g_hat.size())
        throw std::invalid_argument("relative_error: length mismatch");
    RelativeError r;
    r.value.resize(g.size());
    r.undefined.assign(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] == 0.0) {
            r.undefined[i] = 1;
            ++r.undefined_count;
            r.value[i] = 0.0;
        } else {
            r.value[i] = std::fabs(g[i] - g_hat[i]) / std::fabs(g[i]);
        }
    }
    return r;
}

double evaluate_accuracy(const nn::Network& net,
                         const std::vector<double>& params,
                         const data::Dataset& test) {
    if (test.n == 0)
        throw std::invalid_argument("evaluate_accuracy: empty test set");
    std::vector<double> x(test.image_size());
    nn::Trace t;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.n; ++i) {
        test.sample(i, x.data());
        net.forward(params.data(), x.data(), t);
        const std::vector<double>& logits = t.a.back();
        int pred = 0;
        bool any = false;
        double best = 0.0;
        for (std::size_t j = 0; j < logits.size(); ++j) {
            if (std::isnan(logits[j])) continue;
            if (!any || logits[j] > best) {
                any = true;
                best = logits[j];
                pred = int(j);
            }
        }
        correct += std::size_t(pred) == std::size_t(test.labels[i]);
    }
    return double(correct) / double(test.n);
}

std::string csv_header() {
    return "round,scheme,snr_db,modulation,clients,sparsity,test_accuracy,"
           "l2_error,payload_bits,coded_bits,retx_count,airtime_symbols";
}

std::string csv_row(const RoundMetrics& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "%d,%s,%.9g,%d,%d,%.9g,%.9g,%.9g,%llu,%llu,%llu,%llu",
                  r.round, r.scheme.c_str(), r.snr_db, r.modulation, r.clients,
                  r.sparsity, r.test_accuracy, r.l2_error,
                  static_cast<unsigned long long>(r.payload_bits),
                  static_cast<unsigned long long>(r.coded_bits),
                  static_cast<unsigned long long>(r.retx_count),
                  static_cast<unsigned long long>(r.airtime_symbols));
    return buf;
}

CsvWriter::CsvWriter(const std::string& path) : os_(path), path_(path) {
    if (!os_) throw std::runtime_error("csv: cannot open " + path);
    os_ << csv_header() << '\n';
    os_.flush();
    if (!os_) throw std::runtime_error("csv: write failed: " + path);
}

void CsvWriter::write(const RoundMetrics& r) {
    os_ << csv_row(r) << '\n';
    os_.flush();
    if (!os_) throw std::runtime_error("csv: write failed: " + path_);
}

}  // namespace airfl::metrics
