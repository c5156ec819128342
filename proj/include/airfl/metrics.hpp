// Error metrics, test-set evaluation, and the round-metrics CSV writer.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "airfl/dataset.hpp"
#include "airfl/nn.hpp"

namespace airfl::metrics {

// Euclidean norm of g - g_hat. Zero iff the vectors are equal.
double l2_error_norm(const std::vector<double>& g,
                     const std::vector<double>& g_hat);

// Per-element |g - g_hat| / |g|. Entries with g == 0 are flagged undefined
// (value reported as 0) rather than divided.
struct RelativeError {
    std::vector<double> value;
    std::vector<std::uint8_t> undefined;
    std::size_t undefined_count = 0;
};
RelativeError relative_error(const std::vector<double>& g,
                             const std::vector<double>& g_hat);

// Fraction of test samples whose argmax logit matches the label. NaN logits
// are never the argmax; ties pick the lowest class index; a model whose
// logits are all NaN predicts class 0 (so a broken model scores the
// constant-classifier baseline, not zero).
double evaluate_accuracy(const nn::Network& net,
                         const std::vector<double>& params,
                         const data::Dataset& test);

struct RoundMetrics {
    int round = 0;
    std::string scheme;
    double snr_db = 0.0;
    int modulation = 4;
    int clients = 0;
    double sparsity = 1.0;
    double test_accuracy = 0.0;
    double l2_error = 0.0;
    std::uint64_t payload_bits = 0;
    std::uint64_t coded_bits = 0;
    std::uint64_t retx_count = 0;
    std::uint64_t airtime_symbols = 0;
};

// Appends one row per record under a fixed header; reals are written with 9
// significant digits and every row is flushed, so an interrupted run leaves a
// readable prefix.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path);
    void write(const RoundMetrics& r);
    const std::string& path() const { return path_; }

  private:
    std::ofstream os_;
    std::string path_;
};

// Header/row formatting shared by CsvWriter and the tests.
std::string csv_header();
std::string csv_row(const RoundMetrics& r);

}  // namespace airfl::metrics
