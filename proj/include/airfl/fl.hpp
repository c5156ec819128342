// Federated round loop: dataset partitioning, client-local computation,
// uplink transport, weighted aggregation, and per-round evaluation.
//
// Determinism: every random choice is drawn from a stream derived from
// (master seed, purpose tag, round, client), so serial and parallel execution
// produce byte-identical results. Clients within a round are independent;
// aggregation always folds in ascending client order.
//
// Collapsed models (the naive scheme's normal fate): when the global weights
// or any client's local gradient go non-finite, the round "freezes" — no
// updates, no transport, zero bits charged, l2 logged as NaN — but test
// accuracy is still evaluated and logged, which is how the ~10% flatline the
// naive baseline is known for shows up in the output.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "airfl/channel.hpp"
#include "airfl/dataset.hpp"
#include "airfl/metrics.hpp"
#include "airfl/nn.hpp"
#include "airfl/transport.hpp"

namespace airfl::fl {

enum class PartitionMode { iid, noniid2 };
PartitionMode partition_mode_from_string(const std::string& s);
const char* to_string(PartitionMode m);

struct Partition {
    std::vector<std::vector<std::uint32_t>> clients;  // sample indices
    // |D_m| / |D| per client, recomputed from actual sizes.
    std::vector<double> weights() const;
};

// iid: shuffle and split as evenly as possible (first clients take the
// remainder). noniid2: label-sorted shards dealt two per client so each
// client sees (at most) two classes; see the partition notes in fl.cpp.
Partition partition_dataset(const std::vector<std::uint8_t>& labels, int m,
                            PartitionMode mode, std::uint64_t seed);

enum class LocalMode { epoch_delta, fullbatch };
LocalMode local_mode_from_string(const std::string& s);
const char* to_string(LocalMode m);

struct TrainingParams {
    int rounds = 30;
    double lr = 0.01;
    int batch = 10;
    LocalMode local_mode = LocalMode::epoch_delta;
    int participants = 0;  // clients per round; 0 = all
    double clip = 1.0;     // local gradients are clipped to [-clip, clip]
};

// Raised when a client's loss or gradient goes non-finite; the round loop
// turns it into a frozen round instead of a crash.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One client's contribution for a round, clipped to [-clip, clip]:
//   fullbatch    — the mean gradient over the client's samples at w;
//   epoch_delta  — one epoch of mini-batch SGD from w, batches of
//                  `batch` over a seeded shuffle, returned as (w - w_end)/lr.
// Throws NonFiniteError if any batch loss or gradient element is non-finite.
std::vector<double> local_train(const nn::Network& net,
                                const std::vector<double>& w,
                                const data::Dataset& train,
                                const std::vector<std::uint32_t>& samples,
                                const TrainingParams& tp,
                                std::uint64_t shuffle_seed);

// Elementwise weighted sum; weights must sum to 1 within 1e-9.
std::vector<double> aggregate(const std::vector<std::vector<double>>& grads,
                              const std::vector<double>& weights);

struct RunParams {
    std::string net_name = "dense-small";
    PartitionMode partition = PartitionMode::iid;
    int clients = 10;
    TrainingParams training;  // training.clip is overridden by scheme.clip
    transport::Scheme scheme;
    channel::ChannelParams channel;
    std::uint64_t seed = 1;
    int jobs = 1;
};

using MetricsSink = std::function<void(const metrics::RoundMetrics&)>;

// The full federated loop; one RoundMetrics per round (also handed to the
// sink as soon as the round finishes, if given).
std::vector<metrics::RoundMetrics> run_training(const RunParams& p,
                                                const data::Dataset& train,
                                                const data::Dataset& test,
                                                const MetricsSink& sink = {});

// Aggregation-error fast path: per round, every client draws a synthetic
// gradient (clipped Gaussian, sigma 0.3, per-(round, client) stream) and
// sends it through the configured transport; the row's l2_error is
// ||aggregate(delivered) - aggregate(error-free reference)||_2. No network,
// no dataset — this isolates the channel-error statistics that the SNR and
// client-count sweeps measure. test_accuracy is logged as 0.
std::vector<metrics::RoundMetrics> run_aggregation_error(
    const RunParams& p, std::size_t n_g, int rounds,
    const MetricsSink& sink = {});

// Runs fn(0..n-1) on up to `jobs` threads (exact serial loop when jobs <= 1).
// fn must only touch per-index state; exceptions are rethrown for the lowest
// failing index.
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace airfl::fl
