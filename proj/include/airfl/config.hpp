// Run configuration: one JSON document (schema below) resolved through
// defaults -> preset -> config file -> dotted --set overrides, validated with
// unknown keys rejected by path. The resolved document is echoed next to every
// output CSV so a run can be audited and replayed.
//
//   {
//     "dataset":   {"name", "paths": {"train_images", "train_labels",
//                   "test_images", "test_labels", "train_batches",
//                   "test_batch"}, "subset_size"},
//     "partition": {"mode", "clients"},
//     "net":       {"spec"},
//     "training":  {"rounds", "lr", "batch", "local_mode", "participants"},
//     "channel":   {"snr_db", "fading", "d", "alpha"},
//     "transport": {"kind", "order", "packing", "sparsity", "clip",
//                   "interleave_depth", "charge_index_bits",
//                   "fec": {"codeword_len", "correctable"}},
//     "seed", "output"
//   }
//
// Dataset names: digits (bundled), mnist, fashion-mnist (same IDX layout),
// cifar10 (binary batches), idx (explicit paths). Unset paths resolve to
// conventional filenames under $AIRFL_DATA_DIR (default "data").
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airfl/dataset.hpp"
#include "airfl/fl.hpp"

namespace airfl::config {

struct DatasetConfig {
    std::string name = "digits";
    std::string train_images, train_labels, test_images, test_labels;
    std::vector<std::string> train_batches;  // cifar10 only
    std::string test_batch;                  // cifar10 only
    std::uint64_t subset_size = 0;           // 0 = the full training set
};

struct RunConfig {
    DatasetConfig dataset;
    fl::RunParams params;  // params.jobs comes from the CLI, not the document
    std::string output = "train.csv";
};

// $AIRFL_DATA_DIR if set and non-empty, else "data".
std::string data_dir();

RunConfig defaults();

// "desk" (10 clients, 1000-sample digits subset, dense net, 30 rounds) or
// "paper-mnist" (100 clients, full MNIST, cnn-mnist, 100 rounds).
void apply_preset(RunConfig& c, const std::string& name);

// All throw std::invalid_argument with a field path on schema violations.
void apply_json_text(RunConfig& c, const std::string& text,
                     const std::string& source);
void apply_file(RunConfig& c, const std::string& path);
void apply_override(RunConfig& c, const std::string& dotted_assignment);

void validate(const RunConfig& c);

// Resolved-config echo (stable key order, trailing newline).
std::string to_json_text(const RunConfig& c);

// Loaders honoring name/paths/data_dir; train applies subset_size (seeded).
data::Dataset load_train(const DatasetConfig& d, std::uint64_t seed);
data::Dataset load_test(const DatasetConfig& d);

}  // namespace airfl::config
