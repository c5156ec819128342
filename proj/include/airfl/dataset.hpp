// Image dataset loading: IDX files (big-endian, the MNIST family layout) and
// CIFAR-10 binary batches. Pixels are kept as raw bytes; sample() exposes the
// [0,1]-scaled real view consumed by the networks.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace airfl::data {

struct Dataset {
    int c = 1, h = 0, w = 0;
    std::size_t n = 0;
    std::vector<std::uint8_t> pixels;  // n * c*h*w bytes, plane-major
    std::vector<std::uint8_t> labels;  // n entries, 0..9

    std::size_t image_size() const {
        return std::size_t(c) * std::size_t(h) * std::size_t(w);
    }
    // Writes image i as c*h*w doubles in [0,1] (pixel/255).
    void sample(std::size_t i, double* out) const;
};

// MNIST-layout pair: images file (magic 0x00000803, dims count x rows x cols)
// plus labels file (magic 0x00000801). Distinct diagnostics for a bad magic,
// a truncated file, and an image/label count mismatch.
Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes
// (3 channel planes of 32x32).
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Random subset without replacement (ascending original order), drawn from a
// stream derived from (seed, subset tag). count >= n returns a full copy.
Dataset take_subset(const Dataset& d, std::size_t count, std::uint64_t seed);

}  // namespace airfl::data
