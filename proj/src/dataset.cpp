#include "airfl/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "airfl/rng.hpp"

namespace airfl::data {
namespace {

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

struct IdxReader {
    std::ifstream is;
    std::string path;
    std::size_t off = 0;

    explicit IdxReader(const std::string& p) : is(p, std::ios::binary), path(p) {
        if (!is) throw std::runtime_error("idx: cannot open " + p);
    }
    std::uint32_t read_u32_be(const char* what) {
        unsigned char b[4];
        is.read(reinterpret_cast<char*>(b), 4);
        if (!is)
            throw std::runtime_error("idx: truncated file " + path +
                                     ": failed reading " + what + " at offset " +
                                     std::to_string(off));
        off += 4;
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    }
    void read_bytes(std::uint8_t* dst, std::size_t n, const char* what) {
        is.read(reinterpret_cast<char*>(dst), std::streamsize(n));
        const std::size_t got = std::size_t(is.gcount());
        if (got != n)
            throw std::runtime_error(
                "idx: truncated file " + path + ": expected " +
                std::to_string(n) + " bytes of " + what + " at offset " +
                std::to_string(off) + ", found " + std::to_string(got));
        off += n;
    }
};

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

void Dataset::sample(std::size_t i, double* out) const {
    const std::size_t sz = image_size();
    const std::uint8_t* px = pixels.data() + i * sz;
    for (std::size_t j = 0; j < sz; ++j) out[j] = double(px[j]) / 255.0;
}

Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path) {
    Dataset d;
    {
        IdxReader r(images_path);
        const std::uint32_t magic = r.read_u32_be("magic");
        if (magic != kImagesMagic)
            throw std::runtime_error("idx: bad magic " + hex32(magic) + " in " +
                                     images_path + " (expected " +
                                     hex32(kImagesMagic) + " for images)");
        const std::uint32_t count = r.read_u32_be("image count");
        const std::uint32_t rows = r.read_u32_be("row count");
        const std::uint32_t cols = r.read_u32_be("column count");
        if (rows == 0 || cols == 0)
            throw std::runtime_error("idx: zero image dimensions in " +
                                     images_path);
        d.c = 1;
        d.h = int(rows);
        d.w = int(cols);
        d.n = count;
        d.pixels.resize(std::size_t(count) * rows * cols);
        r.read_bytes(d.pixels.data(), d.pixels.size(), "pixel data");
    }
    {
        IdxReader r(labels_path);
        const std::uint32_t magic = r.read_u32_be("magic");
        if (magic != kLabelsMagic)
            throw std::runtime_error("idx: bad magic " + hex32(magic) + " in " +
                                     labels_path + " (expected " +
                                     hex32(kLabelsMagic) + " for labels)");
        const std::uint32_t count = r.read_u32_be("label count");
        if (count != d.n)
            throw std::runtime_error(
                "idx: image/label count mismatch: " + images_path + " has " +
                std::to_string(d.n) + " images but " + labels_path + " has " +
                std::to_string(count) + " labels");
        d.labels.resize(count);
        r.read_bytes(d.labels.data(), d.labels.size(), "label data");
    }
    for (std::size_t i = 0; i < d.labels.size(); ++i)
        if (d.labels[i] > 9)
            throw std::runtime_error("idx: label " + std::to_string(d.labels[i]) +
                                     " out of range 0-9 at record " +
                                     std::to_string(i) + " in " + labels_path);
    return d;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
    if (batch_paths.empty())
        throw std::invalid_argument("cifar: no batch files given");
    Dataset d;
    d.c = 3;
    d.h = 32;
    d.w = 32;
    constexpr std::size_t kRecord = 1 + 3072;
    for (const std::string& path : batch_paths) {
        std::ifstream is(path, std::ios::binary | std::ios::ate);
        if (!is) throw std::runtime_error("cifar: cannot open " + path);
        const std::size_t size = std::size_t(is.tellg());
        if (size == 0 || size % kRecord != 0)
            throw std::runtime_error(
                "cifar: file size " + std::to_string(size) + " of " + path +
                " is not a multiple of the 3073-byte record");
        is.seekg(0);
        const std::size_t count = size / kRecord;
        const std::size_t base = d.n;
        d.n += count;
        d.labels.resize(d.n);
        d.pixels.resize(d.n * 3072);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint8_t label;
            is.read(reinterpret_cast<char*>(&label), 1);
            is.read(reinterpret_cast<char*>(d.pixels.data() +
                                            (base + i) * 3072),
                    3072);
            if (!is)
                throw std::runtime_error("cifar: truncated record " +
                                         std::to_string(i) + " in " + path);
            if (label > 9)
                throw std::runtime_error(
                    "cifar: label " + std::to_string(label) +
                    " out of range 0-9 at record " + std::to_string(i) +
                    " in " + path);
            d.labels[base + i] = label;
        }
    }
    return d;
}

Dataset take_subset(const Dataset& d, std::size_t count, std::uint64_t seed) {
    if (count >= d.n) return d;
    std::vector<std::uint32_t> idx(d.n);
    for (std::size_t i = 0; i < d.n; ++i) idx[i] = std::uint32_t(i);
    rng::Stream st(rng::derive_seed({seed, rng::tag::subset}));
    st.shuffle(idx);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    Dataset out;
    out.c = d.c;
    out.h = d.h;
    out.w = d.w;
    out.n = count;
    const std::size_t sz = d.image_size();
    out.pixels.resize(count * sz);
    out.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::copy_n(d.pixels.data() + std::size_t(idx[i]) * sz, sz,
                    out.pixels.data() + i * sz);
        out.labels[i] = d.labels[idx[i]];
    }
    return out;
}

}  // namespace airfl::data
