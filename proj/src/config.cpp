#include "airfl/config.hpp"

#include <cctype>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "airfl/nn.hpp"
#include "json.hpp"

namespace airfl::config {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
}

void want_object(const json& v, const std::string& path) {
    if (!v.is_object()) bad(path + ": expected an object");
}

std::string want_str(const json& v, const std::string& path) {
    if (!v.is_string()) bad(path + ": expected a string");
    return v.get<std::string>();
}

bool want_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) bad(path + ": expected true or false");
    return v.get<bool>();
}

double want_num(const json& v, const std::string& path) {
    if (!v.is_number()) bad(path + ": expected a number");
    return v.get<double>();
}

int want_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) bad(path + ": expected an integer");
    const long long x = v.get<long long>();
    if (x < INT_MIN || x > INT_MAX) bad(path + ": out of range");
    return int(x);
}

std::uint64_t want_u64(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0)
        return std::uint64_t(v.get<long long>());
    bad(path + ": expected a non-negative integer");
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known)
            bad((path.empty() ? it.key() : path + "." + it.key()) +
                ": unknown key");
    }
}

// Enum parses share the module converters; prefix their message with a path.
template <typename F>
auto parse_enum(F&& f, const std::string& text, const std::string& path)
    -> decltype(f(text)) {
    try {
        return f(text);
    } catch (const std::invalid_argument& e) {
        bad(path + ": " + e.what());
    }
}

void apply_json(RunConfig& c, const json& j, const std::string& source) {
    if (!j.is_object()) bad(source + ": top level must be a JSON object");
    reject_unknown(j, "", {"dataset", "partition", "net", "training",
                           "channel", "transport", "seed", "output"});

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        want_object(d, "dataset");
        reject_unknown(d, "dataset", {"name", "paths", "subset_size"});
        if (d.contains("name")) c.dataset.name = want_str(d.at("name"), "dataset.name");
        if (d.contains("subset_size"))
            c.dataset.subset_size = want_u64(d.at("subset_size"), "dataset.subset_size");
        if (d.contains("paths")) {
            const json& p = d.at("paths");
            want_object(p, "dataset.paths");
            reject_unknown(p, "dataset.paths",
                           {"train_images", "train_labels", "test_images",
                            "test_labels", "train_batches", "test_batch"});
            if (p.contains("train_images"))
                c.dataset.train_images = want_str(p.at("train_images"), "dataset.paths.train_images");
            if (p.contains("train_labels"))
                c.dataset.train_labels = want_str(p.at("train_labels"), "dataset.paths.train_labels");
            if (p.contains("test_images"))
                c.dataset.test_images = want_str(p.at("test_images"), "dataset.paths.test_images");
            if (p.contains("test_labels"))
                c.dataset.test_labels = want_str(p.at("test_labels"), "dataset.paths.test_labels");
            if (p.contains("test_batch"))
                c.dataset.test_batch = want_str(p.at("test_batch"), "dataset.paths.test_batch");
            if (p.contains("train_batches")) {
                const json& b = p.at("train_batches");
                if (!b.is_array()) bad("dataset.paths.train_batches: expected an array of strings");
                c.dataset.train_batches.clear();
                for (std::size_t i = 0; i < b.size(); ++i)
                    c.dataset.train_batches.push_back(want_str(
                        b.at(i), "dataset.paths.train_batches[" + std::to_string(i) + "]"));
            }
        }
    }

    if (j.contains("partition")) {
        const json& p = j.at("partition");
        want_object(p, "partition");
        reject_unknown(p, "partition", {"mode", "clients"});
        if (p.contains("mode"))
            c.params.partition = parse_enum(fl::partition_mode_from_string,
                                            want_str(p.at("mode"), "partition.mode"),
                                            "partition.mode");
        if (p.contains("clients"))
            c.params.clients = want_int(p.at("clients"), "partition.clients");
    }

    if (j.contains("net")) {
        const json& n = j.at("net");
        want_object(n, "net");
        reject_unknown(n, "net", {"spec"});
        if (n.contains("spec")) c.params.net_name = want_str(n.at("spec"), "net.spec");
    }

    if (j.contains("training")) {
        const json& t = j.at("training");
        want_object(t, "training");
        reject_unknown(t, "training",
                       {"rounds", "lr", "batch", "local_mode", "participants"});
        auto& tr = c.params.training;
        if (t.contains("rounds")) tr.rounds = want_int(t.at("rounds"), "training.rounds");
        if (t.contains("lr")) tr.lr = want_num(t.at("lr"), "training.lr");
        if (t.contains("batch")) tr.batch = want_int(t.at("batch"), "training.batch");
        if (t.contains("local_mode"))
            tr.local_mode = parse_enum(fl::local_mode_from_string,
                                       want_str(t.at("local_mode"), "training.local_mode"),
                                       "training.local_mode");
        if (t.contains("participants"))
            tr.participants = want_int(t.at("participants"), "training.participants");
    }

    if (j.contains("channel")) {
        const json& ch = j.at("channel");
        want_object(ch, "channel");
        reject_unknown(ch, "channel", {"snr_db", "fading", "d", "alpha"});
        auto& cc = c.params.channel;
        if (ch.contains("snr_db")) cc.snr_db = want_num(ch.at("snr_db"), "channel.snr_db");
        if (ch.contains("fading"))
            cc.fading = parse_enum(channel::fading_from_string,
                                   want_str(ch.at("fading"), "channel.fading"),
                                   "channel.fading");
        if (ch.contains("d")) cc.distance_m = want_num(ch.at("d"), "channel.d");
        if (ch.contains("alpha")) cc.pathloss_exp = want_num(ch.at("alpha"), "channel.alpha");
    }

    if (j.contains("transport")) {
        const json& t = j.at("transport");
        want_object(t, "transport");
        reject_unknown(t, "transport",
                       {"kind", "order", "packing", "sparsity", "clip",
                        "interleave_depth", "charge_index_bits", "fec"});
        auto& s = c.params.scheme;
        if (t.contains("kind"))
            s.kind = parse_enum(transport::kind_from_string,
                                want_str(t.at("kind"), "transport.kind"),
                                "transport.kind");
        if (t.contains("order")) s.order = want_int(t.at("order"), "transport.order");
        if (t.contains("packing"))
            s.packing = parse_enum(transport::packing_from_string,
                                   want_str(t.at("packing"), "transport.packing"),
                                   "transport.packing");
        if (t.contains("sparsity")) s.sparsity = want_num(t.at("sparsity"), "transport.sparsity");
        if (t.contains("clip")) s.clip = want_num(t.at("clip"), "transport.clip");
        if (t.contains("interleave_depth"))
            s.interleave_depth = std::size_t(
                want_int(t.at("interleave_depth"), "transport.interleave_depth"));
        if (t.contains("charge_index_bits"))
            s.charge_index_bits = want_bool(t.at("charge_index_bits"),
                                            "transport.charge_index_bits");
        if (t.contains("fec")) {
            const json& f = t.at("fec");
            want_object(f, "transport.fec");
            reject_unknown(f, "transport.fec", {"codeword_len", "correctable"});
            if (f.contains("codeword_len"))
                s.fec.codeword_len = want_int(f.at("codeword_len"), "transport.fec.codeword_len");
            if (f.contains("correctable"))
                s.fec.correctable = want_int(f.at("correctable"), "transport.fec.correctable");
        }
    }

    if (j.contains("seed")) c.params.seed = want_u64(j.at("seed"), "seed");
    if (j.contains("output")) c.output = want_str(j.at("output"), "output");
}

std::string idx_default(const std::string& name, const char* file) {
    return data_dir() + "/" + name + "/" + file;
}

}  // namespace

std::string data_dir() {
    const char* e = std::getenv("AIRFL_DATA_DIR");
    return (e && *e) ? std::string(e) : std::string("data");
}

RunConfig defaults() { return RunConfig{}; }

void apply_preset(RunConfig& c, const std::string& name) {
    if (name == "desk") {
        c.dataset.name = "digits";
        c.dataset.subset_size = 1000;
        c.params.net_name = "dense-small";
        c.params.clients = 10;
        c.params.training.rounds = 30;
    } else if (name == "paper-mnist") {
        c.dataset.name = "mnist";
        c.dataset.subset_size = 0;
        c.params.net_name = "cnn-mnist";
        c.params.clients = 100;
        c.params.training.rounds = 100;
    } else {
        bad("unknown preset '" + name + "' (expected desk or paper-mnist)");
    }
}

void apply_json_text(RunConfig& c, const std::string& text,
                     const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        bad(source + ": " + e.what());
    }
    apply_json(c, j, source);
}

void apply_file(RunConfig& c, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) bad("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    apply_json_text(c, ss.str(), path);
}

void apply_override(RunConfig& c, const std::string& dotted_assignment) {
    const std::size_t eq = dotted_assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        bad("--set expects path=value, got '" + dotted_assignment + "'");
    const std::string path = dotted_assignment.substr(0, eq);
    const std::string value = dotted_assignment.substr(eq + 1);

    // Value: JSON literal when it parses as one, else a bare string.
    json leaf;
    try {
        leaf = json::parse(value);
    } catch (const json::parse_error&) {
        leaf = value;
    }

    // Build the nested single-key document and run it through the schema.
    json doc = leaf;
    std::size_t end = path.size();
    for (;;) {
        const std::size_t dot = path.rfind('.', end - 1);
        const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
        const std::string key = path.substr(start, end - start);
        if (key.empty()) bad("--set path has an empty segment: '" + path + "'");
        doc = json{{key, std::move(doc)}};
        if (dot == std::string::npos) break;
        end = dot;
    }
    apply_json(c, doc, "--set " + path);
}

void validate(const RunConfig& c) {
    const auto& p = c.params;
    try {
        p.scheme.validate();
    } catch (const std::invalid_argument& e) {
        bad(e.what());  // Scheme::validate() messages already carry the prefix.
    }
    if (p.clients < 1) bad("partition.clients: must be >= 1");
    if (p.training.rounds < 1) bad("training.rounds: must be >= 1");
    if (!(p.training.lr > 0.0) || !std::isfinite(p.training.lr))
        bad("training.lr: must be positive and finite");
    if (p.training.batch < 1) bad("training.batch: must be >= 1");
    if (p.training.participants < 0 || p.training.participants > p.clients)
        bad("training.participants: must lie in [0, partition.clients]");
    if (!std::isfinite(p.channel.snr_db)) bad("channel.snr_db: must be finite");
    if (!(p.channel.distance_m > 0.0)) bad("channel.d: must be positive");
    if (!(p.channel.pathloss_exp >= 0.0)) bad("channel.alpha: must be >= 0");
    try {
        nn::NetworkSpec::by_name(p.net_name);
    } catch (const std::exception& e) {
        bad(std::string("net.spec: ") + e.what());
    }
    const std::string& n = c.dataset.name;
    if (n != "digits" && n != "mnist" && n != "fashion-mnist" &&
        n != "cifar10" && n != "idx")
        bad("dataset.name: unknown dataset '" + n +
            "' (expected digits, mnist, fashion-mnist, cifar10, or idx)");
    if (n == "idx" &&
        (c.dataset.train_images.empty() || c.dataset.train_labels.empty() ||
         c.dataset.test_images.empty() || c.dataset.test_labels.empty()))
        bad("dataset.paths: dataset 'idx' needs explicit train_images, "
            "train_labels, test_images, and test_labels");
    if (c.output.empty()) bad("output: must not be empty");
}

std::string to_json_text(const RunConfig& c) {
    const auto& p = c.params;
    json j;
    j["dataset"] = {{"name", c.dataset.name},
                    {"subset_size", c.dataset.subset_size},
                    {"paths",
                     {{"train_images", c.dataset.train_images},
                      {"train_labels", c.dataset.train_labels},
                      {"test_images", c.dataset.test_images},
                      {"test_labels", c.dataset.test_labels},
                      {"train_batches", c.dataset.train_batches},
                      {"test_batch", c.dataset.test_batch}}}};
    j["partition"] = {{"mode", fl::to_string(p.partition)},
                      {"clients", p.clients}};
    j["net"] = {{"spec", p.net_name}};
    j["training"] = {{"rounds", p.training.rounds},
                     {"lr", p.training.lr},
                     {"batch", p.training.batch},
                     {"local_mode", fl::to_string(p.training.local_mode)},
                     {"participants", p.training.participants}};
    j["channel"] = {{"snr_db", p.channel.snr_db},
                    {"fading", channel::to_string(p.channel.fading)},
                    {"d", p.channel.distance_m},
                    {"alpha", p.channel.pathloss_exp}};
    j["transport"] = {{"kind", transport::to_string(p.scheme.kind)},
                      {"order", p.scheme.order},
                      {"packing", transport::to_string(p.scheme.packing)},
                      {"sparsity", p.scheme.sparsity},
                      {"clip", p.scheme.clip},
                      {"interleave_depth", p.scheme.interleave_depth},
                      {"charge_index_bits", p.scheme.charge_index_bits},
                      {"fec",
                       {{"codeword_len", p.scheme.fec.codeword_len},
                        {"correctable", p.scheme.fec.correctable}}}};
    j["seed"] = p.seed;
    j["output"] = c.output;
    return j.dump(2) + "\n";
}

namespace {

struct IdxPaths {
    std::string train_images, train_labels, test_images, test_labels;
};

IdxPaths resolve_idx(const DatasetConfig& d) {
    std::string dir_name = d.name;
    IdxPaths p;
    p.train_images = d.train_images.empty()
                         ? idx_default(dir_name, "train-images-idx3-ubyte")
                         : d.train_images;
    p.train_labels = d.train_labels.empty()
                         ? idx_default(dir_name, "train-labels-idx1-ubyte")
                         : d.train_labels;
    p.test_images = d.test_images.empty()
                        ? idx_default(dir_name, "t10k-images-idx3-ubyte")
                        : d.test_images;
    p.test_labels = d.test_labels.empty()
                        ? idx_default(dir_name, "t10k-labels-idx1-ubyte")
                        : d.test_labels;
    return p;
}

std::vector<std::string> resolve_cifar_train(const DatasetConfig& d) {
    if (!d.train_batches.empty()) return d.train_batches;
    std::vector<std::string> b;
    for (int i = 1; i <= 5; ++i)
        b.push_back(data_dir() + "/cifar10/data_batch_" + std::to_string(i) +
                    ".bin");
    return b;
}

}  // namespace

data::Dataset load_train(const DatasetConfig& d, std::uint64_t seed) {
    data::Dataset t;
    if (d.name == "cifar10") {
        t = data::load_cifar10(resolve_cifar_train(d));
    } else {
        const IdxPaths p = resolve_idx(d);
        t = data::load_idx_dataset(p.train_images, p.train_labels);
    }
    if (d.subset_size > 0 && d.subset_size < std::uint64_t(t.n))
        t = data::take_subset(t, std::size_t(d.subset_size), seed);
    return t;
}

data::Dataset load_test(const DatasetConfig& d) {
    if (d.name == "cifar10") {
        const std::string b = d.test_batch.empty()
                                  ? data_dir() + "/cifar10/test_batch.bin"
                                  : d.test_batch;
        return data::load_cifar10({b});
    }
    const IdxPaths p = resolve_idx(d);
    return data::load_idx_dataset(p.test_images, p.test_labels);
}

}  // namespace airfl::config
