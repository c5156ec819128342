// Config document resolution: defaults, presets, JSON schema enforcement,
// dotted overrides, validation, the resolved-config echo, and data loading.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "airfl/config.hpp"
#include "doctest.h"

using namespace airfl;

namespace {

const std::string kDigits = AIRFL_SOURCE_DIR "/data/digits";

config::DatasetConfig explicit_digits() {
    config::DatasetConfig d;
    d.name = "idx";
    d.train_images = kDigits + "/train-images-idx3-ubyte";
    d.train_labels = kDigits + "/train-labels-idx1-ubyte";
    d.test_images = kDigits + "/t10k-images-idx3-ubyte";
    d.test_labels = kDigits + "/t10k-labels-idx1-ubyte";
    return d;
}

// getenv/setenv guard so the suite never leaks environment changes.
struct EnvGuard {
    std::string name;
    std::string old;
    bool had;
    explicit EnvGuard(const char* n) : name(n) {
        const char* v = std::getenv(n);
        had = v != nullptr;
        if (had) old = v;
    }
    ~EnvGuard() {
        if (had)
            ::setenv(name.c_str(), old.c_str(), 1);
        else
            ::unsetenv(name.c_str());
    }
};

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults are a runnable desk-scale setup") {
    const auto c = config::defaults();
    CHECK(c.dataset.name == "digits");
    CHECK(c.dataset.subset_size == 0);
    CHECK(c.output == "train.csv");
    CHECK(c.params.net_name == "dense-small");
    CHECK(c.params.clients == 10);
    CHECK(c.params.partition == fl::PartitionMode::iid);
    CHECK(c.params.training.rounds == 30);
    CHECK(c.params.training.lr == 0.01);
    CHECK(c.params.training.batch == 10);
    CHECK(c.params.training.participants == 0);
    CHECK(c.params.scheme.kind == transport::Kind::approximate);
    CHECK(c.params.scheme.order == 4);
    CHECK(c.params.scheme.sparsity == 1.0);
    CHECK(c.params.scheme.clip == 1.0);
    CHECK(c.params.scheme.interleave_depth == 32);
    CHECK(c.params.scheme.fec.codeword_len == 648);
    CHECK(c.params.scheme.fec.correctable == 7);
    CHECK(c.params.channel.snr_db == 20.0);
    CHECK(c.params.channel.distance_m == 10.0);
    CHECK(c.params.channel.pathloss_exp == 3.0);
    CHECK(c.params.channel.fading == channel::Fading::rayleigh_fast);
    CHECK(c.params.seed == 1);
    CHECK_NOTHROW(config::validate(c));
}

TEST_CASE("presets") {
    auto c = config::defaults();
    config::apply_preset(c, "desk");
    CHECK(c.dataset.name == "digits");
    CHECK(c.dataset.subset_size == 1000);
    CHECK(c.params.net_name == "dense-small");
    CHECK(c.params.clients == 10);
    CHECK(c.params.training.rounds == 30);

    config::apply_preset(c, "paper-mnist");
    CHECK(c.dataset.name == "mnist");
    CHECK(c.dataset.subset_size == 0);
    CHECK(c.params.net_name == "cnn-mnist");
    CHECK(c.params.clients == 100);
    CHECK(c.params.training.rounds == 100);

    CHECK_THROWS_WITH_AS(config::apply_preset(c, "rack"),
                         doctest::Contains("unknown preset 'rack'"),
                         std::invalid_argument);
}

TEST_CASE("apply_json_text: full document lands field by field") {
    auto c = config::defaults();
    config::apply_json_text(c, R"({
        "dataset": {"name": "idx",
                    "paths": {"train_images": "a", "train_labels": "b",
                              "test_images": "c", "test_labels": "d"},
                    "subset_size": 123},
        "partition": {"mode": "noniid2", "clients": 20},
        "net": {"spec": "cnn-mnist"},
        "training": {"rounds": 7, "lr": 0.5, "batch": 4,
                     "local_mode": "fullbatch", "participants": 5},
        "channel": {"snr_db": 13.5, "fading": "rayleigh_block",
                    "d": 2.0, "alpha": 2.5},
        "transport": {"kind": "ecrt", "order": 16, "packing": "msb_aligned",
                      "sparsity": 0.25, "clip": 0.75, "interleave_depth": 8,
                      "charge_index_bits": true,
                      "fec": {"codeword_len": 100, "correctable": 3}},
        "seed": 99,
        "output": "out.csv"
    })", "inline");

    CHECK(c.dataset.name == "idx");
    CHECK(c.dataset.train_images == "a");
    CHECK(c.dataset.train_labels == "b");
    CHECK(c.dataset.test_images == "c");
    CHECK(c.dataset.test_labels == "d");
    CHECK(c.dataset.subset_size == 123);
    CHECK(c.params.partition == fl::PartitionMode::noniid2);
    CHECK(c.params.clients == 20);
    CHECK(c.params.net_name == "cnn-mnist");
    CHECK(c.params.training.rounds == 7);
    CHECK(c.params.training.lr == 0.5);
    CHECK(c.params.training.batch == 4);
    CHECK(c.params.training.local_mode == fl::LocalMode::fullbatch);
    CHECK(c.params.training.participants == 5);
    CHECK(c.params.channel.snr_db == 13.5);
    CHECK(c.params.channel.fading == channel::Fading::rayleigh_block);
    CHECK(c.params.channel.distance_m == 2.0);
    CHECK(c.params.channel.pathloss_exp == 2.5);
    CHECK(c.params.scheme.kind == transport::Kind::ecrt);
    CHECK(c.params.scheme.order == 16);
    CHECK(c.params.scheme.packing == transport::Packing::msb_aligned);
    CHECK(c.params.scheme.sparsity == 0.25);
    CHECK(c.params.scheme.clip == 0.75);
    CHECK(c.params.scheme.interleave_depth == 8);
    CHECK(c.params.scheme.charge_index_bits == true);
    CHECK(c.params.scheme.fec.codeword_len == 100);
    CHECK(c.params.scheme.fec.correctable == 3);
    CHECK(c.params.seed == 99);
    CHECK(c.output == "out.csv");
    CHECK_NOTHROW(config::validate(c));

    // Partial documents only touch what they name.
    auto d = config::defaults();
    config::apply_json_text(d, R"({"training": {"lr": 0.2}})", "inline");
    CHECK(d.params.training.lr == 0.2);
    CHECK(d.params.training.rounds == 30);
}

TEST_CASE("apply_json_text: schema violations carry the field path") {
    auto c = config::defaults();
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"({"fooo": 1})", "x"),
        doctest::Contains("fooo: unknown key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"({"transport": {"fec": {"n": 1}}})", "x"),
        doctest::Contains("transport.fec.n: unknown key"),
        std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"({"training": {"rounds": 1.5}})", "x"),
        doctest::Contains("training.rounds: expected an integer"),
        std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"({"training": {"lr": "fast"}})", "x"),
        doctest::Contains("training.lr: expected a number"),
        std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"({"partition": {"mode": "byz"}})", "x"),
        doctest::Contains("partition.mode: unknown partition mode 'byz'"),
        std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"({"transport": {"kind": 4}})", "x"),
        doctest::Contains("transport.kind: expected a string"),
        std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"({"seed": -4})", "x"),
        doctest::Contains("seed: expected a non-negative integer"),
        std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, R"([1, 2])", "x"),
        doctest::Contains("top level must be a JSON object"),
        std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(c, "{not json", "mycfg.json"),
        doctest::Contains("mycfg.json"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(
            c, R"({"transport": {"charge_index_bits": "yes"}})", "x"),
        doctest::Contains("expected true or false"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config::apply_json_text(
            c, R"({"dataset": {"paths": {"train_batches": [1]}}})", "x"),
        doctest::Contains("dataset.paths.train_batches[0]: expected a string"),
        std::invalid_argument);
}

TEST_CASE("apply_override: dotted assignments reuse the schema") {
    auto c = config::defaults();
    config::apply_override(c, "training.lr=0.05");
    CHECK(c.params.training.lr == 0.05);
    config::apply_override(c, "net.spec=cnn-fashion");
    CHECK(c.params.net_name == "cnn-fashion");
    config::apply_override(c, "transport.charge_index_bits=true");
    CHECK(c.params.scheme.charge_index_bits);
    config::apply_override(c, "dataset.subset_size=500");
    CHECK(c.dataset.subset_size == 500);
    config::apply_override(c, "transport.fec.correctable=3");
    CHECK(c.params.scheme.fec.correctable == 3);
    // The value may itself contain '='; only the first one splits.
    config::apply_override(c, "output=runs/a=b.csv");
    CHECK(c.output == "runs/a=b.csv");
    // Overrides win over whatever came before them.
    config::apply_json_text(c, R"({"training": {"lr": 0.9}})", "x");
    config::apply_override(c, "training.lr=0.11");
    CHECK(c.params.training.lr == 0.11);

    CHECK_THROWS_WITH_AS(config::apply_override(c, "justakey"),
                         doctest::Contains("--set expects path=value"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(config::apply_override(c, "=5"),
                         doctest::Contains("--set expects path=value"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(config::apply_override(c, "training..lr=1"),
                         doctest::Contains("empty segment"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(config::apply_override(c, "bogus=1"),
                         doctest::Contains("bogus: unknown key"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(config::apply_override(c, "training.rounds=2.5"),
                         doctest::Contains("expected an integer"),
                         std::invalid_argument);
}

TEST_CASE("apply_file reads a document; a missing file is diagnosed") {
    const std::string path = "t_config.json";
    {
        std::ofstream os(path);
        os << R"({"seed": 42, "output": "from_file.csv"})";
    }
    auto c = config::defaults();
    config::apply_file(c, path);
    CHECK(c.params.seed == 42);
    CHECK(c.output == "from_file.csv");
    std::remove(path.c_str());

    CHECK_THROWS_WITH_AS(config::apply_file(c, "missing.json"),
                         doctest::Contains("cannot open config file"),
                         std::invalid_argument);
}

TEST_CASE("validate rejects each inconsistent field with its path") {
    auto ok = config::defaults();
    CHECK_NOTHROW(config::validate(ok));

    auto c = ok;
    c.params.clients = 0;
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("partition.clients"),
                         std::invalid_argument);
    c = ok;
    c.params.training.rounds = 0;
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("training.rounds"),
                         std::invalid_argument);
    c = ok;
    c.params.training.lr = -0.1;
    CHECK_THROWS_AS(config::validate(c), std::invalid_argument);
    c = ok;
    c.params.training.batch = 0;
    CHECK_THROWS_AS(config::validate(c), std::invalid_argument);
    c = ok;
    c.params.training.participants = c.params.clients + 1;
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("training.participants"),
                         std::invalid_argument);
    c = ok;
    c.params.channel.distance_m = 0.0;
    CHECK_THROWS_WITH_AS(config::validate(c), doctest::Contains("channel.d"),
                         std::invalid_argument);
    c = ok;
    c.params.channel.pathloss_exp = -1.0;
    CHECK_THROWS_AS(config::validate(c), std::invalid_argument);
    c = ok;
    c.params.net_name = "vgg16";
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("net.spec: unknown network spec"),
                         std::invalid_argument);
    c = ok;
    c.dataset.name = "svhn";
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("unknown dataset 'svhn'"),
                         std::invalid_argument);
    c = ok;
    c.dataset.name = "idx";  // no explicit paths
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("needs explicit"),
                         std::invalid_argument);
    c = ok;
    c.output = "";
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("output: must not be empty"),
                         std::invalid_argument);
    c = ok;
    c.params.scheme.order = 8;
    CHECK_THROWS_WITH_AS(config::validate(c),
                         doctest::Contains("transport:"),
                         std::invalid_argument);
}

TEST_CASE("to_json_text echo parses back to the same configuration") {
    auto a = config::defaults();
    config::apply_preset(a, "desk");
    config::apply_override(a, "transport.kind=ecrt");
    config::apply_override(a, "transport.sparsity=0.1");
    config::apply_override(a, "channel.snr_db=7.25");

    const std::string text = config::to_json_text(a);
    CHECK(!text.empty());
    CHECK(text.back() == '\n');
    CHECK(text.find("\"kind\": \"ecrt\"") != std::string::npos);
    CHECK(text.find("\"fading\": \"rayleigh_fast\"") != std::string::npos);

    auto b = config::defaults();
    config::apply_json_text(b, text, "echo");
    CHECK(config::to_json_text(b) == text);
}

TEST_CASE("data_dir honors AIRFL_DATA_DIR") {
    EnvGuard guard("AIRFL_DATA_DIR");
    ::setenv("AIRFL_DATA_DIR", "/somewhere/else", 1);
    CHECK(config::data_dir() == "/somewhere/else");
    ::setenv("AIRFL_DATA_DIR", "", 1);
    CHECK(config::data_dir() == "data");
    ::unsetenv("AIRFL_DATA_DIR");
    CHECK(config::data_dir() == "data");
}

TEST_CASE("load_train/load_test resolve names, paths, and subsets") {
    const auto d = explicit_digits();
    const auto test = config::load_test(d);
    CHECK(test.n == 500);

    auto full = config::load_train(d, 1);
    CHECK(full.n == 1297);

    auto sub = d;
    sub.subset_size = 200;
    const auto s1 = config::load_train(sub, 5);
    const auto s2 = config::load_train(sub, 5);
    const auto s3 = config::load_train(sub, 6);
    CHECK(s1.n == 200);
    CHECK(s1.labels == s2.labels);
    CHECK(s1.pixels == s2.pixels);
    CHECK(s1.labels != s3.labels);

    sub.subset_size = 5000;  // larger than the set: keep everything
    CHECK(config::load_train(sub, 1).n == 1297);

    // Named datasets resolve under the data directory.
    EnvGuard guard("AIRFL_DATA_DIR");
    ::setenv("AIRFL_DATA_DIR", AIRFL_SOURCE_DIR "/data", 1);
    config::DatasetConfig named;
    named.name = "digits";
    CHECK(config::load_train(named, 1).n == 1297);
    CHECK(config::load_test(named).n == 500);
}

}  // TEST_SUITE
