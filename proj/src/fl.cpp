#include "airfl/fl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "airfl/gradbits.hpp"
#include "airfl/kernels.hpp"
#include "airfl/rng.hpp"

namespace airfl::fl {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// `count` items into `parts` contiguous runs, first runs one item longer.
std::vector<std::size_t> even_cuts(std::size_t count, std::size_t parts) {
    std::vector<std::size_t> sizes(parts, count / parts);
    for (std::size_t i = 0; i < count % parts; ++i) ++sizes[i];
    return sizes;
}

}  // namespace

PartitionMode partition_mode_from_string(const std::string& s) {
    if (s == "iid") return PartitionMode::iid;
    if (s == "noniid2") return PartitionMode::noniid2;
    fail("unknown partition mode '" + s + "' (expected iid or noniid2)");
}

const char* to_string(PartitionMode m) {
    return m == PartitionMode::iid ? "iid" : "noniid2";
}

LocalMode local_mode_from_string(const std::string& s) {
    if (s == "epoch-delta") return LocalMode::epoch_delta;
    if (s == "fullbatch") return LocalMode::fullbatch;
    fail("unknown local mode '" + s + "' (expected epoch-delta or fullbatch)");
}

const char* to_string(LocalMode m) {
    return m == LocalMode::epoch_delta ? "epoch-delta" : "fullbatch";
}

std::vector<double> Partition::weights() const {
    std::size_t total = 0;
    for (const auto& c : clients) total += c.size();
    std::vector<double> w(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i)
        w[i] = double(clients[i].size()) / double(total);
    return w;
}

Partition partition_dataset(const std::vector<std::uint8_t>& labels, int m,
                            PartitionMode mode, std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (m < 1) fail("partition: client count must be >= 1, got " + std::to_string(m));
    if (std::size_t(m) > n)
        fail("partition: " + std::to_string(m) + " clients but only " +
             std::to_string(n) + " samples");

    rng::Stream st(rng::derive_seed({seed, rng::tag::partition}));
    Partition part;
    part.clients.resize(std::size_t(m));

    if (mode == PartitionMode::iid) {
        std::vector<std::uint32_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        st.shuffle(order);
        const auto sizes = even_cuts(n, std::size_t(m));
        std::size_t at = 0;
        for (int c = 0; c < m; ++c) {
            part.clients[std::size_t(c)].assign(order.begin() + std::ptrdiff_t(at),
                                                order.begin() + std::ptrdiff_t(at + sizes[std::size_t(c)]));
            at += sizes[std::size_t(c)];
        }
    } else {
        const std::size_t n_shards = 2 * std::size_t(m);
        if (n_shards > n)
            fail("partition: noniid2 needs " + std::to_string(n_shards) +
                 " non-empty shards but only " + std::to_string(n) + " samples");

        int max_label = 0;
        for (auto l : labels) max_label = std::max(max_label, int(l));
        std::vector<std::vector<std::uint32_t>> by_class(std::size_t(max_label) + 1);
        for (std::size_t i = 0; i < n; ++i)
            by_class[labels[i]].push_back(std::uint32_t(i));
        std::vector<int> classes;  // nonempty labels, ascending
        for (int c = 0; c <= max_label; ++c)
            if (!by_class[std::size_t(c)].empty()) classes.push_back(c);

        struct Shard {
            std::vector<std::uint32_t> idx;
            int label;  // -1 when the shard straddles classes (tiny-m fallback)
        };
        std::vector<Shard> shards;
        shards.reserve(n_shards);

        if (n_shards >= classes.size()) {
            // Label-pure shards. Every class gets one; each extra shard goes to
            // the class currently holding the most samples per shard (compared
            // exactly via cross-multiplication, ties to the lower label), which
            // keeps shard sizes proportional to class frequency and can never
            // produce an empty shard while n_shards <= n.
            std::vector<std::size_t> per_class(classes.size(), 1);
            for (std::size_t extra = n_shards - classes.size(); extra > 0; --extra) {
                std::size_t best = 0;
                for (std::size_t i = 1; i < classes.size(); ++i) {
                    const std::size_t ni = by_class[std::size_t(classes[i])].size();
                    const std::size_t nb = by_class[std::size_t(classes[best])].size();
                    if (ni * per_class[best] > nb * per_class[i]) best = i;
                }
                ++per_class[best];
            }
            for (std::size_t i = 0; i < classes.size(); ++i) {
                const auto& src = by_class[std::size_t(classes[i])];
                const auto sizes = even_cuts(src.size(), per_class[i]);
                std::size_t at = 0;
                for (std::size_t sz : sizes) {
                    Shard sh;
                    sh.idx.assign(src.begin() + std::ptrdiff_t(at),
                                  src.begin() + std::ptrdiff_t(at + sz));
                    sh.label = classes[i];
                    shards.push_back(std::move(sh));
                    at += sz;
                }
            }
        } else {
            // More classes than shards (very small m): fall back to contiguous
            // slices of the label-sorted sample list. Clients may then straddle
            // class boundaries; m == 1 simply owns everything.
            std::vector<std::uint32_t> sorted;
            sorted.reserve(n);
            for (int c : classes)
                sorted.insert(sorted.end(), by_class[std::size_t(c)].begin(),
                              by_class[std::size_t(c)].end());
            const auto sizes = even_cuts(n, n_shards);
            std::size_t at = 0;
            for (std::size_t sz : sizes) {
                Shard sh;
                sh.idx.assign(sorted.begin() + std::ptrdiff_t(at),
                              sorted.begin() + std::ptrdiff_t(at + sz));
                sh.label = -1;
                shards.push_back(std::move(sh));
                at += sz;
            }
        }

        // Deal two shards per client. With label-pure shards of two or more
        // classes the pairs must mix labels: after one shuffle, any client
        // stuck with a same-class pair swaps its second shard with the first
        // client holding no shard of that class. Such a donor always exists
        // when no class owns more than m shards (each client can absorb only
        // one shard of a class), the swap leaves the donor mixed, and repaired
        // clients stay mixed, so one ascending pass settles every client.
        std::vector<std::uint32_t> deal(n_shards);
        std::iota(deal.begin(), deal.end(), 0u);
        st.shuffle(deal);
        const bool need_mix = shards[0].label >= 0 && classes.size() >= 2;
        if (need_mix) {
            std::vector<std::size_t> class_shards(std::size_t(max_label) + 1, 0);
            for (const auto& sh : shards) ++class_shards[std::size_t(sh.label)];
            for (int c : classes)
                if (class_shards[std::size_t(c)] > std::size_t(m))
                    fail("partition: class " + std::to_string(c) + " fills " +
                         std::to_string(class_shards[std::size_t(c)]) + " of " +
                         std::to_string(n_shards) + " shards; no two-class " +
                         "deal across " + std::to_string(m) +
                         " clients can absorb it");
            auto label_at = [&](std::size_t slot) {
                return shards[deal[slot]].label;
            };
            for (int c = 0; c < m; ++c) {
                const std::size_t k = 2 * std::size_t(c);
                const int dup = label_at(k);
                if (dup != label_at(k + 1)) continue;
                bool repaired = false;
                for (int j = 0; j < m && !repaired; ++j) {
                    const std::size_t o = 2 * std::size_t(j);
                    if (j == c || label_at(o) == dup || label_at(o + 1) == dup)
                        continue;
                    std::swap(deal[k + 1], deal[o + 1]);
                    repaired = true;
                }
                if (!repaired)
                    fail("partition: no donor shard found while fixing a "
                         "same-class pair for client " + std::to_string(c));
            }
        }
        for (int c = 0; c < m; ++c) {
            const auto& s0 = shards[deal[2 * std::size_t(c)]].idx;
            const auto& s1 = shards[deal[2 * std::size_t(c) + 1]].idx;
            auto& dst = part.clients[std::size_t(c)];
            dst.reserve(s0.size() + s1.size());
            dst.insert(dst.end(), s0.begin(), s0.end());
            dst.insert(dst.end(), s1.begin(), s1.end());
        }
    }

    for (auto& c : part.clients) std::sort(c.begin(), c.end());
    return part;
}

std::vector<double> local_train(const nn::Network& net,
                                const std::vector<double>& w,
                                const data::Dataset& train,
                                const std::vector<std::uint32_t>& samples,
                                const TrainingParams& tp,
                                std::uint64_t shuffle_seed) {
    if (samples.empty()) fail("local_train: client has no samples");
    if (w.size() != net.param_count())
        fail("local_train: got " + std::to_string(w.size()) + " parameters, network has " +
             std::to_string(net.param_count()));
    if (!(tp.lr > 0.0) || !std::isfinite(tp.lr)) fail("local_train: lr must be positive and finite");
    if (tp.batch < 1) fail("local_train: batch must be >= 1");

    std::vector<double> x(net.input_shape().flat());
    nn::Trace t;
    std::vector<double> g(net.param_count(), 0.0);

    auto accumulate = [&](const double* params, std::uint32_t idx, double scale,
                          double* grad) {
        train.sample(idx, x.data());
        net.forward(params, x.data(), t);
        const double l = net.loss(t, train.labels[idx]);
        if (!std::isfinite(l))
            throw NonFiniteError("local training: non-finite loss on sample " +
                                 std::to_string(idx));
        net.backward(params, x.data(), t, train.labels[idx], scale, grad);
    };

    if (tp.local_mode == LocalMode::fullbatch) {
        const double scale = 1.0 / double(samples.size());
        for (std::uint32_t idx : samples) accumulate(w.data(), idx, scale, g.data());
    } else {
        std::vector<std::uint32_t> order = samples;
        rng::Stream st(shuffle_seed);
        st.shuffle(order);
        std::vector<double> wl = w;
        std::vector<double> gb(net.param_count());
        for (std::size_t at = 0; at < order.size(); at += std::size_t(tp.batch)) {
            const std::size_t stop =
                std::min(order.size(), at + std::size_t(tp.batch));
            std::fill(gb.begin(), gb.end(), 0.0);
            const double scale = 1.0 / double(stop - at);
            for (std::size_t i = at; i < stop; ++i)
                accumulate(wl.data(), order[i], scale, gb.data());
            nn::sgd_step(wl, gb, tp.lr);
        }
        const double inv = 1.0 / tp.lr;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = (w[i] - wl[i]) * inv;
    }

    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
            throw NonFiniteError(
                "local training: non-finite gradient at parameter " +
                std::to_string(i));
    gradbits::clip(g, tp.clip);
    return g;
}

std::vector<double> aggregate(const std::vector<std::vector<double>>& grads,
                              const std::vector<double>& weights) {
    if (grads.empty()) fail("aggregate: no gradients");
    if (grads.size() != weights.size())
        fail("aggregate: " + std::to_string(grads.size()) + " gradients but " +
             std::to_string(weights.size()) + " weights");
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (!(std::abs(sum - 1.0) <= 1e-9)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", sum);
        fail(std::string("aggregate: weights sum to ") + buf +
             ", expected 1 within 1e-9");
    }
    const std::size_t n = grads[0].size();
    std::vector<double> out(n, 0.0);
    for (std::size_t m = 0; m < grads.size(); ++m) {
        if (grads[m].size() != n)
            fail("aggregate: gradient length mismatch at client " +
                 std::to_string(m));
        kern::active().axpy(weights[m], grads[m].data(), out.data(), n);
    }
    return out;
}

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(std::size_t(jobs), n);
    std::vector<std::exception_ptr> errs(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

namespace {

// Clients taking part in a round: everyone when k == m, otherwise a seeded
// k-subset (ascending) so reruns pick the same clients.
std::vector<std::size_t> pick_participants(int m, int k, std::uint64_t seed,
                                           int round) {
    std::vector<std::size_t> ids(static_cast<std::size_t>(m));
    std::iota(ids.begin(), ids.end(), std::size_t(0));
    if (k < m) {
        rng::Stream st(rng::derive_seed(
            {seed, rng::tag::subset, std::uint64_t(round)}));
        st.shuffle(ids);
        ids.resize(std::size_t(k));
        std::sort(ids.begin(), ids.end());
    }
    return ids;
}

std::vector<double> participant_weights(const Partition& part,
                                        const std::vector<std::size_t>& active) {
    double total = 0.0;
    for (std::size_t c : active) total += double(part.clients[c].size());
    std::vector<double> w(active.size());
    for (std::size_t i = 0; i < active.size(); ++i)
        w[i] = double(part.clients[active[i]].size()) / total;
    return w;
}

}  // namespace

std::vector<metrics::RoundMetrics> run_training(const RunParams& p,
                                                const data::Dataset& train,
                                                const data::Dataset& test,
                                                const MetricsSink& sink) {
    transport::Scheme scheme = p.scheme;
    scheme.validate();
    if (p.clients < 1) fail("run: clients must be >= 1");
    if (p.training.rounds < 1) fail("run: rounds must be >= 1");
    if (p.training.participants < 0 || p.training.participants > p.clients)
        fail("run: participants must lie in [0, clients]");

    nn::Network net(nn::NetworkSpec::by_name(p.net_name));
    const nn::Shape in = net.input_shape();
    auto check_dims = [&](const data::Dataset& d, const char* which) {
        if (in.c != d.c || in.h != d.h || in.w != d.w)
            fail(std::string("run: network ") + p.net_name + " expects " +
                 std::to_string(in.c) + "x" + std::to_string(in.h) + "x" +
                 std::to_string(in.w) + " input but the " + which +
                 " set is " + std::to_string(d.c) + "x" + std::to_string(d.h) +
                 "x" + std::to_string(d.w));
    };
    check_dims(train, "training");
    check_dims(test, "test");

    const Partition part =
        partition_dataset(train.labels, p.clients, p.partition, p.seed);

    TrainingParams tp = p.training;
    tp.clip = scheme.clip;  // one clip governs local output and the uplink
    const int k = tp.participants == 0 ? p.clients : tp.participants;

    std::vector<double> w = net.init_params(p.seed);
    std::vector<metrics::RoundMetrics> rows;
    rows.reserve(std::size_t(tp.rounds));

    for (int round = 1; round <= tp.rounds; ++round) {
        metrics::RoundMetrics r;
        r.round = round;
        r.scheme = to_string(scheme.kind);
        r.snr_db = p.channel.snr_db;
        r.modulation = scheme.order;
        r.clients = p.clients;
        r.sparsity = scheme.sparsity;
        r.l2_error = std::numeric_limits<double>::quiet_NaN();

        // A collapsed global model (the naive scheme's usual fate) freezes the
        // round: no local work, no transport, accuracy still logged.
        bool frozen = !all_finite(w);

        std::vector<std::size_t> active;
        std::vector<std::vector<double>> grads;
        if (!frozen) {
            active = pick_participants(p.clients, k, p.seed, round);
            grads.assign(active.size(), {});
            try {
                parallel_for(active.size(), p.jobs, [&](std::size_t i) {
                    const std::size_t c = active[i];
                    grads[i] = local_train(
                        net, w, train, part.clients[c], tp,
                        rng::derive_seed({p.seed, rng::tag::shuffle,
                                          std::uint64_t(round),
                                          std::uint64_t(c)}));
                });
            } catch (const NonFiniteError&) {
                frozen = true;
            }
        }

        if (!frozen) {
            std::vector<transport::SendResult> sent(active.size());
            std::vector<std::vector<double>> refs(active.size());
            parallel_for(active.size(), p.jobs, [&](std::size_t i) {
                const std::size_t c = active[i];
                sent[i] = transport::send(
                    grads[i], scheme, p.channel,
                    rng::derive_seed({p.seed, rng::tag::tx,
                                      std::uint64_t(round), std::uint64_t(c)}));
                refs[i] = transport::reference_delivery(grads[i], scheme);
            });

            const std::vector<double> wts = participant_weights(part, active);
            std::vector<std::vector<double>> delivered(active.size());
            transport::LedgerEntry ledger;
            for (std::size_t i = 0; i < active.size(); ++i) {
                delivered[i] = std::move(sent[i].delivered);
                ledger += sent[i].ledger;
            }
            const std::vector<double> g_hat = aggregate(delivered, wts);
            const std::vector<double> g_ref = aggregate(refs, wts);
            r.l2_error = metrics::l2_error_norm(g_ref, g_hat);
            r.payload_bits = ledger.payload_bits;
            r.coded_bits = ledger.coded_bits;
            r.retx_count = ledger.retx_codewords;
            r.airtime_symbols = ledger.airtime_symbols;
            nn::sgd_step(w, g_hat, tp.lr);
        }

        r.test_accuracy = metrics::evaluate_accuracy(net, w, test);
        rows.push_back(r);
        if (sink) sink(rows.back());
    }
    return rows;
}

std::vector<metrics::RoundMetrics> run_aggregation_error(
    const RunParams& p, std::size_t n_g, int rounds, const MetricsSink& sink) {
    transport::Scheme scheme = p.scheme;
    scheme.validate();
    if (p.clients < 1) fail("aggregation-error run: clients must be >= 1");
    if (rounds < 1) fail("aggregation-error run: rounds must be >= 1");
    if (n_g == 0) fail("aggregation-error run: gradient size must be >= 1");

    const std::vector<double> wts(std::size_t(p.clients),
                                  1.0 / double(p.clients));
    std::vector<metrics::RoundMetrics> rows;
    rows.reserve(std::size_t(rounds));

    for (int round = 1; round <= rounds; ++round) {
        std::vector<std::vector<double>> delivered(std::size_t(p.clients));
        std::vector<std::vector<double>> refs(std::size_t(p.clients));
        transport::LedgerEntry ledger;
        std::vector<transport::LedgerEntry> ledgers(std::size_t(p.clients));

        parallel_for(std::size_t(p.clients), p.jobs, [&](std::size_t c) {
            rng::Stream st(rng::derive_seed(
                {p.seed, rng::tag::grad, std::uint64_t(round), c}));
            std::vector<double> g(n_g);
            for (std::size_t i = 0; i + 1 < n_g; i += 2) {
                double z0, z1;
                st.gaussian_pair(z0, z1);
                g[i] = 0.3 * z0;
                g[i + 1] = 0.3 * z1;
            }
            if (n_g % 2) {
                double z0, z1;
                st.gaussian_pair(z0, z1);
                g[n_g - 1] = 0.3 * z0;
            }
            auto res = transport::send(
                g, scheme, p.channel,
                rng::derive_seed({p.seed, rng::tag::tx, std::uint64_t(round), c}));
            delivered[c] = std::move(res.delivered);
            ledgers[c] = res.ledger;
            refs[c] = transport::reference_delivery(g, scheme);
        });
        for (const auto& l : ledgers) ledger += l;

        metrics::RoundMetrics r;
        r.round = round;
        r.scheme = to_string(scheme.kind);
        r.snr_db = p.channel.snr_db;
        r.modulation = scheme.order;
        r.clients = p.clients;
        r.sparsity = scheme.sparsity;
        r.test_accuracy = 0.0;
        r.l2_error = metrics::l2_error_norm(aggregate(refs, wts),
                                            aggregate(delivered, wts));
        r.payload_bits = ledger.payload_bits;
        r.coded_bits = ledger.coded_bits;
        r.retx_count = ledger.retx_codewords;
        r.airtime_symbols = ledger.airtime_symbols;
        rows.push_back(r);
        if (sink) sink(rows.back());
    }
    return rows;
}

}  // namespace airfl::fl
