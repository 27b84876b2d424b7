#pragma once

#include "mmm/corpus.hpp"
#include "mmm/rng.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace mmm {

struct SplitSpec {
    std::vector<long> train;
    std::vector<long> val;
    std::vector<long> test;
    std::array<double, 3> ratios{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};
    std::uint64_t seed = 0;
};

namespace detail {

// Largest-remainder apportionment; keeps every count within one patient
// of its exact target.
inline std::array<long, 3> quota_counts(std::size_t n, const std::array<double, 3>& ratios) {
    std::array<long, 3> q{};
    std::array<double, 3> frac{};
    long assigned = 0;
    for (int j = 0; j < 3; ++j) {
        double target = ratios[static_cast<std::size_t>(j)] * static_cast<double>(n);
        q[static_cast<std::size_t>(j)] = static_cast<long>(std::floor(target));
        frac[static_cast<std::size_t>(j)] = target - std::floor(target);
        assigned += q[static_cast<std::size_t>(j)];
    }
    long left = static_cast<long>(n) - assigned;
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
    });
    for (long k = 0; k < left; ++k) ++q[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    return q;
}

}  // namespace detail

// Patient-level stratified split. Stratification key is the per-patient
// mean medication-set size, cut into 3 quantile buckets; patients are
// shuffled within buckets and dealt so train/val/test stay proportional
// across the key spectrum while hitting exact global counts.
inline SplitSpec stratified_split(const EhrCorpus& corpus, const std::array<double, 3>& ratios,
                                  std::uint64_t seed) {
    constexpr int kBuckets = 3;
    std::size_t n = corpus.patients.size();
    if (n < kBuckets)
        throw ValidationError("stratified_split needs at least " + std::to_string(kBuckets) +
                              " patients, got " + std::to_string(n));
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
        throw ValidationError("split ratios must be non-negative and sum to 1");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> key(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Patient& p = corpus.patients[i];
        double meds = 0;
        for (const auto& v : p.visits) meds += static_cast<double>(v.medications.size());
        key[i] = meds / static_cast<double>(p.visits.size());
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key[a] != key[b]) return key[a] < key[b];
        return corpus.patients[a].pid < corpus.patients[b].pid;
    });

    std::vector<std::size_t> dealt;
    dealt.reserve(n);
    for (int bkt = 0; bkt < kBuckets; ++bkt) {
        std::size_t lo = n * static_cast<std::size_t>(bkt) / kBuckets;
        std::size_t hi = n * static_cast<std::size_t>(bkt + 1) / kBuckets;
        std::vector<std::size_t> block(order.begin() + static_cast<long>(lo),
                                       order.begin() + static_cast<long>(hi));
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(bkt)));
        for (std::size_t i = block.size(); i > 1; --i)
            std::swap(block[i - 1], block[rng.below(i)]);
        dealt.insert(dealt.end(), block.begin(), block.end());
    }

    SplitSpec spec;
    spec.ratios = ratios;
    spec.seed = seed;
    auto quota = detail::quota_counts(n, ratios);
    std::array<long, 3> left = quota;
    std::array<std::vector<long>*, 3> out{&spec.train, &spec.val, &spec.test};
    for (std::size_t idx : dealt) {
        int best = -1;
        double best_frac = -1.0;
        for (int j = 0; j < 3; ++j) {
            auto ju = static_cast<std::size_t>(j);
            if (quota[ju] == 0 || left[ju] == 0) continue;
            double frac = static_cast<double>(left[ju]) / static_cast<double>(quota[ju]);
            if (frac > best_frac) {
                best_frac = frac;
                best = j;
            }
        }
        out[static_cast<std::size_t>(best)]->push_back(corpus.patients[idx].pid);
        --left[static_cast<std::size_t>(best)];
    }
    for (auto* v : out) std::sort(v->begin(), v->end());
    return spec;
}

}  // namespace mmm
