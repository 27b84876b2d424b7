#pragma once

#include "mmm/corpus.hpp"
#include "mmm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mmm {

struct SynthTargets {
    int n_dx = 1942;
    int n_px = 1399;
    int n_drugs = 250;
    int n_substructures = 442;
    long ddi_pairs = 4918;
    double mean_visits = 2.60;
    double mean_dx = 10.38;
    double mean_px = 3.85;
    double mean_meds = 7.67;
    int max_visits = 29;
    int max_dx = 128;
    int max_px = 50;
    int max_meds = 68;
    // Probability that a visit re-draws its medication set instead of
    // repeating the patient's standing prescriptions.
    double med_churn = 0.35;
    // Condition clusters; 0 picks one cluster per ~12 drugs.
    int n_topics = 0;
};

struct SynthSpec {
    int n_patients = 600;
    std::uint64_t seed = 1;
    SynthTargets targets;
};

namespace detail {

// Weighted order without replacement (exponential-race keys): items are
// ranked by -log(u)/w ascending, so high-weight items tend to come first.
inline std::vector<int> weighted_order(const std::vector<double>& weights, Rng& rng) {
    int n = static_cast<int>(weights.size());
    std::vector<std::pair<double, int>> keys;
    keys.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        if (u < 1e-300) u = 1e-300;
        keys.emplace_back(-std::log(u) / weights[static_cast<std::size_t>(i)], i);
    }
    std::sort(keys.begin(), keys.end());
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    for (auto& [key, idx] : keys) out.push_back(idx);
    return out;
}

inline std::vector<int> weighted_sample(const std::vector<double>& weights, int k, Rng& rng) {
    int n = static_cast<int>(weights.size());
    k = std::min(k, n);
    std::vector<std::pair<double, int>> keys;
    keys.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        if (u < 1e-300) u = 1e-300;
        keys.emplace_back(-std::log(u) / weights[static_cast<std::size_t>(i)], i);
    }
    std::nth_element(keys.begin(), keys.begin() + (k - 1), keys.end());
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(keys[static_cast<std::size_t>(i)].second);
    std::sort(out.begin(), out.end());
    return out;
}

inline long truncated_count(Rng& rng, double mean, long lo, long hi) {
    long v = lo + rng.geometric(mean - static_cast<double>(lo));
    return std::clamp(v, lo, hi);
}

inline std::string synth_name(Rng& rng) {
    static const char* heads[] = {"al", "be",  "cor", "dex", "fen", "gli", "lor", "met",
                                  "nor", "pra", "qui", "ral", "sul", "tri", "vor", "zol"};
    static const char* mids[] = {"a", "i", "o", "era", "ino", "uta", "axo", "emi"};
    static const char* tails[] = {"pril", "sartan", "olol", "micin", "azole", "idine",
                                  "afil", "statin", "mab", "zepam", "cillin", "oxacin"};
    return std::string(heads[rng.below(16)]) + mids[rng.below(8)] + tails[rng.below(12)];
}

inline std::string synth_smiles(Rng& rng) {
    static const char* atoms = "CCCCNNOOS";
    std::string s;
    long len = rng.range(3, 12);
    for (long i = 0; i < len; ++i) {
        s += atoms[rng.below(9)];
        if (i + 2 < len && rng.uniform() < 0.2) {
            s += '(';
            s += atoms[rng.below(9)];
            s += ')';
        } else if (rng.uniform() < 0.15) {
            s += '=';
        }
    }
    s += atoms[rng.below(9)];
    return s;
}

}  // namespace detail

struct SynthCorpusResult {
    EhrCorpus corpus;
    DrugRegistry registry;
    std::vector<std::pair<long, long>> cid_pairs;
};

// Deterministic corpus generator. Exact counts (drugs, substructures, DDI
// pairs) are met by construction; per-visit statistics track the target
// means through truncated geometric draws. Medications follow a Zipf(1.1)
// popularity law with per-patient topic boosts so prescriptions carry a
// learnable diagnosis signal.
inline SynthCorpusResult synth_corpus(const SynthSpec& spec) {
    const SynthTargets& tg = spec.targets;
    if (spec.n_patients < 1) throw ValidationError("n_patients must be >= 1");
    if (tg.n_drugs < 2 || tg.n_dx < 1 || tg.n_px < 1 || tg.n_substructures < 1)
        throw ValidationError("vocab sizes must be positive (and >= 2 drugs)");
    if (tg.mean_meds < 1.0 || tg.mean_meds > static_cast<double>(tg.n_drugs))
        throw ValidationError("mean meds per visit must lie in [1, n_drugs]");
    if (tg.mean_dx < 1.0 || tg.mean_dx > static_cast<double>(tg.n_dx))
        throw ValidationError("mean diagnoses per visit must lie in [1, n_dx]");
    if (tg.mean_px < 0.0 || tg.mean_px > static_cast<double>(tg.n_px))
        throw ValidationError("mean procedures per visit must lie in [0, n_px]");
    if (tg.mean_visits < 1.0 || tg.mean_visits > static_cast<double>(tg.max_visits))
        throw ValidationError("mean visits must lie in [1, max_visits]");
    long max_pairs = static_cast<long>(tg.n_drugs) * (tg.n_drugs - 1) / 2;
    if (tg.ddi_pairs < 0 || tg.ddi_pairs > max_pairs)
        throw ValidationError("ddi pair count exceeds the number of distinct drug pairs");
    if (tg.med_churn < 0.0 || tg.med_churn > 1.0)
        throw ValidationError("med_churn must lie in [0,1]");

    SynthCorpusResult out;
    out.corpus.vocab = {tg.n_dx, tg.n_px, tg.n_drugs, tg.n_substructures};

    // Registry: one CID per drug, ATC3 codes drawn from a pool ~40% the
    // size of the vocabulary so therapeutic groups are shared.
    {
        Rng rng(mix_seed(spec.seed, 0x5e61));
        static const char atc_letters[] = "ABCDGHJLMNPRSV";
        int n_atc = std::max(1, tg.n_drugs * 2 / 5);
        std::vector<DrugRegistryEntry> entries;
        entries.reserve(static_cast<std::size_t>(tg.n_drugs));
        std::unordered_set<std::string> used_names;
        for (int i = 0; i < tg.n_drugs; ++i) {
            DrugRegistryEntry e;
            e.drug_id = i;
            e.name = detail::synth_name(rng);
            if (!used_names.insert(e.name).second) {
                e.name += "-" + std::to_string(i);
                used_names.insert(e.name);
            }
            e.smiles = detail::synth_smiles(rng);
            e.cid = 10000 + i;
            long a = rng.below(static_cast<std::uint64_t>(n_atc));
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%c%02ld", atc_letters[a % 14], a / 14);
            e.atc3 = buf;
            long k = detail::truncated_count(rng, 4.0, 1, std::min(12, tg.n_substructures));
            std::vector<double> w(static_cast<std::size_t>(tg.n_substructures), 1.0);
            e.substructures = detail::weighted_sample(w, static_cast<int>(k), rng);
            entries.push_back(std::move(e));
        }
        out.registry = DrugRegistry(std::move(entries), tg.n_substructures);
    }

    // DDI pairs: uniform without replacement over drug pairs until the
    // exact count is met, emitted in sorted CID order.
    {
        Rng rng(mix_seed(spec.seed, 0xdd1));
        std::unordered_set<std::uint64_t> seen;
        while (static_cast<long>(seen.size()) < tg.ddi_pairs) {
            long i = static_cast<long>(rng.below(static_cast<std::uint64_t>(tg.n_drugs)));
            long j = static_cast<long>(rng.below(static_cast<std::uint64_t>(tg.n_drugs)));
            if (i == j) continue;
            seen.insert(cid_pair_key(10000 + i, 10000 + j));
        }
        for (std::uint64_t key : seen)
            out.cid_pairs.emplace_back(static_cast<long>(key >> 32),
                                       static_cast<long>(key & 0xffffffffull));
        std::sort(out.cid_pairs.begin(), out.cid_pairs.end());
    }

    // Condition clusters: each topic carries dx/px pools and a ranked
    // drug preference list; a patient's standing prescription is the
    // top-n prefix of their topic's ranking.
    int n_topics = tg.n_topics > 0 ? tg.n_topics : std::clamp(tg.n_drugs / 12, 2, 24);
    int pool_dx = std::clamp(static_cast<int>(tg.mean_dx * 3.0), 1, tg.n_dx);
    int pool_px = std::clamp(static_cast<int>(tg.mean_px * 3.0) + 1, 1, tg.n_px);

    std::vector<double> zipf(static_cast<std::size_t>(tg.n_drugs));
    for (int i = 0; i < tg.n_drugs; ++i)
        zipf[static_cast<std::size_t>(i)] = 1.0 / std::pow(static_cast<double>(i + 1), 1.1);

    constexpr double kRankBoost = 40.0;
    std::vector<std::vector<int>> topic_rank, topic_dx, topic_px;
    {
        Rng rng(mix_seed(spec.seed, 0x70b1c));
        std::vector<double> wx(static_cast<std::size_t>(tg.n_dx), 1.0);
        std::vector<double> wp(static_cast<std::size_t>(tg.n_px), 1.0);
        for (int k = 0; k < n_topics; ++k) {
            std::vector<double> wd = zipf;
            // a topic-preferred subset jumps the popularity queue
            int boosted = std::clamp(static_cast<int>(tg.mean_meds * 2.0), 1, tg.n_drugs);
            for (int d : detail::weighted_sample(std::vector<double>(
                             static_cast<std::size_t>(tg.n_drugs), 1.0), boosted, rng))
                wd[static_cast<std::size_t>(d)] *= kRankBoost;
            topic_rank.push_back(detail::weighted_order(wd, rng));
            topic_dx.push_back(detail::weighted_sample(wx, pool_dx, rng));
            topic_px.push_back(detail::weighted_sample(wp, pool_px, rng));
        }
    }

    constexpr double kTopicBoost = 40.0;
    constexpr double kPatientBoost = 60.0;
    Rng rng(mix_seed(spec.seed, 0xea7));
    for (int pid = 0; pid < spec.n_patients; ++pid) {
        Patient p;
        p.pid = pid;
        auto topic = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n_topics)));

        std::vector<double> w_meds = zipf;
        auto head = static_cast<std::size_t>(
            std::clamp(static_cast<int>(tg.mean_meds * 2.0), 1, tg.n_drugs));
        for (std::size_t rank = 0; rank < head; ++rank)
            w_meds[static_cast<std::size_t>(topic_rank[topic][rank])] *= kTopicBoost;
        std::vector<double> w_dx(static_cast<std::size_t>(tg.n_dx), 1.0);
        for (int d : topic_dx[topic]) w_dx[static_cast<std::size_t>(d)] *= kTopicBoost;
        std::vector<double> w_px(static_cast<std::size_t>(tg.n_px), 1.0);
        for (int d : topic_px[topic]) w_px[static_cast<std::size_t>(d)] *= kTopicBoost;

        // Patient signature: a personal code pool drawn with only a mild
        // topic tilt (so same-topic patients stay distinguishable), plus
        // a standing prescription prefix of the topic ranking, kept
        // across visits (churn aside).
        int dx_pool = std::clamp(static_cast<int>(tg.mean_dx * 2.0) + 1, 1, tg.n_dx);
        int px_pool = std::clamp(static_cast<int>(tg.mean_px * 2.0) + 1, 1, tg.n_px);
        std::vector<double> w_dx_pool(static_cast<std::size_t>(tg.n_dx), 1.0);
        for (int d : topic_dx[topic]) w_dx_pool[static_cast<std::size_t>(d)] *= 4.0;
        std::vector<double> w_px_pool(static_cast<std::size_t>(tg.n_px), 1.0);
        for (int d : topic_px[topic]) w_px_pool[static_cast<std::size_t>(d)] *= 4.0;
        for (int d : detail::weighted_sample(w_dx_pool, dx_pool, rng))
            w_dx[static_cast<std::size_t>(d)] *= kPatientBoost;
        for (int d : detail::weighted_sample(w_px_pool, px_pool, rng))
            w_px[static_cast<std::size_t>(d)] *= kPatientBoost;
        long base_n = detail::truncated_count(rng, tg.mean_meds, 1,
                                              std::min<long>(tg.max_meds, tg.n_drugs));
        std::vector<int> base_meds(topic_rank[topic].begin(), topic_rank[topic].begin() + base_n);
        std::sort(base_meds.begin(), base_meds.end());

        long n_visits = detail::truncated_count(rng, tg.mean_visits, 1, tg.max_visits);
        for (long t = 0; t < n_visits; ++t) {
            Visit v;
            long ndx = detail::truncated_count(rng, tg.mean_dx, 1, std::min(tg.max_dx, tg.n_dx));
            v.diagnoses = detail::weighted_sample(w_dx, static_cast<int>(ndx), rng);
            long npx = detail::truncated_count(rng, tg.mean_px, 0, std::min(tg.max_px, tg.n_px));
            if (npx > 0) v.procedures = detail::weighted_sample(w_px, static_cast<int>(npx), rng);
            if (rng.uniform() < tg.med_churn) {
                long nrx = detail::truncated_count(rng, tg.mean_meds, 1,
                                                   std::min<long>(tg.max_meds, tg.n_drugs));
                v.medications = detail::weighted_sample(w_meds, static_cast<int>(nrx), rng);
            } else {
                v.medications = base_meds;
            }
            p.visits.push_back(std::move(v));
        }
        out.corpus.patients.push_back(std::move(p));
    }
    return out;
}

}  // namespace mmm
