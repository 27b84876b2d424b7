#pragma once

#include "mmm/model.hpp"
#include "mmm/stats.hpp"

#include <iomanip>
#include <set>
#include <sstream>

namespace mmm {

// Everything needed to run a trained model over a corpus.
struct ModelContext {
    const ModelParams& params;
    const ModelConfig& cfg;
    double threshold;
    Ablation ablation;
    const DrugFeatureSource& features;
    const MaskMatrix& mask;
};

// Fraction of interacting pairs among the unordered pairs of unique CIDs
// in the prediction; fewer than two unique CIDs scores 0.
inline double ddi_rate(const std::vector<int>& pred, const DrugRegistry& registry,
                       const DdiMatrix& ddi) {
    std::set<long> cids;
    for (int d : pred) cids.insert(registry.cid_of(d));
    if (cids.size() < 2) return 0.0;
    std::vector<long> c(cids.begin(), cids.end());
    long interacting = 0, total = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            ++total;
            if (ddi.interacts_cid(c[i], c[j])) ++interacting;
        }
    return static_cast<double>(interacting) / static_cast<double>(total);
}

namespace detail {

inline std::set<std::string> atc3_set(const std::vector<int>& drugs, const DrugRegistry& registry) {
    std::set<std::string> out;
    for (int d : drugs) out.insert(registry.atc3_of(d));
    return out;
}

inline std::size_t intersection_size(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t n = 0;
    for (const auto& x : a) n += b.count(x);
    return n;
}

}  // namespace detail

// Therapeutic-group overlap: both sets are mapped to unique ATC3 codes
// first, so an alternative drug from the same group scores as a hit.
inline double jaccard_atc3(const std::vector<int>& pred, const std::vector<int>& truth,
                           const DrugRegistry& registry) {
    if (truth.empty()) throw ValidationError("jaccard_atc3: empty truth set");
    if (pred.empty()) return 0.0;
    auto P = detail::atc3_set(pred, registry);
    auto T = detail::atc3_set(truth, registry);
    auto inter = detail::intersection_size(P, T);
    auto uni = P.size() + T.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double f1_atc3(const std::vector<int>& pred, const std::vector<int>& truth,
                      const DrugRegistry& registry) {
    if (truth.empty()) throw ValidationError("f1_atc3: empty truth set");
    if (pred.empty()) return 0.0;
    auto P = detail::atc3_set(pred, registry);
    auto T = detail::atc3_set(truth, registry);
    auto inter = detail::intersection_size(P, T);
    return 2.0 * static_cast<double>(inter) / static_cast<double>(P.size() + T.size());
}

struct VisitMetrics {
    long pid = 0;
    int visit = 0;
    double ddi = 0.0, jaccard = 0.0, f1 = 0.0;
    double n_drugs = 0.0;
};

struct SplitEval {
    std::vector<VisitMetrics> visits;
    double mean_ddi = 0.0, mean_jaccard = 0.0, mean_f1 = 0.0, mean_drugs = 0.0;
};

// Per-visit metrics with unweighted visit averages. Drug features are
// computed once per call since parameters are fixed during evaluation.
inline SplitEval evaluate_split(const CorpusBundle& bundle, const std::vector<long>& pids,
                                const ModelContext& ctx) {
    SplitEval ev;
    DrugFeatures feats;
    if (ctx.ablation != Ablation::drop_elf) feats = compute_drug_features(ctx.params, ctx.features, false);
    for (long pid : pids) {
        const Patient& patient = bundle.corpus.patient_by_id(pid);
        for (std::size_t t = 1; t <= patient.visits.size(); ++t) {
            VisitForward f = forward_visit(ctx.params, patient.visits, t, feats, ctx.mask,
                                           ctx.ablation, false);
            Prediction pred = predict(f.m_g, f.m_l, ctx.threshold);
            const auto& truth = patient.visits[t - 1].medications;
            VisitMetrics vm;
            vm.pid = pid;
            vm.visit = static_cast<int>(t - 1);
            vm.ddi = ddi_rate(pred.selected, bundle.registry, bundle.ddi);
            vm.jaccard = jaccard_atc3(pred.selected, truth, bundle.registry);
            vm.f1 = f1_atc3(pred.selected, truth, bundle.registry);
            vm.n_drugs = static_cast<double>(pred.selected.size());
            ev.visits.push_back(vm);
        }
    }
    if (!ev.visits.empty()) {
        for (const auto& vm : ev.visits) {
            ev.mean_ddi += vm.ddi;
            ev.mean_jaccard += vm.jaccard;
            ev.mean_f1 += vm.f1;
            ev.mean_drugs += vm.n_drugs;
        }
        auto n = static_cast<double>(ev.visits.size());
        ev.mean_ddi /= n;
        ev.mean_jaccard /= n;
        ev.mean_f1 /= n;
        ev.mean_drugs /= n;
    }
    return ev;
}

struct MetricSummary {
    std::string name;
    double mean_a = 0.0, std_a = 0.0;
    double mean_b = 0.0, std_b = 0.0;
    PairedTTest test;
};

struct CompareResult {
    std::vector<MetricSummary> metrics;  // ddi_rate, jaccard, f1, avg_drugs
    std::vector<std::uint64_t> repeat_seeds;
    int repeats = 0;
};

// Bootstrap over test patients (resampled with replacement, the same
// resample for both models) with paired two-sided t-tests per metric.
inline CompareResult bootstrap_compare(const CorpusBundle& bundle, const std::vector<long>& pids,
                                       const ModelContext& a, const ModelContext& b, int repeats,
                                       std::uint64_t seed) {
    if (repeats < 2) throw ValidationError("bootstrap_compare needs at least 2 repeats");
    if (pids.empty()) throw ValidationError("bootstrap_compare: empty patient list");
    CompareResult res;
    res.repeats = repeats;
    std::vector<std::array<double, 4>> vals_a, vals_b;
    for (int k = 0; k < repeats; ++k) {
        std::uint64_t rep_seed = mix_seed(seed, 0xb007 + static_cast<std::uint64_t>(k));
        res.repeat_seeds.push_back(rep_seed);
        Rng rng(rep_seed);
        std::vector<long> sample;
        sample.reserve(pids.size());
        for (std::size_t i = 0; i < pids.size(); ++i)
            sample.push_back(pids[rng.below(pids.size())]);
        SplitEval ea = evaluate_split(bundle, sample, a);
        SplitEval eb = evaluate_split(bundle, sample, b);
        vals_a.push_back({ea.mean_ddi, ea.mean_jaccard, ea.mean_f1, ea.mean_drugs});
        vals_b.push_back({eb.mean_ddi, eb.mean_jaccard, eb.mean_f1, eb.mean_drugs});
    }
    static const char* kNames[] = {"ddi_rate", "jaccard", "f1", "avg_drugs"};
    for (int mtc = 0; mtc < 4; ++mtc) {
        MetricSummary s;
        s.name = kNames[mtc];
        std::vector<double> va, vb, diffs;
        for (int k = 0; k < repeats; ++k) {
            auto ku = static_cast<std::size_t>(k);
            auto mu = static_cast<std::size_t>(mtc);
            va.push_back(vals_a[ku][mu]);
            vb.push_back(vals_b[ku][mu]);
            diffs.push_back(vals_a[ku][mu] - vals_b[ku][mu]);
        }
        s.mean_a = mean_of(va);
        s.std_a = sample_std(va);
        s.mean_b = mean_of(vb);
        s.std_b = sample_std(vb);
        s.test = paired_t_test(diffs);
        res.metrics.push_back(std::move(s));
    }
    return res;
}

// Plain-text per-patient report mirroring the evaluation levels: ATC3
// names for therapy, CID pairs for interactions.
inline std::string case_study_report(const CorpusBundle& bundle, const ModelContext& ctx, long pid) {
    const Patient& patient = bundle.corpus.patient_by_id(pid);
    std::size_t t = patient.visits.size();
    DrugFeatures feats;
    if (ctx.ablation != Ablation::drop_elf) feats = compute_drug_features(ctx.params, ctx.features, false);
    VisitForward f = forward_visit(ctx.params, patient.visits, t, feats, ctx.mask, ctx.ablation, false);
    Prediction pred = predict(f.m_g, f.m_l, ctx.threshold);
    const auto& truth = patient.visits[t - 1].medications;

    auto flagged_pairs = [&](const std::vector<int>& drugs) {
        std::vector<std::pair<int, int>> out;
        for (std::size_t i = 0; i < drugs.size(); ++i)
            for (std::size_t j = i + 1; j < drugs.size(); ++j)
                if (bundle.ddi.interacts_cid(bundle.registry.cid_of(drugs[i]),
                                             bundle.registry.cid_of(drugs[j])))
                    out.emplace_back(drugs[i], drugs[j]);
        return out;
    };
    auto name_list = [&](const std::vector<int>& drugs) {
        std::string s;
        for (std::size_t i = 0; i < drugs.size(); ++i) {
            if (i) s += ", ";
            s += bundle.registry.entry(drugs[i]).name;
        }
        return s;
    };

    std::ostringstream out;
    out << "case study: patient " << pid << " (visit " << t - 1 << " of " << t << ")\n";
    out << "diagnosis codes:";
    for (int c : patient.visits[t - 1].diagnoses) out << ' ' << c;
    out << "\n\n";
    out << "prescribed medications (" << truth.size() << "): " << name_list(truth) << '\n';
    out << "recommended medications (" << pred.selected.size() << "): " << name_list(pred.selected)
        << "\n\n";
    for (auto [label, drugs] : {std::pair<const char*, const std::vector<int>&>{"prescribed", truth},
                                {"recommended", pred.selected}}) {
        auto pairs = flagged_pairs(drugs);
        out << "interacting pairs in " << label << " set (" << pairs.size() << "):\n";
        for (auto [i, j] : pairs)
            out << "  ! " << bundle.registry.entry(i).name << " x " << bundle.registry.entry(j).name
                << "  (cid " << bundle.registry.cid_of(i) << ", cid " << bundle.registry.cid_of(j)
                << ")\n";
        out << "  ddi rate (" << label << "): "
            << format_double(ddi_rate(drugs, bundle.registry, bundle.ddi)) << '\n';
    }
    return out.str();
}

}  // namespace mmm
