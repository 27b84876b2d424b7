#pragma once

#include "mmm/evaluator.hpp"
#include "mmm/split.hpp"

namespace mmm {

struct EpochStats {
    double bce = 0.0, multi = 0.0, ddi = 0.0, total = 0.0;
    long visits = 0;

    void add(const LossParts& parts) {
        bce += parts.bce;
        multi += parts.multi;
        ddi += parts.ddi;
        total += parts.total;
        ++visits;
    }
    double mean_bce() const { return visits ? bce / static_cast<double>(visits) : 0.0; }
    double mean_multi() const { return visits ? multi / static_cast<double>(visits) : 0.0; }
    double mean_ddi() const { return visits ? ddi / static_cast<double>(visits) : 0.0; }
    double mean_total() const { return visits ? total / static_cast<double>(visits) : 0.0; }
};

// One pass over the given patients: visits are processed in temporal
// order with one Adam step each, and drug embeddings are refreshed per
// step since the extractor may have just moved.
inline EpochStats train_epoch(const CorpusBundle& bundle, const std::vector<long>& pids,
                              ModelParams& params, Adam& adam, const ModelConfig& cfg,
                              const HyperParams& hp, Ablation ablation,
                              const DrugFeatureSource& src, ModelParams& grads) {
    EpochStats stats;
    bool need_feats = ablation != Ablation::drop_elf;
    bool cnn_trains = need_feats && !src.frozen && !cfg.freeze_cnn;
    for (long pid : pids) {
        const Patient& patient = bundle.corpus.patient_by_id(pid);
        for (std::size_t t = 1; t <= patient.visits.size(); ++t) {
            DrugFeatures feats;
            if (need_feats) feats = compute_drug_features(params, src, cnn_trains);
            VisitForward f =
                forward_visit(params, patient.visits, t, feats, bundle.mask, ablation, true);
            Vec truth = multi_hot(patient.visits[t - 1].medications, f.o.size());
            Vec dout;
            LossParts parts = total_loss(f.o, truth, bundle.ddi.dense(), hp.alpha, hp.beta, &dout);
            if (!std::isfinite(parts.total))
                throw NumericError("non-finite loss at patient " + std::to_string(pid) + " visit " +
                                   std::to_string(t - 1));
            stats.add(parts);
            for_each_tensor(grads, [](const std::string&, auto& g) { g.setZero(); });
            backward_visit(params, cfg, src, feats, bundle.mask, f, dout, grads);
            adam.step(params, grads);
        }
    }
    check_finite(params, "after epoch");
    return stats;
}

struct TrainLogRow {
    int epoch = 0;
    double bce = 0.0, multi = 0.0, ddi_loss = 0.0;
    double val_ddi = 0.0, val_jaccard = 0.0, val_f1 = 0.0, val_drugs = 0.0;
};

struct FitResult {
    Checkpoint best;
    double best_val_ddi = 0.0;
    std::vector<TrainLogRow> log;
};

// Full training run; the retained checkpoint is the epoch with the
// lowest validation DDI rate, earlier epoch on ties.
inline FitResult fit(const CorpusBundle& bundle, const SplitSpec& split, const ModelConfig& cfg,
                     const HyperParams& hp, Ablation ablation, const DrugFeatureSource& src) {
    hp.validate();
    FitResult result;
    ModelParams params = init_params(cfg, bundle.corpus.vocab, hp.seed);
    ModelParams grads = zero_like(params);
    Adam adam(params, hp.lr);

    result.best.config = cfg;
    result.best.hyper = hp;
    result.best.vocab = bundle.corpus.vocab;
    result.best.ablation = ablation;
    result.best.frozen_features = src.frozen;
    result.best_val_ddi = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        EpochStats stats =
            train_epoch(bundle, split.train, params, adam, cfg, hp, ablation, src, grads);
        ModelContext ctx{params, cfg, hp.threshold, ablation, src, bundle.mask};
        SplitEval val = evaluate_split(bundle, split.val, ctx);
        TrainLogRow row;
        row.epoch = epoch;
        row.bce = stats.mean_bce();
        row.multi = stats.mean_multi();
        row.ddi_loss = stats.mean_ddi();
        row.val_ddi = val.mean_ddi;
        row.val_jaccard = val.mean_jaccard;
        row.val_f1 = val.mean_f1;
        row.val_drugs = val.mean_drugs;
        result.log.push_back(row);
        if (val.mean_ddi < result.best_val_ddi) {
            result.best_val_ddi = val.mean_ddi;
            result.best.best_epoch = epoch;
            result.best.params = params;
        }
    }
    return result;
}

inline void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "epoch,loss_bce,loss_multi,loss_ddi,val_ddi_rate,val_jaccard,val_f1,val_avg_drugs\n";
    for (const auto& r : log)
        out << r.epoch << ',' << format_double(r.bce) << ',' << format_double(r.multi) << ','
            << format_double(r.ddi_loss) << ',' << format_double(r.val_ddi) << ','
            << format_double(r.val_jaccard) << ',' << format_double(r.val_f1) << ','
            << format_double(r.val_drugs) << '\n';
}

}  // namespace mmm
