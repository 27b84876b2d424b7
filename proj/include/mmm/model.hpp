#pragma once

#include "mmm/bipartite.hpp"
#include "mmm/elf_drug_encoder.hpp"
#include "mmm/objective.hpp"
#include "mmm/patient_encoder.hpp"

namespace mmm {

// Where per-drug features come from: pre-extracted rows loaded from
// drug_features.csv (frozen), or ELF patches pushed through the
// trainable CNN.
struct DrugFeatureSource {
    bool frozen = false;
    Mat fixed_C;                       // n_drugs x feat_dim when frozen
    std::vector<PatchSet> patch_sets;  // one per drug otherwise

    int n_drugs() const {
        return frozen ? static_cast<int>(fixed_C.rows()) : static_cast<int>(patch_sets.size());
    }
};

struct DrugFeatures {
    Mat C;                                  // n_drugs x feat_dim
    std::vector<std::vector<int>> argmax;   // winning patch per coordinate (cnn path)
    std::vector<std::vector<CnnCache>> caches;  // kept only when small enough
};

inline DrugFeatures compute_drug_features(const ModelParams& params, const DrugFeatureSource& src,
                                          bool want_argmax) {
    DrugFeatures out;
    if (src.frozen) {
        out.C = src.fixed_C;
        return out;
    }
    int m = src.n_drugs();
    if (m == 0) throw ValidationError("no drug feature source configured");
    out.C = Mat(m, params.elf.cnn.head_W.rows());
    bool keep_caches = false;
    if (want_argmax) {
        out.argmax.resize(static_cast<std::size_t>(m));
        // Rough activation footprint; beyond ~128 MB fall back to
        // recomputing touched patches during backward.
        std::size_t n_patches = 0;
        for (const auto& ps : src.patch_sets) n_patches += ps.patches.size();
        std::size_t p = src.patch_sets.empty() ? 0 : static_cast<std::size_t>(src.patch_sets[0].patch_size);
        auto c1 = static_cast<std::size_t>(params.elf.cnn.conv1_k.rows());
        auto c2 = static_cast<std::size_t>(params.elf.cnn.conv2_k.rows());
        keep_caches = n_patches * p * p * (1 + 3 * c1 + c2) <= (16u << 20);
        if (keep_caches) out.caches.resize(static_cast<std::size_t>(m));
    }
    for (int i = 0; i < m; ++i) {
        auto iu = static_cast<std::size_t>(i);
        out.C.row(i) = encode_drug(src.patch_sets[iu], params.elf.cnn,
                                   want_argmax ? &out.argmax[iu] : nullptr,
                                   keep_caches ? &out.caches[iu] : nullptr);
    }
    return out;
}

struct VisitForward {
    PatientEncodeCache penc;
    Vec h;
    ProjectCache proj;
    Mat Y;
    GlobalHeadCache ghead;
    Vec m_g, m_s, m_l;
    Vec o;
    bool elf_active = true, bipartite_active = true;
};

// One visit of the full pipeline. Ablations swap the dropped branch for
// an all-ones vector, which silences its gradients entirely.
inline VisitForward forward_visit(const ModelParams& params, const std::vector<Visit>& visits,
                                  std::size_t t, const DrugFeatures& feats, const MaskMatrix& mask,
                                  Ablation ablation, bool want_cache) {
    VisitForward f;
    f.elf_active = ablation != Ablation::drop_elf;
    f.bipartite_active = ablation != Ablation::drop_bipartite;
    int m = mask.n_drugs();
    f.h = encode_patient(visits, t, params.patient, want_cache ? &f.penc : nullptr);

    if (f.elf_active) {
        f.Y = project(feats.C, params.elf, want_cache ? &f.proj : nullptr);
        f.m_g = global_drug_vector(f.h, f.Y, params.elf, want_cache ? &f.ghead : nullptr);
    } else {
        f.m_g = Vec::Ones(m);
    }
    if (f.bipartite_active) {
        f.m_s = substructure_importance(f.h, params.bipartite);
        f.m_l = local_drug_vector(f.m_s, params.bipartite, mask);
    } else {
        f.m_l = Vec::Ones(m);
    }
    f.o = sigmoid(f.m_g.cwiseProduct(f.m_l).eval());
    return f;
}

// Backpropagates d(loss)/d(o) through every active branch, accumulating
// into grads. The CNN is skipped in frozen-feature mode or when the
// config pins it.
inline void backward_visit(const ModelParams& params, const ModelConfig& cfg,
                           const DrugFeatureSource& src, const DrugFeatures& feats,
                           const MaskMatrix& mask, const VisitForward& f, const Vec& dout,
                           ModelParams& grads) {
    Vec dz = dout.cwiseProduct(f.o).cwiseProduct(Vec::Ones(f.o.size()) - f.o);
    Vec dh = Vec::Zero(f.h.size());
    if (f.bipartite_active) {
        Vec dm_l = dz.cwiseProduct(f.m_g);
        bipartite_backward(f.h, f.m_s, params.bipartite, mask, dm_l, dh, grads.bipartite);
    }
    if (f.elf_active) {
        Vec dm_g = dz.cwiseProduct(f.m_l);
        Mat dY = global_drug_vector_backward(f.h, f.Y, params.elf, f.ghead, dm_g, dh, grads.elf);
        Mat dC = project_backward(feats.C, params.elf, f.proj, dY, grads.elf);
        if (!src.frozen && !cfg.freeze_cnn)
            for (int i = 0; i < static_cast<int>(src.patch_sets.size()); ++i) {
                auto iu = static_cast<std::size_t>(i);
                encode_drug_backward(src.patch_sets[iu], params.elf.cnn, feats.argmax[iu],
                                     dC.row(i).transpose(), grads.elf.cnn,
                                     feats.caches.empty() ? nullptr : &feats.caches[iu]);
            }
    }
    encode_patient_backward(params.patient, f.penc, dh, grads.patient);
}

class Adam {
public:
    Adam(const ModelParams& shape, double lr)
        : lr_(lr), m_(zero_like(shape)), v_(zero_like(shape)) {}

    void step(ModelParams& params, ModelParams& grads) {
        ++t_;
        double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        auto pv = tensor_views(params);
        auto gv = tensor_views(grads);
        auto mv = tensor_views(m_);
        auto vv = tensor_views(v_);
        for (std::size_t k = 0; k < pv.size(); ++k) {
            double* p = pv[k].data;
            double* g = gv[k].data;
            double* m = mv[k].data;
            double* v = vv[k].data;
            for (std::size_t i = 0; i < pv[k].size; ++i) {
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                p[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
            }
        }
    }

    long steps() const { return t_; }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    double lr_;
    long t_ = 0;
    ModelParams m_, v_;
};

}  // namespace mmm
