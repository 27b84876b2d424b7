#pragma once

#include "mmm/cnn.hpp"
#include "mmm/elf.hpp"

namespace mmm {

constexpr double kLayerNormEps = 1e-5;

// Coordinatewise max over the CNN features of a drug's patches. argmax
// (when requested) records the winning patch per coordinate; caches (when
// provided) keep every patch's forward state for reuse in backward.
inline Vec encode_drug(const PatchSet& patches, const CnnParams& cnn, std::vector<int>* argmax,
                       std::vector<CnnCache>* caches = nullptr) {
    if (patches.patches.empty()) throw ValidationError("encode_drug: empty patch set");
    if (caches) caches->resize(patches.patches.size());
    Vec best;
    for (std::size_t j = 0; j < patches.patches.size(); ++j) {
        Vec f = cnn_forward(patches.patches[j].tile, cnn, caches ? &(*caches)[j] : nullptr);
        if (j == 0) {
            best = f;
            if (argmax) argmax->assign(static_cast<std::size_t>(f.size()), 0);
        } else {
            for (Eigen::Index k = 0; k < f.size(); ++k)
                if (f(k) > best(k)) {
                    best(k) = f(k);
                    if (argmax) (*argmax)[static_cast<std::size_t>(k)] = static_cast<int>(j);
                }
        }
    }
    return best;
}

inline void encode_drug_backward(const PatchSet& patches, const CnnParams& cnn,
                                 const std::vector<int>& argmax, const Vec& dC, CnnParams& g,
                                 const std::vector<CnnCache>* caches = nullptr) {
    // Group coordinates by winning patch; untouched patches cost nothing.
    std::map<int, Vec> per_patch;
    for (Eigen::Index k = 0; k < dC.size(); ++k) {
        if (dC(k) == 0.0) continue;
        auto [it, fresh] = per_patch.try_emplace(argmax[static_cast<std::size_t>(k)],
                                                 Vec::Zero(dC.size()));
        it->second(k) += dC(k);
    }
    for (auto& [j, dout] : per_patch) {
        auto ju = static_cast<std::size_t>(j);
        if (caches) {
            cnn_backward(cnn, (*caches)[ju], dout, g);
        } else {
            CnnCache cache;
            cnn_forward(patches.patches[ju].tile, cnn, &cache);
            cnn_backward(cnn, cache, dout, g);
        }
    }
}

struct ProjectCache {
    Mat pre;  // M x hidden, pre-relu
};

// Row-wise MLP aligning pooled features with the patient-state width.
inline Mat project(const Mat& C, const ElfEncoderParams& p, ProjectCache* cache) {
    Mat pre = (C * p.mlp_W1.transpose()).rowwise() + p.mlp_b1.transpose();
    Mat Y = (pre.cwiseMax(0.0) * p.mlp_W2.transpose()).rowwise() + p.mlp_b2.transpose();
    if (cache) cache->pre = std::move(pre);
    return Y;
}

inline Mat project_backward(const Mat& C, const ElfEncoderParams& p, const ProjectCache& c,
                            const Mat& dY, ElfEncoderParams& g) {
    Mat hidden = c.pre.cwiseMax(0.0);
    g.mlp_W2 += dY.transpose() * hidden;
    g.mlp_b2 += dY.colwise().sum();
    Mat dhidden = dY * p.mlp_W2;
    Mat dpre = dhidden.cwiseProduct((c.pre.array() > 0.0).cast<double>().matrix());
    g.mlp_W1 += dpre.transpose() * C;
    g.mlp_b1 += dpre.colwise().sum();
    return dpre * p.mlp_W1;  // dC
}

struct GlobalHeadCache {
    Vec s, m_a, res_pre, v, vhat, m_g;
    double istd = 0.0;
};

// Suitability scores from the patient-drug dot product, then a relu
// residual branch and layer normalization over the drug axis.
inline Vec global_drug_vector(const Vec& h, const Mat& Y, const ElfEncoderParams& p,
                              GlobalHeadCache* cache) {
    if (h.size() != Y.cols())
        throw ValidationError("global_drug_vector: patient state width " + std::to_string(h.size()) +
                              " does not match drug embedding width " + std::to_string(Y.cols()));
    Vec s = Y * h;
    Vec m_a = sigmoid(s);
    Vec res_pre = p.res_W * m_a + p.res_b;
    Vec v = m_a + res_pre.cwiseMax(0.0);
    double mu = v.mean();
    double var = (v.array() - mu).square().mean();
    double istd = 1.0 / std::sqrt(var + kLayerNormEps);
    Vec vhat = (v.array() - mu).matrix() * istd;
    Vec m_g = p.ln_gain.cwiseProduct(vhat) + p.ln_bias;
    if (cache) *cache = {std::move(s), std::move(m_a), std::move(res_pre), std::move(v),
                         std::move(vhat), m_g, istd};
    return m_g;
}

// Returns dY; accumulates into dh and the parameter grads.
inline Mat global_drug_vector_backward(const Vec& h, const Mat& Y, const ElfEncoderParams& p,
                                       const GlobalHeadCache& c, const Vec& dm_g, Vec& dh,
                                       ElfEncoderParams& g) {
    auto n = static_cast<double>(dm_g.size());
    g.ln_gain += dm_g.cwiseProduct(c.vhat);
    g.ln_bias += dm_g;
    Vec dvhat = dm_g.cwiseProduct(p.ln_gain);
    double mean_dv = dvhat.mean();
    double mean_dv_vhat = dvhat.cwiseProduct(c.vhat).sum() / n;
    Vec dv = c.istd * (dvhat.array() - mean_dv - c.vhat.array() * mean_dv_vhat).matrix();

    Vec dres = dv.cwiseProduct((c.res_pre.array() > 0.0).cast<double>().matrix());
    g.res_W += dres * c.m_a.transpose();
    g.res_b += dres;
    Vec dm_a = dv + p.res_W.transpose() * dres;
    Vec ds = dm_a.cwiseProduct(c.m_a).cwiseProduct(Vec::Ones(c.m_a.size()) - c.m_a);
    dh += Y.transpose() * ds;
    return ds * h.transpose();  // dY
}

}  // namespace mmm
