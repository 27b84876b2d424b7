#pragma once

#include "mmm/params.hpp"
#include "mmm/registry.hpp"

namespace mmm {

// Patient-conditioned substructure importance, entries in (0,1).
inline Vec substructure_importance(const Vec& h, const BipartiteParams& p) {
    if (h.size() != p.sub_W.cols())
        throw ValidationError("substructure_importance: patient state width mismatch");
    return sigmoid(p.sub_W * h + p.sub_b);
}

// Masked affine aggregation: only (drug, substructure) weights where the
// containment mask is 1 participate, so weights at masked-out positions
// can never influence the output.
inline Vec local_drug_vector(const Vec& m_s, const BipartiteParams& p, const MaskMatrix& mask) {
    if (p.drug_sub_W.rows() != mask.n_drugs() || p.drug_sub_W.cols() != mask.n_substructures() ||
        m_s.size() != mask.n_substructures())
        throw ValidationError("local_drug_vector: mask/weight shape mismatch");
    Vec m_l = p.drug_b;
    for (int i = 0; i < mask.n_drugs(); ++i)
        for (int j : mask.row(i)) m_l(i) += p.drug_sub_W(i, j) * m_s(j);
    return m_l;
}

// Accumulates grads for both stages and the patient state.
inline void bipartite_backward(const Vec& h, const Vec& m_s, const BipartiteParams& p,
                               const MaskMatrix& mask, const Vec& dm_l, Vec& dh,
                               BipartiteParams& g) {
    g.drug_b += dm_l;
    Vec dm_s = Vec::Zero(m_s.size());
    for (int i = 0; i < mask.n_drugs(); ++i) {
        if (dm_l(i) == 0.0) continue;
        for (int j : mask.row(i)) {
            g.drug_sub_W(i, j) += dm_l(i) * m_s(j);
            dm_s(j) += p.drug_sub_W(i, j) * dm_l(i);
        }
    }
    Vec dpre = dm_s.cwiseProduct(m_s).cwiseProduct(Vec::Ones(m_s.size()) - m_s);
    g.sub_W += dpre * h.transpose();
    g.sub_b += dpre;
    dh += p.sub_W.transpose() * dpre;
}

}  // namespace mmm
