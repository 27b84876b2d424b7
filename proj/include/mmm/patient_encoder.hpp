#pragma once

#include "mmm/corpus.hpp"
#include "mmm/params.hpp"

namespace mmm {

// Mean of the embedding rows for a visit's codes; an empty code list
// (possible for procedures) embeds to the zero vector.
inline Vec embed_visit(const std::vector<int>& codes, const Mat& table) {
    Vec out = Vec::Zero(table.cols());
    if (codes.empty()) return out;
    for (int c : codes) {
        if (c < 0 || c >= table.rows())
            throw ValidationError("code " + std::to_string(c) + " outside embedding table of " +
                                  std::to_string(table.rows()) + " rows");
        out += table.row(c);
    }
    return out / static_cast<double>(codes.size());
}

struct GruStepCache {
    Vec x, h_prev, z, r, c, h;
};

inline Vec gru_step(const GruParams& g, const Vec& x, const Vec& h_prev, GruStepCache* cache) {
    Vec z = sigmoid(g.Wz * x + g.Uz * h_prev + g.bz);
    Vec r = sigmoid(g.Wr * x + g.Ur * h_prev + g.br);
    Vec c = (g.Wc * x + g.Uc * (r.cwiseProduct(h_prev)) + g.bc).array().tanh();
    Vec h = (Vec::Ones(z.size()) - z).cwiseProduct(h_prev) + z.cwiseProduct(c);
    if (cache) *cache = {x, h_prev, z, r, c, h};
    return h;
}

// Backward through one GRU step; returns (dx, dh_prev) and accumulates
// into the parameter grads (a zeroed GruParams of matching shape).
inline std::pair<Vec, Vec> gru_step_backward(const GruParams& g, const GruStepCache& s,
                                             const Vec& dh, GruParams& grads) {
    Vec dz = dh.cwiseProduct(s.c - s.h_prev);
    Vec dc = dh.cwiseProduct(s.z);
    Vec dh_prev = dh.cwiseProduct(Vec::Ones(s.z.size()) - s.z);

    Vec dc_pre = dc.cwiseProduct(Vec::Ones(s.c.size()) - s.c.cwiseProduct(s.c));
    Vec rh = s.r.cwiseProduct(s.h_prev);
    grads.Wc += dc_pre * s.x.transpose();
    grads.Uc += dc_pre * rh.transpose();
    grads.bc += dc_pre;
    Vec drh = g.Uc.transpose() * dc_pre;
    Vec dr = drh.cwiseProduct(s.h_prev);
    dh_prev += drh.cwiseProduct(s.r);

    Vec dz_pre = dz.cwiseProduct(s.z).cwiseProduct(Vec::Ones(s.z.size()) - s.z);
    Vec dr_pre = dr.cwiseProduct(s.r).cwiseProduct(Vec::Ones(s.r.size()) - s.r);
    grads.Wz += dz_pre * s.x.transpose();
    grads.Uz += dz_pre * s.h_prev.transpose();
    grads.bz += dz_pre;
    grads.Wr += dr_pre * s.x.transpose();
    grads.Ur += dr_pre * s.h_prev.transpose();
    grads.br += dr_pre;

    Vec dx = g.Wz.transpose() * dz_pre + g.Wr.transpose() * dr_pre + g.Wc.transpose() * dc_pre;
    dh_prev += g.Uz.transpose() * dz_pre + g.Ur.transpose() * dr_pre;
    return {dx, dh_prev};
}

struct PatientEncodeCache {
    std::vector<std::vector<int>> dx_codes, px_codes;  // per visit, for embedding grads
    std::vector<GruStepCache> steps_dx, steps_px;
    Vec r_dx, r_px;  // final recurrent states
    Vec concat, pre, h;
};

// Runs both recurrent encoders over visits 1..t and fuses the final
// states through the affine+tanh head.
inline Vec encode_patient(const std::vector<Visit>& visits, std::size_t t,
                          const PatientEncoderParams& p, PatientEncodeCache* cache) {
    if (t < 1 || t > visits.size()) throw ValidationError("encode_patient: empty or short visit list");
    int emb = static_cast<int>(p.E_dx.cols());
    Vec h_dx = Vec::Zero(emb), h_px = Vec::Zero(emb);
    if (cache) {
        cache->steps_dx.resize(t);
        cache->steps_px.resize(t);
        cache->dx_codes.resize(t);
        cache->px_codes.resize(t);
    }
    for (std::size_t k = 0; k < t; ++k) {
        Vec x_dx = embed_visit(visits[k].diagnoses, p.E_dx);
        Vec x_px = embed_visit(visits[k].procedures, p.E_px);
        h_dx = gru_step(p.gru_dx, x_dx, h_dx, cache ? &cache->steps_dx[k] : nullptr);
        h_px = gru_step(p.gru_px, x_px, h_px, cache ? &cache->steps_px[k] : nullptr);
        if (cache) {
            cache->dx_codes[k] = visits[k].diagnoses;
            cache->px_codes[k] = visits[k].procedures;
        }
    }
    Vec concat(2 * emb);
    concat << h_dx, h_px;
    Vec pre = p.ff_W * concat + p.ff_b;
    Vec h = pre.array().tanh();
    if (cache) {
        cache->r_dx = h_dx;
        cache->r_px = h_px;
        cache->concat = concat;
        cache->pre = pre;
        cache->h = h;
    }
    return h;
}

inline void encode_patient_backward(const PatientEncoderParams& p, const PatientEncodeCache& c,
                                    const Vec& dh, PatientEncoderParams& g) {
    Vec dpre = dh.cwiseProduct(Vec::Ones(c.h.size()) - c.h.cwiseProduct(c.h));
    g.ff_W += dpre * c.concat.transpose();
    g.ff_b += dpre;
    Vec dconcat = p.ff_W.transpose() * dpre;
    int emb = static_cast<int>(p.E_dx.cols());
    Vec dh_dx = dconcat.head(emb);
    Vec dh_px = dconcat.tail(emb);

    auto run_bptt = [](const GruParams& gp, const std::vector<GruStepCache>& steps,
                       const std::vector<std::vector<int>>& codes, Vec dh_last, GruParams& gg,
                       Mat& dE) {
        Vec dh_t = std::move(dh_last);
        for (std::size_t k = steps.size(); k-- > 0;) {
            auto [dx, dh_prev] = gru_step_backward(gp, steps[k], dh_t, gg);
            if (!codes[k].empty()) {
                double scale = 1.0 / static_cast<double>(codes[k].size());
                for (int code : codes[k]) dE.row(code) += scale * dx.transpose();
            }
            dh_t = dh_prev;
        }
    };
    run_bptt(p.gru_dx, c.steps_dx, c.dx_codes, dh_dx, g.gru_dx, g.E_dx);
    run_bptt(p.gru_px, c.steps_px, c.px_codes, dh_px, g.gru_px, g.E_px);
}

}  // namespace mmm
