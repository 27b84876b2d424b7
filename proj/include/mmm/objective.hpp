#pragma once

#include "mmm/params.hpp"
#include "mmm/registry.hpp"

#include <set>

namespace mmm {

constexpr double kProbClamp = 1e-7;

struct Prediction {
    Vec probabilities;           // in (0,1)
    std::vector<int> selected;   // sorted drug ids at or above the threshold
};

// Fuses global and local drug vectors and thresholds the probabilities
// (boundary inclusive).
inline Prediction predict(const Vec& m_g, const Vec& m_l, double threshold) {
    if (m_g.size() != m_l.size()) throw ValidationError("predict: vector length mismatch");
    Prediction p;
    p.probabilities = sigmoid(m_g.cwiseProduct(m_l).eval());
    for (Eigen::Index i = 0; i < p.probabilities.size(); ++i)
        if (p.probabilities(i) >= threshold) p.selected.push_back(static_cast<int>(i));
    return p;
}

inline Vec multi_hot(const std::vector<int>& ids, Eigen::Index n) {
    Vec y = Vec::Zero(n);
    for (int i : ids) {
        if (i < 0 || i >= n) throw ValidationError("drug id " + std::to_string(i) + " outside vocab");
        y(i) = 1.0;
    }
    return y;
}

// Mean binary cross-entropy over the drug vocabulary; probabilities are
// clamped away from {0,1} before the logs.
inline double loss_bce(const Vec& o, const Vec& truth, Vec* grad = nullptr) {
    auto n = static_cast<double>(o.size());
    double loss = 0.0;
    if (grad) *grad = Vec::Zero(o.size());
    for (Eigen::Index i = 0; i < o.size(); ++i) {
        double p = std::clamp(o(i), kProbClamp, 1.0 - kProbClamp);
        loss -= truth(i) * std::log(p) + (1.0 - truth(i)) * std::log(1.0 - p);
        if (grad && o(i) > kProbClamp && o(i) < 1.0 - kProbClamp)
            (*grad)(i) = (-truth(i) / p + (1.0 - truth(i)) / (1.0 - p)) / n;
    }
    return loss / n;
}

// Multi-label margin: hinge on every (positive, negative) pair, summed
// and scaled by 1/|M|. A truth set covering every drug has no negatives
// and scores 0.
inline double loss_multi(const Vec& o, const Vec& truth, Vec* grad = nullptr) {
    auto n = static_cast<double>(o.size());
    if (grad) *grad = Vec::Zero(o.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < o.size(); ++i) {
        if (truth(i) != 1.0) continue;
        for (Eigen::Index j = 0; j < o.size(); ++j) {
            if (truth(j) == 1.0) continue;
            double margin = 1.0 - (o(i) - o(j));
            if (margin > 0.0) {
                loss += margin;
                if (grad) {
                    (*grad)(i) -= 1.0 / n;
                    (*grad)(j) += 1.0 / n;
                }
            }
        }
    }
    return loss / n;
}

// Expected interacting-pair mass over all unordered drug pairs.
inline double loss_ddi(const Vec& o, const Mat& D, Vec* grad = nullptr) {
    auto m = o.size();
    if (m < 2) throw ValidationError("loss_ddi needs at least two drugs");
    if (D.rows() != m || D.cols() != m) throw ValidationError("loss_ddi: adjacency shape mismatch");
    double denom = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
    Vec Do = D * o;
    if (grad) *grad = Do / denom;
    return 0.5 * o.dot(Do) / denom;
}

struct LossParts {
    double bce = 0.0, multi = 0.0, ddi = 0.0, total = 0.0;
};

inline LossParts total_loss(const Vec& o, const Vec& truth, const Mat& D, double alpha, double beta,
                            Vec* grad = nullptr) {
    Vec g_bce, g_multi, g_ddi;
    LossParts parts;
    parts.bce = loss_bce(o, truth, grad ? &g_bce : nullptr);
    parts.multi = loss_multi(o, truth, grad ? &g_multi : nullptr);
    parts.ddi = loss_ddi(o, D, grad ? &g_ddi : nullptr);
    parts.total = beta * (alpha * parts.bce + (1.0 - alpha) * parts.multi) + (1.0 - beta) * parts.ddi;
    if (grad) *grad = beta * (alpha * g_bce + (1.0 - alpha) * g_multi) + (1.0 - beta) * g_ddi;
    return parts;
}

}  // namespace mmm
