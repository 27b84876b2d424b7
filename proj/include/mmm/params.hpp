#pragma once

#include "mmm/common.hpp"
#include "mmm/corpus.hpp"
#include "mmm/rng.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

namespace mmm {

struct ModelConfig {
    int emb_dim = 64;      // code embedding width; also the GRU hidden size
    int dim = 64;          // patient state width
    int feat_dim = 128;    // pooled per-drug CNN feature width
    int cnn_c1 = 4;
    int cnn_c2 = 8;
    int mlp_hidden = 64;
    int patch_size = 32;
    bool freeze_cnn = false;

    int pooled_side() const {
        int a = (patch_size + 1) / 2;
        return (a + 1) / 2;  // two 2x2 max-pools with ceil semantics
    }
    int flat_dim() const { return cnn_c2 * pooled_side() * pooled_side(); }
};

struct HyperParams {
    double alpha = 0.95;      // bce vs margin mix inside the accuracy term
    double beta = 0.9;        // accuracy term vs interaction term
    double lr = 5e-5;         // Adam step size, fixed
    int epochs = 50;
    double threshold = 0.5;   // prescription cut on predicted probabilities
    std::uint64_t seed = 1;

    void validate() const {
        if (alpha < 0 || alpha > 1) throw ValidationError("alpha must lie in [0,1]");
        if (beta < 0 || beta > 1) throw ValidationError("beta must lie in [0,1]");
        if (threshold <= 0 || threshold >= 1) throw ValidationError("threshold must lie in (0,1)");
        if (epochs < 1) throw ValidationError("epochs must be >= 1");
        if (lr <= 0) throw ValidationError("learning rate must be positive");
    }
};

enum class Ablation { none, drop_elf, drop_bipartite };

inline std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::drop_elf: return "drop_elf";
        case Ablation::drop_bipartite: return "drop_bipartite";
        default: return "none";
    }
}

inline Ablation ablation_from_string(const std::string& s) {
    if (s == "none") return Ablation::none;
    if (s == "drop_elf" || s == "elf") return Ablation::drop_elf;
    if (s == "drop_bipartite" || s == "bipartite") return Ablation::drop_bipartite;
    throw ValidationError("unknown ablation '" + s + "'");
}

struct GruParams {
    Mat Wz, Wr, Wc;  // input weights, hidden x input
    Mat Uz, Ur, Uc;  // recurrent weights, hidden x hidden
    Vec bz, br, bc;
};

struct PatientEncoderParams {
    Mat E_dx, E_px;          // embedding tables, vocab x emb_dim
    GruParams gru_dx, gru_px;
    Mat ff_W;                // dim x 2*emb_dim
    Vec ff_b;
};

struct CnnParams {
    Mat conv1_k;  // c1 x 9        (3x3 kernels over the single input channel)
    Vec conv1_b;
    Mat conv2_k;  // c2 x (9*c1)
    Vec conv2_b;
    Mat head_W;   // feat_dim x flat_dim
    Vec head_b;
};

struct ElfEncoderParams {
    CnnParams cnn;
    Mat mlp_W1;  // mlp_hidden x feat_dim
    Vec mlp_b1;
    Mat mlp_W2;  // dim x mlp_hidden
    Vec mlp_b2;
    Mat res_W;   // n_drugs x n_drugs residual branch
    Vec res_b;
    Vec ln_gain, ln_bias;  // layer-norm over the drug axis
};

struct BipartiteParams {
    Mat sub_W;       // n_substructures x dim
    Vec sub_b;
    Mat drug_sub_W;  // n_drugs x n_substructures, used only where the mask is 1
    Vec drug_b;
};

struct ModelParams {
    PatientEncoderParams patient;
    ElfEncoderParams elf;
    BipartiteParams bipartite;
};

// Fixed enumeration order; checkpoints, Adam state and checksums all
// depend on it.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
    f("patient.E_dx", p.patient.E_dx);
    f("patient.E_px", p.patient.E_px);
    auto gru = [&](const std::string& prefix, auto& g) {
        f(prefix + ".Wz", g.Wz);
        f(prefix + ".Wr", g.Wr);
        f(prefix + ".Wc", g.Wc);
        f(prefix + ".Uz", g.Uz);
        f(prefix + ".Ur", g.Ur);
        f(prefix + ".Uc", g.Uc);
        f(prefix + ".bz", g.bz);
        f(prefix + ".br", g.br);
        f(prefix + ".bc", g.bc);
    };
    gru("patient.gru_dx", p.patient.gru_dx);
    gru("patient.gru_px", p.patient.gru_px);
    f("patient.ff_W", p.patient.ff_W);
    f("patient.ff_b", p.patient.ff_b);
    f("elf.cnn.conv1_k", p.elf.cnn.conv1_k);
    f("elf.cnn.conv1_b", p.elf.cnn.conv1_b);
    f("elf.cnn.conv2_k", p.elf.cnn.conv2_k);
    f("elf.cnn.conv2_b", p.elf.cnn.conv2_b);
    f("elf.cnn.head_W", p.elf.cnn.head_W);
    f("elf.cnn.head_b", p.elf.cnn.head_b);
    f("elf.mlp_W1", p.elf.mlp_W1);
    f("elf.mlp_b1", p.elf.mlp_b1);
    f("elf.mlp_W2", p.elf.mlp_W2);
    f("elf.mlp_b2", p.elf.mlp_b2);
    f("elf.res_W", p.elf.res_W);
    f("elf.res_b", p.elf.res_b);
    f("elf.ln_gain", p.elf.ln_gain);
    f("elf.ln_bias", p.elf.ln_bias);
    f("bipartite.sub_W", p.bipartite.sub_W);
    f("bipartite.sub_b", p.bipartite.sub_b);
    f("bipartite.drug_sub_W", p.bipartite.drug_sub_W);
    f("bipartite.drug_b", p.bipartite.drug_b);
}

namespace detail {

template <typename T>
void fill_uniform(T& t, Rng& rng, double bound) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
}

inline double fan_in_bound(Eigen::Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace detail

// Seeded uniform fan-in initialization; biases start at zero and the
// layer-norm gain at one.
inline ModelParams init_params(const ModelConfig& cfg, const VocabSizes& vocab, std::uint64_t seed) {
    ModelParams p;
    int emb = cfg.emb_dim, dim = cfg.dim, M = vocab.n_drugs, S = vocab.n_substructures;

    p.patient.E_dx = Mat(vocab.n_dx, emb);
    p.patient.E_px = Mat(vocab.n_px, emb);
    auto make_gru = [&](GruParams& g) {
        g.Wz = Mat(emb, emb); g.Wr = Mat(emb, emb); g.Wc = Mat(emb, emb);
        g.Uz = Mat(emb, emb); g.Ur = Mat(emb, emb); g.Uc = Mat(emb, emb);
        g.bz = Vec::Zero(emb); g.br = Vec::Zero(emb); g.bc = Vec::Zero(emb);
    };
    make_gru(p.patient.gru_dx);
    make_gru(p.patient.gru_px);
    p.patient.ff_W = Mat(dim, 2 * emb);
    p.patient.ff_b = Vec::Zero(dim);

    p.elf.cnn.conv1_k = Mat(cfg.cnn_c1, 9);
    p.elf.cnn.conv1_b = Vec::Zero(cfg.cnn_c1);
    p.elf.cnn.conv2_k = Mat(cfg.cnn_c2, 9 * cfg.cnn_c1);
    p.elf.cnn.conv2_b = Vec::Zero(cfg.cnn_c2);
    p.elf.cnn.head_W = Mat(cfg.feat_dim, cfg.flat_dim());
    p.elf.cnn.head_b = Vec::Zero(cfg.feat_dim);
    p.elf.mlp_W1 = Mat(cfg.mlp_hidden, cfg.feat_dim);
    p.elf.mlp_b1 = Vec::Zero(cfg.mlp_hidden);
    p.elf.mlp_W2 = Mat(dim, cfg.mlp_hidden);
    p.elf.mlp_b2 = Vec::Zero(dim);
    p.elf.res_W = Mat(M, M);
    p.elf.res_b = Vec::Zero(M);
    p.elf.ln_gain = Vec::Ones(M);
    p.elf.ln_bias = Vec::Zero(M);

    p.bipartite.sub_W = Mat(S, dim);
    p.bipartite.sub_b = Vec::Zero(S);
    p.bipartite.drug_sub_W = Mat(M, S);
    p.bipartite.drug_b = Vec::Zero(M);

    Rng rng(mix_seed(seed, 0x1417));
    for_each_tensor(p, [&](const std::string& name, auto& t) {
        bool is_bias = name.find("_b") != std::string::npos || name.ends_with(".bz") ||
                       name.ends_with(".br") || name.ends_with(".bc") ||
                       name.find("ln_") != std::string::npos;
        if (is_bias) return;  // biases and norm params keep their fixed init
        detail::fill_uniform(t, rng, detail::fan_in_bound(t.cols()));
    });
    return p;
}

struct TensorView {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
};

inline std::vector<TensorView> tensor_views(ModelParams& p) {
    std::vector<TensorView> out;
    out.reserve(32);
    for_each_tensor(p, [&](const std::string& name, auto& t) {
        out.push_back({name, t.data(), static_cast<std::size_t>(t.size())});
    });
    return out;
}

inline ModelParams zero_like(const ModelParams& src) {
    ModelParams z = src;
    for_each_tensor(z, [](const std::string&, auto& t) { t.setZero(); });
    return z;
}

inline void check_finite(const ModelParams& p, const std::string& where) {
    for_each_tensor(const_cast<ModelParams&>(p), [&](const std::string& name, auto& t) {
        if (!t.allFinite()) throw NumericError("non-finite values in " + name + " " + where);
    });
}

// Checksum over a name-prefix subset of the parameter blocks.
inline std::uint64_t checksum_params(const ModelParams& p, const std::string& prefix = "") {
    std::uint64_t h = 1469598103934665603ull;
    for_each_tensor(const_cast<ModelParams&>(p), [&](const std::string& name, auto& t) {
        if (!prefix.empty() && name.rfind(prefix, 0) != 0) return;
        h = fnv1a(t.data(), static_cast<std::size_t>(t.size()), h);
    });
    return h;
}

struct Checkpoint {
    ModelConfig config;
    HyperParams hyper;
    VocabSizes vocab;
    Ablation ablation = Ablation::none;
    bool frozen_features = false;  // drug features came from a file, CNN unused
    int best_epoch = 0;
    ModelParams params;
};

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "MMMCKPT1\n";
    out << "vocab " << ck.vocab.n_dx << ' ' << ck.vocab.n_px << ' ' << ck.vocab.n_drugs << ' '
        << ck.vocab.n_substructures << '\n';
    out << "config " << ck.config.emb_dim << ' ' << ck.config.dim << ' ' << ck.config.feat_dim << ' '
        << ck.config.cnn_c1 << ' ' << ck.config.cnn_c2 << ' ' << ck.config.mlp_hidden << ' '
        << ck.config.patch_size << ' ' << (ck.config.freeze_cnn ? 1 : 0) << '\n';
    out << "hyper " << format_double(ck.hyper.alpha) << ' ' << format_double(ck.hyper.beta) << ' '
        << format_double(ck.hyper.lr) << ' ' << ck.hyper.epochs << ' '
        << format_double(ck.hyper.threshold) << ' ' << ck.hyper.seed << '\n';
    out << "ablation " << to_string(ck.ablation) << '\n';
    out << "features " << (ck.frozen_features ? "frozen" : "cnn") << '\n';
    out << "best_epoch " << ck.best_epoch << '\n';
    for_each_tensor(const_cast<ModelParams&>(ck.params), [&](const std::string& name, auto& t) {
        out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c) {
                if (c) out << ' ';
                out << format_double(t(r, c));
            }
            out << '\n';
        }
    });
    out << "end\n";
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::string tok;
    in >> tok;
    if (tok != "MMMCKPT1") throw LoadError(path.string() + ": not a checkpoint file");
    Checkpoint ck;
    int freeze = 0;
    in >> tok >> ck.vocab.n_dx >> ck.vocab.n_px >> ck.vocab.n_drugs >> ck.vocab.n_substructures;
    if (tok != "vocab") throw LoadError(path.string() + ": malformed header (vocab)");
    in >> tok >> ck.config.emb_dim >> ck.config.dim >> ck.config.feat_dim >> ck.config.cnn_c1 >>
        ck.config.cnn_c2 >> ck.config.mlp_hidden >> ck.config.patch_size >> freeze;
    if (tok != "config") throw LoadError(path.string() + ": malformed header (config)");
    ck.config.freeze_cnn = freeze != 0;
    std::string a, b, lr, th;
    in >> tok >> a >> b >> lr >> ck.hyper.epochs >> th >> ck.hyper.seed;
    if (tok != "hyper") throw LoadError(path.string() + ": malformed header (hyper)");
    ck.hyper.alpha = parse_double(a);
    ck.hyper.beta = parse_double(b);
    ck.hyper.lr = parse_double(lr);
    ck.hyper.threshold = parse_double(th);
    in >> tok >> a;
    if (tok != "ablation") throw LoadError(path.string() + ": malformed header (ablation)");
    ck.ablation = ablation_from_string(a);
    in >> tok >> a;
    if (tok != "features") throw LoadError(path.string() + ": malformed header (features)");
    ck.frozen_features = (a == "frozen");
    in >> tok >> ck.best_epoch;
    if (tok != "best_epoch") throw LoadError(path.string() + ": malformed header (best_epoch)");

    ck.params = init_params(ck.config, ck.vocab, ck.hyper.seed);
    std::map<std::string, std::function<void(Eigen::Index, Eigen::Index, std::ifstream&)>> loaders;
    for_each_tensor(ck.params, [&](const std::string& name, auto& t) {
        loaders[name] = [&t, name, &path](Eigen::Index rows, Eigen::Index cols, std::ifstream& s) {
            if (rows != t.rows() || cols != t.cols())
                throw LoadError(path.string() + ": tensor " + name + " has shape " +
                                std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                                std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
            std::string v;
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) {
                    if (!(s >> v)) throw LoadError(name + ": truncated tensor payload");
                    t(r, c) = parse_double(v);
                }
        };
    });
    std::size_t seen = 0;
    while (in >> tok) {
        if (tok == "end") break;
        if (tok != "tensor") throw LoadError(path.string() + ": unexpected token '" + tok + "'");
        std::string name;
        Eigen::Index rows, cols;
        in >> name >> rows >> cols;
        auto it = loaders.find(name);
        if (it == loaders.end()) throw LoadError(path.string() + ": unknown tensor '" + name + "'");
        it->second(rows, cols, in);
        ++seen;
    }
    if (seen != loaders.size())
        throw LoadError(path.string() + ": checkpoint holds " + std::to_string(seen) +
                        " tensors, expected " + std::to_string(loaders.size()));
    return ck;
}

}  // namespace mmm
