#pragma once

#include "mmm/mmm.hpp"

#include <filesystem>
#include <random>

namespace mmm::test {

// 5 drugs x 7 substructures with two interacting CID pairs; drugs 3 and 4
// share an ATC3 group so alternative-therapy credit is exercised.
inline DrugRegistry tiny_registry() {
    std::vector<DrugRegistryEntry> entries;
    const std::vector<std::vector<int>> subs = {{0, 2}, {1}, {2, 3, 5}, {}, {4, 6}};
    const char* atc[] = {"N02", "C07", "A02", "B01", "B01"};
    for (int i = 0; i < 5; ++i) {
        DrugRegistryEntry e;
        e.drug_id = i;
        e.name = "drug" + std::to_string(i);
        e.smiles = "CCO";
        e.cid = 100 + i;
        e.atc3 = atc[i];
        e.substructures = subs[static_cast<std::size_t>(i)];
        entries.push_back(e);
    }
    return DrugRegistry(std::move(entries), 7);
}

inline std::vector<std::pair<long, long>> tiny_cid_pairs() { return {{100, 101}, {102, 104}}; }

inline CorpusBundle tiny_bundle() {
    CorpusBundle b;
    b.registry = tiny_registry();
    b.cid_pairs = tiny_cid_pairs();
    b.ddi = DdiMatrix(b.registry, b.cid_pairs);
    b.mask = MaskMatrix(b.registry);
    b.corpus.vocab = {10, 10, 5, 7};
    Patient p0;
    p0.pid = 0;
    p0.visits.push_back({{1, 3, 7}, {2, 5}, {0, 2}});
    p0.visits.push_back({{2, 4}, {1}, {1, 3, 4}});
    Patient p1;
    p1.pid = 1;
    p1.visits.push_back({{0, 9}, {}, {2, 3}});
    b.corpus.patients = {p0, p1};
    return b;
}

// Small, fast model shapes for encoder and trainer tests.
inline ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.emb_dim = 8;
    cfg.dim = 8;
    cfg.feat_dim = 6;
    cfg.cnn_c1 = 2;
    cfg.cnn_c2 = 3;
    cfg.mlp_hidden = 8;
    cfg.patch_size = 12;
    return cfg;
}

inline DrugFeatureSource tiny_patch_source(int n_drugs, std::uint64_t seed = 5) {
    DrugFeatureSource src;
    GridDims g;
    g.nx = 24;
    g.ny = 24;
    g.nz = 2;
    for (int i = 0; i < n_drugs; ++i)
        src.patch_sets.push_back(extract_patches(synth_elf(i, seed, g), 12, i));
    return src;
}

inline void zero_elf_params(ElfEncoderParams& p) {
    p.cnn.conv1_k.setZero();
    p.cnn.conv1_b.setZero();
    p.cnn.conv2_k.setZero();
    p.cnn.conv2_b.setZero();
    p.cnn.head_W.setZero();
    p.cnn.head_b.setZero();
    p.mlp_W1.setZero();
    p.mlp_b1.setZero();
    p.mlp_W2.setZero();
    p.mlp_b2.setZero();
    p.res_W.setZero();
    p.res_b.setZero();
    p.ln_gain.setZero();
    p.ln_bias.setZero();
}

inline void zero_patient_params(PatientEncoderParams& p) {
    p.E_dx.setZero();
    p.E_px.setZero();
    for (GruParams* g : {&p.gru_dx, &p.gru_px}) {
        g->Wz.setZero();
        g->Wr.setZero();
        g->Wc.setZero();
        g->Uz.setZero();
        g->Ur.setZero();
        g->Uc.setZero();
        g->bz.setZero();
        g->br.setZero();
        g->bc.setZero();
    }
    p.ff_W.setZero();
    p.ff_b.setZero();
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("mmm_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

inline SynthSpec small_synth_spec(int n_patients = 20, std::uint64_t seed = 3) {
    SynthSpec spec;
    spec.n_patients = n_patients;
    spec.seed = seed;
    spec.targets.n_dx = 40;
    spec.targets.n_px = 30;
    spec.targets.n_drugs = 12;
    spec.targets.n_substructures = 15;
    spec.targets.ddi_pairs = 9;
    spec.targets.mean_visits = 1.8;
    spec.targets.mean_dx = 4.0;
    spec.targets.mean_px = 1.5;
    spec.targets.mean_meds = 3.0;
    return spec;
}

inline CorpusBundle bundle_from_synth(const SynthCorpusResult& r) {
    CorpusBundle b;
    b.corpus = r.corpus;
    b.registry = r.registry;
    b.cid_pairs = r.cid_pairs;
    b.ddi = DdiMatrix(b.registry, r.cid_pairs);
    b.mask = MaskMatrix(b.registry);
    return b;
}

}  // namespace mmm::test
