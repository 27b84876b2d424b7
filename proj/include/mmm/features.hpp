#pragma once

#include "mmm/corpus.hpp"
#include "mmm/elf.hpp"
#include "mmm/model.hpp"

namespace mmm {

inline Mat read_drug_features(const std::filesystem::path& path, int n_drugs) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::string line;
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n_drugs));
    std::size_t lineno = 0;
    Eigen::Index width = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (lineno == 1 && line.rfind("drug_id", 0) == 0) continue;
        auto f = split(line, ',');
        if (f.size() < 2)
            throw ValidationError(path.string() + " line " + std::to_string(lineno) +
                                  ": expected drug_id plus features");
        long id = parse_long(f[0]);
        if (id < 0 || id >= n_drugs)
            throw ValidationError(path.string() + ": drug_id " + std::to_string(id) +
                                  " outside registry");
        if (width < 0) width = static_cast<Eigen::Index>(f.size() - 1);
        if (static_cast<Eigen::Index>(f.size() - 1) != width)
            throw ValidationError(path.string() + " line " + std::to_string(lineno) +
                                  ": inconsistent feature width");
        auto& row = rows[static_cast<std::size_t>(id)];
        if (!row.empty())
            throw ValidationError(path.string() + ": duplicate drug_id " + std::to_string(id));
        for (std::size_t k = 1; k < f.size(); ++k) row.push_back(parse_double(f[k]));
    }
    Mat C(n_drugs, width);
    for (int i = 0; i < n_drugs; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (row.empty())
            throw ValidationError(path.string() + ": missing features for drug " + std::to_string(i));
        for (Eigen::Index k = 0; k < width; ++k) C(i, k) = row[static_cast<std::size_t>(k)];
    }
    return C;
}

inline void write_drug_features(const std::filesystem::path& path, const Mat& C) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "drug_id";
    for (Eigen::Index k = 0; k < C.cols(); ++k) out << ",f" << k;
    out << '\n';
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
        out << i;
        for (Eigen::Index k = 0; k < C.cols(); ++k) out << ',' << format_double(C(i, k));
        out << '\n';
    }
}

inline std::vector<PatchSet> load_patch_sets(const std::filesystem::path& dir, int n_drugs,
                                             int patch_size) {
    std::vector<PatchSet> sets;
    sets.reserve(static_cast<std::size_t>(n_drugs));
    for (int i = 0; i < n_drugs; ++i) {
        ElfVolume vol = read_elfv(dir / "elf" / (std::to_string(i) + ".elfv"));
        sets.push_back(extract_patches(vol, patch_size, i));
    }
    return sets;
}

// Frozen features win when drug_features.csv is present; otherwise the
// per-drug volumes are tiled for the trainable CNN path.
inline DrugFeatureSource load_feature_source(const std::filesystem::path& dir,
                                             const CorpusBundle& bundle, const ModelConfig& cfg) {
    DrugFeatureSource src;
    auto feat_file = dir / "drug_features.csv";
    if (std::filesystem::exists(feat_file)) {
        src.frozen = true;
        src.fixed_C = read_drug_features(feat_file, bundle.registry.n_drugs());
        if (src.fixed_C.cols() != cfg.feat_dim)
            throw ValidationError("drug_features.csv has width " + std::to_string(src.fixed_C.cols()) +
                                  " but feat_dim is " + std::to_string(cfg.feat_dim));
        return src;
    }
    src.patch_sets = load_patch_sets(dir, bundle.registry.n_drugs(), cfg.patch_size);
    return src;
}

}  // namespace mmm
