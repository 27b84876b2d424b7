#pragma once

#include "mmm/common.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mmm {

struct DrugRegistryEntry {
    int drug_id = 0;
    std::string name;
    std::string smiles;
    long cid = 0;
    std::string atc3;
    std::vector<int> substructures;  // sorted, deduplicated
};

class DrugRegistry {
public:
    DrugRegistry() = default;
    DrugRegistry(std::vector<DrugRegistryEntry> entries, int n_substructures)
        : entries_(std::move(entries)), n_substructures_(n_substructures) {
        validate();
    }

    int n_drugs() const { return static_cast<int>(entries_.size()); }
    int n_substructures() const { return n_substructures_; }
    const DrugRegistryEntry& entry(int drug_id) const {
        if (drug_id < 0 || drug_id >= n_drugs())
            throw ValidationError("drug_id " + std::to_string(drug_id) + " not in registry");
        return entries_[static_cast<std::size_t>(drug_id)];
    }
    const std::vector<DrugRegistryEntry>& entries() const { return entries_; }

    long cid_of(int drug_id) const { return entry(drug_id).cid; }
    const std::string& atc3_of(int drug_id) const { return entry(drug_id).atc3; }

private:
    void validate() {
        std::vector<char> seen(entries_.size(), 0);
        for (auto& e : entries_) {
            if (e.drug_id < 0 || e.drug_id >= n_drugs() || seen[static_cast<std::size_t>(e.drug_id)])
                throw ValidationError("registry drug_id values must be dense and unique; bad id " +
                                      std::to_string(e.drug_id));
            seen[static_cast<std::size_t>(e.drug_id)] = 1;
            if (e.atc3.empty())
                throw ValidationError("registry drug " + std::to_string(e.drug_id) + " has empty atc3");
            std::sort(e.substructures.begin(), e.substructures.end());
            e.substructures.erase(std::unique(e.substructures.begin(), e.substructures.end()),
                                  e.substructures.end());
            for (int s : e.substructures)
                if (s < 0 || s >= n_substructures_)
                    throw ValidationError("registry drug " + std::to_string(e.drug_id) +
                                          " references substructure " + std::to_string(s) +
                                          " outside [0," + std::to_string(n_substructures_) + ")");
        }
        std::sort(entries_.begin(), entries_.end(),
                  [](const auto& a, const auto& b) { return a.drug_id < b.drug_id; });
    }

    std::vector<DrugRegistryEntry> entries_;
    int n_substructures_ = 0;
};

inline std::uint64_t cid_pair_key(long a, long b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(b));
}

// Drug-level interaction adjacency derived from CID-level pairs: the CID
// pair set is the source of truth, so drugs sharing a CID inherit one
// interaction profile.
class DdiMatrix {
public:
    DdiMatrix() = default;
    DdiMatrix(const DrugRegistry& registry, const std::vector<std::pair<long, long>>& cid_pairs) {
        int m = registry.n_drugs();
        dense_ = Mat::Zero(m, m);
        std::unordered_map<long, std::vector<int>> by_cid;
        for (int i = 0; i < m; ++i) by_cid[registry.cid_of(i)].push_back(i);
        for (auto [a, b] : cid_pairs) {
            if (a == b)
                throw ValidationError("ddi pair (" + std::to_string(a) + "," + std::to_string(b) +
                                      ") is a self-pair");
            auto ia = by_cid.find(a);
            auto ib = by_cid.find(b);
            if (ia == by_cid.end())
                throw ValidationError("ddi pair references unknown cid " + std::to_string(a));
            if (ib == by_cid.end())
                throw ValidationError("ddi pair references unknown cid " + std::to_string(b));
            if (!cid_pairs_.insert(cid_pair_key(a, b)).second)
                throw ValidationError("duplicate ddi pair (" + std::to_string(a) + "," +
                                      std::to_string(b) + ")");
            for (int i : ia->second)
                for (int j : ib->second) {
                    dense_(i, j) = 1.0;
                    dense_(j, i) = 1.0;
                }
        }
    }

    int n_drugs() const { return static_cast<int>(dense_.rows()); }
    const Mat& dense() const { return dense_; }
    bool interacts_cid(long a, long b) const { return cid_pairs_.count(cid_pair_key(a, b)) > 0; }
    std::size_t n_cid_pairs() const { return cid_pairs_.size(); }
    long n_drug_pairs() const {
        return static_cast<long>(dense_.sum() / 2.0 + 0.5);
    }

private:
    Mat dense_;
    std::unordered_set<std::uint64_t> cid_pairs_;
};

// Binary drug x substructure containment, stored as per-drug index lists.
// Dense form is only materialized for tests and small instances.
class MaskMatrix {
public:
    MaskMatrix() = default;
    explicit MaskMatrix(const DrugRegistry& registry)
        : n_drugs_(registry.n_drugs()), n_substructures_(registry.n_substructures()) {
        rows_.reserve(static_cast<std::size_t>(n_drugs_));
        for (const auto& e : registry.entries()) rows_.push_back(e.substructures);
    }

    int n_drugs() const { return n_drugs_; }
    int n_substructures() const { return n_substructures_; }
    const std::vector<int>& row(int drug_id) const { return rows_[static_cast<std::size_t>(drug_id)]; }
    bool contains(int drug_id, int sub_id) const {
        const auto& r = row(drug_id);
        return std::binary_search(r.begin(), r.end(), sub_id);
    }
    Mat dense() const {
        Mat H = Mat::Zero(n_drugs_, n_substructures_);
        for (int i = 0; i < n_drugs_; ++i)
            for (int j : rows_[static_cast<std::size_t>(i)]) H(i, j) = 1.0;
        return H;
    }

private:
    int n_drugs_ = 0;
    int n_substructures_ = 0;
    std::vector<std::vector<int>> rows_;
};

}  // namespace mmm
