#pragma once

#include "mmm/common.hpp"
#include "mmm/registry.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mmm {

struct Visit {
    std::vector<int> diagnoses;
    std::vector<int> procedures;
    std::vector<int> medications;  // sorted drug ids, non-empty
};

struct Patient {
    long pid = 0;
    std::vector<Visit> visits;  // temporal order
};

struct VocabSizes {
    int n_dx = 0;
    int n_px = 0;
    int n_drugs = 0;
    int n_substructures = 0;
};

struct EhrCorpus {
    std::vector<Patient> patients;
    VocabSizes vocab;

    std::size_t n_visits() const {
        std::size_t n = 0;
        for (const auto& p : patients) n += p.visits.size();
        return n;
    }
    const Patient& patient_by_id(long pid) const {
        for (const auto& p : patients)
            if (p.pid == pid) return p;
        throw ValidationError("unknown patient " + std::to_string(pid));
    }
};

struct CorpusBundle {
    EhrCorpus corpus;
    DrugRegistry registry;
    DdiMatrix ddi;
    MaskMatrix mask;
    std::vector<std::pair<long, long>> cid_pairs;  // as listed on disk
};

namespace detail {

inline std::ifstream open_or_throw(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw LoadError("cannot open " + p.string());
    return in;
}

inline void validate_codes(const EhrCorpus& corpus) {
    for (const auto& p : corpus.patients) {
        if (p.visits.empty())
            throw ValidationError("patient " + std::to_string(p.pid) + " has no visits");
        for (std::size_t t = 0; t < p.visits.size(); ++t) {
            const Visit& v = p.visits[t];
            if (v.diagnoses.empty())
                throw ValidationError("patient " + std::to_string(p.pid) + " visit " +
                                      std::to_string(t) + " has no diagnoses");
            if (v.medications.empty())
                throw ValidationError("patient " + std::to_string(p.pid) + " visit " +
                                      std::to_string(t) + " has no medications");
            for (int c : v.diagnoses)
                if (c < 0 || c >= corpus.vocab.n_dx)
                    throw ValidationError("patient " + std::to_string(p.pid) + ": diagnosis code " +
                                          std::to_string(c) + " outside vocab");
            for (int c : v.procedures)
                if (c < 0 || c >= corpus.vocab.n_px)
                    throw ValidationError("patient " + std::to_string(p.pid) + ": procedure code " +
                                          std::to_string(c) + " outside vocab");
            for (int c : v.medications)
                if (c < 0 || c >= corpus.vocab.n_drugs)
                    throw ValidationError("patient " + std::to_string(p.pid) + ": drug id " +
                                          std::to_string(c) + " outside vocab");
        }
    }
}

}  // namespace detail

// Loads the five-file corpus directory. Visits without prescriptions are
// dropped here; a patient whose visits all drop is removed entirely.
inline CorpusBundle load_corpus(const std::filesystem::path& dir, bool require_elf = true) {
    namespace fs = std::filesystem;
    using nlohmann::json;

    for (const char* name : {"patients.jsonl", "registry.csv", "ddi_cid_pairs.csv", "vocab.json"})
        if (!fs::exists(dir / name)) throw LoadError("missing corpus file " + (dir / name).string());

    CorpusBundle b;

    {
        auto in = detail::open_or_throw(dir / "vocab.json");
        json v = json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (v.is_discarded()) throw LoadError("malformed vocab.json");
        try {
            b.corpus.vocab.n_dx = v.at("n_dx").get<int>();
            b.corpus.vocab.n_px = v.at("n_px").get<int>();
            b.corpus.vocab.n_drugs = v.at("n_drugs").get<int>();
            b.corpus.vocab.n_substructures = v.at("n_substructures").get<int>();
        } catch (const json::exception& e) {
            throw LoadError(std::string("vocab.json: ") + e.what());
        }
    }

    {
        auto in = detail::open_or_throw(dir / "registry.csv");
        std::vector<DrugRegistryEntry> entries;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            if (lineno == 1 && line.rfind("drug_id,", 0) == 0) continue;  // header
            auto f = split(line, ',');
            if (f.size() != 6)
                throw ValidationError("registry.csv line " + std::to_string(lineno) +
                                      ": expected 6 fields, got " + std::to_string(f.size()));
            DrugRegistryEntry e;
            e.drug_id = static_cast<int>(parse_long(f[0]));
            e.name = f[1];
            e.smiles = f[2];
            e.cid = parse_long(f[3]);
            e.atc3 = f[4];
            if (!trim(f[5]).empty())
                for (const auto& s : split(f[5], ';')) e.substructures.push_back(static_cast<int>(parse_long(s)));
            entries.push_back(std::move(e));
        }
        b.registry = DrugRegistry(std::move(entries), b.corpus.vocab.n_substructures);
        if (b.registry.n_drugs() != b.corpus.vocab.n_drugs)
            throw ValidationError("registry has " + std::to_string(b.registry.n_drugs()) +
                                  " drugs but vocab.json declares " +
                                  std::to_string(b.corpus.vocab.n_drugs));
    }

    {
        auto in = detail::open_or_throw(dir / "ddi_cid_pairs.csv");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            if (lineno == 1 && line.rfind("cid_a", 0) == 0) continue;
            auto f = split(line, ',');
            if (f.size() != 2)
                throw ValidationError("ddi_cid_pairs.csv line " + std::to_string(lineno) +
                                      ": expected 2 fields");
            b.cid_pairs.emplace_back(parse_long(f[0]), parse_long(f[1]));
        }
        b.ddi = DdiMatrix(b.registry, b.cid_pairs);
    }
    b.mask = MaskMatrix(b.registry);

    {
        auto in = detail::open_or_throw(dir / "patients.jsonl");
        std::string line;
        std::size_t lineno = 0;
        std::set<long> pids;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw LoadError("patients.jsonl line " + std::to_string(lineno) + ": malformed json");
            Patient p;
            try {
                p.pid = j.at("pid").get<long>();
                for (const auto& jv : j.at("visits")) {
                    Visit v;
                    v.diagnoses = jv.at("dx").get<std::vector<int>>();
                    v.procedures = jv.at("px").get<std::vector<int>>();
                    v.medications = jv.at("rx").get<std::vector<int>>();
                    std::sort(v.medications.begin(), v.medications.end());
                    v.medications.erase(std::unique(v.medications.begin(), v.medications.end()),
                                        v.medications.end());
                    if (v.medications.empty()) continue;  // no prescription, drop
                    p.visits.push_back(std::move(v));
                }
            } catch (const json::exception& e) {
                throw LoadError("patients.jsonl line " + std::to_string(lineno) + ": " + e.what());
            }
            if (!pids.insert(p.pid).second)
                throw ValidationError("duplicate patient id " + std::to_string(p.pid));
            if (!p.visits.empty()) b.corpus.patients.push_back(std::move(p));
        }
        if (b.corpus.patients.empty()) throw ValidationError("no patients");
    }

    detail::validate_codes(b.corpus);

    if (require_elf && !fs::exists(dir / "drug_features.csv")) {
        for (int i = 0; i < b.registry.n_drugs(); ++i) {
            fs::path p = dir / "elf" / (std::to_string(i) + ".elfv");
            if (!fs::exists(p)) throw LoadError("missing corpus file " + p.string());
        }
    }
    return b;
}

// Inverse of load_corpus for the four tabular files (volumes are written
// separately by the generator).
inline void write_corpus(const std::filesystem::path& dir, const EhrCorpus& corpus,
                         const DrugRegistry& registry,
                         const std::vector<std::pair<long, long>>& cid_pairs) {
    namespace fs = std::filesystem;
    using nlohmann::json;
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "vocab.json");
        json v = {{"n_dx", corpus.vocab.n_dx},
                  {"n_px", corpus.vocab.n_px},
                  {"n_drugs", corpus.vocab.n_drugs},
                  {"n_substructures", corpus.vocab.n_substructures}};
        out << v.dump(2) << "\n";
    }
    {
        std::ofstream out(dir / "registry.csv");
        out << "drug_id,name,smiles,cid,atc3,substructure_ids\n";
        for (const auto& e : registry.entries()) {
            out << e.drug_id << ',' << e.name << ',' << e.smiles << ',' << e.cid << ',' << e.atc3
                << ',';
            for (std::size_t k = 0; k < e.substructures.size(); ++k) {
                if (k) out << ';';
                out << e.substructures[k];
            }
            out << '\n';
        }
    }
    {
        std::ofstream out(dir / "ddi_cid_pairs.csv");
        out << "cid_a,cid_b\n";
        for (auto [a, b] : cid_pairs) out << a << ',' << b << '\n';
    }
    {
        std::ofstream out(dir / "patients.jsonl");
        for (const auto& p : corpus.patients) {
            json jp;
            jp["pid"] = p.pid;
            jp["visits"] = json::array();
            for (const auto& v : p.visits)
                jp["visits"].push_back(
                    {{"dx", v.diagnoses}, {"px", v.procedures}, {"rx", v.medications}});
            out << jp.dump() << '\n';
        }
    }
}

}  // namespace mmm
