#include "helpers.hpp"

#include <catch_amalgamated.hpp>

#include <set>

using namespace mmm;

namespace {

// Exhaustive pair enumeration oracle at the CID level.
double ddi_rate_oracle(const std::vector<int>& pred, const DrugRegistry& reg,
                       const std::vector<std::pair<long, long>>& pairs) {
    std::set<long> cids;
    for (int d : pred) cids.insert(reg.cid_of(d));
    if (cids.size() < 2) return 0.0;
    std::set<std::uint64_t> pair_set;
    for (auto [a, b] : pairs) pair_set.insert(cid_pair_key(a, b));
    std::vector<long> c(cids.begin(), cids.end());
    double hits = 0, total = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            total += 1;
            if (pair_set.count(cid_pair_key(c[i], c[j]))) hits += 1;
        }
    return hits / total;
}

struct EvalFixture {
    CorpusBundle bundle;
    DrugFeatureSource src;
    ModelConfig cfg = test::tiny_config();
    ModelParams params;
    HyperParams hp;

    EvalFixture() : bundle(test::tiny_bundle()) {
        src = test::tiny_patch_source(5);
        params = init_params(cfg, bundle.corpus.vocab, 31);
        hp.seed = 31;
    }
    ModelContext ctx() const {
        return ModelContext{params, cfg, hp.threshold, Ablation::none, src, bundle.mask};
    }
};

}  // namespace

TEST_CASE("ddi rate enumerates unordered cid pairs") {
    DrugRegistry reg = test::tiny_registry();
    DdiMatrix ddi(reg, {{100, 101}});
    // drugs 0,1,2 -> cids 100,101,102; one of three pairs interacts
    CHECK(ddi_rate({0, 1, 2}, reg, ddi) == Catch::Approx(1.0 / 3.0));
    CHECK(ddi_rate({0}, reg, ddi) == 0.0);
    CHECK(ddi_rate({}, reg, ddi) == 0.0);
    CHECK(ddi_rate({0, 1}, reg, ddi) == 1.0);
}

TEST_CASE("ddi rate matches brute force on random sets") {
    DrugRegistry reg = test::tiny_registry();
    auto pairs = test::tiny_cid_pairs();
    DdiMatrix ddi(reg, pairs);
    Rng rng(12);
    for (int round = 0; round < 200; ++round) {
        std::vector<int> pred;
        for (int d = 0; d < 5; ++d)
            if (rng.uniform() < 0.5) pred.push_back(d);
        CHECK(ddi_rate(pred, reg, ddi) == ddi_rate_oracle(pred, reg, pairs));
    }
}

TEST_CASE("ddi rate deduplicates drugs sharing a cid") {
    std::vector<DrugRegistryEntry> entries;
    for (int i = 0; i < 4; ++i) {
        DrugRegistryEntry e;
        e.drug_id = i;
        e.name = "d";
        e.smiles = "C";
        e.cid = (i < 2) ? 700 : 800 + i;
        e.atc3 = "X01";
        entries.push_back(e);
    }
    DrugRegistry reg(std::move(entries), 2);
    DdiMatrix ddi(reg, {{700, 802}});
    // drugs 0 and 1 are one compound; {0,1,2} has cids {700,802} = 1 pair
    CHECK(ddi_rate({0, 1, 2}, reg, ddi) == 1.0);
    CHECK(ddi_rate({0, 1}, reg, ddi) == 0.0);  // a single unique cid
}

TEST_CASE("therapeutic metrics work at the atc3 level") {
    DrugRegistry reg = test::tiny_registry();  // atc: N02 C07 A02 B01 B01
    SECTION("hand instance") {
        // P -> {N02, C07}, T -> {C07, A02}
        CHECK(jaccard_atc3({0, 1}, {1, 2}, reg) == Catch::Approx(1.0 / 3.0));
        CHECK(f1_atc3({0, 1}, {1, 2}, reg) == Catch::Approx(0.5));
    }
    SECTION("identity") {
        CHECK(jaccard_atc3({0, 2, 3}, {0, 2, 3}, reg) == 1.0);
        CHECK(f1_atc3({0, 2, 3}, {0, 2, 3}, reg) == 1.0);
    }
    SECTION("therapeutic alternative gets full credit") {
        // drugs 3 and 4 share B01: predicting the alternative is exact
        CHECK(jaccard_atc3({3}, {4}, reg) == 1.0);
        CHECK(f1_atc3({3}, {4}, reg) == 1.0);
    }
    SECTION("empty prediction scores zero") {
        CHECK(jaccard_atc3({}, {1}, reg) == 0.0);
        CHECK(f1_atc3({}, {1}, reg) == 0.0);
    }
    SECTION("empty truth is rejected") {
        CHECK_THROWS_AS(jaccard_atc3({1}, {}, reg), ValidationError);
    }
    SECTION("symmetry") {
        for (auto [p, t] : {std::pair<std::vector<int>, std::vector<int>>{{0, 1}, {2, 3}},
                            {{0, 1, 2}, {3}},
                            {{2}, {2, 4}}}) {
            CHECK(jaccard_atc3(p, t, reg) == jaccard_atc3(t, p, reg));
            CHECK(f1_atc3(p, t, reg) == f1_atc3(t, p, reg));
        }
    }
}

TEST_CASE("metric bounds hold for random prediction/truth pairs") {
    DrugRegistry reg = test::tiny_registry();
    DdiMatrix ddi(reg, test::tiny_cid_pairs());
    Rng rng(77);
    for (int round = 0; round < 200; ++round) {
        std::vector<int> pred, truth;
        for (int d = 0; d < 5; ++d) {
            if (rng.uniform() < 0.5) pred.push_back(d);
            if (rng.uniform() < 0.5) truth.push_back(d);
        }
        if (truth.empty()) truth.push_back(static_cast<int>(rng.below(5)));
        double j = jaccard_atc3(pred, truth, reg);
        double f = f1_atc3(pred, truth, reg);
        double r = ddi_rate(pred, reg, ddi);
        CHECK((j >= 0.0 && j <= 1.0));
        CHECK((f >= 0.0 && f <= 1.0));
        CHECK((r >= 0.0 && r <= 1.0));
        CHECK(f >= j);  // dice dominates jaccard
    }
}

TEST_CASE("split evaluation means are plain visit averages") {
    EvalFixture f;
    SplitEval ev = evaluate_split(f.bundle, {0, 1}, f.ctx());
    REQUIRE(ev.visits.size() == 3);
    double j = 0, dd = 0, f1 = 0, nd = 0;
    for (const auto& vm : ev.visits) {
        j += vm.jaccard;
        dd += vm.ddi;
        f1 += vm.f1;
        nd += vm.n_drugs;
    }
    CHECK(ev.mean_jaccard == Catch::Approx(j / 3.0));
    CHECK(ev.mean_ddi == Catch::Approx(dd / 3.0));
    CHECK(ev.mean_f1 == Catch::Approx(f1 / 3.0));
    CHECK(ev.mean_drugs == Catch::Approx(nd / 3.0));
}

TEST_CASE("bootstrap comparison of a model with itself is flat") {
    EvalFixture f;
    CompareResult r = bootstrap_compare(f.bundle, {0, 1}, f.ctx(), f.ctx(), 5, 99);
    REQUIRE(r.metrics.size() == 4);
    for (const auto& m : r.metrics) {
        CHECK(m.test.p == 1.0);
        CHECK(m.mean_a == m.mean_b);
    }
    CHECK(r.repeat_seeds.size() == 5);
}

TEST_CASE("bootstrap comparison is deterministic under the seed") {
    EvalFixture f;
    CompareResult a = bootstrap_compare(f.bundle, {0, 1}, f.ctx(), f.ctx(), 4, 7);
    CompareResult b = bootstrap_compare(f.bundle, {0, 1}, f.ctx(), f.ctx(), 4, 7);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.metrics[i].mean_a == b.metrics[i].mean_a);
        CHECK(a.metrics[i].std_a == b.metrics[i].std_a);
    }
    CHECK(a.repeat_seeds == b.repeat_seeds);
}

TEST_CASE("case study reports flag interacting pairs in both columns") {
    EvalFixture f;
    // force the model to recommend everything so the known pairs show up
    f.params.bipartite.drug_b = 100.0 * Vec::Ones(5);
    f.params.elf.ln_bias = 100.0 * Vec::Ones(5);
    std::string report = case_study_report(f.bundle, f.ctx(), 0);
    CHECK(report.find("patient 0") != std::string::npos);
    CHECK(report.find("interacting pairs in prescribed set") != std::string::npos);
    CHECK(report.find("interacting pairs in recommended set") != std::string::npos);
    // truth of visit 2 is {1,3,4}: cids 101,103,104 -> pair (102,104) absent,
    // (100,101) absent; drug pair (2,4) interacts only if both present.
    // recommended set covers all drugs, so both known pairs are flagged.
    CHECK(report.find("drug0 x drug1") != std::string::npos);
    CHECK(report.find("drug2 x drug4") != std::string::npos);
    CHECK(report.find("ddi rate (recommended)") != std::string::npos);
    CHECK_THROWS_AS(case_study_report(f.bundle, f.ctx(), 42), ValidationError);
}

TEST_CASE("unresolvable drugs are an error") {
    DrugRegistry reg = test::tiny_registry();
    DdiMatrix ddi(reg, test::tiny_cid_pairs());
    CHECK_THROWS_AS(ddi_rate({0, 9}, reg, ddi), ValidationError);
    CHECK_THROWS_AS(jaccard_atc3({9}, {0}, reg), ValidationError);
}
