#include "helpers.hpp"

#include <catch_amalgamated.hpp>

using namespace mmm;

namespace {

BipartiteParams random_bipartite(std::uint64_t seed) {
    return init_params(test::tiny_config(), {10, 10, 5, 7}, seed).bipartite;
}

}  // namespace

TEST_CASE("zero parameters give uniform substructure importance") {
    BipartiteParams p = random_bipartite(1);
    p.sub_W.setZero();
    p.sub_b.setZero();
    CHECK(substructure_importance(Vec::Random(8), p) == 0.5 * Vec::Ones(7));
}

TEST_CASE("importance stays inside (0,1)") {
    BipartiteParams p = random_bipartite(2);
    for (int k = 0; k < 20; ++k) {
        Vec m_s = substructure_importance(5.0 * Vec::Random(8), p);
        for (Eigen::Index j = 0; j < m_s.size(); ++j) {
            CHECK(m_s(j) > 0.0);
            CHECK(m_s(j) < 1.0);
        }
    }
}

TEST_CASE("a fully masked drug scores exactly its bias") {
    CorpusBundle b = test::tiny_bundle();  // drug 3 has no substructures
    BipartiteParams p = random_bipartite(3);
    Vec m_s = substructure_importance(Vec::Random(8), p);
    Vec m_l = local_drug_vector(m_s, p, b.mask);
    CHECK(m_l(3) == p.drug_b(3));
}

TEST_CASE("an all-ones mask reduces to the dense product") {
    std::vector<DrugRegistryEntry> entries;
    for (int i = 0; i < 5; ++i) {
        DrugRegistryEntry e;
        e.drug_id = i;
        e.name = "d";
        e.smiles = "C";
        e.cid = i;
        e.atc3 = "A01";
        for (int j = 0; j < 7; ++j) e.substructures.push_back(j);
        entries.push_back(e);
    }
    MaskMatrix mask{DrugRegistry(std::move(entries), 7)};
    BipartiteParams p = random_bipartite(4);
    Vec m_s = Vec::Random(7).cwiseAbs();
    Vec expect = p.drug_sub_W * m_s + p.drug_b;
    Vec got = local_drug_vector(m_s, p, mask);
    CHECK((got - expect).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("masked product equals the dense brute-force oracle") {
    CorpusBundle b = test::tiny_bundle();
    BipartiteParams p = random_bipartite(5);
    Vec m_s = Vec::Random(7);
    Mat masked = p.drug_sub_W.cwiseProduct(b.mask.dense());
    Vec expect = masked * m_s + p.drug_b;
    Vec got = local_drug_vector(m_s, p, b.mask);
    CHECK((got - expect).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("weights at masked-out positions never reach the output") {
    CorpusBundle b = test::tiny_bundle();
    BipartiteParams p = random_bipartite(6);
    Vec m_s = substructure_importance(Vec::Random(8), p);
    Vec base = local_drug_vector(m_s, p, b.mask);
    Rng rng(17);
    int perturbed = 0;
    for (int round = 0; round < 100; ++round) {
        BipartiteParams q = p;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 7; ++j)
                if (!b.mask.contains(i, j) && rng.uniform() < 0.5) {
                    q.drug_sub_W(i, j) = rng.uniform(-100.0, 100.0);
                    ++perturbed;
                }
        Vec out = local_drug_vector(m_s, q, b.mask);
        REQUIRE(std::memcmp(out.data(), base.data(), sizeof(double) * 5) == 0);
    }
    CHECK(perturbed > 100);
}

TEST_CASE("outputs only depend on a drug's own substructures") {
    CorpusBundle b = test::tiny_bundle();
    BipartiteParams p = random_bipartite(7);
    Vec m_s = substructure_importance(Vec::Random(8), p);
    Vec base = local_drug_vector(m_s, p, b.mask);
    // drug 0 holds substructures {0,2}; nudging any other channel is inert
    for (int j : {1, 3, 4, 5, 6}) {
        Vec m_s2 = m_s;
        m_s2(j) += 0.123;
        Vec out = local_drug_vector(m_s2, p, b.mask);
        CHECK(out(0) == base(0));
    }
    Vec m_s3 = m_s;
    m_s3(2) += 0.123;
    CHECK(local_drug_vector(m_s3, p, b.mask)(0) != base(0));
}

TEST_CASE("different patient states give different importance vectors") {
    BipartiteParams p = random_bipartite(8);
    Vec h1 = Vec::Random(8), h2 = Vec::Random(8);
    Vec s1 = substructure_importance(h1, p);
    Vec s2 = substructure_importance(h2, p);
    CHECK((s1 - s2).norm() > 1e-12);
}

TEST_CASE("bipartite gradients match central differences") {
    CorpusBundle b = test::tiny_bundle();
    BipartiteParams p = random_bipartite(9);
    Vec h = Vec::Random(8);
    Rng rng(3);
    Vec probe(5);
    for (int i = 0; i < 5; ++i) probe(i) = rng.uniform(-1.0, 1.0);

    auto loss = [&](const BipartiteParams& q) {
        return probe.dot(local_drug_vector(substructure_importance(h, q), q, b.mask));
    };
    Vec m_s = substructure_importance(h, p);
    BipartiteParams grads = p;
    grads.sub_W.setZero();
    grads.sub_b.setZero();
    grads.drug_sub_W.setZero();
    grads.drug_b.setZero();
    Vec dh = Vec::Zero(8);
    bipartite_backward(h, m_s, p, b.mask, probe, dh, grads);

    const double eps = 1e-6;
    auto check_block = [&](Mat& param, const Mat& grad) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            double orig = param.data()[i];
            param.data()[i] = orig + eps;
            double lp = loss(p);
            param.data()[i] = orig - eps;
            double lm = loss(p);
            param.data()[i] = orig;
            double num = (lp - lm) / (2 * eps);
            double ana = grad.data()[i];
            if (std::abs(num) + std::abs(ana) < 1e-12) continue;  // masked-out weight
            CHECK(std::abs(num - ana) / std::max(1e-6, std::abs(num) + std::abs(ana)) < 1e-4);
        }
    };
    check_block(p.sub_W, grads.sub_W);
    check_block(p.drug_sub_W, grads.drug_sub_W);
    // and the patient-state gradient
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        double orig = h(i);
        h(i) = orig + eps;
        double lp = loss(p);
        h(i) = orig - eps;
        double lm = loss(p);
        h(i) = orig;
        double num = (lp - lm) / (2 * eps);
        CHECK(std::abs(num - dh(i)) / std::max(1e-6, std::abs(num) + std::abs(dh(i))) < 1e-4);
    }
}
