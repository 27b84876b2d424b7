#include "helpers.hpp"

#include <catch_amalgamated.hpp>

using namespace mmm;

namespace {

PatientEncoderParams random_encoder(int vocab, int emb, std::uint64_t seed) {
    ModelConfig cfg = test::tiny_config();
    cfg.emb_dim = emb;
    cfg.dim = emb;
    VocabSizes v{vocab, vocab, 5, 7};
    return init_params(cfg, v, seed).patient;
}

}  // namespace

TEST_CASE("embed_visit pools code rows") {
    Mat table(4, 3);
    table << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    SECTION("singleton is the row itself") {
        CHECK(embed_visit({2}, table) == Vec(table.row(2).transpose()));
    }
    SECTION("repeated code means to the same row") {
        CHECK(embed_visit({1, 1}, table) == Vec(table.row(1).transpose()));
    }
    SECTION("zero table embeds to zero") {
        CHECK(embed_visit({0, 3}, Mat::Zero(4, 3)) == Vec::Zero(3));
    }
    SECTION("mean of two rows") {
        Vec expect = 0.5 * (table.row(0) + table.row(3)).transpose();
        CHECK(embed_visit({0, 3}, table) == expect);
    }
    SECTION("empty code list embeds to zero") { CHECK(embed_visit({}, table) == Vec::Zero(3)); }
    SECTION("out-of-range code is an error") {
        CHECK_THROWS_AS(embed_visit({4}, table), ValidationError);
    }
}

TEST_CASE("zero parameters encode to the zero state") {
    PatientEncoderParams p = random_encoder(10, 8, 1);
    test::zero_patient_params(p);
    Vec h = encode_patient({{{1, 2}, {3}, {0}}}, 1, p, nullptr);
    CHECK(h == Vec::Zero(8));
}

TEST_CASE("a single visit equals one recurrent step from the zero state") {
    PatientEncoderParams p = random_encoder(10, 8, 2);
    std::vector<Visit> visits = {{{1, 4, 7}, {2}, {0}}};
    Vec h = encode_patient(visits, 1, p, nullptr);

    Vec x_dx = embed_visit(visits[0].diagnoses, p.E_dx);
    Vec x_px = embed_visit(visits[0].procedures, p.E_px);
    Vec r_dx = gru_step(p.gru_dx, x_dx, Vec::Zero(8), nullptr);
    Vec r_px = gru_step(p.gru_px, x_px, Vec::Zero(8), nullptr);
    Vec concat(16);
    concat << r_dx, r_px;
    Vec expect = (p.ff_W * concat + p.ff_b).array().tanh();
    CHECK(h == expect);
}

TEST_CASE("visit order changes the encoding") {
    PatientEncoderParams p = random_encoder(10, 8, 3);
    std::vector<Visit> ab = {{{1, 2}, {0}, {0}}, {{7, 8}, {5}, {0}}};
    std::vector<Visit> ba = {ab[1], ab[0]};
    Vec h_ab = encode_patient(ab, 2, p, nullptr);
    Vec h_ba = encode_patient(ba, 2, p, nullptr);
    CHECK((h_ab - h_ba).norm() > 1e-8);
}

TEST_CASE("state width is stable across history lengths up to 29") {
    PatientEncoderParams p = random_encoder(12, 8, 4);
    Rng rng(9);
    std::vector<Visit> visits;
    for (int t = 1; t <= 29; ++t) {
        Visit v;
        v.diagnoses = {static_cast<int>(rng.below(12))};
        v.procedures = {static_cast<int>(rng.below(12))};
        v.medications = {0};
        visits.push_back(v);
        Vec h = encode_patient(visits, static_cast<std::size_t>(t), p, nullptr);
        REQUIRE(h.size() == 8);
        CHECK(h.allFinite());
    }
    Vec h1 = encode_patient(visits, 29, p, nullptr);
    Vec h2 = encode_patient(visits, 29, p, nullptr);
    CHECK(h1 == h2);
}

TEST_CASE("empty visit history is rejected") {
    PatientEncoderParams p = random_encoder(10, 8, 5);
    CHECK_THROWS_AS(encode_patient({}, 0, p, nullptr), ValidationError);
    CHECK_THROWS_AS(encode_patient({}, 1, p, nullptr), ValidationError);
}

TEST_CASE("analytic head gradient matches central differences") {
    PatientEncoderParams p = random_encoder(10, 8, 6);
    std::vector<Visit> visits = {{{1, 3, 7}, {2}, {0}}, {{4}, {1, 5}, {0}}};
    Rng rng(13);
    Vec probe(8);
    for (int i = 0; i < 8; ++i) probe(i) = rng.uniform(-1.0, 1.0);

    auto loss = [&](const PatientEncoderParams& q) {
        return probe.dot(encode_patient(visits, 2, q, nullptr));
    };

    PatientEncodeCache cache;
    encode_patient(visits, 2, p, &cache);
    ModelConfig cfg = test::tiny_config();
    PatientEncoderParams grads = init_params(cfg, {10, 10, 5, 7}, 0).patient;
    test::zero_patient_params(grads);
    encode_patient_backward(p, cache, probe, grads);

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
            double rel = std::abs(num - ana) / std::max(1e-6, std::abs(num) + std::abs(ana));
            CHECK(rel < 1e-4);
        }
    };
    check_block(p.ff_W, grads.ff_W);
    check_block(p.gru_dx.Uc, grads.gru_dx.Uc);
    check_block(p.E_dx, grads.E_dx);
}
