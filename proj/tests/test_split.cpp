#include "helpers.hpp"

#include <catch_amalgamated.hpp>

#include <set>

using namespace mmm;

namespace {

EhrCorpus corpus_with_patients(int n, std::uint64_t seed = 1) {
    auto spec = test::small_synth_spec(n, seed);
    return synth_corpus(spec).corpus;
}

}  // namespace

TEST_CASE("six patients split 4/1/1") {
    EhrCorpus corpus = corpus_with_patients(6);
    SplitSpec s = stratified_split(corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, 7);
    CHECK(s.train.size() == 4);
    CHECK(s.val.size() == 1);
    CHECK(s.test.size() == 1);
}

TEST_CASE("same inputs and seed give the identical split") {
    EhrCorpus corpus = corpus_with_patients(25);
    SplitSpec a = stratified_split(corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, 42);
    SplitSpec b = stratified_split(corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, 42);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
}

TEST_CASE("600 patients split 400/100/100") {
    EhrCorpus corpus;
    corpus.vocab = {5, 5, 3, 3};
    for (int i = 0; i < 600; ++i) {
        Patient p;
        p.pid = i;
        p.visits.push_back({{i % 5}, {}, {i % 3}});
        if (i % 4 == 0) p.visits.push_back({{(i + 1) % 5}, {}, {(i + 1) % 3, i % 3}});
        corpus.patients.push_back(std::move(p));
    }
    SplitSpec s = stratified_split(corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, 1);
    CHECK(s.train.size() == 400);
    CHECK(s.val.size() == 100);
    CHECK(s.test.size() == 100);
}

TEST_CASE("partitions are disjoint and cover all patients for any n >= 3") {
    for (int n : {3, 4, 5, 7, 11, 16, 23, 40}) {
        EhrCorpus corpus = corpus_with_patients(n, static_cast<std::uint64_t>(n));
        SplitSpec s = stratified_split(corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, 9);
        std::set<long> seen;
        for (const auto* part : {&s.train, &s.val, &s.test})
            for (long pid : *part) CHECK(seen.insert(pid).second);
        CHECK(seen.size() == static_cast<std::size_t>(n));
        // each bucket within one patient of its exact share
        auto nn = static_cast<double>(n);
        CHECK(std::abs(static_cast<double>(s.train.size()) - nn * 2 / 3) <= 1.0);
        CHECK(std::abs(static_cast<double>(s.val.size()) - nn / 6) <= 1.0);
        CHECK(std::abs(static_cast<double>(s.test.size()) - nn / 6) <= 1.0);
    }
}

TEST_CASE("fewer patients than strata is an error") {
    EhrCorpus corpus = corpus_with_patients(5);
    corpus.patients.resize(2);
    CHECK_THROWS_AS(stratified_split(corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, 1), ValidationError);
}

TEST_CASE("ratios must sum to one") {
    EhrCorpus corpus = corpus_with_patients(6);
    CHECK_THROWS_AS(stratified_split(corpus, {0.5, 0.2, 0.2}, 1), ValidationError);
}
