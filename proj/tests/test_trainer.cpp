#include "helpers.hpp"

#include <catch_amalgamated.hpp>

using namespace mmm;

namespace {

struct TrainFixture {
    CorpusBundle bundle;
    DrugFeatureSource src;
    ModelConfig cfg = test::tiny_config();
    HyperParams hp;

    TrainFixture() {
        auto spec = test::small_synth_spec(10, 21);
        auto r = synth_corpus(spec);
        bundle = test::bundle_from_synth(r);
        src = test::tiny_patch_source(bundle.registry.n_drugs());
        hp.epochs = 1;
        hp.seed = 9;
    }

    std::vector<long> all_pids() const {
        std::vector<long> pids;
        for (const auto& p : bundle.corpus.patients) pids.push_back(p.pid);
        return pids;
    }
};

}  // namespace

TEST_CASE("an empty patient list leaves parameters untouched") {
    TrainFixture f;
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
    std::uint64_t before = checksum_params(params);
    ModelParams grads = zero_like(params);
    Adam adam(params, f.hp.lr);
    EpochStats stats =
        train_epoch(f.bundle, {}, params, adam, f.cfg, f.hp, Ablation::none, f.src, grads);
    CHECK(stats.visits == 0);
    CHECK(checksum_params(params) == before);
}

TEST_CASE("one epoch moves parameters and keeps the loss finite") {
    TrainFixture f;
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
    std::uint64_t before = checksum_params(params);
    ModelParams grads = zero_like(params);
    Adam adam(params, f.hp.lr);
    EpochStats stats =
        train_epoch(f.bundle, f.all_pids(), params, adam, f.cfg, f.hp, Ablation::none, f.src, grads);
    CHECK(stats.visits > 0);
    CHECK(std::isfinite(stats.mean_total()));
    CHECK(checksum_params(params) != before);
}

TEST_CASE("training is bit-stable under a fixed seed") {
    TrainFixture f;
    auto run = [&]() {
        ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
        ModelParams grads = zero_like(params);
        Adam adam(params, f.hp.lr);
        std::vector<double> losses;
        for (int e = 0; e < 2; ++e) {
            EpochStats s = train_epoch(f.bundle, f.all_pids(), params, adam, f.cfg, f.hp,
                                       Ablation::none, f.src, grads);
            losses.push_back(s.mean_total());
        }
        return std::pair{checksum_params(params), losses};
    };
    auto [ck1, losses1] = run();
    auto [ck2, losses2] = run();
    CHECK(ck1 == ck2);
    CHECK(losses1 == losses2);
}

TEST_CASE("non-finite parameters abort with the offending visit") {
    TrainFixture f;
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
    params.bipartite.drug_b(0) = std::numeric_limits<double>::quiet_NaN();
    ModelParams grads = zero_like(params);
    Adam adam(params, f.hp.lr);
    CHECK_THROWS_AS(train_epoch(f.bundle, f.all_pids(), params, adam, f.cfg, f.hp, Ablation::none,
                                f.src, grads),
                    NumericError);
}

TEST_CASE("dropping the volume branch freezes extractor parameters") {
    TrainFixture f;
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
    std::uint64_t cnn_before = checksum_params(params, "elf.cnn");
    std::uint64_t mlp_before = checksum_params(params, "elf.mlp");
    std::uint64_t bi_before = checksum_params(params, "bipartite.");
    ModelParams grads = zero_like(params);
    Adam adam(params, f.hp.lr);
    train_epoch(f.bundle, f.all_pids(), params, adam, f.cfg, f.hp, Ablation::drop_elf, f.src, grads);
    CHECK(checksum_params(params, "elf.cnn") == cnn_before);
    CHECK(checksum_params(params, "elf.mlp") == mlp_before);
    CHECK(checksum_params(params, "bipartite.") != bi_before);
}

TEST_CASE("dropping the substructure branch freezes its parameters") {
    TrainFixture f;
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
    std::uint64_t bi_before = checksum_params(params, "bipartite.");
    std::uint64_t cnn_before = checksum_params(params, "elf.cnn");
    ModelParams grads = zero_like(params);
    Adam adam(params, f.hp.lr);
    train_epoch(f.bundle, f.all_pids(), params, adam, f.cfg, f.hp, Ablation::drop_bipartite, f.src,
                grads);
    CHECK(checksum_params(params, "bipartite.") == bi_before);
    CHECK(checksum_params(params, "elf.cnn") != cnn_before);
}

TEST_CASE("fit keeps the epoch with the lowest validation ddi rate") {
    TrainFixture f;
    f.hp.epochs = 4;
    SplitSpec split = stratified_split(f.bundle.corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, f.hp.seed);
    FitResult res = fit(f.bundle, split, f.cfg, f.hp, Ablation::none, f.src);
    REQUIRE(res.log.size() == 4);
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    for (const auto& row : res.log)
        if (row.val_ddi < best) {
            best = row.val_ddi;
            best_epoch = row.epoch;  // strict <, so ties keep the earlier epoch
        }
    CHECK(res.best.best_epoch == best_epoch);
    CHECK(res.best_val_ddi == best);
    for (const auto& row : res.log) CHECK(res.best_val_ddi <= row.val_ddi);
}

TEST_CASE("a single-epoch fit returns that epoch") {
    TrainFixture f;
    SplitSpec split = stratified_split(f.bundle.corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, f.hp.seed);
    FitResult res = fit(f.bundle, split, f.cfg, f.hp, Ablation::none, f.src);
    CHECK(res.best.best_epoch == 0);
    CHECK(res.log.size() == 1);
}

TEST_CASE("adam with zero gradients is a no-op") {
    TrainFixture f;
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, 3);
    std::uint64_t before = checksum_params(params);
    ModelParams grads = zero_like(params);
    Adam adam(params, 1e-3);
    for (int i = 0; i < 5; ++i) adam.step(params, grads);
    CHECK(checksum_params(params) == before);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    TrainFixture f;
    test::TempDir dir("ckpt");
    SplitSpec split = stratified_split(f.bundle.corpus, {2.0 / 3, 1.0 / 6, 1.0 / 6}, f.hp.seed);
    FitResult res = fit(f.bundle, split, f.cfg, f.hp, Ablation::drop_bipartite, f.src);
    write_checkpoint(dir.path / "m.ckpt", res.best);
    Checkpoint back = read_checkpoint(dir.path / "m.ckpt");
    CHECK(back.ablation == Ablation::drop_bipartite);
    CHECK(back.hyper.seed == f.hp.seed);
    CHECK(back.config.patch_size == f.cfg.patch_size);
    CHECK(checksum_params(back.params) == checksum_params(res.best.params));
    // writing again is byte-identical
    write_checkpoint(dir.path / "m2.ckpt", back);
    std::ifstream a(dir.path / "m.ckpt"), b(dir.path / "m2.ckpt");
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("frozen feature rows bypass the extractor entirely") {
    TrainFixture f;
    DrugFeatureSource frozen;
    frozen.frozen = true;
    frozen.fixed_C = Mat::Random(f.bundle.registry.n_drugs(), f.cfg.feat_dim);
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
    std::uint64_t cnn_before = checksum_params(params, "elf.cnn");
    ModelParams grads = zero_like(params);
    Adam adam(params, f.hp.lr);
    std::uint64_t mlp_before = checksum_params(params, "elf.mlp");
    train_epoch(f.bundle, f.all_pids(), params, adam, f.cfg, f.hp, Ablation::none, frozen, grads);
    CHECK(checksum_params(params, "elf.cnn") == cnn_before);  // no gradient reaches it
    CHECK(checksum_params(params, "elf.mlp") != mlp_before);
}

TEST_CASE("the config freeze flag pins the extractor during training") {
    TrainFixture f;
    f.cfg.freeze_cnn = true;
    ModelParams params = init_params(f.cfg, f.bundle.corpus.vocab, f.hp.seed);
    std::uint64_t cnn_before = checksum_params(params, "elf.cnn");
    ModelParams grads = zero_like(params);
    Adam adam(params, f.hp.lr);
    train_epoch(f.bundle, f.all_pids(), params, adam, f.cfg, f.hp, Ablation::none, f.src, grads);
    CHECK(checksum_params(params, "elf.cnn") == cnn_before);
}
