// Command-line entry point: corpus synthesis, feature extraction,
// training, evaluation, model comparison, case studies and ablations.

#include "mmm/mmm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

using namespace mmm;

struct CommonOpts {
    std::string data_dir;
    std::string out_dir;
    std::string config_file;
    std::uint64_t seed = 1;
    ModelConfig cfg;
    HyperParams hp;
};

void apply_config_file(CommonOpts& o) {
    if (o.config_file.empty()) return;
    std::ifstream in(o.config_file);
    if (!in) throw LoadError("cannot open config file " + o.config_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto pos = s.find('=');
        if (pos == std::string::npos)
            throw ValidationError(o.config_file + " line " + std::to_string(lineno) +
                                  ": expected key=value");
        std::string key = trim(s.substr(0, pos));
        std::string val = trim(s.substr(pos + 1));
        if (key == "emb_dim") o.cfg.emb_dim = static_cast<int>(parse_long(val));
        else if (key == "dim") o.cfg.dim = static_cast<int>(parse_long(val));
        else if (key == "feat_dim") o.cfg.feat_dim = static_cast<int>(parse_long(val));
        else if (key == "cnn_c1") o.cfg.cnn_c1 = static_cast<int>(parse_long(val));
        else if (key == "cnn_c2") o.cfg.cnn_c2 = static_cast<int>(parse_long(val));
        else if (key == "mlp_hidden") o.cfg.mlp_hidden = static_cast<int>(parse_long(val));
        else if (key == "patch_size") o.cfg.patch_size = static_cast<int>(parse_long(val));
        else if (key == "freeze_cnn") o.cfg.freeze_cnn = parse_long(val) != 0;
        else if (key == "alpha") o.hp.alpha = parse_double(val);
        else if (key == "beta") o.hp.beta = parse_double(val);
        else if (key == "lr") o.hp.lr = parse_double(val);
        else if (key == "epochs") o.hp.epochs = static_cast<int>(parse_long(val));
        else if (key == "threshold") o.hp.threshold = parse_double(val);
        else if (key == "seed") o.hp.seed = static_cast<std::uint64_t>(parse_long(val));
        else throw ValidationError(o.config_file + ": unknown key '" + key + "'");
    }
}

GridDims parse_elf_dims(const std::string& s) {
    auto f = split(s, ',');
    if (f.size() != 3) throw ValidationError("--elf-dims expects nx,ny,nz");
    GridDims g;
    g.nx = static_cast<int>(parse_long(trim(f[0])));
    g.ny = static_cast<int>(parse_long(trim(f[1])));
    g.nz = static_cast<int>(parse_long(trim(f[2])));
    g.validate();
    return g;
}

SplitSpec default_split(const EhrCorpus& corpus, std::uint64_t seed) {
    return stratified_split(corpus, {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, seed);
}

const std::vector<long>& pick_split(const SplitSpec& split, const std::string& name) {
    if (name == "train") return split.train;
    if (name == "val") return split.val;
    if (name == "test") return split.test;
    throw ValidationError("unknown split '" + name + "'");
}

void write_metrics_csv(const std::filesystem::path& path, const SplitEval& ev) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "pid,visit,ddi_rate,jaccard,f1,n_drugs\n";
    for (const auto& vm : ev.visits)
        out << vm.pid << ',' << vm.visit << ',' << format_double(vm.ddi) << ','
            << format_double(vm.jaccard) << ',' << format_double(vm.f1) << ',' << vm.n_drugs << '\n';
}

int run_synth(const CommonOpts& o, int n_patients, const SynthTargets& targets,
              const GridDims& grid) {
    SynthSpec spec{n_patients, o.seed, targets};
    SynthCorpusResult r = synth_corpus(spec);
    write_corpus(o.out_dir, r.corpus, r.registry, r.cid_pairs);
    std::filesystem::create_directories(std::filesystem::path(o.out_dir) / "elf");
    for (int i = 0; i < r.registry.n_drugs(); ++i) {
        ElfVolume vol = synth_elf(i, o.seed, grid);
        write_elfv(std::filesystem::path(o.out_dir) / "elf" / (std::to_string(i) + ".elfv"), vol);
    }
    std::cout << "wrote corpus: " << r.corpus.patients.size() << " patients, "
              << r.corpus.n_visits() << " visits, " << r.registry.n_drugs() << " drugs, "
              << r.registry.n_substructures() << " substructures\n";
    return 0;
}

int run_featurize(CommonOpts& o) {
    CorpusBundle bundle = load_corpus(o.data_dir);
    auto patch_sets = load_patch_sets(o.data_dir, bundle.registry.n_drugs(), o.cfg.patch_size);
    // A seeded, never-trained CNN acting as the fixed feature extractor.
    ModelParams params = init_params(o.cfg, bundle.corpus.vocab, o.seed);
    Mat C(bundle.registry.n_drugs(), o.cfg.feat_dim);
    for (int i = 0; i < bundle.registry.n_drugs(); ++i)
        C.row(i) = encode_drug(patch_sets[static_cast<std::size_t>(i)], params.elf.cnn, nullptr);
    write_drug_features(std::filesystem::path(o.data_dir) / "drug_features.csv", C);
    std::cout << "wrote drug_features.csv (" << C.rows() << " x " << C.cols() << ")\n";
    return 0;
}

int run_train(CommonOpts& o, Ablation ablation) {
    std::filesystem::create_directories(o.out_dir);
    CorpusBundle bundle = load_corpus(o.data_dir);
    DrugFeatureSource src = load_feature_source(o.data_dir, bundle, o.cfg);
    SplitSpec split = default_split(bundle.corpus, o.hp.seed);
    FitResult result = fit(bundle, split, o.cfg, o.hp, ablation, src);
    write_checkpoint(std::filesystem::path(o.out_dir) / "model.ckpt", result.best);
    write_train_log(std::filesystem::path(o.out_dir) / "train_log.csv", result.log);
    std::cout << "best epoch " << result.best.best_epoch << " with validation ddi rate "
              << format_double(result.best_val_ddi) << '\n';
    return 0;
}

struct LoadedModel {
    Checkpoint ck;
    DrugFeatureSource src;
};

LoadedModel load_model(const std::string& path, const CorpusBundle& bundle,
                       const std::string& data_dir) {
    LoadedModel m;
    m.ck = read_checkpoint(path);
    const auto& v = bundle.corpus.vocab;
    if (m.ck.vocab.n_dx != v.n_dx || m.ck.vocab.n_px != v.n_px || m.ck.vocab.n_drugs != v.n_drugs ||
        m.ck.vocab.n_substructures != v.n_substructures)
        throw ValidationError("checkpoint " + path + " was trained on a different vocabulary");
    if (m.ck.ablation != Ablation::drop_elf) {
        m.src = load_feature_source(data_dir, bundle, m.ck.config);
        if (m.ck.frozen_features != m.src.frozen)
            throw ValidationError("checkpoint " + path + " expects " +
                                  std::string(m.ck.frozen_features ? "frozen" : "cnn") +
                                  " drug features but the data directory provides the other kind");
    }
    return m;
}

int run_eval(CommonOpts& o, const std::string& model_path, const std::string& split_name) {
    std::filesystem::create_directories(o.out_dir);
    CorpusBundle bundle = load_corpus(o.data_dir);
    LoadedModel m = load_model(model_path, bundle, o.data_dir);
    SplitSpec split = default_split(bundle.corpus, m.ck.hyper.seed);
    ModelContext ctx{m.ck.params, m.ck.config, m.ck.hyper.threshold, m.ck.ablation, m.src,
                     bundle.mask};
    SplitEval ev = evaluate_split(bundle, pick_split(split, split_name), ctx);
    write_metrics_csv(std::filesystem::path(o.out_dir) / "metrics.csv", ev);
    nlohmann::json summary = {
        {"split", split_name},
        {"split_seed", m.ck.hyper.seed},
        {"n_visits", ev.visits.size()},
        {"ddi_rate", ev.mean_ddi},
        {"jaccard", ev.mean_jaccard},
        {"f1", ev.mean_f1},
        {"avg_drugs", ev.mean_drugs},
        {"ablation", to_string(m.ck.ablation)},
        {"best_epoch", m.ck.best_epoch},
    };
    std::ofstream(std::filesystem::path(o.out_dir) / "summary.json") << summary.dump(2) << '\n';
    std::cout << "split " << split_name << ": ddi_rate " << format_double(ev.mean_ddi)
              << "  jaccard " << format_double(ev.mean_jaccard) << "  f1 "
              << format_double(ev.mean_f1) << "  avg_drugs " << format_double(ev.mean_drugs)
              << '\n';
    return 0;
}

int run_compare(CommonOpts& o, const std::string& path_a, const std::string& path_b, int repeats) {
    std::filesystem::create_directories(o.out_dir);
    CorpusBundle bundle = load_corpus(o.data_dir);
    LoadedModel a = load_model(path_a, bundle, o.data_dir);
    LoadedModel b = load_model(path_b, bundle, o.data_dir);
    SplitSpec split = default_split(bundle.corpus, a.ck.hyper.seed);
    ModelContext ctx_a{a.ck.params, a.ck.config, a.ck.hyper.threshold, a.ck.ablation, a.src,
                       bundle.mask};
    ModelContext ctx_b{b.ck.params, b.ck.config, b.ck.hyper.threshold, b.ck.ablation, b.src,
                       bundle.mask};
    CompareResult cmp = bootstrap_compare(bundle, split.test, ctx_a, ctx_b, repeats, o.seed);
    nlohmann::json jm = nlohmann::json::array();
    for (const auto& s : cmp.metrics) {
        jm.push_back({{"metric", s.name},
                      {"model_a_mean", s.mean_a},
                      {"model_a_std", s.std_a},
                      {"model_b_mean", s.mean_b},
                      {"model_b_std", s.std_b},
                      {"t", std::isfinite(s.test.t) ? s.test.t : 1e308},
                      {"p", s.test.p},
                      {"zero_variance", s.test.degenerate}});
        bool warn = s.test.degenerate && s.test.p == 0.0;
        std::cout << s.name << ": A " << format_double(s.mean_a) << " +- " << format_double(s.std_a)
                  << "  B " << format_double(s.mean_b) << " +- " << format_double(s.std_b)
                  << "  p " << format_double(s.test.p)
                  << (warn ? "  (warning: zero-variance nonzero diffs)" : "") << '\n';
    }
    nlohmann::json summary = {{"repeats", cmp.repeats},
                              {"base_seed", o.seed},
                              {"repeat_seeds", cmp.repeat_seeds},
                              {"split_seed", a.ck.hyper.seed},
                              {"metrics", jm}};
    std::ofstream(std::filesystem::path(o.out_dir) / "summary.json") << summary.dump(2) << '\n';
    return 0;
}

int run_case_study(CommonOpts& o, const std::string& model_path, long pid) {
    CorpusBundle bundle = load_corpus(o.data_dir);
    LoadedModel m = load_model(model_path, bundle, o.data_dir);
    ModelContext ctx{m.ck.params, m.ck.config, m.ck.hyper.threshold, m.ck.ablation, m.src,
                     bundle.mask};
    std::string report = case_study_report(bundle, ctx, pid);
    std::cout << report;
    if (!o.out_dir.empty()) {
        std::filesystem::create_directories(o.out_dir);
        std::ofstream(std::filesystem::path(o.out_dir) / "case_study.txt") << report;
    }
    return 0;
}

int run_ablate(CommonOpts& o) {
    std::filesystem::create_directories(o.out_dir);
    CorpusBundle bundle = load_corpus(o.data_dir);
    DrugFeatureSource src = load_feature_source(o.data_dir, bundle, o.cfg);
    SplitSpec split = default_split(bundle.corpus, o.hp.seed);

    struct Row {
        const char* label;
        Ablation ablation;
        SplitEval ev;
        int best_epoch;
    };
    std::vector<Row> rows;
    for (auto [label, ab] : {std::pair<const char*, Ablation>{"full", Ablation::none},
                             {"wo_elf", Ablation::drop_elf},
                             {"wo_bipartite", Ablation::drop_bipartite}}) {
        FitResult r = fit(bundle, split, o.cfg, o.hp, ab, src);
        ModelContext ctx{r.best.params, o.cfg, o.hp.threshold, ab, src, bundle.mask};
        rows.push_back({label, ab, evaluate_split(bundle, split.test, ctx), r.best.best_epoch});
        write_checkpoint(std::filesystem::path(o.out_dir) / (std::string(label) + ".ckpt"), r.best);
    }
    std::ofstream csv(std::filesystem::path(o.out_dir) / "ablation.csv");
    csv << "model,ddi_rate,jaccard,f1,avg_drugs,best_epoch\n";
    std::cout << "model,ddi_rate,jaccard,f1,avg_drugs\n";
    for (const auto& r : rows) {
        csv << r.label << ',' << format_double(r.ev.mean_ddi) << ','
            << format_double(r.ev.mean_jaccard) << ',' << format_double(r.ev.mean_f1) << ','
            << format_double(r.ev.mean_drugs) << ',' << r.best_epoch << '\n';
        std::cout << r.label << ',' << format_double(r.ev.mean_ddi) << ','
                  << format_double(r.ev.mean_jaccard) << ',' << format_double(r.ev.mean_f1) << ','
                  << format_double(r.ev.mean_drugs) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal medication recommender over EHR sequences and ELF drug volumes"};
    app.require_subcommand(1);

    CommonOpts o;
    int n_patients = 600;
    SynthTargets targets;
    std::string elf_dims = "64,64,8";
    std::string model_path, model_path_b, split_name = "test", drop;
    int repeats = 10;
    long pid = 0;

    bool seed_given = false;
    auto add_common = [&](CLI::App* cmd, bool needs_data, bool needs_out) {
        if (needs_data) cmd->add_option("--data", o.data_dir, "corpus directory")->required();
        if (needs_out) cmd->add_option("--out", o.out_dir, "output directory")->required();
        cmd->add_option("--seed", o.seed, "seed for this command")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--config", o.config_file, "key=value config file");
    };
    auto add_hyper = [&](CLI::App* cmd) {
        cmd->add_option("--epochs", o.hp.epochs, "training epochs");
        cmd->add_option("--alpha", o.hp.alpha, "bce weight inside the accuracy term");
        cmd->add_option("--beta", o.hp.beta, "accuracy term weight vs interaction term");
        cmd->add_option("--threshold", o.hp.threshold, "prescription probability cut");
        cmd->add_option("--drop", drop, "ablation: elf or bipartite");
        cmd->add_flag("--freeze-cnn", o.cfg.freeze_cnn, "do not update the CNN during training");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with ELF volumes");
    add_common(synth, false, true);
    synth->add_option("--patients", n_patients, "number of patients");
    synth->add_option("--drugs", targets.n_drugs, "drug vocabulary size");
    synth->add_option("--substructures", targets.n_substructures, "substructure vocabulary size");
    synth->add_option("--ddi-pairs", targets.ddi_pairs, "exact interacting pair count");
    synth->add_option("--dx-vocab", targets.n_dx, "diagnosis vocabulary size");
    synth->add_option("--px-vocab", targets.n_px, "procedure vocabulary size");
    synth->add_option("--mean-visits", targets.mean_visits, "target mean visits per patient");
    synth->add_option("--mean-dx", targets.mean_dx, "target mean diagnoses per visit");
    synth->add_option("--mean-px", targets.mean_px, "target mean procedures per visit");
    synth->add_option("--mean-meds", targets.mean_meds, "target mean medications per visit");
    synth->add_option("--elf-dims", elf_dims, "volume grid as nx,ny,nz");

    auto* featurize = app.add_subcommand("featurize", "extract fixed drug features from volumes");
    add_common(featurize, true, false);

    auto* train = app.add_subcommand("train", "train a model and keep the lowest-DDI checkpoint");
    add_common(train, true, true);
    add_hyper(train);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
    add_common(eval, true, true);
    eval->add_option("--model", model_path, "checkpoint file")->required();
    eval->add_option("--split", split_name, "train, val or test");

    auto* compare = app.add_subcommand("compare", "bootstrap paired comparison of two checkpoints");
    add_common(compare, true, true);
    compare->add_option("--model-a", model_path, "first checkpoint")->required();
    compare->add_option("--model-b", model_path_b, "second checkpoint")->required();
    compare->add_option("--repeats", repeats, "bootstrap repeats");

    auto* cs = app.add_subcommand("case-study", "per-patient prescription safety report");
    add_common(cs, true, false);
    cs->add_option("--out", o.out_dir, "optional output directory");
    cs->add_option("--model", model_path, "checkpoint file")->required();
    cs->add_option("--patient", pid, "patient id")->required();

    auto* ablate = app.add_subcommand("ablate", "train full and single-branch models, emit a table");
    add_common(ablate, true, true);
    add_hyper(ablate);

    CLI11_PARSE(app, argc, argv);

    try {
        apply_config_file(o);
        if (seed_given)
            o.hp.seed = o.seed;  // explicit flag wins over the config file
        else
            o.seed = o.hp.seed;
        if (synth->parsed()) {
            if (n_patients < 1) throw ValidationError("--patients must be >= 1");
            return run_synth(o, n_patients, targets, parse_elf_dims(elf_dims));
        }
        if (featurize->parsed()) return run_featurize(o);
        if (train->parsed())
            return run_train(o, drop.empty() ? Ablation::none : ablation_from_string(drop));
        if (eval->parsed()) return run_eval(o, model_path, split_name);
        if (compare->parsed()) return run_compare(o, model_path, model_path_b, repeats);
        if (cs->parsed()) return run_case_study(o, model_path, pid);
        if (ablate->parsed()) {
            if (!drop.empty()) throw ValidationError("ablate runs every branch; --drop is fixed");
            return run_ablate(o);
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
