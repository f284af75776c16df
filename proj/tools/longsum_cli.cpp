// Command-line front end for the summarization pipeline. Every
// training/evaluation subcommand is driven by a JSON run config; the
// pipeline subcommand runs all stages in dependency order.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "longsum/pipeline.hpp"

using namespace longsum;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> scale;
};

pipe::RunConfig load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) throw UsageError("missing --config");
    auto cfg = pipe::load_run_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    if (g.scale) {
        cfg.scale = *g.scale;
        pipe::apply_scale(cfg);
    }
    return cfg;
}

void print_rouge(const std::string& variant, const rouge::CorpusRougeReport& rep) {
    for (const auto& [name, vr] : rep.variants)
        std::printf("%-12s %-8s f1=%.4f (p=%.4f r=%.4f ci=%.4f)\n", variant.c_str(), name.c_str(),
                    vr.mean.f1, vr.mean.precision, vr.mean.recall, vr.ci_halfwidth);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Long-document summarization pipeline: extract, then abstract"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON run config")->envname("LONGSUM_CONFIG");
    uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override the root seed");
    std::string out_dir_val, scale_val;
    auto* out_opt = app.add_option("--out-dir", out_dir_val, "override the output directory");
    auto* scale_opt =
        app.add_option("--scale", scale_val, "model scale preset")->check(CLI::IsMember({"desk", "paper"}));

    // convert-data
    auto* conv = app.add_subcommand("convert-data", "convert a public release file to the native schema");
    std::string conv_in, conv_out, conv_domain = "scientific";
    conv->add_option("--input", conv_in, "source JSONL file")->required();
    conv->add_option("--output", conv_out, "destination JSONL file")->required();
    conv->add_option("--domain", conv_domain, "domain tag")
        ->check(CLI::IsMember({"scientific", "news", "patent"}));

    auto* train_bpe = app.add_subcommand("train-bpe", "train the subword vocabulary");
    auto* make_labels = app.add_subcommand("make-labels", "build oracle extraction labels");

    auto* train_ext = app.add_subcommand("train-extractor", "train an extractive model");
    std::string ext_which;
    train_ext->add_option("model", ext_which, "pointer or classifier")
        ->required()
        ->check(CLI::IsMember({"pointer", "classifier"}));

    auto* extract = app.add_subcommand("extract", "run a trained extractor over a split");
    std::string extract_model = "pointer", extract_split = "test";
    extract->add_option("--model", extract_model, "pointer or classifier")
        ->check(CLI::IsMember({"pointer", "classifier"}));
    extract->add_option("--split", extract_split, "corpus split")
        ->check(CLI::IsMember({"train", "valid", "test"}));

    auto* train_tlm = app.add_subcommand("train-tlm", "train the transformer language model");
    std::string tlm_cond = "g";
    train_tlm->add_option("--conditioning", tlm_cond, "i (intro only), g (oracle extracts), m (model extracts)")
        ->check(CLI::IsMember({"i", "g", "m"}));

    auto* generate = app.add_subcommand("generate", "generate abstracts for a variant");
    std::string gen_variant = "tlm-ie-gm";
    generate->add_option("--variant", gen_variant, "abstractive variant tag")
        ->check(CLI::IsMember({"tlm-i", "tlm-ie-gg", "tlm-ie-gm", "tlm-ie-mm"}));

    auto* evaluate = app.add_subcommand("evaluate", "score variants with ROUGE");
    std::vector<std::string> eval_variants;
    evaluate->add_option("--variant", eval_variants, "variant tags (default: all configured)");

    auto* analyze = app.add_subcommand("analyze-copying", "n-gram copy analysis of generated abstracts");

    auto* export_emb = app.add_subcommand("export-embeddings", "dump a checkpoint's token embeddings");
    std::string emb_ckpt, emb_out;
    export_emb->add_option("--checkpoint", emb_ckpt, "checkpoint file")->required();
    export_emb->add_option("--output", emb_out, "output TSV path")->required();

    auto* tfidf = app.add_subcommand("tfidf-words", "most representative words per category");
    int tfidf_count = 300;
    std::string tfidf_out;
    tfidf->add_option("--per-category", tfidf_count, "words per category");
    tfidf->add_option("--output", tfidf_out, "output CSV path")->required();

    auto* pipeline = app.add_subcommand("pipeline", "run every stage in dependency order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (seed_opt->count()) g.seed = seed_val;
        if (out_opt->count()) g.out_dir = out_dir_val;
        if (scale_opt->count()) g.scale = scale_val;

        if (conv->parsed()) {
            corpus::convert_public_release(conv_in, conv_out, corpus::domain_from_name(conv_domain));
            return 0;
        }

        auto cfg = load_config(g);
        pipe::Run run(cfg);

        if (train_bpe->parsed()) {
            const auto& v = run.vocab();
            std::printf("vocabulary of %d tokens at %s\n", v.size(), run.path("vocab.txt").c_str());
        } else if (make_labels->parsed()) {
            for (const char* split : {"train", "valid", "test"})
                std::printf("%s: %zu labeled documents\n", split, run.labels(split).size());
        } else if (train_ext->parsed()) {
            if (ext_which == "pointer") run.pointer_store();
            else run.classifier_store();
            std::printf("trained %s extractor\n", ext_which.c_str());
        } else if (extract->parsed()) {
            const auto& m = extract_model == "pointer" ? run.pointer_extracts(extract_split)
                                                       : run.classifier_extracts(extract_split);
            std::printf("extracted %zu documents (%s, %s)\n", m.size(), extract_model.c_str(),
                        extract_split.c_str());
        } else if (train_tlm->parsed()) {
            run.tlm_store(tlm_cond);
            std::printf("trained language model (conditioning %s)\n", tlm_cond.c_str());
        } else if (generate->parsed()) {
            auto gs = run.generate(gen_variant);
            std::printf("generated %zu summaries for %s\n", gs.size(), gen_variant.c_str());
        } else if (evaluate->parsed()) {
            const auto& variants = eval_variants.empty() ? cfg.variants : eval_variants;
            for (const auto& v : variants) print_rouge(v, run.evaluate(v));
        } else if (analyze->parsed()) {
            auto profiles = run.analyze_copying();
            std::printf("copy profiles for %zu variants at %s\n", profiles.size(),
                        run.path("copy_profiles.csv").c_str());
        } else if (export_emb->parsed()) {
            pipe::export_embeddings(emb_ckpt, run.vocab(), emb_out);
            std::printf("wrote embeddings to %s\n", emb_out.c_str());
        } else if (tfidf->parsed()) {
            pipe::write_tfidf_words(pipe::tfidf_words(run.docs("train"), tfidf_count), tfidf_out);
            std::printf("wrote word list to %s\n", tfidf_out.c_str());
        } else if (pipeline->parsed()) {
            auto report = run.run_all();
            for (const auto& [variant, rep] : report.rouge_by_variant) print_rouge(variant, rep);
            std::printf("report at %s\n", run.path("report.json").c_str());
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ArtifactMissingError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
