#pragma once

// Experiment orchestration: run configs, stage execution with persisted
// artifacts, evaluation reports and the embedding/TF-IDF exports.
//
// Stage order: tokenize -> label -> train extractors -> extract ->
// train TLMs -> generate -> evaluate -> analyze. Every stage writes its
// artifact into the run directory and is skipped when the artifact
// already exists with a matching config hash.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "longsum/bpe.hpp"
#include "longsum/common.hpp"
#include "longsum/copy_analysis.hpp"
#include "longsum/corpus.hpp"
#include "longsum/extractors.hpp"
#include "longsum/nn.hpp"
#include "longsum/oracle.hpp"
#include "longsum/rouge.hpp"
#include "longsum/tlm.hpp"
#include "longsum/transformer.hpp"

namespace longsum::pipe {

// Model variants reported in the evaluation matrix. The (x,y) suffix of
// the abstractive rows names the extract source at (train, inference)
// time: ground-truth oracle labels or the trained pointer model.
inline const std::vector<std::string>& all_variants() {
    static const std::vector<std::string> v = {"lead",      "sent-ptr",  "sent-clf", "tlm-i",
                                               "tlm-ie-gg", "tlm-ie-gm", "tlm-ie-mm"};
    return v;
}

struct RunConfig {
    std::string train_path, valid_path, test_path;
    std::string out_dir = "run";
    uint64_t seed = 1;
    std::string scale = "desk";  // "desk" or "paper"
    std::vector<std::string> variants = all_variants();

    int bpe_merges = 4000;
    int max_sentences = 300;
    int max_tokens_per_sentence = 35;

    // Extractor hyperparameters; negative means "use the scale preset".
    int ext_emb_dim = -1, ext_hidden = -1, ext_layers = -1;
    double ext_dropout = -1.0;
    double ext_lr = 1e-3;
    int ext_batch_size = 8;
    long long ext_max_updates = 2000;
    int ext_eval_every = 200;
    int ext_patience = 50;
    int beam_width = 4;

    // Transformer LM hyperparameters; negative means preset.
    int tlm_layers = -1, tlm_dim = -1, tlm_heads = -1, tlm_window = -1;
    double tlm_dropout = -1.0;
    bool tlm_schedule = false;  // paper schedule vs constant lr
    double tlm_lr = 1e-3;
    int tlm_batch_size = 8;
    long long tlm_max_updates = 2000;
    int tlm_eval_every = 200;
    int tlm_patience = 50;

    int top_k = 30;
    double temperature = 0.7;
    int max_new_tokens = 0;  // 0: 1.5x mean abstract length, from stats
};

inline void apply_scale(RunConfig& cfg) {
    if (cfg.scale == "paper") {
        if (cfg.bpe_merges == 4000) cfg.bpe_merges = 40000;
        cfg.tlm_schedule = true;
        cfg.ext_batch_size = 32;
        cfg.tlm_batch_size = 32;
    } else if (cfg.scale != "desk") {
        throw UsageError("unknown scale: " + cfg.scale + " (expected desk or paper)");
    }
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.train_path = j.at("data").at("train").get<std::string>();
        c.valid_path = j.at("data").at("valid").get<std::string>();
        c.test_path = j.at("data").at("test").get<std::string>();
        c.out_dir = j.value("out_dir", c.out_dir);
        c.seed = j.value("seed", c.seed);
        c.scale = j.value("scale", c.scale);
        if (j.contains("variants")) c.variants = j["variants"].get<std::vector<std::string>>();
        c.bpe_merges = j.value("bpe_merges", c.bpe_merges);
        if (j.contains("truncate")) {
            c.max_sentences = j["truncate"].value("max_sentences", c.max_sentences);
            c.max_tokens_per_sentence =
                j["truncate"].value("max_tokens_per_sentence", c.max_tokens_per_sentence);
        }
        if (j.contains("extractor")) {
            const auto& e = j["extractor"];
            c.ext_emb_dim = e.value("emb_dim", c.ext_emb_dim);
            c.ext_hidden = e.value("hidden", c.ext_hidden);
            c.ext_layers = e.value("layers", c.ext_layers);
            c.ext_dropout = e.value("dropout", c.ext_dropout);
            c.ext_lr = e.value("lr", c.ext_lr);
            c.ext_batch_size = e.value("batch_size", c.ext_batch_size);
            c.ext_max_updates = e.value("max_updates", c.ext_max_updates);
            c.ext_eval_every = e.value("eval_every", c.ext_eval_every);
            c.ext_patience = e.value("patience", c.ext_patience);
            c.beam_width = e.value("beam_width", c.beam_width);
        }
        if (j.contains("tlm")) {
            const auto& t = j["tlm"];
            c.tlm_layers = t.value("n_layers", c.tlm_layers);
            c.tlm_dim = t.value("d_model", c.tlm_dim);
            c.tlm_heads = t.value("n_heads", c.tlm_heads);
            c.tlm_window = t.value("window", c.tlm_window);
            c.tlm_dropout = t.value("dropout", c.tlm_dropout);
            c.tlm_schedule = t.value("schedule", c.tlm_schedule);
            c.tlm_lr = t.value("lr", c.tlm_lr);
            c.tlm_batch_size = t.value("batch_size", c.tlm_batch_size);
            c.tlm_max_updates = t.value("max_updates", c.tlm_max_updates);
            c.tlm_eval_every = t.value("eval_every", c.tlm_eval_every);
            c.tlm_patience = t.value("patience", c.tlm_patience);
        }
        if (j.contains("generation")) {
            const auto& g = j["generation"];
            c.top_k = g.value("top_k", c.top_k);
            c.temperature = g.value("temperature", c.temperature);
            c.max_new_tokens = g.value("max_new_tokens", c.max_new_tokens);
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("run config: ") + e.what());
    }
    apply_scale(c);
    for (const auto& v : c.variants)
        if (std::find(all_variants().begin(), all_variants().end(), v) == all_variants().end())
            throw UsageError("unknown variant: " + v);
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open run config " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("run config parse: ") + e.what());
    }
    return run_config_from_json(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["data"] = {{"train", c.train_path}, {"valid", c.valid_path}, {"test", c.test_path}};
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    j["scale"] = c.scale;
    j["variants"] = c.variants;
    j["bpe_merges"] = c.bpe_merges;
    j["truncate"] = {{"max_sentences", c.max_sentences},
                     {"max_tokens_per_sentence", c.max_tokens_per_sentence}};
    j["extractor"] = {{"emb_dim", c.ext_emb_dim},     {"hidden", c.ext_hidden},
                      {"layers", c.ext_layers},       {"dropout", c.ext_dropout},
                      {"lr", c.ext_lr},               {"batch_size", c.ext_batch_size},
                      {"max_updates", c.ext_max_updates}, {"eval_every", c.ext_eval_every},
                      {"patience", c.ext_patience},   {"beam_width", c.beam_width}};
    j["tlm"] = {{"n_layers", c.tlm_layers},   {"d_model", c.tlm_dim},
                {"n_heads", c.tlm_heads},     {"window", c.tlm_window},
                {"dropout", c.tlm_dropout},   {"schedule", c.tlm_schedule},
                {"lr", c.tlm_lr},             {"batch_size", c.tlm_batch_size},
                {"max_updates", c.tlm_max_updates}, {"eval_every", c.tlm_eval_every},
                {"patience", c.tlm_patience}};
    j["generation"] = {{"top_k", c.top_k}, {"temperature", c.temperature},
                       {"max_new_tokens", c.max_new_tokens}};
    return j;
}

// The hash stored in checkpoints and the report; json dump is canonical
// (sorted object keys).
inline uint64_t config_hash(const RunConfig& c) { return nn::fnv1a64(run_config_to_json(c).dump()); }

// Per-stage seeds all derive from the root seed and the stage name.
inline uint64_t stage_seed(const RunConfig& c, const std::string& stage) {
    return c.seed ^ nn::fnv1a64(stage);
}

struct RunReport {
    uint64_t config_hash = 0;
    corpus::CorpusStats stats;
    std::map<std::string, rouge::CorpusRougeReport> rouge_by_variant;
    std::map<std::string, double> stage_seconds;
};

inline nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json j;
    j["config_hash"] = r.config_hash;
    j["corpus_stats"] = {{"num_documents", r.stats.num_documents},
                         {"mean_doc_words", r.stats.mean_doc_words},
                         {"mean_summary_words", r.stats.mean_summary_words},
                         {"mean_summary_sentences", r.stats.mean_summary_sentences},
                         {"compression_ratio", r.stats.compression_ratio}};
    j["rouge"] = nlohmann::json::object();
    for (auto& [variant, rep] : r.rouge_by_variant) {
        nlohmann::json v;
        for (auto& [name, vr] : rep.variants)
            v[name] = {{"precision", vr.mean.precision},
                       {"recall", vr.mean.recall},
                       {"f1", vr.mean.f1},
                       {"ci_halfwidth", vr.ci_halfwidth}};
        j["rouge"][variant] = v;
    }
    j["stage_seconds"] = r.stage_seconds;
    return j;
}

namespace detail {

inline bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << text;
}

inline std::vector<std::string> words_of(const corpus::Sentence& s) {
    return corpus::split_words(s.raw);
}

}  // namespace detail

// Orchestrates one experiment. Stage methods are idempotent: each loads
// its artifact if present (validating the config hash where one is
// stored) and computes it otherwise.
class Run {
  public:
    explicit Run(RunConfig cfg) : cfg_(std::move(cfg)), hash_(config_hash(cfg_)) {
        std::filesystem::create_directories(cfg_.out_dir);
    }

    const RunConfig& config() const { return cfg_; }
    uint64_t hash() const { return hash_; }
    std::string path(const std::string& name) const { return cfg_.out_dir + "/" + name; }

    bool wants(const std::string& variant) const {
        return std::find(cfg_.variants.begin(), cfg_.variants.end(), variant) != cfg_.variants.end();
    }

    // ----- data ------------------------------------------------------

    const std::vector<corpus::Document>& docs(const std::string& split) {
        auto it = docs_.find(split);
        if (it != docs_.end()) return it->second;
        const std::string& p = split == "train"   ? cfg_.train_path
                               : split == "valid" ? cfg_.valid_path
                                                  : cfg_.test_path;
        auto res = corpus::load_corpus(p);
        if (res.documents.empty()) throw DataError("corpus " + p + " has no usable documents");
        return docs_[split] = std::move(res.documents);
    }

    // ----- stage: tokenize -------------------------------------------

    const bpe::Vocabulary& vocab() {
        if (!vocab_.id_to_token.empty()) return vocab_;
        const std::string p = path("vocab.txt");
        if (detail::file_exists(p)) {
            vocab_ = bpe::load_vocabulary(p);
        } else {
            vocab_ = bpe::train_bpe(docs("train"), cfg_.bpe_merges);
            bpe::save_vocabulary(vocab_, p);
        }
        return vocab_;
    }

    // Tokenized full documents of a split (TLM input).
    const std::vector<corpus::Document>& tokenized(const std::string& split) {
        auto it = tokenized_.find(split);
        if (it != tokenized_.end()) return it->second;
        std::vector<corpus::Document> out = docs(split);
        for (auto& d : out) bpe::tokenize_document(d, vocab());
        return tokenized_[split] = std::move(out);
    }

    // Truncated tokenized documents (extractor input and labeling base).
    const std::vector<corpus::Document>& truncated(const std::string& split) {
        auto it = truncated_.find(split);
        if (it != truncated_.end()) return it->second;
        std::vector<corpus::Document> out;
        for (const auto& d : tokenized(split))
            out.push_back(
                corpus::truncate_for_extractor(d, cfg_.max_sentences, cfg_.max_tokens_per_sentence));
        return truncated_[split] = std::move(out);
    }

    // ----- stage: label ----------------------------------------------

    const ext::LabelMap& labels(const std::string& split) {
        auto it = labels_.find(split);
        if (it != labels_.end()) return it->second;
        const std::string p = path("labels_" + split + ".jsonl");
        std::vector<oracle::ExtractLabels> ls;
        if (detail::file_exists(p)) {
            ls = oracle::load_labels(p);
        } else {
            for (const auto& d : truncated(split)) ls.push_back(oracle::build_oracle_labels(d));
            oracle::save_labels(ls, p);
        }
        return labels_[split] = ext::label_map(ls);
    }

    // ----- model configuration ---------------------------------------

    ext::ExtractorConfig extractor_config() {
        auto c = cfg_.scale == "paper" ? ext::paper_extractor(vocab().size())
                                       : ext::desk_extractor(vocab().size());
        if (cfg_.ext_emb_dim > 0) c.emb_dim = cfg_.ext_emb_dim;
        if (cfg_.ext_hidden > 0) c.hidden = cfg_.ext_hidden;
        if (cfg_.ext_layers > 0) c.layers = cfg_.ext_layers;
        if (cfg_.ext_dropout >= 0.0) c.dropout = cfg_.ext_dropout;
        return c;
    }

    tlm::TlmConfig tlm_config() {
        auto c = cfg_.scale == "paper" ? tlm::paper_preset(vocab().size())
                                       : tlm::desk_preset(vocab().size());
        if (cfg_.tlm_layers > 0) c.n_layers = cfg_.tlm_layers;
        if (cfg_.tlm_dim > 0) c.d_model = cfg_.tlm_dim;
        if (cfg_.tlm_heads > 0) c.n_heads = cfg_.tlm_heads;
        if (cfg_.tlm_window > 0) c.window = cfg_.tlm_window;
        if (cfg_.tlm_dropout >= 0.0) c.dropout = cfg_.tlm_dropout;
        return c;
    }

    nn::TrainConfig extractor_train_config() {
        nn::TrainConfig t;
        t.use_schedule = false;
        t.lr = cfg_.ext_lr;
        t.batch_size = cfg_.ext_batch_size;
        t.max_updates = cfg_.ext_max_updates;
        t.eval_every = cfg_.ext_eval_every;
        t.patience = cfg_.ext_patience;
        t.weight_decay = 1e-5;
        t.seed = stage_seed(cfg_, "train-extractor");
        return t;
    }

    nn::TrainConfig tlm_train_config() {
        nn::TrainConfig t;
        t.use_schedule = cfg_.tlm_schedule;
        t.lr = cfg_.tlm_lr;
        t.batch_size = cfg_.tlm_batch_size;
        t.max_updates = cfg_.tlm_max_updates;
        t.eval_every = cfg_.tlm_eval_every;
        t.patience = cfg_.tlm_patience;
        t.weight_decay = 1e-5;
        t.seed = stage_seed(cfg_, "train-tlm");
        return t;
    }

    // ----- stage: train extractors -----------------------------------

    void check_meta(const nn::CheckpointMeta& meta, const std::string& artifact) const {
        if (meta.config_hash != hash_)
            throw DataError("artifact " + artifact +
                            " was produced under a different run config; delete it or restore the "
                            "config to resume");
    }

    std::shared_ptr<nn::ParameterStore> pointer_store() {
        if (pointer_store_) return pointer_store_;
        const std::string p = path("pointer.ckpt");
        auto store = std::make_shared<nn::ParameterStore>();
        if (detail::file_exists(p)) {
            auto ck = nn::load_checkpoint(p);
            check_meta(ck.meta, p);
            *store = std::move(ck.store);
            ext::PointerExtractor model(*store, extractor_config());
        } else {
            ext::PointerExtractor model(*store, extractor_config());
            std::mt19937_64 rng(stage_seed(cfg_, "init-pointer"));
            nn::init_normal(*store, rng, 0.1);
            ext::train_pointer(model, *store, truncated("train"), labels("train"),
                               truncated("valid"), labels("valid"), extractor_train_config());
            nn::CheckpointMeta meta;
            meta.config_hash = hash_;
            meta.vocab_hash = bpe::vocabulary_hash(vocab());
            meta.step = static_cast<uint64_t>(store->step);
            nn::save_checkpoint(*store, meta, p);
        }
        return pointer_store_ = store;
    }

    std::shared_ptr<nn::ParameterStore> classifier_store() {
        if (classifier_store_) return classifier_store_;
        const std::string p = path("classifier.ckpt");
        auto store = std::make_shared<nn::ParameterStore>();
        if (detail::file_exists(p)) {
            auto ck = nn::load_checkpoint(p);
            check_meta(ck.meta, p);
            *store = std::move(ck.store);
            ext::SentenceClassifier model(*store, extractor_config());
        } else {
            ext::SentenceClassifier model(*store, extractor_config());
            std::mt19937_64 rng(stage_seed(cfg_, "init-classifier"));
            nn::init_normal(*store, rng, 0.1);
            ext::train_classifier(model, *store, truncated("train"), labels("train"),
                                  truncated("valid"), labels("valid"), extractor_train_config());
            nn::CheckpointMeta meta;
            meta.config_hash = hash_;
            meta.vocab_hash = bpe::vocabulary_hash(vocab());
            meta.step = static_cast<uint64_t>(store->step);
            nn::save_checkpoint(*store, meta, p);
        }
        return classifier_store_ = store;
    }

    // ----- stage: extract --------------------------------------------

    // Average summary length in sentences, the k of top-k and Lead-k.
    int summary_k() {
        const auto st = corpus::corpus_stats(docs("train"));
        return std::max(1, static_cast<int>(std::lround(st.mean_summary_sentences)));
    }

    const ext::LabelMap& pointer_extracts(const std::string& split) {
        const std::string key = "ptr:" + split;
        auto it = extracts_.find(key);
        if (it != extracts_.end()) return it->second;
        const std::string p = path("extracts_pointer_" + split + ".jsonl");
        std::vector<oracle::ExtractLabels> ls;
        if (detail::file_exists(p)) {
            ls = oracle::load_labels(p);
        } else {
            auto store = pointer_store();
            ext::PointerExtractor model(*store, extractor_config());
            for (const auto& d : truncated(split)) ls.push_back(model.beam_search_extract(d, cfg_.beam_width));
            oracle::save_labels(ls, p);
        }
        return extracts_[key] = ext::label_map(ls);
    }

    const ext::LabelMap& classifier_extracts(const std::string& split) {
        const std::string key = "clf:" + split;
        auto it = extracts_.find(key);
        if (it != extracts_.end()) return it->second;
        const std::string p = path("extracts_classifier_" + split + ".jsonl");
        std::vector<oracle::ExtractLabels> ls;
        if (detail::file_exists(p)) {
            ls = oracle::load_labels(p);
        } else {
            auto store = classifier_store();
            ext::SentenceClassifier model(*store, extractor_config());
            const int k = summary_k();
            for (const auto& d : truncated(split))
                ls.push_back(ext::select_top_k(model.forward(d), k, d.id));
            oracle::save_labels(ls, p);
        }
        return extracts_[key] = ext::label_map(ls);
    }

    // ----- stage: train TLMs -----------------------------------------

    // conditioning: "i" intro-only, "g" ground-truth extracts, "m"
    // pointer-model extracts.
    std::shared_ptr<nn::ParameterStore> tlm_store(const std::string& conditioning) {
        auto found = tlm_stores_.find(conditioning);
        if (found != tlm_stores_.end()) return found->second;
        const std::string p = path("tlm_" + conditioning + ".ckpt");
        auto store = std::make_shared<nn::ParameterStore>();
        auto cfg = tlm_config();
        if (detail::file_exists(p)) {
            auto ck = nn::load_checkpoint(p);
            check_meta(ck.meta, p);
            if (ck.meta.vocab_hash != bpe::vocabulary_hash(vocab()))
                throw DataError("artifact " + p + " was trained with a different vocabulary");
            *store = std::move(ck.store);
            tlm::TransformerLM model(*store, cfg);
        } else {
            tlm::TransformerLM model(*store, cfg);
            std::mt19937_64 rng(stage_seed(cfg_, "init-tlm-" + conditioning));
            model.init(rng);
            const auto mode = conditioning == "i" ? tlm::FormatMode::intro_only
                                                  : tlm::FormatMode::intro_plus_extracts;
            std::map<std::string, std::vector<int>> train_ext, valid_ext;
            if (conditioning == "g") {
                train_ext = labels("train");
                valid_ext = labels("valid");
            } else if (conditioning == "m") {
                train_ext = pointer_extracts("train");
                valid_ext = pointer_extracts("valid");
            }
            auto train_w = tlm::corpus_windows(formatting_docs("train"), train_ext, mode, cfg.window);
            auto valid_w = tlm::corpus_windows(formatting_docs("valid"), valid_ext, mode, cfg.window);
            tlm::train_tlm(model, *store, train_w, valid_w, tlm_train_config());
            nn::CheckpointMeta meta;
            meta.config_hash = hash_;
            meta.vocab_hash = bpe::vocabulary_hash(vocab());
            meta.step = static_cast<uint64_t>(store->step);
            nn::save_checkpoint(*store, meta, p);
        }
        return tlm_stores_[conditioning] = store;
    }

    // ----- stage: generate -------------------------------------------

    struct GeneratedSummary {
        std::string id;
        std::string mode;
        std::vector<int> token_ids;
        std::string text;
        uint64_t seed = 0;
    };

    int generation_budget() {
        if (cfg_.max_new_tokens > 0) return cfg_.max_new_tokens;
        // 1.5x the mean abstract token length over the training split.
        double total = 0.0;
        size_t n = 0;
        for (const auto& d : tokenized("train")) {
            for (const auto& s : d.abstract_sentences) total += s.tokens.size();
            n += 1;
        }
        return std::max(8, static_cast<int>(std::lround(1.5 * total / n)));
    }

    // Inference-time extracts for an abstractive variant.
    const ext::LabelMap* inference_extracts(const std::string& variant, const std::string& split) {
        if (variant == "tlm-i") return nullptr;
        if (variant == "tlm-ie-gg") return &labels(split);
        return &pointer_extracts(split);  // gm and mm generate from model extracts
    }

    std::string tlm_conditioning(const std::string& variant) const {
        if (variant == "tlm-i") return "i";
        if (variant == "tlm-ie-mm") return "m";
        return "g";  // gg and gm share the oracle-conditioned checkpoint
    }

    std::vector<GeneratedSummary> generate(const std::string& variant,
                                           const std::string& split = "test") {
        const std::string p = path("summaries_" + variant + ".jsonl");
        std::vector<GeneratedSummary> out;
        if (detail::file_exists(p)) {
            std::ifstream is(p);
            std::string line;
            while (std::getline(is, line)) {
                if (line.empty()) continue;
                auto j = nlohmann::json::parse(line);
                GeneratedSummary g;
                g.id = j.at("id").get<std::string>();
                g.mode = j.at("mode").get<std::string>();
                g.text = j.at("summary_text").get<std::string>();
                g.token_ids = j.value("token_ids", std::vector<int>{});
                g.seed = j.value("seed", 0ull);
                out.push_back(std::move(g));
            }
            return out;
        }

        auto store = tlm_store(tlm_conditioning(variant));
        auto cfg = tlm_config();
        tlm::TransformerLM model(*store, cfg);
        const auto* extracts = inference_extracts(variant, split);
        const auto mode =
            extracts ? tlm::FormatMode::intro_plus_extracts : tlm::FormatMode::intro_only;

        tlm::GenerationConfig gen;
        gen.top_k = cfg_.top_k;
        gen.temperature = cfg_.temperature;
        gen.max_new_tokens = generation_budget();
        const int budget = std::max(2, cfg.window - gen.max_new_tokens);

        std::ofstream os(p);
        if (!os) throw DataError("cannot open " + p + " for writing");
        const uint64_t base_seed = stage_seed(cfg_, "generate-" + variant);
        size_t doc_idx = 0;
        for (const auto& d : tokenized(split)) {
            std::vector<int> idx;
            if (extracts) {
                auto it = extracts->find(d.id);
                if (it == extracts->end())
                    throw ArtifactMissingError("generate: no extracts for document " + d.id +
                                               "; rerun the extract stage");
                idx = it->second;
            }
            // Extracts index into the truncated document; generation
            // conditions on the truncated view for consistency.
            const auto& base = truncated(split)[doc_idx];
            auto ctx = tlm::build_inference_context(base, idx, mode, budget);
            GeneratedSummary g;
            g.id = d.id;
            g.mode = variant;
            g.seed = base_seed + doc_idx;
            gen.seed = g.seed;
            g.token_ids = tlm::generate_summary(model, ctx, gen);
            g.text = bpe::decode(g.token_ids, vocab());
            out.push_back(g);

            nlohmann::json j;
            j["id"] = g.id;
            j["mode"] = g.mode;
            j["summary_text"] = g.text;
            j["token_ids"] = g.token_ids;
            j["num_tokens"] = g.token_ids.size();
            j["seed"] = g.seed;
            os << j.dump() << "\n";
            ++doc_idx;
        }
        return out;
    }

    // ----- stage: evaluate -------------------------------------------

    // Word-level candidate/reference pairs for one variant on the test
    // split; extractive variants concatenate their selected sentences.
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> evaluation_pairs(
        const std::string& variant) {
        std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
        const auto& split_docs = truncated("test");

        std::map<std::string, std::vector<std::string>> candidates;
        if (variant == "lead" || variant == "sent-ptr" || variant == "sent-clf") {
            const int k = summary_k();
            for (const auto& d : split_docs) {
                std::vector<int> idx;
                if (variant == "lead") {
                    idx = ext::lead_k_extract(d, k).indices;
                } else if (variant == "sent-ptr") {
                    idx = pointer_extracts("test").at(d.id);
                } else {
                    idx = classifier_extracts("test").at(d.id);
                }
                auto body = d.body_sentences();
                std::vector<std::string> words;
                for (int i : idx)
                    for (auto& w : detail::words_of(*body[i])) words.push_back(w);
                candidates[d.id] = std::move(words);
            }
        } else {
            for (const auto& g : generate(variant))
                candidates[g.id] = corpus::split_words(g.text);
        }

        for (const auto& d : split_docs) {
            std::vector<std::string> ref;
            for (const auto& s : d.abstract_sentences)
                for (auto& w : detail::words_of(s)) ref.push_back(w);
            pairs.emplace_back(candidates.at(d.id), std::move(ref));
        }
        return pairs;
    }

    rouge::CorpusRougeReport evaluate(const std::string& variant) {
        auto rep = rouge::corpus_rouge<std::string>(evaluation_pairs(variant));
        detail::write_text(path("rouge_" + variant + ".csv"), rouge::report_csv(rep));
        return rep;
    }

    // ----- stage: analyze --------------------------------------------

    std::vector<copy::CopyProfile> analyze_copying(int max_n = 25) {
        std::vector<copy::CopyProfile> profiles;
        for (const auto& variant : cfg_.variants) {
            if (variant.rfind("tlm", 0) != 0) continue;
            std::vector<copy::CopyExample> examples;
            auto summaries = generate(variant);
            std::map<std::string, const GeneratedSummary*> by_id;
            for (const auto& g : summaries) by_id[g.id] = &g;
            const auto* extracts = inference_extracts(variant, "test");
            for (const auto& d : truncated("test")) {
                auto it = by_id.find(d.id);
                if (it == by_id.end()) continue;
                copy::CopyExample ex;
                ex.summary = corpus::split_words(it->second->text);
                auto body = d.body_sentences();
                std::set<int> chosen;
                if (extracts) {
                    auto e = extracts->find(d.id);
                    if (e != extracts->end()) chosen.insert(e->second.begin(), e->second.end());
                }
                for (int i = 0; i < static_cast<int>(body.size()); ++i) {
                    auto ws = detail::words_of(*body[i]);
                    auto& bucket = chosen.count(i) ? ex.extract : ex.other_input;
                    bucket.insert(bucket.end(), ws.begin(), ws.end());
                }
                examples.push_back(std::move(ex));
            }
            if (!examples.empty())
                profiles.push_back(copy::profile_corpus(examples, variant, max_n));
        }
        if (!profiles.empty())
            detail::write_text(path("copy_profiles.csv"), copy::profile_csv(profiles));
        return profiles;
    }

    // ----- full pipeline ---------------------------------------------

    RunReport run_all() {
        RunReport report;
        report.config_hash = hash_;
        auto timed = [&](const std::string& name, auto&& fn) {
            const auto t0 = std::chrono::steady_clock::now();
            fn();
            report.stage_seconds[name] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        };

        timed("tokenize", [&] { vocab(); });
        report.stats = corpus::corpus_stats(docs("train"));
        timed("label", [&] {
            labels("train");
            labels("valid");
            labels("test");
        });

        const bool needs_pointer = wants("sent-ptr") || wants("tlm-ie-gm") || wants("tlm-ie-mm");
        const bool needs_classifier = wants("sent-clf");
        timed("train-extractor", [&] {
            if (needs_pointer) pointer_store();
            if (needs_classifier) classifier_store();
        });
        timed("extract", [&] {
            if (needs_pointer) pointer_extracts("test");
            if (wants("tlm-ie-mm")) {
                pointer_extracts("train");
                pointer_extracts("valid");
            }
            if (needs_classifier) classifier_extracts("test");
        });
        timed("train-tlm", [&] {
            if (wants("tlm-i")) tlm_store("i");
            if (wants("tlm-ie-gg") || wants("tlm-ie-gm")) tlm_store("g");
            if (wants("tlm-ie-mm")) tlm_store("m");
        });
        timed("generate", [&] {
            for (const auto& v : cfg_.variants)
                if (v.rfind("tlm", 0) == 0) generate(v);
        });
        timed("evaluate", [&] {
            for (const auto& v : cfg_.variants) report.rouge_by_variant[v] = evaluate(v);
        });
        timed("analyze", [&] { analyze_copying(); });

        detail::write_text(path("report.json"), report_to_json(report).dump(2) + "\n");
        detail::write_text(path("config_snapshot.json"), run_config_to_json(cfg_).dump(2) + "\n");
        return report;
    }

  private:
    // Full tokenized documents used for TLM formatting, but with the
    // extractor's truncated sentence view so extract indices line up.
    const std::vector<corpus::Document>& formatting_docs(const std::string& split) {
        return truncated(split);
    }

    RunConfig cfg_;
    uint64_t hash_;
    bpe::Vocabulary vocab_;
    std::map<std::string, std::vector<corpus::Document>> docs_, tokenized_, truncated_;
    std::map<std::string, ext::LabelMap> labels_, extracts_;
    std::shared_ptr<nn::ParameterStore> pointer_store_, classifier_store_;
    std::map<std::string, std::shared_ptr<nn::ParameterStore>> tlm_stores_;
};

// ----- exports --------------------------------------------------------

// Token embedding table of a checkpoint as "token<TAB>v1 v2 ..." rows.
inline void export_embeddings(const std::string& checkpoint_path, const bpe::Vocabulary& vocab,
                              const std::string& out_path) {
    if (!detail::file_exists(checkpoint_path))
        throw ArtifactMissingError("export-embeddings: no checkpoint at " + checkpoint_path);
    auto ck = nn::load_checkpoint(checkpoint_path);
    auto ends_with = [](const std::string& s, const std::string& suf) {
        return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
    };
    longsum::ad::TensorPtr table;
    for (const auto& [name, t] : ck.store.params)
        if (ends_with(name, ".wte") || (!table && ends_with(name, ".emb"))) table = t;
    if (!table) throw DataError("export-embeddings: checkpoint has no embedding table");
    if (table->rows != vocab.size())
        throw DataError("export-embeddings: embedding rows " + std::to_string(table->rows) +
                        " do not match vocabulary size " + std::to_string(vocab.size()));
    std::ofstream os(out_path);
    if (!os) throw DataError("cannot open " + out_path + " for writing");
    os.setf(std::ios::fixed);
    os.precision(6);
    for (int r = 0; r < table->rows; ++r) {
        os << vocab.id_to_token[r] << '\t';
        for (int c = 0; c < table->cols; ++c) {
            if (c) os << ' ';
            os << table->val[static_cast<size_t>(r) * table->cols + c];
        }
        os << '\n';
    }
}

struct TfidfEntry {
    std::string word;
    double score = 0.0;
};

// Most representative words per category (domain tag): term frequency
// within the category weighted by a smoothed inverse category
// frequency. With a single category the idf term is constant and the
// ranking degenerates to plain term frequency.
inline std::map<std::string, std::vector<TfidfEntry>> tfidf_words(
    const std::vector<corpus::Document>& docs, int per_category) {
    if (docs.empty()) throw DataError("tfidf_words: empty corpus");
    if (per_category < 1) throw std::invalid_argument("tfidf_words: per_category must be >= 1");

    std::map<std::string, std::map<std::string, long long>> tf;  // category -> word -> count
    for (const auto& d : docs) {
        auto& bucket = tf[corpus::domain_name(d.domain_tag)];
        for (const auto& sec : d.sections)
            for (const auto& s : sec.sentences)
                for (const auto& w : corpus::split_words(s.raw)) bucket[w] += 1;
        for (const auto& s : d.abstract_sentences)
            for (const auto& w : corpus::split_words(s.raw)) bucket[w] += 1;
    }
    const double C = static_cast<double>(tf.size());
    std::map<std::string, int> category_df;
    for (const auto& [cat, words] : tf)
        for (const auto& [w, _] : words) category_df[w] += 1;

    std::map<std::string, std::vector<TfidfEntry>> out;
    for (const auto& [cat, words] : tf) {
        std::vector<TfidfEntry> entries;
        for (const auto& [w, count] : words) {
            const double idf = std::log((1.0 + C) / (1.0 + category_df[w])) + 1.0;
            entries.push_back({w, count * idf});
        }
        std::stable_sort(entries.begin(), entries.end(), [](const TfidfEntry& a, const TfidfEntry& b) {
            return a.score != b.score ? a.score > b.score : a.word < b.word;
        });
        if (static_cast<int>(entries.size()) > per_category) entries.resize(per_category);
        out[cat] = std::move(entries);
    }
    return out;
}

inline void write_tfidf_words(const std::map<std::string, std::vector<TfidfEntry>>& table,
                              const std::string& out_path) {
    std::ofstream os(out_path);
    if (!os) throw DataError("cannot open " + out_path + " for writing");
    os << "category,word,score\n";
    os.setf(std::ios::fixed);
    os.precision(6);
    for (const auto& [cat, entries] : table)
        for (const auto& e : entries) os << cat << ',' << e.word << ',' << e.score << '\n';
}

}  // namespace longsum::pipe
