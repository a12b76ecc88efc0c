#include "tabanno/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabanno/analysis.hpp"
#include "tabanno/checkpoint.hpp"
#include "tabanno/error.hpp"
#include "tabanno/kernels.hpp"

namespace tabanno::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "tabanno 0.1.0";

std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Run directory bookkeeping: a manifest is written atomically on both
// success and failure.
struct Manifest {
    json j;
    fs::path dir;

    Manifest(const std::string& command, const fs::path& out_dir) : dir(out_dir) {
        j["command"] = command;
        j["version"] = kVersion;
        j["started"] = iso_timestamp();
        j["status"] = "running";
    }

    void write(const std::string& status, const std::string& error = "") {
        j["status"] = status;
        if (!error.empty()) j["error"] = error;
        j["finished"] = iso_timestamp();
        fs::path tmp = dir / "manifest.json.tmp";
        {
            std::ofstream out(tmp);
            out << j.dump(2) << "\n";
        }
        fs::rename(tmp, dir / "manifest.json");
    }
};

fs::path resolve_out_dir(std::string out, const std::string& command) {
    if (out.empty()) {
        const char* root = std::getenv("TABANNO_OUT_ROOT");
        out = (fs::path(root ? root : "runs") / command).string();
    }
    fs::create_directories(out);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

LabelMode parse_mode(const std::string& s) {
    if (s == "multiclass") return LabelMode::Multiclass;
    if (s == "multilabel") return LabelMode::Multilabel;
    throw ConfigError("unknown label mode: " + s);
}

SerializationMode parse_serialization(const std::string& s) {
    if (s == "table") return SerializationMode::TableWise;
    if (s == "single-column") return SerializationMode::SingleColumn;
    throw ConfigError("unknown serialization: " + s);
}

// Flags shared by every model-building command.
struct ModelFlags {
    int layers = 2;
    int heads = 4;
    int dim = 64;
    int ff = 256;
    int max_seq_len = 512;
    int budget = 32;
    double dropout = 0.1;
    bool metadata = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--layers", layers, "Transformer layers");
        cmd->add_option("--heads", heads, "attention heads");
        cmd->add_option("--dim", dim, "model width d");
        cmd->add_option("--ff", ff, "feed-forward width");
        cmd->add_option("--max-seq-len", max_seq_len, "maximum input length");
        cmd->add_option("--budget", budget, "max tokens per column");
        cmd->add_option("--dropout", dropout, "dropout rate");
        cmd->add_flag("--metadata", metadata, "prepend column names to values");
    }

    SerializerConfig serializer() const {
        SerializerConfig s;
        s.max_tokens_per_column = budget;
        s.max_seq_len = max_seq_len;
        s.include_metadata = metadata;
        return s;
    }

    EncoderConfig encoder(int vocab_size, uint64_t seed) const {
        EncoderConfig e;
        e.num_layers = layers;
        e.num_heads = heads;
        e.d_model = dim;
        e.d_ff = ff;
        e.max_seq_len = max_seq_len;
        e.vocab_size = vocab_size;
        e.dropout_rate = dropout;
        e.seed = seed;
        return e;
    }
};

struct DataFlags {
    std::string data, valid, test;
    std::string split;  // "0.8,0.1,0.1" applied to --data when set
    std::string mode_str = "multiclass";

    void attach(CLI::App* cmd, bool with_split = true) {
        cmd->add_option("--data", data, "training corpus (JSONL)")->required();
        if (with_split) {
            cmd->add_option("--valid", valid, "validation corpus (JSONL)");
            cmd->add_option("--test", test, "test corpus (JSONL)");
            cmd->add_option("--split", split, "train,valid,test fractions applied to --data");
        }
        cmd->add_option("--mode", mode_str, "multiclass|multilabel");
    }

    LabelMode mode() const { return parse_mode(mode_str); }
};

std::vector<double> parse_fractions(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

struct LoadedData {
    Corpus train, valid, test;
    bool has_valid = false, has_test = false;
};

LoadedData load_data(const DataFlags& flags, uint64_t seed) {
    LoadedData d;
    Corpus base = load_corpus(flags.data, flags.mode());
    if (!flags.split.empty()) {
        auto f = parse_fractions(flags.split);
        if (f.size() != 3) throw ConfigError("--split needs three fractions");
        SplitResult sr = split_corpus(base, f[0], f[1], f[2], seed);
        d.train = std::move(sr.train);
        d.valid = std::move(sr.valid);
        d.test = std::move(sr.test);
        d.has_valid = !d.valid.tables.empty();
        d.has_test = !d.test.tables.empty();
        return d;
    }
    d.train = std::move(base);
    if (!flags.valid.empty()) {
        d.valid = load_corpus(flags.valid, flags.mode());
        // Align label ids with the training vocabularies.
        d.has_valid = true;
    }
    if (!flags.test.empty()) {
        d.test = load_corpus(flags.test, flags.mode());
        d.has_test = true;
    }
    return d;
}

// Remaps annotation label ids of `c` onto `types`/`rels` (extending them if
// needed) so every split shares one id space.
void align_labels(Corpus& c, LabelVocabulary& types, LabelVocabulary& rels) {
    for (auto& a : c.type_annotations) {
        std::set<int> mapped;
        for (int l : a.labels) mapped.insert(types.intern(c.type_labels.names[l]));
        a.labels = std::move(mapped);
    }
    for (auto& a : c.relation_annotations) {
        std::set<int> mapped;
        for (int l : a.labels) mapped.insert(rels.intern(c.relation_labels.names[l]));
        a.labels = std::move(mapped);
    }
    c.type_labels = types;
    c.relation_labels = rels;
}

void unify_label_spaces(LoadedData& d) {
    LabelVocabulary types = d.train.type_labels;
    LabelVocabulary rels = d.train.relation_labels;
    if (d.has_valid) align_labels(d.valid, types, rels);
    if (d.has_test) align_labels(d.test, types, rels);
    d.train.type_labels = types;
    d.train.relation_labels = rels;
}

json prediction_to_json(const ColumnPrediction& p, const LabelVocabulary& labels) {
    json j;
    j["table"] = p.table_id;
    j["col"] = p.column_index;
    j["probs"] = p.probs;
    json pred = json::array(), gold = json::array();
    for (int l : p.pred) pred.push_back(labels.names[l]);
    for (int l : p.gold) gold.push_back(labels.names[l]);
    j["pred"] = std::move(pred);
    j["gold"] = std::move(gold);
    return j;
}

json prediction_to_json(const RelationPrediction& p, const LabelVocabulary& labels) {
    json j;
    j["table"] = p.table_id;
    j["subj"] = p.subject_index;
    j["obj"] = p.object_index;
    j["probs"] = p.probs;
    json pred = json::array(), gold = json::array();
    for (int l : p.pred) pred.push_back(labels.names[l]);
    for (int l : p.gold) gold.push_back(labels.names[l]);
    j["pred"] = std::move(pred);
    j["gold"] = std::move(gold);
    return j;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"table annotation toolbox: joint column-type and column-relation prediction"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    int workers = 0;
    app.add_option("--seed", seed, "base random seed")->capture_default_str();
    app.add_option("--workers", workers, "worker threads (0 = library default)");

    // --- gen-data -----------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
    gen->set_config("--config");
    std::string gen_out;
    std::string generator = "context";
    SyntheticSpec spec;
    int bigram_pairs = 30, bigram_rows = 4, bigram_cols = 2;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--generator", generator, "context|bigram");
    gen->add_option("--num-tables", spec.num_tables, "tables to generate");
    gen->add_option("--topics", spec.num_topics, "topic count");
    gen->add_option("--pairs", spec.num_ambiguous_pairs, "ambiguous type pairs");
    gen->add_option("--cols-min", spec.min_columns, "min columns per table");
    gen->add_option("--cols-max", spec.max_columns, "max columns per table");
    gen->add_option("--rows-min", spec.min_rows, "min rows per column");
    gen->add_option("--rows-max", spec.max_rows, "max rows per column");
    gen->add_option("--topic-vocab", spec.topic_vocab_size, "words per topic vocabulary");
    gen->add_option("--pool-size", spec.pool_size, "shared pool size per pair");
    bool no_headers = false;
    gen->add_flag("--no-headers", no_headers, "omit column headers");
    gen->add_option("--bigram-pairs", bigram_pairs, "bigram generator: distinct pairs");
    gen->add_option("--bigram-rows", bigram_rows, "bigram generator: rows per column");
    gen->add_option("--bigram-cols", bigram_cols, "bigram generator: columns per table");

    // --- build-vocab ----------------------------------------------------
    auto* bv = app.add_subcommand("build-vocab", "build a token vocabulary from a corpus");
    bv->set_config("--config");
    std::string bv_data, bv_out;
    int bv_max_size = 50000, bv_min_freq = 1;
    bv->add_option("--data", bv_data, "corpus (JSONL)")->required();
    bv->add_option("--out", bv_out, "output directory");
    bv->add_option("--max-size", bv_max_size, "maximum vocabulary size");
    bv->add_option("--min-freq", bv_min_freq, "minimum token frequency");

    // --- pretrain -------------------------------------------------------
    auto* pre = app.add_subcommand("pretrain", "masked-token pretraining of the encoder");
    pre->set_config("--config");
    std::string pre_data, pre_out, pre_vocab;
    ModelFlags pre_model;
    MLMConfig mlm_cfg;
    pre->add_option("--data", pre_data, "corpus (JSONL)")->required();
    pre->add_option("--vocab", pre_vocab, "vocabulary file (built from --data when absent)");
    pre->add_option("--out", pre_out, "output directory");
    pre_model.attach(pre);
    pre->add_option("--epochs", mlm_cfg.epochs, "pretraining epochs");
    pre->add_option("--lr", mlm_cfg.learning_rate, "learning rate");
    pre->add_option("--mask-prob", mlm_cfg.mask_prob, "token mask probability");
    pre->add_option("--batch", mlm_cfg.batch_size, "batch size");

    // --- train ------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "multi-task fine-tuning");
    tr->set_config("--config");
    DataFlags tr_data;
    tr_data.attach(tr);
    ModelFlags tr_model;
    tr_model.attach(tr);
    std::string tr_out, tr_vocab, tr_init, tr_tasks = "type,relation";
    std::string tr_serialization = "table";
    int tr_epochs = 30, tr_batch = 16, tr_vocab_max = 50000, tr_vocab_min_freq = 1;
    double tr_lr = 5e-5, tr_clip = 0.0;
    bool tr_dump_serialized = false;
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--vocab", tr_vocab, "vocabulary file (built from train data when absent)");
    tr->add_option("--init", tr_init, "encoder checkpoint to initialize from");
    tr->add_option("--tasks", tr_tasks, "comma list: type,relation (declaration order)");
    tr->add_option("--serialization", tr_serialization, "table|single-column");
    tr->add_option("--epochs", tr_epochs, "training epochs");
    tr->add_option("--lr", tr_lr, "initial learning rate (linear decay to 0)");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--clip", tr_clip, "gradient clip norm (0 = off)");
    tr->add_option("--vocab-max", tr_vocab_max, "vocabulary cap when building");
    tr->add_option("--vocab-min-freq", tr_vocab_min_freq, "vocabulary min frequency");
    tr->add_flag("--dump-serialized", tr_dump_serialized,
                 "write token-string renderings of the training tables");

    // --- eval ---------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "score a prediction dump against gold annotations");
    ev->set_config("--config");
    std::string ev_pred, ev_gold, ev_out, ev_task = "type", ev_mode = "multiclass";
    ev->add_option("--pred", ev_pred, "prediction dump (JSONL)")->required();
    ev->add_option("--gold", ev_gold, "gold corpus (JSONL)")->required();
    ev->add_option("--task", ev_task, "type|relation");
    ev->add_option("--mode", ev_mode, "multiclass|multilabel");
    ev->add_option("--out", ev_out, "output directory");

    // --- predict ---------------------------------------------------------
    auto* pr = app.add_subcommand("predict", "run a trained model over a corpus");
    pr->set_config("--config");
    std::string pr_model, pr_data, pr_out, pr_mode = "multiclass";
    bool pr_dump_serialized = false;
    pr->add_option("--model", pr_model, "model checkpoint")->required();
    pr->add_option("--data", pr_data, "corpus (JSONL)")->required();
    pr->add_option("--mode", pr_mode, "multiclass|multilabel (matches the gold file)");
    pr->add_option("--out", pr_out, "output directory");
    pr->add_flag("--dump-serialized", pr_dump_serialized,
                 "write token-string renderings of the serialized tables");

    // --- embed ---------------------------------------------------------
    auto* em = app.add_subcommand("embed", "extract contextualized column embeddings");
    em->set_config("--config");
    std::string em_model, em_data, em_out, em_mode = "multiclass";
    em->add_option("--model", em_model, "model checkpoint")->required();
    em->add_option("--data", em_data, "corpus (JSONL)")->required();
    em->add_option("--mode", em_mode, "multiclass|multilabel");
    em->add_option("--out", em_out, "output directory");

    // --- cluster ---------------------------------------------------------
    auto* cl = app.add_subcommand("cluster", "k-means over column embeddings");
    cl->set_config("--config");
    std::string cl_embeddings, cl_out, cl_gold, cl_gold_mode = "multiclass";
    int cl_k = 2, cl_max_iters = 100;
    cl->add_option("--embeddings", cl_embeddings, "embeddings CSV from `embed`")->required();
    cl->add_option("--k", cl_k, "number of clusters")->required();
    cl->add_option("--max-iters", cl_max_iters, "Lloyd iteration cap");
    cl->add_option("--gold", cl_gold, "gold corpus for cluster quality scores");
    cl->add_option("--gold-mode", cl_gold_mode, "multiclass|multilabel");
    cl->add_option("--out", cl_out, "output directory");

    // --- analyze-attention ----------------------------------------------
    auto* aa = app.add_subcommand("analyze-attention", "type-level attention dependency matrix");
    aa->set_config("--config");
    std::string aa_model, aa_data, aa_out, aa_mode = "multiclass";
    aa->add_option("--model", aa_model, "model checkpoint")->required();
    aa->add_option("--data", aa_data, "corpus (JSONL)")->required();
    aa->add_option("--mode", aa_mode, "multiclass|multilabel");
    aa->add_option("--out", aa_out, "output directory");

    // --- sweeps ------------------------------------------------------------
    auto add_sweep_flags = [&](CLI::App* cmd, DataFlags& data, ModelFlags& model,
                               std::string& out, int& epochs, double& lr, bool& no_rel) {
        cmd->set_config("--config");
        data.attach(cmd);
        model.attach(cmd);
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--epochs", epochs, "training epochs per configuration");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_flag("--no-relations", no_rel, "type task only");
    };

    auto* sb = app.add_subcommand("sweep-budget", "token-budget sweep (train+eval per budget)");
    DataFlags sb_data;
    ModelFlags sb_model;
    std::string sb_out, sb_budgets = "8,16,32";
    int sb_epochs = 5;
    double sb_lr = 1e-3;
    bool sb_no_rel = false;
    add_sweep_flags(sb, sb_data, sb_model, sb_out, sb_epochs, sb_lr, sb_no_rel);
    sb->add_option("--budgets", sb_budgets, "comma list of per-column budgets");

    auto* sf = app.add_subcommand("sweep-fraction", "learning-curve sweep over data fractions");
    DataFlags sf_data;
    ModelFlags sf_model;
    std::string sf_out, sf_fractions = "0.1,0.25,0.5,1.0";
    int sf_epochs = 5;
    double sf_lr = 1e-3;
    bool sf_no_rel = false;
    add_sweep_flags(sf, sf_data, sf_model, sf_out, sf_epochs, sf_lr, sf_no_rel);
    sf->add_option("--fractions", sf_fractions, "comma list of training fractions in (0,1]");

    auto* st = app.add_subcommand("shuffle-test", "row/column shuffle robustness");
    DataFlags st_data;
    ModelFlags st_model;
    std::string st_out, st_mode = "rows";
    int st_epochs = 5;
    double st_lr = 1e-3;
    bool st_no_rel = false;
    add_sweep_flags(st, st_data, st_model, st_out, st_epochs, st_lr, st_no_rel);
    st->add_option("--shuffle-mode", st_mode, "rows|columns");

    // ------------------------------------------------------------------
    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << std::endl;
        return 0;
    } catch (const CLI::ParseError& e) {
        json err = {{"error", {{"code", 2}, {"message", e.what()}}}};
        std::cerr << err.dump() << std::endl;
        return 2;
    }

    if (workers > 0) kernels::set_num_threads(workers);

    std::string command = app.get_subcommands().front()->get_name();
    fs::path out_dir;
    try {
        std::string requested_out;
        if (command == "gen-data") requested_out = gen_out;
        else if (command == "build-vocab") requested_out = bv_out;
        else if (command == "pretrain") requested_out = pre_out;
        else if (command == "train") requested_out = tr_out;
        else if (command == "eval") requested_out = ev_out;
        else if (command == "predict") requested_out = pr_out;
        else if (command == "embed") requested_out = em_out;
        else if (command == "cluster") requested_out = cl_out;
        else if (command == "analyze-attention") requested_out = aa_out;
        else if (command == "sweep-budget") requested_out = sb_out;
        else if (command == "sweep-fraction") requested_out = sf_out;
        else if (command == "shuffle-test") requested_out = st_out;
        out_dir = resolve_out_dir(requested_out, command);
    } catch (const std::exception& e) {
        json err = {{"error", {{"code", 1}, {"message", e.what()}}}};
        std::cerr << err.dump() << std::endl;
        return 1;
    }

    Manifest manifest(command, out_dir);
    manifest.j["seed"] = seed;
    manifest.j["out_dir"] = out_dir.string();
    manifest.j["args"] = args;

    auto fail = [&](int code, const std::string& message) {
        manifest.write("error", message);
        json err = {{"error", {{"code", code}, {"message", message}}}};
        std::cerr << err.dump() << std::endl;
        return code;
    };

    try {
        if (command == "gen-data") {
            Corpus corpus;
            if (generator == "context") {
                spec.with_headers = !no_headers;
                corpus = generate_synthetic_corpus(spec, seed);
            } else if (generator == "bigram") {
                corpus = generate_bigram_corpus(spec.num_tables, bigram_pairs, bigram_rows,
                                                bigram_cols, seed);
            } else {
                throw ConfigError("unknown generator: " + generator);
            }
            save_corpus(corpus, (out_dir / "corpus.jsonl").string());
            manifest.j["outputs"] = {(out_dir / "corpus.jsonl").string()};
            manifest.j["tables"] = corpus.num_tables();
        } else if (command == "build-vocab") {
            Corpus corpus = load_corpus(bv_data, LabelMode::Multilabel);
            TokenVocabulary vocab = build_token_vocabulary(corpus, bv_max_size, bv_min_freq);
            vocab.save((out_dir / "vocab.txt").string());
            manifest.j["outputs"] = {(out_dir / "vocab.txt").string()};
            manifest.j["vocab_size"] = vocab.size();
        } else if (command == "pretrain") {
            Corpus corpus = load_corpus(pre_data, LabelMode::Multilabel);
            TokenVocabulary vocab = pre_vocab.empty()
                                        ? build_token_vocabulary(corpus, 50000, 1)
                                        : TokenVocabulary::load(pre_vocab);
            EncoderConfig enc = pre_model.encoder(vocab.size(), seed);
            EncoderParams params = EncoderParams::init(enc);
            mlm_cfg.seed = seed;
            mlm_cfg.serializer = pre_model.serializer();
            std::vector<double> curve = pretrain_mlm(params, corpus, mlm_cfg, vocab);
            save_encoder_checkpoint(params, vocab, mlm_cfg.serializer,
                                    (out_dir / "encoder.ckpt.json").string());
            std::string csv = "epoch,masked_ce\n";
            char buf[64];
            for (size_t i = 0; i < curve.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, curve[i]);
                csv += buf;
            }
            write_text(out_dir / "mlm_curve.csv", csv);
            vocab.save((out_dir / "vocab.txt").string());
            manifest.j["final_masked_ce"] = curve.empty() ? 0.0 : curve.back();
        } else if (command == "train") {
            LoadedData data = load_data(tr_data, seed);
            unify_label_spaces(data);
            TokenVocabulary vocab =
                tr_vocab.empty() ? build_token_vocabulary(data.train, tr_vocab_max,
                                                          tr_vocab_min_freq)
                                 : TokenVocabulary::load(tr_vocab);

            AnnotationModel model;
            if (!tr_init.empty()) {
                EncoderBundle init = load_encoder_checkpoint(tr_init);
                model.encoder = std::move(init.params);
                vocab = std::move(init.vocab);
                if (model.encoder.config.vocab_size != vocab.size())
                    throw ConfigError("init checkpoint vocabulary mismatch");
            } else {
                model.encoder = EncoderParams::init(tr_model.encoder(vocab.size(), seed));
            }
            LabelMode mode = tr_data.mode();
            model.type_mode = mode;
            model.relation_mode = mode;
            model.type_head = TypeHead::init(model.encoder.config.d_model,
                                             std::max(1, data.train.type_labels.size()), seed);
            model.relation_head =
                RelationHead::init(model.encoder.config.d_model,
                                   std::max(1, data.train.relation_labels.size()), seed);

            TrainConfig cfg;
            cfg.num_epochs = tr_epochs;
            cfg.learning_rate = tr_lr;
            cfg.clip_norm = tr_clip;
            cfg.seed = seed;
            cfg.serialization = parse_serialization(tr_serialization);
            cfg.serializer = tr_model.serializer();
            if (!tr_init.empty()) cfg.serializer.max_seq_len = model.encoder.config.max_seq_len;

            std::vector<TaskSpec> tasks;
            std::stringstream ss(tr_tasks);
            std::string name;
            while (std::getline(ss, name, ',')) {
                if (name == "type")
                    tasks.push_back({"type", TaskKind::ColumnType, &data.train,
                                     data.has_valid ? &data.valid : nullptr, mode, tr_batch});
                else if (name == "relation")
                    tasks.push_back({"relation", TaskKind::ColumnRelation, &data.train,
                                     data.has_valid ? &data.valid : nullptr, mode, tr_batch});
                else
                    throw ConfigError("unknown task: " + name);
            }

            if (tr_dump_serialized) {
                std::string dump;
                for (const Table& t : data.train.tables) {
                    if (t.num_columns() > max_columns(cfg.serializer)) continue;
                    dump += t.id + "\t" +
                            render_tokens(serialize_table(t, cfg.serializer, vocab), vocab) + "\n";
                }
                write_text(out_dir / "serialized.txt", dump);
            }

            TrainHistory history = train_multitask(model, tasks, cfg, vocab);

            ModelBundle bundle;
            bundle.model = std::move(model);
            bundle.vocab = vocab;
            bundle.type_labels = data.train.type_labels;
            bundle.relation_labels = data.train.relation_labels;
            bundle.serializer = cfg.serializer;
            bundle.serialization = cfg.serialization;
            save_checkpoint(bundle, (out_dir / "model.ckpt.json").string());
            write_text(out_dir / "history.csv", history.to_csv());
            write_text(out_dir / "timing.csv", history.timing_csv());
            vocab.save((out_dir / "vocab.txt").string());

            if (data.has_test) {
                json test_eval;
                for (const TaskSpec& task : tasks) {
                    EvalReport rep = evaluate_task(bundle.model, data.test, task.kind,
                                                   cfg.serialization, cfg.serializer, vocab);
                    test_eval[task.name] = json::parse(rep.to_json(
                        task.kind == TaskKind::ColumnType ? data.train.type_labels.names
                                                          : data.train.relation_labels.names));
                }
                write_text(out_dir / "test_eval.json", test_eval.dump(2) + "\n");
            }
            manifest.j["best_epoch"] = history.best_epoch;
            manifest.j["best_score"] = history.best_score;
        } else if (command == "eval") {
            LabelMode mode = parse_mode(ev_mode);
            Corpus gold = load_corpus(ev_gold, mode);
            std::ifstream pred_in(ev_pred);
            if (!pred_in) throw DataError("cannot open prediction file: " + ev_pred);

            std::vector<std::set<int>> preds, golds;
            const LabelVocabulary& labels =
                ev_task == "type" ? gold.type_labels : gold.relation_labels;
            std::map<std::pair<std::string, int>, std::set<int>> gold_types;
            std::map<std::tuple<std::string, int, int>, std::set<int>> gold_rels;
            for (const auto& a : gold.type_annotations)
                gold_types[{a.table_id, a.column_index}] = a.labels;
            for (const auto& a : gold.relation_annotations)
                gold_rels[{a.table_id, a.subject_index, a.object_index}] = a.labels;

            std::string line;
            int line_no = 0;
            while (std::getline(pred_in, line)) {
                ++line_no;
                if (line.empty()) continue;
                json j = json::parse(line);
                std::set<int> pred;
                for (const auto& name : j.at("pred").get<std::vector<std::string>>())
                    pred.insert(labels.id_of(name));
                if (ev_task == "type") {
                    if (!j.contains("col")) continue;  // relation row in a mixed dump
                    auto key = std::make_pair(j.at("table").get<std::string>(),
                                              j.at("col").get<int>());
                    auto it = gold_types.find(key);
                    if (it == gold_types.end())
                        throw DataError("prediction line " + std::to_string(line_no) +
                                        " has no gold annotation");
                    preds.push_back(std::move(pred));
                    golds.push_back(it->second);
                } else {
                    if (!j.contains("subj")) continue;
                    auto key = std::make_tuple(j.at("table").get<std::string>(),
                                               j.at("subj").get<int>(), j.at("obj").get<int>());
                    auto it = gold_rels.find(key);
                    if (it == gold_rels.end())
                        throw DataError("prediction line " + std::to_string(line_no) +
                                        " has no gold annotation");
                    preds.push_back(std::move(pred));
                    golds.push_back(it->second);
                }
            }
            EvalReport rep = evaluate(preds, golds, mode);
            write_text(out_dir / "report.json", rep.to_json(labels.names) + "\n");
            write_text(out_dir / "per_class.csv", rep.per_class_csv(labels.names));
            manifest.j["micro_f1"] = rep.micro_f1;
            manifest.j["macro_f1"] = rep.macro_f1;
        } else if (command == "predict") {
            ModelBundle bundle = load_checkpoint(pr_model);
            LabelMode mode = parse_mode(pr_mode);
            Corpus corpus = load_corpus(pr_data, mode);
            LabelVocabulary types = bundle.type_labels, rels = bundle.relation_labels;
            align_labels(corpus, types, rels);
            if (types.size() > bundle.type_labels.size() ||
                rels.size() > bundle.relation_labels.size())
                throw DataError("corpus contains labels unknown to the model");

            std::ofstream out(out_dir / "predictions.jsonl");
            long rows = 0;
            for (const auto& p :
                 predict_corpus_types(bundle.model, corpus, bundle.serialization,
                                      bundle.serializer, bundle.vocab)) {
                out << prediction_to_json(p, bundle.type_labels).dump() << "\n";
                ++rows;
            }
            for (const auto& p :
                 predict_corpus_relations(bundle.model, corpus, bundle.serialization,
                                          bundle.serializer, bundle.vocab)) {
                out << prediction_to_json(p, bundle.relation_labels).dump() << "\n";
                ++rows;
            }
            if (pr_dump_serialized) {
                std::string dump;
                for (const Table& t : corpus.tables) {
                    if (t.num_columns() > max_columns(bundle.serializer)) continue;
                    dump += t.id + "\t" +
                            render_tokens(serialize_table(t, bundle.serializer, bundle.vocab),
                                          bundle.vocab) +
                            "\n";
                }
                write_text(out_dir / "serialized.txt", dump);
            }
            manifest.j["rows"] = rows;
        } else if (command == "embed") {
            ModelBundle bundle = load_checkpoint(em_model);
            Corpus corpus = load_corpus(em_data, parse_mode(em_mode));
            std::ofstream out(out_dir / "embeddings.csv");
            out << "table,col";
            for (int j = 0; j < bundle.model.encoder.config.d_model; ++j) out << ",v" << j;
            out << "\n";
            char buf[48];
            for (const Table& t : corpus.tables) {
                if (t.num_columns() > max_columns(bundle.serializer)) continue;
                Matrix emb = extract_column_embeddings(bundle.model.encoder, t, bundle.serializer,
                                                       bundle.vocab);
                for (int c = 0; c < emb.rows; ++c) {
                    out << t.id << "," << c;
                    for (int j = 0; j < emb.cols; ++j) {
                        std::snprintf(buf, sizeof(buf), ",%.17g", emb.at(c, j));
                        out << buf;
                    }
                    out << "\n";
                }
            }
        } else if (command == "cluster") {
            std::ifstream in(cl_embeddings);
            if (!in) throw DataError("cannot open embeddings file: " + cl_embeddings);
            std::string header;
            std::getline(in, header);
            std::vector<std::pair<std::string, int>> keys;
            std::vector<std::vector<double>> rows;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::stringstream ss(line);
                std::string cell;
                std::getline(ss, cell, ',');
                std::string table = cell;
                std::getline(ss, cell, ',');
                int col = std::stoi(cell);
                std::vector<double> v;
                while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
                keys.emplace_back(table, col);
                rows.push_back(std::move(v));
            }
            if (rows.empty()) throw DataError("embeddings file has no rows");
            Matrix vectors(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
            for (size_t i = 0; i < rows.size(); ++i)
                std::copy(rows[i].begin(), rows[i].end(), vectors.row(static_cast<int>(i)));
            KMeansResult km = kmeans(vectors, cl_k, seed, cl_max_iters);

            std::ofstream out(out_dir / "assignments.csv");
            out << "table,col,cluster\n";
            for (size_t i = 0; i < keys.size(); ++i)
                out << keys[i].first << "," << keys[i].second << "," << km.assignments[i] << "\n";
            manifest.j["inertia"] = km.inertia;
            manifest.j["iterations"] = km.iterations;

            if (!cl_gold.empty()) {
                Corpus gold = load_corpus(cl_gold, parse_mode(cl_gold_mode));
                std::map<std::pair<std::string, int>, int> gold_of;
                for (const auto& a : gold.type_annotations)
                    gold_of[{a.table_id, a.column_index}] = *a.labels.begin();
                std::vector<int> pred_assign, gold_assign;
                for (size_t i = 0; i < keys.size(); ++i) {
                    auto it = gold_of.find(keys[i]);
                    if (it == gold_of.end()) continue;
                    pred_assign.push_back(km.assignments[i]);
                    gold_assign.push_back(it->second);
                }
                if (!pred_assign.empty()) {
                    ClusterReport rep = clustering_scores(pred_assign, gold_assign);
                    write_text(out_dir / "cluster_report.json", rep.to_json() + "\n");
                    manifest.j["v_measure"] = rep.v_measure;
                }
            }
        } else if (command == "analyze-attention") {
            ModelBundle bundle = load_checkpoint(aa_model);
            Corpus corpus = load_corpus(aa_data, parse_mode(aa_mode));
            LabelVocabulary types = bundle.type_labels, rels = bundle.relation_labels;
            align_labels(corpus, types, rels);
            DependencyMatrix dep =
                column_dependency_matrix(bundle.model, corpus, bundle.serializer, bundle.vocab);
            write_text(out_dir / "dependency.csv", dep.values_csv());
            write_text(out_dir / "dependency_counts.csv", dep.counts_csv());
        } else if (command == "sweep-budget" || command == "sweep-fraction" ||
                   command == "shuffle-test") {
            DataFlags& dflags = command == "sweep-budget"
                                    ? sb_data
                                    : (command == "sweep-fraction" ? sf_data : st_data);
            ModelFlags& mflags = command == "sweep-budget"
                                     ? sb_model
                                     : (command == "sweep-fraction" ? sf_model : st_model);
            int epochs = command == "sweep-budget" ? sb_epochs
                                                   : (command == "sweep-fraction" ? sf_epochs
                                                                                  : st_epochs);
            double lr = command == "sweep-budget" ? sb_lr
                                                  : (command == "sweep-fraction" ? sf_lr : st_lr);
            bool no_rel = command == "sweep-budget"
                              ? sb_no_rel
                              : (command == "sweep-fraction" ? sf_no_rel : st_no_rel);

            LoadedData data = load_data(dflags, seed);
            unify_label_spaces(data);
            TokenVocabulary vocab = build_token_vocabulary(data.train, 50000, 1);

            SweepSetup setup;
            setup.train = &data.train;
            setup.valid = data.has_valid ? &data.valid : nullptr;
            setup.test = data.has_test ? &data.test : (data.has_valid ? &data.valid : nullptr);
            setup.vocab = &vocab;
            setup.encoder = mflags.encoder(vocab.size(), seed);
            setup.train_cfg.num_epochs = epochs;
            setup.train_cfg.learning_rate = lr;
            setup.train_cfg.seed = seed;
            setup.train_cfg.serializer = mflags.serializer();
            setup.mode = dflags.mode();
            setup.with_relations = !no_rel && !data.train.relation_annotations.empty();

            SweepReport report;
            std::string filename;
            if (command == "sweep-budget") {
                std::vector<int> budgets;
                std::stringstream ss(sb_budgets);
                std::string item;
                while (std::getline(ss, item, ',')) budgets.push_back(std::stoi(item));
                report = token_budget_sweep(setup, budgets);
                filename = "budget_sweep.csv";
            } else if (command == "sweep-fraction") {
                report = learning_curve(setup, parse_fractions(sf_fractions));
                filename = "fraction_sweep.csv";
            } else {
                ShuffleMode mode = st_mode == "rows" ? ShuffleMode::Rows : ShuffleMode::Columns;
                if (st_mode != "rows" && st_mode != "columns")
                    throw ConfigError("unknown shuffle mode: " + st_mode);
                report = shuffle_robustness(setup, mode, seed);
                filename = "shuffle_sweep.csv";
            }
            write_text(out_dir / filename, report.to_csv());
            manifest.j["rows"] = report.rows.size();
        }
    } catch (const ConfigError& e) {
        return fail(3, e.what());
    } catch (const CLI::ParseError& e) {
        return fail(2, e.what());
    } catch (const std::exception& e) {
        return fail(1, e.what());
    }

    manifest.write("success");
    return 0;
}

}  // namespace tabanno::cli
