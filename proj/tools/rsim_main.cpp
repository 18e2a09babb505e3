// Command-line front end: corpus synthesis, model training, feature
// extraction, querying, and evaluation. Every command that writes files also
// drops a run manifest (JSON) recording the exact configuration, seeds,
// input/output paths with CRC32 checksums, and wall-clock time, so results
// can be traced back to how they were produced. On error the partially
// written outputs are removed, a one-line diagnostic goes to stderr, and the
// exit code is nonzero.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <zlib.h>

#include "rsim/checkpoint.hpp"
#include "rsim/dataset.hpp"
#include "rsim/errors.hpp"
#include "rsim/evaluation.hpp"
#include "rsim/feature_store.hpp"
#include "rsim/image_io.hpp"
#include "rsim/metrics.hpp"
#include "rsim/network.hpp"
#include "rsim/retrieval.hpp"
#include "rsim/threading.hpp"
#include "rsim/training.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Outputs registered here are deleted unless the command commits them.
struct ScopedOutputs {
    std::vector<fs::path> paths;
    bool committed = false;

    void track(fs::path p) { paths.push_back(std::move(p)); }
    void commit() { committed = true; }
    ~ScopedOutputs() {
        if (committed) return;
        std::error_code ec;
        for (const auto& p : paths) fs::remove_all(p, ec);
    }
};

std::uint32_t crc32_of_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rsim::IoError("cannot open " + path.string());
    uLong crc = ::crc32(0UL, nullptr, 0);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount()));
    return static_cast<std::uint32_t>(crc);
}

// Shared run-manifest skeleton; commands add their own config block.
struct RunClock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void write_manifest(const fs::path& path, const std::string& command, const ordered_json& config,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    const RunClock& clock) {
    ordered_json m;
    m["command"] = command;
    m["config"] = config;
    m["threads"] = rsim::thread_budget();
    m["inputs"] = ordered_json::array();
    for (const auto& p : inputs) {
        ordered_json e;
        e["path"] = p.string();
        if (fs::is_regular_file(p)) e["crc32"] = crc32_of_file(p);
        m["inputs"].push_back(std::move(e));
    }
    m["outputs"] = ordered_json::array();
    for (const auto& p : outputs) {
        ordered_json e;
        e["path"] = p.string();
        if (fs::is_regular_file(p)) e["crc32"] = crc32_of_file(p);
        m["outputs"].push_back(std::move(e));
    }
    m["wall_seconds"] = clock.seconds();
    std::ofstream out(path);
    if (!out) throw rsim::IoError("cannot write " + path.string());
    out << m.dump(2) << '\n';
}

rsim::NetworkConfig config_by_name(const std::string& name) {
    if (name == "compact") return rsim::NetworkConfig::compact();
    if (name == "full") return rsim::NetworkConfig::full();
    throw rsim::ValueError("unknown network config '" + name + "' (expected compact or full)");
}

std::vector<rsim::Tensor> load_all_images(const rsim::Dataset& ds, int h, int w) {
    std::vector<rsim::Tensor> images(ds.items.size());
    rsim::parallel_for(static_cast<std::int64_t>(ds.items.size()), [&](std::int64_t i) {
        images[static_cast<std::size_t>(i)] =
            rsim::load_image(ds.items[static_cast<std::size_t>(i)], h, w);
    });
    return images;
}

rsim::Checkpoint load_checkpoint_with_autoencoder(const fs::path& path) {
    rsim::Checkpoint ck = rsim::Checkpoint::load(path);
    if (!ck.autoencoder || ck.autoencoder->encoder.empty())
        throw rsim::ValueError(path.string() + " holds no encoder parameters");
    return ck;
}

std::unique_ptr<rsim::Scorer> build_scorer(const std::string& name, const rsim::Checkpoint* model) {
    const rsim::ScorerKind kind = rsim::scorer_kind_from_name(name);
    if (kind != rsim::ScorerKind::discriminator) return rsim::make_distance_scorer(kind);
    if (!model || !model->discriminator)
        throw rsim::ValueError("scorer 'discriminator' needs a checkpoint with discriminator parameters");
    return rsim::make_discriminator_scorer(model->config, *model->discriminator);
}

// ---------------------------------------------------------------- commands

struct SynthArgs {
    std::string out;
    rsim::SyntheticSpec spec;
};

int run_synth(const SynthArgs& a) {
    RunClock clock;
    ScopedOutputs outputs;
    outputs.track(a.out);
    const rsim::Dataset ds = rsim::generate_synthetic(a.out, a.spec);

    ordered_json cfg;
    cfg["classes"] = a.spec.classes;
    cfg["images_per_class"] = a.spec.images_per_class;
    cfg["image_size"] = a.spec.image_size;
    cfg["noise"] = a.spec.noise;
    cfg["jitter"] = a.spec.jitter;
    cfg["seed"] = a.spec.seed;
    write_manifest(fs::path(a.out) / "run.json", "synth", cfg, {}, {fs::path(a.out) / "manifest.json"},
                   clock);
    outputs.commit();
    std::printf("wrote %zu images (%d classes) under %s\n", ds.items.size(), a.spec.classes,
                a.out.c_str());
    return 0;
}

struct TrainAeArgs {
    std::string data;
    std::string out;
    std::string config = "compact";
    rsim::TrainConfig tc;
};

int run_train_ae(const TrainAeArgs& a) {
    RunClock clock;
    const rsim::NetworkConfig cfg = config_by_name(a.config);
    const rsim::Dataset ds = rsim::scan_directory(a.data);
    std::printf("loading %zu images at %dx%d\n", ds.items.size(), cfg.input_h, cfg.input_w);
    const auto images = load_all_images(ds, cfg.input_h, cfg.input_w);

    rsim::Rng init_rng(rsim::mix_seed(a.tc.seed, 10));
    rsim::AutoencoderParams params = rsim::init_autoencoder(cfg, init_rng);
    const rsim::TrainResult result =
        rsim::train_autoencoder(images, cfg, params, a.tc, [](int epoch, double loss) {
            std::printf("epoch %3d  loss %.6f\n", epoch, loss);
            std::fflush(stdout);
        });

    ScopedOutputs outputs;
    outputs.track(a.out);
    rsim::Checkpoint ck;
    ck.config = cfg;
    ck.autoencoder = std::move(params);
    ck.save(a.out);

    ordered_json jc;
    jc["network"] = a.config;
    jc["epochs"] = a.tc.epochs;
    jc["batch_size"] = a.tc.batch_size;
    jc["learning_rate"] = a.tc.learning_rate;
    jc["seed"] = a.tc.seed;
    jc["patience"] = a.tc.patience;
    jc["data"] = a.data;
    jc["best_epoch"] = result.best_epoch;
    jc["best_loss"] = result.best_loss;
    jc["early_stopped"] = result.early_stopped;
    const fs::path manifest = a.out + ".run.json";
    outputs.track(manifest);
    write_manifest(manifest, "train-ae", jc, {a.data}, {a.out}, clock);
    outputs.commit();
    std::printf("best epoch %d, loss %.6f; checkpoint %s\n", result.best_epoch, result.best_loss,
                a.out.c_str());
    return 0;
}

struct ExtractArgs {
    std::string data;
    std::string ae;
    std::string out;
};

int run_extract(const ExtractArgs& a) {
    RunClock clock;
    const rsim::Checkpoint ck = load_checkpoint_with_autoencoder(a.ae);
    const rsim::NetworkConfig& cfg = ck.config;
    const rsim::Dataset ds = rsim::scan_directory(a.data);
    const auto images = load_all_images(ds, cfg.input_h, cfg.input_w);

    std::vector<rsim::Tensor> features(images.size());
    rsim::parallel_for(static_cast<std::int64_t>(images.size()), [&](std::int64_t i) {
        features[static_cast<std::size_t>(i)] =
            rsim::encode(images[static_cast<std::size_t>(i)], cfg, *ck.autoencoder);
    });

    rsim::FeatureStore store(cfg.latent_shape());
    for (std::size_t i = 0; i < features.size(); ++i)
        store.add(ds.items[i].id, ds.items[i].label, features[i]);

    ScopedOutputs outputs;
    outputs.track(a.out);
    store.save(a.out);

    ordered_json jc;
    jc["data"] = a.data;
    jc["checkpoint"] = a.ae;
    jc["feature_shape"] = rsim::shape_str(store.extents());
    const fs::path manifest = a.out + ".run.json";
    outputs.track(manifest);
    write_manifest(manifest, "extract", jc, {a.data, a.ae}, {a.out}, clock);
    outputs.commit();
    std::printf("indexed %zu feature volumes of shape %s into %s\n", store.size(),
                rsim::shape_str(store.extents()).c_str(), a.out.c_str());
    return 0;
}

struct TrainDiscArgs {
    std::string store;
    std::string ae;
    std::string out;
    rsim::TrainConfig tc;
    double split_fraction = 0.8;
    std::uint64_t split_seed = 0;
    std::size_t pairs_per_epoch = 0;
};

int run_train_disc(const TrainDiscArgs& a) {
    RunClock clock;
    rsim::Checkpoint ck = load_checkpoint_with_autoencoder(a.ae);
    if (ck.config.discriminator.empty())
        throw rsim::ValueError("network config has no discriminator stages");
    const rsim::FeatureStore store = rsim::FeatureStore::load(a.store);
    if (store.extents() != ck.config.latent_shape())
        throw rsim::ValueError("feature store shape does not match the checkpoint's encoder output");

    const auto labels = store.labels();
    const rsim::DatasetSplit split = rsim::split_indices(labels, {a.split_fraction, a.split_seed});
    std::vector<rsim::Tensor> features(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) features[i] = store.features_as_tensor(i);

    rsim::Rng init_rng(rsim::mix_seed(a.tc.seed, 11));
    rsim::DiscriminatorParams params = rsim::init_discriminator(ck.config, init_rng);
    const rsim::TrainResult result = rsim::train_discriminator(
        features, labels, split.train, ck.config, params, a.tc, a.pairs_per_epoch,
        [](int epoch, double loss) {
            std::printf("epoch %3d  loss %.6f\n", epoch, loss);
            std::fflush(stdout);
        });

    ScopedOutputs outputs;
    outputs.track(a.out);
    ck.discriminator = std::move(params);
    ck.save(a.out);

    ordered_json jc;
    jc["store"] = a.store;
    jc["base_checkpoint"] = a.ae;
    jc["epochs"] = a.tc.epochs;
    jc["batch_size"] = a.tc.batch_size;
    jc["learning_rate"] = a.tc.learning_rate;
    jc["seed"] = a.tc.seed;
    jc["split_fraction"] = a.split_fraction;
    jc["split_seed"] = a.split_seed;
    jc["pairs_per_epoch"] = a.pairs_per_epoch;
    jc["train_pool"] = split.train.size();
    jc["best_epoch"] = result.best_epoch;
    jc["best_loss"] = result.best_loss;
    const fs::path manifest = a.out + ".run.json";
    outputs.track(manifest);
    write_manifest(manifest, "train-disc", jc, {a.store, a.ae}, {a.out}, clock);
    outputs.commit();
    std::printf("best epoch %d, loss %.6f; checkpoint %s\n", result.best_epoch, result.best_loss,
                a.out.c_str());
    return 0;
}

struct QueryArgs {
    std::string store;
    std::string model;
    std::string image;
    std::string scorer = "discriminator";
    std::string out;
    std::string exclude_id;
    int top_n = 10;
};

int run_query(const QueryArgs& a) {
    RunClock clock;
    if (a.top_n < 1) throw rsim::ValueError("--top-n must be >= 1");
    const rsim::Checkpoint ck = load_checkpoint_with_autoencoder(a.model);
    const rsim::FeatureStore store = rsim::FeatureStore::load(a.store);
    const auto scorer = build_scorer(a.scorer, &ck);

    const rsim::Tensor img =
        rsim::resize_bilinear(rsim::read_png(a.image), ck.config.input_h, ck.config.input_w);
    const rsim::Tensor features = rsim::encode(img, ck.config, *ck.autoencoder);

    const std::optional<std::string> exclude =
        a.exclude_id.empty() ? std::nullopt : std::optional<std::string>(a.exclude_id);
    const auto ranking =
        rsim::top_n(store, features, *scorer, static_cast<std::size_t>(a.top_n), exclude);

    std::printf("%-4s %-32s %-12s %s\n", "rank", "image_id", "class", "score");
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const auto& rec = store.record(ranking[i].index);
        std::printf("%-4zu %-32s %-12s %.6g\n", i + 1, rec.id.c_str(), rec.label.c_str(),
                    ranking[i].score);
    }

    if (!a.out.empty()) {
        ScopedOutputs outputs;
        outputs.track(a.out);
        rsim::export_ranking_csv(a.out, store, ranking);
        ordered_json jc;
        jc["store"] = a.store;
        jc["model"] = a.model;
        jc["image"] = a.image;
        jc["scorer"] = a.scorer;
        jc["top_n"] = a.top_n;
        if (!a.exclude_id.empty()) jc["exclude_id"] = a.exclude_id;
        const fs::path manifest = a.out + ".run.json";
        outputs.track(manifest);
        write_manifest(manifest, "query", jc, {a.store, a.model, a.image}, {a.out}, clock);
        outputs.commit();
    }
    return 0;
}

struct EvaluateArgs {
    std::string store;
    std::string model;
    std::string scorer = "discriminator";
    std::string protocol = "retrieval";
    std::string out;
    int queries_per_class = 0;
    double split_fraction = 0.8;
    std::uint64_t split_seed = 0;
};

int run_evaluate(const EvaluateArgs& a) {
    RunClock clock;
    const rsim::FeatureStore store = rsim::FeatureStore::load(a.store);

    std::optional<rsim::Checkpoint> ck;
    if (!a.model.empty()) ck = rsim::Checkpoint::load(a.model);
    const auto scorer = build_scorer(a.scorer, ck ? &*ck : nullptr);

    rsim::EvalOptions opt;
    opt.protocol = rsim::eval_protocol_from_name(a.protocol);
    opt.split = {a.split_fraction, a.split_seed};
    opt.queries_per_class = a.queries_per_class;
    const rsim::EvalResult result = rsim::run_evaluation(store, *scorer, opt);

    std::ostringstream report;
    report << "protocol: " << a.protocol << "\n";
    report << "scorer: " << a.scorer << "\n";
    report << "store records: " << store.size() << "\n";
    report << "split: " << a.split_fraction << " seed " << a.split_seed << "\n";
    report << "queries per class: " << a.queries_per_class << "\n";
    report << rsim::to_text(result.report);
    std::fputs(report.str().c_str(), stdout);

    if (!a.out.empty()) {
        ScopedOutputs outputs;
        fs::create_directories(a.out);
        const fs::path report_path = fs::path(a.out) / "report.txt";
        const fs::path csv_path = fs::path(a.out) / "metrics.csv";
        outputs.track(report_path);
        outputs.track(csv_path);
        {
            std::ofstream rf(report_path);
            if (!rf) throw rsim::IoError("cannot write " + report_path.string());
            rf << report.str();
        }
        {
            std::ofstream cf(csv_path);
            if (!cf) throw rsim::IoError("cannot write " + csv_path.string());
            cf << rsim::to_csv(result.report);
        }
        ordered_json jc;
        jc["store"] = a.store;
        if (!a.model.empty()) jc["model"] = a.model;
        jc["scorer"] = a.scorer;
        jc["protocol"] = a.protocol;
        jc["queries_per_class"] = a.queries_per_class;
        jc["split_fraction"] = a.split_fraction;
        jc["split_seed"] = a.split_seed;
        jc["queries"] = result.queries.size();
        std::vector<fs::path> inputs{a.store};
        if (!a.model.empty()) inputs.push_back(a.model);
        const fs::path manifest = fs::path(a.out) / "run.json";
        outputs.track(manifest);
        write_manifest(manifest, "evaluate", jc, inputs, {report_path, csv_path}, clock);
        outputs.commit();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised image matching: autoencoder features scored by a learned discriminator"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* cs = app.add_subcommand("synth", "render a synthetic labeled image corpus");
    cs->add_option("--out", synth.out, "output directory")->required();
    cs->add_option("--classes", synth.spec.classes, "number of shape classes (max 8)");
    cs->add_option("--per-class", synth.spec.images_per_class, "images per class");
    cs->add_option("--size", synth.spec.image_size, "square image size in pixels");
    cs->add_option("--noise", synth.spec.noise, "gaussian pixel noise sigma");
    cs->add_option("--jitter", synth.spec.jitter, "geometric jitter scale");
    cs->add_option("--seed", synth.spec.seed, "corpus seed");

    TrainAeArgs tae;
    auto* ct = app.add_subcommand("train-ae", "train the reconstruction autoencoder");
    ct->add_option("--data", tae.data, "image corpus directory")->required();
    ct->add_option("--out", tae.out, "checkpoint output path")->required();
    ct->add_option("--config", tae.config, "network size: compact or full");
    ct->add_option("--epochs", tae.tc.epochs, "training epochs");
    ct->add_option("--batch", tae.tc.batch_size, "batch size");
    ct->add_option("--lr", tae.tc.learning_rate, "learning rate");
    ct->add_option("--seed", tae.tc.seed, "training seed");
    ct->add_option("--patience", tae.tc.patience, "early-stop patience (0 disables)");

    ExtractArgs ext;
    auto* ce = app.add_subcommand("extract", "encode a corpus into a feature store");
    ce->add_option("--data", ext.data, "image corpus directory")->required();
    ce->add_option("--ae", ext.ae, "autoencoder checkpoint")->required();
    ce->add_option("--out", ext.out, "feature store output path")->required();

    TrainDiscArgs tdc;
    auto* cd = app.add_subcommand("train-disc", "train the match discriminator on stored features");
    cd->add_option("--store", tdc.store, "feature store")->required();
    cd->add_option("--ae", tdc.ae, "checkpoint providing config and encoder")->required();
    cd->add_option("--out", tdc.out, "checkpoint output path")->required();
    cd->add_option("--epochs", tdc.tc.epochs, "training epochs");
    cd->add_option("--batch", tdc.tc.batch_size, "batch size");
    cd->add_option("--lr", tdc.tc.learning_rate, "learning rate");
    cd->add_option("--seed", tdc.tc.seed, "training seed");
    cd->add_option("--patience", tdc.tc.patience, "early-stop patience (0 disables)");
    cd->add_option("--split-frac", tdc.split_fraction, "train fraction of the store");
    cd->add_option("--split-seed", tdc.split_seed, "split seed");
    cd->add_option("--pairs", tdc.pairs_per_epoch, "pairs per epoch (0 = 2x pool size)");

    QueryArgs qry;
    auto* cq = app.add_subcommand("query", "rank stored images against one query image");
    cq->add_option("--store", qry.store, "feature store")->required();
    cq->add_option("--model", qry.model, "checkpoint with encoder (and discriminator)")->required();
    cq->add_option("--image", qry.image, "query image (PNG)")->required();
    cq->add_option("--scorer", qry.scorer, "discriminator, manhattan, euclidean, or cosine");
    cq->add_option("--top-n", qry.top_n, "results to show");
    cq->add_option("--out", qry.out, "also write the ranking as CSV here");
    cq->add_option("--exclude-id", qry.exclude_id, "drop this record id from the candidates");

    EvaluateArgs evl;
    auto* cv = app.add_subcommand("evaluate", "run a retrieval or matching evaluation");
    cv->add_option("--store", evl.store, "feature store")->required();
    cv->add_option("--model", evl.model, "checkpoint (required for the discriminator scorer)");
    cv->add_option("--scorer", evl.scorer, "discriminator, manhattan, euclidean, or cosine");
    cv->add_option("--protocol", evl.protocol, "retrieval or matching");
    cv->add_option("--queries-per-class", evl.queries_per_class, "cap queries per class (0 = all)");
    cv->add_option("--split-frac", evl.split_fraction, "train fraction of the split");
    cv->add_option("--split-seed", evl.split_seed, "split seed");
    cv->add_option("--out", evl.out, "directory for report.txt, metrics.csv, run.json");

    CLI11_PARSE(app, argc, argv);

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        if (cs->parsed()) return run_synth(synth);
        if (ct->parsed()) return run_train_ae(tae);
        if (ce->parsed()) return run_extract(ext);
        if (cd->parsed()) return run_train_disc(tdc);
        if (cq->parsed()) return run_query(qry);
        if (cv->parsed()) return run_evaluate(evl);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rsim %s: %s\n", sub.c_str(), e.what());
        return 1;
    }
    return 0;
}
