// tnvae: data generation, training, sweeps, metrics and reports.
//
// Exit codes: 0 ok, 1 usage/config error, 2 data error (also: partial report
// from an unfinished sweep), 3 numeric or runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tnvae/checkpoint.hpp"
#include "tnvae/config.hpp"
#include "tnvae/error.hpp"
#include "tnvae/metrics.hpp"
#include "tnvae/report.hpp"
#include "tnvae/series.hpp"
#include "tnvae/sweep.hpp"
#include "tnvae/vae.hpp"

namespace fs = std::filesystem;
using namespace tnvae;

namespace {

constexpr int kExitPartial = 2;

fs::path out_root()
{
    if (const char* env = std::getenv("TNVAE_OUT_ROOT"); env && *env)
        return env;
    return "tnvae-out";
}

fs::path resolve_out(const std::string& given, const std::string& fallback)
{
    return given.empty() ? out_root() / fallback : fs::path(given);
}

/// Defaults, then the config file, then `--set` overrides. Unknown keys fail.
KeyValueConfig layered_config(const KeyValueConfig& defaults, const std::string& config_path,
                              const std::vector<std::string>& overrides)
{
    KeyValueConfig cfg = defaults;
    const std::vector<std::string>& allowed = defaults.keys();
    if (!config_path.empty()) {
        const KeyValueConfig file = KeyValueConfig::load(config_path);
        for (const std::string& k : file.keys())
            cfg.apply_override(k + "=" + file.get(k), allowed);
    }
    for (const std::string& o : overrides)
        cfg.apply_override(o, allowed);
    return cfg;
}

SeriesMatrix load_dataset(const fs::path& path)
{
    if (!fs::exists(path))
        throw DataError("dataset " + path.string() + " does not exist");
    return load_csv(path, csv_has_label_column(path));
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write " + p.string());
    out << text;
    if (!out)
        throw DataError("write failed for " + p.string());
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
    std::string config, out, kind;
    std::vector<std::string> set;
    std::optional<long long> n;
    std::optional<double> noise;
    std::optional<unsigned long long> seed;
    bool shuffle = false;
};

int cmd_gen(const GenArgs& a)
{
    KeyValueConfig defaults;
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
             {"kind", "spiral"},   {"n_points", ""},     {"noise", "0.2"},         {"seed", "1"},
             {"turns", "3"},       {"embed_dim", "31"},  {"embedding_seed", "2024"}, {"geometry_seed", "7"},
             {"separation", "3"},  {"max_std", "3"},     {"shuffle_time", "false"}})
        defaults.set(k, v);
    KeyValueConfig cfg = layered_config(defaults, a.config, a.set);
    if (!a.kind.empty())
        cfg.set("kind", a.kind);
    if (a.n)
        cfg.set("n_points", std::to_string(*a.n));
    if (a.noise)
        cfg.set("noise", format_double(*a.noise));
    if (a.seed)
        cfg.set("seed", std::to_string(*a.seed));
    if (a.shuffle)
        cfg.set("shuffle_time", "true");

    const std::string kind = cfg.get("kind");
    if (cfg.get("n_points").empty())
        cfg.set("n_points", kind == "hmm" ? "20000" : "5000");
    const std::uint64_t seed = cfg.get_uint("seed", 1);
    const bool shuffle = cfg.get("shuffle_time") == "true";
    const fs::path out = resolve_out(a.out, "data-" + kind);

    SeriesMatrix series;
    std::ostringstream truth;
    if (kind == "spiral") {
        SpiralConfig sc;
        sc.n_points = cfg.get_int("n_points", 5000);
        sc.noise_sigma = cfg.get_double("noise", sc.noise_sigma);
        sc.turns = cfg.get_double("turns", sc.turns);
        sc.embed_dim = cfg.get_int("embed_dim", sc.embed_dim);
        sc.seed = seed;
        sc.embedding_seed = cfg.get_uint("embedding_seed", sc.embedding_seed);
        const SpiralData d = gen_spiral(sc);
        series = d.series;
        truth << "time_index,x,y,arc_length,label\n";
        for (Eigen::Index i = 0; i < series.rows(); ++i)
            truth << i << ',' << format_double(d.coords(i, 0)) << ',' << format_double(d.coords(i, 1)) << ','
                  << format_double(d.arc_length(i)) << ',' << (*series.labels())[static_cast<std::size_t>(i)] << '\n';
    } else if (kind == "hmm") {
        HmmConfig hc = default_hmm_config(cfg.get_int("n_points", 20000), seed, cfg.get_int("embed_dim", 31),
                                          cfg.get_uint("geometry_seed", 7), cfg.get_double("separation", 3),
                                          cfg.get_double("max_std", 3));
        series = gen_hmm(hc);
        truth << "time_index,state\n";
        for (Eigen::Index i = 0; i < series.rows(); ++i)
            truth << i << ',' << (*series.labels())[static_cast<std::size_t>(i)] << '\n';
    } else {
        throw ConfigError("unknown kind '" + kind + "' (spiral | hmm)");
    }

    if (shuffle) {
        series = shuffle_time(series, seed);
        std::ostringstream t;
        t << "time_index,label\n";
        for (Eigen::Index i = 0; i < series.rows(); ++i)
            t << i << ',' << (*series.labels())[static_cast<std::size_t>(i)] << '\n';
        truth.str(t.str());
    }

    fs::create_directories(out);
    write_csv(out / "data.csv", series);
    write_text(out / "ground_truth.csv", truth.str());
    KeyValueConfig manifest = cfg;
    manifest.set("rows", std::to_string(series.rows()));
    manifest.set("dim", std::to_string(series.dim()));
    manifest.set("content_hash", hex64(series.content_hash()));
    manifest.set("data", "data.csv");
    manifest.set("ground_truth", "ground_truth.csv");
    write_text(out / "data.manifest", manifest.to_string());
    std::cout << "wrote " << (out / "data.csv").string() << " (" << series.rows() << " x " << series.dim()
              << ", hash " << hex64(series.content_hash()) << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config, out, data;
    std::vector<std::string> set;
    std::optional<unsigned long long> seed;
};

int cmd_train(const TrainArgs& a)
{
    KeyValueConfig defaults;
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
             {"variant", "time_neighbor"}, {"n_layers", "2"},   {"hidden_width", "100"}, {"latent_dim", "2"},
             {"beta", "0.001"},            {"batch_size", "256"}, {"lr", "0.001"},       {"epochs", "500"},
             {"val_fraction", "0.2"},      {"test_fraction", "0.2"}, {"seed", "0"}})
        defaults.set(k, v);
    KeyValueConfig cfg = layered_config(defaults, a.config, a.set);
    if (a.seed)
        cfg.set("seed", std::to_string(*a.seed));

    const SeriesMatrix series = load_dataset(a.data);
    Hyperparams hp;
    hp.variant = variant_from_string(cfg.get("variant"));
    hp.n_layers = cfg.get_int("n_layers", hp.n_layers);
    hp.hidden_width = cfg.get_int("hidden_width", hp.hidden_width);
    hp.latent_dim = cfg.get_int("latent_dim", hp.latent_dim);
    hp.beta = cfg.get_double("beta", hp.beta);
    hp.batch_size = cfg.get_int("batch_size", hp.batch_size);
    hp.lr = cfg.get_double("lr", hp.lr);
    hp.epochs = cfg.get_int("epochs", hp.epochs);
    TrainConfig tc;
    tc.epochs = hp.epochs;
    tc.batch_size = hp.batch_size;
    tc.lr = hp.lr;
    tc.seed = cfg.get_uint("seed", 0);
    tc.val_fraction = cfg.get_double("val_fraction", 0.2);
    const double test_fraction = cfg.get_double("test_fraction", 0.2);

    const SeriesSplit split = split_series(series, tc.seed, tc.val_fraction, test_fraction);
    TrainResult res = train(ModelSpec::from(hp, series.dim()), series, split, tc);
    res.record.run_id = run_id(series.content_hash(), hp, tc.seed, tc.val_fraction, test_fraction);

    const fs::path out = resolve_out(a.out, "train-" + res.record.run_id);
    fs::create_directories(out);
    if (!res.record.failed) {
        save_checkpoint(out / "model.ckpt", res.model);
        res.record.checkpoint_ref = "model.ckpt";
        write_encoding_csv(out / "test_encoding.csv",
                           encode_series(res.model, series.slice(split.test_begin, split.test_end), res.record.run_id));
    }
    std::ostringstream rec;
    write_record(rec, res.record);
    write_text(out / "record.txt", rec.str());

    if (res.record.failed) {
        std::cerr << "training failed: " << res.record.failure << '\n';
        return 3;
    }
    std::cout << "run " << res.record.run_id << " val_loss=" << format_double(res.record.final_val_loss)
              << " val_nl=" << format_double(res.record.val_nl) << " -> " << out.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string grid, data, out;
    std::vector<std::string> set;
    unsigned jobs = 1;
    bool resume = false;
};

GridSpec grid_from_args(const std::string& grid, const std::vector<std::string>& overrides)
{
    KeyValueConfig cfg;
    const auto& presets = preset_grid_names();
    if (std::find(presets.begin(), presets.end(), grid) != presets.end())
        cfg = preset_grid(grid).to_config();
    else if (fs::exists(grid))
        cfg = KeyValueConfig::load(grid);
    else
        throw UsageError("grid '" + grid + "' is neither a preset nor a file");
    for (const std::string& o : overrides)
        cfg.apply_override(o, GridSpec::keys());
    return GridSpec::from_config(cfg);
}

int cmd_sweep(const SweepArgs& a)
{
    const SeriesMatrix series = load_dataset(a.data);
    const fs::path out = resolve_out(a.out, "sweep");

    SweepManifest manifest = [&] {
        if (fs::exists(out / "manifest.log")) {
            if (!a.resume)
                throw UsageError(out.string() + " already holds a sweep; pass --resume to continue it");
            SweepManifest m = SweepManifest::open(out);
            if (!a.grid.empty() && !(grid_from_args(a.grid, a.set) == m.grid()))
                throw UsageError("grid differs from the one stored in " + out.string());
            return m;
        }
        if (a.grid.empty())
            throw UsageError("--grid is required for a new sweep");
        return SweepManifest::create(out, grid_from_args(a.grid, a.set), a.data, series.content_hash());
    }();

    const std::size_t total = manifest.tasks().size();
    std::size_t done = 0;
    SweepOptions opts;
    opts.jobs = a.jobs;
    opts.on_run = [&](const RunTask& t, const ModelRecord& r, bool skipped) {
        ++done;
        std::cout << "[" << done << "/" << total << "] grid=" << t.grid_index << " seed=" << t.seed;
        if (r.failed)
            std::cout << " failed: " << r.failure;
        else
            std::cout << " val_loss=" << format_double(r.final_val_loss) << " val_nl=" << format_double(r.val_nl);
        if (skipped)
            std::cout << " (resumed)";
        std::cout << std::endl;
    };
    const SweepSummary s = run_sweep(manifest, series, opts);
    std::cout << "sweep " << out.string() << ": " << s.trained << " trained, " << s.skipped << " resumed, "
              << s.failed << " failed of " << s.total << '\n';
    if (s.sweep_failed) {
        std::cerr << "sweep failed: more than 25% of runs failed\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// encode / metrics

struct EncodeArgs {
    std::string model, data, out;
    double test_fraction = 0.2;
    bool all = false;
};

int cmd_encode(const EncodeArgs& a)
{
    const VaeModel model = load_checkpoint(a.model);
    const SeriesMatrix series = load_dataset(a.data);
    if (series.dim() != model.input_dim())
        throw UsageError("model expects " + std::to_string(model.input_dim()) + " features, data has " +
                         std::to_string(series.dim()));
    SeriesMatrix target = series;
    if (!a.all) {
        const SeriesSplit split = split_series(series, 0, 0.2, a.test_fraction);
        target = series.slice(split.test_begin, split.test_end);
    }
    const fs::path out = a.out.empty() ? out_root() / "encoding.csv" : fs::path(a.out);
    if (out.has_parent_path())
        fs::create_directories(out.parent_path());
    write_encoding_csv(out, encode_series(model, target, fs::path(a.model).stem().string()));
    std::cout << "wrote " << out.string() << " (" << target.rows() << " rows)\n";
    return 0;
}

struct MetricsArgs {
    std::string encoding, compare, labels, normalization = "closed_form";
    double sigma = 1.0;
};

int cmd_metrics(const MetricsArgs& a)
{
    const EncodingMatrix enc = read_encoding_csv(a.encoding);
    const NeighborLossResult nl = neighbor_loss(enc);
    RandomWalkNormalization norm;
    if (a.normalization == "closed_form")
        norm = RandomWalkNormalization::closed_form;
    else if (a.normalization == "exact_density")
        norm = RandomWalkNormalization::exact_density;
    else
        throw UsageError("normalization must be closed_form or exact_density");

    std::cout << "rows = " << enc.rows() << '\n'
              << "latent_dim = " << enc.dim() << '\n'
              << "neighbor_loss = " << format_double(nl.value) << '\n'
              << "neighbor_loss_per_pair = " << format_double(nl.per_pair) << '\n'
              << "neighbor_pairs = " << nl.pairs << '\n'
              << "random_walk_loglik = " << format_double(random_walk_loglik(enc, a.sigma, norm)) << '\n';
    if (!a.labels.empty()) {
        const SeriesMatrix series = load_dataset(a.labels);
        const LabeledEncoding le = label_encoding(enc, series);
        const SilhouetteResult sil = silhouette(le.z, le.labels);
        std::cout << "silhouette = " << format_double(sil.score) << '\n'
                  << "silhouette_rows = " << sil.rows_used << (sil.subsampled ? " (subsampled)" : "") << '\n';
    }
    if (!a.compare.empty()) {
        const EncodingMatrix other = read_encoding_csv(a.compare);
        std::cout << "encoding_distance = " << format_double(encoding_distance(enc, other)) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// select / report

struct SelectArgs {
    std::string sweep, criterion = "nl";
    std::size_t top_k = 1;
};

int cmd_select(const SelectArgs& a)
{
    const SweepManifest m = SweepManifest::open(a.sweep);
    const std::vector<ModelRecord> records = load_records(m);
    const auto top = select_model(records, criterion_from_string(a.criterion), a.top_k);
    std::cout << "rank,run_id,grid_index,seed,val_loss,val_nl,checkpoint\n";
    for (std::size_t i = 0; i < top.size(); ++i)
        std::cout << i + 1 << ',' << top[i].run_id << ',' << top[i].grid_index << ',' << top[i].seed << ','
                  << format_double(top[i].final_val_loss) << ',' << format_double(top[i].val_nl) << ','
                  << (m.dir() / top[i].checkpoint_ref).string() << '\n';
    return 0;
}

struct ReportArgs {
    std::string sweep, data, out, criterion = "nl";
    std::size_t top_k = 0;
};

int cmd_report(const ReportArgs& a)
{
    const SweepManifest m = SweepManifest::open(a.sweep);
    const SeriesMatrix series = load_dataset(a.data.empty() ? m.dataset() : fs::path(a.data));
    const bool partial = !m.complete();
    if (partial)
        std::cerr << "warning: sweep is unfinished (" << m.count(RunStatus::pending) << " of " << m.tasks().size()
                  << " runs pending); reporting finished runs only\n";

    const CorrelationTables t = correlation_report(m, series);
    const fs::path out = a.out.empty() ? m.dir() / "report" : fs::path(a.out);
    write_report(t, out);
    if (!t.has_labels)
        std::cerr << "warning: silhouette columns omitted (" << t.find("val_nl", "silhouette").note << ")\n";

    if (a.top_k > 0) {
        const std::vector<ModelRecord> records = load_records(m);
        const auto top = select_model(records, criterion_from_string(a.criterion), a.top_k);
        const SeriesSplit split = split_series(series, 0, m.grid().val_fraction, m.grid().test_fraction);
        const SeriesMatrix test = series.slice(split.test_begin, split.test_end);
        const fs::path dir = out / "encodings";
        fs::create_directories(dir);
        for (std::size_t i = 0; i < top.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "top%02zu_%s.csv", i + 1, top[i].run_id.c_str());
            write_encoding_csv(dir / name, encode_series(load_model(m, top[i]), test, top[i].run_id));
        }
    }

    for (const NamedCorrelation& c : t.correlations) {
        std::cout << c.x << " vs " << c.y << ": ";
        if (c.available)
            std::cout << "spearman=" << format_double(c.value.spearman) << " pearson=" << format_double(c.value.pearson)
                      << " n=" << c.value.n << '\n';
        else
            std::cout << "n/a (" << c.note << ")\n";
    }
    std::cout << "report written to " << out.string() << '\n';
    return partial ? kExitPartial : 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Time-neighbor VAE toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
    g->add_option("--config", gen.config, "key = value config file")->check(CLI::ExistingFile);
    g->add_option("--set", gen.set, "override key=value (repeatable)");
    g->add_option("--kind", gen.kind, "spiral | hmm");
    g->add_option("--n", gen.n, "number of time steps");
    g->add_option("--noise", gen.noise, "spiral noise level");
    g->add_option("--seed", gen.seed, "noise / sampling seed");
    g->add_flag("--shuffle-time", gen.shuffle, "randomly permute time order");
    g->add_option("--out", gen.out, "output directory");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train one model");
    t->add_option("--data", tr.data, "dataset CSV")->required();
    t->add_option("--config", tr.config, "key = value config file")->check(CLI::ExistingFile);
    t->add_option("--set", tr.set, "override key=value (repeatable)");
    t->add_option("--seed", tr.seed, "split / init / noise seed");
    t->add_option("--out", tr.out, "output directory");

    SweepArgs sw;
    auto* s = app.add_subcommand("sweep", "train a hyperparameter grid across seeds");
    s->add_option("--grid", sw.grid, "preset (desk-spiral, desk-hmm, full-spiral, full-hmm) or gridspec file");
    s->add_option("--data", sw.data, "dataset CSV")->required();
    s->add_option("--set", sw.set, "override grid key=value (repeatable)");
    s->add_option("--jobs", sw.jobs, "worker threads")->check(CLI::PositiveNumber);
    s->add_flag("--resume", sw.resume, "continue an existing sweep directory");
    s->add_option("--out", sw.out, "sweep directory");

    EncodeArgs en;
    auto* e = app.add_subcommand("encode", "encode a dataset with a checkpoint");
    e->add_option("--model", en.model, "checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("--data", en.data, "dataset CSV")->required();
    e->add_option("--test-fraction", en.test_fraction, "encode the trailing test segment of this size");
    e->add_flag("--all", en.all, "encode every row");
    e->add_option("--out", en.out, "encoding CSV");

    MetricsArgs me;
    auto* mt = app.add_subcommand("metrics", "evaluate an encoding CSV");
    mt->add_option("--encoding", me.encoding, "encoding CSV (time_index, z0..)")->required();
    mt->add_option("--compare", me.compare, "second encoding for the encoding distance");
    mt->add_option("--labels", me.labels, "dataset CSV with a label column");
    mt->add_option("--sigma", me.sigma, "random-walk step scale")->check(CLI::PositiveNumber);
    mt->add_option("--normalization", me.normalization, "closed_form | exact_density");

    SelectArgs se;
    auto* sl = app.add_subcommand("select", "top-k runs of a sweep");
    sl->add_option("--sweep", se.sweep, "sweep directory")->required();
    sl->add_option("--criterion", se.criterion, "nl | val_loss");
    sl->add_option("--top-k", se.top_k, "number of runs")->check(CLI::PositiveNumber);

    ReportArgs re;
    auto* rp = app.add_subcommand("report", "correlation tables and scatter data for a sweep");
    rp->add_option("--sweep", re.sweep, "sweep directory")->required();
    rp->add_option("--data", re.data, "dataset CSV (defaults to the one recorded in the manifest)");
    rp->add_option("--out", re.out, "report directory");
    rp->add_option("--top-k", re.top_k, "also write encodings of the top-k runs");
    rp->add_option("--criterion", re.criterion, "nl | val_loss (for --top-k)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*g)
            return cmd_gen(gen);
        if (*t)
            return cmd_train(tr);
        if (*s)
            return cmd_sweep(sw);
        if (*e)
            return cmd_encode(en);
        if (*mt)
            return cmd_metrics(me);
        if (*sl)
            return cmd_select(se);
        if (*rp)
            return cmd_report(re);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return static_cast<int>(err.kind());
    } catch (const fs::filesystem_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    }
    return 1;
}
