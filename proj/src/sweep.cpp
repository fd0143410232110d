#include "tnvae/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "tnvae/checkpoint.hpp"
#include "tnvae/error.hpp"
#include "tnvae/rng.hpp"

namespace tnvae {

namespace fs = std::filesystem;

namespace {

template <typename T, typename Parse>
std::vector<T> parse_axis(const KeyValueConfig& cfg, const std::string& key, const std::vector<T>& fallback,
                          Parse parse)
{
    if (!cfg.contains(key))
        return fallback;
    std::vector<T> out;
    for (const std::string& item : cfg.get_list(key)) {
        try {
            out.push_back(parse(item));
        } catch (const Error& e) {
            throw ConfigError("axis '" + key + "': " + e.what());
        }
    }
    return out;
}

template <typename T, typename Format>
std::string axis_text(const std::vector<T>& values, Format fmt)
{
    std::vector<std::string> items;
    for (const T& v : values)
        items.push_back(fmt(v));
    return format_list(items);
}

std::string idx_text(Eigen::Index v) { return std::to_string(v); }

template <typename T>
void require_nonempty(const std::vector<T>& axis, const char* name)
{
    if (axis.empty())
        throw ConfigError("axis '" + std::string(name) + "' is empty");
}

template <typename T>
void require_range(const std::vector<T>& axis, const char* name, T lo, T hi)
{
    require_nonempty(axis, name);
    for (const T& v : axis) {
        if (!(v >= lo && v <= hi)) {
            std::ostringstream s;
            s << "axis '" << name << "' value " << v << " outside [" << lo << ", " << hi << "]";
            throw ConfigError(s.str());
        }
    }
}

void validate_grid(const GridSpec& g)
{
    require_nonempty(g.variant, "variant");
    require_range<Eigen::Index>(g.n_layers, "n_layers", 2, 4);
    require_range<Eigen::Index>(g.hidden_width, "hidden_width", 50, 400);
    require_range<Eigen::Index>(g.latent_dim, "latent_dim", 2, 1 << 20);
    // Tiny slack so decimal spellings of the endpoints stay inside.
    require_range(g.beta, "beta", 1e-4 * (1 - 1e-12), 1e-3 * (1 + 1e-12));
    require_range<Eigen::Index>(g.batch_size, "batch_size", 1, Eigen::Index{1} << 40);
    require_range(g.lr, "lr", 1e-5 * (1 - 1e-12), 1e-3 * (1 + 1e-12));
    require_range<Eigen::Index>(g.epochs, "epochs", 1, Eigen::Index{1} << 40);
    require_nonempty(g.seeds, "seeds");
    if (!(g.val_fraction > 0 && g.val_fraction < 1))
        throw ConfigError("val_fraction must lie in (0, 1)");
    if (!(g.test_fraction > 0 && g.test_fraction < 1))
        throw ConfigError("test_fraction must lie in (0, 1)");
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

constexpr const char* kManifestMagic = "tnvae-sweep 1";

} // namespace

// ---------------------------------------------------------------------------
// Grid spec

const std::vector<std::string>& GridSpec::keys()
{
    static const std::vector<std::string> k{"name",       "variant", "n_layers", "hidden_width", "latent_dim",
                                            "beta",       "batch_size", "lr",    "epochs",       "seeds",
                                            "val_fraction", "test_fraction", "assumptions"};
    return k;
}

GridSpec GridSpec::from_config(const KeyValueConfig& cfg)
{
    for (const std::string& k : cfg.keys())
        if (std::find(keys().begin(), keys().end(), k) == keys().end())
            throw ConfigError("unknown grid key '" + k + "'");
    GridSpec g;
    g.name = cfg.get_or("name", g.name);
    g.variant = parse_axis(cfg, "variant", g.variant, [](const std::string& s) { return variant_from_string(s); });
    auto as_index = [](const std::string& s) { return static_cast<Eigen::Index>(parse_int(s)); };
    auto as_double = [](const std::string& s) { return parse_double(s); };
    g.n_layers = parse_axis(cfg, "n_layers", g.n_layers, as_index);
    g.hidden_width = parse_axis(cfg, "hidden_width", g.hidden_width, as_index);
    g.latent_dim = parse_axis(cfg, "latent_dim", g.latent_dim, as_index);
    g.beta = parse_axis(cfg, "beta", g.beta, as_double);
    g.batch_size = parse_axis(cfg, "batch_size", g.batch_size, as_index);
    g.lr = parse_axis(cfg, "lr", g.lr, as_double);
    g.epochs = parse_axis(cfg, "epochs", g.epochs, as_index);
    g.seeds = parse_axis(cfg, "seeds", g.seeds, [](const std::string& s) { return parse_uint(s); });
    g.val_fraction = cfg.get_double("val_fraction", g.val_fraction);
    g.test_fraction = cfg.get_double("test_fraction", g.test_fraction);
    g.assumptions = cfg.get_or("assumptions", "");
    validate_grid(g);
    return g;
}

GridSpec GridSpec::load(const fs::path& path) { return from_config(KeyValueConfig::load(path)); }

KeyValueConfig GridSpec::to_config() const
{
    KeyValueConfig c;
    c.set("name", name);
    c.set("variant", axis_text(variant, [](Variant v) { return to_string(v); }));
    c.set("n_layers", axis_text(n_layers, idx_text));
    c.set("hidden_width", axis_text(hidden_width, idx_text));
    c.set("latent_dim", axis_text(latent_dim, idx_text));
    c.set("beta", axis_text(beta, format_double));
    c.set("batch_size", axis_text(batch_size, idx_text));
    c.set("lr", axis_text(lr, format_double));
    c.set("epochs", axis_text(epochs, idx_text));
    c.set("seeds", axis_text(seeds, [](std::uint64_t s) { return std::to_string(s); }));
    c.set("val_fraction", format_double(val_fraction));
    c.set("test_fraction", format_double(test_fraction));
    if (!assumptions.empty())
        c.set("assumptions", assumptions);
    return c;
}

std::size_t GridSpec::num_points() const
{
    return variant.size() * n_layers.size() * hidden_width.size() * latent_dim.size() * beta.size() *
           batch_size.size() * lr.size() * epochs.size();
}

std::vector<Hyperparams> expand_grid(const GridSpec& g)
{
    validate_grid(g);
    std::vector<Hyperparams> out;
    out.reserve(g.num_points());
    for (Variant v : g.variant)
        for (Eigen::Index layers : g.n_layers)
            for (Eigen::Index width : g.hidden_width)
                for (Eigen::Index latent : g.latent_dim)
                    for (double beta : g.beta)
                        for (Eigen::Index batch : g.batch_size)
                            for (double lr : g.lr)
                                for (Eigen::Index epochs : g.epochs)
                                    out.push_back(Hyperparams{layers, width, latent, beta, batch, lr, epochs, v});
    return out;
}

const std::vector<std::string>& preset_grid_names()
{
    static const std::vector<std::string> names{"desk-spiral", "desk-hmm", "full-spiral", "full-hmm"};
    return names;
}

GridSpec preset_grid(const std::string& name)
{
    GridSpec g;
    g.name = name;
    if (name == "desk-spiral") {
        g.variant = {Variant::time_neighbor};
        g.n_layers = {3};
        g.hidden_width = {50, 100};
        g.beta = {1e-4, 1e-3};
        g.batch_size = {128};
        g.lr = {1e-4, 1e-3};
        g.epochs = {200};
        g.seeds = {1, 2, 3};
        g.assumptions = "desk scale: 2 widths x 2 lr x 2 beta x 3 seeds at fixed depth and batch";
    } else if (name == "desk-hmm") {
        g.variant = {Variant::time_neighbor};
        g.n_layers = {2};
        g.hidden_width = {50, 100};
        g.beta = {1e-4, 1e-3};
        g.batch_size = {128};
        g.lr = {5e-4, 1e-3};
        g.epochs = {50};
        g.seeds = {1, 2, 3};
        // lr 1e-4 stalls on the initial plateau within this budget
        g.assumptions = "desk scale: 2 widths x 2 lr x 2 beta x 3 seeds at fixed depth and batch";
    } else if (name == "full-spiral") {
        g.variant = {Variant::time_neighbor, Variant::standard};
        g.n_layers = {2, 3, 4};
        g.hidden_width = {50, 100, 200, 400};
        g.beta = {1e-4, 1e-3};
        g.batch_size = {128, 256, 1024};
        g.lr = {1e-5, 1e-3};
        g.epochs = {500};
        g.seeds = {1, 2, 3, 4, 5};
        g.assumptions = "per-axis values reconstructed: 3 x 4 x 2 x 3 x 2 = 144 points per variant, 1440 runs";
    } else if (name == "full-hmm") {
        g.variant = {Variant::time_neighbor, Variant::standard};
        g.n_layers = {2, 3, 4};
        g.hidden_width = {50, 200, 400};
        g.beta = {1e-4, 1e-3};
        g.batch_size = {128, 256, 1024};
        g.lr = {1e-5, 1e-3};
        g.epochs = {500};
        g.seeds = {1, 2, 3};
        g.assumptions = "per-axis values reconstructed: 3 x 3 x 2 x 3 x 2 = 108 points per variant, 648 runs";
    } else {
        throw ConfigError("unknown grid preset '" + name + "'");
    }
    return g;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string run_id(std::uint64_t dataset_hash, const Hyperparams& hp, std::uint64_t seed, double val_fraction,
                   double test_fraction)
{
    const std::string key = hex64(dataset_hash) + "|" + hp.canonical() + "|seed=" + std::to_string(seed) +
                            "|val=" + format_double(val_fraction) + "|test=" + format_double(test_fraction);
    return hex64(mix64(fnv1a64(key)));
}

std::string to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::pending: return "pending";
    case RunStatus::ok: return "ok";
    case RunStatus::failed: return "failed";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Manifest

void write_file_atomic(const fs::path& path, const std::string& content)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void SweepManifest::build_tasks()
{
    tasks_.clear();
    const std::vector<Hyperparams> points = expand_grid(grid_);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::uint64_t seed : grid_.seeds)
            tasks_.push_back(RunTask{i, points[i], seed,
                                     run_id(dataset_hash_, points[i], seed, grid_.val_fraction, grid_.test_fraction)});
}

SweepManifest SweepManifest::create(const fs::path& dir, const GridSpec& grid, const fs::path& dataset,
                                    std::uint64_t dataset_hash)
{
    if (fs::exists(dir / "manifest.log"))
        throw UsageError("sweep directory " + dir.string() + " already holds a manifest");
    validate_grid(grid);
    fs::create_directories(dir / "runs");

    SweepManifest m;
    m.dir_ = dir;
    m.grid_ = grid;
    m.dataset_ = fs::absolute(dataset);
    m.dataset_hash_ = dataset_hash;
    m.build_tasks();

    write_file_atomic(dir / "sweep.grid", grid.to_config().to_string());
    std::ostringstream head;
    head << kManifestMagic << '\n'
         << "dataset = " << m.dataset_.string() << '\n'
         << "dataset_hash = " << hex64(dataset_hash) << '\n'
         << "grid = sweep.grid\n"
         << "runs = " << m.tasks_.size() << '\n';
    write_file_atomic(dir / "manifest.log", head.str());
    return m;
}

SweepManifest SweepManifest::open(const fs::path& dir)
{
    const fs::path log = dir / "manifest.log";
    if (!fs::exists(log))
        throw DataError("no manifest.log in " + dir.string());
    SweepManifest m;
    m.dir_ = dir;
    m.grid_ = GridSpec::load(dir / "sweep.grid");

    std::istringstream in(read_file(log));
    std::string line;
    if (!std::getline(in, line) || line != kManifestMagic)
        throw DataError(log.string() + ": not a sweep manifest");
    bool have_hash = false;
    std::vector<std::pair<std::string, RunStatus>> lines;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        if (line.starts_with("run ")) {
            std::istringstream fields(line.substr(4));
            std::string id, tok;
            fields >> id;
            std::optional<RunStatus> st;
            while (fields >> tok) {
                if (tok == "status=ok")
                    st = RunStatus::ok;
                else if (tok == "status=failed")
                    st = RunStatus::failed;
            }
            // A torn final line from a crash carries no status; ignore it.
            if (st)
                lines.emplace_back(id, *st);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(log.string() + ":" + std::to_string(lineno) + ": malformed line");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key == "dataset")
            m.dataset_ = value;
        else if (key == "dataset_hash") {
            m.dataset_hash_ = std::stoull(value, nullptr, 16);
            have_hash = true;
        }
    }
    if (!have_hash)
        throw DataError(log.string() + ": missing dataset_hash");
    m.build_tasks();
    for (const auto& [id, st] : lines)
        m.status_[id] = st;
    return m;
}

RunStatus SweepManifest::status(const std::string& id) const
{
    const auto it = status_.find(id);
    return it == status_.end() ? RunStatus::pending : it->second;
}

std::size_t SweepManifest::count(RunStatus s) const
{
    return static_cast<std::size_t>(
        std::count_if(tasks_.begin(), tasks_.end(), [&](const RunTask& t) { return status(t.run_id) == s; }));
}

fs::path SweepManifest::record_path(const std::string& id) const { return dir_ / "runs" / (id + ".record"); }
fs::path SweepManifest::checkpoint_path(const std::string& id) const { return dir_ / "runs" / (id + ".ckpt"); }

void SweepManifest::append(const RunTask& task, RunStatus st)
{
    std::lock_guard lock(*log_mutex_);
    const fs::path log = dir_ / "manifest.log";
    bool torn = false;
    if (std::ifstream tail(log, std::ios::binary | std::ios::ate); tail && tail.tellg() > 0) {
        tail.seekg(-1, std::ios::end);
        torn = tail.get() != '\n';
    }
    std::ofstream out(log, std::ios::app);
    if (!out)
        throw DataError("cannot append to manifest in " + dir_.string());
    if (torn)
        out << '\n';
    out << "run " << task.run_id << " grid=" << task.grid_index << " seed=" << task.seed
        << " status=" << to_string(st) << " record=runs/" << task.run_id << ".record\n";
    out.flush();
    status_[task.run_id] = st;
}

// ---------------------------------------------------------------------------
// Runner

namespace {

ModelRecord read_record_file(const fs::path& p)
{
    std::istringstream in(read_file(p));
    return read_record(in);
}

} // namespace

SweepSummary run_sweep(SweepManifest& manifest, const SeriesMatrix& series, const SweepOptions& options)
{
    if (series.content_hash() != manifest.dataset_hash())
        throw DataError("dataset hash " + hex64(series.content_hash()) + " does not match manifest hash " +
                        hex64(manifest.dataset_hash()));
    const GridSpec& grid = manifest.grid();
    const auto& tasks = manifest.tasks();

    SweepSummary summary;
    summary.total = tasks.size();
    std::mutex report_mutex;

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (manifest.status(tasks[i].run_id) == RunStatus::pending) {
            pending.push_back(i);
            continue;
        }
        ++summary.skipped;
        if (options.on_run)
            options.on_run(tasks[i], read_record_file(manifest.record_path(tasks[i].run_id)), true);
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::exception_ptr first_error;

    auto worker = [&] {
        while (!abort) {
            const std::size_t slot = next++;
            if (slot >= pending.size())
                return;
            const RunTask& task = tasks[pending[slot]];
            try {
                const Hyperparams& hp = task.hyperparams;
                const SeriesSplit split = split_series(series, task.seed, grid.val_fraction, grid.test_fraction);
                TrainConfig tc;
                tc.epochs = hp.epochs;
                tc.batch_size = hp.batch_size;
                tc.lr = hp.lr;
                tc.seed = task.seed;
                tc.val_fraction = grid.val_fraction;
                TrainResult res = train(ModelSpec::from(hp, series.dim()), series, split, tc);
                ModelRecord& rec = res.record;
                rec.run_id = task.run_id;
                rec.grid_index = static_cast<Eigen::Index>(task.grid_index);
                if (!rec.failed) {
                    std::ostringstream ck;
                    write_checkpoint(ck, res.model);
                    write_file_atomic(manifest.checkpoint_path(task.run_id), ck.str());
                    rec.checkpoint_ref = "runs/" + task.run_id + ".ckpt";
                }
                std::ostringstream rs;
                write_record(rs, rec);
                write_file_atomic(manifest.record_path(task.run_id), rs.str());
                manifest.append(task, rec.failed ? RunStatus::failed : RunStatus::ok);

                std::lock_guard lock(report_mutex);
                ++summary.trained;
                if (options.on_run)
                    options.on_run(task, rec, false);
            } catch (...) {
                std::lock_guard lock(report_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                abort = true;
            }
        }
    };

    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(pending.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
    }
    if (first_error)
        std::rethrow_exception(first_error);

    summary.failed = manifest.count(RunStatus::failed);
    summary.sweep_failed = summary.failed * 4 > summary.total;
    return summary;
}

std::vector<ModelRecord> load_records(const SweepManifest& manifest)
{
    std::vector<ModelRecord> out;
    for (const RunTask& t : manifest.tasks()) {
        if (manifest.status(t.run_id) == RunStatus::pending)
            continue;
        ModelRecord r = read_record_file(manifest.record_path(t.run_id));
        if (r.run_id != t.run_id)
            throw DataError("record " + manifest.record_path(t.run_id).string() + " has mismatched run id");
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const ModelRecord& a, const ModelRecord& b) {
        return std::tie(a.grid_index, a.seed) < std::tie(b.grid_index, b.seed);
    });
    return out;
}

VaeModel load_model(const SweepManifest& manifest, const ModelRecord& record)
{
    if (record.failed || record.checkpoint_ref.empty())
        throw DataError("run " + record.run_id + " has no checkpoint");
    return load_checkpoint(manifest.dir() / record.checkpoint_ref);
}

// ---------------------------------------------------------------------------
// Selection

std::string to_string(SelectionCriterion c)
{
    return c == SelectionCriterion::val_loss ? "val_loss" : "neighbor_loss";
}

SelectionCriterion criterion_from_string(const std::string& s)
{
    if (s == "val_loss" || s == "val" || s == "loss")
        return SelectionCriterion::val_loss;
    if (s == "neighbor_loss" || s == "nl")
        return SelectionCriterion::neighbor_loss;
    throw UsageError("unknown selection criterion '" + s + "' (val_loss | nl)");
}

double criterion_value(const ModelRecord& r, SelectionCriterion c)
{
    return c == SelectionCriterion::val_loss ? r.final_val_loss : r.val_nl;
}

std::vector<ModelRecord> select_model(std::span<const ModelRecord> records, SelectionCriterion criterion,
                                      std::size_t k)
{
    std::vector<const ModelRecord*> ok;
    for (const ModelRecord& r : records) {
        if (r.failed)
            continue;
        if (!std::isfinite(criterion_value(r, criterion)))
            throw DataError("record " + r.run_id + " has no " + to_string(criterion));
        ok.push_back(&r);
    }
    if (ok.size() < k)
        throw DataError("need " + std::to_string(k) + " successful records, have " + std::to_string(ok.size()));
    std::stable_sort(ok.begin(), ok.end(), [&](const ModelRecord* a, const ModelRecord* b) {
        const double va = criterion_value(*a, criterion), vb = criterion_value(*b, criterion);
        return std::tie(va, a->seed, a->grid_index) < std::tie(vb, b->seed, b->grid_index);
    });
    std::vector<ModelRecord> out;
    for (std::size_t i = 0; i < k; ++i)
        out.push_back(*ok[i]);
    return out;
}

EncodingDistances pairwise_encoding_distances(std::span<const VaeModel> models, const SeriesMatrix& test)
{
    EncodingDistances out;
    const std::size_t n = models.size();
    out.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<EncodingMatrix> enc;
    for (const VaeModel& m : models) {
        if (m.latent_dim != models.front().latent_dim)
            throw UsageError("pairwise_encoding_distances: latent dimensions differ");
        if (m.variant != models.front().variant)
            throw UsageError("pairwise_encoding_distances: variants differ");
        enc.push_back(encode_series(m, test));
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double d = encoding_distance(enc[a], enc[b]);
            out.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d;
            out.matrix(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = d;
            out.pairs.push_back(PairDistance{a, b, d});
        }
    }
    return out;
}

} // namespace tnvae
