#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnvae/config.hpp"
#include "tnvae/hyperparams.hpp"
#include "tnvae/series.hpp"
#include "tnvae/vae.hpp"

namespace tnvae {

/// Declarative grid: one value list per axis plus the seed list. Axes expand
/// lexicographically in declaration order, first axis slowest.
struct GridSpec {
    std::string name = "custom";
    std::vector<Variant> variant{Variant::time_neighbor};
    std::vector<Eigen::Index> n_layers{2};
    std::vector<Eigen::Index> hidden_width{100};
    std::vector<Eigen::Index> latent_dim{2};
    std::vector<double> beta{1e-3};
    std::vector<Eigen::Index> batch_size{256};
    std::vector<double> lr{1e-3};
    std::vector<Eigen::Index> epochs{500};
    std::vector<std::uint64_t> seeds{1};
    double val_fraction = 0.2;
    double test_fraction = 0.2;
    /// Free text stored with the manifest, e.g. how a grid was reconstructed.
    std::string assumptions;

    static const std::vector<std::string>& keys();
    static GridSpec from_config(const KeyValueConfig& cfg);
    static GridSpec load(const std::filesystem::path& path);
    KeyValueConfig to_config() const;

    std::size_t num_points() const;
    std::size_t num_runs() const { return num_points() * seeds.size(); }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Cartesian product of the axes. Throws ConfigError naming the offending
/// axis for empty or out-of-domain values.
std::vector<Hyperparams> expand_grid(const GridSpec& spec);

/// Built-in grids: desk-spiral, desk-hmm, full-spiral, full-hmm.
GridSpec preset_grid(const std::string& name);
const std::vector<std::string>& preset_grid_names();

std::string run_id(std::uint64_t dataset_hash, const Hyperparams& hp, std::uint64_t seed, double val_fraction,
                   double test_fraction);

std::string hex64(std::uint64_t v);

enum class RunStatus { pending, ok, failed };

std::string to_string(RunStatus s);

struct RunTask {
    std::size_t grid_index = 0;
    Hyperparams hyperparams;
    std::uint64_t seed = 0;
    std::string run_id;
};

/// On-disk sweep directory:
///   sweep.grid              grid spec (key = value)
///   manifest.log            header + append-only `run` lines
///   runs/<id>.record        ModelRecord text
///   runs/<id>.ckpt          checkpoint of successful runs
/// The last `run` line for an id wins.
class SweepManifest {
public:
    static SweepManifest create(const std::filesystem::path& dir, const GridSpec& grid,
                                const std::filesystem::path& dataset, std::uint64_t dataset_hash);
    static SweepManifest open(const std::filesystem::path& dir);

    const std::filesystem::path& dir() const { return dir_; }
    const GridSpec& grid() const { return grid_; }
    const std::filesystem::path& dataset() const { return dataset_; }
    std::uint64_t dataset_hash() const { return dataset_hash_; }
    const std::vector<RunTask>& tasks() const { return tasks_; }

    RunStatus status(const std::string& id) const;
    std::size_t count(RunStatus s) const;
    bool complete() const { return count(RunStatus::pending) == 0; }

    std::filesystem::path record_path(const std::string& id) const;
    std::filesystem::path checkpoint_path(const std::string& id) const;

    /// Appends and flushes one `run` line. Thread-safe.
    void append(const RunTask& task, RunStatus status);

private:
    void build_tasks();

    std::filesystem::path dir_;
    GridSpec grid_;
    std::filesystem::path dataset_;
    std::uint64_t dataset_hash_ = 0;
    std::vector<RunTask> tasks_;
    std::map<std::string, RunStatus> status_;
    std::unique_ptr<std::mutex> log_mutex_ = std::make_unique<std::mutex>();
};

/// Writes `content` to a sibling temp file, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

struct SweepOptions {
    unsigned jobs = 1;
    /// Called once per finished or skipped run, serialized.
    std::function<void(const RunTask&, const ModelRecord&, bool skipped)> on_run;
};

struct SweepSummary {
    std::size_t total = 0;
    std::size_t trained = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    /// More than a quarter of all runs failed.
    bool sweep_failed = false;
};

/// Trains every pending (grid point, seed) run. Completed runs are skipped,
/// so re-running a partially finished manifest resumes it. Results do not
/// depend on `jobs`.
SweepSummary run_sweep(SweepManifest& manifest, const SeriesMatrix& series, const SweepOptions& options = {});

/// Records of all finished runs (ok and failed), sorted by (grid index, seed).
std::vector<ModelRecord> load_records(const SweepManifest& manifest);

VaeModel load_model(const SweepManifest& manifest, const ModelRecord& record);

enum class SelectionCriterion { val_loss, neighbor_loss };

std::string to_string(SelectionCriterion c);
SelectionCriterion criterion_from_string(const std::string& s);

double criterion_value(const ModelRecord& r, SelectionCriterion c);

/// Top-k successful records in ascending criterion order, ties broken by
/// (seed, grid index).
std::vector<ModelRecord> select_model(std::span<const ModelRecord> records, SelectionCriterion criterion,
                                      std::size_t k);

struct PairDistance {
    std::size_t a = 0;
    std::size_t b = 0;
    double distance = 0;
};

struct EncodingDistances {
    Eigen::MatrixXd matrix;           ///< symmetric, zero diagonal
    std::vector<PairDistance> pairs;  ///< a < b, row-major order
};

/// Encoding distance between every pair of models on one test segment.
EncodingDistances pairwise_encoding_distances(std::span<const VaeModel> models, const SeriesMatrix& test);

} // namespace tnvae
