// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here; the sweep-based criteria train their ensembles from scratch in a
// work directory (default: under the build tree).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "tnvae/gaussian.hpp"
#include "tnvae/metrics.hpp"
#include "tnvae/report.hpp"
#include "tnvae/series.hpp"
#include "tnvae/sweep.hpp"
#include "tnvae/vae.hpp"

using namespace tnvae;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kOracleRel = 1e-10;
constexpr double kScaleRel = 1e-12;
constexpr double kProcrustesInv = 1e-10;
constexpr double kTranslationAbs = 1e-12;
constexpr double kMaxSpearmanNlSil = -0.4;
constexpr double kMinSilGap = 0.1;
constexpr double kMinHmmSil = 0.4;
constexpr double kNoCorrelation = 0.3;
constexpr double kSpuriousSil = 0.2;
constexpr std::size_t kMinSpiralSuccesses = 23;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [violated: " << what << "]";
        }
    }
};

std::string fmt(double v, int prec = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

double rel(double got, double want)
{
    const double scale = std::max(std::abs(want), 1e-300);
    return std::abs(got - want) / scale;
}

std::vector<Eigen::Index> iota_idx(Eigen::Index n)
{
    std::vector<Eigen::Index> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), Eigen::Index{0});
    return v;
}

// ---------------------------------------------------------------------------
// 1. Gradients

Outcome gradients()
{
    Outcome o;
    double worst = 0;
    std::size_t entries = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        RngStream shape(seed * 7919);
        const Eigen::Index batch = 1 + static_cast<Eigen::Index>(shape.below(6));
        if (seed % 2 == 0) {
            std::vector<Eigen::Index> dims{2 + static_cast<Eigen::Index>(shape.below(5))};
            const auto hidden = 1 + shape.below(3);
            for (std::uint64_t h = 0; h < hidden; ++h)
                dims.push_back(2 + static_cast<Eigen::Index>(shape.below(7)));
            dims.push_back(1 + static_cast<Eigen::Index>(shape.below(4)));
            Mlp net = oracle::random_net(dims, Activation::tanh, seed);
            RngStream rng(seed);
            const Eigen::MatrixXd x = oracle::random_matrix(dims.front(), batch, rng);
            const Eigen::MatrixXd target = oracle::random_matrix(dims.back(), batch, rng);
            auto loss_fn = [&](const Eigen::MatrixXd& out) {
                const Eigen::MatrixXd diff = out - target;
                return std::pair<double, Eigen::MatrixXd>(diff.squaredNorm(), 2.0 * diff);
            };
            auto [loss, grads] = mlp_gradient(net, x, loss_fn);
            const auto c = oracle::check_gradients(net.parameters(), grads,
                                                   [&] { return loss_fn(forward(net, x)).first; });
            worst = std::max(worst, c.max_rel_error);
            entries += c.checked;
        } else {
            ModelSpec spec;
            spec.input_dim = 2 + static_cast<Eigen::Index>(shape.below(4));
            spec.hidden_width = 3 + static_cast<Eigen::Index>(shape.below(5));
            spec.n_layers = 1 + static_cast<Eigen::Index>(shape.below(2));
            spec.variant = seed % 4 == 1 ? Variant::standard : Variant::time_neighbor;
            spec.beta = 0.5;
            RngStream init(seed);
            VaeModel m = make_vae(spec, init);
            RngStream rng(seed + 1000);
            const Eigen::MatrixXd x = oracle::random_matrix(spec.input_dim, batch, rng);
            const Eigen::MatrixXd y = oracle::random_matrix(spec.input_dim, batch, rng);
            const Eigen::MatrixXd noise = draw_noise(m.latent_dim, batch, rng);
            const LossResult r = elbo_objective(m, x, y, noise);
            auto loss = [&] { return elbo_objective(m, x, y, noise, false).terms.total; };
            const auto ce = oracle::check_gradients(m.encoder.parameters(), r.encoder_grad, loss);
            const auto cd = oracle::check_gradients(m.decoder.parameters(), r.decoder_grad, loss);
            worst = std::max({worst, ce.max_rel_error, cd.max_rel_error});
            entries += ce.checked + cd.checked;
        }
    }
    o.detail << "50 instances (25 MLP, 25 ELBO), " << entries << " entries, max rel error " << fmt(worst);
    o.require(worst < kGradTol, "max rel error < 1e-4");
    return o;
}

// ---------------------------------------------------------------------------
// 2. Metric oracles

Outcome metric_oracles()
{
    Outcome o;
    RngStream rng(2);
    double nl_err = 0, sil_err = 0, pro_err = 0, rw_err = 0, rank_err = 0;

    {
        Eigen::MatrixXd z(3, 2);
        z << 1, 0, 0, 1, -1, 0;
        nl_err = rel(neighbor_loss(EncodingMatrix(z, iota_idx(3))).value, 2 * std::sqrt(2.0));
        for (int rep = 0; rep < 10; ++rep) {
            const Eigen::MatrixXd r = oracle::random_matrix(60, 2 + rep % 3, rng);
            std::vector<Eigen::Index> idx;
            std::vector<long> idx_l;
            for (Eigen::Index i = 0, t = 0; i < 60; ++i) {
                t += rng.below(4) == 0 ? 2 : 1;
                idx.push_back(t);
                idx_l.push_back(static_cast<long>(t));
            }
            nl_err = std::max(nl_err, rel(neighbor_loss(EncodingMatrix(r, idx)).value,
                                          oracle::neighbor_loss(oracle::to_rows(r), idx_l)));
        }
    }
    {
        Eigen::MatrixXd p(4, 2);
        p << 0, 0, 0, 1, 10, 0, 10, 1;
        const double b = (10 + std::sqrt(101.0)) / 2;
        sil_err = rel(silhouette(p, std::vector<int>{0, 0, 1, 1}).score, (b - 1) / b);
        for (int rep = 0; rep < 10; ++rep) {
            const Eigen::MatrixXd q = oracle::random_matrix(80, 2, rng);
            std::vector<int> labels(80);
            for (auto& l : labels)
                l = static_cast<int>(rng.below(3 + static_cast<std::uint64_t>(rep % 3)));
            sil_err = std::max(sil_err, rel(silhouette(q, labels).score,
                                            oracle::silhouette(oracle::to_rows(q), labels)));
        }
    }
    {
        Eigen::MatrixXd a(3, 2), b(3, 2);
        a << 0, 0, 1, 0, 0, 1;
        b << 0, 0, 2, 0, 0, 1;
        pro_err = rel(procrustes_distance(a, b), oracle::procrustes_2d_grid(oracle::to_rows(a), oracle::to_rows(b)));
        for (int rep = 0; rep < 5; ++rep) {
            const Eigen::MatrixXd x = oracle::random_matrix(25, 2, rng);
            Eigen::MatrixXd y = x + 0.4 * oracle::random_matrix(25, 2, rng);
            if (rep % 2)
                y.col(0) *= -1;
            pro_err = std::max(pro_err, rel(procrustes_distance(x, y),
                                            oracle::procrustes_2d_grid(oracle::to_rows(x), oracle::to_rows(y))));
        }
    }
    {
        for (int d : {1, 2, 3, 5}) {
            const Eigen::MatrixXd z = oracle::random_matrix(40, d, rng, 0.6);
            for (double sigma : {0.3, 1.0, 2.5})
                rw_err = std::max(rw_err, rel(random_walk_loglik(z, iota_idx(40), sigma,
                                                                 RandomWalkNormalization::exact_density),
                                              oracle::random_walk_density_product(oracle::to_rows(z), sigma)));
        }
    }
    double kl_z = 0;
    {
        for (double lv : {std::log(0.25), std::log(2.0)}) {
            for (double mu : {0.0, 1.3}) {
                const double exact = kl_to_standard_normal(
                    DiagGaussian(Eigen::VectorXd::Constant(1, mu), Eigen::VectorXd::Constant(1, lv)));
                const auto mc = oracle::kl_monte_carlo_1d(mu, lv, 400000, 31);
                kl_z = std::max(kl_z, std::abs(exact - mc.mean) / mc.standard_error);
            }
        }
    }
    {
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> x(30), y(30);
            for (std::size_t i = 0; i < 30; ++i) {
                x[i] = rng.normal();
                y[i] = x[i] + rng.normal();
            }
            rank_err = std::max(rank_err, rel(correlations(x, y).spearman, oracle::spearman_no_ties(x, y)));
        }
        std::vector<double> x{1, 2, 3, 4, 5, 6, 7}, lin, cube;
        for (double v : x) {
            lin.push_back(2 * v + 1);
            cube.push_back(-v * v * v);
        }
        rank_err = std::max({rank_err, rel(correlations(x, lin).pearson, 1.0), rel(correlations(x, cube).spearman, -1.0)});
    }

    o.detail << "rel errors: NL " << fmt(nl_err) << ", silhouette " << fmt(sil_err) << ", procrustes "
             << fmt(pro_err) << ", random-walk " << fmt(rw_err) << ", correlations " << fmt(rank_err)
             << "; KL Monte-Carlo max |z| " << fmt(kl_z, 3);
    o.require(nl_err <= kOracleRel, "neighbor_loss");
    o.require(sil_err <= kOracleRel, "silhouette");
    o.require(pro_err <= kOracleRel, "procrustes_distance");
    o.require(rw_err <= kOracleRel, "random_walk_loglik");
    o.require(rank_err <= kOracleRel, "correlations");
    o.require(kl_z < 3.0, "KL within 3 standard errors");
    return o;
}

// ---------------------------------------------------------------------------
// 3. Invariances and determinism

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

Outcome invariances()
{
    Outcome o;
    RngStream rng(3);
    double nl_dev = 0, pro_dev = 0, sil_dev = 0, kl_min = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd z = oracle::random_matrix(100, 2 + rep % 3, rng);
        const double base = neighbor_loss(EncodingMatrix(z, iota_idx(100))).value;
        for (double c : {-4.0, 1e-3, 0.37, 250.0})
            nl_dev = std::max(nl_dev, rel(neighbor_loss(EncodingMatrix(c * z, iota_idx(100))).value, base));

        const Eigen::MatrixXd a = oracle::random_matrix(50, 2, rng);
        const Eigen::MatrixXd b = oracle::random_matrix(50, 2, rng);
        const double theta = 2 * std::numbers::pi * rng.uniform();
        Eigen::Matrix2d r;
        r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
        if (rep % 2)
            r.col(0) *= -1;
        const Eigen::MatrixXd moved = ((0.1 + 5 * rng.uniform()) * b * r).rowwise() + Eigen::RowVector2d(rng.normal(), rng.normal());
        pro_dev = std::max(pro_dev, std::abs(procrustes_distance(a, moved) - procrustes_distance(a, b)));
        pro_dev = std::max(pro_dev, procrustes_distance(b, moved));

        std::vector<int> labels(50);
        for (auto& l : labels)
            l = static_cast<int>(rng.below(3));
        const Eigen::MatrixXd shifted = a.rowwise() + Eigen::RowVector2d(3 * rng.normal(), 3 * rng.normal());
        sil_dev = std::max(sil_dev, std::abs(silhouette(shifted, labels).score - silhouette(a, labels).score));
    }
    for (int i = 0; i < 10000; ++i) {
        const Eigen::VectorXd mu = oracle::random_matrix(3, 1, rng, 2.0);
        const Eigen::VectorXd lv = oracle::random_matrix(3, 1, rng, 3.0);
        kl_min = std::min(kl_min, kl_to_standard_normal(DiagGaussian(mu, lv)));
    }

    SpiralConfig sc;
    sc.n_points = 2000;
    const bool spiral_same = same_bits(gen_spiral(sc).series.values(), gen_spiral(sc).series.values());
    const HmmConfig hc = default_hmm_config(5000, 3);
    const SeriesMatrix h1 = gen_hmm(hc), h2 = gen_hmm(hc);
    const bool hmm_same = same_bits(h1.values(), h2.values()) && *h1.labels() == *h2.labels();

    sc.n_points = 800;
    const SeriesMatrix s = gen_spiral(sc).series;
    const SeriesSplit split = split_series(s, 5, 0.2, 0.2);
    ModelSpec spec = ModelSpec::from(Hyperparams{}, s.dim());
    spec.hidden_width = 50;
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 64;
    tc.seed = 5;
    const TrainResult t1 = train(spec, s, split, tc), t2 = train(spec, s, split, tc);
    std::ostringstream r1, r2;
    write_record(r1, t1.record);
    write_record(r2, t2.record);
    bool train_same = r1.str() == r2.str();
    for (std::size_t l = 0; l < t1.model.encoder.num_layers(); ++l)
        train_same = train_same && same_bits(t1.model.encoder.layers()[l].weight, t2.model.encoder.layers()[l].weight);
    for (std::size_t l = 0; l < t1.model.decoder.num_layers(); ++l)
        train_same = train_same && same_bits(t1.model.decoder.layers()[l].weight, t2.model.decoder.layers()[l].weight);

    o.detail << "NL scale dev " << fmt(nl_dev) << ", procrustes similarity dev " << fmt(pro_dev)
             << ", silhouette translation dev " << fmt(sil_dev) << ", min KL " << fmt(kl_min)
             << ", bitwise determinism: spiral " << spiral_same << " hmm " << hmm_same << " train " << train_same;
    o.require(nl_dev <= kScaleRel, "NL scale invariance");
    o.require(pro_dev < kProcrustesInv, "procrustes similarity invariance");
    o.require(sil_dev <= kTranslationAbs, "silhouette translation invariance");
    o.require(kl_min >= 0, "KL non-negativity");
    o.require(spiral_same && hmm_same && train_same, "bitwise determinism");
    return o;
}

// ---------------------------------------------------------------------------
// Desk sweeps shared by criteria 4 to 8

struct SweepResult {
    CorrelationTables tables;
    std::size_t total = 0;
    std::size_t failed = 0;
    double seconds = 0;
};

class Workspace {
public:
    Workspace(fs::path root, unsigned jobs) : root_(std::move(root)), jobs_(jobs) {}

    const SeriesMatrix& dataset(const std::string& name)
    {
        auto it = data_.find(name);
        if (it != data_.end())
            return it->second;
        SeriesMatrix s;
        if (name == "spiral") {
            SpiralConfig cfg;
            cfg.n_points = 5000;
            cfg.noise_sigma = 0.2;
            cfg.seed = 1;
            s = gen_spiral(cfg).series;
        } else if (name == "hmm") {
            s = gen_hmm(default_hmm_config(20000, 1));
        } else {
            s = shuffle_time(gen_hmm(default_hmm_config(20000, 1)), 1);
        }
        fs::create_directories(root_ / name);
        write_csv(root_ / name / "data.csv", s);
        return data_.emplace(name, std::move(s)).first->second;
    }

    SweepResult sweep(const std::string& name, const std::string& data, GridSpec grid)
    {
        auto it = sweeps_.find(name);
        if (it != sweeps_.end())
            return it->second;
        const SeriesMatrix& s = dataset(data);
        const fs::path dir = root_ / name;
        const auto t0 = std::chrono::steady_clock::now();
        SweepManifest m = fs::exists(dir / "manifest.log") ? SweepManifest::open(dir)
                                                           : SweepManifest::create(dir, grid, root_ / data / "data.csv",
                                                                                   s.content_hash());
        if (!(m.grid() == grid))
            throw UsageError("work directory " + dir.string() + " holds a different grid");
        std::cerr << "sweep " << name << ": " << m.count(RunStatus::pending) << " of " << m.tasks().size()
                  << " runs to train\n";
        SweepOptions opts;
        opts.jobs = jobs_;
        std::size_t done = 0;
        opts.on_run = [&](const RunTask& t, const ModelRecord& r, bool) {
            std::cerr << "  [" << ++done << "/" << m.tasks().size() << "] " << name << " grid=" << t.grid_index
                      << " seed=" << t.seed << " val_loss=" << fmt(r.final_val_loss) << " val_nl=" << fmt(r.val_nl)
                      << '\n';
        };
        const SweepSummary sum = run_sweep(m, s, opts);
        SweepResult res;
        res.total = sum.total;
        res.failed = sum.failed;
        res.tables = correlation_report(m, s);
        write_report(res.tables, dir / "report");
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return sweeps_.emplace(name, std::move(res)).first->second;
    }

    SweepResult spiral_tn() { return sweep("spiral-tn", "spiral", preset_grid("desk-spiral")); }
    SweepResult spiral_std() { return sweep("spiral-std", "spiral", standard(preset_grid("desk-spiral"))); }
    SweepResult hmm_tn() { return sweep("hmm-tn", "hmm", preset_grid("desk-hmm")); }
    SweepResult clusters_std() { return sweep("clusters-std", "clusters", standard(preset_grid("desk-hmm"))); }

private:
    static GridSpec standard(GridSpec g)
    {
        g.variant = {Variant::standard};
        return g;
    }

    fs::path root_;
    unsigned jobs_;
    std::map<std::string, SeriesMatrix> data_;
    std::map<std::string, SweepResult> sweeps_;
};

double spearman_of(const CorrelationTables& t, const std::string& x, const std::string& y)
{
    const NamedCorrelation& c = t.find(x, y);
    return c.available ? c.value.spearman : std::numeric_limits<double>::quiet_NaN();
}

template <typename Key>
std::vector<ModelRow> top_rows(std::vector<ModelRow> rows, std::size_t k, Key key)
{
    std::stable_sort(rows.begin(), rows.end(), [&](const ModelRow& a, const ModelRow& b) {
        return std::tie(key(a), a.seed, a.grid_index) < std::tie(key(b), b.seed, b.grid_index);
    });
    rows.resize(std::min(k, rows.size()));
    return rows;
}

double mean_silhouette(const std::vector<ModelRow>& rows)
{
    double s = 0;
    for (const ModelRow& r : rows)
        s += r.silhouette;
    return s / static_cast<double>(rows.size());
}

const double& by_nl(const ModelRow& r) { return r.val_nl; }
const double& by_loss(const ModelRow& r) { return r.val_loss; }

// 4.
Outcome spiral_nl_vs_silhouette(Workspace& w)
{
    Outcome o;
    const SweepResult r = w.spiral_tn();
    const double rho = spearman_of(r.tables, "val_nl", "silhouette");
    o.detail << "desk spiral TN sweep: Spearman(val_nl, silhouette) = " << fmt(rho) << " (threshold <= "
             << kMaxSpearmanNlSil << "), " << (r.total - r.failed) << "/" << r.total << " runs ok, "
             << fmt(r.seconds, 3) << " s";
    o.require(rho <= kMaxSpearmanNlSil, "Spearman <= -0.4");
    o.require(r.total - r.failed >= kMinSpiralSuccesses, ">= 23 successful runs");
    return o;
}

// 5.
Outcome spiral_encoding_distance(Workspace& w)
{
    Outcome o;
    const SweepResult r = w.spiral_tn();
    const double nl = spearman_of(r.tables, "val_nl", "encoding_distance");
    const double loss = spearman_of(r.tables, "val_loss", "encoding_distance");
    o.detail << "per-combination (n=" << r.tables.combos.size() << "): Spearman(val_nl, distance) = " << fmt(nl)
             << ", Spearman(val_loss, distance) = " << fmt(loss);
    o.require(std::abs(nl) > std::abs(loss), "|rho_nl| > |rho_loss|");
    return o;
}

// 6.
Outcome spiral_tn_vs_standard(Workspace& w)
{
    Outcome o;
    const SweepResult tn = w.spiral_tn();
    const SweepResult st = w.spiral_std();
    const double a = mean_silhouette(top_rows(tn.tables.models, 3, by_nl));
    const double b = mean_silhouette(top_rows(st.tables.models, 3, by_loss));
    o.detail << "top-3 TN by NL mean silhouette " << fmt(a) << ", top-3 standard by val_loss " << fmt(b)
             << ", gap " << fmt(a - b) << " (need >= " << kMinSilGap << "); standard sweep " << fmt(st.seconds, 3)
             << " s";
    o.require(a - b >= kMinSilGap, "silhouette gap >= 0.1");
    return o;
}

// 7.
Outcome hmm_states(Workspace& w)
{
    Outcome o;
    const SweepResult r = w.hmm_tn();
    const ModelRow best = top_rows(r.tables.models, 1, by_nl).front();
    const double rho = spearman_of(r.tables, "val_nl", "silhouette");
    o.detail << "desk HMM TN sweep: top-1 by NL silhouette " << fmt(best.silhouette) << " (need >= " << kMinHmmSil
             << "), Spearman(val_nl, silhouette) = " << fmt(rho) << ", " << (r.total - r.failed) << "/" << r.total
             << " runs ok, " << fmt(r.seconds, 3) << " s";
    o.require(best.silhouette >= kMinHmmSil, "top-1 silhouette >= 0.4");
    o.require(rho <= kMaxSpearmanNlSil, "Spearman <= -0.4");
    return o;
}

// 8.
Outcome clusters_negative_control(Workspace& w)
{
    Outcome o;
    const SweepResult r = w.clusters_std();
    const double rho = spearman_of(r.tables, "val_loss", "silhouette");
    std::vector<double> sorted;
    for (const ModelRow& m : r.tables.models)
        sorted.push_back(m.val_loss);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    double lowest_sil = std::numeric_limits<double>::infinity();
    std::size_t spurious = 0;
    for (const ModelRow& m : r.tables.models) {
        if (m.val_loss <= median) {
            lowest_sil = std::min(lowest_sil, m.silhouette);
            spurious += m.silhouette < kSpuriousSil;
        }
    }
    o.detail << "shuffled-cluster standard sweep: Spearman(val_loss, silhouette) = " << fmt(rho) << " (need in (-"
             << kNoCorrelation << ", " << kNoCorrelation << ")), " << spurious
             << " models with val_loss <= median have silhouette < " << kSpuriousSil << " (lowest " << fmt(lowest_sil)
             << "), " << fmt(r.seconds, 3) << " s";
    o.require(std::abs(rho) < kNoCorrelation, "|Spearman| < 0.3");
    o.require(spurious >= 1, "a low-loss model with silhouette < 0.2");
    return o;
}

// 9.
Outcome random_walk_ranking()
{
    Outcome o;
    RngStream rng(9);
    std::vector<double> ll_closed, ll_exact, steps;
    const Eigen::Index rows = 50;
    for (int i = 0; i < 100; ++i) {
        const Eigen::MatrixXd z = oracle::random_matrix(rows, 2, rng, 0.1 + 3 * rng.uniform());
        const auto idx = iota_idx(rows);
        ll_closed.push_back(random_walk_loglik(z, idx, 0.8));
        ll_exact.push_back(random_walk_loglik(z, idx, 0.8, RandomWalkNormalization::exact_density));
        steps.push_back(sum_squared_steps(z, std::span<const Eigen::Index>(idx)).first);
    }
    const double a = correlations(ll_closed, steps).spearman;
    const double b = correlations(ll_exact, steps).spearman;
    o.detail << "100 encodings, 49 pairs each, sigma 0.8: Spearman(loglik, sum |dz|^2) = " << fmt(a, 17)
             << " (closed form), " << fmt(b, 17) << " (exact density)";
    o.require(a == -1.0 && b == -1.0, "Spearman exactly -1");
    return o;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app("acceptance suite");
    std::string work = TNVAE_ACCEPTANCE_WORK;
    bool reuse = false;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::vector<int> only;
    app.add_option("--work", work, "directory for the desk sweeps");
    app.add_flag("--reuse", reuse, "resume sweeps already present in the work directory");
    app.add_option("--jobs", jobs, "training threads")->check(CLI::PositiveNumber);
    app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);

    if (!reuse)
        fs::remove_all(work);
    fs::create_directories(work);
    Workspace ws(work, jobs);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradients},
        {"metric oracles", metric_oracles},
        {"invariances and determinism", invariances},
        {"spiral NL vs silhouette", [&] { return spiral_nl_vs_silhouette(ws); }},
        {"spiral NL vs encoding distance", [&] { return spiral_encoding_distance(ws); }},
        {"spiral TN-by-NL vs standard-by-loss", [&] { return spiral_tn_vs_standard(ws); }},
        {"HMM state recovery", [&] { return hmm_states(ws); }},
        {"shuffled-cluster negative control", [&] { return clusters_negative_control(ws); }},
        {"random-walk ranking", random_walk_ranking},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "error: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
                  << "): " << o.detail.str() << " [" << fmt(secs, 3) << " s]" << std::endl;
    }
    std::cout << (failures ? "FAILED" : "ALL PASSED") << ": " << failures << " criteria failed" << std::endl;
    return failures ? 1 : 0;
}
