#include "tnvae/series.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tnvae/config.hpp"
#include "tnvae/error.hpp"
#include "tnvae/rng.hpp"

namespace tnvae {

SeriesMatrix::SeriesMatrix(Eigen::MatrixXd values, std::optional<std::vector<int>> labels, SeriesMeta meta,
                           Eigen::Index time_offset)
    : values_(std::move(values)), labels_(std::move(labels)), meta_(std::move(meta)), time_offset_(time_offset)
{
    if (values_.rows() < 2)
        throw DataError("series needs at least 2 rows, got " + std::to_string(values_.rows()));
    if (values_.cols() < 1)
        throw DataError("series needs at least one feature column");
    if (!values_.allFinite())
        throw DataError("series contains non-finite values");
    if (labels_ && static_cast<Eigen::Index>(labels_->size()) != values_.rows())
        throw DataError("label count does not match row count");
}

SeriesMatrix SeriesMatrix::slice(Eigen::Index begin, Eigen::Index end) const
{
    if (begin < 0 || end > rows() || end - begin < 2)
        throw UsageError("invalid series slice [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
    std::optional<std::vector<int>> sub_labels;
    if (labels_)
        sub_labels.emplace(labels_->begin() + begin, labels_->begin() + end);
    return SeriesMatrix(values_.middleRows(begin, end - begin), std::move(sub_labels), meta_, time_offset_ + begin);
}

SeriesMatrix SeriesMatrix::permuted(const std::vector<Eigen::Index>& order, const std::string& name_suffix) const
{
    if (static_cast<Eigen::Index>(order.size()) != rows())
        throw UsageError("permutation length != row count");
    Eigen::MatrixXd v(rows(), dim());
    std::optional<std::vector<int>> l;
    if (labels_)
        l.emplace(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        v.row(static_cast<Eigen::Index>(i)) = values_.row(order[i]);
        if (l)
            (*l)[i] = (*labels_)[static_cast<std::size_t>(order[i])];
    }
    SeriesMeta m = meta_;
    m.name += name_suffix;
    return SeriesMatrix(std::move(v), std::move(l), std::move(m));
}

std::uint64_t SeriesMatrix::content_hash() const
{
    std::uint64_t h = fnv1a64(std::to_string(rows()) + "x" + std::to_string(dim()));
    for (Eigen::Index c = 0; c < dim(); ++c) {
        for (Eigen::Index r = 0; r < rows(); ++r) {
            const auto bits = std::bit_cast<std::uint64_t>(values_(r, c));
            h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
        }
    }
    if (labels_)
        for (int l : *labels_)
            h = fnv1a64(std::to_string(l) + ",", h);
    return h;
}

// ---------------------------------------------------------------------------

void SpiralConfig::validate() const
{
    if (n_points < 200)
        throw ConfigError("spiral n_points must be >= 200");
    if (!(turns > 0))
        throw ConfigError("spiral turns must be positive");
    if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma))
        throw ConfigError("spiral noise_sigma must be >= 0");
    if (embed_dim < 2)
        throw ConfigError("spiral embed_dim must be >= 2");
}

SpiralEmbedding SpiralEmbedding::make(Eigen::Index embed_dim, std::uint64_t seed)
{
    RngStream rng = RngStream(seed).substream("spiral-embedding");
    SpiralEmbedding e;
    e.w1.resize(embed_dim, 2);
    e.b1.resize(embed_dim);
    e.w2.resize(embed_dim, embed_dim);
    e.b2.resize(embed_dim);
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (Eigen::Index i = 0; i < embed_dim; ++i) {
        e.w1(i, 0) = 1.5 * rng.normal();
        e.w1(i, 1) = 1.5 * rng.normal();
        e.b1(i) = 0.5 * rng.normal();
    }
    for (Eigen::Index c = 0; c < embed_dim; ++c)
        for (Eigen::Index r = 0; r < embed_dim; ++r)
            e.w2(r, c) = w2_scale * rng.normal();
    for (Eigen::Index i = 0; i < embed_dim; ++i)
        e.b2(i) = 0.1 * rng.normal();
    return e;
}

Eigen::VectorXd SpiralEmbedding::apply(const Eigen::Vector2d& p) const
{
    const Eigen::VectorXd h = (w1 * p + b1).array().tanh().matrix();
    return w2 * h + b2;
}

double spiral_arc_length(double theta)
{
    return 0.5 * (theta * std::sqrt(1.0 + theta * theta) + std::asinh(theta));
}

double spiral_theta_at(double s)
{
    if (!(s > 0))
        return 0.0;
    double theta = std::sqrt(2.0 * s);
    for (int it = 0; it < 100; ++it) {
        const double step = (spiral_arc_length(theta) - s) / std::sqrt(1.0 + theta * theta);
        theta -= step;
        if (theta < 0)
            theta = 0;
        if (std::abs(step) < 1e-10)
            break;
    }
    return theta;
}

SpiralData gen_spiral(const SpiralConfig& cfg)
{
    cfg.validate();
    const Eigen::Index n = cfg.n_points;
    const Eigen::Index d = cfg.embed_dim;
    const double theta_max = cfg.turns * 2.0 * std::numbers::pi;
    const double total = spiral_arc_length(theta_max);

    SpiralData out;
    out.embedding = SpiralEmbedding::make(d, cfg.embedding_seed);
    out.coords.resize(n, 2);
    out.arc_length.resize(n);
    out.clean.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = total * static_cast<double>(i) / static_cast<double>(n - 1);
        const double theta = spiral_theta_at(s);
        const double r = theta / theta_max;
        out.arc_length(i) = s;
        out.coords(i, 0) = r * std::cos(theta);
        out.coords(i, 1) = r * std::sin(theta);
        out.clean.row(i) = out.embedding.apply(out.coords.row(i).transpose()).transpose();
    }

    Eigen::MatrixXd noisy = out.clean;
    if (cfg.noise_sigma > 0) {
        const Eigen::RowVectorXd mean = out.clean.colwise().mean();
        const Eigen::RowVectorXd std =
            ((out.clean.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
        RngStream rng = RngStream(cfg.seed).substream("spiral-noise");
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                noisy(i, j) += cfg.noise_sigma * std(j) * rng.normal();
    }

    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        labels[static_cast<std::size_t>(i)] = static_cast<int>(i / 100);

    out.series = SeriesMatrix(std::move(noisy), std::move(labels), SeriesMeta{"spiral", cfg.noise_sigma, cfg.seed});
    return out;
}

// ---------------------------------------------------------------------------

void HmmConfig::validate() const
{
    if (n_states < 1)
        throw ConfigError("hmm needs at least one state");
    if (n_points < 2)
        throw ConfigError("hmm n_points must be >= 2");
    if (transition.rows() != n_states || transition.cols() != n_states)
        throw ConfigError("transition matrix must be n_states x n_states");
    for (Eigen::Index i = 0; i < n_states; ++i) {
        if ((transition.row(i).array() < 0).any())
            throw ConfigError("transition row " + std::to_string(i) + " has negative entries");
        if (std::abs(transition.row(i).sum() - 1.0) > 1e-12)
            throw ConfigError("transition row " + std::to_string(i) + " does not sum to 1");
    }
    if (means.rows() != n_states || variances.rows() != n_states || means.cols() != variances.cols() ||
        means.cols() < 1)
        throw ConfigError("means / variances must both be n_states x D");
    if (!(variances.array() > 0).all())
        throw ConfigError("variances must be positive");
    if (!means.allFinite() || !variances.allFinite())
        throw ConfigError("non-finite emission parameters");
}

HmmConfig default_hmm_config(Eigen::Index n_points, std::uint64_t seed, Eigen::Index dim,
                             std::uint64_t geometry_seed, double separation, double max_std)
{
    HmmConfig cfg;
    cfg.n_states = 3;
    cfg.n_points = n_points;
    cfg.seed = seed;

    const double stay[3] = {0.98, 0.95, 0.98}; // wake-like, REM-like, SWS-like
    cfg.transition.resize(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            cfg.transition(i, j) = i == j ? stay[i] : 0.5 * (1.0 - stay[i]);

    RngStream rng = RngStream(geometry_seed).substream("hmm-geometry");
    Eigen::VectorXd profile(dim);
    for (Eigen::Index j = 0; j < dim; ++j)
        profile(j) = 0.5 * std::pow(2.0 * max_std, rng.uniform()); // log-uniform on [0.5, max_std)
    Eigen::MatrixXd stds(3, dim);
    for (Eigen::Index k = 0; k < 3; ++k)
        for (Eigen::Index j = 0; j < dim; ++j)
            stds(k, j) = profile(j) * (0.8 + 0.45 * rng.uniform());
    cfg.variances = stds.array().square().matrix();

    cfg.means.resize(3, dim);
    for (Eigen::Index k = 0; k < 3; ++k)
        for (Eigen::Index j = 0; j < dim; ++j)
            cfg.means(k, j) = rng.normal();
    double min_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            min_dist = std::min(min_dist, (cfg.means.row(a) - cfg.means.row(b)).norm());
    cfg.means *= separation * stds.mean() / min_dist;
    return cfg;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition)
{
    const Eigen::EigenSolver<Eigen::MatrixXd> es(transition.transpose());
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0))
            best = i;
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    return v / v.sum();
}

SeriesMatrix gen_hmm(const HmmConfig& cfg)
{
    cfg.validate();
    const Eigen::Index n = cfg.n_points;
    const Eigen::Index d = cfg.means.cols();
    RngStream state_rng = RngStream(cfg.seed).substream("hmm-states");
    RngStream emit_rng = RngStream(cfg.seed).substream("hmm-emissions");

    std::vector<int> states(static_cast<std::size_t>(n));
    int s = static_cast<int>(state_rng.below(static_cast<std::uint64_t>(cfg.n_states)));
    for (Eigen::Index t = 0; t < n; ++t) {
        if (t > 0) {
            const double u = state_rng.uniform();
            double acc = 0;
            int next = static_cast<int>(cfg.n_states) - 1;
            for (Eigen::Index k = 0; k < cfg.n_states; ++k) {
                acc += cfg.transition(s, k);
                if (u < acc) {
                    next = static_cast<int>(k);
                    break;
                }
            }
            s = next;
        }
        states[static_cast<std::size_t>(t)] = s;
    }

    const Eigen::MatrixXd stds = cfg.variances.array().sqrt().matrix();
    Eigen::MatrixXd values(n, d);
    for (Eigen::Index t = 0; t < n; ++t) {
        const int k = states[static_cast<std::size_t>(t)];
        for (Eigen::Index j = 0; j < d; ++j)
            values(t, j) = cfg.means(k, j) + stds(k, j) * emit_rng.normal();
    }
    return SeriesMatrix(std::move(values), std::move(states), SeriesMeta{"hmm", 0.0, cfg.seed});
}

SeriesMatrix shuffle_time(const SeriesMatrix& series, std::uint64_t seed)
{
    std::vector<Eigen::Index> order(static_cast<std::size_t>(series.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    RngStream rng = RngStream(seed).substream("time-shuffle");
    rng.shuffle(std::span<Eigen::Index>(order));
    return series.permuted(order, "-shuffled");
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_commas(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

} // namespace

bool csv_has_label_column(const std::filesystem::path& path)
{
    std::ifstream in(path);
    std::string header;
    if (!in || !std::getline(in, header))
        throw DataError("cannot read " + path.string());
    const auto cells = split_commas(header);
    return !cells.empty() && trim(cells.back()) == "label";
}

SeriesMatrix load_csv(const std::filesystem::path& path, bool has_labels)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path.string() + ": empty file");
    const std::size_t columns = split_commas(line).size();
    const std::size_t features = has_labels ? columns - 1 : columns;
    if (features < 1)
        throw DataError(path.string() + ":1: header has no feature columns");

    std::vector<double> flat;
    std::vector<int> labels;
    std::size_t lineno = 1;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty())
            continue;
        const auto cells = split_commas(line);
        const std::string where = path.string() + ":" + std::to_string(lineno) + " (row " + std::to_string(n) + ")";
        if (cells.size() != columns)
            throw DataError(where + ": expected " + std::to_string(columns) + " cells, found " +
                            std::to_string(cells.size()));
        for (std::size_t j = 0; j < features; ++j) {
            double v;
            try {
                v = parse_double(cells[j]);
            } catch (const DataError&) {
                throw DataError(where + ": column " + std::to_string(j) + " is not numeric: '" + trim(cells[j]) + "'");
            }
            if (!std::isfinite(v))
                throw DataError(where + ": column " + std::to_string(j) + " is not finite");
            flat.push_back(v);
        }
        if (has_labels) {
            try {
                labels.push_back(static_cast<int>(parse_int(cells.back())));
            } catch (const DataError&) {
                throw DataError(where + ": label is not an integer: '" + trim(cells.back()) + "'");
            }
        }
        ++n;
    }
    if (n < 2)
        throw DataError(path.string() + ": need at least 2 data rows, found " + std::to_string(n));

    Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(features));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < features; ++j)
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * features + j];
    std::optional<std::vector<int>> l;
    if (has_labels)
        l = std::move(labels);
    return SeriesMatrix(std::move(values), std::move(l), SeriesMeta{path.stem().string(), 0.0, 0});
}

void write_csv(const std::filesystem::path& path, const SeriesMatrix& series)
{
    std::ofstream out(path);
    if (!out)
        throw UsageError("cannot write " + path.string());
    for (Eigen::Index j = 0; j < series.dim(); ++j)
        out << (j ? "," : "") << "f" << j;
    if (series.has_labels())
        out << ",label";
    out << '\n';
    for (Eigen::Index i = 0; i < series.rows(); ++i) {
        for (Eigen::Index j = 0; j < series.dim(); ++j)
            out << (j ? "," : "") << format_double(series.values()(i, j));
        if (series.has_labels())
            out << ',' << (*series.labels())[static_cast<std::size_t>(i)];
        out << '\n';
    }
    if (!out)
        throw UsageError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

SeriesSplit split_series(const SeriesMatrix& series, std::uint64_t seed, double val_fraction, double test_fraction)
{
    if (!(val_fraction > 0) || !(test_fraction > 0) || !(val_fraction + test_fraction < 1))
        throw UsageError("split fractions must be positive and sum to less than 1");
    const Eigen::Index n = series.rows();
    const auto n_test = static_cast<Eigen::Index>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
    const Eigen::Index nontest = n - n_test;
    const Eigen::Index pairs = nontest - 1;
    if (n_test < 2 || pairs < 2)
        throw UsageError("series of " + std::to_string(n) + " rows is too short to split");

    auto n_val = static_cast<Eigen::Index>(std::llround(val_fraction * static_cast<double>(pairs)));
    n_val = std::clamp<Eigen::Index>(n_val, 1, pairs - 1);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(pairs));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    RngStream rng = RngStream(seed).substream("split");
    rng.shuffle(std::span<Eigen::Index>(order));

    SeriesSplit split;
    split.val_pairs.assign(order.begin(), order.begin() + n_val);
    split.train_pairs.assign(order.begin() + n_val, order.end());
    std::sort(split.val_pairs.begin(), split.val_pairs.end());
    std::sort(split.train_pairs.begin(), split.train_pairs.end());
    split.test_begin = nontest;
    split.test_end = n;
    return split;
}

} // namespace tnvae
