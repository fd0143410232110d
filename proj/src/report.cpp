#include "tnvae/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "tnvae/config.hpp"
#include "tnvae/error.hpp"

namespace tnvae {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

std::string hp_cells(const Hyperparams& hp)
{
    std::ostringstream s;
    s << to_string(hp.variant) << ',' << hp.n_layers << ',' << hp.hidden_width << ',' << hp.latent_dim << ','
      << format_double(hp.beta) << ',' << hp.batch_size << ',' << format_double(hp.lr) << ',' << hp.epochs;
    return s.str();
}

constexpr const char* kHpHeader = "variant,n_layers,hidden_width,latent_dim,beta,batch_size,lr,epochs";

NamedCorrelation correlate(std::string x, std::string y, const std::vector<double>& xs, const std::vector<double>& ys)
{
    NamedCorrelation c;
    c.x = std::move(x);
    c.y = std::move(y);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::isfinite(xs[i]) && std::isfinite(ys[i])) {
            a.push_back(xs[i]);
            b.push_back(ys[i]);
        }
    }
    try {
        c.value = correlations(a, b);
        c.available = true;
    } catch (const Error& e) {
        c.note = e.what();
        c.value.n = a.size();
    }
    return c;
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write " + p.string());
    out << text;
}

} // namespace

const NamedCorrelation& CorrelationTables::find(const std::string& x, const std::string& y) const
{
    for (const NamedCorrelation& c : correlations)
        if (c.x == x && c.y == y)
            return c;
    throw UsageError("no correlation row for " + x + " vs " + y);
}

LabeledEncoding label_encoding(const EncodingMatrix& enc, const SeriesMatrix& series)
{
    if (!series.has_labels())
        throw DataError("series has no ground-truth labels");
    const auto& labels = *series.labels();
    LabeledEncoding out;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < enc.rows(); ++i) {
        const Eigen::Index t = enc.time_indices()[static_cast<std::size_t>(i)] - series.time_offset();
        if (t >= 0 && t < series.rows()) {
            keep.push_back(i);
            out.labels.push_back(labels[static_cast<std::size_t>(t)]);
        }
    }
    out.z.resize(static_cast<Eigen::Index>(keep.size()), enc.dim());
    for (std::size_t r = 0; r < keep.size(); ++r)
        out.z.row(static_cast<Eigen::Index>(r)) = enc.z().row(keep[r]);
    return out;
}

double model_silhouette(const VaeModel& model, const SeriesMatrix& series, Eigen::Index test_begin,
                        Eigen::Index test_end)
{
    const LabeledEncoding le = label_encoding(encode_series(model, series.slice(test_begin, test_end)), series);
    return silhouette(le.z, le.labels).score;
}

namespace {

std::pair<double, double> moments_of(const LabeledEncoding& le)
{
    std::map<int, std::size_t> sizes;
    for (int l : le.labels)
        ++sizes[l];
    std::vector<Eigen::Index> keep;
    std::vector<int> labels;
    for (std::size_t i = 0; i < le.labels.size(); ++i) {
        if (sizes[le.labels[i]] >= 8) {
            keep.push_back(static_cast<Eigen::Index>(i));
            labels.push_back(le.labels[i]);
        }
    }
    if (keep.empty())
        return {kNaN, kNaN};
    Eigen::MatrixXd z(static_cast<Eigen::Index>(keep.size()), le.z.cols());
    for (std::size_t r = 0; r < keep.size(); ++r)
        z.row(static_cast<Eigen::Index>(r)) = le.z.row(keep[r]);
    const MomentsSummary m = cluster_moments(z, labels);
    return {m.mean_abs_skew, m.mean_excess_kurtosis};
}

} // namespace

CorrelationTables correlation_report(std::span<const ModelRecord> records, std::span<const VaeModel> models,
                                     const SeriesMatrix& series, Eigen::Index test_begin, Eigen::Index test_end)
{
    if (records.size() != models.size())
        throw UsageError("correlation_report: records and models differ in length");
    if (records.empty())
        throw DataError("correlation_report: no records");

    CorrelationTables out;
    const SeriesMatrix test = series.slice(test_begin, test_end);
    std::string no_labels = "no ground-truth labels";
    if (test.has_labels()) {
        const auto& l = *test.labels();
        if (std::any_of(l.begin(), l.end(), [&](int v) { return v != l.front(); }))
            out.has_labels = true;
        else
            no_labels = "test segment covers a single ground-truth label";
    }

    std::map<Eigen::Index, std::vector<std::size_t>> by_combo;
    std::vector<EncodingMatrix> encodings(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const ModelRecord& r = records[i];
        if (r.failed) {
            ++out.failed_runs;
            continue;
        }
        encodings[i] = encode_series(models[i], test, r.run_id);
        ModelRow row;
        row.run_id = r.run_id;
        row.grid_index = r.grid_index;
        row.seed = r.seed;
        row.hyperparams = r.hyperparams;
        row.val_loss = r.final_val_loss;
        row.val_nl = r.val_nl;
        row.silhouette = row.mean_abs_skew = row.mean_excess_kurtosis = kNaN;
        if (out.has_labels) {
            const LabeledEncoding le = label_encoding(encodings[i], series);
            row.silhouette = silhouette(le.z, le.labels).score;
            std::tie(row.mean_abs_skew, row.mean_excess_kurtosis) = moments_of(le);
        }
        out.models.push_back(row);
        by_combo[r.grid_index].push_back(i);
    }

    for (const auto& [grid_index, members] : by_combo) {
        ComboRow c;
        c.grid_index = grid_index;
        c.hyperparams = records[members.front()].hyperparams;
        c.models = members.size();
        double loss = 0, nl = 0, dist = 0;
        for (std::size_t i : members) {
            loss += records[i].final_val_loss;
            nl += records[i].val_nl;
        }
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                const ModelRecord& ra = records[members[a]];
                const ModelRecord& rb = records[members[b]];
                const double d = encoding_distance(encodings[members[a]], encodings[members[b]]);
                out.seed_pairs.push_back(
                    SeedPairRow{grid_index, ra.run_id, rb.run_id, ra.final_val_loss, rb.final_val_loss, d});
                dist += d;
                ++c.pairs;
            }
        }
        c.mean_val_loss = loss / static_cast<double>(c.models);
        c.mean_val_nl = nl / static_cast<double>(c.models);
        c.mean_encoding_distance = c.pairs > 0 ? dist / static_cast<double>(c.pairs) : kNaN;
        out.combos.push_back(c);
    }

    std::vector<double> loss, nl, sil, closs, cnl, cdist;
    for (const ModelRow& m : out.models) {
        loss.push_back(m.val_loss);
        nl.push_back(m.val_nl);
        sil.push_back(m.silhouette);
    }
    for (const ComboRow& c : out.combos) {
        closs.push_back(c.mean_val_loss);
        cnl.push_back(c.mean_val_nl);
        cdist.push_back(c.mean_encoding_distance);
    }
    if (out.has_labels) {
        out.correlations.push_back(correlate("val_loss", "silhouette", loss, sil));
        out.correlations.push_back(correlate("val_nl", "silhouette", nl, sil));
    } else {
        for (const char* x : {"val_loss", "val_nl"}) {
            NamedCorrelation c;
            c.x = x;
            c.y = "silhouette";
            c.note = no_labels;
            out.correlations.push_back(c);
        }
    }
    out.correlations.push_back(correlate("val_loss", "encoding_distance", closs, cdist));
    out.correlations.push_back(correlate("val_nl", "encoding_distance", cnl, cdist));
    return out;
}

CorrelationTables correlation_report(const SweepManifest& manifest, const SeriesMatrix& series)
{
    if (series.content_hash() != manifest.dataset_hash())
        throw DataError("dataset does not match the manifest hash");
    const std::vector<ModelRecord> records = load_records(manifest);
    if (records.empty())
        throw DataError("manifest in " + manifest.dir().string() + " has no finished runs");
    std::vector<VaeModel> models(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        if (!records[i].failed)
            models[i] = load_model(manifest, records[i]);
    const SeriesSplit split = split_series(series, 0, manifest.grid().val_fraction, manifest.grid().test_fraction);
    return correlation_report(records, models, series, split.test_begin, split.test_end);
}

void write_report(const CorrelationTables& t, const fs::path& dir)
{
    fs::create_directories(dir);
    const bool sil = t.has_labels;

    std::ostringstream models;
    models << "run_id,grid_index,seed," << kHpHeader << ",val_loss,val_nl";
    if (sil)
        models << ",silhouette,mean_abs_skew,mean_excess_kurtosis";
    models << '\n';
    for (const ModelRow& m : t.models) {
        models << m.run_id << ',' << m.grid_index << ',' << m.seed << ',' << hp_cells(m.hyperparams) << ','
               << num(m.val_loss) << ',' << num(m.val_nl);
        if (sil)
            models << ',' << num(m.silhouette) << ',' << num(m.mean_abs_skew) << ',' << num(m.mean_excess_kurtosis);
        models << '\n';
    }
    write_text(dir / "models.csv", models.str());

    std::ostringstream combos, fig4;
    combos << "grid_index," << kHpHeader << ",models,mean_val_loss,mean_val_nl,mean_encoding_distance,pairs\n";
    fig4 << "grid_index,mean_val_loss,mean_val_nl,mean_encoding_distance\n";
    for (const ComboRow& c : t.combos) {
        combos << c.grid_index << ',' << hp_cells(c.hyperparams) << ',' << c.models << ',' << num(c.mean_val_loss)
               << ',' << num(c.mean_val_nl) << ',' << num(c.mean_encoding_distance) << ',' << c.pairs << '\n';
        fig4 << c.grid_index << ',' << num(c.mean_val_loss) << ',' << num(c.mean_val_nl) << ','
             << num(c.mean_encoding_distance) << '\n';
    }
    write_text(dir / "combos.csv", combos.str());
    write_text(dir / "fig4.csv", fig4.str());

    std::ostringstream pairs, fig2e;
    pairs << "grid_index,run_a,run_b,val_loss_a,val_loss_b,encoding_distance\n";
    fig2e << "mean_val_loss,val_loss_gap,encoding_distance,grid_index\n";
    for (const SeedPairRow& p : t.seed_pairs) {
        pairs << p.grid_index << ',' << p.run_a << ',' << p.run_b << ',' << num(p.val_loss_a) << ','
              << num(p.val_loss_b) << ',' << num(p.distance) << '\n';
        fig2e << num(0.5 * (p.val_loss_a + p.val_loss_b)) << ',' << num(std::abs(p.val_loss_a - p.val_loss_b))
              << ',' << num(p.distance) << ',' << p.grid_index << '\n';
    }
    write_text(dir / "seed_pairs.csv", pairs.str());
    write_text(dir / "fig2e.csv", fig2e.str());

    std::ostringstream corr;
    corr << "x,y,n,pearson,spearman,available,note\n";
    for (const NamedCorrelation& c : t.correlations)
        corr << c.x << ',' << c.y << ',' << c.value.n << ',' << (c.available ? num(c.value.pearson) : "nan") << ','
             << (c.available ? num(c.value.spearman) : "nan") << ',' << (c.available ? 1 : 0) << ',' << c.note
             << '\n';
    write_text(dir / "correlations.csv", corr.str());

    // Scatter data; silhouette-based files only exist with labels.
    if (sil) {
        std::ostringstream fig2c, fig3;
        fig2c << "val_loss,silhouette,mean_abs_skew,mean_excess_kurtosis,hidden_width,run_id\n";
        fig3 << "val_loss,val_nl,silhouette,variant,hidden_width,run_id\n";
        for (const ModelRow& m : t.models) {
            fig2c << num(m.val_loss) << ',' << num(m.silhouette) << ',' << num(m.mean_abs_skew) << ','
                  << num(m.mean_excess_kurtosis) << ',' << m.hyperparams.hidden_width << ',' << m.run_id << '\n';
            fig3 << num(m.val_loss) << ',' << num(m.val_nl) << ',' << num(m.silhouette) << ','
                 << to_string(m.hyperparams.variant) << ',' << m.hyperparams.hidden_width << ',' << m.run_id << '\n';
        }
        write_text(dir / "fig2c.csv", fig2c.str());
        write_text(dir / "fig3_row.csv", fig3.str());
    }
}

void write_encoding_csv(const fs::path& path, const EncodingMatrix& enc)
{
    std::ostringstream s;
    s << "time_index";
    for (Eigen::Index j = 0; j < enc.dim(); ++j)
        s << ",z" << j;
    s << '\n';
    for (Eigen::Index i = 0; i < enc.rows(); ++i) {
        s << enc.time_indices()[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < enc.dim(); ++j)
            s << ',' << format_double(enc.z()(i, j));
        s << '\n';
    }
    write_text(path, s.str());
}

EncodingMatrix read_encoding_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("time_index"))
        throw DataError(path.string() + ": expected header starting with time_index");
    std::vector<Eigen::Index> idx;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        std::istringstream cells(line);
        std::string cell;
        std::vector<double> row;
        bool first = true;
        try {
            while (std::getline(cells, cell, ',')) {
                if (first)
                    idx.push_back(static_cast<Eigen::Index>(parse_int(trim(cell))));
                else
                    row.push_back(parse_double(trim(cell)));
                first = false;
            }
        } catch (const Error& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (rows.empty())
            width = row.size();
        if (row.size() != width || width == 0)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw DataError(path.string() + ": no rows");
    Eigen::MatrixXd z(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return EncodingMatrix(std::move(z), std::move(idx), path.stem().string());
}

} // namespace tnvae
