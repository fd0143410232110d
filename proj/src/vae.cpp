#include "tnvae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "tnvae/adam.hpp"
#include "tnvae/config.hpp"
#include "tnvae/error.hpp"

namespace tnvae {

std::string to_string(Variant v)
{
    return v == Variant::standard ? "standard" : "time_neighbor";
}

Variant variant_from_string(const std::string& s)
{
    if (s == "standard" || s == "vae")
        return Variant::standard;
    if (s == "time_neighbor" || s == "tn" || s == "tnvae")
        return Variant::time_neighbor;
    throw ConfigError("unknown variant '" + s + "'");
}

std::string Hyperparams::canonical() const
{
    std::ostringstream s;
    s << "variant=" << to_string(variant) << ";n_layers=" << n_layers << ";hidden_width=" << hidden_width
      << ";latent_dim=" << latent_dim << ";beta=" << format_double(beta) << ";batch_size=" << batch_size
      << ";lr=" << format_double(lr) << ";epochs=" << epochs;
    return s.str();
}

// ---------------------------------------------------------------------------

void VaeModel::validate() const
{
    if (latent_dim < 1)
        throw ShapeError("latent_dim must be >= 1");
    if (encoder.output_dim() != 2 * latent_dim)
        throw ShapeError("encoder output must be 2 * latent_dim");
    if (decoder.input_dim() != latent_dim)
        throw ShapeError("decoder input must equal latent_dim");
    if (decoder.output_dim() != encoder.input_dim())
        throw ShapeError("decoder output must equal encoder input");
    if (!(beta >= 0))
        throw ConfigError("beta must be non-negative");
}

ModelSpec ModelSpec::from(const Hyperparams& hp, Eigen::Index input_dim)
{
    ModelSpec s;
    s.input_dim = input_dim;
    s.n_layers = hp.n_layers;
    s.hidden_width = hp.hidden_width;
    s.latent_dim = hp.latent_dim;
    s.variant = hp.variant;
    s.beta = hp.beta;
    return s;
}

VaeModel make_vae(const ModelSpec& spec, RngStream& init)
{
    if (spec.n_layers < 0 || spec.hidden_width < 1 || spec.latent_dim < 1 || spec.input_dim < 1)
        throw ConfigError("invalid model dimensions");
    std::vector<Eigen::Index> enc{spec.input_dim};
    std::vector<Eigen::Index> dec{spec.latent_dim};
    for (Eigen::Index i = 0; i < spec.n_layers; ++i) {
        enc.push_back(spec.hidden_width);
        dec.push_back(spec.hidden_width);
    }
    enc.push_back(2 * spec.latent_dim);
    dec.push_back(spec.input_dim);

    VaeModel m;
    m.encoder = Mlp::glorot(enc, spec.activation, init);
    m.decoder = Mlp::glorot(dec, spec.activation, init);
    m.latent_dim = spec.latent_dim;
    m.variant = spec.variant;
    m.beta = spec.beta;
    m.validate();
    return m;
}

Eigen::MatrixXd draw_noise(Eigen::Index latent_dim, Eigen::Index batch, RngStream& rng)
{
    Eigen::MatrixXd eps(latent_dim, batch);
    for (Eigen::Index c = 0; c < batch; ++c)
        for (Eigen::Index r = 0; r < latent_dim; ++r)
            eps(r, c) = rng.normal();
    return eps;
}

LossResult elbo_objective(const VaeModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          const Eigen::MatrixXd& noise, bool with_gradients)
{
    const Eigen::Index d = model.latent_dim;
    const Eigen::Index batch = inputs.cols();
    if (batch == 0)
        throw UsageError("empty batch");
    if (targets.rows() != model.decoder.output_dim() || targets.cols() != batch)
        throw ShapeError("targets must be D x B matching the inputs");
    if (noise.rows() != d || noise.cols() != batch)
        throw ShapeError("noise must be latent_dim x B");

    const ForwardTrace<double> enc = forward_trace(model.encoder, inputs);
    const auto mean = enc.output().topRows(d);
    const Eigen::ArrayXXd raw_lv = enc.output().bottomRows(d).array();
    const Eigen::ArrayXXd log_var = raw_lv.max(kLogVarMin).min(kLogVarMax);
    const Eigen::ArrayXXd sd = (0.5 * log_var).exp();
    const Eigen::MatrixXd z = mean + (sd * noise.array()).matrix();

    const ForwardTrace<double> dec = forward_trace(model.decoder, z);
    const Eigen::MatrixXd diff = dec.output() - targets;
    const double scale_b = 1.0 / static_cast<double>(batch);
    const double scale_bd = scale_b / static_cast<double>(targets.rows());

    LossResult r;
    r.terms.reconstruction = diff.squaredNorm() * scale_bd;
    r.terms.kl = kl_to_standard_normal(mean, log_var.matrix()) * scale_b;
    r.terms.total = r.terms.reconstruction + model.beta * r.terms.kl;
    if (!std::isfinite(r.terms.total))
        throw NumericError("non-finite loss");
    if (!with_gradients)
        return r;

    Eigen::MatrixXd dz;
    r.decoder_grad = backward(model.decoder, dec, (2.0 * scale_bd) * diff, &dz);

    Eigen::MatrixXd dout(2 * d, batch);
    dout.topRows(d) = dz + (model.beta * scale_b) * mean;
    const Eigen::ArrayXXd inside = ((raw_lv >= kLogVarMin) && (raw_lv <= kLogVarMax)).cast<double>();
    dout.bottomRows(d) = (inside * (dz.array() * noise.array() * 0.5 * sd +
                                    (model.beta * scale_b * 0.5) * (log_var.exp() - 1.0)))
                             .matrix();
    r.encoder_grad = backward(model.encoder, enc, dout);
    return r;
}

namespace {

Eigen::MatrixXd gather_rows(const SeriesMatrix& series, std::span<const Eigen::Index> rows, Eigen::Index shift)
{
    Eigen::MatrixXd out(series.dim(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Eigen::Index r = rows[i] + shift;
        if (r < 0 || r >= series.rows())
            throw UsageError("row index " + std::to_string(r) + " outside series");
        out.col(static_cast<Eigen::Index>(i)) = series.values().row(r).transpose();
    }
    return out;
}

} // namespace

LossResult vae_loss(const VaeModel& model, const Eigen::MatrixXd& batch, RngStream& rng)
{
    if (model.variant != Variant::standard)
        throw UsageError("vae_loss requires the standard variant");
    return elbo_objective(model, batch, batch, draw_noise(model.latent_dim, batch.cols(), rng));
}

LossResult vae_loss(const VaeModel& model, const SeriesMatrix& series, std::span<const Eigen::Index> rows,
                    RngStream& rng)
{
    if (rows.empty())
        throw UsageError("vae_loss: empty row list");
    return vae_loss(model, gather_rows(series, rows, 0), rng);
}

LossResult tnvae_loss(const VaeModel& model, const Eigen::MatrixXd& current, const Eigen::MatrixXd& next,
                      RngStream& rng)
{
    if (model.variant != Variant::time_neighbor)
        throw UsageError("tnvae_loss requires the time_neighbor variant");
    if (current.cols() == 0)
        throw UsageError("tnvae_loss: empty pair list");
    return elbo_objective(model, current, next, draw_noise(model.latent_dim, current.cols(), rng));
}

LossResult tnvae_loss(const VaeModel& model, const SeriesMatrix& series, std::span<const Eigen::Index> pairs,
                      RngStream& rng)
{
    if (pairs.empty())
        throw UsageError("tnvae_loss: empty pair list");
    return tnvae_loss(model, gather_rows(series, pairs, 0), gather_rows(series, pairs, 1), rng);
}

Encoded encode(const VaeModel& model, const Eigen::VectorXd& x, Eigen::Index t)
{
    const Eigen::VectorXd out = mlp_forward(model.encoder, x);
    const Eigen::Index d = model.latent_dim;
    return Encoded{DiagGaussian(out.head(d), out.tail(d)), model.variant == Variant::time_neighbor ? t + 1 : t};
}

EncodingMatrix encode_series(const VaeModel& model, const SeriesMatrix& series, std::string source_model)
{
    const Eigen::MatrixXd out = forward(model.encoder, series.values().transpose());
    const Eigen::Index shift = model.variant == Variant::time_neighbor ? 1 : 0;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(series.rows()));
    for (Eigen::Index i = 0; i < series.rows(); ++i)
        idx[static_cast<std::size_t>(i)] = series.time_offset() + i + shift;
    return EncodingMatrix(out.topRows(model.latent_dim).transpose(), std::move(idx), std::move(source_model));
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const
{
    if (epochs < 1)
        throw ConfigError("epochs must be >= 1");
    if (batch_size < 1)
        throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0))
        throw ConfigError("lr must be positive");
    if (!(val_fraction > 0 && val_fraction < 1))
        throw ConfigError("val_fraction must lie in (0, 1)");
}

TrainResult train(const ModelSpec& spec, const SeriesMatrix& series, const SeriesSplit& split,
                  const TrainConfig& config)
{
    config.validate();
    if (split.train_pairs.empty() || split.val_pairs.empty())
        throw UsageError("train: empty training or validation split");
    for (const auto* set : {&split.train_pairs, &split.val_pairs})
        for (Eigen::Index t : *set)
            if (t < 0 || t + 1 >= split.test_begin)
                throw UsageError("train: pair " + std::to_string(t) + " overlaps the test segment");

    const RngStream root(config.seed);
    RngStream init = root.substream("init");

    TrainResult out;
    out.model = make_vae(spec, init);
    ModelRecord& rec = out.record;
    rec.hyperparams = Hyperparams{spec.n_layers, spec.hidden_width, spec.latent_dim, spec.beta,
                                  config.batch_size, config.lr,         config.epochs,   spec.variant};
    rec.seed = config.seed;

    VaeModel& model = out.model;
    const Eigen::Index shift = spec.variant == Variant::time_neighbor ? 1 : 0;
    const Eigen::MatrixXd columns = series.values().transpose();
    const SeriesMatrix test = series.slice(split.test_begin, split.test_end);

    auto gather = [&](std::span<const Eigen::Index> pairs, Eigen::MatrixXd& in, Eigen::MatrixXd& tgt) {
        const auto b = static_cast<Eigen::Index>(pairs.size());
        in.resize(columns.rows(), b);
        tgt.resize(columns.rows(), b);
        for (Eigen::Index i = 0; i < b; ++i) {
            in.col(i) = columns.col(pairs[static_cast<std::size_t>(i)]);
            tgt.col(i) = columns.col(pairs[static_cast<std::size_t>(i)] + shift);
        }
    };

    Eigen::MatrixXd val_in, val_tgt;
    gather(split.val_pairs, val_in, val_tgt);

    AdamOptions opts;
    opts.lr = config.lr;
    AdamState enc_opt(model.encoder.layers(), opts);
    AdamState dec_opt(model.decoder.layers(), opts);

    std::vector<Eigen::Index> order = split.train_pairs;
    const auto n_train = static_cast<Eigen::Index>(order.size());
    Eigen::MatrixXd in, tgt;
    NeighborLossResult nl;

    for (Eigen::Index epoch = 1; epoch <= config.epochs; ++epoch) {
        RngStream shuffle = root.substream("shuffle").substream(static_cast<std::uint64_t>(epoch));
        RngStream noise = root.substream("noise").substream(static_cast<std::uint64_t>(epoch));
        shuffle.shuffle(std::span<Eigen::Index>(order));

        EpochRecord er;
        double weighted = 0;
        Eigen::Index batch_no = 0;
        try {
            for (Eigen::Index start = 0; start < n_train; start += config.batch_size, ++batch_no) {
                const Eigen::Index b = std::min(config.batch_size, n_train - start);
                gather(std::span<const Eigen::Index>(order).subspan(static_cast<std::size_t>(start),
                                                                    static_cast<std::size_t>(b)),
                       in, tgt);
                LossResult step = elbo_objective(model, in, tgt, draw_noise(model.latent_dim, b, noise));
                adam_step(enc_opt, model.encoder.parameters(), step.encoder_grad);
                adam_step(dec_opt, model.decoder.parameters(), step.decoder_grad);
                weighted += step.terms.total * static_cast<double>(b);
            }
            er.train_loss = weighted / static_cast<double>(n_train);

            RngStream val_noise = root.substream("val");
            const LossTerms vt =
                elbo_objective(model, val_in, val_tgt, draw_noise(model.latent_dim, val_in.cols(), val_noise), false)
                    .terms;
            er.val_loss = vt.total;
            er.val_reconstruction = vt.reconstruction;
            er.val_kl = vt.kl;
            nl = neighbor_loss(encode_series(model, test));
            er.val_nl = nl.value;
        } catch (const NumericError& e) {
            rec.failed = true;
            rec.failure = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) + ": " + e.what();
            return out;
        }
        rec.loss_curves.push_back(er);
    }

    const EpochRecord& last = rec.loss_curves.back();
    rec.final_train_loss = last.train_loss;
    rec.final_val_loss = last.val_loss;
    rec.final_val_reconstruction = last.val_reconstruction;
    rec.final_val_kl = last.val_kl;
    rec.val_nl = nl.value;
    rec.val_nl_per_pair = nl.per_pair;
    return out;
}

// ---------------------------------------------------------------------------

void write_record(std::ostream& out, const ModelRecord& r)
{
    const Hyperparams& hp = r.hyperparams;
    out << "run_id = " << r.run_id << '\n'
        << "grid_index = " << r.grid_index << '\n'
        << "variant = " << to_string(hp.variant) << '\n'
        << "n_layers = " << hp.n_layers << '\n'
        << "hidden_width = " << hp.hidden_width << '\n'
        << "latent_dim = " << hp.latent_dim << '\n'
        << "beta = " << format_double(hp.beta) << '\n'
        << "batch_size = " << hp.batch_size << '\n'
        << "lr = " << format_double(hp.lr) << '\n'
        << "epochs = " << hp.epochs << '\n'
        << "seed = " << r.seed << '\n'
        << "status = " << (r.failed ? "failed" : "ok") << '\n'
        << "failure = " << r.failure << '\n'
        << "final_train_loss = " << format_double(r.final_train_loss) << '\n'
        << "final_val_loss = " << format_double(r.final_val_loss) << '\n'
        << "final_val_reconstruction = " << format_double(r.final_val_reconstruction) << '\n'
        << "final_val_kl = " << format_double(r.final_val_kl) << '\n'
        << "val_nl = " << format_double(r.val_nl) << '\n'
        << "val_nl_per_pair = " << format_double(r.val_nl_per_pair) << '\n'
        << "checkpoint = " << r.checkpoint_ref << '\n'
        << "curve_columns = epoch train_loss val_loss val_reconstruction val_kl val_nl\n";
    for (std::size_t i = 0; i < r.loss_curves.size(); ++i) {
        const EpochRecord& e = r.loss_curves[i];
        out << "curve = " << i + 1 << ' ' << format_double(e.train_loss) << ' ' << format_double(e.val_loss) << ' '
            << format_double(e.val_reconstruction) << ' ' << format_double(e.val_kl) << ' '
            << format_double(e.val_nl) << '\n';
    }
}

ModelRecord read_record(std::istream& in)
{
    ModelRecord r;
    std::string line;
    int lineno = 0;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            const auto eq = line.find('=');
            if (trim(line).empty())
                continue;
            if (eq == std::string::npos)
                throw DataError("expected key = value");
            const std::string key = trim(std::string_view(line).substr(0, eq));
            const std::string value = trim(std::string_view(line).substr(eq + 1));
            Hyperparams& hp = r.hyperparams;
            if (key == "run_id") r.run_id = value;
            else if (key == "grid_index") r.grid_index = parse_int(value);
            else if (key == "variant") hp.variant = variant_from_string(value);
            else if (key == "n_layers") hp.n_layers = parse_int(value);
            else if (key == "hidden_width") hp.hidden_width = parse_int(value);
            else if (key == "latent_dim") hp.latent_dim = parse_int(value);
            else if (key == "beta") hp.beta = parse_double(value);
            else if (key == "batch_size") hp.batch_size = parse_int(value);
            else if (key == "lr") hp.lr = parse_double(value);
            else if (key == "epochs") hp.epochs = parse_int(value);
            else if (key == "seed") r.seed = parse_uint(value);
            else if (key == "status") r.failed = value == "failed";
            else if (key == "failure") r.failure = value;
            else if (key == "final_train_loss") r.final_train_loss = parse_double(value);
            else if (key == "final_val_loss") r.final_val_loss = parse_double(value);
            else if (key == "final_val_reconstruction") r.final_val_reconstruction = parse_double(value);
            else if (key == "final_val_kl") r.final_val_kl = parse_double(value);
            else if (key == "val_nl") r.val_nl = parse_double(value);
            else if (key == "val_nl_per_pair") r.val_nl_per_pair = parse_double(value);
            else if (key == "checkpoint") r.checkpoint_ref = value;
            else if (key == "curve") {
                std::istringstream ss(value);
                std::string tok[6];
                for (auto& t : tok)
                    if (!(ss >> t))
                        throw DataError("short curve row");
                r.loss_curves.push_back(EpochRecord{parse_double(tok[1]), parse_double(tok[2]), parse_double(tok[3]),
                                                    parse_double(tok[4]), parse_double(tok[5])});
            }
        }
    } catch (const Error& e) {
        throw DataError("record line " + std::to_string(lineno) + ": " + e.what());
    }
    return r;
}

} // namespace tnvae
