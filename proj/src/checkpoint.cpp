#include "tnvae/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "tnvae/config.hpp"
#include "tnvae/error.hpp"

namespace tnvae {

namespace {

std::string expect_word(std::istream& in, const std::string& what)
{
    std::string w;
    if (!(in >> w))
        throw DataError("checkpoint truncated, expected " + what);
    return w;
}

void expect_literal(std::istream& in, const std::string& literal)
{
    const std::string w = expect_word(in, "'" + literal + "'");
    if (w != literal)
        throw DataError("checkpoint: expected '" + literal + "', found '" + w + "'");
}

Eigen::Index read_index(std::istream& in, const std::string& what)
{
    const std::int64_t v = parse_int(expect_word(in, what));
    if (v < 0)
        throw DataError("checkpoint: negative " + what);
    return static_cast<Eigen::Index>(v);
}

} // namespace

void write_mlp(std::ostream& out, const Mlp& net)
{
    out << "activation " << to_string(net.hidden_activation()) << ' ' << to_string(net.output_activation()) << '\n';
    out << "layers " << net.num_layers() << '\n';
    for (const auto& layer : net.layers()) {
        out << "layer " << layer.out_dim() << ' ' << layer.in_dim() << '\n';
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                out << (c ? " " : "") << format_double(layer.weight(r, c));
            out << '\n';
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
            out << (r ? " " : "") << format_double(layer.bias(r));
        out << '\n';
    }
}

Mlp read_mlp(std::istream& in)
{
    expect_literal(in, "activation");
    const Activation hidden = activation_from_string(expect_word(in, "hidden activation"));
    const Activation output = activation_from_string(expect_word(in, "output activation"));
    expect_literal(in, "layers");
    const Eigen::Index n = read_index(in, "layer count");
    LayerStack<double> layers(static_cast<std::size_t>(n));
    for (auto& layer : layers) {
        expect_literal(in, "layer");
        const Eigen::Index rows = read_index(in, "layer rows");
        const Eigen::Index cols = read_index(in, "layer cols");
        layer.weight.resize(rows, cols);
        layer.bias.resize(rows);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                layer.weight(r, c) = parse_double(expect_word(in, "weight value"));
        for (Eigen::Index r = 0; r < rows; ++r)
            layer.bias(r) = parse_double(expect_word(in, "bias value"));
    }
    try {
        return Mlp(std::move(layers), hidden, output);
    } catch (const Error& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
}

void write_checkpoint(std::ostream& out, const VaeModel& model)
{
    out << "tnvae-checkpoint 1\n"
        << "variant " << to_string(model.variant) << '\n'
        << "latent_dim " << model.latent_dim << '\n'
        << "beta " << format_double(model.beta) << '\n'
        << "network encoder\n";
    write_mlp(out, model.encoder);
    out << "network decoder\n";
    write_mlp(out, model.decoder);
}

VaeModel read_checkpoint(std::istream& in)
{
    expect_literal(in, "tnvae-checkpoint");
    expect_literal(in, "1");
    VaeModel m;
    expect_literal(in, "variant");
    try {
        m.variant = variant_from_string(expect_word(in, "variant"));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    expect_literal(in, "latent_dim");
    m.latent_dim = read_index(in, "latent_dim");
    expect_literal(in, "beta");
    m.beta = parse_double(expect_word(in, "beta"));
    expect_literal(in, "network");
    expect_literal(in, "encoder");
    m.encoder = read_mlp(in);
    expect_literal(in, "network");
    expect_literal(in, "decoder");
    m.decoder = read_mlp(in);
    try {
        m.validate();
    } catch (const Error& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    return m;
}

void save_checkpoint(const std::filesystem::path& path, const VaeModel& model)
{
    std::ofstream out(path);
    if (!out)
        throw UsageError("cannot write checkpoint " + path.string());
    write_checkpoint(out, model);
    if (!out)
        throw UsageError("failed writing checkpoint " + path.string());
}

VaeModel load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

} // namespace tnvae
