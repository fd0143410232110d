#include <doctest.h>

#include <cstring>
#include <sstream>

#include "oracles.hpp"
#include "tnvae/adam.hpp"
#include "tnvae/checkpoint.hpp"
#include "tnvae/gaussian.hpp"
#include "tnvae/mlp.hpp"
#include "tnvae/rng.hpp"

using namespace tnvae;

namespace {

Mlp single_layer(Eigen::MatrixXd w, Eigen::VectorXd b, Activation a = Activation::identity)
{
    LayerStack<double> layers(1);
    layers[0].weight = std::move(w);
    layers[0].bias = std::move(b);
    return Mlp(std::move(layers), a, Activation::identity);
}

// Quadratic loss against a fixed target with per-entry weights.
auto weighted_sq_loss(const Eigen::MatrixXd& target, const Eigen::MatrixXd& weights)
{
    return [target, weights](const Eigen::MatrixXd& out) {
        const Eigen::MatrixXd diff = out - target;
        const double loss = (weights.array() * diff.array().square()).sum();
        Eigen::MatrixXd grad = 2.0 * (weights.array() * diff.array()).matrix();
        return std::pair<double, Eigen::MatrixXd>(loss, grad);
    };
}

} // namespace

TEST_CASE("mlp_forward hand cases")
{
    const Mlp id = single_layer(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
    CHECK(mlp_forward(id, Eigen::VectorXd(Eigen::Vector2d(1, 2))) == Eigen::VectorXd(Eigen::Vector2d(1, 2)));

    Eigen::Matrix2d w;
    w << 2, 0, 0, 3;
    const Mlp m = single_layer(w, Eigen::Vector2d(1, 1));
    CHECK(mlp_forward(m, Eigen::VectorXd(Eigen::Vector2d(1, 1))) == Eigen::VectorXd(Eigen::Vector2d(3, 4)));
}

TEST_CASE("mlp_forward matches straight-line re-evaluation")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Mlp net = oracle::random_net({4, 7, 3}, Activation::tanh, seed);
        RngStream rng(100 + seed);
        const Eigen::MatrixXd x = oracle::random_matrix(4, 1, rng);
        const Eigen::VectorXd got = mlp_forward(net, Eigen::VectorXd(x.col(0)));
        const oracle::Vec want = oracle::mlp_forward(net, oracle::column(x, 0));
        for (Eigen::Index i = 0; i < got.size(); ++i)
            CHECK(got(i) == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-14));
    }
}

TEST_CASE("mlp_forward rejects wrong input length")
{
    const Mlp net = oracle::random_net({3, 2}, Activation::tanh, 1);
    CHECK_THROWS_AS(mlp_forward(net, Eigen::VectorXd::Zero(4)), ShapeError);
    CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(2, 5)), ShapeError);
}

TEST_CASE("network construction validates chaining and finiteness")
{
    LayerStack<double> bad(2);
    bad[0].weight = Eigen::MatrixXd::Zero(3, 2);
    bad[0].bias = Eigen::VectorXd::Zero(3);
    bad[1].weight = Eigen::MatrixXd::Zero(1, 4);
    bad[1].bias = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(Mlp{bad}, ShapeError);

    bad[1].weight = Eigen::MatrixXd::Zero(1, 3);
    bad[1].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Mlp{bad}, NumericError);
}

TEST_CASE("identity activations compose to one affine map")
{
    const Mlp net = oracle::random_net({5, 6, 4, 3}, Activation::identity, 9);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(5, 5);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(5);
    for (const auto& l : net.layers()) {
        c = l.weight * c + l.bias;
        A = l.weight * A;
    }
    RngStream rng(3);
    const Eigen::MatrixXd x = oracle::random_matrix(5, 8, rng);
    const Eigen::MatrixXd want = (A * x).colwise() + c;
    CHECK((forward(net, x) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear layer with loss = output: weight gradient equals input")
{
    const Mlp net = single_layer(Eigen::MatrixXd::Constant(1, 3, 0.7), Eigen::VectorXd::Constant(1, -0.2));
    const Eigen::Vector3d x(0.5, -1.5, 2.0);
    auto [loss, grads] = mlp_gradient(net, Eigen::MatrixXd(x), [](const Eigen::MatrixXd& out) {
        return std::pair<double, Eigen::MatrixXd>(out(0, 0), Eigen::MatrixXd::Ones(1, 1));
    });
    CHECK(loss == doctest::Approx(0.7 * (0.5 - 1.5 + 2.0) - 0.2));
    CHECK(grads[0].weight.row(0).transpose() == Eigen::VectorXd(x));
    CHECK(grads[0].bias(0) == 1.0);
}

TEST_CASE("zeroed paths carry zero gradient")
{
    // Second layer weights are zero, so nothing upstream of it affects the output.
    Mlp net = oracle::random_net({3, 4, 2}, Activation::tanh, 5);
    net.parameters()[1].weight.setZero();
    RngStream rng(1);
    const Eigen::MatrixXd x = oracle::random_matrix(3, 6, rng);
    auto [loss, grads] = mlp_gradient(net, x, [](const Eigen::MatrixXd& out) {
        return std::pair<double, Eigen::MatrixXd>(out.squaredNorm(), 2.0 * out);
    });
    CHECK(grads[0].weight.isZero(0));
    CHECK(grads[0].bias.isZero(0));
}

TEST_CASE("analytic gradient matches central finite differences")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Mlp net = oracle::random_net({4, 6, 5, 3}, Activation::tanh, seed);
        RngStream rng(1000 + seed);
        const Eigen::MatrixXd x = oracle::random_matrix(4, 7, rng);
        const Eigen::MatrixXd target = oracle::random_matrix(3, 7, rng);
        const Eigen::MatrixXd weights = oracle::random_matrix(3, 7, rng).cwiseAbs();
        const auto loss_fn = weighted_sq_loss(target, weights);
        auto [loss, grads] = mlp_gradient(net, x, loss_fn);
        const auto check = oracle::check_gradients(net.parameters(), grads,
                                                   [&] { return loss_fn(forward(net, x)).first; });
        CHECK(check.max_rel_error < 1e-4);
        CHECK(check.checked == static_cast<std::size_t>(net.num_parameters()));
    }
}

TEST_CASE("non-finite activation reports the layer")
{
    Mlp net = oracle::random_net({2, 3, 1}, Activation::identity, 2);
    net.parameters()[1].weight.setConstant(1e300);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(2, 1, 1e300);
    try {
        forward(net, x);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.layer() >= 0);
        CHECK(e.layer() <= 1);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged")
{
    const Mlp net = oracle::random_net({3, 2}, Activation::tanh, 4);
    LayerStack<double> params = net.layers();
    AdamState st(params, {});
    adam_step(st, params, zeros_like(params));
    CHECK(params[0].weight == net.layers()[0].weight);
    CHECK(params[0].bias == net.layers()[0].bias);
    CHECK(st.step_count == 1);
}

TEST_CASE("adam: first step on a unit gradient moves by lr")
{
    LayerStack<double> p(1);
    p[0].weight = Eigen::MatrixXd::Zero(1, 1);
    p[0].bias = Eigen::VectorXd::Zero(1);
    LayerStack<double> g = p;
    g[0].weight(0, 0) = 1.0;
    AdamState st(p, {});
    adam_step(st, p, g);
    // m_hat = v_hat = 1 after bias correction: step = lr * 1 / (1 + eps).
    CHECK(p[0].weight(0, 0) == doctest::Approx(-1e-3 / (1 + 1e-8)).epsilon(1e-12));
    CHECK(p[0].bias(0) == 0.0);
}

TEST_CASE("adam: constant positive gradient decreases the parameter every step")
{
    LayerStack<double> p(1);
    p[0].weight = Eigen::MatrixXd::Zero(1, 1);
    p[0].bias = Eigen::VectorXd::Zero(1);
    LayerStack<double> g = p;
    g[0].weight(0, 0) = 1.0;
    AdamState st(p, {});
    double prev = 0;
    for (int i = 0; i < 10; ++i) {
        adam_step(st, p, g);
        CHECK(p[0].weight(0, 0) < prev);
        prev = p[0].weight(0, 0);
    }
}

TEST_CASE("adam: shape mismatch and bitwise determinism")
{
    const Mlp net = oracle::random_net({3, 4, 2}, Activation::tanh, 8);
    LayerStack<double> a = net.layers(), b = net.layers();
    AdamState sa(a, {}), sb(b, {});
    RngStream ra(5), rb(5);
    for (int i = 0; i < 25; ++i) {
        LayerStack<double> ga = zeros_like(a), gb = zeros_like(b);
        for (auto* gs : {&ga, &gb}) {
            RngStream& r = gs == &ga ? ra : rb;
            for (auto& l : *gs) {
                for (Eigen::Index k = 0; k < l.weight.size(); ++k)
                    l.weight.data()[k] = r.normal();
                for (Eigen::Index k = 0; k < l.bias.size(); ++k)
                    l.bias(k) = r.normal();
            }
        }
        adam_step(sa, a, ga);
        adam_step(sb, b, gb);
    }
    for (std::size_t l = 0; l < a.size(); ++l) {
        CHECK(std::memcmp(a[l].weight.data(), b[l].weight.data(), sizeof(double) * a[l].weight.size()) == 0);
        CHECK(std::memcmp(a[l].bias.data(), b[l].bias.data(), sizeof(double) * a[l].bias.size()) == 0);
    }
    LayerStack<double> wrong = zeros_like(a);
    wrong.pop_back();
    CHECK_THROWS_AS(adam_step(sa, a, wrong), ShapeError);
}

TEST_CASE("kl_to_standard_normal closed-form cases")
{
    CHECK(kl_to_standard_normal(DiagGaussian::standard(3)) == 0.0);
    CHECK(kl_to_standard_normal(DiagGaussian(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0))) ==
          doctest::Approx(0.5));
    const Eigen::VectorXd nan = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(kl_to_standard_normal(nan, Eigen::VectorXd::Zero(1)), NumericError);
}

TEST_CASE("kl_to_standard_normal matches a Monte-Carlo estimate")
{
    const double lv = std::log(2.0);
    const double exact = kl_to_standard_normal(DiagGaussian(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, lv)));
    const auto mc = oracle::kl_monte_carlo_1d(0.0, lv, 1000000, 77);
    CHECK(std::abs(exact - mc.mean) < 3 * mc.standard_error);
}

TEST_CASE("kl is non-negative and zero only at the prior")
{
    RngStream rng(12);
    for (int i = 0; i < 500; ++i) {
        const Eigen::VectorXd mu = oracle::random_matrix(3, 1, rng, 2.0);
        const Eigen::VectorXd lv = oracle::random_matrix(3, 1, rng, 3.0);
        CHECK(kl_to_standard_normal(DiagGaussian(mu, lv)) > 0);
    }
}

TEST_CASE("reparameterize")
{
    SUBCASE("clamped log-variance collapses onto the mean")
    {
        // log_var = -60 clamps to -30, so the spread is exactly exp(-15) * |eps|.
        const DiagGaussian q(Eigen::Vector2d(0.3, -1.2), Eigen::Vector2d(-60, -60));
        CHECK(q.log_var(0) == kLogVarMin);
        RngStream rng(4), eps_rng(4);
        const Eigen::VectorXd z = reparameterize(q, rng);
        for (Eigen::Index i = 0; i < 2; ++i)
            CHECK(z(i) - q.mean(i) == doctest::Approx(std::exp(-15.0) * eps_rng.normal()).epsilon(1e-12));
        CHECK((z - q.mean).cwiseAbs().maxCoeff() < 1e-5);
    }
    SUBCASE("fixed seed is repeatable")
    {
        const DiagGaussian q(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(0.1, -0.4, 0.2));
        RngStream rng(99);
        const Eigen::VectorXd a = reparameterize(q, rng);
        rng.reset();
        CHECK(reparameterize(q, rng) == a);
    }
    SUBCASE("standard normal moments")
    {
        const DiagGaussian q = DiagGaussian::standard(1);
        RngStream rng(2024);
        double s = 0, s2 = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double z = reparameterize(q, rng)(0);
            s += z;
            s2 += z * z;
        }
        const double mean = s / n;
        CHECK(std::abs(mean) < 0.02);
        CHECK(std::abs(s2 / n - mean * mean - 1.0) < 0.05);
    }
}

TEST_CASE("rng streams")
{
    RngStream a(7), b(7);
    for (int i = 0; i < 100; ++i)
        CHECK(a.next_u64() == b.next_u64());
    // Pinned values guard cross-platform reproducibility.
    RngStream c(42);
    CHECK(c.next_u64() == 0x8ca10b1dbe91ee23ULL);
    CHECK(c.next_u64() == 0xe72aac3121269f60ULL);
    CHECK(c.next_u64() == 0xeb61ef540335612cULL);
    CHECK(RngStream(1).substream("x").next_u64() != RngStream(1).substream("y").next_u64());
    CHECK(RngStream(1).substream(std::uint64_t{3}).next_u64() != RngStream(2).substream(std::uint64_t{3}).next_u64());
    RngStream u(3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK((x >= 0 && x < 1));
        CHECK(u.below(7) < 7);
    }
}

TEST_CASE("checkpoint round-trips bit-exactly")
{
    RngStream init(3);
    ModelSpec spec;
    spec.input_dim = 5;
    spec.hidden_width = 7;
    spec.latent_dim = 2;
    spec.beta = 3.3e-4;
    const VaeModel m = make_vae(spec, init);
    std::stringstream s;
    write_checkpoint(s, m);
    const VaeModel back = read_checkpoint(s);
    CHECK(back.latent_dim == m.latent_dim);
    CHECK(back.variant == m.variant);
    CHECK(back.beta == m.beta);
    for (std::size_t l = 0; l < m.encoder.num_layers(); ++l) {
        CHECK(back.encoder.layers()[l].weight == m.encoder.layers()[l].weight);
        CHECK(back.encoder.layers()[l].bias == m.encoder.layers()[l].bias);
    }
    for (std::size_t l = 0; l < m.decoder.num_layers(); ++l)
        CHECK(back.decoder.layers()[l].weight == m.decoder.layers()[l].weight);
    CHECK(back.encoder.hidden_activation() == m.encoder.hidden_activation());

    std::stringstream broken("tnvae-checkpoint 1\nvariant = nonsense\n");
    CHECK_THROWS_AS(read_checkpoint(broken), DataError);
}
