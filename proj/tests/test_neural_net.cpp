#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mvap/neural_net.hpp"

using namespace mvap;
using namespace mvap::nn;

namespace {

QNetwork micro_net() {
    // 1 -> 1 -> 1: y = 3 * relu(2x) + 1
    QNetwork net({1, 1, 1});
    net.layer(0).weights(0, 0) = 2.0;
    net.layer(1).weights(0, 0) = 3.0;
    net.layer(1).bias(0) = 1.0;
    return net;
}

Minibatch random_batch(Rng& rng, int in, int out, int n) {
    std::vector<TrainingSample> s;
    for (int i = 0; i < n; ++i) {
        TrainingSample t;
        for (int k = 0; k < in; ++k) t.state.push_back(uniform(rng, -1, 1));
        t.action = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(out)));
        t.target = uniform(rng, -2, 2);
        s.push_back(t);
    }
    return Minibatch::from_samples(s, in);
}

}  // namespace

TEST(QNetwork, ZeroNetworkOutputsZero) {
    QNetwork net({5, 8, 8, 4});
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_TRUE(net.forward(x).isZero());
    EXPECT_EQ(net.parameter_count(), 5u * 8 + 8 + 8 * 8 + 8 + 8 * 4 + 4);
}

TEST(QNetwork, MicroNetForward) {
    const auto net = micro_net();
    EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{1.0})(0), 7.0);
    EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{-1.0})(0), 1.0);
    EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{0.5})(0), 4.0);
}

TEST(QNetwork, BatchForwardMatchesSingle) {
    Rng rng = make_stream(1, Stream::Init);
    const auto net = QNetwork::glorot({5, 16, 16, 7}, rng);
    Matrix x(5, 4);
    for (Eigen::Index c = 0; c < 4; ++c)
        for (Eigen::Index r = 0; r < 5; ++r) x(r, c) = uniform(rng, -1, 1);
    const Matrix q = net.forward_batch(x);
    for (Eigen::Index c = 0; c < 4; ++c) {
        std::vector<double> col(x.col(c).data(), x.col(c).data() + 5);
        EXPECT_TRUE(q.col(c).isApprox(net.forward(col), 1e-14));
    }
}

TEST(QNetwork, RejectsBadInput) {
    QNetwork net({3, 2});
    try {
        net.forward(std::vector<double>{1.0, std::nan(""), 0.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonFiniteInput);
    }
    EXPECT_THROW(net.forward(std::vector<double>{1.0}), Error);
    EXPECT_THROW(QNetwork({4}), Error);
}

TEST(QNetwork, GlorotBounds) {
    Rng rng = make_stream(2, Stream::Init);
    const auto net = QNetwork::glorot({5, 256, 256, 256, 1001}, rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto& w = net.layer(l).weights;
        const double bound = QNetwork::init_bound(w.cols(), w.rows());
        EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
        EXPECT_GT(w.cwiseAbs().maxCoeff(), 0.9 * bound);
        EXPECT_NEAR(w.mean(), 0.0, 0.05 * bound);
        EXPECT_TRUE(net.layer(l).bias.isZero());
    }
    EXPECT_NEAR(QNetwork::init_bound(5, 256), std::sqrt(6.0 / 261.0), 1e-15);
}

TEST(QNetwork, GlorotIsSeeded) {
    Rng a = make_stream(3, Stream::Init), b = make_stream(3, Stream::Init), c = make_stream(4, Stream::Init);
    const auto na = QNetwork::glorot({5, 8, 3}, a), nb = QNetwork::glorot({5, 8, 3}, b),
               nc = QNetwork::glorot({5, 8, 3}, c);
    EXPECT_EQ(na.layer(0).weights, nb.layer(0).weights);
    EXPECT_NE(na.layer(0).weights, nc.layer(0).weights);
}

TEST(Backward, LinearNetClosedForm) {
    // 2 -> 1, no hidden layer: dL/dw = (2/B) sum (w.x + b - y) x
    QNetwork net({2, 1});
    net.layer(0).weights << 0.5, -1.0;
    net.layer(0).bias << 0.25;
    std::vector<TrainingSample> s{{{1.0, 2.0}, 0, 1.0}, {{-1.0, 0.5}, 0, 0.0}};
    const auto mb = Minibatch::from_samples(s, 2);
    const double e0 = 0.5 - 2.0 + 0.25 - 1.0;  // -2.25
    const double e1 = -0.5 - 0.5 + 0.25 - 0.0;  // -0.75
    const auto g = backward(net, mb);
    EXPECT_NEAR(g.layers[0].weights(0, 0), (e0 * 1.0 + e1 * -1.0), 1e-15);
    EXPECT_NEAR(g.layers[0].weights(0, 1), (e0 * 2.0 + e1 * 0.5), 1e-15);
    EXPECT_NEAR(g.layers[0].bias(0), e0 + e1, 1e-15);
    EXPECT_NEAR(loss(net, mb), (e0 * e0 + e1 * e1) / 2.0, 1e-15);
}

TEST(Backward, MatchesFiniteDifferences) {
    Rng rng = make_stream(5, Stream::Init);
    auto net = QNetwork::glorot({5, 8, 4}, rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        for (Eigen::Index i = 0; i < net.layer(l).bias.size(); ++i) net.layer(l).bias(i) = uniform(rng, -0.1, 0.1);
    const auto mb = random_batch(rng, 5, 4, 6);
    const auto g = backward(net, mb);
    const double h = 1e-5;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto& w = net.layer(l).weights;
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                const double keep = w(r, c);
                w(r, c) = keep + h;
                const double up = loss(net, mb);
                w(r, c) = keep - h;
                const double down = loss(net, mb);
                w(r, c) = keep;
                EXPECT_NEAR(g.layers[l].weights(r, c), (up - down) / (2 * h), 1e-4) << l << " " << r << " " << c;
            }
        auto& b = net.layer(l).bias;
        for (Eigen::Index r = 0; r < b.size(); ++r) {
            const double keep = b(r);
            b(r) = keep + h;
            const double up = loss(net, mb);
            b(r) = keep - h;
            const double down = loss(net, mb);
            b(r) = keep;
            EXPECT_NEAR(g.layers[l].bias(r), (up - down) / (2 * h), 1e-4);
        }
    }
}

TEST(Backward, UntakenActionsGetNoGradient) {
    Rng rng = make_stream(6, Stream::Init);
    const auto net = QNetwork::glorot({3, 4, 5}, rng);
    std::vector<TrainingSample> s{{{0.1, 0.2, 0.3}, 2, 1.0}};
    const auto g = backward(net, Minibatch::from_samples(s, 3));
    for (int a = 0; a < 5; ++a) {
        if (a == 2) continue;
        EXPECT_TRUE(g.layers[1].weights.row(a).isZero());
        EXPECT_EQ(g.layers[1].bias(a), 0.0);
    }
}

TEST(Backward, RejectsEmptyAndNonFinite) {
    QNetwork net({2, 2});
    Minibatch empty;
    empty.states.resize(2, 0);
    try {
        backward(net, empty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyBatch);
    }
    std::vector<TrainingSample> s{{{0.0, 0.0}, 0, std::nan("")}};
    try {
        backward(net, Minibatch::from_samples(s, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonFiniteInput);
    }
}

TEST(Sgd, SingleStepArithmetic) {
    QNetwork net({1, 1});
    net.layer(0).weights << 1.0;
    GradientSet g = GradientSet::zeros_like(net);
    g.layers[0].weights << 2.0;
    g.layers[0].bias << -4.0;
    sgd_update(net, g, 0.5);
    EXPECT_EQ(net.layer(0).weights(0, 0), 0.0);
    EXPECT_EQ(net.layer(0).bias(0), 2.0);
}

TEST(Sgd, ShapeMismatch) {
    QNetwork net({2, 3}), other({2, 4});
    try {
        sgd_update(net, GradientSet::zeros_like(other), 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ShapeMismatch);
    }
}

TEST(ClipByNorm, ScalesOnlyAboveBound) {
    QNetwork net({1, 1});
    GradientSet g = GradientSet::zeros_like(net);
    g.layers[0].weights << 3.0;
    g.layers[0].bias << 4.0;
    EXPECT_EQ(gradient_norm(g), 5.0);
    clip_by_norm(g, 10.0);
    EXPECT_EQ(g.layers[0].weights(0, 0), 3.0);
    EXPECT_EQ(g.layers[0].bias(0), 4.0);
    clip_by_norm(g, 1.0);
    EXPECT_DOUBLE_EQ(g.layers[0].weights(0, 0), 0.6);
    EXPECT_DOUBLE_EQ(g.layers[0].bias(0), 0.8);
    EXPECT_NEAR(gradient_norm(g), 1.0, 1e-15);
}

TEST(ClipByNorm, KeepsDirectionAcrossLayers) {
    Rng rng = make_stream(9, Stream::Init);
    auto net = QNetwork::glorot({5, 8, 4}, rng);
    const auto mb = random_batch(rng, 5, 4, 10);
    const auto raw = backward(net, mb);
    auto clipped = raw;
    const double n = gradient_norm(raw);
    clip_by_norm(clipped, 0.25 * n);
    EXPECT_NEAR(gradient_norm(clipped), 0.25 * n, 1e-12 * n);
    for (std::size_t l = 0; l < raw.layers.size(); ++l) {
        EXPECT_TRUE(clipped.layers[l].weights.isApprox(0.25 * raw.layers[l].weights, 1e-12));
        EXPECT_TRUE(clipped.layers[l].bias.isApprox(0.25 * raw.layers[l].bias, 1e-12));
    }
}

TEST(ClipByNorm, RejectsNonPositiveBound) {
    QNetwork net({1, 1});
    GradientSet g = GradientSet::zeros_like(net);
    try {
        clip_by_norm(g, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidParameter);
    }
}

TEST(Sgd, FitsStraightLine) {
    QNetwork net({1, 1});
    Rng rng = make_stream(7, Stream::Minibatch);
    for (int it = 0; it < 5000; ++it) {
        std::vector<TrainingSample> s;
        for (int i = 0; i < 10; ++i) {
            const double x = uniform(rng, -1, 1);
            s.push_back({{x}, 0, 2.0 * x + 1.0});
        }
        const auto mb = Minibatch::from_samples(s, 1);
        sgd_update(net, backward(net, mb), 0.05);
    }
    EXPECT_NEAR(net.layer(0).weights(0, 0), 2.0, 1e-6);
    EXPECT_NEAR(net.layer(0).bias(0), 1.0, 1e-6);
}

TEST(Sgd, LossDecreasesOnFixedBatch) {
    Rng rng = make_stream(8, Stream::Init);
    auto net = QNetwork::glorot({5, 32, 32, 6}, rng);
    const auto mb = random_batch(rng, 5, 6, 10);
    const double before = loss(net, mb);
    for (int i = 0; i < 200; ++i) sgd_update(net, backward(net, mb), 0.01);
    EXPECT_LT(loss(net, mb), 0.5 * before);
}

TEST(SoftUpdate, Examples) {
    QNetwork t({1, 1}), p({1, 1});
    t.layer(0).weights << 0.0;
    p.layer(0).weights << 1.0;
    soft_update(t, p, 0.01);
    EXPECT_DOUBLE_EQ(t.layer(0).weights(0, 0), 0.01);
    soft_update(t, p, 0.0);
    EXPECT_DOUBLE_EQ(t.layer(0).weights(0, 0), 0.01);
    soft_update(t, p, 1.0);
    EXPECT_EQ(t.layer(0).weights(0, 0), 1.0);
    EXPECT_THROW(soft_update(t, p, 1.5), Error);
    QNetwork q({1, 2});
    EXPECT_THROW(soft_update(t, q, 0.5), Error);
}

TEST(SoftUpdate, GeometricConvergence) {
    QNetwork t({1, 1}), p({1, 1});
    p.layer(0).weights << 1.0;
    for (int i = 0; i < 100; ++i) soft_update(t, p, 0.01);
    EXPECT_NEAR(t.layer(0).weights(0, 0), 1.0 - std::pow(0.99, 100), 1e-12);
}

TEST(Checkpoint, RoundTrip) {
    Rng rng = make_stream(9, Stream::Init);
    const auto net = QNetwork::glorot({5, 7, 3}, rng);
    const auto path = (std::filesystem::temp_directory_path() / "mvap_ckpt_test.bin").string();
    save_checkpoint(net, path);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(back.layer_sizes(), net.layer_sizes());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        EXPECT_EQ(back.layer(l).weights, net.layer(l).weights);
        EXPECT_EQ(back.layer(l).bias, net.layer(l).bias);
    }
    std::filesystem::remove(path);
}

TEST(Checkpoint, BadFiles) {
    try {
        load_checkpoint("/nonexistent/dir/ckpt.bin");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IoError);
    }
    const auto path = (std::filesystem::temp_directory_path() / "mvap_ckpt_bad.bin").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTACKPT";
    }
    EXPECT_THROW(load_checkpoint(path), Error);
    std::filesystem::remove(path);
}
