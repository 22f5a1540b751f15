#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>

#include "bevdg/model.hpp"
#include "bevdg/rng.hpp"
#include "oracles.hpp"

using namespace bevdg;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, 3);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

SegMask random_label(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    SegMask mask(h, w);
    for (auto& v : mask.data()) v = rng.uniform() < 0.4 ? 1 : 0;
    return mask;
}

// FD checks measure the wrong thing when a rectifier or the probability
// clamp sits within the step of its kink; such instances are skipped and the
// next seed tried. The analytic gradient is exact almost everywhere.
bool fd_safe(const ForwardTrace& tr, double margin = 5e-5) {
    auto ok = [&](const std::vector<Tensor>& ts) {
        for (const Tensor& t : ts)
            for (double v : t.v)
                if (std::abs(v) < margin) return false;
        return true;
    };
    if (!ok(tr.pre1) || !ok(tr.pre2)) return false;
    for (double v : tr.pre3.v)
        if (std::abs(v) < margin) return false;
    for (double v : tr.probs.v)
        if (v < 1e-6 || v > 1.0 - 1e-6) return false;
    return true;
}

ModelParams random_params(std::uint64_t seed) { return init_params(ArchConfig{}, seed); }

} // namespace

TEST_CASE("forward fuses identical CAVs into the same prediction") {
    ModelParams params = random_params(1);
    Image img = random_image(16, 16, 2);
    auto [p1, t1] = forward(params, {img});
    auto [p2, t2] = forward(params, {img, img});
    CHECK(p1.v == p2.v);
    CHECK(t1.z == t2.z);
}

TEST_CASE("forward with all-zero parameters predicts 0.5 everywhere") {
    ModelParams params = make_params(ArchConfig{});
    auto [probs, trace] = forward(params, {random_image(8, 8, 3)});
    for (double v : probs.v) CHECK(v == 0.5);
}

TEST_CASE("forward is invariant under CAV permutation") {
    ModelParams params = random_params(4);
    Image a = random_image(16, 16, 5);
    Image b = random_image(16, 16, 6);
    Image c = random_image(16, 16, 7);
    auto [p1, t1] = forward(params, {a, b, c});
    auto [p2, t2] = forward(params, {c, a, b});
    auto [p3, t3] = forward(params, {b, c, a});
    CHECK(p1.v == p2.v);
    CHECK(p1.v == p3.v);
}

TEST_CASE("forward is deterministic and shape-checked") {
    ModelParams params = random_params(8);
    Image img = random_image(16, 16, 9);
    auto [p1, t1] = forward(params, {img});
    auto [p2, t2] = forward(params, {img});
    CHECK(p1.v == p2.v);
    CHECK(p1.channels == 3);
    CHECK(p1.height == 16);
    CHECK(p1.width == 16);
    CHECK(t1.z.size() == 16);
    for (double v : p1.v) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    CHECK_THROWS_AS(forward(params, {}), InvalidArgument);
    CHECK_THROWS_AS(forward(params, {img, random_image(8, 8, 1)}), InvalidArgument);
    CHECK_THROWS_AS(forward(params, {Image(10, 10, 3)}), InvalidArgument);
}

TEST_CASE("cross entropy reference values") {
    SegMask label = random_label(4, 4, 11);
    Tensor perfect(3, 4, 4);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                perfect.at(c, y, x) = label.at(y, x, c) ? 1.0 : 0.0;
    CHECK(cross_entropy(perfect, label) < 1e-5);

    Tensor half(3, 4, 4, 0.5);
    CHECK(cross_entropy(half, label) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor wrong(3, 4, 4);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                wrong.at(c, y, x) = label.at(y, x, c) ? 0.0 : 1.0;
    CHECK(cross_entropy(wrong, label) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));

    CHECK_THROWS_AS(cross_entropy(Tensor(3, 2, 2), random_label(4, 4, 1)), InvalidArgument);
}

TEST_CASE("backward matches central finite differences") {
    int checked = 0;
    for (std::uint64_t seed = 20; checked < 2 && seed < 60; ++seed) {
        ModelParams params = random_params(seed);
        std::vector<Image> cavs = {random_image(16, 16, seed * 3 + 1),
                                   random_image(16, 16, seed * 3 + 2)};
        SegMask label = random_label(16, 16, seed * 3 + 3);

        auto [probs, trace] = forward(params, cavs);
        if (!fd_safe(trace)) continue;
        ++checked;

        std::vector<double> analytic = backward(params, trace, label);
        auto loss_at = [&](const std::vector<double>& theta) {
            ModelParams p = params;
            p.theta = theta;
            auto [pr, tr] = forward(p, cavs);
            return cross_entropy(pr, label);
        };
        std::vector<double> fd = oracle::fd_gradient(loss_at, params.theta, 1e-5);
        long long bad = oracle::grad_compare(analytic, fd, 1e-4, 1e-7);
        CHECK_MESSAGE(bad == -1, "seed ", seed, " coordinate ", bad);
    }
    CHECK(checked == 2);
}

TEST_CASE("gradient is exactly zero at a constructed stationary point") {
    // all-zero parameters give flat 0.5 predictions; labels switched on for
    // exactly half the pixels per class make the bias direction stationary,
    // and zero weights kill every other path
    ModelParams params = make_params(ArchConfig{});
    Image img(4, 4, 3, 0.3);
    SegMask label(4, 4);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                label.at(y, x, c) = (y * 4 + x) % 2;

    auto [probs, trace] = forward(params, {img});
    std::vector<double> grad = backward(params, trace, label);
    for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("backward rejects a stale trace") {
    ModelParams params = random_params(33);
    Image img = random_image(8, 8, 34);
    SegMask label = random_label(8, 8, 35);
    auto [probs, trace] = forward(params, {img});
    std::vector<double> grad = backward(params, trace, label);
    ModelParams moved = sgd_step(params, grad, 0.1);
    CHECK_THROWS_AS(backward(moved, trace, label), InvalidArgument);
}

TEST_CASE("backward_with_consistency composes CE and MMD gradients") {
    ModelParams theta = random_params(40);
    Image src = random_image(16, 16, 41);
    Image tgt = random_image(16, 16, 42);
    SegMask label = random_label(16, 16, 43);

    auto [probs_s, trace_s] = forward(theta, {src});
    ModelParams theta_prime = sgd_step(theta, backward(theta, trace_s, label), 1e-3);
    auto [probs_t, trace_t] = forward(theta_prime, {tgt});
    KernelParams kp{0.8};

    SUBCASE("beta = 0 reduces to the plain backward bitwise") {
        std::vector<double> plain = backward(theta_prime, trace_t, label);
        std::vector<double> combined =
            backward_with_consistency(theta_prime, trace_s, trace_t, label, 0.0, kp);
        CHECK(plain == combined);
    }

    SUBCASE("identical latents contribute nothing") {
        std::vector<double> plain = backward(theta_prime, trace_t, label);
        std::vector<double> combined =
            backward_with_consistency(theta_prime, trace_t, trace_t, label, 0.5, kp);
        double norm = 0.0;
        for (std::size_t i = 0; i < plain.size(); ++i) {
            double d = combined[i] - plain[i];
            norm += d * d;
        }
        CHECK(std::sqrt(norm) < 1e-9);
    }

    SUBCASE("matches finite differences of the combined objective") {
        if (!fd_safe(trace_t)) return; // conditioned instance; seeds chosen to pass
        double beta = 0.3;
        std::vector<double> analytic =
            backward_with_consistency(theta_prime, trace_s, trace_t, label, beta, kp);

        FeatureBatch zs(1, trace_s.z.size());
        std::copy(trace_s.z.begin(), trace_s.z.end(), zs.rows.begin());
        auto objective = [&](const std::vector<double>& theta_vec) {
            ModelParams p = theta_prime;
            p.theta = theta_vec;
            auto [pr, tr] = forward(p, {tgt});
            FeatureBatch zt(1, tr.z.size());
            std::copy(tr.z.begin(), tr.z.end(), zt.rows.begin());
            return cross_entropy(pr, label) + beta * mmd2(zs, zt, kp);
        };
        std::vector<double> fd = oracle::fd_gradient(objective, theta_prime.theta, 1e-5);
        long long bad = oracle::grad_compare(analytic, fd, 1e-4, 1e-7);
        CHECK_MESSAGE(bad == -1, "coordinate ", bad);
    }

    SUBCASE("the consistency term scales linearly in beta") {
        std::vector<double> g0 =
            backward_with_consistency(theta_prime, trace_s, trace_t, label, 0.0, kp);
        std::vector<double> g1 =
            backward_with_consistency(theta_prime, trace_s, trace_t, label, 0.4, kp);
        std::vector<double> g2 =
            backward_with_consistency(theta_prime, trace_s, trace_t, label, 0.8, kp);
        for (std::size_t i = 0; i < g0.size(); ++i)
            CHECK(g2[i] - g0[i] == doctest::Approx(2.0 * (g1[i] - g0[i])).epsilon(1e-9));
    }
}

TEST_CASE("sgd_step arithmetic and validation") {
    ModelParams params = make_params(ArchConfig{});
    params.theta[0] = 1.0;
    params.theta[1] = 2.0;
    std::vector<double> grad(params.theta.size(), 0.0);
    grad[0] = 0.5;
    grad[1] = -1.0;

    ModelParams same = sgd_step(params, grad, 0.0);
    CHECK(same.theta == params.theta);

    ModelParams stepped = sgd_step(params, grad, 0.1);
    CHECK(stepped.theta[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(stepped.theta[1] == doctest::Approx(2.1).epsilon(1e-15));

    // two steps against frozen params compose additively
    ModelParams twice = sgd_step(sgd_step(params, grad, 0.1), grad, 0.1);
    std::vector<double> doubled = grad;
    for (double& g : doubled) g *= 2.0;
    ModelParams one_big = sgd_step(params, doubled, 0.1);
    for (std::size_t i = 0; i < params.theta.size(); ++i)
        CHECK(twice.theta[i] == doctest::Approx(one_big.theta[i]).epsilon(1e-15));

    CHECK_THROWS_AS(sgd_step(params, std::vector<double>(3, 0.0), 0.1), InvalidArgument);
    grad[5] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sgd_step(params, grad, 0.1), InvalidArgument);
}

TEST_CASE("init_params is seed-deterministic with zero biases") {
    ModelParams a = init_params(ArchConfig{}, 123);
    ModelParams b = init_params(ArchConfig{}, 123);
    ModelParams c = init_params(ArchConfig{}, 124);
    CHECK(a.theta == b.theta);
    CHECK(a.theta != c.theta);

    for (int layer = 0; layer < 4; ++layer) {
        const LayerSlice& s = a.layout[layer];
        double bound = std::sqrt(1.0 / (s.in_ch * 9.0));
        for (std::size_t i = 0; i < s.weight_len; ++i) {
            CHECK(a.theta[s.weight_offset + i] >= -bound);
            CHECK(a.theta[s.weight_offset + i] < bound);
        }
        for (std::size_t i = 0; i < s.bias_len; ++i)
            CHECK(a.theta[s.bias_offset + i] == 0.0);
    }

    // layout slices tile theta exactly and the partition lands on a layer edge
    std::size_t total = 0;
    for (const LayerSlice& s : a.layout) total += s.weight_len + s.bias_len;
    CHECK(total == a.theta.size());
    CHECK(a.encoder_len ==
          a.layout[2].weight_offset); // encoder = layers 0..1, decoder starts at 2
}

TEST_CASE("checkpoint round trip and arch hash guard") {
    namespace fs = std::filesystem;
    ModelParams params = random_params(55);
    std::string path = (fs::temp_directory_path() / "bevdg_ckpt.bin").string();
    save_checkpoint(params, path);
    ModelParams back = load_checkpoint(path, ArchConfig{});
    CHECK(back.theta == params.theta);

    ArchConfig other;
    other.enc1_channels = 4;
    CHECK_THROWS_AS(load_checkpoint(path, other), FormatError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent_zz/ckpt.bin", ArchConfig{}), IoError);
}
