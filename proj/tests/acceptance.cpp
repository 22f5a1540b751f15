// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 6-8 share the same six training runs (three seeds, full
// method and vanilla baseline) at the default desk-scale task.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "bevdg/colorspace.hpp"
#include "bevdg/experiment.hpp"
#include "bevdg/meta_train.hpp"
#include "bevdg/metrics.hpp"
#include "bevdg/spectral.hpp"
#include "oracles.hpp"

using namespace bevdg;

namespace {

using clock_type = std::chrono::steady_clock;

struct Criterion {
    int id;
    std::string name;
    bool pass;
    double seconds;
    double budget_seconds;
    std::string detail;
};

std::vector<Criterion> g_results;

void report(int id, const std::string& name, bool pass, double seconds, double budget,
            const std::string& detail) {
    bool ok = pass && seconds < budget;
    g_results.push_back({id, name, ok, seconds, budget, detail});
    std::printf("[%s] criterion %d: %s (%.1f s / budget %.0f s)%s%s\n",
                ok ? "PASS" : "FAIL", id, name.c_str(), seconds, budget,
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
}

Image random_image(int h, int w, int c, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, c);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

// ---- criterion 1: spectral correctness ----
void criterion_spectral() {
    auto t0 = clock_type::now();
    bool pass = true;
    std::string detail;

    double worst_rt = 0.0;
    for (auto [h, w] : {std::pair{16, 16}, {8, 8}, {5, 7}, {32, 32}, {6, 10}}) {
        Image img = random_image(h, w, 3, 100 + h * 37 + w);
        Image back = ifft2d(fft2d(img));
        for (std::size_t i = 0; i < img.size(); ++i)
            worst_rt = std::max(worst_rt, std::abs(back.data()[i] - img.data()[i]));
    }
    pass = pass && worst_rt < 1e-9;

    double worst_parseval = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Image img = random_image(16, 16, 3, 200 + seed);
        Spectrum spec = fft2d(img);
        double spatial = 0.0, freq = 0.0;
        for (double v : img.data()) spatial += v * v;
        for (const auto& z : spec.data) freq += std::norm(z);
        freq /= 16.0 * 16.0;
        worst_parseval = std::max(worst_parseval, std::abs(spatial - freq) / spatial);
    }
    pass = pass && worst_parseval < 1e-6;

    double worst_aug = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Image src = random_image(16, 16, 3, 300 + seed);
        Image tgt = random_image(16, 16, 3, 400 + seed);
        double ratio = seed == 0 ? 0.01 : seed == 1 ? 0.1 : 0.3;
        Image fast = ampaug(src, tgt, ratio);
        Image ref = oracle::ampaug_naive(src, tgt, ratio);
        for (std::size_t i = 0; i < fast.size(); ++i)
            worst_aug = std::max(worst_aug, std::abs(fast.data()[i] - ref.data()[i]));
    }
    pass = pass && worst_aug < 1e-9;

    char buf[160];
    std::snprintf(buf, sizeof(buf), "round-trip %.2e, parseval %.2e, ampaug-vs-oracle %.2e",
                  worst_rt, worst_parseval, worst_aug);
    double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(1, "spectral correctness", pass, secs, 5.0, buf);
}

// ---- criterion 2: ampaug identity ----
void criterion_ampaug_identity() {
    auto t0 = clock_type::now();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Image img = seed == 2 ? generate_scene(9, 32, 32, 1).cav_images[0]
                              : random_image(16, 16, 3, 500 + seed);
        for (double ratio : {0.0, 0.01, 0.1}) {
            Image out = ampaug(img, img, ratio);
            for (std::size_t i = 0; i < img.size(); ++i)
                worst = std::max(worst, std::abs(out.data()[i] - img.data()[i]));
        }
    }
    char buf[80];
    std::snprintf(buf, sizeof(buf), "max deviation %.2e", worst);
    double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(2, "ampaug identity at src == tgt", worst < 1e-6, secs, 1.0, buf);
}

// ---- criterion 3: MMD correctness ----
void criterion_mmd() {
    auto t0 = clock_type::now();
    bool pass = true;

    double worst_oracle = 0.0;
    Rng sizes(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t ns = 1 + sizes.uniform_index(6);
        std::size_t nt = 1 + sizes.uniform_index(6);
        std::size_t d = 1 + sizes.uniform_index(5);
        FeatureBatch zs(ns, d), zt(nt, d);
        Rng rng(9000 + trial);
        for (double& v : zs.rows) v = rng.uniform(-2.0, 2.0);
        for (double& v : zt.rows) v = rng.uniform(-2.0, 2.0);
        KernelParams kp{0.4 + 0.25 * static_cast<double>(trial % 5)};

        std::vector<std::vector<double>> rs(ns), rt(nt);
        for (std::size_t i = 0; i < ns; ++i) rs[i].assign(zs.row(i), zs.row(i) + d);
        for (std::size_t i = 0; i < nt; ++i) rt[i].assign(zt.row(i), zt.row(i) + d);

        double got = mmd2(zs, zt, kp);
        double want = oracle::mmd2_naive(rs, rt, kp.sigma);
        worst_oracle = std::max(worst_oracle, std::abs(got - std::max(0.0, want)));
        pass = pass && got >= 0.0;
        if (trial % 10 == 0) pass = pass && mmd2(zs, zs, kp) < 1e-12;
    }
    pass = pass && worst_oracle < 1e-12;

    bool grad_ok = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        FeatureBatch zs(4, 3), zt(4, 3);
        Rng rng(9500 + seed);
        for (double& v : zs.rows) v = rng.uniform(-2.0, 2.0);
        for (double& v : zt.rows) v = rng.uniform(-2.0, 2.0);
        KernelParams kp{0.9};
        std::vector<double> analytic = mmd2_grad(zs, zt, kp);
        auto f = [&](const std::vector<double>& rows) {
            FeatureBatch z = zt;
            z.rows = rows;
            return mmd2(zs, z, kp);
        };
        std::vector<double> fd = oracle::fd_gradient(f, zt.rows, 1e-5);
        grad_ok = grad_ok && oracle::grad_compare(analytic, fd, 1e-4, 1e-9) == -1;
    }
    pass = pass && grad_ok;

    char buf[120];
    std::snprintf(buf, sizeof(buf), "oracle gap %.2e, gradient check %s", worst_oracle,
                  grad_ok ? "ok" : "failed");
    double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(3, "MMD correctness", pass, secs, 10.0, buf);
}

// ---- criterion 4: model gradient check ----
void criterion_model_gradients() {
    auto t0 = clock_type::now();
    bool pass = true;
    int seeds_done = 0;
    std::string detail;

    // kink conditioning: FD measures the wrong thing when a rectifier input or
    // probability sits within the step of its nonsmooth point, so such draws
    // are skipped (the analytic gradient is exact almost everywhere)
    auto fd_safe = [](const ForwardTrace& tr) {
        auto ok = [&](const std::vector<Tensor>& ts) {
            for (const Tensor& t : ts)
                for (double v : t.v)
                    if (std::abs(v) < 5e-5) return false;
            return true;
        };
        if (!ok(tr.pre1) || !ok(tr.pre2)) return false;
        for (double v : tr.pre3.v)
            if (std::abs(v) < 5e-5) return false;
        for (double v : tr.probs.v)
            if (v < 1e-6 || v > 1.0 - 1e-6) return false;
        return true;
    };

    for (std::uint64_t seed = 1; seeds_done < 5 && seed < 64; ++seed) {
        ModelParams params = init_params(ArchConfig{}, seed);
        std::vector<Image> cavs = {random_image(16, 16, 3, seed * 7 + 1),
                                   random_image(16, 16, 3, seed * 7 + 2)};
        Scene label_scene = generate_scene(seed, 16, 16, 1);
        const SegMask& label = label_scene.label;

        auto [probs, trace] = forward(params, cavs);
        if (!fd_safe(trace)) continue;

        std::vector<double> analytic = backward(params, trace, label);
        auto ce_loss = [&](const std::vector<double>& theta) {
            ModelParams p = params;
            p.theta = theta;
            auto [pr, tr] = forward(p, cavs);
            return cross_entropy(pr, label);
        };
        std::vector<double> fd = oracle::fd_gradient(ce_loss, params.theta, 1e-5);
        long long bad = oracle::grad_compare(analytic, fd, 1e-4, 1e-7);
        if (bad != -1) {
            pass = false;
            detail = "backward mismatch at seed " + std::to_string(seed) +
                     " coordinate " + std::to_string(bad);
            break;
        }

        // meta-test branch with the consistency term
        Image tgt_img = apply_fog(cavs[0], FogParams{});
        ModelParams theta_prime = sgd_step(params, analytic, 1e-3);
        auto [probs_t, trace_t] = forward(theta_prime, {tgt_img, cavs[1]});
        if (!fd_safe(trace_t)) continue;
        KernelParams kp{1.0};
        double beta = 0.1;
        std::vector<double> analytic_c =
            backward_with_consistency(theta_prime, trace, trace_t, label, beta, kp);
        FeatureBatch zs(1, trace.z.size());
        std::copy(trace.z.begin(), trace.z.end(), zs.rows.begin());
        auto combined_loss = [&](const std::vector<double>& theta) {
            ModelParams p = theta_prime;
            p.theta = theta;
            auto [pr, tr] = forward(p, {tgt_img, cavs[1]});
            FeatureBatch zt(1, tr.z.size());
            std::copy(tr.z.begin(), tr.z.end(), zt.rows.begin());
            return cross_entropy(pr, label) + beta * mmd2(zs, zt, kp);
        };
        std::vector<double> fd_c =
            oracle::fd_gradient(combined_loss, theta_prime.theta, 1e-5);
        bad = oracle::grad_compare(analytic_c, fd_c, 1e-4, 1e-7);
        if (bad != -1) {
            pass = false;
            detail = "backward_with_consistency mismatch at seed " +
                     std::to_string(seed) + " coordinate " + std::to_string(bad);
            break;
        }
        ++seeds_done;
    }
    if (seeds_done < 5 && pass) {
        pass = false;
        detail = "only " + std::to_string(seeds_done) + " clean seeds found";
    }
    if (detail.empty())
        detail = "all coordinates within 1e-4 rel / 1e-7 abs across 5 seeds";

    double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(4, "model gradient check", pass, secs, 60.0, detail);
}

// ---- criterion 5: color and alignment ----
void criterion_color() {
    auto t0 = clock_type::now();
    bool pass = true;
    WhitePoint wp = default_white_point();

    double worst_rt = 0.0;
    Rng rng(31);
    for (int i = 0; i < 1000; ++i) {
        Image px(1, 1, 3);
        for (int c = 0; c < 3; ++c) px.at(0, 0, c) = rng.uniform();
        Image back = lab_to_rgb(rgb_to_lab(px, wp), wp);
        for (int c = 0; c < 3; ++c)
            worst_rt = std::max(worst_rt, std::abs(back.at(0, 0, c) - px.at(0, 0, c)));
    }
    pass = pass && worst_rt < 1e-6;

    double worst_stats = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        LabImage img;
        img.height = img.width = 8;
        img.data.resize(192);
        Rng r2(600 + seed);
        for (double& v : img.data) v = r2.uniform(0.0, 100.0);
        LabStats src = compute_stats(img);
        LabStats tgt;
        tgt.mu = {50.0 + static_cast<double>(seed), -4.0, 9.0};
        tgt.sigma = {11.0, 3.0, 6.0};
        tgt.pixel_count = 64;
        LabStats got = compute_stats(translate(img, src, tgt));
        for (int c = 0; c < 3; ++c) {
            worst_stats = std::max(worst_stats, std::abs(got.mu[c] - tgt.mu[c]));
            worst_stats = std::max(worst_stats, std::abs(got.sigma[c] - tgt.sigma[c]));
        }
    }
    pass = pass && worst_stats < 1e-9;

    Image red(1, 1, 3);
    red.at(0, 0, 0) = 1.0;
    Image xyz = rgb_to_xyz(red);
    bool exact = xyz.at(0, 0, 0) == 0.4124 && xyz.at(0, 0, 1) == 0.2126 &&
                 xyz.at(0, 0, 2) == 0.0193;
    pass = pass && exact;

    char buf[140];
    std::snprintf(buf, sizeof(buf), "lab round-trip %.2e, translate stats %.2e, matrix %s",
                  worst_rt, worst_stats, exact ? "exact" : "WRONG");
    double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(5, "color and alignment", pass, secs, 5.0, buf);
}

// ---- shared training runs for criteria 6-8 ----
struct TrainingRuns {
    std::vector<ExperimentConfig> full_cfgs;
    std::vector<ExperimentOutput> full;
    std::vector<ExperimentOutput> vanilla;
    ExperimentOutput full_repeat;
    double seconds = 0.0;
};

ExperimentConfig seed_config(std::uint64_t seed, bool full_method) {
    ExperimentConfig cfg; // defaults: 200 scenes, 32x32, 3 CAVs, 30+20 epochs
    cfg.dataset.seed = seed;
    cfg.meta.seed = seed;
    if (!full_method) cfg.toggles = {false, false, false};
    return cfg;
}

TrainingRuns run_training_grid() {
    auto t0 = clock_type::now();
    TrainingRuns runs;
    for (std::uint64_t seed : {7ULL, 8ULL, 9ULL}) {
        ExperimentConfig full_cfg = seed_config(seed, true);
        runs.full_cfgs.push_back(full_cfg);
        runs.full.push_back(run_experiment(full_cfg));
        runs.vanilla.push_back(run_experiment(seed_config(seed, false)));
    }
    runs.full_repeat = run_experiment(runs.full_cfgs[0]);
    runs.seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
    std::printf("       (training grid: 7 runs in %.0f s)\n", runs.seconds);
    std::fflush(stdout);
    return runs;
}

// ---- criterion 6: meta-loop behavior ----
void criterion_meta_loop(const TrainingRuns& runs, double grid_share) {
    auto t0 = clock_type::now();
    bool pass = true;
    std::string detail;
    constexpr int kWindow = 20;

    for (std::size_t k = 0; k < runs.full.size() && pass; ++k) {
        // consistency loss exists in the meta phase: the tail of the log
        const ExperimentConfig& cfg = runs.full_cfgs[k];
        int n_eval = std::max(1, static_cast<int>(std::lround(cfg.dataset.scene_count *
                                                              cfg.dataset.eval_fraction)));
        std::size_t warmup = static_cast<std::size_t>(cfg.erm_epochs) *
                             (cfg.dataset.scene_count - n_eval);
        std::vector<double> cons;
        for (std::size_t i = warmup; i < runs.full[k].log.size(); ++i)
            cons.push_back(runs.full[k].log[i].l_cons);
        if (cons.size() < 2 * kWindow) {
            pass = false;
            detail = "meta phase too short";
            break;
        }
        double first = 0.0, last = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            first += cons[i] / kWindow;
            last += cons[cons.size() - kWindow + i] / kWindow;
        }
        if (!(last <= first + 1e-12)) {
            pass = false;
            detail = "cons loss rose: first-window " + std::to_string(first) +
                     " final-window " + std::to_string(last);
        }
    }

    // bitwise reproducibility of seed 7
    if (pass) {
        const ExperimentOutput& a = runs.full[0];
        const ExperimentOutput& b = runs.full_repeat;
        if (a.params.theta != b.params.theta || a.log.size() != b.log.size()) {
            pass = false;
            detail = "repeat run diverged";
        } else {
            for (std::size_t i = 0; i < a.log.size(); ++i)
                if (a.log[i].l_ce_train != b.log[i].l_ce_train ||
                    a.log[i].l_ce_test != b.log[i].l_ce_test ||
                    a.log[i].l_cons != b.log[i].l_cons) {
                    pass = false;
                    detail = "repeat run log diverged at iteration " + std::to_string(i);
                    break;
                }
            for (std::size_t i = 0; pass && i < a.records.size(); ++i)
                if (a.records[i].iou.average != b.records[i].iou.average) {
                    pass = false;
                    detail = "repeat run records diverged";
                }
        }
    }
    if (detail.empty())
        detail = "smoothed cons non-increasing on 3 seeds, seed 7 bitwise-reproducible";

    double secs = grid_share + std::chrono::duration<double>(clock_type::now() - t0).count();
    report(6, "meta-loop behavior", pass, secs, 300.0, detail);
}

// ---- criterion 7: directional collective ablation ----
void criterion_table1(const TrainingRuns& runs, double grid_share) {
    auto t0 = clock_type::now();
    auto avg_of = [](const ExperimentOutput& out, DomainTag tag) {
        for (const ResultsRecord& rec : out.records)
            if (rec.domain == tag) return rec.iou.average;
        return -1.0;
    };

    int domains_won = 0;
    std::string detail;
    for (DomainTag tag : shifted_domains()) {
        int wins = 0;
        for (std::size_t k = 0; k < runs.full.size(); ++k)
            if (avg_of(runs.full[k], tag) >= avg_of(runs.vanilla[k], tag)) ++wins;
        bool won = wins >= 2; // majority over 3 seeds
        domains_won += won;
        detail += to_string(tag) + (won ? " won " : " lost ") + std::to_string(wins) + "/3; ";
    }
    bool pass = domains_won >= 3;

    double secs = grid_share + std::chrono::duration<double>(clock_type::now() - t0).count();
    report(7, "full method vs vanilla on shifted domains", pass, secs, 900.0, detail);
}

// ---- criterion 8: alignment benefit ----
void criterion_alignment(const TrainingRuns& runs, double grid_share) {
    auto t0 = clock_type::now();
    int wins = 0;
    std::string detail;
    for (std::size_t k = 0; k < runs.full.size(); ++k) {
        const ExperimentConfig& cfg = runs.full_cfgs[k];
        DatasetBundle data = generate_split_dataset(cfg.dataset, cfg.corruption.jitter);
        auto suite = build_domain_suite(data.eval, cfg.corruption);
        EvalResult with_align = evaluate(runs.full[k].params, suite, true);
        EvalResult without = evaluate(runs.full[k].params, suite, false);
        double avg_with = 0.0, avg_without = 0.0;
        for (const auto& [tag, rep] : with_align.per_domain) avg_with += rep.average / 4.0;
        for (const auto& [tag, rep] : without.per_domain) avg_without += rep.average / 4.0;
        if (avg_with >= avg_without) ++wins;
        char buf[80];
        std::snprintf(buf, sizeof(buf), "seed%zu %.4f vs %.4f; ", k, avg_with, avg_without);
        detail += buf;
    }
    bool pass = wins >= 2;

    double secs = grid_share + std::chrono::duration<double>(clock_type::now() - t0).count();
    report(8, "alignment improves average IoU", pass, secs, 300.0, detail);
}

// ---- criterion 9: IoU oracle equivalence ----
void criterion_iou() {
    auto t0 = clock_type::now();
    bool pass = true;
    Rng rng(77);
    for (int trial = 0; trial < 100 && pass; ++trial) {
        int h = 2 + static_cast<int>(rng.uniform_index(14));
        int w = 2 + static_cast<int>(rng.uniform_index(14));
        SegMask label(h, w);
        double density = trial % 10 == 0 ? 0.0 : rng.uniform();
        for (auto& v : label.data()) v = rng.uniform() < density ? 1 : 0;
        Tensor pred(3, h, w);
        for (double& v : pred.v) v = rng.uniform();
        if (trial % 7 == 0)
            for (double& v : pred.v) v = 0.0;
        if (trial % 13 == 0) // disjoint construction
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    label.at(y, x, 0) = x == 0;
                    pred.at(0, y, x) = x == w - 1 ? 1.0 : 0.0;
                }
        IoUReport rep = iou(pred, label);
        for (int c = 0; c < 3; ++c)
            pass = pass && rep.per_class[c] == oracle::iou_naive_class(pred, label, c, 0.5);
    }
    double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(9, "IoU oracle equivalence", pass, secs, 1.0,
           pass ? "exact match on 100 random pairs incl. empty and disjoint" : "mismatch");
}

} // namespace

int main() {
    std::printf("acceptance suite\n================\n");
    criterion_spectral();
    criterion_ampaug_identity();
    criterion_mmd();
    criterion_model_gradients();
    criterion_color();

    TrainingRuns runs = run_training_grid();
    // the grid cost is attributed to the criteria that consume it: criterion 6
    // needs the three full runs plus the repeat (4/7), criterion 7 all seven
    // runs minus the repeat (6/7), criterion 8 reuses checkpoints only
    criterion_meta_loop(runs, runs.seconds * 4.0 / 7.0);
    criterion_table1(runs, runs.seconds * 6.0 / 7.0);
    criterion_alignment(runs, 0.0);

    criterion_iou();

    int failures = 0;
    for (const Criterion& c : g_results)
        if (!c.pass) ++failures;
    std::printf("================\n%zu criteria, %d failed\n", g_results.size(), failures);
    return failures == 0 ? 0 : 1;
}
