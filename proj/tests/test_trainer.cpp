// SPDX-License-Identifier: Apache-2.0
#include "msplat/diagnostics.hpp"
#include "msplat/errors.hpp"
#include "msplat/trainer.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

using namespace msplat;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("msplat_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

TrainConfig quick_config(Arm arm, int iterations) {
    TrainConfig cfg;
    cfg.arm = arm;
    cfg.iterations = iterations;
    cfg.log_interval = 2;
    return cfg;
}

Benchmark small_bench() { return make_benchmark("checker_edge", 24, 24, 3, 40); }

}  // namespace

TEST(Adam, FirstStepMovesEachParameterByItsLearningRate) {
    Scene s;
    s.gaussians.resize(2);
    ParamVector p = pack_params(s);
    const ParamVector before = p;
    std::vector<double> g(p.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = (k % 2 ? 1.0 : -1.0) * (0.1 + 0.01 * static_cast<double>(k));
    for (std::size_t gi = 0; gi < 2; ++gi)
        for (std::size_t c = 0; c < 4; ++c) g[ParamVector::index(gi, Field::rotation, c)] = 0.0;
    AdamConfig cfg;
    cfg.scene_extent = 2.5;
    AdamState st;
    adam_step(p, g, st, cfg);
    EXPECT_EQ(st.step, 1);
    for (std::size_t k = 0; k < p.size(); ++k) {
        const Field f = field_of_slot(k % kParamsPerGaussian);
        const double expect = g[k] == 0.0 ? 0.0 : -cfg.rate_for(f) * (g[k] > 0 ? 1.0 : -1.0);
        EXPECT_NEAR(p.values[k] - before.values[k], expect, 1e-15) << ParamVector::describe(k);
    }
    EXPECT_DOUBLE_EQ(cfg.rate_for(Field::center), 1.6e-4 * 2.5);
    EXPECT_DOUBLE_EQ(cfg.rate_for(Field::opacity), 5e-2);
}

TEST(Adam, MatchesScalarOracleOverManySteps) {
    Scene s;
    s.gaussians.resize(1);
    ParamVector p = pack_params(s);
    AdamConfig cfg;
    AdamState st;
    std::vector<oracle::ScalarAdam> ref;
    std::vector<double> x(p.values.begin(), p.values.end());
    for (std::size_t k = 0; k < p.size(); ++k) ref.push_back({cfg.rate_for(field_of_slot(k))});
    // Quadratic bowl toward a fixed point, rotation held fixed.
    auto grad_at = [](std::size_t k, double v) {
        return field_of_slot(k) == Field::rotation ? 0.0 : 2.0 * (v - 0.3 * static_cast<double>(k % 5));
    };
    for (int step = 0; step < 100; ++step) {
        std::vector<double> g(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) g[k] = grad_at(k, p.values[k]);
        adam_step(p, g, st, cfg);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = ref[k].step(x[k], grad_at(k, x[k]));
    }
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(p.values[k], x[k], 1e-10) << ParamVector::describe(k);
}

TEST(Adam, RenormalizesQuaternions) {
    Scene s;
    s.gaussians.resize(1);
    ParamVector p = pack_params(s);
    std::vector<double> g(p.size(), 0.0);
    g[ParamVector::index(0, Field::rotation, 1)] = -1.0;
    AdamState st;
    adam_step(p, g, st, AdamConfig{});
    const Quat q{p.values[3], p.values[4], p.values[5], p.values[6]};
    EXPECT_NEAR(q.norm(), 1.0, 1e-15);
    EXPECT_GT(q.x, 0.0);
}

TEST(Adam, RejectsNonFiniteGradientByName) {
    Scene s;
    s.gaussians.resize(3);
    ParamVector p = pack_params(s);
    std::vector<double> g(p.size(), 0.1);
    g[ParamVector::index(2, Field::log_scale, 1)] = std::nan("");
    AdamState st;
    try {
        adam_step(p, g, st, AdamConfig{});
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find(ParamVector::describe(ParamVector::index(2, Field::log_scale, 1))),
                  std::string::npos)
            << e.what();
    }
    g.pop_back();
    EXPECT_THROW(adam_step(p, g, st, AdamConfig{}), ShapeError);
}

TEST(Arms, FeatureTable) {
    EXPECT_EQ(features_of(Arm::baseline).samples, 1);
    EXPECT_FALSE(features_of(Arm::baseline).constraints);
    EXPECT_EQ(features_of(Arm::msaa_only).samples, 4);
    EXPECT_FALSE(features_of(Arm::msaa_only).constraints);
    EXPECT_EQ(features_of(Arm::constraints_only).samples, 1);
    EXPECT_TRUE(features_of(Arm::constraints_only).constraints);
    EXPECT_EQ(features_of(Arm::full).samples, 4);
    EXPECT_TRUE(features_of(Arm::full).constraints);
    for (Arm a : kAllArms) EXPECT_EQ(parse_arm(to_string(a)), a);
    EXPECT_THROW(parse_arm("everything"), ValidationError);
}

TEST(Arms, ConfigOverridesSamplesAndRampsLambda3) {
    TrainConfig cfg;
    cfg.arm = Arm::msaa_only;
    EXPECT_EQ(cfg.sample_spec().count(), 4u);
    cfg.samples = SampleSpec::two_sample();
    EXPECT_EQ(cfg.sample_spec().count(), 2u);
    cfg.arm = Arm::full;
    cfg.iterations = 100;
    cfg.lambda3_ramp = true;
    EXPECT_DOUBLE_EQ(cfg.loss_options(0).weights.lambda3, 0.0);
    EXPECT_DOUBLE_EQ(cfg.loss_options(25).weights.lambda3, 0.05);
    EXPECT_DOUBLE_EQ(cfg.loss_options(90).weights.lambda3, 0.1);
    cfg.arm = Arm::msaa_only;
    EXPECT_FALSE(cfg.loss_options(90).gradient_difference);
    EXPECT_FALSE(cfg.loss_options(90).adaptive_weights);
}

TEST(TrainConfigValidation, RejectsBadSettings) {
    TrainConfig cfg;
    cfg.iterations = -1;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.adam.lr.color = 0.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.alpha_floor = 1.5;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.lambdas.lambda2 = -0.1;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.log_interval = 0;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Synthetic, AlignedCheckerboardHasTwoColors) {
    TargetOptions o;
    o.period = 4;
    const SyntheticTarget t = make_synthetic_target(TargetKind::checkerboard, 32, 32, 1, o);
    std::set<std::tuple<double, double, double>> colors;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) colors.insert({t.image.at(i, j, 0), t.image.at(i, j, 1), t.image.at(i, j, 2)});
    EXPECT_EQ(colors.size(), 2u);
    // Two-pixel cells.
    EXPECT_EQ(t.image.at(0, 0, 0), t.image.at(1, 1, 0));
    EXPECT_NE(t.image.at(0, 0, 0), t.image.at(0, 2, 0));
    EXPECT_EQ(t.camera.width, 32);
    EXPECT_DOUBLE_EQ(t.camera.fx, 32.0);
}

TEST(Synthetic, TargetsAreReproducibleAndInRange) {
    for (TargetKind k : {TargetKind::checkerboard, TargetKind::thin_lines, TargetKind::edge_halfplane,
                         TargetKind::gaussian_blobs}) {
        const SyntheticTarget a = make_synthetic_target(k, 20, 28, 5), b = make_synthetic_target(k, 20, 28, 5);
        EXPECT_EQ(a.image, b.image) << to_string(k);
        EXPECT_EQ(a.image.height(), 20);
        EXPECT_EQ(a.image.width(), 28);
        for (double v : a.image.values()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_EQ(parse_target_kind(to_string(k)), k);
    }
    EXPECT_NE(make_synthetic_target(TargetKind::gaussian_blobs, 20, 20, 5).image,
              make_synthetic_target(TargetKind::gaussian_blobs, 20, 20, 6).image);
    EXPECT_TRUE(make_synthetic_target(TargetKind::gaussian_blobs, 20, 20, 5).scene.has_value());
    EXPECT_THROW(parse_target_kind("spiral"), ValidationError);
}

TEST(Synthetic, InitializedSceneSitsInsideTheFrustum) {
    const CameraModel cam = synthetic_camera(32, 48);
    const Scene s = initialize_scene(cam, 60, 9);
    ASSERT_EQ(s.gaussians.size(), 60u);
    for (const Gaussian3D& g : s.gaussians) {
        EXPECT_GE(g.center.z(), kSyntheticDepth - 0.5);
        EXPECT_LE(g.center.z(), kSyntheticDepth + 0.5);
        const Vec2 u = oracle::project(g.center, cam);
        EXPECT_GE(u.x(), 0.0);
        EXPECT_LE(u.x(), 48.0);
        EXPECT_GE(u.y(), 0.0);
        EXPECT_LE(u.y(), 32.0);
        EXPECT_NEAR(g.opacity(), 0.1, 1e-12);
        EXPECT_NEAR(g.color()[0], 0.5, 1e-12);
        EXPECT_EQ(g.log_scale, s.gaussians[0].log_scale);
    }
    EXPECT_TRUE(initialize_scene(cam, 60, 9) == s);
}

TEST(Synthetic, BenchmarksExist) {
    for (const std::string& id : benchmark_ids()) {
        const Benchmark b = make_benchmark(id, 24, 24, 1, 10);
        EXPECT_EQ(b.id, id);
        ASSERT_EQ(b.views.size(), 1u);
        EXPECT_EQ(b.initial.gaussians.size(), 10u);
    }
    EXPECT_THROW(make_benchmark("nope", 24, 24, 1, 10), ValidationError);
}

TEST(Train, ZeroIterationsOnlyEvaluates) {
    const Benchmark b = small_bench();
    const TrainResult r = train(b.initial, b.views, quick_config(Arm::full, 0));
    ASSERT_EQ(r.log.records.size(), 1u);
    EXPECT_EQ(r.log.records[0].iteration, 0);
    EXPECT_TRUE(r.final_scene == b.initial);
    EXPECT_TRUE(r.best_scene == b.initial);
    EXPECT_EQ(r.best_iteration, 0);
}

TEST(Train, FitsTheColorOfASingleGaussian) {
    const CameraModel cam = synthetic_camera(16, 16);
    const Vec3 want{0.3, 0.6, 0.45};
    ImageBuffer target(16, 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            for (int c = 0; c < 3; ++c) target.at(i, j, c) = want[c];
    Scene s;
    Gaussian3D g;
    g.center = {0.0, 0.0, kSyntheticDepth};
    g.log_scale = Vec3::Constant(std::log(8.0));
    g.opacity_logit = 2.0;
    s.gaussians.push_back(g);
    TrainConfig cfg = quick_config(Arm::baseline, 200);
    cfg.adam.lr.color = 0.02;
    const TrainResult r = train(s, std::vector<View>{{cam, target}}, cfg);
    const Vec3 got = r.final_scene.gaussians[0].color();
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(got[c], want[c], 1e-2) << c;
    EXPECT_GT(r.best_psnr, 40.0);
}

TEST(Train, ArmsEvaluateOnlyTheirOwnTerms) {
    const Benchmark b = small_bench();
    for (Arm arm : kAllArms) {
        loss_counters().reset();
        train(b.initial, b.views, quick_config(arm, 3));
        const bool constraints = features_of(arm).constraints;
        EXPECT_EQ(loss_counters().weight_map_calls > 0, constraints) << to_string(arm);
        EXPECT_EQ(loss_counters().gdc_calls > 0, constraints) << to_string(arm);
    }
}

TEST(Train, ReproducibleForFixedSeed) {
    const Benchmark b = small_bench();
    TrainConfig cfg = quick_config(Arm::full, 8);
    const TrainResult a = train(b.initial, b.views, cfg);
    const TrainResult c = train(b.initial, b.views, cfg);
    EXPECT_EQ(a.log.to_csv(false), c.log.to_csv(false));
    EXPECT_TRUE(a.final_scene == c.final_scene);
    cfg.render.threads = 3;
    EXPECT_TRUE(train(b.initial, b.views, cfg).final_scene == a.final_scene);
}

TEST(Train, BestSnapshotIsTheMaximumOverLogPoints) {
    const Benchmark b = small_bench();
    TrainConfig cfg = quick_config(Arm::msaa_only, 20);
    cfg.log_interval = 5;
    const TrainResult r = train(b.initial, b.views, cfg);
    ASSERT_EQ(r.log.records.size(), 5u);  // 0 5 10 15 20
    bool found = false;
    for (const TrainRecord& rec : r.log.records) {
        EXPECT_LE(rec.psnr, r.best_psnr);
        if (rec.iteration == r.best_iteration) {
            found = true;
            EXPECT_EQ(rec.psnr, r.best_psnr);
        }
    }
    EXPECT_TRUE(found);
    const ImageBuffer img = render(r.best_scene, b.views[0].camera, cfg.render, cfg.sample_spec());
    EXPECT_NEAR(psnr(img, b.views[0].target), r.best_psnr, 1e-12);
    EXPECT_EQ(r.log.to_csv(false).substr(0, r.log.to_csv(false).find('\n')),
              "iteration,weighted_l1,dssim,grad,composite,psnr,seconds");
}

TEST(Train, ExplodingStepRaisesDivergenceWithLastGoodScene) {
    const Benchmark b = small_bench();
    TrainConfig cfg = quick_config(Arm::full, 20);
    cfg.adam.lr.opacity = 1e308;
    try {
        train(b.initial, b.views, cfg);
        FAIL() << "expected divergence";
    } catch (const TrainingDiverged& e) {
        EXPECT_GT(e.iteration(), 0);
        EXPECT_NE(std::string(e.what()).find("opacity"), std::string::npos) << e.what();
        for (double v : pack_params(e.last_good()).values) EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Train, CheckpointsAreNamedByArmAndIteration) {
    const Benchmark b = small_bench();
    const fs::path dir = fresh_dir("ckpt");
    TrainConfig cfg = quick_config(Arm::constraints_only, 6);
    cfg.checkpoint_dir = dir;
    cfg.checkpoint_interval = 2;
    const TrainResult r = train(b.initial, b.views, cfg);
    for (const char* name : {"constraints_only_2.gsscene", "constraints_only_4.gsscene", "constraints_only_6.gsscene"})
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    const Scene last = load_scene(dir / "constraints_only_6.gsscene");
    ASSERT_EQ(last.gaussians.size(), r.final_scene.gaussians.size());
    for (std::size_t k = 0; k < last.gaussians.size(); ++k)
        EXPECT_NEAR((last.gaussians[k].center - r.final_scene.gaussians[k].center).norm(), 0.0, 1e-12);
    fs::remove_all(dir);
}

TEST(Train, RejectsMismatchedViews) {
    const Benchmark b = small_bench();
    std::vector<View> views = b.views;
    views[0].target = ImageBuffer(10, 10);
    EXPECT_THROW(train(b.initial, views, quick_config(Arm::full, 1)), ShapeError);
    EXPECT_THROW(train(Scene{}, b.views, quick_config(Arm::full, 1)), ValidationError);
}

TEST(Train, GeneratingSceneIsAFixedPoint) {
    const SyntheticTarget t = make_synthetic_target(TargetKind::gaussian_blobs, 32, 32, 4);
    TrainConfig cfg = quick_config(Arm::msaa_only, 0);
    const TrainResult r = train(*t.scene, std::vector<View>{{t.camera, t.image}}, cfg);
    EXPECT_EQ(r.best_psnr, kPsnrCap);
    EXPECT_LT(r.log.records[0].loss.composite, 1e-12);
}

TEST(Ablation, FourArmsShareTheInitialScene) {
    AblationSpec spec;
    spec.height = spec.width = 24;
    spec.gaussian_count = 30;
    spec.base.iterations = 4;
    spec.base.log_interval = 2;
    const AblationTable t = run_ablation(spec);
    ASSERT_EQ(t.rows.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(t.rows[k].arm, kAllArms[k]);
        EXPECT_EQ(t.rows[k].initial_hash, t.rows[0].initial_hash);
        EXPECT_TRUE(std::isfinite(t.rows[k].psnr));
    }
    const Benchmark b = make_benchmark(spec.benchmark, 24, 24, spec.base.seed, 30);
    EXPECT_EQ(t.rows[0].initial_hash, scene_hash(b.initial));
    const std::string csv = t.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "benchmark,arm,psnr,ssim,weighted_l1,dssim,grad,composite,best_iteration,scene0_hash");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_NE(t.to_text().find("constraints_only"), std::string::npos);
    EXPECT_EQ(t.row(Arm::full).arm, Arm::full);
}

TEST(SceneHash, SensitiveToEveryParameter) {
    const Benchmark b = small_bench();
    const std::uint64_t h = scene_hash(b.initial);
    EXPECT_EQ(scene_hash(b.initial), h);
    ParamVector p = pack_params(b.initial);
    for (std::size_t k : {std::size_t{0}, std::size_t{13}, p.size() - 1}) {
        ParamVector q = p;
        q.values[k] = std::nextafter(q.values[k], 10.0);
        Scene s = b.initial;
        // Bypass re-normalization by writing the scalar directly.
        const std::size_t g = k / kParamsPerGaussian, slot = k % kParamsPerGaussian;
        if (slot == 0) s.gaussians[g].center.x() = q.values[k];
        else s.gaussians[g].opacity_logit = q.values[k];
        EXPECT_NE(scene_hash(s), h) << k;
    }
    Scene s = b.initial;
    s.background[1] = 0.5;
    EXPECT_NE(scene_hash(s), h);
}
