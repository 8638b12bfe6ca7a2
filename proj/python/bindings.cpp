// SPDX-License-Identifier: Apache-2.0
#include "msplat/autodiff.hpp"
#include "msplat/diagnostics.hpp"
#include "msplat/errors.hpp"
#include "msplat/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace msplat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageBuffer to_image(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an array of shape (H, W, 3)");
    ImageBuffer img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(img.values().data(), a.data(), img.size() * sizeof(double));
    return img;
}

Array to_array(const ImageBuffer& img) {
    Array a({static_cast<py::ssize_t>(img.height()), static_cast<py::ssize_t>(img.width()), py::ssize_t{3}});
    std::memcpy(a.mutable_data(), img.values().data(), img.size() * sizeof(double));
    return a;
}

Array grid_array(const Grid& g) {
    Array a({static_cast<py::ssize_t>(g.height), static_cast<py::ssize_t>(g.width)});
    std::memcpy(a.mutable_data(), g.values.data(), g.values.size() * sizeof(double));
    return a;
}

Array params_array(const std::vector<double>& flat) {
    const auto n = static_cast<py::ssize_t>(flat.size() / kParamsPerGaussian);
    Array a({n, static_cast<py::ssize_t>(kParamsPerGaussian)});
    std::memcpy(a.mutable_data(), flat.data(), flat.size() * sizeof(double));
    return a;
}

Scene scene_from_params(const Array& p, const Vec3& background) {
    if (p.ndim() != 2 || p.shape(1) != static_cast<py::ssize_t>(kParamsPerGaussian))
        throw ShapeError("expected parameters of shape (N, 14)");
    Scene topology;
    topology.background = background;
    topology.gaussians.resize(static_cast<std::size_t>(p.shape(0)));
    ParamVector pv;
    pv.values.assign(p.data(), p.data() + p.size());
    Scene s = unpack_params(pv, topology);
    s.validate();
    return s;
}

RenderConfig render_config(const std::string& compositing, bool deterministic, int threads) {
    RenderConfig cfg;
    cfg.compositing = parse_compositing(compositing);
    cfg.deterministic = deterministic;
    cfg.threads = threads;
    cfg.validate();
    return cfg;
}

py::dict loss_dict(const LossBreakdown& b) {
    py::dict d;
    d["weighted_l1"] = b.weighted_l1;
    d["dssim"] = b.dssim;
    d["grad"] = b.grad;
    d["composite"] = b.composite;
    return d;
}

LossOptions loss_options(double l1, double l2, double l3, double alpha_floor, bool constraints) {
    LossOptions o;
    o.weights = {l1, l2, l3};
    o.alpha_floor = alpha_floor;
    o.adaptive_weights = o.gradient_difference = constraints;
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-sample Gaussian splatting core";

    // Translators run newest first, so the base class goes in before its subclasses.
    auto& base_error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base_error.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base_error.ptr());
    py::register_exception<TopologyError>(m, "TopologyError", base_error.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base_error.ptr());
    py::register_exception<NumericError>(m, "NumericError", base_error.ptr());

    m.attr("PARAMS_PER_GAUSSIAN") = kParamsPerGaussian;

    py::class_<CameraModel>(m, "Camera")
        .def_static("looking_down_z", &CameraModel::looking_down_z, py::arg("width"), py::arg("height"),
                    py::arg("focal"))
        .def_static("synthetic", &synthetic_camera, py::arg("height"), py::arg("width"))
        .def_static("load", &load_camera, py::arg("path"))
        .def("save", [](const CameraModel& c, const std::filesystem::path& p) { save_camera(c, p); })
        .def_readwrite("fx", &CameraModel::fx)
        .def_readwrite("fy", &CameraModel::fy)
        .def_readwrite("cx", &CameraModel::cx)
        .def_readwrite("cy", &CameraModel::cy)
        .def_readwrite("width", &CameraModel::width)
        .def_readwrite("height", &CameraModel::height)
        .def_readwrite("near_clip", &CameraModel::near_clip)
        .def_property(
            "rotation", [](const CameraModel& c) { return Mat3(c.rotation); },
            [](CameraModel& c, const Mat3& r) { c.rotation = r; })
        .def_property(
            "translation", [](const CameraModel& c) { return Vec3(c.translation); },
            [](CameraModel& c, const Vec3& t) { c.translation = t; });

    py::class_<Scene>(m, "Scene")
        .def_static("from_params", &scene_from_params, py::arg("params"), py::arg("background") = Vec3::Zero(),
                    "Scene from an (N, 14) array: center, quaternion (w,x,y,z), log-scale, color logit, opacity logit")
        .def_static("load", &load_scene, py::arg("path"))
        .def_static("parse", &parse_scene, py::arg("text"))
        .def("save", [](const Scene& s, const std::filesystem::path& p) { save_scene(s, p); })
        .def("format", &format_scene)
        .def_property_readonly("params", [](const Scene& s) { return params_array(pack_params(s).values); })
        .def_property(
            "background", [](const Scene& s) { return Vec3(s.background); },
            [](Scene& s, const Vec3& b) { s.background = b; })
        .def("__len__", [](const Scene& s) { return s.gaussians.size(); })
        .def("hash", &scene_hash)
        .def(py::self == py::self);

    m.def(
        "render",
        [](const Scene& s, const CameraModel& cam, int samples, const std::string& pattern,
           const std::string& compositing, int threads) {
            return to_array(render(s, cam, render_config(compositing, true, threads), SampleSpec::named(pattern, samples)));
        },
        py::arg("scene"), py::arg("camera"), py::arg("samples") = 4, py::arg("pattern") = "rotated",
        py::arg("compositing") = "normalized", py::arg("threads") = 1);

    m.def(
        "render_single_sample",
        [](const Scene& s, const CameraModel& cam, const std::string& compositing) {
            return to_array(render_single_sample(s, cam, render_config(compositing, true, 1)));
        },
        py::arg("scene"), py::arg("camera"), py::arg("compositing") = "normalized");

    m.def(
        "composite_loss",
        [](const Array& pred, const Array& gt, double l1, double l2, double l3, double alpha_floor, bool constraints) {
            return loss_dict(composite_loss(to_image(pred), to_image(gt), loss_options(l1, l2, l3, alpha_floor, constraints)));
        },
        py::arg("pred"), py::arg("gt"), py::arg("lambda1") = 0.8, py::arg("lambda2") = 0.2, py::arg("lambda3") = 0.1,
        py::arg("alpha_floor") = 0.2, py::arg("constraints") = true);

    m.def(
        "weight_map",
        [](const Array& pred, const Array& gt, double alpha_floor) {
            return grid_array(weight_map(pixel_error(to_image(pred), to_image(gt)), alpha_floor, 1e-8).weights);
        },
        py::arg("pred"), py::arg("gt"), py::arg("alpha_floor") = 0.2);
    m.def("dssim", [](const Array& a, const Array& b) { return dssim(to_image(a), to_image(b)); });
    m.def("ssim", [](const Array& a, const Array& b) { return ssim_index(to_image(a), to_image(b)); });
    m.def("gdc_loss", [](const Array& a, const Array& b) { return gdc_loss(to_image(a), to_image(b)); });
    m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); });
    m.def("diff_map", [](const Array& a, const Array& b) { return grid_array(diff_map(to_image(a), to_image(b))); });

    m.def("haar_dwt", [](const Array& a) {
        const WaveletDecomposition d = haar_dwt(to_image(a));
        py::dict out;
        out["LL"] = to_array(d.ll);
        out["LH"] = to_array(d.lh);
        out["HL"] = to_array(d.hl);
        out["HH"] = to_array(d.hh);
        out["shape"] = py::make_tuple(d.height, d.width);
        out["padded"] = d.padded;
        return out;
    });
    m.def("haar_idwt", [](const py::dict& d) {
        WaveletDecomposition dec;
        dec.ll = to_image(d["LL"].cast<Array>());
        dec.lh = to_image(d["LH"].cast<Array>());
        dec.hl = to_image(d["HL"].cast<Array>());
        dec.hh = to_image(d["HH"].cast<Array>());
        if (d.contains("shape")) {
            const auto shape = d["shape"].cast<std::pair<int, int>>();
            dec.height = shape.first;
            dec.width = shape.second;
        }
        return to_array(haar_idwt(dec));
    });

    m.def(
        "evaluate_with_gradient",
        [](const Scene& s, const CameraModel& cam, const Array& target, int samples, bool constraints) {
            const Evaluation ev = evaluate_with_gradient(s, cam, to_image(target), RenderConfig{},
                                                         SampleSpec::for_count(samples),
                                                         loss_options(0.8, 0.2, 0.1, 0.2, constraints));
            return py::make_tuple(to_array(ev.image), loss_dict(ev.loss), params_array(ev.grads.flatten()));
        },
        py::arg("scene"), py::arg("camera"), py::arg("target"), py::arg("samples") = 4,
        py::arg("constraints") = true, "Returns (image, losses, gradient array of shape (N, 14))");

    m.def(
        "grad_check",
        [](unsigned long long seed, int samples, const std::string& compositing, double tolerance) {
            const GradCheckFixture fx = default_gradcheck_fixture(seed);
            GradCheckOptions opts;
            opts.tolerance = tolerance;
            const GradCheckReport rep = grad_check(fx.scene, fx.camera, fx.target, render_config(compositing, true, 1),
                                                   SampleSpec::for_count(samples), LossOptions{}, opts);
            py::dict out;
            out["pass"] = rep.pass;
            out["table"] = rep.to_table();
            py::dict classes;
            for (const auto& c : rep.classes) classes[py::str(c.name)] = c.max_rel_error;
            out["max_rel_error"] = classes;
            return out;
        },
        py::arg("seed") = 7, py::arg("samples") = 4, py::arg("compositing") = "normalized",
        py::arg("tolerance") = 1e-4);

    m.def(
        "synthetic_target",
        [](const std::string& kind, int height, int width, std::uint64_t seed, int period) {
            TargetOptions o;
            o.period = period;
            SyntheticTarget t = make_synthetic_target(parse_target_kind(kind), height, width, seed, o);
            return py::make_tuple(to_array(t.image), t.scene ? py::cast(*t.scene) : py::none());
        },
        py::arg("kind"), py::arg("height") = 64, py::arg("width") = 64, py::arg("seed") = 7, py::arg("period") = 8);
    m.def("initialize_scene", &initialize_scene, py::arg("camera"), py::arg("count"), py::arg("seed") = 7,
          py::arg("background") = Vec3::Zero());
    m.def(
        "sharp_scene",
        [](const std::string& kind, const CameraModel& cam) { return make_sharp_scene(parse_target_kind(kind), cam); },
        py::arg("kind"), py::arg("camera"));
    m.def("benchmark_ids", &benchmark_ids);

    m.def(
        "train",
        [](const Scene& initial, const CameraModel& cam, const Array& target, int iterations, const std::string& arm,
           std::uint64_t seed, int log_interval) {
            TrainConfig cfg;
            cfg.iterations = iterations;
            cfg.arm = parse_arm(arm);
            cfg.seed = seed;
            cfg.log_interval = log_interval;
            const std::vector<View> views{{cam, to_image(target)}};
            TrainResult res;
            {
                py::gil_scoped_release release;
                res = train(initial, views, cfg);
            }
            py::dict out;
            out["best_scene"] = res.best_scene;
            out["final_scene"] = res.final_scene;
            out["best_psnr"] = res.best_psnr;
            out["best_iteration"] = res.best_iteration;
            out["log_csv"] = res.log.to_csv(false);
            return out;
        },
        py::arg("scene"), py::arg("camera"), py::arg("target"), py::arg("iterations") = 200, py::arg("arm") = "full",
        py::arg("seed") = 7, py::arg("log_interval") = 10);

    m.def(
        "run_ablation",
        [](const std::string& bench, int iterations, std::uint64_t seed, int size, int gaussians) {
            AblationSpec spec;
            spec.benchmark = bench;
            spec.height = spec.width = size;
            spec.gaussian_count = gaussians;
            spec.base.iterations = iterations;
            spec.base.seed = seed;
            AblationTable t;
            {
                py::gil_scoped_release release;
                t = run_ablation(spec);
            }
            py::dict psnrs;
            for (const auto& r : t.rows) psnrs[py::str(std::string(to_string(r.arm)))] = r.psnr;
            py::dict out;
            out["csv"] = t.to_csv();
            out["text"] = t.to_text();
            out["psnr"] = psnrs;
            return out;
        },
        py::arg("benchmark") = "checker_edge", py::arg("iterations") = 2000, py::arg("seed") = 7,
        py::arg("size") = 64, py::arg("gaussians") = 500);
}
