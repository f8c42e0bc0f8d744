// Python bindings for the ctseg core: volumes travel as 3D float32 numpy
// arrays plus a (dz, dy, dx) spacing tuple.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctseg/io.hpp"
#include "ctseg/loss.hpp"
#include "ctseg/metrics.hpp"
#include "ctseg/nn.hpp"
#include "ctseg/phantom.hpp"
#include "ctseg/preprocess.hpp"
#include "ctseg/report.hpp"
#include "ctseg/volume.hpp"

namespace py = pybind11;

namespace {

using Array3 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using Array2 = py::array_t<float, py::array::c_style | py::array::forcecast>;

ctseg::Volume to_volume(const Array3& arr, std::tuple<double, double, double> spacing,
                        const std::string& kind) {
    if (arr.ndim() != 3) throw py::value_error("volume array must be 3D (D, H, W)");
    ctseg::Volume v;
    v.dims = {static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
              static_cast<int>(arr.shape(2))};
    v.spacing = {std::get<0>(spacing), std::get<1>(spacing), std::get<2>(spacing)};
    v.kind = ctseg::volume_kind_from_string(kind);
    v.data.assign(arr.data(), arr.data() + arr.size());
    v.validate();
    return v;
}

py::array from_volume(const ctseg::Volume& v) {
    py::array_t<float> arr({v.dims.d, v.dims.h, v.dims.w});
    std::copy(v.data.begin(), v.data.end(), arr.mutable_data());
    return arr;
}

py::dict report_to_dict(const ctseg::CaseReport& r) {
    py::dict d;
    auto set = [&](const char* k, const std::optional<double>& v) {
        if (v)
            d[k] = *v;
        else
            d[k] = py::none();
    };
    d["case_id"] = r.case_id;
    set("wdsc", r.wdsc);
    set("dsc", r.dsc);
    set("iou", r.iou);
    set("sen", r.sen);
    set("ppv", r.ppv);
    set("hd", r.hd);
    set("assd", r.assd);
    set("so", r.so);
    set("sd", r.sd);
    d["theta_mm"] = r.theta_mm;
    d["threshold"] = r.threshold;
    d["w1"] = r.w1;
    d["w2"] = r.w2;
    d["attention"] = r.attention;
    return d;
}

ctseg::DistancePath path_from_flag(bool oracle) {
    return oracle ? ctseg::DistancePath::Exhaustive : ctseg::DistancePath::Auto;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Volumetric segmentation benchmark engine: surface metrics, weighted dice "
              "loss, CLAHE preprocessing, synthetic phantoms and a toy attention "
              "encoder-decoder forward pass.";

    py::class_<ctseg::Volume>(m, "Volume")
        .def(py::init([](const Array3& data, std::tuple<double, double, double> spacing,
                         const std::string& kind) { return to_volume(data, spacing, kind); }),
             py::arg("data"), py::arg("spacing") = std::make_tuple(1.0, 1.0, 1.0),
             py::arg("kind") = "intensity")
        .def_property_readonly("data", &from_volume)
        .def_property_readonly("spacing",
                               [](const ctseg::Volume& v) {
                                   return std::make_tuple(v.spacing.dz, v.spacing.dy, v.spacing.dx);
                               })
        .def_property_readonly("kind",
                               [](const ctseg::Volume& v) { return std::string(to_string(v.kind)); })
        .def_property_readonly("dims",
                               [](const ctseg::Volume& v) {
                                   return std::make_tuple(v.dims.d, v.dims.h, v.dims.w);
                               })
        .def("__repr__", [](const ctseg::Volume& v) {
            return "<Volume " + std::string(to_string(v.kind)) + " (" + std::to_string(v.dims.d) +
                   ", " + std::to_string(v.dims.h) + ", " + std::to_string(v.dims.w) + ")>";
        });

    m.def("threshold_prob", &ctseg::threshold_prob, py::arg("volume"), py::arg("threshold") = 0.5);

    m.def(
        "extract_surface",
        [](const ctseg::Volume& mask) {
            ctseg::SurfacePointSet s = ctseg::extract_surface(mask);
            py::array_t<double> pts({static_cast<py::ssize_t>(s.count()), py::ssize_t(3)});
            auto buf = pts.mutable_unchecked<2>();
            for (std::size_t i = 0; i < s.count(); ++i)
                for (int j = 0; j < 3; ++j) buf(static_cast<py::ssize_t>(i), j) = s.points[i][j];
            return pts;
        },
        py::arg("mask"), "Surface voxel centers in mm, one (z, y, x) row per point");

    m.def(
        "confusion_counts",
        [](const ctseg::Volume& pred, const ctseg::Volume& ref) {
            ctseg::ConfusionCounts c = ctseg::confusion_counts(pred, ref);
            return std::make_tuple(c.tp, c.fp, c.fn, c.tn);
        },
        py::arg("pred"), py::arg("ref"));

    // Surface metrics operate on label volumes; surfaces are extracted
    // internally so the accelerated grid path stays available.
    auto surfaces = [](const ctseg::Volume& a, const ctseg::Volume& b) {
        return std::make_pair(ctseg::extract_surface(a), ctseg::extract_surface(b));
    };
    m.def(
        "hausdorff",
        [surfaces](const ctseg::Volume& ref, const ctseg::Volume& pred, bool oracle) {
            auto [sr, sp] = surfaces(ref, pred);
            return ctseg::hausdorff(sr, sp, path_from_flag(oracle));
        },
        py::arg("ref"), py::arg("pred"), py::arg("oracle") = false);
    m.def(
        "assd",
        [surfaces](const ctseg::Volume& ref, const ctseg::Volume& pred, bool oracle) {
            auto [sr, sp] = surfaces(ref, pred);
            return ctseg::assd(sr, sp, path_from_flag(oracle));
        },
        py::arg("ref"), py::arg("pred"), py::arg("oracle") = false);
    m.def(
        "surface_overlap",
        [surfaces](const ctseg::Volume& pred, const ctseg::Volume& ref, double theta_mm,
                   bool oracle) {
            auto [sp, sr] = surfaces(pred, ref);
            return ctseg::surface_overlap(sp, sr, theta_mm, path_from_flag(oracle));
        },
        py::arg("pred"), py::arg("ref"), py::arg("theta_mm") = 1.0, py::arg("oracle") = false);
    m.def(
        "surface_dice",
        [surfaces](const ctseg::Volume& ref, const ctseg::Volume& pred, double theta_mm,
                   bool oracle) {
            auto [sr, sp] = surfaces(ref, pred);
            return ctseg::surface_dice(sr, sp, theta_mm, path_from_flag(oracle));
        },
        py::arg("ref"), py::arg("pred"), py::arg("theta_mm") = 1.0, py::arg("oracle") = false);

    m.def(
        "evaluate_case",
        [](const ctseg::Volume& pred, const ctseg::Volume& ref, double threshold, double theta_mm,
           double w1, double w2, bool oracle, const std::string& case_id) {
            ctseg::EvalConfig cfg;
            cfg.threshold = threshold;
            cfg.theta_mm = theta_mm;
            cfg.w1 = w1;
            cfg.w2 = w2;
            cfg.path = path_from_flag(oracle);
            return report_to_dict(ctseg::evaluate_case(pred, ref, cfg, case_id));
        },
        py::arg("pred"), py::arg("ref"), py::arg("threshold") = 0.5, py::arg("theta_mm") = 1.0,
        py::arg("w1") = 0.1, py::arg("w2") = 0.9, py::arg("oracle") = false,
        py::arg("case_id") = "case");

    m.def(
        "weighted_dice_loss",
        [](const ctseg::Volume& pred, const ctseg::Volume& ref, double w1, double w2,
           double epsilon) {
            ctseg::LossValue v = ctseg::weighted_dice_loss(pred, ref, {w1, w2, epsilon});
            py::dict d;
            d["total"] = v.total;
            d["fg_dice"] = v.fg_dice;
            d["bg_dice"] = v.bg_dice;
            return d;
        },
        py::arg("pred"), py::arg("ref"), py::arg("w1") = 0.1, py::arg("w2") = 0.9,
        py::arg("epsilon") = 1e-6);
    m.def(
        "loss_gradient",
        [](const ctseg::Volume& pred, const ctseg::Volume& ref, double w1, double w2,
           double epsilon) { return from_volume(ctseg::loss_gradient(pred, ref, {w1, w2, epsilon})); },
        py::arg("pred"), py::arg("ref"), py::arg("w1") = 0.1, py::arg("w2") = 0.9,
        py::arg("epsilon") = 1e-6);

    m.def(
        "clahe_slice",
        [](const Array2& slice, double clip_limit, std::pair<int, int> tiles, int bins) {
            if (slice.ndim() != 2) throw py::value_error("slice must be 2D");
            int h = static_cast<int>(slice.shape(0)), w = static_cast<int>(slice.shape(1));
            std::vector<float> in(slice.data(), slice.data() + slice.size());
            ctseg::ClaheParams params{clip_limit, tiles.first, tiles.second, bins};
            std::vector<float> eq = ctseg::clahe_slice(in, h, w, params);
            py::array_t<float> out({h, w});
            std::copy(eq.begin(), eq.end(), out.mutable_data());
            return out;
        },
        py::arg("slice"), py::arg("clip_limit") = 2.0, py::arg("tiles") = std::make_pair(8, 8),
        py::arg("bins") = 256);
    m.def("clahe_volume",
          [](const ctseg::Volume& v, double clip_limit, std::pair<int, int> tiles, int bins) {
              return ctseg::clahe_volume(v, {clip_limit, tiles.first, tiles.second, bins});
          },
          py::arg("volume"), py::arg("clip_limit") = 2.0, py::arg("tiles") = std::make_pair(8, 8),
          py::arg("bins") = 256);
    m.def("normalize_volume", &ctseg::normalize_volume, py::arg("volume"));
    m.def("resize_axial", &ctseg::resize_axial, py::arg("volume"), py::arg("out_h") = 256,
          py::arg("out_w") = 256);

    m.def(
        "generate_phantom",
        [](std::tuple<int, int, int> dims, std::tuple<double, double, double> spacing, int teeth,
           bool missing_teeth, bool appliance, double noise_sigma, std::uint64_t seed) {
            ctseg::PhantomSpec spec;
            spec.dims = {std::get<0>(dims), std::get<1>(dims), std::get<2>(dims)};
            spec.spacing = {std::get<0>(spacing), std::get<1>(spacing), std::get<2>(spacing)};
            spec.tooth_count = teeth;
            spec.missing_teeth = missing_teeth;
            spec.appliance = appliance;
            spec.noise_sigma = noise_sigma;
            spec.seed = seed;
            return ctseg::generate_phantom(spec);
        },
        py::arg("dims") = std::make_tuple(24, 48, 48),
        py::arg("spacing") = std::make_tuple(0.3, 0.25, 0.25), py::arg("teeth") = 6,
        py::arg("missing_teeth") = false, py::arg("appliance") = false,
        py::arg("noise_sigma") = 0.0, py::arg("seed") = 0,
        "Returns an (intensity, label) volume pair");
    m.def("perturb_prediction", &ctseg::perturb_prediction, py::arg("label"),
          py::arg("dilate_steps") = 0, py::arg("flip_rate") = 0.0, py::arg("seed") = 0);

    m.def(
        "model_forward",
        [](const Array3& input, std::tuple<double, double, double> spacing,
           const std::string& attention, int base_channels, bool ds_heads, std::uint64_t seed) {
            ctseg::Volume v = to_volume(input, spacing, "intensity");
            ctseg::ModelConfig cfg;
            cfg.attention = ctseg::attention_kind_from_string(attention);
            cfg.base_channels = base_channels;
            cfg.ds_heads = ds_heads;
            cfg.seed = seed;
            ctseg::ModelParams params = ctseg::init_model_params(cfg);
            ctseg::Tensor5 x(1, 1, v.dims.d, v.dims.h, v.dims.w);
            x.data = v.data;
            ctseg::ModelOutput out = ctseg::model_forward(x, cfg, params);
            auto to_array = [](const ctseg::Tensor5& t) {
                py::array_t<float> arr({t.d, t.h, t.w});
                std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
                return arr;
            };
            py::list aux;
            for (const auto& a : out.aux) aux.append(to_array(a));
            return py::make_tuple(to_array(out.main), aux);
        },
        py::arg("input"), py::arg("spacing") = std::make_tuple(1.0, 1.0, 1.0),
        py::arg("attention") = "sk", py::arg("base_channels") = 8, py::arg("ds_heads") = false,
        py::arg("seed") = 0,
        "Seeded forward pass; returns (main probability map, list of aux maps)");

    m.def(
        "read_volume",
        [](const std::string& path) { return ctseg::read_volume(path).volume; },
        py::arg("path"));
    m.def(
        "write_volume",
        [](const ctseg::Volume& v, const std::string& path) { ctseg::write_volume(v, path); },
        py::arg("volume"), py::arg("path"));
    m.def("read_nifti", &ctseg::read_nifti, py::arg("path"));

    m.def("attention_variants", []() {
        std::vector<std::string> names;
        for (ctseg::AttentionKind k : ctseg::all_attention_kinds()) names.push_back(to_string(k));
        return names;
    });
}
