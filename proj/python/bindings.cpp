#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparsect/classical.hpp"
#include "sparsect/data.hpp"
#include "sparsect/dgr.hpp"
#include "sparsect/objective.hpp"
#include "sparsect/projection.hpp"

namespace py = pybind11;
using namespace sparsect;

namespace {

using NdArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array2D to_array(const NdArray& a) {
    if (a.ndim() != 2) throw ConfigError("expected a 2-D array");
    const auto rows = std::size_t(a.shape(0)), cols = std::size_t(a.shape(1));
    return Array2D(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Image2D to_image(const NdArray& a) { return Image2D(to_array(a)); }
Sinogram to_sino(const NdArray& a) { return Sinogram(to_array(a)); }

NdArray to_numpy(const Array2D& a) {
    NdArray out({a.rows(), a.cols()});
    std::copy(a.values().begin(), a.values().end(), out.mutable_data());
    return out;
}

Roi to_roi(const std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>& t) {
    return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}

SignalPower parse_power(const std::string& s) {
    if (s == "mean") return SignalPower::kMean;
    if (s == "peak") return SignalPower::kPeak;
    throw ConfigError("power must be 'mean' or 'peak'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sparse-view CT: projector, classical and DGR reconstruction, metrics";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DegenerateRoiError>(m, "DegenerateRoiError", PyExc_ValueError);

    py::class_<Geometry>(m, "Geometry")
        .def_static("parallel", &Geometry::parallel, py::arg("image_size"), py::arg("num_angles"),
                    "Equally spaced angles over [0, pi).")
        .def_property_readonly("image_size", &Geometry::image_size)
        .def_property_readonly("num_angles", &Geometry::num_angles)
        .def_property_readonly("num_detectors", &Geometry::num_detectors)
        .def_property_readonly("angles", [](const Geometry& g) { return g.angles(); })
        .def("support", [](const Geometry& g) { return to_numpy(g.support_image()); });

    m.def("shepp_logan", [](std::size_t n) { return to_numpy(shepp_logan(n)); }, py::arg("n"));
    m.def(
        "random_ellipses",
        [](std::size_t n, std::uint64_t seed, std::size_t lo, std::size_t hi) {
            return to_numpy(random_ellipses(n, seed, {lo, hi}));
        },
        py::arg("n"), py::arg("seed"), py::arg("min_count") = CountRange{}.lo, py::arg("max_count") = CountRange{}.hi);
    m.def(
        "load_hu_slice",
        [](const std::string& path, double lo, double hi) {
            HuOptions o;
            o.window_lo = lo;
            o.window_hi = hi;
            return to_numpy(load_hu_slice(path, o));
        },
        py::arg("path"), py::arg("window_lo") = HuOptions{}.window_lo, py::arg("window_hi") = HuOptions{}.window_hi);

    m.def(
        "forward_project", [](const NdArray& x, const Geometry& g) { return to_numpy(forward_project(to_image(x), g)); },
        py::arg("image"), py::arg("geometry"));
    m.def(
        "back_project", [](const NdArray& y, const Geometry& g) { return to_numpy(back_project(to_sino(y), g)); },
        py::arg("sinogram"), py::arg("geometry"));
    m.def(
        "add_awgn",
        [](const NdArray& y, double snr_db, std::uint64_t seed, const std::string& power) {
            return to_numpy(add_awgn(to_sino(y), {snr_db, seed, parse_power(power)}));
        },
        py::arg("sinogram"), py::arg("snr_db"), py::arg("seed"), py::arg("power") = "mean");

    m.def(
        "fbp",
        [](const NdArray& y, const Geometry& g, const std::string& filter, bool clip) {
            FbpConfig c;
            if (filter == "hann")
                c.filter = FbpFilter::kHann;
            else if (filter != "ramp")
                throw ConfigError("filter must be 'ramp' or 'hann'");
            c.clip = clip;
            return to_numpy(fbp(to_sino(y), g, c));
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("filter") = "ramp", py::arg("clip") = true);
    m.def(
        "sart",
        [](const NdArray& y, const Geometry& g, std::size_t iterations, double relaxation) {
            SartConfig c;
            c.iterations = iterations;
            c.relaxation = relaxation;
            return to_numpy(sart(to_sino(y), g, c));
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("iterations") = SartConfig{}.iterations,
        py::arg("relaxation") = SartConfig{}.relaxation);
    m.def(
        "sart_tv",
        [](const NdArray& y, const Geometry& g, std::size_t iterations, double relaxation, double tv_weight) {
            SartTvConfig c;
            c.sart.iterations = iterations;
            c.sart.relaxation = relaxation;
            c.tv_weight = tv_weight;
            return to_numpy(sart_tv(to_sino(y), g, c));
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("iterations") = SartConfig{}.iterations,
        py::arg("relaxation") = SartConfig{}.relaxation, py::arg("tv_weight") = SartTvConfig{}.tv_weight);

    m.def(
        "psnr", [](const NdArray& x, const NdArray& ref) { return psnr(to_image(x), to_image(ref)); }, py::arg("x"),
        py::arg("ref"));
    m.def(
        "ssim", [](const NdArray& x, const NdArray& ref) { return ssim(to_image(x), to_image(ref)); }, py::arg("x"),
        py::arg("ref"));
    m.def(
        "cnr",
        [](const NdArray& x, const std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>& feature,
           const std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>& background) {
            return cnr(to_image(x), to_roi(feature), to_roi(background));
        },
        py::arg("image"), py::arg("feature"), py::arg("background"),
        "ROIs are (row0, col0, rows, cols).");

    m.def(
        "dgr_reconstruct",
        [](const NdArray& y, const Geometry& g, const NdArray& x0, std::tuple<double, double, double> weights,
           std::size_t iterations, double lr, std::uint64_t seed, const std::string& arch,
           std::optional<std::size_t> skip_channels, std::optional<std::size_t> input_channels,
           std::optional<NdArray> track, bool normalize_weights) {
            DGRConfig c;
            c.weights = {std::get<0>(weights), std::get<1>(weights), std::get<2>(weights)};
            c.normalize_weights = normalize_weights;
            c.iterations = iterations;
            c.adam.lr = lr;
            c.seed = seed;
            const auto base = c.net;
            c.net = nn::SkipNetConfig::preset(arch);
            c.net.skip_channels = skip_channels.value_or(base.skip_channels);
            c.net.input_channels = input_channels.value_or(base.input_channels);
            if (track) c.track_psnr_against = to_image(*track);
            const auto sino = to_sino(y);
            const auto start = to_image(x0);
            DGRResult r;
            {
                py::gil_scoped_release release;
                r = dgr_reconstruct(sino, g, start, c);
            }
            py::dict out;
            out["image"] = to_numpy(r.image);
            py::list history;
            for (const auto& rec : r.history.records) {
                py::dict d;
                d["loss_total"] = rec.loss_total;
                d["loss_meas"] = rec.loss_meas;
                d["loss_ssim"] = rec.loss_ssim;
                d["loss_tv"] = rec.loss_tv;
                d["psnr"] = rec.psnr ? py::object(py::float_(*rec.psnr)) : py::none();
                d["ssim"] = rec.ssim ? py::object(py::float_(*rec.ssim)) : py::none();
                history.append(d);
            }
            out["history"] = history;
            const auto best = r.history.best_psnr_iteration();
            out["best_psnr_iteration"] = best ? py::object(py::int_(*best)) : py::none();
            return out;
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("x0"), py::arg("weights") = std::make_tuple(0.9, 0.0, 0.1),
        py::arg("iterations") = DGRConfig{}.iterations, py::arg("lr") = nn::AdamSettings{}.lr, py::arg("seed") = 0,
        py::arg("arch") = "v1", py::arg("skip_channels") = py::none(), py::arg("input_channels") = py::none(),
        py::arg("track") = py::none(), py::arg("normalize_weights") = false,
        "Fits a SkipNet to the sinogram. Returns a dict with image, history and best_psnr_iteration.");
}
