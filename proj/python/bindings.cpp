// Python module: thin numpy-facing wrappers over the C++ core. Images cross
// the boundary as 2-D float64 arrays in [0, 1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fusecurr/agent.hpp"
#include "fusecurr/degrade.hpp"
#include "fusecurr/fusion.hpp"
#include "fusecurr/imgio.hpp"
#include "fusecurr/metrics.hpp"
#include "fusecurr/trainer.hpp"

namespace py = pybind11;
using namespace fusecurr;

namespace {

img::Image to_image(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2) throw DimensionError("expected a 2-D array");
    const int h = static_cast<int>(buf.shape[0]);
    const int w = static_cast<int>(buf.shape[1]);
    std::vector<double> data(static_cast<size_t>(h) * w);
    const auto* src = static_cast<const double*>(buf.ptr);
    const auto row = buf.strides[0] / static_cast<py::ssize_t>(sizeof(double));
    const auto col = buf.strides[1] / static_cast<py::ssize_t>(sizeof(double));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            data[static_cast<size_t>(i) * w + j] = src[i * row + j * col];
    return img::Image(h, w, std::move(data));
}

py::array_t<double> to_array(const img::Image& im) {
    py::array_t<double> arr({im.height, im.width});
    std::copy(im.data.begin(), im.data.end(), arr.mutable_data());
    return arr;
}

degrade::DegradationParams make_params(double blur, double compress, double brightness,
                                       double contrast, double noise) {
    degrade::DegradationParams p;
    p.blur = blur;
    p.compress = compress;
    p.brightness = brightness;
    p.contrast = contrast;
    p.noise = noise;
    return p;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "infrared/visible image fusion core";

    py::register_exception<Error>(m, "FusecurrError");

    // io
    m.def("load_pgm", [](const std::string& p) { return to_array(img::load_pgm(p)); },
          py::arg("path"));
    m.def("save_pgm",
          [](const std::string& p, const py::array_t<double>& a, int maxval) {
              img::save_pgm(p, to_image(a), maxval);
          },
          py::arg("path"), py::arg("image"), py::arg("maxval") = 255);

    // metrics
    m.def("avg_gradient", [](const py::array_t<double>& a) { return metrics::avg_gradient(to_image(a)); });
    m.def("spatial_frequency", [](const py::array_t<double>& a) { return metrics::spatial_frequency(to_image(a)); });
    m.def("edge_intensity", [](const py::array_t<double>& a) { return metrics::edge_intensity(to_image(a)); });
    m.def("entropy", [](const py::array_t<double>& a) { return metrics::entropy(to_image(a)); });
    m.def("std_dev", [](const py::array_t<double>& a) { return metrics::std_dev(to_image(a)); });
    m.def("vif",
          [](const py::array_t<double>& ref, const py::array_t<double>& dist) {
              return metrics::vif(to_image(ref), to_image(dist));
          },
          py::arg("reference"), py::arg("distorted"));
    m.def("viff_fusion",
          [](const py::array_t<double>& ir, const py::array_t<double>& vi,
             const py::array_t<double>& fused) {
              return metrics::viff_fusion(to_image(ir), to_image(vi), to_image(fused));
          },
          py::arg("ir"), py::arg("vi"), py::arg("fused"));
    m.def("iqa_star", [](const py::array_t<double>& a) { return metrics::iqa_star(to_image(a)); });

    // degradations
    m.def("gaussian_blur",
          [](const py::array_t<double>& a, double d) {
              return to_array(degrade::gaussian_blur(to_image(a), d));
          },
          py::arg("image"), py::arg("strength"));
    m.def("dct_compress",
          [](const py::array_t<double>& a, double d) {
              return to_array(degrade::dct_compress(to_image(a), d));
          },
          py::arg("image"), py::arg("strength"));
    m.def("color_jitter",
          [](const py::array_t<double>& a, double b, double c) {
              return to_array(degrade::color_jitter(to_image(a), b, c));
          },
          py::arg("image"), py::arg("brightness"), py::arg("contrast"));
    m.def("add_noise",
          [](const py::array_t<double>& a, double d, std::uint64_t seed) {
              return to_array(degrade::add_noise(to_image(a), d, seed));
          },
          py::arg("image"), py::arg("strength"), py::arg("seed"));
    m.def("degrade_image",
          [](const py::array_t<double>& a, double blur, double compress, double brightness,
             double contrast, double noise, std::uint64_t seed) {
              return to_array(degrade::degrade_image(
                  to_image(a), make_params(blur, compress, brightness, contrast, noise),
                  seed));
          },
          py::arg("image"), py::arg("blur") = 0.0, py::arg("compress") = 0.0,
          py::arg("brightness") = 0.5, py::arg("contrast") = 0.5, py::arg("noise") = 0.0,
          py::arg("seed") = 0);

    // fusion
    m.def("rule_fuse",
          [](const py::array_t<double>& ir, const py::array_t<double>& vi) {
              return to_array(fusion::rule_teacher_fuse(to_image(ir), to_image(vi)));
          },
          py::arg("ir"), py::arg("vi"));
    m.def("fuse",
          [](const std::string& ckpt, const py::array_t<double>& ir,
             const py::array_t<double>& vi) {
              const auto net = fusion::StudentNet::load(ckpt);
              return to_array(net.fuse(to_image(ir), to_image(vi)));
          },
          py::arg("checkpoint"), py::arg("ir"), py::arg("vi"));

    // training config + pipeline
    py::class_<train::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("dataset_dir", &train::TrainConfig::dataset_dir)
        .def_readwrite("teacher", &train::TrainConfig::teacher)
        .def_readwrite("student_lr", &train::TrainConfig::student_lr)
        .def_readwrite("batch_size", &train::TrainConfig::batch_size)
        .def_readwrite("agent_lr", &train::TrainConfig::agent_lr)
        .def_readwrite("pretrain_epochs", &train::TrainConfig::pretrain_epochs)
        .def_readwrite("train_epochs", &train::TrainConfig::train_epochs)
        .def_readwrite("p", &train::TrainConfig::p)
        .def_readwrite("steps_per_episode", &train::TrainConfig::steps_per_episode)
        .def_readwrite("crop", &train::TrainConfig::crop)
        .def_readwrite("seed", &train::TrainConfig::seed)
        .def_readwrite("baseline_enabled", &train::TrainConfig::baseline_enabled)
        .def_readwrite("log_path", &train::TrainConfig::log_path)
        .def_readwrite("out_dir", &train::TrainConfig::out_dir)
        .def("dump", &train::TrainConfig::dump);

    m.def("parse_config_file", &train::parse_config_file, py::arg("path"));
    m.def("make_synthetic_dataset", &train::make_synthetic_dataset, py::arg("out_dir"),
          py::arg("n_pairs"), py::arg("size"), py::arg("seed") = 0);
    m.def("pretrain",
          [](const train::TrainConfig& cfg) {
              const auto res = train::pretrain(cfg);
              return py::make_tuple(res.checkpoint_path, res.epoch_mean_loss);
          },
          py::arg("config"));
    m.def("train",
          [](const train::TrainConfig& cfg) {
              const auto res = train::train(cfg);
              return py::make_tuple(res.student_checkpoint, res.agent_checkpoint,
                                    res.log_path);
          },
          py::arg("config"));
    m.def("evaluate", &train::evaluate, py::arg("checkpoint"), py::arg("data_dir"),
          py::arg("out_dir"));
    m.def("write_metrics_csv", &train::write_metrics_csv, py::arg("data_dir"),
          py::arg("out_csv"));
}
