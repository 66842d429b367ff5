#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ucdl/csc_admm.hpp"
#include "ucdl/fft.hpp"
#include "ucdl/io.hpp"
#include "ucdl/metrics.hpp"
#include "ucdl/network.hpp"
#include "ucdl/training.hpp"

namespace py = pybind11;
using namespace ucdl;

namespace {

using ComplexArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Shape shape_of(const py::array& a) {
  return Shape(a.shape(), a.shape() + a.ndim());
}

ComplexImage to_image(const ComplexArray& a) {
  const auto* p = a.data();
  return ComplexImage(shape_of(a), std::vector<Complex>(p, p + a.size()));
}

template <class Domain>
ComplexArray to_array(const BasicTensor<Domain>& x) {
  ComplexArray out(std::vector<py::ssize_t>(x.shape().begin(), x.shape().end()));
  std::copy(x.data().begin(), x.data().end(), out.mutable_data());
  return out;
}

std::vector<ComplexImage> to_images(const std::vector<ComplexArray>& arrays) {
  std::vector<ComplexImage> out;
  out.reserve(arrays.size());
  for (const auto& a : arrays) out.push_back(to_image(a));
  return out;
}

py::list to_arrays(const std::vector<ComplexImage>& images) {
  py::list out;
  for (const auto& x : images) out.append(to_array(x));
  return out;
}

RealArray filters_array(const FilterBank& bank) {
  std::vector<py::ssize_t> dims{static_cast<py::ssize_t>(bank.count)};
  for (auto d : bank.kernel_shape) dims.push_back(static_cast<py::ssize_t>(d));
  RealArray out(dims);
  std::copy(bank.values.begin(), bank.values.end(), out.mutable_data());
  return out;
}

FilterBank filters_from(const RealArray& a) {
  if (a.ndim() < 2) throw Error(ErrorCode::ShapeMismatch, "filters must have shape (K, kernel dims...)");
  Shape dims = shape_of(a);
  const auto* p = a.data();
  return FilterBank(dims[0], Shape(dims.begin() + 1, dims.end()), std::vector<double>(p, p + a.size()));
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["psnr"] = r.psnr;
  d["nrmse"] = r.nrmse;
  d["ssim"] = r.ssim;
  d["roi"] = py::make_tuple(r.roi.size[0], r.roi.size[1]);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Unrolled convolutional dictionary learning reconstruction";

  py::register_exception<Error>(m, "UcdlError", PyExc_RuntimeError);

  // Tensors and transforms.
  m.def("read_tensor", [](const std::filesystem::path& p) { return to_array(io::read_tensor(p)); }, py::arg("path"));
  m.def("write_tensor", [](const std::filesystem::path& p, const ComplexArray& a) { io::write_tensor(p, to_image(a)); },
        py::arg("path"), py::arg("array"));
  m.def("fft", [](const ComplexArray& a) { return to_array(dft_forward(to_image(a))); }, py::arg("x"),
        "Unnormalized forward DFT over all axes.");
  m.def("ifft", [](const ComplexArray& a) {
        const auto x = to_image(a);
        return to_array(dft_inverse(SpectralTensor(x.shape(), std::vector<Complex>(x.data().begin(), x.data().end()))));
      },
      py::arg("X"), "Inverse DFT with the 1/N factor.");

  // Sparse coding.
  m.def("soft_threshold", &soft_threshold, py::arg("v"), py::arg("tau"));
  m.def("dictionary_synthesis",
        [](const RealArray& filters, const std::vector<ComplexArray>& maps) {
          return to_array(dictionary_synthesis(filters_from(filters), to_images(maps)));
        },
        py::arg("filters"), py::arg("maps"), "sum_k d_k * s_k with circular convolution.");
  m.def("sparse_code",
        [](const ComplexArray& x, const RealArray& filters, double lambda, double alpha, double beta, int iterations) {
          const FilterBank bank = filters_from(filters);
          const ComplexImage img = to_image(x);
          const AdmmConfig cfg{lambda, alpha, beta, 1};
          const DictionarySpectrum dict(bank, img.shape());
          CodeState st = CodeState::zeros(bank.count, img.shape());
          for (int i = 0; i < iterations; ++i) st = admm_step(img, st, dict, cfg);
          py::dict out;
          out["s"] = to_arrays(st.s);
          out["u"] = to_arrays(st.u);
          out["z"] = to_arrays(st.z);
          return out;
        },
        py::arg("x"), py::arg("filters"), py::arg("lam") = 1.0, py::arg("alpha") = 1.0, py::arg("beta") = 1.0,
        py::arg("iterations") = 1, "Run ADMM sweeps from a zero code state; returns s, u and z.");

  // Network.
  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def(py::init([](const std::string& mode) { return NetworkConfig::defaults_for(parse_mode(mode)); }),
           py::arg("mode") = "3d")
      .def_property(
          "mode", [](const NetworkConfig& c) { return to_string(c.mode); },
          [](NetworkConfig& c, const std::string& m) { c.mode = parse_mode(m); })
      .def_readwrite("T", &NetworkConfig::T)
      .def_readwrite("J", &NetworkConfig::J)
      .def_readwrite("n_cg", &NetworkConfig::n_cg)
      .def_readwrite("K", &NetworkConfig::K)
      .def_readwrite("kf", &NetworkConfig::kf)
      .def_readwrite("train_filters", &NetworkConfig::train_filters)
      .def("validate", &NetworkConfig::validate)
      .def("__repr__", [](const NetworkConfig& c) {
        nlohmann::json j = c;
        return "NetworkConfig(" + j.dump() + ")";
      });

  py::class_<NetworkParams>(m, "NetworkParams")
      .def_property(
          "filters", [](const NetworkParams& p) { return filters_array(p.filters); },
          [](NetworkParams& p, const RealArray& a) { p.filters = filters_from(a); })
      .def_readwrite("log_lambda", &NetworkParams::log_lambda)
      .def_readwrite("log_alpha", &NetworkParams::log_alpha)
      .def_readwrite("log_beta", &NetworkParams::log_beta)
      .def_property_readonly("lam", &NetworkParams::lambda)
      .def_property_readonly("alpha", &NetworkParams::alpha)
      .def_property_readonly("beta", &NetworkParams::beta)
      .def_property_readonly("parameter_count", &NetworkParams::parameter_count)
      .def("max_norm_defect", [](const NetworkParams& p) { return p.filters.max_norm_defect(); });

  m.def("init_network", &init_network, py::arg("config"), py::arg("seed") = 0);
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"), py::arg("config"));
  m.def("load_checkpoint",
        [](const std::filesystem::path& p) {
          Checkpoint ck = load_checkpoint(p);
          return py::make_tuple(ck.params, ck.config);
        },
        py::arg("path"), "Returns (params, config).");

  // Data.
  py::class_<TrainingPair>(m, "Sample")
      .def_property_readonly("target", [](const TrainingPair& s) { return to_array(s.target); })
      .def_property_readonly("shape", [](const TrainingPair& s) { return s.sample.image_shape(); })
      .def_property_readonly("coils", [](const TrainingPair& s) { return s.sample.coils.count(); })
      .def_property_readonly("mask", [](const TrainingPair& s) { return to_array(s.sample.mask.to_image()); })
      .def("zero_filled", [](const TrainingPair& s) { return to_array(s.sample.op().adjoint(s.sample.y)); },
           "A^H y");

  m.def("make_phantom",
        [](const Shape& shape, std::uint64_t seed) {
          PhantomSpec spec;
          spec.shape = shape;
          spec.seed = seed;
          return to_array(make_phantom(spec));
        },
        py::arg("shape"), py::arg("seed") = 0);
  m.def("synth_dataset",
        [](const Shape& shape, std::size_t n, std::size_t coils, const std::string& mask, double acceleration,
           double sigma, std::uint64_t seed) {
          DatasetSpec spec;
          spec.phantom.shape = shape;
          spec.phantom.seed = seed;
          spec.coils = coils;
          spec.mask_family = parse_mask_family(mask);
          spec.acceleration = acceleration;
          spec.sigma = sigma;
          return synth_dataset(spec, n);
        },
        py::arg("shape"), py::arg("n"), py::arg("coils") = 4, py::arg("mask") = "lines", py::arg("acceleration") = 4.0,
        py::arg("sigma") = kDefaultNoiseSigma, py::arg("seed") = 0);
  m.def("load_sample", &load_sample, py::arg("path"));
  m.def("save_sample", &save_sample, py::arg("path"), py::arg("sample"));

  m.def("reconstruct",
        [](const TrainingPair& s, const NetworkParams& params, const NetworkConfig& config) {
          ComplexImage x;
          {
            py::gil_scoped_release release;
            x = forward_reconstruct(s.sample, params, config);
          }
          return to_array(x);
        },
        py::arg("sample"), py::arg("params"), py::arg("config"), "Run the unrolled network on one sample.");

  m.def("train",
        [](const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
           const NetworkConfig& config, int epochs, double lr, std::uint64_t seed,
           std::optional<NetworkParams> initial) {
          TrainOptions opt;
          opt.epochs = epochs;
          opt.lr = lr;
          opt.seed = seed;
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = train(train_set, val_set, config, opt, std::move(initial));
          }
          py::list log;
          for (const auto& e : r.log) log.append(py::make_tuple(e.epoch, e.train_loss, e.val_loss));
          return py::make_tuple(r.params, log);
        },
        py::arg("train_set"), py::arg("val_set"), py::arg("config"), py::arg("epochs") = 16,
        py::arg("lr") = kDefaultLearningRate, py::arg("seed") = 0, py::arg("initial") = py::none(),
        "Returns (params, [(epoch, train_loss, val_loss), ...]).");

  // Metrics.
  m.def("evaluate",
        [](const ComplexArray& x, const ComplexArray& ref, std::size_t roi_h, std::size_t roi_w) {
          return report_dict(evaluate_metrics(to_image(x), to_image(ref), roi_h, roi_w));
        },
        py::arg("x"), py::arg("ref"), py::arg("roi_h") = 0, py::arg("roi_w") = 0,
        "PSNR, NRMSE and SSIM over a central ROI (half of each axis by default).");
}
