#include "skewlab/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

namespace py = pybind11;
using namespace skewlab;

namespace {

py::dict run_kind(const std::string& kind, const std::map<std::string, std::string>& values) {
    ExperimentConfig cfg;
    for (const auto& [k, v] : values) cfg.set(k, v);
    RunResult res;
    {
        py::gil_scoped_release release;
        if (kind == "maps-eval") res = run_maps_eval(cfg);
        else if (kind == "check") res = run_check(cfg);
        else if (kind == "lyapunov") res = run_lyapunov(cfg);
        else if (kind == "curves") res = run_curves(cfg);
        else if (kind.rfind("preset:", 0) == 0) res = run_preset(kind.substr(7), cfg);
        else throw ConfigError("unknown run kind: " + kind);
    }
    attach_config(res, cfg);
    py::dict files;
    for (const auto& [name, text] : res.files) files[py::str(name)] = text;
    py::dict out;
    out["summary"] = res.summary.dump();
    out["files"] = files;
    out["passed"] = res.pass;
    out["failures"] = res.failures;
    out["config"] = cfg.values();
    return out;
}

// pybind11 holders must be non-const; the maps are immutable either way.
using Holder = std::shared_ptr<FiberMap>;
Holder hold(FiberMapPtr p) { return std::const_pointer_cast<FiberMap>(p); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Skew products over hyperbolic toral automorphisms";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<FiberMap, Holder>(m, "FiberMap")
        .def_property_readonly("name", &FiberMap::name)
        .def_property_readonly("dimension", &FiberMap::dimension)
        .def_property_readonly("block_sizes", &FiberMap::block_sizes)
        .def("eval", py::overload_cast<const Vec&>(&FiberMap::eval, py::const_), py::arg("y"))
        .def("jacobian", &FiberMap::jacobian, py::arg("y"))
        .def_property_readonly("has_inverse", &FiberMap::has_inverse)
        .def("inverse", py::overload_cast<const Vec&>(&FiberMap::inverse, py::const_), py::arg("y"));

    m.def("standard_map", [](double r) { return hold(standard_map(r)); }, py::arg("r"));
    m.def("coupled_p", [](double r, double tau) { return hold(coupled_p(r, tau)); }, py::arg("r"), py::arg("tau"));
    m.def("coupled_q", [](double r) { return hold(coupled_q(r)); }, py::arg("r"));
    m.def(
        "froeschle", [](double t1, double t2, double t3) { return hold(froeschle(t1, t2, t3)); }, py::arg("tau1"),
        py::arg("tau2"), py::arg("tau3"));
    m.def(
        "identity_fiber", [](int dim, std::vector<int> blocks) { return hold(identity_fiber(dim, std::move(blocks))); },
        py::arg("dim"), py::arg("block_sizes"));

    m.def(
        "critical_length", [](double r) { return standard_critical_region(r).total_length(); }, py::arg("r"),
        "Total length of the critical bands of the standard map with kick r.");
    m.def("sha256_hex", &sha256_hex, py::arg("data"));
    m.def("preset_names", &preset_names);
    m.def("run", &run_kind, py::arg("kind"), py::arg("config"),
          "Run maps-eval, check, lyapunov, curves or preset:<name> on a flat key/value config.");
}
