#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gvckit/app.hpp"
#include "gvckit/decomp.hpp"
#include "gvckit/error.hpp"
#include "gvckit/event_study.hpp"
#include "gvckit/mrio.hpp"
#include "gvckit/trade.hpp"

namespace py = pybind11;
using namespace gvckit;

namespace {

py::dict groups_dict(const DecompGroups& d) {
    py::dict out;
    out["exporter"] = d.exporter;
    out["importer"] = d.importer;
    out["sectors"] = d.sectors;
    out["E"] = d.exports;
    for (std::size_t g = 0; g < kNumGroups; ++g) out[("G" + std::to_string(g + 1)).c_str()] = d.groups[g];
    return out;
}

int cli_main(std::vector<std::string> args) {
    args.insert(args.begin(), "gvckit");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return app::run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Value-added decomposition, GVC indices and trade event studies";
    m.attr("__version__") = app::kToolVersion;

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<DegenerateFit>(m, "DegenerateFit", PyExc_ArithmeticError);
    py::register_exception<app::ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<MrioTable>(m, "MrioTable")
        .def(py::init<>())
        .def_readwrite("year", &MrioTable::year)
        .def_readwrite("countries", &MrioTable::countries)
        .def_readwrite("sectors", &MrioTable::sectors)
        .def_readwrite("intermediate", &MrioTable::intermediate)
        .def_readwrite("final_demand", &MrioTable::final_demand)
        .def_readwrite("value_added", &MrioTable::value_added)
        .def_readwrite("output", &MrioTable::output)
        .def("__eq__", [](const MrioTable& a, const MrioTable& b) { return a == b; });

    py::class_<Finding>(m, "Finding")
        .def_property_readonly("violation", [](const Finding& f) { return f.severity == Severity::Violation; })
        .def_readonly("check", &Finding::check)
        .def_readonly("row", &Finding::row)
        .def_readonly("column", &Finding::column)
        .def_readonly("magnitude", &Finding::magnitude)
        .def_readonly("message", &Finding::message);

    py::class_<ValidationReport>(m, "ValidationReport")
        .def_readonly("findings", &ValidationReport::findings)
        .def("passed", &ValidationReport::passed);

    py::class_<CoefMatrices>(m, "CoefMatrices")
        .def_readonly("A", &CoefMatrices::input_coef)
        .def_readonly("V", &CoefMatrices::va_coef)
        .def_readonly("B", &CoefMatrices::leontief)
        .def_readonly("local", &CoefMatrices::local)
        .def_readonly("origin_content", &CoefMatrices::origin_content)
        .def_readonly("condition_estimate", &CoefMatrices::condition_estimate)
        .def_readonly("leontief_residual", &CoefMatrices::leontief_residual)
        .def_readonly("refined", &CoefMatrices::refined);

    py::class_<GvcIndices>(m, "GvcIndices")
        .def_readonly("forward_share", &GvcIndices::forward_share)
        .def_readonly("backward_share", &GvcIndices::backward_share)
        .def_readonly("participation", &GvcIndices::participation)
        .def_readonly("position", &GvcIndices::position)
        .def_readonly("defined", &GvcIndices::defined);

    m.def("load_mrio", [](const std::filesystem::path& p) { return load_mrio(p); }, py::arg("path"));
    m.def("write_mrio", &write_mrio, py::arg("table"), py::arg("path"));
    m.def("validate_mrio", &validate_mrio, py::arg("table"));
    m.def("coefficients", &coefficients, py::arg("table"));
    m.def(
        "synth_mrio",
        [](std::size_t countries, std::size_t sectors, std::uint64_t seed, double density, int year,
           double foreign_scale) {
            SynthMrioSpec s;
            s.countries = countries;
            s.sectors = sectors;
            s.seed = seed;
            s.density = density;
            s.year = year;
            s.foreign_scale = foreign_scale;
            return synth_mrio(s);
        },
        py::arg("countries") = 3, py::arg("sectors") = 2, py::arg("seed") = 1, py::arg("density") = 0.6,
        py::arg("year") = 2020, py::arg("foreign_scale") = 1.0);

    m.def(
        "decompose",
        [](const MrioTable& t, const CoefMatrices& c, const std::string& exporter, const std::string& importer) {
            return groups_dict(decompose(t, c, exporter, importer));
        },
        py::arg("table"), py::arg("coef"), py::arg("exporter"), py::arg("importer"));
    m.def(
        "indices",
        [](const MrioTable& t, const CoefMatrices& c, const std::string& exporter, const std::string& importer,
           const std::vector<std::string>& sectors) {
            return indices(decompose(t, c, exporter, importer), sectors.empty() ? t.sectors : sectors);
        },
        py::arg("table"), py::arg("coef"), py::arg("exporter"), py::arg("importer"),
        py::arg("sectors") = std::vector<std::string>{}, "GVC indices over a sector subset (all sectors when empty).");

    py::class_<EffectEstimate>(m, "EffectEstimate")
        .def_readonly("partner", &EffectEstimate::partner)
        .def_readonly("sector", &EffectEstimate::sector)
        .def_readonly("gamma", &EffectEstimate::gamma)
        .def_readonly("se", &EffectEstimate::se)
        .def_readonly("t_stat", &EffectEstimate::t_stat)
        .def_readonly("p_value", &EffectEstimate::p_value)
        .def_readonly("significant", &EffectEstimate::significant)
        .def_readonly("estimable", &EffectEstimate::estimable)
        .def_readonly("note", &EffectEstimate::note);

    m.def(
        "estimate_ols",
        [](const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::string& se) {
            auto fit = estimate_ols(y, x, parse_se_mode(se));
            py::dict out;
            out["coef"] = fit.coef;
            out["se"] = fit.se;
            out["residuals"] = fit.residuals;
            out["dropped"] = fit.dropped;
            out["dof"] = fit.dof;
            out["warnings"] = fit.warnings;
            return out;
        },
        py::arg("y"), py::arg("x"), py::arg("se") = "robust");

    m.def(
        "synth_event_study",
        [](const std::vector<std::string>& partners, const std::vector<std::string>& sectors, std::uint64_t seed,
           const std::vector<std::tuple<std::string, std::string, std::string, double>>& effects, double noise_sd,
           const std::string& window, double alpha) {
            SynthPanelSpec spec;
            spec.partners = partners;
            spec.sectors = sectors;
            spec.seed = seed;
            spec.noise_sd = noise_sd;
            for (const auto& [p, s, start, mag] : effects) spec.effects.push_back({p, s, parse_month_label(start), mag});
            const auto synth = synth_panel(spec);
            auto records = apply_sector_map(synth.records, SectorMap::default_map());
            const auto panel = build_panel(records, synth.controls, spec.reporter, spec.flow);
            EventStudyOptions o;
            o.alpha = alpha;
            return scan_all(panel, builtin_window(window), o).cells;
        },
        py::arg("partners"), py::arg("sectors"), py::arg("seed"), py::arg("effects") = py::list(),
        py::arg("noise_sd") = 0.3, py::arg("window") = "A", py::arg("alpha") = 0.10,
        "Synthesises a panel with planted effects (partner, sector, 'YYYY-MM', pp) and scans every cell.");

    m.def("run_cli", &cli_main, py::arg("args"), "Runs a gvckit command; returns the exit code.");
}
