#include "slatefem/study.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace slatefem;

namespace
{

StudySpec make_spec(const std::string& method, int degree, double tau, const std::vector< int >& sizes,
                    const std::string& solution, bool neumann_left, int multiplier_degree,
                    const std::map< std::string, std::string >& options, bool serial)
{
    StudySpec s;
    s.method            = parse_method(method);
    s.degree            = degree;
    s.tau               = tau;
    s.sizes             = sizes;
    s.solution          = solution;
    s.neumann_left      = neumann_left;
    s.multiplier_degree = multiplier_degree;
    s.solver            = SolverOptions::from_map(options);
    s.serial            = serial;
    return s;
}

py::dict row_dict(const ConvergenceRow& r)
{
    py::dict d;
    d["n"]              = r.n;
    d["h"]              = r.h;
    d["ndofs"]          = r.ndofs;
    d["condensed_dofs"] = r.condensed_dofs;
    d["err_p"]          = r.err_p;
    d["rate_p"]         = r.rate_p;
    d["err_u"]          = r.err_u;
    d["rate_u"]         = r.rate_u;
    d["err_pstar"]      = r.err_pstar;
    d["rate_pstar"]     = r.rate_pstar;
    d["err_ustar"]      = r.err_ustar;
    d["rate_ustar"]     = r.rate_ustar;
    d["err_div_ustar"]  = r.err_div_ustar;
    d["rate_div_ustar"] = r.rate_div_ustar;
    d["iterations"]     = r.iterations;
    d["converged"]      = r.converged;
    d["residual"]       = r.residual;
    d["error"]          = r.error;
    return d;
}

py::dict compare_dict(const CompareRow& r)
{
    py::dict d;
    d["n"]                = r.n;
    d["path"]             = r.path;
    d["outer_iterations"] = r.outer_iterations;
    d["inner_iterations"] = r.inner_iterations;
    d["residual"]         = r.residual;
    d["converged"]        = r.converged;
    d["max_diff"]         = r.max_diff;
    d["error"]            = r.error;
    return d;
}

} // namespace

PYBIND11_MODULE(_slatefem, m)
{
    m.doc() = "Hybridized mixed and LDG-H solvers with static condensation";

    py::register_exception< Error >(m, "SlatefemError", PyExc_ValueError);

    m.def(
        "mesh_counts",
        [](int n) {
            const Mesh mesh = build_unit_square(n);
            py::dict   d;
            d["vertices"] = mesh.num_vertices();
            d["cells"]    = mesh.num_cells();
            d["facets"]   = mesh.num_facets();
            return d;
        },
        py::arg("n"), "Vertex, cell and facet counts of the n x n unit-square mesh.");

    m.def(
        "run_convergence",
        [](const std::string& method, int degree, double tau, const std::vector< int >& sizes,
           const std::string& solution, bool neumann_left, int multiplier_degree,
           const std::map< std::string, std::string >& options, bool serial) {
            const auto spec = make_spec(method, degree, tau, sizes, solution, neumann_left, multiplier_degree, options, serial);
            std::vector< ConvergenceRow > rows;
            {
                py::gil_scoped_release release;
                rows = run_convergence(spec);
            }
            std::ostringstream csv;
            write_convergence_csv(spec, rows, csv);
            py::list out;
            for (const auto& r : rows)
                out.append(row_dict(r));
            return py::make_tuple(out, csv.str());
        },
        py::arg("method") = "mixed-hybrid", py::arg("degree") = 1, py::arg("tau") = 1., py::arg("sizes") = std::vector< int >{4, 8, 16},
        py::arg("solution") = "sin-sin", py::arg("neumann_left") = false, py::arg("multiplier_degree") = 0,
        py::arg("options") = std::map< std::string, std::string >{}, py::arg("serial") = true,
        "Convergence study; returns (rows, csv_text).");

    m.def(
        "run_compare",
        [](const std::string& method, int degree, double tau, const std::vector< int >& sizes,
           const std::string& solution, bool neumann_left, const std::map< std::string, std::string >& options) {
            const auto spec = make_spec(method, degree, tau, sizes, solution, neumann_left, 0, options, true);
            std::vector< CompareRow > rows;
            {
                py::gil_scoped_release release;
                rows = run_solver_compare(spec);
            }
            py::list out;
            for (const auto& r : rows)
                out.append(compare_dict(r));
            return out;
        },
        py::arg("method") = "mixed-hybrid", py::arg("degree") = 1, py::arg("tau") = 1., py::arg("sizes") = std::vector< int >{2, 4},
        py::arg("solution") = "sin-sin", py::arg("neumann_left") = false,
        py::arg("options") = std::map< std::string, std::string >{}, "Direct vs hybridization vs static condensation.");
}
