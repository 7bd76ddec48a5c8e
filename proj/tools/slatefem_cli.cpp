// slatefem command-line driver: convergence studies, solver comparisons and
// field export for the manufactured model problem.
#include "slatefem/study.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

using namespace slatefem;

namespace
{

struct CliArgs
{
    std::string                method = "mixed-hybrid";
    int                        degree = 1;
    double                     tau    = 1.;
    std::vector< int >         sizes{4, 8, 16};
    double                     rtol     = 1e-8;
    std::string                inner_pc = "jacobi";
    std::string                solution = "sin-sin";
    std::string                csv, vtk;
    bool                       serial       = false;
    bool                       neumann_left = false;
    int                        multiplier   = 0;
    std::vector< std::string > options; // key=value
    int                        threads = 0;
};

void add_common(CLI::App* app, CliArgs& a)
{
    app->add_option("--method", a.method, "mixed-hybrid | ldgh | cg-primal")->capture_default_str();
    app->add_option("--degree", a.degree, "polynomial degree k")->capture_default_str();
    app->add_option("--tau", a.tau, "LDG-H stabilization")->capture_default_str();
    app->add_option("--sizes", a.sizes, "cells per side, strictly increasing")->delimiter(',')->capture_default_str();
    app->add_option("--rtol", a.rtol, "relative tolerance of the Krylov solves")->capture_default_str();
    app->add_option("--inner-pc", a.inner_pc, "preconditioner of the condensed solve")
        ->check(CLI::IsMember({"none", "jacobi", "exact"}))
        ->capture_default_str();
    app->add_option("--solution", a.solution, "manufactured solution: sin-sin | exp-sin")->capture_default_str();
    app->add_option("--multiplier-degree", a.multiplier, "degree l of the post-processing multiplier");
    app->add_flag("--neumann-left", a.neumann_left, "Neumann data on x = 0");
    app->add_option("--option", a.options, "flat solver option key=value (repeatable)");
    app->add_option("--csv", a.csv, "CSV output path (stdout if omitted)");
    app->add_option("--vtk", a.vtk, "VTK output path");
    app->add_flag("--serial", a.serial, "single worker, bit-reproducible");
    app->add_option("--threads", a.threads, "worker count (0 = hardware)");
}

StudySpec to_spec(const CliArgs& a)
{
    StudySpec s;
    s.method            = parse_method(a.method);
    s.degree            = a.degree;
    s.tau               = a.tau;
    s.sizes             = a.sizes;
    s.solution          = a.solution;
    s.neumann_left      = a.neumann_left;
    s.multiplier_degree = a.multiplier;
    s.csv_path          = a.csv;
    s.vtk_path          = a.vtk;
    s.serial            = a.serial;

    std::map< std::string, std::string > opts{{"condensed_field_pc_type", a.inner_pc}};
    for (const auto& kv : a.options)
    {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw Error("--option expects key=value, got '" + kv + "'");
        opts[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!opts.count("condensed_field_ksp_rtol"))
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", a.rtol);
        opts["condensed_field_ksp_rtol"] = buf;
    }
    s.solver = SolverOptions::from_map(opts);
    return s;
}

template < class Writer >
void emit(const std::string& path, Writer&& write)
{
    if (path.empty())
    {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open '" + path + "' for writing");
    write(out);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"slatefem: hybridized mixed and LDG-H solvers for -div(kappa grad p) + c p = f"};
    app.set_config("--config", "", "INI/TOML file with the same option names");
    app.require_subcommand(1);

    CliArgs conv, cmp, exp;
    auto*   c_conv = app.add_subcommand("converge", "convergence study over a list of mesh sizes");
    auto*   c_cmp  = app.add_subcommand("compare", "direct vs hybridization vs static-condensation preconditioner");
    auto*   c_exp  = app.add_subcommand("export", "solve on the finest size and write a VTK file");
    add_common(c_conv, conv);
    add_common(c_cmp, cmp);
    add_common(c_exp, exp);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (c_conv->parsed())
        {
            if (conv.threads > 0)
                set_num_threads(conv.threads);
            const StudySpec spec = to_spec(conv);
            const auto      rows = run_convergence(spec);
            emit(spec.csv_path, [&](std::ostream& o) { write_convergence_csv(spec, rows, o); });
            if (!spec.csv_path.empty())
                emit(spec.csv_path + ".timings.csv", [&](std::ostream& o) { write_timings_csv(rows, o); });
            for (const auto& r : rows)
                if (!r.error.empty())
                    std::cerr << "n=" << r.n << ": " << r.error << '\n';
        }
        else if (c_cmp->parsed())
        {
            if (cmp.threads > 0)
                set_num_threads(cmp.threads);
            const StudySpec spec = to_spec(cmp);
            const auto      rows = run_solver_compare(spec);
            emit(spec.csv_path, [&](std::ostream& o) { write_compare_csv(spec, rows, o); });
        }
        else if (c_exp->parsed())
        {
            if (exp.threads > 0)
                set_num_threads(exp.threads);
            if (exp.serial)
                set_num_threads(1);
            StudySpec spec = to_spec(exp);
            if (spec.vtk_path.empty())
                throw Error("export needs --vtk PATH");
            if (spec.sizes.empty())
                throw Error("export needs a mesh size");
            const int  n    = spec.sizes.back();
            Mesh       m    = build_unit_square(n);
            const auto mesh = std::make_shared< const Mesh >(spec.neumann_left ? label_left_neumann(m) : m);
            const auto mp   = manufactured(spec.solution);
            const auto data = mp.data(spec.tau);
            const auto sol  = solve_model(mesh, spec.method, spec.degree, data, spec.solver);
            std::vector< Function > out;
            for (const auto& f : sol.fields)
                if (f.space->family().family != Family::Trace)
                    out.push_back(f);
            if (spec.method != Method::cg_primal)
                out.push_back(scalar_pp(sol.fields[0], sol.p(), data.kappa, {spec.multiplier_degree}));
            if (spec.method == Method::ldgh)
                out.push_back(flux_pp(sol.fields[0], sol.p(), sol.fields[2], spec.tau));
            export_fields(out, spec.vtk_path);
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
