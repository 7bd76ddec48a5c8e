#include "slatefem/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace slatefem
{

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration< double >(Clock::now() - t0).count(); }

constexpr double nan = std::numeric_limits< double >::quiet_NaN();

std::string num(double v)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

// keep free text inside one CSV cell
std::string cell_text(std::string s)
{
    for (char& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"')
            ch = ch == ',' ? ';' : ' ';
    return s;
}

slate::Bcs shifted(const ModelForms& mf)
{
    const int  off = mf.offsets()[mf.num_fields() - 1];
    slate::Bcs out;
    for (std::size_t i = 0; i < mf.bc_dofs.size(); ++i)
    {
        out.dofs.push_back(off + mf.bc_dofs[i]);
        out.values.push_back(mf.bc_values[i]);
    }
    return out;
}

double true_residual(const CsrMatrix& a, const Eigen::VectorXd& b, const Eigen::VectorXd& x)
{
    const double nb = b.norm();
    return (b - a * x).norm() / (nb > 0. ? nb : 1.);
}

Mesh study_mesh(const StudySpec& spec, int n)
{
    Mesh m = build_unit_square(n);
    return spec.neumann_left ? label_left_neumann(m) : m;
}

// restores the worker count on scope exit
struct ThreadScope
{
    int saved;
    explicit ThreadScope(bool serial) : saved(num_threads())
    {
        if (serial)
            set_num_threads(1);
    }
    ~ThreadScope() { set_num_threads(saved); }
};

std::vector< Function > split_fields(const ModelForms& mf, const Eigen::VectorXd& x)
{
    const auto              off = mf.offsets();
    std::vector< Function > out;
    static const char*      names[] = {"u", "p", "lambda"};
    for (int i = 0; i < mf.num_fields(); ++i)
    {
        Function f(mf.spaces[i], mf.num_fields() == 1 ? "p" : names[i]);
        f.coeffs = x.segment(off[i], off[i + 1] - off[i]);
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace

ModelSolution solve_model(const MeshPtr& mesh, Method method, int degree, const ProblemData& data,
                          const SolverOptions& opts)
{
    ModelSolution sol;
    sol.method = method;
    sol.degree = degree;
    sol.mesh   = mesh;

    auto             t0 = Clock::now();
    const ModelForms mf = model_problem_forms(mesh, method, degree, data);
    const auto       off = mf.offsets();
    sol.ndofs           = off.back();

    if (method == Method::cg_primal)
    {
        CsrMatrix       a = slate::assemble_matrix(slate::Tensor(mf.a));
        Eigen::VectorXd b = slate::assemble_vector(slate::Tensor(mf.L));
        slate::apply_bcs(a, b, {mf.bc_dofs, mf.bc_values});
        sol.times.condensation = seconds_since(t0);
        sol.condensed_dofs     = sol.ndofs;

        KrylovConfig cfg   = opts.inner_config();
        cfg.preconditioner = make_preconditioner(a, opts.inner_pc);
        Eigen::VectorXd x  = Eigen::VectorXd::Zero(b.size());
        t0                 = Clock::now();
        sol.report         = krylov_solve(a, b, x, cfg);
        sol.times.trace_solve = seconds_since(t0);
        sol.fields            = split_fields(mf, x);
        return sol;
    }

    if (opts.eliminate != std::vector< int >{0, 1})
        throw Error("solve_model condenses onto the trace field; pc_sc_eliminate_fields must be 0,1");
    StaticCondensation sc(mf.a, FieldSplit::make(3, {0, 1}), {mf.bc_dofs, mf.bc_values}, opts);
    sol.condensed_dofs = sc.condensed_axis().global_size();

    t0                = Clock::now();
    Eigen::VectorXd b = slate::assemble_vector(slate::Tensor(mf.L));
    for (std::size_t i = 0; i < mf.bc_dofs.size(); ++i)
        b[off[2] + mf.bc_dofs[i]] = mf.bc_values[i];
    const double t_rhs = seconds_since(t0);

    Eigen::VectorXd x;
    sol.report = sc.apply(b, x);
    sol.times  = sc.times();
    sol.times.forward += t_rhs;
    sol.fields = split_fields(mf, x);
    return sol;
}

void StudySpec::validate() const
{
    if (sizes.size() < 2)
        throw Error("study needs at least two mesh sizes to compute rates");
    for (std::size_t i = 0; i < sizes.size(); ++i)
    {
        if (sizes[i] < 1)
            throw Error("mesh sizes must be positive");
        if (i > 0 && sizes[i] <= sizes[i - 1])
            throw Error("mesh sizes must be strictly increasing");
    }
    switch (method)
    {
    case Method::mixed_hybrid:
        if (degree < 1 || degree > 3)
            throw Error("mixed-hybrid supports degrees 1..3, got " + std::to_string(degree));
        break;
    case Method::ldgh:
        if (degree < 0 || degree > 2)
            throw Error("ldgh supports degrees 0..2, got " + std::to_string(degree));
        if (!(tau > 0.))
            throw Error("ldgh needs tau > 0");
        break;
    case Method::cg_primal:
        if (degree < 1 || degree > 4)
            throw Error("cg-primal supports degrees 1..4, got " + std::to_string(degree));
        break;
    }
    const int kp = method == Method::mixed_hybrid ? degree - 1 : degree;
    if (method != Method::cg_primal && (multiplier_degree < 0 || multiplier_degree > kp))
        throw Error("multiplier degree must lie in [0, " + std::to_string(kp) + "]");
    manufactured(solution); // throws on an unknown id
}

double empirical_rate(double e0, double e1, double h0, double h1)
{
    if (!(e0 > 0.) || !(e1 > 0.) || !std::isfinite(e0) || !std::isfinite(e1))
        return nan;
    return std::log(e0 / e1) / std::log(h0 / h1);
}

std::vector< ConvergenceRow > run_convergence(const StudySpec& spec)
{
    spec.validate();
    ThreadScope                   threads(spec.serial);
    const ManufacturedProblem     mp   = manufactured(spec.solution);
    const ProblemData             data = mp.data(spec.tau);
    std::vector< ConvergenceRow > rows;

    for (int n : spec.sizes)
    {
        ConvergenceRow row;
        row.n        = n;
        row.h        = 1. / n;
        row.err_p = row.err_u = row.err_pstar = row.err_ustar = row.err_div_ustar = nan;
        const auto t0 = Clock::now();
        try
        {
            const auto          mesh = std::make_shared< const Mesh >(study_mesh(spec, n));
            const ModelSolution sol  = solve_model(mesh, spec.method, spec.degree, data, spec.solver);
            row.ndofs            = sol.ndofs;
            row.condensed_dofs   = sol.condensed_dofs;
            row.iterations       = sol.report.iterations;
            row.converged        = sol.report.converged;
            row.residual         = sol.report.relative_residual;
            row.t_condensation   = sol.times.condensation;
            row.t_forward        = sol.times.forward;
            row.t_trace_solve    = sol.times.trace_solve;
            row.t_backsub        = sol.times.backsub;
            row.err_p            = l2_error(sol.p(), mp.p);
            if (spec.method != Method::cg_primal)
            {
                const Function& u = sol.fields[0];
                row.err_u         = l2_error(u, mp.u());
                const auto tp     = Clock::now();
                const Function ps = scalar_pp(u, sol.p(), data.kappa, {spec.multiplier_degree});
                row.err_pstar     = l2_error(ps, mp.p);
                if (spec.method == Method::ldgh)
                {
                    const Function us = flux_pp(u, sol.p(), sol.fields[2], spec.tau);
                    row.err_ustar     = l2_error(us, mp.u());
                    row.err_div_ustar = l2_error_div(us, mp.div_u());
                }
                row.t_postprocess = seconds_since(tp);
            }
        }
        catch (const std::exception& e)
        {
            row.error     = e.what();
            row.converged = false;
        }
        row.t_total = seconds_since(t0);
        rows.push_back(row);
    }

    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        auto& r = rows[i];
        if (i == 0)
        {
            r.rate_p = r.rate_u = r.rate_pstar = r.rate_ustar = r.rate_div_ustar = nan;
            continue;
        }
        const auto& q    = rows[i - 1];
        r.rate_p         = empirical_rate(q.err_p, r.err_p, q.h, r.h);
        r.rate_u         = empirical_rate(q.err_u, r.err_u, q.h, r.h);
        r.rate_pstar     = empirical_rate(q.err_pstar, r.err_pstar, q.h, r.h);
        r.rate_ustar     = empirical_rate(q.err_ustar, r.err_ustar, q.h, r.h);
        r.rate_div_ustar = empirical_rate(q.err_div_ustar, r.err_div_ustar, q.h, r.h);
    }
    return rows;
}

void write_convergence_csv(const StudySpec& spec, const std::vector< ConvergenceRow >& rows, std::ostream& out)
{
    out << "method,degree,tau,n,h,ndofs,condensed_dofs,err_p,rate_p,err_u,rate_u,err_pstar,rate_pstar,"
           "err_ustar,rate_ustar,err_div_ustar,rate_div_ustar,iterations,converged,residual,error\n";
    const double tau = spec.method == Method::ldgh ? spec.tau : nan;
    for (const auto& r : rows)
    {
        out << method_name(spec.method) << ',' << spec.degree << ',' << num(tau) << ',' << r.n << ',' << num(r.h)
            << ',' << r.ndofs << ',' << r.condensed_dofs << ',' << num(r.err_p) << ',' << num(r.rate_p) << ','
            << num(r.err_u) << ',' << num(r.rate_u) << ',' << num(r.err_pstar) << ',' << num(r.rate_pstar) << ','
            << num(r.err_ustar) << ',' << num(r.rate_ustar) << ',' << num(r.err_div_ustar) << ','
            << num(r.rate_div_ustar) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
            << num(r.residual) << ',' << cell_text(r.error) << '\n';
    }
}

void write_timings_csv(const std::vector< ConvergenceRow >& rows, std::ostream& out)
{
    out << "n,condensation,forward_elimination,trace_solve,back_substitution,post_processing,total\n";
    for (const auto& r : rows)
        out << r.n << ',' << num(r.t_condensation) << ',' << num(r.t_forward) << ',' << num(r.t_trace_solve) << ','
            << num(r.t_backsub) << ',' << num(r.t_postprocess) << ',' << num(r.t_total) << '\n';
}

std::vector< CompareRow > run_solver_compare(const StudySpec& spec)
{
    spec.validate();
    if (spec.method == Method::cg_primal)
        throw Error("compare needs a hybridized method (mixed-hybrid or ldgh)");
    ThreadScope               threads(spec.serial);
    const ManufacturedProblem mp   = manufactured(spec.solution);
    const ProblemData         data = mp.data(spec.tau);
    std::vector< CompareRow > rows;

    KrylovConfig outer;
    outer.method  = KrylovMethod::fgmres;
    outer.rtol    = spec.solver.inner_rtol;
    outer.maxiter = 200;

    for (int n : spec.sizes)
    {
        const auto mesh = std::make_shared< const Mesh >(study_mesh(spec, n));

        // direct reference; for mixed-hybrid this is the conforming mixed system
        CompareRow direct;
        direct.n    = n;
        direct.path = "direct";
        Eigen::VectorXd xd;
        std::vector< int > offsets;
        auto t0 = Clock::now();
        try
        {
            if (spec.method == Method::mixed_hybrid)
            {
                const MixedSystem ms = mixed_system(mesh, spec.degree, data);
                CsrMatrix         a  = slate::assemble_matrix(slate::Tensor(ms.a));
                Eigen::VectorXd   b  = slate::assemble_vector(slate::Tensor(ms.L));
                slate::constrain_rows(a, b, {ms.bc_dofs, ms.bc_values});
                xd              = sparse_direct_solve(a, b);
                direct.residual = true_residual(a, b, xd);
                offsets         = ms.offsets();
            }
            else
            {
                const ModelForms mf = model_problem_forms(mesh, spec.method, spec.degree, data);
                CsrMatrix        a  = slate::assemble_matrix(slate::Tensor(mf.a));
                Eigen::VectorXd  b  = slate::assemble_vector(slate::Tensor(mf.L));
                slate::constrain_rows(a, b, shifted(mf));
                xd              = sparse_direct_solve(a, b);
                direct.residual = true_residual(a, b, xd);
                offsets         = mf.offsets();
            }
            direct.converged = true;
        }
        catch (const std::exception& e)
        {
            direct.error = e.what();
        }
        direct.t_total = seconds_since(t0);
        rows.push_back(direct);

        // hybridization path
        CompareRow hyb;
        hyb.n    = n;
        hyb.path = "hybridization";
        t0 = Clock::now();
        try
        {
            Eigen::VectorXd x;
            if (spec.method == Method::mixed_hybrid)
            {
                const MixedSystem ms = mixed_system(mesh, spec.degree, data);
                CsrMatrix         a  = slate::assemble_matrix(slate::Tensor(ms.a));
                Eigen::VectorXd   b  = slate::assemble_vector(slate::Tensor(ms.L));
                slate::constrain_rows(a, b, {ms.bc_dofs, ms.bc_values});
                HybridizationPC hp(ms.a, ms.bc_dofs, spec.solver);
                KrylovConfig    cfg = outer;
                cfg.preconditioner  = hp.as_preconditioner();
                x                   = Eigen::VectorXd::Zero(b.size());
                const auto rep      = krylov_solve(a, b, x, cfg);
                hyb.outer_iterations = rep.iterations;
                hyb.residual         = rep.relative_residual;
                hyb.converged        = rep.converged;
                hyb.inner_iterations = hp.condensation().total_inner_iterations();
                const auto& st       = hp.condensation().times();
                hyb.t_condensation   = st.condensation;
                hyb.t_forward        = st.forward;
                hyb.t_trace_solve    = st.trace_solve;
                hyb.t_backsub        = st.backsub;
            }
            else
            {
                const ModelSolution sol = solve_model(mesh, spec.method, spec.degree, data, spec.solver);
                x.resize(sol.ndofs);
                int pos = 0;
                for (const auto& f : sol.fields)
                {
                    x.segment(pos, f.coeffs.size()) = f.coeffs;
                    pos += static_cast< int >(f.coeffs.size());
                }
                hyb.inner_iterations = sol.report.iterations;
                hyb.residual         = sol.report.relative_residual;
                hyb.converged        = sol.report.converged;
                hyb.t_condensation   = sol.times.condensation;
                hyb.t_forward        = sol.times.forward;
                hyb.t_trace_solve    = sol.times.trace_solve;
                hyb.t_backsub        = sol.times.backsub;
            }
            hyb.max_diff = xd.size() == x.size() ? (x - xd).cwiseAbs().maxCoeff() : nan;
        }
        catch (const std::exception& e)
        {
            hyb.error = e.what();
        }
        hyb.t_total = seconds_since(t0);
        rows.push_back(hyb);

        // FGMRES on the three-field system with static condensation as preconditioner
        CompareRow scpc;
        scpc.n    = n;
        scpc.path = "scpc";
        t0 = Clock::now();
        try
        {
            const ModelForms mf = model_problem_forms(mesh, spec.method, spec.degree, data);
            CsrMatrix        a  = slate::assemble_matrix(slate::Tensor(mf.a));
            Eigen::VectorXd  b  = slate::assemble_vector(slate::Tensor(mf.L));
            slate::constrain_rows(a, b, shifted(mf));
            StaticCondensation sc(mf.a, FieldSplit::make(3, {0, 1}), {mf.bc_dofs, mf.bc_values}, spec.solver);
            KrylovConfig       cfg = outer;
            cfg.preconditioner     = sc.as_preconditioner();
            Eigen::VectorXd x      = Eigen::VectorXd::Zero(b.size());
            const auto      rep    = krylov_solve(a, b, x, cfg);
            scpc.outer_iterations  = rep.iterations;
            scpc.residual          = rep.relative_residual;
            scpc.converged         = rep.converged;
            scpc.inner_iterations  = sc.total_inner_iterations();
            const auto& st         = sc.times();
            scpc.t_condensation    = st.condensation;
            scpc.t_forward         = st.forward;
            scpc.t_trace_solve     = st.trace_solve;
            scpc.t_backsub         = st.backsub;

            if (xd.size() == 0)
                scpc.max_diff = nan;
            else if (spec.method == Method::mixed_hybrid)
            {
                // compare after projecting the broken velocity
                const auto off = mf.offsets();
                Function   ub(mf.spaces[0]);
                ub.coeffs = x.segment(off[0], off[1] - off[0]);
                const MixedSystem ms = mixed_system(mesh, spec.degree, data);
                const Function    uc = project_div(make_broken_transfer(ms.spaces[0], mf.spaces[0]), ub);
                const int         nu = static_cast< int >(uc.coeffs.size());
                const double du = (uc.coeffs - xd.head(nu)).cwiseAbs().maxCoeff();
                const double dp =
                    (x.segment(off[1], off[2] - off[1]) - xd.segment(nu, off[2] - off[1])).cwiseAbs().maxCoeff();
                scpc.max_diff = std::max(du, dp);
            }
            else
                scpc.max_diff = (x - xd).cwiseAbs().maxCoeff();
        }
        catch (const std::exception& e)
        {
            scpc.error = e.what();
        }
        scpc.t_total = seconds_since(t0);
        rows.push_back(scpc);
    }
    return rows;
}

void write_compare_csv(const StudySpec& spec, const std::vector< CompareRow >& rows, std::ostream& out)
{
    out << "method,degree,n,path,outer_iterations,inner_iterations,residual,converged,max_diff,condensation,"
           "forward_elimination,trace_solve,back_substitution,total,error\n";
    for (const auto& r : rows)
        out << method_name(spec.method) << ',' << spec.degree << ',' << r.n << ',' << r.path << ','
            << r.outer_iterations << ',' << r.inner_iterations << ',' << num(r.residual) << ','
            << (r.converged ? 1 : 0) << ',' << num(r.max_diff) << ',' << num(r.t_condensation) << ','
            << num(r.t_forward) << ',' << num(r.t_trace_solve) << ',' << num(r.t_backsub) << ',' << num(r.t_total)
            << ',' << cell_text(r.error) << '\n';
}

void write_fields_vtk(const std::vector< Function >& functions, std::ostream& out)
{
    if (functions.empty())
        throw Error("export: no functions given");
    const Mesh& mesh = functions.front().space->mesh();
    for (const auto& f : functions)
    {
        if (!(f.space->mesh() == mesh))
            throw Error("export: functions live on different meshes");
        if (f.space->family().family == Family::Trace)
            throw Error("export: trace function '" + f.name + "' has no cell values");
    }

    const int  nc   = mesh.num_cells();
    const int  nv   = mesh.num_vertices();
    const auto rule = quadrature(QuadratureKind::cell, 8);
    const Vec2 corners[3] = {Vec2(0., 0.), Vec2(1., 0.), Vec2(0., 1.)};

    std::vector< std::vector< Vec2 > > means(functions.size(), std::vector< Vec2 >(nc, Vec2::Zero()));
    std::vector< std::vector< Vec2 > > points(functions.size(), std::vector< Vec2 >(nv, Vec2::Zero()));
    std::vector< int >                 valence(nv, 0);
    for (int c = 0; c < nc; ++c)
        for (int v : mesh.cell_vertices(c))
            ++valence[v];

    for (std::size_t i = 0; i < functions.size(); ++i)
        for (int c = 0; c < nc; ++c)
        {
            Vec2   acc  = Vec2::Zero();
            double wsum = 0.;
            for (int q = 0; q < rule.size(); ++q)
            {
                acc += rule.weights[q] * evaluate(functions[i], c, rule.points[q]);
                wsum += rule.weights[q];
            }
            means[i][c] = acc / wsum;
            for (int k = 0; k < 3; ++k)
            {
                const int v = mesh.cell_vertices(c)[k];
                points[i][v] += evaluate(functions[i], c, corners[k]) / valence[v];
            }
        }

    write_vtk(mesh, out);
    auto section = [&](const char* kind, int count, const std::vector< std::vector< Vec2 > >& vals) {
        out << kind << ' ' << count << '\n';
        for (std::size_t i = 0; i < functions.size(); ++i)
        {
            std::string name = functions[i].name.empty() ? "f" + std::to_string(i) : functions[i].name;
            for (char& ch : name)
                if (ch == ' ' || ch == '\t')
                    ch = '_';
            const bool vec = functions[i].space->element().value_size() == 2;
            if (vec)
                out << "VECTORS " << name << " double\n";
            else
                out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (const auto& v : vals[i])
                out << (vec ? num(v.x()) + ' ' + num(v.y()) + " 0" : num(v.x())) << '\n';
        }
    };
    section("CELL_DATA", nc, means);
    section("POINT_DATA", nv, points);
}

void export_fields(const std::vector< Function >& functions, const std::string& path)
{
    if (functions.empty())
        throw Error("export: no functions given");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("export: cannot open '" + path + "' for writing");
    write_fields_vtk(functions, out);
    out.flush();
    if (!out)
        throw Error("export: write to '" + path + "' failed");
}

} // namespace slatefem
