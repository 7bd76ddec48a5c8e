#ifndef SLATEFEM_STUDY_HPP
#define SLATEFEM_STUDY_HPP

#include "slatefem/postprocess.hpp"
#include "slatefem/precon.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace slatefem
{

/// One solve of the model problem on one mesh.
struct ModelSolution
{
    Method                  method = Method::mixed_hybrid;
    int                     degree = 1;
    MeshPtr                 mesh;
    std::vector< Function > fields; // [u, p, lambda] for hybrid methods, [p] for cg-primal
    SolveReport             report;
    StageTimes              times;
    int                     ndofs          = 0; // full system size
    int                     condensed_dofs = 0; // size of the globally solved system

    const Function& p() const { return fields[fields.size() == 1 ? 0 : 1]; }
};

/// Static condensation onto the traces with an inner Krylov solve on S, or
/// a preconditioned CG solve for cg-primal.
ModelSolution solve_model(const MeshPtr& mesh, Method method, int degree, const ProblemData& data,
                          const SolverOptions& opts = {});

struct StudySpec
{
    Method              method   = Method::mixed_hybrid;
    int                 degree   = 1;
    double              tau      = 1.;
    std::vector< int >  sizes    = {4, 8, 16};
    std::string         solution = "sin-sin";
    bool                neumann_left      = false; // x = 0 Neumann, rest Dirichlet
    int                 multiplier_degree = 0;
    SolverOptions       solver;
    std::string         csv_path;
    std::string         vtk_path;
    bool                serial = false;

    /// Throws Error unless there are >= 2 strictly increasing sizes and a
    /// supported method/degree pair.
    void validate() const;
};

struct ConvergenceRow
{
    int    n = 0;
    double h = 0.;
    int    ndofs = 0, condensed_dofs = 0;
    double err_p = 0., err_u = 0., err_pstar = 0., err_ustar = 0., err_div_ustar = 0.;
    double rate_p = 0., rate_u = 0., rate_pstar = 0., rate_ustar = 0., rate_div_ustar = 0.;
    int    iterations = 0;
    bool   converged  = false;
    double residual   = 0.;
    std::string error; // non-empty when the solve threw
    // wall times, seconds
    double t_condensation = 0., t_forward = 0., t_trace_solve = 0., t_backsub = 0., t_postprocess = 0., t_total = 0.;
};

/// log(e0/e1) / log(h0/h1); NaN when either error is not positive.
double empirical_rate(double e0, double e1, double h0, double h1);

std::vector< ConvergenceRow > run_convergence(const StudySpec& spec);

/// Column order: method,degree,tau,n,h,ndofs,condensed_dofs,err_p,rate_p,
/// err_u,rate_u,err_pstar,rate_pstar,err_ustar,rate_ustar,err_div_ustar,
/// rate_div_ustar,iterations,converged,residual,error.
/// Columns that do not apply are written as nan.
void write_convergence_csv(const StudySpec& spec, const std::vector< ConvergenceRow >& rows, std::ostream& out);
/// n,condensation,forward_elimination,trace_solve,back_substitution,post_processing,total
void write_timings_csv(const std::vector< ConvergenceRow >& rows, std::ostream& out);

struct CompareRow
{
    int         n = 0;
    std::string path; // direct, hybridization, scpc
    int         outer_iterations = 0;
    int         inner_iterations = 0;
    double      residual         = 0.;
    bool        converged        = false;
    double      max_diff         = 0.; // max coefficient difference to the direct solve
    std::string error;
    double      t_condensation = 0., t_forward = 0., t_trace_solve = 0., t_backsub = 0., t_total = 0.;
};

/// Direct sparse solve against the hybridization path (mixed-hybrid:
/// FGMRES on the conforming mixed system preconditioned by HybridizationPC;
/// ldgh: condensed solve) and FGMRES on the three-field system with the
/// static-condensation preconditioner.
std::vector< CompareRow > run_solver_compare(const StudySpec& spec);
void                      write_compare_csv(const StudySpec& spec, const std::vector< CompareRow >& rows, std::ostream& out);

/// Legacy ASCII VTK: CELL_DATA holds cell means, POINT_DATA vertex averages
/// of the cell-wise values. Trace functions are rejected.
void write_fields_vtk(const std::vector< Function >& functions, std::ostream& out);
void export_fields(const std::vector< Function >& functions, const std::string& path);

} // namespace slatefem

#endif
