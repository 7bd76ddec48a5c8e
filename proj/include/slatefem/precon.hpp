#ifndef SLATEFEM_PRECON_HPP
#define SLATEFEM_PRECON_HPP

#include "slatefem/problem.hpp"
#include "slatefem/slate.hpp"

#include <map>
#include <string>
#include <vector>

namespace slatefem
{

/// Which fields of a multi-field system are eliminated locally and which
/// are kept in the globally coupled system.
struct FieldSplit
{
    std::vector< int > eliminate;
    std::vector< int > condensed;

    /// Condensed fields are the complement of `eliminate`.
    static FieldSplit make(int nfields, std::vector< int > eliminate);
};

/// Flat key/value solver options, e.g. condensed_field_ksp_type=cg.
struct SolverOptions
{
    KrylovMethod       inner_method  = KrylovMethod::cg;
    PcKind             inner_pc      = PcKind::jacobi;
    double             inner_rtol    = 1e-8;
    int                inner_maxiter = 5000;
    std::vector< int > eliminate{0, 1};

    /// Recognised keys: condensed_field_ksp_type, condensed_field_pc_type,
    /// condensed_field_ksp_rtol, condensed_field_ksp_max_it, pc_sc_eliminate_fields.
    static SolverOptions from_map(const std::map< std::string, std::string >& opts);
    KrylovConfig         inner_config() const;
};

/// Accumulated wall time per solver stage.
struct StageTimes
{
    double condensation = 0.; // building the condensed operator
    double forward      = 0.; // forward elimination of the right-hand side
    double trace_solve  = 0.;
    double backsub      = 0.;
};

/// Static condensation of a multi-field system whose eliminated fields are
/// discontinuous. apply() is the exact inverse of the Schur-complement
/// factorization up to the inner Krylov tolerance.
class StaticCondensation
{
public:
    /// `bcs` constrain condensed-axis dofs; in the full system those rows
    /// are identity rows and their residual entries are the constrained values.
    StaticCondensation(forms::FormPtr a, FieldSplit split, slate::Bcs bcs, const SolverOptions& opts = {});

    const FieldSplit&  split() const { return split_; }
    const slate::Axis& full_axis() const { return full_; }
    const slate::Axis& condensed_axis() const { return cond_; }
    /// Global offsets of the condensed dofs within the full vector.
    int                full_index(int condensed_dof) const;

    const CsrMatrix& S() const { return s_; }
    const CsrMatrix& S_unconstrained() const { return s_raw_; }
    const slate::Bcs& bcs() const { return bcs_; }

    /// Expressions used by setup/apply (for inspection and testing).
    const slate::Expr&                 schur_expr() const { return s_expr_; }
    const slate::Expr&                 forward_expr() const { return e_expr_; }
    const std::vector< slate::Expr >&  backsub_exprs() const { return back_exprs_; }

    /// Condensed right-hand side E for a full residual r (lifted, constrained).
    Eigen::VectorXd forward(const Eigen::VectorXd& r);
    /// Recovers eliminated fields from r and condensed solution xc; returns the full vector.
    Eigen::VectorXd backsubstitute(const Eigen::VectorXd& r, const Eigen::VectorXd& xc);
    /// x = P^{-1} r with an inner Krylov solve on S.
    SolveReport apply(const Eigen::VectorXd& r, Eigen::VectorXd& x);

    LinearOperator as_preconditioner();
    const SolveReport& last_inner() const { return last_; }
    int                total_inner_iterations() const { return inner_total_; }
    const StageTimes&  times() const { return times_; }
    void               add_backsub_time(double seconds) { times_.backsub += seconds; }

private:
    void load_residual(const Eigen::VectorXd& r);

    forms::FormPtr                            a_;
    FieldSplit                                split_;
    slate::Bcs                                bcs_;
    SolverOptions                             opts_;
    slate::Axis                               full_, cond_, elim_;
    std::vector< std::shared_ptr< Function > > residual_; // per field
    std::vector< std::shared_ptr< Function > > solution_; // condensed fields, then intermediate eliminated
    slate::Expr                               s_expr_, e_expr_;
    std::vector< slate::Expr >                back_exprs_;
    CsrMatrix                                 s_raw_, s_;
    LinearOperator                            inner_pc_;
    SolveReport                               last_;
    int                                       inner_total_ = 0;
    StageTimes                                times_;
};

/// Correspondence between a conforming RT space and its broken twin.
struct BrokenTransfer
{
    SpacePtr           conforming;
    SpacePtr           broken;
    std::vector< int > conforming_of; // per broken dof
    std::vector< int > count;         // cells sharing each conforming dof

    /// R^(psi_i^d) = R(psi_i) / N_i
    Eigen::VectorXd transfer(const Eigen::VectorXd& r_conforming) const;
    /// Averages broken twins onto the conforming dof.
    Eigen::VectorXd project_div(const Eigen::VectorXd& x_broken) const;
    /// Copies conforming coefficients onto every twin.
    Eigen::VectorXd inject(const Eigen::VectorXd& x_conforming) const;
};

BrokenTransfer make_broken_transfer(const SpacePtr& conforming, const SpacePtr& broken);
Eigen::VectorXd transfer_residual(const BrokenTransfer& bt, const Eigen::VectorXd& r_conforming);
Function        project_div(const BrokenTransfer& bt, const Function& broken_u);

/// Hybridization of a conforming H(div) x L2 system: breaks the velocity
/// space, adds trace multipliers on interior and Neumann facets, condenses
/// onto the traces and projects the recovered velocity back.
class HybridizationPC
{
public:
    /// `a` is a two-field form on [RT(k), DG(k-1)]; `neumann_dofs` are the
    /// RT dofs on Neumann facets, which the conforming system treats as essential.
    HybridizationPC(forms::FormPtr a, std::vector< int > neumann_dofs, const SolverOptions& opts = {});

    const BrokenTransfer&      transfer() const { return bt_; }
    const SpacePtr&            trace_space() const { return trace_; }
    const forms::FormPtr&      hybrid_form() const { return hybrid_; }
    /// K: rank-2 jump coupling <gamma, [[w]]> between traces and broken velocity.
    const forms::FormPtr&      jump_form() const { return k_form_; }
    StaticCondensation&        condensation() { return *sc_; }
    const StaticCondensation&  condensation() const { return *sc_; }

    /// Hybridized residual [R^_U, R_P, R_Lambda] of a conforming residual.
    Eigen::VectorXd hybrid_residual(const Eigen::VectorXd& r) const;
    SolveReport     apply(const Eigen::VectorXd& r, Eigen::VectorXd& x);
    LinearOperator  as_preconditioner();

private:
    forms::FormPtr                        a_;
    std::vector< int >                    neumann_;
    BrokenTransfer                        bt_;
    SpacePtr                              trace_;
    forms::FormPtr                        hybrid_;
    forms::FormPtr                        k_form_;
    std::unique_ptr< StaticCondensation > sc_;
    // Neumann RT dof -> (trace dof, -n_global . n_outward)
    std::vector< std::tuple< int, int, double > > neumann_map_;
};

} // namespace slatefem

#endif
