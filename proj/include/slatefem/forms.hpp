#ifndef SLATEFEM_FORMS_HPP
#define SLATEFEM_FORMS_HPP

#include "slatefem/fem.hpp"

#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace slatefem
{

/// Dense element tensor of rank <= 2. Vectors are stored as (n x 1), scalars
/// as (1 x 1). Block offsets partition each axis by field.
struct DenseTensor
{
    int                rank = 2;
    Eigen::MatrixXd    data;
    std::vector< int > row_offsets; // size nfields+1, empty for rank 0
    std::vector< int > col_offsets; // rank 2 only
};

namespace forms
{

/// Analytic scalar coefficient with a nominal polynomial degree used for
/// quadrature selection.
struct ScalarField
{
    ScalarFn fn;
    int      degree = 0;

    static ScalarField constant(double v)
    {
        return {[v](const Vec2&) { return v; }, 0};
    }
    ScalarField reciprocal() const
    {
        auto f = fn;
        return {[f](const Vec2& x) { return 1. / f(x); }, degree};
    }
};

struct VectorField
{
    VectorFn fn;
    int      degree = 0;
};

// ---------------------------------------------------------------------------
// Integrand expressions
// ---------------------------------------------------------------------------

enum class NodeKind
{
    argument,
    coefficient,
    scalar_field,
    vector_field,
    constant,
    normal,
    grad,
    div,
    jump,
    add,
    mul,
    dot,
    neg
};

struct ExprNode;
using Expr = std::shared_ptr< const ExprNode >;

struct ExprNode
{
    NodeKind                          kind = NodeKind::constant;
    std::vector< Expr >               children;
    int                               slot  = -1; // 0 test, 1 trial
    int                               field = -1;
    std::shared_ptr< const Function > function;
    ScalarField                       sfield;
    VectorField                       vfield;
    double                            value = 0.;
};

Expr test(int field = 0);
Expr trial(int field = 0);
Expr coefficient(std::shared_ptr< const Function > fn);
Expr field(ScalarField f);
Expr field(VectorField f);
Expr constant(double v);
/// Outward unit normal of the cell being assembled (facet terms only).
Expr normal();
Expr grad(const Expr& x);
Expr div(const Expr& x);
/// This cell's contribution to the normal jump: w . n_K. Facet terms only.
Expr jump(const Expr& w);
/// Pointwise product for scalars, dot product for vectors.
Expr inner(const Expr& a, const Expr& b);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b); // first factor must be scalar-valued
Expr operator*(double s, const Expr& a);

// ---------------------------------------------------------------------------
// Canonical (sum-of-products) form of an integrand
// ---------------------------------------------------------------------------

enum class OperandOp
{
    value,
    grad,
    div
};

/// One scalar component of an argument basis, e.g. the x-derivative of field 1.
struct Operand
{
    int       field = 0;
    OperandOp op    = OperandOp::value;
    int       comp  = 0;
    friend bool operator==(const Operand&, const Operand&) = default;
};

enum class FactorKind
{
    coefficient,
    scalar_field,
    vector_field,
    normal
};

/// Scalar, argument-free factor evaluated pointwise.
struct Factor
{
    FactorKind                        kind = FactorKind::normal;
    OperandOp                         op   = OperandOp::value;
    int                               comp = 0;
    std::shared_ptr< const Function > function;
    ScalarFn                          sfn;
    VectorFn                          vfn;
    int                               degree = 0;
};

struct Product
{
    double                                scale = 1.;
    std::vector< Factor >                 factors;
    std::array< std::optional< Operand >, 2 > args;
};

enum class Domain
{
    cell,
    interior_facet,
    exterior_facet
};

struct Measure
{
    Domain                         domain = Domain::cell;
    std::optional< BoundaryLabel > label; // exterior facets only; empty means all
};

inline const Measure dx{Domain::cell, {}};
inline const Measure dS{Domain::interior_facet, {}};
inline Measure       ds(std::optional< BoundaryLabel > label = {}) { return {Domain::exterior_facet, label}; }

struct IntegralTerm
{
    Measure                measure;
    std::vector< Product > products;
};

// ---------------------------------------------------------------------------
// FormIR
// ---------------------------------------------------------------------------

/// Declarative multilinear form. arguments[0] lists the test fields,
/// arguments[1] the trial fields; rank is the number of argument slots.
class FormIR
{
public:
    explicit FormIR(std::vector< std::vector< SpacePtr > > arguments);

    int                            rank() const { return static_cast< int >(arguments_.size()); }
    const std::vector< SpacePtr >& argument(int slot) const { return arguments_.at(slot); }
    const MeshPtr&                 mesh_ptr() const { return mesh_; }
    int                            uid() const { return uid_; }

    /// Adds an integral of `integrand` over `measure`. Validates linearity in
    /// each argument, operator placement, and field references.
    FormIR& add(const Measure& measure, const Expr& integrand);

    const std::vector< IntegralTerm >&                terms() const { return terms_; }
    std::vector< std::shared_ptr< const Function > > coefficients() const;
    bool                                               is_zero() const;

    /// Sub-form restricted to the given test (and trial) fields; field indices
    /// are renumbered in the order given.
    FormIR restrict_fields(const std::vector< int >& test_fields, const std::vector< int >& trial_fields = {}) const;

    /// Same integrands with every argument field on `from` moved to `to`.
    FormIR replace_space(const SpacePtr& from, const SpacePtr& to) const;

    /// Same integrands with `extra` fields appended to every argument slot.
    FormIR append_fields(const std::vector< SpacePtr >& extra) const;

private:
    std::vector< std::vector< SpacePtr > > arguments_;
    std::vector< IntegralTerm >            terms_;
    MeshPtr                                mesh_;
    int                                    uid_ = 0;
};

using FormPtr = std::shared_ptr< const FormIR >;

/// Conservative polynomial degree of the integrand of one term / whole form.
int estimate_degree(const FormIR& form, const IntegralTerm& term);
int estimate_degree(const FormIR& form);

/// Quadrature exactness chosen for a term (degree + 2).
int quadrature_exactness(const FormIR& form, const IntegralTerm& term);

/// Per-cell evaluation of a form's cell-local contribution. Holds reference
/// tabulations for every term; immutable and safe for concurrent use.
class LocalAssembler
{
public:
    explicit LocalAssembler(FormPtr form);

    const FormIR& form() const { return *form_; }
    DenseTensor   assemble(int cell) const;
    /// Local extents per axis (field-wise).
    const std::vector< std::vector< int > >& block_sizes() const { return block_sizes_; }

private:
    struct SpaceTabs
    {
        const FunctionSpace*          space = nullptr;
        Tabulation                    cell;
        std::array< Tabulation, 3 >   edge;
    };
    struct TermData
    {
        QuadratureRule           rule;
        std::vector< SpaceTabs > tabs;
    };

    const SpaceTabs& tabs_for(const TermData& td, const FunctionSpace* space) const;

    FormPtr                           form_;
    std::vector< TermData >           term_data_;
    std::vector< std::vector< int > > block_sizes_;
    std::vector< std::vector< int > > offsets_;
};

DenseTensor assemble_local(const FormIR& form, int cell);

} // namespace forms
} // namespace slatefem

#endif
