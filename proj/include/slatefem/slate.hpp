#ifndef SLATEFEM_SLATE_HPP
#define SLATEFEM_SLATE_HPP

#include "slatefem/forms.hpp"
#include "slatefem/linalg.hpp"

#include <memory>
#include <string>
#include <vector>

namespace slatefem::slate
{

/// One tensor axis: the ordered fields it spans, each contributing its local
/// dimension per cell and its global dimension after assembly.
struct Axis
{
    std::vector< SpacePtr > fields;

    int                local_size() const;
    int                global_size() const;
    std::vector< int > local_offsets() const;
    std::vector< int > global_offsets() const;
    std::string        describe() const;
    friend bool        operator==(const Axis& a, const Axis& b);
};

enum class Op
{
    tensor,
    assembled_vector,
    add,
    mul,
    negate,
    transpose,
    inverse,
    solve,
    blocks
};

struct Node;
using Expr = std::shared_ptr< const Node >;

struct Node
{
    Op                                       op = Op::tensor;
    std::vector< Expr >                      children;
    forms::FormPtr                           form;      // tensor
    std::vector< std::shared_ptr< Function > > functions; // assembled_vector, read at evaluation time
    Factorization                            factorization = Factorization::lu;
    std::vector< int >                       row_fields, col_fields; // blocks

    int                   rank = 0;
    std::array< Axis, 2 > axes;

    std::string describe() const;
};

// Terminals
Expr Tensor(forms::FormPtr form);
Expr Tensor(const forms::FormIR& form);
Expr AssembledVector(std::shared_ptr< Function > fn);
Expr AssembledVector(std::vector< std::shared_ptr< Function > > fns);

// Operations
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b);
Expr transpose(const Expr& a);
Expr inverse(const Expr& a);
Expr solve(const Expr& a, const Expr& b, Factorization kind = Factorization::lu);
/// Sub-tensor over the listed fields of each axis (col_fields unused for rank 1).
Expr blocks(const Expr& a, std::vector< int > row_fields, std::vector< int > col_fields = {});

// ---------------------------------------------------------------------------
// Execution plans
// ---------------------------------------------------------------------------

enum class KernelKind
{
    assemble,
    gather,
    add,
    gemm,
    negate,
    transpose,
    factor_solve,
    invert,
    block_slice
};

struct Kernel
{
    KernelKind         kind = KernelKind::assemble;
    int                out  = 0;
    std::vector< int > in;
    int                terminal = -1; // assembler or gather index
    bool               left_vector = false; // gemm: left operand is a rank-1 register
    Factorization      factorization = Factorization::lu;
    std::vector< int > rows, cols;             // block_slice local indices
    std::vector< int > row_fields, col_fields; // block_slice field selection
};

struct ExecPlan
{
    Expr                                                     root;
    std::vector< Kernel >                                    kernels;
    std::vector< std::pair< int, int > >                     shapes; // per register (rows, cols)
    std::vector< int >                                       ranks;
    std::vector< std::shared_ptr< const forms::LocalAssembler > > assemblers;
    std::vector< std::vector< std::shared_ptr< Function > > >   gathers;
    int                                                      output = -1;

    int         num_registers() const { return static_cast< int >(shapes.size()); }
    /// Stable human-readable kernel listing.
    std::string dump() const;
};

/// Shape-checks and lowers an expression; identical subtrees share a register.
ExecPlan compile(const Expr& expr);

/// Dense result on one cell: (rows x cols) for rank 2, (n x 1) for rank 1.
Eigen::MatrixXd evaluate_cell(const ExecPlan& plan, int cell);

// ---------------------------------------------------------------------------
// Global assembly
// ---------------------------------------------------------------------------

/// Constrained global dofs (indices into the assembled axis) with values.
struct Bcs
{
    std::vector< int >    dofs;
    std::vector< double > values;
};

/// Per-cell results of a plan, computed concurrently, indexed by cell.
std::vector< Eigen::MatrixXd > evaluate_all(const ExecPlan& plan);

/// Scatter-adds every cell's tensor in increasing cell order. Constrained
/// dofs get zero row and column with unit diagonal.
CsrMatrix assemble_matrix(const Expr& expr, const Bcs* bcs = nullptr);
/// Scatter-adds every cell's vector; constrained entries are set to their value.
Eigen::VectorXd assemble_vector(const Expr& expr, const Bcs* bcs = nullptr);

/// Lifts known values out of b (b -= A[:,D] g), then constrains rows and
/// columns of A and sets b[D] = g.
void apply_bcs(CsrMatrix& a, Eigen::VectorXd& b, const Bcs& bcs);
/// Replaces constrained rows by identity rows and sets b[D] = g.
void constrain_rows(CsrMatrix& a, Eigen::VectorXd& b, const Bcs& bcs);

/// Global dof indices of one cell along an axis (fields concatenated with
/// their global offsets).
std::vector< int > axis_cell_dofs(const Axis& axis, int cell);

/// Splits a global axis vector into per-field coefficient vectors.
void scatter_to_functions(const Axis& axis, const Eigen::VectorXd& v, const std::vector< std::shared_ptr< Function > >& out);

} // namespace slatefem::slate

#endif
