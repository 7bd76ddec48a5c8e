#include "slatefem/slate.hpp"

#include <cstdio>
#include <map>
#include <sstream>

namespace slatefem::slate
{

// ---------------------------------------------------------------------------
// Axis
// ---------------------------------------------------------------------------

int Axis::local_size() const
{
    int n = 0;
    for (const auto& f : fields)
        n += f->local_dim();
    return n;
}

int Axis::global_size() const
{
    int n = 0;
    for (const auto& f : fields)
        n += f->ndof_global();
    return n;
}

std::vector< int > Axis::local_offsets() const
{
    std::vector< int > off{0};
    for (const auto& f : fields)
        off.push_back(off.back() + f->local_dim());
    return off;
}

std::vector< int > Axis::global_offsets() const
{
    std::vector< int > off{0};
    for (const auto& f : fields)
        off.push_back(off.back() + f->ndof_global());
    return off;
}

std::string Axis::describe() const
{
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i)
        out += (i ? ", " : "") + fields[i]->name();
    return out;
}

bool operator==(const Axis& a, const Axis& b)
{
    if (a.fields.size() != b.fields.size())
        return false;
    for (std::size_t i = 0; i < a.fields.size(); ++i)
        if (a.fields[i] != b.fields[i])
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// Expression construction and shape checking
// ---------------------------------------------------------------------------

namespace
{

const char* op_name(Op op)
{
    switch (op)
    {
    case Op::tensor: return "Tensor";
    case Op::assembled_vector: return "AssembledVector";
    case Op::add: return "Add";
    case Op::mul: return "Mul";
    case Op::negate: return "Negate";
    case Op::transpose: return "Transpose";
    case Op::inverse: return "Inverse";
    case Op::solve: return "Solve";
    case Op::blocks: return "Blocks";
    }
    return "?";
}

std::string shape_string(const Node& n)
{
    if (n.rank == 0)
        return "scalar";
    if (n.rank == 1)
        return "(" + n.axes[0].describe() + ")";
    return "(" + n.axes[0].describe() + " | " + n.axes[1].describe() + ")";
}

[[noreturn]] void shape_error(Op op, const std::string& detail)
{
    throw Error(std::string("slate: shape mismatch in ") + op_name(op) + ": " + detail);
}

std::shared_ptr< Node > node(Op op, std::vector< Expr > children)
{
    for (const auto& c : children)
        if (!c)
            throw Error(std::string("slate: null operand to ") + op_name(op));
    auto n      = std::make_shared< Node >();
    n->op       = op;
    n->children = std::move(children);
    return n;
}

} // namespace

std::string Node::describe() const { return std::string(op_name(op)) + " " + shape_string(*this); }

Expr Tensor(forms::FormPtr form)
{
    if (!form)
        throw Error("slate: Tensor of a null form");
    auto n  = node(Op::tensor, {});
    n->rank = form->rank();
    for (int s = 0; s < n->rank; ++s)
        n->axes[s].fields = form->argument(s);
    n->form = std::move(form);
    return n;
}

Expr Tensor(const forms::FormIR& form) { return Tensor(std::make_shared< const forms::FormIR >(form)); }

Expr AssembledVector(std::shared_ptr< Function > fn) { return AssembledVector(std::vector{std::move(fn)}); }

Expr AssembledVector(std::vector< std::shared_ptr< Function > > fns)
{
    if (fns.empty())
        throw Error("slate: AssembledVector needs at least one function");
    auto n  = node(Op::assembled_vector, {});
    n->rank = 1;
    for (const auto& f : fns)
    {
        if (!f)
            throw Error("slate: AssembledVector of a null function");
        if (f->space->mesh_ptr() != fns[0]->space->mesh_ptr())
            throw Error("slate: AssembledVector functions live on different meshes");
        n->axes[0].fields.push_back(f->space);
    }
    n->functions = std::move(fns);
    return n;
}

Expr operator+(const Expr& a, const Expr& b)
{
    auto n = node(Op::add, {a, b});
    if (a->rank != b->rank || !(a->axes[0] == b->axes[0]) || !(a->axes[1] == b->axes[1]))
        shape_error(Op::add, a->describe() + " + " + b->describe());
    n->rank = a->rank;
    n->axes = a->axes;
    return n;
}

Expr operator-(const Expr& a)
{
    auto n  = node(Op::negate, {a});
    n->rank = a->rank;
    n->axes = a->axes;
    return n;
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b)
{
    auto n = node(Op::mul, {a, b});
    if (a->rank == 0 || b->rank == 0)
        shape_error(Op::mul, "scalar operand " + (a->rank == 0 ? a : b)->describe());
    if (!(a->axes[a->rank - 1] == b->axes[0]))
        shape_error(Op::mul, "cannot contract " + a->describe() + " with " + b->describe());
    n->rank = a->rank + b->rank - 2;
    int k   = 0;
    if (a->rank == 2)
        n->axes[k++] = a->axes[0];
    if (b->rank == 2)
        n->axes[k++] = b->axes[1];
    return n;
}

Expr transpose(const Expr& a)
{
    auto n = node(Op::transpose, {a});
    if (a->rank != 2)
        shape_error(Op::transpose, "operand must be rank 2, got " + a->describe());
    n->rank = 2;
    n->axes = {a->axes[1], a->axes[0]};
    return n;
}

Expr inverse(const Expr& a)
{
    auto n = node(Op::inverse, {a});
    if (a->rank != 2 || a->axes[0].local_size() != a->axes[1].local_size())
        shape_error(Op::inverse, "operand must be square, got " + a->describe());
    n->rank = 2;
    n->axes = {a->axes[1], a->axes[0]};
    return n;
}

Expr solve(const Expr& a, const Expr& b, Factorization kind)
{
    auto n = node(Op::solve, {a, b});
    if (a->rank != 2 || a->axes[0].local_size() != a->axes[1].local_size())
        shape_error(Op::solve, "matrix must be square, got " + a->describe());
    if (b->rank == 0 || !(a->axes[0] == b->axes[0]))
        shape_error(Op::solve, "right-hand side " + b->describe() + " does not match " + a->describe());
    n->factorization = kind;
    n->rank          = b->rank;
    n->axes[0]       = a->axes[1];
    if (b->rank == 2)
        n->axes[1] = b->axes[1];
    return n;
}

Expr blocks(const Expr& a, std::vector< int > row_fields, std::vector< int > col_fields)
{
    auto n = node(Op::blocks, {a});
    if (a->rank == 0)
        shape_error(Op::blocks, "cannot slice a scalar");
    const auto check = [&](const Axis& axis, const std::vector< int >& sel, const char* which) {
        if (sel.empty())
            shape_error(Op::blocks, std::string("empty ") + which + " selection");
        Axis out;
        for (int f : sel)
        {
            if (f < 0 || f >= static_cast< int >(axis.fields.size()))
                shape_error(Op::blocks, std::string(which) + " field " + std::to_string(f) + " outside " +
                                            a->describe());
            out.fields.push_back(axis.fields[f]);
        }
        return out;
    };
    n->rank    = a->rank;
    n->axes[0] = check(a->axes[0], row_fields, "row");
    if (a->rank == 2)
        n->axes[1] = check(a->axes[1], col_fields, "column");
    else if (!col_fields.empty())
        shape_error(Op::blocks, "column selection on a rank-1 operand");
    n->row_fields = std::move(row_fields);
    n->col_fields = std::move(col_fields);
    return n;
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

namespace
{

std::pair< int, int > local_shape(const Node& n)
{
    if (n.rank == 0)
        return {1, 1};
    if (n.rank == 1)
        return {n.axes[0].local_size(), 1};
    return {n.axes[0].local_size(), n.axes[1].local_size()};
}

std::vector< int > slice_indices(const Axis& axis, const std::vector< int >& sel)
{
    const auto         off = axis.local_offsets();
    std::vector< int > out;
    for (int f : sel)
        for (int i = off[f]; i < off[f + 1]; ++i)
            out.push_back(i);
    return out;
}

struct Compiler
{
    ExecPlan                                       plan;
    std::map< std::string, int >                   registers;
    std::map< const forms::FormIR*, int >          form_index;
    std::map< std::vector< const Function* >, int > gather_index;

    int emit(Kernel k, const std::string& key, const Node& n)
    {
        if (auto it = registers.find(key); it != registers.end())
            return it->second;
        k.out = plan.num_registers();
        plan.shapes.push_back(local_shape(n));
        plan.ranks.push_back(n.rank);
        plan.kernels.push_back(std::move(k));
        registers.emplace(key, plan.kernels.back().out);
        return plan.kernels.back().out;
    }

    int lower(const Expr& e)
    {
        const Node& n = *e;
        Kernel      k;
        std::string key;
        for (const auto& c : n.children)
        {
            k.in.push_back(lower(c));
            key += "r" + std::to_string(k.in.back()) + ",";
        }
        switch (n.op)
        {
        case Op::tensor: {
            auto [it, inserted] = form_index.try_emplace(n.form.get(), static_cast< int >(plan.assemblers.size()));
            if (inserted)
                plan.assemblers.push_back(std::make_shared< const forms::LocalAssembler >(n.form));
            k.kind     = KernelKind::assemble;
            k.terminal = it->second;
            key        = "T" + std::to_string(it->second);
            break;
        }
        case Op::assembled_vector: {
            std::vector< const Function* > ids;
            for (const auto& f : n.functions)
                ids.push_back(f.get());
            auto [it, inserted] = gather_index.try_emplace(ids, static_cast< int >(plan.gathers.size()));
            if (inserted)
                plan.gathers.push_back(n.functions);
            k.kind     = KernelKind::gather;
            k.terminal = it->second;
            key        = "V" + std::to_string(it->second);
            break;
        }
        case Op::add: k.kind = KernelKind::add; key = "add(" + key + ")"; break;
        case Op::mul:
            k.kind        = KernelKind::gemm;
            k.left_vector = n.children[0]->rank == 1;
            key           = "gemm(" + key + ")";
            break;
        case Op::negate: k.kind = KernelKind::negate; key = "neg(" + key + ")"; break;
        case Op::transpose: k.kind = KernelKind::transpose; key = "trans(" + key + ")"; break;
        case Op::inverse: k.kind = KernelKind::invert; key = "inv(" + key + ")"; break;
        case Op::solve:
            k.kind          = KernelKind::factor_solve;
            k.factorization = n.factorization;
            key = std::string(n.factorization == Factorization::lu ? "lusolve(" : "cholsolve(") + key + ")";
            break;
        case Op::blocks: {
            const Node& x = *n.children[0];
            k.kind        = KernelKind::block_slice;
            k.row_fields  = n.row_fields;
            k.col_fields  = n.col_fields;
            k.rows        = slice_indices(x.axes[0], n.row_fields);
            k.cols        = x.rank == 2 ? slice_indices(x.axes[1], n.col_fields) : std::vector< int >{0};
            key           = "block(" + key;
            for (int f : n.row_fields)
                key += std::to_string(f) + " ";
            key += "|";
            for (int f : n.col_fields)
                key += std::to_string(f) + " ";
            key += ")";
            break;
        }
        }
        return emit(std::move(k), key, n);
    }
};

std::string field_list(const std::vector< int >& f)
{
    std::string out = "{";
    for (std::size_t i = 0; i < f.size(); ++i)
        out += (i ? "," : "") + std::to_string(f[i]);
    return out + "}";
}

} // namespace

ExecPlan compile(const Expr& expr)
{
    if (!expr)
        throw Error("slate: compile of a null expression");
    if (expr->rank > 2)
        throw Error("slate: rank " + std::to_string(expr->rank) + " expressions are not supported");
    Compiler c;
    c.plan.root   = expr;
    c.plan.output = c.lower(expr);
    return std::move(c.plan);
}

std::string ExecPlan::dump() const
{
    std::ostringstream out;
    out << "plan: " << kernels.size() << " kernels, output r" << output << "\n";
    for (std::size_t i = 0; i < assemblers.size(); ++i)
    {
        const auto& f = assemblers[i]->form();
        out << "  form F" << i << ": rank " << f.rank();
        for (int s = 0; s < f.rank(); ++s)
        {
            Axis a{f.argument(s)};
            out << (s == 0 ? " <" : " | ") << a.describe();
        }
        out << (f.rank() ? ">" : "") << ", " << f.terms().size() << " integrals\n";
    }
    for (std::size_t i = 0; i < gathers.size(); ++i)
    {
        Axis a;
        for (const auto& fn : gathers[i])
            a.fields.push_back(fn->space);
        out << "  vector V" << i << ": <" << a.describe() << ">\n";
    }
    for (const auto& k : kernels)
    {
        char head[64];
        std::snprintf(head, sizeof head, "  r%d [%dx%d] = ", k.out, shapes[k.out].first, shapes[k.out].second);
        out << head;
        const auto r = [&](int i) { return "r" + std::to_string(k.in[i]); };
        switch (k.kind)
        {
        case KernelKind::assemble: out << "assemble F" << k.terminal; break;
        case KernelKind::gather: out << "gather V" << k.terminal; break;
        case KernelKind::add: out << "add " << r(0) << " " << r(1); break;
        case KernelKind::gemm: out << "gemm " << r(0) << (k.left_vector ? "^T " : " ") << r(1); break;
        case KernelKind::negate: out << "negate " << r(0); break;
        case KernelKind::transpose: out << "transpose " << r(0); break;
        case KernelKind::invert: out << "invert " << r(0); break;
        case KernelKind::factor_solve:
            out << (k.factorization == Factorization::lu ? "lu_solve " : "cholesky_solve ") << r(0) << " " << r(1);
            break;
        case KernelKind::block_slice:
            out << "block " << r(0) << " " << field_list(k.row_fields);
            if (!k.col_fields.empty())
                out << " x " << field_list(k.col_fields);
            break;
        }
        out << "\n";
    }
    return out.str();
}

Eigen::MatrixXd evaluate_cell(const ExecPlan& plan, int cell)
{
    const auto& mesh = plan.assemblers.empty() ? plan.gathers.at(0).at(0)->space->mesh()
                                               : *plan.assemblers[0]->form().mesh_ptr();
    if (cell < 0 || cell >= mesh.num_cells())
        throw Error("evaluate_cell: cell " + std::to_string(cell) + " out of range");

    std::vector< Eigen::MatrixXd > reg(static_cast< std::size_t >(plan.num_registers()));
    for (const auto& k : plan.kernels)
    {
        Eigen::MatrixXd& out = reg[k.out];
        const auto       in  = [&](int i) -> const Eigen::MatrixXd& { return reg[k.in[i]]; };
        switch (k.kind)
        {
        case KernelKind::assemble: out = plan.assemblers[k.terminal]->assemble(cell).data; break;
        case KernelKind::gather: {
            out.resize(plan.shapes[k.out].first, 1);
            int pos = 0;
            for (const auto& fn : plan.gathers[k.terminal])
            {
                const Eigen::VectorXd v = fn->cell_coeffs(cell);
                out.block(pos, 0, v.size(), 1) = v;
                pos += static_cast< int >(v.size());
            }
            break;
        }
        case KernelKind::add: out = in(0) + in(1); break;
        case KernelKind::gemm:
            if (k.left_vector)
                out = (in(0).transpose() * in(1)).transpose();
            else
                out = in(0) * in(1);
            break;
        case KernelKind::negate: out = -in(0); break;
        case KernelKind::transpose: out = in(0).transpose(); break;
        case KernelKind::invert: out = dense_inverse(in(0), cell); break;
        case KernelKind::factor_solve: out = DenseFactor(in(0), k.factorization, cell).solve(in(1)); break;
        case KernelKind::block_slice: out = in(0)(k.rows, k.cols); break;
        }
    }
    return std::move(reg[plan.output]);
}

// ---------------------------------------------------------------------------
// Global assembly
// ---------------------------------------------------------------------------

std::vector< Eigen::MatrixXd > evaluate_all(const ExecPlan& plan)
{
    const auto& mesh = plan.assemblers.empty() ? plan.gathers.at(0).at(0)->space->mesh()
                                               : *plan.assemblers[0]->form().mesh_ptr();
    std::vector< Eigen::MatrixXd > out(static_cast< std::size_t >(mesh.num_cells()));
    parallel_for(mesh.num_cells(), [&](int c) { out[c] = evaluate_cell(plan, c); });
    return out;
}

std::vector< int > axis_cell_dofs(const Axis& axis, int cell)
{
    std::vector< int > out;
    int                off = 0;
    for (const auto& f : axis.fields)
    {
        for (int d : f->cell_dofs(cell))
            out.push_back(off + d);
        off += f->ndof_global();
    }
    return out;
}

namespace
{

void check_bcs(const Bcs& bcs, int n)
{
    if (bcs.dofs.size() != bcs.values.size())
        throw Error("boundary conditions: dof and value counts differ");
    for (int d : bcs.dofs)
        if (d < 0 || d >= n)
            throw Error("boundary conditions: dof " + std::to_string(d) + " out of range");
}

} // namespace

CsrMatrix assemble_matrix(const Expr& expr, const Bcs* bcs)
{
    if (expr->rank != 2)
        throw Error("assemble_matrix: expression has rank " + std::to_string(expr->rank) + ", expected 2");
    const ExecPlan plan    = compile(expr);
    const auto     results = evaluate_all(plan);
    const Axis&    rows    = expr->axes[0];
    const Axis&    cols    = expr->axes[1];

    std::vector< Triplet > entries;
    for (std::size_t c = 0; c < results.size(); ++c)
    {
        const auto ri = axis_cell_dofs(rows, static_cast< int >(c));
        const auto ci = axis_cell_dofs(cols, static_cast< int >(c));
        for (std::size_t i = 0; i < ri.size(); ++i)
            for (std::size_t j = 0; j < ci.size(); ++j)
                entries.push_back({ri[i], ci[j], results[c](static_cast< Eigen::Index >(i), static_cast< Eigen::Index >(j))});
    }
    CsrMatrix a = CsrMatrix::from_triplets(rows.global_size(), cols.global_size(), entries);
    if (bcs)
    {
        if (!(rows == cols))
            throw Error("assemble_matrix: boundary conditions need a square operator over one axis");
        check_bcs(*bcs, a.nrows());
        for (int d : bcs->dofs)
            a.constrain_row_col(d);
    }
    return a;
}

Eigen::VectorXd assemble_vector(const Expr& expr, const Bcs* bcs)
{
    if (expr->rank != 1)
        throw Error("assemble_vector: expression has rank " + std::to_string(expr->rank) + ", expected 1");
    const ExecPlan  plan    = compile(expr);
    const auto      results = evaluate_all(plan);
    const Axis&     rows    = expr->axes[0];
    Eigen::VectorXd b       = Eigen::VectorXd::Zero(rows.global_size());
    for (std::size_t c = 0; c < results.size(); ++c)
    {
        const auto ri = axis_cell_dofs(rows, static_cast< int >(c));
        for (std::size_t i = 0; i < ri.size(); ++i)
            b[ri[i]] += results[c](static_cast< Eigen::Index >(i), 0);
    }
    if (bcs)
    {
        check_bcs(*bcs, static_cast< int >(b.size()));
        for (std::size_t i = 0; i < bcs->dofs.size(); ++i)
            b[bcs->dofs[i]] = bcs->values[i];
    }
    return b;
}

void apply_bcs(CsrMatrix& a, Eigen::VectorXd& b, const Bcs& bcs)
{
    check_bcs(bcs, a.nrows());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(a.ncols());
    for (std::size_t i = 0; i < bcs.dofs.size(); ++i)
        g[bcs.dofs[i]] = bcs.values[i];
    b -= a * g;
    for (std::size_t i = 0; i < bcs.dofs.size(); ++i)
    {
        a.constrain_row_col(bcs.dofs[i]);
        b[bcs.dofs[i]] = bcs.values[i];
    }
}

void constrain_rows(CsrMatrix& a, Eigen::VectorXd& b, const Bcs& bcs)
{
    check_bcs(bcs, a.nrows());
    for (std::size_t i = 0; i < bcs.dofs.size(); ++i)
    {
        a.constrain_row(bcs.dofs[i]);
        b[bcs.dofs[i]] = bcs.values[i];
    }
}

void scatter_to_functions(const Axis& axis, const Eigen::VectorXd& v, const std::vector< std::shared_ptr< Function > >& out)
{
    if (out.size() != axis.fields.size() || v.size() != axis.global_size())
        throw Error("scatter_to_functions: layout mismatch");
    const auto off = axis.global_offsets();
    for (std::size_t f = 0; f < out.size(); ++f)
    {
        if (out[f]->space->ndof_global() != off[f + 1] - off[f])
            throw Error("scatter_to_functions: function space does not match axis field");
        out[f]->coeffs = v.segment(off[f], off[f + 1] - off[f]);
    }
}

} // namespace slatefem::slate
