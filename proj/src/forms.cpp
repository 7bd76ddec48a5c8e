#include "slatefem/forms.hpp"

#include <algorithm>
#include <atomic>
#include <deque>

namespace slatefem::forms
{

// ---------------------------------------------------------------------------
// Expression builders
// ---------------------------------------------------------------------------

namespace
{

Expr make(NodeKind kind, std::vector< Expr > children = {})
{
    auto n      = std::make_shared< ExprNode >();
    n->kind     = kind;
    n->children = std::move(children);
    return n;
}

std::atomic< int > next_form_uid{0};

} // namespace

Expr test(int field)
{
    auto n   = std::make_shared< ExprNode >();
    n->kind  = NodeKind::argument;
    n->slot  = 0;
    n->field = field;
    return n;
}

Expr trial(int field)
{
    auto n   = std::make_shared< ExprNode >();
    n->kind  = NodeKind::argument;
    n->slot  = 1;
    n->field = field;
    return n;
}

Expr coefficient(std::shared_ptr< const Function > fn)
{
    auto n      = std::make_shared< ExprNode >();
    n->kind     = NodeKind::coefficient;
    n->function = std::move(fn);
    return n;
}

Expr field(ScalarField f)
{
    auto n    = std::make_shared< ExprNode >();
    n->kind   = NodeKind::scalar_field;
    n->sfield = std::move(f);
    return n;
}

Expr field(VectorField f)
{
    auto n    = std::make_shared< ExprNode >();
    n->kind   = NodeKind::vector_field;
    n->vfield = std::move(f);
    return n;
}

Expr constant(double v)
{
    auto n   = std::make_shared< ExprNode >();
    n->kind  = NodeKind::constant;
    n->value = v;
    return n;
}

Expr normal() { return make(NodeKind::normal); }
Expr grad(const Expr& x) { return make(NodeKind::grad, {x}); }
Expr div(const Expr& x) { return make(NodeKind::div, {x}); }
Expr jump(const Expr& w) { return make(NodeKind::jump, {w}); }
Expr inner(const Expr& a, const Expr& b) { return make(NodeKind::dot, {a, b}); }
Expr operator+(const Expr& a, const Expr& b) { return make(NodeKind::add, {a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return make(NodeKind::add, {a, make(NodeKind::neg, {b})}); }
Expr operator-(const Expr& a) { return make(NodeKind::neg, {a}); }
Expr operator*(const Expr& a, const Expr& b) { return make(NodeKind::mul, {a, b}); }
Expr operator*(double s, const Expr& a) { return make(NodeKind::mul, {constant(s), a}); }

// ---------------------------------------------------------------------------
// Expansion into sums of products
// ---------------------------------------------------------------------------

namespace
{

using Expanded = std::vector< std::vector< Product > >; // per component

struct ExpandContext
{
    const std::vector< std::vector< SpacePtr > >& arguments;
    bool                                          facet;
};

Product combine(const Product& a, const Product& b)
{
    Product out;
    out.scale   = a.scale * b.scale;
    out.factors = a.factors;
    out.factors.insert(out.factors.end(), b.factors.begin(), b.factors.end());
    for (int s = 0; s < 2; ++s)
    {
        if (a.args[s] && b.args[s])
            throw Error("form integrand is not linear in its " + std::string(s == 0 ? "test" : "trial") + " argument");
        out.args[s] = a.args[s] ? a.args[s] : b.args[s];
    }
    return out;
}

std::vector< Product > multiply(const std::vector< Product >& a, const std::vector< Product >& b)
{
    std::vector< Product > out;
    for (const auto& pa : a)
        for (const auto& pb : b)
            out.push_back(combine(pa, pb));
    return out;
}

const FunctionSpace& argument_space(const ExpandContext& ctx, int slot, int fld)
{
    if (slot >= static_cast< int >(ctx.arguments.size()))
        throw Error(std::string("form integrand uses a ") + (slot == 0 ? "test" : "trial") +
                    " function but the form has rank " + std::to_string(ctx.arguments.size()));
    const auto& fields = ctx.arguments[slot];
    if (fld < 0 || fld >= static_cast< int >(fields.size()))
        throw Error("form integrand references undeclared field " + std::to_string(fld));
    return *fields[fld];
}

Expanded expand(const Expr& e, const ExpandContext& ctx);

// grad/div applied directly to an argument or coefficient
Expanded expand_derivative(const Expr& e, OperandOp op, const ExpandContext& ctx)
{
    const Expr& x = e->children.at(0);
    int         vsize;
    Family      fam;
    if (x->kind == NodeKind::argument)
    {
        const auto& sp = argument_space(ctx, x->slot, x->field);
        vsize          = sp.element().value_size();
        fam            = sp.family().family;
    }
    else if (x->kind == NodeKind::coefficient)
    {
        vsize = x->function->space->element().value_size();
        fam   = x->function->space->family().family;
    }
    else
        throw Error("grad/div may only be applied to arguments or coefficients");
    if (fam == Family::Trace)
        throw Error("grad/div of a trace function is not defined");
    if (op == OperandOp::grad && vsize != 1)
        throw Error("grad is only supported for scalar-valued functions");
    if (op == OperandOp::div && vsize != 2)
        throw Error("div requires a vector-valued operand");

    const int ncomp = op == OperandOp::grad ? 2 : 1;
    Expanded  out(static_cast< std::size_t >(ncomp));
    for (int c = 0; c < ncomp; ++c)
    {
        Product p;
        if (x->kind == NodeKind::argument)
            p.args[x->slot] = Operand{x->field, op, c};
        else
        {
            Factor f;
            f.kind     = FactorKind::coefficient;
            f.op       = op;
            f.comp     = c;
            f.function = x->function;
            p.factors.push_back(std::move(f));
        }
        out[c].push_back(std::move(p));
    }
    return out;
}

Expanded expand_dot(const Expanded& a, const Expanded& b)
{
    if (a.size() != b.size())
        throw Error("inner product of operands with different value shapes");
    Expanded out(1);
    for (std::size_t c = 0; c < a.size(); ++c)
    {
        auto prods = multiply(a[c], b[c]);
        out[0].insert(out[0].end(), prods.begin(), prods.end());
    }
    return out;
}

Expanded expand(const Expr& e, const ExpandContext& ctx)
{
    switch (e->kind)
    {
    case NodeKind::argument: {
        const auto& sp = argument_space(ctx, e->slot, e->field);
        Expanded    out(static_cast< std::size_t >(sp.element().value_size()));
        for (std::size_t c = 0; c < out.size(); ++c)
        {
            Product p;
            p.args[e->slot] = Operand{e->field, OperandOp::value, static_cast< int >(c)};
            out[c].push_back(std::move(p));
        }
        return out;
    }
    case NodeKind::coefficient: {
        Expanded out(static_cast< std::size_t >(e->function->space->element().value_size()));
        for (std::size_t c = 0; c < out.size(); ++c)
        {
            Factor f;
            f.kind     = FactorKind::coefficient;
            f.comp     = static_cast< int >(c);
            f.function = e->function;
            Product p;
            p.factors.push_back(std::move(f));
            out[c].push_back(std::move(p));
        }
        return out;
    }
    case NodeKind::scalar_field: {
        Factor f;
        f.kind   = FactorKind::scalar_field;
        f.sfn    = e->sfield.fn;
        f.degree = e->sfield.degree;
        Product p;
        p.factors.push_back(std::move(f));
        return {{p}};
    }
    case NodeKind::vector_field: {
        Expanded out(2);
        for (int c = 0; c < 2; ++c)
        {
            Factor f;
            f.kind   = FactorKind::vector_field;
            f.comp   = c;
            f.vfn    = e->vfield.fn;
            f.degree = e->vfield.degree;
            Product p;
            p.factors.push_back(std::move(f));
            out[c].push_back(std::move(p));
        }
        return out;
    }
    case NodeKind::constant: {
        Product p;
        p.scale = e->value;
        return {{p}};
    }
    case NodeKind::normal: {
        if (!ctx.facet)
            throw Error("facet normal used in a cell integral");
        Expanded out(2);
        for (int c = 0; c < 2; ++c)
        {
            Factor f;
            f.kind = FactorKind::normal;
            f.comp = c;
            Product p;
            p.factors.push_back(std::move(f));
            out[c].push_back(std::move(p));
        }
        return out;
    }
    case NodeKind::grad: return expand_derivative(e, OperandOp::grad, ctx);
    case NodeKind::div: return expand_derivative(e, OperandOp::div, ctx);
    case NodeKind::jump: {
        if (!ctx.facet)
            throw Error("jump used in a cell integral");
        const auto w = expand(e->children.at(0), ctx);
        if (w.size() != 2)
            throw Error("jump requires a vector-valued operand");
        return expand_dot(w, expand(normal(), ctx));
    }
    case NodeKind::add: {
        auto a = expand(e->children.at(0), ctx);
        auto b = expand(e->children.at(1), ctx);
        if (a.size() != b.size())
            throw Error("sum of operands with different value shapes");
        for (std::size_t c = 0; c < a.size(); ++c)
            a[c].insert(a[c].end(), b[c].begin(), b[c].end());
        return a;
    }
    case NodeKind::neg: {
        auto a = expand(e->children.at(0), ctx);
        for (auto& comp : a)
            for (auto& p : comp)
                p.scale = -p.scale;
        return a;
    }
    case NodeKind::mul: {
        const auto a = expand(e->children.at(0), ctx);
        const auto b = expand(e->children.at(1), ctx);
        if (a.size() != 1)
            throw Error("left factor of a product must be scalar-valued");
        Expanded out(b.size());
        for (std::size_t c = 0; c < b.size(); ++c)
            out[c] = multiply(a[0], b[c]);
        return out;
    }
    case NodeKind::dot: return expand_dot(expand(e->children.at(0), ctx), expand(e->children.at(1), ctx));
    }
    throw Error("unknown expression node");
}

int operand_degree(int k, OperandOp op) { return op == OperandOp::value ? k : std::max(k - 1, 0); }

} // namespace

// ---------------------------------------------------------------------------
// FormIR
// ---------------------------------------------------------------------------

FormIR::FormIR(std::vector< std::vector< SpacePtr > > arguments)
    : arguments_(std::move(arguments)), uid_(next_form_uid++)
{
    if (arguments_.size() > 2)
        throw Error("FormIR: only forms of rank <= 2 are supported");
    for (const auto& slot : arguments_)
    {
        if (slot.empty())
            throw Error("FormIR: argument slot without fields");
        for (const auto& sp : slot)
        {
            if (!sp)
                throw Error("FormIR: null argument space");
            if (!mesh_)
                mesh_ = sp->mesh_ptr();
            else if (sp->mesh_ptr() != mesh_)
                throw Error("FormIR: argument spaces live on different meshes");
        }
    }
}

FormIR& FormIR::add(const Measure& measure, const Expr& integrand)
{
    const ExpandContext ctx{arguments_, measure.domain != Domain::cell};
    auto                ex = expand(integrand, ctx);
    if (ex.size() != 1)
        throw Error("form integrand must be scalar-valued");

    IntegralTerm term{measure, {}};
    for (auto& p : ex[0])
    {
        for (int s = 0; s < 2; ++s)
        {
            const bool needed = s < rank();
            if (needed && !p.args[s])
                throw Error(std::string("form integrand has a term without the ") + (s == 0 ? "test" : "trial") +
                            " function");
            if (p.args[s] && measure.domain == Domain::cell &&
                arguments_[s][p.args[s]->field]->family().family == Family::Trace)
                throw Error("trace functions may only appear in facet integrals");
        }
        for (const auto& f : p.factors)
        {
            if (f.kind != FactorKind::coefficient)
                continue;
            if (f.function->space->mesh_ptr() != mesh_ && mesh_)
                throw Error("coefficient lives on a different mesh than the form");
            if (measure.domain == Domain::cell && f.function->space->family().family == Family::Trace)
                throw Error("trace coefficients may only appear in facet integrals");
        }
        if (p.scale != 0.)
            term.products.push_back(std::move(p));
    }
    if (!term.products.empty())
        terms_.push_back(std::move(term));
    return *this;
}

std::vector< std::shared_ptr< const Function > > FormIR::coefficients() const
{
    std::vector< std::shared_ptr< const Function > > out;
    for (const auto& t : terms_)
        for (const auto& p : t.products)
            for (const auto& f : p.factors)
                if (f.kind == FactorKind::coefficient && std::find(out.begin(), out.end(), f.function) == out.end())
                    out.push_back(f.function);
    return out;
}

bool FormIR::is_zero() const { return terms_.empty(); }

FormIR FormIR::restrict_fields(const std::vector< int >& test_fields, const std::vector< int >& trial_fields) const
{
    if (rank() == 2 && trial_fields.empty())
        throw Error("restrict_fields: trial fields required for a rank-2 form");
    const std::array< const std::vector< int >*, 2 > sel{&test_fields, &trial_fields};

    std::vector< std::vector< SpacePtr > > args(static_cast< std::size_t >(rank()));
    for (int s = 0; s < rank(); ++s)
        for (int f : *sel[s])
        {
            if (f < 0 || f >= static_cast< int >(arguments_[s].size()))
                throw Error("restrict_fields: field index out of range");
            args[s].push_back(arguments_[s][f]);
        }
    FormIR out(std::move(args));
    for (const auto& t : terms_)
    {
        IntegralTerm nt{t.measure, {}};
        for (const auto& p : t.products)
        {
            Product np = p;
            bool    keep = true;
            for (int s = 0; s < rank() && keep; ++s)
            {
                const auto it = std::find(sel[s]->begin(), sel[s]->end(), p.args[s]->field);
                if (it == sel[s]->end())
                    keep = false;
                else
                    np.args[s]->field = static_cast< int >(it - sel[s]->begin());
            }
            if (keep)
                nt.products.push_back(std::move(np));
        }
        if (!nt.products.empty())
            out.terms_.push_back(std::move(nt));
    }
    return out;
}

FormIR FormIR::replace_space(const SpacePtr& from, const SpacePtr& to) const
{
    if (from->element().family() != to->element().family() || from->mesh_ptr() != to->mesh_ptr())
        throw Error("replace_space: spaces must share mesh and element");
    auto args = arguments_;
    for (auto& slot : args)
        for (auto& sp : slot)
            if (sp == from)
                sp = to;
    FormIR out(std::move(args));
    out.terms_ = terms_;
    return out;
}

FormIR FormIR::append_fields(const std::vector< SpacePtr >& extra) const
{
    auto args = arguments_;
    for (auto& slot : args)
        slot.insert(slot.end(), extra.begin(), extra.end());
    FormIR out(std::move(args));
    out.terms_ = terms_;
    return out;
}

int estimate_degree(const FormIR& form, const IntegralTerm& term)
{
    int deg = 0;
    for (const auto& p : term.products)
    {
        int d = 0;
        for (int s = 0; s < form.rank(); ++s)
        {
            const auto& op = *p.args[s];
            d += operand_degree(form.argument(s)[op.field]->element().poly_degree(), op.op);
        }
        for (const auto& f : p.factors)
        {
            switch (f.kind)
            {
            case FactorKind::coefficient: d += operand_degree(f.function->space->element().poly_degree(), f.op); break;
            case FactorKind::scalar_field:
            case FactorKind::vector_field: d += f.degree; break;
            case FactorKind::normal: break;
            }
        }
        deg = std::max(deg, d);
    }
    return deg;
}

int estimate_degree(const FormIR& form)
{
    int deg = 0;
    for (const auto& t : form.terms())
        deg = std::max(deg, estimate_degree(form, t));
    return deg;
}

int quadrature_exactness(const FormIR& form, const IntegralTerm& term)
{
    const int deg = estimate_degree(form, term);
    if (deg > max_quadrature_exactness)
        throw Error("form degree " + std::to_string(deg) + " exceeds the available quadrature exactness");
    return std::min(deg + 2, max_quadrature_exactness);
}

// ---------------------------------------------------------------------------
// Local assembly
// ---------------------------------------------------------------------------

LocalAssembler::LocalAssembler(FormPtr form) : form_(std::move(form))
{
    const FormIR& f = *form_;
    for (int s = 0; s < f.rank(); ++s)
    {
        std::vector< int > sizes, offsets{0};
        for (const auto& sp : f.argument(s))
        {
            sizes.push_back(sp->local_dim());
            offsets.push_back(offsets.back() + sp->local_dim());
        }
        block_sizes_.push_back(std::move(sizes));
        offsets_.push_back(std::move(offsets));
    }

    for (const auto& term : f.terms())
    {
        TermData   td;
        const bool facet = term.measure.domain != Domain::cell;
        td.rule          = quadrature(facet ? QuadratureKind::edge : QuadratureKind::cell, quadrature_exactness(f, term));

        std::vector< const FunctionSpace* > spaces;
        const auto                          use = [&](const FunctionSpace* sp) {
            if (std::find(spaces.begin(), spaces.end(), sp) == spaces.end())
                spaces.push_back(sp);
        };
        for (const auto& p : term.products)
        {
            for (int s = 0; s < f.rank(); ++s)
                use(f.argument(s)[p.args[s]->field].get());
            for (const auto& fac : p.factors)
                if (fac.kind == FactorKind::coefficient)
                    use(fac.function->space.get());
        }
        std::vector< double > tpts;
        for (const auto& pt : td.rule.points)
            tpts.push_back(pt.x());
        for (const auto* sp : spaces)
        {
            SpaceTabs st;
            st.space = sp;
            if (facet)
                for (int e = 0; e < 3; ++e)
                    st.edge[e] = sp->element().tabulate_edge(e, tpts);
            else
                st.cell = sp->element().tabulate(td.rule.points);
            td.tabs.push_back(std::move(st));
        }
        term_data_.push_back(std::move(td));
    }
}

const LocalAssembler::SpaceTabs& LocalAssembler::tabs_for(const TermData& td, const FunctionSpace* space) const
{
    for (const auto& st : td.tabs)
        if (st.space == space)
            return st;
    throw Error("LocalAssembler: missing tabulation");
}

DenseTensor LocalAssembler::assemble(int cell) const
{
    const FormIR& f    = *form_;
    const Mesh&   mesh = *f.mesh_ptr();
    if (cell < 0 || cell >= mesh.num_cells())
        throw Error("assemble_local: cell index out of range");
    const CellGeometry geom = cell_geometry(mesh, cell);

    DenseTensor out;
    out.rank        = f.rank();
    const int nrows = f.rank() >= 1 ? offsets_[0].back() : 1;
    const int ncols = f.rank() == 2 ? offsets_[1].back() : 1;
    out.data        = Eigen::MatrixXd::Zero(nrows, ncols);
    if (f.rank() >= 1)
        out.row_offsets = offsets_[0];
    if (f.rank() == 2)
        out.col_offsets = offsets_[1];

    for (std::size_t ti = 0; ti < f.terms().size(); ++ti)
    {
        const IntegralTerm& term = f.terms()[ti];
        const TermData&     td   = term_data_[ti];
        const int           npts = td.rule.size();

        std::vector< int > entities;
        if (term.measure.domain == Domain::cell)
            entities.push_back(-1);
        else
            for (int e = 0; e < 3; ++e)
            {
                const int  facet    = mesh.cell_facets(cell)[e];
                const bool interior = mesh.facet_kind(facet) == FacetKind::interior;
                if (term.measure.domain == Domain::interior_facet && interior)
                    entities.push_back(e);
                else if (term.measure.domain == Domain::exterior_facet && !interior &&
                         (!term.measure.label || *term.measure.label == mesh.exterior_label(facet)))
                    entities.push_back(e);
            }

        for (int ent : entities)
        {
            Eigen::VectorXd weights(npts);
            std::vector< Vec2 > xphys(static_cast< std::size_t >(npts));
            for (int q = 0; q < npts; ++q)
            {
                const Vec2 ref = ent < 0 ? td.rule.points[q] : edge_point(ent, td.rule.points[q].x());
                xphys[q]       = geom.map(ref);
                weights[q]     = td.rule.weights[q] * (ent < 0 ? geom.det_j : geom.facet_lengths[ent]);
            }

            std::deque< std::pair< const FunctionSpace*, CellBasis > > bases;
            const auto basis_of = [&](const FunctionSpace* sp) -> const CellBasis& {
                for (const auto& [s, b] : bases)
                    if (s == sp)
                        return b;
                const auto& st = tabs_for(td, sp);
                bases.emplace_back(sp, push_forward(*sp, ent < 0 ? st.cell : st.edge[ent], geom, cell));
                return bases.back().second;
            };
            const auto operand = [&](const FunctionSpace* sp, OperandOp op, int comp) -> const Eigen::MatrixXd& {
                const CellBasis& b = basis_of(sp);
                switch (op)
                {
                case OperandOp::value: return b.value[comp];
                case OperandOp::grad: return b.grad[comp];
                case OperandOp::div: return b.div;
                }
                return b.div;
            };

            for (const auto& p : term.products)
            {
                Eigen::VectorXd ws = weights * p.scale;
                for (const auto& fac : p.factors)
                {
                    switch (fac.kind)
                    {
                    case FactorKind::normal: ws *= geom.facet_normals[ent][fac.comp]; break;
                    case FactorKind::scalar_field:
                        for (int q = 0; q < npts; ++q)
                            ws[q] *= fac.sfn(xphys[q]);
                        break;
                    case FactorKind::vector_field:
                        for (int q = 0; q < npts; ++q)
                            ws[q] *= fac.vfn(xphys[q])[fac.comp];
                        break;
                    case FactorKind::coefficient: {
                        const auto* sp = fac.function->space.get();
                        ws = ws.cwiseProduct(operand(sp, fac.op, fac.comp) * fac.function->cell_coeffs(cell));
                        break;
                    }
                    }
                }
                if (f.rank() == 0)
                {
                    out.data(0, 0) += ws.sum();
                    continue;
                }
                const Operand&         t  = *p.args[0];
                const Eigen::MatrixXd& tm = operand(f.argument(0)[t.field].get(), t.op, t.comp);
                const int              r0 = offsets_[0][t.field];
                if (f.rank() == 1)
                {
                    out.data.block(r0, 0, tm.cols(), 1).noalias() += tm.transpose() * ws;
                    continue;
                }
                const Operand&         u  = *p.args[1];
                const Eigen::MatrixXd& um = operand(f.argument(1)[u.field].get(), u.op, u.comp);
                const int              c0 = offsets_[1][u.field];
                out.data.block(r0, c0, tm.cols(), um.cols()).noalias() += tm.transpose() * ws.asDiagonal() * um;
            }
        }
    }
    return out;
}

DenseTensor assemble_local(const FormIR& form, int cell)
{
    return LocalAssembler(std::make_shared< const FormIR >(form)).assemble(cell);
}

} // namespace slatefem::forms
