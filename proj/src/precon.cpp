#include "slatefem/precon.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace slatefem
{

using slate::Expr;

namespace
{

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration< double >(Clock::now() - t0).count(); }

std::vector< int > parse_int_list(const std::string& s)
{
    std::vector< int > out;
    std::stringstream  ss(s);
    std::string        item;
    while (std::getline(ss, item, ','))
    {
        if (item.empty())
            continue;
        try
        {
            out.push_back(std::stoi(item));
        }
        catch (const std::exception&)
        {
            throw Error("expected a comma-separated integer list, got '" + s + "'");
        }
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

FieldSplit FieldSplit::make(int nfields, std::vector< int > eliminate)
{
    FieldSplit fs;
    std::sort(eliminate.begin(), eliminate.end());
    for (std::size_t i = 0; i < eliminate.size(); ++i)
    {
        if (eliminate[i] < 0 || eliminate[i] >= nfields)
            throw Error("field split: field " + std::to_string(eliminate[i]) + " does not exist");
        if (i > 0 && eliminate[i] == eliminate[i - 1])
            throw Error("field split: field " + std::to_string(eliminate[i]) + " listed twice");
    }
    if (eliminate.empty())
        throw Error("field split: nothing to eliminate");
    for (int f = 0; f < nfields; ++f)
        if (!std::binary_search(eliminate.begin(), eliminate.end(), f))
            fs.condensed.push_back(f);
    if (fs.condensed.empty())
        throw Error("field split: every field eliminated, the condensed system would be empty");
    fs.eliminate = std::move(eliminate);
    return fs;
}

SolverOptions SolverOptions::from_map(const std::map< std::string, std::string >& opts)
{
    SolverOptions o;
    for (const auto& [key, value] : opts)
    {
        if (key == "condensed_field_ksp_type")
            o.inner_method = parse_krylov(value);
        else if (key == "condensed_field_pc_type")
            o.inner_pc = parse_pc(value);
        else if (key == "condensed_field_ksp_rtol")
            o.inner_rtol = std::stod(value);
        else if (key == "condensed_field_ksp_max_it")
            o.inner_maxiter = std::stoi(value);
        else if (key == "pc_sc_eliminate_fields")
            o.eliminate = parse_int_list(value);
        else
            throw Error("unknown solver option '" + key + "'");
    }
    return o;
}

KrylovConfig SolverOptions::inner_config() const
{
    KrylovConfig cfg;
    cfg.method  = inner_method;
    cfg.rtol    = inner_rtol;
    cfg.maxiter = inner_maxiter;
    cfg.restart = 100;
    return cfg;
}

// ---------------------------------------------------------------------------
// StaticCondensation
// ---------------------------------------------------------------------------

StaticCondensation::StaticCondensation(forms::FormPtr a, FieldSplit split, slate::Bcs bcs, const SolverOptions& opts)
    : a_(std::move(a)), split_(std::move(split)), bcs_(std::move(bcs)), opts_(opts)
{
    if (a_->rank() != 2)
        throw Error("static condensation needs a bilinear form");
    const auto& fields = a_->argument(0);
    if (!(slate::Axis{fields} == slate::Axis{a_->argument(1)}))
        throw Error("static condensation needs identical test and trial fields");
    const int nf = static_cast< int >(fields.size());
    FieldSplit::make(nf, split_.eliminate); // validates
    for (int f : split_.condensed)
        if (f < 0 || f >= nf || std::binary_search(split_.eliminate.begin(), split_.eliminate.end(), f))
            throw Error("field split: condensed and eliminated fields must partition the system");
    if (static_cast< int >(split_.eliminate.size() + split_.condensed.size()) != nf)
        throw Error("field split: condensed and eliminated fields must partition the system");
    for (int f : split_.eliminate)
        if (!fields[f]->discontinuous())
            throw Error("cannot eliminate field " + std::to_string(f) + " (" + fields[f]->name() +
                        "): it is conforming, so its block couples neighbouring cells and has no cell-local inverse");

    full_.fields = fields;
    for (int f : split_.condensed)
        cond_.fields.push_back(fields[f]);
    for (int f : split_.eliminate)
        elim_.fields.push_back(fields[f]);

    for (const auto& sp : fields)
        residual_.push_back(std::make_shared< Function >(sp, "residual"));
    for (const auto& sp : cond_.fields)
        solution_.push_back(std::make_shared< Function >(sp, "condensed"));

    const auto& e = split_.eliminate;
    const auto& c = split_.condensed;
    const Expr  A = slate::Tensor(a_);
    const auto  vec = [&](const std::vector< int >& sel) {
        std::vector< std::shared_ptr< Function > > fns;
        for (int f : sel)
            fns.push_back(residual_[f]);
        return slate::AssembledVector(fns);
    };
    const Expr Aee_inv = slate::inverse(slate::blocks(A, e, e));
    const Expr Ace     = slate::blocks(A, c, e);
    const Expr Aec     = slate::blocks(A, e, c);
    s_expr_            = slate::blocks(A, c, c) - Ace * Aee_inv * Aec;
    e_expr_            = -(Ace * Aee_inv * vec(e));

    const Expr Xc = slate::AssembledVector(solution_);
    if (e.size() == 2)
    {
        // recover the second eliminated field through its local Schur complement, then the first
        const Expr A00_inv = slate::inverse(slate::blocks(A, {e[0]}, {e[0]}));
        const Expr A10     = slate::blocks(A, {e[1]}, {e[0]});
        const Expr Sd      = slate::blocks(A, {e[1]}, {e[1]}) - A10 * A00_inv * slate::blocks(A, {e[0]}, {e[1]});
        const Expr Sl      = slate::blocks(A, {e[1]}, c) - A10 * A00_inv * slate::blocks(A, {e[0]}, c);
        const Expr R0      = vec({e[0]});
        const Expr R1      = vec({e[1]});
        back_exprs_.push_back(slate::solve(Sd, R1 - A10 * A00_inv * R0 - Sl * Xc));
        solution_.push_back(std::make_shared< Function >(fields[e[1]], "recovered"));
        const Expr X1 = slate::AssembledVector(solution_.back());
        back_exprs_.push_back(slate::solve(slate::blocks(A, {e[0]}, {e[0]}),
                                           R0 - slate::blocks(A, {e[0]}, {e[1]}) * X1 - slate::blocks(A, {e[0]}, c) * Xc));
    }
    else
        back_exprs_.push_back(slate::solve(slate::blocks(A, e, e), vec(e) - Aec * Xc));

    const auto t0 = Clock::now();
    s_raw_        = slate::assemble_matrix(s_expr_);
    s_            = s_raw_;
    for (int d : bcs_.dofs)
        if (d < 0 || d >= s_.nrows())
            throw Error("static condensation: constrained dof " + std::to_string(d) + " out of range");
    if (bcs_.dofs.size() != bcs_.values.size())
        throw Error("static condensation: dof and value counts differ");
    for (int d : bcs_.dofs)
        s_.constrain_row_col(d);
    inner_pc_            = make_preconditioner(s_, opts_.inner_pc);
    times_.condensation += seconds_since(t0);
}

int StaticCondensation::full_index(int condensed_dof) const
{
    const auto coff = cond_.global_offsets();
    const auto foff = full_.global_offsets();
    for (std::size_t i = 0; i < split_.condensed.size(); ++i)
        if (condensed_dof < coff[i + 1])
            return foff[split_.condensed[i]] + condensed_dof - coff[i];
    throw Error("condensed dof out of range");
}

void StaticCondensation::load_residual(const Eigen::VectorXd& r)
{
    if (r.size() != full_.global_size())
        throw Error("static condensation: residual has size " + std::to_string(r.size()) + ", expected " +
                    std::to_string(full_.global_size()));
    slate::scatter_to_functions(full_, r, residual_);
}

Eigen::VectorXd StaticCondensation::forward(const Eigen::VectorXd& r)
{
    const auto t0 = Clock::now();
    load_residual(r);
    Eigen::VectorXd e = slate::assemble_vector(e_expr_);
    const auto      foff = full_.global_offsets();
    const auto      coff = cond_.global_offsets();
    for (std::size_t i = 0; i < split_.condensed.size(); ++i)
        e.segment(coff[i], coff[i + 1] - coff[i]) += r.segment(foff[split_.condensed[i]], coff[i + 1] - coff[i]);

    if (!bcs_.dofs.empty())
    {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(e.size());
        for (int d : bcs_.dofs)
            g[d] = r[full_index(d)];
        e -= s_raw_ * g;
        for (int d : bcs_.dofs)
            e[d] = g[d];
    }
    times_.forward += seconds_since(t0);
    return e;
}

Eigen::VectorXd StaticCondensation::backsubstitute(const Eigen::VectorXd& r, const Eigen::VectorXd& xc)
{
    const auto t0 = Clock::now();
    load_residual(r);
    const std::vector< std::shared_ptr< Function > > cond_fns(solution_.begin(),
                                                              solution_.begin() + static_cast< long >(cond_.fields.size()));
    slate::scatter_to_functions(cond_, xc, cond_fns);

    Eigen::VectorXd x    = Eigen::VectorXd::Zero(full_.global_size());
    const auto      foff = full_.global_offsets();
    const auto      put  = [&](int field, const Eigen::VectorXd& v) { x.segment(foff[field], v.size()) = v; };
    for (std::size_t i = 0; i < split_.condensed.size(); ++i)
        put(split_.condensed[i], cond_fns[i]->coeffs);

    if (back_exprs_.size() == 2)
    {
        const Eigen::VectorXd x1 = slate::assemble_vector(back_exprs_[0]);
        solution_.back()->coeffs = x1;
        put(split_.eliminate[1], x1);
        put(split_.eliminate[0], slate::assemble_vector(back_exprs_[1]));
    }
    else
    {
        const Eigen::VectorXd xe   = slate::assemble_vector(back_exprs_[0]);
        const auto            eoff = elim_.global_offsets();
        for (std::size_t i = 0; i < split_.eliminate.size(); ++i)
            put(split_.eliminate[i], xe.segment(eoff[i], eoff[i + 1] - eoff[i]));
    }
    times_.backsub += seconds_since(t0);
    return x;
}

SolveReport StaticCondensation::apply(const Eigen::VectorXd& r, Eigen::VectorXd& x)
{
    const Eigen::VectorXd e  = forward(r);
    Eigen::VectorXd       xc = Eigen::VectorXd::Zero(e.size());
    KrylovConfig          cfg = opts_.inner_config();
    cfg.preconditioner        = inner_pc_;
    const auto t0             = Clock::now();
    last_                     = krylov_solve(s_, e, xc, cfg);
    times_.trace_solve += seconds_since(t0);
    inner_total_ += last_.iterations;
    x = backsubstitute(r, xc);
    return last_;
}

LinearOperator StaticCondensation::as_preconditioner()
{
    return {full_.global_size(), [this](const Eigen::VectorXd& r, Eigen::VectorXd& x) { apply(r, x); }};
}

// ---------------------------------------------------------------------------
// Broken transfer
// ---------------------------------------------------------------------------

BrokenTransfer make_broken_transfer(const SpacePtr& conforming, const SpacePtr& broken)
{
    if (conforming->family().family != Family::RT || conforming->broken() || !broken->broken() ||
        conforming->element().family() != broken->element().family() || conforming->mesh_ptr() != broken->mesh_ptr())
        throw Error("broken transfer: expected a conforming RT space and its broken twin");
    BrokenTransfer bt;
    bt.conforming = conforming;
    bt.broken     = broken;
    bt.conforming_of.assign(static_cast< std::size_t >(broken->ndof_global()), -1);
    bt.count.assign(static_cast< std::size_t >(conforming->ndof_global()), 0);
    for (int c = 0; c < conforming->mesh().num_cells(); ++c)
    {
        const auto cd = conforming->cell_dofs(c);
        const auto bd = broken->cell_dofs(c);
        for (std::size_t i = 0; i < cd.size(); ++i)
        {
            bt.conforming_of[bd[i]] = cd[i];
            ++bt.count[cd[i]];
        }
    }
    return bt;
}

Eigen::VectorXd BrokenTransfer::transfer(const Eigen::VectorXd& r) const
{
    if (r.size() != conforming->ndof_global())
        throw Error("transfer_residual: vector does not live on the conforming space");
    Eigen::VectorXd out(broken->ndof_global());
    for (int b = 0; b < out.size(); ++b)
        out[b] = r[conforming_of[b]] / count[conforming_of[b]];
    return out;
}

Eigen::VectorXd BrokenTransfer::project_div(const Eigen::VectorXd& xb) const
{
    if (xb.size() != broken->ndof_global())
        throw Error("project_div: vector does not live on the broken space");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(conforming->ndof_global());
    for (int b = 0; b < xb.size(); ++b)
        out[conforming_of[b]] += xb[b];
    for (int i = 0; i < out.size(); ++i)
        out[i] /= count[i];
    return out;
}

Eigen::VectorXd BrokenTransfer::inject(const Eigen::VectorXd& x) const
{
    if (x.size() != conforming->ndof_global())
        throw Error("inject: vector does not live on the conforming space");
    Eigen::VectorXd out(broken->ndof_global());
    for (int b = 0; b < out.size(); ++b)
        out[b] = x[conforming_of[b]];
    return out;
}

Eigen::VectorXd transfer_residual(const BrokenTransfer& bt, const Eigen::VectorXd& r) { return bt.transfer(r); }

Function project_div(const BrokenTransfer& bt, const Function& broken_u)
{
    if (broken_u.space != bt.broken)
        throw Error("project_div: function is not on the paired broken space");
    Function out(bt.conforming, broken_u.name);
    out.coeffs = bt.project_div(broken_u.coeffs);
    return out;
}

// ---------------------------------------------------------------------------
// HybridizationPC
// ---------------------------------------------------------------------------

HybridizationPC::HybridizationPC(forms::FormPtr a, std::vector< int > neumann_dofs, const SolverOptions& opts)
    : a_(std::move(a)), neumann_(std::move(neumann_dofs))
{
    using namespace forms;
    if (a_->rank() != 2 || a_->argument(0).size() != 2 || !(slate::Axis{a_->argument(0)} == slate::Axis{a_->argument(1)}))
        throw Error("hybridization: expected a square two-field bilinear form");
    const SpacePtr U = a_->argument(0)[0];
    const SpacePtr P = a_->argument(0)[1];
    if (U->family().family != Family::RT || U->broken())
        throw Error("hybridization: field 0 must be a conforming RT space, got " + U->name());
    if (P->family().family != Family::DG)
        throw Error("hybridization: field 1 must be a DG space, got " + P->name());
    const int k = U->family().degree;
    if (P->family().degree != k - 1)
        throw Error("hybridization: trace/RT degree mismatch, " + U->name() + " pairs with DG" + std::to_string(k - 1) +
                    " and Trace" + std::to_string(k - 1) + ", got " + P->name());

    const Mesh& mesh = U->mesh();
    const auto  Ud   = break_space(U);
    bt_              = make_broken_transfer(U, Ud);
    trace_           = create_space(U->mesh_ptr(), {Family::Trace, k - 1});

    FormIR h = a_->replace_space(U, Ud).append_fields({trace_});
    const forms::Expr coupling = inner(jump(test(0)), trial(2)) - inner(test(2), jump(trial(0)));
    h.add(dS, coupling);
    h.add(ds(BoundaryLabel::neumann), coupling);
    hybrid_ = std::make_shared< const FormIR >(std::move(h));

    auto kf = std::make_shared< FormIR >(std::vector< std::vector< SpacePtr > >{{trace_}, {Ud}});
    kf->add(dS, inner(test(), jump(trial())));
    kf->add(ds(BoundaryLabel::neumann), inner(test(), jump(trial())));
    k_form_ = kf;

    std::set< int > expected, given(neumann_.begin(), neumann_.end());
    slate::Bcs      bcs;
    for (int f = 0; f < mesh.num_facets(); ++f)
    {
        if (mesh.facet_kind(f) != FacetKind::exterior)
            continue;
        const auto tdofs = trace_->facet_dofs(f);
        if (mesh.exterior_label(f) == BoundaryLabel::dirichlet)
        {
            for (int d : tdofs)
            {
                bcs.dofs.push_back(d);
                bcs.values.push_back(0.);
            }
            continue;
        }
        const int    c = mesh.facet_cells(f)[0];
        const int    e = mesh.facet_local_index(f)[0];
        const double s = facet_global_normal(mesh, f).dot(cell_geometry(mesh, c).facet_normals[e]);
        const auto   udofs = U->facet_dofs(f);
        for (std::size_t j = 0; j < udofs.size(); ++j)
        {
            expected.insert(udofs[j]);
            neumann_map_.emplace_back(udofs[j], tdofs[j], -s);
        }
    }
    if (expected != given)
        throw Error("hybridization: the essential RT dofs must be exactly the dofs on Neumann-labelled facets");

    sc_ = std::make_unique< StaticCondensation >(hybrid_, FieldSplit::make(3, {0, 1}), std::move(bcs), opts);
}

Eigen::VectorXd HybridizationPC::hybrid_residual(const Eigen::VectorXd& r) const
{
    const int nu = bt_.conforming->ndof_global();
    const int np = a_->argument(0)[1]->ndof_global();
    if (r.size() != nu + np)
        throw Error("hybridization: residual has size " + std::to_string(r.size()) + ", expected " +
                    std::to_string(nu + np));
    const int       nb = bt_.broken->ndof_global();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nb + np + trace_->ndof_global());
    out.head(nb)         = bt_.transfer(r.head(nu));
    out.segment(nb, np)  = r.segment(nu, np);
    for (const auto& [udof, tdof, s] : neumann_map_)
        out[nb + np + tdof] = s * r[udof];
    return out;
}

SolveReport HybridizationPC::apply(const Eigen::VectorXd& r, Eigen::VectorXd& x)
{
    const Eigen::VectorXd rh = hybrid_residual(r);
    Eigen::VectorXd       xh;
    const SolveReport     rep = sc_->apply(rh, xh);
    const int             nu  = bt_.conforming->ndof_global();
    const int             nb  = bt_.broken->ndof_global();
    const int             np  = a_->argument(0)[1]->ndof_global();
    x.resize(nu + np);
    const auto t0        = Clock::now();
    x.head(nu)           = bt_.project_div(xh.head(nb));
    x.segment(nu, np)    = xh.segment(nb, np);
    sc_->add_backsub_time(seconds_since(t0));
    return rep;
}

LinearOperator HybridizationPC::as_preconditioner()
{
    const int n = bt_.conforming->ndof_global() + a_->argument(0)[1]->ndof_global();
    return {n, [this](const Eigen::VectorXd& r, Eigen::VectorXd& x) { apply(r, x); }};
}

} // namespace slatefem
