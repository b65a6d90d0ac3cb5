#include "mdlsr/batch_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mdlsr {

namespace {

bool all_finite(std::span<const double> v)
{
    bool ok = true;
    for (double x : v) {
        ok &= std::fabs(x) <= std::numeric_limits<double>::max();
    }
    return ok;
}

// Value and partial derivative of a unary op.
void unary_kernel(OpKind op, std::span<const double> a, std::span<double> v, std::span<double> pa, bool partials)
{
    const std::size_t n = a.size();
    switch (op) {
    case OpKind::Exp:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::exp(a[i]);
        }
        if (partials) {
            std::copy(v.begin(), v.end(), pa.begin());
        }
        return;
    case OpKind::Log:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] > 0.0 ? std::log(a[i]) : std::numeric_limits<double>::quiet_NaN();
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = 1.0 / a[i];
            }
        }
        return;
    case OpKind::Sin:
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                ::sincos(a[i], &v[i], &pa[i]);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                v[i] = std::sin(a[i]);
            }
        }
        return;
    case OpKind::Cos:
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                double sn = 0.0;
                ::sincos(a[i], &sn, &v[i]);
                pa[i] = -sn;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                v[i] = std::cos(a[i]);
            }
        }
        return;
    case OpKind::Sqrt:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] >= 0.0 ? std::sqrt(a[i]) : std::numeric_limits<double>::quiet_NaN();
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = 0.5 / v[i];
            }
        }
        return;
    case OpKind::Abs:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::fabs(a[i]);
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = a[i] < 0.0 ? -1.0 : 1.0;
            }
        }
        return;
    case OpKind::Tan:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::tan(a[i]);
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = 1.0 + v[i] * v[i];
            }
        }
        return;
    case OpKind::Sinh:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::sinh(a[i]);
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = std::cosh(a[i]);
            }
        }
        return;
    case OpKind::Cosh:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::cosh(a[i]);
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = std::sinh(a[i]);
            }
        }
        return;
    case OpKind::Tanh:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::tanh(a[i]);
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = 1.0 - v[i] * v[i];
            }
        }
        return;
    case OpKind::Square:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] * a[i];
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = 2.0 * a[i];
            }
        }
        return;
    case OpKind::Cube:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] * a[i] * a[i];
        }
        if (partials) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = 3.0 * a[i] * a[i];
            }
        }
        return;
    default: break;
    }
    throw std::logic_error("unary_kernel: not a unary operation");
}

// Value and partial derivatives of a binary op; a is the first operand.
void binary_kernel(OpKind op, std::span<const double> a, std::span<const double> b, std::span<double> v,
                   std::span<double> pa, std::span<double> pb, bool want_pa, bool want_pb)
{
    const std::size_t n = a.size();
    switch (op) {
    case OpKind::Add:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] + b[i];
        }
        std::fill(pa.begin(), pa.end(), 1.0);
        std::fill(pb.begin(), pb.end(), 1.0);
        return;
    case OpKind::Sub:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] - b[i];
        }
        std::fill(pa.begin(), pa.end(), 1.0);
        std::fill(pb.begin(), pb.end(), -1.0);
        return;
    case OpKind::Mul:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] * b[i];
        }
        if (want_pa) {
            std::copy(b.begin(), b.end(), pa.begin());
        }
        if (want_pb) {
            std::copy(a.begin(), a.end(), pb.begin());
        }
        return;
    case OpKind::Div:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = a[i] / b[i];
        }
        if (want_pa || want_pb) {
            for (std::size_t i = 0; i < n; ++i) {
                pa[i] = 1.0 / b[i];
                pb[i] = -v[i] / b[i];
            }
        }
        return;
    case OpKind::Pow:
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = (a[i] == 0.0 && b[i] < 0.0) ? std::numeric_limits<double>::quiet_NaN() : std::pow(a[i], b[i]);
        }
        if (want_pa) {
            for (std::size_t i = 0; i < n; ++i) {
                if (b[i] == 0.0) {
                    pa[i] = 0.0;
                } else if (a[i] != 0.0) {
                    pa[i] = b[i] * v[i] / a[i];
                } else {
                    pa[i] = b[i] * std::pow(a[i], b[i] - 1.0);
                }
            }
        }
        if (want_pb) {
            for (std::size_t i = 0; i < n; ++i) {
                pb[i] = v[i] == 0.0 ? 0.0 : v[i] * std::log(a[i]);
            }
        }
        return;
    default: break;
    }
    throw std::logic_error("binary_kernel: not a binary operation");
}

} // namespace

BatchEvaluator::BatchEvaluator(const ExprTree& tree) : param_count_(tree.param_count())
{
    program_.reserve(tree.size());
    std::size_t depth = 0;
    for (std::size_t r = tree.size(); r-- > 0;) {
        const Node& n = tree.node(r);
        Instr ins{n.kind, OpKind::Add, 0, n.index, n.value};
        if (n.kind == NodeKind::Op) {
            const OpInfo& info = tree.vocabulary().op(n.index);
            ins.op = info.kind;
            ins.arity = info.arity;
            depth -= static_cast<std::size_t>(info.arity);
        }
        ++depth;
        max_stack_ = std::max(max_stack_, depth);
        program_.push_back(ins);
    }
}

bool BatchEvaluator::predict(std::span<const double> params, const Dataset& data, std::span<double> out)
{
    return run(params, data, out, {}, false);
}

bool BatchEvaluator::predict_with_jacobian(std::span<const double> params, const Dataset& data, std::span<double> out,
                                           std::span<double> jacobian)
{
    return run(params, data, out, jacobian, true);
}

bool BatchEvaluator::run(std::span<const double> params, const Dataset& data, std::span<double> out,
                         std::span<double> jacobian, bool with_gradient)
{
    const std::size_t n = data.size();
    const std::size_t k = param_count_;
    if (params.size() != k || out.size() != n || (with_gradient && jacobian.size() != n * k)) {
        throw std::invalid_argument("BatchEvaluator: buffer sizes do not match the dataset and tree");
    }
    // Slot layout: max_stack_ operand slots followed by three scratch rows.
    const std::size_t scratch = max_stack_;
    if (values_.size() < (max_stack_ + 3) * n) {
        values_.assign((max_stack_ + 3) * n, 0.0);
    }
    if (with_gradient && grads_.size() < max_stack_ * k * n) {
        grads_.assign(max_stack_ * k * n, 0.0);
    }
    // Columns of the Jacobian each stack entry depends on, ascending.
    active_.resize(max_stack_);
    for (auto& a : active_) {
        a.clear();
    }

    auto slot = [&](std::size_t s) { return std::span<double>(values_).subspan(s * n, n); };
    auto grad = [&](std::size_t s, std::size_t c) { return std::span<double>(grads_).subspan((s * k + c) * n, n); };

    bool ok = true;
    std::size_t sp = 0;
    for (const Instr& ins : program_) {
        switch (ins.kind) {
        case NodeKind::Variable: {
            const auto col = data.column(ins.index);
            std::copy(col.begin(), col.end(), slot(sp).begin());
            active_[sp].clear();
            ++sp;
            continue;
        }
        case NodeKind::Constant:
            std::fill_n(slot(sp).begin(), n, ins.value);
            active_[sp].clear();
            ++sp;
            continue;
        case NodeKind::Param:
            std::fill_n(slot(sp).begin(), n, params[ins.index]);
            active_[sp].clear();
            if (with_gradient) {
                std::fill_n(grad(sp, ins.index).begin(), n, 1.0);
                active_[sp].push_back(ins.index);
            }
            ++sp;
            continue;
        case NodeKind::Op: break;
        }

        auto v = slot(scratch);
        auto pa = slot(scratch + 1);
        auto pb = slot(scratch + 2);
        if (ins.arity == 1) {
            const std::size_t s = sp - 1;
            const bool g = !active_[s].empty();
            unary_kernel(ins.op, slot(s), v, pa, g);
            for (std::size_t c : active_[s]) {
                auto gc = grad(s, c);
                for (std::size_t i = 0; i < n; ++i) {
                    gc[i] *= pa[i];
                }
            }
            std::copy(v.begin(), v.end(), slot(s).begin());
            ok = ok && all_finite(slot(s));
        } else {
            const std::size_t sa = sp - 1; // first operand is on top
            const std::size_t sb = sp - 2;
            const auto& act_a = active_[sa];
            auto& act_b = active_[sb];
            const bool ga = !act_a.empty();
            const bool gb = !act_b.empty();
            binary_kernel(ins.op, slot(sa), slot(sb), v, pa, pb, ga, gb);
            if (ga || gb) {
                merged_.clear();
                std::size_t ia = 0;
                std::size_t ib = 0;
                while (ia < act_a.size() || ib < act_b.size()) {
                    const bool take_a = ib == act_b.size() || (ia < act_a.size() && act_a[ia] <= act_b[ib]);
                    const bool take_b = ia == act_a.size() || (ib < act_b.size() && act_b[ib] <= act_a[ia]);
                    const std::size_t c = take_a ? act_a[ia] : act_b[ib];
                    auto out_c = grad(sb, c);
                    if (take_a && take_b) {
                        auto a_c = grad(sa, c);
                        for (std::size_t i = 0; i < n; ++i) {
                            out_c[i] = pa[i] * a_c[i] + pb[i] * out_c[i];
                        }
                    } else if (take_a) {
                        auto a_c = grad(sa, c);
                        for (std::size_t i = 0; i < n; ++i) {
                            out_c[i] = pa[i] * a_c[i];
                        }
                    } else {
                        for (std::size_t i = 0; i < n; ++i) {
                            out_c[i] *= pb[i];
                        }
                    }
                    merged_.push_back(c);
                    ia += take_a ? 1U : 0U;
                    ib += take_b ? 1U : 0U;
                }
                act_b.swap(merged_);
            }
            std::copy(v.begin(), v.end(), slot(sb).begin());
            ok = ok && all_finite(slot(sb));
            --sp;
        }
        if (!ok) {
            return false;
        }
    }

    std::copy_n(slot(0).begin(), n, out.begin());
    if (with_gradient) {
        std::fill(jacobian.begin(), jacobian.end(), 0.0);
        for (std::size_t c : active_[0]) {
            auto src = grad(0, c);
            std::copy(src.begin(), src.end(), jacobian.subspan(c * n, n).begin());
        }
        ok = all_finite(jacobian);
    }
    return ok;
}

} // namespace mdlsr
