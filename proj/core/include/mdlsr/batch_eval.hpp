#pragma once

#include <span>
#include <vector>

#include "mdlsr/dataset.hpp"
#include "mdlsr/expr_tree.hpp"

namespace mdlsr {

/// Evaluates one tree over every row of a dataset at once, optionally with the
/// exact Jacobian with respect to the parameter slots (forward-mode
/// differentiation). Owns scratch buffers, so one instance per thread.
class BatchEvaluator {
public:
    explicit BatchEvaluator(const ExprTree& tree);

    std::size_t param_count() const { return param_count_; }

    /// Fills `out` (size N) with predictions. Returns false if any value,
    /// including intermediates, is non-finite.
    bool predict(std::span<const double> params, const Dataset& data, std::span<double> out);

    /// As predict, plus `jacobian` (column-major N x k, column c = d out / d theta_c).
    /// Returns false if a prediction or a derivative is non-finite.
    bool predict_with_jacobian(std::span<const double> params, const Dataset& data, std::span<double> out,
                               std::span<double> jacobian);

private:
    struct Instr {
        NodeKind kind;
        OpKind op;
        int arity;
        std::size_t index;
        double value;
    };

    bool run(std::span<const double> params, const Dataset& data, std::span<double> out, std::span<double> jacobian,
             bool with_gradient);

    std::vector<Instr> program_;
    std::size_t param_count_ = 0;
    std::size_t max_stack_ = 0;
    std::vector<double> values_;
    std::vector<double> grads_;
    std::vector<std::vector<std::size_t>> active_;
    std::vector<std::size_t> merged_;
};

} // namespace mdlsr
