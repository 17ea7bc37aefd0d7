#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "esc/tensor.hpp"

// Reverse-mode differentiation over dense double matrices. A Tape records
// every op applied during one forward pass; backward() walks it in reverse
// and accumulates parameter gradients into a Gradients buffer owned by the
// caller, so several tapes can run against one ParameterStore.
namespace esc::ag {

using ParamId = std::size_t;

class ParameterStore {
public:
    ParamId add(std::string name, Matrix init);

    std::size_t size() const { return values_.size(); }
    std::size_t scalar_count() const;
    const std::string& name(ParamId id) const { return names_.at(id); }
    Matrix& value(ParamId id) { return values_.at(id); }
    const Matrix& value(ParamId id) const { return values_.at(id); }
    std::optional<ParamId> find(std::string_view name) const;

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
    std::unordered_map<std::string, ParamId> index_;
};

class Gradients {
public:
    explicit Gradients(const ParameterStore& store);

    /// Zero-initialized on first access.
    Matrix& at(ParamId id);
    const Matrix* get(ParamId id) const;
    std::size_t size() const { return grads_.size(); }

    void zero();
    void add(const Gradients& other);
    void scale(double s);
    double squared_norm() const;

private:
    const ParameterStore* store_;
    std::vector<Matrix> grads_;
    std::vector<bool> touched_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }

private:
    friend class Tape;
    Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix& grad)>;

    /// With record = false nothing is kept for backward (inference).
    explicit Tape(const ParameterStore& store, bool record = true);
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix m);
    Var param(ParamId id);

    /// Seeds d(loss)/d(loss) = 1 and accumulates into `out`. `loss` must be 1x1.
    void backward(Var loss, Gradients& out);

    bool recording() const { return record_; }
    std::size_t size() const { return nodes_.size(); }
    const Matrix& value(std::size_t id) const;
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    bool needs_grad(Var v) const { return needs_grad(v.id()); }

    /// Op plumbing: registers a result whose backward closure is called
    /// with the result's gradient. `inputs` decide whether it needs grad.
    Var push(Matrix value, std::initializer_list<Var> inputs, Backward bw);
    Var push(Matrix value, const std::vector<Var>& inputs, Backward bw);
    /// Adds `g` into the gradient of `v` (no-op when v needs no grad).
    void accumulate(Var v, const Matrix& g);
    Matrix& grad_buffer(Var v);

private:
    struct Node {
        Matrix value;
        const Matrix* ref = nullptr;
        Matrix grad;
        bool needs_grad = false;
        bool has_grad = false;
        std::optional<ParamId> param;
        Backward backward;
    };

    const ParameterStore* store_;
    bool record_;
    std::deque<Node> nodes_;
};

// ---- ops -----------------------------------------------------------------

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast 1 x n over rows
Var scale(Var a, double s);
Var gelu(Var a);              // tanh approximation
Var tanh(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmax_rows(Var x);
Var gather_rows(Var table, const std::vector<int>& ids);
Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count);
Var concat_rows(const std::vector<Var>& parts);
/// Column-wise max over the rows flagged in `valid` (all rows when null).
Var max_rows(Var x, const std::vector<char>* valid = nullptr);
Var dropout(Var x, double rate, std::mt19937_64& rng);
/// Weighted sum of 1x1 values.
Var lincomb(const std::vector<Var>& terms, const std::vector<double>& coeffs);

/// Scaled dot-product attention over `heads` column blocks of q/k/v.
/// Keys with key_valid[j] == 0 get exactly zero weight; `causal` masks
/// keys j > i. A query row with no visible key yields a zero row.
Var attention(Var q, Var k, Var v, int heads, const std::vector<char>* key_valid, bool causal);

/// Mean over rows of -log softmax(logits)[row, target]; targets < 0 are
/// skipped. Returns 1x1.
Var cross_entropy(Var logits, const std::vector<int>& targets);

} // namespace esc::ag
