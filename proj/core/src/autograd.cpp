#include "esc/autograd.hpp"

#include <cmath>
#include <limits>

#include "esc/error.hpp"

namespace esc::ag {

// ---- parameters ------------------------------------------------------------

ParamId ParameterStore::add(std::string name, Matrix init) {
    if (index_.count(name)) throw InvalidArgument("duplicate parameter name " + name);
    const ParamId id = values_.size();
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    return id;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Gradients::Gradients(const ParameterStore& store)
    : store_(&store), grads_(store.size()), touched_(store.size(), false) {}

Matrix& Gradients::at(ParamId id) {
    if (!touched_.at(id)) {
        const auto& v = store_->value(id);
        grads_[id] = Matrix::Zero(v.rows(), v.cols());
        touched_[id] = true;
    }
    return grads_[id];
}

const Matrix* Gradients::get(ParamId id) const { return touched_.at(id) ? &grads_[id] : nullptr; }

void Gradients::zero() {
    for (std::size_t i = 0; i < grads_.size(); ++i)
        if (touched_[i]) grads_[i].setZero();
}

void Gradients::add(const Gradients& other) {
    for (std::size_t i = 0; i < other.grads_.size(); ++i)
        if (other.touched_[i]) at(i) += other.grads_[i];
}

void Gradients::scale(double s) {
    for (std::size_t i = 0; i < grads_.size(); ++i)
        if (touched_[i]) grads_[i] *= s;
}

double Gradients::squared_norm() const {
    double n = 0.0;
    for (std::size_t i = 0; i < grads_.size(); ++i)
        if (touched_[i]) n += grads_[i].squaredNorm();
    return n;
}

// ---- tape ------------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }

Tape::Tape(const ParameterStore& store, bool record) : store_(&store), record_(record) {}

const Matrix& Tape::value(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
}

Var Tape::constant(Matrix m) {
    Node n;
    n.value = std::move(m);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(ParamId id) {
    Node n;
    n.ref = &store_->value(id);
    n.needs_grad = record_;
    n.param = id;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward bw) {
    return push(std::move(value), std::vector<Var>(inputs), std::move(bw));
}

Var Tape::push(Matrix value, const std::vector<Var>& inputs, Backward bw) {
    Node n;
    n.value = std::move(value);
    if (record_) {
        for (const auto& v : inputs) {
            if (v.tape_ != this) throw InvalidArgument("op mixes variables from different tapes");
            if (nodes_[v.id_].needs_grad) n.needs_grad = true;
        }
        if (n.needs_grad) n.backward = std::move(bw);
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_buffer(Var v) {
    auto& n = nodes_[v.id_];
    if (!n.has_grad) {
        const auto& val = value(v.id_);
        n.grad = Matrix::Zero(val.rows(), val.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
    if (!nodes_[v.id_].needs_grad) return;
    grad_buffer(v) += g;
}

void Tape::backward(Var loss, Gradients& out) {
    if (!record_) throw InvalidArgument("backward on a non-recording tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw InvalidArgument("backward needs a 1x1 loss");
    if (!nodes_[loss.id_].needs_grad) return;
    grad_buffer(loss)(0, 0) += 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.has_grad) continue;
        if (n.param) out.at(*n.param) += n.grad;
        if (n.backward) n.backward(*this, n.grad);
        n.grad.resize(0, 0);
        n.has_grad = false;
    }
}

// ---- ops -------------------------------------------------------------------

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InvalidArgument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
}

} // namespace

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
    Tape& t = *a.tape();
    return t.push(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.grad_buffer(a).noalias() += g * b.value().transpose();
        if (t.needs_grad(b)) t.grad_buffer(b).noalias() += a.value().transpose() * g;
    });
}

Var matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) throw InvalidArgument("matmul_nt: column counts differ");
    Tape& t = *a.tape();
    return t.push(a.value() * b.value().transpose(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        if (t.needs_grad(a)) t.grad_buffer(a).noalias() += g * b.value();
        if (t.needs_grad(b)) t.grad_buffer(b).noalias() += g.transpose() * a.value();
    });
}

Var add(Var a, Var b) {
    check_same_shape(a.value(), b.value(), "add");
    Tape& t = *a.tape();
    return t.push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw InvalidArgument("add_row: bad row shape");
    Tape& t = *a.tape();
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    return t.push(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        if (t.needs_grad(row)) t.grad_buffer(row) += g.colwise().sum();
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape();
    return t.push(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var gelu(Var a) {
    static constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double c = 0.044715;
    Tape& t = *a.tape();
    const Matrix& x = a.value();
    Matrix th = (k * (x.array() + c * x.array().cube())).tanh().matrix();
    Matrix out = (0.5 * x.array() * (1.0 + th.array())).matrix();
    return t.push(std::move(out), {a}, [a, th = std::move(th)](Tape& t, const Matrix& g) {
        const auto x = a.value().array();
        const auto sech2 = 1.0 - th.array().square();
        const auto d = 0.5 * (1.0 + th.array()) + 0.5 * x * sech2 * k * (1.0 + 3.0 * c * x.square());
        t.accumulate(a, (g.array() * d).matrix());
    });
}

Var tanh(Var a) {
    Tape& t = *a.tape();
    Matrix out = a.value().array().tanh().matrix();
    Matrix y = out;
    return t.push(std::move(out), {a}, [a, y = std::move(y)](Tape& t, const Matrix& g) {
        t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    const auto n = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
        throw InvalidArgument("layer_norm: bad gain/bias shape");
    Tape& t = *x.tape();
    const Matrix& xv = x.value();
    Eigen::VectorXd inv_sigma(xv.rows());
    Matrix xhat(xv.rows(), n);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const double mu = xv.row(i).mean();
        const double var = (xv.row(i).array() - mu).square().mean();
        inv_sigma(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mu) * inv_sigma(i);
    }
    Matrix out = xhat;
    out.array().rowwise() *= gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    return t.push(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
                      Tape& t, const Matrix& g) {
                      if (t.needs_grad(gamma))
                          t.grad_buffer(gamma) += (g.array() * xhat.array()).colwise().sum().matrix();
                      if (t.needs_grad(beta)) t.grad_buffer(beta) += g.colwise().sum();
                      if (!t.needs_grad(x)) return;
                      Matrix dxhat = g;
                      dxhat.array().rowwise() *= gamma.value().row(0).array();
                      const double inv_n = 1.0 / static_cast<double>(g.cols());
                      Matrix& gx = t.grad_buffer(x);
                      for (Eigen::Index i = 0; i < g.rows(); ++i) {
                          const double m1 = dxhat.row(i).sum() * inv_n;
                          const double m2 = dxhat.row(i).dot(xhat.row(i)) * inv_n;
                          gx.row(i).array() +=
                              inv_sigma(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                      }
                  });
}

namespace {

void softmax_row_inplace(Eigen::Ref<RowVector> r) {
    const double m = r.maxCoeff();
    if (m == -std::numeric_limits<double>::infinity()) {
        r.setZero();
        return;
    }
    r = (r.array() - m).exp().matrix();
    r /= r.sum();
}

} // namespace

Var softmax_rows(Var x) {
    Tape& t = *x.tape();
    Matrix y = x.value();
    for (Eigen::Index i = 0; i < y.rows(); ++i) softmax_row_inplace(y.row(i));
    Matrix yc = y;
    return t.push(std::move(y), {x}, [x, y = std::move(yc)](Tape& t, const Matrix& g) {
        Matrix d = g;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            const double dot = g.row(i).dot(y.row(i));
            d.row(i) = (y.row(i).array() * (g.row(i).array() - dot)).matrix();
        }
        t.accumulate(x, d);
    });
}

Var gather_rows(Var table, const std::vector<int>& ids) {
    const Matrix& tv = table.value();
    Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tv.rows())
            throw InvalidArgument("gather_rows: id " + std::to_string(ids[i]) + " out of range");
        out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
    }
    Tape& t = *table.tape();
    return t.push(std::move(out), {table}, [table, ids](Tape& t, const Matrix& g) {
        Matrix& gt = t.grad_buffer(table);
        for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
    });
}

Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || count < 0 || begin + count > x.rows()) throw InvalidArgument("slice_rows: out of range");
    Tape& t = *x.tape();
    return t.push(x.value().middleRows(begin, count), {x}, [x, begin, count](Tape& t, const Matrix& g) {
        t.grad_buffer(x).middleRows(begin, count) += g;
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_rows: nothing to concatenate");
    const auto cols = parts.front().cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw InvalidArgument("concat_rows: column counts differ");
        rows += p.rows();
    }
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    Tape& t = *parts.front().tape();
    return t.push(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
        Eigen::Index r = 0;
        for (const auto& p : parts) {
            if (t.needs_grad(p)) t.grad_buffer(p) += g.middleRows(r, p.rows());
            r += p.rows();
        }
    });
}

Var max_rows(Var x, const std::vector<char>* valid) {
    const Matrix& xv = x.value();
    if (valid && static_cast<Eigen::Index>(valid->size()) != xv.rows())
        throw InvalidArgument("max_rows: mask length differs from row count");
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(xv.cols()), -1);
    Matrix out(1, xv.cols());
    for (Eigen::Index c = 0; c < xv.cols(); ++c) {
        double best = -std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < xv.rows(); ++r) {
            if (valid && !(*valid)[static_cast<std::size_t>(r)]) continue;
            if (arg[static_cast<std::size_t>(c)] < 0 || xv(r, c) > best) {
                best = xv(r, c);
                arg[static_cast<std::size_t>(c)] = r;
            }
        }
        if (arg[static_cast<std::size_t>(c)] < 0) throw InvalidArgument("max_rows: no valid rows");
        out(0, c) = best;
    }
    Tape& t = *x.tape();
    return t.push(std::move(out), {x}, [x, arg = std::move(arg)](Tape& t, const Matrix& g) {
        Matrix& gx = t.grad_buffer(x);
        for (std::size_t c = 0; c < arg.size(); ++c)
            gx(arg[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
    });
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw InvalidArgument("dropout rate must be < 1");
    std::bernoulli_distribution keep(1.0 - rate);
    Matrix mask(x.rows(), x.cols());
    const double s = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : 0.0;
    Tape& t = *x.tape();
    Matrix out = (x.value().array() * mask.array()).matrix();
    return t.push(std::move(out), {x}, [x, mask = std::move(mask)](Tape& t, const Matrix& g) {
        t.accumulate(x, (g.array() * mask.array()).matrix());
    });
}

Var lincomb(const std::vector<Var>& terms, const std::vector<double>& coeffs) {
    if (terms.empty() || terms.size() != coeffs.size()) throw InvalidArgument("lincomb: bad arguments");
    double v = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].rows() != 1 || terms[i].cols() != 1) throw InvalidArgument("lincomb: terms must be 1x1");
        v += coeffs[i] * terms[i].scalar();
    }
    Tape& t = *terms.front().tape();
    return t.push(Matrix::Constant(1, 1, v), terms, [terms, coeffs](Tape& t, const Matrix& g) {
        for (std::size_t i = 0; i < terms.size(); ++i)
            if (t.needs_grad(terms[i])) t.grad_buffer(terms[i])(0, 0) += coeffs[i] * g(0, 0);
    });
}

Var attention(Var q, Var k, Var v, int heads, const std::vector<char>* key_valid, bool causal) {
    const Eigen::Index d = q.cols();
    if (k.cols() != d || v.cols() != d || k.rows() != v.rows())
        throw InvalidArgument("attention: q/k/v shapes disagree");
    if (heads < 1 || d % heads != 0) throw InvalidArgument("attention: dim not divisible by heads");
    if (key_valid && static_cast<Eigen::Index>(key_valid->size()) != k.rows())
        throw InvalidArgument("attention: key mask length differs from key count");
    const Eigen::Index lq = q.rows();
    const Eigen::Index lk = k.rows();
    const Eigen::Index dh = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();

    std::vector<Matrix> probs(static_cast<std::size_t>(heads));
    Matrix out(lq, d);
    for (int h = 0; h < heads; ++h) {
        const auto c0 = h * dh;
        Matrix s = (q.value().middleCols(c0, dh) * k.value().middleCols(c0, dh).transpose()) * sc;
        for (Eigen::Index i = 0; i < lq; ++i) {
            for (Eigen::Index j = 0; j < lk; ++j) {
                if ((key_valid && !(*key_valid)[static_cast<std::size_t>(j)]) || (causal && j > i))
                    s(i, j) = neg_inf;
            }
            softmax_row_inplace(s.row(i));
        }
        out.middleCols(c0, dh).noalias() = s * v.value().middleCols(c0, dh);
        probs[static_cast<std::size_t>(h)] = std::move(s);
    }

    Tape& t = *q.tape();
    return t.push(std::move(out), {q, k, v},
                  [q, k, v, heads, dh, sc, probs = std::move(probs)](Tape& t, const Matrix& g) {
                      for (int h = 0; h < heads; ++h) {
                          const auto c0 = h * dh;
                          const Matrix& p = probs[static_cast<std::size_t>(h)];
                          const auto go = g.middleCols(c0, dh);
                          if (t.needs_grad(v))
                              t.grad_buffer(v).middleCols(c0, dh).noalias() += p.transpose() * go;
                          if (!t.needs_grad(q) && !t.needs_grad(k)) continue;
                          Matrix dp = go * v.value().middleCols(c0, dh).transpose();
                          for (Eigen::Index i = 0; i < dp.rows(); ++i) {
                              const double dot = dp.row(i).dot(p.row(i));
                              dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
                          }
                          if (t.needs_grad(q))
                              t.grad_buffer(q).middleCols(c0, dh).noalias() +=
                                  sc * dp * k.value().middleCols(c0, dh);
                          if (t.needs_grad(k))
                              t.grad_buffer(k).middleCols(c0, dh).noalias() +=
                                  sc * dp.transpose() * q.value().middleCols(c0, dh);
                      }
                  });
}

Var cross_entropy(Var logits, const std::vector<int>& targets) {
    const Matrix& z = logits.value();
    if (static_cast<Eigen::Index>(targets.size()) != z.rows())
        throw InvalidArgument("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                              std::to_string(z.rows()) + " rows");
    Matrix p = z;
    double total = 0.0;
    int n = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        softmax_row_inplace(p.row(i));
        const int tgt = targets[static_cast<std::size_t>(i)];
        if (tgt < 0) continue;
        if (tgt >= z.cols()) throw InvalidArgument("cross_entropy: target out of range");
        const double m = z.row(i).maxCoeff();
        const double lse = m + std::log((z.row(i).array() - m).exp().sum());
        total += lse - z(i, tgt);
        ++n;
    }
    if (n == 0) throw InvalidArgument("cross_entropy: no targets");
    Tape& t = *logits.tape();
    return t.push(Matrix::Constant(1, 1, total / n), {logits},
                  [logits, targets, n, p = std::move(p)](Tape& t, const Matrix& g) {
                      Matrix& gl = t.grad_buffer(logits);
                      const double s = g(0, 0) / n;
                      for (Eigen::Index i = 0; i < p.rows(); ++i) {
                          const int tgt = targets[static_cast<std::size_t>(i)];
                          if (tgt < 0) continue;
                          gl.row(i) += s * p.row(i);
                          gl(i, tgt) -= s;
                      }
                  });
}

} // namespace esc::ag
