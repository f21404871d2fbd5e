#pragma once
// Reverse-mode autodiff over dense tensors.
//
// A Tape records primitive operations in topological order as they execute.
// backward() replays the records in reverse, accumulating gradients into
// per-node buffers. Leaves either own their value (constants) or reference
// external storage (model parameters), so large parameter matrices are not
// copied into every graph.
//
// A tape and its tensors are a single-threaded unit of work; independent
// tapes may run on different threads.

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "intrasum/tensor.hpp"

namespace intrasum {

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  MatVec,
  MatVecT,
  Dot,
  Concat,
  StackRows,
  Slice,
  SliceRows,
  Softmax,
  LogSoftmax,
  Sigmoid,
  Tanh,
  Exp,
  Log,
  LogSigmoid,
  LogAddExp,
  Sum,
  Pick,
  GatherSum,
  EmbedRow,
  ClampMin,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::MatMul: return "matmul";
    case Op::MatVec: return "matvec";
    case Op::MatVecT: return "matvec_t";
    case Op::Dot: return "dot";
    case Op::Concat: return "concat";
    case Op::StackRows: return "stack_rows";
    case Op::Slice: return "slice";
    case Op::SliceRows: return "slice_rows";
    case Op::Softmax: return "softmax";
    case Op::LogSoftmax: return "log_softmax";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::LogSigmoid: return "logsigmoid";
    case Op::LogAddExp: return "logaddexp";
    case Op::Sum: return "sum";
    case Op::Pick: return "pick";
    case Op::GatherSum: return "gather_sum";
    case Op::EmbedRow: return "embed_row";
    case Op::ClampMin: return "clamp_min";
  }
  return "?";
}

class Tape {
 public:
  // Count of probability clamps applied by clamp_min; losses report it.
  int64_t clamp_events = 0;

  // ---- leaves ----

  Var leaf(Tensor value) {
    int32_t id = alloc();
    Node& n = node(id);
    n.op = Op::Leaf;
    n.external = nullptr;
    n.val = std::move(value);
    return Var{id};
  }

  Var constant(double x) { return leaf(Tensor::scalar(x)); }

  // Parameter leaf: the tensor stays in caller-owned storage.
  Var leaf_external(const Tensor* p) {
    if (p == nullptr)
      throw std::invalid_argument("Tape::leaf_external: null tensor");
    int32_t id = alloc();
    Node& n = node(id);
    n.op = Op::Leaf;
    n.external = p;
    return Var{id};
  }

  const Tensor& val(Var x) const {
    check_var(x);
    const Node& n = nodes_[static_cast<size_t>(x.id)];
    return n.external ? *n.external : n.val;
  }

  // ---- elementwise / scalar ----

  Var add(Var a, Var b) { return push2(Op::Add, a, b); }
  Var sub(Var a, Var b) { return push2(Op::Sub, a, b); }
  Var mul(Var a, Var b) { return push2(Op::Mul, a, b); }

  Var scale(Var a, double c) {
    Var out = push1(Op::Scale, a);
    node(out.id).c = c;
    recompute(out.id);
    return out;
  }

  Var neg(Var a) { return scale(a, -1.0); }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) { return push2(Op::MatMul, a, b); }
  Var matvec(Var m, Var x) { return push2(Op::MatVec, m, x); }
  // Transposed product m^T x without materializing the transpose.
  Var matvec_t(Var m, Var x) { return push2(Op::MatVecT, m, x); }
  Var dot(Var a, Var b) { return push2(Op::Dot, a, b); }

  // ---- structure ----

  Var concat(const std::vector<Var>& parts) {
    return push_many(Op::Concat, parts);
  }

  Var stack_rows(const std::vector<Var>& rows) {
    return push_many(Op::StackRows, rows);
  }

  Var slice(Var x, size_t start, size_t len) {
    Var out = push1(Op::Slice, x);
    node(out.id).idx.assign({static_cast<int64_t>(start),
                             static_cast<int64_t>(len)});
    recompute(out.id);
    return out;
  }

  Var slice_rows(Var m, size_t start, size_t nrows) {
    Var out = push1(Op::SliceRows, m);
    node(out.id).idx.assign({static_cast<int64_t>(start),
                             static_cast<int64_t>(nrows)});
    recompute(out.id);
    return out;
  }

  // ---- nonlinearities ----

  Var softmax(Var x) { return push1r(Op::Softmax, x); }
  Var log_softmax(Var x) { return push1r(Op::LogSoftmax, x); }
  Var sigmoid(Var x) { return push1r(Op::Sigmoid, x); }
  Var tanh(Var x) { return push1r(Op::Tanh, x); }
  Var exp(Var x) { return push1r(Op::Exp, x); }
  Var log(Var x) { return push1r(Op::Log, x); }
  Var logsigmoid(Var x) { return push1r(Op::LogSigmoid, x); }
  Var logaddexp(Var a, Var b) { return push2(Op::LogAddExp, a, b); }

  // ---- reductions / indexing ----

  Var sum(Var x) { return push1r(Op::Sum, x); }

  Var pick(Var x, size_t index) {
    Var out = push1(Op::Pick, x);
    node(out.id).idx.assign({static_cast<int64_t>(index)});
    recompute(out.id);
    return out;
  }

  Var gather_sum(Var x, const std::vector<int64_t>& indices) {
    Var out = push1(Op::GatherSum, x);
    node(out.id).idx = indices;
    recompute(out.id);
    return out;
  }

  Var embed_row(Var matrix, size_t row) {
    Var out = push1(Op::EmbedRow, matrix);
    node(out.id).idx.assign({static_cast<int64_t>(row)});
    recompute(out.id);
    return out;
  }

  Var clamp_min(Var x, double floor) {
    Var out = push1(Op::ClampMin, x);
    node(out.id).c = floor;
    recompute(out.id);
    return out;
  }

  // ---- engine ----

  // Reverse sweep from a scalar loss. Gradients of all reachable nodes are
  // available afterwards via grad(); unreachable leaves read back as zeros.
  void backward(Var loss) {
    check_var(loss);
    const Tensor& lv = val(loss);
    if (lv.size() != 1)
      throw std::invalid_argument(
          "Tape::backward: loss must be scalar, got shape " + lv.shape_str());
    grads_.resize(used_);
    grad_set_.assign(used_, 0);
    touch_grad(loss.id).v[0] = 1.0;
    for (int32_t i = loss.id; i >= 0; --i) {
      if (!grad_set_[static_cast<size_t>(i)]) continue;
      backward_node(i);
    }
  }

  bool has_grad(Var x) const {
    check_var(x);
    return static_cast<size_t>(x.id) < grad_set_.size() &&
           grad_set_[static_cast<size_t>(x.id)] != 0;
  }

  // Gradient of the last backward() w.r.t. x; zeros if x was not reached.
  Tensor grad(Var x) const {
    check_var(x);
    if (has_grad(x)) return grads_[static_cast<size_t>(x.id)];
    Tensor z;
    z.reshape_zero_like(val(x));
    return z;
  }

  size_t size() const { return used_; }

  // Drop all nodes but keep buffers for reuse by the next graph.
  void rewind() {
    used_ = 0;
    grad_set_.clear();
    clamp_events = 0;
  }

  // Recompute every non-leaf value from its recorded inputs and compare
  // bit-exactly against the stored value.
  bool verify_replay() {
    Tensor scratch;
    for (size_t i = 0; i < used_; ++i) {
      Node& n = nodes_[i];
      if (n.op == Op::Leaf) continue;
      scratch = n.val;
      recompute(static_cast<int32_t>(i));
      bool same = scratch.same_shape(n.val) &&
                  std::memcmp(scratch.v.data(), n.val.v.data(),
                              scratch.size() * sizeof(double)) == 0;
      if (!same) {
        n.val = scratch;
        return false;
      }
    }
    return true;
  }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::array<int32_t, 2> in{{-1, -1}};
    std::vector<int32_t> many;   // Concat / StackRows inputs
    std::vector<int64_t> idx;    // indices / slice bounds / embedding row
    double c = 0.0;              // Scale factor or ClampMin floor
    const Tensor* external = nullptr;
    Tensor val;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> grad_set_;
  size_t used_ = 0;

  Node& node(int32_t id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int32_t id) const { return nodes_[static_cast<size_t>(id)]; }

  const Tensor& value_of(int32_t id) const {
    const Node& n = node(id);
    return n.external ? *n.external : n.val;
  }

  void check_var(Var x) const {
    if (!x.valid() || static_cast<size_t>(x.id) >= used_)
      throw std::invalid_argument("Tape: variable does not belong to this tape");
  }

  int32_t alloc() {
    if (used_ == nodes_.size()) nodes_.emplace_back();
    Node& n = nodes_[used_];
    n.op = Op::Leaf;
    n.in = {-1, -1};
    n.many.clear();
    n.idx.clear();
    n.c = 0.0;
    n.external = nullptr;
    return static_cast<int32_t>(used_++);
  }

  Var push1(Op op, Var a) {
    check_var(a);
    int32_t id = alloc();
    Node& n = node(id);
    n.op = op;
    n.in[0] = a.id;
    return Var{id};
  }

  Var push1r(Op op, Var a) {
    Var out = push1(op, a);
    recompute(out.id);
    return out;
  }

  Var push2(Op op, Var a, Var b) {
    check_var(a);
    check_var(b);
    int32_t id = alloc();
    Node& n = node(id);
    n.op = op;
    n.in = {a.id, b.id};
    recompute(id);
    return Var{id};
  }

  Var push_many(Op op, const std::vector<Var>& xs) {
    if (xs.empty())
      throw std::invalid_argument(std::string(op_name(op)) +
                                  ": needs at least one input");
    for (Var x : xs) check_var(x);
    int32_t id = alloc();
    Node& n = node(id);
    n.op = op;
    n.many.reserve(xs.size());
    for (Var x : xs) n.many.push_back(x.id);
    recompute(id);
    return Var{id};
  }

  [[noreturn]] void shape_error(Op op, const std::string& detail) const {
    throw std::invalid_argument(std::string(op_name(op)) +
                                ": shape mismatch: " + detail);
  }

  void require_same_shape(Op op, const Tensor& a, const Tensor& b) const {
    if (!a.same_shape(b))
      shape_error(op, a.shape_str() + " vs " + b.shape_str());
  }

  void require_vec(Op op, const Tensor& t, const char* role) const {
    if (t.rank != 1)
      shape_error(op, std::string(role) + " must be rank-1, got " +
                          t.shape_str());
  }

  void require_mat(Op op, const Tensor& t, const char* role) const {
    if (t.rank != 2)
      shape_error(op, std::string(role) + " must be rank-2, got " +
                          t.shape_str());
  }

  // Forward kernel; also used by verify_replay().
  void recompute(int32_t id) {
    Node& n = node(id);
    Tensor& out = n.val;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        require_same_shape(n.op, a, b);
        out.reshape_zero_like(a);
        const size_t m = a.size();
        if (n.op == Op::Add)
          for (size_t i = 0; i < m; ++i) out.v[i] = a.v[i] + b.v[i];
        else if (n.op == Op::Sub)
          for (size_t i = 0; i < m; ++i) out.v[i] = a.v[i] - b.v[i];
        else
          for (size_t i = 0; i < m; ++i) out.v[i] = a.v[i] * b.v[i];
        break;
      }
      case Op::Scale: {
        const Tensor& a = value_of(n.in[0]);
        out.reshape_zero_like(a);
        for (size_t i = 0; i < a.size(); ++i) out.v[i] = a.v[i] * n.c;
        break;
      }
      case Op::MatMul: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        require_mat(Op::MatMul, a, "lhs");
        require_mat(Op::MatMul, b, "rhs");
        if (a.dim[1] != b.dim[0])
          shape_error(Op::MatMul, a.shape_str() + " x " + b.shape_str());
        const size_t m = a.dim[0], k = a.dim[1], p = b.dim[1];
        out.rank = 2;
        out.dim = {m, p};
        out.v.assign(m * p, 0.0);
        for (size_t i = 0; i < m; ++i)
          for (size_t kk = 0; kk < k; ++kk) {
            const double aik = a.v[i * k + kk];
            const double* brow = &b.v[kk * p];
            double* orow = &out.v[i * p];
            for (size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
          }
        break;
      }
      case Op::MatVec: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& x = value_of(n.in[1]);
        require_mat(Op::MatVec, a, "matrix");
        require_vec(Op::MatVec, x, "vector");
        if (a.dim[1] != x.dim[0])
          shape_error(Op::MatVec, a.shape_str() + " x " + x.shape_str());
        const size_t m = a.dim[0], k = a.dim[1];
        out.rank = 1;
        out.dim = {m, 0};
        out.v.assign(m, 0.0);
        for (size_t i = 0; i < m; ++i) {
          const double* arow = &a.v[i * k];
          double acc = 0.0;
          for (size_t j = 0; j < k; ++j) acc += arow[j] * x.v[j];
          out.v[i] = acc;
        }
        break;
      }
      case Op::MatVecT: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& x = value_of(n.in[1]);
        require_mat(Op::MatVecT, a, "matrix");
        require_vec(Op::MatVecT, x, "vector");
        if (a.dim[0] != x.dim[0])
          shape_error(Op::MatVecT, a.shape_str() + "^T x " + x.shape_str());
        const size_t m = a.dim[0], k = a.dim[1];
        out.rank = 1;
        out.dim = {k, 0};
        out.v.assign(k, 0.0);
        for (size_t i = 0; i < m; ++i) {
          const double xi = x.v[i];
          const double* arow = &a.v[i * k];
          for (size_t j = 0; j < k; ++j) out.v[j] += arow[j] * xi;
        }
        break;
      }
      case Op::Dot: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        require_vec(Op::Dot, a, "lhs");
        require_same_shape(Op::Dot, a, b);
        double acc = 0.0;
        for (size_t i = 0; i < a.size(); ++i) acc += a.v[i] * b.v[i];
        out.rank = 0;
        out.dim = {0, 0};
        out.v.assign(1, acc);
        break;
      }
      case Op::Concat: {
        size_t total = 0;
        for (int32_t in_id : n.many) {
          const Tensor& p = value_of(in_id);
          if (p.rank > 1) require_vec(Op::Concat, p, "part");
          total += p.size();
        }
        out.rank = 1;
        out.dim = {total, 0};
        out.v.resize(total);
        size_t pos = 0;
        for (int32_t in_id : n.many) {
          const Tensor& p = value_of(in_id);
          for (size_t i = 0; i < p.size(); ++i) out.v[pos++] = p.v[i];
        }
        break;
      }
      case Op::StackRows: {
        const Tensor& first = value_of(n.many[0]);
        require_vec(Op::StackRows, first, "row");
        const size_t cols = first.dim[0];
        for (int32_t in_id : n.many) {
          const Tensor& r = value_of(in_id);
          require_vec(Op::StackRows, r, "row");
          if (r.dim[0] != cols)
            shape_error(Op::StackRows,
                        "rows " + first.shape_str() + " vs " + r.shape_str());
        }
        out.rank = 2;
        out.dim = {n.many.size(), cols};
        out.v.resize(n.many.size() * cols);
        for (size_t r = 0; r < n.many.size(); ++r) {
          const Tensor& row = value_of(n.many[r]);
          for (size_t j = 0; j < cols; ++j) out.v[r * cols + j] = row.v[j];
        }
        break;
      }
      case Op::Slice: {
        const Tensor& x = value_of(n.in[0]);
        require_vec(Op::Slice, x, "input");
        const size_t start = static_cast<size_t>(n.idx[0]);
        const size_t len = static_cast<size_t>(n.idx[1]);
        if (start + len > x.dim[0])
          shape_error(Op::Slice, "range [" + std::to_string(start) + ", +" +
                                     std::to_string(len) + ") out of " +
                                     x.shape_str());
        out.rank = 1;
        out.dim = {len, 0};
        out.v.assign(x.v.begin() + static_cast<long>(start),
                     x.v.begin() + static_cast<long>(start + len));
        break;
      }
      case Op::SliceRows: {
        const Tensor& x = value_of(n.in[0]);
        require_mat(Op::SliceRows, x, "input");
        const size_t start = static_cast<size_t>(n.idx[0]);
        const size_t nr = static_cast<size_t>(n.idx[1]);
        if (start + nr > x.dim[0])
          shape_error(Op::SliceRows, "rows [" + std::to_string(start) + ", +" +
                                         std::to_string(nr) + ") out of " +
                                         x.shape_str());
        const size_t cols = x.dim[1];
        out.rank = 2;
        out.dim = {nr, cols};
        out.v.assign(x.v.begin() + static_cast<long>(start * cols),
                     x.v.begin() + static_cast<long>((start + nr) * cols));
        break;
      }
      case Op::Softmax:
      case Op::LogSoftmax: {
        const Tensor& x = value_of(n.in[0]);
        require_vec(n.op, x, "input");
        if (x.size() == 0) shape_error(n.op, "empty input");
        out.reshape_zero_like(x);
        double mx = x.v[0];
        for (double e : x.v) mx = std::max(mx, e);
        double z = 0.0;
        for (size_t i = 0; i < x.size(); ++i) z += std::exp(x.v[i] - mx);
        const double logz = std::log(z) + mx;
        if (n.op == Op::Softmax)
          for (size_t i = 0; i < x.size(); ++i)
            out.v[i] = std::exp(x.v[i] - logz);
        else
          for (size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] - logz;
        break;
      }
      case Op::Sigmoid: {
        const Tensor& x = value_of(n.in[0]);
        out.reshape_zero_like(x);
        for (size_t i = 0; i < x.size(); ++i) {
          const double t = x.v[i];
          out.v[i] = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t))
                              : std::exp(t) / (1.0 + std::exp(t));
        }
        break;
      }
      case Op::Tanh: {
        const Tensor& x = value_of(n.in[0]);
        out.reshape_zero_like(x);
        for (size_t i = 0; i < x.size(); ++i) out.v[i] = std::tanh(x.v[i]);
        break;
      }
      case Op::Exp: {
        const Tensor& x = value_of(n.in[0]);
        out.reshape_zero_like(x);
        for (size_t i = 0; i < x.size(); ++i) out.v[i] = std::exp(x.v[i]);
        break;
      }
      case Op::Log: {
        const Tensor& x = value_of(n.in[0]);
        out.reshape_zero_like(x);
        for (size_t i = 0; i < x.size(); ++i) out.v[i] = std::log(x.v[i]);
        break;
      }
      case Op::LogSigmoid: {
        const Tensor& x = value_of(n.in[0]);
        out.reshape_zero_like(x);
        for (size_t i = 0; i < x.size(); ++i) {
          const double t = x.v[i];
          out.v[i] = t >= 0.0 ? -std::log1p(std::exp(-t))
                              : t - std::log1p(std::exp(t));
        }
        break;
      }
      case Op::LogAddExp: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        require_same_shape(Op::LogAddExp, a, b);
        out.reshape_zero_like(a);
        for (size_t i = 0; i < a.size(); ++i) {
          const double hi = std::max(a.v[i], b.v[i]);
          const double lo = std::min(a.v[i], b.v[i]);
          out.v[i] = hi + std::log1p(std::exp(lo - hi));
        }
        break;
      }
      case Op::Sum: {
        const Tensor& x = value_of(n.in[0]);
        double acc = 0.0;
        for (double e : x.v) acc += e;
        out.rank = 0;
        out.dim = {0, 0};
        out.v.assign(1, acc);
        break;
      }
      case Op::Pick: {
        const Tensor& x = value_of(n.in[0]);
        const size_t i = static_cast<size_t>(n.idx[0]);
        if (i >= x.size())
          shape_error(Op::Pick, "index " + std::to_string(i) + " out of " +
                                    x.shape_str());
        out.rank = 0;
        out.dim = {0, 0};
        out.v.assign(1, x.v[i]);
        break;
      }
      case Op::GatherSum: {
        const Tensor& x = value_of(n.in[0]);
        double acc = 0.0;
        for (int64_t i : n.idx) {
          if (i < 0 || static_cast<size_t>(i) >= x.size())
            shape_error(Op::GatherSum, "index " + std::to_string(i) +
                                           " out of " + x.shape_str());
          acc += x.v[static_cast<size_t>(i)];
        }
        out.rank = 0;
        out.dim = {0, 0};
        out.v.assign(1, acc);
        break;
      }
      case Op::EmbedRow: {
        const Tensor& w = value_of(n.in[0]);
        require_mat(Op::EmbedRow, w, "table");
        const size_t row = static_cast<size_t>(n.idx[0]);
        if (row >= w.dim[0])
          shape_error(Op::EmbedRow, "row " + std::to_string(row) + " out of " +
                                        w.shape_str());
        const size_t cols = w.dim[1];
        out.rank = 1;
        out.dim = {cols, 0};
        out.v.assign(w.v.begin() + static_cast<long>(row * cols),
                     w.v.begin() + static_cast<long>((row + 1) * cols));
        break;
      }
      case Op::ClampMin: {
        const Tensor& x = value_of(n.in[0]);
        out.reshape_zero_like(x);
        for (size_t i = 0; i < x.size(); ++i) {
          if (x.v[i] < n.c) {
            out.v[i] = n.c;
            ++clamp_events;
          } else {
            out.v[i] = x.v[i];
          }
        }
        break;
      }
    }
    if (n.op != Op::Leaf) out.maybe_check(op_name(n.op));
  }

  Tensor& touch_grad(int32_t id) {
    Tensor& g = grads_[static_cast<size_t>(id)];
    if (!grad_set_[static_cast<size_t>(id)]) {
      g.reshape_zero_like(value_of(id));
      grad_set_[static_cast<size_t>(id)] = 1;
    }
    return g;
  }

  void backward_node(int32_t id) {
    Node& n = node(id);
    if (n.op == Op::Leaf) return;
    const Tensor& g = grads_[static_cast<size_t>(id)];
    const Tensor& out = n.val;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add: {
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gb = touch_grad(n.in[1]);
        for (size_t i = 0; i < g.size(); ++i) {
          ga.v[i] += g.v[i];
          gb.v[i] += g.v[i];
        }
        break;
      }
      case Op::Sub: {
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gb = touch_grad(n.in[1]);
        for (size_t i = 0; i < g.size(); ++i) {
          ga.v[i] += g.v[i];
          gb.v[i] -= g.v[i];
        }
        break;
      }
      case Op::Mul: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gb = touch_grad(n.in[1]);
        for (size_t i = 0; i < g.size(); ++i) {
          ga.v[i] += g.v[i] * b.v[i];
          gb.v[i] += g.v[i] * a.v[i];
        }
        break;
      }
      case Op::Scale: {
        Tensor& ga = touch_grad(n.in[0]);
        for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * n.c;
        break;
      }
      case Op::MatMul: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gb = touch_grad(n.in[1]);
        const size_t m = a.dim[0], k = a.dim[1], p = b.dim[1];
        // dA += G B^T
        for (size_t i = 0; i < m; ++i)
          for (size_t j = 0; j < k; ++j) {
            const double* grow = &g.v[i * p];
            const double* brow = &b.v[j * p];
            double acc = 0.0;
            for (size_t t = 0; t < p; ++t) acc += grow[t] * brow[t];
            ga.v[i * k + j] += acc;
          }
        // dB += A^T G
        for (size_t i = 0; i < m; ++i) {
          const double* arow = &a.v[i * k];
          const double* grow = &g.v[i * p];
          for (size_t j = 0; j < k; ++j) {
            double* gbrow = &gb.v[j * p];
            const double aij = arow[j];
            for (size_t t = 0; t < p; ++t) gbrow[t] += aij * grow[t];
          }
        }
        break;
      }
      case Op::MatVec: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& x = value_of(n.in[1]);
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gx = touch_grad(n.in[1]);
        const size_t m = a.dim[0], k = a.dim[1];
        for (size_t i = 0; i < m; ++i) {
          const double gi = g.v[i];
          const double* arow = &a.v[i * k];
          double* garow = &ga.v[i * k];
          for (size_t j = 0; j < k; ++j) {
            garow[j] += gi * x.v[j];
            gx.v[j] += gi * arow[j];
          }
        }
        break;
      }
      case Op::MatVecT: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& x = value_of(n.in[1]);
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gx = touch_grad(n.in[1]);
        const size_t m = a.dim[0], k = a.dim[1];
        // out = A^T x; dA += x g^T, dx += A g
        for (size_t i = 0; i < m; ++i) {
          const double xi = x.v[i];
          const double* arow = &a.v[i * k];
          double* garow = &ga.v[i * k];
          double acc = 0.0;
          for (size_t j = 0; j < k; ++j) {
            garow[j] += xi * g.v[j];
            acc += arow[j] * g.v[j];
          }
          gx.v[i] += acc;
        }
        break;
      }
      case Op::Dot: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gb = touch_grad(n.in[1]);
        const double gs = g.v[0];
        for (size_t i = 0; i < a.size(); ++i) {
          ga.v[i] += gs * b.v[i];
          gb.v[i] += gs * a.v[i];
        }
        break;
      }
      case Op::Concat: {
        size_t pos = 0;
        for (int32_t in_id : n.many) {
          Tensor& gp = touch_grad(in_id);
          for (size_t i = 0; i < gp.size(); ++i) gp.v[i] += g.v[pos++];
        }
        break;
      }
      case Op::StackRows: {
        const size_t cols = out.dim[1];
        for (size_t r = 0; r < n.many.size(); ++r) {
          Tensor& gr = touch_grad(n.many[r]);
          for (size_t j = 0; j < cols; ++j) gr.v[j] += g.v[r * cols + j];
        }
        break;
      }
      case Op::Slice: {
        Tensor& gx = touch_grad(n.in[0]);
        const size_t start = static_cast<size_t>(n.idx[0]);
        for (size_t i = 0; i < out.size(); ++i) gx.v[start + i] += g.v[i];
        break;
      }
      case Op::SliceRows: {
        Tensor& gx = touch_grad(n.in[0]);
        const size_t cols = out.dim[1];
        const size_t start = static_cast<size_t>(n.idx[0]);
        for (size_t i = 0; i < out.size(); ++i)
          gx.v[start * cols + i] += g.v[i];
        break;
      }
      case Op::Softmax: {
        Tensor& gx = touch_grad(n.in[0]);
        double inner = 0.0;
        for (size_t i = 0; i < out.size(); ++i) inner += g.v[i] * out.v[i];
        for (size_t i = 0; i < out.size(); ++i)
          gx.v[i] += out.v[i] * (g.v[i] - inner);
        break;
      }
      case Op::LogSoftmax: {
        Tensor& gx = touch_grad(n.in[0]);
        double gsum = 0.0;
        for (size_t i = 0; i < out.size(); ++i) gsum += g.v[i];
        for (size_t i = 0; i < out.size(); ++i)
          gx.v[i] += g.v[i] - std::exp(out.v[i]) * gsum;
        break;
      }
      case Op::Sigmoid: {
        Tensor& gx = touch_grad(n.in[0]);
        for (size_t i = 0; i < out.size(); ++i)
          gx.v[i] += g.v[i] * out.v[i] * (1.0 - out.v[i]);
        break;
      }
      case Op::Tanh: {
        Tensor& gx = touch_grad(n.in[0]);
        for (size_t i = 0; i < out.size(); ++i)
          gx.v[i] += g.v[i] * (1.0 - out.v[i] * out.v[i]);
        break;
      }
      case Op::Exp: {
        Tensor& gx = touch_grad(n.in[0]);
        for (size_t i = 0; i < out.size(); ++i)
          gx.v[i] += g.v[i] * out.v[i];
        break;
      }
      case Op::Log: {
        const Tensor& x = value_of(n.in[0]);
        Tensor& gx = touch_grad(n.in[0]);
        for (size_t i = 0; i < out.size(); ++i)
          gx.v[i] += g.v[i] / x.v[i];
        break;
      }
      case Op::LogSigmoid: {
        const Tensor& x = value_of(n.in[0]);
        Tensor& gx = touch_grad(n.in[0]);
        for (size_t i = 0; i < out.size(); ++i) {
          const double t = -x.v[i];
          const double sneg = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t))
                                       : std::exp(t) / (1.0 + std::exp(t));
          gx.v[i] += g.v[i] * sneg;  // d/dx log sigmoid(x) = sigmoid(-x)
        }
        break;
      }
      case Op::LogAddExp: {
        const Tensor& a = value_of(n.in[0]);
        const Tensor& b = value_of(n.in[1]);
        Tensor& ga = touch_grad(n.in[0]);
        Tensor& gb = touch_grad(n.in[1]);
        for (size_t i = 0; i < out.size(); ++i) {
          ga.v[i] += g.v[i] * std::exp(a.v[i] - out.v[i]);
          gb.v[i] += g.v[i] * std::exp(b.v[i] - out.v[i]);
        }
        break;
      }
      case Op::Sum: {
        Tensor& gx = touch_grad(n.in[0]);
        const double gs = g.v[0];
        for (size_t i = 0; i < gx.size(); ++i) gx.v[i] += gs;
        break;
      }
      case Op::Pick: {
        Tensor& gx = touch_grad(n.in[0]);
        gx.v[static_cast<size_t>(n.idx[0])] += g.v[0];
        break;
      }
      case Op::GatherSum: {
        Tensor& gx = touch_grad(n.in[0]);
        for (int64_t i : n.idx) gx.v[static_cast<size_t>(i)] += g.v[0];
        break;
      }
      case Op::EmbedRow: {
        Tensor& gw = touch_grad(n.in[0]);
        const size_t cols = out.dim[0];
        const size_t row = static_cast<size_t>(n.idx[0]);
        for (size_t j = 0; j < cols; ++j) gw.v[row * cols + j] += g.v[j];
        break;
      }
      case Op::ClampMin: {
        const Tensor& x = value_of(n.in[0]);
        Tensor& gx = touch_grad(n.in[0]);
        for (size_t i = 0; i < out.size(); ++i)
          if (x.v[i] >= n.c) gx.v[i] += g.v[i];
        break;
      }
    }
  }
};

}  // namespace intrasum
