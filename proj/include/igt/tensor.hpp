#pragma once

// Dense 64-bit tensors with tape-based reverse-mode differentiation.
// The tape is rebuilt on every forward pass (define-by-run); ops record
// themselves on the active tape whenever an input carries gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace igt {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct TensorData {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation

  void accumulate_grad(const double* g, std::size_t n) {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) grad[i] += g[i];
  }
  void accumulate_grad_at(std::size_t off, double g) {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    grad[off] += g;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return Tensor(std::move(shape), {}, false, true);
  }
  static Tensor full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.d_->values.begin(), t.d_->values.end(), v);
    return t;
  }
  static Tensor from(Shape shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size())
      throw TensorError("tensor data length " + std::to_string(values.size()) +
                        " does not match shape " + shape_str(shape));
    return Tensor(std::move(shape), std::move(values), false, false);
  }
  static Tensor scalar(double v) { return from({1}, {v}); }
  // Trainable leaf.
  static Tensor param(Shape shape, std::vector<double> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.d_->requires_grad = true;
    return t;
  }

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  std::size_t ndim() const { return d_->shape.size(); }
  std::size_t numel() const { return d_->values.size(); }
  std::size_t rows() const { return d_->shape.empty() ? 1 : d_->shape[0]; }
  std::size_t cols() const {
    if (d_->shape.size() == 2) return d_->shape[1];
    if (d_->shape.size() == 1) return d_->shape[0];
    throw TensorError("cols() needs a rank-1/2 tensor, got " + shape_str(d_->shape));
  }

  std::span<const double> values() const { return d_->values; }
  // Mutation is reserved for optimizer steps and embedding-state writes,
  // which happen strictly between tapes.
  std::span<double> mutable_values() { return d_->values; }

  bool requires_grad() const { return d_->requires_grad; }
  bool has_grad() const { return !d_->grad.empty(); }
  std::span<const double> grad() const {
    if (d_->grad.empty()) throw TensorError("tensor has no gradient");
    return d_->grad;
  }
  void ensure_zero_grad() { d_->grad.assign(d_->values.size(), 0.0); }
  void drop_grad() { d_->grad.clear(); }

  double item() const {
    if (numel() != 1) throw TensorError("item() on non-scalar tensor " + shape_str(d_->shape));
    return d_->values[0];
  }
  double at(std::size_t r, std::size_t c) const { return d_->values[r * cols() + c]; }

  Tensor clone_detached() const {
    return Tensor(d_->shape, d_->values, false, false);
  }

  std::shared_ptr<detail::TensorData> data_ptr() const { return d_; }

 private:
  Tensor(Shape shape, std::vector<double> values, bool requires_grad, bool zero_fill)
      : d_(std::make_shared<detail::TensorData>()) {
    d_->shape = std::move(shape);
    if (zero_fill)
      d_->values.assign(shape_numel(d_->shape), 0.0);
    else
      d_->values = std::move(values);
    d_->requires_grad = requires_grad;
  }

  friend class Tape;
  friend Tensor make_op_output(Shape, std::vector<double>, bool);

  std::shared_ptr<detail::TensorData> d_;
};

inline Tensor make_op_output(Shape shape, std::vector<double> values, bool requires_grad) {
  Tensor t = Tensor::from(std::move(shape), std::move(values));
  t.d_->requires_grad = requires_grad;
  return t;
}

// Append-only record of primitive applications. Nodes are pushed in forward
// (topological) order; backward walks them in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  struct Node {
    std::shared_ptr<detail::TensorData> out;
    std::function<void(const std::vector<double>&)> backward;
  };

  static Tape*& active() {
    thread_local Tape* t = nullptr;
    return t;
  }

  void record(std::shared_ptr<detail::TensorData> out,
              std::function<void(const std::vector<double>&)> backward) {
    nodes_.push_back({std::move(out), std::move(backward)});
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and propagates through the recorded nodes.
  void backward(const Tensor& loss) {
    if (loss.numel() != 1)
      throw TensorError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    if (nodes_.empty() || nodes_.back().out != loss.data_ptr()) {
      bool found = false;
      for (const auto& n : nodes_)
        if (n.out == loss.data_ptr()) { found = true; break; }
      if (!found) throw TensorError("backward(): loss was not produced on this tape");
    }
    loss.data_ptr()->accumulate_grad_at(0, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->out->grad.empty()) continue;
      it->backward(it->out->grad);
    }
  }

 private:
  std::vector<Node> nodes_;
};

// Installs a tape as the thread's active tape for its lifetime.
struct TapeScope {
  explicit TapeScope(Tape& t) : prev_(Tape::active()) { Tape::active() = &t; }
  ~TapeScope() { Tape::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

namespace detail {

inline bool tracing(std::initializer_list<const Tensor*> ins) {
  if (!Tape::active()) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

template <typename Fn>
void record_if(bool traced, const Tensor& out, Fn&& fn) {
  if (traced) Tape::active()->record(out.data_ptr(), std::forward<Fn>(fn));
}

inline void check_rank2(const Tensor& t, const char* what) {
  if (t.ndim() != 2)
    throw TensorError(std::string(what) + " needs a rank-2 tensor, got " + shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_rank2(a, "matmul lhs");
  detail::check_rank2(b, "matmul rhs");
  const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw TensorError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* po = out.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      if (av == 0.0) continue;
      const double* pbr = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) po[j] += av * pbr[j];
    }
  }
  const bool traced = detail::tracing({&a, &b});
  Tensor c = make_op_output({m, n}, std::move(out), traced);
  detail::record_if(traced, c, [ad = a.data_ptr(), bd = b.data_ptr(), m, k, n](const std::vector<double>& g) {
    if (ad->requires_grad) {
      if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
      const double* pb = bd->values.data();
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
          double s = 0.0;
          const double* pg = g.data() + i * n;
          const double* pbr = pb + kk * n;
          for (std::size_t j = 0; j < n; ++j) s += pg[j] * pbr[j];
          ad->grad[i * k + kk] += s;
        }
    }
    if (bd->requires_grad) {
      if (bd->grad.empty()) bd->grad.assign(bd->values.size(), 0.0);
      const double* pa = ad->values.data();
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
      for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(k); ++kk) {
        double* pgb = bd->grad.data() + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
          const double av = pa[i * k + kk];
          if (av == 0.0) continue;
          const double* pg = g.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) pgb[j] += av * pg[j];
        }
      }
    }
  });
  return c;
}

namespace detail {

enum class BinOp { Add, Sub, Mul };

// Elementwise binary op; rhs may be rank-1 matching lhs columns, in which
// case it broadcasts across rows.
inline Tensor binary_ew(const Tensor& a, const Tensor& b, BinOp op) {
  const bool bcast = (b.ndim() == 1 && a.ndim() == 2 && b.shape()[0] == a.shape()[1]);
  if (!bcast && a.shape() != b.shape())
    throw TensorError("elementwise shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t n = a.numel();
  const std::size_t c = bcast ? a.shape()[1] : 0;
  std::vector<double> out(n);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = bcast ? pb[i % c] : pb[i];
    switch (op) {
      case BinOp::Add: out[i] = pa[i] + bv; break;
      case BinOp::Sub: out[i] = pa[i] - bv; break;
      case BinOp::Mul: out[i] = pa[i] * bv; break;
    }
  }
  const bool traced = tracing({&a, &b});
  Tensor r = make_op_output(a.shape(), std::move(out), traced);
  record_if(traced, r, [ad = a.data_ptr(), bd = b.data_ptr(), op, bcast, c, n](const std::vector<double>& g) {
    if (ad->requires_grad) {
      if (ad->grad.empty()) ad->grad.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double bv = (op == BinOp::Mul) ? (bcast ? bd->values[i % c] : bd->values[i]) : 0.0;
        switch (op) {
          case BinOp::Add:
          case BinOp::Sub: ad->grad[i] += g[i]; break;
          case BinOp::Mul: ad->grad[i] += g[i] * bv; break;
        }
      }
    }
    if (bd->requires_grad) {
      if (bd->grad.empty()) bd->grad.assign(bd->values.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t bi = bcast ? i % c : i;
        switch (op) {
          case BinOp::Add: bd->grad[bi] += g[i]; break;
          case BinOp::Sub: bd->grad[bi] -= g[i]; break;
          case BinOp::Mul: bd->grad[bi] += g[i] * ad->values[i]; break;
        }
      }
    }
  });
  return r;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary_ew(a, b, detail::BinOp::Add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary_ew(a, b, detail::BinOp::Sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary_ew(a, b, detail::BinOp::Mul); }

inline Tensor scale(const Tensor& a, double c) {
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[i] * c;
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output(a.shape(), std::move(out), traced);
  detail::record_if(traced, r, [ad = a.data_ptr(), c, n](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) ad->grad[i] += g[i] * c;
  });
  return r;
}

namespace detail {

template <typename F, typename DF>
Tensor unary_ew(const Tensor& a, F f, DF df_from_xy) {
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a.values()[i]);
  const bool traced = tracing({&a});
  Tensor r = make_op_output(a.shape(), std::move(out), traced);
  record_if(traced, r, [ad = a.data_ptr(), rd = r.data_ptr(), df_from_xy, n](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      ad->grad[i] += g[i] * df_from_xy(ad->values[i], rd->values[i]);
  });
  return r;
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_ew(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}
inline Tensor tanh(const Tensor& a) {
  return detail::unary_ew(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}
inline Tensor relu(const Tensor& a) {
  return detail::unary_ew(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}
inline Tensor abs(const Tensor& a) {
  return detail::unary_ew(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw TensorError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    detail::check_rank2(p, "concat_cols input");
    if (p.rows() != m)
      throw TensorError("concat_cols row mismatch: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    total += p.shape()[1];
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t c = p.shape()[1];
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.values().data() + i * c, c, out.data() + i * total + off);
    off += c;
  }
  bool traced = false;
  if (Tape::active())
    for (const Tensor& p : parts)
      if (p.requires_grad()) { traced = true; break; }
  Tensor r = make_op_output({m, total}, std::move(out), traced);
  if (traced) {
    std::vector<std::shared_ptr<detail::TensorData>> ds;
    ds.reserve(parts.size());
    for (const Tensor& p : parts) ds.push_back(p.data_ptr());
    Tape::active()->record(r.data_ptr(), [ds, m, total](const std::vector<double>& g) {
      std::size_t off = 0;
      for (const auto& d : ds) {
        const std::size_t c = d->shape[1];
        if (d->requires_grad) {
          if (d->grad.empty()) d->grad.assign(d->values.size(), 0.0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) d->grad[i * c + j] += g[i * total + off + j];
        }
        off += c;
      }
    });
  }
  return r;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) { return concat_cols(std::vector<Tensor>{a, b}); }

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw TensorError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    detail::check_rank2(p, "concat_rows input");
    if (p.shape()[1] != c)
      throw TensorError("concat_rows column mismatch: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    total += p.shape()[0];
  }
  std::vector<double> out;
  out.reserve(total * c);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  bool traced = false;
  if (Tape::active())
    for (const Tensor& p : parts)
      if (p.requires_grad()) { traced = true; break; }
  Tensor r = make_op_output({total, c}, std::move(out), traced);
  if (traced) {
    std::vector<std::shared_ptr<detail::TensorData>> ds;
    ds.reserve(parts.size());
    for (const Tensor& p : parts) ds.push_back(p.data_ptr());
    Tape::active()->record(r.data_ptr(), [ds](const std::vector<double>& g) {
      std::size_t off = 0;
      for (const auto& d : ds) {
        const std::size_t n = d->values.size();
        if (d->requires_grad) {
          if (d->grad.empty()) d->grad.assign(n, 0.0);
          for (std::size_t i = 0; i < n; ++i) d->grad[i] += g[off + i];
        }
        off += n;
      }
    });
  }
  return r;
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) { return concat_rows(std::vector<Tensor>{a, b}); }

inline Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  detail::check_rank2(a, "slice_rows");
  const std::size_t m = a.shape()[0], c = a.shape()[1];
  if (r0 > r1 || r1 > m)
    throw TensorError("slice_rows range [" + std::to_string(r0) + "," + std::to_string(r1) +
                      ") out of bounds for " + shape_str(a.shape()));
  const std::size_t k = r1 - r0;
  std::vector<double> out(a.values().begin() + r0 * c, a.values().begin() + r1 * c);
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({k, c}, std::move(out), traced);
  detail::record_if(traced, r, [ad = a.data_ptr(), r0, k, c](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    for (std::size_t i = 0; i < k * c; ++i) ad->grad[r0 * c + i] += g[i];
  });
  return r;
}

inline Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  detail::check_rank2(a, "slice_cols");
  const std::size_t m = a.shape()[0], c = a.shape()[1];
  if (c0 > c1 || c1 > c)
    throw TensorError("slice_cols range [" + std::to_string(c0) + "," + std::to_string(c1) +
                      ") out of bounds for " + shape_str(a.shape()));
  const std::size_t k = c1 - c0;
  std::vector<double> out(m * k);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.values().data() + i * c + c0, k, out.data() + i * k);
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({m, k}, std::move(out), traced);
  detail::record_if(traced, r, [ad = a.data_ptr(), m, c, c0, k](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) ad->grad[i * c + c0 + j] += g[i * k + j];
  });
  return r;
}

inline Tensor gather_rows(const Tensor& a, std::vector<std::size_t> idx) {
  detail::check_rank2(a, "gather_rows");
  const std::size_t m = a.shape()[0], c = a.shape()[1];
  for (std::size_t i : idx)
    if (i >= m) throw TensorError("gather_rows index " + std::to_string(i) + " out of bounds for " + shape_str(a.shape()));
  std::vector<double> out(idx.size() * c);
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(a.values().data() + idx[r] * c, c, out.data() + r * c);
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({idx.size(), c}, std::move(out), traced);
  detail::record_if(traced, r, [ad = a.data_ptr(), idx = std::move(idx), c](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    for (std::size_t r = 0; r < idx.size(); ++r)  // serial: indices may repeat
      for (std::size_t j = 0; j < c; ++j) ad->grad[idx[r] * c + j] += g[r * c + j];
  });
  return r;
}

inline Tensor repeat_rows(const Tensor& a, std::size_t n) {
  detail::check_rank2(a, "repeat_rows");
  if (a.shape()[0] != 1) throw TensorError("repeat_rows needs a 1-row tensor, got " + shape_str(a.shape()));
  const std::size_t c = a.shape()[1];
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(a.values().data(), c, out.data() + i * c);
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({n, c}, std::move(out), traced);
  detail::record_if(traced, r, [ad = a.data_ptr(), n, c](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) ad->grad[j] += g[i * c + j];
  });
  return r;
}

// Row-interleaves k same-shaped matrices: out[b*k + j] = inputs[j].row(b).
inline Tensor interleave_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw TensorError("interleave_rows: no inputs");
  const std::size_t b = parts[0].rows(), c = parts[0].cols(), k = parts.size();
  for (const Tensor& p : parts) {
    detail::check_rank2(p, "interleave_rows input");
    if (p.shape() != parts[0].shape())
      throw TensorError("interleave_rows shape mismatch: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
  }
  std::vector<double> out(b * k * c);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < b; ++i)
      std::copy_n(parts[j].values().data() + i * c, c, out.data() + (i * k + j) * c);
  bool traced = false;
  if (Tape::active())
    for (const Tensor& p : parts)
      if (p.requires_grad()) { traced = true; break; }
  Tensor r = make_op_output({b * k, c}, std::move(out), traced);
  if (traced) {
    std::vector<std::shared_ptr<detail::TensorData>> ds;
    for (const Tensor& p : parts) ds.push_back(p.data_ptr());
    Tape::active()->record(r.data_ptr(), [ds, b, c, k](const std::vector<double>& g) {
      for (std::size_t j = 0; j < k; ++j) {
        auto& d = ds[j];
        if (!d->requires_grad) continue;
        if (d->grad.empty()) d->grad.assign(d->values.size(), 0.0);
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t jj = 0; jj < c; ++jj) d->grad[i * c + jj] += g[(i * k + j) * c + jj];
      }
    });
  }
  return r;
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({1}, {s}, traced);
  detail::record_if(traced, r, [ad = a.data_ptr()](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    for (double& gv : ad->grad) gv += g[0];
  });
  return r;
}

inline Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw TensorError("mean of empty tensor");
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({1}, {s * inv}, traced);
  detail::record_if(traced, r, [ad = a.data_ptr(), inv](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    for (double& gv : ad->grad) gv += g[0] * inv;
  });
  return r;
}

// Softmax over the last axis of a rank-2 tensor (each row sums to 1).
inline Tensor softmax(const Tensor& a) {
  detail::check_rank2(a, "softmax");
  const std::size_t m = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = a.values().data() + i * c;
    double* y = out.data() + i * c;
    double mx = x[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    const double inv = 1.0 / z;
    for (std::size_t j = 0; j < c; ++j) y[j] *= inv;
  }
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({m, c}, std::move(out), traced);
  detail::record_if(traced, r, [ad = a.data_ptr(), rd = r.data_ptr(), m, c](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = rd->values.data() + i * c;
      const double* gr = g.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gr[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) ad->grad[i * c + j] += y[j] * (gr[j] - dot);
    }
  });
  return r;
}

// Row-wise normalization to zero mean / unit variance (no affine part).
inline Tensor layer_norm(const Tensor& a, double eps = 1e-5) {
  detail::check_rank2(a, "layer_norm");
  const std::size_t m = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(m * c);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = a.values().data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(c);
    const double s = 1.0 / std::sqrt(var + eps);
    inv_std[i] = s;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (x[j] - mu) * s;
  }
  const bool traced = detail::tracing({&a});
  Tensor r = make_op_output({m, c}, std::move(out), traced);
  detail::record_if(traced, r,
                    [ad = a.data_ptr(), rd = r.data_ptr(), inv_std = std::move(inv_std), m, c](const std::vector<double>& g) {
    if (!ad->requires_grad) return;
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = rd->values.data() + i * c;
      const double* gr = g.data() + i * c;
      double gmean = 0.0, gymean = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        gmean += gr[j];
        gymean += gr[j] * y[j];
      }
      gmean /= static_cast<double>(c);
      gymean /= static_cast<double>(c);
      for (std::size_t j = 0; j < c; ++j)
        ad->grad[i * c + j] += inv_std[i] * (gr[j] - gmean - y[j] * gymean);
    }
  });
  return r;
}

inline bool all_finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace igt
