#pragma once

#include "ksgrank/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksgrank::num {

template <typename T>
class BasicTape;

// Handle to a tape node. Cheap to copy; valid while its tape lives.
template <typename T>
struct BasicVar {
  BasicTape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const BasicTensor<T>& value() const { return tape->value(id); }
  const BasicTensor<T>& grad() const { return tape->grad(id); }
};

// Reverse-mode tape. Every op records its forward value and a backward
// closure; backward() replays the closures in reverse creation order,
// which is a valid topological order by construction. One tape serves one
// forward/backward pass and is confined to a single thread.
template <typename T>
class BasicTape {
 public:
  using Tensor = BasicTensor<T>;
  using Var = BasicVar<T>;

  BasicTape() { nodes_.reserve(256); }
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }

  // Gradient of a node after backward(); zeros if the node was never reached.
  const Tensor& grad(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  // ---- leaves -------------------------------------------------------------

  Var constant(Tensor v) { return push(std::move(v), {}, nullptr, false); }
  Var input(Tensor v) { return push(std::move(v), {}, nullptr, true); }

  // ---- elementwise --------------------------------------------------------

  Var add(Var a, Var b) {
    require_same_shape("add", a, b);
    Tensor out = val(a);
    const Tensor& B = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    return push(std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& g = t.nodes_[self].grad;
      t.accumulate(pa, g);
      t.accumulate(pb, g);
    });
  }

  Var sub(Var a, Var b) {
    require_same_shape("sub", a, b);
    Tensor out = val(a);
    const Tensor& B = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
    return push(std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& g = t.nodes_[self].grad;
      t.accumulate(pa, g);
      if (t.wants_grad(pb)) {
        Tensor& db = t.grad_buf(pb);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      }
    });
  }

  Var mul(Var a, Var b) {
    require_same_shape("mul", a, b);
    Tensor out = val(a);
    const Tensor& B = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return push(std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& A = t.nodes_[pa].value;
      const Tensor& B = t.nodes_[pb].value;
      if (t.wants_grad(pa)) {
        Tensor& da = t.grad_buf(pa);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * B[i];
      }
      if (t.wants_grad(pb)) {
        Tensor& db = t.grad_buf(pb);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * A[i];
      }
    });
  }

  Var scale(Var a, T c) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return push(std::move(out), {a.id}, [pa = a.id, c](BasicTape& t, std::uint32_t self) {
      const Tensor& g = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& da = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * c;
    });
  }

  Var sigmoid(Var a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
    return push(std::move(out), {a.id}, [pa = a.id](BasicTape& t, std::uint32_t self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& y = t.nodes_[self].value;
      if (!t.wants_grad(pa)) return;
      Tensor& da = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  }

  Var tanh(Var a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return push(std::move(out), {a.id}, [pa = a.id](BasicTape& t, std::uint32_t self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& y = t.nodes_[self].value;
      if (!t.wants_grad(pa)) return;
      Tensor& da = t.grad_buf(pa);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (T(1) - y[i] * y[i]);
    });
  }

  // ---- matrix ops ---------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
      throw std::invalid_argument("matmul: incompatible shapes " + A.shape_str() + " x " + B.shape_str());
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = A(i, p);
        if (aip == T(0)) continue;
        for (std::size_t j = 0; j < n; ++j) C(i, j) += aip * B(p, j);
      }
    return push(std::move(C), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      const Tensor& A = t.nodes_[pa].value;
      const Tensor& B = t.nodes_[pb].value;
      const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
      if (t.wants_grad(pa)) {
        Tensor& dA = t.grad_buf(pa);  // G * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const T gij = G(i, j);
            if (gij == T(0)) continue;
            for (std::size_t p = 0; p < k; ++p) dA(i, p) += gij * B(p, j);
          }
      }
      if (t.wants_grad(pb)) {
        Tensor& dB = t.grad_buf(pb);  // A^T * G
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const T aip = A(i, p);
            if (aip == T(0)) continue;
            for (std::size_t j = 0; j < n; ++j) dB(p, j) += aip * G(i, j);
          }
      }
    });
  }

  Var transpose(Var a) {
    const Tensor& A = val(a);
    require_matrix("transpose", A);
    Tensor C({A.cols(), A.rows()});
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C(j, i) = A(i, j);
    return push(std::move(C), {a.id}, [pa = a.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) dA(j, i) += G(i, j);
    });
  }

  // matrix + broadcast row vector
  Var add_rowvec(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || B.rows() != 1 || B.cols() != A.cols())
      throw std::invalid_argument("add_rowvec: shapes " + A.shape_str() + " + " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C(i, j) += B(0, j);
    return push(std::move(C), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      t.accumulate(pa, G);
      if (t.wants_grad(pb)) {
        Tensor& dB = t.grad_buf(pb);
        for (std::size_t i = 0; i < G.rows(); ++i)
          for (std::size_t j = 0; j < G.cols(); ++j) dB(0, j) += G(i, j);
      }
    });
  }

  // matrix * broadcast row vector, elementwise per row
  Var mul_rowvec(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || B.rows() != 1 || B.cols() != A.cols())
      throw std::invalid_argument("mul_rowvec: shapes " + A.shape_str() + " * " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C(i, j) *= B(0, j);
    return push(std::move(C), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      const Tensor& A = t.nodes_[pa].value;
      const Tensor& B = t.nodes_[pb].value;
      if (t.wants_grad(pa)) {
        Tensor& dA = t.grad_buf(pa);
        for (std::size_t i = 0; i < G.rows(); ++i)
          for (std::size_t j = 0; j < G.cols(); ++j) dA(i, j) += G(i, j) * B(0, j);
      }
      if (t.wants_grad(pb)) {
        Tensor& dB = t.grad_buf(pb);
        for (std::size_t i = 0; i < G.rows(); ++i)
          for (std::size_t j = 0; j < G.cols(); ++j) dB(0, j) += G(i, j) * A(i, j);
      }
    });
  }

  Var repeat_row(Var a, std::size_t n) {
    const Tensor& A = val(a);
    if (A.rank() != 2 || A.rows() != 1)
      throw std::invalid_argument("repeat_row: expects 1 x d, got " + A.shape_str());
    Tensor C({n, A.cols()});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C(i, j) = A(0, j);
    return push(std::move(C), {a.id}, [pa = a.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) dA(0, j) += G(i, j);
    });
  }

  // ---- slicing / assembly -------------------------------------------------

  Var row(Var a, std::size_t i) {
    const Tensor& A = val(a);
    require_matrix("row", A);
    if (i >= A.rows()) throw std::invalid_argument("row: index out of range");
    Tensor C({1, A.cols()});
    for (std::size_t j = 0; j < A.cols(); ++j) C(0, j) = A(i, j);
    return push(std::move(C), {a.id}, [pa = a.id, i](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t j = 0; j < G.cols(); ++j) dA(i, j) += G(0, j);
    });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& A = val(a);
    require_matrix("slice_cols", A);
    if (c0 >= c1 || c1 > A.cols()) throw std::invalid_argument("slice_cols: bad range");
    Tensor C({A.rows(), c1 - c0});
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = c0; j < c1; ++j) C(i, j - c0) = A(i, j);
    return push(std::move(C), {a.id}, [pa = a.id, c0](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) dA(i, j + c0) += G(i, j);
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const std::size_t rows = val(parts[0]).rows();
    std::size_t cols = 0;
    std::vector<std::uint32_t> ids;
    for (Var p : parts) {
      const Tensor& t = val(p);
      require_matrix("concat_cols", t);
      if (t.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
      cols += t.cols();
      ids.push_back(p.id);
    }
    Tensor C({rows, cols});
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& A = val(p);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) C(i, off + j) = A(i, j);
      off += A.cols();
    }
    return push(std::move(C), ids, [ids](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      std::size_t off = 0;
      for (std::uint32_t pid : ids) {
        const std::size_t w = t.nodes_[pid].value.cols();
        if (t.wants_grad(pid)) {
          Tensor& d = t.grad_buf(pid);
          for (std::size_t i = 0; i < G.rows(); ++i)
            for (std::size_t j = 0; j < w; ++j) d(i, j) += G(i, off + j);
        }
        off += w;
      }
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const std::size_t cols = val(parts[0]).cols();
    std::size_t rows = 0;
    std::vector<std::uint32_t> ids;
    for (Var p : parts) {
      const Tensor& t = val(p);
      require_matrix("concat_rows", t);
      if (t.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
      rows += t.rows();
      ids.push_back(p.id);
    }
    Tensor C({rows, cols});
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& A = val(p);
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < cols; ++j) C(off + i, j) = A(i, j);
      off += A.rows();
    }
    return push(std::move(C), ids, [ids](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      std::size_t off = 0;
      for (std::uint32_t pid : ids) {
        const std::size_t h = t.nodes_[pid].value.rows();
        if (t.wants_grad(pid)) {
          Tensor& d = t.grad_buf(pid);
          for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < G.cols(); ++j) d(i, j) += G(off + i, j);
        }
        off += h;
      }
    });
  }

  // gather rows of a by fixed indices; gradient flows only to picked rows
  Var pick_rows(Var a, std::vector<std::size_t> idx) {
    const Tensor& A = val(a);
    require_matrix("pick_rows", A);
    Tensor C({idx.size(), A.cols()});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= A.rows()) throw std::invalid_argument("pick_rows: index out of range");
      for (std::size_t j = 0; j < A.cols(); ++j) C(i, j) = A(idx[i], j);
    }
    return push(std::move(C), {a.id}, [pa = a.id, idx = std::move(idx)](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) dA(idx[i], j) += G(i, j);
    });
  }

  Var stack_scalars(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("stack_scalars: no parts");
    Tensor C({1, parts.size()});
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      C(0, i) = val(parts[i]).scalar_value();
      ids.push_back(parts[i].id);
    }
    return push(std::move(C), ids, [ids](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!t.wants_grad(ids[i])) continue;
        t.grad_buf(ids[i])[0] += G(0, i);
      }
    });
  }

  Var to_scalar(Var a) {
    const Tensor& A = val(a);
    if (A.size() != 1) throw std::invalid_argument("to_scalar: tensor has " + std::to_string(A.size()) + " elements");
    Tensor C = Tensor::scalar(A[0]);
    return push(std::move(C), {a.id}, [pa = a.id](BasicTape& t, std::uint32_t self) {
      if (!t.wants_grad(pa)) return;
      t.grad_buf(pa)[0] += t.nodes_[self].grad[0];
    });
  }

  // ---- reductions ---------------------------------------------------------

  Var sum_all(Var a) {
    const Tensor& A = val(a);
    T s = 0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    return push(Tensor::scalar(s), {a.id}, [pa = a.id](BasicTape& t, std::uint32_t self) {
      const T g = t.nodes_[self].grad[0];
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += g;
    });
  }

  Var mean_all(Var a) {
    const Tensor& A = val(a);
    T s = 0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    const T inv = T(1) / static_cast<T>(A.size());
    return push(Tensor::scalar(s * inv), {a.id}, [pa = a.id, inv](BasicTape& t, std::uint32_t self) {
      const T g = t.nodes_[self].grad[0] * inv;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += g;
    });
  }

  // column-wise max over rows (m x n -> 1 x n); ties keep the first row
  Var max_over_rows(Var a) {
    const Tensor& A = val(a);
    require_matrix("max_over_rows", A);
    if (A.rows() == 0) throw std::invalid_argument("max_over_rows: empty matrix");
    Tensor C({1, A.cols()});
    std::vector<std::size_t> arg(A.cols(), 0);
    for (std::size_t j = 0; j < A.cols(); ++j) {
      T best = A(0, j);
      for (std::size_t i = 1; i < A.rows(); ++i)
        if (A(i, j) > best) { best = A(i, j); arg[j] = i; }
      C(0, j) = best;
    }
    return push(std::move(C), {a.id}, [pa = a.id, arg = std::move(arg)](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t j = 0; j < G.cols(); ++j) dA(arg[j], j) += G(0, j);
    });
  }

  // row-wise max over columns (m x n -> m x 1); ties keep the first column
  Var max_over_cols(Var a) {
    const Tensor& A = val(a);
    require_matrix("max_over_cols", A);
    if (A.cols() == 0) throw std::invalid_argument("max_over_cols: empty matrix");
    Tensor C({A.rows(), 1});
    std::vector<std::size_t> arg(A.rows(), 0);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      T best = A(i, 0);
      for (std::size_t j = 1; j < A.cols(); ++j)
        if (A(i, j) > best) { best = A(i, j); arg[i] = j; }
      C(i, 0) = best;
    }
    return push(std::move(C), {a.id}, [pa = a.id, arg = std::move(arg)](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < G.rows(); ++i) dA(i, arg[i]) += G(i, 0);
    });
  }

  Var softmax_rows(Var a) {
    const Tensor& A = val(a);
    require_matrix("softmax_rows", A);
    Tensor C = A;
    for (std::size_t i = 0; i < A.rows(); ++i) {
      T mx = A(i, 0);
      for (std::size_t j = 1; j < A.cols(); ++j) mx = std::max(mx, A(i, j));
      T z = 0;
      for (std::size_t j = 0; j < A.cols(); ++j) {
        C(i, j) = std::exp(A(i, j) - mx);
        z += C(i, j);
      }
      for (std::size_t j = 0; j < A.cols(); ++j) C(i, j) /= z;
    }
    return push(std::move(C), {a.id}, [pa = a.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      const Tensor& Y = t.nodes_[self].value;
      if (!t.wants_grad(pa)) return;
      Tensor& dA = t.grad_buf(pa);
      for (std::size_t i = 0; i < Y.rows(); ++i) {
        T dot = 0;
        for (std::size_t j = 0; j < Y.cols(); ++j) dot += G(i, j) * Y(i, j);
        for (std::size_t j = 0; j < Y.cols(); ++j) dA(i, j) += (G(i, j) - dot) * Y(i, j);
      }
    });
  }

  // ---- similarity ---------------------------------------------------------

  // cosine per row pair; rows with a zero vector score 0 (and pass no gradient)
  Var rowwise_cosine(Var a, Var b) {
    require_same_shape("rowwise_cosine", a, b);
    const Tensor& A = val(a);
    require_matrix("rowwise_cosine", A);
    const Tensor& B = val(b);
    Tensor C({A.rows(), 1});
    for (std::size_t i = 0; i < A.rows(); ++i) C(i, 0) = cosine_fwd(A, B, i, i);
    return push(std::move(C), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      const Tensor& C = t.nodes_[self].value;
      const Tensor& A = t.nodes_[pa].value;
      const Tensor& B = t.nodes_[pb].value;
      const bool wa = t.wants_grad(pa), wb = t.wants_grad(pb);
      if (!wa && !wb) return;
      Tensor* dA = wa ? &t.grad_buf(pa) : nullptr;
      Tensor* dB = wb ? &t.grad_buf(pb) : nullptr;
      for (std::size_t i = 0; i < A.rows(); ++i)
        cosine_bwd(A, B, i, i, G(i, 0), C(i, 0), dA, dB);
    });
  }

  // all-pairs cosine (m x d, n x d -> m x n), zero vectors score 0
  Var cosine_matrix(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.cols())
      throw std::invalid_argument("cosine_matrix: shapes " + A.shape_str() + " vs " + B.shape_str());
    Tensor C({A.rows(), B.rows()});
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < B.rows(); ++j) C(i, j) = cosine_fwd(A, B, i, j);
    return push(std::move(C), {a.id, b.id}, [pa = a.id, pb = b.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      const Tensor& C = t.nodes_[self].value;
      const Tensor& A = t.nodes_[pa].value;
      const Tensor& B = t.nodes_[pb].value;
      const bool wa = t.wants_grad(pa), wb = t.wants_grad(pb);
      if (!wa && !wb) return;
      Tensor* dA = wa ? &t.grad_buf(pa) : nullptr;
      Tensor* dB = wb ? &t.grad_buf(pb) : nullptr;
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < B.rows(); ++j) {
          if (G(i, j) == T(0)) continue;
          cosine_bwd(A, B, i, j, G(i, j), C(i, j), dA, dB);
        }
    });
  }

  Var cosine(Var a, Var b) { return to_scalar(rowwise_cosine(a, b)); }

  // out_i = sum_j w_ij v_j / sum_j w_ij; rows whose weights sum to ~0 give 0
  Var weighted_mean_rows(Var values, Var weights) {
    const Tensor& V = val(values);
    const Tensor& W = val(weights);
    if (V.rank() != 2 || W.rank() != 2 || W.cols() != V.rows())
      throw std::invalid_argument("weighted_mean_rows: shapes " + V.shape_str() + " vs " + W.shape_str());
    Tensor C({W.rows(), V.cols()});
    for (std::size_t i = 0; i < W.rows(); ++i) {
      T s = 0;
      for (std::size_t j = 0; j < W.cols(); ++j) s += W(i, j);
      if (std::abs(s) < kTinyDen) continue;
      for (std::size_t j = 0; j < W.cols(); ++j) {
        const T w = W(i, j) / s;
        if (w == T(0)) continue;
        for (std::size_t c = 0; c < V.cols(); ++c) C(i, c) += w * V(j, c);
      }
    }
    return push(std::move(C), {values.id, weights.id},
                [pv = values.id, pw = weights.id](BasicTape& t, std::uint32_t self) {
      const Tensor& G = t.nodes_[self].grad;
      const Tensor& O = t.nodes_[self].value;
      const Tensor& V = t.nodes_[pv].value;
      const Tensor& W = t.nodes_[pw].value;
      const bool wv = t.wants_grad(pv), ww = t.wants_grad(pw);
      if (!wv && !ww) return;
      Tensor* dV = wv ? &t.grad_buf(pv) : nullptr;
      Tensor* dW = ww ? &t.grad_buf(pw) : nullptr;
      for (std::size_t i = 0; i < W.rows(); ++i) {
        T s = 0;
        for (std::size_t j = 0; j < W.cols(); ++j) s += W(i, j);
        if (std::abs(s) < kTinyDen) continue;
        for (std::size_t j = 0; j < W.cols(); ++j) {
          if (dV) {
            const T w = W(i, j) / s;
            for (std::size_t c = 0; c < V.cols(); ++c) (*dV)(j, c) += G(i, c) * w;
          }
          if (dW) {
            T acc = 0;
            for (std::size_t c = 0; c < V.cols(); ++c) acc += G(i, c) * (V(j, c) - O(i, c));
            (*dW)(i, j) += acc / s;
          }
        }
      }
    });
  }

  // ---- losses -------------------------------------------------------------

  // mean of squared differences against a fixed target
  Var mse(Var pred, Tensor target) {
    const Tensor& P = val(pred);
    if (!P.same_shape(target))
      throw std::invalid_argument("mse: prediction " + P.shape_str() + " vs target " + target.shape_str());
    T s = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      const T d = P[i] - target[i];
      s += d * d;
    }
    const T inv = T(1) / static_cast<T>(P.size());
    return push(Tensor::scalar(s * inv), {pred.id},
                [pp = pred.id, target = std::move(target), inv](BasicTape& t, std::uint32_t self) {
      const T g = t.nodes_[self].grad[0];
      if (!t.wants_grad(pp)) return;
      const Tensor& P = t.nodes_[pp].value;
      Tensor& dP = t.grad_buf(pp);
      for (std::size_t i = 0; i < P.size(); ++i) dP[i] += g * T(2) * (P[i] - target[i]) * inv;
    });
  }

  // summed binary cross-entropy on logits (numerically stable)
  Var bce_with_logits(Var logits, Tensor labels) {
    const Tensor& Z = val(logits);
    if (!Z.same_shape(labels))
      throw std::invalid_argument("bce_with_logits: logits " + Z.shape_str() + " vs labels " + labels.shape_str());
    T s = 0;
    for (std::size_t i = 0; i < Z.size(); ++i) {
      const T z = Z[i], y = labels[i];
      s += std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    return push(Tensor::scalar(s), {logits.id},
                [pz = logits.id, labels = std::move(labels)](BasicTape& t, std::uint32_t self) {
      const T g = t.nodes_[self].grad[0];
      if (!t.wants_grad(pz)) return;
      const Tensor& Z = t.nodes_[pz].value;
      Tensor& dZ = t.grad_buf(pz);
      for (std::size_t i = 0; i < Z.size(); ++i) dZ[i] += g * (stable_sigmoid(Z[i]) - labels[i]);
    });
  }

  // ---- backward -----------------------------------------------------------

  void backward(Var loss) {
    Node& top = nodes_.at(loss.id);
    if (top.value.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got " + top.value.shape_str());
    grad_buf(loss.id)[0] = T(1);
    for (std::uint32_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.back) continue;
      n.back(*this, i);
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> parents;
    std::function<void(BasicTape&, std::uint32_t)> back;
    bool requires_grad = false;
  };

  static constexpr T kTinyDen = T(1e-12);

  const Tensor& val(Var v) const { return nodes_[v.id].value; }

  bool wants_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  Tensor& grad_buf(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  void accumulate(std::uint32_t id, const Tensor& g) {
    if (!wants_grad(id)) return;
    Tensor& d = grad_buf(id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  }

  Var push(Tensor value, std::vector<std::uint32_t> parents,
           std::function<void(BasicTape&, std::uint32_t)> back, bool leaf_requires = false) {
    bool req = leaf_requires;
    for (std::uint32_t p : parents) req = req || nodes_[p].requires_grad;
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(parents), req ? std::move(back) : nullptr, req});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  void require_same_shape(const char* op, Var a, Var b) const {
    if (!val(a).same_shape(val(b)))
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + val(a).shape_str() +
                                  " vs " + val(b).shape_str());
  }

  static void require_matrix(const char* op, const Tensor& t) {
    if (t.rank() != 2) throw std::invalid_argument(std::string(op) + ": expects a matrix, got " + t.shape_str());
  }

  static T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
  }

  static T cosine_fwd(const Tensor& A, const Tensor& B, std::size_t i, std::size_t j) {
    T dot = 0, na = 0, nb = 0;
    for (std::size_t c = 0; c < A.cols(); ++c) {
      dot += A(i, c) * B(j, c);
      na += A(i, c) * A(i, c);
      nb += B(j, c) * B(j, c);
    }
    if (na == T(0) || nb == T(0)) return T(0);
    return dot / (std::sqrt(na) * std::sqrt(nb));
  }

  static void cosine_bwd(const Tensor& A, const Tensor& B, std::size_t i, std::size_t j,
                         T g, T cos, Tensor* dA, Tensor* dB) {
    T na2 = 0, nb2 = 0;
    for (std::size_t c = 0; c < A.cols(); ++c) {
      na2 += A(i, c) * A(i, c);
      nb2 += B(j, c) * B(j, c);
    }
    if (na2 == T(0) || nb2 == T(0)) return;
    const T na = std::sqrt(na2), nb = std::sqrt(nb2);
    const T inv = T(1) / (na * nb);
    for (std::size_t c = 0; c < A.cols(); ++c) {
      if (dA) (*dA)(i, c) += g * (B(j, c) * inv - cos * A(i, c) / na2);
      if (dB) (*dB)(j, c) += g * (A(i, c) * inv - cos * B(j, c) / nb2);
    }
  }

  std::vector<Node> nodes_;
};

using Tape = BasicTape<double>;
using Var = BasicVar<double>;

template <typename T>
BasicVar<T> operator+(BasicVar<T> a, BasicVar<T> b) { return a.tape->add(a, b); }
template <typename T>
BasicVar<T> operator-(BasicVar<T> a, BasicVar<T> b) { return a.tape->sub(a, b); }
template <typename T>
BasicVar<T> operator*(BasicVar<T> a, BasicVar<T> b) { return a.tape->mul(a, b); }

}  // namespace ksgrank::num
