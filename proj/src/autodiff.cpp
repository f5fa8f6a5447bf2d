#include "mmn/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace mmn {

namespace {

constexpr double kCosineEps = 1e-8;

void check_rank1(const Tensor& t, const char* op) {
  if (t.rank() != 1)
    throw DimensionError(std::string(op) + ": expected a vector, got shape " + t.shape_str());
}

void check_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + t.shape_str());
}

}  // namespace

NodeId Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0) {
    Tensor z;
    if (n.value.rank() == 2)
      z = Tensor::matrix(n.value.rows(), n.value.cols());
    else
      z = Tensor::vector(n.value.size());
    n.grad = std::move(z);
  }
  return n.grad;
}

void Tape::clear() {
  nodes_.clear();
  extra_.clear();
}

NodeId Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  check_rank2(A, "matmul");
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  const std::size_t m = A.rows(), k = A.cols();
  if (B.rank() == 2) {
    if (B.rows() != k)
      throw DimensionError("matmul: inner dimensions disagree, " + A.shape_str() + " vs " + B.shape_str());
    const std::size_t cols = B.cols();
    Tensor C = Tensor::matrix(m, cols);
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = C.data() + i * cols;
      const double* arow = A.data() + i * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        const double* brow = B.data() + kk * cols;
        for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
      }
    }
    n.value = std::move(C);
  } else if (B.rank() == 1) {
    if (B.size() != k)
      throw DimensionError("matmul: inner dimensions disagree, " + A.shape_str() + " vs " + B.shape_str());
    Tensor y = Tensor::vector(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = A.data() + i * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * B(kk);
      y(i) = acc;
    }
    n.value = std::move(y);
  } else {
    throw DimensionError("matmul: right operand has shape " + B.shape_str());
  }
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B))
    throw DimensionError("add: shape mismatch, " + A.shape_str() + " vs " + B.shape_str());
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = A;
  double* out = n.value.data();
  const double* bp = B.data();
  for (std::size_t i = 0; i < B.size(); ++i) out[i] += bp[i];
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  if (A.same_shape(B)) {
    n.value = A;
    double* out = n.value.data();
    const double* bp = B.data();
    for (std::size_t i = 0; i < B.size(); ++i) out[i] *= bp[i];
  } else if (A.size() == 1) {
    n.value = B;
    const double s = A(0);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value(i) *= s;
  } else if (B.size() == 1) {
    n.value = A;
    const double s = B(0);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value(i) *= s;
  } else {
    throw DimensionError("mul: shape mismatch, " + A.shape_str() + " vs " + B.shape_str());
  }
  return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value(i) = std::tanh(n.value(i));
  return push(std::move(n));
}

NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value(i) = 1.0 / (1.0 + std::exp(-n.value(i)));
  return push(std::move(n));
}

NodeId Tape::concat(std::span<const NodeId> parts, int axis) {
  if (parts.empty()) throw InputError("concat: no inputs");
  Node n;
  n.op = Op::kConcat;
  n.aux = axis;
  n.extra_begin = static_cast<std::uint32_t>(extra_.size());
  n.extra_count = static_cast<std::uint32_t>(parts.size());
  extra_.insert(extra_.end(), parts.begin(), parts.end());
  if (axis == 0) {
    std::size_t total = 0;
    for (NodeId p : parts) {
      check_rank1(nodes_[p].value, "concat");
      total += nodes_[p].value.size();
    }
    Tensor out = Tensor::vector(total);
    std::size_t off = 0;
    for (NodeId p : parts) {
      const Tensor& v = nodes_[p].value;
      std::copy(v.data(), v.data() + v.size(), out.data() + off);
      off += v.size();
    }
    n.value = std::move(out);
  } else if (axis == 1) {
    const std::size_t d = nodes_[parts[0]].value.size();
    for (NodeId p : parts) {
      check_rank1(nodes_[p].value, "concat");
      if (nodes_[p].value.size() != d)
        throw DimensionError("concat: column lengths disagree, " +
                             std::to_string(d) + " vs " + std::to_string(nodes_[p].value.size()));
    }
    const std::size_t t = parts.size();
    Tensor out = Tensor::matrix(d, t);
    for (std::size_t j = 0; j < t; ++j) {
      const Tensor& v = nodes_[parts[j]].value;
      for (std::size_t i = 0; i < d; ++i) out(i, j) = v(i);
    }
    n.value = std::move(out);
  } else {
    throw InputError("concat: axis must be 0 or 1");
  }
  return push(std::move(n));
}

NodeId Tape::softmax(NodeId a) {
  const Tensor& v = nodes_[a].value;
  check_rank1(v, "softmax");
  if (v.size() == 0) throw InputError("softmax: empty input");
  Node n;
  n.op = Op::kSoftmax;
  n.a = a;
  Tensor y = Tensor::vector(v.size());
  double mx = v(0);
  for (std::size_t i = 1; i < v.size(); ++i) mx = std::max(mx, v(i));
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    y(i) = std::exp(v(i) - mx);
    total += y(i);
  }
  for (std::size_t i = 0; i < v.size(); ++i) y(i) /= total;
  n.value = std::move(y);
  return push(std::move(n));
}

NodeId Tape::cosine_similarity(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  check_rank1(A, "cosine_similarity");
  check_rank1(B, "cosine_similarity");
  if (A.size() != B.size() || A.size() == 0)
    throw DimensionError("cosine_similarity: lengths disagree, " + A.shape_str() + " vs " + B.shape_str());
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    dot += A(i) * B(i);
    na2 += A(i) * A(i);
    nb2 += B(i) * B(i);
  }
  Node n;
  n.op = Op::kCosineSim;
  n.a = a;
  n.b = b;
  n.value = Tensor::scalar(dot / (std::sqrt(na2) * std::sqrt(nb2) + kCosineEps));
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  const Tensor& v = nodes_[a].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v.data()[i];
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
  const Tensor& v = nodes_[a].value;
  if (v.size() == 0) throw InputError("mean: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v.data()[i];
  Node n;
  n.op = Op::kMean;
  n.a = a;
  n.value = Tensor::scalar(acc / static_cast<double>(v.size()));
  return push(std::move(n));
}

NodeId Tape::log(NodeId a, double floor) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.auxd = floor;
  n.value = nodes_[a].value;
  for (std::size_t i = 0; i < n.value.size(); ++i)
    n.value(i) = std::log(std::max(n.value(i), floor));
  return push(std::move(n));
}

NodeId Tape::pick(NodeId a, std::size_t index) {
  const Tensor& v = nodes_[a].value;
  check_rank1(v, "pick");
  if (index >= v.size())
    throw InputError("pick: index " + std::to_string(index) + " out of range for length " +
                     std::to_string(v.size()));
  Node n;
  n.op = Op::kPick;
  n.a = a;
  n.aux = static_cast<std::int32_t>(index);
  n.value = Tensor::scalar(v(index));
  return push(std::move(n));
}

NodeId Tape::select_row(NodeId a, std::size_t row) {
  const Tensor& m = nodes_[a].value;
  check_rank2(m, "select_row");
  if (row >= m.rows())
    throw InputError("select_row: row " + std::to_string(row) + " out of range for shape " + m.shape_str());
  Node n;
  n.op = Op::kSelectRow;
  n.a = a;
  n.aux = static_cast<std::int32_t>(row);
  Tensor out = Tensor::vector(m.cols());
  std::copy(m.data() + row * m.cols(), m.data() + (row + 1) * m.cols(), out.data());
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::select_col(NodeId a, std::size_t col) {
  const Tensor& m = nodes_[a].value;
  check_rank2(m, "select_col");
  if (col >= m.cols())
    throw InputError("select_col: column " + std::to_string(col) + " out of range for shape " + m.shape_str());
  Node n;
  n.op = Op::kSelectCol;
  n.a = a;
  n.aux = static_cast<std::int32_t>(col);
  Tensor out = Tensor::vector(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out(i) = m(i, col);
  n.value = std::move(out);
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  if (loss >= nodes_.size()) throw InputError("backward: loss node not on this tape");
  if (nodes_[loss].value.size() != 1)
    throw InputError("backward: loss must be scalar, got shape " + nodes_[loss].value.shape_str());

  grad_buf(loss)(0) = 1.0;

  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;  // not on any path to the loss
    if (n.op != Op::kLeaf && n.op != Op::kConcat && n.a >= id)
      throw NumericError("backward: cycle detected in tape");
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Tensor& A = nodes_[n.a].value;
        const Tensor& B = nodes_[n.b].value;
        Tensor& da = grad_buf(n.a);
        Tensor& db = grad_buf(n.b);
        const std::size_t m = A.rows(), k = A.cols();
        if (B.rank() == 2) {
          const std::size_t cols = B.cols();
          // dA += g * B^T ; dB += A^T * g
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              double acc = 0.0;
              for (std::size_t j = 0; j < cols; ++j) acc += g(i, j) * B(kk, j);
              da(i, kk) += acc;
            }
          for (std::size_t kk = 0; kk < k; ++kk)
            for (std::size_t j = 0; j < cols; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < m; ++i) acc += A(i, kk) * g(i, j);
              db(kk, j) += acc;
            }
        } else {
          // y = A x: dA += outer(g, x) ; dx += A^T g
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g(i);
            double* darow = da.data() + i * k;
            const double* arow = A.data() + i * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
              darow[kk] += gi * B(kk);
              db(kk) += arow[kk] * gi;
            }
          }
        }
        break;
      }
      case Op::kAdd: {
        Tensor& da = grad_buf(n.a);
        Tensor& db = grad_buf(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          da(i) += g(i);
          db(i) += g(i);
        }
        break;
      }
      case Op::kMul: {
        const Tensor& A = nodes_[n.a].value;
        const Tensor& B = nodes_[n.b].value;
        Tensor& da = grad_buf(n.a);
        Tensor& db = grad_buf(n.b);
        if (A.same_shape(B)) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            da(i) += g(i) * B(i);
            db(i) += g(i) * A(i);
          }
        } else if (A.size() == 1) {
          const double s = A(0);
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            acc += g(i) * B(i);
            db(i) += g(i) * s;
          }
          da(0) += acc;
        } else {
          const double s = B(0);
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            acc += g(i) * A(i);
            da(i) += g(i) * s;
          }
          db(0) += acc;
        }
        break;
      }
      case Op::kTanh: {
        Tensor& da = grad_buf(n.a);
        const Tensor& y = n.value;
        for (std::size_t i = 0; i < g.size(); ++i) da(i) += g(i) * (1.0 - y(i) * y(i));
        break;
      }
      case Op::kSigmoid: {
        Tensor& da = grad_buf(n.a);
        const Tensor& y = n.value;
        for (std::size_t i = 0; i < g.size(); ++i) da(i) += g(i) * y(i) * (1.0 - y(i));
        break;
      }
      case Op::kConcat: {
        const NodeId* parts = extra_.data() + n.extra_begin;
        for (std::uint32_t j = 0; j < n.extra_count; ++j)
          if (parts[j] >= id) throw NumericError("backward: cycle detected in tape");
        if (n.aux == 0) {
          std::size_t off = 0;
          for (std::uint32_t j = 0; j < n.extra_count; ++j) {
            Tensor& dp = grad_buf(parts[j]);
            for (std::size_t i = 0; i < dp.size(); ++i) dp(i) += g(off + i);
            off += dp.size();
          }
        } else {
          const std::size_t d = nodes_[parts[0]].value.size();
          for (std::uint32_t j = 0; j < n.extra_count; ++j) {
            Tensor& dp = grad_buf(parts[j]);
            for (std::size_t i = 0; i < d; ++i) dp(i) += g(i, j);
          }
        }
        break;
      }
      case Op::kSoftmax: {
        Tensor& da = grad_buf(n.a);
        const Tensor& y = n.value;
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g(i) * y(i);
        for (std::size_t i = 0; i < g.size(); ++i) da(i) += y(i) * (g(i) - dot);
        break;
      }
      case Op::kCosineSim: {
        const Tensor& A = nodes_[n.a].value;
        const Tensor& B = nodes_[n.b].value;
        Tensor& da = grad_buf(n.a);
        Tensor& db = grad_buf(n.b);
        double dot = 0.0, na2 = 0.0, nb2 = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) {
          dot += A(i) * B(i);
          na2 += A(i) * A(i);
          nb2 += B(i) * B(i);
        }
        const double na = std::sqrt(na2), nb = std::sqrt(nb2);
        const double q = na * nb + kCosineEps;
        const double g0 = g(0);
        // d/da = b/q - dot*nb*a/(na*q^2), second term 0 at the |a|=0 kink
        const double ca = na > 0.0 ? dot * nb / (na * q * q) : 0.0;
        const double cb = nb > 0.0 ? dot * na / (nb * q * q) : 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) {
          da(i) += g0 * (B(i) / q - ca * A(i));
          db(i) += g0 * (A(i) / q - cb * B(i));
        }
        break;
      }
      case Op::kSum: {
        Tensor& da = grad_buf(n.a);
        const double g0 = g(0);
        for (std::size_t i = 0; i < da.size(); ++i) da(i) += g0;
        break;
      }
      case Op::kMean: {
        Tensor& da = grad_buf(n.a);
        const double g0 = g(0) / static_cast<double>(da.size());
        for (std::size_t i = 0; i < da.size(); ++i) da(i) += g0;
        break;
      }
      case Op::kLog: {
        const Tensor& x = nodes_[n.a].value;
        Tensor& da = grad_buf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x(i) > n.auxd) da(i) += g(i) / x(i);
        break;
      }
      case Op::kPick: {
        Tensor& da = grad_buf(n.a);
        da(static_cast<std::size_t>(n.aux)) += g(0);
        break;
      }
      case Op::kSelectRow: {
        Tensor& da = grad_buf(n.a);
        const std::size_t cols = da.cols();
        const std::size_t row = static_cast<std::size_t>(n.aux);
        for (std::size_t j = 0; j < cols; ++j) da(row, j) += g(j);
        break;
      }
      case Op::kSelectCol: {
        Tensor& da = grad_buf(n.a);
        const std::size_t col = static_cast<std::size_t>(n.aux);
        for (std::size_t i = 0; i < da.rows(); ++i) da(i, col) += g(i);
        break;
      }
    }
  }
}

}  // namespace mmn
