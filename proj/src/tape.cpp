#include "lsc/tape.hpp"

#include "lsc/kernels.hpp"

namespace lsc::numcore {

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_finite(const Tensor& t, const char* what) const {
  if (!t.all_finite()) throw NumericError(std::string("tape: non-finite value in ") + what);
}

int Tape::input(Tensor t) {
  check_finite(t, "input");
  Node n;
  n.op = Op::input;
  n.value = std::move(t);
  return push(std::move(n));
}

int Tape::param(const ParamSet& ps, const std::string& name) {
  Node n;
  n.op = Op::param;
  n.value = ps.value(name);
  n.pname = name;
  check_finite(n.value, "param");
  return push(std::move(n));
}

int Tape::affine(int x, int w, int b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.shape[1] != wv.shape[0] ||
      wv.shape[1] != bv.shape[0])
    throw NumericError("tape: affine shape mismatch");
  const int64_t m = xv.shape[0], k = xv.shape[1], out = wv.shape[1];
  Node n;
  n.op = Op::affine;
  n.in = {x, w, b};
  n.value = Tensor::zeros({m, out});
  kernels::matmul(xv.data.data(), wv.data.data(), n.value.data.data(), m, k, out);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < out; ++j) n.value.data[static_cast<size_t>(i * out + j)] += bv.data[static_cast<size_t>(j)];
  check_finite(n.value, "affine");
  return push(std::move(n));
}

int Tape::relu(int x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::relu;
  n.in = {x, -1, -1};
  n.value = Tensor::zeros(xv.shape);
  kernels::relu(xv.data.data(), n.value.data.data(), xv.numel());
  return push(std::move(n));
}

int Tape::concat_cols(const std::vector<int>& xs) {
  if (xs.empty()) throw NumericError("tape: concat of nothing");
  const int64_t m = value(xs[0]).shape[0];
  int64_t total = 0;
  for (int id : xs) {
    const Tensor& t = value(id);
    if (t.rank() != 2 || t.shape[0] != m) throw NumericError("tape: concat row mismatch");
    total += t.shape[1];
  }
  Node n;
  n.op = Op::concat_cols;
  n.in_list = xs;
  n.value = Tensor::zeros({m, total});
  int64_t off = 0;
  for (int id : xs) {
    const Tensor& t = value(id);
    const int64_t c = t.shape[1];
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < c; ++j) n.value.at(i, off + j) = t.at(i, j);
    off += c;
  }
  return push(std::move(n));
}

int Tape::segment_sum(int x, std::vector<int32_t> segments, int64_t groups) {
  const Tensor& xv = value(x);
  if (xv.rank() != 2 || static_cast<int64_t>(segments.size()) != xv.shape[0])
    throw NumericError("tape: segment_sum shape mismatch");
  for (int32_t s : segments)
    if (s < 0 || s >= groups) throw NumericError("tape: segment index out of range");
  Node n;
  n.op = Op::segment_sum;
  n.in = {x, -1, -1};
  n.value = Tensor::zeros({groups, xv.shape[1]});
  kernels::segment_sum(xv.data.data(), segments.data(), n.value.data.data(), xv.shape[0],
                       xv.shape[1], groups);
  n.idx = std::move(segments);
  check_finite(n.value, "segment_sum");
  return push(std::move(n));
}

int Tape::take(int x, std::vector<int32_t> flat_idx, int64_t rows, int64_t cols) {
  const Tensor& xv = value(x);
  if (static_cast<int64_t>(flat_idx.size()) != rows * cols)
    throw NumericError("tape: take index count mismatch");
  const int64_t nel = xv.numel();
  for (int32_t i : flat_idx)
    if (i < 0 || i >= nel) throw NumericError("tape: take index out of range");
  Node n;
  n.op = Op::take;
  n.in = {x, -1, -1};
  n.value = Tensor::zeros({rows, cols});
  for (size_t i = 0; i < flat_idx.size(); ++i)
    n.value.data[i] = xv.data[static_cast<size_t>(flat_idx[i])];
  n.idx = std::move(flat_idx);
  return push(std::move(n));
}

int Tape::overwrite_rows(int base, int rows, std::vector<int32_t> row_ids) {
  const Tensor& bv = value(base);
  const Tensor& rv = value(rows);
  if (bv.rank() != 2 || rv.rank() != 2 || bv.shape[1] != rv.shape[1] ||
      static_cast<int64_t>(row_ids.size()) != rv.shape[0])
    throw NumericError("tape: overwrite_rows shape mismatch");
  for (int32_t r : row_ids)
    if (r < 0 || r >= bv.shape[0]) throw NumericError("tape: overwrite_rows row out of range");
  Node n;
  n.op = Op::overwrite_rows;
  n.in = {base, rows, -1};
  n.value = bv;
  for (size_t i = 0; i < row_ids.size(); ++i)
    for (int64_t j = 0; j < rv.shape[1]; ++j) n.value.at(row_ids[i], j) = rv.at(static_cast<int64_t>(i), j);
  n.idx = std::move(row_ids);
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw NumericError("tape: add shape mismatch");
  Node n;
  n.op = Op::add;
  n.in = {a, b, -1};
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += bv.data[i];
  check_finite(n.value, "add");
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw NumericError("tape: sub shape mismatch");
  Node n;
  n.op = Op::sub;
  n.in = {a, b, -1};
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= bv.data[i];
  check_finite(n.value, "sub");
  return push(std::move(n));
}

int Tape::square(int x) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::square;
  n.in = {x, -1, -1};
  n.value = Tensor::zeros(xv.shape);
  for (size_t i = 0; i < xv.data.size(); ++i) n.value.data[i] = xv.data[i] * xv.data[i];
  check_finite(n.value, "square");
  return push(std::move(n));
}

int Tape::reduce_sum(int x) {
  const Tensor& xv = value(x);
  double acc = 0.0;
  for (double v : xv.data) acc += v;
  Node n;
  n.op = Op::reduce_sum;
  n.in = {x, -1, -1};
  n.value = Tensor::row({acc});
  check_finite(n.value, "reduce_sum");
  return push(std::move(n));
}

int Tape::scale(int x, double c) {
  const Tensor& xv = value(x);
  Node n;
  n.op = Op::scale;
  n.in = {x, -1, -1};
  n.c = c;
  n.value = Tensor::zeros(xv.shape);
  for (size_t i = 0; i < xv.data.size(); ++i) n.value.data[i] = xv.data[i] * c;
  check_finite(n.value, "scale");
  return push(std::move(n));
}

void Tape::backward(int output, const Tensor& output_grad, ParamSet& ps) {
  if (!output_grad.same_shape(value(output)))
    throw NumericError("tape: output_grad shape mismatch");
  for (auto& n : nodes_) {
    if (n.grad.shape != n.value.shape) n.grad = Tensor::zeros(n.value.shape);
    else n.grad.fill(0.0);
  }
  node(output).grad = output_grad;

  for (int id = output; id >= 0; --id) {
    Node& n = node(id);
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::input:
        break;
      case Op::param:
        break;  // flushed after the sweep
      case Op::affine: {
        Node& x = node(n.in[0]);
        Node& w = node(n.in[1]);
        Node& b = node(n.in[2]);
        const int64_t m = x.value.shape[0], k = x.value.shape[1], out = w.value.shape[1];
        kernels::matmul_a_bt_acc(g.data.data(), w.value.data.data(), x.grad.data.data(), m, k, out);
        kernels::matmul_at_b_acc(x.value.data.data(), g.data.data(), w.grad.data.data(), m, k, out);
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < out; ++j) b.grad.data[static_cast<size_t>(j)] += g.at(i, j);
        break;
      }
      case Op::relu: {
        Node& x = node(n.in[0]);
        kernels::relu_bwd_acc(x.value.data.data(), g.data.data(), x.grad.data.data(),
                              x.value.numel());
        break;
      }
      case Op::concat_cols: {
        int64_t off = 0;
        const int64_t m = n.value.shape[0];
        for (int src : n.in_list) {
          Node& x = node(src);
          const int64_t c = x.value.shape[1];
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < c; ++j) x.grad.at(i, j) += g.at(i, off + j);
          off += c;
        }
        break;
      }
      case Op::segment_sum: {
        Node& x = node(n.in[0]);
        const int64_t f = x.value.shape[1];
        for (int64_t r = 0; r < x.value.shape[0]; ++r)
          for (int64_t j = 0; j < f; ++j) x.grad.at(r, j) += g.at(n.idx[static_cast<size_t>(r)], j);
        break;
      }
      case Op::take: {
        Node& x = node(n.in[0]);
        for (size_t i = 0; i < n.idx.size(); ++i)
          x.grad.data[static_cast<size_t>(n.idx[i])] += g.data[i];
        break;
      }
      case Op::overwrite_rows: {
        Node& base = node(n.in[0]);
        Node& rows = node(n.in[1]);
        const int64_t c = n.value.shape[1];
        std::vector<char> overwritten(static_cast<size_t>(n.value.shape[0]), 0);
        for (int32_t r : n.idx) overwritten[static_cast<size_t>(r)] = 1;
        for (int64_t i = 0; i < n.value.shape[0]; ++i)
          if (!overwritten[static_cast<size_t>(i)])
            for (int64_t j = 0; j < c; ++j) base.grad.at(i, j) += g.at(i, j);
        for (size_t i = 0; i < n.idx.size(); ++i)
          for (int64_t j = 0; j < c; ++j) rows.grad.at(static_cast<int64_t>(i), j) += g.at(n.idx[i], j);
        break;
      }
      case Op::add: {
        Node& a = node(n.in[0]);
        Node& b = node(n.in[1]);
        for (size_t i = 0; i < g.data.size(); ++i) {
          a.grad.data[i] += g.data[i];
          b.grad.data[i] += g.data[i];
        }
        break;
      }
      case Op::sub: {
        Node& a = node(n.in[0]);
        Node& b = node(n.in[1]);
        for (size_t i = 0; i < g.data.size(); ++i) {
          a.grad.data[i] += g.data[i];
          b.grad.data[i] -= g.data[i];
        }
        break;
      }
      case Op::square: {
        Node& x = node(n.in[0]);
        for (size_t i = 0; i < g.data.size(); ++i)
          x.grad.data[i] += 2.0 * x.value.data[i] * g.data[i];
        break;
      }
      case Op::reduce_sum: {
        Node& x = node(n.in[0]);
        const double gv = g.data[0];
        for (double& xv : x.grad.data) xv += gv;
        break;
      }
      case Op::scale: {
        Node& x = node(n.in[0]);
        for (size_t i = 0; i < g.data.size(); ++i) x.grad.data[i] += n.c * g.data[i];
        break;
      }
    }
  }

  for (const auto& n : nodes_) {
    if (n.op != Op::param) continue;
    Tensor& pg = ps.grad(n.pname);
    if (!pg.same_shape(n.grad)) throw NumericError("tape: param grad shape mismatch " + n.pname);
    for (size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += n.grad.data[i];
  }
}

}  // namespace lsc::numcore
