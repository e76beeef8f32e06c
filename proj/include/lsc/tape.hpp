#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lsc/params.hpp"
#include "lsc/tensor.hpp"

namespace lsc::numcore {

// Define-by-run computation tape. Ops evaluate eagerly and record enough to
// replay exact reverse-mode gradients; node ids are topologically ordered by
// construction so backward() is a single reverse sweep. Every op checks its
// result for NaN/Inf and throws NumericError on the first non-finite value.
class Tape {
 public:
  enum class Op : uint8_t {
    input,
    param,
    affine,
    relu,
    concat_cols,
    segment_sum,
    take,
    overwrite_rows,
    add,
    sub,
    square,
    reduce_sum,
    scale,
  };

  struct Node {
    Op op;
    Tensor value;
    Tensor grad;                        // allocated lazily in backward
    std::array<int, 3> in{-1, -1, -1};  // upstream node ids
    std::vector<int> in_list;           // concat only
    std::string pname;                  // param only
    std::vector<int32_t> idx;           // segment ids / flat take indices / row ids
    double c = 0.0;                     // scale factor
  };

  int input(Tensor t);
  int param(const ParamSet& ps, const std::string& name);

  // y = x * W + b with x [m x in], W [in x out], b [out]
  int affine(int x, int w, int b);
  int relu(int x);
  int concat_cols(const std::vector<int>& xs);
  // row-wise group sums; segments[r] in [0, groups)
  int segment_sum(int x, std::vector<int32_t> segments, int64_t groups);
  // out[r][c] = x.flat[idx[r * cols + c]]
  int take(int x, std::vector<int32_t> flat_idx, int64_t rows, int64_t cols);
  // out = base; out[row_ids[i], :] = rows[i, :]
  int overwrite_rows(int base, int rows, std::vector<int32_t> row_ids);
  int add(int a, int b);
  int sub(int a, int b);
  int square(int x);
  int reduce_sum(int x);  // -> [1]
  int scale(int x, double c);

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t size() const { return nodes_.size(); }

  // Seeds d(output) = output_grad and accumulates parameter gradients into ps.
  // Repeated calls (with fresh forwards on the same tape) keep summing into ps.
  void backward(int output, const Tensor& output_grad, ParamSet& ps);

  // Gradient w.r.t. a non-param node from the most recent backward sweep.
  const Tensor& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

 private:
  int push(Node n);
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  void check_finite(const Tensor& t, const char* what) const;

  std::vector<Node> nodes_;
};

}  // namespace lsc::numcore
