#include "slt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "slt/error.hpp"
#include "slt/log.hpp"

namespace slt::ops {

namespace {

bool is_suffix(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

// (outer, extent, inner) decomposition around one axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    auto pa = a.node(), pb = b.node();
    return make_result(a.shape(), std::move(out), {a, b},
                       [pa, pb](const std::vector<double>& g) {
                         accumulate_grad(pa, g);
                         accumulate_grad(pb, g);
                       },
                       "add");
  }
  if (!is_suffix(a.shape(), b.shape())) {
    throw ShapeError("add: cannot broadcast " + shape_str(b.shape()) + " onto " + shape_str(a.shape()));
  }
  const std::size_t inner = b.numel();
  const std::size_t outer = a.numel() / inner;
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = x[o * inner + i] + y[i];
  }
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b},
                     [pa, pb, inner, outer](const std::vector<double>& g) {
                       accumulate_grad(pa, g);
                       if (pb->requires_grad) {
                         auto& gb = pb->grad_buffer();
                         for (std::size_t o = 0; o < outer; ++o) {
                           for (std::size_t i = 0; i < inner; ++i) gb[i] += g[o * inner + i];
                         }
                       }
                     },
                     "add_broadcast");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b},
                     [pa, pb](const std::vector<double>& g) {
                       accumulate_grad(pa, g);
                       if (pb->requires_grad) {
                         auto& gb = pb->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     },
                     "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b},
                     [pa, pb](const std::vector<double>& g) {
                       if (pa->requires_grad) {
                         auto& ga = pa->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb->value[i];
                       }
                       if (pb->requires_grad) {
                         auto& gb = pb->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa->value[i];
                       }
                     },
                     "mul");
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  auto pa = a.node();
  return make_result(a.shape(), std::move(out), {a},
                     [pa, factor](const std::vector<double>& g) {
                       if (!pa->requires_grad) return;
                       auto& ga = pa->grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
                     },
                     "scale");
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("mul_scalar: gate must have one element, got " + shape_str(s.shape()));
  const double k = s.item();
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * k;
  auto pa = a.node(), ps = s.node();
  return make_result(a.shape(), std::move(out), {a, s},
                     [pa, ps](const std::vector<double>& g) {
                       const double k = ps->value[0];
                       if (pa->requires_grad) {
                         auto& ga = pa->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * k;
                       }
                       if (ps->requires_grad) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * pa->value[i];
                         ps->grad_buffer()[0] += acc;
                       }
                     },
                     "mul_scalar");
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  auto pa = a.node();
  return make_result(a.shape(), std::move(out), {a},
                     [pa](const std::vector<double>& g) {
                       if (!pa->requires_grad) return;
                       auto& ga = pa->grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (pa->value[i] > 0.0) ga[i] += g[i];
                       }
                     },
                     "relu");
}

namespace {

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// ga[m,k] += g[m,n] * b[k,n]^T
void gemm_nt(const double* g, const double* b, double* ga, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ga[i * k + p] += acc;
    }
  }
}

// gb[k,n] += a[m,k]^T * g[m,n]
void gemm_tn(const double* a, const double* g, double* gb, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* bp = gb + p * n;
      for (std::size_t j = 0; j < n; ++j) bp[j] += av * gi[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto pa = a.node(), pb = b.node();
  return make_result({m, n}, std::move(out), {a, b},
                     [pa, pb, m, k, n](const std::vector<double>& g) {
                       if (pa->requires_grad) gemm_nt(g.data(), pb->value.data(), pa->grad_buffer().data(), m, k, n);
                       if (pb->requires_grad) gemm_tn(pa->value.data(), g.data(), pb->grad_buffer().data(), m, k, n);
                     },
                     "matmul");
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_rank("bmm", a, 3);
  require_rank("bmm", b, 3);
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != batch || b.dim(1) != k) {
    throw ShapeError("bmm: incompatible operands " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t t = 0; t < batch; ++t) {
    gemm_nn(a.data().data() + t * m * k, b.data().data() + t * k * n, out.data() + t * m * n, m, k, n);
  }
  auto pa = a.node(), pb = b.node();
  return make_result({batch, m, n}, std::move(out), {a, b},
                     [pa, pb, batch, m, k, n](const std::vector<double>& g) {
                       for (std::size_t t = 0; t < batch; ++t) {
                         const double* gt = g.data() + t * m * n;
                         if (pa->requires_grad) {
                           gemm_nt(gt, pb->value.data() + t * k * n, pa->grad_buffer().data() + t * m * k, m, k, n);
                         }
                         if (pb->requires_grad) {
                           gemm_tn(pa->value.data() + t * m * k, gt, pb->grad_buffer().data() + t * k * n, m, k, n);
                         }
                       }
                     },
                     "bmm");
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
  }
  auto pa = a.node();
  return make_result(std::move(shape), a.values(), {a},
                     [pa](const std::vector<double>& g) { accumulate_grad(pa, g); }, "reshape");
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const auto& in_shape = a.shape();
  const std::size_t rank = in_shape.size();
  if (axes.size() != rank) throw ShapeError("permute: axis list length differs from rank of " + shape_str(in_shape));
  std::vector<bool> seen(rank, false);
  for (auto ax : axes) {
    if (ax >= rank || seen[ax]) throw ShapeError("permute: invalid axis permutation for " + shape_str(in_shape));
    seen[ax] = true;
  }
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  Shape out_shape(rank);
  std::vector<std::size_t> src_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[axes[i]];
    src_strides[i] = in_strides[axes[i]];
  }
  // gather[k] = flat input index of output element k
  std::vector<std::size_t> gather(a.numel());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t k = 0; k < gather.size(); ++k) {
    gather[k] = src;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src += src_strides[d];
      if (idx[d] < out_shape[d]) break;
      src -= src_strides[d] * idx[d];
      idx[d] = 0;
    }
  }
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[gather[k]];
  auto pa = a.node();
  return make_result(std::move(out_shape), std::move(out), {a},
                     [pa, gather = std::move(gather)](const std::vector<double>& g) {
                       if (!pa->requires_grad) return;
                       auto& ga = pa->grad_buffer();
                       for (std::size_t k = 0; k < g.size(); ++k) ga[gather[k]] += g[k];
                     },
                     "permute");
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  return permute(a, {1, 0});
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(first) + " on axis " + std::to_string(axis));
    out_shape[axis] += s[axis];
  }
  const auto split = split_at(out_shape, axis);
  std::vector<std::size_t> widths;  // contiguous block per outer index, per part
  for (const auto& p : parts) widths.push_back(p.dim(axis) * split.inner);
  const std::size_t row = split.extent * split.inner;
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto x = parts[pi].data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(x.begin() + o * widths[pi], widths[pi], out.begin() + o * row + offset);
    }
    offset += widths[pi];
  }
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_result(std::move(out_shape), std::move(out), parts,
                     [nodes, widths, row, outer = split.outer](const std::vector<double>& g) {
                       std::size_t offset = 0;
                       for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                         if (nodes[pi]->requires_grad) {
                           auto& gp = nodes[pi]->grad_buffer();
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t i = 0; i < widths[pi]; ++i) gp[o * widths[pi] + i] += g[o * row + offset + i];
                           }
                         }
                         offset += widths[pi];
                       }
                     },
                     "concat");
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const auto split = split_at(a.shape(), axis);
  if (length == 0 || start + length > split.extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                     ") out of bounds on axis " + std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  const std::size_t width = length * split.inner;
  const std::size_t row = split.extent * split.inner;
  const std::size_t offset = start * split.inner;
  std::vector<double> out(split.outer * width);
  const auto x = a.data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(x.begin() + o * row + offset, width, out.begin() + o * width);
  }
  auto pa = a.node();
  return make_result(std::move(out_shape), std::move(out), {a},
                     [pa, width, row, offset, outer = split.outer](const std::vector<double>& g) {
                       if (!pa->requires_grad) return;
                       auto& ga = pa->grad_buffer();
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t i = 0; i < width; ++i) ga[o * row + offset + i] += g[o * width + i];
                       }
                     },
                     "slice");
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto s = split_at(a.shape(), axis);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) mx = std::max(mx, x[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(x[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= total;
    }
  }
  auto pa = a.node();
  auto y = out;
  return make_result(a.shape(), std::move(out), {a},
                     [pa, y = std::move(y), s](const std::vector<double>& g) {
                       if (!pa->requires_grad) return;
                       auto& ga = pa->grad_buffer();
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t i = 0; i < s.inner; ++i) {
                           const std::size_t base = o * s.extent * s.inner + i;
                           double dot = 0.0;
                           for (std::size_t k = 0; k < s.extent; ++k) dot += g[base + k * s.inner] * y[base + k * s.inner];
                           for (std::size_t k = 0; k < s.extent; ++k) {
                             const std::size_t at = base + k * s.inner;
                             ga[at] += y[at] * (g[at] - dot);
                           }
                         }
                       }
                     },
                     "softmax");
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto s = split_at(a.shape(), axis);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) mx = std::max(mx, x[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) total += std::exp(x[base + k * s.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] = x[base + k * s.inner] - lse;
    }
  }
  auto pa = a.node();
  auto y = out;
  return make_result(a.shape(), std::move(out), {a},
                     [pa, y = std::move(y), s](const std::vector<double>& g) {
                       if (!pa->requires_grad) return;
                       auto& ga = pa->grad_buffer();
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t i = 0; i < s.inner; ++i) {
                           const std::size_t base = o * s.extent * s.inner + i;
                           double gsum = 0.0;
                           for (std::size_t k = 0; k < s.extent; ++k) gsum += g[base + k * s.inner];
                           for (std::size_t k = 0; k < s.extent; ++k) {
                             const std::size_t at = base + k * s.inner;
                             ga[at] += g[at] - std::exp(y[at]) * gsum;
                           }
                         }
                       }
                     },
                     "log_softmax");
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  const std::size_t padded = in + 2 * pad;
  if (k > padded) {
    throw ConfigError("conv2d: kernel extent " + std::to_string(k) + " exceeds padded input extent " +
                      std::to_string(padded));
  }
  if ((padded - k) % stride != 0) {
    throw ConfigError("conv2d: output extent (" + std::to_string(in) + "+2*" + std::to_string(pad) + "-" +
                      std::to_string(k) + ")/" + std::to_string(stride) + "+1 is not integral");
  }
  return (padded - k) / stride + 1;
}

namespace {

struct ConvGeom {
  std::size_t n, cin, h, w, cout, kh, kw, stride, pad, oh, ow;
};

// Valid output range [lo, hi) along one axis for kernel tap `k`.
std::pair<std::size_t, std::size_t> tap_range(std::size_t k, std::size_t pad, std::size_t stride, std::size_t in,
                                              std::size_t out) {
  // need 0 <= o*stride + k - pad < in
  std::size_t lo = 0;
  if (k < pad) lo = (pad - k + stride - 1) / stride;
  std::size_t hi = 0;
  if (in + pad > k) hi = std::min(out, (in + pad - k - 1) / stride + 1);
  return {std::min(lo, hi), hi};
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride, std::size_t padding) {
  require_rank("conv2d input", x, 4);
  require_rank("conv2d kernel", kernel, 4);
  if (kernel.dim(1) != x.dim(1)) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)) +
                     " input channels, input is " + shape_str(x.shape()));
  }
  ConvGeom geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernel.dim(0), kernel.dim(2), kernel.dim(3), stride, padding, 0, 0};
  geo.oh = conv_out_extent(geo.h, geo.kh, stride, padding);
  geo.ow = conv_out_extent(geo.w, geo.kw, stride, padding);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != geo.cout)) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(geo.cout) + " output channels");
  }
  const std::size_t in_plane = geo.h * geo.w;
  const std::size_t out_plane = geo.oh * geo.ow;
  std::vector<double> out(geo.n * geo.cout * out_plane, 0.0);
  const double* xv = x.data().data();
  const double* kv = kernel.data().data();
  for (std::size_t n = 0; n < geo.n; ++n) {
    for (std::size_t co = 0; co < geo.cout; ++co) {
      double* op = out.data() + (n * geo.cout + co) * out_plane;
      if (bias.defined()) std::fill_n(op, out_plane, bias.data()[co]);
      for (std::size_t ci = 0; ci < geo.cin; ++ci) {
        const double* ip = xv + (n * geo.cin + ci) * in_plane;
        const double* kp = kv + (co * geo.cin + ci) * geo.kh * geo.kw;
        for (std::size_t ky = 0; ky < geo.kh; ++ky) {
          const auto [oy0, oy1] = tap_range(ky, geo.pad, geo.stride, geo.h, geo.oh);
          for (std::size_t kx = 0; kx < geo.kw; ++kx) {
            const auto [ox0, ox1] = tap_range(kx, geo.pad, geo.stride, geo.w, geo.ow);
            const double wv = kp[ky * geo.kw + kx];
            for (std::size_t oy = oy0; oy < oy1; ++oy) {
              const double* row = ip + (oy * geo.stride + ky - geo.pad) * geo.w + kx - geo.pad;
              double* orow = op + oy * geo.ow;
              for (std::size_t ox = ox0; ox < ox1; ++ox) orow[ox] += wv * row[ox * geo.stride];
            }
          }
        }
      }
    }
  }
  auto px = x.node(), pk = kernel.node();
  NodePtr pb = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor> parents{x, kernel};
  if (bias.defined()) parents.push_back(bias);
  return make_result(
      {geo.n, geo.cout, geo.oh, geo.ow}, std::move(out), parents,
      [px, pk, pb, geo, in_plane, out_plane](const std::vector<double>& g) {
        double* gx = px->requires_grad ? px->grad_buffer().data() : nullptr;
        double* gk = pk->requires_grad ? pk->grad_buffer().data() : nullptr;
        if (pb && pb->requires_grad) {
          auto& gb = pb->grad_buffer();
          for (std::size_t n = 0; n < geo.n; ++n) {
            for (std::size_t co = 0; co < geo.cout; ++co) {
              const double* gp = g.data() + (n * geo.cout + co) * out_plane;
              double acc = 0.0;
              for (std::size_t i = 0; i < out_plane; ++i) acc += gp[i];
              gb[co] += acc;
            }
          }
        }
        const double* xv = px->value.data();
        const double* kv = pk->value.data();
        for (std::size_t n = 0; n < geo.n; ++n) {
          for (std::size_t co = 0; co < geo.cout; ++co) {
            const double* gp = g.data() + (n * geo.cout + co) * out_plane;
            for (std::size_t ci = 0; ci < geo.cin; ++ci) {
              const std::size_t in_off = (n * geo.cin + ci) * in_plane;
              const std::size_t k_off = (co * geo.cin + ci) * geo.kh * geo.kw;
              for (std::size_t ky = 0; ky < geo.kh; ++ky) {
                const auto [oy0, oy1] = tap_range(ky, geo.pad, geo.stride, geo.h, geo.oh);
                for (std::size_t kx = 0; kx < geo.kw; ++kx) {
                  const auto [ox0, ox1] = tap_range(kx, geo.pad, geo.stride, geo.w, geo.ow);
                  const double wv = kv[k_off + ky * geo.kw + kx];
                  double wacc = 0.0;
                  for (std::size_t oy = oy0; oy < oy1; ++oy) {
                    const std::size_t row = in_off + (oy * geo.stride + ky - geo.pad) * geo.w + kx - geo.pad;
                    const double* grow = gp + oy * geo.ow;
                    for (std::size_t ox = ox0; ox < ox1; ++ox) {
                      const std::size_t at = row + ox * geo.stride;
                      if (gx) gx[at] += wv * grow[ox];
                      wacc += xv[at] * grow[ox];
                    }
                  }
                  if (gk) gk[k_off + ky * geo.kw + kx] += wacc;
                }
              }
            }
          }
        }
      },
      "conv2d");
}

BatchNormStats BatchNormStats::fresh(std::size_t channels) {
  return BatchNormStats{std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0), 0};
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, NormMode mode,
                   double momentum, double eps) {
  require_rank("batchnorm2d", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c || stats.running_mean.size() != c || stats.running_var.size() != c) {
    throw ShapeError("batchnorm2d: affine/statistics width does not match channels of " + shape_str(x.shape()));
  }
  const std::size_t count = n * plane;
  const auto xv = x.data();
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (mode == NormMode::kTrain) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < plane; ++i) s += xv[(b * c + ch) * plane + i];
      }
      mu = s / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = xv[(b * c + ch) * plane + i] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      stats.running_mean[ch] = (1.0 - momentum) * stats.running_mean[ch] + momentum * mu;
      stats.running_var[ch] = (1.0 - momentum) * stats.running_var[ch] + momentum * unbiased;
    } else {
      mu = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    inv_std[ch] = 1.0 / std::sqrt(var + eps);
    const double gm = gamma.data()[ch], bt = beta.data()[ch];
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t at = (b * c + ch) * plane + i;
        xhat[at] = (xv[at] - mu) * inv_std[ch];
        out[at] = gm * xhat[at] + bt;
      }
    }
  }
  if (mode == NormMode::kTrain) {
    ++stats.updates;
  } else if (stats.updates == 0) {
    log::warn("batchnorm2d: eval mode before any training update; using initial statistics (mean 0, var 1)");
  }
  auto px = x.node(), pg = gamma.node(), pb = beta.node();
  const bool train = mode == NormMode::kTrain;
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, plane, count, train](
          const std::vector<double>& g) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double gsum = 0.0, gxhat = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t i = 0; i < plane; ++i) {
              const std::size_t at = (b * c + ch) * plane + i;
              gsum += g[at];
              gxhat += g[at] * xhat[at];
            }
          }
          if (pg->requires_grad) pg->grad_buffer()[ch] += gxhat;
          if (pb->requires_grad) pb->grad_buffer()[ch] += gsum;
          if (!px->requires_grad) continue;
          auto& gx = px->grad_buffer();
          const double gm = pg->value[ch];
          const double k = gm * inv_std[ch];
          if (train) {
            const double mean_g = gsum / static_cast<double>(count);
            const double mean_gx = gxhat / static_cast<double>(count);
            for (std::size_t b = 0; b < n; ++b) {
              for (std::size_t i = 0; i < plane; ++i) {
                const std::size_t at = (b * c + ch) * plane + i;
                gx[at] += k * (g[at] - mean_g - xhat[at] * mean_gx);
              }
            }
          } else {
            for (std::size_t b = 0; b < n; ++b) {
              for (std::size_t i = 0; i < plane; ++i) {
                const std::size_t at = (b * c + ch) * plane + i;
                gx[at] += k * g[at];
              }
            }
          }
        }
      },
      "batchnorm2d");
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank("embedding", table, 2);
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ContractError("embedding: empty id sequence");
  std::vector<double> out(ids.size() * d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= vocab) {
      throw VocabularyError("embedding: id " + std::to_string(ids[r]) + " >= vocabulary size " + std::to_string(vocab));
    }
    std::copy_n(table.data().begin() + ids[r] * d, d, out.begin() + r * d);
  }
  auto pt = table.node();
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return make_result({ids.size(), d}, std::move(out), {table},
                     [pt, rows = std::move(rows), d](const std::vector<double>& g) {
                       if (!pt->requires_grad) return;
                       auto& gt = pt->grad_buffer();
                       for (std::size_t r = 0; r < rows.size(); ++r) {
                         for (std::size_t j = 0; j < d; ++j) gt[rows[r] * d + j] += g[r * d + j];
                       }
                     },
                     "embedding");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layer_norm: affine width does not match last axis of " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  std::vector<double> out(x.numel()), xhat(x.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mu) * inv_std[r];
      out[r * d + j] = gamma.data()[j] * xhat[r * d + j] + beta.data()[j];
    }
  }
  auto px = x.node(), pg = gamma.node(), pb = beta.node();
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](
                         const std::vector<double>& g) {
                       if (pg->requires_grad) {
                         auto& gg = pg->grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[r * d + j];
                         }
                       }
                       if (pb->requires_grad) {
                         auto& gb = pb->grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
                         }
                       }
                       if (!px->requires_grad) return;
                       auto& gx = px->grad_buffer();
                       for (std::size_t r = 0; r < rows; ++r) {
                         double m1 = 0.0, m2 = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           const double dxh = g[r * d + j] * pg->value[j];
                           m1 += dxh;
                           m2 += dxh * xhat[r * d + j];
                         }
                         m1 /= static_cast<double>(d);
                         m2 /= static_cast<double>(d);
                         for (std::size_t j = 0; j < d; ++j) {
                           const double dxh = g[r * d + j] * pg->value[j];
                           gx[r * d + j] += inv_std[r] * (dxh - m1 - xhat[r * d + j] * m2);
                         }
                       }
                     },
                     "layer_norm");
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  auto pa = a.node();
  return make_result({1}, {total}, {a},
                     [pa](const std::vector<double>& g) {
                       if (!pa->requires_grad) return;
                       auto& ga = pa->grad_buffer();
                       for (auto& v : ga) v += g[0];
                     },
                     "sum");
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

}  // namespace slt::ops
