#include "anchor/nn/ops.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

namespace anchor::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void require_rank(const Var<T>& a, int rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

// y = f(x); dx += dy * df(x, y).
template <typename T, typename F, typename DF>
Var<T> unary(const Var<T>& a, F f, DF df) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = f(x[i]);
  const int ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, df](Tape<T>& t, int self) {
    const Tensor<T>& gy = t.grad(self);
    const Tensor<T>& xv = t.value(ia);
    const Tensor<T>& yv = t.value(self);
    Tensor<T>& gx = t.grad(ia);
    for (std::size_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(shape[i]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) {
    s.inner *= static_cast<std::size_t>(shape[i]);
  }
  return s;
}

struct ConvGeometry {
  int n, c, h, w, o, k, stride, pad, ho, wo;
  std::size_t col_rows() const { return static_cast<std::size_t>(c) * k * k; }
  std::size_t col_cols() const { return static_cast<std::size_t>(ho) * wo; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t ncols = g.col_cols();
  for (int c = 0; c < g.c; ++c) {
    const T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int i = 0; i < g.k; ++i) {
      for (int j = 0; j < g.k; ++j) {
        T* row = cols + ((static_cast<std::size_t>(c) * g.k + i) * g.k + j) * ncols;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          T* out = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(out, out + g.wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            out[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* x) {
  const std::size_t ncols = g.col_cols();
  for (int c = 0; c < g.c; ++c) {
    T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int i = 0; i < g.k; ++i) {
      for (int j = 0; j < g.k; ++j) {
        const T* row = cols + ((static_cast<std::size_t>(c) * g.k + i) * g.k + j) * ncols;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          if (iy < 0 || iy >= g.h) continue;
          const T* in = row + static_cast<std::size_t>(oy) * g.wo;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            if (ix >= 0 && ix < g.w) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
T stable_softplus(T x) {
  if (x > T(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "add");
  Tensor<T> y = a.value();
  y += b.value();
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape<T>& t, int self) {
    const Tensor<T>& gy = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += gy;
    if (t.requires_grad(ib)) t.grad(ib) += gy;
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "sub");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape<T>& t, int self) {
    const Tensor<T>& gy = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += gy;
    if (t.requires_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      for (std::size_t i = 0; i < gy.numel(); ++i) gb[i] -= gy[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape<T>& t, int self) {
    const Tensor<T>& gy = t.grad(self);
    const Tensor<T>& av = t.value(ia);
    const Tensor<T>& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor<T>& ga = t.grad(ia);
      for (std::size_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      for (std::size_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return unary(a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(a, [](T x) { return stable_sigmoid(x); },
               [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); },
               [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  return unary(a, [slope](T x) { return x > T(0) ? x : slope * x; },
               [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> softplus(const Var<T>& a) {
  return unary(a, [](T x) { return stable_softplus(x); },
               [](T x, T) { return stable_sigmoid(x); });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  const int ia = a.id();
  return a.tape()->record(Tensor<T>::scalar(s), {a}, [ia](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    for (auto& v : t.grad(ia).values()) v += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const T n = static_cast<T>(a.value().numel());
  return scale(sum(a), T(1) / n);
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require_rank(x, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  const int batch = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " vs weight " +
                     shape_string(weight.shape()));
  }
  const bool has_bias = bias.valid();
  if (has_bias && (bias.value().numel() != static_cast<std::size_t>(out))) {
    throw ShapeError("linear: bias " + shape_string(bias.shape()) + " for " +
                     std::to_string(out) + " outputs");
  }
  Tensor<T> y({batch, out});
  {
    ConstMapMat<T> xm(x.value().data(), batch, in);
    ConstMapMat<T> wm(weight.value().data(), out, in);
    MapMat<T> ym(y.data(), batch, out);
    ym.noalias() = xm * wm.transpose();
    if (has_bias) {
      const T* b = bias.value().data();
      for (int r = 0; r < batch; ++r) {
        for (int c = 0; c < out; ++c) ym(r, c) += b[c];
      }
    }
  }
  const int ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : -1;
  std::vector<Var<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return x.tape()->record(std::move(y), parents,
                          [ix, iw, ib, batch, in, out](Tape<T>& t, int self) {
    ConstMapMat<T> gy(t.grad(self).data(), batch, out);
    if (t.requires_grad(ix)) {
      MapMat<T> gx(t.grad(ix).data(), batch, in);
      gx.noalias() += gy * ConstMapMat<T>(t.value(iw).data(), out, in);
    }
    if (t.requires_grad(iw)) {
      MapMat<T> gw(t.grad(iw).data(), out, in);
      gw.noalias() += gy.transpose() * ConstMapMat<T>(t.value(ix).data(), batch, in);
    }
    if (ib >= 0 && t.requires_grad(ib)) {
      T* gb = t.grad(ib).data();
      for (int r = 0; r < batch; ++r) {
        for (int c = 0; c < out; ++c) gb[c] += gy(r, c);
      }
    }
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis < 0 || axis >= static_cast<int>(first.size())) throw ShapeError("concat: bad axis");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<int> sizes;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      ok = static_cast<int>(d) == axis || s[d] == first[d];
    }
    if (!ok) {
      throw ShapeError("concat: " + shape_string(s) + " incompatible with " + shape_string(first) +
                       " on axis " + std::to_string(axis));
    }
    sizes.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit split = split_at(out_shape, axis);
  const std::size_t out_axis = static_cast<std::size_t>(out_shape[axis]);
  Tensor<T> y(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].value().data();
    const std::size_t block = static_cast<std::size_t>(sizes[k]) * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src + o * block, block, y.data() + (o * out_axis + offset) * split.inner);
    }
    offset += static_cast<std::size_t>(sizes[k]);
  }
  std::vector<int> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts.front().tape()->record(
      std::move(y), parts, [ids, sizes, split, out_axis](Tape<T>& t, int self) {
        const T* gy = t.grad(self).data();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::size_t block = static_cast<std::size_t>(sizes[k]) * split.inner;
          if (t.requires_grad(ids[k])) {
            T* g = t.grad(ids[k]).data();
            for (std::size_t o = 0; o < split.outer; ++o) {
              const T* src = gy + (o * out_axis + offset) * split.inner;
              for (std::size_t i = 0; i < block; ++i) g[o * block + i] += src[i];
            }
          }
          offset += static_cast<std::size_t>(sizes[k]);
        }
      });
}

template <typename T>
Var<T> slice(const Var<T>& a, int axis, int start, int length) {
  const Shape& in_shape = a.shape();
  if (axis < 0 || axis >= static_cast<int>(in_shape.size()) || start < 0 || length < 0 ||
      start + length > in_shape[axis]) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                     ") on axis " + std::to_string(axis) + " of " + shape_string(in_shape));
  }
  Shape out_shape = in_shape;
  out_shape[axis] = length;
  const AxisSplit split = split_at(in_shape, axis);
  const std::size_t in_axis = static_cast<std::size_t>(in_shape[axis]);
  const std::size_t block = static_cast<std::size_t>(length) * split.inner;
  Tensor<T> y(out_shape);
  const T* src = a.value().data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(src + (o * in_axis + start) * split.inner, block, y.data() + o * block);
  }
  const int ia = a.id();
  return a.tape()->record(std::move(y), {a},
                          [ia, split, in_axis, block, start](Tape<T>& t, int self) {
    const T* gy = t.grad(self).data();
    T* g = t.grad(ia).data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      T* dst = g + (o * in_axis + start) * split.inner;
      for (std::size_t i = 0; i < block; ++i) dst[i] += gy[o * block + i];
    }
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  require_rank(x, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.o = weight.dim(0);
  g.k = weight.dim(2);
  g.stride = stride;
  g.pad = pad;
  if (weight.dim(1) != g.c || weight.dim(3) != g.k) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " vs weight " +
                     shape_string(weight.shape()));
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k || g.ho < 1 || g.wo < 1) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.k) + " too large for input " +
                     shape_string(x.shape()));
  }
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().numel() != static_cast<std::size_t>(g.o)) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) + " for " +
                     std::to_string(g.o) + " outputs");
  }

  const std::size_t rows = g.col_rows(), ncols = g.col_cols();
  const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
  const std::size_t out_stride = static_cast<std::size_t>(g.o) * ncols;
  Tensor<T> y({g.n, g.o, g.ho, g.wo});
  std::vector<T> cols(rows * ncols);
  ConstMapMat<T> wm(weight.value().data(), g.o, static_cast<Eigen::Index>(rows));
  for (int n = 0; n < g.n; ++n) {
    im2col(x.value().data() + n * in_stride, g, cols.data());
    MapMat<T> ym(y.data() + n * out_stride, g.o, static_cast<Eigen::Index>(ncols));
    ym.noalias() = wm * ConstMapMat<T>(cols.data(), static_cast<Eigen::Index>(rows),
                                       static_cast<Eigen::Index>(ncols));
    if (has_bias) {
      const T* b = bias.value().data();
      for (int o = 0; o < g.o; ++o) ym.row(o).array() += b[o];
    }
  }

  const int ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : -1;
  std::vector<Var<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return x.tape()->record(std::move(y), parents, [ix, iw, ib, g](Tape<T>& t, int self) {
    const std::size_t rows = g.col_rows(), ncols = g.col_cols();
    const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
    const std::size_t out_stride = static_cast<std::size_t>(g.o) * ncols;
    const auto r = static_cast<Eigen::Index>(rows);
    const auto nc = static_cast<Eigen::Index>(ncols);
    const bool need_x = t.requires_grad(ix);
    const bool need_w = t.requires_grad(iw);
    const T* gy = t.grad(self).data();
    std::vector<T> cols(rows * ncols);
    ConstMapMat<T> wm(t.value(iw).data(), g.o, r);
    for (int n = 0; n < g.n; ++n) {
      ConstMapMat<T> gym(gy + n * out_stride, g.o, nc);
      if (need_w) {
        im2col(t.value(ix).data() + n * in_stride, g, cols.data());
        MapMat<T> gw(t.grad(iw).data(), g.o, r);
        gw.noalias() += gym * ConstMapMat<T>(cols.data(), r, nc).transpose();
      }
      if (need_x) {
        MapMat<T> cm(cols.data(), r, nc);
        cm.noalias() = wm.transpose() * gym;
        col2im_add(cols.data(), g, t.grad(ix).data() + n * in_stride);
      }
      if (ib >= 0 && t.requires_grad(ib)) {
        T* gb = t.grad(ib).data();
        // Plain loop: a vectorized sum would depend on buffer alignment.
        for (int o = 0; o < g.o; ++o) {
          T acc = 0;
          for (Eigen::Index j = 0; j < nc; ++j) acc += gym(o, j);
          gb[o] += acc;
        }
      }
    }
  });
}

template <typename T>
Var<T> upsample_nearest2x(const Var<T>& x) {
  require_rank(x, 4, "upsample");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, 2 * h, 2 * w});
  const T* src = x.value().data();
  const std::size_t planes = static_cast<std::size_t>(n) * c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = src + p * h * w;
    T* out = y.data() + p * 4 * h * w;
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) out[i * 2 * w + j] = in[(i / 2) * w + j / 2];
    }
  }
  const int ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix, planes, h, w](Tape<T>& t, int self) {
    const T* gy = t.grad(self).data();
    T* gx = t.grad(ix).data();
    for (std::size_t p = 0; p < planes; ++p) {
      const T* in = gy + p * 4 * h * w;
      T* out = gx + p * h * w;
      for (int i = 0; i < 2 * h; ++i) {
        for (int j = 0; j < 2 * w; ++j) out[(i / 2) * w + j / 2] += in[i * 2 * w + j];
      }
    }
  });
}

template <typename T>
Var<T> avg_pool2x2(const Var<T>& x) {
  require_rank(x, 4, "avg_pool");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = h / 2, wo = w / 2;
  if (ho < 1 || wo < 1) throw ShapeError("avg_pool2x2: input too small " + shape_string(x.shape()));
  Tensor<T> y({n, c, ho, wo});
  const T* src = x.value().data();
  const std::size_t planes = static_cast<std::size_t>(n) * c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = src + p * h * w;
    T* out = y.data() + p * ho * wo;
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) {
        const T* q = in + (2 * i) * w + 2 * j;
        out[i * wo + j] = (q[0] + q[1] + q[w] + q[w + 1]) * T(0.25);
      }
    }
  }
  const int ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix, planes, h, w, ho, wo](Tape<T>& t, int self) {
    const T* gy = t.grad(self).data();
    T* gx = t.grad(ix).data();
    for (std::size_t p = 0; p < planes; ++p) {
      const T* in = gy + p * ho * wo;
      T* out = gx + p * h * w;
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          const T g = in[i * wo + j] * T(0.25);
          T* q = out + (2 * i) * w + 2 * j;
          q[0] += g;
          q[1] += g;
          q[w] += g;
          q[w + 1] += g;
        }
      }
    }
  });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  require_rank(x, 4, "instance_norm");
  const std::size_t planes = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y(x.shape());
  std::vector<T> inv_std(planes);
  const T* src = x.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = src + p * hw;
    T mu = 0;
    for (std::size_t i = 0; i < hw; ++i) mu += in[i];
    mu /= static_cast<T>(hw);
    T var = 0;
    for (std::size_t i = 0; i < hw; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<T>(hw);
    inv_std[p] = T(1) / std::sqrt(var + eps);
    T* out = y.data() + p * hw;
    for (std::size_t i = 0; i < hw; ++i) out[i] = (in[i] - mu) * inv_std[p];
  }
  const int ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix, planes, hw, inv_std](Tape<T>& t, int self) {
    const T* gy = t.grad(self).data();
    const T* yv = t.value(self).data();
    T* gx = t.grad(ix).data();
    const T inv_n = T(1) / static_cast<T>(hw);
    for (std::size_t p = 0; p < planes; ++p) {
      const T* g = gy + p * hw;
      const T* yy = yv + p * hw;
      T mean_g = 0, mean_gy = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        mean_g += g[i];
        mean_gy += g[i] * yy[i];
      }
      mean_g *= inv_n;
      mean_gy *= inv_n;
      T* out = gx + p * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        out[i] += inv_std[p] * (g[i] - mean_g - yy[i] * mean_gy);
      }
    }
  });
}

template <typename T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "l1_mean");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  T s = 0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += std::abs(av[i] - bv[i]);
  const T n = static_cast<T>(av.numel());
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(Tensor<T>::scalar(s / n), {a, b}, [ia, ib, n](Tape<T>& t, int self) {
    const T g = t.grad(self)[0] / n;
    const Tensor<T>& av = t.value(ia);
    const Tensor<T>& bv = t.value(ib);
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    T* ga = need_a ? t.grad(ia).data() : nullptr;
    T* gb = need_b ? t.grad(ib).data() : nullptr;
    for (std::size_t i = 0; i < av.numel(); ++i) {
      const T d = av[i] - bv[i];
      const T sgn = d > T(0) ? g : (d < T(0) ? -g : T(0));
      if (ga) ga[i] += sgn;
      if (gb) gb[i] -= sgn;
    }
  });
}

template <typename T>
Var<T> mse_mean(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mse_mean");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  T s = 0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  const T n = static_cast<T>(av.numel());
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(Tensor<T>::scalar(s / n), {a, b}, [ia, ib, n](Tape<T>& t, int self) {
    const T g = T(2) * t.grad(self)[0] / n;
    const Tensor<T>& av = t.value(ia);
    const Tensor<T>& bv = t.value(ib);
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    T* ga = need_a ? t.grad(ia).data() : nullptr;
    T* gb = need_b ? t.grad(ib).data() : nullptr;
    for (std::size_t i = 0; i < av.numel(); ++i) {
      const T d = g * (av[i] - bv[i]);
      if (ga) ga[i] += d;
      if (gb) gb[i] -= d;
    }
  });
}

template <typename T>
Var<T> weighted_sse(const Var<T>& pred, const Tensor<T>& target, std::span<const T> row_weights) {
  require_rank(pred, 2, "weighted_sse");
  if (pred.shape() != target.shape()) {
    throw ShapeError("weighted_sse: prediction " + shape_string(pred.shape()) + " vs target " +
                     shape_string(target.shape()));
  }
  const int rows = pred.dim(0), cols = pred.dim(1);
  if (row_weights.size() != static_cast<std::size_t>(rows)) {
    throw ShapeError("weighted_sse: " + std::to_string(row_weights.size()) + " weights for " +
                     std::to_string(rows) + " rows");
  }
  const Tensor<T>& p = pred.value();
  T s = 0;
  for (int r = 0; r < rows; ++r) {
    if (row_weights[r] == T(0)) continue;
    T row = 0;
    for (int c = 0; c < cols; ++c) {
      const T d = p[r * cols + c] - target[r * cols + c];
      row += d * d;
    }
    s += row_weights[r] * row;
  }
  std::vector<T> w(row_weights.begin(), row_weights.end());
  const int ip = pred.id();
  return pred.tape()->record(Tensor<T>::scalar(s), {pred},
                             [ip, target, w, rows, cols](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    const Tensor<T>& p = t.value(ip);
    T* gp = t.grad(ip).data();
    for (int r = 0; r < rows; ++r) {
      if (w[r] == T(0)) continue;
      for (int c = 0; c < cols; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * cols + c;
        gp[i] += g * w[r] * T(2) * (p[i] - target[i]);
      }
    }
  });
}

template <typename T>
Var<T> weighted_bce_logits(const Var<T>& logits, std::span<const T> targets,
                           std::span<const T> row_weights) {
  const std::size_t n = logits.value().numel();
  if (targets.size() != n || row_weights.size() != n) {
    throw ShapeError("weighted_bce_logits: " + std::to_string(n) + " logits, " +
                     std::to_string(targets.size()) + " targets, " +
                     std::to_string(row_weights.size()) + " weights");
  }
  const Tensor<T>& x = logits.value();
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (row_weights[i] == T(0)) continue;
    const T z = targets[i];
    T l = 0;
    if (z != T(0)) l += z * stable_softplus(-x[i]);
    if (z != T(1)) l += (T(1) - z) * stable_softplus(x[i]);
    s += row_weights[i] * l;
  }
  std::vector<T> z(targets.begin(), targets.end());
  std::vector<T> w(row_weights.begin(), row_weights.end());
  const int ix = logits.id();
  return logits.tape()->record(Tensor<T>::scalar(s), {logits}, [ix, z, w](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    const Tensor<T>& x = t.value(ix);
    T* gx = t.grad(ix).data();
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (w[i] == T(0)) continue;
      gx[i] += g * w[i] * (stable_sigmoid(x[i]) - z[i]);
    }
  });
}

#define ANCHOR_INSTANTIATE_OPS(T)                                                              \
  template T stable_softplus<T>(T);                                                            \
  template T stable_sigmoid<T>(T);                                                             \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> scale<T>(const Var<T>&, T);                                                  \
  template Var<T> sigmoid<T>(const Var<T>&);                                                   \
  template Var<T> tanh<T>(const Var<T>&);                                                      \
  template Var<T> relu<T>(const Var<T>&);                                                      \
  template Var<T> leaky_relu<T>(const Var<T>&, T);                                             \
  template Var<T> softplus<T>(const Var<T>&);                                                  \
  template Var<T> sum<T>(const Var<T>&);                                                       \
  template Var<T> mean<T>(const Var<T>&);                                                      \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                      \
  template Var<T> concat<T>(const std::vector<Var<T>>&, int);                                  \
  template Var<T> slice<T>(const Var<T>&, int, int, int);                                      \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, int);            \
  template Var<T> upsample_nearest2x<T>(const Var<T>&);                                        \
  template Var<T> avg_pool2x2<T>(const Var<T>&);                                               \
  template Var<T> instance_norm<T>(const Var<T>&, T);                                          \
  template Var<T> l1_mean<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> mse_mean<T>(const Var<T>&, const Var<T>&);                                   \
  template Var<T> weighted_sse<T>(const Var<T>&, const Tensor<T>&, std::span<const T>);        \
  template Var<T> weighted_bce_logits<T>(const Var<T>&, std::span<const T>, std::span<const T>);

ANCHOR_INSTANTIATE_OPS(float)
ANCHOR_INSTANTIATE_OPS(double)

#undef ANCHOR_INSTANTIATE_OPS

}  // namespace anchor::nn
