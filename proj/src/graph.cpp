#include "deepfd/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "deepfd/losses.hpp"

namespace deepfd {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  std::size_t batch, in_channels, height, width;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t stride, pad;
  std::size_t out_h, out_w;

  std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
  std::size_t positions() const { return out_h * out_w; }
  std::size_t columns() const { return batch * positions(); }
};

// Unfolds input patches into a (C*kh*kw) x (N*Ho*Wo) row-major matrix.
template <typename T>
void im2col(const ConvGeometry& g, const T* input, T* cols) {
  const std::size_t ncols = g.columns();
  const std::size_t plane = g.height * g.width;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        T* row = cols + ((c * g.kernel_h + ki) * g.kernel_w + kj) * ncols;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const T* src = input + (n * g.in_channels + c) * plane;
          T* dst = row + n * g.positions();
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                            static_cast<std::ptrdiff_t>(g.pad);
            T* out = dst + oy * g.out_w;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
              std::fill(out, out + g.out_w, T{});
              continue;
            }
            const T* src_row = src + static_cast<std::size_t>(iy) * g.width;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                              static_cast<std::ptrdiff_t>(g.pad);
              out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                            ? T{}
                            : src_row[static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the input gradient.
template <typename T>
void col2im_add(const ConvGeometry& g, const T* cols, T* input_grad) {
  const std::size_t ncols = g.columns();
  const std::size_t plane = g.height * g.width;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const T* row = cols + ((c * g.kernel_h + ki) * g.kernel_w + kj) * ncols;
        for (std::size_t n = 0; n < g.batch; ++n) {
          T* dst = input_grad + (n * g.in_channels + c) * plane;
          const T* src = row + n * g.positions();
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            T* dst_row = dst + static_cast<std::size_t>(iy) * g.width;
            const T* in = src + oy * g.out_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
              dst_row[static_cast<std::size_t>(ix)] += in[ox];
            }
          }
        }
      }
    }
  }
}

// Leading-axis batch size and per-row width of a rank-1 or rank-2 value.
std::pair<std::size_t, std::size_t> as_rows(const Dims& dims, const char* op) {
  if (dims.size() == 1) return {1, dims[0]};
  if (dims.size() == 2) return {dims[0], dims[1]};
  throw ShapeError(std::string(op) + ": expected rank 1 or 2, got " + dims_string(dims));
}

}  // namespace

template <typename T>
VarId Graph<T>::push(Tensor<T> value, bool requires_grad,
                     std::function<void(Graph&, std::size_t)> fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return VarId{nodes_.size() - 1};
}

template <typename T>
std::vector<T>& Graph<T>::grad_buffer(std::size_t index) {
  Node& n = nodes_[index];
  if (n.grad.empty()) n.grad.assign(n.value.size(), T{});
  return n.grad;
}

template <typename T>
std::span<const T> Graph<T>::grad(VarId id) const {
  const Node& n = node(id);
  if (!n.requires_grad) throw StateError("node does not track gradients");
  return n.grad;
}

template <typename T>
VarId Graph<T>::input(Tensor<T> value) {
  return push(std::move(value), false, nullptr);
}

template <typename T>
VarId Graph<T>::parameter(Tensor<T>& param) {
  Tensor<T> copy(param.dims(), param.storage());
  VarId id = push(std::move(copy), true, nullptr);
  nodes_.back().param = &param;
  return id;
}

template <typename T>
VarId Graph<T>::conv2d(VarId xi, VarId wi, VarId bi, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ArgumentError("conv2d: stride must be positive");
  const Tensor<T>& x = value(xi);
  const Tensor<T>& w = value(wi);
  const Tensor<T>& b = value(bi);
  const bool batched = x.rank() == 4;
  if (x.rank() != 3 && !batched)
    throw ShapeError("conv2d: input must be C x H x W or N x C x H x W, got " +
                     dims_string(x.dims()));
  if (w.rank() != 4) throw ShapeError("conv2d: weight must be Cout x Cin x k x k");
  ConvGeometry g{};
  g.batch = batched ? x.dim(0) : 1;
  g.in_channels = x.dim(batched ? 1 : 0);
  g.height = x.dim(batched ? 2 : 1);
  g.width = x.dim(batched ? 3 : 2);
  g.out_channels = w.dim(0);
  g.kernel_h = w.dim(2);
  g.kernel_w = w.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (w.dim(1) != g.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(g.in_channels) +
                     " channels but weight expects " + std::to_string(w.dim(1)));
  if (b.rank() != 1 || b.dim(0) != g.out_channels)
    throw ShapeError("conv2d: bias must have length " + std::to_string(g.out_channels));
  if (g.height + 2 * pad < g.kernel_h || g.width + 2 * pad < g.kernel_w)
    throw ShapeError("conv2d: kernel larger than padded input");
  g.out_h = (g.height + 2 * pad - g.kernel_h) / stride + 1;
  g.out_w = (g.width + 2 * pad - g.kernel_w) / stride + 1;

  const std::size_t K = g.patch(), P = g.positions(), NP = g.columns(), Co = g.out_channels;
  std::vector<T> cols(K * NP);
  im2col(g, x.storage().data(), cols.data());

  RowMatrix<T> y(Co, NP);
  y.noalias() = ConstMatMap<T>(w.storage().data(), Co, K) * ConstMatMap<T>(cols.data(), K, NP);

  Dims out_dims = batched ? Dims{g.batch, Co, g.out_h, g.out_w} : Dims{Co, g.out_h, g.out_w};
  Tensor<T> out(std::move(out_dims));
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < Co; ++co) {
      const T* src = y.data() + co * NP + n * P;
      T* dst = out.storage().data() + (n * Co + co) * P;
      const T bias = b[co];
      for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + bias;
    }

  const bool x_req = requires_grad(xi), w_req = requires_grad(wi), b_req = requires_grad(bi);
  if (!w_req) cols.clear();
  auto fn = [=, cols = std::move(cols)](Graph& graph, std::size_t self) {
    const std::vector<T>& dy = graph.nodes_[self].grad;
    RowMatrix<T> dym(Co, NP);
    for (std::size_t n = 0; n < g.batch; ++n)
      for (std::size_t co = 0; co < Co; ++co)
        std::copy_n(dy.data() + (n * Co + co) * P, P, dym.data() + co * NP + n * P);
    if (w_req) {
      MatMap<T> dw(graph.grad_buffer(wi.index).data(), Co, K);
      dw.noalias() += dym * ConstMatMap<T>(cols.data(), K, NP).transpose();
    }
    if (b_req) {
      auto& db = graph.grad_buffer(bi.index);
      for (std::size_t co = 0; co < Co; ++co) db[co] += dym.row(co).sum();
    }
    if (x_req) {
      const Tensor<T>& weight = graph.nodes_[wi.index].value;
      RowMatrix<T> dcols(K, NP);
      dcols.noalias() = ConstMatMap<T>(weight.storage().data(), Co, K).transpose() * dym;
      col2im_add(g, dcols.data(), graph.grad_buffer(xi.index).data());
    }
  };
  return push(std::move(out), x_req || w_req || b_req, std::move(fn));
}

template <typename T>
VarId Graph<T>::relu(VarId xi) {
  const Tensor<T>& x = value(xi);
  Tensor<T> out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{} ? x[i] : T{};
  auto fn = [xi](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    const auto& xv = graph.nodes_[xi.index].value;
    auto& dx = graph.grad_buffer(xi.index);
    // Subgradient at exactly zero is zero.
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (xv[i] > T{}) dx[i] += dy[i];
  };
  return push(std::move(out), requires_grad(xi), std::move(fn));
}

template <typename T>
VarId Graph<T>::add(VarId ai, VarId bi) {
  const Tensor<T>& a = value(ai);
  const Tensor<T>& b = value(bi);
  if (a.dims() != b.dims())
    throw ShapeError("add: " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
  Tensor<T> out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  const bool a_req = requires_grad(ai), b_req = requires_grad(bi);
  auto fn = [=](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    for (auto [req, id] : {std::pair{a_req, ai}, std::pair{b_req, bi}}) {
      if (!req) continue;
      auto& d = graph.grad_buffer(id.index);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  };
  return push(std::move(out), a_req || b_req, std::move(fn));
}

template <typename T>
VarId Graph<T>::flatten(VarId xi) {
  const Tensor<T>& x = value(xi);
  Tensor<T> out = x.rank() == 4 ? Tensor<T>(Dims{x.dim(0), x.size() / x.dim(0)}, x.storage())
                                : Tensor<T>(Dims{x.size()}, x.storage());
  auto fn = [xi](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    auto& dx = graph.grad_buffer(xi.index);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  };
  return push(std::move(out), requires_grad(xi), std::move(fn));
}

template <typename T>
VarId Graph<T>::linear(VarId xi, VarId wi, VarId bi) {
  const Tensor<T>& x = value(xi);
  const Tensor<T>& w = value(wi);
  const Tensor<T>& b = value(bi);
  const auto [N, n] = as_rows(x.dims(), "linear");
  if (w.rank() != 2 || w.dim(1) != n)
    throw ShapeError("linear: input length " + std::to_string(n) + " vs weight " +
                     dims_string(w.dims()));
  const std::size_t m = w.dim(0);
  if (b.rank() != 1 || b.dim(0) != m)
    throw ShapeError("linear: bias must have length " + std::to_string(m));

  Tensor<T> out(x.rank() == 1 ? Dims{m} : Dims{N, m});
  MatMap<T> y(out.storage().data(), N, m);
  y.noalias() = ConstMatMap<T>(x.storage().data(), N, n) *
                ConstMatMap<T>(w.storage().data(), m, n).transpose();
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < m; ++c) y(r, c) += b[c];

  const bool x_req = requires_grad(xi), w_req = requires_grad(wi), b_req = requires_grad(bi);
  auto fn = [=, N = N, n = n](Graph& graph, std::size_t self) {
    ConstMatMap<T> dy(graph.nodes_[self].grad.data(), N, m);
    if (w_req) {
      MatMap<T> dw(graph.grad_buffer(wi.index).data(), m, n);
      dw.noalias() += dy.transpose() *
                      ConstMatMap<T>(graph.nodes_[xi.index].value.storage().data(), N, n);
    }
    if (b_req) {
      auto& db = graph.grad_buffer(bi.index);
      for (std::size_t c = 0; c < m; ++c) db[c] += dy.col(c).sum();
    }
    if (x_req) {
      MatMap<T> dx(graph.grad_buffer(xi.index).data(), N, n);
      dx.noalias() += dy * ConstMatMap<T>(graph.nodes_[wi.index].value.storage().data(), m, n);
    }
  };
  return push(std::move(out), x_req || w_req || b_req, std::move(fn));
}

template <typename T>
VarId Graph<T>::global_avg_pool(VarId xi) {
  const Tensor<T>& x = value(xi);
  if (x.rank() != 3 && x.rank() != 4)
    throw ShapeError("global_avg_pool: expected C x H x W or N x C x H x W");
  const bool batched = x.rank() == 4;
  const std::size_t N = batched ? x.dim(0) : 1;
  const std::size_t C = x.dim(batched ? 1 : 0);
  const std::size_t HW = x.size() / (N * C);
  Tensor<T> out(batched ? Dims{N, C} : Dims{C});
  for (std::size_t i = 0; i < N * C; ++i) {
    T acc{};
    for (std::size_t p = 0; p < HW; ++p) acc += x[i * HW + p];
    out[i] = acc / static_cast<T>(HW);
  }
  auto fn = [=](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    auto& dx = graph.grad_buffer(xi.index);
    for (std::size_t i = 0; i < N * C; ++i) {
      const T share = dy[i] / static_cast<T>(HW);
      for (std::size_t p = 0; p < HW; ++p) dx[i * HW + p] += share;
    }
  };
  return push(std::move(out), requires_grad(xi), std::move(fn));
}

template <typename T>
VarId Graph<T>::softmax(VarId xi) {
  const Tensor<T>& x = value(xi);
  const auto [N, n] = as_rows(x.dims(), "softmax");
  Tensor<T> out(x.dims());
  for (std::size_t r = 0; r < N; ++r) {
    const T* in = x.storage().data() + r * n;
    T* o = out.storage().data() + r * n;
    const T mx = *std::max_element(in, in + n);
    T total{};
    for (std::size_t i = 0; i < n; ++i) total += (o[i] = std::exp(in[i] - mx));
    for (std::size_t i = 0; i < n; ++i) o[i] /= total;
  }
  auto fn = [=, N = N, n = n](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    const auto& y = graph.nodes_[self].value;
    auto& dx = graph.grad_buffer(xi.index);
    for (std::size_t r = 0; r < N; ++r) {
      T dot{};
      for (std::size_t i = 0; i < n; ++i) dot += dy[r * n + i] * y[r * n + i];
      for (std::size_t i = 0; i < n; ++i) dx[r * n + i] += y[r * n + i] * (dy[r * n + i] - dot);
    }
  };
  return push(std::move(out), requires_grad(xi), std::move(fn));
}

template <typename T>
VarId Graph<T>::rows(VarId xi, std::size_t begin, std::size_t end) {
  const Tensor<T>& x = value(xi);
  if (x.rank() < 2 || begin >= end || end > x.dim(0))
    throw ShapeError("rows: invalid range on " + dims_string(x.dims()));
  const std::size_t stride = x.size() / x.dim(0);
  Dims dims = x.dims();
  dims[0] = end - begin;
  Tensor<T> out(dims, std::vector<T>(x.storage().begin() + begin * stride,
                                     x.storage().begin() + end * stride));
  auto fn = [=](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    auto& dx = graph.grad_buffer(xi.index);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[begin * stride + i] += dy[i];
  };
  return push(std::move(out), requires_grad(xi), std::move(fn));
}

template <typename T>
VarId Graph<T>::l2_distance(VarId ai, VarId bi) {
  const Tensor<T>& a = value(ai);
  const Tensor<T>& b = value(bi);
  if (a.dims() != b.dims())
    throw ShapeError("l2_distance: " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
  const auto [N, n] = as_rows(a.dims(), "l2_distance");
  Tensor<T> out(Dims{N});
  for (std::size_t r = 0; r < N; ++r) {
    T acc{};
    for (std::size_t i = 0; i < n; ++i) {
      const T d = a[r * n + i] - b[r * n + i];
      acc += d * d;
    }
    out[r] = std::sqrt(acc);
  }
  const bool a_req = requires_grad(ai), b_req = requires_grad(bi);
  auto fn = [=, N = N, n = n](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    const auto& dist = graph.nodes_[self].value;
    const auto& av = graph.nodes_[ai.index].value;
    const auto& bv = graph.nodes_[bi.index].value;
    std::vector<T>* da = a_req ? &graph.grad_buffer(ai.index) : nullptr;
    std::vector<T>* db = b_req ? &graph.grad_buffer(bi.index) : nullptr;
    for (std::size_t r = 0; r < N; ++r) {
      if (dist[r] == T{}) continue;  // subgradient 0 at identical inputs
      const T scale = dy[r] / dist[r];
      for (std::size_t i = 0; i < n; ++i) {
        const T g = scale * (av[r * n + i] - bv[r * n + i]);
        if (da) (*da)[r * n + i] += g;
        if (db) (*db)[r * n + i] -= g;
      }
    }
  };
  return push(std::move(out), a_req || b_req, std::move(fn));
}

template <typename T>
VarId Graph<T>::contrastive_loss(VarId ei, std::span<const int> p, T margin) {
  const Tensor<T>& e = value(ei);
  if (e.rank() != 1 || e.size() != p.size())
    throw ShapeError("contrastive_loss: " + std::to_string(p.size()) + " labels for " +
                     dims_string(e.dims()) + " distances");
  Tensor<T> out(e.dims());
  std::vector<int> labels(p.begin(), p.end());
  for (std::size_t i = 0; i < e.size(); ++i)
    out[i] = static_cast<T>(deepfd::contrastive_loss(labels[i], static_cast<double>(e[i]),
                                                     static_cast<double>(margin)));
  auto fn = [=, labels = std::move(labels)](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    const auto& ev = graph.nodes_[ei.index].value;
    auto& de = graph.grad_buffer(ei.index);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      // d/de of 1/2 (p e^2 + (1-p) max(0, m-e)^2); hinge subgradient 0 at e == m.
      const T hinge = std::max(T{}, margin - ev[i]);
      const T d = labels[i] == 1 ? ev[i] : -hinge;
      de[i] += dy[i] * d;
    }
  };
  return push(std::move(out), requires_grad(ei), std::move(fn));
}

template <typename T>
VarId Graph<T>::cross_entropy(VarId li, std::span<const int> y) {
  const Tensor<T>& logits = value(li);
  const auto [N, n] = as_rows(logits.dims(), "cross_entropy");
  if (y.size() != N)
    throw ShapeError("cross_entropy: " + std::to_string(y.size()) + " labels for " +
                     std::to_string(N) + " rows");
  std::vector<int> labels(y.begin(), y.end());
  for (int label : labels)
    if (label < 0 || static_cast<std::size_t>(label) >= n)
      throw ArgumentError("cross_entropy: label " + std::to_string(label) + " out of range");
  Tensor<T> out(Dims{N});
  for (std::size_t r = 0; r < N; ++r) {
    const T* z = logits.storage().data() + r * n;
    const T mx = *std::max_element(z, z + n);
    T total{};
    for (std::size_t i = 0; i < n; ++i) total += std::exp(z[i] - mx);
    out[r] = mx + std::log(total) - z[labels[r]];
  }
  auto fn = [=, N = N, n = n, labels = std::move(labels)](Graph& graph, std::size_t self) {
    const auto& dy = graph.nodes_[self].grad;
    const auto& zv = graph.nodes_[li.index].value;
    auto& dz = graph.grad_buffer(li.index);
    for (std::size_t r = 0; r < N; ++r) {
      const T* z = zv.storage().data() + r * n;
      const T mx = *std::max_element(z, z + n);
      T total{};
      for (std::size_t i = 0; i < n; ++i) total += std::exp(z[i] - mx);
      for (std::size_t i = 0; i < n; ++i) {
        const T prob = std::exp(z[i] - mx) / total;
        dz[r * n + i] += dy[r] * (prob - (static_cast<int>(i) == labels[r] ? T{1} : T{}));
      }
    }
  };
  return push(std::move(out), requires_grad(li), std::move(fn));
}

template <typename T>
VarId Graph<T>::sum(VarId xi) {
  const Tensor<T>& x = value(xi);
  T acc{};
  for (T v : x.storage()) acc += v;
  auto fn = [xi](Graph& graph, std::size_t self) {
    const T g = graph.nodes_[self].grad[0];
    auto& dx = graph.grad_buffer(xi.index);
    for (auto& d : dx) d += g;
  };
  return push(Tensor<T>(Dims{1}, acc), requires_grad(xi), std::move(fn));
}

template <typename T>
VarId Graph<T>::mean(VarId xi) {
  const Tensor<T>& x = value(xi);
  T acc{};
  for (T v : x.storage()) acc += v;
  const T count = static_cast<T>(x.size());
  auto fn = [xi, count](Graph& graph, std::size_t self) {
    const T g = graph.nodes_[self].grad[0] / count;
    auto& dx = graph.grad_buffer(xi.index);
    for (auto& d : dx) d += g;
  };
  return push(Tensor<T>(Dims{1}, acc / count), requires_grad(xi), std::move(fn));
}

template <typename T>
void Graph<T>::backward(VarId loss) {
  Node& root = node(loss);
  if (root.value.size() != 1)
    throw ArgumentError("backward: loss must be a scalar, got " + dims_string(root.value.dims()));
  if (!root.requires_grad) throw ArgumentError("backward: loss does not depend on any parameter");
  for (auto& n : nodes_) n.grad.clear();
  root.grad.assign(1, T{1});
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      auto dst = n.param->ensure_grad();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace deepfd
