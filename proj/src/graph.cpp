#include "bdtf/graph.hpp"

#include <cassert>
#include <cmath>

#include "bdtf/error.hpp"
#include "bdtf/kernels.hpp"
#include "bdtf/params.hpp"

namespace bdtf {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLnEps = 1e-5;
}  // namespace

int Graph::push(Tensor value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

int Graph::leaf(Tensor value, bool needs_grad) { return push(std::move(value), needs_grad); }

int Graph::param(const Param& p, int param_index) {
  const int id = push(p.value, true);
  param_links_.emplace_back(id, param_index);
  return id;
}

int Graph::add(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.size() == vb.size());
  Tensor out = va;
  for (i64 i = 0; i < out.size(); ++i) out(i) += vb(i);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, b] {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i);
      }
      if (nodes_[b].needs_grad) {
        Tensor& gb = grad_buf(b);
        for (i64 i = 0; i < g.size(); ++i) gb(i) += g(i);
      }
    };
  return id;
}

int Graph::sub(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.size() == vb.size());
  Tensor out = va;
  for (i64 i = 0; i < out.size(); ++i) out(i) -= vb(i);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, b] {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i);
      }
      if (nodes_[b].needs_grad) {
        Tensor& gb = grad_buf(b);
        for (i64 i = 0; i < g.size(); ++i) gb(i) -= g(i);
      }
    };
  return id;
}

int Graph::mul(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.size() == vb.size());
  Tensor out = va;
  for (i64 i = 0; i < out.size(); ++i) out(i) *= vb(i);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, b] {
      const Tensor& g = nodes_[id].grad;
      const Tensor& va2 = nodes_[a].value;
      const Tensor& vb2 = nodes_[b].value;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i) * vb2(i);
      }
      if (nodes_[b].needs_grad) {
        Tensor& gb = grad_buf(b);
        for (i64 i = 0; i < g.size(); ++i) gb(i) += g(i) * va2(i);
      }
    };
  return id;
}

int Graph::smul(int a, double s) {
  Tensor out = val(a);
  for (auto& x : out.data) x *= s;
  const bool ng = nodes_[a].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, s] {
      const Tensor& g = nodes_[id].grad;
      Tensor& ga = grad_buf(a);
      for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i) * s;
    };
  return id;
}

int Graph::add_rowvec(int a, int v) {
  const Tensor& va = val(a);
  const Tensor& vv = val(v);
  const i64 m = va.rows(), n = va.cols();
  assert(vv.size() == n);
  Tensor out = va;
  for (i64 i = 0; i < m; ++i)
    for (i64 j = 0; j < n; ++j) out(i, j) += vv(j);
  const bool ng = nodes_[a].needs_grad || nodes_[v].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, v, m, n] {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i);
      }
      if (nodes_[v].needs_grad) {
        Tensor& gv = grad_buf(v);
        for (i64 i = 0; i < m; ++i)
          for (i64 j = 0; j < n; ++j) gv(j) += g(i * n + j);
      }
    };
  return id;
}

int Graph::matmul(int a, int b, i64 m, i64 k, i64 n, bool trans_a, bool trans_b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  Tensor out({m, n});
  kern::matmul(va, vb, out, m, k, n, trans_a, trans_b, false);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, b, m, k, n, trans_a, trans_b] {
      const Tensor& g = nodes_[id].grad;  // m x n
      const Tensor& va2 = nodes_[a].value;
      const Tensor& vb2 = nodes_[b].value;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        // dA (logical m x k) = G * B^T; respect A's stored layout.
        if (!trans_a)
          kern::matmul(g.data.data(), vb2.data.data(), ga.data.data(), m, n, k, false, !trans_b,
                       true);
        else
          // stored layout k x m: dA_stored = opB(B) * G^T
          kern::matmul(vb2.data.data(), g.data.data(), ga.data.data(), k, n, m, trans_b, true,
                       true);
      }
      if (nodes_[b].needs_grad) {
        Tensor& gb = grad_buf(b);
        // dB (logical k x n) = A^T * G
        if (!trans_b)
          kern::matmul(va2.data.data(), g.data.data(), gb.data.data(), k, m, n, !trans_a, false,
                       true);
        else
          // stored layout n x k: dB_stored = G^T * opA(A)
          kern::matmul(g.data.data(), va2.data.data(), gb.data.data(), n, m, k, true, trans_a,
                       true);
      }
    };
  return id;
}

int Graph::gelu(int a) {
  const Tensor& va = val(a);
  Tensor out = va;
  for (auto& x : out.data) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  const bool ng = nodes_[a].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a] {
      const Tensor& g = nodes_[id].grad;
      const Tensor& x = nodes_[a].value;
      Tensor& ga = grad_buf(a);
      for (i64 i = 0; i < g.size(); ++i) {
        const double xi = x(i);
        const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
        ga(i) += g(i) * (cdf + xi * pdf);
      }
    };
  return id;
}

int Graph::sigmoid(int a) {
  const Tensor& va = val(a);
  Tensor out = va;
  for (auto& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  const bool ng = nodes_[a].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a] {
      const Tensor& g = nodes_[id].grad;
      const Tensor& y = nodes_[id].value;
      Tensor& ga = grad_buf(a);
      for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i) * y(i) * (1.0 - y(i));
    };
  return id;
}

int Graph::layer_norm(int x, int gain, int bias) {
  const Tensor& vx = val(x);
  const i64 m = vx.rows(), n = vx.cols();
  const Tensor& vg = val(gain);
  const Tensor& vb = val(bias);
  assert(vg.size() == n && vb.size() == n);
  Tensor out({m, n});
  Tensor xhat({m, n});
  std::vector<double> inv_sigma(static_cast<size_t>(m));
  for (i64 i = 0; i < m; ++i) {
    double mean = 0.0;
    for (i64 j = 0; j < n; ++j) mean += vx(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (i64 j = 0; j < n; ++j) {
      const double d = vx(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_sigma[static_cast<size_t>(i)] = is;
    for (i64 j = 0; j < n; ++j) {
      const double xh = (vx(i, j) - mean) * is;
      xhat(i, j) = xh;
      out(i, j) = xh * vg(j) + vb(j);
    }
  }
  const bool ng = nodes_[x].needs_grad || nodes_[gain].needs_grad || nodes_[bias].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng) {
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto is = std::make_shared<std::vector<double>>(std::move(inv_sigma));
    nodes_[id].back = [this, id, x, gain, bias, xh, is, m, n] {
      const Tensor& g = nodes_[id].grad;
      const Tensor& vg2 = nodes_[gain].value;
      if (nodes_[gain].needs_grad) {
        Tensor& gg = grad_buf(gain);
        for (i64 i = 0; i < m; ++i)
          for (i64 j = 0; j < n; ++j) gg(j) += g(i * n + j) * (*xh)(i, j);
      }
      if (nodes_[bias].needs_grad) {
        Tensor& gb = grad_buf(bias);
        for (i64 i = 0; i < m; ++i)
          for (i64 j = 0; j < n; ++j) gb(j) += g(i * n + j);
      }
      if (nodes_[x].needs_grad) {
        Tensor& gx = grad_buf(x);
        for (i64 i = 0; i < m; ++i) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (i64 j = 0; j < n; ++j) {
            const double dxh = g(i * n + j) * vg2(j);
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * (*xh)(i, j);
          }
          mean_dxhat /= static_cast<double>(n);
          mean_dxhat_xhat /= static_cast<double>(n);
          const double s = (*is)[static_cast<size_t>(i)];
          for (i64 j = 0; j < n; ++j) {
            const double dxh = g(i * n + j) * vg2(j);
            gx(i * n + j) += s * (dxh - mean_dxhat - (*xh)(i, j) * mean_dxhat_xhat);
          }
        }
      }
    };
  }
  return id;
}

int Graph::softmax_rows(int x, const std::vector<std::uint8_t>* key_mask) {
  const Tensor& vx = val(x);
  const i64 m = vx.rows(), n = vx.cols();
  Tensor out({m, n});
  for (i64 i = 0; i < m; ++i) {
    double mx = -1e300;
    bool any = false;
    for (i64 j = 0; j < n; ++j) {
      if (key_mask && !(*key_mask)[static_cast<size_t>(j)]) continue;
      any = true;
      mx = std::max(mx, vx(i, j));
    }
    if (!any) throw Error("AllKeysMasked", "softmax row has no attendable key");
    double z = 0.0;
    for (i64 j = 0; j < n; ++j) {
      if (key_mask && !(*key_mask)[static_cast<size_t>(j)]) {
        out(i, j) = 0.0;
        continue;
      }
      const double e = std::exp(vx(i, j) - mx);
      out(i, j) = e;
      z += e;
    }
    for (i64 j = 0; j < n; ++j) out(i, j) /= z;
  }
  const bool ng = nodes_[x].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, x, m, n] {
      const Tensor& g = nodes_[id].grad;
      const Tensor& p = nodes_[id].value;
      Tensor& gx = grad_buf(x);
      for (i64 i = 0; i < m; ++i) {
        double dotgp = 0.0;
        for (i64 j = 0; j < n; ++j) dotgp += g(i * n + j) * p(i * n + j);
        for (i64 j = 0; j < n; ++j)
          gx(i * n + j) += p(i * n + j) * (g(i * n + j) - dotgp);
      }
    };
  return id;
}

int Graph::reshape(int a, std::vector<i64> shape) {
  const Tensor& va = val(a);
  assert(Tensor::numel(shape) == va.size());
  Tensor out(std::move(shape), va.data);
  const bool ng = nodes_[a].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a] {
      const Tensor& g = nodes_[id].grad;
      Tensor& ga = grad_buf(a);
      for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i);
    };
  return id;
}

int Graph::gather(int a, std::shared_ptr<const std::vector<i64>> idx, std::vector<i64> out_shape) {
  const Tensor& va = val(a);
  assert(Tensor::numel(out_shape) == static_cast<i64>(idx->size()));
  Tensor out(std::move(out_shape));
  for (size_t i = 0; i < idx->size(); ++i) out.data[i] = va.data[static_cast<size_t>((*idx)[i])];
  const bool ng = nodes_[a].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, idx] {
      const Tensor& g = nodes_[id].grad;
      Tensor& ga = grad_buf(a);
      for (size_t i = 0; i < idx->size(); ++i)
        ga.data[static_cast<size_t>((*idx)[i])] += g.data[i];
    };
  return id;
}

int Graph::concat(const std::vector<int>& parts, std::vector<i64> out_shape) {
  i64 total = 0;
  bool ng = false;
  for (int p : parts) {
    total += val(p).size();
    ng = ng || nodes_[p].needs_grad;
  }
  assert(Tensor::numel(out_shape) == total);
  Tensor out(std::move(out_shape));
  i64 off = 0;
  for (int p : parts) {
    const Tensor& v = val(p);
    for (i64 i = 0; i < v.size(); ++i) out(off + i) = v(i);
    off += v.size();
  }
  auto parts_copy = std::make_shared<std::vector<int>>(parts);
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, parts_copy] {
      const Tensor& g = nodes_[id].grad;
      i64 off2 = 0;
      for (int p : *parts_copy) {
        const i64 sz = nodes_[p].value.size();
        if (nodes_[p].needs_grad) {
          Tensor& gp = grad_buf(p);
          for (i64 i = 0; i < sz; ++i) gp(i) += g(off2 + i);
        }
        off2 += sz;
      }
    };
  return id;
}

int Graph::concat_cols(const std::vector<int>& parts) {
  const i64 m = val(parts[0]).rows();
  i64 total_w = 0;
  bool ng = false;
  for (int p : parts) {
    assert(val(p).rows() == m);
    total_w += val(p).cols();
    ng = ng || nodes_[p].needs_grad;
  }
  Tensor out({m, total_w});
  i64 off = 0;
  for (int p : parts) {
    const Tensor& v = val(p);
    const i64 w = v.cols();
    for (i64 i = 0; i < m; ++i)
      for (i64 j = 0; j < w; ++j) out(i, off + j) = v(i, j);
    off += w;
  }
  auto parts_copy = std::make_shared<std::vector<int>>(parts);
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, parts_copy, m, total_w] {
      const Tensor& g = nodes_[id].grad;
      i64 off2 = 0;
      for (int p : *parts_copy) {
        const i64 w = nodes_[p].value.cols();
        if (nodes_[p].needs_grad) {
          Tensor& gp = grad_buf(p);
          for (i64 i = 0; i < m; ++i)
            for (i64 j = 0; j < w; ++j) gp(i * w + j) += g(i * total_w + off2 + j);
        }
        off2 += w;
      }
    };
  return id;
}

int Graph::sum(int a) {
  const Tensor& va = val(a);
  double s = 0.0;
  for (double x : va.data) s += x;
  const bool ng = nodes_[a].needs_grad;
  const int id = push(Tensor::scalar(s), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a] {
      const double g = nodes_[id].grad(0);
      Tensor& ga = grad_buf(a);
      for (i64 i = 0; i < ga.size(); ++i) ga(i) += g;
    };
  return id;
}

int Graph::dot(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.size() == vb.size());
  double s = 0.0;
  for (i64 i = 0; i < va.size(); ++i) s += va(i) * vb(i);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const int id = push(Tensor::scalar(s), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, b] {
      const double g = nodes_[id].grad(0);
      const Tensor& va2 = nodes_[a].value;
      const Tensor& vb2 = nodes_[b].value;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        for (i64 i = 0; i < ga.size(); ++i) ga(i) += g * vb2(i);
      }
      if (nodes_[b].needs_grad) {
        Tensor& gb = grad_buf(b);
        for (i64 i = 0; i < gb.size(); ++i) gb(i) += g * va2(i);
      }
    };
  return id;
}

int Graph::cosine(int a, int b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  assert(va.size() == vb.size());
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (i64 i = 0; i < va.size(); ++i) {
    ab += va(i) * vb(i);
    aa += va(i) * va(i);
    bb += vb(i) * vb(i);
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double c = ab / (na * nb);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const int id = push(Tensor::scalar(c), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, b, na, nb, c] {
      const double g = nodes_[id].grad(0);
      const Tensor& va2 = nodes_[a].value;
      const Tensor& vb2 = nodes_[b].value;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        for (i64 i = 0; i < ga.size(); ++i)
          ga(i) += g * (vb2(i) / (na * nb) - c * va2(i) / (na * na));
      }
      if (nodes_[b].needs_grad) {
        Tensor& gb = grad_buf(b);
        for (i64 i = 0; i < gb.size(); ++i)
          gb(i) += g * (va2(i) / (na * nb) - c * vb2(i) / (nb * nb));
      }
    };
  return id;
}

int Graph::scale_by(int a, int s) {
  const Tensor& va = val(a);
  const double sv = val(s)(0);
  Tensor out = va;
  for (auto& x : out.data) x *= sv;
  const bool ng = nodes_[a].needs_grad || nodes_[s].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, s, sv] {
      const Tensor& g = nodes_[id].grad;
      const Tensor& va2 = nodes_[a].value;
      if (nodes_[a].needs_grad) {
        Tensor& ga = grad_buf(a);
        for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i) * sv;
      }
      if (nodes_[s].needs_grad) {
        Tensor& gs = grad_buf(s);
        double acc = 0.0;
        for (i64 i = 0; i < g.size(); ++i) acc += g(i) * va2(i);
        gs(0) += acc;
      }
    };
  return id;
}

int Graph::masked_sse(int pred, const Tensor& target, const Tensor& mask) {
  const Tensor& vp = val(pred);
  assert(vp.size() == target.size() && vp.size() == mask.size());
  double s = 0.0;
  for (i64 i = 0; i < vp.size(); ++i) {
    const double d = target(i) - vp(i);
    s += mask(i) * d * d;
  }
  const bool ng = nodes_[pred].needs_grad;
  const int id = push(Tensor::scalar(s), ng, {});
  if (ng) {
    auto t = std::make_shared<Tensor>(target);
    auto m = std::make_shared<Tensor>(mask);
    nodes_[id].back = [this, id, pred, t, m] {
      const double g = nodes_[id].grad(0);
      const Tensor& vp2 = nodes_[pred].value;
      Tensor& gp = grad_buf(pred);
      for (i64 i = 0; i < gp.size(); ++i)
        gp(i) += g * (-2.0) * (*m)(i) * ((*t)(i)-vp2(i));
    };
  }
  return id;
}

int Graph::dropout(int a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  const Tensor& va = val(a);
  auto keep = std::make_shared<std::vector<double>>(static_cast<size_t>(va.size()));
  const double scale = 1.0 / (1.0 - rate);
  Tensor out = va;
  for (i64 i = 0; i < va.size(); ++i) {
    const double k = rng.uniform() < rate ? 0.0 : scale;
    (*keep)[static_cast<size_t>(i)] = k;
    out(i) *= k;
  }
  const bool ng = nodes_[a].needs_grad;
  const int id = push(std::move(out), ng, {});
  if (ng)
    nodes_[id].back = [this, id, a, keep] {
      const Tensor& g = nodes_[id].grad;
      Tensor& ga = grad_buf(a);
      for (i64 i = 0; i < g.size(); ++i) ga(i) += g(i) * (*keep)[static_cast<size_t>(i)];
    };
  return id;
}

void Graph::backward(int loss_id) {
  assert(val(loss_id).size() == 1);
  grad_buf(loss_id)(0) = 1.0;
  for (int i = loss_id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.needs_grad || n.grad.empty() || !n.back) continue;
    n.back();
  }
}

}  // namespace bdtf
