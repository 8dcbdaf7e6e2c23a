#include "reltask/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>

namespace reltask {

Tensor Activation::apply(const Tensor& t) const {
  Tensor out = t;
  switch (kind) {
    case Kind::kCosine:
      for (std::size_t i = 0; i < out.size(); ++i)
        out.at(i) = std::cos(b1 * t.at(i) + b2);
      break;
    case Kind::kRelu:
      for (std::size_t i = 0; i < out.size(); ++i)
        out.at(i) = t.at(i) > 0.0 ? t.at(i) : 0.0;
      break;
    case Kind::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::tanh(t.at(i));
      break;
  }
  return out;
}

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_ready = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  Tensor& ensure_grad() {
    if (!grad_ready) {
      grad = Tensor(value.shape());
      grad_ready = true;
    }
    return grad;
  }
};

}  // namespace detail

using detail::Node;

namespace {

std::shared_ptr<Node> make_node(Tensor value,
                                std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

void accumulate(Node& node, const Tensor& g) {
  if (!node.requires_grad) return;
  Tensor& acc = node.ensure_grad();
  if (acc.same_shape(g)) {
    acc += g;
    return;
  }
  // Rank-1 leaves come back from matmul as 1 x n or n x 1; same layout.
  if (acc.size() != g.size())
    fail(ErrorKind::kDimension, "gradient accumulation: size mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc.at(i) += g.at(i);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    fail(ErrorKind::kDimension, std::string(op) + ": shape mismatch");
}

}  // namespace

Var Var::param(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var Var::input(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

const Tensor& Var::value() const { return node_->value; }

const Tensor& Var::grad() const {
  if (!node_->grad_ready)
    fail(ErrorKind::kContract, "Var::grad: no gradient has been accumulated");
  return node_->grad;
}

bool Var::has_grad() const { return node_ && node_->grad_ready; }

bool Var::requires_grad() const { return node_->requires_grad; }

void Var::zero_grad() {
  node_->grad_ready = false;
  node_->grad = Tensor();
}

void Var::set_value(Tensor value) {
  if (!node_->parents.empty())
    fail(ErrorKind::kContract, "Var::set_value: only leaves may be reassigned");
  node_->value = std::move(value);
}

void Var::backward() {
  if (!node_) fail(ErrorKind::kContract, "backward: empty Var");
  if (node_->value.size() != 1)
    fail(ErrorKind::kContract, "backward: root must be scalar");
  if (node_->backward_done)
    fail(ErrorKind::kContract,
         "backward: already ran on this root; rebuild the graph first");
  node_->backward_done = true;

  // Reverse topological order over the requires_grad subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next_child] = stack.back();
    if (next_child < n->parents.size()) {
      Node* child = n->parents[next_child++].get();
      if (child->requires_grad && visited.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad().at(0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad_ready) n->backprop(*n);
  }
}

// --- elementwise ------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return Var(make_node(a.value() + b.value(), {a.node(), b.node()},
                       [](Node& self) {
                         accumulate(*self.parents[0], self.grad);
                         accumulate(*self.parents[1], self.grad);
                       }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return Var(make_node(a.value() - b.value(), {a.node(), b.node()},
                       [](Node& self) {
                         accumulate(*self.parents[0], self.grad);
                         if (self.parents[1]->requires_grad) {
                           Tensor neg = self.grad;
                           neg *= -1.0;
                           accumulate(*self.parents[1], neg);
                         }
                       }));
}

Var mul_elem(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul_elem");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= b.value().at(i);
  return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.at(i) *= pb.value.at(i);
      accumulate(pa, g);
    }
    if (pb.requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.at(i) *= pa.value.at(i);
      accumulate(pb, g);
    }
  }));
}

Var scale(const Var& a, double c) {
  return Var(make_node(a.value() * c, {a.node()}, [c](Node& self) {
    Tensor g = self.grad;
    g *= c;
    accumulate(*self.parents[0], g);
  }));
}

Var add_const(const Var& a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += c;
  return Var(make_node(std::move(out), {a.node()}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
  }));
}

Var add_scaled(const Var& a, const Var& s, const Var& b) {
  check_same_shape(a, b, "add_scaled");
  if (s.value().size() != 1)
    fail(ErrorKind::kDimension, "add_scaled: scale must be scalar");
  const double sv = s.value().at(0);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += sv * b.value().at(i);
  return Var(
      make_node(std::move(out), {a.node(), s.node(), b.node()}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& ps = *self.parents[1];
        Node& pb = *self.parents[2];
        accumulate(pa, self.grad);
        if (ps.requires_grad) {
          Tensor g({1});
          g.at(0) = dot(self.grad, pb.value);
          accumulate(ps, g);
        }
        if (pb.requires_grad) {
          Tensor g = self.grad;
          g *= ps.value.at(0);
          accumulate(pb, g);
        }
      }));
}

// --- linear algebra ----------------------------------------------------------

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  Tensor out = matmul(a.value(), b.value(), trans_a, trans_b);
  return Var(make_node(
      std::move(out), {a.node(), b.node()}, [trans_a, trans_b](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const Tensor& g = self.grad;
        if (pa.requires_grad) {
          Tensor da;
          if (!trans_a && !trans_b)
            da = matmul(g, pb.value, false, true);
          else if (!trans_a && trans_b)
            da = matmul(g, pb.value, false, false);
          else if (trans_a && !trans_b)
            da = matmul(pb.value, g, false, true);
          else
            da = matmul(pb.value, g, true, true);
          accumulate(pa, da);
        }
        if (pb.requires_grad) {
          Tensor db;
          if (!trans_a && !trans_b)
            db = matmul(pa.value, g, true, false);
          else if (!trans_a && trans_b)
            db = matmul(g, pa.value, true, false);
          else if (trans_a && !trans_b)
            db = matmul(pa.value, g, false, false);
          else
            db = matmul(g, pa.value, true, true);
          accumulate(pb, db);
        }
      }));
}

Var softmax_rows(const Var& m) {
  Tensor out = softmax_rows(m.value());
  return Var(make_node(std::move(out), {m.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Tensor& s = self.value;
    const Tensor& g = self.grad;
    Tensor dm(s.shape());
    const std::size_t c = s.cols();
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < c; ++j) inner += g.at(i, j) * s.at(i, j);
      for (std::size_t j = 0; j < c; ++j)
        dm.at(i, j) = s.at(i, j) * (g.at(i, j) - inner);
    }
    accumulate(p, dm);
  }));
}

Var activation(const Var& t, const Activation& act) {
  Tensor out = act.apply(t.value());
  return Var(make_node(std::move(out), {t.node()}, [act](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor d(p.value.shape());
    switch (act.kind) {
      case Activation::Kind::kCosine:
        for (std::size_t i = 0; i < d.size(); ++i)
          d.at(i) = -act.b1 * std::sin(act.b1 * p.value.at(i) + act.b2) *
                    self.grad.at(i);
        break;
      case Activation::Kind::kRelu:
        for (std::size_t i = 0; i < d.size(); ++i)
          d.at(i) = p.value.at(i) > 0.0 ? self.grad.at(i) : 0.0;
        break;
      case Activation::Kind::kTanh:
        for (std::size_t i = 0; i < d.size(); ++i) {
          const double th = self.value.at(i);
          d.at(i) = (1.0 - th * th) * self.grad.at(i);
        }
        break;
    }
    accumulate(p, d);
  }));
}

// --- reductions --------------------------------------------------------------

Var sum(const Var& t) {
  Tensor out({1});
  out.at(0) = t.value().sum();
  return Var(make_node(std::move(out), {t.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape(), self.grad.at(0));
    accumulate(p, g);
  }));
}

Var mean_all(const Var& t) {
  return scale(sum(t), 1.0 / static_cast<double>(t.value().size()));
}

Var pick(const Var& t, std::size_t flat_index) {
  if (flat_index >= t.value().size())
    fail(ErrorKind::kDimension, "pick: index out of range");
  Tensor out({1});
  out.at(0) = t.value().at(flat_index);
  return Var(make_node(std::move(out), {t.node()}, [flat_index](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor g(p.value.shape());
    g.at(flat_index) = self.grad.at(0);
    accumulate(p, g);
  }));
}

// --- token / batch plumbing ---------------------------------------------------

Var embed_rows(const Var& table, const std::vector<std::int32_t>& tokens) {
  const Tensor& w = table.value();
  const std::size_t d = w.cols();
  Tensor out(tokens.size(), d);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto r = static_cast<std::size_t>(tokens[i]);
    if (r >= w.rows()) fail(ErrorKind::kArgument, "embed_rows: token out of vocab");
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = w.at(r, j);
  }
  return Var(make_node(std::move(out), {table.node()}, [tokens](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    const std::size_t d = g.cols();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto r = static_cast<std::size_t>(tokens[i]);
      for (std::size_t j = 0; j < d; ++j) g.at(r, j) += self.grad.at(i, j);
    }
  }));
}

Var add_position(const Var& z, const Var& p, double gamma, std::size_t batch) {
  const Tensor& zv = z.value();
  const Tensor& pv = p.value();
  const std::size_t k = pv.rows();
  if (zv.rows() != batch * k || zv.cols() != pv.cols())
    fail(ErrorKind::kDimension, "add_position: shape mismatch");
  Tensor out = zv;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j)
        out.at(b * k + i, j) += gamma * pv.at(i, j);
  return Var(make_node(std::move(out), {z.node(), p.node()},
                       [gamma, batch, k](Node& self) {
                         Node& pz = *self.parents[0];
                         Node& pp = *self.parents[1];
                         accumulate(pz, self.grad);
                         if (!pp.requires_grad) return;
                         Tensor& g = pp.ensure_grad();
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t i = 0; i < k; ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j)
                               g.at(i, j) +=
                                   gamma * self.grad.at(b * k + i, j);
                       }));
}

namespace {

// out_b = A_b * B_b^T for each k-row block.
Tensor block_nt_value(const Tensor& a, const Tensor& b, std::size_t k) {
  const std::size_t batch = a.rows() / k;
  const std::size_t p = a.cols();
  Tensor out(batch * k, k);
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < p; ++c)
          s += a.at(bi * k + i, c) * b.at(bi * k + j, c);
        out.at(bi * k + i, j) = s;
      }
  return out;
}

}  // namespace

Var block_matmul_nt(const Var& a, const Var& b, std::size_t k) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() % k != 0 || !av.same_shape(bv))
    fail(ErrorKind::kDimension, "block_matmul_nt: bad shapes");
  return Var(make_node(block_nt_value(av, bv, k), {a.node(), b.node()},
                       [k](Node& self) {
                         Node& pa = *self.parents[0];
                         Node& pb = *self.parents[1];
                         const Tensor& g = self.grad;
                         const std::size_t batch = pa.value.rows() / k;
                         const std::size_t p = pa.value.cols();
                         if (pa.requires_grad) {
                           Tensor& da = pa.ensure_grad();
                           for (std::size_t bi = 0; bi < batch; ++bi)
                             for (std::size_t i = 0; i < k; ++i)
                               for (std::size_t j = 0; j < k; ++j) {
                                 const double gij = g.at(bi * k + i, j);
                                 if (gij == 0.0) continue;
                                 for (std::size_t c = 0; c < p; ++c)
                                   da.at(bi * k + i, c) +=
                                       gij * pb.value.at(bi * k + j, c);
                               }
                         }
                         if (pb.requires_grad) {
                           Tensor& db = pb.ensure_grad();
                           for (std::size_t bi = 0; bi < batch; ++bi)
                             for (std::size_t i = 0; i < k; ++i)
                               for (std::size_t j = 0; j < k; ++j) {
                                 const double gij = g.at(bi * k + i, j);
                                 if (gij == 0.0) continue;
                                 for (std::size_t c = 0; c < p; ++c)
                                   db.at(bi * k + j, c) +=
                                       gij * pa.value.at(bi * k + i, c);
                               }
                         }
                       }));
}

Var block_matmul_n(const Var& s, const Var& v, std::size_t k) {
  const Tensor& sv = s.value();
  const Tensor& vv = v.value();
  if (sv.cols() != k || sv.rows() % k != 0 || vv.rows() != sv.rows())
    fail(ErrorKind::kDimension, "block_matmul_n: bad shapes");
  const std::size_t batch = sv.rows() / k;
  const std::size_t d = vv.cols();
  Tensor out(batch * k, d);
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double sij = sv.at(bi * k + i, j);
        if (sij == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c)
          out.at(bi * k + i, c) += sij * vv.at(bi * k + j, c);
      }
  return Var(make_node(std::move(out), {s.node(), v.node()}, [k](Node& self) {
    Node& ps = *self.parents[0];
    Node& pv = *self.parents[1];
    const Tensor& g = self.grad;
    const std::size_t batch = ps.value.rows() / k;
    const std::size_t d = pv.value.cols();
    if (ps.requires_grad) {
      Tensor& ds = ps.ensure_grad();
      for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c)
              acc += g.at(bi * k + i, c) * pv.value.at(bi * k + j, c);
            ds.at(bi * k + i, j) += acc;
          }
    }
    if (pv.requires_grad) {
      Tensor& dv = pv.ensure_grad();
      for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double sij = ps.value.at(bi * k + i, j);
            if (sij == 0.0) continue;
            for (std::size_t c = 0; c < d; ++c)
              dv.at(bi * k + j, c) += sij * g.at(bi * k + i, c);
          }
    }
  }));
}

Var take_final_rows(const Var& z, std::size_t k) {
  const Tensor& zv = z.value();
  if (zv.rows() % k != 0)
    fail(ErrorKind::kDimension, "take_final_rows: rows not a multiple of k");
  const std::size_t batch = zv.rows() / k;
  const std::size_t d = zv.cols();
  Tensor out(batch, d);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < d; ++j) out.at(b, j) = zv.at(b * k + k - 1, j);
  return Var(make_node(std::move(out), {z.node()}, [k](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    const std::size_t batch = g.rows() / k;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < g.cols(); ++j)
        g.at(b * k + k - 1, j) += self.grad.at(b, j);
  }));
}

Var layer_norm_rows(const Var& z, double eps) {
  const Tensor& zv = z.value();
  const std::size_t n = zv.rows();
  const std::size_t d = zv.cols();
  Tensor out(n, d);
  Tensor inv_sd({n});
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += zv.at(i, j);
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = zv.at(i, j) - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double isd = 1.0 / std::sqrt(var + eps);
    inv_sd.at(i) = isd;
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = (zv.at(i, j) - mu) * isd;
  }
  return Var(make_node(std::move(out), {z.node()}, [inv_sd](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Tensor& y = self.value;
    const Tensor& g = self.grad;
    const std::size_t n = y.rows();
    const std::size_t d = y.cols();
    Tensor dz(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      double gmean = 0.0, gymean = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        gmean += g.at(i, j);
        gymean += g.at(i, j) * y.at(i, j);
      }
      gmean /= static_cast<double>(d);
      gymean /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j)
        dz.at(i, j) =
            inv_sd.at(i) * (g.at(i, j) - gmean - y.at(i, j) * gymean);
    }
    accumulate(p, dz);
  }));
}

Var gather_cols_sum(const Var& table, const std::vector<std::int32_t>& tokens,
                    std::size_t k, std::size_t m) {
  const Tensor& w = table.value();
  if (tokens.size() % k != 0)
    fail(ErrorKind::kDimension, "gather_cols_sum: token count not multiple of k");
  if (w.cols() != k * m)
    fail(ErrorKind::kDimension, "gather_cols_sum: table width is not k*m");
  const std::size_t batch = tokens.size() / k;
  const std::size_t width = w.rows();
  Tensor out(batch, width);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t col =
          i * m + static_cast<std::size_t>(tokens[b * k + i]);
      for (std::size_t r = 0; r < width; ++r) out.at(b, r) += w.at(r, col);
    }
  return Var(
      make_node(std::move(out), {table.node()}, [tokens, k, m](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.ensure_grad();
        const std::size_t batch = tokens.size() / k;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < k; ++i) {
            const std::size_t col =
                i * m + static_cast<std::size_t>(tokens[b * k + i]);
            for (std::size_t r = 0; r < g.rows(); ++r)
              g.at(r, col) += self.grad.at(b, r);
          }
      }));
}

// --- losses -------------------------------------------------------------------

Var mse_mean(const Var& pred, const Tensor& targets) {
  const Tensor& p = pred.value();
  if (p.size() != targets.size())
    fail(ErrorKind::kDimension, "mse_mean: prediction/target size mismatch");
  const double inv_n = 1.0 / static_cast<double>(p.size());
  Tensor out({1});
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = p.at(i) - targets.at(i);
    out.at(0) += r * r * inv_n;
  }
  return Var(make_node(std::move(out), {pred.node()},
                       [targets, inv_n](Node& self) {
                         Node& pp = *self.parents[0];
                         if (!pp.requires_grad) return;
                         Tensor g(pp.value.shape());
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g.at(i) = 2.0 * inv_n *
                                     (pp.value.at(i) - targets.at(i)) *
                                     self.grad.at(0);
                         accumulate(pp, g);
                       }));
}

Var ce_mean(const Var& logits, const std::vector<std::int32_t>& labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.rows() != labels.size())
    fail(ErrorKind::kDimension, "ce_mean: logits/labels mismatch");
  const std::size_t n = z.rows();
  const std::size_t m = z.cols();
  Tensor probs = softmax_rows(z);
  const double inv_n = 1.0 / static_cast<double>(n);
  Tensor out({1});
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= m) fail(ErrorKind::kArgument, "ce_mean: label out of range");
    out.at(0) -= std::log(std::max(probs.at(i, y), 1e-300)) * inv_n;
  }
  return Var(make_node(std::move(out), {logits.node()},
                       [labels, probs, inv_n](Node& self) {
                         Node& p = *self.parents[0];
                         if (!p.requires_grad) return;
                         Tensor g = probs;
                         for (std::size_t i = 0; i < g.rows(); ++i)
                           g.at(i, static_cast<std::size_t>(labels[i])) -= 1.0;
                         g *= inv_n * self.grad.at(0);
                         accumulate(p, g);
                       }));
}

}  // namespace reltask
