#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "seq2act/errors.hpp"
#include "seq2act/rng.hpp"
#include "seq2act/tensor.hpp"

namespace seq2act {

// Reverse-mode automatic differentiation over Tensor operations. A Tape is
// built per training example: parameter tensors are registered as leaves
// (by pointer, no copy), operations append nodes with backward closures, and
// backward() accumulates gradients in reverse topological (= construction)
// order. Tapes are single-threaded scratch objects.
class Tape {
 public:
  struct Value {
    std::size_t idx = static_cast<std::size_t>(-1);
    bool valid() const { return idx != static_cast<std::size_t>(-1); }
  };

  // Registers an external tensor (a model parameter) as a tracked leaf.
  Value leaf(const Tensor* external) {
    nodes_.push_back(Node{Tensor{}, external, nullptr, true});
    return Value{nodes_.size() - 1};
  }

  // An input the loss is not differentiated against.
  Value constant(Tensor t) {
    nodes_.push_back(Node{std::move(t), nullptr, nullptr, false});
    return Value{nodes_.size() - 1};
  }

  const Tensor& val(Value v) const {
    const Node& n = nodes_[v.idx];
    return n.external ? *n.external : n.value;
  }

  const Tensor& grad(Value v) const { return grads_[v.idx]; }

  // --- operations ---

  Value row(Value table, std::size_t r) {
    const Tensor& t = val(table);
    Tensor out = Tensor::zeros({t.cols()});
    std::copy(t.data.begin() + r * t.cols(), t.data.begin() + (r + 1) * t.cols(),
              out.data.begin());
    return push(std::move(out), {table}, [table, r](Tape& tape, const Tensor& g) {
      Tensor& tg = tape.grads_[table.idx];
      std::size_t cols = g.numel();
      for (std::size_t c = 0; c < cols; ++c) tg.data[r * cols + c] += g.data[c];
    });
  }

  Value matvec(Value w, Value x) {
    Tensor out = ops::matvec(val(w), val(x));
    return push(std::move(out), {w, x}, [w, x](Tape& tape, const Tensor& g) {
      const Tensor& wv = tape.val(w);
      const Tensor& xv = tape.val(x);
      if (tape.wants(w)) {
        Tensor& wg = tape.grads_[w.idx];
        for (std::size_t r = 0; r < wv.rows(); ++r) {
          double gr = g.data[r];
          double* row = wg.data.data() + r * wv.cols();
          for (std::size_t c = 0; c < wv.cols(); ++c) row[c] += gr * xv.data[c];
        }
      }
      if (tape.wants(x)) {
        Tensor& xg = tape.grads_[x.idx];
        for (std::size_t r = 0; r < wv.rows(); ++r) {
          double gr = g.data[r];
          const double* row = wv.data.data() + r * wv.cols();
          for (std::size_t c = 0; c < wv.cols(); ++c) xg.data[c] += gr * row[c];
        }
      }
    });
  }

  Value add(Value a, Value b) {
    Tensor out = ops::add(val(a), val(b));
    return push(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
      tape.accumulate(a, g);
      tape.accumulate(b, g);
    });
  }

  Value mul(Value a, Value b) {
    Tensor out = ops::hadamard(val(a), val(b));
    return push(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
      if (tape.wants(a)) {
        Tensor& ag = tape.grads_[a.idx];
        const Tensor& bv = tape.val(b);
        for (std::size_t i = 0; i < g.numel(); ++i) ag.data[i] += g.data[i] * bv.data[i];
      }
      if (tape.wants(b)) {
        Tensor& bg = tape.grads_[b.idx];
        const Tensor& av = tape.val(a);
        for (std::size_t i = 0; i < g.numel(); ++i) bg.data[i] += g.data[i] * av.data[i];
      }
    });
  }

  Value concat(Value a, Value b) {
    Tensor out = ops::concat(val(a), val(b));
    std::size_t na = val(a).numel();
    return push(std::move(out), {a, b}, [a, b, na](Tape& tape, const Tensor& g) {
      if (tape.wants(a)) {
        Tensor& ag = tape.grads_[a.idx];
        for (std::size_t i = 0; i < na; ++i) ag.data[i] += g.data[i];
      }
      if (tape.wants(b)) {
        Tensor& bg = tape.grads_[b.idx];
        for (std::size_t i = na; i < g.numel(); ++i) bg.data[i - na] += g.data[i];
      }
    });
  }

  Value slice(Value v, std::size_t offset, std::size_t len) {
    const Tensor& t = val(v);
    Tensor out = Tensor::zeros({len});
    std::copy(t.data.begin() + offset, t.data.begin() + offset + len, out.data.begin());
    return push(std::move(out), {v}, [v, offset, len](Tape& tape, const Tensor& g) {
      Tensor& vg = tape.grads_[v.idx];
      for (std::size_t i = 0; i < len; ++i) vg.data[offset + i] += g.data[i];
    });
  }

  Value tanh_(Value a) {
    Tensor out = ops::tanh_v(val(a));
    Value r = push(std::move(out), {a}, nullptr);
    nodes_[r.idx].back = [a, r](Tape& tape, const Tensor& g) {
      const Tensor& y = tape.val(r);
      Tensor& ag = tape.grads_[a.idx];
      for (std::size_t i = 0; i < g.numel(); ++i)
        ag.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    };
    return r;
  }

  Value sigmoid_(Value a) {
    Tensor out = ops::sigmoid_v(val(a));
    Value r = push(std::move(out), {a}, nullptr);
    nodes_[r.idx].back = [a, r](Tape& tape, const Tensor& g) {
      const Tensor& y = tape.val(r);
      Tensor& ag = tape.grads_[a.idx];
      for (std::size_t i = 0; i < g.numel(); ++i)
        ag.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    };
    return r;
  }

  Value softmax_(Value a) {
    Tensor out = ops::softmax(val(a));
    Value r = push(std::move(out), {a}, nullptr);
    nodes_[r.idx].back = [a, r](Tape& tape, const Tensor& g) {
      const Tensor& y = tape.val(r);
      Tensor& ag = tape.grads_[a.idx];
      double gy = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) gy += g.data[i] * y.data[i];
      for (std::size_t i = 0; i < g.numel(); ++i)
        ag.data[i] += y.data[i] * (g.data[i] - gy);
    };
    return r;
  }

  // Attention scores: e_i = dot(s, candidates[i]).
  Value dots_with(Value s, const std::vector<Value>& candidates) {
    Tensor out = Tensor::zeros({candidates.size()});
    for (std::size_t i = 0; i < candidates.size(); ++i)
      out.data[i] = ops::dot(val(s), val(candidates[i]));
    std::vector<Value> parents = candidates;
    parents.push_back(s);
    return push(std::move(out), parents, [s, candidates](Tape& tape, const Tensor& g) {
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        double gi = g.data[i];
        if (gi == 0.0) continue;
        if (tape.wants(s)) {
          Tensor& sg = tape.grads_[s.idx];
          const Tensor& cv = tape.val(candidates[i]);
          for (std::size_t k = 0; k < sg.numel(); ++k) sg.data[k] += gi * cv.data[k];
        }
        if (tape.wants(candidates[i])) {
          Tensor& cg = tape.grads_[candidates[i].idx];
          const Tensor& sv = tape.val(s);
          for (std::size_t k = 0; k < cg.numel(); ++k) cg.data[k] += gi * sv.data[k];
        }
      }
    });
  }

  // Context vector: sum_i weights[i] * vs[i].
  Value weighted_sum(Value weights, const std::vector<Value>& vs) {
    const Tensor& w = val(weights);
    ops::require(w.numel() == vs.size(), "weighted_sum arity");
    Tensor out = Tensor::zeros({val(vs[0]).numel()});
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const Tensor& v = val(vs[i]);
      for (std::size_t k = 0; k < out.numel(); ++k) out.data[k] += w.data[i] * v.data[k];
    }
    std::vector<Value> parents = vs;
    parents.push_back(weights);
    return push(std::move(out), parents, [weights, vs](Tape& tape, const Tensor& g) {
      const Tensor& w = tape.val(weights);
      for (std::size_t i = 0; i < vs.size(); ++i) {
        if (tape.wants(vs[i])) {
          Tensor& vg = tape.grads_[vs[i].idx];
          for (std::size_t k = 0; k < g.numel(); ++k) vg.data[k] += w.data[i] * g.data[k];
        }
      }
      if (tape.wants(weights)) {
        Tensor& wg = tape.grads_[weights.idx];
        for (std::size_t i = 0; i < vs.size(); ++i)
          wg.data[i] += ops::dot(g, tape.val(vs[i]));
      }
    });
  }

  // log softmax(logits)[index], as a 1-element tensor. Stable.
  Value log_prob_of(Value logits, std::size_t index) {
    Tensor lsm = ops::log_softmax(val(logits));
    Tensor out = Tensor::vector({lsm.data[index]});
    return push(std::move(out), {logits}, [logits, index](Tape& tape, const Tensor& g) {
      Tensor sm = ops::softmax(tape.val(logits));
      Tensor& lg = tape.grads_[logits.idx];
      double g0 = g.data[0];
      for (std::size_t i = 0; i < sm.numel(); ++i) lg.data[i] -= g0 * sm.data[i];
      lg.data[index] += g0;
    });
  }

  Value sum_list(const std::vector<Value>& scalars) {
    double acc = 0.0;
    for (Value v : scalars) acc += val(v).data[0];
    return push(Tensor::vector({acc}), scalars, [scalars](Tape& tape, const Tensor& g) {
      for (Value v : scalars)
        if (tape.wants(v)) tape.grads_[v.idx].data[0] += g.data[0];
    });
  }

  Value scale(Value a, double k) {
    Tensor out = val(a);
    for (double& x : out.data) x *= k;
    return push(std::move(out), {a}, [a, k](Tape& tape, const Tensor& g) {
      Tensor& ag = tape.grads_[a.idx];
      for (std::size_t i = 0; i < g.numel(); ++i) ag.data[i] += k * g.data[i];
    });
  }

  // Backpropagates from a scalar root; gradients are then readable via grad().
  void backward(Value root) {
    if (val(root).numel() != 1) fail(Errc::ShapeMismatch, "backward root must be scalar");
    grads_.clear();
    grads_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].needs_grad) grads_[i] = Tensor::zeros(val(Value{i}).shape);
    }
    grads_[root.idx].data[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.needs_grad || !n.back) continue;
      bool all_zero = true;
      for (double x : grads_[i].data)
        if (x != 0.0) {
          all_zero = false;
          break;
        }
      if (all_zero) continue;
      n.back(*this, grads_[i]);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    std::function<void(Tape&, const Tensor&)> back;
    bool needs_grad = false;
  };

  bool wants(Value v) const { return nodes_[v.idx].needs_grad; }

  void accumulate(Value v, const Tensor& g) {
    if (!wants(v)) return;
    Tensor& t = grads_[v.idx];
    for (std::size_t i = 0; i < g.numel(); ++i) t.data[i] += g.data[i];
  }

  Value push(Tensor value, const std::vector<Value>& parents,
             std::function<void(Tape&, const Tensor&)> back) {
    bool needs = false;
    for (Value p : parents) needs |= nodes_[p.idx].needs_grad;
    nodes_.push_back(Node{std::move(value), nullptr, std::move(back), needs});
    return Value{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

using Value = Tape::Value;

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Compares analytic gradients against central finite differences on a random
// subsample of coordinates per parameter block. `loss` must re-evaluate the
// full forward pass against the current contents of `params`.
inline GradCheckReport grad_check(const std::function<double()>& loss,
                                  const std::vector<Tensor*>& params,
                                  const std::vector<const Tensor*>& analytic, double epsilon,
                                  Rng& rng, std::size_t coords_per_block = 200) {
  GradCheckReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Tensor& p = *params[b];
    const Tensor& a = *analytic[b];
    std::vector<std::size_t> coords;
    if (p.numel() <= coords_per_block) {
      coords.resize(p.numel());
      for (std::size_t i = 0; i < p.numel(); ++i) coords[i] = i;
    } else {
      std::vector<std::size_t> all(p.numel());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      rng.shuffle(all);
      coords.assign(all.begin(), all.begin() + coords_per_block);
    }
    for (std::size_t c : coords) {
      double saved = p.data[c];
      p.data[c] = saved + epsilon;
      double up = loss();
      p.data[c] = saved - epsilon;
      double down = loss();
      p.data[c] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        fail(Errc::NonFiniteLoss, "loss is not finite during grad check");
      double numeric = (up - down) / (2.0 * epsilon);
      double rel = std::abs(a.data[c] - numeric) /
                   std::max(1.0, std::abs(a.data[c]) + std::abs(numeric));
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.coordinates;
    }
  }
  return report;
}

}  // namespace seq2act
