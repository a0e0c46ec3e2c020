#pragma once

#include <utility>

#include "seq2act/autodiff.hpp"
#include "seq2act/tensor.hpp"

namespace seq2act {

// Gated recurrent cell (standard four-gate LSTM, no peepholes). Weights are
// stacked gate-major: rows [0,H) input gate, [H,2H) forget gate, [2H,3H)
// output gate, [3H,4H) candidate.
struct LstmParams {
  Tensor wx;  // [4H x input]
  Tensor wh;  // [4H x H]
  Tensor b;   // [4H]

  std::size_t hidden() const { return wh.cols(); }

  static LstmParams init(std::size_t hidden, std::size_t input, Rng& rng) {
    LstmParams p;
    p.wx = Tensor::uniform({4 * hidden, input}, -0.1, 0.1, rng);
    p.wh = Tensor::uniform({4 * hidden, hidden}, -0.1, 0.1, rng);
    p.b = Tensor::uniform({4 * hidden}, -0.1, 0.1, rng);
    return p;
  }
};

struct LstmHandles {
  Value wx, wh, b;
};

inline LstmHandles register_lstm(Tape& tape, const LstmParams& p) {
  return {tape.leaf(&p.wx), tape.leaf(&p.wh), tape.leaf(&p.b)};
}

struct CellState {
  Value h, c;
};

inline CellState initial_cell_state(Tape& tape, std::size_t hidden) {
  return {tape.constant(Tensor::zeros({hidden})), tape.constant(Tensor::zeros({hidden}))};
}

// One recurrence step: (h', c') from the input embedding and previous state.
inline CellState cell_step(Tape& tape, const LstmHandles& p, Value x, CellState prev) {
  std::size_t hidden = tape.val(prev.h).numel();
  Value pre = tape.add(tape.add(tape.matvec(p.wx, x), tape.matvec(p.wh, prev.h)), p.b);
  Value i = tape.sigmoid_(tape.slice(pre, 0, hidden));
  Value f = tape.sigmoid_(tape.slice(pre, hidden, hidden));
  Value o = tape.sigmoid_(tape.slice(pre, 2 * hidden, hidden));
  Value g = tape.tanh_(tape.slice(pre, 3 * hidden, hidden));
  Value c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  Value h = tape.mul(o, tape.tanh_(c));
  return {h, c};
}

// Eager convenience for callers without a tape of their own.
inline std::pair<Tensor, Tensor> cell_step(const LstmParams& p, const Tensor& x, const Tensor& h,
                                           const Tensor& c) {
  Tape tape;
  LstmHandles handles = register_lstm(tape, p);
  CellState prev{tape.constant(h), tape.constant(c)};
  CellState next = cell_step(tape, handles, tape.constant(x), prev);
  return {tape.val(next.h), tape.val(next.c)};
}

}  // namespace seq2act
