//! Layered belief-propagation syndrome decoder.
//!
//! Per layer (block-row) and check row `m` with syndrome bit `s_m`:
//!
//! ```text
//! L_q_nm = L_q_n - L_r_mn                                  (variable to check)
//! L_r_mn = (1 - 2 s_m) * prod sgn(L_q_n'm) * Φ(Σ Φ(|L_q_n'm|))   over n' != n
//! L_q_n  = L_q_nm + L_r_mn                                 (total)
//! ```
//!
//! `L_q` starts at the channel LLR and `L_r` at zero. A bit decides to 1 iff
//! its total is negative. The syndrome is checked after every full iteration.

mod arithmetic;
pub mod registry;

pub use arithmetic::{Arithmetic, FixedArithmetic, FloatArithmetic};

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::qc_code::QCCode;
use crate::quantize::FixedFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithmeticKind {
    Float,
    Fixed(FixedFormat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub t_max: usize,
    pub arithmetic: ArithmeticKind,
    /// Stop as soon as the hard decision matches the target syndrome.
    pub early_exit: bool,
}

impl DecoderConfig {
    pub fn new(t_max: usize, arithmetic: ArithmeticKind) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        Ok(DecoderConfig {
            t_max,
            arithmetic,
            early_exit: true,
        })
    }

    pub fn float(t_max: usize) -> Self {
        DecoderConfig {
            t_max: t_max.max(1),
            arithmetic: ArithmeticKind::Float,
            early_exit: true,
        }
    }

    pub fn fixed(t_max: usize, fmt: FixedFormat) -> Self {
        DecoderConfig {
            t_max: t_max.max(1),
            arithmetic: ArithmeticKind::Fixed(fmt),
            early_exit: true,
        }
    }

    /// Always run `t_max` iterations, as the hardware does.
    pub fn fixed_iterations(mut self) -> Self {
        self.early_exit = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub u_hat: BitVector,
    pub success: bool,
    pub iterations_used: usize,
    /// `|L_q|` per bit, in the arithmetic's units.
    pub reliabilities: Vec<f64>,
    /// Final totals converted to real LLRs.
    pub posterior: Vec<f64>,
}

/// Message memory of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState<M> {
    pub lq: Vec<M>,
    pub lr: Vec<M>,
    pub iteration: usize,
}

impl<M: Copy + Default> DecoderState<M> {
    pub fn new<A: Arithmetic<Msg = M>>(arith: &A, code: &QCCode, llr: &[f64]) -> Result<Self> {
        if llr.len() != code.n() {
            return Err(Error::Length {
                expected: code.n(),
                actual: llr.len(),
            });
        }
        Ok(DecoderState {
            lq: llr.iter().map(|&x| arith.from_llr(x)).collect(),
            lr: vec![M::default(); code.edge_count()],
            iteration: 0,
        })
    }
}

/// Per-iteration record of the schedule, for instrumentation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub layers: Vec<usize>,
    /// Number of times each edge's check message was written.
    pub edge_writes: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeTrace {
    pub iterations: Vec<IterationTrace>,
}

const MAX_ROW: usize = 64;

/// Processes every check row of block-row `layer`.
pub fn process_layer<A: Arithmetic>(
    arith: &A,
    code: &QCCode,
    state: &mut DecoderState<A::Msg>,
    layer: usize,
    s: &BitVector,
    mut writes: Option<&mut [u32]>,
) {
    let z = code.z();
    let mut ext = [A::Msg::default(); MAX_ROW];
    let mut out = [A::Msg::default(); MAX_ROW];
    for row in layer * z..(layer + 1) * z {
        let cols = code.row(row);
        let start = code.row_start(row);
        let d = cols.len();
        for (b, &c) in cols.iter().enumerate() {
            ext[b] = arith.vnu(state.lq[c as usize], state.lr[start + b]);
        }
        arith.cnu(&ext[..d], s.get(row), &mut out[..d]);
        for (b, &c) in cols.iter().enumerate() {
            state.lr[start + b] = out[b];
            state.lq[c as usize] = arith.total(ext[b], out[b]);
        }
        if let Some(w) = writes.as_deref_mut() {
            for e in start..start + d {
                w[e] += 1;
            }
        }
    }
}

/// One full sweep over the code's layer order.
pub fn run_iteration<A: Arithmetic>(
    arith: &A,
    code: &QCCode,
    state: &mut DecoderState<A::Msg>,
    s: &BitVector,
    trace: Option<&mut DecodeTrace>,
) {
    match trace {
        Some(trace) => {
            let mut it = IterationTrace {
                layers: Vec::new(),
                edge_writes: vec![0; code.edge_count()],
            };
            for &l in code.layers() {
                it.layers.push(l);
                process_layer(arith, code, state, l, s, Some(&mut it.edge_writes));
            }
            trace.iterations.push(it);
        }
        None => {
            for &l in code.layers() {
                process_layer(arith, code, state, l, s, None);
            }
        }
    }
    state.iteration += 1;
}

pub fn hard_decision(lq: &[f64]) -> BitVector {
    let mut u = BitVector::zeros(lq.len());
    for (i, &x) in lq.iter().enumerate() {
        if x < 0.0 {
            u.set(i, true);
        }
    }
    u
}

fn hard_decision_msgs<A: Arithmetic>(arith: &A, lq: &[A::Msg]) -> BitVector {
    let mut u = BitVector::zeros(lq.len());
    for (i, &m) in lq.iter().enumerate() {
        if arith.is_negative(m) {
            u.set(i, true);
        }
    }
    u
}

/// Packages a final state as a result, re-checking the syndrome from scratch.
pub fn finish<A: Arithmetic>(
    arith: &A,
    code: &QCCode,
    state: &DecoderState<A::Msg>,
    s: &BitVector,
) -> Result<DecodeResult> {
    let u_hat = hard_decision_msgs(arith, &state.lq);
    let success = code.syndrome(&u_hat)? == *s;
    Ok(DecodeResult {
        u_hat,
        success,
        iterations_used: state.iteration,
        reliabilities: state.lq.iter().map(|&m| arith.reliability(m)).collect(),
        posterior: state.lq.iter().map(|&m| arith.to_real(m)).collect(),
    })
}

fn check_dims(code: &QCCode, llr: &[f64], s: &BitVector) -> Result<()> {
    if llr.len() != code.n() {
        return Err(Error::Length {
            expected: code.n(),
            actual: llr.len(),
        });
    }
    if s.len() != code.m() {
        return Err(Error::Length {
            expected: code.m(),
            actual: s.len(),
        });
    }
    Ok(())
}

pub fn decode_with<A: Arithmetic>(
    arith: &A,
    code: &QCCode,
    llr: &[f64],
    s: &BitVector,
    t_max: usize,
    early_exit: bool,
    mut trace: Option<&mut DecodeTrace>,
) -> Result<DecodeResult> {
    check_dims(code, llr, s)?;
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    let mut state = DecoderState::new(arith, code, llr)?;
    for _ in 0..t_max {
        run_iteration(arith, code, &mut state, s, trace.as_deref_mut());
        if early_exit && code.syndrome(&hard_decision_msgs(arith, &state.lq))? == *s {
            break;
        }
    }
    finish(arith, code, &state, s)
}

/// Decodes with the arithmetic named in `cfg`.
pub fn decode(
    code: &QCCode,
    llr: &[f64],
    s: &BitVector,
    cfg: &DecoderConfig,
) -> Result<DecodeResult> {
    match cfg.arithmetic {
        ArithmeticKind::Float => decode_with(
            &FloatArithmetic,
            code,
            llr,
            s,
            cfg.t_max,
            cfg.early_exit,
            None,
        ),
        ArithmeticKind::Fixed(fmt) => decode_with(
            &FixedArithmetic::new(fmt),
            code,
            llr,
            s,
            cfg.t_max,
            cfg.early_exit,
            None,
        ),
    }
}

pub fn vnu_message<A: Arithmetic>(arith: &A, lq: A::Msg, lr_prev: A::Msg) -> A::Msg {
    arith.vnu(lq, lr_prev)
}

pub fn cnu_message<A: Arithmetic>(
    arith: &A,
    others: &[A::Msg],
    syndrome_bit: bool,
) -> Result<A::Msg> {
    if others.is_empty() {
        return Err(Error::Contract(
            "check message needs at least one other neighbour".into(),
        ));
    }
    Ok(arith.check_message(others, syndrome_bit))
}

pub fn total_update<A: Arithmetic>(arith: &A, ext: A::Msg, lr_new: A::Msg) -> A::Msg {
    arith.total(ext, lr_new)
}
