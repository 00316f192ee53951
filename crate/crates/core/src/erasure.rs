//! Residual error-bit erase stage.
//!
//! After a failed decode, bits whose reliability `|L_q|` is below a threshold
//! `Δ` are suspicious. The erase stage flips suspicious bits to drive the
//! residual syndrome `e = s ⊕ H û` to zero. It sees only the decoder outputs
//! and the parity-check matrix.

use std::collections::BTreeMap;

use crate::bits::BitVector;
use crate::decoder::DecodeResult;
use crate::error::{Error, Result};
use crate::qc_code::QCCode;

#[derive(Debug, Clone, PartialEq)]
pub struct EraseConfig {
    /// Reliability threshold in the decoder's units.
    pub delta: f64,
    /// Budget of attempted flips.
    pub max_flips: usize,
    /// Keep at most this many least-reliable suspicious bits.
    pub max_suspicious: Option<usize>,
}

pub const DEFAULT_MAX_FLIPS: usize = 256;

impl EraseConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {delta}"
            )));
        }
        Ok(EraseConfig {
            delta,
            max_flips: DEFAULT_MAX_FLIPS,
            max_suspicious: None,
        })
    }

    pub fn with_max_flips(mut self, max_flips: usize) -> Self {
        self.max_flips = max_flips;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EraseOutcome {
    pub corrected: BitVector,
    pub success: bool,
    /// Flips present in `corrected`; empty when the attempt was rolled back.
    pub flips_applied: Vec<usize>,
    /// Flips tried, including rolled-back ones.
    pub attempted: usize,
    pub suspicious_size: usize,
}

/// Indices with reliability strictly below `delta`, ascending.
pub fn suspicious_set(reliabilities: &[f64], delta: f64) -> Vec<usize> {
    reliabilities
        .iter()
        .enumerate()
        .filter(|&(_, &r)| r < delta)
        .map(|(i, _)| i)
        .collect()
}

fn bounded_suspicious(reliabilities: &[f64], cfg: &EraseConfig) -> Vec<usize> {
    let mut set = suspicious_set(reliabilities, cfg.delta);
    if let Some(cap) = cfg.max_suspicious {
        if set.len() > cap {
            set.sort_by(|&a, &b| {
                reliabilities[a]
                    .total_cmp(&reliabilities[b])
                    .then(a.cmp(&b))
            });
            set.truncate(cap);
            set.sort_unstable();
        }
    }
    set
}

fn residual(
    code: &QCCode,
    u_hat: &BitVector,
    s_target: &BitVector,
    reliabilities: &[f64],
) -> Result<BitVector> {
    if reliabilities.len() != code.n() {
        return Err(Error::Length {
            expected: code.n(),
            actual: reliabilities.len(),
        });
    }
    if s_target.len() != code.m() {
        return Err(Error::Length {
            expected: code.m(),
            actual: s_target.len(),
        });
    }
    let e = &code.syndrome(u_hat)? ^ s_target;
    if e.is_zero() {
        return Err(Error::Contract(
            "erase invoked on a frame whose syndrome already matches".into(),
        ));
    }
    Ok(e)
}

/// An erase procedure selectable by name.
pub trait EraseStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn erase(
        &self,
        code: &QCCode,
        u_hat: &BitVector,
        s_target: &BitVector,
        reliabilities: &[f64],
        cfg: &EraseConfig,
    ) -> Result<EraseOutcome>;
}

/// Steepest descent on residual syndrome weight over the suspicious set.
///
/// Ties go to the lower reliability, then the lower index. Stops at zero
/// residual, when no flip lowers the weight, or when the budget runs out; on
/// failure the original word is returned.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyErase;

impl EraseStrategy for GreedyErase {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn erase(
        &self,
        code: &QCCode,
        u_hat: &BitVector,
        s_target: &BitVector,
        reliabilities: &[f64],
        cfg: &EraseConfig,
    ) -> Result<EraseOutcome> {
        let mut e = residual(code, u_hat, s_target, reliabilities)?;
        let sus = bounded_suspicious(reliabilities, cfg);
        let mut slot = vec![usize::MAX; code.n()];
        for (k, &v) in sus.iter().enumerate() {
            slot[v] = k;
        }
        // gain = unsatisfied - satisfied checks on the column
        let mut gain: Vec<i64> = sus
            .iter()
            .map(|&v| {
                code.col(v)
                    .iter()
                    .map(|&r| if e.get(r as usize) { 1 } else { -1 })
                    .sum()
            })
            .collect();
        let mut flipped = vec![false; sus.len()];
        let mut flips = Vec::new();
        let mut weight = e.count_ones();

        while weight > 0 && flips.len() < cfg.max_flips {
            let mut best: Option<usize> = None;
            for k in 0..sus.len() {
                if gain[k] <= 0 {
                    continue;
                }
                best = match best {
                    None => Some(k),
                    Some(b) => {
                        let better = gain[k] > gain[b]
                            || (gain[k] == gain[b]
                                && reliabilities[sus[k]] < reliabilities[sus[b]]);
                        Some(if better { k } else { b })
                    }
                };
            }
            let Some(k) = best else { break };
            let v = sus[k];
            weight -= gain[k] as usize;
            flipped[k] = !flipped[k];
            flips.push(v);
            for &r in code.col(v) {
                let r = r as usize;
                e.flip(r);
                let delta = if e.get(r) { 2 } else { -2 };
                for &w in code.row(r) {
                    let s = slot[w as usize];
                    if s != usize::MAX {
                        gain[s] += delta;
                    }
                }
            }
        }

        let attempted = flips.len();
        if weight == 0 {
            let mut corrected = u_hat.clone();
            let mut applied: Vec<usize> = (0..sus.len())
                .filter(|&k| flipped[k])
                .map(|k| sus[k])
                .collect();
            for &v in &applied {
                corrected.flip(v);
            }
            applied.sort_unstable();
            Ok(EraseOutcome {
                corrected,
                success: true,
                flips_applied: applied,
                attempted,
                suspicious_size: sus.len(),
            })
        } else {
            Ok(rolled_back(u_hat, attempted, sus.len()))
        }
    }
}

fn rolled_back(u_hat: &BitVector, attempted: usize, suspicious_size: usize) -> EraseOutcome {
    EraseOutcome {
        corrected: u_hat.clone(),
        success: false,
        flips_applied: Vec::new(),
        attempted,
        suspicious_size,
    }
}

/// Smallest subset of the suspicious set whose columns sum to the residual.
///
/// Only searched when the suspicious set has at most [`ExhaustiveErase::LIMIT`]
/// bits; larger sets fail without flipping.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveErase;

impl ExhaustiveErase {
    pub const LIMIT: usize = 20;
}

struct Search<'a> {
    code: &'a QCCode,
    sus: &'a [usize],
    e: BitVector,
    weight: usize,
    chosen: Vec<usize>,
    tried: usize,
}

impl Search<'_> {
    fn toggle(&mut self, v: usize) {
        for &r in self.code.col(v) {
            let r = r as usize;
            self.e.flip(r);
            if self.e.get(r) {
                self.weight += 1;
            } else {
                self.weight -= 1;
            }
        }
    }

    fn dfs(&mut self, from: usize, left: usize) -> bool {
        if left == 0 {
            return self.weight == 0;
        }
        for k in from..self.sus.len() {
            let v = self.sus[k];
            self.toggle(v);
            self.tried += 1;
            self.chosen.push(v);
            if self.dfs(k + 1, left - 1) {
                return true;
            }
            self.chosen.pop();
            self.toggle(v);
        }
        false
    }
}

impl EraseStrategy for ExhaustiveErase {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn erase(
        &self,
        code: &QCCode,
        u_hat: &BitVector,
        s_target: &BitVector,
        reliabilities: &[f64],
        cfg: &EraseConfig,
    ) -> Result<EraseOutcome> {
        let e = residual(code, u_hat, s_target, reliabilities)?;
        let sus = bounded_suspicious(reliabilities, cfg);
        if sus.len() > Self::LIMIT {
            log::debug!(
                "suspicious set of {} bits exceeds exhaustive limit {}",
                sus.len(),
                Self::LIMIT
            );
            return Ok(rolled_back(u_hat, 0, sus.len()));
        }
        let weight = e.count_ones();
        let mut search = Search {
            code,
            sus: &sus,
            e,
            weight,
            chosen: Vec::new(),
            tried: 0,
        };
        for size in 1..=cfg.max_flips.min(sus.len()) {
            if search.dfs(0, size) {
                let mut corrected = u_hat.clone();
                for &v in &search.chosen {
                    corrected.flip(v);
                }
                return Ok(EraseOutcome {
                    corrected,
                    success: true,
                    flips_applied: search.chosen.clone(),
                    attempted: search.chosen.len(),
                    suspicious_size: sus.len(),
                });
            }
        }
        Ok(rolled_back(u_hat, search.tried, sus.len()))
    }
}

/// Treats the suspicious bits as erasures and solves for them over GF(2).
///
/// Bits outside the suspicious set are taken as correct, which leaves the
/// system `H_S x = s ⊕ H_rest û_rest` on the suspicious columns. Columns that
/// meet a single remaining check are peeled off first and the remaining core
/// is reduced by Gaussian elimination. The word is replaced only when the
/// solution is unique: `H_S` has full column rank and the system is
/// consistent. The flip budget does not apply; `max_suspicious` bounds the
/// system size.
#[derive(Debug, Clone, Copy, Default)]
pub struct EliminationErase;

struct Gf2Rows {
    words: usize,
    bits: Vec<u64>,
    rhs: Vec<bool>,
}

impl Gf2Rows {
    fn new(cols: usize) -> Self {
        Gf2Rows {
            words: cols.div_ceil(64),
            bits: Vec::new(),
            rhs: Vec::new(),
        }
    }

    fn push(&mut self, cols: impl Iterator<Item = usize>, rhs: bool) {
        let start = self.bits.len();
        self.bits.resize(start + self.words, 0);
        for c in cols {
            self.bits[start + c / 64] ^= 1 << (c % 64);
        }
        self.rhs.push(rhs);
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Unique solution, or `None` when rank-deficient or inconsistent.
    fn solve(mut self, cols: usize) -> Option<Vec<bool>> {
        let rows = self.rhs.len();
        let w = self.words;
        let mut pivot_of_col = vec![usize::MAX; cols];
        let mut next = 0;
        for col in 0..cols {
            let (word, bit) = (col / 64, 1u64 << (col % 64));
            let found = (next..rows).find(|&r| self.bits[r * w + word] & bit != 0)?;
            if found != next {
                for k in 0..w {
                    self.bits.swap(found * w + k, next * w + k);
                }
                self.rhs.swap(found, next);
            }
            let (head, tail) = self.bits.split_at_mut(next * w + w);
            let pivot = &head[next * w..];
            for r in (next + 1)..rows {
                let row = &mut tail[(r - next - 1) * w..(r - next) * w];
                if row[word] & bit != 0 {
                    for k in word..w {
                        row[k] ^= pivot[k];
                    }
                    self.rhs[r] ^= self.rhs[next];
                }
            }
            pivot_of_col[col] = next;
            next += 1;
        }
        if self.rhs[next..].iter().any(|&b| b) {
            return None;
        }
        let mut x = vec![false; cols];
        for col in (0..cols).rev() {
            let r = pivot_of_col[col];
            let row = self.row(r);
            let mut v = self.rhs[r];
            for (c, xc) in x.iter().enumerate().skip(col + 1) {
                if *xc && row[c / 64] >> (c % 64) & 1 == 1 {
                    v ^= true;
                }
            }
            x[col] = v;
        }
        Some(x)
    }
}

impl EraseStrategy for EliminationErase {
    fn name(&self) -> &'static str {
        "eliminate"
    }

    fn erase(
        &self,
        code: &QCCode,
        u_hat: &BitVector,
        s_target: &BitVector,
        reliabilities: &[f64],
        cfg: &EraseConfig,
    ) -> Result<EraseOutcome> {
        let e = residual(code, u_hat, s_target, reliabilities)?;
        let sus = bounded_suspicious(reliabilities, cfg);
        let fail = || Ok(rolled_back(u_hat, 0, sus.len()));
        let mut slot = vec![usize::MAX; code.n()];
        for (k, &v) in sus.iter().enumerate() {
            slot[v] = k;
        }
        // right-hand side with the suspicious bits' current values removed
        let mut r = e;
        for &v in &sus {
            if u_hat.get(v) {
                for &row in code.col(v) {
                    r.flip(row as usize);
                }
            }
        }
        let mut row_active = vec![false; code.m()];
        for &v in &sus {
            for &row in code.col(v) {
                row_active[row as usize] = true;
            }
        }
        if (0..code.m()).any(|row| !row_active[row] && r.get(row)) {
            return fail();
        }

        let mut col_weight: Vec<usize> = sus.iter().map(|&v| code.col(v).len()).collect();
        if col_weight.contains(&0) {
            return fail();
        }
        let mut removed = vec![false; sus.len()];
        let mut peeled: Vec<(usize, usize)> = Vec::new();
        let mut stack: Vec<usize> = (0..sus.len()).filter(|&k| col_weight[k] == 1).collect();
        while let Some(k) = stack.pop() {
            if removed[k] {
                continue;
            }
            if col_weight[k] == 0 {
                return fail();
            }
            let row = code
                .col(sus[k])
                .iter()
                .map(|&r| r as usize)
                .find(|&r| row_active[r])
                .expect("weight 1");
            row_active[row] = false;
            removed[k] = true;
            peeled.push((k, row));
            for &c in code.row(row) {
                let k2 = slot[c as usize];
                if k2 != usize::MAX && !removed[k2] {
                    col_weight[k2] -= 1;
                    match col_weight[k2] {
                        0 => return fail(),
                        1 => stack.push(k2),
                        _ => {}
                    }
                }
            }
        }

        let core: Vec<usize> = (0..sus.len()).filter(|&k| !removed[k]).collect();
        let mut core_index = vec![usize::MAX; sus.len()];
        for (i, &k) in core.iter().enumerate() {
            core_index[k] = i;
        }
        let mut system = Gf2Rows::new(core.len());
        for row in (0..code.m()).filter(|&row| row_active[row]) {
            let cols = code.row(row).iter().filter_map(|&c| {
                let k = slot[c as usize];
                (k != usize::MAX && !removed[k]).then(|| core_index[k])
            });
            system.push(cols, r.get(row));
        }
        let Some(core_x) = system.solve(core.len()) else {
            return fail();
        };

        let mut x = vec![false; sus.len()];
        for (i, &k) in core.iter().enumerate() {
            x[k] = core_x[i];
        }
        for &(k, row) in peeled.iter().rev() {
            let mut v = r.get(row);
            for &c in code.row(row) {
                let k2 = slot[c as usize];
                if k2 != usize::MAX && k2 != k {
                    v ^= x[k2];
                }
            }
            x[k] = v;
        }

        let mut corrected = u_hat.clone();
        let mut flips = Vec::new();
        for (k, &v) in sus.iter().enumerate() {
            if corrected.get(v) != x[k] {
                corrected.set(v, x[k]);
                flips.push(v);
            }
        }
        if code.syndrome(&corrected)? != *s_target {
            return fail();
        }
        Ok(EraseOutcome {
            corrected,
            success: true,
            attempted: flips.len(),
            flips_applied: flips,
            suspicious_size: sus.len(),
        })
    }
}

pub type EraseFactory = fn() -> Box<dyn EraseStrategy>;

pub struct EraseRegistry {
    factories: BTreeMap<&'static str, EraseFactory>,
}

impl EraseRegistry {
    pub fn empty() -> Self {
        EraseRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: EraseFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn EraseStrategy>> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "erase strategy",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

impl Default for EraseRegistry {
    fn default() -> Self {
        let mut r = EraseRegistry::empty();
        r.register("greedy", || Box::new(GreedyErase));
        r.register("exhaustive", || Box::new(ExhaustiveErase));
        r.register("eliminate", || Box::new(EliminationErase));
        r
    }
}

/// Failed frames whose largest erroneous-bit reliability is below `delta`.
///
/// Each entry pairs a decoder result with the transmitted word.
pub fn n_err_statistic<'a>(
    failed: impl IntoIterator<Item = (&'a DecodeResult, &'a BitVector)>,
    delta: f64,
) -> usize {
    failed
        .into_iter()
        .filter(|(r, truth)| {
            let worst = (&r.u_hat ^ truth)
                .ones()
                .into_iter()
                .map(|i| r.reliabilities[i])
                .fold(f64::NEG_INFINITY, f64::max);
            worst < delta
        })
        .count()
}

/// Erase latency as `c0 + c1 * flips`, in decoding-iteration equivalents.
///
/// `c0` covers the syndrome pass over `H`; `c1` is one syndrome and row-weight
/// update per attempted flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EraseCost {
    pub c0: f64,
    pub c1: f64,
}

impl EraseCost {
    /// Calibrates `c1` so that a full budget of `max_flips` costs `worst_case`.
    pub fn calibrated(worst_case: f64, max_flips: usize) -> Self {
        let c0 = 1.0;
        EraseCost {
            c0,
            c1: (worst_case - c0) / max_flips.max(1) as f64,
        }
    }

    /// Full-budget cost of 2.4 iterations, used for the rate-0.2 code.
    pub fn rate02() -> Self {
        Self::calibrated(2.4, DEFAULT_MAX_FLIPS)
    }

    /// Full-budget cost of 3 iterations, used for the rate-0.1 code.
    pub fn rate01() -> Self {
        Self::calibrated(3.0, DEFAULT_MAX_FLIPS)
    }

    pub fn for_rate(rate: f64) -> Self {
        if rate < 0.15 {
            Self::rate01()
        } else {
            Self::rate02()
        }
    }

    pub fn iterations(&self, flips: usize) -> f64 {
        self.c0 + self.c1 * flips as f64
    }

    /// Worst-case delay, in iterations, for a budget.
    pub fn worst_case(&self, max_flips: usize) -> f64 {
        self.iterations(max_flips)
    }
}

/// Cost of one outcome in decoding-iteration equivalents.
pub fn cycle_cost(outcome: &EraseOutcome, cost: &EraseCost) -> f64 {
    cost.iterations(outcome.attempted)
}
