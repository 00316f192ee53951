//! Message arithmetic for the layered decoder.
//!
//! The decoder and the datapath model are generic over [`Arithmetic`], so both
//! run the exact same per-check kernel and can be compared bit for bit.

use std::fmt::Debug;

use crate::quantize::{phi, FixedFormat, PhiTable};

pub trait Arithmetic: Send + Sync + 'static {
    type Msg: Copy + PartialEq + Default + Debug + Send + Sync;

    fn name(&self) -> String;

    /// Channel LLR to message domain.
    fn from_llr(&self, llr: f64) -> Self::Msg;

    /// Variable-to-check message: total minus the previous check message.
    fn vnu(&self, total: Self::Msg, old_r: Self::Msg) -> Self::Msg;

    /// New total: extrinsic plus the fresh check message.
    fn total(&self, ext: Self::Msg, new_r: Self::Msg) -> Self::Msg;

    /// Check-node update for every edge of one check.
    ///
    /// `out[i]` is computed from all `ext[j]`, `j != i`. The syndrome bit flips
    /// the sign of every outgoing message.
    fn cnu(&self, ext: &[Self::Msg], syndrome_bit: bool, out: &mut [Self::Msg]);

    /// Single outgoing message from the other neighbours of the target edge.
    fn check_message(&self, others: &[Self::Msg], syndrome_bit: bool) -> Self::Msg;

    fn is_negative(&self, m: Self::Msg) -> bool;

    /// |m| in the arithmetic's own units (LLR for float, integer code for fixed).
    fn reliability(&self, m: Self::Msg) -> f64;

    fn to_real(&self, m: Self::Msg) -> f64;

    /// Reliability units per real LLR unit.
    fn units_per_llr(&self) -> f64;
}

const MAX_DEGREE_STACK: usize = 64;

/// Double-precision reference arithmetic.
#[derive(Debug, Clone, Copy, Default)]
pub struct FloatArithmetic;

impl Arithmetic for FloatArithmetic {
    type Msg = f64;

    fn name(&self) -> String {
        "float".into()
    }

    fn from_llr(&self, llr: f64) -> f64 {
        llr
    }

    #[inline]
    fn vnu(&self, total: f64, old_r: f64) -> f64 {
        total - old_r
    }

    #[inline]
    fn total(&self, ext: f64, new_r: f64) -> f64 {
        ext + new_r
    }

    fn cnu(&self, ext: &[f64], syndrome_bit: bool, out: &mut [f64]) {
        let d = ext.len();
        debug_assert_eq!(d, out.len());
        assert!(
            d <= MAX_DEGREE_STACK,
            "check degree {d} exceeds {MAX_DEGREE_STACK}"
        );
        let mut phis = [0.0f64; MAX_DEGREE_STACK];
        let mut negative = syndrome_bit;
        for (p, &x) in phis.iter_mut().zip(ext) {
            *p = phi(x.abs());
            negative ^= x < 0.0;
        }
        // exclusive sums via a suffix pass then a running prefix
        let mut suffix = [0.0f64; MAX_DEGREE_STACK + 1];
        for i in (0..d).rev() {
            suffix[i] = suffix[i + 1] + phis[i];
        }
        let mut prefix = 0.0;
        for i in 0..d {
            let mag = phi(prefix + suffix[i + 1]);
            let neg = negative ^ (ext[i] < 0.0);
            out[i] = if neg { -mag } else { mag };
            prefix += phis[i];
        }
    }

    fn check_message(&self, others: &[f64], syndrome_bit: bool) -> f64 {
        let mut negative = syndrome_bit;
        let mut sum = 0.0;
        for &x in others {
            sum += phi(x.abs());
            negative ^= x < 0.0;
        }
        let mag = phi(sum);
        if negative {
            -mag
        } else {
            mag
        }
    }

    #[inline]
    fn is_negative(&self, m: f64) -> bool {
        m < 0.0
    }

    fn reliability(&self, m: f64) -> f64 {
        m.abs()
    }

    fn to_real(&self, m: f64) -> f64 {
        m
    }

    fn units_per_llr(&self) -> f64 {
        1.0
    }
}

/// Saturating fixed-point arithmetic with a quantized Φ table.
#[derive(Debug, Clone)]
pub struct FixedArithmetic {
    fmt: FixedFormat,
    table: PhiTable,
}

impl FixedArithmetic {
    pub fn new(fmt: FixedFormat) -> Self {
        FixedArithmetic {
            fmt,
            table: PhiTable::new(fmt),
        }
    }

    pub fn with_table(table: PhiTable) -> Self {
        FixedArithmetic {
            fmt: table.format(),
            table,
        }
    }

    pub fn format(&self) -> FixedFormat {
        self.fmt
    }

    pub fn table(&self) -> &PhiTable {
        &self.table
    }
}

impl Arithmetic for FixedArithmetic {
    type Msg = i32;

    fn name(&self) -> String {
        format!("fixed[{}, phi F={}]", self.fmt, self.table.phi_frac_bits())
    }

    fn from_llr(&self, llr: f64) -> i32 {
        self.fmt.quantize_code(llr)
    }

    #[inline]
    fn vnu(&self, total: i32, old_r: i32) -> i32 {
        self.fmt.sub_codes(total, old_r)
    }

    #[inline]
    fn total(&self, ext: i32, new_r: i32) -> i32 {
        self.fmt.add_codes(ext, new_r)
    }

    fn cnu(&self, ext: &[i32], syndrome_bit: bool, out: &mut [i32]) {
        let d = ext.len();
        debug_assert_eq!(d, out.len());
        assert!(
            d <= MAX_DEGREE_STACK,
            "check degree {d} exceeds {MAX_DEGREE_STACK}"
        );
        let max = self.table.sum_max();
        let mut phis = [0i64; MAX_DEGREE_STACK];
        let mut negative = syndrome_bit;
        for (p, &x) in phis.iter_mut().zip(ext) {
            *p = self.table.forward(x.abs());
            negative ^= x < 0;
        }
        // all terms are non-negative, so saturating at max commutes with summation order
        let mut suffix = [0i64; MAX_DEGREE_STACK + 1];
        for i in (0..d).rev() {
            suffix[i] = (suffix[i + 1] + phis[i]).min(max);
        }
        let mut prefix = 0i64;
        for i in 0..d {
            let mag = self.table.inverse((prefix + suffix[i + 1]).min(max));
            let neg = negative ^ (ext[i] < 0);
            out[i] = if neg { -mag } else { mag };
            prefix = (prefix + phis[i]).min(max);
        }
    }

    fn check_message(&self, others: &[i32], syndrome_bit: bool) -> i32 {
        let max = self.table.sum_max();
        let mut negative = syndrome_bit;
        let mut sum = 0i64;
        for &x in others {
            sum = (sum + self.table.forward(x.abs())).min(max);
            negative ^= x < 0;
        }
        let mag = self.table.inverse(sum);
        if negative {
            -mag
        } else {
            mag
        }
    }

    #[inline]
    fn is_negative(&self, m: i32) -> bool {
        m < 0
    }

    fn reliability(&self, m: i32) -> f64 {
        m.unsigned_abs() as f64
    }

    fn to_real(&self, m: i32) -> f64 {
        self.fmt.to_real(m)
    }

    fn units_per_llr(&self) -> f64 {
        self.fmt.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_two_check_passes_message_through() {
        let a = FloatArithmetic;
        let m = a.check_message(&[2.0], false);
        assert!((m - 2.0).abs() < 1e-12);
        let m = a.check_message(&[2.0], true);
        assert!((m + 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_opposite_inputs() {
        let a = FloatArithmetic;
        let m = a.check_message(&[1.0, -1.0], false);
        assert!(m < 0.0);
        assert!((m.abs() - 0.433_780_830_483_027).abs() < 1e-12);
    }

    #[test]
    fn exclusive_cnu_matches_direct_form() {
        let a = FloatArithmetic;
        let ext = [1.3, -0.4, 2.2, 0.05, -3.1];
        let mut out = [0.0; 5];
        a.cnu(&ext, true, &mut out);
        for i in 0..ext.len() {
            let others: Vec<f64> = ext
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &x)| x)
                .collect();
            let direct = a.check_message(&others, true);
            assert!(
                (out[i] - direct).abs() < 1e-12,
                "edge {i}: {} vs {direct}",
                out[i]
            );
        }
    }

    #[test]
    fn fixed_cnu_matches_direct_form() {
        let a = FixedArithmetic::new(FixedFormat::w8());
        let ext = [12, -3, 127, 0, -90, 40];
        let mut out = [0; 6];
        a.cnu(&ext, false, &mut out);
        for i in 0..ext.len() {
            let others: Vec<i32> = ext
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &x)| x)
                .collect();
            assert_eq!(out[i], a.check_message(&others, false));
        }
        // a zero-magnitude neighbour drives every other message to the floor code
        assert!(out.iter().enumerate().all(|(i, &m)| i == 3 || m.abs() == 1));
    }

    #[test]
    fn fixed_vnu_and_total_saturate() {
        let a = FixedArithmetic::new(FixedFormat::w8());
        assert_eq!(a.vnu(120, -20), 127);
        assert_eq!(a.total(100, 50), 127);
        assert_eq!(a.vnu(5, 0), 5);
    }
}
