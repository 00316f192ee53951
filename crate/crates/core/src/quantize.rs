//! Fixed-point messages with `w = 1 + I + F` bits.
//!
//! Codes are symmetric, `[-(2^(w-1) - 1), 2^(w-1) - 1]`; the most negative two's
//! complement code is never produced so magnitudes always fit. Real value is
//! `code / 2^F`. All arithmetic saturates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedFormat {
    w: u32,
    i_bits: u32,
    f_bits: u32,
}

impl FixedFormat {
    pub fn new(w: u32, i_bits: u32, f_bits: u32) -> Result<Self> {
        if w != 1 + i_bits + f_bits {
            return Err(Error::InvalidParameter(format!(
                "width {w} != 1 + {i_bits} integer bits + {f_bits} fraction bits"
            )));
        }
        if !(2..=31).contains(&w) {
            return Err(Error::InvalidParameter(format!(
                "width {w} outside supported range 2..=31"
            )));
        }
        Ok(FixedFormat { w, i_bits, f_bits })
    }

    /// w=8: sign, 4 integer bits, 3 fraction bits.
    pub fn w8() -> Self {
        FixedFormat {
            w: 8,
            i_bits: 4,
            f_bits: 3,
        }
    }

    /// w=10: sign, 4 integer bits, 5 fraction bits.
    pub fn w10() -> Self {
        FixedFormat {
            w: 10,
            i_bits: 4,
            f_bits: 5,
        }
    }

    pub fn width(&self) -> u32 {
        self.w
    }

    pub fn int_bits(&self) -> u32 {
        self.i_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.f_bits
    }

    #[inline]
    pub fn max_code(&self) -> i32 {
        (1i32 << (self.w - 1)) - 1
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        (1u64 << self.f_bits) as f64
    }

    #[inline]
    pub fn saturate(&self, v: i64) -> i32 {
        let max = self.max_code() as i64;
        v.clamp(-max, max) as i32
    }

    /// Round-to-nearest-even of `x * 2^F`, saturated.
    #[inline]
    pub fn quantize_code(&self, x: f64) -> i32 {
        let scaled = (x * self.scale()).round_ties_even();
        let max = self.max_code() as f64;
        if scaled.is_nan() {
            0
        } else {
            scaled.clamp(-max, max) as i32
        }
    }

    #[inline]
    pub fn to_real(&self, code: i32) -> f64 {
        code as f64 / self.scale()
    }

    #[inline]
    pub fn add_codes(&self, a: i32, b: i32) -> i32 {
        self.saturate(a as i64 + b as i64)
    }

    #[inline]
    pub fn sub_codes(&self, a: i32, b: i32) -> i32 {
        self.saturate(a as i64 - b as i64)
    }
}

impl fmt::Display for FixedFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w={} (I={}, F={})", self.w, self.i_bits, self.f_bits)
    }
}

/// A quantized value tagged with its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QValue {
    code: i32,
    fmt: FixedFormat,
}

impl QValue {
    /// Wraps a raw code; the code is saturated into range.
    pub fn from_code(code: i64, fmt: FixedFormat) -> Self {
        QValue {
            code: fmt.saturate(code),
            fmt,
        }
    }

    pub fn code(&self) -> i32 {
        self.code
    }

    pub fn format(&self) -> FixedFormat {
        self.fmt
    }

    pub fn to_real(&self) -> f64 {
        self.fmt.to_real(self.code)
    }

    fn same_format(&self, other: &QValue) -> Result<()> {
        if self.fmt != other.fmt {
            return Err(Error::FormatMismatch(
                self.fmt.to_string(),
                other.fmt.to_string(),
            ));
        }
        Ok(())
    }

    pub fn sat_add(self, other: QValue) -> Result<QValue> {
        self.same_format(&other)?;
        Ok(QValue {
            code: self.fmt.add_codes(self.code, other.code),
            fmt: self.fmt,
        })
    }

    pub fn sat_sub(self, other: QValue) -> Result<QValue> {
        self.same_format(&other)?;
        Ok(QValue {
            code: self.fmt.sub_codes(self.code, other.code),
            fmt: self.fmt,
        })
    }
}

pub fn quantize(x: f64, fmt: FixedFormat) -> QValue {
    QValue {
        code: fmt.quantize_code(x),
        fmt,
    }
}

/// `Φ(x) = -ln(tanh(x/2)) = ln(1 + 2/(e^x - 1))`, accurate at both ends.
#[inline]
pub fn phi(x: f64) -> f64 {
    (2.0 / x.exp_m1()).ln_1p()
}

/// Quantized Φ between message codes and an unsigned Φ-domain word.
///
/// The Φ domain keeps `phi_frac` fraction bits, at least the message's `F`.
/// `forward` maps a message magnitude into the Φ domain, where check inputs
/// are summed with saturation, and `inverse` maps the sum back to a message
/// magnitude. Code 0 maps to the maximum code in both directions; inputs at
/// or beyond the clamp map to code 1, never 0, so a check message always
/// keeps a non-zero magnitude. With `phi_frac == F` both directions share
/// the message format.
#[derive(Debug, Clone)]
pub struct PhiTable {
    fmt: FixedFormat,
    phi_frac: u32,
    forward: Vec<i32>,
    forward_clamp: i32,
    inverse: Option<Vec<i32>>,
    inverse_clamp: i64,
    sum_max: i64,
}

/// Largest inverse table materialized; wider Φ domains evaluate directly.
const MAX_INVERSE_TABLE: i64 = 1 << 20;

impl FixedFormat {
    /// Default Φ-domain fraction bits: the Φ word is `w` bits wide, unsigned,
    /// with just enough integer bits to hold Φ of one message LSB.
    pub fn phi_frac_bits(&self) -> u32 {
        let top = phi(1.0 / self.scale());
        let mut i_phi = 0;
        while ((1u64 << i_phi) as f64) <= top {
            i_phi += 1;
        }
        self.w.saturating_sub(i_phi).max(self.f_bits)
    }
}

impl PhiTable {
    pub fn new(fmt: FixedFormat) -> Self {
        Self::with_phi_frac(fmt, fmt.phi_frac_bits()).expect("default resolution is valid")
    }

    /// Table whose Φ domain uses the message format itself.
    pub fn same_format(fmt: FixedFormat) -> Self {
        Self::with_phi_frac(fmt, fmt.frac_bits()).expect("message resolution is valid")
    }

    pub fn with_phi_frac(fmt: FixedFormat, phi_frac: u32) -> Result<Self> {
        if phi_frac < fmt.frac_bits() || phi_frac > fmt.frac_bits() + 8 {
            return Err(Error::InvalidParameter(format!(
                "phi fraction bits {phi_frac} outside {}..={}",
                fmt.frac_bits(),
                fmt.frac_bits() + 8
            )));
        }
        let extra = phi_frac - fmt.frac_bits();
        let max = fmt.max_code();
        let sum_max = (max as i64) << extra;
        let phi_scale = (1u64 << phi_frac) as f64;

        let mut forward = vec![sum_max as i32];
        let mut q = 1;
        loop {
            let y = (phi(fmt.to_real(q)) * phi_scale)
                .round_ties_even()
                .clamp(1.0, sum_max as f64) as i32;
            forward.push(y);
            if y == 1 || q == max {
                break;
            }
            q += 1;
        }

        // first Φ-domain input whose inverse is the floor code
        let inv = |y: i64| fmt.quantize_code(phi(y as f64 / phi_scale)).clamp(1, max);
        let (mut lo, mut hi) = (1i64, sum_max);
        if inv(hi) > 1 {
            hi = sum_max + 1;
        } else {
            while lo < hi {
                let mid = (lo + hi) / 2;
                if inv(mid) == 1 {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
        }
        let inverse_clamp = hi;
        let inverse = (inverse_clamp <= MAX_INVERSE_TABLE).then(|| {
            std::iter::once(max)
                .chain((1..inverse_clamp).map(inv))
                .collect()
        });
        Ok(PhiTable {
            fmt,
            phi_frac,
            forward,
            forward_clamp: q,
            inverse,
            inverse_clamp,
            sum_max,
        })
    }

    pub fn format(&self) -> FixedFormat {
        self.fmt
    }

    pub fn phi_frac_bits(&self) -> u32 {
        self.phi_frac
    }

    /// Saturation level of Φ-domain sums.
    pub fn sum_max(&self) -> i64 {
        self.sum_max
    }

    /// Message magnitude into the Φ domain.
    #[inline]
    pub fn forward(&self, q: i32) -> i64 {
        debug_assert!(q >= 0);
        if q >= self.forward_clamp {
            1
        } else {
            self.forward[q as usize] as i64
        }
    }

    /// Saturated Φ-domain sum back to a message magnitude.
    #[inline]
    pub fn inverse(&self, y: i64) -> i32 {
        debug_assert!(y >= 0);
        if y >= self.inverse_clamp {
            return 1;
        }
        match &self.inverse {
            Some(t) => t[y as usize],
            None if y == 0 => self.fmt.max_code(),
            None => {
                let scale = (1u64 << self.phi_frac) as f64;
                self.fmt
                    .quantize_code(phi(y as f64 / scale))
                    .clamp(1, self.fmt.max_code())
            }
        }
    }

    /// Smallest message code whose Φ, in the message format, is code 1.
    pub fn clamp_input(&self) -> i32 {
        let extra = self.phi_frac - self.fmt.frac_bits();
        let step = 1i64 << extra;
        (((self.inverse_clamp + step - 1) / step) as i32).min(self.fmt.max_code() + 1)
    }

    /// Φ of a message magnitude, quantized in the message format.
    #[inline]
    pub fn lookup(&self, q: i32) -> i32 {
        debug_assert!(q >= 0);
        self.inverse((q as i64) << (self.phi_frac - self.fmt.frac_bits()))
    }

    pub fn phi(&self, q: QValue) -> Result<QValue> {
        if q.fmt != self.fmt {
            return Err(Error::FormatMismatch(
                q.fmt.to_string(),
                self.fmt.to_string(),
            ));
        }
        if q.code < 0 {
            return Err(Error::Contract(format!(
                "phi expects a magnitude, got code {}",
                q.code
            )));
        }
        Ok(QValue {
            code: self.lookup(q.code),
            fmt: self.fmt,
        })
    }

    /// Forward entries for codes `0..=clamp`, Φ-domain codes.
    pub fn entries(&self) -> &[i32] {
        &self.forward
    }
}
