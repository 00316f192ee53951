//! Named decoder backends selectable at run time.

use std::collections::BTreeMap;

use crate::bits::BitVector;
use crate::decoder::{decode_with, Arithmetic, DecodeResult, FixedArithmetic, FloatArithmetic};
use crate::error::{Error, Result};
use crate::qc_code::QCCode;
use crate::quantize::{FixedFormat, PhiTable};

/// A decoder with its arithmetic bound, usable behind `dyn`.
pub trait DecoderBackend: Send + Sync {
    fn name(&self) -> String;

    /// Reliability units per real LLR unit.
    fn units_per_llr(&self) -> f64;

    /// Erase threshold in this backend's reliability units.
    fn default_delta(&self) -> f64;

    fn decode(
        &self,
        code: &QCCode,
        llr: &[f64],
        s: &BitVector,
        t_max: usize,
        early_exit: bool,
    ) -> Result<DecodeResult>;
}

pub struct Backend<A: Arithmetic> {
    arith: A,
    delta: f64,
}

impl<A: Arithmetic> Backend<A> {
    pub fn new(arith: A, delta: f64) -> Self {
        Backend { arith, delta }
    }

    pub fn arithmetic(&self) -> &A {
        &self.arith
    }
}

impl<A: Arithmetic> DecoderBackend for Backend<A> {
    fn name(&self) -> String {
        self.arith.name()
    }

    fn units_per_llr(&self) -> f64 {
        self.arith.units_per_llr()
    }

    fn default_delta(&self) -> f64 {
        self.delta
    }

    fn decode(
        &self,
        code: &QCCode,
        llr: &[f64],
        s: &BitVector,
        t_max: usize,
        early_exit: bool,
    ) -> Result<DecodeResult> {
        decode_with(&self.arith, code, llr, s, t_max, early_exit, None)
    }
}

/// Threshold in LLR units used where no per-format value is known.
pub const DEFAULT_DELTA_LLR: f64 = 5.0;

/// Default erase threshold in integer codes for a fixed-point format.
pub fn default_fixed_delta(fmt: FixedFormat) -> f64 {
    if fmt == FixedFormat::w8() {
        40.0
    } else if fmt == FixedFormat::w10() {
        180.0
    } else {
        (DEFAULT_DELTA_LLR * fmt.scale()).round()
    }
}

#[derive(Debug, Clone, Default)]
pub struct BackendOptions {
    pub format: Option<FixedFormat>,
    /// Fraction bits of the Φ domain; the format's default when unset.
    pub phi_frac: Option<u32>,
}

pub type BackendFactory = fn(&BackendOptions) -> Result<Box<dyn DecoderBackend>>;

pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

fn float_backend(_: &BackendOptions) -> Result<Box<dyn DecoderBackend>> {
    Ok(Box::new(Backend::new(FloatArithmetic, DEFAULT_DELTA_LLR)))
}

fn fixed_backend(opts: &BackendOptions) -> Result<Box<dyn DecoderBackend>> {
    let fmt = opts.format.unwrap_or_else(FixedFormat::w8);
    let table = match opts.phi_frac {
        Some(f) => PhiTable::with_phi_frac(fmt, f)?,
        None => PhiTable::new(fmt),
    };
    Ok(Box::new(Backend::new(
        FixedArithmetic::with_table(table),
        default_fixed_delta(fmt),
    )))
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: BackendFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, opts: &BackendOptions) -> Result<Box<dyn DecoderBackend>> {
        match self.factories.get(name) {
            Some(f) => f(opts),
            None => Err(Error::UnknownStrategy {
                kind: "decoder backend",
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut r = BackendRegistry::empty();
        r.register("float", float_backend);
        r.register("fixed", fixed_backend);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_backends() {
        let reg = BackendRegistry::default();
        assert_eq!(reg.names(), vec!["fixed", "float"]);
        let b = reg
            .create(
                "fixed",
                &BackendOptions {
                    format: Some(FixedFormat::w10()),
                    phi_frac: None,
                },
            )
            .unwrap();
        assert_eq!(b.default_delta(), 180.0);
        assert_eq!(b.units_per_llr(), 32.0);
        assert_eq!(
            reg.create("fixed", &BackendOptions::default())
                .unwrap()
                .default_delta(),
            40.0
        );
        let err = reg
            .create("minsum", &BackendOptions::default())
            .err()
            .unwrap();
        assert!(err.to_string().contains("fixed, float"));
        let narrow = BackendOptions {
            format: None,
            phi_frac: Some(3),
        };
        assert_eq!(
            reg.create("fixed", &narrow).unwrap().name(),
            "fixed[w=8 (I=4, F=3), phi F=3]"
        );
        assert!(reg
            .create(
                "fixed",
                &BackendOptions {
                    format: None,
                    phi_frac: Some(12)
                }
            )
            .is_err());
    }
}
