//! Throughput estimates from cycle counts and code statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::schedule::cycles_per_iteration;
use crate::qc_code::QCCode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputModel {
    pub f_hz: f64,
    pub p: usize,
    pub t_max: usize,
    /// Code length.
    pub n: usize,
    pub rate: f64,
    /// Average check-node degree, `n_total / m`.
    pub n_avr: f64,
    /// Read cycles per iteration.
    pub k_cycles: usize,
    /// Erase-stage delay in clock cycles.
    pub de_cycles: f64,
    pub decoders: usize,
}

impl ThroughputModel {
    /// Model for `code` with the erase delay given in iteration equivalents.
    /// One iteration equivalent is `n_total / p` cycles, the per-iteration
    /// term of the statistics-based estimate; it equals `K` when `p` divides
    /// every block row's work evenly.
    pub fn for_code(
        code: &QCCode,
        f_hz: f64,
        p: usize,
        t_max: usize,
        de_iterations: f64,
        decoders: usize,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("p must be positive".into()));
        }
        let k_cycles = cycles_per_iteration(code, p);
        let stats = code.stats();
        let m = ThroughputModel {
            f_hz,
            p,
            t_max,
            n: code.n(),
            rate: code.rate(),
            n_avr: stats.n_total as f64 / code.m() as f64,
            k_cycles,
            de_cycles: de_iterations * stats.n_total as f64 / p as f64,
            decoders,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.f_hz > 0.0
            && self.p > 0
            && self.t_max > 0
            && self.n > 0
            && self.rate < 1.0
            && self.n_avr > 0.0
            && self.de_cycles >= 0.0
            && self.decoders >= 1;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "throughput model {self:?}"
            )));
        }
        Ok(())
    }
}

/// Throughputs in bits per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Throughput {
    /// From the cycle count: `f N / (K t_max)`.
    pub from_cycles: f64,
    /// From code statistics: `f p / ((1 - R) N_avr t_max)`.
    pub from_stats: f64,
    /// As `from_stats`, with the erase delay added to the per-frame time.
    pub with_erase: f64,
    /// `with_erase` summed over all decoder instances.
    pub total: f64,
}

/// The erase delay enters per frame as `D_e` cycles. Dividing the frame time
/// `K t_max + D_e` by `N / p` gives the normalized denominator
/// `(1 - R) N_avr t_max + D_e p / N`, using `K p = n_total = (1 - R) N N_avr`.
pub fn throughput(m: &ThroughputModel) -> Result<Throughput> {
    m.validate()?;
    let f = m.f_hz;
    let p = m.p as f64;
    let t = m.t_max as f64;
    let n = m.n as f64;
    let k = m.k_cycles as f64;
    if k == 0.0 {
        return Err(Error::InvalidParameter("code has no edges".into()));
    }
    let from_cycles = f * n / (k * t);
    let base = (1.0 - m.rate) * m.n_avr * t;
    let from_stats = f * p / base;
    let with_erase = f * p / (base + m.de_cycles * p / n);
    Ok(Throughput {
        from_cycles,
        from_stats,
        with_erase,
        total: m.decoders as f64 * with_erase,
    })
}

/// Memory bits for `w`-bit messages: variable words plus check messages.
pub fn memory_bits(code: &QCCode, w: u32) -> (usize, usize) {
    (code.n() * w as usize, code.edge_count() * w as usize)
}
