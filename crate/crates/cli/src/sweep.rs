//! Seeded FER sweeps: channel, decoder and optional erase per frame.

use rayon::prelude::*;
use serde::Serialize;

use qcldpc::channel::{init_llr, run_trial, ChannelParams};
use qcldpc::decoder::registry::DecoderBackend;
use qcldpc::erasure::{EraseConfig, EraseStrategy};
use qcldpc::stats::{wilson, Z95};
use qcldpc::{QCCode, Result};

pub struct SweepSpec<'a> {
    pub code: &'a QCCode,
    pub backend: &'a dyn DecoderBackend,
    /// `None` runs without the erase stage.
    pub erase: Option<(&'a dyn EraseStrategy, EraseConfig)>,
    pub delta: f64,
    pub t_max: usize,
    pub seed: u64,
    pub frames: u64,
}

/// What happened to one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameOutcome {
    pub index: u64,
    pub raw_ok: bool,
    pub erased_ok: bool,
    /// The decoder stopped on a matching syndrome.
    pub syndrome_ok: bool,
    pub bit_errors: usize,
    /// Largest reliability among the erroneous bits, when there are any.
    pub worst_error_reliability: Option<f64>,
    pub iterations: usize,
    /// The erase stage reported a zero residual syndrome.
    pub erase_converged: bool,
    pub erase_attempted: usize,
}

impl FrameOutcome {
    /// Counted in `N_err`: failed, with every wrong bit below the threshold.
    pub fn in_n_err(&self, delta: f64) -> bool {
        !self.raw_ok && self.worst_error_reliability.is_some_and(|w| w < delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub snr: f64,
    pub frames: u64,
    pub failures_raw: u64,
    pub failures_after_erase: u64,
    pub n_err: u64,
    pub avg_iterations: f64,
}

impl PointSummary {
    pub fn fer_raw(&self) -> f64 {
        self.failures_raw as f64 / self.frames as f64
    }

    pub fn fer_erased(&self) -> f64 {
        self.failures_after_erase as f64 / self.frames as f64
    }

    pub fn ci_raw(&self) -> (f64, f64) {
        wilson(self.failures_raw, self.frames, Z95)
    }

    pub fn ci_erased(&self) -> (f64, f64) {
        wilson(self.failures_after_erase, self.frames, Z95)
    }
}

pub fn run_frame(spec: &SweepSpec, params: &ChannelParams, index: u64) -> Result<FrameOutcome> {
    let trial = run_trial(spec.code, params, spec.seed, index);
    let llr = init_llr(&trial.received, params.sigma2())?;
    let r = spec
        .backend
        .decode(spec.code, &llr, &trial.syndrome, spec.t_max, true)?;
    let wrong = (&r.u_hat ^ &trial.word).ones();
    let worst = wrong.iter().map(|&i| r.reliabilities[i]).reduce(f64::max);
    let mut out = FrameOutcome {
        index,
        raw_ok: wrong.is_empty(),
        erased_ok: wrong.is_empty(),
        syndrome_ok: r.success,
        bit_errors: wrong.len(),
        worst_error_reliability: worst,
        iterations: r.iterations_used,
        erase_converged: false,
        erase_attempted: 0,
    };
    if let (false, Some((strategy, cfg))) = (r.success, &spec.erase) {
        let e = strategy.erase(spec.code, &r.u_hat, &trial.syndrome, &r.reliabilities, cfg)?;
        out.erase_converged = e.success;
        out.erase_attempted = e.attempted;
        out.erased_ok = e.success && e.corrected == trial.word;
    }
    Ok(out)
}

/// All frames at one SNR, in index order.
pub fn run_point(spec: &SweepSpec, snr: f64) -> Result<Vec<FrameOutcome>> {
    let params = ChannelParams::from_snr(snr)?;
    (0..spec.frames)
        .into_par_iter()
        .map(|i| run_frame(spec, &params, i))
        .collect()
}

pub fn summarize(snr: f64, frames: &[FrameOutcome], delta: f64) -> PointSummary {
    let n = frames.len().max(1) as f64;
    PointSummary {
        snr,
        frames: frames.len() as u64,
        failures_raw: frames.iter().filter(|f| !f.raw_ok).count() as u64,
        failures_after_erase: frames.iter().filter(|f| !f.erased_ok).count() as u64,
        n_err: frames.iter().filter(|f| f.in_n_err(delta)).count() as u64,
        avg_iterations: frames.iter().map(|f| f.iterations as f64).sum::<f64>() / n,
    }
}

pub fn run_sweep(spec: &SweepSpec, snrs: &[f64]) -> Result<Vec<PointSummary>> {
    snrs.iter()
        .map(|&snr| {
            log::info!("snr {snr}: {} frames", spec.frames);
            Ok(summarize(snr, &run_point(spec, snr)?, spec.delta))
        })
        .collect()
}

/// Evenly spaced grid from `start` to `stop` inclusive, snapped to 1e-9.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return Vec::new();
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| ((start + step * i as f64) * 1e9).round() / 1e9)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive_and_snapped() {
        assert_eq!(grid(0.355, 0.389, 0.001).len(), 35);
        assert_eq!(grid(0.355, 0.389, 0.001)[34], 0.389);
        assert_eq!(grid(0.1, 0.3, 0.1), vec![0.1, 0.2, 0.3]);
        assert!(grid(0.3, 0.1, 0.1).is_empty());
        assert!(grid(0.1, 0.3, 0.0).is_empty());
    }
}
