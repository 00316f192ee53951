//! BIAWGN channel trials for syndrome-based reconciliation.
//!
//! Bits map to antipodal symbols `0 -> +1`, `1 -> -1` with unit energy, so a
//! linear SNR gives noise variance `1/snr`. Every trial draws from its own ChaCha
//! stream selected by `(master_seed, trial_index)`, so results do not depend on
//! how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::qc_code::QCCode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    snr: f64,
    sigma2: f64,
}

impl ChannelParams {
    pub fn from_snr(snr: f64) -> Result<Self> {
        if !(snr > 0.0) || !snr.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "snr must be positive and finite, got {snr}"
            )));
        }
        Ok(ChannelParams {
            snr,
            sigma2: 1.0 / snr,
        })
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

pub fn sigma_from_snr(snr: f64) -> Result<f64> {
    Ok(ChannelParams::from_snr(snr)?.sigma())
}

/// Linear SNR from decibels.
pub fn snr_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Independent generator for one trial.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub word: BitVector,
    pub received: Vec<f64>,
    pub syndrome: BitVector,
    pub master_seed: u64,
    pub index: u64,
}

impl Trial {
    /// Noise-free channel symbols of `word`.
    pub fn symbols(&self) -> Vec<f64> {
        self.word
            .iter()
            .map(|b| if b { -1.0 } else { 1.0 })
            .collect()
    }
}

pub fn run_trial(code: &QCCode, params: &ChannelParams, master_seed: u64, index: u64) -> Trial {
    let mut rng = trial_rng(master_seed, index);
    let n = code.n();
    let mut word = BitVector::zeros(n);
    for i in 0..n {
        if rng.gen::<bool>() {
            word.set(i, true);
        }
    }
    let sigma = params.sigma();
    let received = (0..n)
        .map(|i| {
            let x = if word.get(i) { -1.0 } else { 1.0 };
            let z: f64 = rng.sample(StandardNormal);
            x + sigma * z
        })
        .collect();
    let syndrome = code.syndrome(&word).expect("word length matches code");
    Trial {
        word,
        received,
        syndrome,
        master_seed,
        index,
    }
}

/// Channel LLRs `2 r / σ²`.
pub fn init_llr(received: &[f64], sigma2: f64) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    Ok(received.iter().map(|r| 2.0 * r / sigma2).collect())
}
