//! Secret-key-rate model for Gaussian-modulated CV-QKD with reverse
//! reconciliation and homodyne detection.
//!
//! With transmittance `T = 10^(-alpha_db * d / 10)`, detector efficiency `eta`,
//! electronic noise `v_el` and excess noise `xi` (shot-noise units):
//!
//! * `snr = eta*T*V_A / (1 + v_el + eta*T*xi)`, `I_AB = 0.5*log2(1 + snr)`
//! * `beta = R / I_AB`, so the reconciled information `beta*I_AB` equals `R`
//! * `chi_BE = G(l1) + G(l2) - G(l3) - G(l4)` with `G(x) = (x+1)log2(x+1) - x log2 x`
//!   evaluated at `(lambda_i - 1)/2`, where, for `V = V_A + 1`,
//!   `chi_line = 1/T - 1 + xi`, `chi_hom = (1-eta)/eta + v_el/eta`,
//!   `chi_tot = chi_line + chi_hom/T`:
//!   - `A = V^2(1-2T) + 2T + T^2(V + chi_line)^2`, `B = T^2(V*chi_line + 1)^2`
//!   - `lambda_{1,2}^2 = (A +- sqrt(A^2 - 4B)) / 2`
//!   - `C = (A*chi_hom + V*sqrt(B) + T(V + chi_line)) / (T(V + chi_tot))`
//!   - `D = sqrt(B)(V + sqrt(B)*chi_hom) / (T(V + chi_tot))`
//!   - `lambda_{3,4}^2 = (C +- sqrt(C^2 - 4D)) / 2`
//! * `K_t = (1 - FER) * (beta*I_AB - chi_BE)` per pulse.

use log::warn;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvQkdParams {
    /// Modulation variance in shot-noise units.
    pub va: f64,
    pub distance_km: f64,
    pub alpha_db: f64,
    pub xi: f64,
    pub eta: f64,
    pub v_el: f64,
    pub rate: f64,
}

pub const DEFAULT_ALPHA_DB: f64 = 0.2;
pub const DEFAULT_XI: f64 = 0.01;
pub const DEFAULT_V_EL: f64 = 0.1;

impl CvQkdParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("va", self.va, self.va > 0.0),
            ("distance_km", self.distance_km, self.distance_km >= 0.0),
            ("alpha_db", self.alpha_db, self.alpha_db >= 0.0),
            ("xi", self.xi, self.xi >= 0.0),
            ("eta", self.eta, self.eta > 0.0 && self.eta <= 1.0),
            ("v_el", self.v_el, self.v_el >= 0.0),
            ("rate", self.rate, self.rate > 0.0 && self.rate < 1.0),
        ];
        for (name, v, ok) in checks {
            if !ok || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.alpha_db * self.distance_km / 10.0)
    }

    pub fn with_va(&self, va: f64) -> Self {
        CvQkdParams { va, ..*self }
    }

    /// Parameters whose detector efficiency is solved so that modulation
    /// variance `va` yields `target_snr` at the given distance.
    pub fn calibrated(
        rate: f64,
        distance_km: f64,
        va: f64,
        target_snr: f64,
        xi: f64,
        v_el: f64,
        alpha_db: f64,
    ) -> Result<Self> {
        let t = 10f64.powf(-alpha_db * distance_km / 10.0);
        let denom = t * (va - target_snr * xi);
        if denom <= 0.0 || target_snr <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cannot reach snr {target_snr} with va {va} at {distance_km} km"
            )));
        }
        let eta = target_snr * (1.0 + v_el) / denom;
        let p = CvQkdParams {
            va,
            distance_km,
            alpha_db,
            xi,
            eta,
            v_el,
            rate,
        };
        p.validate()?;
        Ok(p)
    }

    /// Rate-0.2 link at 25 km.
    pub fn preset_rate02() -> Self {
        RATE02_LINK.params().expect("preset is valid")
    }

    /// Rate-0.1 link at 50 km.
    pub fn preset_rate01() -> Self {
        RATE01_LINK.params().expect("preset is valid")
    }
}

/// An operating point a link is calibrated to: `snr` at `va` over `distance_km`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkReference {
    pub rate: f64,
    pub distance_km: f64,
    pub va: f64,
    pub snr: f64,
}

pub const RATE02_LINK: LinkReference = LinkReference {
    rate: 0.2,
    distance_km: 25.0,
    va: 6.3692,
    snr: 0.3707,
};
pub const RATE01_LINK: LinkReference = LinkReference {
    rate: 0.1,
    distance_km: 50.0,
    va: 2.9221,
    snr: 0.1701,
};

impl LinkReference {
    /// Link with the default excess noise, electronic noise and loss.
    pub fn params(&self) -> Result<CvQkdParams> {
        CvQkdParams::calibrated(
            self.rate,
            self.distance_km,
            self.va,
            self.snr,
            DEFAULT_XI,
            DEFAULT_V_EL,
            DEFAULT_ALPHA_DB,
        )
    }
}

pub fn beta(rate: f64, snr: f64) -> f64 {
    rate / (0.5 * (1.0 + snr).log2())
}

pub fn snr_of_va(p: &CvQkdParams) -> f64 {
    let et = p.eta * p.transmittance();
    et * p.va / (1.0 + p.v_el + et * p.xi)
}

/// Inverse of [`snr_of_va`] in `V_A`.
pub fn va_of_snr(p: &CvQkdParams, snr: f64) -> f64 {
    let et = p.eta * p.transmittance();
    snr * (1.0 + p.v_el + et * p.xi) / et
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInfo {
    pub snr: f64,
    pub i_ab: f64,
    pub chi_be: f64,
}

fn holevo_g(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (x + 1.0) * (x + 1.0).log2() - x * x.log2()
    }
}

fn eigen_pair(sum: f64, prod: f64, what: &str) -> Result<(f64, f64)> {
    let disc = sum * sum - 4.0 * prod;
    // tiny negative discriminants are rounding noise at degenerate points
    let root = if disc < 0.0 && disc > -1e-9 * sum * sum {
        0.0
    } else {
        disc.sqrt()
    };
    let hi = 0.5 * (sum + root);
    let lo = 0.5 * (sum - root);
    if !root.is_finite() || lo < 0.0 || hi < 0.0 {
        return Err(Error::NonPhysical(format!(
            "{what}: sum {sum}, product {prod}"
        )));
    }
    Ok((hi.sqrt(), lo.sqrt()))
}

fn entropy(lambda: f64) -> f64 {
    holevo_g((lambda - 1.0) / 2.0)
}

pub fn mutual_information(p: &CvQkdParams) -> Result<MutualInfo> {
    p.validate()?;
    let snr = snr_of_va(p);
    let i_ab = 0.5 * (1.0 + snr).log2();
    let t = p.transmittance();
    let v = p.va + 1.0;
    let chi_line = 1.0 / t - 1.0 + p.xi;
    let chi_hom = (1.0 - p.eta) / p.eta + p.v_el / p.eta;
    let chi_tot = chi_line + chi_hom / t;

    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = t * t * (v * chi_line + 1.0).powi(2);
    let (l1, l2) = eigen_pair(a, b, "eavesdropper state")?;

    let sb = b.sqrt();
    let den = t * (v + chi_tot);
    let c = (a * chi_hom + v * sb + t * (v + chi_line)) / den;
    let d = sb * (v + sb * chi_hom) / den;
    let (l3, l4) = eigen_pair(c, d, "conditional state")?;

    // symplectic eigenvalues below 1 violate the uncertainty principle
    for l in [l1, l2, l3, l4] {
        if l < 1.0 - 1e-9 {
            return Err(Error::NonPhysical(format!("symplectic eigenvalue {l} < 1")));
        }
    }
    let chi_be = entropy(l1) + entropy(l2) - entropy(l3) - entropy(l4);
    Ok(MutualInfo { snr, i_ab, chi_be })
}

/// Sigmoid FER curve `1 / (1 + exp(a (snr - b)))`, clamped below by `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct FerModel {
    pub a: f64,
    pub b: f64,
    pub floor: f64,
    pub points: Vec<(f64, f64)>,
}

pub const FER_CLAMP: f64 = 1e-6;

impl FerModel {
    pub fn new(a: f64, b: f64) -> Self {
        FerModel {
            a,
            b,
            floor: FER_CLAMP,
            points: Vec::new(),
        }
    }

    /// A decoder that never fails.
    pub fn error_free() -> Self {
        FerModel {
            a: f64::INFINITY,
            b: 0.0,
            floor: 0.0,
            points: Vec::new(),
        }
    }

    pub fn fer(&self, snr: f64) -> f64 {
        let x = self.a * (snr - self.b);
        let v = if x.is_nan() {
            0.5
        } else {
            1.0 / (1.0 + x.exp())
        };
        v.clamp(self.floor, 1.0)
    }

    pub fn fer_at_va(&self, p: &CvQkdParams) -> f64 {
        self.fer(snr_of_va(p))
    }
}

/// Least-squares fit of the sigmoid in the logit domain.
pub fn fit_fer(points: &[(f64, f64)]) -> Result<FerModel> {
    check_points(points)?;
    // logit(1 - fer) = a*snr - a*b
    let ys: Vec<f64> = points
        .iter()
        .map(|p| {
            let f = p.1.clamp(FER_CLAMP, 1.0 - FER_CLAMP);
            ((1.0 - f) / f).ln()
        })
        .collect();
    fit_logit(points, &ys)
}

fn check_points(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 FER points, got {}",
            points.len()
        )));
    }
    if let Some(&(s, f)) = points
        .iter()
        .find(|(s, f)| !(0.0..=1.0).contains(f) || !s.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "FER point ({s}, {f}) out of range"
        )));
    }
    if points.iter().all(|p| p.1 <= 0.0) || points.iter().all(|p| p.1 >= 1.0) {
        return Err(Error::DegenerateFit(
            "all points are 0 or all are 1; widen the SNR sweep".into(),
        ));
    }
    Ok(())
}

/// Sigmoid fit from failure counts, using the empirical logit
/// `ln((n - k + 1/2) / (k + 1/2))` so that points with no (or only) failures
/// carry finite weight.
pub fn fit_fer_counts(counts: &[(f64, u64, u64)]) -> Result<FerModel> {
    if let Some(&(s, k, n)) = counts.iter().find(|(_, k, n)| *n == 0 || k > n) {
        return Err(Error::InvalidParameter(format!(
            "{k} failures out of {n} frames at snr {s}"
        )));
    }
    let points: Vec<(f64, f64)> = counts
        .iter()
        .map(|&(s, k, n)| (s, k as f64 / n as f64))
        .collect();
    check_points(&points)?;
    let ys: Vec<f64> = counts
        .iter()
        .map(|&(_, k, n)| ((n - k) as f64 + 0.5).ln() - (k as f64 + 0.5).ln())
        .collect();
    fit_logit(&points, &ys)
}

fn fit_logit(points: &[(f64, f64)], ys: &[f64]) -> Result<FerModel> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all points share one SNR".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    if a <= 0.0 {
        return Err(Error::DegenerateFit(format!(
            "FER does not decrease with SNR (slope {a})"
        )));
    }
    let b = mx - my / a;
    Ok(FerModel {
        a,
        b,
        floor: FER_CLAMP,
        points: points.to_vec(),
    })
}

/// Key rate per pulse at the parameters' modulation variance.
pub fn key_rate(p: &CvQkdParams, model: &FerModel) -> Result<f64> {
    let mi = mutual_information(p)?;
    let reconciled = beta(p.rate, mi.snr) * mi.i_ab;
    Ok((1.0 - model.fer(mi.snr)) * (reconciled - mi.chi_be))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub va_opt: f64,
    pub snr: f64,
    pub fer: f64,
    pub beta: f64,
    pub k_opt: f64,
    /// The rate was non-positive over the whole range and is reported as 0.
    pub zero_rate: bool,
}

pub const GRID_POINTS: usize = 400;

/// Maximizes the key rate over `V_A` in `bounds` by a dense grid followed by
/// golden-section refinement around the best grid point.
pub fn optimize_va(
    template: &CvQkdParams,
    model: &FerModel,
    bounds: (f64, f64),
) -> Result<KeyRateResult> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("bounds ({lo}, {hi})")));
    }
    template.with_va(lo).validate()?;
    let k = |va: f64| key_rate(&template.with_va(va), model);
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    let mut best_i = 0;
    for i in 0..GRID_POINTS {
        let va = lo + step * i as f64;
        let v = k(va)?;
        if v > best.1 {
            best = (va, v);
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (k(c)?, k(d)?);
    for _ in 0..100 {
        if (b - a).abs() < 1e-10 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = k(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = k(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = k(mid)?;
    if fm > best.1 {
        best = (mid, fm);
    }
    let p = template.with_va(best.0);
    let snr = snr_of_va(&p);
    let beta_v = beta(p.rate, snr);
    if beta_v > 1.0 {
        warn!(
            "reconciliation efficiency {beta_v:.4} exceeds 1 at V_A {:.4}",
            best.0
        );
    }
    let zero_rate = best.1 <= 0.0;
    Ok(KeyRateResult {
        va_opt: best.0,
        snr,
        fer: model.fer(snr),
        beta: beta_v,
        k_opt: if zero_rate { 0.0 } else { best.1 },
        zero_rate,
    })
}

/// Relative improvement `(K_with - K_without) / K_without`. Infinite when
/// only the improved rate is positive, `None` when both are zero.
pub fn gain(with: &KeyRateResult, without: &KeyRateResult) -> Option<f64> {
    match (with.k_opt > 0.0, without.k_opt > 0.0) {
        (_, true) => Some((with.k_opt - without.k_opt) / without.k_opt),
        (true, false) => Some(f64::INFINITY),
        (false, false) => None,
    }
}

/// Key bits per second when pulses are sent at the decoder throughput.
pub fn realtime_skr(k_opt: f64, throughput_bps: f64) -> Result<f64> {
    if k_opt < 0.0 || throughput_bps < 0.0 || !k_opt.is_finite() || !throughput_bps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "key rate {k_opt} and throughput {throughput_bps} must be non-negative"
        )));
    }
    Ok(k_opt * throughput_bps)
}
