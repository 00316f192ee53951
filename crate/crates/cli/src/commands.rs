use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use serde::Serialize;

use qcldpc::construction::{girth, qc_peg_detailed, validate_distribution, MetDegreeDistribution};
use qcldpc::decoder::registry::{BackendOptions, BackendRegistry};
use qcldpc::erasure::{EraseConfig, EraseRegistry};
use qcldpc::pipeline::{memory_bits, throughput as eval_throughput, ThroughputModel};
use qcldpc::skr::{
    self, fit_fer_counts, gain, optimize_va, realtime_skr, CvQkdParams, FerModel, KeyRateResult,
};
use qcldpc::{expand as expand_code, BaseMatrix, FixedFormat, QCCode};

use crate::report::{self, read_csv, with_output, write_csv, write_json, SweepRow};
use crate::sweep::{grid, run_sweep, SweepSpec};
use crate::{
    data, infeasible, usage, Arith, CliResult, ConstructArgs, ExpandArgs, FerSweepArgs, Preset,
    SkrArgs, ThroughputArgs, ValidateArgs,
};

fn load_code(path: &Path) -> CliResult<QCCode> {
    Ok(expand_code(&BaseMatrix::load(path)?))
}

#[derive(Debug, Serialize)]
struct CodeReport {
    rows: usize,
    cols: usize,
    z: usize,
    n: usize,
    m: usize,
    rate: f64,
    edges: usize,
    n_avr: f64,
    /// Girth, or `>=cap` when no shorter cycle exists.
    girth: Option<String>,
    col_degree_hist: BTreeMap<usize, usize>,
    row_degree_hist: BTreeMap<usize, usize>,
}

fn code_report(code: &QCCode, girth_cap: Option<usize>) -> CliResult<CodeReport> {
    let stats = code.stats();
    let g = match girth_cap {
        Some(cap) => Some(girth(code, cap)?.to_string()),
        None => None,
    };
    Ok(CodeReport {
        rows: code.base().rows(),
        cols: code.base().cols(),
        z: code.z(),
        n: code.n(),
        m: code.m(),
        rate: code.rate(),
        edges: stats.n_total,
        n_avr: stats.n_avr,
        girth: g,
        col_degree_hist: stats.col_hist,
        row_degree_hist: stats.row_hist,
    })
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    match path {
        Some(p) => write_json(p, value).map_err(data),
        None => with_output(None, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
        .map_err(data),
    }
}

#[derive(Debug, Serialize)]
struct DistributionReport {
    edge_types: usize,
    design_rate: f64,
    edge_density: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ConstructReport {
    code: CodeReport,
    /// The realized block degrees, checked for exact balance.
    realized: DistributionReport,
    rounded: bool,
}

pub fn construct(a: &ConstructArgs) -> CliResult<()> {
    let dist = MetDegreeDistribution::load(&a.dist)?;
    validate_distribution(&dist)?;
    let peg = qc_peg_detailed(&dist, a.n, a.z, a.seed)?;
    let realized = peg.realized_distribution(dist.edge_types);
    let rep = validate_distribution(&realized)?;
    peg.base.save(&a.out)?;
    info!("wrote {}", a.out.display());
    let code = expand_code(&peg.base);
    let report = ConstructReport {
        code: code_report(&code, Some(a.girth_cap))?,
        realized: DistributionReport {
            edge_types: dist.edge_types,
            design_rate: rep.design_rate,
            edge_density: rep.edge_density,
        },
        rounded: peg.realization.rounded,
    };
    emit_json(a.json.as_deref(), &report)
}

pub fn expand(a: &ExpandArgs) -> CliResult<()> {
    let code = load_code(&a.code)?;
    with_output(None, |w| {
        w.write_all(code.support_listing().as_bytes())?;
        Ok(())
    })
    .map_err(data)?;
    if let Some(p) = &a.json {
        write_json(p, &code_report(&code, None)?).map_err(data)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    code: Option<CodeReport>,
    distribution: Option<DistributionReport>,
}

pub fn validate(a: &ValidateArgs) -> CliResult<()> {
    if a.code.is_none() && a.dist.is_none() {
        return Err(usage("validate needs --code and/or --dist"));
    }
    let mut report = ValidateReport {
        code: None,
        distribution: None,
    };
    if let Some(p) = &a.dist {
        let dist = MetDegreeDistribution::load(p)?;
        let rep = validate_distribution(&dist)?;
        report.distribution = Some(DistributionReport {
            edge_types: dist.edge_types,
            design_rate: rep.design_rate,
            edge_density: rep.edge_density,
        });
    }
    if let Some(p) = &a.code {
        report.code = Some(code_report(&load_code(p)?, Some(a.girth_cap))?);
    }
    emit_json(a.json.as_deref(), &report)
}

fn fixed_format(a: &FerSweepArgs) -> CliResult<FixedFormat> {
    let (i, f) = match (a.int_bits, a.frac_bits, a.width) {
        (Some(i), Some(f), _) => (i, f),
        (None, None, 8) => return Ok(FixedFormat::w8()),
        (None, None, 10) => return Ok(FixedFormat::w10()),
        _ => {
            return Err(usage(format!(
                "width {} needs both --int-bits and --frac-bits",
                a.width
            )))
        }
    };
    Ok(FixedFormat::new(a.width, i, f)?)
}

fn sweep_grid(a: &FerSweepArgs) -> CliResult<Vec<f64>> {
    let snrs = match (a.snr_start, a.snr_stop, a.snr_step) {
        (Some(lo), Some(hi), Some(step)) => grid(lo, hi, step),
        _ => a.snrs.clone(),
    };
    if snrs.is_empty() {
        return Err(usage(
            "empty SNR grid; give --snrs or --snr-start/--snr-stop/--snr-step",
        ));
    }
    if snrs.windows(2).any(|w| w[1] <= w[0]) || snrs.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(usage(format!(
            "SNR grid must be positive, finite and strictly increasing: {snrs:?}"
        )));
    }
    Ok(snrs)
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    code: String,
    backend: String,
    erase: Option<&'a str>,
    delta: f64,
    t_max: usize,
    seed: u64,
    frames: u64,
    points: &'a [SweepRow],
}

pub fn fer_sweep(a: &FerSweepArgs) -> CliResult<()> {
    if a.frames == 0 {
        return Err(usage("frames must be at least 1"));
    }
    let snrs = sweep_grid(a)?;
    let code = load_code(&a.code)?;
    let opts = match a.arith {
        Arith::Float => BackendOptions::default(),
        Arith::Fixed => BackendOptions {
            format: Some(fixed_format(a)?),
            phi_frac: a.phi_frac,
        },
    };
    let backend = BackendRegistry::default().create(&a.arith.to_string(), &opts)?;
    let delta = a.delta.unwrap_or_else(|| backend.default_delta());
    let strategy = EraseRegistry::default().create(&a.erase)?;
    let cfg = EraseConfig::new(delta)?.with_max_flips(a.max_flips);
    let spec = SweepSpec {
        code: &code,
        backend: backend.as_ref(),
        erase: (!a.no_erase).then(|| (strategy.as_ref(), cfg)),
        delta,
        t_max: a.t_max,
        seed: a.seed,
        frames: a.frames,
    };
    info!(
        "{} on {}, delta {delta}, t_max {}",
        backend.name(),
        a.code.display(),
        a.t_max
    );
    let rows: Vec<SweepRow> = run_sweep(&spec, &snrs)?
        .iter()
        .map(SweepRow::from)
        .collect();
    with_output(a.out.as_deref(), |w| {
        write_csv(w, report::SWEEP_SCHEMA, &rows)
    })
    .map_err(data)?;
    if let Some(p) = &a.json {
        let rep = SweepReport {
            code: a.code.display().to_string(),
            backend: backend.name(),
            erase: (!a.no_erase).then_some(strategy.name()),
            delta,
            t_max: a.t_max,
            seed: a.seed,
            frames: a.frames,
            points: &rows,
        };
        write_json(p, &rep).map_err(data)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ThroughputRow {
    n: usize,
    rate: f64,
    p: usize,
    f_mhz: f64,
    t_max: usize,
    k_cycles: usize,
    n_avr: f64,
    de_iterations: f64,
    de_cycles: f64,
    from_cycles_mbps: f64,
    from_stats_mbps: f64,
    with_erase_mbps: f64,
    decoders: usize,
    total_mbps: f64,
    memory_var_bits: usize,
    memory_check_bits: usize,
}

pub fn throughput(a: &ThroughputArgs) -> CliResult<()> {
    let code = load_code(&a.code)?;
    let model = ThroughputModel::for_code(
        &code,
        a.f_mhz * 1e6,
        a.p,
        a.t_max,
        a.de_iterations,
        a.decoders,
    )?;
    let t = eval_throughput(&model)?;
    let (var_bits, chk_bits) = memory_bits(&code, a.width);
    let row = ThroughputRow {
        n: model.n,
        rate: model.rate,
        p: model.p,
        f_mhz: a.f_mhz,
        t_max: model.t_max,
        k_cycles: model.k_cycles,
        n_avr: model.n_avr,
        de_iterations: a.de_iterations,
        de_cycles: model.de_cycles,
        from_cycles_mbps: t.from_cycles / 1e6,
        from_stats_mbps: t.from_stats / 1e6,
        with_erase_mbps: t.with_erase / 1e6,
        decoders: model.decoders,
        total_mbps: t.total / 1e6,
        memory_var_bits: var_bits,
        memory_check_bits: chk_bits,
    };
    with_output(a.out.as_deref(), |w| {
        write_csv(w, report::THROUGHPUT_SCHEMA, std::slice::from_ref(&row))
    })
    .map_err(data)?;
    if let Some(p) = &a.json {
        write_json(p, &row).map_err(data)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SkrRow {
    pub rate: f64,
    pub distance_km: f64,
    pub erase: bool,
    pub fer_a: f64,
    pub fer_b: f64,
    pub va_opt: f64,
    pub snr: f64,
    pub fer: f64,
    pub beta: f64,
    pub k_opt: f64,
    pub zero_rate: bool,
    /// Relative gain of the erase stage, on the with-erase row only.
    pub g_k: Option<f64>,
    pub realtime_skr_mbps: Option<f64>,
}

fn link(a: &SkrArgs) -> CliResult<CvQkdParams> {
    let (rate, d, va, snr) = match a.preset.map(|p| match p {
        Preset::Rate02 => skr::RATE02_LINK,
        Preset::Rate01 => skr::RATE01_LINK,
    }) {
        Some(l) => (l.rate, l.distance_km, l.va, l.snr),
        None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    };
    let rate = a.rate.unwrap_or(rate);
    let d = a.distance_km.unwrap_or(d);
    let va = a.va_ref.unwrap_or(va);
    let snr = a.snr_ref.unwrap_or(snr);
    if [rate, d, va, snr].iter().any(|v| v.is_nan()) {
        return Err(usage(
            "give --preset or all of --rate, --distance-km, --va-ref, --snr-ref",
        ));
    }
    Ok(CvQkdParams::calibrated(
        rate, d, va, snr, a.xi, a.v_el, a.alpha_db,
    )?)
}

type Counts = Vec<(f64, u64, u64)>;

fn sweep_counts(a: &SkrArgs) -> CliResult<(Counts, Counts)> {
    let read = |p: &Path| read_csv::<SweepRow>(p, report::SWEEP_SCHEMA).map_err(data);
    let after = |rows: &[SweepRow]| {
        rows.iter()
            .map(|r| (r.snr, r.failures_after_erase, r.frames))
            .collect()
    };
    match (&a.sweep, &a.with, &a.without) {
        (Some(p), _, _) => {
            let rows = read(p)?;
            Ok((
                after(&rows),
                rows.iter()
                    .map(|r| (r.snr, r.failures_raw, r.frames))
                    .collect(),
            ))
        }
        (None, Some(w), Some(wo)) => Ok((after(&read(w)?), after(&read(wo)?))),
        _ => Err(usage("give --sweep, or both --with and --without")),
    }
}

/// Fits both curves and optimizes `V_A` over the SNR range both sweeps cover,
/// above the point where the efficiency reaches 1.
pub fn optimize_pair(
    link: &CvQkdParams,
    with: &[(f64, u64, u64)],
    without: &[(f64, u64, u64)],
) -> CliResult<(FerModel, KeyRateResult, FerModel, KeyRateResult)> {
    let range = |c: &[(f64, u64, u64)]| {
        c.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.0), hi.max(p.0))
            })
    };
    let (l1, h1) = range(with);
    let (l2, h2) = range(without);
    let capacity_snr = 2f64.powf(2.0 * link.rate) - 1.0;
    let lo = l1.max(l2).max(capacity_snr);
    let hi = h1.min(h2);
    if !(lo < hi) {
        return Err(infeasible(format!(
            "sweeps share no SNR range above {capacity_snr:.4} (with erase {l1}..{h1}, without {l2}..{h2})"
        )));
    }
    let bounds = (skr::va_of_snr(link, lo), skr::va_of_snr(link, hi));
    let fit_with = fit_fer_counts(with)?;
    let fit_without = fit_fer_counts(without)?;
    let k_with = optimize_va(link, &fit_with, bounds)?;
    let k_without = optimize_va(link, &fit_without, bounds)?;
    Ok((fit_with, k_with, fit_without, k_without))
}

pub fn skr_opt(a: &SkrArgs) -> CliResult<()> {
    let link = link(a)?;
    let (with, without) = sweep_counts(a)?;
    let (fit_with, k_with, fit_without, k_without) = optimize_pair(&link, &with, &without)?;
    let g = gain(&k_with, &k_without);
    let realtime = |k: &KeyRateResult| -> CliResult<Option<f64>> {
        a.throughput_mbps
            .map(|t| realtime_skr(k.k_opt, t))
            .transpose()
            .map_err(Into::into)
    };
    let row = |erase: bool, m: &FerModel, k: &KeyRateResult| -> CliResult<SkrRow> {
        Ok(SkrRow {
            rate: link.rate,
            distance_km: link.distance_km,
            erase,
            fer_a: m.a,
            fer_b: m.b,
            va_opt: k.va_opt,
            snr: k.snr,
            fer: k.fer,
            beta: k.beta,
            k_opt: k.k_opt,
            zero_rate: k.zero_rate,
            g_k: if erase { g } else { None },
            realtime_skr_mbps: realtime(k)?,
        })
    };
    let rows = vec![
        row(true, &fit_with, &k_with)?,
        row(false, &fit_without, &k_without)?,
    ];
    with_output(a.out.as_deref(), |w| {
        write_csv(w, report::SKR_SCHEMA, &rows)
    })
    .map_err(data)?;
    if let Some(p) = &a.json {
        write_json(p, &rows).map_err(data)?;
    }
    Ok(())
}
