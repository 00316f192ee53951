//! Cycle-level simulation of one decoding iteration through the datapath.
//!
//! Each cycle reads one two-word window per schedule entry. When the last
//! block of a (layer, sub-block) group has been read, the group's check
//! updates are computed and one write-back per block becomes ready
//! `latency + block` cycles later; write-backs commit one per cycle in
//! order, and a read observes every write committed before its cycle.
//!
//! Every stored lane carries a version count so that the model can detect
//! both stale reads and writes that replace a newer value with an older one.

use std::collections::VecDeque;

use crate::bits::BitVector;
use crate::decoder::{finish, Arithmetic, DecodeResult, DecoderState};
use crate::error::{Error, Result};
use crate::pipeline::layout::MemoryLayout;
use crate::pipeline::schedule::AddressSchedule;
use crate::pipeline::shift::{fold, shift_left, shift_right, write_back_halves, WriteBackInputs};
use crate::qc_code::QCCode;

pub const DEFAULT_LATENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Cycles from a group's last read to its first write-back.
    pub latency: usize,
    /// Delay reads that would see a word with a pending write from an
    /// earlier layer; otherwise such a read is reported as a hazard.
    pub stall: bool,
    /// Use the sub-block forwarding rule for write-back halves; when off
    /// every write restores both halves from its own read buffer.
    pub forwarding: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            latency: DEFAULT_LATENCY,
            stall: true,
            forwarding: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IterationStats {
    pub read_cycles: u64,
    pub stall_cycles: u64,
    /// Cycles until the last write-back committed.
    pub total_cycles: u64,
}

type Lane<M> = (M, u32);

struct PendingWrite<M> {
    commit: u64,
    layer: usize,
    words: Vec<(usize, Vec<Lane<M>>)>,
}

struct Datapath<'a, M> {
    layout: &'a MemoryLayout,
    p: usize,
    val: Vec<M>,
    ver: Vec<u32>,
    queue: VecDeque<PendingWrite<M>>,
    last_commit: Option<u64>,
}

impl<M: Copy> Datapath<'_, M> {
    fn hazard(&self, cycle: u64, kind: &str, word: usize) -> Error {
        let (bank, address) = self.layout.word(word);
        Error::Hazard {
            cycle,
            kind: kind.to_string(),
            bank: bank.to_string(),
            address,
        }
    }

    fn apply(&mut self, w: PendingWrite<M>) -> Result<()> {
        for (g, lanes) in &w.words {
            for (x, &(v, ver)) in lanes.iter().enumerate() {
                let i = g * self.p + x;
                if ver < self.ver[i] {
                    return Err(self.hazard(w.commit, "stale overwrite", *g));
                }
                self.val[i] = v;
                self.ver[i] = ver;
            }
        }
        Ok(())
    }

    fn commit_before(&mut self, cycle: u64) -> Result<()> {
        while self.queue.front().is_some_and(|w| w.commit < cycle) {
            let w = self.queue.pop_front().unwrap();
            self.apply(w)?;
        }
        Ok(())
    }

    fn drain(&mut self) -> Result<()> {
        while let Some(w) = self.queue.pop_front() {
            self.apply(w)?;
        }
        Ok(())
    }

    /// Latest pending commit from another layer touching any of `words`.
    fn blocking(&self, layer: usize, words: &[usize]) -> Option<(u64, usize)> {
        self.queue
            .iter()
            .filter(|w| w.layer != layer)
            .flat_map(|w| w.words.iter().map(move |(g, _)| (w.commit, *g)))
            .rfind(|(_, g)| words.contains(g))
    }

    fn read(&self, g: usize) -> Vec<Lane<M>> {
        (g * self.p..(g + 1) * self.p)
            .map(|i| (self.val[i], self.ver[i]))
            .collect()
    }

    fn enqueue(&mut self, ready: u64, layer: usize, words: Vec<(usize, Vec<Lane<M>>)>) {
        let commit = match self.last_commit {
            Some(last) => ready.max(last + 1),
            None => ready,
        };
        self.last_commit = Some(commit);
        self.queue.push_back(PendingWrite {
            commit,
            layer,
            words,
        });
    }

    /// Memory contents as they will be once every queued write lands.
    fn settled_view(&self) -> Vec<M> {
        let mut v = self.val.clone();
        for w in &self.queue {
            for (g, lanes) in &w.words {
                for (x, &(m, _)) in lanes.iter().enumerate() {
                    v[g * self.p + x] = m;
                }
            }
        }
        v
    }
}

/// Runs one iteration; equivalent to calling [`simulate_iteration_observed`]
/// without an observer.
pub fn simulate_iteration<A: Arithmetic>(
    arith: &A,
    code: &QCCode,
    layout: &MemoryLayout,
    schedule: &AddressSchedule,
    state: &mut DecoderState<A::Msg>,
    s: &BitVector,
    cfg: &PipelineConfig,
) -> Result<IterationStats> {
    simulate_iteration_observed(arith, code, layout, schedule, state, s, cfg, None)
}

/// Runs one iteration, calling `on_layer` with the settled variable messages
/// after each layer's updates have been issued.
#[allow(clippy::too_many_arguments)]
pub fn simulate_iteration_observed<A: Arithmetic>(
    arith: &A,
    code: &QCCode,
    layout: &MemoryLayout,
    schedule: &AddressSchedule,
    state: &mut DecoderState<A::Msg>,
    s: &BitVector,
    cfg: &PipelineConfig,
    mut on_layer: Option<&mut dyn FnMut(usize, &[A::Msg])>,
) -> Result<IterationStats> {
    let n = code.n();
    if state.lq.len() != n || layout.n() != n {
        return Err(Error::Length {
            expected: n,
            actual: state.lq.len().min(layout.n()),
        });
    }
    if state.lr.len() != code.edge_count() {
        return Err(Error::Length {
            expected: code.edge_count(),
            actual: state.lr.len(),
        });
    }
    if s.len() != code.m() {
        return Err(Error::Length {
            expected: code.m(),
            actual: s.len(),
        });
    }
    if schedule.p() != layout.p() || schedule.z() != code.z() {
        return Err(Error::Layout(
            "schedule does not match layout and code".into(),
        ));
    }
    let p = layout.p();
    let k = schedule.k();
    let z = code.z();
    let mut dp = Datapath {
        layout,
        p,
        val: state.lq.clone(),
        ver: vec![0; n],
        queue: VecDeque::new(),
        last_commit: None,
    };
    let mut logical = vec![0u32; n];
    let mut stats = IterationStats::default();
    let mut cycle: u64 = 0;

    let entries = schedule.entries();
    let groups = schedule.groups();
    // outputs of the first and the previous sub-block of the current layer, per block
    let mut first_out: Vec<Vec<Lane<A::Msg>>> = Vec::new();
    let mut prev_out: Vec<Vec<Lane<A::Msg>>> = Vec::new();
    let mut row_ext: Vec<A::Msg> = Vec::new();
    let mut row_out: Vec<A::Msg> = Vec::new();

    for (gi, range) in groups.iter().enumerate() {
        let group = &entries[range.clone()];
        let layer = group[0].layer;
        let c = group[0].c;
        let d = group.len();
        let mut ext = vec![vec![A::Msg::default(); p]; d];
        let mut buffered: Vec<(Vec<Lane<A::Msg>>, Vec<Lane<A::Msg>>)> = Vec::with_capacity(d);
        let mut read_versions = vec![vec![0u32; p]; d];
        let mut last_read = cycle;

        for (b, e) in group.iter().enumerate() {
            let words = [e.lead, e.trail];
            loop {
                dp.commit_before(cycle)?;
                match dp.blocking(layer, &words) {
                    None => break,
                    Some((commit, g)) => {
                        if !cfg.stall {
                            return Err(dp.hazard(cycle, "read-after-write", g));
                        }
                        let wait = commit + 1 - cycle;
                        stats.stall_cycles += wait;
                        cycle += wait;
                    }
                }
            }
            let mut window = dp.read(e.lead);
            window.extend(dp.read(e.trail));
            let out = shift_right(&window, e.shift)?;
            for x in 0..p {
                let var =
                    e.col * z + ((c - 1) * p + code.layer_blocks(layer)[e.block].shift + x) % z;
                let (m, ver) = out.lanes[x];
                if ver != logical[var] {
                    return Err(dp.hazard(cycle, "stale read", var / p));
                }
                let row = layer * z + (c - 1) * p + x;
                ext[b][x] = arith.vnu(m, state.lr[code.row_start(row) + e.block]);
                read_versions[b][x] = ver;
            }
            buffered.push((out.left_half, out.right_half));
            stats.read_cycles += 1;
            last_read = cycle;
            cycle += 1;
        }

        // check updates for the p rows of this sub-block
        let mut new_out: Vec<Vec<Lane<A::Msg>>> = vec![Vec::with_capacity(p); d];
        for x in 0..p {
            let row = layer * z + (c - 1) * p + x;
            let start = code.row_start(row);
            row_ext.clear();
            row_ext.extend((0..d).map(|b| ext[b][x]));
            row_out.clear();
            row_out.resize(d, A::Msg::default());
            arith.cnu(&row_ext, s.get(row), &mut row_out);
            for b in 0..d {
                state.lr[start + b] = row_out[b];
                let var = code.row(row)[b] as usize;
                logical[var] += 1;
                new_out[b].push((arith.total(row_ext[b], row_out[b]), read_versions[b][x] + 1));
            }
        }

        for (b, e) in group.iter().enumerate() {
            let words = if k == 1 {
                vec![(e.lead, fold(&new_out[b], e.shift))]
            } else {
                let (left, right) = write_back_halves(&WriteBackInputs {
                    c: if cfg.forwarding { c } else { 1 },
                    k,
                    shift: e.shift,
                    buffered_left: &buffered[b].0,
                    buffered_right: &buffered[b].1,
                    previous: prev_out.get(b).map(Vec::as_slice),
                    first: first_out.get(b).map(Vec::as_slice),
                })?;
                let (wa, wb) = shift_left(&left, &new_out[b], &right)?;
                vec![(e.lead, wa), (e.trail, wb)]
            };
            dp.enqueue(last_read + (cfg.latency + b) as u64, layer, words);
        }

        if c == 1 {
            first_out = new_out.clone();
        }
        prev_out = new_out;

        let layer_done = groups
            .get(gi + 1)
            .is_none_or(|r| entries[r.start].layer != layer);
        if layer_done {
            if let Some(f) = on_layer.as_deref_mut() {
                f(layer, &dp.settled_view());
            }
            first_out.clear();
            prev_out.clear();
        }
    }

    let end = dp
        .last_commit
        .map_or(cycle, |c| c.max(cycle.saturating_sub(1)) + 1);
    dp.drain()?;
    if let Some(v) = (0..n).find(|&v| dp.ver[v] != logical[v]) {
        return Err(dp.hazard(end, "lost update", v / p));
    }
    stats.total_cycles = end;
    state.lq = dp.val;
    state.iteration += 1;
    Ok(stats)
}

/// Decodes a frame with `t_max` simulated iterations and no early exit.
#[allow(clippy::too_many_arguments)]
pub fn simulate_decode<A: Arithmetic>(
    arith: &A,
    code: &QCCode,
    layout: &MemoryLayout,
    schedule: &AddressSchedule,
    llr: &[f64],
    s: &BitVector,
    t_max: usize,
    cfg: &PipelineConfig,
) -> Result<(DecodeResult, Vec<IterationStats>)> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    let mut state = DecoderState::new(arith, code, llr)?;
    let mut stats = Vec::with_capacity(t_max);
    for _ in 0..t_max {
        stats.push(simulate_iteration(
            arith, code, layout, schedule, &mut state, s, cfg,
        )?);
    }
    Ok((finish(arith, code, &state, s)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{decode_with, process_layer, FixedArithmetic, FloatArithmetic};
    use crate::pipeline::layout::build_layout;
    use crate::pipeline::schedule::build_schedule;
    use crate::qc_code::{expand, BaseMatrix};
    use crate::quantize::FixedFormat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> QCCode {
        expand(&BaseMatrix::from_rows(4, &[vec![1, 0, 2], vec![3, -1, 1]]).unwrap())
    }

    fn frame(code: &QCCode, seed: u64) -> (Vec<f64>, BitVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let llr: Vec<f64> = (0..code.n()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let bits: Vec<bool> = (0..code.m()).map(|_| rng.gen()).collect();
        (llr, BitVector::from_bools(&bits))
    }

    fn check_layers<A: Arithmetic>(
        arith: &A,
        code: &QCCode,
        p: usize,
        cfg: PipelineConfig,
        seed: u64,
    ) {
        let layout = build_layout(code.n(), p).unwrap();
        let sched = build_schedule(code, &layout).unwrap();
        let (llr, s) = frame(code, seed);
        let mut sim = DecoderState::new(arith, code, &llr).unwrap();
        let mut reference = DecoderState::new(arith, code, &llr).unwrap();
        for _ in 0..3 {
            let mut observe = |layer: usize, lq: &[A::Msg]| {
                process_layer(arith, code, &mut reference, layer, &s, None);
                assert_eq!(lq, &reference.lq[..], "layer {layer}");
            };
            simulate_iteration_observed(
                arith,
                code,
                &layout,
                &sched,
                &mut sim,
                &s,
                &cfg,
                Some(&mut observe),
            )
            .unwrap();
            assert_eq!(sim.lr, reference.lr);
        }
    }

    #[test]
    fn toy_matches_reference_after_every_layer() {
        let code = toy();
        for latency in [0, 1, 4, 9] {
            let cfg = PipelineConfig {
                latency,
                ..Default::default()
            };
            for seed in 0..5 {
                check_layers(&FloatArithmetic, &code, 2, cfg, seed);
                check_layers(
                    &FixedArithmetic::new(FixedFormat::w8()),
                    &code,
                    2,
                    cfg,
                    seed,
                );
            }
        }
    }

    #[test]
    fn random_codes_match_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let z = [4usize, 8, 12][trial % 3];
            let rows = rng.gen_range(2..5);
            let cols = 2 * rng.gen_range(2..4);
            let grid: Vec<Vec<i32>> = (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| {
                            if rng.gen_bool(0.6) {
                                rng.gen_range(0..z as i32)
                            } else {
                                -1
                            }
                        })
                        .collect()
                })
                .collect();
            let Ok(base) = BaseMatrix::from_rows(z, &grid) else {
                continue;
            };
            let code = expand(&base);
            if code.edge_count() == 0 {
                continue;
            }
            let order: Vec<usize> = (0..rows).rev().collect();
            let code = code.with_layer_order(order).unwrap();
            let cfg = PipelineConfig {
                latency: rng.gen_range(0..6),
                ..Default::default()
            };
            for p in [2, z / 2, z] {
                if build_schedule(&code, &build_layout(code.n(), p).unwrap()).is_ok() {
                    check_layers(
                        &FixedArithmetic::new(FixedFormat::w10()),
                        &code,
                        p,
                        cfg,
                        trial as u64,
                    );
                }
            }
        }
    }

    #[test]
    fn decode_is_bit_identical() {
        let code = toy();
        let layout = build_layout(code.n(), 2).unwrap();
        let sched = build_schedule(&code, &layout).unwrap();
        let arith = FixedArithmetic::new(FixedFormat::w8());
        for seed in 0..10 {
            let (llr, s) = frame(&code, seed);
            let (r, stats) = simulate_decode(
                &arith,
                &code,
                &layout,
                &sched,
                &llr,
                &s,
                6,
                &PipelineConfig::default(),
            )
            .unwrap();
            let reference = decode_with(&arith, &code, &llr, &s, 6, false, None).unwrap();
            assert_eq!(r, reference);
            assert_eq!(stats.len(), 6);
            assert_eq!(stats[0].read_cycles as usize, sched.len());
            assert!(stats[0].total_cycles >= stats[0].read_cycles + stats[0].stall_cycles);
        }
    }

    #[test]
    fn missing_forwarding_is_caught() {
        let code = toy();
        let layout = build_layout(code.n(), 2).unwrap();
        let sched = build_schedule(&code, &layout).unwrap();
        let (llr, s) = frame(&code, 1);
        let mut st = DecoderState::new(&FloatArithmetic, &code, &llr).unwrap();
        let cfg = PipelineConfig {
            forwarding: false,
            ..Default::default()
        };
        let err = simulate_iteration(&FloatArithmetic, &code, &layout, &sched, &mut st, &s, &cfg)
            .unwrap_err();
        assert!(
            matches!(&err, Error::Hazard { kind, .. } if kind == "stale overwrite"),
            "{err}"
        );
    }

    #[test]
    fn read_after_write_without_stall() {
        let code = toy();
        let layout = build_layout(code.n(), 2).unwrap();
        let sched = build_schedule(&code, &layout).unwrap();
        let (llr, s) = frame(&code, 2);
        let mut st = DecoderState::new(&FloatArithmetic, &code, &llr).unwrap();
        let cfg = PipelineConfig {
            stall: false,
            ..Default::default()
        };
        let err = simulate_iteration(&FloatArithmetic, &code, &layout, &sched, &mut st, &s, &cfg)
            .unwrap_err();
        match err {
            Error::Hazard { kind, cycle, .. } => {
                assert_eq!(kind, "read-after-write");
                assert!(cycle > 0);
            }
            other => panic!("unexpected {other}"),
        }
        // the stalling pipeline on the same frame is clean and reports its stalls
        let mut st = DecoderState::new(&FloatArithmetic, &code, &llr).unwrap();
        let stats = simulate_iteration(
            &FloatArithmetic,
            &code,
            &layout,
            &sched,
            &mut st,
            &s,
            &Default::default(),
        )
        .unwrap();
        assert!(stats.stall_cycles > 0);
    }

    #[test]
    fn disjoint_layers_never_stall() {
        let code =
            expand(&BaseMatrix::from_rows(4, &[vec![0, 1, -1, -1], vec![-1, -1, 2, 3]]).unwrap());
        let layout = build_layout(16, 2).unwrap();
        let sched = build_schedule(&code, &layout).unwrap();
        let (llr, s) = frame(&code, 3);
        let mut st = DecoderState::new(&FloatArithmetic, &code, &llr).unwrap();
        let cfg = PipelineConfig {
            stall: false,
            latency: 10,
            ..Default::default()
        };
        let stats = simulate_iteration(&FloatArithmetic, &code, &layout, &sched, &mut st, &s, &cfg)
            .unwrap();
        assert_eq!(stats.stall_cycles, 0);
    }
}
