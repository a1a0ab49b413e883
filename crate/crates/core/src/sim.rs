//! Pauli-frame Monte Carlo sampling.
//!
//! Shots are processed in blocks of [`BLOCK_SHOTS`], 64 shots per `u64` word.
//! Each block draws from its own ChaCha8 stream (`seed`, stream = block index),
//! so results do not depend on how blocks are spread over threads. Noise
//! channels are sampled by geometric skipping: one draw per hit plus one per
//! channel and block.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{CircuitIR, OpKind, Pauli};
use crate::error::{Error, Result};

pub const BLOCK_WORDS: usize = 16;
pub const BLOCK_SHOTS: usize = 64 * BLOCK_WORDS;

#[derive(Debug, Clone, Copy)]
enum Gate {
    H(u32),
    Cx(u32, u32),
    M(u32, u32),
    Mr(u32, u32),
    R(u32),
    Noise(u32),
}

#[derive(Debug, Clone, Copy)]
enum ChannelKind {
    Depol1,
    Depol2,
    /// Cumulative thresholds for X and X+Y given a hit.
    Pauli { fx: f64, fxy: f64 },
    Flip,
}

#[derive(Debug, Clone, Copy)]
struct Channel {
    kind: ChannelKind,
    q: [u32; 2],
    p: f64,
    /// `ln(1 - p)`; `-inf` when every shot is hit.
    ln_miss: f64,
}

/// One outcome of a noise channel: a Pauli on one or two qubits with its
/// probability. Used to build error models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTerm {
    pub p: f64,
    /// `(qubit, x, z)` for each affected qubit.
    pub paulis: [(u32, bool, bool); 2],
    pub n: usize,
}

/// A circuit lowered to a flat gate list ready for sampling.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    pub n_qubits: usize,
    pub n_measurements: usize,
    gates: Vec<Gate>,
    channels: Vec<Channel>,
    pub detectors: Vec<Vec<u32>>,
    pub detector_basis: Vec<Pauli>,
    pub detector_round: Vec<u32>,
    pub observables: Vec<Vec<u32>>,
    pub observable_basis: Vec<Pauli>,
    pub observable_names: Vec<String>,
    pub n_rounds: u32,
    pub merge_round: Option<u32>,
}

/// Scratch frames for one block.
pub struct Scratch {
    w: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    rec: Vec<u64>,
    pub dets: Vec<u64>,
    pub obs: Vec<u64>,
}

impl Scratch {
    fn new(c: &CompiledCircuit, w: usize) -> Self {
        Self {
            w,
            x: vec![0; c.n_qubits * w],
            z: vec![0; c.n_qubits * w],
            rec: vec![0; c.n_measurements * w],
            dets: vec![0; c.detectors.len() * w],
            obs: vec![0; c.observables.len() * w],
        }
    }

    fn clear(&mut self) {
        self.x.fill(0);
        self.z.fill(0);
        self.rec.fill(0);
    }
}

/// Detector and observable words of one block, detector-major.
#[derive(Debug, Clone, Copy)]
pub struct BlockView<'a> {
    pub index: usize,
    pub first_shot: u64,
    pub n_shots: usize,
    pub words: usize,
    pub dets: &'a [u64],
    pub obs: &'a [u64],
}

impl BlockView<'_> {
    pub fn detector_word(&self, d: usize, w: usize) -> u64 {
        self.dets[d * self.words + w]
    }

    pub fn observable_bit(&self, o: usize, shot: usize) -> bool {
        self.obs[o * self.words + shot / 64] >> (shot % 64) & 1 == 1
    }

    /// Fired detectors of every shot, restricted to `keep` (indexed by
    /// detector). `out` is resized to the block's shot count.
    pub fn defects(&self, keep: Option<&[bool]>, out: &mut Vec<Vec<u32>>) {
        out.resize_with(self.n_shots, Vec::new);
        out.truncate(self.n_shots);
        for v in out.iter_mut() {
            v.clear();
        }
        let n_det = self.dets.len() / self.words.max(1);
        for d in 0..n_det {
            if keep.is_some_and(|k| !k[d]) {
                continue;
            }
            for w in 0..self.words {
                let mut word = self.dets[d * self.words + w];
                while word != 0 {
                    let b = word.trailing_zeros() as usize;
                    word &= word - 1;
                    out[w * 64 + b].push(d as u32);
                }
            }
        }
    }
}

/// A unit fault for noiseless propagation: Pauli `(x, z)` on `qubit`,
/// applied just before gate `position`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub position: usize,
    pub qubit: u32,
    pub x: bool,
    pub z: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signature {
    pub detectors: Vec<u32>,
    pub observables: u64,
}

fn ln_miss(p: f64) -> f64 {
    if p >= 1.0 {
        f64::NEG_INFINITY
    } else {
        (-p).ln_1p()
    }
}

pub fn compile(circuit: &CircuitIR) -> Result<CompiledCircuit> {
    if !circuit.annotated {
        return Err(Error::NotAnnotated);
    }
    compile_any(circuit)
}

/// Lowers a circuit without requiring noise annotations (for propagation of
/// injected faults).
pub fn compile_any(circuit: &CircuitIR) -> Result<CompiledCircuit> {
    circuit.validate()?;
    if circuit.observables.len() > 64 {
        return Err(Error::UnsupportedCircuit("more than 64 observables".into()));
    }
    let mut gates = Vec::with_capacity(circuit.ops.len());
    let mut channels = Vec::new();
    let one = |targets: &[u32]| -> Result<u32> {
        match targets {
            [q] => Ok(*q),
            _ => Err(Error::InvalidCircuit(format!("expected one target, got {targets:?}"))),
        }
    };
    let mut push_channel = |gates: &mut Vec<Gate>, kind: ChannelKind, q: [u32; 2], p: f64| {
        if p > 0.0 {
            gates.push(Gate::Noise(channels.len() as u32));
            channels.push(Channel {
                kind,
                q,
                p: p.min(1.0),
                ln_miss: ln_miss(p),
            });
        }
    };
    for op in &circuit.ops {
        match op.kind {
            OpKind::Reset => {
                for &q in &op.targets {
                    gates.push(Gate::R(q));
                }
            }
            OpKind::Hadamard => {
                for &q in &op.targets {
                    gates.push(Gate::H(q));
                }
            }
            OpKind::Cnot => match op.targets[..] {
                [c, t] => gates.push(Gate::Cx(c, t)),
                _ => return Err(Error::InvalidCircuit("CNOT needs two targets".into())),
            },
            OpKind::Measure { record } => gates.push(Gate::M(one(&op.targets)?, record)),
            OpKind::MeasureReset { record } => gates.push(Gate::Mr(one(&op.targets)?, record)),
            OpKind::Idle | OpKind::Tick { .. } => {}
            OpKind::Depol1 { p } => {
                for &q in &op.targets {
                    push_channel(&mut gates, ChannelKind::Depol1, [q, q], p);
                }
            }
            OpKind::Depol2 { p } => match op.targets[..] {
                [a, b] => push_channel(&mut gates, ChannelKind::Depol2, [a, b], p),
                _ => return Err(Error::InvalidCircuit("DEPOL2 needs two targets".into())),
            },
            OpKind::PauliChannel { px, py, pz } => {
                let total = px + py + pz;
                if total > 0.0 {
                    let kind = ChannelKind::Pauli {
                        fx: px / total,
                        fxy: (px + py) / total,
                    };
                    for &q in &op.targets {
                        push_channel(&mut gates, kind, [q, q], total);
                    }
                }
            }
            OpKind::Flip { p } => {
                for &q in &op.targets {
                    push_channel(&mut gates, ChannelKind::Flip, [q, q], p);
                }
            }
        }
    }
    Ok(CompiledCircuit {
        n_qubits: circuit.n_qubits as usize,
        n_measurements: circuit.n_measurements as usize,
        gates,
        channels,
        detectors: circuit.detectors.iter().map(|d| d.measurements.clone()).collect(),
        detector_basis: circuit.detectors.iter().map(|d| d.basis).collect(),
        detector_round: circuit.detectors.iter().map(|d| d.round).collect(),
        observables: circuit.observables.iter().map(|o| o.measurements.clone()).collect(),
        observable_basis: circuit.observables.iter().map(|o| o.basis).collect(),
        observable_names: circuit.observables.iter().map(|o| o.name.clone()).collect(),
        n_rounds: circuit.n_rounds,
        merge_round: circuit.merge_round,
    })
}

#[inline]
fn geometric(rng: &mut ChaCha8Rng, ln_miss: f64) -> usize {
    if ln_miss == f64::NEG_INFINITY {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let k = u.ln() / ln_miss;
    if k >= usize::MAX as f64 {
        usize::MAX
    } else {
        k as usize
    }
}

#[inline]
fn flip(v: &mut [u64], q: u32, w: usize, shot: usize) {
    v[q as usize * w + shot / 64] ^= 1 << (shot % 64);
}

/// Pauli index 0..4 (I, X, Y, Z) to frame bits.
#[inline]
fn pauli_bits(p: u32) -> (bool, bool) {
    (p == 1 || p == 2, p == 2 || p == 3)
}

impl CompiledCircuit {
    pub fn n_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn n_observables(&self) -> usize {
        self.observables.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Expands every noise channel into its Pauli outcomes, tagged with the
    /// gate position where it acts.
    pub fn channel_terms(&self) -> Vec<(usize, Vec<ChannelTerm>)> {
        let mut out = Vec::with_capacity(self.channels.len());
        for (pos, g) in self.gates.iter().enumerate() {
            let Gate::Noise(ci) = *g else { continue };
            let ch = self.channels[ci as usize];
            let [a, b] = ch.q;
            let single = |p: f64, x: bool, z: bool| ChannelTerm {
                p,
                paulis: [(a, x, z), (a, false, false)],
                n: 1,
            };
            let terms = match ch.kind {
                ChannelKind::Depol1 => (1..4)
                    .map(|k| {
                        let (x, z) = pauli_bits(k);
                        single(ch.p / 3.0, x, z)
                    })
                    .collect(),
                ChannelKind::Depol2 => (1..16)
                    .map(|k| {
                        let (x0, z0) = pauli_bits(k & 3);
                        let (x1, z1) = pauli_bits(k >> 2);
                        ChannelTerm {
                            p: ch.p / 15.0,
                            paulis: [(a, x0, z0), (b, x1, z1)],
                            n: 2,
                        }
                    })
                    .collect(),
                ChannelKind::Pauli { fx, fxy } => vec![
                    single(ch.p * fx, true, false),
                    single(ch.p * (fxy - fx), true, true),
                    single(ch.p * (1.0 - fxy), false, true),
                ],
                ChannelKind::Flip => vec![single(ch.p, true, false)],
            };
            out.push((pos, terms.into_iter().filter(|t| t.p > 0.0).collect()));
        }
        out
    }

    fn run_gates(&self, s: &mut Scratch, mut noise: impl FnMut(&Channel, &mut Scratch)) {
        for g in &self.gates {
            match *g {
                Gate::Noise(ci) => noise(&self.channels[ci as usize], s),
                g => self.run_single(s, g),
            }
        }
    }

    fn collect_parities(&self, s: &mut Scratch) {
        let w = s.w;
        for (d, ms) in self.detectors.iter().enumerate() {
            let out = &mut s.dets[d * w..(d + 1) * w];
            out.fill(0);
            for &m in ms {
                let m = m as usize * w;
                for (o, r) in out.iter_mut().zip(&s.rec[m..m + w]) {
                    *o ^= r;
                }
            }
        }
        for (o, ms) in self.observables.iter().enumerate() {
            let out = &mut s.obs[o * w..(o + 1) * w];
            out.fill(0);
            for &m in ms {
                let m = m as usize * w;
                for (o, r) in out.iter_mut().zip(&s.rec[m..m + w]) {
                    *o ^= r;
                }
            }
        }
    }

    fn sample_block(&self, seed: u64, block: usize, n_valid: usize, s: &mut Scratch) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        s.clear();
        let w = s.w;
        let n = w * 64;
        self.run_gates(s, |ch, s| {
            let mut shot = geometric(&mut rng, ch.ln_miss);
            while shot < n {
                match ch.kind {
                    ChannelKind::Flip => flip(&mut s.x, ch.q[0], w, shot),
                    ChannelKind::Depol1 => {
                        let (x, z) = pauli_bits(rng.random_range(1..4));
                        if x {
                            flip(&mut s.x, ch.q[0], w, shot);
                        }
                        if z {
                            flip(&mut s.z, ch.q[0], w, shot);
                        }
                    }
                    ChannelKind::Depol2 => {
                        let k: u32 = rng.random_range(1..16);
                        for (q, p) in [(ch.q[0], k & 3), (ch.q[1], k >> 2)] {
                            let (x, z) = pauli_bits(p);
                            if x {
                                flip(&mut s.x, q, w, shot);
                            }
                            if z {
                                flip(&mut s.z, q, w, shot);
                            }
                        }
                    }
                    ChannelKind::Pauli { fx, fxy } => {
                        let u: f64 = rng.random();
                        if u < fxy {
                            flip(&mut s.x, ch.q[0], w, shot);
                        }
                        if u >= fx {
                            flip(&mut s.z, ch.q[0], w, shot);
                        }
                    }
                }
                shot = shot.saturating_add(1).saturating_add(geometric(&mut rng, ch.ln_miss));
            }
        });
        self.collect_parities(s);
        if n_valid < n {
            let mask_tail = |v: &mut [u64]| {
                for chunk in v.chunks_mut(w) {
                    for (i, word) in chunk.iter_mut().enumerate() {
                        let lo = i * 64;
                        if lo >= n_valid {
                            *word = 0;
                        } else if lo + 64 > n_valid {
                            *word &= (1u64 << (n_valid - lo)) - 1;
                        }
                    }
                }
            };
            mask_tail(&mut s.dets);
            mask_tail(&mut s.obs);
        }
    }

    /// Samples `n_shots` shots block by block and maps every block through
    /// `f`, in parallel. Results come back in block order.
    pub fn for_each_block<R, F>(&self, n_shots: u64, seed: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(BlockView<'_>) -> R + Sync + Send,
    {
        self.for_each_block_with(n_shots, seed, || (), |_, v| f(v))
    }

    /// Like [`for_each_block`](Self::for_each_block) with per-worker state
    /// created by `init` (decoder scratch and the like).
    pub fn for_each_block_with<S, R, I, F>(&self, n_shots: u64, seed: u64, init: I, f: F) -> Vec<R>
    where
        R: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, BlockView<'_>) -> R + Sync + Send,
    {
        let n_blocks = n_shots.div_ceil(BLOCK_SHOTS as u64) as usize;
        (0..n_blocks)
            .into_par_iter()
            .map_init(
                || (Scratch::new(self, BLOCK_WORDS), init()),
                |(s, state), b| {
                    let first = b as u64 * BLOCK_SHOTS as u64;
                    let n_valid = (n_shots - first).min(BLOCK_SHOTS as u64) as usize;
                    self.sample_block(seed, b, n_valid, s);
                    f(
                        state,
                        BlockView {
                            index: b,
                            first_shot: first,
                            n_shots: n_valid,
                            words: BLOCK_WORDS,
                            dets: &s.dets,
                            obs: &s.obs,
                        },
                    )
                },
            )
            .collect()
    }

    /// Propagates each unit fault through the noiseless circuit and returns
    /// the detectors and observables it flips.
    pub fn propagate_faults(&self, faults: &[Fault]) -> Vec<Signature> {
        const LANE_WORDS: usize = 64;
        let lanes = LANE_WORDS * 64;
        let mut out = Vec::with_capacity(faults.len());
        let mut s = Scratch::new(self, LANE_WORDS);
        for chunk in faults.chunks(lanes) {
            let mut order: Vec<usize> = (0..chunk.len()).collect();
            order.sort_by_key(|&i| chunk[i].position);
            s.clear();
            let w = LANE_WORDS;
            let start = chunk.iter().map(|f| f.position).min().unwrap_or(0);
            let mut next = 0;
            let inject = |s: &mut Scratch, pos: usize, next: &mut usize| {
                while *next < order.len() && chunk[order[*next]].position <= pos {
                    let lane = order[*next];
                    let f = chunk[lane];
                    if f.x {
                        flip(&mut s.x, f.qubit, w, lane);
                    }
                    if f.z {
                        flip(&mut s.z, f.qubit, w, lane);
                    }
                    *next += 1;
                }
            };
            // inject before every gate by running gate-by-gate
            for (pos, g) in self.gates.iter().enumerate().skip(start) {
                inject(&mut s, pos, &mut next);
                if next == order.len() && matches!(g, Gate::Noise(_)) {
                    continue;
                }
                self.run_single(&mut s, *g);
            }
            inject(&mut s, usize::MAX, &mut next);
            self.collect_parities(&mut s);
            let mut sigs = vec![Signature::default(); chunk.len()];
            for d in 0..self.detectors.len() {
                for wi in 0..w {
                    let mut word = s.dets[d * w + wi];
                    while word != 0 {
                        let b = word.trailing_zeros() as usize;
                        word &= word - 1;
                        sigs[wi * 64 + b].detectors.push(d as u32);
                    }
                }
            }
            for o in 0..self.observables.len() {
                for (lane, sig) in sigs.iter_mut().enumerate() {
                    if s.obs[o * w + lane / 64] >> (lane % 64) & 1 == 1 {
                        sig.observables |= 1 << o;
                    }
                }
            }
            out.extend(sigs);
        }
        out
    }

    fn run_single(&self, s: &mut Scratch, g: Gate) {
        let w = s.w;
        match g {
            Gate::H(q) => {
                let r = q as usize * w..(q as usize + 1) * w;
                s.x[r.clone()].swap_with_slice(&mut s.z[r]);
            }
            Gate::Cx(c, t) => {
                let (c, t) = (c as usize * w, t as usize * w);
                for i in 0..w {
                    s.x[t + i] ^= s.x[c + i];
                    s.z[c + i] ^= s.z[t + i];
                }
            }
            Gate::M(q, r) => {
                let (q, r) = (q as usize * w, r as usize * w);
                s.rec[r..r + w].copy_from_slice(&s.x[q..q + w]);
            }
            Gate::Mr(q, r) => {
                let (q, r) = (q as usize * w, r as usize * w);
                s.rec[r..r + w].copy_from_slice(&s.x[q..q + w]);
                s.x[q..q + w].fill(0);
                s.z[q..q + w].fill(0);
            }
            Gate::R(q) => {
                let q = q as usize * w;
                s.x[q..q + w].fill(0);
                s.z[q..q + w].fill(0);
            }
            Gate::Noise(_) => {}
        }
    }

    /// Gate positions of the noise channels, in circuit order.
    pub fn noise_positions(&self) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g, Gate::Noise(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of gates; a fault at this position acts after the last gate.
    pub fn n_gates(&self) -> usize {
        self.gates.len()
    }
}

/// Bit-packed samples, detector-major: word `w` of detector `d` is
/// `detector_bits[d * words + w]`, shot `s` is bit `s % 64` of word `s / 64`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotBatch {
    pub n_shots: u64,
    pub n_detectors: usize,
    pub n_observables: usize,
    pub words: usize,
    pub detector_bits: Vec<u64>,
    pub observable_bits: Vec<u64>,
    pub seed: u64,
}

impl ShotBatch {
    pub fn detector(&self, d: usize, shot: u64) -> bool {
        self.detector_bits[d * self.words + (shot / 64) as usize] >> (shot % 64) & 1 == 1
    }

    pub fn observable(&self, o: usize, shot: u64) -> bool {
        self.observable_bits[o * self.words + (shot / 64) as usize] >> (shot % 64) & 1 == 1
    }

    pub fn detector_count(&self, d: usize) -> u64 {
        self.detector_bits[d * self.words..(d + 1) * self.words]
            .iter()
            .map(|w| u64::from(w.count_ones()))
            .sum()
    }

    /// Raw dump: detector matrix then observable matrix, each word written
    /// little-endian in the in-memory (detector-major) order.
    pub fn write_raw(&self, mut out: impl Write) -> Result<()> {
        for w in self.detector_bits.iter().chain(&self.observable_bits) {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    /// CSV `detector,basis,round,fired,rate`.
    pub fn write_detector_summary(&self, circuit: &CircuitIR, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["detector", "basis", "round", "fired", "rate"])?;
        for (d, det) in circuit.detectors.iter().enumerate() {
            let fired = self.detector_count(d);
            wtr.write_record([
                d.to_string(),
                format!("{:?}", det.basis),
                det.round.to_string(),
                fired.to_string(),
                format!("{}", fired as f64 / self.n_shots.max(1) as f64),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Samples an annotated circuit into one in-memory batch.
pub fn sample(circuit: &CircuitIR, n_shots: u64, seed: u64) -> Result<ShotBatch> {
    let c = compile(circuit)?;
    let words = n_shots.div_ceil(64) as usize;
    let nd = c.n_detectors();
    let no = c.n_observables();
    let blocks = c.for_each_block(n_shots, seed, |v| (v.dets.to_vec(), v.obs.to_vec()));
    let mut batch = ShotBatch {
        n_shots,
        n_detectors: nd,
        n_observables: no,
        words,
        detector_bits: vec![0; nd * words],
        observable_bits: vec![0; no * words],
        seed,
    };
    for (b, (dets, obs)) in blocks.into_iter().enumerate() {
        let base = b * BLOCK_WORDS;
        let take = BLOCK_WORDS.min(words - base);
        for d in 0..nd {
            batch.detector_bits[d * words + base..d * words + base + take]
                .copy_from_slice(&dets[d * BLOCK_WORDS..d * BLOCK_WORDS + take]);
        }
        for o in 0..no {
            batch.observable_bits[o * words + base..o * words + base + take]
                .copy_from_slice(&obs[o * BLOCK_WORDS..o * BLOCK_WORDS + take]);
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingProfile {
    pub per_round_mean_weight: Vec<f64>,
    pub round_of_surgery: Option<u32>,
}

impl HammingProfile {
    pub fn merge_weight(&self) -> Option<f64> {
        self.round_of_surgery
            .and_then(|r| self.per_round_mean_weight.get(r as usize).copied())
    }
}

/// Running per-round fired-detector totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HammingCounter {
    pub fired: Vec<u64>,
    pub shots: u64,
}

impl HammingCounter {
    pub fn new(n_rounds: u32) -> Self {
        Self {
            fired: vec![0; n_rounds as usize],
            shots: 0,
        }
    }

    pub fn add_block(&mut self, c: &CompiledCircuit, v: &BlockView<'_>) {
        for (d, &r) in c.detector_round.iter().enumerate() {
            let n: u32 = v.dets[d * v.words..(d + 1) * v.words]
                .iter()
                .map(|w| w.count_ones())
                .sum();
            self.fired[r as usize] += u64::from(n);
        }
        self.shots += v.n_shots as u64;
    }

    pub fn merge(&mut self, other: &HammingCounter) {
        for (a, b) in self.fired.iter_mut().zip(&other.fired) {
            *a += b;
        }
        self.shots += other.shots;
    }

    pub fn profile(&self, merge_round: Option<u32>) -> HammingProfile {
        let n = self.shots.max(1) as f64;
        HammingProfile {
            per_round_mean_weight: self.fired.iter().map(|&f| f as f64 / n).collect(),
            round_of_surgery: merge_round,
        }
    }
}

pub fn hamming_stats(batch: &ShotBatch, circuit: &CircuitIR) -> Result<HammingProfile> {
    if batch.n_detectors != circuit.detectors.len() {
        return Err(Error::InvalidRequest(format!(
            "batch has {} detectors, circuit {}",
            batch.n_detectors,
            circuit.detectors.len()
        )));
    }
    let mut fired = vec![0u64; circuit.n_rounds as usize];
    for (d, det) in circuit.detectors.iter().enumerate() {
        fired[det.round as usize] += batch.detector_count(d);
    }
    let counter = HammingCounter {
        fired,
        shots: batch.n_shots,
    };
    Ok(counter.profile(circuit.merge_round))
}
