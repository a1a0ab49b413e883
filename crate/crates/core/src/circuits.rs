//! Timed stabilizer circuits: repetition-code memory, rotated-surface-code
//! memory and two-patch lattice surgery, with synchronization idles woven in.
//!
//! # Geometry
//!
//! Data qubits sit on integer points `(x, y)`. A plaquette is identified by the
//! integer point `(cx, cy)` of its north-west corner and covers the data qubits
//! `(cx, cy)`, `(cx+1, cy)`, `(cx, cy+1)`, `(cx+1, cy+1)` that exist. Plaquettes
//! with `cx + cy` even are *primary*; the rest are *secondary*. Weight-2
//! primary plaquettes close the top and bottom edges, weight-2 secondary ones
//! the left and right edges. The primary logical runs down a column, the
//! secondary logical along a row.
//!
//! Two patches `P` (columns `0..d`) and `P2` (columns `d+1..2d+1`) are merged
//! through a seam column `x = d` into one `d x (2d+1)` patch. The seam joins the
//! secondary (left/right) boundaries, so the merge measures the product of the
//! two primary logicals. With primary plaquettes of X type this is the Z-basis
//! surgery measuring `X_P X_P2`; with Z type it is the X-basis surgery
//! measuring `Z_P Z_P2`.
//!
//! # CNOT order
//!
//! Primary plaquettes visit their corners NW, NE, SW, SE; secondary ones NW, SW,
//! NE, SE. Hook errors therefore run perpendicular to the logical of the same
//! type, and every pair of overlapping plaquettes commutes through the schedule.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{SyncPlan, INTRA_ROUND_GAPS};
use crate::timing::{LatencyProfile, Nanos};

pub type Qubit = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Z,
}

impl Pauli {
    pub fn other(self) -> Pauli {
        match self {
            Pauli::X => Pauli::Z,
            Pauli::Z => Pauli::X,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Pauli::X => "X",
            Pauli::Z => "Z",
        }
    }

    fn parse(s: &str) -> Result<Pauli> {
        match s {
            "X" => Ok(Pauli::X),
            "Z" => Ok(Pauli::Z),
            _ => Err(Error::InvalidCircuit(format!("unknown basis `{s}`"))),
        }
    }
}

/// Basis of a surgery experiment. `Z` measures `X_P X_P2`, `X` measures `Z_P Z_P2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    /// Pauli type of the joint logical measured by the merge.
    pub fn joint_pauli(self) -> Pauli {
        match self {
            Basis::Z => Pauli::X,
            Basis::X => Pauli::Z,
        }
    }

    /// Name of the joint-parity observable.
    pub fn joint_observable(self) -> &'static str {
        match self {
            Basis::Z => "XPXP2",
            Basis::X => "ZPZP2",
        }
    }

    pub fn single_observable(self) -> &'static str {
        match self {
            Basis::Z => "X_P",
            Basis::X => "Z_P",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            _ => Err(Error::InvalidRequest(format!("unknown basis `{s}`"))),
        }
    }
}

/// Which part of the circuit a tick marker belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// The leading patch (or the only patch of a memory experiment).
    Lead,
    /// The lagging patch of a surgery experiment.
    Lag,
    All,
}

impl Region {
    fn as_str(self) -> &'static str {
        match self {
            Region::Lead => "lead",
            Region::Lag => "lag",
            Region::All => "all",
        }
    }

    fn parse(s: &str) -> Result<Region> {
        match s {
            "lead" => Ok(Region::Lead),
            "lag" => Ok(Region::Lag),
            "all" => Ok(Region::All),
            _ => Err(Error::InvalidCircuit(format!("unknown region `{s}`"))),
        }
    }
}

/// Insertion points for synchronization idles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TickMark {
    /// Start of a round; `remaining` counts rounds left before the sync
    /// barrier including this one (1 = final round).
    RoundStart { remaining: u32 },
    /// Gap after gate layer `gap` of the final round.
    LayerGap { gap: u32 },
    /// Where a Passive plan pauses.
    SyncPoint,
    /// Merge barrier: every qubit is aligned here.
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OpKind {
    Reset,
    Hadamard,
    Cnot,
    Measure { record: u32 },
    /// Measurement followed by reset, timed as one op.
    MeasureReset { record: u32 },
    Idle,
    Tick { region: Region, mark: TickMark },
    Depol1 { p: f64 },
    Depol2 { p: f64 },
    PauliChannel { px: f64, py: f64, pz: f64 },
    /// Classical flip of a measurement (X error before it) or a reset.
    Flip { p: f64 },
}

impl OpKind {
    pub fn is_noise(&self) -> bool {
        matches!(
            self,
            OpKind::Depol1 { .. }
                | OpKind::Depol2 { .. }
                | OpKind::PauliChannel { .. }
                | OpKind::Flip { .. }
        )
    }

    pub fn is_tick(&self) -> bool {
        matches!(self, OpKind::Tick { .. })
    }

    /// Ops that occupy their qubits for their duration.
    pub fn is_timed(&self) -> bool {
        !self.is_noise() && !self.is_tick()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Op {
    pub kind: OpKind,
    /// For CNOT: `[control, target]`.
    pub targets: Vec<Qubit>,
    pub start: Nanos,
    pub duration: Nanos,
}

impl Op {
    pub fn end(&self) -> Nanos {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detector {
    pub measurements: Vec<u32>,
    /// Type of the stabilizer the detector watches.
    pub basis: Pauli,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub measurements: Vec<u32>,
    /// Type of the logical operator; flipped by faults that fire detectors of
    /// the same basis.
    pub basis: Pauli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitRole {
    Data,
    Measure(Pauli),
}

/// A timed stabilizer circuit with detectors and logical observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitIR {
    pub n_qubits: u32,
    pub roles: Vec<QubitRole>,
    pub ops: Vec<Op>,
    pub n_measurements: u32,
    pub detectors: Vec<Detector>,
    pub observables: Vec<Observable>,
    /// Round slots used by detectors; the last slot is the final data readout.
    pub n_rounds: u32,
    /// Round index of the first merged round of a surgery circuit.
    pub merge_round: Option<u32>,
    pub annotated: bool,
}

impl CircuitIR {
    pub fn duration(&self) -> Nanos {
        self.ops
            .iter()
            .filter(|o| o.kind.is_timed())
            .map(Op::end)
            .max()
            .unwrap_or(0)
    }

    pub fn observable_index(&self, name: &str) -> Option<usize> {
        self.observables.iter().position(|o| o.name == name)
    }

    pub fn count_qubits(&self, pred: impl Fn(QubitRole) -> bool) -> usize {
        self.roles.iter().filter(|&&r| pred(r)).count()
    }

    /// Checks the structural invariants: per-qubit timestamps never overlap or
    /// go backwards, record indices are unique and every detector/observable
    /// references an existing measurement.
    pub fn validate(&self) -> Result<()> {
        let mut busy = vec![0 as Nanos; self.n_qubits as usize];
        let mut seen = vec![false; self.n_measurements as usize];
        for (i, op) in self.ops.iter().enumerate() {
            for &q in &op.targets {
                if q >= self.n_qubits {
                    return Err(Error::InvalidCircuit(format!("op {i} targets qubit {q}")));
                }
                let b = &mut busy[q as usize];
                if op.start < *b {
                    return Err(Error::InvalidCircuit(format!(
                        "op {i} ({:?}) on qubit {q} starts at {} before the qubit is free at {}",
                        op.kind, op.start, *b
                    )));
                }
                if op.kind.is_timed() {
                    *b = op.end();
                }
            }
            if let OpKind::Measure { record } | OpKind::MeasureReset { record } = op.kind {
                let slot = seen.get_mut(record as usize).ok_or_else(|| {
                    Error::InvalidCircuit(format!("record {record} out of range"))
                })?;
                if *slot {
                    return Err(Error::InvalidCircuit(format!("record {record} written twice")));
                }
                *slot = true;
            }
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidCircuit(format!("record {m} never written")));
        }
        let refs = self
            .detectors
            .iter()
            .flat_map(|d| &d.measurements)
            .chain(self.observables.iter().flat_map(|o| &o.measurements));
        for &m in refs {
            if m >= self.n_measurements {
                return Err(Error::InvalidCircuit(format!("reference to missing record {m}")));
            }
        }
        Ok(())
    }

    fn sort_ops(&mut self) {
        self.ops.sort_by_key(|o| o.start);
    }
}

/// Rotated-surface-code patch layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGeometry {
    pub distance: u32,
    pub data: Vec<(i32, i32)>,
    pub plaquettes: Vec<Plaquette>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaquette {
    /// North-west corner.
    pub corner: (i32, i32),
    pub primary: bool,
    pub pauli: Pauli,
    /// Data coordinates in CNOT-layer order; `None` where the corner is missing.
    pub order: [Option<(i32, i32)>; 4],
}

impl Plaquette {
    pub fn weight(&self) -> usize {
        self.order.iter().flatten().count()
    }

    pub fn support(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        self.order.iter().flatten().copied()
    }
}

/// Plaquettes of a `width x height` rotated patch whose left column is `x0`.
/// `primary` is the Pauli type of primary plaquettes.
fn layout(x0: i32, width: i32, height: i32, primary: Pauli) -> PatchGeometry {
    let mut data = Vec::new();
    for y in 0..height {
        for x in x0..x0 + width {
            data.push((x, y));
        }
    }
    let inside = |(x, y): (i32, i32)| x >= x0 && x < x0 + width && y >= 0 && y < height;
    let mut plaquettes = Vec::new();
    for cy in -1..height {
        for cx in x0 - 1..x0 + width {
            let is_primary = (cx + cy).rem_euclid(2) == 0;
            let bulk_x = cx >= x0 && cx < x0 + width - 1;
            let bulk_y = cy >= 0 && cy < height - 1;
            let keep = (bulk_x && bulk_y)
                || (bulk_x && (cy == -1 || cy == height - 1) && is_primary)
                || (bulk_y && (cx == x0 - 1 || cx == x0 + width - 1) && !is_primary);
            if !keep {
                continue;
            }
            let nw = (cx, cy);
            let ne = (cx + 1, cy);
            let sw = (cx, cy + 1);
            let se = (cx + 1, cy + 1);
            let corners = if is_primary {
                [nw, ne, sw, se]
            } else {
                [nw, sw, ne, se]
            };
            let order = corners.map(|c| inside(c).then_some(c));
            plaquettes.push(Plaquette {
                corner: nw,
                primary: is_primary,
                pauli: if is_primary { primary } else { primary.other() },
                order,
            });
        }
    }
    PatchGeometry {
        distance: height as u32,
        data,
        plaquettes,
    }
}

impl PatchGeometry {
    /// A single `d x d` patch with X-type primary plaquettes.
    pub fn rotated(d: u32) -> Result<Self> {
        check_distance(d)?;
        Ok(layout(0, d as i32, d as i32, Pauli::X))
    }

    pub fn n_measure(&self) -> usize {
        self.plaquettes.len()
    }
}

fn check_distance(d: u32) -> Result<()> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(Error::InvalidRequest(format!(
            "distance must be odd and >= 3, got {d}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// builder

struct Builder {
    ops: Vec<Op>,
    roles: Vec<QubitRole>,
    data_ids: HashMap<(i32, i32), Qubit>,
    anc_ids: HashMap<(i32, i32), Qubit>,
    n_meas: u32,
    detectors: Vec<Detector>,
}

impl Builder {
    fn new() -> Self {
        Self {
            ops: Vec::new(),
            roles: Vec::new(),
            data_ids: HashMap::new(),
            anc_ids: HashMap::new(),
            n_meas: 0,
            detectors: Vec::new(),
        }
    }

    fn data(&mut self, c: (i32, i32)) -> Qubit {
        if let Some(&q) = self.data_ids.get(&c) {
            return q;
        }
        let q = self.roles.len() as Qubit;
        self.roles.push(QubitRole::Data);
        self.data_ids.insert(c, q);
        q
    }

    fn ancilla(&mut self, corner: (i32, i32), pauli: Pauli) -> Qubit {
        if let Some(&q) = self.anc_ids.get(&corner) {
            return q;
        }
        let q = self.roles.len() as Qubit;
        self.roles.push(QubitRole::Measure(pauli));
        self.anc_ids.insert(corner, q);
        q
    }

    fn op(&mut self, kind: OpKind, targets: Vec<Qubit>, start: Nanos, duration: Nanos) {
        self.ops.push(Op {
            kind,
            targets,
            start,
            duration,
        });
    }

    fn idle(&mut self, q: Qubit, start: Nanos, duration: Nanos) {
        if duration > 0 {
            self.op(OpKind::Idle, vec![q], start, duration);
        }
    }

    fn tick(&mut self, region: Region, mark: TickMark, targets: Vec<Qubit>, at: Nanos) {
        self.op(OpKind::Tick { region, mark }, targets, at, 0);
    }

    fn next_record(&mut self) -> u32 {
        self.n_meas += 1;
        self.n_meas - 1
    }

    fn finish(
        mut self,
        observables: Vec<Observable>,
        n_rounds: u32,
        merge_round: Option<u32>,
    ) -> CircuitIR {
        let mut c = CircuitIR {
            n_qubits: self.roles.len() as u32,
            roles: std::mem::take(&mut self.roles),
            ops: self.ops,
            n_measurements: self.n_meas,
            detectors: self.detectors,
            observables,
            n_rounds,
            merge_round,
            annotated: false,
        };
        c.sort_ops();
        c
    }
}

/// A compiled plaquette inside a builder.
#[derive(Clone)]
struct Stab {
    ancilla: Qubit,
    pauli: Pauli,
    order: [Option<Qubit>; 4],
}

impl Stab {
    fn support(&self) -> Vec<Qubit> {
        let mut s: Vec<_> = self.order.iter().flatten().copied().collect();
        s.sort_unstable();
        s
    }
}

/// Per-stabilizer measurement history.
#[derive(Clone, Default)]
struct History {
    last: Option<u32>,
    support: Vec<Qubit>,
}

/// Round-level state shared by the surface generators.
struct SurfaceRounds<'a> {
    profile: &'a LatencyProfile,
    /// Qubits freshly reset and prepared in a Pauli eigenbasis that no
    /// stabilizer has touched yet.
    fresh: HashMap<Qubit, Pauli>,
    history: HashMap<Qubit, History>,
}

struct RoundSpec<'a> {
    stabs: &'a [Stab],
    data: &'a [Qubit],
    start: Nanos,
    round: u32,
    region: Region,
    remaining: u32,
    layer_gaps: bool,
    /// Data qubits that get a Hadamard in the first layer (|+> preparation).
    prep_h: &'a [Qubit],
}

impl<'a> SurfaceRounds<'a> {
    fn new(profile: &'a LatencyProfile) -> Self {
        Self {
            profile,
            fresh: HashMap::new(),
            history: HashMap::new(),
        }
    }

    fn cycle(&self) -> Nanos {
        self.profile.surface_cycle_time()
    }

    /// Emits one syndrome round and its detectors.
    fn round(&mut self, b: &mut Builder, spec: RoundSpec<'_>) {
        let p = self.profile;
        let mut region_qubits: Vec<Qubit> = spec.data.to_vec();
        region_qubits.extend(spec.stabs.iter().map(|s| s.ancilla));
        b.tick(
            spec.region,
            TickMark::RoundStart {
                remaining: spec.remaining,
            },
            region_qubits.clone(),
            spec.start,
        );
        let mut t = spec.start;
        let all: Vec<Qubit> = region_qubits.clone();

        // layer 0: Hadamard on X-type ancillas (and |+> preparation)
        let mut used: Vec<Qubit> = spec
            .stabs
            .iter()
            .filter(|s| s.pauli == Pauli::X)
            .map(|s| s.ancilla)
            .chain(spec.prep_h.iter().copied())
            .collect();
        for &q in &used {
            b.op(OpKind::Hadamard, vec![q], t, p.t_1q);
        }
        used.sort_unstable();
        for &q in &all {
            if used.binary_search(&q).is_err() {
                b.idle(q, t, p.t_1q);
            }
        }
        t += p.t_1q;
        if spec.layer_gaps {
            b.tick(spec.region, TickMark::LayerGap { gap: 0 }, all.clone(), t);
        }

        // layers 1-4: CNOTs
        for layer in 0..4 {
            let mut used = Vec::new();
            for s in spec.stabs {
                if let Some(dq) = s.order[layer] {
                    let (c, tq) = match s.pauli {
                        Pauli::X => (s.ancilla, dq),
                        Pauli::Z => (dq, s.ancilla),
                    };
                    b.op(OpKind::Cnot, vec![c, tq], t, p.t_2q);
                    used.push(c);
                    used.push(tq);
                }
            }
            used.sort_unstable();
            for &q in &all {
                if used.binary_search(&q).is_err() {
                    b.idle(q, t, p.t_2q);
                }
            }
            t += p.t_2q;
            if spec.layer_gaps {
                b.tick(
                    spec.region,
                    TickMark::LayerGap {
                        gap: layer as u32 + 1,
                    },
                    all.clone(),
                    t,
                );
            }
        }

        // layer 5: Hadamard on X-type ancillas
        let mut used: Vec<Qubit> = spec
            .stabs
            .iter()
            .filter(|s| s.pauli == Pauli::X)
            .map(|s| s.ancilla)
            .collect();
        for &q in &used {
            b.op(OpKind::Hadamard, vec![q], t, p.t_1q);
        }
        used.sort_unstable();
        for &q in &all {
            if used.binary_search(&q).is_err() {
                b.idle(q, t, p.t_1q);
            }
        }
        t += p.t_1q;

        // layer 6: measure + reset ancillas, data wait
        let mr = p.t_meas + p.t_reset;
        for s in spec.stabs {
            let record = b.next_record();
            b.op(OpKind::MeasureReset { record }, vec![s.ancilla], t, mr);
            let support = s.support();
            let hist = self.history.entry(s.ancilla).or_default();
            let deterministic = match hist.last {
                None => support
                    .iter()
                    .all(|q| self.fresh.get(q) == Some(&s.pauli)),
                Some(_) => support
                    .iter()
                    .filter(|q| hist.support.binary_search(q).is_err())
                    .all(|q| self.fresh.get(q) == Some(&s.pauli)),
            };
            if deterministic {
                let mut measurements = vec![record];
                measurements.extend(hist.last);
                measurements.sort_unstable();
                b.detectors.push(Detector {
                    measurements,
                    basis: s.pauli,
                    round: spec.round,
                });
            }
            hist.last = Some(record);
            hist.support = support;
        }
        for &q in spec.data {
            b.idle(q, t, mr);
        }
        for s in spec.stabs {
            for q in s.support() {
                self.fresh.remove(&q);
            }
        }
    }

    /// Final transversal data readout in `basis`, closing stabilizers of that
    /// type. Returns the record of each data qubit.
    fn readout(
        &mut self,
        b: &mut Builder,
        stabs: &[Stab],
        data: &[Qubit],
        basis: Pauli,
        start: Nanos,
        round: u32,
    ) -> HashMap<Qubit, u32> {
        let p = self.profile;
        let mut t = start;
        if basis == Pauli::X {
            for &q in data {
                b.op(OpKind::Hadamard, vec![q], t, p.t_1q);
            }
            t += p.t_1q;
        }
        let mut records = HashMap::new();
        for &q in data {
            let record = b.next_record();
            b.op(OpKind::Measure { record }, vec![q], t, p.t_meas);
            records.insert(q, record);
        }
        for s in stabs.iter().filter(|s| s.pauli == basis) {
            let hist = &self.history[&s.ancilla];
            let mut measurements: Vec<u32> =
                s.support().iter().map(|q| records[q]).collect();
            measurements.extend(hist.last);
            measurements.sort_unstable();
            b.detectors.push(Detector {
                measurements,
                basis,
                round,
            });
        }
        records
    }
}

fn compile_stabs(b: &mut Builder, geom: &PatchGeometry) -> Vec<Stab> {
    geom.plaquettes
        .iter()
        .map(|pl| {
            let ancilla = b.ancilla(pl.corner, pl.pauli);
            let order = pl.order.map(|c| c.map(|c| b.data(c)));
            Stab {
                ancilla,
                pauli: pl.pauli,
                order,
            }
        })
        .collect()
}

fn logical_records(
    geom_coords: impl Iterator<Item = (i32, i32)>,
    b: &Builder,
    records: &HashMap<Qubit, u32>,
) -> Vec<u32> {
    let mut v: Vec<u32> = geom_coords.map(|c| records[&b.data_ids[&c]]).collect();
    v.sort_unstable();
    v
}

/// Rotated-surface-code memory in the Z basis.
///
/// Extra rounds requested by the plan are added to `rounds`; its idles are
/// materialized by [`apply_plan_timing`].
pub fn gen_surface_memory(
    d: u32,
    rounds: u32,
    plan: &SyncPlan,
    profile: &LatencyProfile,
) -> Result<CircuitIR> {
    let base = surface_memory_base(d, rounds + plan.extra_rounds as u32, profile)?;
    apply_plan_timing(&base, plan)
}

fn surface_memory_base(d: u32, rounds: u32, profile: &LatencyProfile) -> Result<CircuitIR> {
    check_distance(d)?;
    if rounds == 0 {
        return Err(Error::InvalidRequest("memory needs at least one round".into()));
    }
    profile.validate()?;
    let geom = PatchGeometry::rotated(d)?;
    let mut b = Builder::new();
    let data: Vec<Qubit> = geom.data.iter().map(|&c| b.data(c)).collect();
    let stabs = compile_stabs(&mut b, &geom);
    let all: Vec<Qubit> = (0..b.roles.len() as Qubit).collect();
    for &q in &all {
        b.op(OpKind::Reset, vec![q], 0, profile.t_reset);
    }
    let mut sr = SurfaceRounds::new(profile);
    for &q in &data {
        sr.fresh.insert(q, Pauli::Z);
    }
    let mut t = profile.t_reset;
    for r in 0..rounds {
        let remaining = rounds - r;
        if remaining == 1 {
            b.tick(Region::Lead, TickMark::SyncPoint, all.clone(), t);
        }
        sr.round(
            &mut b,
            RoundSpec {
                stabs: &stabs,
                data: &data,
                start: t,
                round: r,
                region: Region::Lead,
                remaining,
                layer_gaps: remaining == 1,
                prep_h: &[],
            },
        );
        t += sr.cycle();
    }
    let records = sr.readout(&mut b, &stabs, &data, Pauli::Z, t, rounds);
    // secondary (Z) logical: a row
    let obs = logical_records((0..d as i32).map(|x| (x, 0)), &b, &records);
    let observables = vec![Observable {
        name: "Z_L".into(),
        measurements: obs,
        basis: Pauli::Z,
    }];
    let c = b.finish(observables, rounds + 1, None);
    debug_assert!(c.validate().is_ok());
    Ok(c)
}

/// Bit-flip repetition code on `d` data and `d - 1` ancilla qubits, with an idle
/// of `idle_before_final` on every data qubit before the final round.
pub fn gen_repetition(
    d: u32,
    rounds: u32,
    idle_before_final: Nanos,
    profile: &LatencyProfile,
) -> Result<CircuitIR> {
    check_distance(d)?;
    if rounds == 0 {
        return Err(Error::InvalidRequest("repetition code needs at least one round".into()));
    }
    profile.validate()?;
    let mut b = Builder::new();
    let data: Vec<Qubit> = (0..d as i32).map(|x| b.data((2 * x, 0))).collect();
    let anc: Vec<Qubit> = (0..d as i32 - 1)
        .map(|x| b.ancilla((2 * x + 1, 0), Pauli::Z))
        .collect();
    for q in 0..b.roles.len() as Qubit {
        b.op(OpKind::Reset, vec![q], 0, profile.t_reset);
    }
    let mr = profile.t_meas + profile.t_reset;
    let mut t = profile.t_reset;
    let mut last: Vec<Option<u32>> = vec![None; anc.len()];
    for r in 0..rounds {
        let all: Vec<Qubit> = data.iter().chain(&anc).copied().collect();
        b.tick(
            Region::Lead,
            TickMark::RoundStart {
                remaining: rounds - r,
            },
            all,
            t,
        );
        if r == rounds - 1 {
            for &q in &data {
                b.idle(q, t, idle_before_final);
            }
            t += idle_before_final;
        }
        for layer in 0..2 {
            let mut touched = vec![false; data.len()];
            for (i, &a) in anc.iter().enumerate() {
                let dq = i + layer;
                b.op(OpKind::Cnot, vec![data[dq], a], t, profile.t_2q);
                touched[dq] = true;
            }
            for (i, &q) in data.iter().enumerate() {
                if !touched[i] {
                    b.idle(q, t, profile.t_2q);
                }
            }
            t += profile.t_2q;
        }
        for (i, &a) in anc.iter().enumerate() {
            let record = b.next_record();
            b.op(OpKind::MeasureReset { record }, vec![a], t, mr);
            let mut measurements = vec![record];
            measurements.extend(last[i]);
            measurements.sort_unstable();
            b.detectors.push(Detector {
                measurements,
                basis: Pauli::Z,
                round: r,
            });
            last[i] = Some(record);
        }
        for &q in &data {
            b.idle(q, t, mr);
        }
        t += mr;
    }
    let mut data_rec = Vec::new();
    for &q in &data {
        let record = b.next_record();
        b.op(OpKind::Measure { record }, vec![q], t, profile.t_meas);
        data_rec.push(record);
    }
    for i in 0..anc.len() {
        let mut measurements = vec![data_rec[i], data_rec[i + 1]];
        measurements.extend(last[i]);
        measurements.sort_unstable();
        b.detectors.push(Detector {
            measurements,
            basis: Pauli::Z,
            round: rounds,
        });
    }
    let observables = vec![Observable {
        name: "Z_L".into(),
        measurements: vec![data_rec[0]],
        basis: Pauli::Z,
    }];
    Ok(b.finish(observables, rounds + 1, None))
}

/// Parameters of a two-patch surgery experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryExperiment {
    pub distance: u32,
    pub basis: Basis,
    /// Rounds of both patches before the merge (default `d + 1`).
    pub rounds_before: u32,
    /// Rounds of the merged patch (default `d + 1`).
    pub rounds_after: u32,
    pub profile: LatencyProfile,
    /// Plan applied to the leading patch `P`.
    pub plan: SyncPlan,
}

impl SurgeryExperiment {
    pub fn new(distance: u32, basis: Basis, profile: LatencyProfile, plan: SyncPlan) -> Self {
        Self {
            distance,
            basis,
            rounds_before: distance + 1,
            rounds_after: distance + 1,
            profile,
            plan,
        }
    }
}

/// Two `d x d` patches run side by side, merged through a seam column and run
/// as one `d x (2d+1)` patch.
///
/// The leading patch `P` runs `plan.extra_rounds` additional rounds and carries
/// the plan's idles. Both patches end their pre-merge rounds at the merge
/// barrier. Emitted observables: `X_P`, `X_P2` and the joint `XPXP2` for the Z
/// basis; `Z_P`, `Z_P2`, `ZPZP2` for the X basis.
pub fn gen_lattice_surgery(exp: &SurgeryExperiment) -> Result<CircuitIR> {
    let base = lattice_surgery_base(exp)?;
    apply_plan_timing(&base, &exp.plan)
}

fn lattice_surgery_base(exp: &SurgeryExperiment) -> Result<CircuitIR> {
    let d = exp.distance;
    check_distance(d)?;
    if exp.rounds_before == 0 || exp.rounds_after == 0 {
        return Err(Error::InvalidRequest(
            "surgery needs rounds_before and rounds_after >= 1".into(),
        ));
    }
    let profile = &exp.profile;
    profile.validate()?;
    let joint = exp.basis.joint_pauli();
    let di = d as i32;
    let geom_p = layout(0, di, di, joint);
    let geom_p2 = layout(di + 1, di, di, joint);
    let geom_m = layout(0, 2 * di + 1, di, joint);

    let mut b = Builder::new();
    let data_p: Vec<Qubit> = geom_p.data.iter().map(|&c| b.data(c)).collect();
    let data_p2: Vec<Qubit> = geom_p2.data.iter().map(|&c| b.data(c)).collect();
    let seam: Vec<Qubit> = (0..di).map(|y| b.data((di, y))).collect();
    let stabs_p = compile_stabs(&mut b, &geom_p);
    let stabs_p2 = compile_stabs(&mut b, &geom_p2);
    let stabs_m = compile_stabs(&mut b, &geom_m);
    let data_m: Vec<Qubit> = geom_m.data.iter().map(|&c| b.data_ids[&c]).collect();

    let cycle = profile.surface_cycle_time();
    let rounds_p = exp.rounds_before + exp.plan.extra_rounds as u32;
    let rounds_p2 = exp.rounds_before;
    let len_p = profile.t_reset + u64::from(rounds_p) * cycle;
    let len_p2 = profile.t_reset + u64::from(rounds_p2) * cycle;
    let barrier = len_p.max(len_p2);
    let max_rounds = rounds_p.max(rounds_p2);

    let mut sr = SurfaceRounds::new(profile);
    let prep_h = joint == Pauli::X;
    for (region, data, stabs, rounds, len) in [
        (Region::Lead, &data_p, &stabs_p, rounds_p, len_p),
        (Region::Lag, &data_p2, &stabs_p2, rounds_p2, len_p2),
    ] {
        let origin = barrier - len;
        let region_qubits: Vec<Qubit> = data
            .iter()
            .copied()
            .chain(stabs.iter().map(|s| s.ancilla))
            .collect();
        for &q in &region_qubits {
            b.op(OpKind::Reset, vec![q], origin, profile.t_reset);
        }
        for &q in data {
            sr.fresh.insert(q, joint);
        }
        let mut t = origin + profile.t_reset;
        for r in 0..rounds {
            let remaining = rounds - r;
            let no_prep: &[Qubit] = &[];
            sr.round(
                &mut b,
                RoundSpec {
                    stabs,
                    data,
                    start: t,
                    round: max_rounds - rounds + r,
                    region,
                    remaining,
                    layer_gaps: remaining == 1,
                    prep_h: if r == 0 && prep_h { data } else { no_prep },
                },
            );
            t += cycle;
        }
        debug_assert_eq!(t, barrier);
        b.tick(region, TickMark::SyncPoint, region_qubits, barrier);
    }

    // seam data and the ancillas that only exist in the merged patch
    let known: Vec<Qubit> = stabs_p
        .iter()
        .chain(&stabs_p2)
        .map(|s| s.ancilla)
        .collect();
    let new_anc: Vec<Qubit> = stabs_m
        .iter()
        .map(|s| s.ancilla)
        .filter(|a| !known.contains(a))
        .collect();
    for &q in seam.iter().chain(&new_anc) {
        b.op(OpKind::Reset, vec![q], barrier - profile.t_reset, profile.t_reset);
    }
    for &q in &seam {
        sr.fresh.insert(q, joint.other());
    }
    let all: Vec<Qubit> = (0..b.roles.len() as Qubit).collect();
    b.tick(Region::All, TickMark::Barrier, all, barrier);

    let seam_prep: Vec<Qubit> = if joint.other() == Pauli::X {
        seam.clone()
    } else {
        Vec::new()
    };
    let mut joint_records = Vec::new();
    let mut t = barrier;
    for r in 0..exp.rounds_after {
        let first_record = b.n_meas;
        sr.round(
            &mut b,
            RoundSpec {
                stabs: &stabs_m,
                data: &data_m,
                start: t,
                round: max_rounds + r,
                region: Region::All,
                remaining: exp.rounds_after - r,
                layer_gaps: false,
                prep_h: if r == 0 { &seam_prep } else { &[] },
            },
        );
        if r == 0 {
            // records are assigned in stabilizer order
            for (i, s) in stabs_m.iter().enumerate() {
                if new_anc.contains(&s.ancilla) && s.pauli == joint {
                    joint_records.push(first_record + i as u32);
                }
            }
        }
        t += cycle;
    }
    let records = sr.readout(
        &mut b,
        &stabs_m,
        &data_m,
        joint,
        t,
        max_rounds + exp.rounds_after,
    );
    let col = |x: i32| (0..di).map(move |y| (x, y));
    joint_records.sort_unstable();
    let (single, single2) = match exp.basis {
        Basis::Z => ("X_P", "X_P2"),
        Basis::X => ("Z_P", "Z_P2"),
    };
    let observables = vec![
        Observable {
            name: single.into(),
            measurements: logical_records(col(0), &b, &records),
            basis: joint,
        },
        Observable {
            name: single2.into(),
            measurements: logical_records(col(2 * di), &b, &records),
            basis: joint,
        },
        Observable {
            name: exp.basis.joint_observable().into(),
            measurements: joint_records,
            basis: joint,
        },
    ];
    let c = b.finish(
        observables,
        max_rounds + exp.rounds_after + 1,
        Some(max_rounds),
    );
    debug_assert!(c.validate().is_ok(), "{:?}", c.validate());
    Ok(c)
}

/// Materializes the idles of `plan` as timed `Idle` ops on the leading region.
///
/// Per-round idles go before the last `n` rounds, intra-round idles into the
/// layer gaps of the final round and the Passive pause at the sync point. Every
/// later op of the region shifts; at a merge barrier the other regions are
/// delayed so all qubits meet again. Extra rounds are not added here; the
/// generators build them in.
pub fn apply_plan_timing(circuit: &CircuitIR, plan: &SyncPlan) -> Result<CircuitIR> {
    if circuit.annotated {
        return Err(Error::AlreadyAnnotated);
    }
    let is_lead_tick = |o: &Op, want: fn(TickMark) -> bool| {
        matches!(o.kind, OpKind::Tick { region: Region::Lead, mark } if want(mark))
    };
    let round_ticks = circuit
        .ops
        .iter()
        .filter(|o| is_lead_tick(o, |m| matches!(m, TickMark::RoundStart { .. })))
        .count();
    let gap_ticks = circuit
        .ops
        .iter()
        .filter(|o| is_lead_tick(o, |m| matches!(m, TickMark::LayerGap { .. })))
        .count();
    let sync_ticks = circuit
        .ops
        .iter()
        .filter(|o| is_lead_tick(o, |m| m == TickMark::SyncPoint))
        .count();
    let n_round = plan.per_round_idles.len();
    if n_round > round_ticks {
        return Err(Error::InvalidPlan(format!(
            "plan spreads idles over {n_round} rounds but the leading patch only runs {round_ticks}"
        )));
    }
    if plan.intra_round_idles.len() > gap_ticks {
        return Err(Error::InvalidPlan(format!(
            "plan needs {} layer gaps, circuit has {gap_ticks}",
            plan.intra_round_idles.len()
        )));
    }
    if plan.final_idle > 0 && sync_ticks == 0 {
        return Err(Error::InvalidPlan("circuit has no sync point".into()));
    }

    let nq = circuit.n_qubits as usize;
    let mut shift = vec![0 as Nanos; nq];
    let mut ops = Vec::with_capacity(circuit.ops.len() + nq * (n_round + 6));
    let mut barrier_at: Option<usize> = None;
    let mut adjust = vec![0 as Nanos; nq];
    for op in &circuit.ops {
        let op_shift = op
            .targets
            .iter()
            .map(|&q| shift[q as usize])
            .max()
            .unwrap_or(0);
        let mut moved = op.clone();
        moved.start += op_shift;
        ops.push(moved);
        let OpKind::Tick { region, mark } = op.kind else {
            continue;
        };
        if mark == TickMark::Barrier {
            let s = shift.iter().copied().max().unwrap_or(0);
            for q in 0..nq {
                adjust[q] = s - shift[q];
                shift[q] = s;
            }
            ops.last_mut().unwrap().start = op.start + s;
            barrier_at = Some(ops.len() - 1);
            continue;
        }
        if region != Region::Lead {
            continue;
        }
        let idle = match mark {
            TickMark::RoundStart { remaining } if remaining as usize <= n_round => {
                plan.per_round_idles.get(n_round - remaining as usize).unwrap_or(0)
            }
            TickMark::LayerGap { gap } => plan.intra_round_idles.get(gap as usize).unwrap_or(0),
            TickMark::SyncPoint => plan.final_idle,
            _ => 0,
        };
        if idle == 0 {
            continue;
        }
        for &q in &op.targets {
            ops.push(Op {
                kind: OpKind::Idle,
                targets: vec![q],
                start: op.start + shift[q as usize],
                duration: idle,
            });
            shift[q as usize] += idle;
        }
    }
    if let Some(bi) = barrier_at {
        for op in &mut ops[..bi] {
            let a = op
                .targets
                .iter()
                .map(|&q| adjust[q as usize])
                .max()
                .unwrap_or(0);
            op.start += a;
        }
    }
    let mut out = CircuitIR {
        ops,
        ..circuit.clone()
    };
    out.sort_ops();
    debug_assert!(out.validate().is_ok(), "{:?}", out.validate());
    Ok(out)
}

// ---------------------------------------------------------------------------
// text format

fn fmt_prob(p: f64) -> String {
    format!("{p:e}")
}

impl CircuitIR {
    /// Line-oriented text form. One op per line:
    /// `KIND t=<ns> dur=<ns> [params] targets... [m<record>]`, then
    /// `DETECTOR basis=<P> round=<r> m<i>...` and `OBSERVABLE <name> basis=<P> m<i>...`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "QUBITS {}", self.n_qubits);
        let roles: Vec<&str> = self
            .roles
            .iter()
            .map(|r| match r {
                QubitRole::Data => "D",
                QubitRole::Measure(Pauli::X) => "MX",
                QubitRole::Measure(Pauli::Z) => "MZ",
            })
            .collect();
        let _ = writeln!(s, "ROLES {}", roles.join(" "));
        let _ = writeln!(s, "MEASUREMENTS {}", self.n_measurements);
        let _ = writeln!(
            s,
            "ROUNDS {}{}",
            self.n_rounds,
            self.merge_round
                .map(|m| format!(" merge={m}"))
                .unwrap_or_default()
        );
        if self.annotated {
            let _ = writeln!(s, "ANNOTATED");
        }
        for op in &self.ops {
            let (name, extra) = match op.kind {
                OpKind::Reset => ("R", String::new()),
                OpKind::Hadamard => ("H", String::new()),
                OpKind::Cnot => ("CX", String::new()),
                OpKind::Measure { .. } => ("M", String::new()),
                OpKind::MeasureReset { .. } => ("MR", String::new()),
                OpKind::Idle => ("IDLE", String::new()),
                OpKind::Tick { region, mark } => {
                    let m = match mark {
                        TickMark::RoundStart { remaining } => format!("round-start={remaining}"),
                        TickMark::LayerGap { gap } => format!("layer-gap={gap}"),
                        TickMark::SyncPoint => "sync".into(),
                        TickMark::Barrier => "barrier".into(),
                    };
                    ("TICK", format!(" region={} {m}", region.as_str()))
                }
                OpKind::Depol1 { p } => ("DEPOL1", format!(" p={}", fmt_prob(p))),
                OpKind::Depol2 { p } => ("DEPOL2", format!(" p={}", fmt_prob(p))),
                OpKind::PauliChannel { px, py, pz } => (
                    "PAULI",
                    format!(" px={} py={} pz={}", fmt_prob(px), fmt_prob(py), fmt_prob(pz)),
                ),
                OpKind::Flip { p } => ("FLIP", format!(" p={}", fmt_prob(p))),
            };
            let _ = write!(s, "{name} t={} dur={}{extra}", op.start, op.duration);
            for q in &op.targets {
                let _ = write!(s, " {q}");
            }
            if let OpKind::Measure { record } | OpKind::MeasureReset { record } = op.kind {
                let _ = write!(s, " m{record}");
            }
            s.push('\n');
        }
        for d in &self.detectors {
            let _ = write!(s, "DETECTOR basis={} round={}", d.basis.as_str(), d.round);
            for m in &d.measurements {
                let _ = write!(s, " m{m}");
            }
            s.push('\n');
        }
        for o in &self.observables {
            let _ = write!(s, "OBSERVABLE {} basis={}", o.name, o.basis.as_str());
            for m in &o.measurements {
                let _ = write!(s, " m{m}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<CircuitIR> {
        let bad = |line: usize, msg: &str| Error::InvalidCircuit(format!("line {}: {msg}", line + 1));
        let mut c = CircuitIR {
            n_qubits: 0,
            roles: Vec::new(),
            ops: Vec::new(),
            n_measurements: 0,
            detectors: Vec::new(),
            observables: Vec::new(),
            n_rounds: 0,
            merge_round: None,
            annotated: false,
        };
        for (ln, line) in text.lines().enumerate() {
            let mut words = line.split_whitespace();
            let Some(head) = words.next() else { continue };
            let rest: Vec<&str> = words.collect();
            let kv = |key: &str| -> Result<&str> {
                rest.iter()
                    .find_map(|w| w.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                    .ok_or_else(|| bad(ln, &format!("missing `{key}=`")))
            };
            let num = |key: &str| -> Result<u64> {
                kv(key)?.parse().map_err(|_| bad(ln, &format!("bad `{key}`")))
            };
            let prob = |key: &str| -> Result<f64> {
                kv(key)?.parse().map_err(|_| bad(ln, &format!("bad `{key}`")))
            };
            let records = || -> Result<Vec<u32>> {
                rest.iter()
                    .filter_map(|w| w.strip_prefix('m'))
                    .map(|v| v.parse().map_err(|_| bad(ln, "bad record")))
                    .collect()
            };
            match head {
                "QUBITS" => c.n_qubits = rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "bad QUBITS"))?,
                "ROLES" => {
                    c.roles = rest
                        .iter()
                        .map(|r| match *r {
                            "D" => Ok(QubitRole::Data),
                            "MX" => Ok(QubitRole::Measure(Pauli::X)),
                            "MZ" => Ok(QubitRole::Measure(Pauli::Z)),
                            _ => Err(bad(ln, "bad role")),
                        })
                        .collect::<Result<_>>()?
                }
                "MEASUREMENTS" => c.n_measurements = rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "bad MEASUREMENTS"))?,
                "ROUNDS" => {
                    c.n_rounds = rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "bad ROUNDS"))?;
                    c.merge_round = kv("merge").ok().map(|v| v.parse()).transpose().map_err(|_| bad(ln, "bad merge"))?;
                }
                "ANNOTATED" => c.annotated = true,
                "DETECTOR" => c.detectors.push(Detector {
                    measurements: records()?,
                    basis: Pauli::parse(kv("basis")?)?,
                    round: num("round")? as u32,
                }),
                "OBSERVABLE" => c.observables.push(Observable {
                    name: rest.first().ok_or_else(|| bad(ln, "missing name"))?.to_string(),
                    measurements: records()?,
                    basis: Pauli::parse(kv("basis")?)?,
                }),
                _ => {
                    let record = records()?.first().copied();
                    let need_record = || record.ok_or_else(|| bad(ln, "measurement without record"));
                    let kind = match head {
                        "R" => OpKind::Reset,
                        "H" => OpKind::Hadamard,
                        "CX" => OpKind::Cnot,
                        "M" => OpKind::Measure { record: need_record()? },
                        "MR" => OpKind::MeasureReset { record: need_record()? },
                        "IDLE" => OpKind::Idle,
                        "TICK" => {
                            let region = Region::parse(kv("region")?)?;
                            let mark = if let Ok(r) = num("round-start") {
                                TickMark::RoundStart { remaining: r as u32 }
                            } else if let Ok(g) = num("layer-gap") {
                                TickMark::LayerGap { gap: g as u32 }
                            } else if rest.contains(&"sync") {
                                TickMark::SyncPoint
                            } else if rest.contains(&"barrier") {
                                TickMark::Barrier
                            } else {
                                return Err(bad(ln, "unknown tick"));
                            };
                            OpKind::Tick { region, mark }
                        }
                        "DEPOL1" => OpKind::Depol1 { p: prob("p")? },
                        "DEPOL2" => OpKind::Depol2 { p: prob("p")? },
                        "PAULI" => OpKind::PauliChannel { px: prob("px")?, py: prob("py")?, pz: prob("pz")? },
                        "FLIP" => OpKind::Flip { p: prob("p")? },
                        other => return Err(bad(ln, &format!("unknown op `{other}`"))),
                    };
                    let targets = rest
                        .iter()
                        .filter(|w| w.bytes().all(|b| b.is_ascii_digit()))
                        .map(|w| w.parse().map_err(|_| bad(ln, "bad target")))
                        .collect::<Result<Vec<Qubit>>>()?;
                    c.ops.push(Op {
                        kind,
                        targets,
                        start: num("t")?,
                        duration: num("dur")?,
                    });
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Gate-layer gaps per round available to Active-intra.
pub const fn layer_gaps_per_round() -> u32 {
    INTRA_ROUND_GAPS
}
