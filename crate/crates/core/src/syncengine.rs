//! Cycle-level model of the synchronization hardware: a table of per-patch
//! cycle counters driven by a global clock, a metadata table of cycle times,
//! and the engine that turns counter snapshots into synchronization plans.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{plan_pair, PlanParams, PolicyKind, SyncPlan};
use crate::timing::{Nanos, PatchId};

pub const DEFAULT_COUNTER_WIDTH: u32 = 12;
pub const DEFAULT_CLOCK_HZ: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterMode {
    /// The counter returns to 0 at every cycle boundary.
    ResetAtBoundary,
    /// The counter wraps at the largest multiple of the cycle length that fits
    /// the width; the phase is read modulo the cycle length.
    FreeRunning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterEntry {
    pub counter: u64,
    pub valid: bool,
    /// Cycle length in clock ticks.
    pub period: u64,
    wrap: u64,
}

impl CounterEntry {
    /// Ticks elapsed in the current cycle.
    pub fn phase(&self) -> u64 {
        if self.counter < self.period {
            self.counter
        } else {
            self.counter % self.period
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchCounterTable {
    pub width: u32,
    pub clock_hz: u64,
    pub mode: CounterMode,
    entries: Vec<Option<CounterEntry>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchMetadataTable {
    cycle_ns: Vec<Option<Nanos>>,
}

impl PatchMetadataTable {
    pub fn set(&mut self, id: PatchId, cycle_ns: Nanos) {
        let i = id.0 as usize;
        if self.cycle_ns.len() <= i {
            self.cycle_ns.resize(i + 1, None);
        }
        self.cycle_ns[i] = Some(cycle_ns);
    }

    pub fn get(&self, id: PatchId) -> Option<Nanos> {
        self.cycle_ns.get(id.0 as usize).copied().flatten()
    }
}

/// Smallest counter width whose range covers a cycle of `cycle_ticks`.
pub fn min_counter_width(cycle_ticks: u64) -> u32 {
    if cycle_ticks <= 1 {
        return 0;
    }
    64 - (cycle_ticks - 1).leading_zeros()
}

impl PatchCounterTable {
    pub fn new(width: u32, clock_hz: u64, mode: CounterMode) -> Result<Self> {
        if width == 0 || width > 63 {
            return Err(Error::InvalidRequest(format!("counter width {width} outside 1..=63")));
        }
        if clock_hz == 0 {
            return Err(Error::InvalidRequest("clock frequency must be positive".into()));
        }
        Ok(Self {
            width,
            clock_hz,
            mode,
            entries: Vec::new(),
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(DEFAULT_COUNTER_WIDTH, DEFAULT_CLOCK_HZ, CounterMode::ResetAtBoundary)
            .expect("defaults are valid")
    }

    /// Clock ticks in `ns`; errors when `ns` is not a whole number of ticks.
    pub fn ticks_for(&self, ns: Nanos) -> Result<u64> {
        let num = u128::from(ns) * u128::from(self.clock_hz);
        if num % 1_000_000_000 != 0 {
            return Err(Error::InvalidRequest(format!(
                "{ns} ns is not a whole number of ticks at {} Hz",
                self.clock_hz
            )));
        }
        u64::try_from(num / 1_000_000_000)
            .map_err(|_| Error::InvalidRequest(format!("{ns} ns overflows the tick range")))
    }

    fn ns_for(&self, ticks: u64) -> Nanos {
        if self.clock_hz == 1_000_000_000 {
            return ticks;
        }
        match ticks.checked_mul(1_000_000_000) {
            Some(n) => n / self.clock_hz,
            None => (u128::from(ticks) * 1_000_000_000 / u128::from(self.clock_hz)) as Nanos,
        }
    }

    /// Registers a patch with cycle `cycle_ns` and `phase_ns` already elapsed
    /// in its current cycle, and records its cycle time in `metadata`.
    pub fn register(
        &mut self,
        metadata: &mut PatchMetadataTable,
        id: PatchId,
        cycle_ns: Nanos,
        phase_ns: Nanos,
    ) -> Result<()> {
        let period = self.ticks_for(cycle_ns)?;
        if period == 0 {
            return Err(Error::InvalidRequest("cycle time must be positive".into()));
        }
        let range = 1u64 << self.width;
        if range < period {
            return Err(Error::CounterWidth {
                width: self.width,
                cycle_ticks: period,
            });
        }
        let wrap = match self.mode {
            CounterMode::ResetAtBoundary => period,
            CounterMode::FreeRunning => range / period * period,
        };
        let counter = self.ticks_for(phase_ns % cycle_ns)?;
        let i = id.0 as usize;
        if self.entries.len() <= i {
            self.entries.resize(i + 1, None);
        }
        self.entries[i] = Some(CounterEntry {
            counter,
            valid: true,
            period,
            wrap,
        });
        metadata.set(id, cycle_ns);
        Ok(())
    }

    pub fn entry(&self, id: PatchId) -> Option<&CounterEntry> {
        self.entries.get(id.0 as usize).and_then(Option::as_ref)
    }

    pub fn invalidate(&mut self, id: PatchId) {
        if let Some(Some(e)) = self.entries.get_mut(id.0 as usize) {
            e.valid = false;
        }
    }

    /// Advances every valid counter by `n_ticks`.
    pub fn tick(&mut self, n_ticks: u64) {
        for e in self.entries.iter_mut().flatten().filter(|e| e.valid) {
            e.counter = ((u128::from(e.counter) + u128::from(n_ticks)) % u128::from(e.wrap)) as u64;
        }
    }

    /// Time left in the patch's current cycle, in ns.
    pub fn remaining_ns(&self, id: PatchId) -> Option<Nanos> {
        let e = self.entry(id).filter(|e| e.valid)?;
        Some(self.ns_for(e.period - e.phase()))
    }
}

/// Pure form of [`PatchCounterTable::tick`].
pub fn tick(table: &PatchCounterTable, n_ticks: u64) -> PatchCounterTable {
    let mut t = table.clone();
    t.tick(n_ticks);
    t
}

/// Reads the counters of the requested patches and plans their
/// synchronization against the most lagging one.
pub fn engine_compute(
    counters: &PatchCounterTable,
    metadata: &PatchMetadataTable,
    request: &[PatchId],
    policy: PolicyKind,
    params: &PlanParams,
) -> Result<Vec<(PatchId, SyncPlan)>> {
    if request.len() < 2 {
        return Err(Error::InvalidRequest(format!(
            "synchronization needs at least 2 patches, got {}",
            request.len()
        )));
    }
    let read = |id: PatchId| match (counters.remaining_ns(id), metadata.get(id)) {
        (Some(rem), Some(cycle)) => Ok((rem, cycle)),
        _ => Err(Error::InvalidPatch(id.0)),
    };
    // first pass: the lagging patch is the one furthest from its boundary
    let mut lag = (request[0], 0, 0);
    for (i, &id) in request.iter().enumerate() {
        let (rem, cycle) = read(id)?;
        if i == 0 || rem > lag.2 || (rem == lag.2 && id < lag.0) {
            lag = (id, cycle, rem);
        }
    }
    let (lag_id, t_lag, lag_rem) = lag;
    let mut plans = Vec::with_capacity(request.len());
    for &id in request {
        let plan = if id == lag_id {
            SyncPlan::empty(policy)
        } else {
            let (rem, cycle) = read(id)?;
            plan_pair(policy, cycle, t_lag, lag_rem - rem, params)?
        };
        plans.push((id, plan));
    }
    Ok(plans)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanningTimeStats {
    pub k: usize,
    pub median_ns: f64,
    pub mean_ns: f64,
    pub p99_ns: f64,
}

/// Calls per timed batch; the clock is read once per batch.
pub const PLANNING_BATCH: usize = 256;

/// Wall time of [`engine_compute`] for `k` patches with random cycle times
/// (900..1400 ns) and phases. Each repetition times a batch of calls on a fresh
/// configuration and records the per-call average.
pub fn measure_planning_time(
    k: usize,
    repetitions: usize,
    policy: PolicyKind,
    seed: u64,
) -> Result<PlanningTimeStats> {
    if !(2..=64).contains(&k) {
        return Err(Error::InvalidRequest(format!("k = {k} outside 2..=64")));
    }
    if repetitions == 0 {
        return Err(Error::InvalidRequest("repetitions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = PlanParams::default();
    let request: Vec<PatchId> = (0..k as u32).map(PatchId).collect();
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let mut counters = PatchCounterTable::with_defaults();
        let mut meta = PatchMetadataTable::default();
        for &id in &request {
            let cycle = rng.random_range(900..=1400);
            let phase = rng.random_range(0..cycle);
            counters.register(&mut meta, id, cycle, phase)?;
        }
        let start = Instant::now();
        for _ in 0..PLANNING_BATCH {
            // configurations without a round-based solution still cost a full pass
            let plans = engine_compute(
                std::hint::black_box(&counters),
                &meta,
                std::hint::black_box(&request),
                policy,
                &params,
            );
            std::hint::black_box(plans.ok());
        }
        samples.push(start.elapsed().as_nanos() as f64 / PLANNING_BATCH as f64);
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    };
    let p99 = samples[((n as f64 * 0.99).ceil() as usize).clamp(1, n) - 1];
    Ok(PlanningTimeStats {
        k,
        median_ns: median,
        mean_ns: samples.iter().sum::<f64>() / n as f64,
        p99_ns: p99,
    })
}
