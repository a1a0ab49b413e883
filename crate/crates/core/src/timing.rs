//! Logical clocks: per-patch syndrome-cycle durations, phases and the slack
//! between patches that must be absorbed before they can be merged.
//!
//! All times are integer nanoseconds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Nanos = u64;

/// CNOT layers in one rotated-surface-code syndrome cycle.
pub const SURFACE_CNOT_LAYERS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatchId(pub u32);

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Physical latencies and coherence times of a hardware platform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyProfile {
    pub name: String,
    /// Single-qubit gate.
    pub t_1q: Nanos,
    /// Two-qubit gate.
    pub t_2q: Nanos,
    /// Readout.
    pub t_meas: Nanos,
    pub t_reset: Nanos,
    /// Relaxation time.
    #[serde(rename = "T1")]
    pub t1: Nanos,
    /// Dephasing time.
    #[serde(rename = "T2")]
    pub t2: Nanos,
}

impl LatencyProfile {
    /// Superconducting, IBM-like. Cycle time 1900 ns.
    pub fn ibm() -> Self {
        Self {
            name: "ibm".into(),
            t_1q: 50,
            t_2q: 70,
            t_meas: 1500,
            t_reset: 20,
            t1: 200_000,
            t2: 150_000,
        }
    }

    /// Superconducting, Google-like. Cycle time 1100 ns.
    pub fn google() -> Self {
        Self {
            name: "google".into(),
            t_1q: 35,
            t_2q: 42,
            t_meas: 660,
            t_reset: 202,
            t1: 25_000,
            t2: 40_000,
        }
    }

    /// Neutral atoms, QuEra-like. Cycle time 2 ms.
    pub fn quera() -> Self {
        Self {
            name: "quera".into(),
            t_1q: 5_000,
            t_2q: 200_000,
            t_meas: 1_000_000,
            t_reset: 190_000,
            t1: 4_000_000_000,
            t2: 1_500_000_000,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ibm" => Some(Self::ibm()),
            "google" => Some(Self::google()),
            "quera" => Some(Self::quera()),
            _ => None,
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["ibm", "google", "quera"]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidProfile {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.t_1q == 0 || self.t_2q == 0 || self.t_meas == 0 {
            return bad("gate and readout latencies must be positive");
        }
        if self.t1 == 0 || self.t2 == 0 {
            return bad("T1 and T2 must be positive");
        }
        if self.t2 > 2 * self.t1 {
            return bad("T2 must not exceed 2*T1");
        }
        Ok(())
    }

    /// Duration of one surface-code syndrome cycle on this platform.
    pub fn surface_cycle_time(&self) -> Nanos {
        cycle_time_from_profile(self, SURFACE_CNOT_LAYERS)
    }
}

/// Duration of one syndrome cycle: two Hadamard layers, `cnot_layers` CNOT
/// layers, then measurement and reset.
pub fn cycle_time_from_profile(profile: &LatencyProfile, cnot_layers: u32) -> Nanos {
    2 * profile.t_1q + u64::from(cnot_layers) * profile.t_2q + profile.t_meas + profile.t_reset
}

/// Logical-clock state of one patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchTimingState {
    pub patch_id: PatchId,
    pub cycle_time: Nanos,
    /// Absolute start time of the current cycle.
    pub cycle_origin: Nanos,
    pub rounds_completed: u64,
}

impl PatchTimingState {
    pub fn new(patch_id: PatchId, cycle_time: Nanos, cycle_origin: Nanos) -> Self {
        Self {
            patch_id,
            cycle_time,
            cycle_origin,
            rounds_completed: 0,
        }
    }

    /// Time left until this patch reaches its next cycle boundary. A patch
    /// sitting exactly on a boundary has a full cycle remaining.
    pub fn remaining_at(&self, t_now: Nanos) -> Result<Nanos> {
        if self.cycle_time == 0 {
            return Err(Error::InvalidRequest(format!(
                "{} has a zero cycle time",
                self.patch_id
            )));
        }
        if t_now < self.cycle_origin {
            return Err(Error::InvalidRequest(format!(
                "{} is not active at t={t_now} (cycle starts at {})",
                self.patch_id, self.cycle_origin
            )));
        }
        Ok(self.cycle_time - (t_now - self.cycle_origin) % self.cycle_time)
    }
}

/// Slack owed by one patch, already reduced modulo its own cycle time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSlack {
    pub patch_id: PatchId,
    pub cycle_time: Nanos,
    /// Idle time still to absorb, `< cycle_time`.
    pub residual: Nanos,
    /// Whole error-correction rounds to run before idling.
    pub full_extra_rounds: u64,
}

impl PatchSlack {
    /// Unreduced slack.
    pub fn raw(&self) -> Nanos {
        self.full_extra_rounds * self.cycle_time + self.residual
    }
}

/// Slack of every patch relative to the most lagging one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlackAssignment {
    pub lagging_patch: PatchId,
    /// In input order.
    pub entries: Vec<PatchSlack>,
}

impl SlackAssignment {
    pub fn get(&self, id: PatchId) -> Option<&PatchSlack> {
        self.entries.iter().find(|e| e.patch_id == id)
    }

    pub fn slack(&self, id: PatchId) -> Option<Nanos> {
        self.get(id).map(|e| e.residual)
    }

    pub fn full_extra_rounds(&self, id: PatchId) -> Option<u64> {
        self.get(id).map(|e| e.full_extra_rounds)
    }

    pub fn lagging(&self) -> &PatchSlack {
        self.get(self.lagging_patch)
            .expect("lagging patch is always present")
    }
}

/// Slack of each patch at `t_now`.
///
/// The lagging patch is the one furthest from its next boundary (ties go to the
/// lowest id); every other patch owes the difference in remaining time.
pub fn compute_slack(states: &[PatchTimingState], t_now: Nanos) -> Result<SlackAssignment> {
    if states.len() < 2 {
        return Err(Error::InvalidRequest(format!(
            "slack needs at least 2 patches, got {}",
            states.len()
        )));
    }
    let mut remaining = Vec::with_capacity(states.len());
    for s in states {
        remaining.push((s.patch_id, s.cycle_time, s.remaining_at(t_now)?));
    }
    Ok(slack_from_remaining(&remaining))
}

/// Shared core of [`compute_slack`] and the counter-based engine: slack from
/// `(patch, cycle_time, remaining)` triples. Needs at least one entry and
/// positive cycle times.
pub fn slack_from_remaining(remaining: &[(PatchId, Nanos, Nanos)]) -> SlackAssignment {
    let mut lag = 0;
    for (i, &(id, _, rem)) in remaining.iter().enumerate() {
        let (lag_id, _, lag_rem) = remaining[lag];
        if rem > lag_rem || (rem == lag_rem && id < lag_id) {
            lag = i;
        }
    }
    let (lagging_patch, _, lag_rem) = remaining[lag];
    let entries = remaining
        .iter()
        .map(|&(patch_id, cycle_time, rem)| {
            let mut residual = lag_rem - rem;
            let mut full_extra_rounds = 0;
            // raw slack is below the largest cycle time, so this rarely loops
            while residual >= cycle_time {
                residual -= cycle_time;
                full_extra_rounds += 1;
            }
            PatchSlack {
                patch_id,
                cycle_time,
                residual,
                full_extra_rounds,
            }
        })
        .collect();
    SlackAssignment {
        lagging_patch,
        entries,
    }
}

/// Phase mismatch a faster-cycling patch accumulates against a slower one after
/// `rounds` rounds from an aligned start.
pub fn slack_after_rounds(rounds: u64, t_fast: Nanos, t_slow: Nanos) -> Result<Nanos> {
    if t_fast == 0 || t_slow < t_fast {
        return Err(Error::InvalidRequest(format!(
            "need t_slow >= t_fast > 0, got t_fast={t_fast} t_slow={t_slow}"
        )));
    }
    let drift = u128::from(rounds) * u128::from(t_slow - t_fast);
    Ok((drift % u128::from(t_fast)) as Nanos)
}
