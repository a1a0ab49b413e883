//! Synchronization policies.
//!
//! Every policy turns a slack into a [`SyncPlan`]: idles to insert into the
//! leading patch's schedule and/or extra error-correction rounds to run before
//! the merge.
//!
//! - Passive: one idle of the full slack right before surgery.
//! - Active: the slack split evenly across the remaining rounds.
//! - Active-intra: the slack split across the gate-layer gaps of the final round.
//! - Extra Rounds: whole rounds only, solving `n*T_P2 = m*T_P + slack`.
//! - Hybrid: a few extra rounds plus a residual idle below a tolerance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::timing::{compute_slack, Nanos, PatchId, PatchTimingState, SlackAssignment};

/// Gaps inside one surface-code round available to Active-intra: after the
/// first Hadamard layer and after each of the four CNOT layers.
pub const INTRA_ROUND_GAPS: u32 = 5;
pub const DEFAULT_EPSILON_NS: Nanos = 400;
pub const DEFAULT_Z_MAX: u64 = 5;
pub const DEFAULT_M_MAX: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Passive,
    Active,
    ActiveIntra,
    ExtraRounds,
    Hybrid,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Passive,
        PolicyKind::Active,
        PolicyKind::ActiveIntra,
        PolicyKind::ExtraRounds,
        PolicyKind::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Passive => "passive",
            PolicyKind::Active => "active",
            PolicyKind::ActiveIntra => "active-intra",
            PolicyKind::ExtraRounds => "extra-rounds",
            PolicyKind::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == norm || p.as_str().replace('-', "") == norm)
            .ok_or_else(|| Error::InvalidRequest(format!("unknown policy `{s}`")))
    }
}

/// An even split of `total` nanoseconds into `parts` idles, larger ones first.
///
/// Stored compactly so plans for many patches can be built without allocating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IdleSplit {
    total: Nanos,
    parts: u32,
}

impl IdleSplit {
    pub const NONE: IdleSplit = IdleSplit { total: 0, parts: 0 };

    pub fn even(total: Nanos, parts: u32) -> Result<Self> {
        if parts == 0 && total > 0 {
            return Err(Error::InvalidRequest(
                "cannot split a non-zero slack into zero parts".into(),
            ));
        }
        Ok(Self { total, parts })
    }

    pub fn total(&self) -> Nanos {
        self.total
    }

    pub fn len(&self) -> usize {
        self.parts as usize
    }

    pub fn is_empty(&self) -> bool {
        self.parts == 0
    }

    pub fn get(&self, i: usize) -> Option<Nanos> {
        if i >= self.len() {
            return None;
        }
        let n = u64::from(self.parts);
        let base = self.total / n;
        let rem = self.total % n;
        Some(if (i as u64) < rem { base + 1 } else { base })
    }

    pub fn iter(&self) -> impl Iterator<Item = Nanos> + '_ {
        (0..self.len()).map(|i| self.get(i).unwrap())
    }

    pub fn to_vec(&self) -> Vec<Nanos> {
        self.iter().collect()
    }
}

impl Serialize for IdleSplit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IdleSplit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Nanos>::deserialize(d)?;
        let split = IdleSplit {
            total: v.iter().sum(),
            parts: v.len() as u32,
        };
        if split.to_vec() != v {
            return Err(serde::de::Error::custom(
                "idle list is not an even remainder-first split",
            ));
        }
        Ok(split)
    }
}

/// Output of a policy for one leading patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncPlan {
    pub policy: PolicyKind,
    /// One idle per remaining round before surgery, inserted before that round.
    pub per_round_idles: IdleSplit,
    /// One idle per gate-layer gap of the final round.
    pub intra_round_idles: IdleSplit,
    /// Extra error-correction rounds run by the leading patch.
    pub extra_rounds: u64,
    /// Single pause right before surgery.
    pub final_idle: Nanos,
    /// Total idle time inserted.
    pub total_slack_absorbed: Nanos,
}

impl SyncPlan {
    pub fn empty(policy: PolicyKind) -> Self {
        Self {
            policy,
            per_round_idles: IdleSplit::NONE,
            intra_round_idles: IdleSplit::NONE,
            extra_rounds: 0,
            final_idle: 0,
            total_slack_absorbed: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total_slack_absorbed == 0 && self.extra_rounds == 0
    }

    /// Idle time plus extra rounds at `cycle_time` each.
    pub fn schedule_delay(&self, cycle_time: Nanos) -> Nanos {
        self.total_slack_absorbed + self.extra_rounds * cycle_time
    }

    fn with_extra_rounds(mut self, extra: u64) -> Self {
        self.extra_rounds += extra;
        self
    }
}

pub fn plan_passive(slack: Nanos) -> SyncPlan {
    SyncPlan {
        final_idle: slack,
        total_slack_absorbed: slack,
        ..SyncPlan::empty(PolicyKind::Passive)
    }
}

pub fn plan_active(slack: Nanos, n_rounds: u32) -> Result<SyncPlan> {
    if n_rounds == 0 {
        return Err(Error::InvalidRequest("active plan needs n_rounds >= 1".into()));
    }
    Ok(SyncPlan {
        per_round_idles: IdleSplit::even(slack, n_rounds)?,
        total_slack_absorbed: slack,
        ..SyncPlan::empty(PolicyKind::Active)
    })
}

/// Active policy that also runs `extra` additional rounds so the slack is
/// spread over `base_rounds + extra` rounds.
pub fn plan_active_extended(slack: Nanos, base_rounds: u32, extra: u32) -> Result<SyncPlan> {
    Ok(plan_active(slack, base_rounds + extra)?.with_extra_rounds(u64::from(extra)))
}

pub fn plan_active_intra(slack: Nanos, n_layer_gaps: u32) -> Result<SyncPlan> {
    if n_layer_gaps == 0 {
        return Err(Error::InvalidRequest(
            "active-intra plan needs at least one layer gap".into(),
        ));
    }
    Ok(SyncPlan {
        intra_round_idles: IdleSplit::even(slack, n_layer_gaps)?,
        total_slack_absorbed: slack,
        ..SyncPlan::empty(PolicyKind::ActiveIntra)
    })
}

/// Rounds run by each patch so both reach a common boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraRoundsSolution {
    /// Rounds of the leading patch.
    pub m: u64,
    /// Rounds of the lagging patch.
    pub n: u64,
}

/// Smallest `m <= m_max` with `m*t_p + slack` divisible by `t_p2`.
///
/// `None` when the cycle times are equal or no such `m` exists in range.
pub fn solve_extra_rounds(
    t_p: Nanos,
    t_p2: Nanos,
    slack: Nanos,
    m_max: u64,
) -> Option<ExtraRoundsSolution> {
    if t_p == t_p2 || t_p2 == 0 {
        return None;
    }
    (0..=m_max).find_map(|m| {
        let span = m * t_p + slack;
        span.is_multiple_of(t_p2).then(|| ExtraRoundsSolution { m, n: span / t_p2 })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridSolution {
    /// Extra rounds of the leading patch.
    pub z: u64,
    pub residual_idle: Nanos,
    pub epsilon: Nanos,
}

/// Idle left over after `z` extra rounds of the leading patch.
pub fn hybrid_residual(t_p: Nanos, t_p2: Nanos, slack: Nanos, z: u64) -> Nanos {
    let span = z * t_p + slack;
    (t_p2 - span % t_p2) % t_p2
}

/// Hybrid policy solver.
///
/// Among `z` in `0..=z_max` whose residual idle is below `epsilon`, returns the
/// one with the smallest residual (smallest `z` on ties).
pub fn solve_hybrid(
    t_p: Nanos,
    t_p2: Nanos,
    slack: Nanos,
    epsilon: Nanos,
    z_max: u64,
) -> Result<Option<HybridSolution>> {
    if t_p == t_p2 {
        return Err(Error::DegenerateInput(format!(
            "hybrid needs distinct cycle times, both are {t_p} ns; use active or passive"
        )));
    }
    if epsilon == 0 || t_p2 == 0 {
        return Err(Error::InvalidRequest(
            "hybrid needs epsilon > 0 and a positive lagging cycle time".into(),
        ));
    }
    let mut best: Option<HybridSolution> = None;
    for z in 0..=z_max {
        let residual_idle = hybrid_residual(t_p, t_p2, slack, z);
        if residual_idle >= epsilon {
            continue;
        }
        if best.is_none_or(|b| residual_idle < b.residual_idle) {
            best = Some(HybridSolution {
                z,
                residual_idle,
                epsilon,
            });
        }
    }
    Ok(best)
}

/// Knobs shared by the plan builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanParams {
    /// Rounds Active spreads the slack over.
    pub active_rounds: u32,
    pub layer_gaps: u32,
    pub epsilon: Nanos,
    pub z_max: u64,
    pub m_max: u64,
}

impl PlanParams {
    /// Defaults for a distance-`d` experiment: Active spreads over `d + 1` rounds.
    pub fn for_distance(d: u32) -> Self {
        Self {
            active_rounds: d + 1,
            ..Self::default()
        }
    }
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            active_rounds: 4,
            layer_gaps: INTRA_ROUND_GAPS,
            epsilon: DEFAULT_EPSILON_NS,
            z_max: DEFAULT_Z_MAX,
            m_max: DEFAULT_M_MAX,
        }
    }
}

pub fn plan_extra_rounds(t_p: Nanos, t_p2: Nanos, slack: Nanos, m_max: u64) -> Result<SyncPlan> {
    if t_p == t_p2 {
        return Err(Error::DegenerateInput(format!(
            "extra rounds cannot synchronize patches with equal cycle times ({t_p} ns)"
        )));
    }
    let sol = solve_extra_rounds(t_p, t_p2, slack, m_max).ok_or_else(|| {
        Error::InvalidPlan(format!(
            "no integral extra-round solution for T_P={t_p}, T_P2={t_p2}, slack={slack} within {m_max} rounds"
        ))
    })?;
    Ok(SyncPlan {
        extra_rounds: sol.m,
        ..SyncPlan::empty(PolicyKind::ExtraRounds)
    })
}

/// Hybrid plan: `z` extra rounds with the residual idle spread Active-style over
/// `base_rounds + z` rounds.
pub fn plan_hybrid(
    t_p: Nanos,
    t_p2: Nanos,
    slack: Nanos,
    params: &PlanParams,
    base_rounds: u32,
) -> Result<SyncPlan> {
    let sol = solve_hybrid(t_p, t_p2, slack, params.epsilon, params.z_max)?.ok_or_else(|| {
        Error::InvalidPlan(format!(
            "no hybrid solution for T_P={t_p}, T_P2={t_p2}, slack={slack}, epsilon={}, z_max={}",
            params.epsilon, params.z_max
        ))
    })?;
    let rounds = base_rounds + sol.z as u32;
    Ok(SyncPlan {
        policy: PolicyKind::Hybrid,
        per_round_idles: IdleSplit::even(sol.residual_idle, rounds.max(1))?,
        extra_rounds: sol.z,
        total_slack_absorbed: sol.residual_idle,
        ..SyncPlan::empty(PolicyKind::Hybrid)
    })
}

/// Plan for a leading patch that must absorb `raw` ns (its next boundary plus
/// `raw` is the lagging patch's next boundary).
///
/// Idle-based policies absorb the slack reduced modulo the leading cycle time
/// and run the whole cycles as ordinary rounds. Round-based policies align with
/// some later boundary of the lagging patch; their solvers take the phase the
/// lagging patch is ahead by, `(-raw) mod t_lag`.
pub fn plan_pair(
    policy: PolicyKind,
    t_lead: Nanos,
    t_lag: Nanos,
    raw: Nanos,
    params: &PlanParams,
) -> Result<SyncPlan> {
    let (full, residual) = if raw < t_lead { (0, raw) } else { (raw / t_lead, raw % t_lead) };
    Ok(match policy {
        PolicyKind::Passive => plan_passive(residual).with_extra_rounds(full),
        PolicyKind::Active => plan_active(residual, params.active_rounds)?.with_extra_rounds(full),
        PolicyKind::ActiveIntra => {
            plan_active_intra(residual, params.layer_gaps)?.with_extra_rounds(full)
        }
        PolicyKind::ExtraRounds => {
            if raw == 0 {
                return Ok(SyncPlan::empty(policy));
            }
            plan_extra_rounds(t_lead, t_lag, (t_lag - raw % t_lag) % t_lag, params.m_max)?
        }
        PolicyKind::Hybrid => {
            if raw == 0 {
                return Ok(SyncPlan::empty(policy));
            }
            plan_hybrid(
                t_lead,
                t_lag,
                (t_lag - raw % t_lag) % t_lag,
                params,
                params.active_rounds,
            )?
        }
    })
}

/// Synchronize `k` patches: every patch is planned pairwise against the most
/// lagging one. The pairwise plans are independent of each other.
pub fn plan_k_sync(
    states: &[PatchTimingState],
    t_now: Nanos,
    policy: PolicyKind,
    params: &PlanParams,
) -> Result<Vec<(PatchId, SyncPlan)>> {
    plan_from_slack(&compute_slack(states, t_now)?, policy, params)
}

/// Per-patch plans for an already computed slack assignment.
pub fn plan_from_slack(
    slack: &SlackAssignment,
    policy: PolicyKind,
    params: &PlanParams,
) -> Result<Vec<(PatchId, SyncPlan)>> {
    let t_lag = slack.lagging().cycle_time;
    slack
        .entries
        .iter()
        .map(|e| {
            let plan = if e.patch_id == slack.lagging_patch {
                SyncPlan::empty(policy)
            } else {
                plan_pair(policy, e.cycle_time, t_lag, e.raw(), params)?
            };
            Ok((e.patch_id, plan))
        })
        .collect()
}

/// Probability that a program of `n_ops` operations sees at least one logical
/// error, exactly and under the linear (union-bound) approximation.
pub fn estimate_program_ler(per_op_ler: f64, n_ops: u64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&per_op_ler) {
        return Err(Error::InvalidRequest(format!(
            "per-operation LER must be a probability, got {per_op_ler}"
        )));
    }
    let n = n_ops as f64;
    let exact = if per_op_ler == 1.0 {
        if n_ops == 0 {
            0.0
        } else {
            1.0
        }
    } else {
        -(n * (-per_op_ler).ln_1p()).exp_m1()
    };
    let linear = (n * per_op_ler).min(1.0);
    Ok((exact, linear))
}

/// Runtime policy choice: Hybrid whenever it has a solution, Active otherwise.
pub fn select_policy(
    t_p: Nanos,
    t_p2: Nanos,
    slack: Nanos,
    epsilon: Nanos,
    z_max: u64,
) -> PolicyKind {
    if t_p == t_p2 {
        return PolicyKind::Active;
    }
    match solve_hybrid(t_p, t_p2, slack, epsilon, z_max) {
        Ok(Some(_)) => PolicyKind::Hybrid,
        _ => PolicyKind::Active,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::PatchTimingState;
    use proptest::prelude::*;

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn passive_examples() {
        assert!(plan_passive(0).is_empty());
        let p = plan_passive(500);
        assert_eq!(p.final_idle, 500);
        assert_eq!(p.per_round_idles.len(), 0);
        assert_eq!(plan_passive(1000).total_slack_absorbed, 1000);
    }

    #[test]
    fn active_examples() {
        assert_eq!(plan_active(1000, 8).unwrap().per_round_idles.to_vec(), vec![125; 8]);
        assert_eq!(
            plan_active(500, 8).unwrap().per_round_idles.to_vec(),
            vec![63, 63, 63, 63, 62, 62, 62, 62]
        );
        assert_eq!(plan_active(0, 3).unwrap().per_round_idles.to_vec(), vec![0; 3]);
        assert!(plan_active(10, 0).is_err());
        let ext = plan_active_extended(1000, 4, 4).unwrap();
        assert_eq!(ext.extra_rounds, 4);
        assert_eq!(ext.per_round_idles.to_vec(), vec![125; 8]);
    }

    #[test]
    fn active_intra_examples() {
        assert_eq!(
            plan_active_intra(500, 5).unwrap().intra_round_idles.to_vec(),
            vec![100; 5]
        );
        assert_eq!(
            plan_active_intra(7, 5).unwrap().intra_round_idles.to_vec(),
            vec![2, 2, 1, 1, 1]
        );
        assert_eq!(
            plan_active_intra(0, 5).unwrap().intra_round_idles.to_vec(),
            vec![0; 5]
        );
    }

    #[test]
    fn extra_rounds_examples() {
        assert_eq!(
            solve_extra_rounds(1000, 1325, 1000, 100),
            Some(ExtraRoundsSolution { m: 52, n: 40 })
        );
        assert_eq!(solve_extra_rounds(1000, 1000, 500, 100), None);
        assert_eq!(
            solve_extra_rounds(1000, 1100, 500, 100),
            Some(ExtraRoundsSolution { m: 5, n: 5 })
        );
    }

    #[test]
    fn hybrid_examples() {
        assert_eq!(
            solve_hybrid(1000, 1325, 1000, 400, 5).unwrap(),
            Some(HybridSolution { z: 4, residual_idle: 300, epsilon: 400 })
        );
        assert_eq!(
            solve_hybrid(1000, 1325, 800, 200, 5).unwrap(),
            Some(HybridSolution { z: 3, residual_idle: 175, epsilon: 200 })
        );
        assert_eq!(
            solve_hybrid(1000, 1325, 0, 400, 5).unwrap(),
            Some(HybridSolution { z: 0, residual_idle: 0, epsilon: 400 })
        );
        assert!(matches!(
            solve_hybrid(1000, 1000, 10, 400, 5),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn select_policy_examples() {
        assert_eq!(select_policy(1000, 1000, 500, 400, 5), PolicyKind::Active);
        assert_eq!(select_policy(1000, 1325, 1000, 400, 5), PolicyKind::Hybrid);
        assert_eq!(select_policy(1000, 1013, 999, 1, 0), PolicyKind::Active);
    }

    #[test]
    fn program_ler_examples() {
        assert_eq!(estimate_program_ler(0.0, 12345).unwrap(), (0.0, 0.0));
        let (e, l) = estimate_program_ler(1e-6, 1).unwrap();
        assert!((e - 1e-6).abs() < 1e-18);
        assert_eq!(l, 1e-6);
        let (e, l) = estimate_program_ler(1e-6, 100_000).unwrap();
        // 1 - exp(-0.1) = 0.09516258...
        assert!((e - 0.095_162_58).abs() < 1e-6, "{e}");
        assert!((l - 0.1).abs() < 1e-15);
        assert!(estimate_program_ler(1.5, 1).is_err());
    }

    fn states_with_remaining(rem: &[u64], t: u64, t_now: u64) -> Vec<PatchTimingState> {
        rem.iter()
            .enumerate()
            .map(|(i, &r)| PatchTimingState::new(PatchId(i as u32), t, t_now + r - t))
            .collect()
    }

    #[test]
    fn k_sync_examples() {
        let params = PlanParams { active_rounds: 4, ..Default::default() };
        let plans = plan_k_sync(
            &states_with_remaining(&[200, 700, 450], 1000, 10_000),
            10_000,
            PolicyKind::Active,
            &params,
        )
        .unwrap();
        let absorbed: Vec<_> = plans.iter().map(|(_, p)| p.total_slack_absorbed).collect();
        assert_eq!(absorbed, vec![500, 0, 250]);
        assert!(plans[1].1.is_empty());
        assert_eq!(plans[0].1.per_round_idles.to_vec(), vec![125; 4]);

        let aligned = states_with_remaining(&[300; 5], 1000, 10_000);
        let plans = plan_k_sync(&aligned, 10_000, PolicyKind::Passive, &params).unwrap();
        assert_eq!(plans.len(), 5);
        assert!(plans.iter().all(|(_, p)| p.is_empty()));

        let two = states_with_remaining(&[100, 600], 1000, 10_000);
        let plans = plan_k_sync(&two, 10_000, PolicyKind::Passive, &params).unwrap();
        assert_eq!(plans[0].1, plan_passive(500));
    }

    #[test]
    fn k_sync_round_policies_align_with_a_lagging_boundary() {
        // leading patch 1000 ns, lagging 1325 ns, raw slack 325: the lagging patch
        // is 1000 ns ahead in its own cycle.
        let states = vec![
            PatchTimingState::new(PatchId(0), 1000, 0),
            PatchTimingState::new(PatchId(1), 1325, 0),
        ];
        let t_now = 0;
        let params = PlanParams::default();
        let plans = plan_k_sync(&states, t_now, PolicyKind::Hybrid, &params).unwrap();
        let p = plans[0].1;
        assert_eq!((p.extra_rounds, p.total_slack_absorbed), (4, 300));
        let lead_end = 1000 + p.extra_rounds * 1000 + p.total_slack_absorbed;
        assert_eq!(lead_end % 1325, 0);

        let plans = plan_k_sync(&states, t_now, PolicyKind::ExtraRounds, &params).unwrap();
        let p = plans[0].1;
        assert_eq!(p.extra_rounds, 52);
        assert_eq!((1000 + p.extra_rounds * 1000) % 1325, 0);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.as_str().parse::<PolicyKind>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<PolicyKind>(&json).unwrap(), p);
        }
        assert_eq!("ActiveIntra".parse::<PolicyKind>().unwrap(), PolicyKind::ActiveIntra);
        assert!("eager".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn plan_serializes_idles_as_lists() {
        let p = plan_active(500, 8).unwrap();
        let v = serde_json::to_value(p).unwrap();
        assert_eq!(v["per_round_idles"], serde_json::json!([63, 63, 63, 63, 62, 62, 62, 62]));
        let back: SyncPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        let bad = serde_json::json!([1, 5]);
        assert!(serde_json::from_value::<IdleSplit>(bad).is_err());
    }

    /// Brute force over all (m, n) pairs.
    fn brute_extra_rounds(t_p: u64, t_p2: u64, tau: u64, bound: u64) -> Option<(u64, u64)> {
        for m in 0..=bound {
            for n in 0..=bound {
                if n * t_p2 == m * t_p + tau {
                    return Some((m, n));
                }
            }
        }
        None
    }

    #[test]
    fn extra_rounds_matches_brute_force_grid() {
        for t_p in (900..=1400).step_by(25) {
            for t_p2 in (900..=1400).step_by(25) {
                if t_p == t_p2 {
                    continue;
                }
                for tau in (0..=1300).step_by(100) {
                    let got = solve_extra_rounds(t_p, t_p2, tau, 200).map(|s| (s.m, s.n));
                    assert_eq!(got, brute_extra_rounds(t_p, t_p2, tau, 200));
                    assert_eq!(got.is_none(), tau % gcd(t_p, t_p2) != 0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn active_preserves_slack(slack in 0u64..1_000_000, n in 1u32..64) {
            let p = plan_active(slack, n).unwrap();
            let v = p.per_round_idles.to_vec();
            prop_assert_eq!(v.len(), n as usize);
            prop_assert_eq!(v.iter().sum::<u64>(), slack);
            let max = *v.iter().max().unwrap();
            let min = *v.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn hybrid_minimizes_residual(
            t_p in 500u64..2000, t_p2 in 500u64..2000, slack in 0u64..3000,
            eps in 1u64..800, z_max in 0u64..10,
        ) {
            prop_assume!(t_p != t_p2);
            let got = solve_hybrid(t_p, t_p2, slack, eps, z_max).unwrap();
            let qualifying: Vec<_> = (0..=z_max)
                .map(|z| (z, hybrid_residual(t_p, t_p2, slack, z)))
                .filter(|&(_, r)| r < eps)
                .collect();
            match got {
                None => prop_assert!(qualifying.is_empty()),
                Some(sol) => {
                    prop_assert!(sol.residual_idle < eps);
                    for &(z, r) in &qualifying {
                        prop_assert!(sol.residual_idle <= r);
                        if r == sol.residual_idle { prop_assert!(sol.z <= z); }
                    }
                    // residual identity
                    let span = sol.z * t_p + slack;
                    prop_assert_eq!(span.div_ceil(t_p2) * t_p2 - span, sol.residual_idle);
                }
            }
        }

        #[test]
        fn hybrid_monotone_in_epsilon(
            t_p in 500u64..2000, t_p2 in 500u64..2000, slack in 0u64..3000,
            eps in 1u64..800, more in 0u64..800,
        ) {
            prop_assume!(t_p != t_p2);
            let a = solve_hybrid(t_p, t_p2, slack, eps, 5).unwrap();
            let b = solve_hybrid(t_p, t_p2, slack, eps + more, 5).unwrap();
            if let Some(a) = a {
                prop_assert!(b.unwrap().residual_idle <= a.residual_idle);
            }
        }

        #[test]
        fn linear_bounds_exact(p in 0.0f64..=1.0, n in 0u64..10_000_000) {
            let (e, l) = estimate_program_ler(p, n).unwrap();
            prop_assert!(l + 1e-12 >= e);
            prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn k_sync_idle_policies_align_all_patches(
            cycles in prop::collection::vec(500u64..3000, 2..10),
            phases in prop::collection::vec(0u64..10_000, 10),
            t_now in 20_000u64..40_000,
            which in 0usize..3,
        ) {
            let policy = [PolicyKind::Passive, PolicyKind::Active, PolicyKind::ActiveIntra][which];
            let states: Vec<_> = cycles.iter().enumerate()
                .map(|(i, &c)| PatchTimingState::new(PatchId(i as u32), c, phases[i]))
                .collect();
            let plans = plan_k_sync(&states, t_now, policy, &PlanParams::default()).unwrap();
            let mut ends = states.iter().zip(&plans).map(|(s, (id, plan))| {
                assert_eq!(s.patch_id, *id);
                t_now + s.remaining_at(t_now).unwrap() + plan.schedule_delay(s.cycle_time)
            });
            let first = ends.next().unwrap();
            prop_assert!(ends.all(|e| e == first));
        }
    }
}
