//! Experiment drivers: policy sweeps over surgery circuits, the qLDPC and
//! cultivation slack case studies, decoding-latency and planning-time reports.

use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::circuits::{gen_lattice_surgery, Basis, SurgeryExperiment};
use crate::decoders::{latency_speedup, run_ler, DecoderKind, LerReport, MissLatency};
use crate::error::{Error, Result};
use crate::noise::{annotate, NoiseModel};
use crate::policies::{
    plan_active_extended, plan_active_intra, plan_extra_rounds, plan_hybrid, plan_passive, PlanParams,
    PolicyKind, SyncPlan, DEFAULT_EPSILON_NS, DEFAULT_M_MAX, DEFAULT_Z_MAX, INTRA_ROUND_GAPS,
};
use crate::sim::HammingProfile;
use crate::syncengine::{measure_planning_time, PlanningTimeStats};
use crate::timing::{slack_after_rounds, LatencyProfile, Nanos};

/// A built-in profile name or an inline profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Inline(LatencyProfile),
}

impl ProfileRef {
    pub fn resolve(&self) -> Result<LatencyProfile> {
        match self {
            ProfileRef::Named(n) => LatencyProfile::builtin(n).ok_or_else(|| Error::Config {
                field: "profile".into(),
                reason: format!(
                    "unknown profile `{n}` (built-in: {})",
                    LatencyProfile::builtin_names().join(", ")
                ),
            }),
            ProfileRef::Inline(p) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }
}

fn default_basis() -> Basis {
    Basis::Z
}
fn default_p() -> f64 {
    1e-3
}
fn default_epsilon() -> Nanos {
    DEFAULT_EPSILON_NS
}
fn default_z_max() -> u64 {
    DEFAULT_Z_MAX
}
fn default_decoder() -> DecoderKind {
    DecoderKind::UnionFind
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: ProfileRef,
    pub d: u32,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    #[serde(default = "default_p")]
    pub p: f64,
    pub tau_ns: Vec<Nanos>,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub rounds_before: Option<u32>,
    #[serde(default)]
    pub rounds_after: Option<u32>,
    /// Extra rounds Active spreads its idles over.
    #[serde(default, rename = "extra_R", alias = "extra_r")]
    pub extra_r: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon_ns: Nanos,
    #[serde(default = "default_z_max")]
    pub z_max: u64,
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_decoder")]
    pub decoder: DecoderKind,
    /// Cycle times used by the round-based solvers; default to the profile's
    /// surface-code cycle.
    #[serde(default)]
    pub t_p: Option<Nanos>,
    #[serde(default)]
    pub t_p2: Option<Nanos>,
    /// Observables to report; default is the joint parity of the basis.
    #[serde(default)]
    pub observables: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub reset_errors: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config {
            field: format!("line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::Config {
                field: field.into(),
                reason,
            })
        };
        self.profile.resolve()?;
        if self.d < 3 || self.d.is_multiple_of(2) {
            return bad("d", format!("distance must be odd and >= 3, got {}", self.d));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p", format!("{} is not a probability", self.p));
        }
        if self.shots == 0 {
            return bad("shots", "must be at least 1".into());
        }
        if self.tau_ns.is_empty() {
            return bad("tau_ns", "needs at least one slack value".into());
        }
        if self.policies.is_empty() {
            return bad("policies", "needs at least one policy".into());
        }
        if self.rounds_before == Some(0) || self.rounds_after == Some(0) {
            return bad("rounds_before/rounds_after", "must be at least 1".into());
        }
        if self.t_p == Some(0) || self.t_p2 == Some(0) {
            return bad("t_p/t_p2", "cycle times must be positive".into());
        }
        let known = [
            self.basis.single_observable().to_string(),
            match self.basis {
                Basis::Z => "X_P2".to_string(),
                Basis::X => "Z_P2".to_string(),
            },
            self.basis.joint_observable().to_string(),
        ];
        for o in self.observables() {
            if !known.contains(&o) {
                return bad(
                    "observables",
                    format!("`{o}` is not measured by {}-basis surgery (available: {})", self.basis, known.join(", ")),
                );
            }
        }
        Ok(())
    }

    pub fn observables(&self) -> Vec<String> {
        self.observables
            .clone()
            .unwrap_or_else(|| vec![self.basis.joint_observable().to_string()])
    }

    pub fn rounds_before(&self) -> u32 {
        self.rounds_before.unwrap_or(self.d + 1)
    }

    pub fn rounds_after(&self) -> u32 {
        self.rounds_after.unwrap_or(self.d + 1)
    }

    pub fn plan_params(&self) -> PlanParams {
        PlanParams {
            active_rounds: self.rounds_before(),
            layer_gaps: INTRA_ROUND_GAPS,
            epsilon: self.epsilon_ns,
            z_max: self.z_max,
            m_max: DEFAULT_M_MAX,
        }
    }

    pub fn profile_name(&self) -> String {
        match &self.profile {
            ProfileRef::Named(n) => n.clone(),
            ProfileRef::Inline(p) => p.name.clone(),
        }
    }
}

/// Plan for one sweep point. Idle policies absorb `tau` directly; the
/// round-based solvers receive `tau` as their slack argument.
pub fn plan_for_point(
    policy: PolicyKind,
    tau: Nanos,
    t_p: Nanos,
    t_p2: Nanos,
    params: &PlanParams,
    extra_r: u32,
) -> Result<SyncPlan> {
    match policy {
        PolicyKind::Passive => Ok(plan_passive(tau)),
        PolicyKind::Active => plan_active_extended(tau, params.active_rounds, extra_r),
        PolicyKind::ActiveIntra => plan_active_intra(tau, params.layer_gaps),
        PolicyKind::ExtraRounds => plan_extra_rounds(t_p, t_p2, tau, params.m_max),
        PolicyKind::Hybrid => plan_hybrid(t_p, t_p2, tau, params, params.active_rounds),
    }
}

/// Builds, annotates, samples and decodes one surgery point.
pub fn run_point(
    cfg: &ExperimentConfig,
    plan: &SyncPlan,
    shots: u64,
    seed: u64,
) -> Result<LerReport> {
    let profile = cfg.profile.resolve()?;
    let exp = SurgeryExperiment {
        distance: cfg.d,
        basis: cfg.basis,
        rounds_before: cfg.rounds_before(),
        rounds_after: cfg.rounds_after(),
        profile: profile.clone(),
        plan: *plan,
    };
    let circuit = gen_lattice_surgery(&exp)?;
    let mut model = NoiseModel::new(cfg.p, profile)?;
    model.reset_errors = cfg.reset_errors;
    let noisy = annotate(&circuit, &model)?;
    run_ler(&noisy, cfg.decoder, shots, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LerRow {
    pub d: u32,
    pub basis: String,
    pub policy: String,
    pub tau_ns: Nanos,
    pub profile: String,
    pub observable: String,
    pub shots: u64,
    pub failures: u64,
    pub ler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub d: u32,
    pub basis: String,
    pub policy: String,
    pub tau_ns: Nanos,
    pub profile: String,
    pub observable: String,
    /// `LER_Passive / LER_policy`; empty when the policy saw no failures.
    pub ratio: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub policy: String,
    pub tau_ns: Nanos,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub policy: PolicyKind,
    pub tau_ns: Nanos,
    pub plan: SyncPlan,
    pub hamming: HammingProfile,
    pub lut_hit_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<LerRow>,
    pub ratios: Vec<RatioRow>,
    pub errors: Vec<ErrorRow>,
    pub points: Vec<PointSummary>,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn write_rows(&self, out: impl Write) -> Result<()> {
        write_csv(out, &self.rows)
    }

    pub fn write_ratios(&self, out: impl Write) -> Result<()> {
        write_csv(out, &self.ratios)
    }

    pub fn write_errors(&self, out: impl Write) -> Result<()> {
        write_csv(out, &self.errors)
    }
}

pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every (policy, tau) point in config order. Failing points are
/// recorded and skipped.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let profile = cfg.profile.resolve()?;
    let cycle = profile.surface_cycle_time();
    let t_p = cfg.t_p.unwrap_or(cycle);
    let t_p2 = cfg.t_p2.unwrap_or(cycle);
    let params = cfg.plan_params();
    let observables = cfg.observables();
    let profile_name = cfg.profile_name();
    let mut res = SweepResult::default();
    // (tau, observable) -> Passive LER
    let mut passive: Vec<(Nanos, String, f64)> = Vec::new();
    let mut pending: Vec<(PolicyKind, Nanos, String, f64)> = Vec::new();
    for &policy in &cfg.policies {
        for &tau in &cfg.tau_ns {
            let outcome = plan_for_point(policy, tau, t_p, t_p2, &params, cfg.extra_r)
                .and_then(|plan| Ok((plan, run_point(cfg, &plan, cfg.shots, cfg.seed)?)));
            let (plan, report) = match outcome {
                Ok(x) => x,
                Err(e) => {
                    res.errors.push(ErrorRow {
                        policy: policy.as_str().into(),
                        tau_ns: tau,
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            for name in &observables {
                let Some(est) = report.get(name) else {
                    res.errors.push(ErrorRow {
                        policy: policy.as_str().into(),
                        tau_ns: tau,
                        error: format!("observable `{name}` missing from circuit"),
                    });
                    continue;
                };
                res.rows.push(LerRow {
                    d: cfg.d,
                    basis: cfg.basis.to_string(),
                    policy: policy.as_str().into(),
                    tau_ns: tau,
                    profile: profile_name.clone(),
                    observable: name.clone(),
                    shots: est.shots,
                    failures: est.failures,
                    ler: est.ler,
                    ci_low: est.ci_low,
                    ci_high: est.ci_high,
                    seed: cfg.seed,
                });
                if policy == PolicyKind::Passive {
                    passive.push((tau, name.clone(), est.ler));
                } else {
                    pending.push((policy, tau, name.clone(), est.ler));
                }
            }
            res.points.push(PointSummary {
                policy,
                tau_ns: tau,
                plan,
                hamming: report.hamming.clone(),
                lut_hit_rate: report.lut_hit_rate(),
            });
        }
    }
    for (policy, tau, name, ler) in pending {
        if let Some(&(_, _, base)) = passive.iter().find(|(t, n, _)| *t == tau && *n == name) {
            res.ratios.push(RatioRow {
                d: cfg.d,
                basis: cfg.basis.to_string(),
                policy: policy.as_str().into(),
                tau_ns: tau,
                profile: profile_name.clone(),
                observable: name,
                ratio: (ler > 0.0).then(|| base / ler),
                seed: cfg.seed,
            });
        }
    }
    Ok(res)
}

// ---------------------------------------------------------------------------
// case studies

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QldpcRow {
    pub round: u64,
    pub slack_ns: Nanos,
}

pub fn run_case_qldpc(t_surface: Nanos, t_qldpc: Nanos, max_rounds: u64) -> Result<Vec<QldpcRow>> {
    if t_qldpc <= t_surface {
        return Err(Error::InvalidRequest(format!(
            "the qLDPC cycle ({t_qldpc} ns) must be longer than the surface cycle ({t_surface} ns)"
        )));
    }
    (0..=max_rounds)
        .map(|round| {
            Ok(QldpcRow {
                round,
                slack_ns: slack_after_rounds(round, t_surface, t_qldpc)?,
            })
        })
        .collect()
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CultivationScenario {
    pub attempt_duration_ns: Nanos,
    pub success_prob_per_attempt: f64,
    pub consumer_cycle_ns: Nanos,
    pub n_samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl CultivationScenario {
    pub fn validate(&self) -> Result<()> {
        let q = self.success_prob_per_attempt;
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Config {
                field: "success_prob_per_attempt".into(),
                reason: format!("{q} outside (0, 1]"),
            });
        }
        if self.consumer_cycle_ns == 0 || self.attempt_duration_ns == 0 {
            return Err(Error::Config {
                field: "attempt_duration_ns/consumer_cycle_ns".into(),
                reason: "durations must be positive".into(),
            });
        }
        if self.n_samples == 0 || self.bins == 0 {
            return Err(Error::Config {
                field: "n_samples/bins".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo_ns: Nanos,
    pub hi_ns: Nanos,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CultivationStats {
    pub mean_ns: f64,
    pub median_ns: f64,
    pub histogram: Vec<HistogramBin>,
    /// The retry process is a geometric stand-in, not measured cultivation data.
    pub model: String,
}

/// Slack a consumer sees when a cultivation factory needs a geometric number
/// of attempts.
pub fn run_case_cultivation(s: &CultivationScenario) -> Result<CultivationStats> {
    s.validate()?;
    let geo = Geometric::new(s.success_prob_per_attempt)
        .map_err(|e| Error::InvalidRequest(format!("geometric: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let c = s.consumer_cycle_ns;
    let mut slacks: Vec<Nanos> = (0..s.n_samples)
        .map(|_| {
            let attempts = u128::from(geo.sample(&mut rng)) + 1;
            (attempts * u128::from(s.attempt_duration_ns) % u128::from(c)) as Nanos
        })
        .collect();
    slacks.sort_unstable();
    let n = slacks.len();
    let median = if n % 2 == 1 {
        slacks[n / 2] as f64
    } else {
        (slacks[n / 2 - 1] + slacks[n / 2]) as f64 / 2.0
    };
    let mean = slacks.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
    let width = c.div_ceil(s.bins as u64).max(1);
    let mut histogram: Vec<HistogramBin> = (0..s.bins as u64)
        .map(|b| HistogramBin {
            lo_ns: b * width,
            hi_ns: ((b + 1) * width).min(c),
            count: 0,
        })
        .collect();
    for &x in &slacks {
        histogram[((x / width) as usize).min(s.bins - 1)].count += 1;
    }
    Ok(CultivationStats {
        mean_ns: mean,
        median_ns: median,
        histogram,
        model: "geometric retries (parameterized stand-in)".into(),
    })
}

// ---------------------------------------------------------------------------
// decoding latency

/// LUT capacity used at distance `d` (3 KB, 3 MB, 30 MB for d = 3, 5, 7).
pub fn default_lut_capacity(d: u32) -> usize {
    match d {
        0..=3 => 3 * 1024,
        4..=5 => 3 * 1024 * 1024,
        _ => 30 * 1024 * 1024,
    }
}

fn default_t_hit() -> f64 {
    20.0
}
fn default_trials() -> u64 {
    1_000_000
}
fn default_latency_tau() -> Nanos {
    1000
}
fn default_latency_shots() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub d: u32,
    #[serde(default = "default_profile")]
    pub profile: ProfileRef,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_latency_tau")]
    pub tau_ns: Nanos,
    #[serde(default = "default_latency_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lut_capacity_bytes: Option<usize>,
    #[serde(default = "default_t_hit")]
    pub t_hit_ns: f64,
    #[serde(default)]
    pub miss: MissLatency,
    #[serde(default = "default_trials")]
    pub n_trials: u64,
    /// Hit rates supplied directly skip the simulation.
    #[serde(default)]
    pub hit_passive: Option<f64>,
    #[serde(default)]
    pub hit_active: Option<f64>,
}

fn default_profile() -> ProfileRef {
    ProfileRef::Named("google".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub d: u32,
    pub hit_passive: f64,
    pub hit_active: f64,
    pub speedup: f64,
}

/// Speedup of Active over Passive decoding latency. Hit rates come from the
/// config or from LUT counters of simulated Passive and Active surgery runs.
pub fn run_latency(cfg: &LatencyConfig) -> Result<LatencyRow> {
    let (hp, ha) = match (cfg.hit_passive, cfg.hit_active) {
        (Some(hp), Some(ha)) => (hp, ha),
        (None, None) => {
            let capacity = cfg.lut_capacity_bytes.unwrap_or_else(|| default_lut_capacity(cfg.d));
            let exp = ExperimentConfig {
                profile: cfg.profile.clone(),
                d: cfg.d,
                basis: Basis::Z,
                p: cfg.p,
                tau_ns: vec![cfg.tau_ns],
                policies: vec![PolicyKind::Passive, PolicyKind::Active],
                rounds_before: None,
                rounds_after: None,
                extra_r: 0,
                epsilon_ns: DEFAULT_EPSILON_NS,
                z_max: DEFAULT_Z_MAX,
                shots: cfg.shots,
                seed: cfg.seed,
                output: None,
                decoder: DecoderKind::Lut {
                    capacity_bytes: capacity,
                },
                t_p: None,
                t_p2: None,
                observables: None,
                reset_errors: true,
            };
            exp.validate()?;
            let params = exp.plan_params();
            let hit = |policy| -> Result<f64> {
                let plan = plan_for_point(policy, cfg.tau_ns, 1, 2, &params, 0)?;
                let r = run_point(&exp, &plan, cfg.shots, cfg.seed)?;
                Ok(r.lut_hit_rate().unwrap_or(0.0))
            };
            (hit(PolicyKind::Passive)?, hit(PolicyKind::Active)?)
        }
        _ => {
            return Err(Error::Config {
                field: "hit_passive/hit_active".into(),
                reason: "give both hit rates or neither".into(),
            })
        }
    };
    let speedup = latency_speedup(hp, ha, cfg.t_hit_ns, &cfg.miss, cfg.n_trials, cfg.seed)?;
    Ok(LatencyRow {
        d: cfg.d,
        hit_passive: hp,
        hit_active: ha,
        speedup,
    })
}

// ---------------------------------------------------------------------------
// planning time

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UarchRow {
    pub k: usize,
    pub median_ns: f64,
    pub mean_ns: f64,
    pub p99_ns: f64,
}

impl From<PlanningTimeStats> for UarchRow {
    fn from(s: PlanningTimeStats) -> Self {
        Self {
            k: s.k,
            median_ns: s.median_ns,
            mean_ns: s.mean_ns,
            p99_ns: s.p99_ns,
        }
    }
}

pub fn run_uarch(ks: &[usize], repetitions: usize, policy: PolicyKind, seed: u64) -> Result<Vec<UarchRow>> {
    ks.iter()
        .map(|&k| Ok(measure_planning_time(k, repetitions, policy, seed)?.into()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"profile": "google", "d": 3, "tau_ns": [500, 1000],
                "policies": ["passive", "active"], "shots": 2000, "seed": 7}"#,
        )
        .unwrap()
    }

    #[test]
    fn config_round_trip() {
        let cfg = small_config();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(cfg.rounds_before(), 4);
        assert_eq!(cfg.observables(), ["XPXP2"]);
        let inline = r#"{"profile": {"name": "mine", "t_1q": 10, "t_2q": 20, "t_meas": 300,
            "t_reset": 50, "T1": 10000, "T2": 15000}, "d": 3, "tau_ns": [0],
            "policies": ["hybrid"], "shots": 1}"#;
        let c = ExperimentConfig::from_json(inline).unwrap();
        assert_eq!(c.profile.resolve().unwrap().surface_cycle_time(), 20 + 80 + 350);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn config_rejections() {
        let base = r#"{"profile": "google", "d": 3, "tau_ns": [500], "policies": ["passive"], "shots": 0}"#;
        match ExperimentConfig::from_json(base) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "shots"),
            other => panic!("{other:?}"),
        }
        let typo = r#"{"profile": "google", "d": 3, "tau_ns": [500], "policies": ["passive"], "shot": 5}"#;
        match ExperimentConfig::from_json(typo) {
            Err(Error::Config { field, .. }) => assert!(field.starts_with("line 1")),
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"profile": "nope", "d": 3, "tau_ns": [500], "policies": ["passive"], "shots": 5}"#;
        assert!(ExperimentConfig::from_json(unknown).is_err());
    }

    #[test]
    fn sweep_row_contract() {
        let res = run_sweep(&small_config()).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.ratios.len(), 2);
        assert!(res.is_complete());
        let mut buf = Vec::new();
        res.write_rows(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("d,basis,policy,tau_ns,profile,observable,shots,failures,ler,ci_low,ci_high,seed\n"));
    }

    #[test]
    fn hybrid_with_equal_cycles_is_a_row_error() {
        let mut cfg = small_config();
        cfg.policies = vec![PolicyKind::Hybrid, PolicyKind::Passive];
        cfg.tau_ns = vec![500];
        cfg.shots = 100;
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.errors.len(), 1);
        assert_eq!(res.rows.len(), 1);
        assert!(!res.is_complete());
    }

    #[test]
    fn qldpc_rows() {
        let rows = run_case_qldpc(1100, 1226, 30).unwrap();
        assert_eq!(rows[0].slack_ns, 0);
        assert_eq!(rows[10].slack_ns, 160);
        assert!(run_case_qldpc(1100, 1100, 3).is_err());
    }

    #[test]
    fn cultivation_edge_cases() {
        let s = CultivationScenario {
            attempt_duration_ns: 2000,
            success_prob_per_attempt: 1.0,
            consumer_cycle_ns: 1100,
            n_samples: 100,
            seed: 1,
            bins: 11,
        };
        let r = run_case_cultivation(&s).unwrap();
        assert_eq!(r.mean_ns, 900.0);
        assert_eq!(r.median_ns, 900.0);
        assert_eq!(r.histogram.iter().map(|b| b.count).sum::<u64>(), 100);
        let same = CultivationScenario { attempt_duration_ns: 1100, ..s.clone() };
        assert_eq!(run_case_cultivation(&same).unwrap().mean_ns, 0.0);
        let bad = CultivationScenario { success_prob_per_attempt: 0.0, ..s };
        assert!(run_case_cultivation(&bad).is_err());
    }

    #[test]
    fn latency_with_given_rates() {
        let cfg: LatencyConfig = serde_json::from_str(
            r#"{"d": 5, "hit_passive": 0.5, "hit_active": 0.9, "miss": {"kind": "constant", "ns": 1000.0}, "n_trials": 100000}"#,
        )
        .unwrap();
        let row = run_latency(&cfg).unwrap();
        assert!((row.speedup - 510.0 / 118.0).abs() < 0.05);
    }
}
