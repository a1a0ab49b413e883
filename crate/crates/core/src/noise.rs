//! Circuit-level noise: depolarizing channels after gates, classical flips on
//! measurements and resets, and T1/T2 idling channels on every idle window.

use serde::{Deserialize, Serialize};

use crate::circuits::{CircuitIR, Op, OpKind};
use crate::error::{Error, Result};
use crate::timing::{LatencyProfile, Nanos};

/// Pauli-twirled amplitude and phase damping over one idle window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdlingChannel {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub gap: Nanos,
}

impl IdlingChannel {
    pub fn is_zero(&self) -> bool {
        self.p_x == 0.0 && self.p_y == 0.0 && self.p_z == 0.0
    }

    pub fn total(&self) -> f64 {
        self.p_x + self.p_y + self.p_z
    }
}

pub fn idling_channel(gap: Nanos, t1: Nanos, t2: Nanos) -> Result<IdlingChannel> {
    if t1 == 0 || t2 == 0 {
        return Err(Error::InvalidProfile {
            name: String::new(),
            reason: "T1 and T2 must be positive".into(),
        });
    }
    if t2 > 2 * t1 {
        return Err(Error::InvalidProfile {
            name: String::new(),
            reason: format!("T2 = {t2} exceeds 2*T1 = {}", 2 * t1),
        });
    }
    let g = gap as f64;
    let p_x = -(-g / t1 as f64).exp_m1() / 4.0;
    let p_z = (-(-g / t2 as f64).exp_m1() / 2.0 - p_x).max(0.0);
    Ok(IdlingChannel {
        p_x,
        p_y: p_x,
        p_z,
        gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
    pub profile: LatencyProfile,
    #[serde(default = "default_true")]
    pub reset_errors: bool,
}

fn default_true() -> bool {
    true
}

impl NoiseModel {
    pub fn new(p: f64, profile: LatencyProfile) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidRequest(format!("noise strength {p} outside [0, 1]")));
        }
        profile.validate()?;
        Ok(Self {
            p,
            profile,
            reset_errors: true,
        })
    }

    pub fn without_reset_errors(mut self) -> Self {
        self.reset_errors = false;
        self
    }

    fn idle(&self, gap: Nanos) -> IdlingChannel {
        // validated at construction
        idling_channel(gap, self.profile.t1, self.profile.t2).expect("profile validated")
    }
}

/// Adds noise channels to a timed circuit. Annotating twice is rejected.
pub fn annotate(circuit: &CircuitIR, model: &NoiseModel) -> Result<CircuitIR> {
    if circuit.annotated {
        return Err(Error::AlreadyAnnotated);
    }
    if !(0.0..=1.0).contains(&model.p) {
        return Err(Error::InvalidRequest(format!("noise strength {} outside [0, 1]", model.p)));
    }
    model.profile.validate()?;
    let p = model.p;
    let mut free_at: Vec<Option<Nanos>> = vec![None; circuit.n_qubits as usize];
    let mut ops: Vec<Op> = Vec::with_capacity(circuit.ops.len() * 2);
    let push = |ops: &mut Vec<Op>, kind: OpKind, targets: Vec<u32>, at: Nanos| {
        ops.push(Op {
            kind,
            targets,
            start: at,
            duration: 0,
        })
    };
    let push_idle = |ops: &mut Vec<Op>, q: u32, at: Nanos, gap: Nanos| {
        let ch = model.idle(gap);
        if !ch.is_zero() {
            push(
                ops,
                OpKind::PauliChannel {
                    px: ch.p_x,
                    py: ch.p_y,
                    pz: ch.p_z,
                },
                vec![q],
                at,
            );
        }
    };
    for op in &circuit.ops {
        if !op.kind.is_timed() {
            ops.push(op.clone());
            continue;
        }
        // waiting time since the qubit's previous op
        for &q in &op.targets {
            if let Some(e) = free_at[q as usize] {
                if op.start > e {
                    push_idle(&mut ops, q, e, op.start - e);
                }
            }
        }
        let end = op.end();
        match op.kind {
            OpKind::Idle => {
                ops.push(op.clone());
                for &q in &op.targets {
                    push_idle(&mut ops, q, end, op.duration);
                }
            }
            OpKind::Hadamard => {
                ops.push(op.clone());
                if p > 0.0 {
                    push(&mut ops, OpKind::Depol1 { p }, op.targets.clone(), end);
                }
            }
            OpKind::Cnot => {
                ops.push(op.clone());
                if p > 0.0 {
                    push(&mut ops, OpKind::Depol2 { p }, op.targets.clone(), end);
                }
            }
            OpKind::Measure { .. } => {
                if p > 0.0 {
                    push(&mut ops, OpKind::Flip { p }, op.targets.clone(), op.start);
                }
                ops.push(op.clone());
            }
            OpKind::MeasureReset { .. } => {
                if p > 0.0 {
                    push(&mut ops, OpKind::Flip { p }, op.targets.clone(), op.start);
                }
                ops.push(op.clone());
                if p > 0.0 && model.reset_errors {
                    push(&mut ops, OpKind::Flip { p }, op.targets.clone(), end);
                }
            }
            OpKind::Reset => {
                ops.push(op.clone());
                if p > 0.0 && model.reset_errors {
                    push(&mut ops, OpKind::Flip { p }, op.targets.clone(), end);
                }
            }
            _ => unreachable!("untimed op kinds handled above"),
        }
        for &q in &op.targets {
            free_at[q as usize] = Some(end);
        }
    }
    Ok(CircuitIR {
        ops,
        annotated: true,
        ..circuit.clone()
    })
}
