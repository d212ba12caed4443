//! File formats: schedule and program JSON, CSV tables, run manifests.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abacus::{ProfileSpec, Readout};
use crate::error::{AbacusError, Result};
use crate::evolve::{Schedule, SidePotentials, Snapshot, Step, StepKind};
use crate::oscillator::{GridState, PhysicalConfig};
use crate::pointint::{ScatteringAmplitudes, SpectrumResult};
use crate::su2core::{BlochVector, Mat2, UnitaryGate};

/// A gate as written in files: a name or an explicit 2×2 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GateSpec {
    Named(String),
    Matrix(Mat2),
}

impl GateSpec {
    /// Names: `I`, `-I`, `NOT` (= `X`, `SIGMA1`), `Y` (`SIGMA2`), `Z`
    /// (`SIGMA3`), `HADAMARD` (`H`), `BLOCH(mu,nu)` with angles in radians.
    pub fn resolve(&self) -> Result<UnitaryGate> {
        match self {
            GateSpec::Matrix(m) => UnitaryGate::new(*m),
            GateSpec::Named(name) => parse_gate_name(name),
        }
    }
}

impl From<UnitaryGate> for GateSpec {
    fn from(g: UnitaryGate) -> Self {
        GateSpec::Matrix(*g.matrix())
    }
}

pub fn parse_gate_name(name: &str) -> Result<UnitaryGate> {
    let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
    let upper = compact.to_ascii_uppercase();
    match upper.as_str() {
        "I" | "+I" | "OPEN_IDENTITY" => return Ok(UnitaryGate::identity()),
        "-I" => return Ok(UnitaryGate::minus_identity()),
        "NOT" | "X" | "SIGMA1" => return Ok(UnitaryGate::sigma1()),
        "Y" | "SIGMA2" => return Ok(UnitaryGate::sigma2()),
        "Z" | "SIGMA3" => return Ok(UnitaryGate::sigma3()),
        "HADAMARD" | "H" => return Ok(UnitaryGate::hadamard()),
        _ => {}
    }
    if let Some(inner) = upper.strip_prefix("BLOCH(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() == 2 {
            let mu: f64 = parts[0].parse().map_err(|_| bad_gate(name))?;
            let nu: f64 = parts[1].parse().map_err(|_| bad_gate(name))?;
            return Ok(BlochVector::from_angles(mu, nu).gate());
        }
    }
    Err(bad_gate(name))
}

fn bad_gate(name: &str) -> AbacusError {
    AbacusError::Parse(format!("unknown gate {name:?}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKindTag {
    GateHalfPeriod,
    ClosedWithPotentials,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFile {
    pub kind: StepKindTag,
    pub gate: GateSpec,
    #[serde(rename = "V_plus", default)]
    pub v_plus: f64,
    #[serde(rename = "V_minus", default)]
    pub v_minus: f64,
    #[serde(rename = "V_zero", default)]
    pub v_zero: f64,
    #[serde(default = "one")]
    pub duration_half_periods: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(default)]
    pub config: PhysicalConfig,
    pub steps: Vec<StepFile>,
}

impl ScheduleFile {
    pub fn into_schedule(self) -> Result<Schedule> {
        self.config.validate()?;
        let mut schedule = Schedule::new(self.config);
        for s in self.steps {
            let gate = s.gate.resolve()?;
            let step = match s.kind {
                StepKindTag::GateHalfPeriod => {
                    if s.v_plus != 0.0 || s.v_minus != 0.0 || s.v_zero != 0.0 || s.duration_half_periods != 1.0 {
                        return Err(AbacusError::Parse(
                            "gate_half_period steps take no potentials and last one half period".into(),
                        ));
                    }
                    Step::gate(gate)
                }
                StepKindTag::ClosedWithPotentials => Step::closed(
                    gate,
                    SidePotentials {
                        v_plus: s.v_plus,
                        v_minus: s.v_minus,
                        v_zero: s.v_zero,
                    },
                    s.duration_half_periods,
                )?,
            };
            schedule.push(match s.label {
                Some(l) => step.with_label(l),
                None => step,
            });
        }
        Ok(schedule)
    }

    pub fn from_schedule(s: &Schedule) -> ScheduleFile {
        let steps = s
            .steps
            .iter()
            .map(|step| {
                let pot = step.potentials();
                StepFile {
                    kind: match step.kind {
                        StepKind::GateHalfPeriod(_) => StepKindTag::GateHalfPeriod,
                        StepKind::ClosedWithPotentials { .. } => StepKindTag::ClosedWithPotentials,
                    },
                    gate: (*step.point_gate()).into(),
                    v_plus: pot.v_plus,
                    v_minus: pot.v_minus,
                    v_zero: pot.v_zero,
                    duration_half_periods: step.duration_half_periods(),
                    label: step.label.clone(),
                }
            })
            .collect();
        ScheduleFile { config: s.cfg, steps }
    }
}

pub fn parse_schedule(text: &str) -> Result<Schedule> {
    let file: ScheduleFile =
        serde_json::from_str(text).map_err(|e| AbacusError::Parse(format!("schedule: {e}")))?;
    file.into_schedule()
}

pub fn read_schedule(path: &Path) -> Result<Schedule> {
    parse_schedule(&std::fs::read_to_string(path)?)
}

pub fn schedule_to_json(s: &Schedule) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ScheduleFile::from_schedule(s))?)
}

/// One instruction of a qubit program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum Instruction {
    Prepare {
        qubit: usize,
        #[serde(default)]
        bit: u8,
        #[serde(default)]
        profile: Option<ProfileSpec>,
    },
    Gate {
        qubit: usize,
        gate: GateSpec,
    },
    Cnot {
        control: usize,
        target: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
    Readout {
        qubit: usize,
    },
}

pub fn parse_program(text: &str) -> Result<Vec<Instruction>> {
    serde_json::from_str(text).map_err(|e| AbacusError::Parse(format!("program: {e}")))
}

/// `x, re ψ₊, im ψ₊, re ψ₋, im ψ₋`.
pub fn grid_state_csv(g: &GridState) -> String {
    let mut out = String::from("x,re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus\n");
    for (j, x) in g.grid.x().iter().enumerate() {
        let (p, m) = (g.psi_plus[j], g.psi_minus[j]);
        let _ = writeln!(out, "{x:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", p.re, p.im, m.re, m.im);
    }
    out
}

pub fn spectrum_csv(s: &SpectrumResult) -> String {
    let mut out = String::from("index,E_over_hbar_omega,residual\n");
    for (n, (e, r)) in s.levels.iter().zip(&s.residuals).enumerate() {
        let _ = writeln!(out, "{n},{e:.15},{r:.3e}");
    }
    out
}

pub fn scatter_csv(rows: &[ScatteringAmplitudes]) -> String {
    let mut out = String::from("k,transmission,reflection,unitarity_residual\n");
    for a in rows {
        let _ = writeln!(
            out,
            "{:.15e},{:.15},{:.15},{:.3e}",
            a.k,
            a.transmission(),
            a.reflection(),
            a.unitarity_residual()
        );
    }
    out
}

pub fn trace_csv(trace: &[Snapshot]) -> String {
    let mut out = String::from("step,label,p_plus,p_minus,norm,relative_phase\n");
    for s in trace {
        let phase = s.relative_phase.map(|p| format!("{p:.15}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:.15},{:.15},{:.15},{}",
            s.step,
            s.label.as_deref().unwrap_or(""),
            s.p_plus,
            s.p_minus,
            s.norm,
            phase
        );
    }
    out
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PhysicalConfig,
    pub engine: String,
    pub grid_nodes: usize,
    pub x_max: f64,
    pub dt: Option<f64>,
    pub truncation: Option<usize>,
    pub seed: u64,
    pub profile: ProfileSpec,
    pub initial_bit: u8,
    pub threshold: f64,
    pub trace: Vec<Snapshot>,
    /// `[re, im]` of the accumulated convention phase.
    pub global_phase: [f64; 2],
    pub final_readout: Readout,
    pub artifacts: Vec<String>,
}
