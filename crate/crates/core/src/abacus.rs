//! The qubit layer.
//!
//! `|0⟩ = (f, 0)` and `|1⟩ = (0, f)` for a shared real profile `f` on the
//! half line; occupation of `x > 0` reads as bit 0.

use serde::{Deserialize, Serialize};

use crate::error::{AbacusError, Result};
use crate::evolve::{
    diagonal_step, run_schedule, Engine, Schedule, SidePotentials, Snapshot, Step,
    TwoComponentState,
};
use crate::numeric::{wrap_symmetric, C64, ONE, ZERO};
use crate::oscillator::{ho_wavefunction, project, Grid, GridState, PhysicalConfig};
use crate::su2core::{classify, decompose_gate, DiagonalGate, GateDecomposition, UnitaryGate};

/// Named or sampled preparation profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// Gaussian lump away from the gate; center and width in units of `ℓ`.
    Bump { center: f64, width: f64 },
    /// `√2 u₀` restricted to `x > 0`.
    Ground,
    /// Piecewise-linear interpolation of `(x, f)` samples, zero outside.
    Sampled { points: Vec<(f64, f64)> },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Bump {
            center: 3.0,
            width: 0.4,
        }
    }
}

impl ProfileSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileSpec::Bump { .. } => "bump",
            ProfileSpec::Ground => "ground",
            ProfileSpec::Sampled { .. } => "sampled",
        }
    }

    pub fn from_name(name: &str) -> Result<ProfileSpec> {
        match name.to_ascii_lowercase().as_str() {
            "bump" => Ok(ProfileSpec::default()),
            "ground" => Ok(ProfileSpec::Ground),
            other => Err(AbacusError::Parse(format!("unknown profile {other:?}"))),
        }
    }

    fn eval(&self, x: f64, cfg: &PhysicalConfig) -> f64 {
        match self {
            ProfileSpec::Bump { center, width } => {
                let z = (x / cfg.ell() - center) / width;
                (-0.5 * z * z).exp()
            }
            ProfileSpec::Ground => 2f64.sqrt() * ho_wavefunction(0, x, cfg),
            ProfileSpec::Sampled { points } => interpolate(points, x),
        }
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let k = points.partition_point(|p| p.0 <= x);
    if k == 0 || k == points.len() {
        return 0.0;
    }
    let (x0, y0) = points[k - 1];
    let (x1, y1) = points[k];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// A profile sampled on a grid and normalized so that `∫₀^∞ f² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub spec: ProfileSpec,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn new(spec: ProfileSpec, grid: &Grid, cfg: &PhysicalConfig) -> Result<Profile> {
        if let ProfileSpec::Sampled { points } = &spec {
            if points.len() < 2 || points.windows(2).any(|w| w[1].0.is_nan() || w[1].0 < w[0].0) {
                return Err(AbacusError::NotNormalizable(
                    "sampled profile needs at least two points with increasing x".into(),
                ));
            }
        }
        let raw: Vec<f64> = grid.x().iter().map(|&x| spec.eval(x, cfg)).collect();
        let norm = grid.integrate(|j| raw[j] * raw[j]).sqrt();
        if !norm.is_finite() || norm < 1e-150 {
            return Err(AbacusError::NotNormalizable(format!("quadrature norm {norm:e}")));
        }
        let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = raw.last().copied().unwrap_or(0.0).abs();
        if edge > 1e-6 * peak {
            return Err(AbacusError::NotNormalizable(
                "profile does not decay before the end of the grid".into(),
            ));
        }
        let values: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let check = grid.integrate(|j| values[j] * values[j]);
        if (check - 1.0).abs() > 1e-6 {
            return Err(AbacusError::NotNormalizable(format!("norm {check} after normalization")));
        }
        Ok(Profile { spec, values })
    }

    fn grid_state(&self, grid: &Grid, amplitudes: [C64; 2]) -> GridState {
        GridState {
            grid: grid.clone(),
            psi_plus: self.values.iter().map(|&f| amplitudes[0] * f).collect(),
            psi_minus: self.values.iter().map(|&f| amplitudes[1] * f).collect(),
        }
    }

    /// `(⟨f, ψ₊⟩, ⟨f, ψ₋⟩)`: the qubit amplitudes of a state.
    pub fn amplitudes(&self, g: &GridState) -> [C64; 2] {
        let h = g.grid.h();
        let dot = |psi: &[C64]| -> C64 { psi.iter().zip(&self.values).map(|(p, &f)| p * f).sum::<C64>() * h };
        [dot(&g.psi_plus), dot(&g.psi_minus)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    pub state: TwoComponentState,
    pub profile: Profile,
    /// Accumulated convention phase; never folded into comparisons.
    pub global_phase: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub p0: f64,
    pub p1: f64,
    /// `|⟨f, ψ_side/‖ψ_side‖⟩|²` for the `+` and `-` sides.
    pub profile_fidelity: [f64; 2],
}

impl Readout {
    /// 0 or 1 if the state is classical at `threshold`.
    pub fn bit(&self, threshold: f64) -> Option<u8> {
        if self.p0 >= threshold {
            Some(0)
        } else if self.p1 >= threshold {
            Some(1)
        } else {
            None
        }
    }
}

/// Output of [`Abacus::compile_gate`].
#[derive(Debug, Clone)]
pub struct CompiledGate {
    pub schedule: Schedule,
    pub decomposition: GateDecomposition,
    /// Executing the schedule applies `global_phase · target`.
    pub global_phase: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Open,
    Closed,
}

#[derive(Debug, Clone)]
pub struct ClassicalRun {
    /// Bit after each move (`None` when the readout was not classical).
    pub bits: Vec<Option<u8>>,
    pub readouts: Vec<Readout>,
    pub final_readout: Readout,
    pub decoherent: bool,
    pub final_state: QubitState,
}

#[derive(Debug, Clone)]
pub struct CnotOutcome {
    pub control: QubitState,
    pub target: QubitState,
    pub applied: bool,
}

/// Simulation context: physics, sampling grid, and engine.
#[derive(Debug, Clone)]
pub struct Abacus {
    pub cfg: PhysicalConfig,
    pub grid: Grid,
    pub engine: Engine,
    pub truncation: usize,
}

impl Abacus {
    pub const DEFAULT_THRESHOLD: f64 = 0.99;

    pub fn new(engine: Engine, grid: Grid, truncation: usize) -> Abacus {
        Abacus {
            cfg: *engine.cfg(),
            grid,
            engine,
            truncation,
        }
    }

    pub fn profile(&self, spec: ProfileSpec) -> Result<Profile> {
        Profile::new(spec, &self.grid, &self.cfg)
    }

    /// `(f, 0)` for bit 0, `(0, f)` for bit 1.
    pub fn prepare(&self, spec: ProfileSpec, bit: u8) -> Result<QubitState> {
        let amps = match bit {
            0 => [ONE, ZERO],
            1 => [ZERO, ONE],
            b => return Err(AbacusError::InvalidConfig(format!("bit must be 0 or 1, got {b}"))),
        };
        self.prepare_superposition(spec, amps)
    }

    /// `α|0⟩ + β|1⟩`, normalized.
    pub fn prepare_superposition(&self, spec: ProfileSpec, amps: [C64; 2]) -> Result<QubitState> {
        let n = (amps[0].norm_sqr() + amps[1].norm_sqr()).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(AbacusError::InvalidConfig("zero qubit amplitudes".into()));
        }
        let profile = self.profile(spec)?;
        let g = profile.grid_state(&self.grid, [amps[0] / n, amps[1] / n]);
        let state = match &self.engine {
            // ±I modes live on one side each, so qubit states expand cleanly
            Engine::Modal(_) => TwoComponentState::Modal(
                project(&g, &UnitaryGate::identity(), self.truncation, &self.cfg)?.modal,
            ),
            Engine::Grid(_) => TwoComponentState::Grid(g),
        };
        Ok(QubitState {
            state,
            profile,
            global_phase: ONE,
        })
    }

    pub fn grid_state(&self, q: &QubitState) -> GridState {
        q.state.to_grid(&self.grid, &self.cfg)
    }

    pub fn readout(&self, q: &QubitState) -> Readout {
        let g = self.grid_state(q);
        let (p0, p1) = g.side_norms_sqr();
        let amps = q.profile.amplitudes(&g);
        let fid = |a: C64, p: f64| if p < 1e-14 { 1.0 } else { (a.norm_sqr() / p).min(1.0) };
        Readout {
            p0,
            p1,
            profile_fidelity: [fid(amps[0], p0), fid(amps[1], p1)],
        }
    }

    /// Qubit amplitudes `(⟨f,ψ₊⟩, ⟨f,ψ₋⟩)` with the recorded global phase removed.
    pub fn amplitudes(&self, q: &QubitState) -> [C64; 2] {
        let a = q.profile.amplitudes(&self.grid_state(q));
        let un = q.global_phase.conj();
        [a[0] * un, a[1] * un]
    }

    /// Schedule whose execution applies `target` up to the recorded phase.
    ///
    /// Bloch-type targets (up to phase) run as a single half period and record
    /// the leftover phase; diagonal targets run as one closed step with side
    /// potentials and are exact; everything else runs the four Bloch steps
    /// followed by a closed step whose constant potential `V₀` cancels both
    /// `e^{iξ}` and the `(-i)^k` from the half periods.
    pub fn compile_gate(&self, target: &UnitaryGate) -> CompiledGate {
        compile_gate(target, &self.cfg)
    }

    pub fn run(&self, schedule: &Schedule, q: &QubitState) -> Result<(QubitState, Vec<Snapshot>)> {
        let r = run_schedule(schedule, &q.state, &self.engine, &self.grid)?;
        Ok((
            QubitState {
                state: r.final_state,
                profile: q.profile.clone(),
                global_phase: q.global_phase * r.global_phase,
            },
            r.trace,
        ))
    }

    pub fn apply_gate(&self, target: &UnitaryGate, q: &QubitState) -> Result<QubitState> {
        let c = self.compile_gate(target);
        let (mut out, _) = self.run(&c.schedule, q)?;
        // `run` records phases relative to the step matrices; relative to
        // `target` the net factor is the compiled one
        out.global_phase = q.global_phase * c.global_phase;
        Ok(out)
    }

    /// One half period under a single gate.
    pub fn half_period(&self, gate: &UnitaryGate, q: &QubitState) -> Result<QubitState> {
        let mut s = Schedule::new(self.cfg);
        s.push(Step::gate(*gate));
        Ok(self.run(&s, q)?.0)
    }

    pub fn classical_run(&self, moves: &[Move], packet: ProfileSpec, bit: u8) -> Result<ClassicalRun> {
        let start = self.prepare(packet, bit)?;
        let r0 = self.readout(&start);
        if r0.bit(0.999) != Some(bit) {
            return Err(AbacusError::StateMismatch("packet is not localized on one side".into()));
        }
        let mut q = start;
        let mut bits = Vec::with_capacity(moves.len());
        let mut readouts = Vec::with_capacity(moves.len());
        let mut decoherent = false;
        for m in moves {
            let gate = match m {
                Move::Open => UnitaryGate::sigma1(),
                Move::Closed => UnitaryGate::minus_identity(),
            };
            q = self.half_period(&gate, &q)?;
            let r = self.readout(&q);
            decoherent |= r.p0 > 0.01 && r.p0 < 0.99;
            bits.push(r.bit(Self::DEFAULT_THRESHOLD));
            readouts.push(r);
        }
        Ok(ClassicalRun {
            bits,
            final_readout: readouts.last().copied().unwrap_or(r0),
            readouts,
            decoherent,
            final_state: q,
        })
    }

    /// Trigger CNOT: the control's gate stays closed; the target's gate opens
    /// for one half period iff the control is found on the `x > 0` side.
    pub fn cnot_trigger(&self, control: &QubitState, target: &QubitState, threshold: f64) -> Result<CnotOutcome> {
        let rc = self.readout(control);
        let max_p = rc.p0.max(rc.p1);
        if max_p < threshold {
            return Err(AbacusError::SuperposedControl {
                max_probability: max_p,
                threshold,
            });
        }
        let applied = rc.p0 >= threshold;
        let closed = UnitaryGate::minus_identity();
        let control = self.half_period(&closed, control)?;
        let gate = if applied { UnitaryGate::sigma1() } else { closed };
        let target = self.half_period(&gate, target)?;
        Ok(CnotOutcome {
            control,
            target,
            applied,
        })
    }
}

/// See [`Abacus::compile_gate`].
pub fn compile_gate(target: &UnitaryGate, cfg: &PhysicalConfig) -> CompiledGate {
    let decomposition = decompose_gate(target);
    let mut schedule = Schedule::new(*cfg);
    let m = target.matrix();
    let class = classify(target);
    let diagonal = m.b().norm() < 1e-12 && m.c().norm() < 1e-12;

    if diagonal && !class.is_scale_invariant() {
        schedule.push(diagonal_step(&DiagonalGate::new(m.a().arg(), m.d().arg()), cfg));
        return CompiledGate {
            schedule,
            decomposition,
            global_phase: ONE,
        };
    }

    // decomposition lists factors in matrix order; time order is reversed
    for s in decomposition.steps.iter().rev() {
        schedule.push(Step::gate(s.gate()));
    }
    let k = decomposition.steps.len();
    // leftover phase of the bare half periods: (-i)^k e^{-iξ}
    let bare = C64::from_polar(1.0, -(k as f64) * std::f64::consts::FRAC_PI_2 - decomposition.xi);
    if k == 1 {
        return CompiledGate {
            schedule,
            decomposition,
            global_phase: bare,
        };
    }
    // closed -I step contributes i·e^{-iV₀τ/ħ}; choose V₀ so the product is 1
    let v0 = wrap_symmetric(std::f64::consts::FRAC_PI_2 + bare.arg()) * cfg.hbar / cfg.tau();
    schedule.push(
        Step::closed(
            UnitaryGate::minus_identity(),
            SidePotentials {
                v_plus: 0.0,
                v_minus: 0.0,
                v_zero: v0,
            },
            1.0,
        )
        .expect("-I is a closed gate")
        .with_label("phase"),
    );
    CompiledGate {
        schedule,
        decomposition,
        global_phase: ONE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{GridEngine, ModalEngine};
    use crate::oscillator::GridSpec;
    use crate::su2core::{random_bloch, random_unitary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn modal() -> Abacus {
        let cfg = PhysicalConfig::default();
        let spec = GridSpec::default();
        Abacus::new(Engine::Modal(ModalEngine::new(cfg, spec, 128)), spec.build(&cfg), 128)
    }

    fn grid() -> Abacus {
        let cfg = PhysicalConfig::default();
        let spec = GridSpec::default();
        Abacus::new(Engine::Grid(GridEngine::new(cfg, 2000)), spec.build(&cfg), 128)
    }

    #[test]
    fn readout_of_basis_states_is_exact() {
        for a in [modal(), grid()] {
            for spec in [ProfileSpec::default(), ProfileSpec::Ground] {
                for bit in 0..2u8 {
                    let r = a.readout(&a.prepare(spec.clone(), bit).unwrap());
                    let want = if bit == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
                    assert!((r.p0 - want.0).abs() < 1e-8 && (r.p1 - want.1).abs() < 1e-8, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn one_is_mirror_of_zero() {
        let a = grid();
        let z = a.grid_state(&a.prepare(ProfileSpec::default(), 0).unwrap());
        let o = a.grid_state(&a.prepare(ProfileSpec::default(), 1).unwrap());
        assert_eq!(z.apply_gate(&UnitaryGate::sigma1()), o);
    }

    #[test]
    fn bump_projects_cleanly() {
        let a = modal();
        let p = a.profile(ProfileSpec::default()).unwrap();
        let g = p.grid_state(&a.grid, [ONE, ZERO]);
        let proj = project(&g, &UnitaryGate::sigma3(), 128, &a.cfg).unwrap();
        assert!(proj.truncation_loss < 1e-6);
    }

    #[test]
    fn rejects_non_normalizable_profiles() {
        let a = grid();
        let flat = ProfileSpec::Sampled {
            points: vec![(0.0, 1.0), (100.0, 1.0)],
        };
        assert!(matches!(a.prepare(flat, 0), Err(AbacusError::NotNormalizable(_))));
        let zero = ProfileSpec::Sampled {
            points: vec![(0.0, 0.0), (1.0, 0.0)],
        };
        assert!(matches!(a.prepare(zero, 0), Err(AbacusError::NotNormalizable(_))));
        let tent = ProfileSpec::Sampled {
            points: vec![(1.0, 0.0), (2.0, 1.0), (3.0, 0.0)],
        };
        assert!(a.prepare(tent, 0).is_ok());
    }

    #[test]
    fn not_moves_bead_and_keeps_profile() {
        let a = modal();
        let q = a.half_period(&UnitaryGate::sigma1(), &a.prepare(ProfileSpec::default(), 0).unwrap()).unwrap();
        let r = a.readout(&q);
        assert!(r.p1 > 1.0 - 1e-8);
        assert!(r.profile_fidelity[1] >= 1.0 - 1e-8);
    }

    #[test]
    fn hadamard_splits_evenly() {
        let a = modal();
        let q = a.half_period(&UnitaryGate::hadamard(), &a.prepare(ProfileSpec::default(), 0).unwrap()).unwrap();
        let r = a.readout(&q);
        assert!((r.p0 - 0.5).abs() < 1e-8 && (r.p1 - 0.5).abs() < 1e-8);
    }

    #[test]
    fn qubit_space_closure() {
        let a = modal();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let u = random_bloch(&mut rng).gate();
            let amps = [C64::new(rng.gen(), rng.gen()), C64::new(rng.gen(), rng.gen())];
            let q = a.prepare_superposition(ProfileSpec::default(), amps).unwrap();
            let before = a.amplitudes(&q);
            let out = a.half_period(&u, &q).unwrap();
            let g = a.grid_state(&out);
            let got = out.profile.amplitudes(&g);
            let want = u.phased(-std::f64::consts::FRAC_PI_2).apply(before);
            for s in 0..2 {
                assert!((got[s] - want[s]).norm() < 1e-8);
            }
            // each side is proportional to f
            let fit = out.profile.grid_state(&a.grid, got);
            assert!(g.distance(&fit) < 1e-6);
        }
    }

    #[test]
    fn compile_shapes() {
        let cfg = PhysicalConfig::default();
        assert_eq!(compile_gate(&UnitaryGate::sigma1(), &cfg).schedule.steps.len(), 1);
        assert_eq!(compile_gate(&UnitaryGate::hadamard(), &cfg).schedule.steps.len(), 1);
        let d = compile_gate(&UnitaryGate::diagonal(0.2 * std::f64::consts::PI, -0.2 * std::f64::consts::PI), &cfg);
        assert_eq!(d.schedule.steps.len(), 1);
        assert_eq!(d.schedule.steps[0].label.as_deref(), Some("diagonal"));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = compile_gate(&random_unitary(&mut rng), &cfg);
        assert_eq!(g.schedule.half_period_steps(), 4);
        assert_eq!(g.schedule.steps.len(), 5);
    }

    #[test]
    fn compiled_gates_reproduce_targets() {
        let a = modal();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut targets = vec![
            UnitaryGate::diagonal(0.2 * std::f64::consts::PI, -0.2 * std::f64::consts::PI),
            UnitaryGate::sigma1(),
            UnitaryGate::hadamard().phased(0.3),
            UnitaryGate::identity().phased(1.1),
        ];
        targets.extend((0..6).map(|_| random_unitary(&mut rng)));
        for u in targets {
            let amps = [C64::new(rng.gen(), rng.gen()), C64::new(rng.gen(), rng.gen())];
            let q = a.prepare_superposition(ProfileSpec::default(), amps).unwrap();
            let before = a.amplitudes(&q);
            let out = a.apply_gate(&u, &q).unwrap();
            let got = a.amplitudes(&out);
            let want = u.apply(before);
            for s in 0..2 {
                assert!((got[s] - want[s]).norm() < 1e-8, "{u:?}: {got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn classical_moves() {
        let a = modal();
        let r = a.classical_run(&[Move::Closed], ProfileSpec::default(), 0).unwrap();
        assert_eq!(r.bits, vec![Some(0)]);
        let r = a.classical_run(&[Move::Open, Move::Closed, Move::Open, Move::Open], ProfileSpec::default(), 0).unwrap();
        assert_eq!(r.bits, vec![Some(1), Some(1), Some(0), Some(1)]);
        assert!(!r.decoherent);
    }

    #[test]
    fn cnot_truth_table() {
        let a = modal();
        for (c, t, want) in [(0u8, 0u8, 1u8), (0, 1, 0), (1, 0, 0), (1, 1, 1)] {
            let out = a
                .cnot_trigger(
                    &a.prepare(ProfileSpec::default(), c).unwrap(),
                    &a.prepare(ProfileSpec::default(), t).unwrap(),
                    Abacus::DEFAULT_THRESHOLD,
                )
                .unwrap();
            assert_eq!(out.applied, c == 0);
            assert_eq!(a.readout(&out.control).bit(0.999), Some(c));
            assert_eq!(a.readout(&out.target).bit(0.999), Some(want));
        }
    }

    #[test]
    fn cnot_rejects_superposed_control() {
        let a = modal();
        let h = a.half_period(&UnitaryGate::hadamard(), &a.prepare(ProfileSpec::default(), 0).unwrap()).unwrap();
        let t = a.prepare(ProfileSpec::default(), 0).unwrap();
        assert!(matches!(
            a.cnot_trigger(&h, &t, 0.99),
            Err(AbacusError::SuperposedControl { .. })
        ));
    }
}
