//! Time evolution.
//!
//! Two independent engines:
//! - the modal engine multiplies eigenmode coefficients by `e^{-iεₙt/ħ}`;
//! - the grid engine integrates the Schrödinger equation with Crank–Nicolson
//!   on a cell-centred grid, imposing the connection condition through a
//!   ghost-node matrix that couples the two components at the origin.
//!
//! The grid engine never uses the `-iU` shortcut; it is the check on it.

use serde::{Deserialize, Serialize};

use crate::error::{AbacusError, Result};
use crate::numeric::{wrap_symmetric, C64, I, ONE, ZERO};
use crate::oscillator::{project, synthesize, Grid, GridSpec, GridState, ModalState, PhysicalConfig};
use crate::pointint::PointInteraction;
use crate::su2core::{classify, DiagonalGate, GateClass, Mat2, UnitaryGate};

/// `U_τ(U) = -iU` for the scale-invariant family.
pub fn half_period_map(u: &UnitaryGate) -> Result<UnitaryGate> {
    let class = classify(u);
    if !class.is_scale_invariant() {
        return Err(AbacusError::NotScaleInvariant(class));
    }
    Ok(u.phased(-std::f64::consts::FRAC_PI_2))
}

/// Constant potentials applied during a step: `V₊` on the `x > 0` side,
/// `V₋` on the `x < 0` side, and `V₀` everywhere.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SidePotentials {
    pub v_plus: f64,
    pub v_minus: f64,
    pub v_zero: f64,
}

impl SidePotentials {
    pub const NONE: SidePotentials = SidePotentials {
        v_plus: 0.0,
        v_minus: 0.0,
        v_zero: 0.0,
    };

    fn side(&self, plus: bool) -> f64 {
        self.v_zero + if plus { self.v_plus } else { self.v_minus }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepKind {
    /// Evolve for exactly `τ` under a gate.
    GateHalfPeriod(UnitaryGate),
    /// Evolve under a closed gate (`±I`) with constant potentials.
    ClosedWithPotentials {
        gate: UnitaryGate,
        potentials: SidePotentials,
        duration_half_periods: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub kind: StepKind,
    pub label: Option<String>,
}

impl Step {
    pub fn gate(gate: UnitaryGate) -> Step {
        Step {
            kind: StepKind::GateHalfPeriod(gate),
            label: None,
        }
    }

    pub fn closed(
        gate: UnitaryGate,
        potentials: SidePotentials,
        duration_half_periods: f64,
    ) -> Result<Step> {
        let class = classify(&gate);
        if !matches!(class, GateClass::PlusIdentity | GateClass::MinusIdentity) {
            return Err(AbacusError::InvalidConfig(format!(
                "closed steps need gate +I or -I, got {class:?}"
            )));
        }
        if !(duration_half_periods >= 0.0 && duration_half_periods.is_finite()) {
            return Err(AbacusError::InvalidConfig("step duration must be non-negative".into()));
        }
        Ok(Step {
            kind: StepKind::ClosedWithPotentials {
                gate,
                potentials,
                duration_half_periods,
            },
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Step {
        self.label = Some(label.into());
        self
    }

    pub fn point_gate(&self) -> &UnitaryGate {
        match &self.kind {
            StepKind::GateHalfPeriod(g) => g,
            StepKind::ClosedWithPotentials { gate, .. } => gate,
        }
    }

    pub fn potentials(&self) -> SidePotentials {
        match &self.kind {
            StepKind::GateHalfPeriod(_) => SidePotentials::NONE,
            StepKind::ClosedWithPotentials { potentials, .. } => *potentials,
        }
    }

    pub fn duration_half_periods(&self) -> f64 {
        match &self.kind {
            StepKind::GateHalfPeriod(_) => 1.0,
            StepKind::ClosedWithPotentials {
                duration_half_periods,
                ..
            } => *duration_half_periods,
        }
    }

    pub fn duration(&self, cfg: &PhysicalConfig) -> f64 {
        self.duration_half_periods() * cfg.tau()
    }

    /// Global factor this step contributes on top of its intended action:
    /// `-i` for a half-period gate, and for a closed step the part of
    /// `e^{-iHt/ħ}` common to both sides (everything except `V±`). Only
    /// meaningful for durations that are whole half periods.
    pub fn convention_phase(&self, cfg: &PhysicalConfig) -> C64 {
        match &self.kind {
            StepKind::GateHalfPeriod(_) => -I,
            StepKind::ClosedWithPotentials {
                gate,
                potentials,
                duration_half_periods,
            } => {
                // +I ladder starts at ½ħω, -I at 3/2ħω
                let e0 = if classify(gate) == GateClass::PlusIdentity { 0.5 } else { 1.5 };
                let angle = -(e0 * std::f64::consts::PI) * duration_half_periods
                    - potentials.v_zero * self.duration(cfg) / cfg.hbar;
                C64::from_polar(1.0, angle)
            }
        }
    }
}

/// Ordered physical steps and the configuration they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub cfg: PhysicalConfig,
    pub steps: Vec<Step>,
}

impl Schedule {
    pub fn new(cfg: PhysicalConfig) -> Schedule {
        Schedule { cfg, steps: Vec::new() }
    }

    pub fn push(&mut self, step: Step) {
        self.steps.push(step);
    }

    pub fn total_duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration(&self.cfg)).sum()
    }

    pub fn half_period_steps(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s.kind, StepKind::GateHalfPeriod(_)))
            .count()
    }
}

/// Closed-gate step realizing `diag(e^{iθ₊}, e^{iθ₋})` in one half period.
///
/// The bare closed gate contributes `-i(-I) = iI`, so the side potentials must
/// supply `e^{-iV±τ/ħ} = e^{i(θ± - π/2)}`, i.e. `V± = (π/2 - θ±)ħ/τ` modulo
/// `2πħ/τ`; the branch of smallest magnitude is taken.
pub fn diagonal_step(d: &DiagonalGate, cfg: &PhysicalConfig) -> Step {
    let unit = cfg.hbar / cfg.tau();
    let v = |theta: f64| wrap_symmetric(std::f64::consts::FRAC_PI_2 - theta) * unit;
    Step::closed(
        UnitaryGate::minus_identity(),
        SidePotentials {
            v_plus: v(d.theta_plus),
            v_minus: v(d.theta_minus),
            v_zero: 0.0,
        },
        1.0,
    )
    .expect("-I is a closed gate")
    .with_label("diagonal")
}

/// Exact evolution of modal coefficients.
#[derive(Debug, Clone)]
pub struct ModalEngine {
    pub cfg: PhysicalConfig,
    /// Grid used when a state has to be re-expanded in another eigenbasis.
    pub grid: Grid,
    pub truncation: usize,
}

impl ModalEngine {
    pub const DEFAULT_TRUNCATION: usize = 128;

    pub fn new(cfg: PhysicalConfig, grid: GridSpec, truncation: usize) -> ModalEngine {
        ModalEngine {
            grid: grid.build(&cfg),
            cfg,
            truncation,
        }
    }

    /// Re-expands `s` over the eigenbasis of `u` (no-op if it already is).
    pub fn rebase(&self, s: &ModalState, u: &UnitaryGate) -> Result<ModalState> {
        if s.basis_gate().max_abs_diff(u) < 1e-14 {
            return Ok(s.clone());
        }
        let g = synthesize(s, &self.grid, &self.cfg);
        Ok(project(&g, u, s.truncation(), &self.cfg)?.modal)
    }

    pub fn evolve(&self, u: &UnitaryGate, s: &ModalState, t: f64) -> Result<ModalState> {
        self.evolve_with_potentials(u, s, SidePotentials::NONE, t)
    }

    /// `aₙ → e^{-i(εₙ + V)t/ħ} aₙ`. Side potentials need a closed gate, whose
    /// modes each live on one side.
    pub fn evolve_with_potentials(
        &self,
        u: &UnitaryGate,
        s: &ModalState,
        pot: SidePotentials,
        t: f64,
    ) -> Result<ModalState> {
        let class = classify(u);
        if !class.is_scale_invariant() {
            return Err(AbacusError::NotScaleInvariant(class));
        }
        let closed = matches!(class, GateClass::PlusIdentity | GateClass::MinusIdentity);
        if !closed && (pot.v_plus != 0.0 || pot.v_minus != 0.0) {
            return Err(AbacusError::StateMismatch(
                "side potentials require a closed gate".into(),
            ));
        }
        let s = self.rebase(s, u)?;
        let omega_t = self.cfg.omega * t;
        let coefficients = s
            .coefficients
            .iter()
            .enumerate()
            .map(|(n, a)| {
                let mode = s.basis.mode(n);
                let v = if closed { pot.side(n % 2 == 0) } else { pot.v_zero };
                let angle = -(mode.energy * omega_t).rem_euclid(std::f64::consts::TAU)
                    - v * t / self.cfg.hbar;
                a * C64::from_polar(1.0, angle)
            })
            .collect();
        Ok(ModalState {
            basis: s.basis.clone(),
            coefficients,
        })
    }
}

/// `evolve_modal` on the default grid and truncation of `s`.
pub fn evolve_modal(u: &UnitaryGate, s: &ModalState, t: f64, cfg: &PhysicalConfig) -> Result<ModalState> {
    ModalEngine::new(*cfg, GridSpec::default(), s.truncation()).evolve(u, s, t)
}

/// Crank–Nicolson integrator on the two-component grid.
#[derive(Debug, Clone)]
pub struct GridEngine {
    pub cfg: PhysicalConfig,
    /// Time steps per half period; `dt = τ / steps_per_half_period`.
    pub steps_per_half_period: usize,
    /// Repeat every step at `dt/2` and fail on disagreement.
    pub check_accuracy: bool,
}

impl GridEngine {
    pub const DEFAULT_STEPS: usize = 2000;

    pub fn new(cfg: PhysicalConfig, steps_per_half_period: usize) -> GridEngine {
        GridEngine {
            cfg,
            steps_per_half_period,
            check_accuracy: false,
        }
    }

    pub fn with_accuracy_check(mut self, on: bool) -> GridEngine {
        self.check_accuracy = on;
        self
    }

    pub fn dt(&self) -> f64 {
        self.cfg.tau() / self.steps_per_half_period as f64
    }

    pub fn evolve(
        &self,
        pi: &PointInteraction,
        s: &GridState,
        pot: SidePotentials,
        t: f64,
    ) -> Result<GridState> {
        evolve_grid_cn(pi, s, pot, self.dt(), t, &self.cfg)
    }

    /// Like [`GridEngine::evolve`], but repeats the run at half the time step
    /// and fails if the two results differ by more than `1e-3` in L².
    pub fn evolve_checked(
        &self,
        pi: &PointInteraction,
        s: &GridState,
        pot: SidePotentials,
        t: f64,
    ) -> Result<GridState> {
        let coarse = self.evolve(pi, s, pot, t)?;
        let fine = evolve_grid_cn(pi, s, pot, 0.5 * self.dt(), t, &self.cfg)?;
        let change = coarse.distance(&fine);
        if change > 1e-3 {
            return Err(AbacusError::AccuracyBreakdown { change });
        }
        Ok(fine)
    }
}

/// Factorized Crank–Nicolson propagator for one (gate, potentials, dt).
///
/// Only the first row couples the two components, so elimination runs from
/// the outer edge inwards: every pivot except the one at the origin stays
/// diagonal and the sweep is scalar per component.
struct CnPropagator {
    /// Diagonal of `I - iαH` per component (row 0 is replaced by `rhs0`).
    rhs_diag: [Vec<C64>; 2],
    rhs0: Mat2,
    /// Inverse pivots for rows `1..M`, per component.
    pivot_inv: [Vec<C64>; 2],
    pivot0_inv: Mat2,
    /// Off-diagonal of `I + iαH` and of `I - iαH` (multiples of the identity).
    lhs_off: C64,
    rhs_off: C64,
}

impl CnPropagator {
    fn new(
        pi: &PointInteraction,
        grid: &Grid,
        pot: SidePotentials,
        dt: f64,
        cfg: &PhysicalConfig,
    ) -> Result<CnPropagator> {
        let h = grid.h();
        let m = grid.len();
        let kin = cfg.hbar * cfg.hbar / (2.0 * cfg.mass * h * h);
        let alpha = dt / (2.0 * cfg.hbar);
        let ghost = pi.ghost_matrix(h)?;
        let ia = I * alpha;
        let lhs_off = ia * (-kin);

        let mut rhs_diag = [vec![ZERO; m], vec![ZERO; m]];
        let mut lhs_diag = [vec![ZERO; m], vec![ZERO; m]];
        for (j, &x) in grid.x().iter().enumerate() {
            let base = 2.0 * kin + cfg.potential(x);
            for (c, side) in [true, false].into_iter().enumerate() {
                let a = base + pot.side(side);
                rhs_diag[c][j] = ONE - ia * a;
                lhs_diag[c][j] = ONE + ia * a;
            }
        }
        let a0 = Mat2::diag(
            C64::new(2.0 * kin + cfg.potential(grid.x()[0]) + pot.side(true), 0.0),
            C64::new(2.0 * kin + cfg.potential(grid.x()[0]) + pot.side(false), 0.0),
        ) - ghost.scale(C64::new(kin, 0.0));

        let mut pivot_inv = [vec![ZERO; m], vec![ZERO; m]];
        let off2 = lhs_off * lhs_off;
        for c in 0..2 {
            let mut next_inv = ZERO;
            for j in (1..m).rev() {
                let p = lhs_diag[c][j] - off2 * next_inv;
                if p.norm() == 0.0 {
                    return Err(AbacusError::SingularInterface);
                }
                next_inv = p.inv();
                pivot_inv[c][j] = next_inv;
            }
        }
        let (p1, m1) = if m > 1 { (pivot_inv[0][1], pivot_inv[1][1]) } else { (ZERO, ZERO) };
        let pivot0 = Mat2::IDENTITY + a0.scale(ia) - Mat2::diag(off2 * p1, off2 * m1);
        Ok(CnPropagator {
            rhs_diag,
            rhs0: Mat2::IDENTITY - a0.scale(ia),
            pivot_inv,
            pivot0_inv: pivot0.inverse().ok_or(AbacusError::SingularInterface)?,
            lhs_off,
            rhs_off: -lhs_off,
        })
    }

    fn step(&self, psi: &mut [Vec<C64>; 2], work: &mut [Vec<C64>; 2]) {
        let m = psi[0].len();
        // right-hand side r = (I - iαH)ψ for rows ≥ 1, eliminated outside-in
        for c in 0..2 {
            let (p, y, d, pinv) = (&psi[c], &mut work[c], &self.rhs_diag[c], &self.pivot_inv[c]);
            let mut carry = ZERO;
            for j in (1..m).rev() {
                let right = if j + 1 < m { p[j + 1] } else { ZERO };
                let r = d[j] * p[j] + self.rhs_off * (p[j - 1] + right);
                let yj = r - self.lhs_off * carry;
                y[j] = yj;
                carry = pinv[j] * yj;
            }
        }
        // coupled interface row
        let r0 = self.rhs0.apply([psi[0][0], psi[1][0]]);
        let mut y0 = r0;
        if m > 1 {
            for c in 0..2 {
                y0[c] += self.rhs_off * psi[c][1] - self.lhs_off * self.pivot_inv[c][1] * work[c][1];
            }
        }
        let x0 = self.pivot0_inv.apply(y0);
        for c in 0..2 {
            let (p, y, pinv) = (&mut psi[c], &work[c], &self.pivot_inv[c]);
            p[0] = x0[c];
            for j in 1..m {
                p[j] = pinv[j] * (y[j] - self.lhs_off * p[j - 1]);
            }
        }
    }
}

/// Crank–Nicolson evolution of `s` for total time `t` with step at most `dt`.
///
/// The discrete Hamiltonian is Hermitian, so every step is unitary up to
/// rounding.
pub fn evolve_grid_cn(
    pi: &PointInteraction,
    s: &GridState,
    pot: SidePotentials,
    dt: f64,
    t: f64,
    cfg: &PhysicalConfig,
) -> Result<GridState> {
    if !(dt > 0.0 && t >= 0.0) {
        return Err(AbacusError::InvalidConfig("dt must be positive and t non-negative".into()));
    }
    if t == 0.0 {
        return Ok(s.clone());
    }
    let n_steps = ((t / dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = t / n_steps as f64;
    let prop = CnPropagator::new(pi, &s.grid, pot, dt, cfg)?;
    let mut psi = [s.psi_plus.clone(), s.psi_minus.clone()];
    let mut work = [vec![ZERO; s.grid.len()], vec![ZERO; s.grid.len()]];
    for _ in 0..n_steps {
        prop.step(&mut psi, &mut work);
    }
    let [psi_plus, psi_minus] = psi;
    Ok(GridState {
        grid: s.grid.clone(),
        psi_plus,
        psi_minus,
    })
}

/// A two-component state in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum TwoComponentState {
    Modal(ModalState),
    Grid(GridState),
}

impl TwoComponentState {
    pub fn to_grid(&self, grid: &Grid, cfg: &PhysicalConfig) -> GridState {
        match self {
            TwoComponentState::Modal(m) => synthesize(m, grid, cfg),
            TwoComponentState::Grid(g) => g.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Engine {
    Modal(ModalEngine),
    Grid(GridEngine),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Modal,
    Grid,
}

impl Engine {
    pub fn kind(&self) -> EngineKind {
        match self {
            Engine::Modal(_) => EngineKind::Modal,
            Engine::Grid(_) => EngineKind::Grid,
        }
    }

    pub fn cfg(&self) -> &PhysicalConfig {
        match self {
            Engine::Modal(m) => &m.cfg,
            Engine::Grid(g) => &g.cfg,
        }
    }

    /// Applies one schedule step.
    pub fn apply_step(&self, step: &Step, s: &TwoComponentState) -> Result<TwoComponentState> {
        let gate = step.point_gate();
        let pot = step.potentials();
        match (self, s) {
            (Engine::Modal(m), TwoComponentState::Modal(state)) => {
                let t = step.duration(&m.cfg);
                Ok(TwoComponentState::Modal(m.evolve_with_potentials(gate, state, pot, t)?))
            }
            (Engine::Grid(g), TwoComponentState::Grid(state)) => {
                let pi = PointInteraction::new(*gate, g.cfg.l0)?;
                let t = step.duration(&g.cfg);
                let out = if g.check_accuracy {
                    g.evolve_checked(&pi, state, pot, t)?
                } else {
                    g.evolve(&pi, state, pot, t)?
                };
                Ok(TwoComponentState::Grid(out))
            }
            _ => Err(AbacusError::StateMismatch(
                "state representation does not match the engine".into(),
            )),
        }
    }
}

/// Observables recorded after each step; none depends on the global phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub label: Option<String>,
    pub p_plus: f64,
    pub p_minus: f64,
    pub norm: f64,
    /// `arg ⟨ψ₊, ψ₋⟩`, the relative phase of the two sides when both are
    /// occupied.
    pub relative_phase: Option<f64>,
}

impl Snapshot {
    pub fn of(step: usize, label: Option<String>, g: &GridState) -> Snapshot {
        let (p, m) = g.side_norms_sqr();
        let h = g.grid.h();
        let overlap: C64 = g
            .psi_plus
            .iter()
            .zip(&g.psi_minus)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * h;
        Snapshot {
            step,
            label,
            p_plus: p,
            p_minus: m,
            norm: (p + m).sqrt(),
            relative_phase: (overlap.norm() > 1e-12).then(|| overlap.arg()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_state: TwoComponentState,
    pub states: Vec<TwoComponentState>,
    pub trace: Vec<Snapshot>,
    /// Product of the per-step convention phases (see [`Step::convention_phase`]).
    pub global_phase: C64,
}

/// Runs every step in order, recording the state and its observables after
/// each one. `grid` is where modal states are sampled for the observables.
pub fn run_schedule(
    schedule: &Schedule,
    initial: &TwoComponentState,
    engine: &Engine,
    grid: &Grid,
) -> Result<RunResult> {
    let cfg = &schedule.cfg;
    let mut state = initial.clone();
    let mut states = Vec::with_capacity(schedule.steps.len());
    let mut trace = Vec::with_capacity(schedule.steps.len() + 1);
    let mut phase = ONE;
    trace.push(Snapshot::of(0, Some("initial".into()), &state.to_grid(grid, cfg)));
    for (k, step) in schedule.steps.iter().enumerate() {
        state = engine.apply_step(step, &state)?;
        phase *= step.convention_phase(cfg);
        trace.push(Snapshot::of(k + 1, step.label.clone(), &state.to_grid(grid, cfg)));
        states.push(state.clone());
    }
    Ok(RunResult {
        final_state: state,
        states,
        trace,
        global_phase: phase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::su2core::{conjugate, random_bloch, random_su2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> PhysicalConfig {
        PhysicalConfig::default()
    }

    fn bump(x: f64, center: f64, width: f64) -> f64 {
        (-(x - center).powi(2) / (2.0 * width * width)).exp()
    }

    /// Smooth two-component state built from random bumps on each side.
    fn smooth_state(rng: &mut ChaCha8Rng, grid: &Grid) -> GridState {
        let params: Vec<(f64, f64, C64, f64)> = (0..2)
            .map(|_| {
                (
                    rng.gen_range(2.5..3.5),
                    rng.gen_range(0.4..0.6),
                    C64::from_polar(rng.gen_range(0.3..1.0), rng.gen_range(0.0..std::f64::consts::TAU)),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        GridState::from_fn(grid.clone(), |x| {
            let f = |p: &(f64, f64, C64, f64)| p.2 * bump(x, p.0, p.1) * C64::from_polar(1.0, p.3 * x);
            [f(&params[0]), f(&params[1])]
        })
        .normalized()
    }

    #[test]
    fn half_period_map_examples() {
        let m = half_period_map(&UnitaryGate::sigma3()).unwrap();
        assert!(m.max_abs_diff(&UnitaryGate::sigma3().phased(-std::f64::consts::FRAC_PI_2)) < 1e-15);
        let not = half_period_map(&UnitaryGate::sigma1()).unwrap();
        assert!((not.apply([ONE, ZERO])[1] - (-I)).norm() < 1e-15);
        let b = random_bloch(&mut ChaCha8Rng::seed_from_u64(1)).gate();
        let once = half_period_map(&b).unwrap();
        assert!(once.mul(&once).max_abs_diff(&UnitaryGate::minus_identity()) < 1e-14);
        assert!(half_period_map(&UnitaryGate::diagonal(0.1, 0.2)).is_err());
    }

    #[test]
    fn modal_evolution_periods() {
        let c = cfg();
        let engine = ModalEngine::new(c, GridSpec::default(), 16);
        let u = UnitaryGate::hadamard();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let coeffs: Vec<C64> = (0..16).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        let s = ModalState::new(&u, coeffs).unwrap();
        assert_eq!(engine.evolve(&u, &s, 0.0).unwrap().coefficients, s.coefficients);
        let full = engine.evolve(&u, &s, 2.0 * c.tau()).unwrap();
        for (a, b) in full.coefficients.iter().zip(&s.coefficients) {
            assert!((a + b).norm() < 1e-12);
        }
    }

    #[test]
    fn modal_half_period_is_minus_i_u() {
        let c = cfg();
        let engine = ModalEngine::new(c, GridSpec::default(), 128);
        let grid = engine.grid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..6 {
            let u = random_bloch(&mut rng).gate();
            let s = smooth_state(&mut rng, &grid);
            let p = project(&s, &u, 128, &c).unwrap();
            // exact on the span of the first N modes
            let out = synthesize(&engine.evolve(&u, &p.modal, c.tau()).unwrap(), &grid, &c);
            let expect = synthesize(&p.modal, &grid, &c).apply_gate(&half_period_map(&u).unwrap());
            assert!(out.distance(&expect) < 1e-10, "{}", out.distance(&expect));
        }
    }

    #[test]
    fn conjugation_covariance() {
        // U_t(VUV⁻¹) VΨ = V U_t(U) Ψ for arbitrary t
        let c = cfg();
        let engine = ModalEngine::new(c, GridSpec::default(), 128);
        let grid = engine.grid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..4 {
            let u = random_bloch(&mut rng).gate();
            let v = random_su2(&mut rng);
            let t = rng.gen_range(0.0..3.0) * c.tau();
            let s = smooth_state(&mut rng, &grid);
            let lhs_gate = conjugate(&u, &v);
            let lhs0 = project(&s.apply_gate(&v), &lhs_gate, 128, &c).unwrap().modal;
            let lhs = synthesize(&engine.evolve(&lhs_gate, &lhs0, t).unwrap(), &grid, &c);
            let rhs0 = project(&s, &u, 128, &c).unwrap().modal;
            let rhs = synthesize(&engine.evolve(&u, &rhs0, t).unwrap(), &grid, &c).apply_gate(&v);
            assert!(lhs.distance(&rhs) < 1e-9);
        }
    }

    #[test]
    fn diagonal_step_potentials() {
        let c = cfg();
        let s = diagonal_step(&DiagonalGate::new(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2), &c);
        assert_eq!(s.potentials(), SidePotentials::NONE);
        let s = diagonal_step(&DiagonalGate::new(0.0, std::f64::consts::PI), &c);
        let p = s.potentials();
        let unit = std::f64::consts::PI * c.hbar / (2.0 * c.tau());
        assert!((p.v_plus - unit).abs() < 1e-15 && (p.v_minus + unit).abs() < 1e-15);
    }

    #[test]
    fn diagonal_step_realizes_phases_in_modal_engine() {
        let c = cfg();
        let engine = ModalEngine::new(c, GridSpec::default(), 128);
        let grid = engine.grid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = DiagonalGate::new(0.7, 4.4);
        let step = diagonal_step(&d, &c);
        let s = smooth_state(&mut rng, &grid);
        let m0 = project(&s, step.point_gate(), 128, &c).unwrap().modal;
        let state = TwoComponentState::Modal(m0);
        let expect = state.to_grid(&grid, &c).apply_gate(&d.gate());
        let out = Engine::Modal(engine).apply_step(&step, &state).unwrap().to_grid(&grid, &c);
        assert!(out.distance(&expect) < 1e-10);
    }

    #[test]
    fn grid_engine_free_gate_half_period() {
        let c = cfg();
        let grid = GridSpec::default().build(&c);
        let s = GridState::from_fn(grid.clone(), |x| [C64::new(bump(x, 3.0, 0.5), 0.0), ZERO]).normalized();
        let pi = PointInteraction::new(UnitaryGate::sigma1(), c.l0).unwrap();
        let out = GridEngine::new(c, 2000).evolve(&pi, &s, SidePotentials::NONE, c.tau()).unwrap();
        let expect = s.apply_gate(&half_period_map(&UnitaryGate::sigma1()).unwrap());
        assert!(out.fidelity(&expect) > 0.999);
        assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn closed_gate_blocks_flux() {
        let c = cfg();
        let grid = GridSpec { nodes: 512, x_max_over_ell: 12.0 }.build(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = smooth_state(&mut rng, &grid);
        let (p0, m0) = s.side_norms_sqr();
        let pi = PointInteraction::new(UnitaryGate::minus_identity(), c.l0).unwrap();
        let out = GridEngine::new(c, 300).evolve(&pi, &s, SidePotentials { v_plus: 0.3, v_minus: -1.0, v_zero: 2.0 }, 1.7).unwrap();
        let (p1, m1) = out.side_norms_sqr();
        assert!((p1 - p0).abs() < 1e-12 && (m1 - m0).abs() < 1e-12);
    }

    #[test]
    fn grid_norm_conserved_over_many_steps() {
        let c = cfg();
        let grid = GridSpec { nodes: 512, x_max_over_ell: 12.0 }.build(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = smooth_state(&mut rng, &grid);
        let pi = PointInteraction::new(UnitaryGate::new(*random_su2(&mut rng).matrix()).unwrap(), 0.8).unwrap();
        let out = evolve_grid_cn(&pi, &s, SidePotentials::NONE, 1e-3, 10.0, &c).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn accuracy_check_flags_coarse_steps() {
        let c = cfg();
        let grid = GridSpec { nodes: 512, x_max_over_ell: 12.0 }.build(&c);
        let s = GridState::from_fn(grid, |x| [C64::new(bump(x, 3.0, 0.4), 0.0), ZERO]).normalized();
        let pi = PointInteraction::new(UnitaryGate::hadamard(), c.l0).unwrap();
        let coarse = GridEngine::new(c, 3);
        assert!(matches!(
            coarse.evolve_checked(&pi, &s, SidePotentials::NONE, c.tau()),
            Err(AbacusError::AccuracyBreakdown { .. })
        ));
        assert!(GridEngine::new(c, 2000).evolve_checked(&pi, &s, SidePotentials::NONE, c.tau()).is_ok());
    }

    #[test]
    fn run_schedule_bookkeeping() {
        let c = cfg();
        let engine = ModalEngine::new(c, GridSpec::default(), 64);
        let grid = engine.grid.clone();
        let s = GridState::from_fn(grid.clone(), |x| [C64::new(bump(x, 3.0, 0.4), 0.0), ZERO]).normalized();
        let m0 = project(&s, &UnitaryGate::sigma1(), 64, &c).unwrap().modal;
        let init = TwoComponentState::Modal(m0);
        let engine = Engine::Modal(engine);

        let empty = run_schedule(&Schedule::new(c), &init, &engine, &grid).unwrap();
        assert_eq!(empty.final_state, init);
        assert_eq!(empty.global_phase, ONE);

        let mut sch = Schedule::new(c);
        sch.push(Step::gate(UnitaryGate::sigma1()));
        sch.push(Step::gate(UnitaryGate::sigma1()));
        let r = run_schedule(&sch, &init, &engine, &grid).unwrap();
        assert_eq!(r.trace.len(), 3);
        assert!(r.trace[1].p_minus > 0.999999);
        let out = r.final_state.to_grid(&grid, &c);
        assert!(out.distance(&init.to_grid(&grid, &c).scaled(-ONE)) < 1e-10);
        assert!((r.global_phase + ONE).norm() < 1e-15);
    }

    #[test]
    fn mismatched_engine_and_state() {
        let c = cfg();
        let grid = GridSpec { nodes: 64, x_max_over_ell: 12.0 }.build(&c);
        let s = TwoComponentState::Grid(GridState::zeros(grid));
        let e = Engine::Modal(ModalEngine::new(c, GridSpec::default(), 8));
        assert!(matches!(e.apply_step(&Step::gate(UnitaryGate::sigma1()), &s), Err(AbacusError::StateMismatch(_))));
    }
}
