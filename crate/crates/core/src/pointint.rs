//! The connection condition `(U - I)Ψ(0) + iL₀(U + I)Ψ'(0) = 0` and what
//! follows from it: free-line scattering, the spectra of separating gates,
//! and finite-difference eigenvalue oracles.

use serde::{Deserialize, Serialize};

use crate::error::{AbacusError, Result};
use crate::numeric::{C64, I, ONE, ZERO};
use crate::oscillator::PhysicalConfig;
use crate::su2core::{classify, diagonalize, GateClass, Mat2, UnitaryGate};

/// A point interaction: the gate matrix and the length constant `L₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointInteraction {
    gate: UnitaryGate,
    l0: f64,
    class: GateClass,
}

impl PointInteraction {
    pub fn new(gate: UnitaryGate, l0: f64) -> Result<Self> {
        if !l0.is_finite() || l0 == 0.0 {
            return Err(AbacusError::InvalidConfig("L0 must be finite and nonzero".into()));
        }
        Ok(PointInteraction {
            gate,
            l0,
            class: classify(&gate),
        })
    }

    pub fn gate(&self) -> &UnitaryGate {
        &self.gate
    }
    pub fn l0(&self) -> f64 {
        self.l0
    }
    pub fn class(&self) -> GateClass {
        self.class
    }

    /// `U - I` and `iL₀(U + I)`.
    fn boundary_matrices(&self) -> (Mat2, Mat2) {
        let u = *self.gate.matrix();
        (
            u - Mat2::IDENTITY,
            (u + Mat2::IDENTITY).scale(I * self.l0),
        )
    }

    /// Ghost-node matrix `G` of the cell-centred discretization: with nodes at
    /// `±h/2`, `Ψ(0) ≈ (Ψ_g + Ψ_1)/2` and `Ψ'(0) ≈ (Ψ_1 - Ψ_g)/h`, and the
    /// connection condition solved for the ghost gives `Ψ_g = G Ψ_1`. `G` is
    /// Hermitian for unitary `U`; the tiny anti-Hermitian rounding residue is
    /// removed so the discrete Hamiltonian stays exactly Hermitian.
    pub fn ghost_matrix(&self, h: f64) -> Result<Mat2> {
        let (a, b) = self.boundary_matrices();
        let half = C64::new(0.5, 0.0);
        let inv_h = C64::new(1.0 / h, 0.0);
        let lhs = a.scale(half) - b.scale(inv_h);
        let rhs = a.scale(half) + b.scale(inv_h);
        let inv = lhs.inverse().ok_or(AbacusError::SingularInterface)?;
        let g = -(inv * rhs);
        if !g.is_finite() || g.0.iter().any(|z| z.norm() > 1e12) {
            return Err(AbacusError::SingularInterface);
        }
        Ok((g + g.adjoint()).scale(half))
    }
}

/// `(U - I)Ψ0 + iL₀(U + I)dΨ0`; zero iff the boundary data is admissible.
pub fn connection_residual(pi: &PointInteraction, psi0: [C64; 2], dpsi0: [C64; 2]) -> [C64; 2] {
    let (a, b) = pi.boundary_matrices();
    let x = a.apply(psi0);
    let y = b.apply(dpsi0);
    [x[0] + y[0], x[1] + y[1]]
}

/// Plane-wave amplitudes on the free line (no trap).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringAmplitudes {
    pub k: f64,
    /// Incident from the left (`x < 0`).
    pub t_lr: C64,
    pub r_lr: C64,
    /// Incident from the right.
    pub t_rl: C64,
    pub r_rl: C64,
}

impl ScatteringAmplitudes {
    pub fn transmission(&self) -> f64 {
        self.t_lr.norm_sqr()
    }
    pub fn reflection(&self) -> f64 {
        self.r_lr.norm_sqr()
    }
    /// Largest `|1 - |t|² - |r|²|` over both incidence directions.
    pub fn unitarity_residual(&self) -> f64 {
        let l = (1.0 - self.t_lr.norm_sqr() - self.r_lr.norm_sqr()).abs();
        let r = (1.0 - self.t_rl.norm_sqr() - self.r_rl.norm_sqr()).abs();
        l.max(r)
    }

    /// Boundary data `(Ψ(0), Ψ'(0))` of the left-incident solution.
    pub fn left_boundary_data(&self) -> ([C64; 2], [C64; 2]) {
        let ik = I * self.k;
        (
            [self.t_lr, ONE + self.r_lr],
            [ik * self.t_lr, ik * (self.r_lr - ONE)],
        )
    }

    pub fn right_boundary_data(&self) -> ([C64; 2], [C64; 2]) {
        let ik = I * self.k;
        (
            [ONE + self.r_rl, self.t_rl],
            [ik * (self.r_rl - ONE), ik * self.t_rl],
        )
    }
}

/// Scattering off the bare point interaction at wavenumber `k > 0`.
///
/// Left incidence: `ψ = e^{ikx} + r e^{-ikx}` for `x < 0`, `t e^{ikx}` for
/// `x > 0`, so `Ψ(0) = (t, 1 + r)` and `Ψ'(0) = (ikt, ik(r - 1))`. Inserting
/// into the connection condition gives `M (t, r)ᵀ = -N e₂` with
/// `M = (U - I) - kL₀(U + I)` and `N = (U - I) + kL₀(U + I)`.
pub fn scattering_amplitudes(pi: &PointInteraction, k: f64) -> Result<ScatteringAmplitudes> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(AbacusError::InvalidConfig(format!("wavenumber must be positive, got {k}")));
    }
    let u = *pi.gate.matrix();
    let kl = C64::new(k * pi.l0, 0.0);
    let m = (u - Mat2::IDENTITY) - (u + Mat2::IDENTITY).scale(kl);
    let n = (u - Mat2::IDENTITY) + (u + Mat2::IDENTITY).scale(kl);
    let Some(minv) = m.inverse().filter(|_| m.det().norm() > 1e-14) else {
        // totally reflecting
        return Ok(ScatteringAmplitudes {
            k,
            t_lr: ZERO,
            r_lr: -ONE,
            t_rl: ZERO,
            r_rl: -ONE,
        });
    };
    let s = -(minv * n);
    // column 2: (t, r) from the left; column 1: (r', t') from the right
    Ok(ScatteringAmplitudes {
        k,
        t_lr: s.b(),
        r_lr: s.d(),
        r_rl: s.a(),
        t_rl: s.c(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    AnalyticGamma,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Robin { theta: f64 },
    Gate { class: GateClass },
}

/// Energies in units of `ħω`, ascending, with a per-level residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub levels: Vec<f64>,
    pub residuals: Vec<f64>,
    pub boundary: Boundary,
    pub method: SpectrumMethod,
}

impl SpectrumResult {
    pub fn max_deviation(&self, other: &SpectrumResult) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    (std::f64::consts::PI * r).sin()
}

/// `1/Γ(x)`, entire; zero at the non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x >= 0.5 {
        if x > 170.0 {
            (-libm::lgamma(x)).exp()
        } else {
            1.0 / libm::tgamma(x)
        }
    } else {
        // reflection: 1/Γ(x) = sin(πx) Γ(1-x) / π
        let g = if 1.0 - x > 170.0 {
            libm::lgamma(1.0 - x).exp()
        } else {
            libm::tgamma(1.0 - x)
        };
        sin_pi(x) * g / std::f64::consts::PI
    }
}

/// The decaying solution at energy `(ν + ½)ħω` is `D_ν(√2 x/ℓ)` with
/// `D_ν(0) = 2^{ν/2}√π / Γ((1-ν)/2)` and `D_ν'(0) = -2^{(ν+1)/2}√π / Γ(-ν/2)`.
/// The Robin condition `sin(θ/2)φ(0) + L₀cos(θ/2)φ'(0) = 0`, divided by
/// `2^{ν/2}√π`, becomes `F(ν) = s·rΓ((1-ν)/2) - c(2L₀/ℓ)·rΓ(-ν/2)`.
struct RobinCondition {
    s: f64,
    c2: f64,
}

impl RobinCondition {
    fn new(theta: f64, cfg: &PhysicalConfig) -> Self {
        let half = 0.5 * theta;
        RobinCondition {
            s: half.sin(),
            c2: half.cos() * 2.0 * cfg.l0 / cfg.ell(),
        }
    }

    /// Robin length in units of `ℓ/2`, i.e. `2λ/ℓ` with `λ = L₀cot(θ/2)`.
    fn scaled_length(&self) -> f64 {
        self.c2 / self.s
    }

    fn f(&self, nu: f64) -> f64 {
        self.s * rgamma(0.5 * (1.0 - nu)) - self.c2 * rgamma(-0.5 * nu)
    }

    fn relative_residual(&self, nu: f64) -> f64 {
        let a = self.s * rgamma(0.5 * (1.0 - nu));
        let b = self.c2 * rgamma(-0.5 * nu);
        let scale = a.abs() + b.abs();
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    }

    /// For `ν < 0` both Gamma arguments are positive; `F/rΓ(-ν/2)` is
    /// `Γ(-ν/2)/Γ((1-ν)/2) - 2λ/ℓ`, times `s`.
    fn ratio_form(&self, nu: f64) -> f64 {
        (libm::lgamma(-0.5 * nu) - libm::lgamma(0.5 * (1.0 - nu))).exp() - self.scaled_length()
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

const SPECIAL_ANGLE_TOL: f64 = 1e-14;

/// Lowest `count` levels of the half-line oscillator with boundary
/// `ψ(0) + L₀cot(θ/2)ψ'(0) = 0`.
///
/// `θ = 0` (Neumann) and `θ = π` (Dirichlet) are dispatched before any
/// trigonometric division. Otherwise, with `λ = L₀cot(θ/2)`:
/// for `λ > 0` the ground level lies below `½ħω` and level `n ≥ 1` has
/// `ν ∈ (2n-1, 2n)`; for `λ < 0` level `n` has `ν ∈ (2n, 2n+1)`.
pub fn robin_levels(theta: f64, cfg: &PhysicalConfig, count: usize) -> Result<SpectrumResult> {
    cfg.validate()?;
    let theta = crate::numeric::wrap_angle(theta);
    let boundary = Boundary::Robin { theta };
    let ladder = |offset: f64| SpectrumResult {
        levels: (0..count).map(|n| 2.0 * n as f64 + offset).collect(),
        residuals: vec![0.0; count],
        boundary,
        method: SpectrumMethod::AnalyticGamma,
    };
    if theta < SPECIAL_ANGLE_TOL || std::f64::consts::TAU - theta < SPECIAL_ANGLE_TOL {
        return Ok(ladder(0.5));
    }
    if (theta - std::f64::consts::PI).abs() < SPECIAL_ANGLE_TOL {
        return Ok(ladder(1.5));
    }

    let cond = RobinCondition::new(theta, cfg);
    let attractive = cond.scaled_length() > 0.0;
    let mut levels = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for n in 0..count {
        let nf = n as f64;
        let nu = if attractive && n == 0 {
            let target = cond.scaled_length();
            let hi = -1e-300;
            let mut lo = -1.0;
            while cond.ratio_form(lo) > 0.0 {
                lo *= 2.0;
                if lo < -1e300 {
                    return Err(AbacusError::InvalidConfig(format!(
                        "no bound level found for Robin length {target}"
                    )));
                }
            }
            let nu = bisect(|v| cond.ratio_form(v), lo, hi).expect("bracketed");
            let hv = cond.ratio_form(nu);
            residuals.push(hv.abs() / ((hv + target).abs() + target.abs()));
            levels.push(nu + 0.5);
            continue;
        } else if attractive {
            bisect(|v| cond.f(v), 2.0 * nf - 1.0, 2.0 * nf)
        } else {
            bisect(|v| cond.f(v), 2.0 * nf, 2.0 * nf + 1.0)
        };
        let nu = nu.ok_or_else(|| {
            AbacusError::InvalidConfig(format!("Robin level {n} not bracketed for theta={theta}"))
        })?;
        residuals.push(cond.relative_residual(nu));
        levels.push(nu + 0.5);
    }
    Ok(SpectrumResult {
        levels,
        residuals,
        boundary,
        method: SpectrumMethod::AnalyticGamma,
    })
}

/// Lowest `count` levels of the trap with point interaction `U`, from the
/// Robin problems of the two eigen-angles of `U`.
pub fn spectrum(pi: &PointInteraction, cfg: &PhysicalConfig, count: usize) -> Result<SpectrumResult> {
    let boundary = Boundary::Gate { class: pi.class };
    if pi.class == GateClass::ScaleInvariantBloch {
        return Ok(SpectrumResult {
            levels: (0..count).map(|n| n as f64 + 0.5).collect(),
            residuals: vec![0.0; count],
            boundary,
            method: SpectrumMethod::AnalyticGamma,
        });
    }
    let cfg = PhysicalConfig { l0: pi.l0, ..*cfg };
    let (_, d) = diagonalize(&pi.gate);
    let a = robin_levels(d.theta_plus, &cfg, count)?;
    let b = robin_levels(d.theta_minus, &cfg, count)?;
    let mut merged: Vec<(f64, f64)> = a
        .levels
        .iter()
        .copied()
        .zip(a.residuals.iter().copied())
        .chain(b.levels.iter().copied().zip(b.residuals.iter().copied()))
        .collect();
    merged.sort_by(|x, y| x.0.total_cmp(&y.0));
    merged.truncate(count);
    Ok(SpectrumResult {
        levels: merged.iter().map(|p| p.0).collect(),
        residuals: merged.iter().map(|p| p.1).collect(),
        boundary,
        method: SpectrumMethod::AnalyticGamma,
    })
}

/// Resolution of the finite-difference oracle, in units of `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub h_over_ell: f64,
    pub x_max_over_ell: f64,
}

impl Default for FdGrid {
    fn default() -> Self {
        FdGrid {
            h_over_ell: 1.0 / 256.0,
            x_max_over_ell: 12.0,
        }
    }
}

impl FdGrid {
    pub fn halved(&self) -> FdGrid {
        FdGrid {
            h_over_ell: self.h_over_ell / 2.0,
            ..*self
        }
    }

    fn nodes(&self) -> usize {
        (self.x_max_over_ell / self.h_over_ell).round() as usize
    }
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below
/// `lambda` (Sturm sequence via the LDLᵀ pivots).
pub fn sturm_count(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - lambda;
    for i in 0..diag.len() {
        if i > 0 {
            let prev = if q == 0.0 { f64::EPSILON * (off[i - 1].abs() + 1.0) } else { q };
            q = diag[i] - lambda - off[i - 1] * off[i - 1] / prev;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) by bisection on a counting function.
fn kth_by_bisection(count_below: impl Fn(f64) -> usize, k: usize, mut lo: f64, mut hi: f64) -> (f64, f64) {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi), hi - lo)
}

fn robin_ghost_factor(theta: f64, l0: f64, h: f64) -> Result<f64> {
    let half = 0.5 * theta;
    let (s, c) = (half.sin(), half.cos());
    let den = s * h - 2.0 * l0 * c;
    if den.abs() < 1e-14 * (s.abs() * h + (l0 * c).abs()) {
        return Err(AbacusError::SingularInterface);
    }
    Ok(-(s * h + 2.0 * l0 * c) / den)
}

/// Eigenvalues of the second-order finite-difference half-line Hamiltonian
/// with the Robin condition on a cell-centred ghost node. Error is `O(h²)`.
pub fn fd_oracle_levels(
    theta: f64,
    cfg: &PhysicalConfig,
    grid: &FdGrid,
    count: usize,
) -> Result<SpectrumResult> {
    cfg.validate()?;
    let ell = cfg.ell();
    let h = grid.h_over_ell * ell;
    let m = grid.nodes();
    let kin = cfg.hbar * cfg.hbar / (2.0 * cfg.mass * h * h);
    let g = robin_ghost_factor(theta, cfg.l0, h)?;
    let mut diag: Vec<f64> = (0..m)
        .map(|j| 2.0 * kin + cfg.potential((j as f64 + 0.5) * h))
        .collect();
    diag[0] -= kin * g;
    let off = vec![-kin; m - 1];
    let radius = diag
        .iter()
        .enumerate()
        .map(|(j, d)| d.abs() + if j == 0 || j == m - 1 { kin } else { 2.0 * kin })
        .fold(0.0, f64::max);
    let hw = cfg.hbar_omega();
    let (levels, residuals) = (0..count)
        .map(|k| {
            let (e, width) = kth_by_bisection(|l| sturm_count(&diag, &off, l), k, -radius, radius);
            (e / hw, width / hw)
        })
        .unzip();
    Ok(SpectrumResult {
        levels,
        residuals,
        boundary: Boundary::Robin {
            theta: crate::numeric::wrap_angle(theta),
        },
        method: SpectrumMethod::FiniteDifference,
    })
}

/// Richardson extrapolation `(4E(h/2) - E(h))/3` of an `O(h²)` oracle.
pub fn richardson(coarse: &SpectrumResult, fine: &SpectrumResult) -> SpectrumResult {
    SpectrumResult {
        levels: coarse
            .levels
            .iter()
            .zip(&fine.levels)
            .map(|(c, f)| (4.0 * f - c) / 3.0)
            .collect(),
        residuals: coarse
            .levels
            .iter()
            .zip(&fine.levels)
            .map(|(c, f)| (f - c).abs() / 3.0)
            .collect(),
        ..fine.clone()
    }
}

/// Number of negative eigenvalues of a Hermitian 2×2 matrix.
fn negative_count_2x2(m: &Mat2) -> usize {
    let p = m.a().re;
    let r = m.d().re;
    let det = p * r - m.b().norm_sqr();
    if det < 0.0 {
        1
    } else if p + r < 0.0 {
        2
    } else {
        0
    }
}

/// Eigenvalues of the coupled two-component finite-difference Hamiltonian
/// for a general gate, without diagonalizing `U`: the connection condition
/// enters through the ghost matrix and the eigenvalue count below `λ` is the
/// inertia of the block LDLᴴ factorization of `H - λ`.
pub fn fd_coupled_levels(
    pi: &PointInteraction,
    cfg: &PhysicalConfig,
    grid: &FdGrid,
    count: usize,
) -> Result<SpectrumResult> {
    cfg.validate()?;
    let ell = cfg.ell();
    let h = grid.h_over_ell * ell;
    let m = grid.nodes();
    let kin = cfg.hbar * cfg.hbar / (2.0 * cfg.mass * h * h);
    let ghost = pi.ghost_matrix(h)?;
    let pot: Vec<f64> = (0..m).map(|j| 2.0 * kin + cfg.potential((j as f64 + 0.5) * h)).collect();
    let first = Mat2::IDENTITY.scale(C64::new(pot[0], 0.0)) - ghost.scale(C64::new(kin, 0.0));
    let b2 = kin * kin;

    let count_below = |lambda: f64| -> usize {
        let shift = Mat2::IDENTITY.scale(C64::new(lambda, 0.0));
        let mut d = first - shift;
        let mut n = negative_count_2x2(&d);
        for p in pot.iter().skip(1) {
            let inv = match d.inverse() {
                Some(inv) if inv.is_finite() => inv,
                _ => (d + Mat2::IDENTITY.scale(C64::new(f64::EPSILON * kin, 0.0)))
                    .inverse()
                    .unwrap_or(Mat2::ZERO),
            };
            d = Mat2::IDENTITY.scale(C64::new(p - lambda, 0.0)) - inv.scale(C64::new(b2, 0.0));
            // keep the pivot exactly Hermitian
            d = (d + d.adjoint()).scale(C64::new(0.5, 0.0));
            n += negative_count_2x2(&d);
        }
        n
    };

    let radius = ghost.0.iter().map(|z| z.norm()).sum::<f64>() * kin
        + pot.iter().fold(0.0f64, |a, p| a.max(p.abs()))
        + 2.0 * kin;
    let hw = cfg.hbar_omega();
    let (levels, residuals) = (0..count)
        .map(|k| {
            let (e, width) = kth_by_bisection(count_below, k, -radius, radius);
            (e / hw, width / hw)
        })
        .unzip();
    Ok(SpectrumResult {
        levels,
        residuals,
        boundary: Boundary::Gate { class: pi.class },
        method: SpectrumMethod::FiniteDifference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::su2core::{conjugate, random_bloch, random_su2, random_unitary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn cfg() -> PhysicalConfig {
        PhysicalConfig::default()
    }

    fn pi(u: UnitaryGate) -> PointInteraction {
        PointInteraction::new(u, 1.0).unwrap()
    }

    fn zero2(r: [C64; 2]) -> bool {
        r[0].norm() < 1e-15 && r[1].norm() < 1e-15
    }

    #[test]
    fn residual_examples() {
        let any = [C64::new(0.3, -1.0), C64::new(2.0, 0.5)];
        assert!(zero2(connection_residual(&pi(UnitaryGate::identity()), any, [ZERO; 2])));
        assert!(zero2(connection_residual(&pi(UnitaryGate::minus_identity()), [ZERO; 2], any)));
        let d = C64::new(0.7, 0.2);
        assert!(zero2(connection_residual(&pi(UnitaryGate::sigma1()), [ONE, ONE], [d, -d])));
        // and a non-admissible pair is caught
        let r = connection_residual(&pi(UnitaryGate::sigma1()), [ONE, ZERO], [ZERO; 2]);
        assert!(r[0].norm() > 0.5);
    }

    #[test]
    fn scattering_examples() {
        for k in [0.1, 1.0, 10.0] {
            let s = scattering_amplitudes(&pi(UnitaryGate::sigma1()), k).unwrap();
            assert!((s.t_lr - ONE).norm() < 1e-14 && s.r_lr.norm() < 1e-14);
            let s = scattering_amplitudes(&pi(UnitaryGate::hadamard()), k).unwrap();
            assert!((s.transmission() - 0.5).abs() < 1e-14);
            let s = scattering_amplitudes(&pi(UnitaryGate::minus_identity()), k).unwrap();
            assert!(s.transmission() < 1e-28 && (s.r_lr.norm() - 1.0).abs() < 1e-14);
        }
        assert!(scattering_amplitudes(&pi(UnitaryGate::sigma1()), 0.0).is_err());
    }

    #[test]
    fn scattering_solutions_satisfy_the_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = PointInteraction::new(random_unitary(&mut rng), 0.7).unwrap();
            for k in [0.05, 0.9, 13.0] {
                let s = scattering_amplitudes(&p, k).unwrap();
                assert!(s.unitarity_residual() < 1e-12);
                for (v, d) in [s.left_boundary_data(), s.right_boundary_data()] {
                    let r = connection_residual(&p, v, d);
                    assert!(r[0].norm() < 1e-12 && r[1].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn separating_gates_do_not_transmit() {
        let s = scattering_amplitudes(&pi(UnitaryGate::diagonal(0.4, 2.0)), 1.3).unwrap();
        assert!(s.transmission() < 1e-28 && s.t_rl.norm() < 1e-14);
    }

    #[test]
    fn dirichlet_and_neumann_ladders() {
        let d = robin_levels(PI, &cfg(), 4).unwrap();
        assert_eq!(d.levels, vec![1.5, 3.5, 5.5, 7.5]);
        let n = robin_levels(0.0, &cfg(), 4).unwrap();
        assert_eq!(n.levels, vec![0.5, 2.5, 4.5, 6.5]);
    }

    #[test]
    fn rgamma_values() {
        assert!((rgamma(1.0) - 1.0).abs() < 1e-15);
        assert!((rgamma(0.5) - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!((rgamma(-0.5) + 0.5 / PI.sqrt()).abs() < 1e-15);
        assert_eq!(rgamma(-3.0), 0.0);
        assert!(rgamma(-2.999999).abs() < 1e-5);
        assert!(rgamma(300.0) >= 0.0);
    }

    #[test]
    fn robin_levels_near_limits_approach_ladders() {
        // λ → ∞ from θ → 0⁺: Neumann; λ → 0⁻ from θ → π⁺: Dirichlet
        let n = robin_levels(1e-6, &cfg(), 3).unwrap();
        for (a, b) in n.levels.iter().zip([0.5, 2.5, 4.5]) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        let d = robin_levels(PI + 1e-6, &cfg(), 3).unwrap();
        for (a, b) in d.levels.iter().zip([1.5, 3.5, 5.5]) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn robin_residuals_and_ordering() {
        for theta in [0.3, FRAC_PI_4, FRAC_PI_2, 2.0, 4.0, 3.0 * FRAC_PI_2, 6.0] {
            let r = robin_levels(theta, &cfg(), 12).unwrap();
            assert!(r.levels.windows(2).all(|w| w[0] < w[1]));
            assert!(r.residuals.iter().all(|&x| x < 1e-8), "{theta}: {:?}", r.residuals);
        }
    }

    #[test]
    fn fd_oracle_ladders() {
        let c = cfg();
        let d = fd_oracle_levels(PI, &c, &FdGrid::default(), 2).unwrap();
        assert!((d.levels[0] - 1.5).abs() < 1e-4 && (d.levels[1] - 3.5).abs() < 1e-4, "{:?}", d.levels);
        let n = fd_oracle_levels(0.0, &c, &FdGrid::default(), 2).unwrap();
        assert!((n.levels[0] - 0.5).abs() < 1e-4 && (n.levels[1] - 2.5).abs() < 1e-4, "{:?}", n.levels);
    }

    #[test]
    fn analytic_matches_fd_oracle() {
        let c = cfg();
        for theta in [0.0, FRAC_PI_4, FRAC_PI_2, PI, 3.0 * FRAC_PI_2] {
            let a = robin_levels(theta, &c, 5).unwrap();
            let f = fd_oracle_levels(theta, &c, &FdGrid::default(), 5).unwrap();
            assert!(a.max_deviation(&f) < 1e-4, "θ={theta}: {:?} vs {:?}", a.levels, f.levels);
            let fine = fd_oracle_levels(theta, &c, &FdGrid::default().halved(), 5).unwrap();
            assert!(a.max_deviation(&richardson(&f, &fine)) < 1e-6);
        }
    }

    #[test]
    fn fd_oracle_converges_quadratically() {
        let c = cfg();
        let exact = robin_levels(FRAC_PI_2, &c, 4).unwrap();
        let coarse = fd_oracle_levels(FRAC_PI_2, &c, &FdGrid { h_over_ell: 1.0 / 32.0, ..FdGrid::default() }, 4).unwrap();
        let fine = fd_oracle_levels(FRAC_PI_2, &c, &FdGrid { h_over_ell: 1.0 / 64.0, ..FdGrid::default() }, 4).unwrap();
        for k in 0..4 {
            let ratio = (coarse.levels[k] - exact.levels[k]) / (fine.levels[k] - exact.levels[k]);
            assert!((ratio - 4.0).abs() < 0.2, "level {k}: ratio {ratio}");
        }
    }

    #[test]
    fn bloch_spectrum_is_the_full_ladder() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut gates = vec![UnitaryGate::sigma1(), UnitaryGate::sigma3(), UnitaryGate::hadamard()];
        gates.extend((0..3).map(|_| random_bloch(&mut rng).gate()));
        for u in gates {
            let s = spectrum(&pi(u), &c, 10).unwrap();
            let expect: Vec<f64> = (0..10).map(|n| n as f64 + 0.5).collect();
            assert_eq!(s.levels, expect);
        }
    }

    #[test]
    fn degenerate_diagonal_spectrum() {
        let c = cfg();
        let s = spectrum(&pi(UnitaryGate::diagonal(FRAC_PI_2, FRAC_PI_2)), &c, 6).unwrap();
        let r = robin_levels(FRAC_PI_2, &c, 3).unwrap();
        for k in 0..3 {
            assert_eq!(s.levels[2 * k], r.levels[k]);
            assert_eq!(s.levels[2 * k + 1], r.levels[k]);
        }
        let fd = fd_coupled_levels(&pi(UnitaryGate::diagonal(FRAC_PI_2, FRAC_PI_2)), &c, &FdGrid::default(), 6).unwrap();
        assert!(s.max_deviation(&fd) < 1e-4);
    }

    #[test]
    fn coupled_oracle_agrees_with_scalar_oracle() {
        let c = cfg();
        let u = UnitaryGate::diagonal(0.9, 4.1);
        let coupled = fd_coupled_levels(&pi(u), &c, &FdGrid::default(), 8).unwrap();
        let mut merged: Vec<f64> = fd_oracle_levels(0.9, &c, &FdGrid::default(), 8)
            .unwrap()
            .levels
            .into_iter()
            .chain(fd_oracle_levels(4.1, &c, &FdGrid::default(), 8).unwrap().levels)
            .collect();
        merged.sort_by(f64::total_cmp);
        for k in 0..8 {
            assert!((coupled.levels[k] - merged[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn isospectral_under_conjugation() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        // keep clear of the deep bound state of short attractive Robin lengths
        let mut angle = || loop {
            let t: f64 = rng.gen_range(0.1..6.2);
            if !(FRAC_PI_2..PI).contains(&t) {
                return t;
            }
        };
        for _ in 0..5 {
            let u = UnitaryGate::diagonal(angle(), angle());
            let mut rng = ChaCha8Rng::seed_from_u64(u.matrix().a().re.to_bits());
            let v = random_su2(&mut rng);
            let w = conjugate(&u, &v);
            let a = spectrum(&pi(u), &c, 6).unwrap();
            let b = spectrum(&pi(w), &c, 6).unwrap();
            assert!(a.max_deviation(&b) < 1e-9);
            let fd = fd_coupled_levels(&pi(w), &c, &FdGrid::default(), 6).unwrap();
            assert!(a.max_deviation(&fd) < 1e-4, "{:?} vs {:?}", a.levels, fd.levels);
        }
    }

    #[test]
    fn levels_fall_monotonically_as_theta_sweeps() {
        // Within each half period of θ the Robin length λ = L₀cot(θ/2) moves
        // monotonically and every level follows it without crossing its
        // neighbours.
        let c = cfg();
        for (start, end) in [(0.05, PI - 0.05), (PI + 0.05, 2.0 * PI - 0.05)] {
            let steps = 40;
            let curves: Vec<Vec<f64>> = (0..=steps)
                .map(|i| {
                    let t = start + (end - start) * i as f64 / steps as f64;
                    robin_levels(t, &c, 5).unwrap().levels
                })
                .collect();
            for w in curves.windows(2) {
                for n in 0..5 {
                    assert!(w[1][n] < w[0][n]);
                }
            }
            for curve in &curves {
                assert!(curve.windows(2).all(|p| p[0] < p[1]));
            }
        }
    }
}
