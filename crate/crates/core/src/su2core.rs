//! Two-by-two unitary algebra: Pauli expansion, Bloch parametrization,
//! conjugation, diagonalization and lowering of arbitrary U(2) targets to
//! sequences of Bloch-sphere reflections.
//!
//! A point interaction at the origin is characterized by a matrix `U ∈ U(2)`.
//! The Hermitian members of the conjugacy class of `σ₃` are the reflections
//! `σ(c) = c₁σ₁ + c₂σ₂ + c₃σ₃` with `|c| = 1`; these are the gates that act as
//! `-iU` after half an oscillator period.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AbacusError, Result};
use crate::numeric::{wrap_angle, wrap_symmetric, Tolerances, C64, I, ONE, ZERO};

/// Dense complex two-by-two matrix, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat2(pub [C64; 4]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([a, b, c, d])
    }

    pub const IDENTITY: Mat2 = Mat2([ONE, ZERO, ZERO, ONE]);
    pub const ZERO: Mat2 = Mat2([ZERO, ZERO, ZERO, ZERO]);

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2([a, ZERO, ZERO, d])
    }

    pub fn a(&self) -> C64 {
        self.0[0]
    }
    pub fn b(&self) -> C64 {
        self.0[1]
    }
    pub fn c(&self) -> C64 {
        self.0[2]
    }
    pub fn d(&self) -> C64 {
        self.0[3]
    }

    pub fn adjoint(&self) -> Mat2 {
        let [a, b, c, d] = self.0;
        Mat2([a.conj(), c.conj(), b.conj(), d.conj()])
    }

    pub fn det(&self) -> C64 {
        let [a, b, c, d] = self.0;
        a * d - b * c
    }

    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[3]
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        Mat2(self.0.map(|z| z * s))
    }

    /// Inverse, or `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        let [a, b, c, d] = self.0;
        Some(Mat2([d / det, -b / det, -c / det, a / det]))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let [a, b, c, d] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Mat2::IDENTITY)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        Mat2([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        Mat2(self.0.map(|z| -z))
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "[[{a:.6}, {b:.6}], [{c:.6}, {d:.6}]]")
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.0.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Layout {
            Flat(Vec<[f64; 2]>),
            Nested(Vec<Vec<[f64; 2]>>),
        }
        let flat: Vec<[f64; 2]> = match Layout::deserialize(d)? {
            Layout::Flat(v) => v,
            Layout::Nested(rows) => {
                if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
                    return Err(serde::de::Error::custom("expected a 2x2 matrix"));
                }
                rows.into_iter().flatten().collect()
            }
        };
        if flat.len() != 4 {
            return Err(serde::de::Error::custom(
                "expected four [re, im] pairs in row-major order",
            ));
        }
        Ok(Mat2(std::array::from_fn(|k| {
            C64::new(flat[k][0], flat[k][1])
        })))
    }
}

pub const SIGMA1: Mat2 = Mat2([ZERO, ONE, ONE, ZERO]);
pub const SIGMA2: Mat2 = Mat2([ZERO, C64::new(0.0, -1.0), I, ZERO]);
pub const SIGMA3: Mat2 = Mat2([ONE, ZERO, ZERO, C64::new(-1.0, 0.0)]);

/// A validated element of U(2).
#[derive(Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitaryGate(Mat2);

impl UnitaryGate {
    /// Validates `U†U = I` and `|det U| = 1` at the algebraic tolerance.
    pub fn new(m: Mat2) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::DEFAULT.algebraic)
    }

    pub fn with_tolerance(m: Mat2, tol: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(AbacusError::NotUnitary {
                deviation: f64::INFINITY,
            });
        }
        let deviation = m
            .unitarity_deviation()
            .max((m.det().norm() - 1.0).abs());
        if deviation > tol {
            return Err(AbacusError::NotUnitary { deviation });
        }
        Ok(UnitaryGate(m))
    }

    /// Wraps a matrix that is unitary by construction.
    pub(crate) fn from_trusted(m: Mat2) -> Self {
        debug_assert!(m.unitarity_deviation() < 1e-9, "not unitary: {m:?}");
        UnitaryGate(m)
    }

    pub fn identity() -> Self {
        UnitaryGate(Mat2::IDENTITY)
    }
    pub fn minus_identity() -> Self {
        UnitaryGate(-Mat2::IDENTITY)
    }
    pub fn sigma1() -> Self {
        UnitaryGate(SIGMA1)
    }
    pub fn sigma2() -> Self {
        UnitaryGate(SIGMA2)
    }
    pub fn sigma3() -> Self {
        UnitaryGate(SIGMA3)
    }
    /// `(σ₁ + σ₃)/√2`.
    pub fn hadamard() -> Self {
        UnitaryGate((SIGMA1 + SIGMA3).scale(C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)))
    }
    pub fn diagonal(theta_plus: f64, theta_minus: f64) -> Self {
        UnitaryGate(Mat2::diag(
            C64::from_polar(1.0, theta_plus),
            C64::from_polar(1.0, theta_minus),
        ))
    }
    /// `exp(i φ σ_k / 2 · 2) = exp(i angle σ_k)` for Pauli axis `k ∈ {1,2,3}`.
    pub fn pauli_exp(axis: usize, angle: f64) -> Self {
        let sigma = match axis {
            1 => SIGMA1,
            2 => SIGMA2,
            _ => SIGMA3,
        };
        UnitaryGate(
            Mat2::IDENTITY.scale(C64::new(angle.cos(), 0.0)) + sigma.scale(I * angle.sin()),
        )
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn adjoint(&self) -> UnitaryGate {
        UnitaryGate(self.0.adjoint())
    }

    pub fn mul(&self, rhs: &UnitaryGate) -> UnitaryGate {
        UnitaryGate(self.0 * rhs.0)
    }

    /// Multiplies by a global phase `e^{iφ}`.
    pub fn phased(&self, phi: f64) -> UnitaryGate {
        UnitaryGate(self.0.scale(C64::from_polar(1.0, phi)))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        self.0.apply(v)
    }

    pub fn max_abs_diff(&self, other: &UnitaryGate) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Eigenvalues, unordered.
    pub fn eigenvalues(&self) -> [C64; 2] {
        let half_tr = self.0.trace() * 0.5;
        let disc = (half_tr * half_tr - self.0.det()).sqrt();
        [half_tr + disc, half_tr - disc]
    }
}

impl fmt::Debug for UnitaryGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnitaryGate{:?}", self.0)
    }
}

impl<'de> Deserialize<'de> for UnitaryGate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Mat2::deserialize(d)?;
        UnitaryGate::new(m).map_err(serde::de::Error::custom)
    }
}

/// Unit vector on the Bloch sphere; `σ(c) = Σ cᵢσᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub c: [f64; 3],
}

impl BlochVector {
    /// `(sin μ cos ν, sin μ sin ν, cos μ)`.
    pub fn from_angles(mu: f64, nu: f64) -> Self {
        BlochVector {
            c: [mu.sin() * nu.cos(), mu.sin() * nu.sin(), mu.cos()],
        }
    }

    /// Normalizes an arbitrary nonzero real vector.
    pub fn from_vector(v: [f64; 3]) -> Option<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(BlochVector {
            c: [v[0] / n, v[1] / n, v[2] / n],
        })
    }

    /// Polar and azimuthal angles with `μ ∈ [0, π]` and `ν ∈ [0, 2π)`.
    pub fn angles(&self) -> (f64, f64) {
        let mu = self.c[2].clamp(-1.0, 1.0).acos();
        let nu = wrap_angle(self.c[1].atan2(self.c[0]));
        (mu, nu)
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        (0..3).map(|k| self.c[k] * other.c[k]).sum()
    }

    pub fn cross(&self, other: &BlochVector) -> [f64; 3] {
        let (a, b) = (self.c, other.c);
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn matrix(&self) -> Mat2 {
        pauli_compose(ZERO, self.c.map(|x| C64::new(x, 0.0)))
    }

    pub fn gate(&self) -> UnitaryGate {
        UnitaryGate::from_trusted(self.matrix())
    }
}

/// Separating gate `diag(e^{iθ₊}, e^{iθ₋})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGate {
    pub theta_plus: f64,
    pub theta_minus: f64,
}

impl DiagonalGate {
    pub fn new(theta_plus: f64, theta_minus: f64) -> Self {
        DiagonalGate {
            theta_plus: wrap_angle(theta_plus),
            theta_minus: wrap_angle(theta_minus),
        }
    }

    pub fn gate(&self) -> UnitaryGate {
        UnitaryGate::diagonal(self.theta_plus, self.theta_minus)
    }
}

/// One factor of a decomposition: a Bloch reflection or one of `±I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlochStep {
    Bloch(BlochVector),
    PlusIdentity,
    MinusIdentity,
}

impl BlochStep {
    pub fn gate(&self) -> UnitaryGate {
        match self {
            BlochStep::Bloch(v) => v.gate(),
            BlochStep::PlusIdentity => UnitaryGate::identity(),
            BlochStep::MinusIdentity => UnitaryGate::minus_identity(),
        }
    }
}

/// `target = e^{iξ} · steps[0] · steps[1] · … · steps[k-1]` (matrix-product
/// order; the last factor acts first in time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecomposition {
    pub xi: f64,
    pub steps: Vec<BlochStep>,
    pub target: UnitaryGate,
}

impl GateDecomposition {
    pub fn product(&self) -> UnitaryGate {
        self.steps
            .iter()
            .fold(UnitaryGate::identity(), |acc, s| acc.mul(&s.gate()))
            .phased(self.xi)
    }

    pub fn reconstruction_error(&self) -> f64 {
        self.product().max_abs_diff(&self.target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateClass {
    ScaleInvariantBloch,
    PlusIdentity,
    MinusIdentity,
    SeparatingDiagonal,
    Generic,
}

impl GateClass {
    /// Gates whose half-period evolution is `-iU`.
    pub fn is_scale_invariant(self) -> bool {
        matches!(
            self,
            GateClass::ScaleInvariantBloch | GateClass::PlusIdentity | GateClass::MinusIdentity
        )
    }
}

/// Expansion `U = c₀I + Σ cᵢσᵢ`.
pub fn pauli_decompose(u: &Mat2) -> (C64, [C64; 3]) {
    let [a, b, c, d] = u.0;
    let c0 = (a + d) * 0.5;
    let c1 = (b + c) * 0.5;
    let c2 = I * (b - c) * 0.5;
    let c3 = (a - d) * 0.5;
    (c0, [c1, c2, c3])
}

pub fn pauli_compose(c0: C64, c: [C64; 3]) -> Mat2 {
    Mat2([c0 + c[2], c[0] - I * c[1], c[0] + I * c[1], c0 - c[2]])
}

/// `σ(c)` with `c = (sin μ cos ν, sin μ sin ν, cos μ)`.
pub fn bloch_matrix(mu: f64, nu: f64) -> UnitaryGate {
    BlochVector::from_angles(mu, nu).gate()
}

/// `V U V⁻¹`; any unitary `V` is accepted.
pub fn conjugate(u: &UnitaryGate, v: &UnitaryGate) -> UnitaryGate {
    UnitaryGate::from_trusted(v.0 * u.0 * v.0.adjoint())
}

/// Finds `V ∈ SU(2)` with `V U V⁻¹ = diag(e^{iθ₊}, e^{iθ₋})`, `θ₊ ≤ θ₋`.
///
/// The first nonzero component of the `θ₊` eigenvector is made real
/// positive, which fixes `V` uniquely for nondegenerate `U`. A scalar `U`
/// returns `V = I`.
pub fn diagonalize(u: &UnitaryGate) -> (UnitaryGate, DiagonalGate) {
    let tol = Tolerances::DEFAULT.algebraic;
    let m = u.0;
    let [l1, l2] = u.eigenvalues();
    let (t1, t2) = (wrap_angle(l1.arg()), wrap_angle(l2.arg()));
    if (l1 - l2).norm() < tol {
        let t = wrap_angle((l1 + l2).arg());
        return (UnitaryGate::identity(), DiagonalGate::new(t, t));
    }
    let (lam, theta_plus, theta_minus) = if t1 <= t2 { (l1, t1, t2) } else { (l2, t2, t1) };

    // Null vector of U - λI from whichever row is better conditioned.
    let r1 = [m.b(), lam - m.a()];
    let r2 = [lam - m.d(), m.c()];
    let n1 = r1[0].norm_sqr() + r1[1].norm_sqr();
    let n2 = r2[0].norm_sqr() + r2[1].norm_sqr();
    let (v, n) = if n1 >= n2 { (r1, n1.sqrt()) } else { (r2, n2.sqrt()) };
    let mut v = [v[0] / n, v[1] / n];
    let lead = if v[0].norm() > tol { v[0] } else { v[1] };
    let phase = lead.conj() / lead.norm();
    v = [v[0] * phase, v[1] * phase];

    // W = [v | v⊥] has det 1; V = W†.
    let w = Mat2([v[0], -v[1].conj(), v[1], v[0].conj()]);
    (
        UnitaryGate::from_trusted(w.adjoint()),
        DiagonalGate {
            theta_plus,
            theta_minus,
        },
    )
}

pub fn classify(u: &UnitaryGate) -> GateClass {
    classify_with(u, Tolerances::DEFAULT.algebraic)
}

pub fn classify_with(u: &UnitaryGate, tol: f64) -> GateClass {
    let m = u.0;
    let hermitian = m.max_abs_diff(&m.adjoint()) < tol;
    if hermitian && m.trace().norm() < tol && (m.det() + ONE).norm() < tol {
        GateClass::ScaleInvariantBloch
    } else if m.max_abs_diff(&Mat2::IDENTITY) < tol {
        GateClass::PlusIdentity
    } else if m.max_abs_diff(&-Mat2::IDENTITY) < tol {
        GateClass::MinusIdentity
    } else if m.b().norm() < tol && m.c().norm() < tol {
        GateClass::SeparatingDiagonal
    } else {
        GateClass::Generic
    }
}

/// Bloch vector of a gate classified as [`GateClass::ScaleInvariantBloch`].
pub fn bloch_vector_of(u: &UnitaryGate) -> Option<BlochVector> {
    if classify(u) != GateClass::ScaleInvariantBloch {
        return None;
    }
    let (_, c) = pauli_decompose(&u.0);
    BlochVector::from_vector(c.map(|z| z.re))
}

/// Equatorial pair `a = (1,0,0)`, `b = (cos δ, sin δ, 0)` with
/// `σ(a)σ(b) = diag(e^{iδ}, e^{-iδ})`.
fn equatorial_pair(delta: f64) -> [BlochStep; 2] {
    [
        BlochStep::Bloch(BlochVector { c: [1.0, 0.0, 0.0] }),
        BlochStep::Bloch(BlochVector {
            c: [delta.cos(), delta.sin(), 0.0],
        }),
    ]
}

/// Writes `U = e^{iξ} Π σ(step)` with at most four Bloch factors.
///
/// Bloch gates and `±I` come back as a single step with `ξ = 0`; a Bloch
/// gate up to phase as a single step; a diagonal gate as the equatorial pair;
/// anything else as `σ(c) σ(a) σ(b) σ(c)` where `σ(c)` carries the
/// diagonalizing conjugation.
pub fn decompose_gate(u: &UnitaryGate) -> GateDecomposition {
    let tol = Tolerances::DEFAULT.algebraic;
    let m = u.0;
    let done = |xi: f64, steps: Vec<BlochStep>| GateDecomposition {
        xi,
        steps,
        target: *u,
    };
    match classify(u) {
        GateClass::ScaleInvariantBloch => {
            let v = bloch_vector_of(u).expect("classified as Bloch");
            return done(0.0, vec![BlochStep::Bloch(v)]);
        }
        GateClass::PlusIdentity => return done(0.0, vec![BlochStep::PlusIdentity]),
        GateClass::MinusIdentity => return done(0.0, vec![BlochStep::MinusIdentity]),
        _ => {}
    }

    let (c0, c) = pauli_decompose(&m);
    let c_norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if c_norm < tol {
        // e^{iθ}I
        return done(wrap_symmetric(c0.arg()), vec![BlochStep::PlusIdentity]);
    }
    if m.b().norm() < tol && m.c().norm() < tol {
        // Already separating; the equatorial pair alone suffices.
        let (ta, td) = (m.a().arg(), m.d().arg());
        let [sa, sb] = equatorial_pair(0.5 * (ta - td));
        return done(wrap_symmetric(0.5 * (ta + td)), vec![sa, sb]);
    }

    if c0.norm() < tol {
        // e^{iφ}σ(n): strip the phase carried by the dominant coefficient.
        let k = (0..3)
            .max_by(|&i, &j| c[i].norm().total_cmp(&c[j].norm()))
            .unwrap_or(0);
        let phi = c[k].arg();
        let rot = C64::from_polar(1.0, -phi);
        let real = c.map(|z| (z * rot).re);
        if let Some(n) = BlochVector::from_vector(real) {
            let candidate = done(wrap_symmetric(phi), vec![BlochStep::Bloch(n)]);
            if candidate.reconstruction_error() < tol {
                return candidate;
            }
        }
    }

    let (v, d) = diagonalize(u);
    let xi = 0.5 * (d.theta_plus + d.theta_minus);
    let [sa, sb] = equatorial_pair(0.5 * (d.theta_plus - d.theta_minus));

    // U = V† D V = W D W with W = V† Λ Hermitian, Λ diagonal unitary.
    let vd = v.0.adjoint();
    let p = vd.a();
    let q = vd.c();
    let rot = if p.norm() > tol { p.conj() / p.norm() } else { ONE };
    let w21 = q * rot;
    let cvec = BlochVector::from_vector([w21.re, w21.im, p.norm()])
        .expect("columns of an SU(2) matrix are unit vectors");
    let sc = BlochStep::Bloch(cvec);
    done(wrap_symmetric(xi), vec![sc, sa, sb, sc])
}

/// Haar-distributed element of SU(2) from a normalized Gaussian quaternion.
pub fn random_su2<R: Rng + ?Sized>(rng: &mut R) -> UnitaryGate {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let q = q.map(|x| x / n);
    UnitaryGate::from_trusted(pauli_compose(
        C64::new(q[0], 0.0),
        [I * q[1], I * q[2], I * q[3]],
    ))
}

/// Haar-distributed element of U(2): random SU(2) times a uniform phase.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> UnitaryGate {
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    random_su2(rng).phased(phase)
}

/// Uniformly distributed Bloch gate.
pub fn random_bloch<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if let Some(b) = BlochVector::from_vector(v) {
            return b;
        }
    }
}
