//! Time-ordered propagation for small time-dependent Hermitian generators.
//!
//! Two schemes are available:
//! * [`Method::MidpointExponential`]: on each substep the generator is
//!   evaluated at the substep midpoint and its exact exponential applied
//!   (second-order Magnus). The result is unitary to roundoff at any step size.
//! * [`Method::Rk4`]: classical fourth-order Runge-Kutta, kept as an
//!   independent cross-check.
//!
//! Callers must split intervals at discontinuities of the generator.

use std::ops::{Add, Mul};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mat2, C64, ONE, ZERO};

pub type Mat4 = Matrix4<C64>;

const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Norm drift above which matrix-free steps renormalize the state.
pub const RENORMALIZE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MidpointExponential,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub substeps: usize,
    pub unitarity_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::MidpointExponential,
            substeps: 1,
            unitarity_tol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn midpoint(substeps: usize) -> Self {
        Self {
            method: Method::MidpointExponential,
            substeps,
            ..Self::default()
        }
    }

    pub fn rk4(substeps: usize) -> Self {
        Self {
            method: Method::Rk4,
            substeps,
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.unitarity_tol = tol;
        self
    }

    fn check(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(Error::InvalidParameter(
                "substeps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Small dense complex matrices the propagator can exponentiate.
pub trait SmallOperator:
    Copy + Add<Output = Self> + Mul<Output = Self> + Mul<C64, Output = Self>
{
    fn identity() -> Self;
    fn dagger(&self) -> Self;
    /// `exp(-i H dt)` for Hermitian `self`.
    fn exp_minus_i(&self, dt: f64) -> Self;
    fn max_abs(&self) -> f64;
    /// Scales every column to unit norm.
    fn normalize_columns(&mut self);

    /// `max |U†U − I|` elementwise.
    fn unitarity_error(&self) -> f64 {
        let mut d = self.dagger() * *self;
        d = d + Self::identity() * C64::new(-1.0, 0.0);
        d.max_abs()
    }
}

impl SmallOperator for Mat2 {
    fn identity() -> Self {
        Mat2::identity()
    }

    fn dagger(&self) -> Self {
        self.adjoint()
    }

    fn exp_minus_i(&self, dt: f64) -> Self {
        expm_hermitian_2x2(self, dt)
    }

    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn normalize_columns(&mut self) {
        for mut col in self.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= C64::new(n, 0.0);
            }
        }
    }
}

impl SmallOperator for Mat4 {
    fn identity() -> Self {
        Mat4::identity()
    }

    fn dagger(&self) -> Self {
        self.adjoint()
    }

    fn exp_minus_i(&self, dt: f64) -> Self {
        expm_hermitian_eig(self, dt)
    }

    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn normalize_columns(&mut self) {
        for mut col in self.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= C64::new(n, 0.0);
            }
        }
    }
}

/// Closed-form `exp(-i H dt)` for a 2×2 Hermitian `H = a₀I + b·σ`:
/// `e^{-i a₀ dt} (cos(|b|dt) I − i sin(|b|dt) b̂·σ)`.
pub fn expm_hermitian_2x2(h: &Mat2, dt: f64) -> Mat2 {
    let a0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let off = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
    let r = (bz * bz + off.norm_sqr()).sqrt();
    let theta = r * dt;
    let c = theta.cos();
    // sin(r dt)/r, finite as r → 0
    let s_over_r = if theta.abs() < 1e-8 {
        dt * (1.0 - theta * theta / 6.0)
    } else {
        theta.sin() / r
    };
    let phase = C64::from_polar(1.0, -a0 * dt);
    let mis = MINUS_I * s_over_r;
    let m00 = C64::new(c, 0.0) + mis * bz;
    let m11 = C64::new(c, 0.0) - mis * bz;
    let m01 = mis * off;
    let m10 = mis * off.conj();
    Mat2::new(m00, m01, m10, m11) * phase
}

/// `exp(-i H dt)` through the Hermitian eigendecomposition `H = V Λ V†`.
pub fn expm_hermitian_eig(h: &Mat4, dt: f64) -> Mat4 {
    // symmetrize so roundoff in the caller cannot leak an anti-Hermitian part
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let v = eig.eigenvectors;
    let mut scaled = v;
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let ph = C64::from_polar(1.0, -lambda * dt);
        for row in 0..4 {
            scaled[(row, k)] *= ph;
        }
    }
    scaled * v.adjoint()
}

/// Approximates the time-ordered exponential of `-i∫H dt` over `[t0, t1]`.
pub fn propagate<M, G>(generator: G, t0: f64, t1: f64, config: &IntegratorConfig) -> Result<M>
where
    M: SmallOperator,
    G: Fn(f64) -> M,
{
    config.check()?;
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidParameter(format!(
            "propagation interval [{t0}, {t1}] is empty"
        )));
    }
    let dt = (t1 - t0) / config.substeps as f64;
    let mut u = M::identity();
    match config.method {
        Method::MidpointExponential => {
            for k in 0..config.substeps {
                let tm = t0 + (k as f64 + 0.5) * dt;
                u = generator(tm).exp_minus_i(dt) * u;
            }
        }
        Method::Rk4 => {
            let mi = MINUS_I;
            let half = C64::new(0.5 * dt, 0.0);
            let full = C64::new(dt, 0.0);
            let sixth = C64::new(dt / 6.0, 0.0);
            let two = C64::new(2.0, 0.0);
            for k in 0..config.substeps {
                let t = t0 + k as f64 * dt;
                let h0 = generator(t);
                let hm = generator(t + 0.5 * dt);
                let h1 = generator(t + dt);
                let k1 = h0 * u * mi;
                let k2 = hm * (u + k1 * half) * mi;
                let k3 = hm * (u + k2 * half) * mi;
                let k4 = h1 * (u + k3 * full) * mi;
                u = u + (k1 + k2 * two + k3 * two + k4) * sixth;
            }
            u.normalize_columns();
        }
    }
    let err = u.unitarity_error();
    if err > config.unitarity_tol {
        return Err(Error::Convergence(format!(
            "propagator unitarity error {err:e} exceeds tolerance {:e}",
            config.unitarity_tol
        )));
    }
    Ok(u)
}

/// Diagnostics from a matrix-free propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub substeps: usize,
    pub renormalizations: usize,
    pub max_norm_drift: f64,
}

impl StepReport {
    pub fn merge(&mut self, other: &StepReport) {
        self.substeps += other.substeps;
        self.renormalizations += other.renormalizations;
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
    }
}

/// Advances `state` from `t0` to `t1` under a generator given only through its
/// action `apply(t, x, out)` which must write `H(t) x` into `out`.
///
/// The midpoint scheme uses a Taylor-series exponential of the frozen
/// midpoint generator, summed until the terms fall below roundoff.
pub fn apply_generator_step<G>(
    state: &mut [C64],
    apply: G,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<StepReport>
where
    G: Fn(f64, &[C64], &mut [C64]),
{
    config.check()?;
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidParameter(format!(
            "propagation interval [{t0}, {t1}] is empty"
        )));
    }
    let n = state.len();
    let dt = (t1 - t0) / config.substeps as f64;
    let mut report = StepReport::default();
    let mut buf = vec![ZERO; n];

    match config.method {
        Method::Rk4 => {
            let mut k1 = vec![ZERO; n];
            let mut k2 = vec![ZERO; n];
            let mut k3 = vec![ZERO; n];
            let mut k4 = vec![ZERO; n];
            for step in 0..config.substeps {
                let t = t0 + step as f64 * dt;
                apply(t, state, &mut k1);
                scale_in_place(&mut k1, MINUS_I);
                axpy_into(&mut buf, state, &k1, 0.5 * dt);
                apply(t + 0.5 * dt, &buf, &mut k2);
                scale_in_place(&mut k2, MINUS_I);
                axpy_into(&mut buf, state, &k2, 0.5 * dt);
                apply(t + 0.5 * dt, &buf, &mut k3);
                scale_in_place(&mut k3, MINUS_I);
                axpy_into(&mut buf, state, &k3, dt);
                apply(t + dt, &buf, &mut k4);
                scale_in_place(&mut k4, MINUS_I);
                let w = dt / 6.0;
                for i in 0..n {
                    state[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
                }
                check_norm(state, config, &mut report)?;
            }
        }
        Method::MidpointExponential => {
            let mut term = vec![ZERO; n];
            let mut acc = vec![ZERO; n];
            for step in 0..config.substeps {
                let tm = t0 + (step as f64 + 0.5) * dt;
                acc.copy_from_slice(state);
                term.copy_from_slice(state);
                let scale = vec_norm(state).max(f64::MIN_POSITIVE);
                for order in 1..=64 {
                    apply(tm, &term, &mut buf);
                    let c = MINUS_I * (dt / order as f64);
                    let mut tn = 0.0;
                    for i in 0..n {
                        term[i] = buf[i] * c;
                        acc[i] += term[i];
                        tn += term[i].norm_sqr();
                    }
                    if tn.sqrt() <= 1e-17 * scale {
                        break;
                    }
                    if order == 64 {
                        return Err(Error::Convergence(
                            "Taylor exponential did not converge; reduce the step size".into(),
                        ));
                    }
                }
                state.copy_from_slice(&acc);
                check_norm(state, config, &mut report)?;
            }
        }
    }
    Ok(report)
}

fn check_norm(state: &mut [C64], config: &IntegratorConfig, report: &mut StepReport) -> Result<()> {
    report.substeps += 1;
    let norm = vec_norm(state);
    let drift = (norm - 1.0).abs();
    report.max_norm_drift = report.max_norm_drift.max(drift);
    if drift > config.unitarity_tol {
        return Err(Error::Convergence(format!(
            "state norm drifted by {drift:e}, tolerance {:e}",
            config.unitarity_tol
        )));
    }
    if drift > RENORMALIZE_THRESHOLD {
        log::debug!("renormalizing state after norm drift {drift:e}");
        report.renormalizations += 1;
        let inv = 1.0 / norm;
        for z in state.iter_mut() {
            *z *= inv;
        }
    }
    Ok(())
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn scale_in_place(v: &mut [C64], c: C64) {
    for z in v.iter_mut() {
        *z *= c;
    }
}

fn axpy_into(out: &mut [C64], x: &[C64], k: &[C64], a: f64) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + ki * a;
    }
}

/// Embeds two 2×2 pointer blocks as the qubit-diagonal 4×4 operator
/// `|0⟩⟨0| ⊗ B₀ + |1⟩⟨1| ⊗ B₁`, ordering `(q, k) ∈ {00, 01, 10, 11}`.
pub fn block_diagonal(b0: &Mat2, b1: &Mat2) -> Mat4 {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(b0);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(b1);
    m
}

pub(crate) fn pauli_x() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}
