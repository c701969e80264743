//! Two-level annealing reference dynamics.
//!
//! The pointer, seen through the expectation value of the measurement
//! Hamiltonian in the collective state, follows an ordinary linear annealing
//! schedule `H(t) = ±(t/T) h σ_z' − γ(1 − t/T) σ_x` with
//! `σ_z' = |1⟩⟨1| − |0⟩⟨0|`. This module provides that Hamiltonian, its
//! closed-form adiabatic approximation, exact 2×2 eigensystems, the adiabatic
//! matrix element and a fine-step reference integration.

use crate::error::{invalid, Result};
use crate::model::{Case, Mat2, QubitPureState, SimParams, C64, ONE, ZERO};
use crate::propagator::{propagate, IntegratorConfig};

/// Gaps below this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Total midpoint substeps used by [`integrate_effective`].
pub const EFFECTIVE_SUBSTEPS: usize = 1 << 16;

/// Schedule constants `(h, γ, T)`. Unlike [`SimParams`], `h` may take either
/// sign so the bare annealing dynamics can be explored for both targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub h: f64,
    pub gamma: f64,
    pub t_final: f64,
}

impl From<&SimParams> for Schedule {
    fn from(p: &SimParams) -> Self {
        Schedule {
            h: p.h,
            gamma: p.gamma,
            t_final: p.t_final,
        }
    }
}

impl Schedule {
    pub fn new(h: f64, gamma: f64, t_final: f64) -> Result<Self> {
        if !h.is_finite() || h == 0.0 {
            return Err(invalid(format!("h must be finite and nonzero, got {h}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) || !(t_final.is_finite() && t_final > 0.0) {
            return Err(invalid("gamma and t_final must be positive and finite"));
        }
        Ok(Schedule { h, gamma, t_final })
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelHamiltonian(pub Mat2);

impl TwoLevelHamiltonian {
    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub ground_energy: f64,
    pub excited_energy: f64,
    pub ground_vec: QubitPureState,
    pub excited_vec: QubitPureState,
    pub gap: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticMetric {
    pub value: f64,
    pub gap: f64,
    pub degenerate: bool,
}

fn sigma_z_prime() -> Mat2 {
    Mat2::new(C64::new(-1.0, 0.0), ZERO, ZERO, ONE)
}

fn sigma_x() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}

/// `f(t) = −ht + √((ht)² + γ²(t−T)²)`, evaluated without cancellation.
pub fn f_of_t(t: f64, s: &Schedule) -> f64 {
    let ht = s.h * t;
    let drive = s.gamma * (t - s.t_final);
    let root = ht.hypot(drive);
    if ht > 0.0 {
        drive * drive / (root + ht)
    } else {
        root - ht
    }
}

/// The closed-form approximate annealing state for `H(t) = (t/T)h σ_z' − γ(1−t/T)σ_x`.
///
/// At `t = T` with `h > 0` the expression is 0/0; its limit |0⟩ is returned.
pub fn closed_form_phi_t(t: f64, s: &Schedule) -> QubitPureState {
    let f = f_of_t(t, s);
    let drive = s.gamma * (t - s.t_final);
    let denom = drive.hypot(f);
    if denom == 0.0 {
        return if s.h > 0.0 {
            QubitPureState::ZERO_KET
        } else {
            QubitPureState::ONE_KET
        };
    }
    QubitPureState::new(C64::new(-drive / denom, 0.0), C64::new(-f / denom, 0.0))
}

/// The bare annealing schedule `(t/T)h σ_z' − γ(1−t/T)σ_x`.
pub fn annealing_hamiltonian(t: f64, s: &Schedule) -> TwoLevelHamiltonian {
    let frac = t / s.t_final;
    TwoLevelHamiltonian(
        sigma_z_prime() * C64::new(frac * s.h, 0.0)
            + sigma_x() * C64::new(-s.gamma * (1.0 - frac), 0.0),
    )
}

/// Expectation of the measurement Hamiltonian in |Φ⟩ (or |Ψ⟩), dropping the
/// pointer-identity shift: Φ gets `−(t/T)h σ_z'`, Ψ gets `+(t/T)h σ_z'`.
pub fn effective_hamiltonian(case: Case, t: f64, s: &Schedule) -> TwoLevelHamiltonian {
    let frac = t / s.t_final;
    let field = case.field_sign() * frac * s.h;
    TwoLevelHamiltonian(
        sigma_z_prime() * C64::new(field, 0.0) + sigma_x() * C64::new(-s.gamma * (1.0 - frac), 0.0),
    )
}

/// Analytic `dH/dt` of [`effective_hamiltonian`].
pub fn effective_hamiltonian_rate(case: Case, s: &Schedule) -> TwoLevelHamiltonian {
    TwoLevelHamiltonian(
        sigma_z_prime() * C64::new(case.field_sign() * s.h / s.t_final, 0.0)
            + sigma_x() * C64::new(s.gamma / s.t_final, 0.0),
    )
}

/// Eigenvector of `b·σ` (standard Pauli, σ_z = diag(1, −1)) for eigenvalue `mu`.
fn pauli_eigenvector(bx: f64, by: f64, bz: f64, mu: f64) -> QubitPureState {
    // two candidate rows of (b·σ − μ)v = 0; take the better conditioned one
    let first = (C64::new(bx, -by), C64::new(mu - bz, 0.0));
    let second = (C64::new(bz + mu, 0.0), C64::new(bx, by));
    let n1 = first.0.norm_sqr() + first.1.norm_sqr();
    let n2 = second.0.norm_sqr() + second.1.norm_sqr();
    let (v, n) = if n1 >= n2 { (first, n1) } else { (second, n2) };
    let n = n.sqrt();
    fix_phase(QubitPureState::new(v.0 / n, v.1 / n))
}

/// First nonzero component made real and positive.
fn fix_phase(v: QubitPureState) -> QubitPureState {
    let lead = if v.amp0.norm() > 1e-15 {
        v.amp0
    } else {
        v.amp1
    };
    let ph = lead.conj() / lead.norm();
    QubitPureState::new(v.amp0 * ph, v.amp1 * ph)
}

/// Exact eigendecomposition of a 2×2 Hermitian matrix.
pub fn eigensystem(hm: &TwoLevelHamiltonian) -> EigenPair {
    let m = hm.matrix();
    let a0 = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let bz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let (bx, by) = (off.re, -off.im);
    let r = (bx * bx + by * by + bz * bz).sqrt();
    if r < DEGENERACY_TOL {
        return EigenPair {
            ground_energy: a0,
            excited_energy: a0,
            ground_vec: QubitPureState::ZERO_KET,
            excited_vec: QubitPureState::ONE_KET,
            gap: 0.0,
            degenerate: true,
        };
    }
    EigenPair {
        ground_energy: a0 - r,
        excited_energy: a0 + r,
        ground_vec: pauli_eigenvector(bx, by, bz, -r),
        excited_vec: pauli_eigenvector(bx, by, bz, r),
        gap: 2.0 * r,
        degenerate: false,
    }
}

/// `|⟨E₁(t)| dH/dt |G(t)⟩|` for the effective pointer Hamiltonian.
pub fn adiabatic_metric(case: Case, t: f64, s: &Schedule) -> AdiabaticMetric {
    let eig = eigensystem(&effective_hamiltonian(case, t, s));
    let rate = effective_hamiltonian_rate(case, s);
    let g = eig.ground_vec.to_vector();
    let e = eig.excited_vec.to_vector();
    let value = (e.adjoint() * rate.matrix() * g)[(0, 0)].norm();
    AdiabaticMetric {
        value,
        gap: eig.gap,
        degenerate: eig.degenerate,
    }
}

/// Integrates the effective pointer dynamics from `(|0⟩+|1⟩)/√2`, returning
/// the state at `samples` uniformly spaced times covering `[0, T]`.
pub fn integrate_effective(
    case: Case,
    s: &Schedule,
    samples: usize,
) -> Result<Vec<(f64, QubitPureState)>> {
    if samples < 2 {
        return Err(invalid("integrate_effective needs at least 2 samples"));
    }
    let intervals = samples - 1;
    let cfg = IntegratorConfig::midpoint(EFFECTIVE_SUBSTEPS.div_ceil(intervals).max(1));
    let times: Vec<f64> = (0..samples)
        .map(|i| {
            if i == intervals {
                s.t_final
            } else {
                s.t_final * i as f64 / intervals as f64
            }
        })
        .collect();
    let mut state = QubitPureState::plus().to_vector();
    let mut out = Vec::with_capacity(samples);
    out.push((0.0, QubitPureState::from_vector(&state)));
    for w in times.windows(2) {
        let u: Mat2 = propagate(
            |t| *effective_hamiltonian(case, t, s).matrix(),
            w[0],
            w[1],
            &cfg,
        )?;
        state = u * state;
        out.push((w[1], QubitPureState::from_vector(&state)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn defaults() -> Schedule {
        Schedule::new(0.5, 0.5, 10.0).unwrap()
    }

    #[test]
    fn f_values() {
        let s = defaults();
        assert_abs_diff_eq!(f_of_t(0.0, &s), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f_of_t(10.0, &s), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f_of_t(5.0, &s), -2.5 + 2.5 * 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(f_of_t(5.0, &s), 1.035_534, epsilon = 1e-6);
    }

    #[test]
    fn closed_form_values() {
        let s = defaults();
        let (p0, p1) = closed_form_phi_t(0.0, &s).probabilities();
        assert_abs_diff_eq!(p0, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p1, 0.5, epsilon = 1e-14);
        assert_eq!(closed_form_phi_t(10.0, &s), QubitPureState::ZERO_KET);
        let (p0, p1) = closed_form_phi_t(5.0, &s).probabilities();
        assert_abs_diff_eq!(p0, 0.853_553, epsilon = 1e-6);
        assert_abs_diff_eq!(p1, 0.146_447, epsilon = 1e-6);

        let neg = Schedule::new(-0.5, 0.5, 10.0).unwrap();
        assert_abs_diff_eq!(
            closed_form_phi_t(10.0, &neg).probabilities().1,
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn closed_form_tracks_instantaneous_ground_probabilities() {
        let s = defaults();
        for k in 0..100 {
            let t = k as f64 * 0.1;
            let cf = closed_form_phi_t(t, &s).probabilities();
            let g = eigensystem(&annealing_hamiltonian(t, &s))
                .ground_vec
                .probabilities();
            assert_abs_diff_eq!(cf.0, g.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_near_final_time_is_continuous() {
        let s = defaults();
        let p0 = closed_form_phi_t(10.0 - 1e-9, &s).probabilities().0;
        assert!(p0 > 1.0 - 1e-12);
    }

    #[test]
    fn fine_integration_cross_checks_closed_form_midpoint() {
        // the closed form is adiabatic, so agreement is to the adiabatic error
        let s = defaults();
        let traj = integrate_effective(Case::Psi, &s, 3).unwrap();
        let (p0, _) = traj[1].1.probabilities();
        assert_abs_diff_eq!(
            p0,
            closed_form_phi_t(5.0, &s).probabilities().0,
            epsilon = 0.05
        );
    }

    #[test]
    fn effective_hamiltonian_endpoints() {
        let s = defaults();
        let h0 = effective_hamiltonian(Case::Phi, 0.0, &s);
        assert_eq!(
            *h0.matrix(),
            Mat2::new(ZERO, C64::new(-0.5, 0.0), C64::new(-0.5, 0.0), ZERO)
        );
        let ht = effective_hamiltonian(Case::Phi, 10.0, &s);
        assert_abs_diff_eq!(ht.matrix()[(0, 0)].re, 0.5);
        assert_abs_diff_eq!(ht.matrix()[(1, 1)].re, -0.5);
        assert_abs_diff_eq!(ht.matrix()[(0, 1)].norm(), 0.0);
        let hp = effective_hamiltonian(Case::Psi, 10.0, &s);
        assert_abs_diff_eq!(hp.matrix()[(0, 0)].re, -0.5);
        assert_abs_diff_eq!(hp.matrix()[(1, 1)].re, 0.5);
    }

    #[test]
    fn eigensystem_examples() {
        let d = TwoLevelHamiltonian(Mat2::new(
            C64::new(0.5, 0.0),
            ZERO,
            ZERO,
            C64::new(-0.5, 0.0),
        ));
        let e = eigensystem(&d);
        assert_abs_diff_eq!(e.ground_energy, -0.5);
        assert_abs_diff_eq!(e.gap, 1.0);
        assert_eq!(e.ground_vec, QubitPureState::ONE_KET);
        assert_eq!(e.excited_vec, QubitPureState::ZERO_KET);

        let x = TwoLevelHamiltonian(sigma_x() * C64::new(-0.5, 0.0));
        let e = eigensystem(&x);
        assert_abs_diff_eq!(e.ground_energy, -0.5);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.ground_vec.amp0.re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(e.ground_vec.amp1.re, r, epsilon = 1e-15);

        let mid = eigensystem(&effective_hamiltonian(Case::Phi, 5.0, &defaults()));
        assert_abs_diff_eq!(mid.gap, 0.5 * 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(mid.gap, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_hamiltonian_flagged() {
        let e = eigensystem(&TwoLevelHamiltonian(Mat2::identity() * C64::new(0.3, 0.0)));
        assert!(e.degenerate);
        assert_eq!(e.gap, 0.0);
        assert_abs_diff_eq!(e.ground_vec.inner(&e.excited_vec).norm(), 0.0);
    }

    #[test]
    fn adiabatic_metric_values() {
        let s = defaults();
        assert_abs_diff_eq!(
            adiabatic_metric(Case::Phi, 0.0, &s).value,
            0.05,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            adiabatic_metric(Case::Phi, 10.0, &s).value,
            0.05,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            adiabatic_metric(Case::Phi, 5.0, &s).value,
            0.070_711,
            epsilon = 1e-6
        );
    }

    #[test]
    fn adiabatic_metric_finite_difference_cross_check() {
        let s = defaults();
        let dt = 1e-5;
        for t in [1.0, 3.3, 5.0, 7.9] {
            let fd = (effective_hamiltonian(Case::Phi, t + dt, &s).0
                - effective_hamiltonian(Case::Phi, t - dt, &s).0)
                / C64::new(2.0 * dt, 0.0);
            let eig = eigensystem(&effective_hamiltonian(Case::Phi, t, &s));
            let g = eig.ground_vec.to_vector();
            let e = eig.excited_vec.to_vector();
            let numeric = (e.adjoint() * fd * g)[(0, 0)].norm();
            assert_abs_diff_eq!(
                numeric,
                adiabatic_metric(Case::Phi, t, &s).value,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn adiabatic_metric_scales_inversely_with_duration() {
        let s = defaults();
        let s2 = s.with_t_final(20.0);
        for k in 0..=20 {
            let frac = k as f64 / 20.0;
            let a = adiabatic_metric(Case::Phi, frac * 10.0, &s).value;
            let b = adiabatic_metric(Case::Phi, frac * 20.0, &s2).value;
            assert_abs_diff_eq!(b, a / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn effective_integration_properties() {
        let s = defaults();
        let phi = integrate_effective(Case::Phi, &s, 101).unwrap();
        let psi = integrate_effective(Case::Psi, &s, 101).unwrap();
        for (_, st) in phi.iter().chain(psi.iter()) {
            assert!((st.norm_sqr() - 1.0).abs() < 1e-9);
        }
        let final_phi = phi.last().unwrap().1.probabilities().1;
        assert!(final_phi >= 0.95, "final p1 = {final_phi}");
        let final_psi = psi.last().unwrap().1.probabilities().0;
        assert_abs_diff_eq!(final_phi, final_psi, epsilon = 1e-10);
        assert!(integrate_effective(Case::Phi, &s, 1).is_err());
    }

    #[test]
    fn slower_schedules_track_ground_state_closer() {
        // Final-time populations oscillate with T, so compare the time-averaged
        // deviation from the instantaneous ground state.
        let devs: Vec<f64> = [5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&t| {
                let s = defaults().with_t_final(t);
                let traj = integrate_effective(Case::Phi, &s, 401).unwrap();
                traj.iter()
                    .map(|(tau, st)| {
                        let g = eigensystem(&effective_hamiltonian(Case::Phi, *tau, &s)).ground_vec;
                        1.0 - g.inner(st).norm_sqr()
                    })
                    .sum::<f64>()
                    / traj.len() as f64
            })
            .collect();
        for w in devs.windows(2) {
            assert!(w[1] < w[0], "{devs:?}");
        }
    }

    proptest! {
        #[test]
        fn closed_form_normalized(frac in 0.0f64..=1.0, h in 0.05f64..3.0, gamma in 0.05f64..3.0) {
            let s = Schedule::new(h, gamma, 10.0).unwrap();
            let st = closed_form_phi_t(frac * 10.0, &s);
            prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn closed_form_sign_relabel_symmetry(frac in 0.0f64..=1.0, h in 0.05f64..3.0) {
            let pos = Schedule::new(h, 0.5, 10.0).unwrap();
            let neg = Schedule::new(-h, 0.5, 10.0).unwrap();
            let (p0, p1) = closed_form_phi_t(frac * 10.0, &pos).probabilities();
            let (q0, q1) = closed_form_phi_t(frac * 10.0, &neg).probabilities();
            prop_assert!((p0 - q1).abs() < 1e-12);
            prop_assert!((p1 - q0).abs() < 1e-12);
        }

        #[test]
        fn eigenvalues_match_closed_form(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let hm = TwoLevelHamiltonian(sigma_z_prime() * C64::new(-a, 0.0) + sigma_x() * C64::new(-b, 0.0));
            let e = eigensystem(&hm);
            let r = a.hypot(b);
            prop_assert!((e.ground_energy + r).abs() < 1e-12);
            prop_assert!((e.excited_energy - r).abs() < 1e-12);
            if !e.degenerate {
                prop_assert!(e.ground_vec.inner(&e.excited_vec).norm() < 1e-10);
                let g = e.ground_vec.to_vector();
                let resid = hm.matrix() * g - g * C64::new(e.ground_energy, 0.0);
                prop_assert!(resid.norm() < 1e-10);
            }
        }
    }
}
