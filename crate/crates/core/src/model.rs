//! Shared domain types: run parameters, single-qubit states, pointer density
//! matrices and the step-function coupling schedule.
//!
//! Conventions used throughout the crate:
//! * every two-dimensional space uses the basis order (|0⟩, |1⟩);
//! * the global tensor order is qubit_1 ⊗ … ⊗ qubit_N ⊗ pointer;
//! * in dense encodings the pointer is bit 0 and qubit `j` is bit `j`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Vec2 = Vector2<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub const DEFAULT_H: f64 = 0.5;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_T_FINAL: f64 = 10.0;

/// Total midpoint substeps over `[0, T]` below which per-segment refinement
/// kicks in for small `N`.
pub const MIN_TOTAL_SUBSTEPS: usize = 1 << 17;
pub const MIN_SUBSTEPS_PER_SEGMENT: usize = 4;

/// Which collective state is fed to the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Phi,
    Psi,
}

impl Case {
    pub fn state_kind(self) -> StateKind {
        match self {
            Case::Phi => StateKind::PhiBase,
            Case::Psi => StateKind::PsiBase,
        }
    }

    /// Sign of the effective pointer field: `-1` drives Φ to |1⟩_K, `+1`
    /// drives Ψ to |0⟩_K.
    pub fn field_sign(self) -> f64 {
        match self {
            Case::Phi => -1.0,
            Case::Psi => 1.0,
        }
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Case::Phi => f.write_str("phi"),
            Case::Psi => f.write_str("psi"),
        }
    }
}

impl std::str::FromStr for Case {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi" => Ok(Case::Phi),
            "psi" => Ok(Case::Psi),
            other => Err(invalid(format!("unknown case '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    PhiBase,
    PsiBase,
}

pub fn default_substeps(n_qubits: usize) -> usize {
    MIN_SUBSTEPS_PER_SEGMENT.max(MIN_TOTAL_SUBSTEPS.div_ceil(n_qubits.max(1)))
}

/// Full configuration of one measurement run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub epsilon: f64,
    pub n_qubits: usize,
    pub h: f64,
    pub gamma: f64,
    pub t_final: f64,
    pub substeps_per_segment: usize,
    pub case: Case,
}

impl SimParams {
    /// Parameters with the common defaults `h = γ = 1/2`, `T = 10`, case Φ.
    pub fn new(epsilon: f64, n_qubits: usize) -> Result<Self> {
        let p = SimParams {
            epsilon,
            n_qubits,
            h: DEFAULT_H,
            gamma: DEFAULT_GAMMA,
            t_final: DEFAULT_T_FINAL,
            substeps_per_segment: default_substeps(n_qubits),
            case: Case::Phi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_case(mut self, case: Case) -> Self {
        self.case = case;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps_per_segment = substeps;
        self
    }

    /// Changes `N` and resets the substep count to the default for the new size.
    pub fn with_n(mut self, n_qubits: usize) -> Self {
        self.n_qubits = n_qubits;
        self.substeps_per_segment = default_substeps(n_qubits);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if self.n_qubits == 0 {
            return Err(invalid("n_qubits must be at least 1"));
        }
        for (name, v) in [
            ("h", self.h),
            ("gamma", self.gamma),
            ("t_final", self.t_final),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!(
                    "{name} must be a positive finite number, got {v}"
                )));
            }
        }
        if self.substeps_per_segment == 0 {
            return Err(invalid("substeps_per_segment must be at least 1"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> CouplingSchedule {
        CouplingSchedule {
            n_segments: self.n_qubits,
            t_final: self.t_final,
            h: self.h,
        }
    }

    pub fn qubit_state(&self) -> QubitPureState {
        // epsilon is validated wherever params are constructed
        make_state(self.epsilon, self.case.state_kind()).expect("validated epsilon")
    }

    /// Strength `2h/ε` of the qubit-pointer agreement term.
    pub fn coupling_strength(&self) -> f64 {
        2.0 * self.h / self.epsilon
    }

    pub fn lambda(&self) -> f64 {
        scaling_lambda(self.epsilon, self.n_qubits)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )))
    }
}

/// Pure state of a single two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitPureState {
    pub amp0: C64,
    pub amp1: C64,
}

impl QubitPureState {
    pub const ZERO_KET: Self = Self {
        amp0: ONE,
        amp1: ZERO,
    };
    pub const ONE_KET: Self = Self {
        amp0: ZERO,
        amp1: ONE,
    };

    pub fn new(amp0: C64, amp1: C64) -> Self {
        Self { amp0, amp1 }
    }

    /// `(|0⟩ + |1⟩)/√2`, the pointer's initial state.
    pub fn plus() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { amp0: a, amp1: a }
    }

    pub fn from_vector(v: &Vec2) -> Self {
        Self {
            amp0: v[0],
            amp1: v[1],
        }
    }

    pub fn to_vector(self) -> Vec2 {
        Vec2::new(self.amp0, self.amp1)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    pub fn probabilities(&self) -> (f64, f64) {
        (self.amp0.norm_sqr(), self.amp1.norm_sqr())
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Self) -> C64 {
        self.amp0.conj() * other.amp0 + self.amp1.conj() * other.amp1
    }

    pub fn density(&self) -> PointerDensity {
        let v = self.to_vector();
        PointerDensity(v * v.adjoint())
    }
}

/// Reduced density matrix of the pointer, basis (|0⟩_K, |1⟩_K).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerDensity(pub Mat2);

impl PointerDensity {
    /// `|+⟩⟨+|` with exact entries.
    pub fn plus() -> Self {
        PointerDensity(Mat2::from_element(C64::new(0.5, 0.0)))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn p0(&self) -> f64 {
        self.0[(0, 0)].re
    }

    pub fn p1(&self) -> f64 {
        self.0[(1, 1)].re
    }

    /// ⟨0|ρ|1⟩
    pub fn coherence(&self) -> C64 {
        self.0[(0, 1)]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = self.0[(0, 1)];
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        mean - radius
    }

    /// Checks Hermiticity, unit trace and positivity within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
            && (self.trace() - ONE).norm() <= tol
            && self.min_eigenvalue() >= -tol
    }

    /// X ρ X: conjugation by the pointer bit flip.
    pub fn bit_flipped(&self) -> Self {
        let m = &self.0;
        PointerDensity(Mat2::new(m[(1, 1)], m[(1, 0)], m[(0, 1)], m[(0, 0)]))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// View of the step couplings: segment `j` (1-based) owns the half-open
/// window `[T(j-1)/N, Tj/N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSchedule {
    pub n_segments: usize,
    pub t_final: f64,
    pub h: f64,
}

impl CouplingSchedule {
    pub fn segment_start(&self, j: usize) -> f64 {
        self.boundary(j - 1)
    }

    pub fn segment_end(&self, j: usize) -> f64 {
        self.boundary(j)
    }

    /// Boundary `Tk/N`, exact at `k = N`.
    pub fn boundary(&self, k: usize) -> f64 {
        if k == self.n_segments {
            self.t_final
        } else {
            self.t_final * k as f64 / self.n_segments as f64
        }
    }

    /// The active segment at time `t`, or `None` outside `[0, T)`.
    pub fn active_segment(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0 && t < self.t_final) {
            return None;
        }
        let guess = ((t * self.n_segments as f64 / self.t_final).floor() as usize)
            .min(self.n_segments - 1)
            + 1;
        // floating point can misplace t by one window near a boundary
        let j = if t < self.segment_start(guess) {
            guess - 1
        } else if t >= self.segment_end(guess) {
            guess + 1
        } else {
            guess
        };
        Some(j)
    }

    pub fn coupling(&self, j: usize, t: f64) -> f64 {
        if t >= self.segment_start(j) && t < self.segment_end(j) {
            self.h
        } else {
            0.0
        }
    }
}

/// |φ⟩ or |ψ⟩ for a given bias `epsilon`.
pub fn make_state(epsilon: f64, kind: StateKind) -> Result<QubitPureState> {
    check_epsilon(epsilon)?;
    let major = ((1.0 + epsilon) / 2.0).sqrt();
    let minor = ((1.0 - epsilon) / 2.0).sqrt();
    let (a0, a1) = match kind {
        StateKind::PhiBase => (major, minor),
        StateKind::PsiBase => (minor, major),
    };
    Ok(QubitPureState::new(C64::new(a0, 0.0), C64::new(a1, 0.0)))
}

/// ⟨Φ⁽ᴺ⁾|Ψ⁽ᴺ⁾⟩ = (1 − ε²)^(N/2).
pub fn overlap_collective(epsilon: f64, n: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    Ok((1.0 - epsilon * epsilon).powf(n as f64 / 2.0))
}

/// h_j(t): `h` inside segment `j`'s window, zero elsewhere (and at `t = T`).
pub fn coupling_at(j: usize, t: f64, params: &SimParams) -> Result<f64> {
    if j == 0 || j > params.n_qubits {
        return Err(invalid(format!(
            "segment index {j} outside 1..={}",
            params.n_qubits
        )));
    }
    if !(0.0..=params.t_final).contains(&t) {
        return Err(invalid(format!("time {t} outside [0, {}]", params.t_final)));
    }
    Ok(params.schedule().coupling(j, t))
}

/// λ = N ε².
pub fn scaling_lambda(epsilon: f64, n: usize) -> f64 {
    n as f64 * epsilon * epsilon
}
