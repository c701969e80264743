//! Exact linear-time simulation of the measurement dynamics.
//!
//! During window `j` the measurement Hamiltonian acts as the identity on every
//! qubit except qubit `j`, and qubit `j` never interacts again once its window
//! closes. The global evolution is therefore the ordered product of `N`
//! two-body unitaries `U_j` on (qubit_j ⊗ pointer), and
//!
//! * the pointer state evolves by the collision map
//!   `ρ ↦ tr_q[U_j (|q⟩⟨q| ⊗ ρ) U_j†]` with a fresh qubit each time;
//! * the before/after fidelity is `‖M_N ⋯ M_1 v‖²` where `M_j = ⟨q|U_j|q⟩`
//!   and `v` is the initial pointer vector.
//!
//! Both are exact; nothing here truncates the back reaction.

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Case, Mat2, PointerDensity, QubitPureState, SimParams, C64, ONE};
use crate::propagator::{
    block_diagonal, pauli_x, propagate, IntegratorConfig, Mat4, SmallOperator,
};

/// Segments whose propagators are built in parallel before being consumed.
const PRECOMPUTE_CHUNK: usize = 4096;
const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPropagator {
    /// Ordering `(q, k) ∈ {00, 01, 10, 11}`.
    pub u: Mat4,
    pub segment_index: usize,
}

impl SegmentPropagator {
    pub fn identity(segment_index: usize) -> Self {
        Self {
            u: Mat4::identity(),
            segment_index,
        }
    }

    /// Pointer block `⟨q|U|q'⟩`.
    pub fn block(&self, q: usize, q_prime: usize) -> Mat2 {
        self.u.fixed_view::<2, 2>(2 * q, 2 * q_prime).into_owned()
    }

    /// Largest element coupling different qubit values.
    pub fn off_block_max(&self) -> f64 {
        self.block(0, 1)
            .iter()
            .chain(self.block(1, 0).iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Pointer-space compression `⟨q|U|q⟩` of a segment propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferOperator(pub Mat2);

impl TransferOperator {
    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let g = self.0.adjoint() * self.0;
        let a = g[(0, 0)].re;
        let d = g[(1, 1)].re;
        let b = g[(0, 1)].norm_sqr();
        let top = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b).sqrt();
        top.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub segments: usize,
    pub substeps_per_segment: usize,
    pub total_substeps: usize,
    pub max_unitarity_error: f64,
    pub max_trace_error: f64,
    pub min_pointer_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub case: Case,
    pub pointer_samples: Vec<(f64, PointerDensity)>,
    pub final_pointer: PointerDensity,
    pub final_p1: f64,
    pub final_p0: f64,
    pub fidelity: f64,
    pub diagnostics: Diagnostics,
}

/// The pointer block of the window-`j` generator for qubit value `q`:
/// `(t/T)(2h/ε)|q⟩⟨q|_K − γ(1 − t/T)σ_x`.
fn generator_block(q: usize, t: f64, params: &SimParams) -> Mat2 {
    let frac = t / params.t_final;
    let mut m = pauli_x() * C64::new(-params.gamma * (1.0 - frac), 0.0);
    m[(q, q)] += C64::new(frac * params.coupling_strength(), 0.0);
    m
}

/// The full 4×4 generator of window `j` on (qubit_j ⊗ pointer).
pub fn segment_generator(t: f64, params: &SimParams) -> Mat4 {
    block_diagonal(
        &generator_block(0, t, params),
        &generator_block(1, t, params),
    )
}

fn check_segment(j: usize, params: &SimParams) -> Result<()> {
    if j == 0 || j > params.n_qubits {
        return Err(Error::InvalidParameter(format!(
            "segment index {j} outside 1..={}",
            params.n_qubits
        )));
    }
    Ok(())
}

/// Integrator settings used for a full window.
pub fn integrator_config(params: &SimParams) -> IntegratorConfig {
    IntegratorConfig::midpoint(params.substeps_per_segment)
}

/// Propagator of window `j` from its start to `until`, with the substep count
/// scaled to the covered fraction of the window.
fn window_propagator(j: usize, until: f64, params: &SimParams) -> Result<SegmentPropagator> {
    let sched = params.schedule();
    let (start, end) = (sched.segment_start(j), sched.segment_end(j));
    let frac = (until - start) / (end - start);
    let substeps = ((params.substeps_per_segment as f64 * frac).ceil() as usize).max(1);
    let cfg = IntegratorConfig::midpoint(substeps);
    // the generator never mixes qubit values, so each pointer block is
    // propagated on its own and the 4×4 result is exactly block-diagonal
    let b0: Mat2 = propagate(|t| generator_block(0, t, params), start, until, &cfg)?;
    let b1: Mat2 = propagate(|t| generator_block(1, t, params), start, until, &cfg)?;
    Ok(SegmentPropagator {
        u: block_diagonal(&b0, &b1),
        segment_index: j,
    })
}

/// The unitary of window `j` (1-based) on (qubit_j ⊗ pointer).
pub fn segment_propagator(j: usize, params: &SimParams) -> Result<SegmentPropagator> {
    params.validate()?;
    check_segment(j, params)?;
    window_propagator(j, params.schedule().segment_end(j), params)
}

/// One collision: `tr_q[U (|q⟩⟨q| ⊗ ρ) U†]`.
pub fn collide(
    prop: &SegmentPropagator,
    qubit_in: &QubitPureState,
    rho: &PointerDensity,
) -> Result<PointerDensity> {
    let q = Vector2::new(qubit_in.amp0, qubit_in.amp1);
    let joint = (q * q.adjoint()).kronecker(rho.matrix());
    let evolved = prop.u * joint * prop.u.adjoint();
    let mut out = Mat2::zeros();
    for qv in 0..2 {
        out += evolved.fixed_view::<2, 2>(2 * qv, 2 * qv);
    }
    let out = PointerDensity(out);
    let drift = (out.trace() - ONE).norm();
    if drift > TRACE_TOL {
        return Err(Error::Consistency(format!(
            "collision {} changed the pointer trace by {drift:e}",
            prop.segment_index
        )));
    }
    Ok(out)
}

/// `M = ⟨q|U|q⟩`, acting on the pointer.
pub fn transfer(prop: &SegmentPropagator, qubit_state: &QubitPureState) -> TransferOperator {
    let a = [qubit_state.amp0, qubit_state.amp1];
    let mut m = Mat2::zeros();
    for (q1, a1) in a.iter().enumerate() {
        for (q2, a2) in a.iter().enumerate() {
            m += prop.block(q1, q2) * (a1.conj() * a2);
        }
    }
    TransferOperator(m)
}

/// Runs all `N` collisions, sampling the pointer at `t = 0`, after every
/// `sample_stride`-th segment, and at `t = T`.
pub fn run(params: &SimParams, sample_stride: usize) -> Result<RunResult> {
    params.validate()?;
    if sample_stride == 0 {
        return Err(Error::InvalidParameter(
            "sample_stride must be at least 1".into(),
        ));
    }
    let sched = params.schedule();
    let mut times: Vec<f64> = (0..=params.n_qubits)
        .step_by(sample_stride)
        .map(|k| sched.boundary(k))
        .collect();
    if !params.n_qubits.is_multiple_of(sample_stride) {
        times.push(params.t_final);
    }
    run_at_times(params, &times)
}

/// Like [`run`], sampling the pointer at arbitrary times in `[0, T]`.
/// Samples inside a window are computed from a partial window propagator.
pub fn run_at_times(params: &SimParams, sample_times: &[f64]) -> Result<RunResult> {
    params.validate()?;
    let mut samples = sample_times.to_vec();
    if samples.iter().any(|t| !(0.0..=params.t_final).contains(t)) {
        return Err(Error::InvalidParameter(
            "sample times must lie in [0, T]".into(),
        ));
    }
    samples.sort_by(f64::total_cmp);

    let n = params.n_qubits;
    let sched = params.schedule();
    let tol = 1e-12 * params.t_final;
    let qubit = params.qubit_state();
    let mut rho = PointerDensity::plus();
    let mut v = QubitPureState::plus().to_vector();
    let mut out = Vec::with_capacity(samples.len());
    let mut next = 0;
    let mut diag = Diagnostics {
        segments: n,
        substeps_per_segment: params.substeps_per_segment,
        total_substeps: 0,
        max_unitarity_error: 0.0,
        max_trace_error: 0.0,
        min_pointer_eigenvalue: f64::INFINITY,
    };

    let mut chunk_start = 1;
    while chunk_start <= n {
        let chunk_end = (chunk_start + PRECOMPUTE_CHUNK - 1).min(n);
        let props: Vec<SegmentPropagator> = (chunk_start..=chunk_end)
            .into_par_iter()
            .map(|j| window_propagator(j, sched.segment_end(j), params))
            .collect::<Result<_>>()?;

        for prop in &props {
            let j = prop.segment_index;
            let (start, end) = (sched.segment_start(j), sched.segment_end(j));
            while next < samples.len() && samples[next] < end - tol {
                let tau = samples[next];
                let state = if tau > start + tol {
                    let partial = window_propagator(j, tau, params)?;
                    collide(&partial, &qubit, &rho)?
                } else {
                    rho
                };
                out.push((tau, state));
                next += 1;
            }

            diag.max_unitarity_error = diag.max_unitarity_error.max(prop.u.unitarity_error());
            rho = collide(prop, &qubit, &rho)?;
            v = transfer(prop, &qubit).0 * v;
            diag.max_trace_error = diag.max_trace_error.max((rho.trace() - ONE).norm());
            diag.min_pointer_eigenvalue = diag.min_pointer_eigenvalue.min(rho.min_eigenvalue());
        }
        diag.total_substeps += props.len() * params.substeps_per_segment;
        chunk_start = chunk_end + 1;
    }
    for &tau in &samples[next..] {
        out.push((tau, rho));
    }

    let fidelity = v.norm_squared();
    Ok(RunResult {
        case: params.case,
        pointer_samples: out,
        final_pointer: rho,
        final_p1: rho.p1(),
        final_p0: rho.p0(),
        fidelity,
        diagnostics: diag,
    })
}

/// Maps a case-Φ result to case Ψ through the global bit flip, which commutes
/// with the measurement Hamiltonian and maps |φ⟩ to |ψ⟩ while fixing the
/// initial pointer state.
pub fn run_case_psi_via_symmetry(result_phi: &RunResult) -> Result<RunResult> {
    if result_phi.case != Case::Phi {
        return Err(Error::InvalidParameter(
            "symmetry map expects a case-phi result".into(),
        ));
    }
    let final_pointer = result_phi.final_pointer.bit_flipped();
    Ok(RunResult {
        case: Case::Psi,
        pointer_samples: result_phi
            .pointer_samples
            .iter()
            .map(|(t, rho)| (*t, rho.bit_flipped()))
            .collect(),
        final_pointer,
        final_p1: final_pointer.p1(),
        final_p0: final_pointer.p0(),
        fidelity: result_phi.fidelity,
        diagnostics: result_phi.diagnostics,
    })
}

/// Engine runs for both cases, Ψ computed directly.
pub fn run_both(params: &SimParams, sample_stride: usize) -> Result<(RunResult, RunResult)> {
    let (a, b) = rayon::join(
        || run(&params.with_case(Case::Phi), sample_stride),
        || run(&params.with_case(Case::Psi), sample_stride),
    );
    Ok((a?, b?))
}
