//! Brute-force reference on the full `2^(N+1)`-dimensional joint space.
//!
//! Amplitude index layout: bit 0 is the pointer, bit `j` is qubit `j`.
//! The measurement Hamiltonian is applied matrix-free and integrated with
//! RK4 by default, so the oracle shares no exponentiation code with the
//! collision engine.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Mat2, PointerDensity, QubitPureState, SimParams, C64, ZERO};
use crate::propagator::{apply_generator_step, IntegratorConfig, StepReport};

pub const DENSE_MAX_QUBITS: usize = 16;
/// Largest `N` for which the reduced system density may be materialized.
pub const SYSTEM_DENSITY_MAX_QUBITS: usize = 12;
/// Total RK4 substeps over `[0, T]` for small `N`.
pub const DENSE_TOTAL_SUBSTEPS: usize = 1 << 14;
pub const DEFAULT_UNIFORM_SAMPLES: usize = 64;

const MINUS_I: C64 = C64::new(0.0, -1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl JointState {
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_cap(n_qubits)?;
        if amps.len() != 1 << (n_qubits + 1) {
            return Err(Error::InvalidParameter(format!(
                "expected {} amplitudes for N = {n_qubits}, got {}",
                1usize << (n_qubits + 1),
                amps.len()
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    /// `|φ⟩^⊗N ⊗ (|0⟩+|1⟩)/√2` (or the ψ analogue, per `params.case`).
    pub fn initial(params: &SimParams) -> Result<Self> {
        params.validate()?;
        check_cap(params.n_qubits)?;
        let collective = collective_vector(params.n_qubits, &params.qubit_state());
        let pointer = QubitPureState::plus();
        let mut amps = Vec::with_capacity(collective.len() * 2);
        for w in collective {
            amps.push(w * pointer.amp0);
            amps.push(w * pointer.amp1);
        }
        Self::new(params.n_qubits, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Population of |1⟩ on qubit `j` (1-based).
    pub fn qubit_population_one(&self, j: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> j) & 1 == 1)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_MAX_QUBITS {
        Err(Error::Resource(format!(
            "dense oracle is capped at N <= {DENSE_MAX_QUBITS}, requested N = {n}"
        )))
    } else {
        Ok(())
    }
}

/// Amplitudes of `|q⟩^⊗N`, indexed with qubit `j` at bit `j − 1`.
pub fn collective_vector(n: usize, q: &QubitPureState) -> Vec<C64> {
    let mut v = vec![C64::new(1.0, 0.0)];
    for bit in 0..n {
        let mut next = vec![ZERO; v.len() * 2];
        for (idx, w) in v.iter().enumerate() {
            next[idx] = w * q.amp0;
            next[idx | (1 << bit)] = w * q.amp1;
        }
        v = next;
    }
    v
}

/// Writes `H_M(t) x` into `out`, with `owner` the qubit (1-based) coupled to
/// the pointer at time `t`, or `None` once every window has closed.
fn hm_action(owner: Option<usize>, t: f64, params: &SimParams, x: &[C64], out: &mut [C64]) {
    let frac = t / params.t_final;
    let problem = frac * params.coupling_strength();
    let driver = -params.gamma * (1.0 - frac);
    match owner {
        Some(bit) => {
            for (i, o) in out.iter_mut().enumerate() {
                let agree = ((i >> bit) & 1) == (i & 1);
                let diag = if agree { problem } else { 0.0 };
                *o = x[i] * diag + x[i ^ 1] * driver;
            }
        }
        None => {
            for (i, o) in out.iter_mut().enumerate() {
                *o = x[i ^ 1] * driver;
            }
        }
    }
}

/// `H_M(t)|Ξ⟩`, with the active segment looked up from `t`.
pub fn hm_apply(t: f64, state: &JointState, params: &SimParams) -> Result<Vec<C64>> {
    params.validate()?;
    if state.n_qubits != params.n_qubits {
        return Err(Error::InvalidParameter(
            "state and params disagree on N".into(),
        ));
    }
    let owner = params.schedule().active_segment(t);
    let mut out = vec![ZERO; state.amps.len()];
    hm_action(owner, t, params, &state.amps, &mut out);
    Ok(out)
}

/// The Schrödinger right-hand side `−i H_M(t)|Ξ⟩`.
pub fn apply_hm(t: f64, state: &JointState, params: &SimParams) -> Result<Vec<C64>> {
    let mut out = hm_apply(t, state, params)?;
    for z in out.iter_mut() {
        *z *= MINUS_I;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DenseRun {
    pub final_state: JointState,
    pub pointer_samples: Vec<(f64, PointerDensity)>,
    pub report: StepReport,
}

/// Default oracle integrator: RK4 with at least [`DENSE_TOTAL_SUBSTEPS`] steps.
pub fn default_config(n_qubits: usize) -> IntegratorConfig {
    IntegratorConfig::rk4(4usize.max(DENSE_TOTAL_SUBSTEPS.div_ceil(n_qubits.max(1)))).with_tol(1e-9)
}

/// Segment boundaries `Tk/N` for `k = 0..=N` merged with 64 uniform samples.
pub fn default_sample_times(params: &SimParams) -> Vec<f64> {
    let sched = params.schedule();
    let mut times: Vec<f64> = (0..=params.n_qubits).map(|k| sched.boundary(k)).collect();
    times.extend(
        (0..=DEFAULT_UNIFORM_SAMPLES)
            .map(|k| params.t_final * k as f64 / DEFAULT_UNIFORM_SAMPLES as f64),
    );
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * params.t_final);
    times
}

pub fn evolve_full(params: &SimParams, sample_times: &[f64]) -> Result<DenseRun> {
    let owners: Vec<usize> = (1..=params.n_qubits).collect();
    evolve_full_with(
        params,
        sample_times,
        &owners,
        &default_config(params.n_qubits),
    )
}

/// Integrates from the initial product state to `T`, with segment `j`
/// coupling the pointer to qubit `owners[j - 1]`.
pub fn evolve_full_with(
    params: &SimParams,
    sample_times: &[f64],
    owners: &[usize],
    config: &IntegratorConfig,
) -> Result<DenseRun> {
    params.validate()?;
    check_cap(params.n_qubits)?;
    let n = params.n_qubits;
    let mut sorted_owners = owners.to_vec();
    sorted_owners.sort_unstable();
    if sorted_owners != (1..=n).collect::<Vec<_>>() {
        return Err(Error::InvalidParameter(
            "segment owners must permute 1..=N".into(),
        ));
    }
    let mut samples = sample_times.to_vec();
    if samples.iter().any(|t| !(0.0..=params.t_final).contains(t)) {
        return Err(Error::InvalidParameter(
            "sample times must lie in [0, T]".into(),
        ));
    }
    samples.sort_by(f64::total_cmp);

    let sched = params.schedule();
    let tol = 1e-12 * params.t_final;
    let mut state = JointState::initial(params)?;
    let mut report = StepReport::default();
    let mut out = Vec::with_capacity(samples.len());
    let mut next = 0;

    for j in 1..=n {
        let (start, end) = (sched.segment_start(j), sched.segment_end(j));
        let owner = Some(owners[j - 1]);
        let seg_len = end - start;
        let mut at = start;
        let mut advance = |state: &mut JointState, from: f64, to: f64| -> Result<()> {
            let frac = (to - from) / seg_len;
            let steps = ((config.substeps as f64 * frac).ceil() as usize).max(1);
            let cfg = IntegratorConfig {
                substeps: steps,
                ..*config
            };
            let r = apply_generator_step(
                &mut state.amps,
                |t, x, o| hm_action(owner, t, params, x, o),
                from,
                to,
                &cfg,
            )?;
            report.merge(&r);
            Ok(())
        };
        while next < samples.len() && samples[next] < end - tol {
            let tau = samples[next];
            if tau > at + tol {
                advance(&mut state, at, tau)?;
                at = tau;
            }
            out.push((tau, pointer_reduced(&state)));
            next += 1;
        }
        advance(&mut state, at, end)?;
    }
    for &tau in &samples[next..] {
        out.push((tau, pointer_reduced(&state)));
    }
    Ok(DenseRun {
        final_state: state,
        pointer_samples: out,
        report,
    })
}

/// Partial trace over every qubit.
pub fn pointer_reduced(state: &JointState) -> PointerDensity {
    let mut m = Mat2::zeros();
    for pair in state.amps.chunks_exact(2) {
        let (a0, a1) = (pair[0], pair[1]);
        m[(0, 0)] += a0 * a0.conj();
        m[(0, 1)] += a0 * a1.conj();
        m[(1, 0)] += a1 * a0.conj();
        m[(1, 1)] += a1 * a1.conj();
    }
    PointerDensity(m)
}

/// `⟨Φ|μ̂(T)|Φ⟩ = Σ_k |⟨Φ, k|Ξ⟩|²` against the case's own collective state,
/// without forming the reduced system density.
pub fn fidelity_before_after(state: &JointState, params: &SimParams) -> Result<f64> {
    if state.n_qubits != params.n_qubits {
        return Err(Error::InvalidParameter(
            "state and params disagree on N".into(),
        ));
    }
    let collective = collective_vector(params.n_qubits, &params.qubit_state());
    let mut overlaps = [ZERO; 2];
    for (w, pair) in collective.iter().zip(state.amps.chunks_exact(2)) {
        overlaps[0] += w.conj() * pair[0];
        overlaps[1] += w.conj() * pair[1];
    }
    Ok(overlaps[0].norm_sqr() + overlaps[1].norm_sqr())
}

/// Reduced density matrix of the `N` qubits, indexed like [`collective_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDensity {
    pub n_qubits: usize,
    pub m: DMatrix<C64>,
}

impl SystemDensity {
    /// `⟨v|μ̂|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let mut acc = ZERO;
        for (r, vr) in v.iter().enumerate() {
            let row: C64 = v
                .iter()
                .enumerate()
                .map(|(c, vc)| self.m[(r, c)] * vc)
                .sum();
            acc += vr.conj() * row;
        }
        acc.re
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.m - self.m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Partial trace over the pointer.
pub fn system_reduced(state: &JointState) -> Result<SystemDensity> {
    if state.n_qubits > SYSTEM_DENSITY_MAX_QUBITS {
        return Err(Error::Resource(format!(
            "materializing the system density is capped at N <= {SYSTEM_DENSITY_MAX_QUBITS}"
        )));
    }
    let dim = 1 << state.n_qubits;
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        (0..2)
            .map(|k| state.amps[(r << 1) | k] * state.amps[(c << 1) | k].conj())
            .sum()
    });
    Ok(SystemDensity {
        n_qubits: state.n_qubits,
        m,
    })
}
