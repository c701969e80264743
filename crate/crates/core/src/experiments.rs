//! Experiment harness: pointer time series, threshold-`N` searches, fidelity
//! curves, `λ = Nε²` fits and adiabaticity reports.
//!
//! Independent runs are spread over the rayon pool; results always come back
//! in input order, so outputs do not depend on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::engine;
use crate::error::{invalid, Result};
use crate::model::{scaling_lambda, Case, PointerDensity, SimParams};
use crate::two_level::{adiabatic_metric, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Collision,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub p0: f64,
    pub p1: f64,
    pub re01: f64,
    pub im01: f64,
}

impl TrajectoryRow {
    pub fn from_density(t: f64, rho: &PointerDensity) -> Self {
        let c = rho.coherence();
        Self {
            t,
            p0: rho.p0(),
            p1: rho.p1(),
            re01: c.re,
            im01: c.im,
        }
    }
}

/// Uniform grid `t_i = iT/samples`, `i = 0..=samples`.
pub fn uniform_times(t_final: f64, samples: usize) -> Vec<f64> {
    (0..=samples)
        .map(|i| {
            if i == samples {
                t_final
            } else {
                t_final * i as f64 / samples as f64
            }
        })
        .collect()
}

/// Pointer trajectory on a uniform grid of `samples + 1` times.
pub fn time_series(
    params: &SimParams,
    samples: usize,
    engine: EngineKind,
) -> Result<Vec<TrajectoryRow>> {
    Ok(trajectory_run(params, samples, engine)?.0)
}

/// Time series plus the final scalars `(final_p1, final_p0, fidelity)`.
pub fn trajectory_run(
    params: &SimParams,
    samples: usize,
    engine: EngineKind,
) -> Result<(Vec<TrajectoryRow>, Summary)> {
    params.validate()?;
    if samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    let times = uniform_times(params.t_final, samples);
    let (pointer, summary) = match engine {
        EngineKind::Collision => {
            let r = engine::run_at_times(params, &times)?;
            let s = Summary::from_run(&r);
            (r.pointer_samples, s)
        }
        EngineKind::Dense => {
            let r = dense::evolve_full(params, &times)?;
            let rho = dense::pointer_reduced(&r.final_state);
            let s = Summary {
                final_p1: rho.p1(),
                final_p0: rho.p0(),
                fidelity: dense::fidelity_before_after(&r.final_state, params)?,
            };
            (r.pointer_samples, s)
        }
    };
    let rows = pointer
        .iter()
        .map(|(t, rho)| TrajectoryRow::from_density(*t, rho))
        .collect();
    Ok((rows, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_p1: f64,
    pub final_p0: f64,
    pub fidelity: f64,
}

impl Summary {
    pub fn from_run(r: &engine::RunResult) -> Self {
        Self {
            final_p1: r.final_p1,
            final_p0: r.final_p0,
            fidelity: r.fidelity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Probability that the pointer reports the given state.
    SuccessP1,
    /// ⟨Φ|μ̂(T)|Φ⟩.
    Fidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NGrid {
    PowersOfTwo,
    IntegerBisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub epsilon: f64,
    pub target: f64,
    pub quantity: Quantity,
    pub n_grid: NGrid,
    pub n_cap: usize,
}

impl ThresholdQuery {
    pub fn new(epsilon: f64, target: f64, quantity: Quantity) -> Self {
        Self {
            epsilon,
            target,
            quantity,
            n_grid: NGrid::PowersOfTwo,
            n_cap: 1 << 20,
        }
    }

    pub fn with_cap(mut self, n_cap: usize) -> Self {
        self.n_cap = n_cap;
        self
    }

    pub fn with_grid(mut self, grid: NGrid) -> Self {
        self.n_grid = grid;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(invalid(format!(
                "target must lie in (0, 1), got {}",
                self.target
            )));
        }
        if self.n_cap == 0 {
            return Err(invalid("n_cap must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub query: ThresholdQuery,
    pub n_min: Option<usize>,
    pub value_at_n_min: Option<f64>,
    /// Closest probed grid point below `n_min` and its value.
    pub below: Option<(usize, f64)>,
    /// Next grid point above `n_min` and its value, when within the cap.
    pub above: Option<(usize, f64)>,
    /// Every `(N, value)` evaluated, in probe order.
    pub probes: Vec<(usize, f64)>,
}

impl ThresholdResult {
    pub fn lambda(&self) -> Option<f64> {
        self.n_min.map(|n| scaling_lambda(self.query.epsilon, n))
    }
}

/// The thresholded quantity for case Φ at the given parameters.
pub fn evaluate(quantity: Quantity, params: &SimParams) -> Result<f64> {
    let p = params.with_case(Case::Phi);
    let r = engine::run(&p, p.n_qubits)?;
    Ok(match quantity {
        Quantity::SuccessP1 => r.final_p1,
        Quantity::Fidelity => r.fidelity,
    })
}

/// Smallest grid `N` whose quantity reaches the target.
///
/// `N` doubles from 1 until the target is met or the cap is passed; on the
/// bisection grid the bracket between the last failing and first passing
/// power of two is then bisected over the integers. Monotonicity is not
/// assumed, so every probe is kept in the result.
pub fn min_n(query: &ThresholdQuery, params_base: &SimParams) -> Result<ThresholdResult> {
    query.validate()?;
    let base = params_base.with_epsilon(query.epsilon);
    base.validate()?;
    let mut probes = Vec::new();
    let probe = |n: usize, probes: &mut Vec<(usize, f64)>| -> Result<f64> {
        if let Some(&(_, v)) = probes.iter().find(|(m, _)| *m == n) {
            return Ok(v);
        }
        let v = evaluate(query.quantity, &base.with_n(n))?;
        log::debug!("probe eps={} N={n} value={v}", query.epsilon);
        probes.push((n, v));
        Ok(v)
    };

    let mut failing: Option<(usize, f64)> = None;
    let mut passing: Option<(usize, f64)> = None;
    let mut n = 1usize;
    while n <= query.n_cap {
        let v = probe(n, &mut probes)?;
        if v >= query.target {
            passing = Some((n, v));
            break;
        }
        failing = Some((n, v));
        n = match n.checked_mul(2) {
            Some(m) => m,
            None => break,
        };
    }
    if passing.is_none() && query.n_grid == NGrid::IntegerBisection {
        let last = failing.map_or(0, |(m, _)| m);
        if query.n_cap > last {
            let v = probe(query.n_cap, &mut probes)?;
            if v >= query.target {
                passing = Some((query.n_cap, v));
            }
        }
    }
    let Some((mut hi, mut hi_v)) = passing else {
        return Ok(ThresholdResult {
            query: *query,
            n_min: None,
            value_at_n_min: None,
            below: failing,
            above: None,
            probes,
        });
    };

    let mut below = failing;
    if query.n_grid == NGrid::IntegerBisection {
        if let Some((mut lo, mut lo_v)) = failing {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                let v = probe(mid, &mut probes)?;
                if v >= query.target {
                    hi = mid;
                    hi_v = v;
                } else {
                    lo = mid;
                    lo_v = v;
                }
            }
            below = Some((lo, lo_v));
        }
    }
    let next = match query.n_grid {
        NGrid::PowersOfTwo => hi.checked_mul(2),
        NGrid::IntegerBisection => hi.checked_add(1),
    };
    let above = match next {
        Some(m) if m <= query.n_cap => Some((m, probe(m, &mut probes)?)),
        _ => None,
    };
    Ok(ThresholdResult {
        query: *query,
        n_min: Some(hi),
        value_at_n_min: Some(hi_v),
        below,
        above,
        probes,
    })
}

/// Threshold searches for several `ε`, run in parallel, returned in input order.
pub fn threshold_sweep(
    queries: &[ThresholdQuery],
    params_base: &SimParams,
) -> Result<Vec<ThresholdResult>> {
    queries.par_iter().map(|q| min_n(q, params_base)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub n: usize,
    pub fidelity: f64,
}

pub fn fidelity_vs_n(
    epsilon: f64,
    n_list: &[usize],
    params_base: &SimParams,
) -> Result<Vec<FidelityRow>> {
    let base = params_base.with_epsilon(epsilon).with_case(Case::Phi);
    n_list
        .par_iter()
        .map(|&n| {
            let fidelity = evaluate(Quantity::Fidelity, &base.with_n(n))?;
            Ok(FidelityRow { n, fidelity })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub n: usize,
    pub final_p1: f64,
    pub final_p0: f64,
    pub fidelity: f64,
}

/// Engine runs over the `ε × N` grid, ordered by `ε` then `N` as given.
pub fn sweep(eps_list: &[f64], n_list: &[usize], params_base: &SimParams) -> Result<Vec<SweepRow>> {
    let grid: Vec<(f64, usize)> = eps_list
        .iter()
        .flat_map(|&e| n_list.iter().map(move |&n| (e, n)))
        .collect();
    grid.par_iter()
        .map(|&(epsilon, n)| {
            let p = params_base.with_epsilon(epsilon).with_n(n);
            p.validate()?;
            let r = engine::run(&p, n)?;
            Ok(SweepRow {
                epsilon,
                n,
                final_p1: r.final_p1,
                final_p0: r.final_p0,
                fidelity: r.fidelity,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, usize)>,
    pub lambda_hat: f64,
    /// Root-mean-square residual of `ln N_min + 2 ln ε − ln λ̂`.
    pub residual: f64,
}

/// Least-squares fit of `N_min = λ/ε²` in log space.
pub fn fit_lambda(points: &[(f64, usize)]) -> Result<ScalingFit> {
    if points.is_empty() {
        return Err(invalid("fit_lambda needs at least one point"));
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(eps, n) in points {
        if !(eps > 0.0 && eps.is_finite()) || n == 0 {
            return Err(invalid(format!("invalid fit point ({eps}, {n})")));
        }
        logs.push((n as f64).ln() + 2.0 * eps.ln());
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let residual =
        (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    Ok(ScalingFit {
        points: points.to_vec(),
        lambda_hat: mean.exp(),
        residual,
    })
}

/// Fit over the found thresholds; `None` when no search succeeded.
pub fn fit_thresholds(results: &[ThresholdResult]) -> Option<ScalingFit> {
    let points: Vec<(f64, usize)> = results
        .iter()
        .filter_map(|r| r.n_min.map(|n| (r.query.epsilon, n)))
        .collect();
    fit_lambda(&points).ok()
}

/// Collision engine against the dense oracle at every segment boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub max_pointer_diff: f64,
    pub fidelity_collision: f64,
    pub fidelity_dense: f64,
    pub boundary_samples: usize,
}

impl OracleComparison {
    pub fn fidelity_diff(&self) -> f64 {
        (self.fidelity_collision - self.fidelity_dense).abs()
    }

    pub fn discrepancy(&self) -> f64 {
        self.max_pointer_diff.max(self.fidelity_diff())
    }
}

pub fn compare_with_oracle(params: &SimParams) -> Result<OracleComparison> {
    params.validate()?;
    if params.n_qubits > dense::DENSE_MAX_QUBITS {
        return Err(crate::Error::Resource(format!(
            "oracle comparison needs N <= {}, requested N = {}",
            dense::DENSE_MAX_QUBITS,
            params.n_qubits
        )));
    }
    let eng = engine::run(params, 1)?;
    let times: Vec<f64> = eng.pointer_samples.iter().map(|(t, _)| *t).collect();
    let oracle = dense::evolve_full(params, &times)?;
    let max_pointer_diff = eng
        .pointer_samples
        .iter()
        .zip(&oracle.pointer_samples)
        .map(|((_, a), (_, b))| a.max_abs_diff(b))
        .fold(0.0, f64::max);
    Ok(OracleComparison {
        max_pointer_diff,
        fidelity_collision: eng.fidelity,
        fidelity_dense: dense::fidelity_before_after(&oracle.final_state, params)?,
        boundary_samples: times.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticRow {
    pub t: f64,
    pub metric: f64,
    pub gap: f64,
}

/// Adiabatic matrix element and gap of the effective case-Φ Hamiltonian on a
/// uniform grid of `samples + 1` times.
pub fn adiabatic_report(params: &SimParams, samples: usize) -> Result<Vec<AdiabaticRow>> {
    params.validate()?;
    if samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    let s = Schedule::from(params);
    Ok(uniform_times(params.t_final, samples)
        .into_iter()
        .map(|t| {
            let m = adiabatic_metric(Case::Phi, t, &s);
            AdiabaticRow {
                t,
                metric: m.value,
                gap: m.gap,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn time_series_layout() {
        let p = SimParams::new(0.5, 32).unwrap();
        let rows = time_series(&p, 20, EngineKind::Collision).unwrap();
        assert_eq!(rows.len(), 21);
        let first = rows[0];
        assert_eq!(
            (first.t, first.p0, first.p1, first.im01),
            (0.0, 0.5, 0.5, 0.0)
        );
        assert_abs_diff_eq!(first.re01, 0.5, epsilon = 1e-15);
        assert!(rows.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(rows.last().unwrap().t, 10.0);
    }

    #[test]
    fn dense_and_collision_series_agree() {
        let p = SimParams::new(0.5, 4).unwrap();
        let a = time_series(&p, 10, EngineKind::Collision).unwrap();
        let b = time_series(&p, 10, EngineKind::Dense).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x.p1, y.p1, epsilon = 1e-8);
            assert_abs_diff_eq!(x.re01, y.re01, epsilon = 1e-8);
        }
    }

    #[test]
    fn not_found_below_cap() {
        let q = ThresholdQuery::new(0.5, 0.9, Quantity::SuccessP1).with_cap(4);
        let r = min_n(&q, &SimParams::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(r.n_min, None);
        assert_eq!(
            r.probes.iter().map(|p| p.0).collect::<Vec<_>>(),
            vec![1, 2, 4]
        );
        assert!(r.probes.iter().all(|&(_, v)| v < 0.9));
    }

    #[test]
    fn bisection_refines_power_of_two_bracket() {
        let base = SimParams::new(0.5, 1).unwrap();
        let q = ThresholdQuery::new(0.5, 0.9, Quantity::SuccessP1).with_cap(1024);
        let pow2 = min_n(&q, &base).unwrap();
        let bis = min_n(&q.with_grid(NGrid::IntegerBisection), &base).unwrap();
        let n2 = pow2.n_min.unwrap();
        let nb = bis.n_min.unwrap();
        assert!(nb <= n2 && nb > n2 / 2, "pow2 {n2}, bisect {nb}");
        assert!(bis.value_at_n_min.unwrap() >= 0.9);
        assert!(bis.below.unwrap().1 < 0.9);
        assert_eq!(bis.below.unwrap().0 + 1, nb);
    }

    #[test]
    fn invalid_queries_rejected() {
        let base = SimParams::new(0.5, 1).unwrap();
        for target in [0.0, 1.0, 1.5] {
            assert!(min_n(&ThresholdQuery::new(0.5, target, Quantity::Fidelity), &base).is_err());
        }
        assert!(min_n(&ThresholdQuery::new(0.0, 0.9, Quantity::Fidelity), &base).is_err());
    }

    #[test]
    fn fit_examples() {
        let f = fit_lambda(&[(0.5, 64), (0.25, 256), (0.125, 1024)]).unwrap();
        assert_abs_diff_eq!(f.lambda_hat, 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.residual, 0.0, epsilon = 1e-12);
        let one = fit_lambda(&[(0.25, 256)]).unwrap();
        assert_abs_diff_eq!(one.lambda_hat, 16.0, epsilon = 1e-12);
        assert!(fit_lambda(&[]).is_err());
        let off = fit_lambda(&[(0.5, 32), (0.5, 128)]).unwrap();
        assert_abs_diff_eq!(off.lambda_hat, 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(off.residual, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_curve_bounds() {
        let base = SimParams::new(1.0, 1).unwrap();
        let ones = fidelity_vs_n(1.0, &[1, 4, 64, 1024], &base).unwrap();
        assert!(ones.iter().all(|r| (r.fidelity - 1.0).abs() < 1e-9));
        let quarter = fidelity_vs_n(0.25, &[4, 1024], &base).unwrap();
        assert!(quarter
            .iter()
            .all(|r| (0.0..=1.0 + 1e-9).contains(&r.fidelity)));
        assert!(quarter[0].fidelity < quarter[1].fidelity);
        assert!(quarter[0].fidelity < 0.9);
    }

    #[test]
    fn fidelity_follows_phase_kick_estimate() {
        // Each collision imprints a conditional phase (h/ε)(t/T)(T/N) on a
        // qubit; summed over the run, -ln F ≈ h²T²/(3λ) for small ε.
        let base = SimParams::new(1.0, 1).unwrap();
        for (eps, n) in [(0.125, 8192usize), (0.0625, 32768)] {
            let f = fidelity_vs_n(eps, &[n], &base).unwrap()[0].fidelity;
            let lambda = n as f64 * eps * eps;
            let est = 0.25 * 100.0 / (3.0 * lambda);
            let got = -f.ln();
            assert!(
                (got - est).abs() < 0.1 * est,
                "eps={eps} got={got} est={est}"
            );
        }
    }

    #[test]
    fn sweep_order_and_contents() {
        let base = SimParams::new(0.5, 1).unwrap();
        let rows = sweep(&[0.5, 0.25], &[4, 16], &base).unwrap();
        let keys: Vec<(f64, usize)> = rows.iter().map(|r| (r.epsilon, r.n)).collect();
        assert_eq!(keys, vec![(0.5, 4), (0.5, 16), (0.25, 4), (0.25, 16)]);
        for r in &rows {
            assert_abs_diff_eq!(r.final_p0 + r.final_p1, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn oracle_comparison_small_n() {
        let c = compare_with_oracle(&SimParams::new(0.5, 4).unwrap()).unwrap();
        assert_eq!(c.boundary_samples, 5);
        assert!(c.discrepancy() < 1e-8);
        let e = compare_with_oracle(&SimParams::new(1.0, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(e.fidelity_collision, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.fidelity_dense, 1.0, epsilon = 1e-9);
        assert!(matches!(
            compare_with_oracle(&SimParams::new(0.5, 17).unwrap()),
            Err(crate::Error::Resource(_))
        ));
    }

    #[test]
    fn adiabatic_report_values() {
        let p = SimParams::new(0.5, 1).unwrap();
        let rows = adiabatic_report(&p, 100).unwrap();
        assert_eq!(rows.len(), 101);
        assert_abs_diff_eq!(rows[0].metric, 0.05, epsilon = 1e-14);
        let max = rows.iter().map(|r| r.metric).fold(0.0, f64::max);
        assert!(max <= 0.08);
        assert_abs_diff_eq!(rows[50].metric, 0.070_711, epsilon = 1e-6);
        let slow = adiabatic_report(&p.with_t_final(20.0), 100).unwrap();
        for (a, b) in rows.iter().zip(&slow) {
            assert_abs_diff_eq!(b.metric, a.metric / 2.0, epsilon = 1e-10);
        }
    }
}
