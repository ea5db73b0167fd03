//! Propagation by dense superoperator exponentials, convergence metrics,
//! spectral rates and Monte Carlo verification.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::analysis::is_attractive;
use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, hermitian_eigen, hermitize, matrix_exponential, partial_trace, re, trace_norm, unvec, vec_of,
    ComplexMatrix, SubspaceBasis, TraceOut,
};
use crate::model::{DensityOperator, LindbladModel, TargetSpec};

/// Largest Hilbert-space dimension accepted for propagation.
pub const MAX_DIM: usize = 64;
/// Negativity allowed in propagated states before they count as invalid.
pub const POSITIVITY_SLACK: f64 = 1e-7;
const TRACE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
    pub model_digest: String,
}

/// Superoperator of a model with cached exponentials.
pub struct Propagator {
    dim: usize,
    generator: ComplexMatrix,
    digest: String,
}

fn check_times(times: &[f64]) -> Result<()> {
    for (k, t) in times.iter().enumerate() {
        if !(t.is_finite() && *t >= 0.0) {
            return Err(Error::Domain(format!("time {t} at index {k} is not a nonnegative number")));
        }
        if k > 0 && *t < times[k - 1] {
            return Err(Error::Domain(format!("times are not sorted at index {k}")));
        }
    }
    Ok(())
}

impl Propagator {
    pub fn new(m: &LindbladModel) -> Result<Self> {
        let dim = m.dim();
        if dim > MAX_DIM {
            return Err(Error::Dimension(format!(
                "dimension {dim} exceeds the propagation limit of {MAX_DIM}"
            )));
        }
        Ok(Self { dim, generator: m.superoperator(), digest: m.digest() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `exp(t·S)`.
    pub fn exponential(&self, t: f64) -> Result<ComplexMatrix> {
        matrix_exponential(&self.generator, t)
    }

    /// Applies a propagator matrix and checks the result.
    pub fn apply(&self, e: &ComplexMatrix, rho0: &DensityOperator) -> Result<DensityOperator> {
        let v = e * vec_of(rho0.matrix());
        finalize(hermitize(&unvec(&v, self.dim)))
    }

    pub fn state_at(&self, rho0: &DensityOperator, t: f64) -> Result<DensityOperator> {
        self.check_state(rho0)?;
        check_times(&[t])?;
        if t == 0.0 {
            return Ok(rho0.clone());
        }
        self.apply(&self.exponential(t)?, rho0)
    }

    fn check_state(&self, rho0: &DensityOperator) -> Result<()> {
        if rho0.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "initial state has dimension {}, model dimension is {}",
                rho0.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// States at every time; exponentials of repeated increments are shared.
    pub fn evolve(&self, rho0: &DensityOperator, times: &[f64]) -> Result<Trajectory> {
        self.check_state(rho0)?;
        check_times(times)?;
        let mut cache: HashMap<u64, ComplexMatrix> = HashMap::new();
        let mut states = Vec::with_capacity(times.len());
        let mut prev_t = 0.0;
        let mut current = rho0.clone();
        for &t in times {
            if t > prev_t {
                let dt = t - prev_t;
                let e = match cache.get(&dt.to_bits()) {
                    Some(e) => e,
                    None => {
                        let e = self.exponential(dt)?;
                        cache.entry(dt.to_bits()).or_insert(e)
                    }
                };
                current = self.apply(e, &current)?;
            }
            states.push(current.clone());
            prev_t = t;
        }
        Ok(Trajectory { times: times.to_vec(), states, model_digest: self.digest.clone() })
    }
}

fn finalize(rho: ComplexMatrix) -> Result<DensityOperator> {
    let tr = rho.trace();
    if (tr - re(1.0)).norm() > TRACE_SLACK {
        return Err(Error::Numeric(format!("propagated trace drifted to {:.12}", tr.re)));
    }
    let lmin = hermitian_eigen(&rho).0.first().copied().unwrap_or(0.0);
    if lmin < -POSITIVITY_SLACK {
        return Err(Error::Numeric(format!("propagated state has eigenvalue {lmin:.3e}")));
    }
    Ok(DensityOperator::new_unchecked(rho))
}

pub fn propagate(m: &LindbladModel, rho0: &DensityOperator, times: &[f64]) -> Result<Trajectory> {
    Propagator::new(m)?.evolve(rho0, times)
}

/// Uniform grid of `steps` points on `[0, t_final]` (a single point at 0
/// when `steps = 1`).
pub fn time_grid(t_final: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![0.0];
    }
    (0..steps).map(|k| t_final * k as f64 / (steps - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub t: f64,
    /// `tr(Π_R ρ)`.
    pub v: f64,
    /// `⟨ψ|ρ|ψ⟩` for pure targets, `tr(Π_SF ρ)` otherwise.
    pub fidelity: f64,
    pub purity: f64,
    /// `‖ρ_SF − ρ̄_S ⊗ ρ̄_F‖₁` for subsystem targets.
    pub factor_residual: Option<f64>,
}

impl MetricRow {
    /// Distance from the target: `1 − fidelity` for pure states, `V` for
    /// subspaces, the larger of `V` and the factor residual for subsystems.
    pub fn deficit(&self, target: &TargetSpec) -> f64 {
        match target {
            TargetSpec::PureState(_) => 1.0 - self.fidelity,
            TargetSpec::Subspace(_) => self.v,
            TargetSpec::Subsystem(_) => self.v.max(self.factor_residual.unwrap_or(0.0)),
        }
    }
}

pub fn state_metrics(t: f64, rho: &DensityOperator, target: &TargetSpec) -> Result<MetricRow> {
    target.check_dim(rho.dim())?;
    let x = rho.matrix();
    let purity = rho.purity();
    let row = match target {
        TargetSpec::PureState(psi) => {
            let f = psi.dotc(&(x * psi)).re;
            MetricRow { t, v: 1.0 - f, fidelity: f, purity, factor_residual: None }
        }
        TargetSpec::Subspace(d) | TargetSpec::Subsystem(d) => {
            let v = (d.remainder_projector() * x).trace().re;
            let sf = d.target().frame();
            let block = sf.adjoint() * x * sf;
            let fidelity = block.trace().re;
            let factor_residual = match (target, d.factors()) {
                (TargetSpec::Subsystem(_), Some((n, f))) => {
                    let rs = partial_trace(&block, (n, f), TraceOut::Second)?;
                    let rf = partial_trace(&block, (n, f), TraceOut::First)?;
                    Some(trace_norm(&(&block - rs.kronecker(&rf))))
                }
                _ => None,
            };
            MetricRow { t, v, fidelity, purity, factor_residual }
        }
    };
    Ok(row)
}

pub fn metrics(traj: &Trajectory, target: &TargetSpec) -> Result<Vec<MetricRow>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, rho)| state_metrics(t, rho, target))
        .collect()
}

/// Spectral gap `−max{Re λ : Re λ < −tol·scale}` of an attractive model.
pub fn convergence_rate(m: &LindbladModel, s: &SubspaceBasis, tol: f64) -> Result<f64> {
    let report = is_attractive(m, s, tol)?;
    if !report.is_attractive() {
        return Err(Error::Precondition("target is not attractive for this model".into()));
    }
    spectral_gap(m, tol)
}

/// `−max{Re λ : Re λ < −tol·scale}` without the attractivity check.
pub fn spectral_gap(m: &LindbladModel, tol: f64) -> Result<f64> {
    let threshold = tol * m.scale();
    eigenvalues(&m.superoperator())?
        .iter()
        .filter(|l| l.re < -threshold)
        .map(|l| -l.re)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::Precondition("generator has no decaying modes".into()))
}

/// Decay rate `r̂` from a least-squares fit of
/// `ln ‖ρ(t) − ρ(∞)‖ ≈ a − r̂·t + k·ln t` over `t ∈ [6/r, 24/r]` for a trial
/// rate `r`, with `ρ(∞)` taken at `80/r`. The `ln t` term absorbs the
/// polynomial prefactor of a defective slowest mode.
pub fn fitted_decay_rate(m: &LindbladModel, rho0: &DensityOperator, trial_rate: f64) -> Result<f64> {
    if !(trial_rate > 0.0 && trial_rate.is_finite()) {
        return Err(Error::Domain("trial rate must be positive".into()));
    }
    let p = Propagator::new(m)?;
    let limit = p.state_at(rho0, 80.0 / trial_rate)?;
    let times: Vec<f64> = (0..=40).map(|k| (6.0 + 18.0 * k as f64 / 40.0) / trial_rate).collect();
    let traj = p.evolve(rho0, &times)?;
    let rows = times.len();
    let mut design = DMatrix::<f64>::zeros(rows, 3);
    let mut y = DVector::<f64>::zeros(rows);
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let d = (s.matrix() - limit.matrix()).norm();
        if !(d > 0.0) {
            return Err(Error::Numeric(format!("trajectory reached its limit before t = {t}")));
        }
        // centred and scaled regressors keep the system well conditioned
        design[(i, 0)] = 1.0;
        design[(i, 1)] = t * trial_rate - 15.0;
        design[(i, 2)] = (t * trial_rate).ln();
        y[i] = d.ln();
    }
    let coef = design
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Numeric(format!("decay fit: {e}")))?;
    Ok(-coef[1] * trial_rate)
}

/// `50/r` when the target is attractive with spectral gap `r`, else 100.
pub fn default_horizon(m: &LindbladModel, target: &TargetSpec, tol: f64) -> f64 {
    let s = target.decomposition();
    match convergence_rate(m, s.target(), tol) {
        Ok(r) if r > 0.0 => 50.0 / r,
        _ => 100.0,
    }
}

#[derive(Debug, Clone)]
pub struct McVerdict {
    pub pass: bool,
    /// Seed of the worst initial state.
    pub worst_seed: u64,
    pub worst_initial: DensityOperator,
    pub worst_final: DensityOperator,
    pub worst_deficit: f64,
    pub deficits: Vec<f64>,
}

/// Propagates `n` seeded random full-rank states (seeds `seed, seed+1, …`)
/// to `t_final` and checks every final deficit against `eps`.
pub fn monte_carlo_verify(
    m: &LindbladModel,
    target: &TargetSpec,
    n: usize,
    t_final: f64,
    eps: f64,
    seed: u64,
) -> Result<McVerdict> {
    if n == 0 {
        return Err(Error::Domain("ensemble size must be at least 1".into()));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!("horizon {t_final} must be positive")));
    }
    target.check_dim(m.dim())?;
    let p = Propagator::new(m)?;
    let e = p.exponential(t_final)?;
    let runs: Vec<(u64, DensityOperator, DensityOperator, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let rho0 = DensityOperator::random(m.dim(), s)?;
            let fin = p.apply(&e, &rho0)?;
            let deficit = state_metrics(t_final, &fin, target)?.deficit(target);
            Ok((s, rho0, fin, deficit))
        })
        .collect::<Result<_>>()?;
    let deficits: Vec<f64> = runs.iter().map(|r| r.3).collect();
    let worst = runs
        .into_iter()
        .max_by(|a, b| a.3.total_cmp(&b.3))
        .expect("n >= 1");
    Ok(McVerdict {
        pass: deficits.iter().all(|&d| d <= eps),
        worst_seed: worst.0,
        worst_initial: worst.1,
        worst_final: worst.2,
        worst_deficit: worst.3,
        deficits,
    })
}
