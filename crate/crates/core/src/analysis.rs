//! Invariance and attractivity of subspaces and subsystems, steady states,
//! and the LaSalle functional.

use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, hermitian_eigen, hermitize, kernel_abs, partial_trace, re, unvec, vec_of, ComplexMatrix,
    SubspaceBasis, TraceOut, C64, I,
};
use crate::model::{DensityOperator, LindbladModel, NoiseChannel, SpaceDecomposition};

/// The four blocks `X_S = V_S†XV_S`, `X_P = V_S†XV_R`, `X_Q = V_R†XV_S`,
/// `X_R = V_R†XV_R`.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub s: ComplexMatrix,
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
}

impl Blocks {
    pub fn of(x: &ComplexMatrix, s: &SubspaceBasis, r: &SubspaceBasis) -> Self {
        let (vs, vr) = (s.frame(), r.frame());
        Self {
            s: vs.adjoint() * x * vs,
            p: vs.adjoint() * x * vr,
            q: vr.adjoint() * x * vs,
            r: vr.adjoint() * x * vr,
        }
    }
}

fn check_ambient(m: &LindbladModel, s: &SubspaceBasis) -> Result<()> {
    if s.ambient_dim() != m.dim() {
        return Err(Error::Dimension(format!(
            "subspace lives in dimension {}, model dimension is {}",
            s.ambient_dim(),
            m.dim()
        )));
    }
    Ok(())
}

fn sum_sq(blocks: impl Iterator<Item = f64>) -> f64 {
    blocks.map(|x| x * x).sum::<f64>().sqrt()
}

/// Outcome of a subspace invariance test with its residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceCheck {
    pub invariant: bool,
    /// `(Σ_k ‖L̃_Q,k‖²)^½`.
    pub lq_residual: f64,
    /// `‖iH_P − ½ Σ_k L̃_S,k† L̃_P,k‖`.
    pub interplay_residual: f64,
    /// `(Σ_k ‖L̃_P,k‖²)^½`; only part of the verdict in strict mode.
    pub lp_residual: f64,
    pub strict: bool,
    pub threshold: f64,
}

/// Invariance of `I_S(H)`: `L̃_Q,k = 0` and `iH_P − ½ Σ_k L̃_S,k†L̃_P,k = 0`.
pub fn check_invariance_subspace(m: &LindbladModel, s: &SubspaceBasis, tol: f64) -> Result<InvarianceCheck> {
    check_invariance_subspace_with(m, s, tol, false)
}

/// As [`check_invariance_subspace`]; `strict` additionally demands
/// `L̃_P,k = 0`, which makes the subspace invariant without initialization.
pub fn check_invariance_subspace_with(
    m: &LindbladModel,
    s: &SubspaceBasis,
    tol: f64,
    strict: bool,
) -> Result<InvarianceCheck> {
    check_ambient(m, s)?;
    if s.is_zero() {
        return Err(Error::Dimension("target subspace is empty".into()));
    }
    let r = s.complement();
    let ls = m.scaled_noise();
    let lb: Vec<Blocks> = ls.iter().map(|l| Blocks::of(l, s, &r)).collect();
    let hp = Blocks::of(&m.hamiltonian, s, &r).p;
    let mut interplay = &hp * I;
    for b in &lb {
        interplay -= b.s.adjoint() * &b.p * re(0.5);
    }
    let threshold = tol * m.scale();
    let lq_residual = sum_sq(lb.iter().map(|b| b.q.norm()));
    let lp_residual = sum_sq(lb.iter().map(|b| b.p.norm()));
    let interplay_residual = interplay.norm();
    let invariant = lq_residual <= threshold
        && interplay_residual <= threshold
        && (!strict || lp_residual <= threshold);
    Ok(InvarianceCheck { invariant, lq_residual, interplay_residual, lp_residual, strict, threshold })
}

/// Which tensor factor of a channel's SF-block is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityFactor {
    /// `L_SF = I_S ⊗ L_F`.
    S,
    /// `L_SF = L_S ⊗ I_F`.
    F,
    /// Neither factor is the identity.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFactorization {
    pub identity_factor: IdentityFactor,
    /// `‖L_SF − I_S ⊗ tr_S(L_SF)/n‖`.
    pub identity_s_residual: f64,
    /// `‖L_SF − tr_F(L_SF)/f ⊗ I_F‖`.
    pub identity_f_residual: f64,
    /// Distance to the nearest Kronecker product, from the rearranged block.
    pub kronecker_residual: f64,
}

/// Subsystem invariance verdict with the per-condition residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemCheck {
    pub invariant: bool,
    pub channels: Vec<ChannelFactorization>,
    pub lq_residual: f64,
    pub interplay_residual: f64,
    /// `‖H_SF − (H_S⊗I + I⊗H_F − (tr H_SF / nf) I)‖`.
    pub hamiltonian_split_residual: f64,
    pub threshold: f64,
}

/// `R(X)` with `R(A⊗B) = vec(A) vec(B)ᵀ`; rank one iff `X` is a Kronecker
/// product.
fn kronecker_rearrangement(x: &ComplexMatrix, n: usize, f: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(n * n, f * f);
    for i in 0..n {
        for j in 0..n {
            for k in 0..f {
                for l in 0..f {
                    out[(i + j * n, k + l * f)] = x[(i * f + k, j * f + l)];
                }
            }
        }
    }
    out
}

fn nearest_kronecker_residual(x: &ComplexMatrix, n: usize, f: usize) -> f64 {
    let sv = nalgebra::SVD::new(kronecker_rearrangement(x, n, f), false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.iter().skip(1).map(|x| x * x).sum::<f64>().sqrt()
}

fn factorize_channel(l_sf: &ComplexMatrix, n: usize, f: usize, threshold: f64) -> Result<ChannelFactorization> {
    let on_f = partial_trace(l_sf, (n, f), TraceOut::First)? / re(n as f64);
    let on_s = partial_trace(l_sf, (n, f), TraceOut::Second)? / re(f as f64);
    let identity_s_residual = (l_sf - ComplexMatrix::identity(n, n).kronecker(&on_f)).norm();
    let identity_f_residual = (l_sf - on_s.kronecker(&ComplexMatrix::identity(f, f))).norm();
    let identity_factor = if identity_s_residual <= threshold {
        IdentityFactor::S
    } else if identity_f_residual <= threshold {
        IdentityFactor::F
    } else {
        IdentityFactor::None
    };
    Ok(ChannelFactorization {
        identity_factor,
        identity_s_residual,
        identity_f_residual,
        kronecker_residual: nearest_kronecker_residual(l_sf, n, f),
    })
}

fn require_factors(d: &SpaceDecomposition) -> Result<(usize, usize)> {
    d.factors()
        .ok_or_else(|| Error::Dimension("decomposition has no tensor factor".into()))
}

/// `H_S ⊗ I + I ⊗ H_F − (tr H / nf) I` built from partial traces.
fn local_part(h: &ComplexMatrix, n: usize, f: usize) -> Result<ComplexMatrix> {
    let hs = partial_trace(h, (n, f), TraceOut::Second)? / re(f as f64);
    let hf = partial_trace(h, (n, f), TraceOut::First)? / re(n as f64);
    let mean = h.trace() / re((n * f) as f64);
    Ok(hs.kronecker(&ComplexMatrix::identity(f, f)) + ComplexMatrix::identity(n, n).kronecker(&hf)
        - ComplexMatrix::identity(n * f, n * f) * mean)
}

/// Invariance of the subsystem `H_S` in `(H_S ⊗ H_F) ⊕ H_R`.
pub fn check_invariance_subsystem(m: &LindbladModel, d: &SpaceDecomposition, tol: f64) -> Result<SubsystemCheck> {
    let (n, f) = require_factors(d)?;
    check_ambient(m, d.target())?;
    let (sf, r) = (d.target(), d.remainder());
    let threshold = tol * m.scale();
    let ls = m.scaled_noise();
    let lb: Vec<Blocks> = ls.iter().map(|l| Blocks::of(l, sf, r)).collect();
    let hb = Blocks::of(&m.hamiltonian, sf, r);
    let mut channels = Vec::with_capacity(lb.len());
    for b in &lb {
        channels.push(factorize_channel(&b.s, n, f, threshold)?);
    }
    let mut interplay = &hb.p * I;
    for b in &lb {
        interplay -= b.s.adjoint() * &b.p * re(0.5);
    }
    let lq_residual = sum_sq(lb.iter().map(|b| b.q.norm()));
    let interplay_residual = interplay.norm();
    let hamiltonian_split_residual = (&hb.s - local_part(&hb.s, n, f)?).norm();
    let invariant = channels.iter().all(|c| c.identity_factor != IdentityFactor::None)
        && lq_residual <= threshold
        && interplay_residual <= threshold
        && hamiltonian_split_residual <= threshold;
    Ok(SubsystemCheck { invariant, channels, lq_residual, interplay_residual, hamiltonian_split_residual, threshold })
}

/// Reduced dynamics on one tensor factor of an invariant subsystem: the
/// local Hamiltonian and the channels that act as the identity on the other
/// factor.
pub fn factor_model(m: &LindbladModel, d: &SpaceDecomposition, side: TraceOut, tol: f64) -> Result<LindbladModel> {
    let (n, f) = require_factors(d)?;
    let sf = d.target();
    let threshold = tol * m.scale();
    let restricted = m.restricted(sf);
    let (keep, dims_other) = match side {
        TraceOut::First => (f, n),
        TraceOut::Second => (n, f),
    };
    let h = hermitize(&(partial_trace(&restricted.hamiltonian, (n, f), side)? / re(dims_other as f64)));
    let h = &h - ComplexMatrix::identity(keep, keep) * (h.trace() / re(keep as f64));
    let mut noise = Vec::new();
    for ch in &restricted.noise {
        let fc = factorize_channel(&ch.op, n, f, threshold)?;
        let local = partial_trace(&ch.op, (n, f), side)? / re(dims_other as f64);
        let acts_here = match side {
            TraceOut::First => fc.identity_factor == IdentityFactor::S,
            TraceOut::Second => fc.identity_factor == IdentityFactor::F,
        };
        if acts_here {
            noise.push(NoiseChannel::new(local, 1.0));
        }
    }
    LindbladModel::new(h, noise)
}

fn h_r_prime_unchecked(m: &LindbladModel, s: &SubspaceBasis, r: &SubspaceBasis, threshold: f64) -> SubspaceBasis {
    if r.is_zero() {
        return SubspaceBasis::zero(m.dim());
    }
    let ls = m.scaled_noise();
    if ls.is_empty() {
        return r.canonical();
    }
    let rows = s.dim() * ls.len();
    let mut stacked = ComplexMatrix::zeros(rows, r.dim());
    for (k, l) in ls.iter().enumerate() {
        let p = s.frame().adjoint() * l * r.frame();
        stacked.view_mut((k * s.dim(), 0), (s.dim(), r.dim())).copy_from(&p);
    }
    let k = kernel_abs(&stacked, threshold);
    r.embed(&k).expect("kernel lives in R coordinates").canonical()
}

/// `H_R' = ∩_k ker L̃_P,k`, embedded in ambient coordinates.
pub fn h_r_prime(m: &LindbladModel, s: &SubspaceBasis, tol: f64) -> Result<SubspaceBasis> {
    let inv = check_invariance_subspace(m, s, tol)?;
    if !inv.invariant {
        return Err(Error::Precondition(format!(
            "target subspace is not invariant (L_Q residual {:.3e}, interplay residual {:.3e})",
            inv.lq_residual, inv.interplay_residual
        )));
    }
    Ok(h_r_prime_unchecked(m, s, &s.complement(), tol * m.scale()))
}

/// Largest subspace `V ⊆ W` with `Π_V^⊥ L̃_k Π_V = 0` and `Π_V^⊥ G Π_V = 0`,
/// by monotone shrinking.
pub fn largest_invariant_subspace(m: &LindbladModel, w: &SubspaceBasis, tol: f64) -> Result<SubspaceBasis> {
    Ok(largest_invariant_subspace_counted(m, w, tol)?.0)
}

/// As [`largest_invariant_subspace`], also returning the number of shrinking
/// steps taken.
pub fn largest_invariant_subspace_counted(
    m: &LindbladModel,
    w: &SubspaceBasis,
    tol: f64,
) -> Result<(SubspaceBasis, usize)> {
    check_ambient(m, w)?;
    let threshold = tol * m.scale();
    let d = m.dim();
    let mut ops = m.scaled_noise();
    ops.push(m.drift());
    let mut v = w.canonical();
    let mut steps = 0;
    while !v.is_zero() {
        let perp = ComplexMatrix::identity(d, d) - v.projector();
        let mut stacked = ComplexMatrix::zeros(d * ops.len(), v.dim());
        for (k, op) in ops.iter().enumerate() {
            stacked.view_mut((k * d, 0), (d, v.dim())).copy_from(&(&perp * op * v.frame()));
        }
        let k = kernel_abs(&stacked, threshold);
        if k.dim() == v.dim() {
            break;
        }
        steps += 1;
        v = v.embed(&k)?.canonical();
    }
    Ok((v, steps))
}

/// Attractivity verdict for a subspace target.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub invariance: InvarianceCheck,
    /// `None` when the target is not invariant and attractivity was not tested.
    pub attractive: Option<bool>,
    pub h_r_prime: SubspaceBasis,
    /// Largest invariant subspace inside `H_R'`; nonzero exactly when the
    /// target is invariant but not attractive.
    pub witness: SubspaceBasis,
    /// Whether some stationary operator is supported on `H_R'`.
    pub stationary_state_in_h_r_prime: Option<bool>,
    /// False if the subspace-level and state-level verdicts disagree.
    pub verdicts_agree: bool,
    /// `V̇ ≤ 0` at the maximally mixed state and matches `tr(Π_R L(ρ))`.
    pub lasalle_decay_check: bool,
}

impl AnalysisReport {
    pub fn invariant(&self) -> bool {
        self.invariance.invariant
    }

    pub fn is_attractive(&self) -> bool {
        self.attractive == Some(true)
    }
}

/// Whether some nonzero `Y` makes `L(V Y V†) = 0`.
fn stationary_operator_on(m: &LindbladModel, v: &SubspaceBasis, threshold: f64) -> bool {
    if v.is_zero() {
        return false;
    }
    let f = v.frame();
    let embed = f.conjugate().kronecker(f);
    let map = m.superoperator() * embed;
    !kernel_abs(&map, threshold).is_zero()
}

pub fn is_attractive(m: &LindbladModel, s: &SubspaceBasis, tol: f64) -> Result<AnalysisReport> {
    let invariance = check_invariance_subspace(m, s, tol)?;
    let d = m.dim();
    if !invariance.invariant {
        return Ok(AnalysisReport {
            invariance,
            attractive: None,
            h_r_prime: SubspaceBasis::zero(d),
            witness: SubspaceBasis::zero(d),
            stationary_state_in_h_r_prime: None,
            verdicts_agree: true,
            lasalle_decay_check: false,
        });
    }
    let threshold = tol * m.scale();
    let r = s.complement();
    let hrp = h_r_prime_unchecked(m, s, &r, threshold);
    let witness = largest_invariant_subspace(m, &hrp, tol)?;
    let attractive = witness.is_zero();
    let stationary = stationary_operator_on(m, &hrp, threshold);
    let mixed = DensityOperator::maximally_mixed(d);
    let vdot = lasalle_unchecked(m, s, &r, mixed.matrix());
    let direct = (r.projector() * m.apply(mixed.matrix())?).trace().re;
    let lasalle_decay_check = vdot <= 1e-12 && (vdot - direct).abs() <= threshold.max(1e-12);
    Ok(AnalysisReport {
        invariance,
        attractive: Some(attractive),
        h_r_prime: hrp,
        witness,
        stationary_state_in_h_r_prime: Some(stationary),
        verdicts_agree: stationary == !attractive,
        lasalle_decay_check,
    })
}

/// Subsystem verdict: `H_SF` attractive as a subspace, the subsystem
/// conditions hold, and one factor has a unique attractive state. This is a
/// sufficient test.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemReport {
    pub subspace: AnalysisReport,
    pub factorization: SubsystemCheck,
    pub factor_f_unique: bool,
    pub factor_s_unique: bool,
    pub attractive: bool,
}

pub fn is_attractive_subsystem(m: &LindbladModel, d: &SpaceDecomposition, tol: f64) -> Result<SubsystemReport> {
    require_factors(d)?;
    let subspace = is_attractive(m, d.target(), tol)?;
    let factorization = check_invariance_subsystem(m, d, tol)?;
    let (mut factor_f_unique, mut factor_s_unique) = (false, false);
    if factorization.invariant {
        factor_f_unique = unique_steady_state(&factor_model(m, d, TraceOut::First, tol)?, tol)?;
        factor_s_unique = unique_steady_state(&factor_model(m, d, TraceOut::Second, tol)?, tol)?;
    }
    let attractive = subspace.is_attractive() && factorization.invariant && (factor_f_unique || factor_s_unique);
    Ok(SubsystemReport { subspace, factorization, factor_f_unique, factor_s_unique, attractive })
}

/// Stationary operators of a model.
#[derive(Debug, Clone)]
pub struct SteadyStates {
    /// Hermitian basis of the kernel of the generator.
    pub kernel_basis: Vec<ComplexMatrix>,
    /// Image of the maximally mixed state under the spectral projection onto
    /// the kernel.
    pub fixed_state: DensityOperator,
}

/// Real Gram–Schmidt over Hermitian matrices under `Re tr(A†B)`.
fn hermitian_basis(candidates: Vec<ComplexMatrix>, k: usize) -> Vec<ComplexMatrix> {
    let mut out: Vec<ComplexMatrix> = Vec::with_capacity(k);
    let mut pool = candidates;
    while out.len() < k && !pool.is_empty() {
        let (idx, _) = pool
            .iter()
            .enumerate()
            .map(|(i, x)| (i, x.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty pool");
        let x = pool.swap_remove(idx);
        let nx = x.norm();
        if nx < 1e-8 {
            break;
        }
        let q = x / re(nx);
        for y in pool.iter_mut() {
            let ov = (q.adjoint() * &*y).trace().re;
            *y -= &q * re(ov);
        }
        out.push(q);
    }
    out
}

pub fn steady_states(m: &LindbladModel, tol: f64) -> Result<SteadyStates> {
    let d = m.dim();
    let sup = m.superoperator();
    let threshold = tol * m.scale();
    let right = kernel_abs(&sup, threshold);
    let left = kernel_abs(&sup.adjoint(), threshold);
    if right.dim() != left.dim() || right.is_zero() {
        return Err(Error::Numeric(format!(
            "zero eigenspace looks defective (right kernel {}, left kernel {}); try a different tolerance",
            right.dim(),
            left.dim()
        )));
    }
    let (v, w) = (right.frame(), left.frame());
    let wv = w.adjoint() * v;
    let sv = nalgebra::SVD::new(wv.clone(), false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if !(smin > 1e-8 * smax.max(1.0)) {
        return Err(Error::Numeric(format!(
            "zero eigenspace is numerically defective (condition {:.3e}); try a different tolerance",
            smax / smin
        )));
    }
    let inv = wv
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular kernel pairing; try a different tolerance".into()))?;
    let mixed = DensityOperator::maximally_mixed(d);
    let image = v * (inv * (w.adjoint() * vec_of(mixed.matrix())));
    let mut rho = hermitize(&unvec(&image, d));
    let tr = rho.trace().re;
    if !(tr.abs() > 1e-12) {
        return Err(Error::Numeric("projected state has vanishing trace".into()));
    }
    rho /= re(tr);
    let lmin = hermitian_eigen(&rho).0.first().copied().unwrap_or(0.0);
    if lmin < -1e-7 {
        return Err(Error::Numeric(format!("projected state is not positive (eigenvalue {lmin:.3e})")));
    }
    let mut candidates = Vec::with_capacity(2 * right.dim());
    for x in right.vectors() {
        let x = unvec(&x, d);
        let xd = x.adjoint();
        candidates.push((&x + &xd) * re(0.5));
        candidates.push((&x - &xd) * C64::new(0.0, -0.5));
    }
    let kernel_basis = hermitian_basis(candidates, right.dim());
    Ok(SteadyStates { kernel_basis, fixed_state: DensityOperator::new_unchecked(rho) })
}

fn lasalle_unchecked(m: &LindbladModel, s: &SubspaceBasis, r: &SubspaceBasis, rho: &ComplexMatrix) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let rho_r = r.frame().adjoint() * rho * r.frame();
    let mut acc = ComplexMatrix::zeros(r.dim(), r.dim());
    for l in m.scaled_noise() {
        let p = s.frame().adjoint() * l * r.frame();
        acc += p.adjoint() * p;
    }
    -(acc * rho_r).trace().re
}

/// `V̇(ρ) = −tr(Σ_k L̃_P,k† L̃_P,k ρ_R)` for `V(ρ) = tr(Π_R ρ)`.
pub fn lasalle_derivative(m: &LindbladModel, s: &SubspaceBasis, rho: &DensityOperator, tol: f64) -> Result<f64> {
    let inv = check_invariance_subspace(m, s, tol)?;
    if !inv.invariant {
        return Err(Error::Precondition(format!(
            "target subspace is not invariant (L_Q residual {:.3e}, interplay residual {:.3e})",
            inv.lq_residual, inv.interplay_residual
        )));
    }
    if rho.dim() != m.dim() {
        return Err(Error::Dimension("state does not match model dimension".into()));
    }
    Ok(lasalle_unchecked(m, s, &s.complement(), rho.matrix()))
}

/// True when every `L̃_k` has vanishing P and Q blocks, which rules out
/// attractivity.
pub fn hermitian_noise_obstruction(m: &LindbladModel, s: &SubspaceBasis, tol: f64) -> Result<bool> {
    let inv = check_invariance_subspace(m, s, tol)?;
    if !inv.invariant {
        return Err(Error::Precondition("target subspace is not invariant".into()));
    }
    let r = s.complement();
    if r.is_zero() {
        return Err(Error::Precondition("complement is empty".into()));
    }
    let threshold = tol * m.scale();
    Ok(m.scaled_noise().iter().all(|l| {
        let b = Blocks::of(l, s, &r);
        b.p.norm() <= threshold && b.q.norm() <= threshold
    }))
}

/// One-dimensional kernel and no nonzero purely imaginary eigenvalues.
pub fn unique_steady_state(m: &LindbladModel, tol: f64) -> Result<bool> {
    let sup = m.superoperator();
    let threshold = tol * m.scale();
    if kernel_abs(&sup, threshold).dim() != 1 {
        return Ok(false);
    }
    let spectrum = eigenvalues(&sup)?;
    Ok(!spectrum.iter().any(|l| l.re.abs() <= threshold && l.im.abs() > threshold))
}
