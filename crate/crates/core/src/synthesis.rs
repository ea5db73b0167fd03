//! Controller synthesis: Hamiltonian compensation, open-loop attractivity
//! corrections, and Markovian feedback design for subspaces, pure states
//! and subsystems.
//!
//! All constructions run in frame coordinates `X^B = W† X W` with
//! `W = [V_S | V_R]` and are rotated back at the end, so the output depends
//! only on the decomposition and not on the ambient basis.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    check_invariance_subspace, is_attractive, is_attractive_subsystem, largest_invariant_subspace,
    steady_states, unique_steady_state,
};
use crate::error::{Error, Result};
use crate::linalg::{
    from_frame, hermitian_eigen, hermitian_split, hermiticity_residual, hermitize, partial_trace, re, support_projector, to_frame,
    ComplexMatrix, ComplexVector, SubspaceBasis, TraceOut, C64, DEFAULT_TOL, I,
};
use crate::model::{fme_reduce, random_hermitian, FeedbackModel, HERMITIAN_TOL, LindbladModel, NoiseChannel, SpaceDecomposition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub tol: f64,
    /// Magnitude of the coupling blocks added by the open-loop iteration.
    pub coupling_scale: f64,
    /// Seed for the random fallback Hamiltonian of the open-loop iteration.
    pub seed: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, coupling_scale: 1.0, seed: 0 }
    }
}

/// Why a synthesis request has no solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// Some noise operator maps the target into its complement (`L_Q ≠ 0`).
    NoiseLeavesTarget { residual: f64 },
    /// The complement already supports an invariant set, so no Hamiltonian
    /// can make the target attractive.
    ComplementInvariant,
    /// `[Π_S, M + M†] = 0`.
    MeasurementBlockDiagonal { residual: f64 },
    /// `[ρ_d, M + M†] = 0`.
    TargetCommutesWithMeasurement { residual: f64 },
    /// The Hermitian part of `M` on the SF block is neither `I⊗C_F` nor
    /// `C_S⊗I`.
    FactorFormMismatch { residual_identity_s: f64, residual_identity_f: f64 },
    /// The Hermitian part of `M` on the SF block is a multiple of the identity.
    ScalarFactorBlock,
    /// The open-loop iteration exceeded its step budget.
    NotConverged { iterations: usize },
    /// The final closed loop failed its attractivity check.
    VerificationFailed,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoiseLeavesTarget { residual } => {
                write!(f, "noise operators map the target into its complement (L_Q residual {residual:.3e})")
            }
            Self::ComplementInvariant => write!(f, "the complement of the target is invariant (all L_P vanish)"),
            Self::MeasurementBlockDiagonal { residual } => {
                write!(f, "[Pi_S, M + M^dag] = 0: the measurement does not couple target and complement ({residual:.3e})")
            }
            Self::TargetCommutesWithMeasurement { residual } => {
                write!(f, "[rho_d, M + M^dag] = 0: the target commutes with the measured observable ({residual:.3e})")
            }
            Self::FactorFormMismatch { residual_identity_s, residual_identity_f } => write!(
                f,
                "Hermitian part of M on the SF block is neither I_S (x) C_F ({residual_identity_s:.3e}) nor C_S (x) I_F ({residual_identity_f:.3e})"
            ),
            Self::ScalarFactorBlock => write!(f, "Hermitian part of M on the SF block is a multiple of the identity"),
            Self::NotConverged { iterations } => {
                write!(f, "open-loop iteration did not converge within {iterations} steps")
            }
            Self::VerificationFailed => write!(f, "synthesized closed loop failed the attractivity check"),
        }
    }
}

impl Infeasibility {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoiseLeavesTarget { .. } => "noise_leaves_target",
            Self::ComplementInvariant => "complement_invariant",
            Self::MeasurementBlockDiagonal { .. } => "measurement_block_diagonal",
            Self::TargetCommutesWithMeasurement { .. } => "target_commutes_with_measurement",
            Self::FactorFormMismatch { .. } => "factor_form_mismatch",
            Self::ScalarFactorBlock => "scalar_factor_block",
            Self::NotConverged { .. } => "not_converged",
            Self::VerificationFailed => "verification_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub feasible: bool,
    pub feedback: Option<ComplexMatrix>,
    pub h_c: Option<ComplexMatrix>,
    /// Closed-loop model (the input model when infeasible).
    pub closed_loop: LindbladModel,
    /// Coupling rounds of the open-loop iteration.
    pub iterations: usize,
    /// Dimension of `H_R'` when the open-loop iteration started.
    pub h_r_prime_dim: usize,
    pub infeasibility: Option<Infeasibility>,
    pub notes: Vec<String>,
}

impl SynthesisResult {
    fn infeasible(model: LindbladModel, why: Infeasibility) -> Self {
        Self {
            feasible: false,
            feedback: None,
            h_c: None,
            closed_loop: model,
            iterations: 0,
            h_r_prime_dim: 0,
            infeasibility: Some(why),
            notes: Vec::new(),
        }
    }
}

fn first_coords(n: usize, k: usize) -> SubspaceBasis {
    SubspaceBasis::coordinate(n, &(0..k).collect::<Vec<_>>())
}

/// `H_c^B` with P-block `−(i/2)Σ L_S†L_P − H_P` and Q-block its adjoint, or
/// the `L_Q` residual when compensation is impossible.
fn compensation_frame(mb: &LindbladModel, s: usize, threshold: f64) -> std::result::Result<ComplexMatrix, f64> {
    let n = mb.dim();
    let r = n - s;
    let ls = mb.scaled_noise();
    let lq = ls
        .iter()
        .map(|l| l.view((s, 0), (r, s)).norm_squared())
        .sum::<f64>()
        .sqrt();
    if lq > threshold {
        return Err(lq);
    }
    let mut target = ComplexMatrix::zeros(s, r);
    for l in &ls {
        let ls_blk = l.view((0, 0), (s, s)).into_owned();
        let lp = l.view((0, s), (s, r)).into_owned();
        target += ls_blk.adjoint() * lp * (-0.5 * I);
    }
    let hp = mb.hamiltonian.view((0, s), (s, r)).into_owned();
    let p = target - hp;
    let mut hc = ComplexMatrix::zeros(n, n);
    hc.view_mut((0, s), (s, r)).copy_from(&p);
    hc.view_mut((s, 0), (r, s)).copy_from(&p.adjoint());
    Ok(hc)
}

struct OpenLoop {
    h_c: ComplexMatrix,
    iterations: usize,
    h_r_prime_dim: usize,
    notes: Vec<String>,
    failure: Option<Infeasibility>,
}

/// Reorders a basis of an invariant subspace `T` so the support of the
/// fixed state of the dynamics restricted to `T` comes first.
fn support_first(mb: &LindbladModel, t: &SubspaceBasis, tol: f64) -> SubspaceBasis {
    let Ok(ss) = steady_states(&mb.restricted(t), tol) else {
        return t.clone();
    };
    let Ok(support) = support_projector(ss.fixed_state.matrix(), 1e-8) else {
        return t.clone();
    };
    let Ok(inner) = support.direct_sum(&support.complement()) else {
        return t.clone();
    };
    t.embed(&inner).unwrap_or_else(|_| t.clone())
}

/// The attractivity iteration on a frame-coordinate model whose target is
/// the span of the first `s` coordinates, which must be invariant.
fn openloop_frame(mb: &LindbladModel, s: usize, opts: &SynthesisOptions) -> Result<OpenLoop> {
    let n = mb.dim();
    let tol = opts.tol;
    let sb = first_coords(n, s);
    let mut out = OpenLoop {
        h_c: ComplexMatrix::zeros(n, n),
        iterations: 0,
        h_r_prime_dim: 0,
        notes: Vec::new(),
        failure: None,
    };
    if s == n {
        return Ok(out);
    }
    let rb = SubspaceBasis::coordinate(n, &(s..n).collect::<Vec<_>>());
    if check_invariance_subspace(mb, &rb, tol)?.invariant {
        out.failure = Some(Infeasibility::ComplementInvariant);
        return Ok(out);
    }
    let report = is_attractive(mb, &sb, tol)?;
    out.h_r_prime_dim = report.h_r_prime.dim();
    let hrp = report.h_r_prime;
    let budget = out.h_r_prime_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut current = mb.clone();
    let mut t = report.witness;
    while !t.is_zero() {
        if out.iterations >= budget {
            out.failure = Some(Infeasibility::NotConverged { iterations: out.iterations });
            return Ok(out);
        }
        out.iterations += 1;
        let t_ordered = support_first(&current, &t, tol);
        let z = sb.direct_sum(&t_ordered.canonical())?.complement();
        let pairs = t_ordered.dim().min(z.dim());
        let mut hm = ComplexMatrix::zeros(n, n);
        for i in 0..pairs {
            hm += z.vector(i) * t_ordered.vector(i).adjoint() * re(opts.coupling_scale);
        }
        let delta = hermitize(&(&hm + hm.adjoint()));
        out.h_c += &delta;
        current = current.perturbed(&delta);
        let next = largest_invariant_subspace(&current, &hrp, tol)?;
        if next.dim() >= t.dim() {
            let tf = t.frame();
            let h2 = hermitize(&(tf * random_hermitian(t.dim(), &mut rng) * tf.adjoint()))
                * re(opts.coupling_scale);
            out.notes.push(format!(
                "round {}: coupling alone left a {}-dimensional invariant subspace; added a seeded random Hamiltonian on it",
                out.iterations,
                next.dim()
            ));
            out.h_c += &h2;
            current = current.perturbed(&h2);
            t = largest_invariant_subspace(&current, &hrp, tol)?;
        } else {
            t = next;
        }
    }
    Ok(out)
}

fn decomposition_frame(s: &SubspaceBasis) -> (ComplexMatrix, usize) {
    let d = SpaceDecomposition::from_subspace(s);
    (d.frame(), s.dim())
}

/// Makes `I_S(H)` invariant by cancelling the interplay defect with a
/// Hamiltonian correction; infeasible iff some `L̃_Q,k ≠ 0`.
pub fn invariance_compensation(m: &LindbladModel, s: &SubspaceBasis, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    check_target(m.dim(), s)?;
    let (w, k) = decomposition_frame(s);
    let mb = m.in_frame(&w);
    match compensation_frame(&mb, k, opts.tol * m.scale()) {
        Err(residual) => Ok(SynthesisResult::infeasible(m.clone(), Infeasibility::NoiseLeavesTarget { residual })),
        Ok(hcb) => {
            let hc = hermitize(&from_frame(&hcb, &w));
            Ok(SynthesisResult {
                feasible: true,
                feedback: None,
                closed_loop: m.perturbed(&hc),
                h_c: Some(hc),
                iterations: 0,
                h_r_prime_dim: 0,
                infeasibility: None,
                notes: Vec::new(),
            })
        }
    }
}

fn check_target(dim: usize, s: &SubspaceBasis) -> Result<()> {
    if s.ambient_dim() != dim {
        return Err(Error::Dimension(format!(
            "target lives in dimension {}, model dimension is {dim}",
            s.ambient_dim()
        )));
    }
    if s.is_zero() {
        return Err(Error::Dimension("target subspace is empty".into()));
    }
    Ok(())
}

/// Hamiltonian correction that renders an invariant subspace attractive;
/// infeasible iff the complement is invariant.
pub fn openloop_attractor(m: &LindbladModel, s: &SubspaceBasis, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    check_target(m.dim(), s)?;
    let inv = check_invariance_subspace(m, s, opts.tol)?;
    if !inv.invariant {
        return Err(Error::Precondition(format!(
            "target subspace is not invariant (L_Q residual {:.3e}, interplay residual {:.3e}); apply invariance compensation first",
            inv.lq_residual, inv.interplay_residual
        )));
    }
    let (w, k) = decomposition_frame(s);
    let ol = openloop_frame(&m.in_frame(&w), k, opts)?;
    if let Some(why) = ol.failure {
        let mut r = SynthesisResult::infeasible(m.clone(), why);
        r.iterations = ol.iterations;
        r.h_r_prime_dim = ol.h_r_prime_dim;
        r.notes = ol.notes;
        return Ok(r);
    }
    let hc = hermitize(&from_frame(&ol.h_c, &w));
    let closed = m.perturbed(&hc);
    finish(closed, None, hc, ol.iterations, ol.h_r_prime_dim, ol.notes, |c| {
        Ok(is_attractive(c, s, opts.tol)?.is_attractive())
    })
}

/// Compensation followed by the attractivity iteration.
pub fn openloop_stabilize(m: &LindbladModel, s: &SubspaceBasis, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    let comp = invariance_compensation(m, s, opts)?;
    if !comp.feasible {
        return Ok(comp);
    }
    let mut r = openloop_attractor(&comp.closed_loop, s, opts)?;
    let hc1 = comp.h_c.expect("feasible compensation carries H_c");
    if r.feasible {
        r.h_c = Some(hermitize(&(hc1 + r.h_c.expect("feasible result carries H_c"))));
        r.closed_loop = m.perturbed(r.h_c.as_ref().expect("set above"));
    } else {
        r.closed_loop = m.clone();
    }
    Ok(r)
}

fn finish(
    closed: LindbladModel,
    feedback: Option<ComplexMatrix>,
    h_c: ComplexMatrix,
    iterations: usize,
    h_r_prime_dim: usize,
    notes: Vec<String>,
    verify: impl Fn(&LindbladModel) -> Result<bool>,
) -> Result<SynthesisResult> {
    let ok = verify(&closed)?;
    Ok(SynthesisResult {
        feasible: ok,
        feedback,
        h_c: Some(h_c),
        closed_loop: closed,
        iterations,
        h_r_prime_dim,
        infeasibility: (!ok).then_some(Infeasibility::VerificationFailed),
        notes,
    })
}

/// Feedback in frame coordinates: for every entry above the diagonal that
/// is not inside the leading `s × s` block, `F_jk = i M^H_jk + M^A_jk` (and
/// the conjugate below), so `M − iF` vanishes below the diagonal there.
fn upper_rule_feedback(mb: &ComplexMatrix, s: usize) -> ComplexMatrix {
    // i·M^H_jk + M^A_jk = i·conj(M_kj); written this way L_kj = M_kj - i·F_kj
    // cancels exactly.
    let n = mb.nrows();
    let mut f = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for k in (j + 1)..n {
            if k < s {
                continue;
            }
            let lower = mb[(k, j)];
            f[(k, j)] = C64::new(lower.im, -lower.re);
            f[(j, k)] = f[(k, j)].conj();
        }
    }
    f
}

fn effective_hamiltonian(h: &ComplexMatrix, m: &ComplexMatrix, f: &ComplexMatrix) -> ComplexMatrix {
    hermitize(&(h + (f * m + m.adjoint() * f) * re(0.5)))
}

fn check_operators(h: &ComplexMatrix, m: &ComplexMatrix, dim: usize) -> Result<()> {
    FeedbackModel::new(h.clone(), m.clone(), ComplexMatrix::zeros(dim, dim))?;
    let r = hermiticity_residual(h);
    if r > HERMITIAN_TOL {
        return Err(Error::Invalid(format!("H not Hermitian ({r:.1e})")));
    }
    Ok(())
}

fn open_loop_model(h: &ComplexMatrix, m: &ComplexMatrix) -> LindbladModel {
    LindbladModel::new(h.clone(), vec![NoiseChannel::new(m.clone(), 1.0)]).expect("shapes checked")
}

/// Feedback `F` and correction `H_c` making the target block of `d`
/// attractive for the feedback master equation with measurement `M`;
/// feasible iff `[Π_S, M + M†] ≠ 0`.
pub fn feedback_subspace(
    h: &ComplexMatrix,
    m: &ComplexMatrix,
    d: &SpaceDecomposition,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let n = d.ambient_dim();
    check_operators(h, m, n)?;
    let w = d.frame();
    let s = d.target_dim();
    let mb = to_frame(m, &w);
    let (mh, _) = hermitian_split(&mb)?;
    let mhp = mh.view((0, s), (s, n - s)).norm();
    if !(mhp > opts.tol * (1.0 + m.norm())) {
        return Ok(SynthesisResult::infeasible(
            open_loop_model(h, m),
            Infeasibility::MeasurementBlockDiagonal { residual: mhp },
        ));
    }
    let fb = upper_rule_feedback(&mb, s);
    let hb = to_frame(h, &w);
    feedback_from_frame(h, m, &w, s, &hb, &mb, fb, opts, None)
}

/// Shared tail of the feedback constructions: compensation, attractivity
/// iteration, rotation back and verification.
#[allow(clippy::too_many_arguments)]
fn feedback_from_frame(
    h: &ComplexMatrix,
    m: &ComplexMatrix,
    w: &ComplexMatrix,
    s: usize,
    hb: &ComplexMatrix,
    mb: &ComplexMatrix,
    fb: ComplexMatrix,
    opts: &SynthesisOptions,
    preset_hc: Option<ComplexMatrix>,
) -> Result<SynthesisResult> {
    let heff = effective_hamiltonian(hb, mb, &fb);
    let lb = mb - &fb * I;
    let mut hcb = preset_hc.unwrap_or_else(|| ComplexMatrix::zeros(hb.nrows(), hb.ncols()));
    let base = LindbladModel::new(&heff + &hcb, vec![NoiseChannel::new(lb, 1.0)])?;
    let comp = match compensation_frame(&base, s, opts.tol * base.scale()) {
        Ok(c) => c,
        Err(residual) => {
            return Ok(SynthesisResult::infeasible(open_loop_model(h, m), Infeasibility::NoiseLeavesTarget { residual }))
        }
    };
    hcb += &comp;
    let compensated = base.perturbed(&comp);
    let ol = openloop_frame(&compensated, s, opts)?;
    let f = hermitize(&from_frame(&fb, w));
    if let Some(why) = ol.failure {
        let mut r = SynthesisResult::infeasible(open_loop_model(h, m), why);
        r.iterations = ol.iterations;
        r.h_r_prime_dim = ol.h_r_prime_dim;
        r.notes = ol.notes;
        return Ok(r);
    }
    hcb += &ol.h_c;
    let hc = hermitize(&from_frame(&hcb, w));
    let closed = fme_reduce(&FeedbackModel::new(h + &hc, m.clone(), f.clone())?)?;
    let target = SubspaceBasis::new(w.columns(0, s).into_owned())?;
    finish(closed, Some(f), hc, ol.iterations, ol.h_r_prime_dim, ol.notes, |c| {
        Ok(is_attractive(c, &target, opts.tol)?.is_attractive())
    })
}

/// Orthonormal completion of a unit vector: modified Gram–Schmidt over the
/// standard basis with the largest-modulus coordinate of `psi` skipped.
pub fn pure_state_frame(psi: &ComplexVector) -> Result<ComplexMatrix> {
    let n = psi.len();
    let norm = psi.norm();
    if n == 0 || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("target state must be normalized (norm {norm})")));
    }
    let pivot = (0..n)
        .max_by(|&a, &b| psi[a].norm().total_cmp(&psi[b].norm()))
        .expect("nonempty");
    let mut cols = vec![psi.clone()];
    for j in (0..n).filter(|&j| j != pivot) {
        let mut v = ComplexVector::zeros(n);
        v[j] = re(1.0);
        for _ in 0..2 {
            for u in &cols {
                let ov = u.dotc(&v);
                v -= u * ov;
            }
        }
        let nv = v.norm();
        v /= re(nv);
        cols.push(v);
    }
    Ok(ComplexMatrix::from_columns(&cols))
}

/// Feedback stabilization of a pure state; feasible iff
/// `[ρ_d, M + M†] ≠ 0`.
pub fn feedback_purestate(
    h: &ComplexMatrix,
    m: &ComplexMatrix,
    psi: &ComplexVector,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    if psi.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "target state has length {}, model dimension is {}",
            psi.len(),
            h.nrows()
        )));
    }
    let w = pure_state_frame(psi)?;
    let n = psi.len();
    let rho = psi * psi.adjoint();
    let x = m + m.adjoint();
    let comm = (&rho * &x - &x * &rho).norm();
    if !(comm > opts.tol * (1.0 + m.norm())) {
        check_operators(h, m, n)?;
        return Ok(SynthesisResult::infeasible(
            open_loop_model(h, m),
            Infeasibility::TargetCommutesWithMeasurement { residual: comm },
        ));
    }
    let s = SubspaceBasis::new(w.columns(0, 1).into_owned())?;
    let r = SubspaceBasis::new(w.columns(1, n - 1).into_owned())?;
    feedback_subspace(h, m, &SpaceDecomposition::with_complement(s, r)?, opts)
}

/// Which factor carries the measurement's non-trivial Hermitian part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    /// `M^H_SF = I_S ⊗ C_F`.
    F,
    /// `M^H_SF = C_S ⊗ I_F`.
    S,
}

/// Feedback making the subsystem `H_S` of `(H_S ⊗ H_F) ⊕ H_R` attractive.
pub fn feedback_subsystem(
    h: &ComplexMatrix,
    m: &ComplexMatrix,
    d: &SpaceDecomposition,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let (ns, nf) = d
        .factors()
        .ok_or_else(|| Error::Dimension("decomposition has no tensor factor".into()))?;
    if ns < 2 || nf < 2 {
        return Err(Error::Precondition(format!(
            "subsystem synthesis needs both factors of dimension at least 2 (got {ns} and {nf})"
        )));
    }
    let n = d.ambient_dim();
    check_operators(h, m, n)?;
    let w = d.frame();
    let sf = ns * nf;
    let thr = opts.tol * (1.0 + m.norm());
    let mb = to_frame(m, &w);
    let (mh, ma) = hermitian_split(&mb)?;
    let uncontrolled = open_loop_model(h, m);
    if sf < n {
        let mhp = mh.view((0, sf), (sf, n - sf)).norm();
        if !(mhp > thr) {
            return Ok(SynthesisResult::infeasible(
                uncontrolled,
                Infeasibility::MeasurementBlockDiagonal { residual: mhp },
            ));
        }
    }
    let mh_sf = mh.view((0, 0), (sf, sf)).into_owned();
    let c_f = partial_trace(&mh_sf, (ns, nf), TraceOut::First)? / re(ns as f64);
    let c_s = partial_trace(&mh_sf, (ns, nf), TraceOut::Second)? / re(nf as f64);
    let res_s = (&mh_sf - ComplexMatrix::identity(ns, ns).kronecker(&c_f)).norm();
    let res_f = (&mh_sf - c_s.kronecker(&ComplexMatrix::identity(nf, nf))).norm();
    let side = if res_s <= thr {
        FactorSide::F
    } else if res_f <= thr {
        FactorSide::S
    } else {
        return Ok(SynthesisResult::infeasible(
            uncontrolled,
            Infeasibility::FactorFormMismatch { residual_identity_s: res_s, residual_identity_f: res_f },
        ));
    };
    let scalar = mh_sf.trace() / re(sf as f64);
    if (&mh_sf - ComplexMatrix::identity(sf, sf) * scalar).norm() <= thr {
        return Ok(SynthesisResult::infeasible(uncontrolled, Infeasibility::ScalarFactorBlock));
    }
    let (c, dim_c) = match side {
        FactorSide::F => (hermitize(&c_f), nf),
        FactorSide::S => (hermitize(&c_s), ns),
    };
    let (_, vecs) = hermitian_eigen(&c);
    let psi1 = (vecs.column(0) + vecs.column(dim_c - 1)) / re(2f64.sqrt());
    let factor = feedback_purestate(&ComplexMatrix::zeros(dim_c, dim_c), &c, &psi1, opts)?;
    if !factor.feasible {
        return Ok(SynthesisResult::infeasible(uncontrolled, Infeasibility::ScalarFactorBlock));
    }
    let f_factor = factor.feedback.clone().expect("feasible factor synthesis carries F");
    let h_factor = factor.closed_loop.hamiltonian.clone();
    let lift = |x: &ComplexMatrix| match side {
        FactorSide::F => ComplexMatrix::identity(ns, ns).kronecker(x),
        FactorSide::S => x.kronecker(&ComplexMatrix::identity(nf, nf)),
    };
    let mut fb = upper_rule_feedback(&mb, sf);
    let f_sf = ma.view((0, 0), (sf, sf)).into_owned() + lift(&f_factor);
    fb.view_mut((0, 0), (sf, sf)).copy_from(&f_sf);
    let hb = to_frame(h, &w);
    let heff = effective_hamiltonian(&hb, &mb, &fb);
    let mut preset = ComplexMatrix::zeros(n, n);
    let h_sf_fix = lift(&h_factor) - heff.view((0, 0), (sf, sf));
    preset.view_mut((0, 0), (sf, sf)).copy_from(&h_sf_fix);
    let mut result = feedback_from_frame(h, m, &w, sf, &hb, &mb, fb, opts, Some(preset))?;
    result.notes.push(format!(
        "factor side: {}; factor target state from the extreme eigenvectors of C",
        match side {
            FactorSide::F => "I_S (x) C_F",
            FactorSide::S => "C_S (x) I_F",
        }
    ));
    if result.feasible {
        let sub = is_attractive_subsystem(&result.closed_loop, d, opts.tol)?;
        let factor_unique = unique_steady_state(&factor.closed_loop, opts.tol)?;
        if !(sub.attractive && factor_unique) {
            result.feasible = false;
            result.infeasibility = Some(Infeasibility::VerificationFailed);
        }
    }
    Ok(result)
}
