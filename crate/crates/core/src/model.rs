//! Lindblad generators, feedback master equations, density operators and
//! Hilbert-space decompositions.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{
    c, ensure_square, hermitian_eigen, hermiticity_residual, hermitize, is_finite, re, stack_frames,
    to_frame, ComplexMatrix, ComplexVector, SubspaceBasis, C64, FRAME_TOL, I,
};

/// Hermiticity tolerance for Hamiltonians and feedback operators.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChannel {
    pub op: ComplexMatrix,
    pub rate: f64,
}

impl NoiseChannel {
    pub fn new(op: ComplexMatrix, rate: f64) -> Self {
        Self { op, rate }
    }

    /// `√γ L`.
    pub fn scaled(&self) -> ComplexMatrix {
        &self.op * re(self.rate.max(0.0).sqrt())
    }
}

/// One violated invariant with its measured residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub what: String,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:.1e})", self.what, self.residual)
    }
}

pub trait Validate {
    /// Violated invariants; empty when valid.
    fn validate(&self) -> Vec<Violation>;

    fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
            ))
        }
    }
}

fn hermitian_violation(name: &str, x: &ComplexMatrix) -> Option<Violation> {
    let r = hermiticity_residual(x);
    (r > HERMITIAN_TOL).then(|| Violation { what: format!("{name} not Hermitian"), residual: r })
}

fn finite_violation(name: &str, x: &ComplexMatrix) -> Option<Violation> {
    (!is_finite(x)).then(|| Violation { what: format!("{name} has non-finite entries"), residual: f64::NAN })
}

/// Hamiltonian plus weighted noise operators.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    pub hamiltonian: ComplexMatrix,
    pub noise: Vec<NoiseChannel>,
}

impl LindbladModel {
    /// Checks shapes only; use [`Validate`] or [`LindbladModel::checked`] for
    /// the remaining invariants.
    pub fn new(hamiltonian: ComplexMatrix, noise: Vec<NoiseChannel>) -> Result<Self> {
        let d = ensure_square(&hamiltonian, "Hamiltonian")?;
        for (k, ch) in noise.iter().enumerate() {
            if ch.op.shape() != (d, d) {
                return Err(Error::Dimension(format!(
                    "noise operator {k} is {}x{}, model dimension is {d}",
                    ch.op.nrows(),
                    ch.op.ncols()
                )));
            }
        }
        Ok(Self { hamiltonian, noise })
    }

    pub fn checked(hamiltonian: ComplexMatrix, noise: Vec<NoiseChannel>) -> Result<Self> {
        let m = Self::new(hamiltonian, noise)?;
        m.ensure_valid()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Noise operators with their rates absorbed, `√γ_k L_k`.
    pub fn scaled_noise(&self) -> Vec<ComplexMatrix> {
        self.noise.iter().map(NoiseChannel::scaled).collect()
    }

    /// `G = −iH − ½ Σ_k L̃_k† L̃_k`.
    pub fn drift(&self) -> ComplexMatrix {
        let mut g = &self.hamiltonian * (-I);
        for l in self.scaled_noise() {
            g -= l.adjoint() * &l * re(0.5);
        }
        g
    }

    /// Scale used to turn relative tolerances into absolute thresholds.
    pub fn scale(&self) -> f64 {
        1.0 + self.hamiltonian.norm() + self.noise.iter().map(|ch| ch.scaled().norm_squared()).sum::<f64>()
    }

    /// `L(ρ) = −i[H,ρ] + Σ_k γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim();
        if rho.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "operand is {}x{}, model dimension is {d}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * (-I);
        for ch in &self.noise {
            if ch.rate == 0.0 {
                continue;
            }
            let l = &ch.op;
            let ld = l.adjoint();
            let ldl = &ld * l;
            let term = l * rho * &ld - (&ldl * rho + rho * &ldl) * re(0.5);
            out += term * re(ch.rate);
        }
        Ok(out)
    }

    /// Matrix of the generator acting on column-stacked `vec(ρ)`.
    pub fn superoperator(&self) -> ComplexMatrix {
        let d = self.dim();
        let id = ComplexMatrix::identity(d, d);
        let h = &self.hamiltonian;
        let mut s = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
        for ch in &self.noise {
            if ch.rate == 0.0 {
                continue;
            }
            let l = &ch.op;
            let ldl = l.adjoint() * l;
            let term = l.conjugate().kronecker(l)
                - id.kronecker(&ldl) * re(0.5)
                - ldl.transpose().kronecker(&id) * re(0.5);
            s += term * re(ch.rate);
        }
        s
    }

    pub fn with_hamiltonian(&self, hamiltonian: ComplexMatrix) -> Self {
        Self { hamiltonian, noise: self.noise.clone() }
    }

    /// Adds `delta` to the Hamiltonian.
    pub fn perturbed(&self, delta: &ComplexMatrix) -> Self {
        self.with_hamiltonian(&self.hamiltonian + delta)
    }

    /// All operators expressed in the frame `W` (`W† X W`), with rates
    /// absorbed. `W` must be square unitary.
    pub fn in_frame(&self, w: &ComplexMatrix) -> Self {
        Self {
            hamiltonian: hermitize(&to_frame(&self.hamiltonian, w)),
            noise: self
                .noise
                .iter()
                .map(|ch| NoiseChannel::new(to_frame(&ch.scaled(), w), 1.0))
                .collect(),
        }
    }

    /// Restriction to an invariant subspace: operators `V† X V`.
    pub fn restricted(&self, v: &SubspaceBasis) -> Self {
        let f = v.frame();
        Self {
            hamiltonian: hermitize(&(f.adjoint() * &self.hamiltonian * f)),
            noise: self
                .noise
                .iter()
                .map(|ch| NoiseChannel::new(f.adjoint() * ch.scaled() * f, 1.0))
                .collect(),
        }
    }

    /// SHA-256 over the bit patterns of every entry.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        let mut feed = |m: &ComplexMatrix| {
            for z in m.iter() {
                h.update(z.re.to_bits().to_le_bytes());
                h.update(z.im.to_bits().to_le_bytes());
            }
        };
        feed(&self.hamiltonian);
        for ch in &self.noise {
            feed(&ch.op);
        }
        for ch in &self.noise {
            h.update(ch.rate.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

impl Validate for LindbladModel {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        out.extend(finite_violation("H", &self.hamiltonian));
        out.extend(hermitian_violation("H", &self.hamiltonian));
        for (k, ch) in self.noise.iter().enumerate() {
            out.extend(finite_violation(&format!("L_{k}"), &ch.op));
            if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
                out.push(Violation { what: format!("negative rate on channel {k}"), residual: ch.rate });
            }
        }
        out
    }
}

/// Homodyne-type feedback loop `(H, M, F)` with unit detection efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackModel {
    pub hamiltonian: ComplexMatrix,
    pub measurement: ComplexMatrix,
    pub feedback: ComplexMatrix,
}

impl FeedbackModel {
    pub fn new(hamiltonian: ComplexMatrix, measurement: ComplexMatrix, feedback: ComplexMatrix) -> Result<Self> {
        let d = ensure_square(&hamiltonian, "Hamiltonian")?;
        for (name, m) in [("measurement", &measurement), ("feedback", &feedback)] {
            if m.shape() != (d, d) {
                return Err(Error::Dimension(format!(
                    "{name} operator is {}x{}, model dimension is {d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self { hamiltonian, measurement, feedback })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Direct evaluation of the feedback master equation
    /// `−i[H + ½(FM + M†F), ρ] + D(M − iF, ρ)`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (h, m, f) = (&self.hamiltonian, &self.measurement, &self.feedback);
        let heff = h + (f * m + m.adjoint() * f) * re(0.5);
        let l = m - f * I;
        let ld = l.adjoint();
        let ldl = &ld * &l;
        if rho.shape() != h.shape() {
            return Err(Error::Dimension("operand does not match model dimension".into()));
        }
        Ok((&heff * rho - rho * &heff) * (-I) + &l * rho * &ld - (&ldl * rho + rho * &ldl) * re(0.5))
    }
}

impl Validate for FeedbackModel {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        out.extend(finite_violation("H", &self.hamiltonian));
        out.extend(finite_violation("M", &self.measurement));
        out.extend(finite_violation("F", &self.feedback));
        out.extend(hermitian_violation("H", &self.hamiltonian));
        out.extend(hermitian_violation("F", &self.feedback));
        out
    }
}

/// Equivalent Lindblad form of the feedback master equation: Hamiltonian
/// `H + ½(FM + M†F)` (symmetrized) and the single channel `(M − iF, 1)`.
pub fn fme_reduce(fm: &FeedbackModel) -> Result<LindbladModel> {
    for (name, x) in [("H", &fm.hamiltonian), ("F", &fm.feedback)] {
        let r = hermiticity_residual(x);
        if r > HERMITIAN_TOL {
            return Err(Error::Invalid(format!("{name} not Hermitian ({r:.1e})")));
        }
    }
    let (h, m, f) = (&fm.hamiltonian, &fm.measurement, &fm.feedback);
    let heff = hermitize(&(h + (f * m + m.adjoint() * f) * re(0.5)));
    let l = m - f * I;
    LindbladModel::new(heff, vec![NoiseChannel::new(l, 1.0)])
}

/// Density operator; [`Validate`] reports trace, Hermiticity and positivity.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    rho: ComplexMatrix,
}

/// Positivity slack for density operators.
pub const POSITIVITY_TOL: f64 = 1e-9;

impl DensityOperator {
    /// Validated construction.
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        ensure_square(&rho, "density operator")?;
        let d = Self { rho };
        d.ensure_valid()?;
        Ok(d)
    }

    pub fn new_unchecked(rho: ComplexMatrix) -> Self {
        Self { rho }
    }

    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("state vector norm {n} differs from 1")));
        }
        Ok(Self { rho: psi * psi.adjoint() })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { rho: ComplexMatrix::identity(dim, dim) * re(1.0 / dim as f64) }
    }

    /// `GG†/trace(GG†)` with a seeded complex Ginibre matrix `G`.
    pub fn random(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dimension must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            c(a, b)
        });
        let gg = &g * g.adjoint();
        let tr = gg.trace().re;
        Ok(Self { rho: hermitize(&(gg / re(tr))) })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.rho
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.rho).0.first().copied().unwrap_or(0.0)
    }

    /// Violations with a caller-chosen positivity slack.
    pub fn validate_with(&self, positivity_tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        out.extend(finite_violation("rho", &self.rho));
        if !out.is_empty() {
            return out;
        }
        out.extend(hermitian_violation("rho", &self.rho));
        let dev = (self.rho.trace() - re(1.0)).norm();
        if dev > 1e-10 {
            out.push(Violation { what: "trace deviation".into(), residual: dev });
        }
        let lmin = self.min_eigenvalue();
        if lmin < -positivity_tol {
            out.push(Violation { what: "negative eigenvalue".into(), residual: lmin });
        }
        out
    }
}

impl Validate for DensityOperator {
    fn validate(&self) -> Vec<Violation> {
        self.validate_with(POSITIVITY_TOL)
    }
}

/// Orthogonal decomposition `H_I = (H_S ⊗ H_F) ⊕ H_R` realized by frames.
///
/// The `sf` frame lists `|φ_j^S⟩⊗|φ_k^F⟩` at column `j·f + k`. Without a
/// factor the decomposition is the plain subspace split `H_S ⊕ H_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceDecomposition {
    sf: SubspaceBasis,
    factors: Option<(usize, usize)>,
    r: SubspaceBasis,
}

impl SpaceDecomposition {
    /// Subspace split with the canonical complement.
    pub fn from_subspace(s: &SubspaceBasis) -> Self {
        Self { r: s.complement(), sf: s.clone(), factors: None }
    }

    pub fn with_complement(s: SubspaceBasis, r: SubspaceBasis) -> Result<Self> {
        stack_frames(&[&s, &r])?;
        Ok(Self { sf: s, factors: None, r })
    }

    pub fn subsystem(sf: SubspaceBasis, s_dim: usize, f_dim: usize, r: Option<SubspaceBasis>) -> Result<Self> {
        if s_dim * f_dim != sf.dim() || s_dim == 0 || f_dim == 0 {
            return Err(Error::Dimension(format!(
                "factor dimensions {s_dim}x{f_dim} do not match a {}-dimensional SF block",
                sf.dim()
            )));
        }
        let r = r.unwrap_or_else(|| sf.complement());
        stack_frames(&[&sf, &r])?;
        Ok(Self { sf, factors: Some((s_dim, f_dim)), r })
    }

    pub fn ambient_dim(&self) -> usize {
        self.sf.ambient_dim()
    }

    /// The target block (`H_S`, or `H_S ⊗ H_F` with a factor).
    pub fn target(&self) -> &SubspaceBasis {
        &self.sf
    }

    pub fn remainder(&self) -> &SubspaceBasis {
        &self.r
    }

    pub fn factors(&self) -> Option<(usize, usize)> {
        self.factors
    }

    /// Square unitary `[V_SF | V_R]`.
    pub fn frame(&self) -> ComplexMatrix {
        stack_frames(&[&self.sf, &self.r]).expect("frames validated at construction")
    }

    pub fn target_dim(&self) -> usize {
        self.sf.dim()
    }

    pub fn target_projector(&self) -> ComplexMatrix {
        self.sf.projector()
    }

    pub fn remainder_projector(&self) -> ComplexMatrix {
        self.r.projector()
    }
}

/// What a synthesis or verification run aims at.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    PureState(ComplexVector),
    Subspace(SpaceDecomposition),
    Subsystem(SpaceDecomposition),
}

impl TargetSpec {
    pub fn pure_state(psi: ComplexVector) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > FRAME_TOL {
            return Err(Error::Domain(format!("pure-state payload has norm {n}")));
        }
        Ok(Self::PureState(psi))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::PureState(_) => "pure_state",
            Self::Subspace(_) => "subspace",
            Self::Subsystem(_) => "subsystem",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::PureState(v) => v.len(),
            Self::Subspace(d) | Self::Subsystem(d) => d.ambient_dim(),
        }
    }

    pub fn decomposition(&self) -> SpaceDecomposition {
        match self {
            Self::PureState(psi) => SpaceDecomposition::from_subspace(
                &SubspaceBasis::from_unit_vector(psi).expect("normalized at construction"),
            ),
            Self::Subspace(d) | Self::Subsystem(d) => d.clone(),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.ambient_dim() != dim {
            return Err(Error::Dimension(format!(
                "target lives in dimension {}, model dimension is {dim}",
                self.ambient_dim()
            )));
        }
        Ok(())
    }
}

/// Deterministic Hermitian matrix with Gaussian entries; used for random
/// models and perturbations.
pub fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    hermitize(&random_complex(dim, dim, rng))
}

pub fn random_complex(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        C64::new(a, b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, vec_of};
    use crate::operators::*;

    fn damping(gamma: f64) -> LindbladModel {
        LindbladModel::new(ComplexMatrix::zeros(2, 2), vec![NoiseChannel::new(sigma_plus(), gamma)]).unwrap()
    }

    #[test]
    fn generator_examples() {
        let out = damping(1.0).apply(&diag(&[0.0, 1.0])).unwrap();
        assert!((out - diag(&[1.0, -1.0])).norm() < 1e-15);

        let m = LindbladModel::new(sigma_z(), vec![]).unwrap();
        let plus = ket(&[1.0, 1.0]) / re(2f64.sqrt());
        let rho = &plus * plus.adjoint();
        // −i[σz, |+⟩⟨+|] = [[0, −i], [i, 0]] = σ_y
        assert!((m.apply(&rho).unwrap() - sigma_y()).norm() < 1e-15);

        assert!(m.apply(&ComplexMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn superoperator_examples() {
        let m = LindbladModel::new(ComplexMatrix::zeros(3, 3), vec![]).unwrap();
        assert_eq!(m.superoperator().norm(), 0.0);

        let gamma = 0.8;
        let ev = eigenvalues(&damping(gamma).superoperator()).unwrap();
        let expected = [0.0, -gamma / 2.0, -gamma / 2.0, -gamma];
        for (l, e) in ev.iter().zip(expected) {
            assert!((l - re(e)).norm() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn superoperator_matches_generator_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = LindbladModel::new(
            random_hermitian(3, &mut rng),
            vec![
                NoiseChannel::new(random_complex(3, 3, &mut rng), 0.7),
                NoiseChannel::new(random_complex(3, 3, &mut rng), 1.3),
            ],
        )
        .unwrap();
        let s = m.superoperator();
        for _ in 0..50 {
            let x = random_complex(3, 3, &mut rng);
            let lhs = &s * vec_of(&x);
            let rhs = vec_of(&m.apply(&x).unwrap());
            assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + x.norm() * m.scale()));
        }
    }

    #[test]
    fn fme_reduce_examples() {
        let fm = FeedbackModel::new(
            ComplexMatrix::zeros(2, 2),
            sigma_x() * re(0.5),
            sigma_y() * re(-0.5),
        )
        .unwrap();
        let red = fme_reduce(&fm).unwrap();
        assert!(red.hamiltonian.norm() < 1e-16);
        assert!((&red.noise[0].op - sigma_plus()).norm() < 1e-16);

        let h = sigma_z() * re(0.4);
        let m = sigma_plus() + sigma_x() * re(0.2);
        let off = fme_reduce(&FeedbackModel::new(h.clone(), m.clone(), ComplexMatrix::zeros(2, 2)).unwrap()).unwrap();
        assert_eq!(off.hamiltonian, h);
        assert_eq!(off.noise[0].op, m);

        let fm = FeedbackModel::new(ComplexMatrix::zeros(3, 3), spin1_x(), -spin1_y()).unwrap();
        let red = fme_reduce(&fm).unwrap();
        let shift = mat(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]) * re(2f64.sqrt());
        assert!((&red.noise[0].op - shift).norm() < 1e-15);
        assert!(red.hamiltonian.norm() > 0.1);

        let bad = FeedbackModel::new(ComplexMatrix::zeros(2, 2), sigma_x(), sigma_plus()).unwrap();
        assert!(fme_reduce(&bad).is_err());
    }

    #[test]
    fn validation_examples() {
        assert!(damping(1.0).validate().is_empty());

        let mut h = ComplexMatrix::zeros(2, 2);
        h[(0, 1)] = re(1e-3);
        let m = LindbladModel::new(h, vec![]).unwrap();
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "H not Hermitian (1.0e-3)");

        let rho = DensityOperator::new_unchecked(diag(&[0.5, 0.48]));
        let v = rho.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].what, "trace deviation");
        assert!((v[0].residual - 0.02).abs() < 1e-12);

        let neg = LindbladModel::new(ComplexMatrix::zeros(2, 2), vec![NoiseChannel::new(sigma_x(), -1.0)]).unwrap();
        assert!(neg.validate()[0].what.contains("negative rate"));
    }

    #[test]
    fn random_density_examples() {
        assert_eq!(DensityOperator::random(2, 7).unwrap(), DensityOperator::random(2, 7).unwrap());
        for seed in 0..20 {
            assert!(DensityOperator::random(3, seed).unwrap().validate().is_empty());
        }
        assert!(DensityOperator::random(4, 1).unwrap().min_eigenvalue() > 0.0);
        assert!(DensityOperator::random(0, 1).is_err());
    }

    #[test]
    fn decomposition_checks_orthogonality() {
        let s = SubspaceBasis::coordinate(3, &[0]);
        let bad_r = SubspaceBasis::coordinate(3, &[0, 1]);
        assert!(SpaceDecomposition::with_complement(s.clone(), bad_r).is_err());
        let d = SpaceDecomposition::from_subspace(&s);
        assert_eq!(d.remainder().dim(), 2);
        assert!(SpaceDecomposition::subsystem(SubspaceBasis::full(4), 2, 3, None).is_err());
    }
}
