//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Subspaces are carried as
//! explicit orthonormal frames ([`SubspaceBasis`]), never as bare projectors.
//! Tensor products use the row-major convention: the index of `|a⟩⊗|b⟩` is
//! `a * dim_b + b`. Vectorization is column stacking, which coincides with
//! nalgebra's storage order.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Default relative tolerance for rank and kernel decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Orthonormality tolerance for frames.
pub const FRAME_TOL: f64 = 1e-10;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn ensure_square(x: &ComplexMatrix, what: &str) -> Result<usize> {
    if x.nrows() != x.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(x.nrows())
}

pub fn ensure_same_square(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<usize> {
    let n = ensure_square(a, "left operand")?;
    let m = ensure_square(b, "right operand")?;
    if n != m {
        return Err(Error::Dimension(format!("operand sizes differ: {n} vs {m}")));
    }
    Ok(n)
}

pub fn is_finite(x: &ComplexMatrix) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry modulus of `X - X†`.
pub fn hermiticity_residual(x: &ComplexMatrix) -> f64 {
    (x - x.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `(X + X†)/2`, the exact Hermitian projection.
pub fn hermitize(x: &ComplexMatrix) -> ComplexMatrix {
    (x + x.adjoint()) * re(0.5)
}

/// Splits `X = X_h + i X_a` with both parts Hermitian.
pub fn hermitian_split(x: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    ensure_square(x, "operand")?;
    let xd = x.adjoint();
    let h = (x + &xd) * re(0.5);
    let a = (x - &xd) * c(0.0, -0.5);
    Ok((h, a))
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_same_square(a, b)?;
    Ok(a * b - b * a)
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_same_square(a, b)?;
    Ok(a * b + b * a)
}

/// Largest singular value.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SVD::new(a.clone(), false, false).singular_values.sum()
}

pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which factor a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOut {
    First,
    Second,
}

pub fn partial_trace(x: &ComplexMatrix, dims: (usize, usize), which: TraceOut) -> Result<ComplexMatrix> {
    let n = ensure_square(x, "operand")?;
    let (d1, d2) = dims;
    if d1 * d2 != n {
        return Err(Error::Dimension(format!(
            "cannot factor dimension {n} as {d1}x{d2}"
        )));
    }
    Ok(match which {
        TraceOut::Second => ComplexMatrix::from_fn(d1, d1, |a, b| {
            (0..d2).map(|k| x[(a * d2 + k, b * d2 + k)]).sum()
        }),
        TraceOut::First => ComplexMatrix::from_fn(d2, d2, |a, b| {
            (0..d1).map(|k| x[(k * d2 + a, k * d2 + b)]).sum()
        }),
    })
}

/// Column-stacking vectorization.
pub fn vec_of(x: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &ComplexVector, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(n, n, v.as_slice())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(x: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = x.nrows();
    if n == 0 {
        return (Vec::new(), ComplexMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(x));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn min_eigenvalue_hermitian(x: &ComplexMatrix) -> f64 {
    hermitian_eigen(x).0.first().copied().unwrap_or(0.0)
}

/// Eigenvalues of a general square matrix from its complex Schur form,
/// sorted by descending real part, then descending imaginary part.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = ensure_square(a, "operand")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = [f64::EPSILON, 1e-14, 1e-12]
        .iter()
        .find_map(|&eps| nalgebra::Schur::try_new(a.clone(), eps, 200 * n.max(10)))
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let sub = if i + 1 < n { t[(i + 1, i)].norm() } else { 0.0 };
        let scale = t[(i, i)].norm() + if i + 1 < n { t[(i + 1, i + 1)].norm() } else { 0.0 };
        if i + 1 < n && sub > 1e-14 * scale.max(1e-300) {
            // residual 2x2 block
            let (p, q, r, s) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (p + s) * 0.5;
            let disc = ((p - s) * 0.5).powi(2) + q * r;
            let root = disc.sqrt();
            out.push(half_tr + root);
            out.push(half_tr - root);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    sort_spectrum(&mut out);
    Ok(out)
}

pub fn sort_spectrum(v: &mut [C64]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// `exp(t A)` by Padé scaling-and-squaring.
pub fn matrix_exponential(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let n = ensure_square(a, "generator")?;
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    if t == 0.0 {
        return Ok(ComplexMatrix::identity(n, n));
    }
    let scaled = a * re(t);
    if !is_finite(&scaled) {
        return Err(Error::Numeric("non-finite generator entries".into()));
    }
    let e = scaled.exp();
    if !is_finite(&e) {
        return Err(Error::Numeric(format!(
            "matrix exponential overflowed (t = {t}, norm = {:.3e})",
            a.norm()
        )));
    }
    Ok(e)
}

/// Orthonormal basis of `{v : ‖Av‖ ≤ threshold·‖v‖}` from the singular value
/// decomposition, in canonical form (see [`SubspaceBasis::canonical`]).
pub fn kernel_abs(a: &ComplexMatrix, threshold: f64) -> SubspaceBasis {
    let n = a.ncols();
    if n == 0 {
        return SubspaceBasis::zero(0);
    }
    let rows = a.nrows().max(n);
    let mut padded = ComplexMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let cols: Vec<ComplexVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(k, _)| v_t.row(k).adjoint())
        .collect();
    if cols.is_empty() {
        return SubspaceBasis::zero(n);
    }
    let frame = ComplexMatrix::from_columns(&cols);
    SubspaceBasis { frame }.canonical()
}

/// Kernel with a threshold relative to the largest singular value.
pub fn kernel(a: &ComplexMatrix, tol: f64) -> SubspaceBasis {
    let scale = operator_norm(a);
    if scale == 0.0 {
        return SubspaceBasis::full(a.ncols());
    }
    kernel_abs(a, tol * scale)
}

pub fn rank(a: &ComplexMatrix, tol: f64) -> usize {
    a.ncols() - kernel(a, tol).dim()
}

/// `V_row† X V_col`.
pub fn block_extract(x: &ComplexMatrix, row_space: &SubspaceBasis, col_space: &SubspaceBasis) -> Result<ComplexMatrix> {
    if x.nrows() != row_space.ambient_dim() || x.ncols() != col_space.ambient_dim() {
        return Err(Error::Dimension(format!(
            "block extraction of {}x{} matrix with frames of ambient sizes {} and {}",
            x.nrows(),
            x.ncols(),
            row_space.ambient_dim(),
            col_space.ambient_dim()
        )));
    }
    Ok(row_space.frame.adjoint() * x * &col_space.frame)
}

/// Range of a positive semidefinite matrix, thresholded at `tol·λ_max`.
pub fn support_projector(x: &ComplexMatrix, tol: f64) -> Result<SubspaceBasis> {
    let n = ensure_square(x, "operand")?;
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let herm = hermiticity_residual(x);
    if herm > 1e-8 * scale {
        return Err(Error::Domain(format!("operand not Hermitian (residual {herm:.3e})")));
    }
    let (vals, vecs) = hermitian_eigen(x);
    let lmax = vals.last().copied().unwrap_or(0.0);
    if let Some(&lmin) = vals.first() {
        if lmin < -1e-8 * lmax.abs().max(scale) {
            return Err(Error::Domain(format!(
                "operand not positive semidefinite (eigenvalue {lmin:.3e})"
            )));
        }
    }
    if lmax <= 0.0 {
        return Ok(SubspaceBasis::zero(n));
    }
    let cols: Vec<ComplexVector> = vals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > tol * lmax)
        .map(|(k, _)| vecs.column(k).into_owned())
        .collect();
    Ok(SubspaceBasis { frame: ComplexMatrix::from_columns(&cols) }.canonical())
}

/// Orthonormal basis of the intersection, via the kernel of the stacked
/// complement projectors.
pub fn subspace_intersection(spaces: &[SubspaceBasis]) -> Result<SubspaceBasis> {
    subspace_intersection_tol(spaces, 1e-8)
}

pub fn subspace_intersection_tol(spaces: &[SubspaceBasis], tol: f64) -> Result<SubspaceBasis> {
    let Some(first) = spaces.first() else {
        return Err(Error::Dimension("intersection of an empty family".into()));
    };
    let n = first.ambient_dim();
    if let Some(bad) = spaces.iter().find(|s| s.ambient_dim() != n) {
        return Err(Error::Dimension(format!(
            "ambient dimensions differ: {n} vs {}",
            bad.ambient_dim()
        )));
    }
    if spaces.iter().any(|s| s.is_zero()) {
        return Ok(SubspaceBasis::zero(n));
    }
    let id = ComplexMatrix::identity(n, n);
    let mut stacked = ComplexMatrix::zeros(n * spaces.len(), n);
    for (k, s) in spaces.iter().enumerate() {
        stacked
            .view_mut((k * n, 0), (n, n))
            .copy_from(&(&id - s.projector()));
    }
    Ok(kernel_abs(&stacked, tol))
}

/// Sines of the principal angles between two subspaces of equal dimension,
/// largest first. Computed from `(I - P_a) V_b` so small angles stay accurate.
pub fn principal_angle_sines(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() || a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "principal angles need equal shapes: ({}, {}) vs ({}, {})",
            a.ambient_dim(),
            a.dim(),
            b.ambient_dim(),
            b.dim()
        )));
    }
    if a.dim() == 0 {
        return Ok(Vec::new());
    }
    let resid = (ComplexMatrix::identity(a.ambient_dim(), a.ambient_dim()) - a.projector()) * &b.frame;
    let mut s: Vec<f64> = SVD::new(resid, false, false)
        .singular_values
        .iter()
        .map(|x| x.min(1.0))
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Largest principal angle in radians.
pub fn max_principal_angle(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    Ok(principal_angle_sines(a, b)?
        .first()
        .map(|s| s.asin())
        .unwrap_or(0.0))
}

/// Orthonormal frame for a subspace of `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    frame: ComplexMatrix,
}

impl SubspaceBasis {
    /// Wraps a frame whose columns must be orthonormal to [`FRAME_TOL`].
    pub fn new(frame: ComplexMatrix) -> Result<Self> {
        let k = frame.ncols();
        if k > frame.nrows() {
            return Err(Error::Dimension(format!(
                "{k} vectors cannot be independent in dimension {}",
                frame.nrows()
            )));
        }
        if !is_finite(&frame) {
            return Err(Error::Domain("frame has non-finite entries".into()));
        }
        let resid = (frame.adjoint() * &frame - ComplexMatrix::identity(k, k)).norm();
        if resid > FRAME_TOL {
            return Err(Error::Domain(format!(
                "frame is not orthonormal (residual {resid:.3e})"
            )));
        }
        Ok(Self { frame })
    }

    /// Orthonormalizes arbitrary spanning vectors; dependent vectors are dropped.
    pub fn span(ambient_dim: usize, vectors: &[ComplexVector]) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != ambient_dim) {
            return Err(Error::Dimension(format!(
                "vector of length {} in ambient dimension {ambient_dim}",
                v.len()
            )));
        }
        if vectors.is_empty() {
            return Ok(Self::zero(ambient_dim));
        }
        let m = ComplexMatrix::from_columns(vectors);
        let (vals, vecs) = hermitian_eigen(&(&m * m.adjoint()));
        let lmax = vals.last().copied().unwrap_or(0.0);
        let cols: Vec<ComplexVector> = vals
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 1e-12 * lmax.max(f64::MIN_POSITIVE))
            .map(|(k, _)| vecs.column(k).into_owned())
            .collect();
        Ok(Self { frame: ComplexMatrix::from_columns(&cols) }.canonical())
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self { frame: ComplexMatrix::zeros(ambient_dim, 0) }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self { frame: ComplexMatrix::identity(ambient_dim, ambient_dim) }
    }

    /// Span of the listed standard basis vectors, in the listed order.
    pub fn coordinate(ambient_dim: usize, indices: &[usize]) -> Self {
        let mut frame = ComplexMatrix::zeros(ambient_dim, indices.len());
        for (k, &i) in indices.iter().enumerate() {
            frame[(i, k)] = re(1.0);
        }
        Self { frame }
    }

    pub fn from_unit_vector(v: &ComplexVector) -> Result<Self> {
        Self::new(ComplexMatrix::from_columns(std::slice::from_ref(v)))
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn frame(&self) -> &ComplexMatrix {
        &self.frame
    }

    pub fn vector(&self, k: usize) -> ComplexVector {
        self.frame.column(k).into_owned()
    }

    pub fn vectors(&self) -> Vec<ComplexVector> {
        (0..self.dim()).map(|k| self.vector(k)).collect()
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.frame * self.frame.adjoint()
    }

    /// The subspace spanned by `self.frame * inner.frame`, where `inner` lives
    /// in the coordinates of `self`.
    pub fn embed(&self, inner: &SubspaceBasis) -> Result<SubspaceBasis> {
        if inner.ambient_dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "inner subspace has ambient dimension {}, expected {}",
                inner.ambient_dim(),
                self.dim()
            )));
        }
        Ok(SubspaceBasis { frame: &self.frame * &inner.frame })
    }

    /// Coordinates of `other` in this frame (`V† W`); only meaningful when
    /// `other` is contained in `self`.
    pub fn coordinates_of(&self, other: &SubspaceBasis) -> ComplexMatrix {
        self.frame.adjoint() * &other.frame
    }

    /// Direct sum with a subspace orthogonal to this one.
    pub fn direct_sum(&self, other: &SubspaceBasis) -> Result<SubspaceBasis> {
        if other.ambient_dim() != self.ambient_dim() {
            return Err(Error::Dimension("ambient dimensions differ".into()));
        }
        let mut cols = self.vectors();
        cols.extend(other.vectors());
        if cols.is_empty() {
            return Ok(Self::zero(self.ambient_dim()));
        }
        Self::new(ComplexMatrix::from_columns(&cols))
    }

    /// Orthogonal complement in canonical form.
    pub fn complement(&self) -> SubspaceBasis {
        let n = self.ambient_dim();
        let p = ComplexMatrix::identity(n, n) - self.projector();
        Self::canonical_from_projector(&p, n - self.dim())
    }

    /// `‖(I − P_self) V_other‖`: zero when `other ⊆ self`.
    pub fn containment_residual(&self, other: &SubspaceBasis) -> f64 {
        if other.is_zero() {
            return 0.0;
        }
        let n = self.ambient_dim();
        ((ComplexMatrix::identity(n, n) - self.projector()) * &other.frame).norm()
    }

    /// Basis-independent representative of the subspace: greedy pivoted
    /// Gram–Schmidt over the columns of its projector, vectors ordered by
    /// pivot index, each with a real positive entry at its pivot.
    pub fn canonical(&self) -> SubspaceBasis {
        Self::canonical_from_projector(&self.projector(), self.dim())
    }

    fn canonical_from_projector(p: &ComplexMatrix, k: usize) -> SubspaceBasis {
        let n = p.nrows();
        let mut chosen: Vec<(usize, ComplexVector)> = Vec::with_capacity(k);
        let mut residuals: Vec<ComplexVector> = (0..n).map(|j| p.column(j).into_owned()).collect();
        for _ in 0..k {
            let mut best = None;
            let mut best_norm = -1.0;
            for (j, r) in residuals.iter().enumerate() {
                if chosen.iter().any(|(c, _)| *c == j) {
                    continue;
                }
                let nr = r.norm();
                if nr > best_norm * (1.0 + 1e-10) {
                    best_norm = nr;
                    best = Some(j);
                }
            }
            let j = best.expect("projector rank at least k");
            let mut q = residuals[j].clone() / re(best_norm);
            // second pass against accumulated roundoff
            for (_, u) in &chosen {
                let ov = u.dotc(&q);
                q -= u * ov;
            }
            q /= re(q.norm());
            for r in residuals.iter_mut() {
                let ov = q.dotc(r);
                *r -= &q * ov;
            }
            chosen.push((j, q));
        }
        chosen.sort_by_key(|(j, _)| *j);
        let cols: Vec<ComplexVector> = chosen
            .into_iter()
            .map(|(j, q)| {
                let ph = q[j];
                if ph.norm() > 0.0 {
                    q * (ph.conj() / ph.norm())
                } else {
                    q
                }
            })
            .collect();
        if cols.is_empty() {
            return SubspaceBasis::zero(n);
        }
        SubspaceBasis { frame: ComplexMatrix::from_columns(&cols) }
    }
}

/// Square unitary whose columns are the frames of `parts`, in order.
pub fn stack_frames(parts: &[&SubspaceBasis]) -> Result<ComplexMatrix> {
    let n = parts.first().map(|p| p.ambient_dim()).unwrap_or(0);
    let mut cols = Vec::new();
    for p in parts {
        if p.ambient_dim() != n {
            return Err(Error::Dimension("frames with different ambient dimensions".into()));
        }
        cols.extend(p.vectors());
    }
    if cols.len() != n {
        return Err(Error::Dimension(format!(
            "frames hold {} vectors, ambient dimension is {n}",
            cols.len()
        )));
    }
    let w = if n == 0 { ComplexMatrix::zeros(0, 0) } else { ComplexMatrix::from_columns(&cols) };
    let resid = (w.adjoint() * &w - ComplexMatrix::identity(n, n)).norm();
    if resid > FRAME_TOL {
        return Err(Error::Domain(format!(
            "stacked frames are not mutually orthogonal (residual {resid:.3e})"
        )));
    }
    Ok(w)
}

/// `W† X W`.
pub fn to_frame(x: &ComplexMatrix, w: &ComplexMatrix) -> ComplexMatrix {
    w.adjoint() * x * w
}

/// `W X W†`.
pub fn from_frame(x: &ComplexMatrix, w: &ComplexMatrix) -> ComplexMatrix {
    w * x * w.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn hermitian_split_examples() {
        let (h, a) = hermitian_split(&sigma_plus()).unwrap();
        assert!(close(&h, &(sigma_x() * re(0.5)), 1e-15));
        assert!(close(&a, &(sigma_y() * re(0.5)), 1e-15));

        let x = sigma_z() * re(0.3) + sigma_x();
        let (h, a) = hermitian_split(&x).unwrap();
        assert!(close(&h, &x, 0.0));
        assert_eq!(a.norm(), 0.0);

        let (h, a) = hermitian_split(&(ComplexMatrix::identity(2, 2) * I)).unwrap();
        assert_eq!(h.norm(), 0.0);
        assert!(close(&a, &ComplexMatrix::identity(2, 2), 0.0));

        assert!(hermitian_split(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn commutator_examples() {
        let zx = commutator(&sigma_z(), &sigma_x()).unwrap();
        assert!(close(&zx, &(sigma_y() * c(0.0, 2.0)), 1e-15));
        assert_eq!(commutator(&sigma_x(), &sigma_x()).unwrap().norm(), 0.0);
        let p0 = mat(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let expected = mat(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(close(&commutator(&p0, &sigma_x()).unwrap(), &expected, 0.0));
        assert!(commutator(&sigma_x(), &ComplexMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn kernel_examples() {
        let k = kernel(&sigma_plus(), DEFAULT_TOL);
        assert_eq!(k.dim(), 1);
        assert!((k.vector(0)[0].norm() - 1.0).abs() < 1e-14);

        assert!(kernel(&sigma_x(), DEFAULT_TOL).is_zero());

        let ones = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let k = kernel(&ones, DEFAULT_TOL);
        assert_eq!(k.dim(), 1);
        let v = k.vector(0);
        let s = 1.0 / 2f64.sqrt();
        assert!((v[0] - re(s)).norm() < 1e-14 && (v[1] + re(s)).norm() < 1e-14);

        assert_eq!(kernel(&ComplexMatrix::zeros(2, 3), DEFAULT_TOL).dim(), 3);
        // wide matrix: nullity comes from missing rows
        assert_eq!(kernel(&mat(&[&[1.0, 0.0, 0.0]]), DEFAULT_TOL).dim(), 2);
    }

    #[test]
    fn intersection_examples() {
        let v = SubspaceBasis::coordinate(3, &[0, 2]);
        let both = subspace_intersection(&[v.clone(), v.clone()]).unwrap();
        assert!(max_principal_angle(&both, &v).unwrap() < 1e-12);

        let e1 = SubspaceBasis::coordinate(2, &[0]);
        let e2 = SubspaceBasis::coordinate(2, &[1]);
        assert!(subspace_intersection(&[e1, e2]).unwrap().is_zero());
        assert!(subspace_intersection(&[SubspaceBasis::zero(2), SubspaceBasis::full(3)]).is_err());
    }

    #[test]
    fn tensor_examples() {
        let ix = tensor_product(&ComplexMatrix::identity(2, 2), &sigma_x());
        let mut expected = ComplexMatrix::zeros(4, 4);
        expected.view_mut((0, 0), (2, 2)).copy_from(&sigma_x());
        expected.view_mut((2, 2), (2, 2)).copy_from(&sigma_x());
        assert!(close(&ix, &expected, 0.0));

        let zi = tensor_product(&sigma_z(), &ComplexMatrix::identity(2, 2));
        assert!(close(&zi, &diag(&[1.0, 1.0, -1.0, -1.0]), 0.0));
    }

    #[test]
    fn partial_trace_examples() {
        let bell = bell_frame().column(0).into_owned();
        let proj = &bell * bell.adjoint();
        let red = partial_trace(&proj, (2, 2), TraceOut::Second).unwrap();
        assert!(close(&red, &(ComplexMatrix::identity(2, 2) * re(0.5)), 1e-15));

        let red = partial_trace(&diag(&[1.0, 0.0, 0.0, 0.0]), (2, 2), TraceOut::First).unwrap();
        assert!(close(&red, &diag(&[1.0, 0.0]), 0.0));

        assert!(partial_trace(&ComplexMatrix::identity(4, 4), (3, 2), TraceOut::First).is_err());
    }

    #[test]
    fn block_extract_examples() {
        let s = SubspaceBasis::coordinate(2, &[0]);
        let r = SubspaceBasis::coordinate(2, &[1]);
        let p = block_extract(&sigma_plus(), &s, &r).unwrap();
        assert_eq!(p.shape(), (1, 1));
        assert_eq!(p[(0, 0)], re(1.0));

        let empty = block_extract(&sigma_plus(), &s, &SubspaceBasis::zero(2)).unwrap();
        assert_eq!(empty.ncols(), 0);
    }

    #[test]
    fn support_examples() {
        let s = support_projector(&diag(&[0.3, 0.7, 0.0]), DEFAULT_TOL).unwrap();
        assert!(max_principal_angle(&s, &SubspaceBasis::coordinate(3, &[0, 1])).unwrap() < 1e-12);

        let psi = ComplexVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let s = support_projector(&(&psi * psi.adjoint()), DEFAULT_TOL).unwrap();
        let expected = SubspaceBasis::from_unit_vector(&psi).unwrap();
        assert!(max_principal_angle(&s, &expected).unwrap() < 1e-12);

        assert!(support_projector(&diag(&[1.0, -0.5]), DEFAULT_TOL).is_err());
        assert!(support_projector(&sigma_plus(), DEFAULT_TOL).is_err());
    }

    #[test]
    fn exponential_examples() {
        let a = sigma_y() + sigma_plus();
        let e = matrix_exponential(&a, 0.0).unwrap();
        assert!(close(&e, &ComplexMatrix::identity(2, 2), 0.0));

        let e = matrix_exponential(&diag(&[-0.5, 1.25]), 1.6).unwrap();
        assert!(close(&e, &diag(&[(-0.8f64).exp(), 2f64.exp()]), 1e-14));

        let half_pi = std::f64::consts::FRAC_PI_2;
        let e = matrix_exponential(&(sigma_x() * I), half_pi).unwrap();
        assert!(close(&e, &(sigma_x() * I), 1e-14));
    }

    #[test]
    fn canonical_basis_is_independent_of_input_frame() {
        let a = SubspaceBasis::span(
            3,
            &[
                ComplexVector::from_vec(vec![re(1.0), re(1.0), re(0.0)]),
                ComplexVector::from_vec(vec![re(0.0), c(0.0, 1.0), re(1.0)]),
            ],
        )
        .unwrap();
        let b = SubspaceBasis::span(
            3,
            &[
                ComplexVector::from_vec(vec![re(1.0), c(1.0, 1.0), re(1.0)]),
                ComplexVector::from_vec(vec![re(2.0), re(2.0), re(0.0)]),
            ],
        )
        .unwrap();
        assert!((a.frame() - b.frame()).norm() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal_and_completes() {
        let s = SubspaceBasis::span(
            4,
            &[ComplexVector::from_vec(vec![re(1.0), c(0.0, 2.0), re(0.0), re(-1.0)])],
        )
        .unwrap();
        let r = s.complement();
        assert_eq!(r.dim(), 3);
        assert!((s.frame().adjoint() * r.frame()).norm() < 1e-14);
        stack_frames(&[&s, &r]).unwrap();
    }
}
