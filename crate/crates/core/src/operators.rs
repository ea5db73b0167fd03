//! Standard operators: Pauli matrices, spin-1 angular momentum, and the
//! two-qubit Bell and triplet frames. Units with ħ = 1.

use crate::linalg::{c, re, ComplexMatrix, ComplexVector};

/// Real matrix from rows.
pub fn mat(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    ComplexMatrix::from_fn(n, m, |i, j| re(rows[i][j]))
}

pub fn diag(d: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(d.len(), d.iter().map(|&x| re(x))))
}

pub fn ket(entries: &[f64]) -> ComplexVector {
    ComplexVector::from_iterator(entries.len(), entries.iter().map(|&x| re(x)))
}

pub fn basis_vector(n: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(n);
    v[k] = re(1.0);
    v
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn sigma_x() -> ComplexMatrix {
    mat(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)])
}

pub fn sigma_z() -> ComplexMatrix {
    diag(&[1.0, -1.0])
}

/// `|0⟩⟨1|`.
pub fn sigma_plus() -> ComplexMatrix {
    mat(&[&[0.0, 1.0], &[0.0, 0.0]])
}

/// `|1⟩⟨0|`.
pub fn sigma_minus() -> ComplexMatrix {
    mat(&[&[0.0, 0.0], &[1.0, 0.0]])
}

/// Spin-1 `J_x` in the basis `m = 1, 0, -1`.
pub fn spin1_x() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    mat(&[&[0.0, s, 0.0], &[s, 0.0, s], &[0.0, s, 0.0]])
}

/// Spin-1 `J_y` in the basis `m = 1, 0, -1`.
pub fn spin1_y() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = re(0.0);
    ComplexMatrix::from_row_slice(
        3,
        3,
        &[z, c(0.0, -s), z, c(0.0, s), z, c(0.0, -s), z, c(0.0, s), z],
    )
}

/// Spin-1 `J_z` in the basis `m = 1, 0, -1`.
pub fn spin1_z() -> ComplexMatrix {
    diag(&[1.0, 0.0, -1.0])
}

/// Columns `(|00⟩+|11⟩)/√2, (|00⟩−|11⟩)/√2, (|01⟩+|10⟩)/√2, (|01⟩−|10⟩)/√2`.
pub fn bell_frame() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    mat(&[
        &[s, s, 0.0, 0.0],
        &[0.0, 0.0, s, s],
        &[0.0, 0.0, s, -s],
        &[s, -s, 0.0, 0.0],
    ])
}

/// Isometry `C^3 → C^4` onto the triplet states `|00⟩, (|01⟩+|10⟩)/√2, |11⟩`.
pub fn triplet_isometry() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    mat(&[&[1.0, 0.0, 0.0], &[0.0, s, 0.0], &[0.0, s, 0.0], &[0.0, 0.0, 1.0]])
}

/// Two-qubit collective spin `½(σ⊗I + I⊗σ)`.
pub fn collective_spin(sigma: &ComplexMatrix) -> ComplexMatrix {
    let id = identity(2);
    (sigma.kronecker(&id) + id.kronecker(sigma)) * re(0.5)
}
