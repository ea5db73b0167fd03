#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qstab::linalg::{ComplexMatrix, SubspaceBasis};
use qstab::model::{LindbladModel, NoiseChannel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type C = Complex64;

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        C::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = gaussian(n, n, rng);
    (&g + g.adjoint()) * C::new(0.5, 0.0)
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    gaussian(n, n, rng).qr().q()
}

/// Lindblad right-hand side written out term by term.
pub fn lindblad_rhs(h: &ComplexMatrix, ls: &[(ComplexMatrix, f64)], rho: &ComplexMatrix) -> ComplexMatrix {
    let i = C::new(0.0, 1.0);
    let mut out = -(h * rho - rho * h) * i;
    for (l, g) in ls {
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * C::new(0.5, 0.0)) * C::new(*g, 0.0);
    }
    out
}

/// Generator matrix obtained by applying the right-hand side to each
/// matrix unit, in row-major vectorization.
pub fn generator_by_action(h: &ComplexMatrix, ls: &[(ComplexMatrix, f64)]) -> ComplexMatrix {
    let n = h.nrows();
    let mut g = DMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            let mut e = DMatrix::zeros(n, n);
            e[(a, b)] = C::new(1.0, 0.0);
            let out = lindblad_rhs(h, ls, &e);
            for p in 0..n {
                for q in 0..n {
                    g[(p * n + q, a * n + b)] = out[(p, q)];
                }
            }
        }
    }
    g
}

pub fn flatten(rho: &ComplexMatrix) -> nalgebra::DVector<C> {
    let n = rho.nrows();
    nalgebra::DVector::from_fn(n * n, |k, _| rho[(k / n, k % n)])
}

pub fn unflatten(v: &nalgebra::DVector<C>, n: usize) -> ComplexMatrix {
    DMatrix::from_fn(n, n, |p, q| v[p * n + q])
}

/// Pure states `|i⟩`, `(|i⟩+|j⟩)/√2`, `(|i⟩+i|j⟩)/√2` spanning all operators
/// on the span of `basis`.
pub fn spanning_states(basis: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let k = basis.ncols();
    let mut out = Vec::new();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..k {
        let v = basis.column(i).into_owned();
        out.push(&v * v.adjoint());
        for j in (i + 1)..k {
            for phase in [C::new(1.0, 0.0), C::new(0.0, 1.0)] {
                let w = (basis.column(i) + basis.column(j) * phase) * C::new(s, 0.0);
                out.push(&w * w.adjoint());
            }
        }
    }
    out
}

/// Verdict of the propagation oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteVerdict {
    NotInvariant,
    InvariantOnly,
    Attractive,
}

/// Decides invariance by propagating states supported on `s` to several
/// times, and attractivity by propagating a spanning set of the whole
/// space to `horizon`; both against `threshold` on the weight outside `s`.
pub fn brute_force(
    h: &ComplexMatrix,
    ls: &[(ComplexMatrix, f64)],
    s: &ComplexMatrix,
    horizon: f64,
    threshold: f64,
) -> BruteVerdict {
    let n = h.nrows();
    let gen = generator_by_action(h, ls);
    let pi_r = DMatrix::<C>::identity(n, n) - s * s.adjoint();
    let outside = |rho: &ComplexMatrix| (&pi_r * rho).trace().re;
    for t in [0.3, 1.0, 3.0, 10.0] {
        let e = (&gen * C::new(t, 0.0)).exp();
        for rho in spanning_states(s) {
            if outside(&unflatten(&(&e * flatten(&rho)), n)) > threshold {
                return BruteVerdict::NotInvariant;
            }
        }
    }
    let e = (&gen * C::new(horizon, 0.0)).exp();
    let all = spanning_states(&DMatrix::identity(n, n));
    if all.iter().all(|rho| outside(&unflatten(&(&e * flatten(rho)), n)) <= threshold) {
        BruteVerdict::Attractive
    } else {
        BruteVerdict::InvariantOnly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planted {
    /// Generic noise leaking out of the target.
    Leaking,
    /// Invariant, `H_R'` trivial for generic P-blocks.
    Generic,
    /// Invariant with a kernel in the P-blocks that the Hamiltonian mixes out.
    KernelMixed,
    /// Invariant with a decoupled block inside the complement.
    DecoupledBlock,
    /// Invariant with a one-way invariant block inside the complement.
    OneWayBlock,
    /// Complement invariant: all P-blocks and the coupling vanish.
    ComplementInvariant,
}

pub const PLANTED: [Planted; 6] = [
    Planted::Leaking,
    Planted::Generic,
    Planted::KernelMixed,
    Planted::DecoupledBlock,
    Planted::OneWayBlock,
    Planted::ComplementInvariant,
];

#[derive(Debug, Clone)]
pub struct OracleCase {
    pub kind: Planted,
    pub model: LindbladModel,
    /// Unscaled operators and rates as generated.
    pub channels: Vec<(ComplexMatrix, f64)>,
    pub target: SubspaceBasis,
    pub gamma_min: f64,
}

/// Seeded random model of dimension 2..=max_dim with a target subspace and
/// a planted structure; everything is built in a frame `[S | T | rest]` and
/// rotated by a random unitary.
pub fn oracle_case(seed: u64, max_dim: usize) -> OracleCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = PLANTED[(seed % PLANTED.len() as u64) as usize];
    let min_dim = match kind {
        Planted::DecoupledBlock | Planted::OneWayBlock | Planted::KernelMixed => 3,
        _ => 2,
    };
    let n = rng.random_range(min_dim..=max_dim);
    let s = rng.random_range(1..=(n - if min_dim == 3 { 2 } else { 1 }));
    let r = n - s;
    let t = match kind {
        Planted::DecoupledBlock | Planted::OneWayBlock => rng.random_range(1..r),
        Planted::KernelMixed => rng.random_range(1..r),
        _ => 0,
    };
    let k = rng.random_range(1..=3usize);
    let mut ls = Vec::new();
    let mut rates = Vec::new();
    for _ in 0..k {
        let mut l = gaussian(n, n, &mut rng);
        if kind != Planted::Leaking {
            l.view_mut((s, 0), (r, s)).fill(C::new(0.0, 0.0));
        }
        match kind {
            Planted::KernelMixed => l.view_mut((0, s), (s, t)).fill(C::new(0.0, 0.0)),
            Planted::DecoupledBlock => {
                l.view_mut((0, s), (s, t)).fill(C::new(0.0, 0.0));
                l.view_mut((s + t, s), (r - t, t)).fill(C::new(0.0, 0.0));
                l.view_mut((s, s + t), (t, r - t)).fill(C::new(0.0, 0.0));
            }
            Planted::OneWayBlock => {
                l.view_mut((0, s), (s, t)).fill(C::new(0.0, 0.0));
                l.view_mut((s + t, s), (r - t, t)).fill(C::new(0.0, 0.0));
            }
            Planted::ComplementInvariant => l.view_mut((0, s), (s, r)).fill(C::new(0.0, 0.0)),
            _ => {}
        }
        ls.push(l);
        rates.push(rng.random_range(0.5..2.0));
    }
    let mut h = hermitian(n, &mut rng);
    if kind != Planted::Leaking {
        // S block invariance: H_P = -(i/2) Σ γ A† B.
        let mut hp = DMatrix::<C>::zeros(s, r);
        for (l, g) in ls.iter().zip(&rates) {
            let a = l.view((0, 0), (s, s));
            let b = l.view((0, s), (s, r));
            hp += a.adjoint() * b * C::new(0.0, -0.5 * g);
        }
        h.view_mut((0, s), (s, r)).copy_from(&hp);
        h.view_mut((s, 0), (r, s)).copy_from(&hp.adjoint());
    }
    match kind {
        Planted::DecoupledBlock => {
            h.view_mut((s + t, s), (r - t, t)).fill(C::new(0.0, 0.0));
            h.view_mut((s, s + t), (t, r - t)).fill(C::new(0.0, 0.0));
        }
        Planted::OneWayBlock => {
            // T block invariance: H_{oT} = (i/2) Σ γ L_{T,o}† L_{T,T}.
            let mut hot = DMatrix::<C>::zeros(r - t, t);
            for (l, g) in ls.iter().zip(&rates) {
                let lto = l.view((s, s + t), (t, r - t));
                let ltt = l.view((s, s), (t, t));
                hot += lto.adjoint() * ltt * C::new(0.0, 0.5 * g);
            }
            h.view_mut((s + t, s), (r - t, t)).copy_from(&hot);
            h.view_mut((s, s + t), (t, r - t)).copy_from(&hot.adjoint());
        }
        _ => {}
    }
    let u = unitary(n, &mut rng);
    let rot = |x: &ComplexMatrix| &u * x * u.adjoint();
    let h = rot(&h);
    let channels: Vec<(ComplexMatrix, f64)> = ls.iter().map(rot).zip(rates.iter().copied()).collect();
    let model = LindbladModel::new(
        h.clone(),
        channels.iter().map(|(l, g)| NoiseChannel::new(l.clone(), *g)).collect(),
    )
    .expect("square operators");
    let target = SubspaceBasis::new(u.columns(0, s).into_owned()).expect("orthonormal columns");
    let gamma_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    OracleCase { kind, model, channels, target, gamma_min }
}
