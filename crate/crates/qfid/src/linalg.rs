//! Dense complex linear algebra: matrix predicates, tensor products, the
//! row-major vectorization isomorphism and the middle-factor swap operator.
//!
//! Index convention, fixed globally: a D×D matrix A maps to the vector |A⟩⟩
//! with component `i*D + j` equal to `A[(i, j)]`. The same row-major flatten
//! is used one level up for D²×D² operators on a bipartite space, so kets on
//! H_D⊗H_D⊗H_D⊗H_D carry the composite index `i*D³ + j*D² + k*D + l`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance for construction-level identities (exact algebra up to rounding).
pub const TOL_CONSTRUCT: f64 = 1e-12;
/// Tolerance for verification of derived operator identities.
pub const TOL_IDENTITY: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn c64r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Hilbert-Schmidt inner product Tr[A†B].
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    assert_eq!(a.shape(), b.shape(), "hs_inner: shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Hilbert-Schmidt norm Tr[M M†] = Σ|m_ij|².
pub fn hs_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Frobenius distance sqrt(Σ|a_ij − b_ij|²).
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "frobenius_distance: shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Tr[A·B] without materializing the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows(), "trace_product: inner dim mismatch");
    assert_eq!(a.nrows(), b.ncols(), "trace_product: outer dim mismatch");
    let n = a.nrows();
    let mut acc = Complex64::ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    max_abs_diff(&(m.adjoint() * m), &identity(n)) <= tol
}

/// Row-major vectorization |A⟩⟩ of a square matrix: component `i*n + j` is
/// `A[(i, j)]`.
///
/// Panics if `a` is not square.
pub fn vectorize(a: &CMatrix) -> CVector {
    assert!(a.is_square(), "vectorize: matrix must be square");
    let n = a.nrows();
    CVector::from_fn(n * n, |idx, _| a[(idx / n, idx % n)])
}

/// Inverse of [`vectorize`] for an n²-component vector.
pub fn devectorize(v: &CVector, n: usize) -> CMatrix {
    assert_eq!(v.len(), n * n, "devectorize: length must be n²");
    CMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

/// Kronecker product of two vectors: component `i*len(b) + j` is `a_i b_j`.
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let nb = b.len();
    CVector::from_fn(a.len() * nb, |idx, _| a[idx / nb] * b[idx % nb])
}

/// Outer product x·y† of two vectors.
pub fn outer(x: &CVector, y: &CVector) -> CMatrix {
    CMatrix::from_fn(x.len(), y.len(), |i, j| x[i] * y[j].conj())
}

/// The unitary permutation on H_D^⊗4 that swaps tensor factors 2 and 3.
///
/// Acting on the vectorization of a product operator it factorizes:
/// `swap · |Ψ⊗Φ) = |Ψ⟩⟩ ⊗ |Φ⟩⟩`. The matrix is a real symmetric 0/1
/// permutation and its own inverse.
pub fn factor_swap(d: usize) -> CMatrix {
    assert!(d >= 2, "factor_swap: dimension must be at least 2");
    let n = d * d * d * d;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let row = ((i * d + j) * d + k) * d + l;
                    let col = ((i * d + k) * d + j) * d + l;
                    m[(row, col)] = c64r(1.0);
                }
            }
        }
    }
    m
}

/// The SWAP operator Σ|ij⟩⟨ji| exchanging the two factors of H_d⊗H_d.
pub fn swap_operator(d: usize) -> CMatrix {
    let n = d * d;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + j, j * d + i)] = c64r(1.0);
        }
    }
    m
}

/// Partial transpose on the second factor of an operator on H_da⊗H_db.
pub fn partial_transpose_second(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    assert_eq!(m.nrows(), da * db, "partial_transpose_second: shape");
    assert!(m.is_square(), "partial_transpose_second: matrix must be square");
    let mut out = CMatrix::zeros(da * db, da * db);
    for i in 0..da {
        for j in 0..db {
            for k in 0..da {
                for l in 0..db {
                    out[(i * db + l, k * db + j)] = m[(i * db + j, k * db + l)];
                }
            }
        }
    }
    out
}

/// Subsystem dimension D when `n = D²`, else an error.
pub fn subsystem_dim(n: usize) -> Result<usize> {
    let d = (n as f64).sqrt().round() as usize;
    if d * d == n && d >= 1 {
        Ok(d)
    } else {
        Err(Error::NotBipartite(n))
    }
}

/// Single-qubit Pauli matrices in the order I, X, Y, Z.
pub fn paulis() -> [CMatrix; 4] {
    let z = Complex64::ZERO;
    let one = c64r(1.0);
    let i = c64(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// Tensor product of single-qubit Paulis named by a string over {I,X,Y,Z},
/// e.g. "XZ" = X⊗Z.
pub fn pauli_string(label: &str) -> Result<CMatrix> {
    let ps = paulis();
    let mut out: Option<CMatrix> = None;
    for ch in label.chars() {
        let p = match ch {
            'I' => &ps[0],
            'X' => &ps[1],
            'Y' => &ps[2],
            'Z' => &ps[3],
            _ => return Err(Error::UnknownLabel(label.to_string())),
        };
        out = Some(match out {
            None => p.clone(),
            Some(acc) => acc.kronecker(p),
        });
    }
    out.ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Standard complex Gaussian with unit-variance real and imaginary parts.
pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix of independent standard complex Gaussians.
pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

/// Random Hermitian matrix (A + A†)/2 with A a complex Gaussian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let a = random_matrix(n, n, rng);
    (&a + a.adjoint()) * c64r(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn vectorize_identity_hits_diagonal_slots() {
        // I_n flattens to ones exactly at the (i·n + i) components, at the
        // single-system level and at the joint D² level alike.
        for n in [2usize, 4] {
            let v = vectorize(&identity(n));
            for idx in 0..n * n {
                let expect = if idx % (n + 1) == 0 { 1.0 } else { 0.0 };
                assert!((v[idx] - c64r(expect)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn vectorize_rank_one_is_tensor_of_vectors() {
        // |ψ⟩⟨φ| with ψ = (1,0), φ = (0,1) flattens to (0, 1, 0, 0).
        let psi = CVector::from_vec(vec![c64r(1.0), c64r(0.0)]);
        let phi = CVector::from_vec(vec![c64r(0.0), c64r(1.0)]);
        let v = vectorize(&outer(&psi, &phi));
        let expect = [0.0, 1.0, 0.0, 0.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((v[i] - c64r(*e)).norm() < 1e-15);
        }
        // General rule: vec(|ψ⟩⟨φ|) = ψ ⊗ φ*.
        let mut r = rng(1);
        for _ in 0..5 {
            let x = random_matrix(3, 1, &mut r).column(0).into_owned();
            let y = random_matrix(3, 1, &mut r).column(0).into_owned();
            let lhs = vectorize(&outer(&x, &y));
            let rhs = kron_vec(&x, &y.map(|z| z.conj()));
            assert!((&lhs - &rhs).norm() < 1e-12);
        }
    }

    fn matrix_strategy(n: usize) -> impl Strategy<Value = CMatrix> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |entries| {
            CMatrix::from_fn(n, n, |i, j| {
                let (re, im) = entries[i * n + j];
                c64(re, im)
            })
        })
    }

    proptest! {
        // ⟨⟨A|B⟩⟩ = Tr[A†B]; the oracle forms the product and takes the
        // trace. n = 4 exercises the joint-system (D² = 4) level.
        #[test]
        fn vector_inner_product_equals_trace(
            (a, b) in (2usize..=4).prop_flat_map(|n| (matrix_strategy(n), matrix_strategy(n)))
        ) {
            let lhs = vectorize(&a).dotc(&vectorize(&b));
            let rhs = (a.adjoint() * &b).trace();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        // |AρB⟩⟩ = (A ⊗ Bᵀ)|ρ⟩⟩ at the single-system and joint levels.
        #[test]
        fn sandwich_rule_both_levels(
            (a, rho, b) in (2usize..=4).prop_flat_map(|n| {
                (matrix_strategy(n), matrix_strategy(n), matrix_strategy(n))
            })
        ) {
            let lhs = vectorize(&(&a * &rho * &b));
            let rhs = a.kronecker(&b.transpose()) * vectorize(&rho);
            prop_assert!((&lhs - &rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn vectorize_panics_on_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(std::panic::catch_unwind(|| vectorize(&m)).is_err());
    }

    #[test]
    fn factor_swap_is_symmetric_involution() {
        for d in [2usize, 3] {
            let b = factor_swap(d);
            let n = d * d * d * d;
            assert!(max_abs_diff(&(&b * &b), &identity(n)) < 1e-15);
            assert!(max_abs_diff(&b, &b.transpose()) < 1e-15);
            // 0/1 permutation with one entry per row
            for i in 0..n {
                let row_sum: f64 = (0..n).map(|j| b[(i, j)].norm()).sum();
                assert!((row_sum - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn factor_swap_factorizes_product_vectorizations() {
        let mut r = rng(4);
        for d in [2usize, 3] {
            let psi = random_matrix(d, d, &mut r);
            let phi = random_matrix(d, d, &mut r);
            let lhs = factor_swap(d) * vectorize(&psi.kronecker(&phi));
            let rhs = kron_vec(&vectorize(&psi), &vectorize(&phi));
            assert!((&lhs - &rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        }
        // The identity is the product I_D⊗I_D, so the swapped vectorization
        // factorizes into |I_D⟩⟩⊗|I_D⟩⟩ (which differs from |I_{D²}) itself).
        let d = 2;
        let w = factor_swap(d) * vectorize(&identity(d * d));
        let vi = vectorize(&identity(d));
        assert!((&w - &kron_vec(&vi, &vi)).norm() < 1e-15);
    }

    #[test]
    fn swap_operator_is_partial_transpose_of_entangled_projector() {
        // SWAP^{T_B} = |I⟩⟩⟨⟨I|
        for d in [2usize, 3] {
            let pt = partial_transpose_second(&swap_operator(d), d, d);
            let vi = vectorize(&identity(d));
            assert!(max_abs_diff(&pt, &outer(&vi, &vi)) < 1e-15);
        }
    }

    #[test]
    fn pauli_strings_square_to_identity() {
        for label in ["X", "ZZ", "XY", "IYX"] {
            let p = pauli_string(label).unwrap();
            let n = p.nrows();
            assert!(is_hermitian(&p, 1e-15));
            assert!(max_abs_diff(&(&p * &p), &identity(n)) < 1e-15);
        }
        assert!(pauli_string("XQ").is_err());
    }

    #[test]
    fn hermitian_and_unitary_predicates() {
        let mut r = rng(5);
        let h = random_hermitian(3, &mut r);
        assert!(is_hermitian(&h, 1e-12));
        assert!(!is_hermitian(&random_matrix(3, 3, &mut r), 1e-10));
        assert!(is_unitary(&identity(4), 1e-12));
        assert!(!is_unitary(&(identity(4) * c64r(2.0)), 1e-10));
    }

    #[test]
    fn trace_product_matches_full_product() {
        let mut r = rng(6);
        let a = random_matrix(4, 4, &mut r);
        let b = random_matrix(4, 4, &mut r);
        let direct = (&a * &b).trace();
        assert!((trace_product(&a, &b) - direct).norm() < 1e-12);
    }

    #[test]
    fn subsystem_dim_detects_perfect_squares() {
        assert_eq!(subsystem_dim(4).unwrap(), 2);
        assert_eq!(subsystem_dim(9).unwrap(), 3);
        assert!(subsystem_dim(6).is_err());
    }
}
