//! Enumeration of the single-qubit Clifford group for twirling protocols.

use std::collections::HashSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, c64r, identity, CMatrix};

/// The Clifford group of H_2, de-duplicated up to global phase (24 elements).
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    dim: usize,
    elements: Vec<CMatrix>,
}

impl CliffordGroup {
    pub fn new(dim: usize) -> Result<Self> {
        if dim != 2 {
            return Err(Error::UnsupportedClifford(dim));
        }
        Ok(Self::qubit())
    }

    /// Closure of the Hadamard and phase generators, with the global phase
    /// canonicalized so the first nonzero entry is real positive.
    pub fn qubit() -> Self {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[c64r(1.0), c64r(1.0), c64r(1.0), c64r(-1.0)],
        ) / c64r(2.0f64.sqrt());
        let s = CMatrix::from_row_slice(
            2,
            2,
            &[c64r(1.0), Complex64::ZERO, Complex64::ZERO, c64(0.0, 1.0)],
        );

        let mut elements: Vec<CMatrix> = vec![canonical_phase(identity(2))];
        let mut seen: HashSet<Vec<(i64, i64)>> = HashSet::new();
        seen.insert(key(&elements[0]));
        let mut frontier = elements.clone();
        while let Some(m) = frontier.pop() {
            for g in [&h, &s] {
                let candidate = canonical_phase(g * &m);
                if seen.insert(key(&candidate)) {
                    elements.push(candidate.clone());
                    frontier.push(candidate);
                }
            }
        }
        debug_assert_eq!(elements.len(), 24);
        Self { dim: 2, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// Index of `m` in the group, matching up to global phase.
    pub fn position(&self, m: &CMatrix) -> Option<usize> {
        let target = key(&canonical_phase(m.clone()));
        self.elements
            .iter()
            .position(|e| key(e) == target)
    }
}

/// Scales the matrix so its first entry of non-negligible modulus is real
/// positive, fixing the global phase.
fn canonical_phase(mut m: CMatrix) -> CMatrix {
    let (rows, cols) = m.shape();
    for i in 0..rows {
        for j in 0..cols {
            let z = m[(i, j)];
            if z.norm() > 1e-8 {
                let phase = z.conj() / c64r(z.norm());
                m *= phase;
                return m;
            }
        }
    }
    m
}

fn key(m: &CMatrix) -> Vec<(i64, i64)> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let z = m[(i, j)];
            let re = (z.re * 1e6).round();
            let im = (z.im * 1e6).round();
            // normalize -0.0 so it hashes like 0.0
            out.push(((re + 0.0) as i64, (im + 0.0) as i64));
        }
    }
    out
}
