//! Pure states, Haar-measure sampling and the separable Werner state.

use nalgebra::linalg::QR;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    c64r, gaussian_c64, identity, kron_vec, outer, random_matrix, vectorize, CMatrix, CVector,
};

/// A normalized state vector on H_D.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Wraps a vector that is already normalized to within 1e-12.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes and wraps; fails on (numerically) zero vectors.
    pub fn from_unnormalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-14 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            amplitudes: amplitudes / c64r(norm),
        })
    }

    /// Computational basis state |index⟩.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis_state: index out of range");
        let mut v = CVector::zeros(dim);
        v[index] = c64r(1.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// The projector |ψ⟩⟨ψ|.
    pub fn projector(&self) -> CMatrix {
        outer(&self.amplitudes, &self.amplitudes)
    }

    /// Entrywise conjugate state |ψ*⟩.
    pub fn conjugated(&self) -> Self {
        Self {
            amplitudes: self.amplitudes.map(|z| z.conj()),
        }
    }

    /// Tensor product state on the joint space.
    pub fn tensor(&self, other: &PureState) -> Self {
        Self {
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
        }
    }

    /// Squared overlap |⟨self|other⟩|².
    pub fn overlap_sq(&self, other: &PureState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}

/// Haar-random pure state: a normalized vector of independent standard
/// complex Gaussians.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    assert!(dim >= 2, "haar_state: dimension must be at least 2");
    loop {
        let v = CVector::from_fn(dim, |_, _| gaussian_c64(rng));
        if let Ok(s) = PureState::from_unnormalized(v) {
            return s;
        }
    }
}

/// Haar-random unitary via QR of a complex Gaussian matrix, with the phases
/// of the R diagonal absorbed into Q so the distribution is exactly Haar.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    assert!(dim >= 2, "haar_unitary: dimension must be at least 2");
    let g = random_matrix(dim, dim, rng);
    let qr = QR::new(g);
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / c64r(rjj.norm())
        } else {
            c64r(1.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// The separable Werner state (I⊗I + |I⟩⟩⟨⟨I|)/(d(d+1)) on H_d⊗H_d: the
/// second moment of the Haar ensemble in the Ψ⊗Ψ* form.
#[derive(Debug, Clone)]
pub struct WernerState {
    dim: usize,
    matrix: CMatrix,
}

impl WernerState {
    /// Single-factor dimension d; the matrix acts on H_d⊗H_d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

pub fn werner_separable(dim: usize) -> WernerState {
    assert!(dim >= 2, "werner_separable: dimension must be at least 2");
    let vi = vectorize(&identity(dim));
    let scale = c64r(1.0 / (dim as f64 * (dim as f64 + 1.0)));
    let matrix = (identity(dim * dim) + outer(&vi, &vi)) * scale;
    WernerState { dim, matrix }
}
