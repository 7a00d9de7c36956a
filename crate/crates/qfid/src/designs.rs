//! State 2-designs: SIC sets, complete MUBs and verification that a finite
//! set of pure states reproduces the Haar second moment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, c64r, frobenius_distance, random_hermitian, CMatrix, CVector,
};
use crate::states::{werner_separable, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Sic,
    Mub,
    Custom,
}

/// A finite set of pure states claimed to form a state 2-design.
#[derive(Debug, Clone)]
pub struct StateDesign {
    dim: usize,
    kind: DesignKind,
    states: Vec<PureState>,
}

/// Outcome of [`StateDesign::verify`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DesignReport {
    pub max_deviation: f64,
    pub pass: bool,
}

impl StateDesign {
    /// Symmetric informationally complete set of D² states. Supported for
    /// D = 2 (tetrahedron) and D = 3 (Weyl-Heisenberg orbit of an exact
    /// fiducial).
    pub fn sic(dim: usize) -> Result<Self> {
        let states = match dim {
            2 => sic_qubit(),
            3 => sic_qutrit(),
            _ => return Err(Error::NoFiducial(dim)),
        };
        Ok(Self {
            dim,
            kind: DesignKind::Sic,
            states,
        })
    }

    /// Complete set of D+1 mutually unbiased bases (D(D+1) states) for prime
    /// D.
    pub fn mub(dim: usize) -> Result<Self> {
        if !is_prime(dim) {
            return Err(Error::NotPrime(dim));
        }
        let states = if dim == 2 { mub_qubit() } else { mub_odd_prime(dim) };
        Ok(Self {
            dim,
            kind: DesignKind::Mub,
            states,
        })
    }

    /// Wraps a user-supplied set of states. The 2-design property is not
    /// checked here; call [`StateDesign::verify`].
    pub fn custom(dim: usize, states: Vec<PureState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidDesign("empty state set".into()));
        }
        if let Some(s) = states.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: s.dim(),
            });
        }
        Ok(Self {
            dim,
            kind: DesignKind::Custom,
            states,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    /// (1/N) Σ Ψ_x ⊗ Ψ_x*, the quantity the 2-design constraint pins to the
    /// separable Werner state.
    pub fn second_moment(&self) -> CMatrix {
        let d = self.dim;
        let mut acc = CMatrix::zeros(d * d, d * d);
        for s in &self.states {
            let p = s.projector();
            acc += p.kronecker(&p.conjugate());
        }
        acc / c64r(self.states.len() as f64)
    }

    /// (1/N) Σ Ψ_x; equals I/D for any 2-design.
    pub fn average_state(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for s in &self.states {
            acc += s.projector();
        }
        acc / c64r(self.states.len() as f64)
    }

    /// Checks the 2-design constraint two ways: Frobenius distance of the
    /// second moment from the separable Werner state, and the pairing rule
    /// (1/N)ΣTr[Ψ_x A Ψ_x B] = (TrA·TrB + TrAB)/(D(D+1)) on 20 seeded random
    /// Hermitian pairs. Passes iff both deviations are ≤ 1e-10.
    pub fn verify(&self) -> DesignReport {
        let d = self.dim;
        let moment_dev =
            frobenius_distance(&self.second_moment(), werner_separable(d).matrix());

        let mut rng = ChaCha8Rng::seed_from_u64(0x2de5);
        let mut pairing_dev: f64 = 0.0;
        let n = self.states.len() as f64;
        for _ in 0..20 {
            let a = random_hermitian(d, &mut rng);
            let b = random_hermitian(d, &mut rng);
            let mut lhs = Complex64::ZERO;
            for s in &self.states {
                let p = s.projector();
                lhs += (&p * &a * &p * &b).trace();
            }
            lhs /= c64r(n);
            let rhs = (a.trace() * b.trace() + (&a * &b).trace())
                / c64r(d as f64 * (d as f64 + 1.0));
            pairing_dev = pairing_dev.max((lhs - rhs).norm());
        }

        let max_deviation = moment_dev.max(pairing_dev);
        DesignReport {
            max_deviation,
            pass: max_deviation <= 1e-10,
        }
    }

    pub fn to_json(&self) -> String {
        let dto = DesignJson {
            dim: self.dim,
            kind: self.kind,
            states: self
                .states
                .iter()
                .map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&dto).expect("design serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: DesignJson = serde_json::from_str(text)?;
        let states = dto
            .states
            .into_iter()
            .map(|amps| {
                let v = CVector::from_vec(
                    amps.into_iter().map(|[re, im]| c64(re, im)).collect(),
                );
                PureState::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut design = Self::custom(dto.dim, states)?;
        design.kind = dto.kind;
        Ok(design)
    }
}

#[derive(Serialize, Deserialize)]
struct DesignJson {
    dim: usize,
    kind: DesignKind,
    states: Vec<Vec<[f64; 2]>>,
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// Tetrahedron SIC for the qubit.
fn sic_qubit() -> Vec<PureState> {
    let r = (1.0f64 / 3.0).sqrt();
    let s = (2.0f64 / 3.0).sqrt();
    let mut states = vec![PureState::basis_state(2, 0)];
    for k in 0..3 {
        let phase = c64(0.0, 2.0 * PI * k as f64 / 3.0).exp();
        let v = CVector::from_vec(vec![c64r(r), phase * c64r(s)]);
        states.push(PureState::new(v).expect("unit norm by construction"));
    }
    states
}

/// Weyl-Heisenberg orbit X^a Z^b of the qutrit fiducial (0, 1, −1)/√2.
fn sic_qutrit() -> Vec<PureState> {
    let omega = c64(0.0, 2.0 * PI / 3.0).exp();
    let inv_sqrt2 = c64r(1.0 / 2.0f64.sqrt());
    let fiducial = [Complex64::ZERO, inv_sqrt2, -inv_sqrt2];
    let mut states = Vec::with_capacity(9);
    for a in 0..3usize {
        for b in 0..3usize {
            // (X^a Z^b f)_k = ω^{b(k-a)} f_{k-a}
            let v = CVector::from_fn(3, |k, _| {
                let src = (k + 3 - a) % 3;
                omega.powu((b * src) as u32) * fiducial[src]
            });
            states.push(PureState::new(v).expect("unitary orbit of a unit vector"));
        }
    }
    states
}

/// The three single-qubit eigenbases.
fn mub_qubit() -> Vec<PureState> {
    let h = 1.0 / 2.0f64.sqrt();
    let raw: [[Complex64; 2]; 6] = [
        [c64r(1.0), c64r(0.0)],
        [c64r(0.0), c64r(1.0)],
        [c64r(h), c64r(h)],
        [c64r(h), c64r(-h)],
        [c64r(h), c64(0.0, h)],
        [c64r(h), c64(0.0, -h)],
    ];
    raw.iter()
        .map(|amps| {
            PureState::new(CVector::from_vec(amps.to_vec())).expect("unit norm")
        })
        .collect()
}

/// Standard quadratic Gauss-sum bases for odd prime D: the computational
/// basis plus D bases with components ω^{a k² + m k}/√D.
fn mub_odd_prime(d: usize) -> Vec<PureState> {
    let omega = c64(0.0, 2.0 * PI / d as f64).exp();
    let norm = c64r(1.0 / (d as f64).sqrt());
    let mut states: Vec<PureState> = (0..d).map(|k| PureState::basis_state(d, k)).collect();
    for a in 0..d {
        for m in 0..d {
            let v = CVector::from_fn(d, |k, _| {
                let exponent = (a * k * k + m * k) % d;
                norm * omega.powu(exponent as u32)
            });
            states.push(PureState::new(v).expect("unit norm by construction"));
        }
    }
    states
}
