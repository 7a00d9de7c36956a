//! Process-matrix reconstruction over a Hermitian-unitary operator basis.
//!
//! Diagonal elements are the entanglement fidelities of the channel
//! precomposed with a basis operator; off-diagonal elements are assembled
//! from the four combinations Γ_μ±Γ_ν and Γ_μ±iΓ_ν, whose (formal)
//! entanglement fidelities are estimated with the same survive-probability
//! machinery on unnormalized inputs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{KrausChannel, OperatorMap};
use crate::designs::StateDesign;
use crate::error::{Error, Result};
use crate::estimators::{
    entanglement_fidelity_from_triple, estimate_triple, pointwise_kernel, InputSource, Mode,
    ProtocolSpec, SurvivalTriple,
};
use crate::linalg::{c64, c64r, identity, kron_vec, max_abs_diff, pauli_string, trace_product, CMatrix};

/// Orthogonal basis of Hermitian unitary operators with Tr[Γ_μ†Γ_ν] = n·δ_μν.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    dim: usize,
    ops: Vec<CMatrix>,
    labels: Vec<String>,
}

impl OperatorBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn op(&self, mu: usize) -> &CMatrix {
        &self.ops[mu]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Largest deviation from the orthogonality and Hermitian-unitarity
    /// requirements.
    pub fn max_residual(&self) -> f64 {
        let n = self.dim as f64;
        let mut worst: f64 = 0.0;
        for (m, a) in self.ops.iter().enumerate() {
            worst = worst.max(max_abs_diff(a, &a.adjoint()));
            worst = worst.max(max_abs_diff(&(a * a), &identity(self.dim)));
            for (v, b) in self.ops.iter().enumerate() {
                let overlap = trace_product(&a.adjoint(), b);
                let expect = if m == v { c64r(n) } else { Complex64::ZERO };
                worst = worst.max((overlap - expect).norm());
            }
        }
        worst
    }
}

/// Tensor-product Pauli basis for a bipartite system of `qubits_per_side`
/// qubits on each side: 16^k operators on dimension 4^k, labelled by strings
/// over {I, X, Y, Z} in lexicographic order.
pub fn pauli_basis(qubits_per_side: usize) -> OperatorBasis {
    assert!(qubits_per_side >= 1, "pauli_basis: need at least one qubit");
    let chars = ['I', 'X', 'Y', 'Z'];
    let slots = 2 * qubits_per_side;
    let count = 4usize.pow(slots as u32);
    let mut labels = Vec::with_capacity(count);
    let mut ops = Vec::with_capacity(count);
    for code in 0..count {
        let mut label = String::with_capacity(slots);
        let mut rem = code;
        for pos in (0..slots).rev() {
            let digit = rem / 4usize.pow(pos as u32);
            rem %= 4usize.pow(pos as u32);
            label.push(chars[digit]);
        }
        ops.push(pauli_string(&label).expect("valid Pauli label"));
        labels.push(label);
    }
    OperatorBasis {
        dim: 1 << slots,
        ops,
        labels,
    }
}

/// The Hermitian process matrix χ over a declared operator basis.
#[derive(Debug, Clone)]
pub struct ChiMatrix {
    labels: Vec<String>,
    entries: CMatrix,
}

impl ChiMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn entry(&self, mu: usize, nu: usize) -> Complex64 {
        self.entries[(mu, nu)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.labels.len()).map(|m| self.entries[(m, m)].re).collect()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        max_abs_diff(&self.entries, &self.entries.adjoint())
    }

    pub fn max_abs_difference(&self, other: &ChiMatrix) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }

    /// Rebuilds the channel action Σ_{μν} χ_{μν} Γ_μ ρ Γ_ν† from the matrix.
    pub fn apply_reconstructed(&self, basis: &OperatorBasis, rho: &CMatrix) -> CMatrix {
        let n = basis.dim();
        let mut out = CMatrix::zeros(n, n);
        for (mu, gm) in basis.ops().iter().enumerate() {
            let left = gm * rho;
            for (nu, gn) in basis.ops().iter().enumerate() {
                let w = self.entries[(mu, nu)];
                if w.norm() > 0.0 {
                    out += &left * gn.adjoint() * w;
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let n = self.labels.len();
        let dto = ChiJson {
            labels: self.labels.clone(),
            entries_re: (0..n)
                .map(|i| (0..n).map(|j| self.entries[(i, j)].re).collect())
                .collect(),
            entries_im: (0..n)
                .map(|i| (0..n).map(|j| self.entries[(i, j)].im).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&dto).expect("chi serialization cannot fail")
    }

    /// CSV of the diagonal: `label,value` rows.
    pub fn diagonal_csv(&self) -> String {
        let mut out = String::from("label,value\n");
        for (label, value) in self.labels.iter().zip(self.diagonal()) {
            out.push_str(&format!("{label},{value:.17e}\n"));
        }
        out
    }
}

#[derive(Serialize)]
struct ChiJson {
    labels: Vec<String>,
    entries_re: Vec<Vec<f64>>,
    entries_im: Vec<Vec<f64>>,
}

/// Direct evaluation χ_{μν} = (1/n²) Σ_m Tr[Γ_μ†E_m]·(Tr[Γ_ν†E_m])*; the
/// oracle for the protocol-based reconstructions.
pub fn chi_direct(channel: &KrausChannel, basis: &OperatorBasis) -> Result<ChiMatrix> {
    if channel.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: channel.dim(),
        });
    }
    let n = basis.len();
    let scale = 1.0 / ((basis.dim() * basis.dim()) as f64);
    let mut entries = CMatrix::zeros(n, n);
    for e in channel.kraus() {
        let traces: Vec<Complex64> = basis
            .ops()
            .iter()
            .map(|g| trace_product(&g.adjoint(), e))
            .collect();
        for mu in 0..n {
            for nu in 0..n {
                entries[(mu, nu)] += traces[mu] * traces[nu].conj() * c64r(scale);
            }
        }
    }
    Ok(ChiMatrix {
        labels: basis.labels().to_vec(),
        entries,
    })
}

/// The same matrix through the superoperator form
/// χ_{μν} = (1/n²)·Tr[λ·(Γ_μ⊗Γ_ν*)]; used to cross-check [`chi_direct`].
pub fn chi_via_superoperator(channel: &KrausChannel, basis: &OperatorBasis) -> Result<ChiMatrix> {
    if channel.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: channel.dim(),
        });
    }
    let lambda = channel.superoperator();
    let n = basis.len();
    let scale = c64r(1.0 / ((basis.dim() * basis.dim()) as f64));
    let mut entries = CMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            let pair = basis.op(mu).kronecker(&basis.op(nu).conjugate());
            entries[(mu, nu)] = trace_product(lambda.matrix(), &pair) * scale;
        }
    }
    Ok(ChiMatrix {
        labels: basis.labels().to_vec(),
        entries,
    })
}

/// Estimation settings for the element protocols: a product 2-design on the
/// input side, exact expectations or finite shots.
#[derive(Debug, Clone)]
pub struct ChiProtocol {
    pub design_a: StateDesign,
    pub design_b: StateDesign,
    pub mode: Mode,
    pub shots: u64,
    pub seed: u64,
}

impl ChiProtocol {
    pub fn exact(design_a: StateDesign, design_b: StateDesign) -> Self {
        Self {
            design_a,
            design_b,
            mode: Mode::Exact,
            shots: 0,
            seed: 0,
        }
    }

    pub fn shots(design_a: StateDesign, design_b: StateDesign, shots: u64, seed: u64) -> Self {
        Self {
            design_a,
            design_b,
            mode: Mode::Shots,
            shots,
            seed,
        }
    }
}

/// A reconstructed element together with the number of clipped Bernoulli
/// parameters (nonzero only in shots mode on non-physical maps).
#[derive(Debug, Clone, Copy)]
pub struct ChiEstimate {
    pub value: Complex64,
    pub clipped_draws: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn element_seed(base: u64, mu: usize, nu: usize, n: usize) -> u64 {
    splitmix64(base ^ splitmix64((mu * n + nu + 1) as u64))
}

/// Diagonal element χ_{μμ} as the entanglement fidelity of the modified map
/// Λ∘Γ_μ, measured through the survive-probability protocol.
pub fn chi_diagonal_protocol(
    channel: &KrausChannel,
    basis: &OperatorBasis,
    mu: usize,
    protocol: &ChiProtocol,
) -> Result<ChiEstimate> {
    if channel.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: channel.dim(),
        });
    }
    let d = channel.subsystem_dim()?;
    let modified = channel.compose_pre(&OperatorMap::new(basis.op(mu).clone()))?;
    let spec = ProtocolSpec {
        mode: protocol.mode,
        source: InputSource::DesignProduct {
            a: protocol.design_a.clone(),
            b: protocol.design_b.clone(),
        },
        n_settings: 0,
        shots: protocol.shots,
        seed: element_seed(protocol.seed, mu, mu, basis.len()),
    };
    let triple = estimate_triple(&modified, &spec)?;
    Ok(ChiEstimate {
        value: c64r(entanglement_fidelity_from_triple(&triple, d)),
        clipped_draws: 0,
    })
}

/// Triple of the precomposed map Λ∘G over the product design with the raw
/// (unnormalized) inputs G(ψ_x⊗φ_y). In shots mode, parameters outside
/// [0, 1] are clipped and counted.
fn modified_triple_design(
    channel: &KrausChannel,
    g: &CMatrix,
    protocol: &ChiProtocol,
    seed: u64,
) -> (SurvivalTriple, u64) {
    let na = protocol.design_a.len();
    let nb = protocol.design_b.len();
    let shots = protocol.shots;
    let results: Vec<([f64; 3], u64)> = (0..na * nb)
        .into_par_iter()
        .map(|idx| {
            let sa = &protocol.design_a.states()[idx / nb];
            let sb = &protocol.design_b.states()[idx % nb];
            let product = kron_vec(sa.amplitudes(), sb.amplitudes());
            let input = g * product;
            let (p_ab, p_a, p_b) =
                pointwise_kernel(channel.kraus(), &input, sa.amplitudes(), sb.amplitudes());
            match protocol.mode {
                Mode::Exact => ([p_ab, p_a, p_b], 0),
                Mode::Shots => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(idx as u64);
                    let mut clipped = 0u64;
                    let vals = [p_ab, p_a, p_b].map(|p| {
                        if !(0.0..=1.0).contains(&p) {
                            clipped += 1;
                        }
                        let p = p.clamp(0.0, 1.0);
                        let draw = Binomial::new(shots, p).expect("valid binomial");
                        rng.sample(draw) as f64 / shots as f64
                    });
                    (vals, clipped)
                }
            }
        })
        .collect();

    let n = (na * nb) as f64;
    let mut mean = [0.0; 3];
    let mut clipped = 0u64;
    for (v, c) in &results {
        for k in 0..3 {
            mean[k] += v[k];
        }
        clipped += c;
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let se = match protocol.mode {
        Mode::Exact => [0.0; 3],
        Mode::Shots => {
            let mut var = [0.0; 3];
            for (v, _) in &results {
                for k in 0..3 {
                    let p = v[k].clamp(0.0, 1.0);
                    var[k] += p * (1.0 - p) / shots as f64;
                }
            }
            var.map(|v| (v / (n * n)).sqrt())
        }
    };

    (
        SurvivalTriple {
            f_ab: mean[0],
            f_a: mean[1],
            f_b: mean[2],
            se_ab: se[0],
            se_a: se[1],
            se_b: se[2],
            n_settings: na * nb,
            shots_per_setting: if protocol.mode == Mode::Shots { shots } else { 0 },
        },
        clipped,
    )
}

/// The formal entanglement fidelity of Λ∘G for a combination G of two
/// orthogonal basis operators, recovered from its survive probabilities with
/// the trace constant Tr[G G†] = 2D² in place of the trace-preservation term.
fn omega_from_triple(triple: &SurvivalTriple, d: usize) -> f64 {
    let dp1 = d as f64 + 1.0;
    (2.0 + dp1 * dp1 * triple.f_ab - dp1 * (triple.f_a + triple.f_b)) / (d * d) as f64
}

/// Off-diagonal element χ_{μν} for μ ≠ ν from the four modified maps
/// Λ∘(Γ_μ±Γ_ν) and Λ∘(Γ_μ±iΓ_ν):
/// χ_{μν} = [ω₊ − ω₋ + i(ω̃₊ − ω̃₋)]/4.
pub fn chi_offdiagonal_protocol(
    channel: &KrausChannel,
    basis: &OperatorBasis,
    mu: usize,
    nu: usize,
    protocol: &ChiProtocol,
) -> Result<ChiEstimate> {
    if mu == nu {
        return Err(Error::InvalidProtocol(
            "off-diagonal protocol requires mu != nu; use the diagonal path".into(),
        ));
    }
    if channel.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: channel.dim(),
        });
    }
    for design in [&protocol.design_a, &protocol.design_b] {
        let report = design.verify();
        if !report.pass {
            return Err(Error::InvalidDesign(format!(
                "design fails the 2-design check (deviation {:.3e})",
                report.max_deviation
            )));
        }
    }
    let d = channel.subsystem_dim()?;
    let gm = basis.op(mu);
    let gn = basis.op(nu);
    let i = c64(0.0, 1.0);
    let combinations = [
        gm + gn,
        gm - gn,
        gm + gn * i,
        gm - gn * i,
    ];
    let base = element_seed(protocol.seed, mu, nu, basis.len());
    let mut omegas = [0.0; 4];
    let mut clipped = 0u64;
    for (k, g) in combinations.iter().enumerate() {
        let (triple, clips) = modified_triple_design(channel, g, protocol, splitmix64(base + k as u64));
        omegas[k] = omega_from_triple(&triple, d);
        clipped += clips;
    }
    let value = c64(
        (omegas[0] - omegas[1]) / 4.0,
        (omegas[2] - omegas[3]) / 4.0,
    );
    Ok(ChiEstimate {
        value,
        clipped_draws: clipped,
    })
}

/// Full reconstruction: every diagonal through the modified-map protocol and
/// every off-diagonal pair through the four-combination protocol, assembled
/// into a Hermitian matrix.
pub fn chi_full_protocol(
    channel: &KrausChannel,
    basis: &OperatorBasis,
    protocol: &ChiProtocol,
) -> Result<(ChiMatrix, u64)> {
    let n = basis.len();
    let mut entries = CMatrix::zeros(n, n);
    let mut clipped = 0u64;
    for mu in 0..n {
        let est = chi_diagonal_protocol(channel, basis, mu, protocol)?;
        entries[(mu, mu)] = est.value;
        clipped += est.clipped_draws;
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|mu| ((mu + 1)..n).map(move |nu| (mu, nu)))
        .collect();
    let estimates: Vec<Result<(usize, usize, ChiEstimate)>> = pairs
        .par_iter()
        .map(|&(mu, nu)| {
            chi_offdiagonal_protocol(channel, basis, mu, nu, protocol)
                .map(|est| (mu, nu, est))
        })
        .collect();
    for item in estimates {
        let (mu, nu, est) = item?;
        entries[(mu, nu)] = est.value;
        entries[(nu, mu)] = est.value.conj();
        clipped += est.clipped_draws;
    }
    Ok((
        ChiMatrix {
            labels: basis.labels().to_vec(),
            entries,
        },
        clipped,
    ))
}
