//! Kraus-operator channels, their superoperator form and exact fidelities.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, c64r, identity, max_abs_diff, pauli_string, random_matrix, subsystem_dim, trace_product,
    vectorize, CMatrix, CVector,
};
use crate::states::{haar_unitary, werner_separable};

const TP_TOL: f64 = 1e-10;

/// A completely positive map as a list of Kraus operators on a declared
/// Hilbert dimension. `trace_preserving` records whether Σ E†E = I holds
/// within 1e-10; the composed maps of the process-matrix protocols set it to
/// false.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<CMatrix>,
    trace_preserving: bool,
}

impl KrausChannel {
    /// Builds a channel and requires the completeness relation.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let channel = Self::new_general(kraus)?;
        if !channel.trace_preserving {
            return Err(Error::NotTracePreserving(completeness_residual(
                &channel.kraus,
                channel.dim,
            )));
        }
        Ok(channel)
    }

    /// Builds a map without requiring trace preservation; the flag is
    /// derived from the operators.
    pub fn new_general(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or(Error::EmptyKraus)?;
        if !first.is_square() {
            return Err(Error::NotSquare {
                rows: first.nrows(),
                cols: first.ncols(),
            });
        }
        let dim = first.nrows();
        if let Some(bad) = kraus.iter().find(|k| k.shape() != (dim, dim)) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.nrows(),
            });
        }
        let trace_preserving = completeness_residual(&kraus, dim) <= TP_TOL;
        Ok(Self {
            dim,
            kraus,
            trace_preserving,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Subsystem dimension D when the channel acts on a bipartite space of
    /// dimension D².
    pub fn subsystem_dim(&self) -> Result<usize> {
        subsystem_dim(self.dim)
    }

    pub fn identity_channel(dim: usize) -> Self {
        Self {
            dim,
            kraus: vec![identity(dim)],
            trace_preserving: true,
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::NotSquare {
                rows: u.nrows(),
                cols: u.ncols(),
            });
        }
        Self::new(vec![u])
    }

    /// Depolarizing channel ρ → (1−p)ρ + p·Tr[ρ]·I/n on an n-dimensional
    /// system.
    pub fn depolarizing(dim: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        let mut kraus = Vec::with_capacity(dim * dim + 1);
        if p < 1.0 {
            kraus.push(identity(dim) * c64r((1.0 - p).sqrt()));
        }
        if p > 0.0 {
            let w = c64r((p / dim as f64).sqrt());
            for i in 0..dim {
                for j in 0..dim {
                    let mut e = CMatrix::zeros(dim, dim);
                    e[(i, j)] = w;
                    kraus.push(e);
                }
            }
        }
        Self::new(kraus)
    }

    /// Channel drawn from the Stinespring picture: a Haar-random isometry
    /// V: H_n → H_n ⊗ H_r cut into r Kraus blocks.
    pub fn random_kraus<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Self {
        assert!(rank >= 1, "random_kraus: rank must be at least 1");
        let isometry = haar_isometry(dim * rank, dim, rng);
        let kraus = (0..rank)
            .map(|m| {
                CMatrix::from_fn(dim, dim, |i, j| isometry[(m * dim + i, j)])
            })
            .collect();
        Self {
            dim,
            kraus,
            trace_preserving: true,
        }
    }

    /// Convex mixture of k Haar-random unitaries with random weights.
    pub fn mixture_of_unitaries<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> Self {
        assert!(k >= 1, "mixture_of_unitaries: need at least one unitary");
        let mut weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let kraus = weights
            .iter()
            .map(|w| haar_unitary(dim, rng) * c64r(w.sqrt()))
            .collect();
        Self {
            dim,
            kraus,
            trace_preserving: true,
        }
    }

    /// Applies the map: Σ E ρ E†.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        assert_eq!(
            rho.shape(),
            (self.dim, self.dim),
            "apply: state dimension mismatch"
        );
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for e in &self.kraus {
            out += e * rho * e.adjoint();
        }
        out
    }

    /// The superoperator λ = Σ E ⊗ E*, satisfying |Λ(ρ)) = λ|ρ) in the
    /// row-major vectorization.
    pub fn superoperator(&self) -> SuperOp {
        let n = self.dim;
        let mut m = CMatrix::zeros(n * n, n * n);
        for e in &self.kraus {
            m += e.kronecker(&e.conjugate());
        }
        SuperOp { dim: n, matrix: m }
    }

    /// Precomposition with a fixed operator: Kraus list {E·G}. The result is
    /// generally not trace preserving when G is not unitary.
    pub fn compose_pre(&self, g: &OperatorMap) -> Result<KrausChannel> {
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: g.dim(),
            });
        }
        let kraus: Vec<CMatrix> = self.kraus.iter().map(|e| e * &g.op).collect();
        let trace_preserving = completeness_residual(&kraus, self.dim) <= TP_TOL;
        Ok(KrausChannel {
            dim: self.dim,
            kraus,
            trace_preserving,
        })
    }

    /// Entanglement fidelity (1/n²) Σ |Tr E|², equal to Tr[λ]/n².
    pub fn entanglement_fidelity(&self) -> f64 {
        let n2 = (self.dim * self.dim) as f64;
        self.kraus.iter().map(|e| e.trace().norm_sqr()) .sum::<f64>() / n2
    }

    /// Exact average fidelity (n·f_ent + 1)/(n + 1); requires a
    /// trace-preserving channel.
    pub fn average_fidelity_exact(&self) -> Result<f64> {
        if !self.trace_preserving {
            return Err(Error::RequiresTracePreserving);
        }
        let n = self.dim as f64;
        Ok((n * self.entanglement_fidelity() + 1.0) / (n + 1.0))
    }

    pub fn to_json(&self) -> String {
        let dto = ChannelJson {
            dim: self.dim,
            kraus: self
                .kraus
                .iter()
                .map(|e| {
                    (0..self.dim)
                        .map(|i| (0..self.dim).map(|j| [e[(i, j)].re, e[(i, j)].im]).collect())
                        .collect()
                })
                .collect(),
            trace_preserving: self.trace_preserving,
        };
        serde_json::to_string_pretty(&dto).expect("channel serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: ChannelJson = serde_json::from_str(text)?;
        let kraus = dto
            .kraus
            .into_iter()
            .map(|rows| {
                let n = rows.len();
                let flat: Vec<Complex64> = rows
                    .into_iter()
                    .flat_map(|row| row.into_iter().map(|[re, im]| c64(re, im)))
                    .collect();
                if flat.len() != n * n {
                    return Err(Error::NotSquare {
                        rows: n,
                        cols: flat.len().checked_div(n).unwrap_or(0),
                    });
                }
                Ok(CMatrix::from_row_slice(n, n, &flat))
            })
            .collect::<Result<Vec<_>>>()?;
        let channel = Self::new_general(kraus)?;
        if channel.dim != dto.dim {
            return Err(Error::DimensionMismatch {
                expected: dto.dim,
                actual: channel.dim,
            });
        }
        if dto.trace_preserving && !channel.trace_preserving {
            return Err(Error::NotTracePreserving(completeness_residual(
                &channel.kraus,
                channel.dim,
            )));
        }
        Ok(channel)
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    dim: usize,
    kraus: Vec<Vec<Vec<[f64; 2]>>>,
    trace_preserving: bool,
}

fn completeness_residual(kraus: &[CMatrix], dim: usize) -> f64 {
    let mut acc = CMatrix::zeros(dim, dim);
    for e in kraus {
        acc += e.adjoint() * e;
    }
    max_abs_diff(&acc, &identity(dim))
}

/// Haar-random isometry: the Q factor of a tall complex Gaussian matrix with
/// R-diagonal phases absorbed.
fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let g = random_matrix(rows, cols, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / c64r(rjj.norm())
        } else {
            c64r(1.0)
        };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Superoperator wrapper carrying its Hilbert dimension.
#[derive(Debug, Clone)]
pub struct SuperOp {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOp {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Residual of the trace-preservation condition in vector form,
    /// ‖(I|λ − (I|‖∞.
    pub fn trace_preserving_residual(&self) -> f64 {
        let vi = vectorize(&identity(self.dim));
        let lhs: CVector = (vi.adjoint() * &self.matrix).transpose();
        lhs.iter()
            .zip(vi.iter())
            .map(|(a, b)| (a - b.conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// A fixed (not necessarily unitary) operator used to precompose channels.
#[derive(Debug, Clone)]
pub struct OperatorMap {
    pub op: CMatrix,
}

impl OperatorMap {
    pub fn new(op: CMatrix) -> Self {
        assert!(op.is_square(), "OperatorMap: operator must be square");
        Self { op }
    }

    pub fn dim(&self) -> usize {
        self.op.nrows()
    }
}

/// Named test channels on a bipartite system H_D⊗H_D.
#[derive(Debug, Clone, PartialEq)]
pub enum ZooChannel {
    Identity,
    GlobalDepolarizing { p: f64 },
    LocalDepolarizing { p_a: f64, p_b: f64 },
    ProductUnitary,
    RandomUnitaryMixture { k: usize },
    RandomKraus { rank: usize },
    PauliUnitary { label: String },
}

/// Builds a trace-preserving channel on dimension D² from a zoo entry.
pub fn build_zoo_channel<R: Rng + ?Sized>(
    which: &ZooChannel,
    d: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    let n = d * d;
    match which {
        ZooChannel::Identity => Ok(KrausChannel::identity_channel(n)),
        ZooChannel::GlobalDepolarizing { p } => KrausChannel::depolarizing(n, *p),
        ZooChannel::LocalDepolarizing { p_a, p_b } => {
            let a = KrausChannel::depolarizing(d, *p_a)?;
            let b = KrausChannel::depolarizing(d, *p_b)?;
            let kraus = a
                .kraus()
                .iter()
                .flat_map(|ea| b.kraus().iter().map(move |eb| ea.kronecker(eb)))
                .collect();
            KrausChannel::new(kraus)
        }
        ZooChannel::ProductUnitary => {
            let u = haar_unitary(d, rng);
            let v = haar_unitary(d, rng);
            KrausChannel::unitary(u.kronecker(&v))
        }
        ZooChannel::RandomUnitaryMixture { k } => {
            Ok(KrausChannel::mixture_of_unitaries(n, *k, rng))
        }
        ZooChannel::RandomKraus { rank } => Ok(KrausChannel::random_kraus(n, *rank, rng)),
        ZooChannel::PauliUnitary { label } => {
            let p = pauli_string(label)?;
            if p.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: p.nrows(),
                });
            }
            KrausChannel::unitary(p)
        }
    }
}

/// A fixed roster of zoo instances used by sweep tests and the verification
/// command. Randomized entries draw from the supplied generator.
pub fn zoo_roster<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<(String, KrausChannel)> {
    let mut out = Vec::new();
    let mut push = |name: &str, c: Result<KrausChannel>| {
        out.push((name.to_string(), c.expect("zoo construction")));
    };
    push("identity", build_zoo_channel(&ZooChannel::Identity, d, rng));
    push(
        "global-depolarizing(0.3)",
        build_zoo_channel(&ZooChannel::GlobalDepolarizing { p: 0.3 }, d, rng),
    );
    push(
        "global-depolarizing(1.0)",
        build_zoo_channel(&ZooChannel::GlobalDepolarizing { p: 1.0 }, d, rng),
    );
    push(
        "local-depolarizing(0.15,0.4)",
        build_zoo_channel(
            &ZooChannel::LocalDepolarizing {
                p_a: 0.15,
                p_b: 0.4,
            },
            d,
            rng,
        ),
    );
    push(
        "id_a-dep_b(1.0)",
        build_zoo_channel(&ZooChannel::LocalDepolarizing { p_a: 0.0, p_b: 1.0 }, d, rng),
    );
    push(
        "product-unitary",
        build_zoo_channel(&ZooChannel::ProductUnitary, d, rng),
    );
    push(
        "unitary-mixture(3)",
        build_zoo_channel(&ZooChannel::RandomUnitaryMixture { k: 3 }, d, rng),
    );
    push(
        "random-kraus(2)",
        build_zoo_channel(&ZooChannel::RandomKraus { rank: 2 }, d, rng),
    );
    push(
        "random-kraus(4)",
        build_zoo_channel(&ZooChannel::RandomKraus { rank: 4 }, d, rng),
    );
    out
}

/// Exact average fidelity as the Werner-state expectation Tr[ρ̃_W λ] of the
/// superoperator; the independent route to the Kraus-trace formula.
pub fn average_fidelity_via_werner(channel: &KrausChannel) -> f64 {
    let lambda = channel.superoperator();
    let w = werner_separable(channel.dim());
    trace_product(w.matrix(), lambda.matrix()).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = random_matrix(n, n, rng);
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    }

    #[test]
    fn identity_channel_preserves_states() {
        let c = KrausChannel::identity_channel(4);
        let mut r = rng(21);
        let rho = random_density(4, &mut r);
        assert!(max_abs_diff(&c.apply(&rho), &rho) < 1e-15);
    }

    #[test]
    fn fully_depolarizing_outputs_maximally_mixed() {
        let c = KrausChannel::depolarizing(4, 1.0).unwrap();
        let mut r = rng(22);
        let rho = random_density(4, &mut r);
        let out = c.apply(&rho);
        assert!(max_abs_diff(&out, &(identity(4) / c64r(4.0))) < 1e-12);
    }

    #[test]
    fn random_channels_preserve_trace() {
        let mut r = rng(23);
        for channel in [
            KrausChannel::random_kraus(4, 3, &mut r),
            KrausChannel::mixture_of_unitaries(4, 3, &mut r),
            KrausChannel::depolarizing(4, 0.37).unwrap(),
        ] {
            assert!(channel.is_trace_preserving());
            let rho = random_density(4, &mut r);
            let out = channel.apply(&rho);
            assert!((out.trace().re - 1.0).abs() < 1e-12);
            assert!(out.trace().im.abs() < 1e-12);
        }
    }

    #[test]
    fn superoperator_matches_apply_on_vectorized_states() {
        let mut r = rng(24);
        let channel = KrausChannel::random_kraus(4, 3, &mut r);
        let lambda = channel.superoperator();
        for _ in 0..5 {
            let rho = random_matrix(4, 4, &mut r);
            let lhs = vectorize(&channel.apply(&rho));
            let rhs = lambda.matrix() * vectorize(&rho);
            assert!((&lhs - &rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn superoperator_of_identity_and_unitary() {
        let id = KrausChannel::identity_channel(4).superoperator();
        assert!(max_abs_diff(id.matrix(), &identity(16)) < 1e-15);

        let mut r = rng(25);
        let u = haar_unitary(4, &mut r);
        let c = KrausChannel::unitary(u.clone()).unwrap();
        assert!(max_abs_diff(c.superoperator().matrix(), &u.kronecker(&u.conjugate())) < 1e-15);
    }

    #[test]
    fn trace_preservation_in_vector_form() {
        let mut r = rng(26);
        for _ in 0..5 {
            let channel = KrausChannel::random_kraus(4, 2, &mut r);
            assert!(channel.superoperator().trace_preserving_residual() < 1e-10);
        }
    }

    #[test]
    fn entanglement_fidelity_two_routes() {
        let mut r = rng(27);
        for _ in 0..20 {
            let channel = KrausChannel::random_kraus(4, 3, &mut r);
            let via_kraus = channel.entanglement_fidelity();
            // the other route: f_ent = Tr[λ]/n² with n = 4
            let via_superop = channel.superoperator().matrix().trace().re / 16.0;
            assert!((via_kraus - via_superop).abs() < 1e-12);
        }
    }

    #[test]
    fn entanglement_fidelity_known_values() {
        assert!((KrausChannel::identity_channel(4).entanglement_fidelity() - 1.0).abs() < 1e-15);
        let dep = KrausChannel::depolarizing(4, 1.0).unwrap();
        assert!((dep.entanglement_fidelity() - 1.0 / 16.0).abs() < 1e-15);
        // id_A ⊗ fully-depolarizing_B at D = 2 has f_ent = 1/4.
        let mut r = rng(28);
        let c = build_zoo_channel(&ZooChannel::LocalDepolarizing { p_a: 0.0, p_b: 1.0 }, 2, &mut r)
            .unwrap();
        assert!((c.entanglement_fidelity() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn average_fidelity_known_values_and_werner_route() {
        let id = KrausChannel::identity_channel(4);
        assert!((id.average_fidelity_exact().unwrap() - 1.0).abs() < 1e-12);

        let dep = KrausChannel::depolarizing(4, 1.0).unwrap();
        assert!((dep.average_fidelity_exact().unwrap() - 0.25).abs() < 1e-12);

        let mut r = rng(29);
        let c = build_zoo_channel(&ZooChannel::LocalDepolarizing { p_a: 0.0, p_b: 1.0 }, 2, &mut r)
            .unwrap();
        assert!((c.average_fidelity_exact().unwrap() - 0.4).abs() < 1e-12);

        for _ in 0..20 {
            let channel = KrausChannel::random_kraus(4, 3, &mut r);
            let formula = channel.average_fidelity_exact().unwrap();
            let werner_route = average_fidelity_via_werner(&channel);
            assert!((formula - werner_route).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_bounds_on_the_zoo() {
        let mut r = rng(30);
        for d in [2usize, 3] {
            for (name, channel) in zoo_roster(d, &mut r) {
                let f_ent = channel.entanglement_fidelity();
                let f_avg = channel.average_fidelity_exact().unwrap();
                let n = (d * d) as f64;
                assert!((0.0..=1.0 + 1e-12).contains(&f_ent), "{name}: f_ent {f_ent}");
                assert!(
                    f_avg >= 1.0 / (n + 1.0) - 1e-12 && f_avg <= 1.0 + 1e-12,
                    "{name}: f_avg {f_avg}"
                );
            }
        }
    }

    #[test]
    fn compose_pre_with_identity_and_unitary() {
        let mut r = rng(31);
        let channel = KrausChannel::random_kraus(4, 2, &mut r);
        let composed = channel.compose_pre(&OperatorMap::new(identity(4))).unwrap();
        for (a, b) in channel.kraus().iter().zip(composed.kraus()) {
            assert!(max_abs_diff(a, b) < 1e-15);
        }
        assert!(composed.is_trace_preserving());

        // identity channel precomposed with X⊗I: superoperator is
        // (X⊗I)⊗(X⊗I)*.
        let x_i = pauli_string("XI").unwrap();
        let id = KrausChannel::identity_channel(4);
        let m = id.compose_pre(&OperatorMap::new(x_i.clone())).unwrap();
        assert!(max_abs_diff(
            m.superoperator().matrix(),
            &x_i.kronecker(&x_i.conjugate())
        ) < 1e-15);
    }

    #[test]
    fn compose_pre_with_non_unitary_clears_flag_and_matches_superop_product() {
        let mut r = rng(32);
        let channel = KrausChannel::random_kraus(4, 2, &mut r);
        let g_plus = pauli_string("XI").unwrap() + pauli_string("YI").unwrap();
        let composed = channel.compose_pre(&OperatorMap::new(g_plus.clone())).unwrap();
        assert!(!composed.is_trace_preserving());
        assert!(composed.average_fidelity_exact().is_err());

        let lhs = composed.superoperator();
        let rhs = channel.superoperator().matrix() * g_plus.kronecker(&g_plus.conjugate());
        assert!(max_abs_diff(lhs.matrix(), &rhs) < 1e-12);
    }

    #[test]
    fn zoo_rejects_bad_parameters() {
        let mut r = rng(33);
        assert!(matches!(
            build_zoo_channel(&ZooChannel::GlobalDepolarizing { p: 1.5 }, 2, &mut r),
            Err(Error::InvalidProbability(_))
        ));
        assert!(matches!(
            build_zoo_channel(
                &ZooChannel::PauliUnitary {
                    label: "XXX".into()
                },
                2,
                &mut r
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let mut r = rng(34);
        let channel = KrausChannel::random_kraus(4, 3, &mut r);
        let text = channel.to_json();
        let back = KrausChannel::from_json(&text).unwrap();
        assert_eq!(back.dim(), 4);
        assert!(back.is_trace_preserving());
        let rho = random_hermitian(4, &mut r);
        assert!(max_abs_diff(&channel.apply(&rho), &back.apply(&rho)) < 1e-12);
    }

    #[test]
    fn json_rejects_inconsistent_completeness_claim() {
        let half = identity(2) * c64r(0.5);
        let bad = KrausChannel::new_general(vec![half]).unwrap();
        assert!(!bad.is_trace_preserving());
        let mut text = bad.to_json();
        text = text.replace("\"trace_preserving\": false", "\"trace_preserving\": true");
        assert!(matches!(
            KrausChannel::from_json(&text),
            Err(Error::NotTracePreserving(_))
        ));
    }
}
