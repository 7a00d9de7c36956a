//! Survive-probability protocols for bipartite channels and the combiners
//! that turn the measured triple into entanglement and average fidelity.
//!
//! Estimation is deterministic for a fixed seed independent of the worker
//! count: every setting draws from its own counter-addressed stream of the
//! seeded generator and partial results are reduced in setting order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::clifford::CliffordGroup;
use crate::designs::StateDesign;
use crate::error::{Error, Result};
use crate::linalg::{
    c64r, factor_swap, identity, kron_vec, outer, trace_product, vectorize, CMatrix, CVector,
};
use crate::states::{haar_state, haar_unitary, werner_separable, PureState};

/// The three average survive probabilities (joint, subsystem A, subsystem B)
/// with standard errors. `shots_per_setting == 0` marks exact expectation
/// values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SurvivalTriple {
    pub f_ab: f64,
    pub f_a: f64,
    pub f_b: f64,
    pub se_ab: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub n_settings: usize,
    pub shots_per_setting: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Shots,
}

/// Where the product inputs come from: independent Haar sampling, a product
/// of state 2-designs, or twirling a fixed reference pair by Haar or
/// Clifford unitaries.
#[derive(Debug, Clone)]
pub enum InputSource {
    HaarProduct,
    DesignProduct { a: StateDesign, b: StateDesign },
    TwirlHaar,
    TwirlClifford,
}

#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub mode: Mode,
    pub source: InputSource,
    /// Number of sampled settings for the Haar-based sources; enumerated
    /// sources (designs, Clifford pairs) ignore it.
    pub n_settings: usize,
    pub shots: u64,
    pub seed: u64,
}

/// Default number of sampled settings for Haar-based protocols.
pub const DEFAULT_HAAR_SETTINGS: usize = 10_000;

impl ProtocolSpec {
    pub fn design_exact(a: StateDesign, b: StateDesign) -> Self {
        Self {
            mode: Mode::Exact,
            source: InputSource::DesignProduct { a, b },
            n_settings: 0,
            shots: 0,
            seed: 0,
        }
    }

    pub fn design_shots(a: StateDesign, b: StateDesign, shots: u64, seed: u64) -> Self {
        Self {
            mode: Mode::Shots,
            source: InputSource::DesignProduct { a, b },
            n_settings: 0,
            shots,
            seed,
        }
    }

    pub fn haar_exact(n_settings: usize, seed: u64) -> Self {
        Self {
            mode: Mode::Exact,
            source: InputSource::HaarProduct,
            n_settings,
            shots: 0,
            seed,
        }
    }

    pub fn twirl_haar(n_settings: usize, seed: u64) -> Self {
        Self {
            mode: Mode::Exact,
            source: InputSource::TwirlHaar,
            n_settings,
            shots: 0,
            seed,
        }
    }

    pub fn twirl_clifford() -> Self {
        Self {
            mode: Mode::Exact,
            source: InputSource::TwirlClifford,
            n_settings: 0,
            shots: 0,
            seed: 0,
        }
    }

    pub fn describe(&self) -> String {
        let source = match &self.source {
            InputSource::HaarProduct => format!("haar-product({})", self.n_settings),
            InputSource::DesignProduct { a, b } => {
                format!("design-product({}x{})", a.len(), b.len())
            }
            InputSource::TwirlHaar => format!("twirl-haar({})", self.n_settings),
            InputSource::TwirlClifford => "twirl-clifford".to_string(),
        };
        match self.mode {
            Mode::Exact => format!("{source}:exact"),
            Mode::Shots => format!("{source}:shots({})", self.shots),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.mode == Mode::Shots && self.shots == 0 {
            return Err(Error::InvalidProtocol(
                "shots mode requires shots >= 1".into(),
            ));
        }
        let sampled = matches!(
            self.source,
            InputSource::HaarProduct | InputSource::TwirlHaar
        );
        if sampled && self.n_settings == 0 {
            return Err(Error::InvalidProtocol(
                "sampled protocols require n_settings >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Survive probabilities of one product setting. For the Kraus list {E_m}
/// the three numbers are Σ_m |⟨ψ⊗φ|E_m|in⟩|² and the two one-sided
/// contractions; the unnormalized-input variants of the process-matrix
/// protocols reuse the same kernel.
pub(crate) fn pointwise_kernel(
    kraus: &[CMatrix],
    input: &CVector,
    psi: &CVector,
    phi: &CVector,
) -> (f64, f64, f64) {
    let da = psi.len();
    let db = phi.len();
    debug_assert_eq!(input.len(), da * db);
    let (mut f_ab, mut f_a, mut f_b) = (0.0, 0.0, 0.0);
    let mut col_acc = vec![Complex64::ZERO; db];
    for e in kraus {
        let v = e * input;
        col_acc.iter_mut().for_each(|z| *z = Complex64::ZERO);
        let mut joint = Complex64::ZERO;
        for a in 0..da {
            let pa = psi[a].conj();
            let mut row = Complex64::ZERO;
            for b in 0..db {
                let vab = v[a * db + b];
                row += phi[b].conj() * vab;
                col_acc[b] += pa * vab;
            }
            f_b += row.norm_sqr();
            joint += pa * row;
        }
        f_a += col_acc.iter().map(|z| z.norm_sqr()).sum::<f64>();
        f_ab += joint.norm_sqr();
    }
    (f_ab, f_a, f_b)
}

/// Exact survive probabilities for one product input Ψ⊗Φ:
/// (Tr[(Ψ⊗Φ)Λ(Ψ⊗Φ)], Tr[(Ψ⊗I)Λ(Ψ⊗Φ)], Tr[(I⊗Φ)Λ(Ψ⊗Φ)]).
pub fn survival_probs_pointwise(
    channel: &KrausChannel,
    psi: &PureState,
    phi: &PureState,
) -> Result<(f64, f64, f64)> {
    let expected = psi.dim() * phi.dim();
    if channel.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: channel.dim(),
        });
    }
    let input = kron_vec(psi.amplitudes(), phi.amplitudes());
    Ok(pointwise_kernel(
        channel.kraus(),
        &input,
        psi.amplitudes(),
        phi.amplitudes(),
    ))
}

struct Accumulated {
    mean: [f64; 3],
    se: [f64; 3],
    n: usize,
}

/// Enumerated settings (designs, Clifford pairs): exact mean over all
/// settings, or per-setting binomial sampling in shots mode.
fn run_enumerated(
    channel: &KrausChannel,
    settings: &[(CVector, CVector)],
    mode: Mode,
    shots: u64,
    seed: u64,
) -> Accumulated {
    let values: Vec<[f64; 3]> = settings
        .par_iter()
        .enumerate()
        .map(|(idx, (psi, phi))| {
            let input = kron_vec(psi, phi);
            let (p_ab, p_a, p_b) = pointwise_kernel(channel.kraus(), &input, psi, phi);
            match mode {
                Mode::Exact => [p_ab, p_a, p_b],
                Mode::Shots => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(idx as u64);
                    [p_ab, p_a, p_b].map(|p| sample_success_rate(p, shots, &mut rng))
                }
            }
        })
        .collect();

    let n = settings.len();
    let mut mean = [0.0; 3];
    for v in &values {
        for k in 0..3 {
            mean[k] += v[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let se = match mode {
        Mode::Exact => [0.0; 3],
        Mode::Shots => {
            // independent binomial noise per setting
            let mut var = [0.0; 3];
            for v in &values {
                for k in 0..3 {
                    let p = v[k].clamp(0.0, 1.0);
                    var[k] += p * (1.0 - p) / shots as f64;
                }
            }
            var.map(|v| (v / (n * n) as f64).sqrt())
        }
    };
    Accumulated { mean, se, n }
}

/// Sampled settings (Haar product states or Haar twirling): Monte Carlo over
/// `n_settings` independent streams; the standard error is the sample
/// standard deviation of the per-setting values divided by √n.
fn run_sampled<F>(
    channel: &KrausChannel,
    sample_setting: F,
    n_settings: usize,
    mode: Mode,
    shots: u64,
    seed: u64,
) -> Accumulated
where
    F: Fn(&mut ChaCha8Rng) -> (CVector, CVector) + Sync,
{
    let values: Vec<[f64; 3]> = (0..n_settings)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let (psi, phi) = sample_setting(&mut rng);
            let input = kron_vec(&psi, &phi);
            let (p_ab, p_a, p_b) = pointwise_kernel(channel.kraus(), &input, &psi, &phi);
            match mode {
                Mode::Exact => [p_ab, p_a, p_b],
                Mode::Shots => [p_ab, p_a, p_b].map(|p| sample_success_rate(p, shots, &mut rng)),
            }
        })
        .collect();

    let n = n_settings as f64;
    let mut sum = [0.0; 3];
    let mut sumsq = [0.0; 3];
    for v in &values {
        for k in 0..3 {
            sum[k] += v[k];
            sumsq[k] += v[k] * v[k];
        }
    }
    let mean = sum.map(|s| s / n);
    let mut se = [0.0; 3];
    if n_settings > 1 {
        for k in 0..3 {
            let var = (sumsq[k] - n * mean[k] * mean[k]).max(0.0) / (n - 1.0);
            se[k] = (var / n).sqrt();
        }
    }
    Accumulated {
        mean,
        se,
        n: n_settings,
    }
}

fn sample_success_rate(p: f64, shots: u64, rng: &mut ChaCha8Rng) -> f64 {
    debug_assert!(
        (-1e-9..=1.0 + 1e-9).contains(&p),
        "survive probability {p} outside [0,1]"
    );
    let p = p.clamp(0.0, 1.0);
    let draw = Binomial::new(shots, p).expect("valid binomial parameters");
    rng.sample(draw) as f64 / shots as f64
}

/// Runs the selected protocol and returns the averaged triple.
pub fn estimate_triple(channel: &KrausChannel, spec: &ProtocolSpec) -> Result<SurvivalTriple> {
    spec.validate()?;
    let d = channel.subsystem_dim()?;

    let acc = match &spec.source {
        InputSource::DesignProduct { a, b } => {
            for design in [a, b] {
                if design.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: design.dim(),
                    });
                }
                let report = design.verify();
                if !report.pass {
                    return Err(Error::InvalidDesign(format!(
                        "design fails the 2-design check (deviation {:.3e})",
                        report.max_deviation
                    )));
                }
            }
            let settings: Vec<(CVector, CVector)> = a
                .states()
                .iter()
                .flat_map(|sa| {
                    b.states()
                        .iter()
                        .map(move |sb| (sa.amplitudes().clone(), sb.amplitudes().clone()))
                })
                .collect();
            run_enumerated(channel, &settings, spec.mode, spec.shots, spec.seed)
        }
        InputSource::TwirlClifford => {
            if d != 2 {
                return Err(Error::UnsupportedClifford(d));
            }
            let group = CliffordGroup::qubit();
            let psi0 = PureState::basis_state(d, 0);
            let phi0 = PureState::basis_state(d, 0);
            let mut settings: Vec<(CVector, CVector)> =
                Vec::with_capacity(group.len() * group.len());
            for ci in group.elements() {
                let pa = ci * psi0.amplitudes();
                for cj in group.elements() {
                    settings.push((pa.clone(), cj * phi0.amplitudes()));
                }
            }
            run_enumerated(channel, &settings, spec.mode, spec.shots, spec.seed)
        }
        InputSource::HaarProduct => run_sampled(
            channel,
            |rng| {
                let psi = haar_state(d, rng);
                let phi = haar_state(d, rng);
                (psi.amplitudes().clone(), phi.amplitudes().clone())
            },
            spec.n_settings,
            spec.mode,
            spec.shots,
            spec.seed,
        ),
        InputSource::TwirlHaar => {
            let psi0 = PureState::basis_state(d, 0);
            let phi0 = PureState::basis_state(d, 0);
            run_sampled(
                channel,
                move |rng| {
                    let u = haar_unitary(d, rng);
                    let v = haar_unitary(d, rng);
                    (u * psi0.amplitudes(), v * phi0.amplitudes())
                },
                spec.n_settings,
                spec.mode,
                spec.shots,
                spec.seed,
            )
        }
    };

    Ok(SurvivalTriple {
        f_ab: acc.mean[0],
        f_a: acc.mean[1],
        f_b: acc.mean[2],
        se_ab: acc.se[0],
        se_a: acc.se[1],
        se_b: acc.se[2],
        n_settings: acc.n,
        shots_per_setting: if spec.mode == Mode::Shots { spec.shots } else { 0 },
    })
}

/// Exact triple from the superoperator expectations f̄_α = Tr[F̂_α λ] with
/// F̂_AB = β(ρ_W⊗ρ_W)β, F̂_A = β(ρ_W ⊗ |I⟩⟩⟨⟨I|/D)β and the mirrored F̂_B.
pub fn superop_triple_exact(channel: &KrausChannel) -> Result<SurvivalTriple> {
    let d = channel.subsystem_dim()?;
    let beta = factor_swap(d);
    let rho_w = werner_separable(d).into_matrix();
    let vi = vectorize(&identity(d));
    let proj_i = outer(&vi, &vi) / c64r(d as f64);
    let lambda = channel.superoperator();

    let expectation = |left: &CMatrix, right: &CMatrix| {
        let fhat = &beta * left.kronecker(right) * &beta;
        trace_product(&fhat, lambda.matrix()).re
    };

    Ok(SurvivalTriple {
        f_ab: expectation(&rho_w, &rho_w),
        f_a: expectation(&rho_w, &proj_i),
        f_b: expectation(&proj_i, &rho_w),
        se_ab: 0.0,
        se_a: 0.0,
        se_b: 0.0,
        n_settings: 0,
        shots_per_setting: 0,
    })
}

/// Entanglement fidelity from the survive-probability triple:
/// (1 + (D+1)²·f̄_AB − (D+1)(f̄_A + f̄_B)) / D².
pub fn entanglement_fidelity_from_triple(triple: &SurvivalTriple, d: usize) -> f64 {
    let dp1 = d as f64 + 1.0;
    (1.0 + dp1 * dp1 * triple.f_ab - dp1 * (triple.f_a + triple.f_b)) / (d * d) as f64
}

/// Average fidelity from the survive-probability triple:
/// (2 + (D+1)²·f̄_AB − (D+1)(f̄_A + f̄_B)) / (D²+1).
pub fn average_fidelity_from_triple(triple: &SurvivalTriple, d: usize) -> f64 {
    let dp1 = d as f64 + 1.0;
    (2.0 + dp1 * dp1 * triple.f_ab - dp1 * (triple.f_a + triple.f_b)) / ((d * d) as f64 + 1.0)
}

/// Protocols for the single-system average fidelity.
#[derive(Debug, Clone)]
pub enum SingleSystemProtocol {
    Haar { n_settings: usize, seed: u64 },
    Clifford,
    Design(StateDesign),
}

fn single_pointwise(kraus: &[CMatrix], psi: &CVector) -> f64 {
    kraus
        .iter()
        .map(|e| psi.dotc(&(e * psi)).norm_sqr())
        .sum()
}

/// Average fidelity of a single-system channel via the chosen protocol.
pub fn single_system_avg_fidelity(
    channel: &KrausChannel,
    protocol: &SingleSystemProtocol,
) -> Result<f64> {
    let d = channel.dim();
    match protocol {
        SingleSystemProtocol::Haar { n_settings, seed } => {
            if *n_settings == 0 {
                return Err(Error::InvalidProtocol("n_settings must be >= 1".into()));
            }
            let values: Vec<f64> = (0..*n_settings)
                .into_par_iter()
                .map(|idx| {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(idx as u64);
                    single_pointwise(channel.kraus(), haar_state(d, &mut rng).amplitudes())
                })
                .collect();
            Ok(values.iter().sum::<f64>() / *n_settings as f64)
        }
        SingleSystemProtocol::Clifford => {
            if d != 2 {
                return Err(Error::UnsupportedClifford(d));
            }
            let group = CliffordGroup::qubit();
            let psi0 = PureState::basis_state(d, 0);
            let total: f64 = group
                .elements()
                .iter()
                .map(|c| single_pointwise(channel.kraus(), &(c * psi0.amplitudes())))
                .sum();
            Ok(total / group.len() as f64)
        }
        SingleSystemProtocol::Design(design) => {
            if design.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: design.dim(),
                });
            }
            let total: f64 = design
                .states()
                .iter()
                .map(|s| single_pointwise(channel.kraus(), s.amplitudes()))
                .sum();
            Ok(total / design.len() as f64)
        }
    }
}

/// Machine-readable estimation outcome; field order is fixed for
/// reproducible report diffs.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationReport {
    pub tool_version: String,
    pub channel_id: String,
    pub protocol: String,
    pub subsystem_dim: usize,
    pub seed: u64,
    pub triple: SurvivalTriple,
    pub f_ent: f64,
    pub f_avg: f64,
    pub f_avg_exact: Option<f64>,
    /// Set when a combined fidelity leaves [0, 1]; values are propagated,
    /// never clipped.
    pub out_of_range: bool,
    pub config: serde_json::Value,
    pub runtime_ms: u64,
}

impl EstimationReport {
    pub fn from_triple(
        channel_id: &str,
        protocol: &str,
        d: usize,
        seed: u64,
        triple: SurvivalTriple,
        f_avg_exact: Option<f64>,
    ) -> Self {
        let f_ent = entanglement_fidelity_from_triple(&triple, d);
        let f_avg = average_fidelity_from_triple(&triple, d);
        let out_of_range = !(0.0..=1.0).contains(&f_ent) || !(0.0..=1.0).contains(&f_avg);
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            channel_id: channel_id.to_string(),
            protocol: protocol.to_string(),
            subsystem_dim: d,
            seed,
            triple,
            f_ent,
            f_avg,
            f_avg_exact,
            out_of_range,
            config: serde_json::Value::Null,
            runtime_ms: 0,
        }
    }
}
