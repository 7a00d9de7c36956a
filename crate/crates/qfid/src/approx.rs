//! Reduced-input approximation of the survive probabilities: M ≤ D² SIC
//! states per side instead of a full product 2-design, with the closed-form
//! Hilbert-Schmidt error of the approximated Werner state and its bound.
//!
//! Norms here follow the squared convention ‖X‖ = Tr[XX†] (no square root)
//! used by the error analysis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channels::KrausChannel;
use crate::designs::StateDesign;
use crate::error::{Error, Result};
use crate::estimators::{pointwise_kernel, SurvivalTriple};
use crate::linalg::{
    c64r, factor_swap, hs_norm_sq, identity, kron_vec, outer, trace_product, vectorize, CMatrix,
};
use crate::states::{werner_separable, PureState};

/// A choice of M distinct SIC states reused on both sides of the product
/// input.
#[derive(Debug, Clone)]
pub struct SubsetPlan {
    d: usize,
    indices: Vec<usize>,
    states: Vec<PureState>,
}

impl SubsetPlan {
    /// First M states in the fixed SIC construction order.
    pub fn prefix(d: usize, m: usize) -> Result<Self> {
        Self::from_indices(d, (0..m).collect())
    }

    /// Seeded random M-subset of the SIC set.
    pub fn random_subset(d: usize, m: usize, seed: u64) -> Result<Self> {
        let sic = StateDesign::sic(d)?;
        validate_m(d, m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen = rand::seq::index::sample(&mut rng, sic.len(), m).into_vec();
        Self::from_sic(d, sic, chosen)
    }

    pub fn from_indices(d: usize, indices: Vec<usize>) -> Result<Self> {
        let sic = StateDesign::sic(d)?;
        validate_m(d, indices.len())?;
        Self::from_sic(d, sic, indices)
    }

    fn from_sic(d: usize, sic: StateDesign, indices: Vec<usize>) -> Result<Self> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return Err(Error::InvalidPlan("subset indices must be distinct".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= sic.len()) {
            return Err(Error::InvalidPlan(format!(
                "index {bad} outside the SIC set of {} states",
                sic.len()
            )));
        }
        let states = indices.iter().map(|&i| sic.states()[i].clone()).collect();
        Ok(Self { d, indices, states })
    }

    pub fn subsystem_dim(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }
}

fn validate_m(d: usize, m: usize) -> Result<()> {
    if m <= 1 || m > d * d {
        return Err(Error::InvalidPlan(format!(
            "M must satisfy 1 < M <= D² (got M = {m}, D = {d})"
        )));
    }
    Ok(())
}

/// The three (1/M²) double sums over the chosen subset; exact arithmetic.
pub fn approx_triple(channel: &KrausChannel, plan: &SubsetPlan) -> Result<SurvivalTriple> {
    let d = channel.subsystem_dim()?;
    if d != plan.d {
        return Err(Error::DimensionMismatch {
            expected: plan.d,
            actual: d,
        });
    }
    let m = plan.m();
    let mut mean = [0.0; 3];
    for si in plan.states() {
        for sj in plan.states() {
            let input = kron_vec(si.amplitudes(), sj.amplitudes());
            let (p_ab, p_a, p_b) =
                pointwise_kernel(channel.kraus(), &input, si.amplitudes(), sj.amplitudes());
            mean[0] += p_ab;
            mean[1] += p_a;
            mean[2] += p_b;
        }
    }
    let n = (m * m) as f64;
    Ok(SurvivalTriple {
        f_ab: mean[0] / n,
        f_a: mean[1] / n,
        f_b: mean[2] / n,
        se_ab: 0.0,
        se_a: 0.0,
        se_b: 0.0,
        n_settings: m * m,
        shots_per_setting: 0,
    })
}

/// The three approximated superoperators (F̂_AB, F̂_A, F̂_B): β-conjugated
/// tensor squares of the subset moments.
pub fn fhat_approx(plan: &SubsetPlan) -> [CMatrix; 3] {
    let d = plan.d;
    let beta = factor_swap(d);
    let m = plan.m() as f64;

    // S = (1/M) Σ |Ψ_i⟩⟩⟨⟨Ψ_i|  and  T = (1/M) Σ |Ψ_i⟩⟩⟨⟨I|
    let vi = vectorize(&identity(d));
    let mut s = CMatrix::zeros(d * d, d * d);
    let mut t = CMatrix::zeros(d * d, d * d);
    for state in plan.states() {
        let v = vectorize(&state.projector());
        s += outer(&v, &v);
        t += outer(&v, &vi);
    }
    s /= c64r(m);
    t /= c64r(m);

    let conj = |left: &CMatrix, right: &CMatrix| &beta * left.kronecker(right) * &beta;
    [conj(&s, &s), conj(&s, &t), conj(&t, &s)]
}

/// Δ_appr through the reflection form (1/M²) Σ |Ψ_i⊗Ψ_j)(R_i⊗R_j − I⊗²|
/// with R_i = (D+1)Ψ_i − I.
pub fn delta_approx(plan: &SubsetPlan) -> CMatrix {
    let d = plan.d;
    let n4 = d * d * d * d;
    let eye = identity(d);
    let joint_eye = identity(d * d);
    let dp1 = c64r(d as f64 + 1.0);
    let mut acc = CMatrix::zeros(n4, n4);
    for si in plan.states() {
        let ri = si.projector() * dp1 - &eye;
        for sj in plan.states() {
            let rj = sj.projector() * dp1 - &eye;
            let ket = vectorize(&si.projector().kronecker(&sj.projector()));
            let bra = vectorize(&(ri.kronecker(&rj) - &joint_eye));
            acc += outer(&ket, &bra);
        }
    }
    acc / c64r((plan.m() * plan.m()) as f64)
}

/// Δ_appr assembled from the approximated superoperators,
/// (D+1)²F̂_AB − (D+1)(F̂_A + F̂_B); must agree with [`delta_approx`].
pub fn delta_approx_from_fhat(plan: &SubsetPlan) -> CMatrix {
    let dp1 = plan.d as f64 + 1.0;
    let [f_ab, f_a, f_b] = fhat_approx(plan);
    f_ab * c64r(dp1 * dp1) - (f_a + f_b) * c64r(dp1)
}

/// The exact Δ operator (I^⊗4 − |I⊗²)(I⊗²|)/D², recovered by any plan with
/// M = D².
pub fn delta_exact(d: usize) -> CMatrix {
    let vi = vectorize(&identity(d * d));
    (identity(d * d * d * d) - outer(&vi, &vi)) / c64r((d * d) as f64)
}

/// Closed form of the squared Hilbert-Schmidt norm Tr[Δ_appr Δ_appr†] for a
/// SIC subset:
/// [D⁴(D+2)² + (D²−2)D²] / [M²(1+D)²] − 4D/[M(1+D)] + (D−1)/(D+1).
pub fn delta_norm_closed_form(d: usize, m: usize) -> Result<f64> {
    validate_m(d, m)?;
    let df = d as f64;
    let mf = m as f64;
    Ok(
        (df.powi(4) * (df + 2.0).powi(2) + (df * df - 2.0) * df * df)
            / (mf * mf * (1.0 + df).powi(2))
            - 4.0 * df / (mf * (1.0 + df))
            + (df - 1.0) / (df + 1.0),
    )
}

/// Upper bound of the approximation error for 1 < M < D²: (1+D)²/(M²D²).
pub fn error_bound(d: usize, m: usize) -> f64 {
    let df = d as f64;
    let mf = m as f64;
    (1.0 + df).powi(2) / (mf * mf * df * df)
}

/// The approximated Werner state 2/(D²(D²+1))·|I⊗²)(I⊗²| + Δ_appr/(D²+1).
pub fn rho_approx(plan: &SubsetPlan) -> CMatrix {
    let d2 = (plan.d * plan.d) as f64;
    let vi = vectorize(&identity(plan.d * plan.d));
    let proj = outer(&vi, &vi);
    proj * c64r(2.0 / (d2 * (d2 + 1.0))) + delta_approx(plan) * c64r(1.0 / (d2 + 1.0))
}

/// Summary of the approximation quality for one (D, M) plan; fidelity fields
/// are present when a channel was supplied.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub d: usize,
    pub m: usize,
    /// Tr[Δ_appr Δ_appr†]
    pub hs_norm_delta: f64,
    /// Squared Hilbert-Schmidt distance between the Werner state and its
    /// approximation.
    pub hs_error: f64,
    /// (1+D)²/(M²D²); binding for 1 < M < D².
    pub bound: f64,
    pub exact_f_avg: Option<f64>,
    pub approx_f_avg: Option<f64>,
}

/// Computes the Hilbert-Schmidt error of the approximated Werner state both
/// directly and through the norm identity, checks their agreement, and
/// reports it together with the bound.
pub fn hs_error_report(plan: &SubsetPlan, channel: Option<&KrausChannel>) -> Result<ApproxReport> {
    let d = plan.d;
    let delta = delta_approx(plan);
    let hs_norm_delta = hs_norm_sq(&delta);

    let direct = {
        let werner = werner_separable(d * d).into_matrix();
        hs_norm_sq(&(werner - rho_approx(plan)))
    };
    let d2 = (d * d) as f64;
    let via_norm = (hs_norm_delta - 2.0 * (d2 - 1.0) / d2) / (d2 + 1.0).powi(2);
    debug_assert!(
        (direct - via_norm).abs() < 1e-10,
        "error routes disagree: {direct} vs {via_norm}"
    );

    let (exact_f_avg, approx_f_avg) = match channel {
        Some(c) => (
            Some(c.average_fidelity_exact()?),
            Some(approx_avg_fidelity(c, plan)?),
        ),
        None => (None, None),
    };

    Ok(ApproxReport {
        d,
        m: plan.m(),
        hs_norm_delta,
        hs_error: direct,
        bound: error_bound(d, plan.m()),
        exact_f_avg,
        approx_f_avg,
    })
}

/// Approximated average fidelity Tr[ρ̃_appr λ].
pub fn approx_avg_fidelity(channel: &KrausChannel, plan: &SubsetPlan) -> Result<f64> {
    let d = channel.subsystem_dim()?;
    if d != plan.d {
        return Err(Error::DimensionMismatch {
            expected: plan.d,
            actual: d,
        });
    }
    let lambda = channel.superoperator();
    Ok(trace_product(&rho_approx(plan), lambda.matrix()).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{build_zoo_channel, ZooChannel};
    use crate::estimators::superop_triple_exact;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;

    #[test]
    fn plan_validation() {
        assert!(SubsetPlan::prefix(2, 1).is_err());
        assert!(SubsetPlan::prefix(2, 5).is_err());
        assert!(SubsetPlan::prefix(4, 3).is_err()); // no SIC fiducial
        assert!(SubsetPlan::from_indices(2, vec![0, 0]).is_err());
        assert!(SubsetPlan::from_indices(2, vec![0, 7]).is_err());
        let plan = SubsetPlan::prefix(3, 5).unwrap();
        assert_eq!(plan.m(), 5);
        assert_eq!(plan.indices(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn approx_triple_identity_channel() {
        let plan = SubsetPlan::prefix(2, 3).unwrap();
        let channel = KrausChannel::identity_channel(4);
        let t = approx_triple(&channel, &plan).unwrap();
        assert!((t.f_ab - 1.0).abs() < 1e-12);
        assert!((t.f_a - 1.0).abs() < 1e-12);
        assert!((t.f_b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_subset_recovers_exact_triple() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for d in [2usize, 3] {
            let plan = SubsetPlan::prefix(d, d * d).unwrap();
            let channel = KrausChannel::random_kraus(d * d, 3, &mut rng);
            let approx = approx_triple(&channel, &plan).unwrap();
            let exact = superop_triple_exact(&channel).unwrap();
            assert!((approx.f_ab - exact.f_ab).abs() < 1e-10);
            assert!((approx.f_a - exact.f_a).abs() < 1e-10);
            assert!((approx.f_b - exact.f_b).abs() < 1e-10);
        }
    }

    #[test]
    fn approx_triple_fully_depolarizing() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let plan = SubsetPlan::prefix(2, 2).unwrap();
        let channel =
            build_zoo_channel(&ZooChannel::GlobalDepolarizing { p: 1.0 }, 2, &mut rng).unwrap();
        let t = approx_triple(&channel, &plan).unwrap();
        assert!((t.f_ab - 0.25).abs() < 1e-12);
        assert!((t.f_a - 0.5).abs() < 1e-12);
        assert!((t.f_b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn approx_triple_matches_fhat_expectations() {
        // Tr[F̂_α λ] is the superoperator route to the same averages.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let plan = SubsetPlan::prefix(2, 3).unwrap();
        let channel = KrausChannel::random_kraus(4, 2, &mut rng);
        let lambda = channel.superoperator();
        let [f_ab, f_a, f_b] = fhat_approx(&plan);
        let t = approx_triple(&channel, &plan).unwrap();
        assert!((trace_product(&f_ab, lambda.matrix()).re - t.f_ab).abs() < 1e-12);
        assert!((trace_product(&f_a, lambda.matrix()).re - t.f_a).abs() < 1e-12);
        assert!((trace_product(&f_b, lambda.matrix()).re - t.f_b).abs() < 1e-12);
    }

    #[test]
    fn delta_two_routes_agree() {
        for d in [2usize, 3] {
            for m in 2..=(d * d) {
                let plan = SubsetPlan::prefix(d, m).unwrap();
                let a = delta_approx(&plan);
                let b = delta_approx_from_fhat(&plan);
                assert!(max_abs_diff(&a, &b) < 1e-12, "d={d} m={m}");
            }
        }
    }

    #[test]
    fn full_subset_delta_is_exact_delta() {
        for d in [2usize, 3] {
            let plan = SubsetPlan::prefix(d, d * d).unwrap();
            assert!(max_abs_diff(&delta_approx(&plan), &delta_exact(d)) < 1e-12);
        }
    }

    #[test]
    fn cross_terms_with_exact_delta() {
        // Tr[ΔΔ†] = Tr[ΔΔ_appr†] = Tr[Δ_appr Δ†] = 2(D²−1)/D².
        for d in [2usize, 3] {
            let d2 = (d * d) as f64;
            let expect = 2.0 * (d2 - 1.0) / d2;
            let delta = delta_exact(d);
            assert!((hs_norm_sq(&delta) - expect).abs() < 1e-10);
            for m in 2..=(d * d) {
                let plan = SubsetPlan::prefix(d, m).unwrap();
                let appr = delta_approx(&plan);
                let cross_a = trace_product(&delta, &appr.adjoint()).re;
                let cross_b = trace_product(&appr, &delta.adjoint()).re;
                assert!((cross_a - expect).abs() < 1e-10, "d={d} m={m}");
                assert!((cross_b - expect).abs() < 1e-10, "d={d} m={m}");
            }
        }
    }

    #[test]
    fn closed_form_norm_matches_direct_evaluation() {
        for d in [2usize, 3] {
            for m in 2..=(d * d) {
                let formula = delta_norm_closed_form(d, m).unwrap();
                let plan = SubsetPlan::prefix(d, m).unwrap();
                let direct = hs_norm_sq(&delta_approx(&plan));
                assert!(
                    (formula - direct).abs() < 1e-10,
                    "d={d} m={m}: {formula} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn closed_form_norm_is_subset_independent() {
        // SIC overlaps are constant, so the norm cannot depend on which
        // subset is chosen.
        for d in [2usize, 3] {
            for m in 2..(d * d) {
                let formula = delta_norm_closed_form(d, m).unwrap();
                for seed in 0..4u64 {
                    let plan = SubsetPlan::random_subset(d, m, seed).unwrap();
                    let direct = hs_norm_sq(&delta_approx(&plan));
                    assert!(
                        (formula - direct).abs() < 1e-10,
                        "d={d} m={m} seed={seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_known_values() {
        // M = D² collapses to the exact norm 2(D²−1)/D².
        assert!((delta_norm_closed_form(2, 4).unwrap() - 1.5).abs() < 1e-12);
        assert!((delta_norm_closed_form(3, 9).unwrap() - 16.0 / 9.0).abs() < 1e-12);
        // the smallest qubit subset
        assert!((delta_norm_closed_form(2, 2).unwrap() - 19.0 / 3.0).abs() < 1e-12);
        assert!(delta_norm_closed_form(2, 1).is_err());
        assert!(delta_norm_closed_form(2, 5).is_err());
    }

    #[test]
    fn error_report_values_and_bound() {
        // D=2, M=2: error = (19/3 − 3/2)/25 = 29/150, bound = 9/16.
        let plan = SubsetPlan::prefix(2, 2).unwrap();
        let report = hs_error_report(&plan, None).unwrap();
        assert!((report.hs_norm_delta - 19.0 / 3.0).abs() < 1e-10);
        assert!((report.hs_error - 29.0 / 150.0).abs() < 1e-10);
        assert!((report.bound - 0.5625).abs() < 1e-12);
        assert!(report.hs_error < report.bound);

        // M = D² has zero error.
        for d in [2usize, 3] {
            let plan = SubsetPlan::prefix(d, d * d).unwrap();
            let report = hs_error_report(&plan, None).unwrap();
            assert!(report.hs_error.abs() < 1e-12, "d={d}: {}", report.hs_error);
        }

        // strictly positive and below the bound in between
        for d in [2usize, 3] {
            for m in 2..(d * d) {
                let plan = SubsetPlan::prefix(d, m).unwrap();
                let report = hs_error_report(&plan, None).unwrap();
                assert!(report.hs_error > 0.0, "d={d} m={m}");
                assert!(
                    report.hs_error < report.bound,
                    "d={d} m={m}: {} !< {}",
                    report.hs_error,
                    report.bound
                );
            }
        }
    }

    #[test]
    fn approx_fidelity_identity_and_full_subset() {
        let channel = KrausChannel::identity_channel(4);
        for m in 2..=4 {
            let plan = SubsetPlan::prefix(2, m).unwrap();
            // the approximated Werner state keeps unit trace
            assert!((rho_approx(&plan).trace().re - 1.0).abs() < 1e-12);
            let f = approx_avg_fidelity(&channel, &plan).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "m={m}: {f}");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(74);
        for d in [2usize, 3] {
            let channel = KrausChannel::random_kraus(d * d, 3, &mut rng);
            let plan = SubsetPlan::prefix(d, d * d).unwrap();
            let approx = approx_avg_fidelity(&channel, &plan).unwrap();
            let exact = channel.average_fidelity_exact().unwrap();
            assert!((approx - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn approx_fidelity_deviation_is_reported_not_asserted() {
        // For reduced subsets the deviation from the exact fidelity is
        // channel dependent; the report simply carries both numbers.
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let channel = KrausChannel::random_kraus(4, 2, &mut rng);
        let plan = SubsetPlan::prefix(2, 2).unwrap();
        let report = hs_error_report(&plan, Some(&channel)).unwrap();
        let exact = report.exact_f_avg.unwrap();
        let approx = report.approx_f_avg.unwrap();
        assert!(exact.is_finite() && approx.is_finite());
        println!("d=2 m=2 |approx - exact| = {:.3e}", (approx - exact).abs());
    }
}
