//! Stationary-state statistics of counting observables: entropy production
//! and dynamical activity, exact finite-horizon mean and variance, tilted
//! full-counting-statistics cross-checks, and quantum Fisher information
//! rates of the two perturbation protocols.

use serde::Serialize;

use crate::bounds;
use crate::config::{FcsConfig, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{dagger, expm, trace, C64, CMat};
use crate::liouvillian::{build_tilted, IntegratedPropagators, LiouvillianBundle};
use crate::operators::{vectorize, vectorized_identity, ChannelId, CountingVector};

/// Provenance of an [`ObservableStats`] record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsMethod {
    ExactIntegral,
    FcsNumeric,
    MonteCarlo,
}

/// Mean, variance, and relative fluctuation of a counting observable at a
/// finite horizon. `relative_fluctuation = τ·Var/mean²` is reported only
/// when the mean is resolvable above the activity-scaled floor.
#[derive(Debug, Clone, Serialize)]
pub struct ObservableStats {
    pub mean: f64,
    pub variance: f64,
    pub horizon: f64,
    pub relative_fluctuation: Option<f64>,
    pub method: StatsMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_std_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_std_err: Option<f64>,
}

impl ObservableStats {
    pub fn new(
        mean: f64,
        variance: f64,
        horizon: f64,
        activity: f64,
        method: StatsMethod,
    ) -> Self {
        let mean_tol = Tolerances::default().mean_tol_factor * activity * horizon;
        let relative_fluctuation = if mean.abs() > mean_tol {
            Some(horizon * variance / (mean * mean))
        } else {
            None
        };
        Self {
            mean,
            variance,
            horizon,
            relative_fluctuation,
            method,
            mean_std_err: None,
            variance_std_err: None,
        }
    }
}

/// Entropy production rate, dynamical activity, and the per-channel traffic
/// they are built from.
#[derive(Debug, Clone, Serialize)]
pub struct ThermoRates {
    pub entropy_rate: f64,
    pub activity: f64,
    pub traffic: Vec<(ChannelId, f64)>,
}

/// Per-channel stationary traffic `t_k = tr(L_k π L_k†)` and the activity
/// `a = Σ_k t_k`.
pub fn channel_traffic(bundle: &LiouvillianBundle) -> Vec<(ChannelId, f64)> {
    let pi = bundle.stationary().entries();
    bundle
        .system()
        .jumps()
        .iter()
        .map(|j| {
            let l = j.entries();
            let t = trace(&l.dot(pi).dot(&dagger(l))).re;
            debug_assert!(t >= -1e-12, "negative traffic {t:.3e}");
            (j.channel_id(), t.max(0.0))
        })
        .collect()
}

pub fn activity(bundle: &LiouvillianBundle) -> f64 {
    channel_traffic(bundle).iter().map(|&(_, t)| t).sum()
}

/// `σ = Σ_k t_k Δs_k`; needs a pairing covering every channel. The result is
/// checked against the second law up to roundoff.
pub fn entropy_production_rate(bundle: &LiouvillianBundle) -> Result<f64> {
    let sys = bundle.system();
    let pairing = sys.pairing().ok_or(Error::NoPairing)?;
    let mut sigma = 0.0;
    for (id, t) in channel_traffic(bundle) {
        let (_, ds) = pairing
            .partner(id)
            .ok_or(Error::UnpairedChannel(id.0))?;
        sigma += t * ds;
    }
    if sigma < -1e-10 {
        return Err(Error::NumericalConsistency(format!(
            "entropy production rate {sigma:.3e} violates the second law"
        )));
    }
    Ok(sigma)
}

pub fn thermo_rates(bundle: &LiouvillianBundle) -> Result<ThermoRates> {
    let traffic = channel_traffic(bundle);
    let activity = traffic.iter().map(|&(_, t)| t).sum();
    let entropy_rate = entropy_production_rate(bundle)?;
    Ok(ThermoRates {
        entropy_rate,
        activity,
        traffic,
    })
}

/// Exact stationary mean `⟨φ⟩ = τ Σ_k c_k t_k`.
pub fn mean_observable(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
) -> Result<f64> {
    let weights = c.aligned(bundle.system())?;
    let rate: f64 = channel_traffic(bundle)
        .iter()
        .zip(&weights)
        .map(|(&(_, t), &ck)| ck * t)
        .sum();
    Ok(tau * rate)
}

/// The three self-adjoint operators built from jump operators and counting
/// weights: `J₁ = Σ c_k L_k†L_k`, `J₂ = Σ c_k² L_k†L_k`, `J_π = Σ c_k L_k π L_k†`.
pub(crate) fn counting_operators(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
) -> Result<(CMat, CMat, CMat)> {
    let sys = bundle.system();
    let weights = c.aligned(sys)?;
    let d = sys.dim();
    let pi = bundle.stationary().entries();
    let mut j1 = CMat::zeros((d, d));
    let mut j2 = CMat::zeros((d, d));
    let mut jpi = CMat::zeros((d, d));
    for (j, &ck) in sys.jumps().iter().zip(&weights) {
        if ck == 0.0 {
            continue;
        }
        let l = j.entries();
        let ldl = dagger(l).dot(l);
        j1 += &(&ldl * C64::new(ck, 0.0));
        j2 += &(&ldl * C64::new(ck * ck, 0.0));
        jpi += &(l.dot(pi).dot(&dagger(l)) * C64::new(ck, 0.0));
    }
    Ok((j1, j2, jpi))
}

/// Exact finite-horizon variance from the integral formula
/// `Var[φ] = τ⟨J₂,π⟩ + 2 ∫₀^τ (τ−t) ⟨e^{L̃t}(J̄₁), J_π⟩ dt`,
/// with the correlation integral evaluated through `K₂`.
pub fn variance_exact(bundle: &LiouvillianBundle, c: &CountingVector, tau: f64) -> Result<f64> {
    let props = bundle.propagators(tau)?;
    variance_exact_with(bundle, &props, c)
}

/// [`variance_exact`] reusing precomputed propagators at their horizon.
pub fn variance_exact_with(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    c: &CountingVector,
) -> Result<f64> {
    let tau = props.horizon;
    let weights = c.aligned(bundle.system())?;
    let traffic = channel_traffic(bundle);
    let j2_mean: f64 = traffic
        .iter()
        .zip(&weights)
        .map(|(&(_, t), &ck)| ck * ck * t)
        .sum();
    let j1_mean: f64 = traffic
        .iter()
        .zip(&weights)
        .map(|(&(_, t), &ck)| ck * t)
        .sum();

    let (j1, _, jpi) = counting_operators(bundle, c)?;
    let d = bundle.dim();
    let mut j1_bar = j1;
    for i in 0..d {
        j1_bar[[i, i]] -= C64::new(j1_mean, 0.0);
    }

    let corr_vec = props.k2.dot(&vectorize(&jpi)?);
    let corr: C64 = vectorize(&j1_bar)?
        .iter()
        .zip(corr_vec.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();

    let var = tau * j2_mean + 2.0 * corr.re;
    let scale = var.abs().max(1.0);
    if corr.im.abs() > 1e-10 * scale {
        return Err(Error::NumericalConsistency(format!(
            "variance has imaginary part {:.3e}",
            corr.im
        )));
    }
    if var < -1e-8 {
        return Err(Error::NumericalConsistency(format!(
            "negative variance {var:.3e}"
        )));
    }
    Ok(var.max(0.0))
}

/// Exact mean/variance packaged with the relative fluctuation.
pub fn observable_stats_exact(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
) -> Result<ObservableStats> {
    let props = bundle.propagators(tau)?;
    observable_stats_exact_with(bundle, &props, c)
}

pub fn observable_stats_exact_with(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    c: &CountingVector,
) -> Result<ObservableStats> {
    let tau = props.horizon;
    let mean = mean_observable(bundle, c, tau)?;
    let variance = variance_exact_with(bundle, props, c)?;
    Ok(ObservableStats::new(
        mean,
        variance,
        tau,
        activity(bundle),
        StatsMethod::ExactIntegral,
    ))
}

/// First and second moments from the tilted generating function.
#[derive(Debug, Clone, Serialize)]
pub struct FcsMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

/// Moments by numeric differentiation of `G_τ(u) = ⟨⟨1| e^{L̂_u τ} |π⟩⟩` on a
/// real-`u` central stencil with Richardson extrapolation.
pub fn moments_fcs(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
    order: usize,
) -> Result<FcsMoments> {
    if order == 0 || order > 2 {
        return Err(Error::OutOfDomain(format!(
            "moment order {order} not in {{1, 2}}"
        )));
    }
    if tau < 0.0 {
        return Err(Error::NegativeHorizon(tau));
    }
    let cfg = FcsConfig::default();
    let levels = cfg.richardson_levels;

    let sys = bundle.system();
    let one = vectorized_identity(bundle.dim());
    let pi_vec = bundle.stationary_vec();
    let g_at = |u: f64| -> Result<C64> {
        let tilted = build_tilted(sys, c, u)?;
        let prop = expm(&(&tilted.entries * C64::new(tau, 0.0)));
        let v = prop.dot(pi_vec);
        let g: C64 = one.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        if !g.re.is_finite() || !g.im.is_finite() {
            return Err(Error::NumericalConsistency(
                "tilted stencil evaluation non-finite".into(),
            ));
        }
        Ok(g)
    };

    // G at ±h/2^j, shared by both stencils.
    let mut plus = Vec::with_capacity(levels + 1);
    let mut minus = Vec::with_capacity(levels + 1);
    for j in 0..=levels {
        let h = cfg.base_step / (1 << j) as f64;
        plus.push(g_at(h)?);
        minus.push(g_at(-h)?);
    }

    // ⟨φ⟩ = Re[−i (G(h) − G(−h)) / 2h], error series in h².
    let first: Vec<f64> = (0..=levels)
        .map(|j| {
            let h = cfg.base_step / (1 << j) as f64;
            ((plus[j] - minus[j]) * C64::new(0.0, -1.0)).re / (2.0 * h)
        })
        .collect();
    // ⟨φ²⟩ = Re[−(G(h) − 2 + G(−h)) / h²]; G(0) = 1 exactly.
    let second: Vec<f64> = (0..=levels)
        .map(|j| {
            let h = cfg.base_step / (1 << j) as f64;
            -((plus[j] + minus[j] - C64::new(2.0, 0.0)).re) / (h * h)
        })
        .collect();

    let mean = richardson(&first);
    let second_moment = richardson(&second);
    Ok(FcsMoments {
        mean,
        second_moment,
        variance: second_moment - mean * mean,
    })
}

/// Richardson triangle for a central-difference sequence at steps
/// `h, h/2, …` whose error expands in powers of `h²`.
fn richardson(values: &[f64]) -> f64 {
    let mut row = values.to_vec();
    let mut len = row.len();
    let mut factor = 4.0;
    while len > 1 {
        for i in 0..len - 1 {
            row[i] = (factor * row[i + 1] - row[i]) / (factor - 1.0);
        }
        len -= 1;
        factor *= 4.0;
    }
    row[0]
}

/// Quantum Fisher information rate of the detailed-balance perturbation,
/// with the chain of analytic upper bounds it must satisfy.
#[derive(Debug, Clone, Serialize)]
pub struct QfiTkurRate {
    /// `Σ_k ℓ_k² t_k`.
    pub rate: f64,
    /// `(σ²/4a) Φ(σ/2a)⁻²`.
    pub phi_chain_bound: f64,
    /// `min(σ/2, a)`.
    pub min_chain_bound: f64,
}

pub fn qfi_tkur_rate(bundle: &LiouvillianBundle) -> Result<QfiTkurRate> {
    let coeffs = bounds::tkur_coefficients(bundle)?;
    let traffic = channel_traffic(bundle);
    let rate: f64 = coeffs
        .iter()
        .zip(&traffic)
        .map(|(&l, &(_, t))| l * l * t)
        .sum();
    let rates = thermo_rates(bundle)?;
    let (sigma, a) = (rates.entropy_rate, rates.activity);
    let phi_chain_bound = if sigma <= 0.0 {
        0.0
    } else {
        let phi = bounds::phi_inverse(sigma / (2.0 * a))?;
        sigma * sigma / (4.0 * a * phi * phi)
    };
    let min_chain_bound = (sigma / 2.0).min(a);
    Ok(QfiTkurRate {
        rate,
        phi_chain_bound,
        min_chain_bound,
    })
}

/// Quantum Fisher information rate of the global kinetic perturbation,
/// `ε² a` per unit time.
pub fn qfi_response_rate(bundle: &LiouvillianBundle, eps: f64) -> f64 {
    eps * eps * activity(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, MaserParams};
    use ndarray::array;

    fn maser_bundle(delta: f64) -> LiouvillianBundle {
        let p = MaserParams {
            delta,
            ..Default::default()
        };
        LiouvillianBundle::new(models::build_maser(&p).unwrap()).unwrap()
    }

    #[test]
    fn traffic_symmetric_two_state() {
        let chain = models::ClassicalChain::new(array![[0.0, 0.9], [0.9, 0.0]]).unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        let traffic = channel_traffic(&bundle);
        for &(_, t) in &traffic {
            assert!((t - 0.45).abs() < 1e-12);
        }
        assert!((activity(&bundle) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn traffic_vanishes_in_dark_state() {
        use crate::operators::{ChannelId, HermitianOperator, JumpOperator, OpenSystem};
        let h = HermitianOperator::new(CMat::zeros((2, 2))).unwrap();
        let mut l = CMat::zeros((2, 2));
        l[[0, 1]] = C64::new(1.0, 0.0);
        let sys =
            OpenSystem::new(h, vec![JumpOperator::new(ChannelId(1), l).unwrap()], None).unwrap();
        let bundle = LiouvillianBundle::new(sys).unwrap();
        assert!(activity(&bundle) < 1e-12);
    }

    #[test]
    fn activity_decreases_across_maser_sweep() {
        let a0 = activity(&maser_bundle(0.0));
        let a2 = activity(&maser_bundle(2.0));
        assert!(a0 > a2, "a(0) = {a0}, a(2) = {a2}");
    }

    #[test]
    fn entropy_production_zero_at_equilibrium() {
        // Detailed-balanced three-state chain: w_mn g_n = w_nm g_m.
        let g = [1.0, 2.0, 0.5];
        let mut rates = ndarray::Array2::zeros((3, 3));
        for m in 0..3 {
            for n in 0..3 {
                if m != n {
                    rates[[m, n]] = 0.8 / g[n]; // w_mn ∝ 1/g_n gives w_mn g_n = w_nm g_m
                }
            }
        }
        let emb =
            models::embed_classical(&models::ClassicalChain::new(rates).unwrap(), true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        let sigma = entropy_production_rate(&bundle).unwrap();
        assert!(sigma.abs() < 1e-12, "sigma = {sigma:.3e}");
    }

    #[test]
    fn entropy_production_positive_on_maser() {
        let bundle = maser_bundle(1.0);
        let sigma = entropy_production_rate(&bundle).unwrap();
        assert!(sigma > 0.0);
    }

    #[test]
    fn entropy_production_needs_pairing() {
        use crate::operators::{ChannelId, HermitianOperator, JumpOperator, OpenSystem};
        let h = HermitianOperator::new(CMat::zeros((2, 2))).unwrap();
        let mut l01 = CMat::zeros((2, 2));
        l01[[0, 1]] = C64::new(1.0, 0.0);
        let mut l10 = CMat::zeros((2, 2));
        l10[[1, 0]] = C64::new(0.5, 0.0);
        let sys = OpenSystem::new(
            h,
            vec![
                JumpOperator::new(ChannelId(1), l01).unwrap(),
                JumpOperator::new(ChannelId(2), l10).unwrap(),
            ],
            None,
        )
        .unwrap();
        let bundle = LiouvillianBundle::new(sys).unwrap();
        assert!(matches!(
            entropy_production_rate(&bundle),
            Err(Error::NoPairing)
        ));
    }

    #[test]
    fn mean_of_activity_observable_is_tau_a() {
        let bundle = maser_bundle(0.7);
        let c = CountingVector::from_ordered(&[1.0; 4]);
        let tau = 3.0;
        let mean = mean_observable(&bundle, &c, tau).unwrap();
        assert!((mean - tau * activity(&bundle)).abs() < 1e-12);
    }

    #[test]
    fn mean_current_vanishes_at_equilibrium() {
        let chain = models::ClassicalChain::new(array![[0.0, 0.9], [0.9, 0.0]]).unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        let c = CountingVector::from_ordered(&[1.0, -1.0]);
        assert!(mean_observable(&bundle, &c, 5.0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn variance_short_time_limit_is_j2_mean() {
        let bundle = maser_bundle(1.0);
        let c = models::maser_cycle_current();
        let tau = 1e-6;
        let var = variance_exact(&bundle, &c, tau).unwrap();
        // c_k² = 1 for the cycle current, so ⟨J₂,π⟩ = a.
        let want = tau * activity(&bundle);
        assert!(
            (var / tau - want / tau).abs() / (want / tau) < 1e-4,
            "Var/τ = {}, ⟨J₂,π⟩ = {}",
            var / tau,
            want / tau
        );
    }

    #[test]
    fn variance_short_time_classical_poisson() {
        let chain = models::ClassicalChain::new(array![[0.0, 0.8], [0.8, 0.0]]).unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        let c = CountingVector::from_ordered(&[1.0, 1.0]);
        let tau = 1e-4;
        let var = variance_exact(&bundle, &c, tau).unwrap();
        // Poisson at leading order: Var ≈ τγ with γ = 0.8.
        assert!((var - tau * 0.8).abs() < 1e-3 * tau * 0.8);
    }

    #[test]
    fn fcs_mean_matches_exact_formula() {
        let bundle = maser_bundle(0.5);
        let c = models::maser_cycle_current();
        let tau = 10.0;
        let fcs = moments_fcs(&bundle, &c, tau, 1).unwrap();
        let exact = mean_observable(&bundle, &c, tau).unwrap();
        assert!(
            (fcs.mean - exact).abs() / exact.abs() < 1e-8,
            "fcs {} vs exact {}",
            fcs.mean,
            exact
        );
    }

    #[test]
    fn fcs_zero_weights_zero_moments() {
        let bundle = maser_bundle(1.0);
        let c = CountingVector::from_ordered(&[0.0; 4]);
        let fcs = moments_fcs(&bundle, &c, 5.0, 2).unwrap();
        assert!(fcs.mean.abs() < 1e-12);
        // The h² stencil leaves a roundoff floor of ~1e-15/h² on the second
        // moment even when G(u) is identically one.
        assert!(fcs.second_moment.abs() < 1e-6);
    }

    #[test]
    fn fcs_variance_matches_exact_integral() {
        let bundle = maser_bundle(1.0);
        let c = models::maser_cycle_current();
        let tau = 10.0;
        let fcs = moments_fcs(&bundle, &c, tau, 2).unwrap();
        let exact = variance_exact(&bundle, &c, tau).unwrap();
        let rel = (fcs.variance - exact).abs() / exact;
        assert!(rel < 1e-6, "relative deviation {rel:.3e}");
    }

    #[test]
    fn fcs_rejects_bad_order() {
        let bundle = maser_bundle(1.0);
        let c = models::maser_cycle_current();
        assert!(moments_fcs(&bundle, &c, 1.0, 3).is_err());
    }

    #[test]
    fn activity_relative_fluctuation_short_time() {
        let bundle = maser_bundle(1.0);
        let c = CountingVector::from_ordered(&[1.0; 4]);
        let tau = 1e-4;
        let stats = observable_stats_exact(&bundle, &c, tau).unwrap();
        let a = activity(&bundle);
        let got = stats.variance / (stats.mean * stats.mean);
        let want = 1.0 / (a * tau);
        assert!(
            (got - want).abs() / want < 1e-3,
            "Var/mean² = {got}, 1/(aτ) = {want}"
        );
    }

    #[test]
    fn qfi_tkur_rate_chain_and_limits() {
        // Equilibrium chain: all ℓ_k vanish.
        let chain = models::ClassicalChain::new(array![[0.0, 0.6], [0.6, 0.0]]).unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let eq = LiouvillianBundle::new(emb.system).unwrap();
        let q = qfi_tkur_rate(&eq).unwrap();
        assert!(q.rate.abs() < 1e-14);

        // Maser: chain inequalities hold with positive slack.
        let bundle = maser_bundle(1.0);
        let q = qfi_tkur_rate(&bundle).unwrap();
        assert!(q.rate > 0.0);
        assert!(q.rate <= q.phi_chain_bound + 1e-12);
        assert!(q.phi_chain_bound <= q.min_chain_bound + 1e-12);
    }

    #[test]
    fn qfi_tkur_rate_self_paired_channel() {
        use crate::operators::{
            ChannelId, ChannelPair, DetailedBalancePairing, HermitianOperator, JumpOperator,
            OpenSystem,
        };
        // Drive + self-adjoint dephasing jump: ℓ = 0 by Δs = 0 symmetry.
        let mut h = CMat::zeros((2, 2));
        h[[0, 1]] = C64::new(0.4, 0.0);
        h[[1, 0]] = C64::new(0.4, 0.0);
        let mut l = CMat::zeros((2, 2));
        l[[0, 0]] = C64::new(0.6, 0.0);
        l[[1, 1]] = C64::new(-0.6, 0.0);
        let sys = OpenSystem::new(
            HermitianOperator::new(h).unwrap(),
            vec![JumpOperator::new(ChannelId(1), l).unwrap()],
            Some(
                DetailedBalancePairing::new(vec![ChannelPair {
                    k: ChannelId(1),
                    k_star: ChannelId(1),
                    ds: 0.0,
                }])
                .unwrap(),
            ),
        )
        .unwrap();
        let bundle = LiouvillianBundle::new(sys).unwrap();
        let q = qfi_tkur_rate(&bundle).unwrap();
        assert!(q.rate.abs() < 1e-14);
    }

    #[test]
    fn qfi_response_rate_scaling() {
        let bundle = maser_bundle(1.0);
        let a = activity(&bundle);
        assert_eq!(qfi_response_rate(&bundle, 0.0), 0.0);
        assert!((qfi_response_rate(&bundle, 1.0) - a).abs() < 1e-15);
        let r1 = qfi_response_rate(&bundle, 0.3);
        let r2 = qfi_response_rate(&bundle, 0.6);
        assert!((r2 - 4.0 * r1).abs() < 1e-12);
    }
}
