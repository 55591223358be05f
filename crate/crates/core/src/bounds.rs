//! Certification of the precision and response bounds: the quantum
//! thermo-kinetic uncertainty relation and its classical form, the inverse
//! uncertainty relation built on the symmetrized-Liouvillian gap, the
//! response kinetic uncertainty relation, the parameter-response corollary,
//! and the power–efficiency trade-off for two-bath engines.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{FcsConfig, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{dagger, frobenius_norm, kron, one_norm, trace, C64, CMat};
use crate::liouvillian::{
    propagator_with_integral, weighted_dissipator, IntegratedPropagators,
    LiouvillianBundle,
};
use crate::operators::{
    norm_s, unvectorize, vectorized_identity, CountingVector,
    OpenSystem, SWeight,
};
use crate::statistics::{
    activity, channel_traffic, counting_operators, mean_observable, observable_stats_exact_with,
    thermo_rates, variance_exact, variance_exact_with,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    Tkur,
    TkurClassicalForm,
    Iur,
    Rkur,
    EpsResponse,
    PowerEfficiency,
}

/// One inequality check with its intermediates. `slack` is normalized so
/// that `satisfied ⇔ slack ≥ 0` up to the relative tolerance: lower bounds
/// store `lhs − rhs`, upper bounds store `rhs − lhs`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub name: BoundName,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub components: BTreeMap<String, f64>,
}

impl BoundReport {
    fn finite(&self) -> Result<()> {
        let all = self
            .components
            .values()
            .chain([&self.lhs, &self.rhs, &self.slack]);
        for v in all {
            if !v.is_finite() {
                return Err(Error::NumericalConsistency(format!(
                    "non-finite value in {:?} report",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn lower_bound(
        name: BoundName,
        lhs: f64,
        rhs: f64,
        components: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let slack = lhs - rhs;
        let satisfied = slack >= -Tolerances::default().bound_slack_rel * rhs.abs();
        let report = Self {
            name,
            lhs,
            rhs,
            slack,
            satisfied,
            applicable: true,
            note: None,
            components,
        };
        report.finite()?;
        Ok(report)
    }

    fn upper_bound(
        name: BoundName,
        lhs: f64,
        rhs: f64,
        components: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let slack = rhs - lhs;
        let satisfied = slack >= -Tolerances::default().bound_slack_rel * rhs.abs();
        let report = Self {
            name,
            lhs,
            rhs,
            slack,
            satisfied,
            applicable: true,
            note: None,
            components,
        };
        report.finite()?;
        Ok(report)
    }

    fn inapplicable(name: BoundName, note: String, components: BTreeMap<String, f64>) -> Self {
        Self {
            name,
            lhs: 0.0,
            rhs: 0.0,
            slack: 0.0,
            satisfied: true,
            applicable: false,
            note: Some(note),
            components,
        }
    }
}

/// Spectrum of the symmetrized Liouvillian under the `s`-inner product.
/// Eigenvalues are sorted descending with `λ₀ = 0`; the gap is `−λ₁`.
#[derive(Debug, Clone, Serialize)]
pub struct GapData {
    pub s: SWeight,
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
}

/// Inverse of `x ↦ x·tanh(x)` on `[0, ∞)`, by safeguarded Newton iteration
/// on the bracket `[max(√y, y), y + 1]`.
pub fn phi_inverse(y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::OutOfDomain(format!(
            "phi_inverse needs y >= 0, got {y}"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| x * x.tanh() - y;
    let mut lo = y.sqrt().max(y);
    let mut hi = y + 1.0;
    if f(lo) == 0.0 {
        return Ok(lo);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= 1e-12 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let t = x.tanh();
        let dfx = t + x * (1.0 - t * t);
        let newton = x - fx / dfx;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs() {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Perturbation coefficients of the detailed-balance protocol,
/// `ℓ_k = (t_k − t_{k*})/(t_k + t_{k*})`, aligned with the jump order.
pub fn tkur_coefficients(bundle: &LiouvillianBundle) -> Result<Vec<f64>> {
    let sys = bundle.system();
    let pairing = sys.pairing().ok_or(Error::NoPairing)?;
    let traffic = channel_traffic(bundle);
    let lookup: BTreeMap<_, _> = traffic.iter().cloned().collect();
    let mut out = Vec::with_capacity(traffic.len());
    for &(id, t) in &traffic {
        let (star, _) = pairing.partner(id).ok_or(Error::UnpairedChannel(id.0))?;
        let t_star = *lookup.get(&star).ok_or(Error::UnknownChannel(star.0))?;
        let tot = t + t_star;
        if tot <= 0.0 {
            return Err(Error::DeadPair {
                k: id.0,
                k_star: star.0,
            });
        }
        out.push((t - t_star) / tot);
    }
    Ok(out)
}

/// Evaluation mode of the coherent correction `δ_φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPhiMode {
    /// Exact finite-horizon value at the given `τ`.
    FiniteHorizon(f64),
    /// Long-time limit through the group inverse.
    Asymptotic,
}

/// `Σ_k c_k tr(L_k X L_k†)` — the instantaneous counting rate of `X`.
fn counting_rate(sys: &OpenSystem, c: &CountingVector, x: &CMat) -> Result<C64> {
    let weights = c.aligned(sys)?;
    let mut acc = C64::new(0.0, 0.0);
    for (j, &ck) in sys.jumps().iter().zip(&weights) {
        if ck != 0.0 {
            let l = j.entries();
            acc += trace(&l.dot(x).dot(&dagger(l))) * C64::new(ck, 0.0);
        }
    }
    Ok(acc)
}

/// Coherent correction to the current average, `δ_φ = ⟨φ⟩_φ / ⟨φ⟩`.
///
/// The finite-horizon mode integrates the perturbation operator `φ_t` from
/// `φ₀ = 0` exactly through `K₂` applied to `D̂_ℓ vec(π)`; the asymptotic
/// mode replaces the time integral by the group inverse.
pub fn delta_phi(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    mode: DeltaPhiMode,
) -> Result<f64> {
    match mode {
        DeltaPhiMode::FiniteHorizon(tau) => {
            let props = bundle.propagators(tau)?;
            delta_phi_with(bundle, &props, c)
        }
        DeltaPhiMode::Asymptotic => {
            let sys = bundle.system();
            let rate = current_rate_checked(bundle, c)?;
            let ell = tkur_coefficients(bundle)?;
            let d_ell = weighted_dissipator(sys, &ell)?;
            let dvec = d_ell.dot(bundle.stationary_vec());
            let x = bundle.group_inverse_apply(&dvec)?;
            let x_mat = unvectorize(&x, bundle.dim())?;
            let num = counting_rate(sys, c, &x_mat)?;
            check_real(num, "delta_phi numerator")?;
            Ok(-num.re / rate)
        }
    }
}

/// Finite-horizon [`delta_phi`] reusing precomputed propagators.
pub fn delta_phi_with(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    c: &CountingVector,
) -> Result<f64> {
    let sys = bundle.system();
    let tau = props.horizon;
    let rate = current_rate_checked(bundle, c)?;
    let ell = tkur_coefficients(bundle)?;
    let d_ell = weighted_dissipator(sys, &ell)?;
    let dvec = d_ell.dot(bundle.stationary_vec());

    // φ_τ stays traceless at all times; check at the horizon.
    let phi_tau = props.k1.dot(&dvec);
    let one = vectorized_identity(bundle.dim());
    let tr_phi: C64 = one
        .iter()
        .zip(phi_tau.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let phi_scale = phi_tau.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if tr_phi.norm() > 1e-10 * phi_scale.max(1.0) {
        return Err(Error::NumericalConsistency(format!(
            "perturbation operator not traceless (tr = {:.3e})",
            tr_phi.norm()
        )));
    }

    let integrated = unvectorize(&props.k2.dot(&dvec), bundle.dim())?;
    let num = counting_rate(sys, c, &integrated)?;
    check_real(num, "delta_phi numerator")?;
    Ok(num.re / (tau * rate))
}

/// Mean current rate with the current/coverage/zero-mean preconditions.
fn current_rate_checked(bundle: &LiouvillianBundle, c: &CountingVector) -> Result<f64> {
    let sys = bundle.system();
    if !sys.has_full_pairing() {
        return Err(Error::NoPairing);
    }
    if !c.is_current(sys) {
        return Err(Error::NotACurrent);
    }
    let rate = mean_observable(bundle, c, 1.0)?;
    let floor = Tolerances::default().mean_tol_factor * activity(bundle).max(1.0);
    if rate.abs() <= floor {
        return Err(Error::ZeroMeanCurrent);
    }
    Ok(rate)
}

fn check_real(z: C64, what: &str) -> Result<()> {
    if z.im.abs() > 1e-10 * z.re.abs().max(1.0) {
        return Err(Error::NumericalConsistency(format!(
            "{what} has imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(())
}

/// The quantum thermo-kinetic uncertainty relation
/// `F_φ/(1+δ_φ)² ≥ (4a/σ²) Φ(σ/2a)²` for a current `φ`.
pub fn check_tkur(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
    mode: DeltaPhiMode,
) -> Result<BoundReport> {
    let props = bundle.propagators(tau)?;
    check_tkur_with(bundle, &props, c, mode)
}

pub fn check_tkur_with(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    c: &CountingVector,
    mode: DeltaPhiMode,
) -> Result<BoundReport> {
    let (f_phi, components) = tkur_pieces(bundle, props, c, mode)?;
    let delta = components["delta_phi"];
    let rhs = components["chain_bound_phi"];
    let lhs = f_phi / ((1.0 + delta) * (1.0 + delta));
    BoundReport::lower_bound(BoundName::Tkur, lhs, rhs, components)
}

/// The classical form of the TKUR (no coherent correction): `F_φ ≥ rhs`.
/// Violations are legitimate in the quantum regime and are reported, not
/// raised.
pub fn check_tkur_classical_form(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
    mode: DeltaPhiMode,
) -> Result<BoundReport> {
    let props = bundle.propagators(tau)?;
    check_tkur_classical_form_with(bundle, &props, c, mode)
}

pub fn check_tkur_classical_form_with(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    c: &CountingVector,
    mode: DeltaPhiMode,
) -> Result<BoundReport> {
    let (f_phi, components) = tkur_pieces(bundle, props, c, mode)?;
    let rhs = components["chain_bound_phi"];
    let mut report =
        BoundReport::lower_bound(BoundName::TkurClassicalForm, f_phi, rhs, components)?;
    if !report.satisfied {
        report.note = Some("classical TKUR violated by quantum coherence".into());
    }
    Ok(report)
}

fn tkur_pieces(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    c: &CountingVector,
    mode: DeltaPhiMode,
) -> Result<(f64, BTreeMap<String, f64>)> {
    let tau = props.horizon;
    let rates = thermo_rates(bundle)?;
    let (sigma, a) = (rates.entropy_rate, rates.activity);
    if sigma <= 0.0 {
        return Err(Error::OutOfDomain(
            "TKUR needs positive entropy production".into(),
        ));
    }
    let stats = observable_stats_exact_with(bundle, props, c)?;
    let f_phi = stats
        .relative_fluctuation
        .ok_or(Error::ZeroMeanCurrent)?;
    let delta = match mode {
        DeltaPhiMode::FiniteHorizon(t) if (t - tau).abs() < 1e-12 * tau.max(1.0) => {
            delta_phi_with(bundle, props, c)?
        }
        other => delta_phi(bundle, c, other)?,
    };
    let arg = sigma / (2.0 * a);
    let phi = phi_inverse(arg)?;
    let chain_bound_phi = 4.0 * a / (sigma * sigma) * phi * phi;
    let weaker_chain = (2.0 / sigma).max(1.0 / a);

    let mut components = BTreeMap::new();
    components.insert("sigma".into(), sigma);
    components.insert("activity".into(), a);
    components.insert("delta_phi".into(), delta);
    components.insert("f_phi".into(), f_phi);
    components.insert("mean".into(), stats.mean);
    components.insert("variance".into(), stats.variance);
    components.insert("phi_arg".into(), arg);
    components.insert("chain_bound_phi".into(), chain_bound_phi);
    components.insert("chain_bound_weak".into(), weaker_chain);
    components.insert("horizon".into(), tau);
    Ok((f_phi, components))
}

/// The symmetrized Liouvillian `L̃_s = (L̃ + L̃*)/2` as a `d²×d²` matrix.
pub fn symmetrized_superop(bundle: &LiouvillianBundle, s: SWeight) -> Result<CMat> {
    let sv = s.value();
    let pi = bundle.stationary();
    let w = kron_weight(pi, sv, 1.0 - sv)?;
    let w_inv = kron_weight(pi, -sv, -(1.0 - sv))?;
    let l_hat = &bundle.generator().entries;
    let l_til = &bundle.adjoint().entries;
    let l_til_star = w_inv.dot(l_hat).dot(&w);
    Ok((l_til + &l_til_star) * C64::new(0.5, 0.0))
}

fn kron_weight(pi: &crate::operators::DensityOperator, p_left: f64, p_right: f64) -> Result<CMat> {
    let left = pi.power(p_left)?;
    let right = pi.power(p_right)?;
    Ok(kron(&left, &right.t().to_owned()))
}

/// Spectral data of `L̃_s`: builds `W_s^{1/2} L̃_s W_s^{−1/2}`, verifies it is
/// Hermitian, and takes a Hermitian eigendecomposition. The zero mode must
/// carry eigenvector `∝ W_s^{1/2} vec(1)`.
pub fn symmetrized_gap(bundle: &LiouvillianBundle, s: SWeight) -> Result<GapData> {
    let tol = Tolerances::default();
    let sv = s.value();
    let pi = bundle.stationary();
    let l_til_s = symmetrized_superop(bundle, s)?;
    let w_sqrt = kron_weight(pi, sv / 2.0, (1.0 - sv) / 2.0)?;
    let w_sqrt_inv = kron_weight(pi, -sv / 2.0, -(1.0 - sv) / 2.0)?;
    let m = w_sqrt.dot(&l_til_s).dot(&w_sqrt_inv);

    let scale = one_norm(&m).max(1.0);
    let herm_res = frobenius_norm(&(&m - &dagger(&m))) / scale;
    if herm_res > 1e-8 {
        return Err(Error::NumericalConsistency(format!(
            "symmetrized problem not Hermitian (residual {herm_res:.3e})"
        )));
    }
    let m_herm = (&m + &dagger(&m)) * C64::new(0.5, 0.0);
    let (vals, _) = crate::linalg::hermitian_eigensystem(&m_herm)?;
    let mut eigenvalues: Vec<f64> = vals.to_vec();
    eigenvalues.reverse(); // descending: λ₀ ≥ λ₁ ≥ …

    if eigenvalues[0].abs() > tol.gap_zero_mode * scale {
        return Err(Error::NumericalConsistency(format!(
            "zero mode of the symmetrized Liouvillian off by {:.3e}",
            eigenvalues[0]
        )));
    }
    // Zero eigenvector check: M · W^{1/2} vec(1) = 0.
    let one = vectorized_identity(bundle.dim());
    let w_one = w_sqrt.dot(&one);
    let w_norm = w_one.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let residual = m_herm.dot(&w_one);
    let res = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / w_norm.max(1e-300);
    if res > tol.gap_zero_mode * scale {
        return Err(Error::NumericalConsistency(format!(
            "zero eigenvector residual {res:.3e}"
        )));
    }

    let gap = -eigenvalues[1];
    if gap <= 0.0 {
        return Err(Error::NumericalConsistency(format!(
            "vanishing symmetrized gap (λ₁ = {:.3e})",
            eigenvalues[1]
        )));
    }
    Ok(GapData {
        s,
        eigenvalues,
        gap,
    })
}

/// Intermediates of the inverse uncertainty relation.
#[derive(Debug, Clone)]
pub struct IurComponents {
    pub j1: CMat,
    pub j2: CMat,
    pub j_pi: CMat,
    /// `⟨J₁,π⟩ = tr J_π`.
    pub j1_mean: f64,
    /// `⟨J₂,π⟩`.
    pub j2_mean: f64,
    pub kappa: f64,
}

pub fn iur_components(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    s: SWeight,
) -> Result<IurComponents> {
    let weights = c.aligned(bundle.system())?;
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::OutOfDomain(
            "all-zero counting vector has no fluctuation ratio".into(),
        ));
    }
    let pi = bundle.stationary();
    let (j1, j2, j_pi) = counting_operators(bundle, c)?;
    let j1_mean = trace(&j1.dot(pi.entries())).re;
    let j2_mean = trace(&j2.dot(pi.entries())).re;
    if j2_mean <= 0.0 {
        return Err(Error::OutOfDomain(format!(
            "⟨J₂,π⟩ = {j2_mean:.3e} must be positive"
        )));
    }
    let tr_j_pi = trace(&j_pi).re;
    if (j1_mean - tr_j_pi).abs() > 1e-12 * j1_mean.abs().max(1.0) {
        return Err(Error::NumericalConsistency(format!(
            "⟨J₁,π⟩ = {j1_mean:.6e} disagrees with tr J_π = {tr_j_pi:.6e}"
        )));
    }

    let d = bundle.dim();
    let sv = s.value();
    let mut j1_bar = j1.clone();
    for i in 0..d {
        j1_bar[[i, i]] -= C64::new(j1_mean, 0.0);
    }
    let pi_ms = pi.power(-sv)?;
    let pi_m1s = pi.power(-(1.0 - sv))?;
    let mut scaled_j_pi = pi_ms.dot(&j_pi).dot(&pi_m1s);
    for i in 0..d {
        scaled_j_pi[[i, i]] -= C64::new(j1_mean, 0.0);
    }
    let kappa = norm_s(&j1_bar, pi, s)? * norm_s(&scaled_j_pi, pi, s)? / j2_mean;

    Ok(IurComponents {
        j1,
        j2,
        j_pi,
        j1_mean,
        j2_mean,
        kappa,
    })
}

/// The quantum inverse uncertainty relation
/// `F_φ ≤ (⟨J₂,π⟩/⟨J₁,π⟩²)(1 + 2κ/g_s)`, plus the variance-level secondary
/// check carried in the components.
pub fn check_iur(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
    s: SWeight,
) -> Result<BoundReport> {
    let props = bundle.propagators(tau)?;
    check_iur_with(bundle, &props, c, s)
}

pub fn check_iur_with(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    c: &CountingVector,
    s: SWeight,
) -> Result<BoundReport> {
    let tau = props.horizon;
    let comps = iur_components(bundle, c, s)?;
    if comps.j1_mean.abs()
        <= Tolerances::default().mean_tol_factor * activity(bundle).max(1.0)
    {
        return Err(Error::ZeroMeanCurrent);
    }
    let gap = symmetrized_gap(bundle, s)?;
    let stats = observable_stats_exact_with(bundle, props, c)?;
    let f_phi = stats.relative_fluctuation.ok_or(Error::ZeroMeanCurrent)?;

    let inst_ratio = comps.j2_mean / (comps.j1_mean * comps.j1_mean);
    let rhs = inst_ratio * (1.0 + 2.0 * comps.kappa / gap.gap);

    // Variance-level inequality behind the bound.
    let g = gap.gap;
    let kernel = ((-g * tau).exp() + g * tau - 1.0) / (g * g);
    let variance_bound = tau * comps.j2_mean + 2.0 * kernel * comps.kappa * comps.j2_mean;

    let mut components = BTreeMap::new();
    components.insert("j1_mean".into(), comps.j1_mean);
    components.insert("j2_mean".into(), comps.j2_mean);
    components.insert("kappa".into(), comps.kappa);
    components.insert("gap".into(), g);
    components.insert("inst_ratio".into(), inst_ratio);
    components.insert("f_phi".into(), f_phi);
    components.insert("variance".into(), stats.variance);
    components.insert("variance_bound_rhs".into(), variance_bound);
    components.insert("horizon".into(), tau);
    BoundReport::upper_bound(BoundName::Iur, f_phi, rhs, components)
}

/// Precomputed per-channel response data for one `(bundle, τ)`: analytic
/// state responses through `K₂` and the finite-difference cross-check
/// states, both independent of the counting vector.
pub struct ResponseKit {
    tau: f64,
    traffic: Vec<f64>,
    activity: f64,
    jump_ops: Vec<CMat>,
    /// `Y_k = unvec(K₂ D̂_k vec π)`.
    state_response: Vec<CMat>,
    /// `X_k^± = unvec(K₁^{(k,±)}(τ) vec π)` for the perturbed generators.
    fd_states: Vec<(CMat, CMat)>,
    fd_step: f64,
}

impl ResponseKit {
    pub fn new(bundle: &LiouvillianBundle, props: &IntegratedPropagators) -> Result<Self> {
        let sys = bundle.system();
        let d = bundle.dim();
        let tau = props.horizon;
        let fd_step = FcsConfig::default().response_fd_step;
        let traffic: Vec<f64> = channel_traffic(bundle).iter().map(|&(_, t)| t).collect();
        let pi_vec = bundle.stationary_vec();

        let mut jump_ops = Vec::new();
        let mut state_response = Vec::new();
        let mut fd_states = Vec::new();
        for (idx, j) in sys.jumps().iter().enumerate() {
            jump_ops.push(j.entries().clone());
            let mut sel = vec![0.0; sys.jumps().len()];
            sel[idx] = 1.0;
            let d_k = weighted_dissipator(sys, &sel)?;
            let y = props.k2.dot(&d_k.dot(pi_vec));
            state_response.push(unvectorize(&y, d)?);

            // Channel scaled by e^{±h}: generator shifts by (e^{±h} − 1) D̂_k.
            let mut pair = Vec::with_capacity(2);
            for sign in [1.0, -1.0] {
                let factor = (sign * fd_step).exp() - 1.0;
                let g = &bundle.generator().entries + &(&d_k * C64::new(factor, 0.0));
                let (_, k1) = propagator_with_integral(&g, tau)?;
                pair.push(unvectorize(&k1.dot(pi_vec), d)?);
            }
            let minus = pair.pop().expect("two entries");
            let plus = pair.pop().expect("one entry");
            fd_states.push((plus, minus));
        }

        let total_activity = bundle_activity(&traffic);
        Ok(Self {
            tau,
            traffic,
            activity: total_activity,
            jump_ops,
            state_response,
            fd_states,
            fd_step,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn activity(&self) -> f64 {
        self.activity
    }

    /// Exact per-channel responses `d_{ω_k}⟨φ⟩ = τ c_k t_k + ⟨⟨1|Ĉ K₂ D̂_k|π⟩⟩`,
    /// cross-checked against central finite differences in `ω_k`.
    pub fn gradient(&self, sys: &OpenSystem, c: &CountingVector) -> Result<Vec<f64>> {
        let weights = c.aligned(sys)?;
        let n = self.jump_ops.len();
        let mut analytic = Vec::with_capacity(n);
        let mut fd = Vec::with_capacity(n);
        for k in 0..n {
            let mut state_term = C64::new(0.0, 0.0);
            for (j, &cj) in weights.iter().enumerate() {
                if cj != 0.0 {
                    let l = &self.jump_ops[j];
                    state_term +=
                        trace(&l.dot(&self.state_response[k]).dot(&dagger(l))) * C64::new(cj, 0.0);
                }
            }
            check_real(state_term, "response gradient")?;
            analytic.push(self.tau * weights[k] * self.traffic[k] + state_term.re);

            let (plus, minus) = &self.fd_states[k];
            let mut mean_p = 0.0;
            let mut mean_m = 0.0;
            for (j, &cj) in weights.iter().enumerate() {
                if cj != 0.0 {
                    let l = &self.jump_ops[j];
                    let tp = trace(&l.dot(plus).dot(&dagger(l))).re;
                    let tm = trace(&l.dot(minus).dot(&dagger(l))).re;
                    let (wp, wm) = if j == k {
                        (self.fd_step.exp(), (-self.fd_step).exp())
                    } else {
                        (1.0, 1.0)
                    };
                    mean_p += cj * wp * tp;
                    mean_m += cj * wm * tm;
                }
            }
            fd.push((mean_p - mean_m) / (2.0 * self.fd_step));
        }

        let scale = analytic
            .iter()
            .chain(fd.iter())
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        let floor = 1e-12 * self.tau * (1.0 + self.activity);
        if scale > floor {
            for k in 0..n {
                let diff = (analytic[k] - fd[k]).abs();
                if diff > Tolerances::default().response_fd * scale {
                    return Err(Error::NumericalConsistency(format!(
                        "response gradient channel {k}: analytic {:.6e} vs finite difference {:.6e}",
                        analytic[k], fd[k]
                    )));
                }
            }
        }
        Ok(analytic)
    }
}

fn bundle_activity(traffic: &[f64]) -> f64 {
    traffic.iter().sum()
}

/// Static responses of `⟨φ⟩` to the per-channel log-rate perturbations.
pub fn response_gradient(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
) -> Result<Vec<f64>> {
    let props = bundle.propagators(tau)?;
    let kit = ResponseKit::new(bundle, &props)?;
    kit.gradient(bundle.system(), c)
}

/// The response kinetic uncertainty relation `‖∇⟨φ⟩‖₁² / Var[φ] ≤ τ a`.
pub fn check_rkur(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
) -> Result<BoundReport> {
    let props = bundle.propagators(tau)?;
    let kit = ResponseKit::new(bundle, &props)?;
    check_rkur_with(bundle, &props, &kit, c)
}

pub fn check_rkur_with(
    bundle: &LiouvillianBundle,
    props: &IntegratedPropagators,
    kit: &ResponseKit,
    c: &CountingVector,
) -> Result<BoundReport> {
    let tau = props.horizon;
    let grad = kit.gradient(bundle.system(), c)?;
    let grad_norm1: f64 = grad.iter().map(|g| g.abs()).sum();
    let variance = variance_exact_with(bundle, props, c)?;
    let a = activity(bundle);
    let rhs = tau * a;

    let lhs = if variance > 0.0 {
        grad_norm1 * grad_norm1 / variance
    } else if grad_norm1 <= 1e-12 * tau * (1.0 + a) {
        0.0
    } else {
        return Err(Error::ZeroVariance);
    };

    let mut components = BTreeMap::new();
    components.insert("grad_norm1".into(), grad_norm1);
    components.insert("variance".into(), variance);
    components.insert("activity".into(), a);
    components.insert("horizon".into(), tau);
    for (k, g) in grad.iter().enumerate() {
        components.insert(format!("d_omega_{}", k + 1), *g);
    }
    BoundReport::upper_bound(BoundName::Rkur, lhs, rhs, components)
}

/// Parameter-response corollary: `(d_ε⟨φ⟩)² ≤ τ ω_max² Var[φ] a`, with the
/// caller supplying the slopes `ω_k′(ε)` channel by channel.
pub fn check_eps_response(
    bundle: &LiouvillianBundle,
    c: &CountingVector,
    tau: f64,
    omega_slopes: &[f64],
) -> Result<BoundReport> {
    let sys = bundle.system();
    if omega_slopes.len() != sys.jumps().len() {
        return Err(Error::DimensionMismatch(
            "one slope per jump channel required".into(),
        ));
    }
    let props = bundle.propagators(tau)?;
    let kit = ResponseKit::new(bundle, &props)?;
    let grad = kit.gradient(sys, c)?;
    let d_eps: f64 = omega_slopes.iter().zip(&grad).map(|(w, g)| w * g).sum();
    let omega_max = omega_slopes.iter().map(|w| w.abs()).fold(0.0, f64::max);
    let variance = variance_exact_with(bundle, &props, c)?;
    let a = activity(bundle);

    let lhs = d_eps * d_eps;
    let rhs = tau * omega_max * omega_max * variance * a;

    let mut components = BTreeMap::new();
    components.insert("d_eps".into(), d_eps);
    components.insert("omega_max".into(), omega_max);
    components.insert("variance".into(), variance);
    components.insert("activity".into(), a);
    components.insert("horizon".into(), tau);
    BoundReport::upper_bound(BoundName::EpsResponse, lhs, rhs, components)
}

/// Power, efficiency, and Carnot limit of a two-bath engine computed from
/// heat counting vectors.
#[derive(Debug, Clone, Serialize)]
pub struct EngineObservables {
    pub power: f64,
    pub efficiency: f64,
    pub carnot: f64,
    pub hot_rate: f64,
    pub cold_rate: f64,
}

pub fn engine_observables(
    bundle: &LiouvillianBundle,
    c_hot: &CountingVector,
    c_cold: &CountingVector,
    t_hot: f64,
    t_cold: f64,
) -> Result<EngineObservables> {
    let hot_rate = mean_observable(bundle, c_hot, 1.0)?;
    let cold_rate = mean_observable(bundle, c_cold, 1.0)?;
    let power = hot_rate - cold_rate;
    let efficiency = if hot_rate != 0.0 {
        power / hot_rate
    } else {
        0.0
    };
    Ok(EngineObservables {
        power,
        efficiency,
        carnot: 1.0 - t_cold / t_hot,
        hot_rate,
        cold_rate,
    })
}

/// Power–efficiency trade-off `P·η/(η_C−η)·T_c(1+δ_P)²/Δ_P ≤ 1/2` for a
/// steady-state engine between baths at `T_h > T_c`.
///
/// `Δ_P` is the asymptotic variance rate of the work current, estimated by
/// the doubling slope `[Var(2τ₀) − Var(τ₀)]/τ₀` with a convergence check
/// between `τ₀ = 200` and `τ₀ = 400`. Outside the engine regime the report
/// is marked inapplicable and no inequality is asserted.
pub fn check_power_efficiency(
    bundle: &LiouvillianBundle,
    c_hot: &CountingVector,
    c_cold: &CountingVector,
    t_hot: f64,
    t_cold: f64,
    tau: f64,
) -> Result<BoundReport> {
    if !(t_hot > t_cold && t_cold > 0.0) {
        return Err(Error::OutOfDomain(format!(
            "need T_h > T_c > 0, got T_h = {t_hot}, T_c = {t_cold}"
        )));
    }
    let sys = bundle.system();
    check_heat_consistency(sys, c_hot, c_cold, t_hot, t_cold)?;

    let eng = engine_observables(bundle, c_hot, c_cold, t_hot, t_cold)?;
    let mut components = BTreeMap::new();
    components.insert("power".into(), eng.power);
    components.insert("efficiency".into(), eng.efficiency);
    components.insert("carnot".into(), eng.carnot);
    components.insert("hot_rate".into(), eng.hot_rate);
    components.insert("horizon".into(), tau);

    let in_regime = eng.power > 0.0
        && eng.efficiency > 0.0
        && eng.efficiency < eng.carnot
        && eng.hot_rate > 0.0;
    if !in_regime {
        return Ok(BoundReport::inapplicable(
            BoundName::PowerEfficiency,
            format!(
                "not in the engine regime (P = {:.3e}, η = {:.3e}, η_C = {:.3e})",
                eng.power, eng.efficiency, eng.carnot
            ),
            components,
        ));
    }

    // Work current c_w = c_h − c_c over all channels.
    let mut work = std::collections::BTreeMap::new();
    for id in sys.channel_ids() {
        let h = c_hot.get(id).unwrap_or(0.0);
        let cc = c_cold.get(id).unwrap_or(0.0);
        work.insert(id, h - cc);
    }
    let c_work = CountingVector::new(work);

    let delta_p = delta_phi(bundle, &c_work, DeltaPhiMode::Asymptotic)?;
    let slope = |tau0: f64| -> Result<f64> {
        let v1 = variance_exact(bundle, &c_work, tau0)?;
        let v2 = variance_exact(bundle, &c_work, 2.0 * tau0)?;
        Ok((v2 - v1) / tau0)
    };
    let slope_200 = slope(200.0)?;
    let slope_400 = slope(400.0)?;
    if (slope_200 - slope_400).abs() > 1e-3 * slope_400.abs() {
        return Err(Error::NumericalConsistency(format!(
            "asymptotic variance rate not converged: {slope_200:.6e} vs {slope_400:.6e}"
        )));
    }
    let delta_var_rate = slope_400;

    let lhs = eng.power * eng.efficiency / (eng.carnot - eng.efficiency) * t_cold
        * (1.0 + delta_p)
        * (1.0 + delta_p)
        / delta_var_rate;

    // Cross-check σ against the engine identity σ = (P/T_c)(η_C − η)/η.
    let sigma = thermo_rates(bundle)?.entropy_rate;
    let sigma_engine = eng.power / t_cold * (eng.carnot - eng.efficiency) / eng.efficiency;
    if (sigma - sigma_engine).abs() > 1e-8 * sigma.abs().max(1e-12) {
        return Err(Error::NumericalConsistency(format!(
            "entropy rate {sigma:.6e} disagrees with engine identity {sigma_engine:.6e}"
        )));
    }

    components.insert("delta_p".into(), delta_p);
    components.insert("delta_var_rate".into(), delta_var_rate);
    components.insert("delta_var_rate_tau200".into(), slope_200);
    components.insert("sigma".into(), sigma);
    BoundReport::upper_bound(BoundName::PowerEfficiency, lhs, 0.5, components)
}

/// Heat weights must match the pairing entropies of their bath:
/// `c_h[k] = −T_h Δs_k` on hot channels, `c_c[k] = +T_c Δs_k` on cold ones,
/// with disjoint supports.
fn check_heat_consistency(
    sys: &OpenSystem,
    c_hot: &CountingVector,
    c_cold: &CountingVector,
    t_hot: f64,
    t_cold: f64,
) -> Result<()> {
    let pairing = sys.pairing().ok_or(Error::NoPairing)?;
    for id in sys.channel_ids() {
        let h = c_hot.get(id).unwrap_or(0.0);
        let c = c_cold.get(id).unwrap_or(0.0);
        if h != 0.0 && c != 0.0 {
            return Err(Error::Model(format!(
                "channel {id} appears in both heat vectors"
            )));
        }
        if h == 0.0 && c == 0.0 {
            continue;
        }
        let (_, ds) = pairing.partner(id).ok_or(Error::UnpairedChannel(id.0))?;
        let (want, label) = if h != 0.0 {
            (-t_hot * ds, ("hot", h))
        } else {
            (t_cold * ds, ("cold", c))
        };
        let got = label.1;
        if (got - want).abs() > 1e-8 * want.abs().max(1.0) {
            return Err(Error::Model(format!(
                "channel {id}: {} heat weight {got:.6e} inconsistent with bath temperature (expected {want:.6e})",
                label.0
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::LiouvillianBundle;
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
    fn phi_inverse_fixed_points() {
        assert_eq!(phi_inverse(0.0).unwrap(), 0.0);
        let y = 1.0_f64.tanh();
        assert!((phi_inverse(y).unwrap() - 1.0).abs() < 1e-10);
        let x = phi_inverse(100.0).unwrap();
        assert!((100.0..=100.0 + 1e-6).contains(&x));
        assert!(phi_inverse(-0.1).is_err());
    }

    #[test]
    fn phi_inverse_round_trip_and_lower_bounds() {
        for x in [0.01_f64, 0.1, 1.0, 5.0, 50.0] {
            let y = x * x.tanh();
            let back = phi_inverse(y).unwrap();
            assert!((back - x).abs() < 1e-10, "x = {x}, got {back}");
        }
        let mut y = 1e-4;
        while y < 30.0 {
            let phi = phi_inverse(y).unwrap();
            assert!(phi >= y.sqrt() - 1e-12);
            assert!(phi >= y - 1e-12);
            y *= 1.37;
        }
    }

    #[test]
    fn tkur_coefficients_antisymmetry_and_equilibrium() {
        // Equilibrium chain: all zero.
        let chain = models::ClassicalChain::new(array![[0.0, 0.5], [0.5, 0.0]]).unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let eq = LiouvillianBundle::new(emb.system).unwrap();
        for l in tkur_coefficients(&eq).unwrap() {
            assert!(l.abs() < 1e-14);
        }

        let bundle = maser_bundle(1.0);
        let ell = tkur_coefficients(&bundle).unwrap();
        // channels ordered (1, 1*, 2, 2*)
        assert!((ell[0] + ell[1]).abs() < 1e-14);
        assert!((ell[2] + ell[3]).abs() < 1e-14);
        for l in ell {
            assert!((-1.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn tkur_coefficients_one_way_cycle_limit() {
        let eps = 1e-30;
        let chain = models::ClassicalChain::new(array![
            [0.0, eps, 1.0],
            [1.0, 0.0, eps],
            [eps, 1.0, 0.0]
        ])
        .unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        let ell = tkur_coefficients(&bundle).unwrap();
        let max = ell.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
        assert!((max - 1.0).abs() < 1e-12, "ℓ_max = {max}");
    }

    #[test]
    fn delta_phi_classical_chain_vanishes() {
        let chain = models::ClassicalChain::new(array![
            [0.0, 1.3, 0.2],
            [0.4, 0.0, 0.9],
            [0.8, 0.5, 0.0]
        ])
        .unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        // Antisymmetric current: one weight per undirected edge.
        let mut weights = std::collections::BTreeMap::new();
        for (i, &(m, n)) in emb.edges.iter().enumerate() {
            let id = crate::operators::ChannelId(i as u32 + 1);
            let (lo, hi) = (m.min(n), m.max(n));
            let scale = 0.3 + 0.1 * (lo + 2 * hi) as f64;
            let sign = if m > n { 1.0 } else { -1.0 };
            weights.insert(id, sign * scale);
        }
        let c = CountingVector::new(weights);
        for mode in [DeltaPhiMode::FiniteHorizon(7.0), DeltaPhiMode::Asymptotic] {
            let d = delta_phi(&bundle, &c, mode).unwrap();
            assert!(d.abs() < 1e-10, "δ_φ = {d:.3e} for {mode:?}");
        }
    }

    #[test]
    fn delta_phi_maser_quantum_regime_flags_violation() {
        // At Δ = 0 the coherent correction pulls |1+δ_φ| below 1.
        let bundle = maser_bundle(0.0);
        let c = models::maser_cycle_current();
        let d = delta_phi(&bundle, &c, DeltaPhiMode::FiniteHorizon(10.0)).unwrap();
        assert!((1.0 + d).abs() < 1.0, "1 + δ_φ = {}", 1.0 + d);
    }

    #[test]
    fn delta_phi_long_horizon_approaches_asymptotic() {
        let bundle = maser_bundle(1.0);
        let c = models::maser_cycle_current();
        let asym = delta_phi(&bundle, &c, DeltaPhiMode::Asymptotic).unwrap();
        let err_at = |tau: f64| {
            let finite = delta_phi(&bundle, &c, DeltaPhiMode::FiniteHorizon(tau)).unwrap();
            (finite - asym).abs() / asym.abs()
        };
        // The deviation decays like 1/τ; it sits at ~2.6e-3 relative at
        // τ = 1000 for these parameters.
        let (e1, e2, e4) = (err_at(1000.0), err_at(2000.0), err_at(4000.0));
        assert!(e4 < 1e-3, "relative deviation {e4:.3e} at τ = 4000");
        let ratio = e1 / e2;
        assert!(
            (1.8..=2.2).contains(&ratio),
            "1/τ convergence broken: {e1:.3e} vs {e2:.3e}"
        );
    }

    #[test]
    fn delta_phi_rejects_non_current() {
        let bundle = maser_bundle(1.0);
        let c = CountingVector::from_ordered(&[1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            delta_phi(&bundle, &c, DeltaPhiMode::Asymptotic),
            Err(Error::NotACurrent)
        ));
    }

    #[test]
    fn tkur_holds_on_maser_and_classical_form_fails_at_zero_detuning() {
        let c = models::maser_cycle_current();
        for delta in [0.0, 1.0, 2.0] {
            let bundle = maser_bundle(delta);
            let report = check_tkur(
                &bundle,
                &c,
                10.0,
                DeltaPhiMode::FiniteHorizon(10.0),
            )
            .unwrap();
            assert!(report.satisfied, "Δ = {delta}: {report:?}");
        }
        let bundle = maser_bundle(0.0);
        let classical = check_tkur_classical_form(
            &bundle,
            &c,
            10.0,
            DeltaPhiMode::FiniteHorizon(10.0),
        )
        .unwrap();
        assert!(!classical.satisfied, "{classical:?}");
    }

    #[test]
    fn tkur_reduces_to_classical_on_chains() {
        let chain = models::ClassicalChain::new(array![
            [0.0, 2.0, 0.1],
            [0.5, 0.0, 1.5],
            [1.0, 0.3, 0.0]
        ])
        .unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        let mut weights = std::collections::BTreeMap::new();
        for (i, &(m, n)) in emb.edges.iter().enumerate() {
            let id = crate::operators::ChannelId(i as u32 + 1);
            weights.insert(id, if m > n { 1.0 } else { -1.0 });
        }
        let c = CountingVector::new(weights);
        let report = check_tkur(&bundle, &c, 20.0, DeltaPhiMode::FiniteHorizon(20.0)).unwrap();
        assert!(report.satisfied);
        // δ_φ = 0 classically, so quantum and classical forms coincide.
        let classical =
            check_tkur_classical_form(&bundle, &c, 20.0, DeltaPhiMode::FiniteHorizon(20.0))
                .unwrap();
        assert!((report.lhs - classical.lhs).abs() < 1e-9 * report.lhs.abs());
        assert!(classical.satisfied);
    }

    #[test]
    fn symmetrized_gap_two_state_spectrum() {
        // Embedded 2-state chain with rates a, b: population modes {0, −(a+b)}
        // and two coherence modes at −(a+b)/2, for both s.
        let (a, b) = (0.9, 0.4);
        let chain = models::ClassicalChain::new(array![[0.0, a], [b, 0.0]]).unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        for s in [SWeight::Zero, SWeight::Half] {
            let gap = symmetrized_gap(&bundle, s).unwrap();
            let want = [(a + b) / 2.0, (a + b) / 2.0, a + b];
            assert!(gap.eigenvalues[0].abs() < 1e-12);
            for (got, want) in gap.eigenvalues[1..].iter().zip(want) {
                assert!(
                    (got + want).abs() < 1e-10,
                    "eigenvalue {got} vs −{want} at s = {s:?}"
                );
            }
            assert!((gap.gap - (a + b) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetrized_gap_rejects_rank_deficient_state() {
        use crate::operators::{ChannelId, HermitianOperator, JumpOperator, OpenSystem};
        let h = HermitianOperator::new(CMat::zeros((2, 2))).unwrap();
        let mut l = CMat::zeros((2, 2));
        l[[0, 1]] = C64::new(1.0, 0.0);
        let sys =
            OpenSystem::new(h, vec![JumpOperator::new(ChannelId(1), l).unwrap()], None).unwrap();
        let bundle = LiouvillianBundle::new(sys).unwrap();
        assert!(matches!(
            symmetrized_gap(&bundle, SWeight::Half),
            Err(Error::RankDeficientState { .. })
        ));
    }

    #[test]
    fn iur_components_identities() {
        let bundle = maser_bundle(1.0);
        // Activity observable: tr J_π = a.
        let c = CountingVector::from_ordered(&[1.0; 4]);
        let comps = iur_components(&bundle, &c, SWeight::Half).unwrap();
        assert!((comps.j1_mean - activity(&bundle)).abs() < 1e-12);
        assert!(comps.kappa >= 0.0);

        // Cycle current: κ finite and positive.
        let cc = models::maser_cycle_current();
        let comps = iur_components(&bundle, &cc, SWeight::Half).unwrap();
        assert!(comps.kappa > 0.0 && comps.kappa.is_finite());

        let zero = CountingVector::from_ordered(&[0.0; 4]);
        assert!(iur_components(&bundle, &zero, SWeight::Half).is_err());
    }

    #[test]
    fn iur_single_channel_j2_is_traffic() {
        use crate::operators::{
            ChannelId, ChannelPair, DetailedBalancePairing, HermitianOperator, JumpOperator,
            OpenSystem,
        };
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
        let c = CountingVector::from_ordered(&[1.0]);
        let comps = iur_components(&bundle, &c, SWeight::Zero).unwrap();
        let t1 = channel_traffic(&bundle)[0].1;
        assert!((comps.j2_mean - t1).abs() < 1e-13);
    }

    #[test]
    fn iur_holds_on_maser_and_half_is_tighter() {
        let c = models::maser_cycle_current();
        for delta in [0.0, 1.0, 2.0] {
            let bundle = maser_bundle(delta);
            let r0 = check_iur(&bundle, &c, 10.0, SWeight::Zero).unwrap();
            let r05 = check_iur(&bundle, &c, 10.0, SWeight::Half).unwrap();
            assert!(r0.satisfied && r05.satisfied);
            assert!(
                r05.rhs <= r0.rhs + 1e-9 * r0.rhs,
                "Δ = {delta}: rhs(1/2) = {} vs rhs(0) = {}",
                r05.rhs,
                r0.rhs
            );
            // Variance-level inequality.
            assert!(r05.components["variance"] <= r05.components["variance_bound_rhs"] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn iur_saturates_at_short_horizon() {
        let bundle = maser_bundle(1.0);
        let c = models::maser_cycle_current();
        let report = check_iur(&bundle, &c, 1e-6, SWeight::Half).unwrap();
        let f = report.components["f_phi"];
        let inst = report.components["inst_ratio"];
        assert!((f - inst).abs() / inst < 1e-4, "F = {f}, inst = {inst}");
        assert!(report.satisfied);
    }

    #[test]
    fn response_gradient_classical_sum_rule() {
        let chain = models::ClassicalChain::new(array![
            [0.0, 1.2, 0.3],
            [0.7, 0.0, 0.8],
            [0.2, 1.1, 0.0]
        ])
        .unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system.clone()).unwrap();
        let tau = 5.0;
        let c = CountingVector::from_ordered(&[1.0, -0.5, 0.7, 0.2, -0.9, 0.4]);
        let grad = response_gradient(&bundle, &c, tau).unwrap();
        let total: f64 = grad.iter().sum();
        let mean = mean_observable(&bundle, &c, tau).unwrap();
        assert!(
            (total - mean).abs() / mean.abs() < 1e-8,
            "Σ d_ω⟨φ⟩ = {total}, ⟨φ⟩ = {mean}"
        );
    }

    #[test]
    fn response_gradient_dead_channel_is_zero() {
        use crate::operators::{ChannelId, HermitianOperator, JumpOperator, OpenSystem};
        let p = MaserParams::default();
        let maser = models::build_maser(&p).unwrap();
        let mut jumps = maser.jumps().to_vec();
        jumps.push(JumpOperator::new(ChannelId(5), CMat::zeros((3, 3))).unwrap());
        let sys = OpenSystem::new(
            HermitianOperator::new(maser.hamiltonian().entries().clone()).unwrap(),
            jumps,
            None,
        )
        .unwrap();
        let bundle = LiouvillianBundle::new(sys).unwrap();
        let c = CountingVector::from_ordered(&[1.0, -1.0, -1.0, 1.0, 1.0]);
        let grad = response_gradient(&bundle, &c, 5.0).unwrap();
        assert!(grad[4].abs() < 1e-14);
    }

    #[test]
    fn rkur_holds_on_maser_and_zero_weights_are_trivial() {
        let bundle = maser_bundle(1.0);
        let c = models::maser_cycle_current();
        let report = check_rkur(&bundle, &c, 10.0).unwrap();
        assert!(report.satisfied, "{report:?}");

        let zero = CountingVector::from_ordered(&[0.0; 4]);
        let report = check_rkur(&bundle, &zero, 10.0).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert!(report.satisfied);
    }

    #[test]
    fn rkur_dominates_classical_kur() {
        let chain = models::ClassicalChain::new(array![
            [0.0, 0.9, 0.4],
            [1.3, 0.0, 0.6],
            [0.5, 1.0, 0.0]
        ])
        .unwrap();
        let emb = models::embed_classical(&chain, true).unwrap();
        let bundle = LiouvillianBundle::new(emb.system).unwrap();
        let c = CountingVector::from_ordered(&[1.0; 6]); // activity observable
        let tau = 50.0;
        let report = check_rkur(&bundle, &c, tau).unwrap();
        assert!(report.satisfied);
        // ‖∇⟨φ⟩‖₁² / Var ≥ ⟨φ⟩²/Var: the KUR is recovered as the weaker bound.
        let mean = mean_observable(&bundle, &c, tau).unwrap();
        let kur_lhs = mean * mean / report.components["variance"];
        assert!(report.lhs >= kur_lhs - 1e-9 * kur_lhs);
        assert!(kur_lhs <= report.rhs);
    }

    #[test]
    fn eps_response_chain_rule_and_bound() {
        let bundle = maser_bundle(1.0);
        let c = models::maser_cycle_current();
        let tau = 10.0;
        // Global rescale: d_ε⟨φ⟩ = Σ_k d_ω_k⟨φ⟩.
        let report = check_eps_response(&bundle, &c, tau, &[1.0; 4]).unwrap();
        let grad = response_gradient(&bundle, &c, tau).unwrap();
        let total: f64 = grad.iter().sum();
        assert!((report.components["d_eps"] - total).abs() < 1e-10 * total.abs().max(1.0));
        assert!(report.satisfied);

        // Alternating slopes.
        let report = check_eps_response(&bundle, &c, tau, &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!(report.satisfied);

        // ε-independent channels.
        let report = check_eps_response(&bundle, &c, tau, &[0.0; 4]).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert!(report.satisfied);
    }
}
