//! Vectorized GKSL superoperators: generator, adjoint, tilted and
//! per-channel variants, the stationary state, the group inverse on the
//! traceless sector, and exact time-integrated propagators.

use ndarray::{s, Array1};
use ndarray_linalg::{Eig, Solve, SVD};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{dagger, expm, identity, kron, trace, C64, CMat, CVec};
use crate::operators::{
    unvectorize, validate_system, vectorize, vectorized_identity, ChannelId, CountingVector,
    DensityOperator, OpenSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperOpKind {
    Generator,
    Adjoint,
    Tilted,
    DissipatorChannel,
    Symmetrized,
}

/// A `d²×d²` matrix acting on row-major vectorized operators.
#[derive(Debug, Clone)]
pub struct SuperOperatorMatrix {
    pub dim: usize,
    pub entries: CMat,
    pub kind: SuperOpKind,
}

impl SuperOperatorMatrix {
    pub fn dim2(&self) -> usize {
        self.dim * self.dim
    }

    /// Apply to an operator: `unvec(M vec(A))`.
    pub fn apply(&self, a: &CMat) -> Result<CMat> {
        let v = vectorize(a)?;
        unvectorize(&self.entries.dot(&v), self.dim)
    }
}

/// `−i(H⊗1 − 1⊗Hᵀ)`, the coherent part of the vectorized generator.
fn coherent_part(h: &CMat) -> CMat {
    let d = h.nrows();
    let one = identity(d);
    let m = kron(h, &one) - kron(&one, &h.t().to_owned());
    m * C64::new(0.0, -1.0)
}

/// One dissipation block with the jump term optionally reweighted:
/// `w·(L⊗L*) − ½(L†L)⊗1 − ½1⊗(L†L)ᵀ`.
fn dissipator_block(l: &CMat, weight: C64) -> CMat {
    let d = l.nrows();
    let one = identity(d);
    let l_conj = l.mapv(|z| z.conj());
    let mut jump = kron(l, &l_conj);
    if weight != C64::new(1.0, 0.0) {
        jump = jump * weight;
    }
    let ldl = dagger(l).dot(l);
    let half = C64::new(0.5, 0.0);
    jump - kron(&ldl, &one) * half - kron(&one, &ldl.t().to_owned()) * half
}

fn generator_with_weights<F>(sys: &OpenSystem, kind: SuperOpKind, weight: F) -> SuperOperatorMatrix
where
    F: Fn(ChannelId) -> C64,
{
    let d = sys.dim();
    let mut m = coherent_part(sys.hamiltonian().entries());
    for j in sys.jumps() {
        m += &dissipator_block(j.entries(), weight(j.channel_id()));
    }
    SuperOperatorMatrix {
        dim: d,
        entries: m,
        kind,
    }
}

/// The vectorized GKSL generator
/// `L̂ = −i(H⊗1 − 1⊗Hᵀ) + Σ_k [L_k⊗L_k* − ½(L_k†L_k)⊗1 − ½1⊗(L_k†L_k)ᵀ]`.
pub fn build_generator(sys: &OpenSystem) -> SuperOperatorMatrix {
    generator_with_weights(sys, SuperOpKind::Generator, |_| C64::new(1.0, 0.0))
}

/// The Heisenberg-picture adjoint
/// `L̃̂ = i(H⊗1 − 1⊗Hᵀ) + Σ_k [L_k†⊗L_kᵀ − ½(L_k†L_k)⊗1 − ½1⊗(L_k†L_k)ᵀ]`,
/// satisfying `⟨A, L(B)⟩ = ⟨L̃(A), B⟩` and `L̃(1) = 0`.
pub fn build_adjoint(sys: &OpenSystem) -> SuperOperatorMatrix {
    let d = sys.dim();
    let mut m = coherent_part(sys.hamiltonian().entries()) * C64::new(-1.0, 0.0);
    let one = identity(d);
    let half = C64::new(0.5, 0.0);
    for j in sys.jumps() {
        let l = j.entries();
        let ld = dagger(l);
        let ldl = ld.dot(l);
        m += &(kron(&ld, &l.t().to_owned())
            - kron(&ldl, &one) * half
            - kron(&one, &ldl.t().to_owned()) * half);
    }
    SuperOperatorMatrix {
        dim: d,
        entries: m,
        kind: SuperOpKind::Adjoint,
    }
}

/// Tilted generator: jump terms reweighted by `e^{i u c_k}`. At `u = 0` this
/// reproduces [`build_generator`] bit for bit.
pub fn build_tilted(sys: &OpenSystem, c: &CountingVector, u: f64) -> Result<SuperOperatorMatrix> {
    if !c.covers(sys) {
        let missing = sys
            .channel_ids()
            .into_iter()
            .find(|id| c.get(*id).is_none())
            .expect("some channel is missing");
        return Err(Error::MissingWeight(missing.0));
    }
    Ok(generator_with_weights(sys, SuperOpKind::Tilted, |id| {
        let ck = c.get(id).expect("coverage checked");
        if u == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            C64::from_polar(1.0, u * ck)
        }
    }))
}

/// The full dissipation block of a single channel.
pub fn build_channel_dissipator(sys: &OpenSystem, k: ChannelId) -> Result<SuperOperatorMatrix> {
    let j = sys.jump(k)?;
    Ok(SuperOperatorMatrix {
        dim: sys.dim(),
        entries: dissipator_block(j.entries(), C64::new(1.0, 0.0)),
        kind: SuperOpKind::DissipatorChannel,
    })
}

/// Weighted sum of channel dissipators `Σ_k w_k D̂_k`.
pub fn weighted_dissipator(sys: &OpenSystem, weights: &[f64]) -> Result<CMat> {
    if weights.len() != sys.jumps().len() {
        return Err(Error::DimensionMismatch(
            "one weight per jump channel required".into(),
        ));
    }
    let d2 = sys.dim() * sys.dim();
    let mut m = CMat::zeros((d2, d2));
    for (j, &w) in sys.jumps().iter().zip(weights) {
        if w != 0.0 {
            m += &(dissipator_block(j.entries(), C64::new(1.0, 0.0)) * C64::new(w, 0.0));
        }
    }
    Ok(m)
}

/// The counting superoperator `Ĉ = Σ_k c_k L_k ⊗ L_k*`, so that
/// `⟨⟨1|Ĉ|ϱ⟩⟩ = Σ_k c_k tr(L_k ϱ L_k†)`.
pub fn counting_superop(sys: &OpenSystem, c: &CountingVector) -> Result<CMat> {
    let d = sys.dim();
    let mut m = CMat::zeros((d * d, d * d));
    for j in sys.jumps() {
        let ck = c
            .get(j.channel_id())
            .ok_or(Error::MissingWeight(j.channel_id().0))?;
        if ck != 0.0 {
            let l = j.entries();
            m += &(kron(l, &l.mapv(|z| z.conj())) * C64::new(ck, 0.0));
        }
    }
    Ok(m)
}

/// Solve `L̂ x = 0` with trace normalization by a complete singular-value
/// decomposition; asserts kernel uniqueness through the two smallest
/// singular values, Hermitizes, and validates the state invariants.
pub fn stationary_state(generator: &SuperOperatorMatrix) -> Result<DensityOperator> {
    let tol = Tolerances::default();
    let d = generator.dim;
    let n = generator.dim2();
    let (_, sv, vt) = generator.entries.svd(false, true)?;
    let vt = vt.expect("requested right singular vectors");
    if sv[n - 2] <= tol.uniqueness {
        return Err(Error::NonUniqueStationaryState(format!(
            "two smallest singular values {:.3e}, {:.3e}",
            sv[n - 1],
            sv[n - 2]
        )));
    }
    let kernel: CVec = vt.row(n - 1).mapv(|z| z.conj());
    let x = unvectorize(&kernel, d)?;
    let t = trace(&x);
    if t.norm() < 1e-12 {
        return Err(Error::NonNormalizableKernel(t.norm()));
    }
    let normalized = x.mapv(|z| z / t);
    let herm = (&normalized + &dagger(&normalized)) * C64::new(0.5, 0.0);
    DensityOperator::new(herm).map_err(|e| match e {
        Error::InvalidState(msg) => {
            Error::InvalidState(format!("kernel vector is not a valid state: {msg}"))
        }
        other => other,
    })
}

/// Apply the group inverse of the generator to `v`, which must lie in the
/// range of `L̂` (no kernel component: `⟨⟨1|v⟩⟩ ≈ 0`). Implemented by the
/// bordered linear solve
/// `[[L̂, vec(π)], [⟨⟨1|, 0]] [x; μ] = [v; 0]`,
/// which returns the unique solution of `L̂x = v` with `⟨⟨1|x⟩⟩ = 0` without
/// assuming diagonalizability.
pub fn group_inverse_apply(
    generator: &SuperOperatorMatrix,
    stationary: &DensityOperator,
    v: &CVec,
) -> Result<CVec> {
    let tol = Tolerances::default();
    let n = generator.dim2();
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "vector length {} vs superoperator size {n}",
            v.len()
        )));
    }
    let one = vectorized_identity(generator.dim);
    let v_norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let overlap: C64 = one.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    if overlap.norm() > tol.kernel_residual * v_norm.max(1.0) {
        return Err(Error::KernelComponent(overlap.norm()));
    }
    let pi_vec = vectorize(stationary.entries())?;
    // Project out the kernel direction before solving.
    let projected: CVec = v - &(&pi_vec * overlap);

    let mut bordered = CMat::zeros((n + 1, n + 1));
    bordered.slice_mut(s![..n, ..n]).assign(&generator.entries);
    for i in 0..n {
        bordered[[i, n]] = pi_vec[i];
        bordered[[n, i]] = one[i].conj();
    }
    let mut rhs = Array1::zeros(n + 1);
    rhs.slice_mut(s![..n]).assign(&projected);

    let x_full = bordered
        .solve_into(rhs)
        .map_err(|_| Error::SingularProjectedSystem)?;
    let x: CVec = x_full.slice(s![..n]).to_owned();

    let residual_vec: CVec = generator.entries.dot(&x) - &projected;
    let residual = residual_vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if residual > 1e-8 * v_norm.max(1.0) {
        return Err(Error::NumericalConsistency(format!(
            "group-inverse residual {residual:.3e}"
        )));
    }
    Ok(x)
}

/// Exact propagator integrals at horizon `τ`:
/// `P(τ) = e^{Ĝτ}`, `K₁(τ) = ∫₀^τ e^{Ĝt} dt`, `K₂(τ) = ∫₀^τ (τ−t) e^{Ĝt} dt`.
#[derive(Debug, Clone)]
pub struct IntegratedPropagators {
    pub horizon: f64,
    pub propagator: CMat,
    pub k1: CMat,
    pub k2: CMat,
}

/// Compute all three integrals from one matrix exponential of the block
/// matrix `[[Ĝ, 1, 0], [0, 0, 1], [0, 0, 0]]·τ`; no diagonalizability is
/// assumed.
pub fn integrated_propagators(g: &CMat, tau: f64) -> Result<IntegratedPropagators> {
    if tau < 0.0 {
        return Err(Error::NegativeHorizon(tau));
    }
    let n = g.nrows();
    if n != g.ncols() {
        return Err(Error::NonSquare {
            rows: n,
            cols: g.ncols(),
        });
    }
    let t = C64::new(tau, 0.0);
    let mut block = CMat::zeros((3 * n, 3 * n));
    block.slice_mut(s![..n, ..n]).assign(&(g * t));
    for i in 0..n {
        block[[i, n + i]] = t;
        block[[n + i, 2 * n + i]] = t;
    }
    let e = expm(&block);
    Ok(IntegratedPropagators {
        horizon: tau,
        propagator: e.slice(s![..n, ..n]).to_owned(),
        k1: e.slice(s![..n, n..2 * n]).to_owned(),
        k2: e.slice(s![..n, 2 * n..]).to_owned(),
    })
}

/// `P(τ)` and `K₁(τ)` only, via the smaller two-block augmented matrix.
pub fn propagator_with_integral(g: &CMat, tau: f64) -> Result<(CMat, CMat)> {
    if tau < 0.0 {
        return Err(Error::NegativeHorizon(tau));
    }
    let n = g.nrows();
    let t = C64::new(tau, 0.0);
    let mut block = CMat::zeros((2 * n, 2 * n));
    block.slice_mut(s![..n, ..n]).assign(&(g * t));
    for i in 0..n {
        block[[i, n + i]] = t;
    }
    let e = expm(&block);
    Ok((
        e.slice(s![..n, ..n]).to_owned(),
        e.slice(s![..n, n..]).to_owned(),
    ))
}

/// Generator plus everything derived from it that the statistics and bound
/// pipelines share: adjoint, per-channel dissipators, the stationary state,
/// and the real spectral gap.
#[derive(Debug, Clone)]
pub struct LiouvillianBundle {
    system: OpenSystem,
    generator: SuperOperatorMatrix,
    adjoint: SuperOperatorMatrix,
    dissipators: Vec<SuperOperatorMatrix>,
    stationary: DensityOperator,
    stationary_vec: CVec,
    spectral_gap_real: f64,
}

impl LiouvillianBundle {
    pub fn new(system: OpenSystem) -> Result<Self> {
        let tol = Tolerances::default();
        let report = validate_system(&system);
        if !report.passed {
            return Err(Error::InvalidOperator(format!(
                "system failed validation: hermiticity {:.3e}, pairing residuals {:?}, duplicates {:?}",
                report.hermiticity_residual, report.pairing_residuals, report.duplicate_channels
            )));
        }

        let generator = build_generator(&system);
        let d = system.dim();
        let one = vectorized_identity(d);
        // Trace preservation: ⟨⟨1| L̂ = 0.
        let left = one.dot(&generator.entries);
        let left_res = left.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = crate::linalg::one_norm(&generator.entries).max(1.0);
        if left_res > tol.kernel_residual * scale {
            return Err(Error::NumericalConsistency(format!(
                "generator does not preserve trace (residual {left_res:.3e})"
            )));
        }

        let adjoint = build_adjoint(&system);
        let dissipators = system
            .jumps()
            .iter()
            .map(|j| build_channel_dissipator(&system, j.channel_id()))
            .collect::<Result<Vec<_>>>()?;

        let stationary = stationary_state(&generator)?;
        let stationary_vec = vectorize(stationary.entries())?;
        let res_vec = generator.entries.dot(&stationary_vec);
        let res = res_vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if res > tol.kernel_residual * scale {
            return Err(Error::NumericalConsistency(format!(
                "stationary-state residual {res:.3e}"
            )));
        }

        // Real spectral gap: −max Re χ over nonzero modes.
        let (eigs, _) = generator.entries.eig()?;
        let mut zero_idx = 0;
        let mut zero_mag = f64::INFINITY;
        for (i, ev) in eigs.iter().enumerate() {
            if ev.norm() < zero_mag {
                zero_mag = ev.norm();
                zero_idx = i;
            }
        }
        if zero_mag > 1e-8 * scale {
            return Err(Error::NumericalConsistency(format!(
                "no zero mode in the generator spectrum (closest {zero_mag:.3e})"
            )));
        }
        let spectral_gap_real = eigs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != zero_idx)
            .map(|(_, ev)| -ev.re)
            .fold(f64::INFINITY, f64::min);

        Ok(Self {
            system,
            generator,
            adjoint,
            dissipators,
            stationary,
            stationary_vec,
            spectral_gap_real,
        })
    }

    pub fn system(&self) -> &OpenSystem {
        &self.system
    }

    pub fn generator(&self) -> &SuperOperatorMatrix {
        &self.generator
    }

    pub fn adjoint(&self) -> &SuperOperatorMatrix {
        &self.adjoint
    }

    /// Channel dissipators, aligned with `system().jumps()`.
    pub fn dissipators(&self) -> &[SuperOperatorMatrix] {
        &self.dissipators
    }

    pub fn stationary(&self) -> &DensityOperator {
        &self.stationary
    }

    pub fn stationary_vec(&self) -> &CVec {
        &self.stationary_vec
    }

    pub fn spectral_gap_real(&self) -> f64 {
        self.spectral_gap_real
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn dim2(&self) -> usize {
        self.system.dim() * self.system.dim()
    }

    /// `∫₀^τ`-propagators of the generator.
    pub fn propagators(&self, tau: f64) -> Result<IntegratedPropagators> {
        integrated_propagators(&self.generator.entries, tau)
    }

    pub fn group_inverse_apply(&self, v: &CVec) -> Result<CVec> {
        group_inverse_apply(&self.generator, &self.stationary, v)
    }
}
