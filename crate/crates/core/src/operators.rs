//! Operator types for open quantum systems and the vectorization / weighted
//! inner-product machinery everything else is built on.
//!
//! Vectorization is row-major: `A = Σ a_mn |m⟩⟨n|` maps to the column vector
//! with entry `a_mn` at index `m·d + n`, so that `vec(AB) = (A ⊗ 1) vec(B)`
//! and `vec(BA) = (1 ⊗ Aᵀ) vec(B)` hold verbatim.

use std::collections::BTreeMap;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{
    self, dagger, frobenius_norm, hermitian_eigensystem, hermitian_power, trace, C64, CMat, CVec,
};

/// Identifier of a jump channel; unique within a system, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId(pub u32);

impl std::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Weight exponent of the `s`-inner product `⟨A,B⟩_s = tr(A† π^s B π^{1−s})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SWeight {
    Zero,
    Half,
}

impl SWeight {
    pub fn value(self) -> f64 {
        match self {
            SWeight::Zero => 0.0,
            SWeight::Half => 0.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SWeight::Zero => "s0",
            SWeight::Half => "s05",
        }
    }
}

/// A validated Hermitian matrix (Hamiltonians, observables).
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    dim: usize,
    entries: CMat,
}

impl HermitianOperator {
    pub fn new(entries: CMat) -> Result<Self> {
        let tol = Tolerances::default();
        square(&entries)?;
        finite(&entries)?;
        let dim = entries.nrows();
        let res = linalg::hermiticity_residual(&entries);
        if res > tol.hermiticity {
            return Err(Error::InvalidOperator(format!(
                "not Hermitian (residual {res:.3e})"
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }
}

/// A single jump operator with its channel label.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    channel_id: ChannelId,
    entries: CMat,
}

impl JumpOperator {
    pub fn new(channel_id: ChannelId, entries: CMat) -> Result<Self> {
        if channel_id.0 < 1 {
            return Err(Error::InvalidOperator(
                "channel ids are numbered from 1".into(),
            ));
        }
        square(&entries)?;
        finite(&entries)?;
        Ok(Self {
            channel_id,
            entries,
        })
    }

    pub fn channel_id(&self) -> ChannelId {
        self.channel_id
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }
}

/// One detailed-balance pair `(k, k*)` with the bath entropy change of the
/// forward jump. Self-paired channels have `k = k*` and `ds = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub k: ChannelId,
    pub k_star: ChannelId,
    pub ds: f64,
}

/// Local-detailed-balance pairing `L_k = e^{Δs_k/2} L_{k*}†`.
#[derive(Debug, Clone)]
pub struct DetailedBalancePairing {
    pairs: Vec<ChannelPair>,
}

impl DetailedBalancePairing {
    /// Structural validation only: involution and antisymmetric `Δs`. The
    /// numeric pairing residual against the jump operators is the job of
    /// [`validate_system`].
    pub fn new(pairs: Vec<ChannelPair>) -> Result<Self> {
        let mut partner: BTreeMap<ChannelId, (ChannelId, f64)> = BTreeMap::new();
        for p in &pairs {
            if p.k == p.k_star && p.ds != 0.0 {
                return Err(Error::InvalidOperator(format!(
                    "self-paired channel {} must have ds = 0, got {}",
                    p.k, p.ds
                )));
            }
            for (a, b, ds) in [(p.k, p.k_star, p.ds), (p.k_star, p.k, -p.ds)] {
                if let Some(&(prev_b, prev_ds)) = partner.get(&a) {
                    if prev_b != b || prev_ds != ds {
                        return Err(Error::InvalidOperator(format!(
                            "pairing is not an involution at channel {a}"
                        )));
                    }
                } else {
                    partner.insert(a, (b, ds));
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[ChannelPair] {
        &self.pairs
    }

    /// Partner channel and entropy change `Δs_k` for channel `k`, if paired.
    pub fn partner(&self, k: ChannelId) -> Option<(ChannelId, f64)> {
        for p in &self.pairs {
            if p.k == k {
                return Some((p.k_star, p.ds));
            }
            if p.k_star == k {
                return Some((p.k, -p.ds));
            }
        }
        None
    }

    /// True when every channel of `channels` appears in some pair.
    pub fn covers(&self, channels: &[ChannelId]) -> bool {
        channels.iter().all(|&c| self.partner(c).is_some())
    }
}

/// Hamiltonian plus jump operators, optionally with a detailed-balance
/// pairing carrying the bath entropy changes.
#[derive(Debug, Clone)]
pub struct OpenSystem {
    dim: usize,
    hamiltonian: HermitianOperator,
    jumps: Vec<JumpOperator>,
    pairing: Option<DetailedBalancePairing>,
}

impl OpenSystem {
    pub fn new(
        hamiltonian: HermitianOperator,
        jumps: Vec<JumpOperator>,
        pairing: Option<DetailedBalancePairing>,
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        if jumps.is_empty() {
            return Err(Error::InvalidOperator(
                "an open system needs at least one jump operator".into(),
            ));
        }
        let mut seen = BTreeMap::new();
        for j in &jumps {
            if j.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "jump channel {} is {}x{}, Hamiltonian is {}x{}",
                    j.channel_id(),
                    j.dim(),
                    j.dim(),
                    dim,
                    dim
                )));
            }
            if seen.insert(j.channel_id(), ()).is_some() {
                return Err(Error::InvalidOperator(format!(
                    "duplicate channel id {}",
                    j.channel_id()
                )));
            }
        }
        if let Some(p) = &pairing {
            for pair in p.pairs() {
                for id in [pair.k, pair.k_star] {
                    if !seen.contains_key(&id) {
                        return Err(Error::UnknownChannel(id.0));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            hamiltonian,
            jumps,
            pairing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn pairing(&self) -> Option<&DetailedBalancePairing> {
        self.pairing.as_ref()
    }

    pub fn channel_ids(&self) -> Vec<ChannelId> {
        self.jumps.iter().map(|j| j.channel_id()).collect()
    }

    pub fn jump(&self, id: ChannelId) -> Result<&JumpOperator> {
        self.jumps
            .iter()
            .find(|j| j.channel_id() == id)
            .ok_or(Error::UnknownChannel(id.0))
    }

    /// Index of channel `id` in the jump list.
    pub fn channel_index(&self, id: ChannelId) -> Result<usize> {
        self.jumps
            .iter()
            .position(|j| j.channel_id() == id)
            .ok_or(Error::UnknownChannel(id.0))
    }

    /// True when a pairing exists and covers every channel.
    pub fn has_full_pairing(&self) -> bool {
        match &self.pairing {
            Some(p) => p.covers(&self.channel_ids()),
            None => false,
        }
    }
}

/// A density operator: Hermitian, unit trace, positive semidefinite within
/// tolerance. Rank deficiency is allowed here and only rejected by the
/// weighted inner products.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    entries: CMat,
    min_eigenvalue: f64,
}

impl DensityOperator {
    pub fn new(entries: CMat) -> Result<Self> {
        let tol = Tolerances::default();
        square(&entries)?;
        finite(&entries)?;
        let res = linalg::hermiticity_residual(&entries);
        if res > tol.hermiticity {
            return Err(Error::InvalidState(format!(
                "not Hermitian (residual {res:.3e})"
            )));
        }
        let tr = trace(&entries);
        if (tr - C64::new(1.0, 0.0)).norm() > tol.trace {
            return Err(Error::InvalidState(format!(
                "trace {tr} deviates from one"
            )));
        }
        let herm = (&entries + &dagger(&entries)) * C64::new(0.5, 0.0);
        let (vals, _) = hermitian_eigensystem(&herm)?;
        let min_eigenvalue = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -tol.positivity {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eigenvalue:.3e}"
            )));
        }
        Ok(Self {
            entries: herm,
            min_eigenvalue,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn is_full_rank(&self, rank_tol: f64) -> bool {
        self.min_eigenvalue > rank_tol
    }

    /// Eigenvalues (clamped at zero and renormalized) with eigenvectors in
    /// columns; the mixture used to sample pure initial states.
    pub fn eigen_mixture(&self) -> Result<(Vec<f64>, CMat)> {
        let (vals, vecs) = hermitian_eigensystem(&self.entries)?;
        let mut probs: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidState("zero-trace eigen mixture".into()));
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok((probs, vecs))
    }

    /// `π^s` with the crate-wide rank tolerance.
    pub fn power(&self, exponent: f64) -> Result<CMat> {
        hermitian_power(
            &self.entries,
            exponent,
            Tolerances::default().rank,
        )
    }
}

/// Real per-channel weights `{c_k}` defining a counting observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingVector {
    weights: BTreeMap<ChannelId, f64>,
}

impl CountingVector {
    pub fn new(weights: BTreeMap<ChannelId, f64>) -> Self {
        Self { weights }
    }

    pub fn from_pairs(pairs: &[(u32, f64)]) -> Self {
        Self {
            weights: pairs.iter().map(|&(k, c)| (ChannelId(k), c)).collect(),
        }
    }

    /// Weights `1, …, n` in channel order for a system whose ids are `1..=n`.
    pub fn from_ordered(values: &[f64]) -> Self {
        Self {
            weights: values
                .iter()
                .enumerate()
                .map(|(i, &c)| (ChannelId(i as u32 + 1), c))
                .collect(),
        }
    }

    pub fn get(&self, id: ChannelId) -> Option<f64> {
        self.weights.get(&id).copied()
    }

    pub fn weights(&self) -> &BTreeMap<ChannelId, f64> {
        &self.weights
    }

    pub fn covers(&self, sys: &OpenSystem) -> bool {
        sys.channel_ids()
            .iter()
            .all(|id| self.weights.contains_key(id))
    }

    /// Weights aligned with the system's jump order.
    pub fn aligned(&self, sys: &OpenSystem) -> Result<Vec<f64>> {
        sys.jumps()
            .iter()
            .map(|j| {
                self.get(j.channel_id())
                    .ok_or(Error::MissingWeight(j.channel_id().0))
            })
            .collect()
    }

    /// A counting vector is a current when a pairing exists and the weights
    /// are antisymmetric under channel reversal, `c_k = −c_{k*}`.
    pub fn is_current(&self, sys: &OpenSystem) -> bool {
        let Some(pairing) = sys.pairing() else {
            return false;
        };
        if !self.covers(sys) || !sys.has_full_pairing() {
            return false;
        }
        for id in sys.channel_ids() {
            let (star, _) = pairing.partner(id).expect("full pairing");
            let c = self.get(id).expect("covered");
            let c_star = self.get(star).expect("covered");
            if (c + c_star).abs() > 1e-12 * (1.0 + c.abs().max(c_star.abs())) {
                return false;
            }
        }
        true
    }
}

/// Stack a square matrix into a column vector, row-major.
pub fn vectorize(a: &CMat) -> Result<CVec> {
    square(a)?;
    Ok(Array1::from_iter(a.iter().cloned()))
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &CVec, dim: usize) -> Result<CMat> {
    if v.len() != dim * dim {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot unstack to {dim}x{dim}",
            v.len()
        )));
    }
    Ok(CMat::from_shape_vec((dim, dim), v.to_vec()).expect("shape checked"))
}

/// The vectorized identity; `⟨⟨1|A⟩⟩ = tr A`.
pub fn vectorized_identity(dim: usize) -> CVec {
    vectorize(&linalg::identity(dim)).expect("identity is square")
}

/// `⟨A,B⟩_s = tr(A† π^s B π^{1−s})` for `s ∈ {0, 1/2}`.
///
/// Errors when `π` is rank deficient; every weighted-norm formula downstream
/// assumes an invertible stationary state.
pub fn inner_product_s(
    a: &CMat,
    b: &CMat,
    pi: &DensityOperator,
    s: SWeight,
) -> Result<C64> {
    let d = pi.dim();
    if a.nrows() != d || a.ncols() != d || b.nrows() != d || b.ncols() != d {
        return Err(Error::DimensionMismatch(
            "operands must match the state dimension".into(),
        ));
    }
    let sv = s.value();
    let left = pi.power(sv)?;
    let right = pi.power(1.0 - sv)?;
    let prod = dagger(a).dot(&left).dot(b).dot(&right);
    Ok(trace(&prod))
}

/// `‖A‖_s = sqrt(Re ⟨A,A⟩_s)`; the imaginary part must vanish to tolerance.
pub fn norm_s(a: &CMat, pi: &DensityOperator, s: SWeight) -> Result<f64> {
    let ip = inner_product_s(a, a, pi, s)?;
    let scale = ip.re.abs().max(1.0);
    if ip.im.abs() > 1e-12 * scale {
        return Err(Error::NumericalConsistency(format!(
            "s-norm has imaginary part {:.3e}",
            ip.im
        )));
    }
    if ip.re < -1e-12 {
        return Err(Error::NumericalConsistency(format!(
            "s-norm squared is negative: {:.3e}",
            ip.re
        )));
    }
    Ok(ip.re.max(0.0).sqrt())
}

/// Validation report for an [`OpenSystem`]: Hermiticity of the Hamiltonian,
/// the pairing identity residuals, duplicate channel ids, and notes about
/// channels outside the pairing.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub hermiticity_residual: f64,
    pub pairing_residuals: Vec<(u32, u32, f64)>,
    pub duplicate_channels: Vec<u32>,
    pub unpaired_channels: Vec<u32>,
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Check the GKSL and local-detailed-balance premises of a system. Failures
/// are reported, not raised.
pub fn validate_system(sys: &OpenSystem) -> ValidationReport {
    let tol = Tolerances::default();
    let mut notes = Vec::new();

    let hermiticity_residual = linalg::hermiticity_residual(sys.hamiltonian().entries());

    // Duplicate ids are rejected at construction; rechecked for files that
    // bypass `OpenSystem::new`.
    let mut duplicate_channels = Vec::new();
    let mut counts: BTreeMap<ChannelId, usize> = BTreeMap::new();
    for j in sys.jumps() {
        *counts.entry(j.channel_id()).or_insert(0) += 1;
    }
    for (id, n) in counts {
        if n > 1 {
            duplicate_channels.push(id.0);
        }
    }

    let mut pairing_residuals = Vec::new();
    let mut unpaired_channels = Vec::new();
    match sys.pairing() {
        Some(pairing) => {
            for pair in pairing.pairs() {
                let lk = sys.jump(pair.k).map(|j| j.entries().clone());
                let lks = sys.jump(pair.k_star).map(|j| j.entries().clone());
                if let (Ok(lk), Ok(lks)) = (lk, lks) {
                    let predicted = dagger(&lks) * C64::new((pair.ds / 2.0).exp(), 0.0);
                    let res = frobenius_norm(&(&lk - &predicted));
                    pairing_residuals.push((pair.k.0, pair.k_star.0, res));
                }
            }
            for id in sys.channel_ids() {
                if pairing.partner(id).is_none() {
                    unpaired_channels.push(id.0);
                    notes.push(format!(
                        "channel {id} unpaired; entropy production unavailable"
                    ));
                }
            }
        }
        None => {
            notes.push("no pairing; TKUR unavailable".into());
        }
    }

    let passed = hermiticity_residual <= tol.hermiticity
        && duplicate_channels.is_empty()
        && pairing_residuals.iter().all(|&(_, _, r)| r <= tol.pairing);

    ValidationReport {
        hermiticity_residual,
        pairing_residuals,
        duplicate_channels,
        unpaired_channels,
        notes,
        passed,
    }
}

fn square(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

fn finite(a: &CMat) -> Result<()> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidOperator("non-finite entries".into()));
    }
    Ok(())
}
