//! Built-in models — the driven three-level maser and classical Markov jump
//! chains embedded as diagonal GKSL systems — plus the JSON model file
//! format (`format: 1`, complex entries as `[re, im]` pairs).

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, CMat};
use crate::operators::{
    ChannelId, ChannelPair, CountingVector, DetailedBalancePairing, HermitianOperator,
    JumpOperator, OpenSystem,
};

/// Parameters of the three-level maser in its rotating frame: two thermal
/// baths (couplings `γ_h`, `γ_c`, occupations `n_h`, `n_c`), drive amplitude
/// `Ω`, and detuning `Δ`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaserParams {
    pub gamma_h: f64,
    pub gamma_c: f64,
    pub n_h: f64,
    pub n_c: f64,
    pub omega: f64,
    pub delta: f64,
}

impl Default for MaserParams {
    fn default() -> Self {
        Self {
            gamma_h: 0.1,
            gamma_c: 2.0,
            n_h: 5.0,
            n_c: 0.02,
            omega: 0.15,
            delta: 1.0,
        }
    }
}

impl MaserParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_h", self.gamma_h),
            ("gamma_c", self.gamma_c),
            ("n_h", self.n_h),
            ("n_c", self.n_c),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Model(format!(
                    "maser parameter {name} must be nonnegative, got {v}"
                )));
            }
        }
        if !self.omega.is_finite() || !self.delta.is_finite() {
            return Err(Error::Model("maser omega/delta must be finite".into()));
        }
        Ok(())
    }

    /// Set the swept parameter by name.
    pub fn with_value(mut self, name: &str, value: f64) -> Result<Self> {
        match name {
            "gamma_h" => self.gamma_h = value,
            "gamma_c" => self.gamma_c = value,
            "n_h" => self.n_h = value,
            "n_c" => self.n_c = value,
            "omega" => self.omega = value,
            "delta" => self.delta = value,
            other => {
                return Err(Error::Model(format!("unknown maser parameter '{other}'")));
            }
        }
        Ok(self)
    }
}

fn ket_bra(d: usize, i: usize, j: usize, amp: f64) -> CMat {
    let mut m = CMat::zeros((d, d));
    m[[i, j]] = C64::new(amp, 0.0);
    m
}

/// The three-level maser in the rotating frame:
/// `H = −Δ σ₂₂ + Ω(σ₁₂ + σ₂₁)` on levels `{1,2,3}` (indices `{0,1,2}`),
/// with hot-bath channels on `1↔3` and cold-bath channels on `2↔3`.
///
/// Channels are ordered `(1, 1*, 2, 2*)` with ids `1..=4`; the pairing
/// entropies `Δs₁ = ln(n_h/(n_h+1))` and `Δs₂ = ln(n_c/(n_c+1))` are forced
/// by the detailed-balance identity applied to the Bose amplitudes. Dead
/// absorption channels (`n = 0`) are dropped, leaving their emission partner
/// unpaired.
pub fn build_maser(p: &MaserParams) -> Result<OpenSystem> {
    p.validate()?;
    let d = 3;
    let mut h = CMat::zeros((d, d));
    h[[1, 1]] = C64::new(-p.delta, 0.0);
    h[[0, 1]] = C64::new(p.omega, 0.0);
    h[[1, 0]] = C64::new(p.omega, 0.0);
    let hamiltonian = HermitianOperator::new(h)?;

    // (id, amplitude², |i⟩⟨j|)
    let channels: [(u32, f64, usize, usize); 4] = [
        (1, p.gamma_h * p.n_h, 2, 0),         // L₁  = √(γ_h n_h) σ₃₁
        (2, p.gamma_h * (p.n_h + 1.0), 0, 2), // L₁* = √(γ_h(n_h+1)) σ₁₃
        (3, p.gamma_c * p.n_c, 2, 1),         // L₂  = √(γ_c n_c) σ₃₂
        (4, p.gamma_c * (p.n_c + 1.0), 1, 2), // L₂* = √(γ_c(n_c+1)) σ₂₃
    ];

    let mut jumps = Vec::new();
    let mut alive = [false; 5];
    for &(id, rate, i, j) in &channels {
        if rate > 0.0 {
            jumps.push(JumpOperator::new(
                ChannelId(id),
                ket_bra(d, i, j, rate.sqrt()),
            )?);
            alive[id as usize] = true;
        }
    }
    if jumps.is_empty() {
        return Err(Error::Model("all maser channels are dead".into()));
    }

    let mut pairs = Vec::new();
    if alive[1] && alive[2] {
        pairs.push(ChannelPair {
            k: ChannelId(1),
            k_star: ChannelId(2),
            ds: (p.n_h / (p.n_h + 1.0)).ln(),
        });
    }
    if alive[3] && alive[4] {
        pairs.push(ChannelPair {
            k: ChannelId(3),
            k_star: ChannelId(4),
            ds: (p.n_c / (p.n_c + 1.0)).ln(),
        });
    }
    let pairing = if pairs.is_empty() {
        None
    } else {
        Some(DetailedBalancePairing::new(pairs)?)
    };

    OpenSystem::new(hamiltonian, jumps, pairing)
}

/// The net-cycle current of the maser, `c = (1, −1, −1, 1)` on channels
/// `(1, 1*, 2, 2*)`.
pub fn maser_cycle_current() -> CountingVector {
    CountingVector::from_ordered(&[1.0, -1.0, -1.0, 1.0])
}

/// Heat counting vectors of the maser for bath temperatures `(T_h, T_c)`:
/// the heat supplied by the hot bath and the heat absorbed by the cold bath,
/// with per-jump quanta `q = T·ln((n+1)/n)` fixed by the pairing entropies.
pub fn maser_heat_currents(p: &MaserParams, t_hot: f64, t_cold: f64) -> (CountingVector, CountingVector) {
    let q_h = t_hot * ((p.n_h + 1.0) / p.n_h).ln();
    let q_c = t_cold * ((p.n_c + 1.0) / p.n_c).ln();
    let hot = CountingVector::from_ordered(&[q_h, -q_h, 0.0, 0.0]);
    let cold = CountingVector::from_ordered(&[0.0, 0.0, -q_c, q_c]);
    (hot, cold)
}

/// A classical Markov jump process: `rates[m][n] = w_{mn} ≥ 0` is the rate
/// of the jump `n → m` (off-diagonal; the diagonal is ignored).
#[derive(Debug, Clone)]
pub struct ClassicalChain {
    dim: usize,
    rates: Array2<f64>,
}

impl ClassicalChain {
    pub fn new(rates: Array2<f64>) -> Result<Self> {
        let dim = rates.nrows();
        if rates.ncols() != dim {
            return Err(Error::NonSquare {
                rows: dim,
                cols: rates.ncols(),
            });
        }
        if dim < 2 {
            return Err(Error::Model("a chain needs at least two states".into()));
        }
        for m in 0..dim {
            for n in 0..dim {
                let w = rates[[m, n]];
                if m != n && (!w.is_finite() || w < 0.0) {
                    return Err(Error::Model(format!(
                        "rate w[{m}][{n}] = {w} must be finite and nonnegative"
                    )));
                }
            }
        }
        let chain = Self { dim, rates };
        if !chain.is_irreducible() {
            return Err(Error::Model(
                "reducible chain: stationary distribution not unique".into(),
            ));
        }
        Ok(chain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rates(&self) -> &Array2<f64> {
        &self.rates
    }

    /// Strong connectivity of the directed graph of positive rates, both ways.
    fn is_irreducible(&self) -> bool {
        let forward = |from: usize| -> Vec<usize> {
            (0..self.dim)
                .filter(|&m| m != from && self.rates[[m, from]] > 0.0)
                .collect()
        };
        let backward = |from: usize| -> Vec<usize> {
            (0..self.dim)
                .filter(|&n| n != from && self.rates[[from, n]] > 0.0)
                .collect()
        };
        reaches_all(self.dim, forward) && reaches_all(self.dim, backward)
    }
}

fn reaches_all(dim: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> bool {
    let mut seen = vec![false; dim];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for w in neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// A classical chain embedded as a diagonal GKSL system, remembering which
/// directed edge each channel came from.
#[derive(Debug, Clone)]
pub struct ClassicalEmbedding {
    pub system: OpenSystem,
    /// `edges[i] = (m, n)`: channel `i+1` is the jump `n → m`.
    pub edges: Vec<(usize, usize)>,
}

impl ClassicalEmbedding {
    /// Channel id of the directed edge `n → m`.
    pub fn channel_of(&self, m: usize, n: usize) -> Option<ChannelId> {
        self.edges
            .iter()
            .position(|&e| e == (m, n))
            .map(|i| ChannelId(i as u32 + 1))
    }
}

/// Embed a classical chain: `H = 0`, one channel `L = √w_{mn} |m⟩⟨n|` per
/// directed edge with positive rate; edges scanned in row-major order.
///
/// With `with_pairing`, each edge is paired with its reverse and
/// `Δs = ln(w_{mn}/w_{nm})`, the unique value compatible with the pairing
/// identity; a one-way edge makes local detailed balance impossible.
pub fn embed_classical(chain: &ClassicalChain, with_pairing: bool) -> Result<ClassicalEmbedding> {
    let d = chain.dim();
    let hamiltonian = HermitianOperator::new(CMat::zeros((d, d)))?;
    let mut jumps = Vec::new();
    let mut edges = Vec::new();
    for m in 0..d {
        for n in 0..d {
            if m == n {
                continue;
            }
            let w = chain.rates()[[m, n]];
            if w > 0.0 {
                let id = ChannelId(edges.len() as u32 + 1);
                jumps.push(JumpOperator::new(id, ket_bra(d, m, n, w.sqrt()))?);
                edges.push((m, n));
            }
        }
    }

    let pairing = if with_pairing {
        let mut pairs = Vec::new();
        for (i, &(m, n)) in edges.iter().enumerate() {
            if m < n {
                continue; // handle each undirected edge once, from (m>n) side
            }
            let w_fwd = chain.rates()[[m, n]];
            let w_rev = chain.rates()[[n, m]];
            if w_rev <= 0.0 {
                return Err(Error::Model(format!(
                    "edge {n}→{m} has no reverse rate; local detailed balance impossible"
                )));
            }
            let rev_idx = edges
                .iter()
                .position(|&e| e == (n, m))
                .expect("reverse edge present");
            pairs.push(ChannelPair {
                k: ChannelId(i as u32 + 1),
                k_star: ChannelId(rev_idx as u32 + 1),
                ds: (w_fwd / w_rev).ln(),
            });
        }
        // also reject one-way edges seen from the (m<n) side
        for &(m, n) in &edges {
            if m < n && chain.rates()[[n, m]] <= 0.0 {
                return Err(Error::Model(format!(
                    "edge {n}→{m} has no reverse rate; local detailed balance impossible"
                )));
            }
        }
        Some(DetailedBalancePairing::new(pairs)?)
    } else {
        None
    };

    let system = OpenSystem::new(hamiltonian, jumps, pairing)?;
    Ok(ClassicalEmbedding { system, edges })
}

// ---------------------------------------------------------------------------
// Model file format
// ---------------------------------------------------------------------------

type ComplexPair = [f64; 2];

#[derive(Serialize, Deserialize)]
struct JumpEntry {
    id: u32,
    matrix: Vec<Vec<ComplexPair>>,
}

#[derive(Serialize, Deserialize)]
struct PairEntry {
    k: u32,
    k_star: u32,
    ds: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: u32,
    dim: usize,
    hamiltonian: Vec<Vec<ComplexPair>>,
    jumps: Vec<JumpEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairing: Option<Vec<PairEntry>>,
}

fn matrix_to_rows(m: &CMat) -> Vec<Vec<ComplexPair>> {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<ComplexPair>], dim: usize, field: &str) -> Result<CMat> {
    if rows.len() != dim {
        return Err(Error::Model(format!(
            "{field}: {} rows, expected {dim}",
            rows.len()
        )));
    }
    let mut m = CMat::zeros((dim, dim));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Model(format!(
                "{field}: row {i} has {} entries, expected {dim}",
                row.len()
            )));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Model(format!(
                    "{field}[{i}][{j}]: non-finite entry"
                )));
            }
            m[[i, j]] = C64::new(re, im);
        }
    }
    Ok(m)
}

/// Serialize a system to the versioned JSON schema.
pub fn model_to_json(sys: &OpenSystem) -> serde_json::Value {
    let file = ModelFile {
        format: 1,
        dim: sys.dim(),
        hamiltonian: matrix_to_rows(sys.hamiltonian().entries()),
        jumps: sys
            .jumps()
            .iter()
            .map(|j| JumpEntry {
                id: j.channel_id().0,
                matrix: matrix_to_rows(j.entries()),
            })
            .collect(),
        pairing: sys.pairing().map(|p| {
            p.pairs()
                .iter()
                .map(|pair| PairEntry {
                    k: pair.k.0,
                    k_star: pair.k_star.0,
                    ds: pair.ds,
                })
                .collect()
        }),
    };
    serde_json::to_value(&file).expect("model serialization cannot fail")
}

/// Parse a system from the JSON schema, reporting the offending field on
/// invariant violations.
pub fn model_from_json(value: &serde_json::Value) -> Result<OpenSystem> {
    let file: ModelFile = serde_json::from_value(value.clone())
        .map_err(|e| Error::Model(format!("schema: {e}")))?;
    if file.format != 1 {
        return Err(Error::Model(format!(
            "format: unsupported version {}, expected 1",
            file.format
        )));
    }
    if file.dim < 2 {
        return Err(Error::Model(format!("dim: must be >= 2, got {}", file.dim)));
    }
    let h = rows_to_matrix(&file.hamiltonian, file.dim, "hamiltonian")?;
    let hamiltonian = HermitianOperator::new(h)
        .map_err(|e| Error::Model(format!("hamiltonian: {e}")))?;
    let mut jumps = Vec::new();
    for (i, entry) in file.jumps.iter().enumerate() {
        let m = rows_to_matrix(&entry.matrix, file.dim, &format!("jumps[{i}].matrix"))?;
        jumps.push(
            JumpOperator::new(ChannelId(entry.id), m)
                .map_err(|e| Error::Model(format!("jumps[{i}]: {e}")))?,
        );
    }
    let pairing = match file.pairing {
        Some(entries) => {
            let pairs = entries
                .iter()
                .map(|p| ChannelPair {
                    k: ChannelId(p.k),
                    k_star: ChannelId(p.k_star),
                    ds: p.ds,
                })
                .collect();
            Some(
                DetailedBalancePairing::new(pairs)
                    .map_err(|e| Error::Model(format!("pairing: {e}")))?,
            )
        }
        None => None,
    };
    OpenSystem::new(hamiltonian, jumps, pairing).map_err(|e| Error::Model(e.to_string()))
}

pub fn save_model(sys: &OpenSystem, path: impl AsRef<Path>) -> Result<()> {
    let json = model_to_json(sys);
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OpenSystem> {
    let text = std::fs::read_to_string(&path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Model(format!("parse: {e}")))?;
    model_from_json(&value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_norm;
    use crate::operators::validate_system;
    use ndarray::array;

    #[test]
    fn maser_default_passes_validation() {
        let sys = build_maser(&MaserParams::default()).unwrap();
        let report = validate_system(&sys);
        assert!(report.passed, "{report:?}");
        assert!(report
            .pairing_residuals
            .iter()
            .all(|&(_, _, r)| r < 1e-12));
        assert!(maser_cycle_current().is_current(&sys));
    }

    #[test]
    fn maser_dead_channel_dropped_and_flagged() {
        let p = MaserParams {
            n_h: 0.0,
            ..Default::default()
        };
        let sys = build_maser(&p).unwrap();
        assert_eq!(sys.jumps().len(), 3);
        assert!(!sys.has_full_pairing());
        let report = validate_system(&sys);
        assert!(report.passed);
        assert_eq!(report.unpaired_channels, vec![2]);
    }

    #[test]
    fn maser_omega_zero_block_decouples() {
        // Without the drive the generator decouples populations from
        // coherences: no matrix element connects diagonal and off-diagonal
        // vectorized indices. The kernel nevertheless stays unique because
        // every coherence still decays under the baths.
        let p = MaserParams {
            omega: 0.0,
            ..Default::default()
        };
        let sys = build_maser(&p).unwrap();
        let gen = crate::liouvillian::build_generator(&sys);
        let diag_idx: Vec<usize> = (0..3).map(|m| m * 3 + m).collect();
        for &di in &diag_idx {
            for other in 0..9 {
                if !diag_idx.contains(&other) {
                    assert!(gen.entries[[di, other]].norm() < 1e-14);
                    assert!(gen.entries[[other, di]].norm() < 1e-14);
                }
            }
        }
        let bundle = crate::liouvillian::LiouvillianBundle::new(sys).unwrap();
        assert!(bundle.stationary().is_full_rank(1e-12));
    }

    #[test]
    fn perturbed_pairing_fails_validation() {
        let sys = build_maser(&MaserParams::default()).unwrap();
        let pairs: Vec<ChannelPair> = sys
            .pairing()
            .unwrap()
            .pairs()
            .iter()
            .enumerate()
            .map(|(i, p)| ChannelPair {
                ds: if i == 0 { p.ds + 0.1 } else { p.ds },
                ..*p
            })
            .collect();
        let broken = OpenSystem::new(
            sys.hamiltonian().clone(),
            sys.jumps().to_vec(),
            Some(DetailedBalancePairing::new(pairs).unwrap()),
        )
        .unwrap();
        let report = validate_system(&broken);
        assert!(!report.passed);
        assert!(report.pairing_residuals[0].2 > 1e-2);
    }

    #[test]
    fn classical_chain_rejects_reducible_and_negative() {
        // One-way 2-state chain is reducible in reverse direction.
        assert!(ClassicalChain::new(array![[0.0, 1.0], [0.0, 0.0]]).is_err());
        assert!(ClassicalChain::new(array![[0.0, -1.0], [1.0, 0.0]]).is_err());
        assert!(ClassicalChain::new(array![[0.0, 1.0], [2.0, 0.0]]).is_ok());
    }

    #[test]
    fn embed_classical_requires_reverse_rates_for_pairing() {
        let chain =
            ClassicalChain::new(array![[0.0, 1.0, 0.0], [1.0, 0.0, 2.0], [1.0, 0.0, 0.0]]);
        let chain = chain.unwrap();
        assert!(embed_classical(&chain, true).is_err());
        assert!(embed_classical(&chain, false).is_ok());
    }

    #[test]
    fn embed_classical_pairing_satisfies_identity() {
        let chain = ClassicalChain::new(array![[0.0, 0.3], [1.7, 0.0]]).unwrap();
        let emb = embed_classical(&chain, true).unwrap();
        let report = validate_system(&emb.system);
        assert!(report.passed, "{report:?}");
        // Δs = ln(w_fwd/w_rev) on the (1,0) edge.
        let id = emb.channel_of(1, 0).unwrap();
        let (_, ds) = emb.system.pairing().unwrap().partner(id).unwrap();
        assert!((ds - (1.7_f64 / 0.3).ln()).abs() < 1e-14);
    }

    #[test]
    fn model_file_round_trip() {
        let sys = build_maser(&MaserParams::default()).unwrap();
        let dir = std::env::temp_dir().join("qur-model-roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("maser.json");
        save_model(&sys, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.dim(), sys.dim());
        assert!(
            frobenius_norm(&(back.hamiltonian().entries() - sys.hamiltonian().entries())) == 0.0
        );
        for (a, b) in back.jumps().iter().zip(sys.jumps()) {
            assert_eq!(a.channel_id(), b.channel_id());
            assert!(frobenius_norm(&(a.entries() - b.entries())) == 0.0);
        }
        let (pa, pb) = (back.pairing().unwrap(), sys.pairing().unwrap());
        assert_eq!(pa.pairs(), pb.pairs());
    }

    #[test]
    fn model_file_reports_field_errors() {
        let mut json = model_to_json(&build_maser(&MaserParams::default()).unwrap());
        json["hamiltonian"][0][1] = serde_json::json!([9.0, 0.0]); // breaks Hermiticity
        let err = model_from_json(&json).unwrap_err().to_string();
        assert!(err.contains("hamiltonian"), "{err}");

        let mut json2 = model_to_json(&build_maser(&MaserParams::default()).unwrap());
        json2["jumps"][0]["matrix"] = serde_json::json!([[[0.0, 0.0]]]);
        let err2 = model_from_json(&json2).unwrap_err().to_string();
        assert!(err2.contains("jumps[0].matrix"), "{err2}");
    }
}
