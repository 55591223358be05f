//! Quantum-jump Monte Carlo unraveling with exact waiting-time sampling:
//! the nonunitary evolution under `H_eff = H − (i/2)Σ L_k†L_k` is applied
//! through precomputed dyadic-step matrix exponentials, jump times are
//! located by bisection on the monotone survival norm, and ensembles are
//! reproducible through counter-based per-trajectory RNG streams.

use std::io::Write;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{dagger, expm, C64, CMat, CVec};
use crate::liouvillian::LiouvillianBundle;
use crate::operators::{ChannelId, CountingVector, OpenSystem};

/// One unraveled trajectory: the jump events in `[0, τ]` and the final pure
/// state.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub events: Vec<(f64, ChannelId)>,
    pub final_state: CVec,
}

impl TrajectoryRecord {
    /// Counting observable `φ = Σ_jumps c_k`; absent channels count zero.
    pub fn observable(&self, c: &CountingVector) -> f64 {
        self.events
            .iter()
            .map(|&(_, id)| c.get(id).unwrap_or(0.0))
            .sum()
    }
}

/// Ensemble statistics of a counting observable with standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleEstimate {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
    pub mean_std_err: f64,
    pub variance_std_err: f64,
    pub seed: u64,
}

/// Precomputed sampling data for one `(system, τ)`: dyadic-step
/// exponentials of `−i H_eff` down to the bisection resolution.
pub struct JumpSampler {
    tau: f64,
    levels: u32,
    jump_ops: Vec<(ChannelId, CMat)>,
    dyadic: Vec<CMat>,
}

impl JumpSampler {
    pub fn new(sys: &OpenSystem, tau: f64) -> Result<Self> {
        if tau < 0.0 {
            return Err(Error::NegativeHorizon(tau));
        }
        let mut h_eff = sys.hamiltonian().entries().mapv(|z| z * C64::new(0.0, -1.0));
        // −i H − ½ Σ L†L  (the generator of the nonunitary segment evolution)
        for j in sys.jumps() {
            let ldl = dagger(j.entries()).dot(j.entries());
            h_eff -= &(&ldl * C64::new(0.5, 0.0));
        }

        let time_tol = Tolerances::default().jump_time;
        let levels = if tau > 0.0 {
            ((tau / time_tol).log2().ceil() as i64).clamp(20, 50) as u32
        } else {
            20
        };
        let mut dyadic = Vec::with_capacity(levels as usize + 1);
        for j in 0..=levels {
            let dt = tau / (1u64 << j) as f64;
            dyadic.push(expm(&(&h_eff * C64::new(dt, 0.0))));
        }
        Ok(Self {
            tau,
            levels,
            jump_ops: sys
                .jumps()
                .iter()
                .map(|j| (j.channel_id(), j.entries().clone()))
                .collect(),
            dyadic,
        })
    }

    fn total_units(&self) -> u64 {
        1u64 << self.levels
    }

    fn time_of(&self, units: u64) -> f64 {
        self.tau * units as f64 / self.total_units() as f64
    }

    /// Evolve by `units` dyadic steps, checking that the survival norm never
    /// increases beyond roundoff.
    fn evolve_units(&self, psi: &CVec, units: u64) -> Result<CVec> {
        let mut out = psi.clone();
        for p in (0..=self.levels).rev() {
            if units & (1u64 << p) != 0 {
                let level = (self.levels - p) as usize;
                let next = self.dyadic[level].dot(&out);
                check_no_norm_increase(&out, &next)?;
                out = next;
            }
        }
        Ok(out)
    }
}

fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn check_no_norm_increase(before: &CVec, after: &CVec) -> Result<()> {
    if norm_sqr(after) > norm_sqr(before) * (1.0 + 1e-10) {
        return Err(Error::NormIncrease);
    }
    Ok(())
}

/// Sample one trajectory from `psi0` over `[0, τ]` with the waiting-time
/// algorithm: draw `r`, bisect the survival norm `‖e^{−iH_eff t}ψ‖²` down to
/// the dyadic resolution, jump into channel `k` with probability
/// `‖L_k ψ‖²/Σ_j ‖L_j ψ‖²`, renormalize, repeat.
pub fn sample_trajectory(
    sampler: &JumpSampler,
    psi0: &CVec,
    rng: &mut impl Rng,
) -> Result<TrajectoryRecord> {
    let n0 = norm_sqr(psi0);
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::MonteCarlo(format!(
            "initial state norm² = {n0} is not one"
        )));
    }
    let total = sampler.total_units();
    let mut elapsed: u64 = 0;
    let mut psi = psi0.clone();
    let mut events = Vec::new();

    loop {
        let r: f64 = rng.sample(Open01);
        let remaining = total - elapsed;
        let survived = sampler.evolve_units(&psi, remaining)?;
        if norm_sqr(&survived) >= r {
            let n = norm_sqr(&survived).sqrt();
            return Ok(TrajectoryRecord {
                events,
                final_state: survived.mapv(|z| z / C64::new(n, 0.0)),
            });
        }

        // Crossing inside the window: simultaneous binary march + bisection.
        let mut step_units = 0u64;
        let mut psi_s = psi.clone();
        for j in 1..=sampler.levels {
            let step = 1u64 << (sampler.levels - j);
            if step_units + step <= remaining {
                let candidate = sampler.dyadic[j as usize].dot(&psi_s);
                check_no_norm_increase(&psi_s, &candidate)?;
                if norm_sqr(&candidate) > r {
                    psi_s = candidate;
                    step_units += step;
                }
            }
        }
        // Keep jump times strictly increasing at the grid resolution.
        if step_units == 0 {
            psi_s = sampler.dyadic[sampler.levels as usize].dot(&psi_s);
            step_units = 1;
        }
        elapsed += step_units;

        let weights: Vec<f64> = sampler
            .jump_ops
            .iter()
            .map(|(_, l)| norm_sqr(&l.dot(&psi_s)))
            .collect();
        let w_total: f64 = weights.iter().sum();
        if w_total <= 0.0 {
            return Err(Error::MonteCarlo(
                "jump detected but no channel has weight".into(),
            ));
        }
        let mut pick = rng.random::<f64>() * w_total;
        let mut chosen = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                chosen = k;
                break;
            }
            pick -= w;
        }
        let (id, l) = &sampler.jump_ops[chosen];
        let jumped = l.dot(&psi_s);
        let jn = norm_sqr(&jumped).sqrt();
        psi = jumped.mapv(|z| z / C64::new(jn, 0.0));
        events.push((sampler.time_of(elapsed), *id));

        if elapsed >= total {
            return Ok(TrajectoryRecord {
                events,
                final_state: psi,
            });
        }
    }
}

/// Online moment accumulator up to the fourth central moment, with an
/// associative merge so block results can be combined in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    fn push(&mut self, x: f64) {
        self.merge(MomentAccumulator {
            n: 1,
            mean: x,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
        });
    }

    fn merge(&mut self, other: MomentAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        let m3 = self.m3
            + other.m3
            + delta * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += other.n;
    }

    fn finish(&self, seed: u64) -> Result<EnsembleEstimate> {
        if self.n < 2 {
            return Err(Error::MonteCarlo(format!(
                "need at least 2 samples, got {}",
                self.n
            )));
        }
        let n = self.n as f64;
        let variance = self.m2 / (n - 1.0);
        let mu4 = self.m4 / n;
        let var_of_var = (mu4 - (n - 3.0) / (n - 1.0) * variance * variance) / n;
        Ok(EnsembleEstimate {
            n: self.n,
            mean: self.mean,
            variance,
            mean_std_err: (variance / n).sqrt(),
            variance_std_err: var_of_var.max(0.0).sqrt(),
            seed,
        })
    }
}

const BLOCK: u64 = 256;

/// Monte Carlo moments of a counting observable over `n` trajectories from
/// the stationary eigen-mixture. Identical seeds give identical results
/// regardless of thread count: trajectory `i` runs on RNG stream `i`, and
/// block accumulators merge in index order.
pub fn estimate_moments(
    sys: &OpenSystem,
    c: &CountingVector,
    tau: f64,
    n: u64,
    seed: u64,
) -> Result<EnsembleEstimate> {
    if n < 2 {
        return Err(Error::MonteCarlo(format!("need at least 2 samples, got {n}")));
    }
    if !c.covers(sys) {
        let missing = sys
            .channel_ids()
            .into_iter()
            .find(|id| c.get(*id).is_none())
            .expect("missing channel");
        return Err(Error::MissingWeight(missing.0));
    }
    let bundle = LiouvillianBundle::new(sys.clone())?;
    let (probs, vecs) = bundle.stationary().eigen_mixture()?;
    let sampler = JumpSampler::new(sys, tau)?;

    let blocks = n.div_ceil(BLOCK);
    let partials: Vec<Result<MomentAccumulator>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(n);
            let mut acc = MomentAccumulator::default();
            for i in lo..hi {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(i);
                let record = run_one(&sampler, &probs, &vecs, &mut rng)?;
                acc.push(record.observable(c));
            }
            Ok(acc)
        })
        .collect();

    let mut total = MomentAccumulator::default();
    for p in partials {
        total.merge(p?);
    }
    total.finish(seed)
}

/// Sample the initial pure state from the stationary eigen-mixture, then run
/// one trajectory.
fn run_one(
    sampler: &JumpSampler,
    probs: &[f64],
    vecs: &CMat,
    rng: &mut impl Rng,
) -> Result<TrajectoryRecord> {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut pick = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            pick = k;
            break;
        }
    }
    let psi0: CVec = vecs.column(pick).to_owned();
    sample_trajectory(sampler, &psi0, rng)
}

/// Sample `n` full trajectory records (for dumps and diagnostics), one RNG
/// stream per trajectory as in [`estimate_moments`].
pub fn sample_ensemble(
    sys: &OpenSystem,
    tau: f64,
    n: u64,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let bundle = LiouvillianBundle::new(sys.clone())?;
    let (probs, vecs) = bundle.stationary().eigen_mixture()?;
    let sampler = JumpSampler::new(sys, tau)?;
    (0..n)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(i);
            run_one(&sampler, &probs, &vecs, &mut rng)
        })
        .collect()
}

/// Event dump: `time,channel` lines with a parameter header, one block per
/// trajectory.
pub fn write_event_csv<W: Write>(
    mut w: W,
    records: &[TrajectoryRecord],
    seed: u64,
    tau: f64,
    description: &str,
) -> std::io::Result<()> {
    writeln!(
        w,
        "# seed={seed} tau={tau:.16e} trajectories={} {description}",
        records.len()
    )?;
    writeln!(w, "time,channel")?;
    for (i, rec) in records.iter().enumerate() {
        writeln!(w, "# trajectory {i}")?;
        for &(t, id) in &rec.events {
            writeln!(w, "{t:.16e},{id}")?;
        }
    }
    Ok(())
}
