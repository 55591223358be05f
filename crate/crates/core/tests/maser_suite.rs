//! Quadrature and embedding cross-checks on the three-level maser and small
//! reference systems.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use qur_core::linalg::{expm, frobenius_norm, CMat};
use qur_core::liouvillian::{build_adjoint, LiouvillianBundle};
use qur_core::models::{self, embed_classical, ClassicalChain, MaserParams};
use qur_core::operators::unvectorize;

fn maser_bundle(delta: f64) -> LiouvillianBundle {
    let p = MaserParams {
        delta,
        ..Default::default()
    };
    LiouvillianBundle::new(models::build_maser(&p).unwrap()).unwrap()
}

/// Gauss–Legendre nodes/weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // p_n(x) and derivative via the three-term recurrence
            let (mut p0, mut p1) = (1.0_f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0_f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[test]
fn k2_matches_gauss_legendre_quadrature() {
    let bundle = maser_bundle(1.0);
    let tau = 10.0;
    let props = bundle.propagators(tau).unwrap();

    let n = 80;
    let (nodes, weights) = gauss_legendre(n);
    let gen = &bundle.generator().entries;
    let mut quad: CMat = Array2::zeros((9, 9));
    for (x, w) in nodes.iter().zip(&weights) {
        let t = 0.5 * tau * (x + 1.0);
        let e = expm(&(gen * C64::new(t, 0.0)));
        quad += &(&e * C64::new(0.5 * tau * w * (tau - t), 0.0));
    }
    let err = frobenius_norm(&(&props.k2 - &quad)) / frobenius_norm(&props.k2);
    assert!(err < 1e-8, "K₂ vs quadrature relative error {err:.3e}");
}

#[test]
fn adjoint_restricted_to_diagonals_is_rate_matrix_transpose() {
    let rates = ndarray::array![[0.0, 1.1, 0.4], [0.6, 0.0, 0.9], [0.3, 0.7, 0.0]];
    let chain = ClassicalChain::new(rates.clone()).unwrap();
    let emb = embed_classical(&chain, true).unwrap();
    let adj = build_adjoint(&emb.system);

    // Classical generator matrix: W[m][n] = w_mn, W[n][n] = −Σ_m w_mn.
    let d = 3;
    let mut w = Array2::<f64>::zeros((d, d));
    for m in 0..d {
        for n in 0..d {
            if m != n {
                w[[m, n]] += rates[[m, n]];
                w[[n, n]] -= rates[[m, n]];
            }
        }
    }

    for probe in 0..d {
        let mut f = CMat::zeros((d, d));
        f[[probe, probe]] = C64::new(1.0, 0.0);
        let out = adj.apply(&f).unwrap();
        for n in 0..d {
            let want = w[[probe, n]]; // (Wᵀ f)_n = Σ_m W_mn f_m
            assert!(
                (out[[n, n]].re - want).abs() < 1e-12,
                "diagonal action mismatch at n = {n}"
            );
            assert!(out[[n, n]].im.abs() < 1e-14);
        }
        // off-diagonals of the image stay zero for diagonal input
        for m in 0..d {
            for n in 0..d {
                if m != n {
                    assert!(out[[m, n]].norm() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn hand_written_model_file_matches_builtin_amplitude_damping() {
    // A 2-level amplitude-damping model written as a JSON document, loaded,
    // and compared against the directly constructed system.
    let gamma: f64 = 0.8;
    let amp = gamma.sqrt();
    let text = format!(
        r#"{{
  "format": 1,
  "dim": 2,
  "hamiltonian": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]],
  "jumps": [
    {{ "id": 1, "matrix": [[[0.0, 0.0], [{amp}, 0.0]], [[0.0, 0.0], [0.0, 0.0]]] }}
  ]
}}"#
    );
    let dir = std::env::temp_dir().join("qur-handwritten");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("damping.json");
    std::fs::write(&path, text).unwrap();
    let sys = models::load_model(&path).unwrap();

    use qur_core::operators::{ChannelId, HermitianOperator, JumpOperator, OpenSystem};
    let mut l = CMat::zeros((2, 2));
    l[[0, 1]] = C64::new(amp, 0.0);
    let builtin = OpenSystem::new(
        HermitianOperator::new(CMat::zeros((2, 2))).unwrap(),
        vec![JumpOperator::new(ChannelId(1), l).unwrap()],
        None,
    )
    .unwrap();

    let b1 = LiouvillianBundle::new(sys).unwrap();
    let b2 = LiouvillianBundle::new(builtin).unwrap();
    assert!(
        frobenius_norm(&(&b1.generator().entries - &b2.generator().entries)) == 0.0
    );
    let pi1 = b1.stationary().entries();
    let pi2 = b2.stationary().entries();
    assert!(frobenius_norm(&(pi1 - pi2)) < 1e-13);
    // Decay of the excited population at rate γ.
    let props = b1.propagators(1.0).unwrap();
    let mut excited = CMat::zeros((2, 2));
    excited[[1, 1]] = C64::new(1.0, 0.0);
    let evolved = unvectorize(
        &props
            .propagator
            .dot(&qur_core::operators::vectorize(&excited).unwrap()),
        2,
    )
    .unwrap();
    assert!((evolved[[1, 1]].re - (-gamma).exp()).abs() < 1e-12);
}
