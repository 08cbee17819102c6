//! Special functions and model algebra against independent references.

use lure_pcac_core::bocf::{build_realization, build_state, IdentifiedModel};
use lure_pcac_core::numerics::{beta_reg, eigenvalues, f_cdf, f_inv_cdf, ln_gamma, spectral_radius};
use lure_pcac_core::rls::IoHistory;
use lure_pcac_core::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

#[test]
fn ln_gamma_matches_statrs() {
    for i in 1..400 {
        let x = i as f64 * 0.137;
        let ours = ln_gamma(x);
        let theirs = statrs::function::gamma::ln_gamma(x);
        assert!((ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0), "x = {x}: {ours} vs {theirs}");
    }
}

#[test]
fn beta_reg_matches_statrs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let a = rng.gen_range(0.1..150.0);
        let b = rng.gen_range(0.1..150.0);
        let x = rng.gen_range(0.0..1.0);
        let ours = beta_reg(a, b, x);
        let theirs = statrs::function::beta::beta_reg(a, b, x);
        assert!((ours - theirs).abs() < 1e-12, "I_{x}({a}, {b}): {ours} vs {theirs}");
    }
}

#[test]
fn f_cdf_matches_statrs_distribution() {
    for (d1, d2) in [(1.0, 1.0), (5.0, 25.0), (40.0, 200.0), (80.0, 9.5)] {
        let dist = FisherSnedecor::new(d1, d2).unwrap();
        for i in 1..100 {
            let x = i as f64 * 0.05;
            assert!((f_cdf(d1, d2, x) - dist.cdf(x)).abs() < 1e-12);
        }
    }
}

#[test]
fn f_quantile_inverts_cdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let d1 = rng.gen_range(1.0..300.0);
        let d2 = rng.gen_range(1.0..300.0);
        let p = rng.gen_range(0.001..0.9999);
        let q = f_inv_cdf(d1, d2, p).unwrap();
        let back = statrs::function::beta::beta_reg(d1 / 2.0, d2 / 2.0, d1 * q / (d1 * q + d2));
        assert!((back - p).abs() < 1e-10, "F({d1}, {d2}) at {p}: got cdf {back}");
    }
}

#[test]
fn f_quantile_rejects_bad_arguments() {
    assert!(f_inv_cdf(0.0, 3.0, 0.5).is_err());
    assert!(f_inv_cdf(2.0, 3.0, 1.5).is_err());
}

/// Roots of `λ^n + c_1 λ^{n−1} + … + c_n` are the eigenvalues of the
/// scalar realization, so `Π|λ_i| = |c_n|`.
#[test]
fn realization_poles_match_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let f: Vec<Matrix> = (0..n).map(|_| Matrix::from_element(1, 1, rng.gen_range(-1.0..1.0))).collect();
        let g: Vec<Matrix> = (0..n).map(|_| Matrix::from_element(1, 1, rng.gen_range(-1.0..1.0))).collect();
        let model = IdentifiedModel::new(n, 1, 1, f.clone(), g, 0).unwrap();
        let real = build_realization(&model).unwrap();
        let eig = eigenvalues(&real.a).unwrap();
        for lambda in &eig {
            let mut value = lambda.powu(n as u32);
            for (i, fi) in f.iter().enumerate() {
                value += lambda.powu((n - 1 - i) as u32) * fi[(0, 0)];
            }
            assert!(value.norm() < 1e-8 * (1.0 + lambda.norm()).powi(n as i32), "residual {value}");
        }
        let product: f64 = eig.iter().map(|l| l.norm()).product();
        assert!((product - f[n - 1][(0, 0)].abs()).abs() < 1e-9);
        let rho = spectral_radius(&real.a).unwrap();
        assert!((rho - eig.iter().map(|l| l.norm()).fold(0.0, f64::max)).abs() < 1e-12);
    }
}

/// Running the realization forward from the reconstructed state reproduces
/// the ARX output recursion.
#[test]
fn realization_state_predicts_arx_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let (n, p, m) = (rng.gen_range(1..=4), rng.gen_range(1..=2), rng.gen_range(1..=2));
        let f: Vec<Matrix> = (0..n).map(|_| Matrix::from_fn(p, p, |_, _| rng.gen_range(-0.3..0.3))).collect();
        let g: Vec<Matrix> = (0..n).map(|_| Matrix::from_fn(p, m, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let model = IdentifiedModel::new(n, p, m, f.clone(), g.clone(), 0).unwrap();
        let real = build_realization(&model).unwrap();
        let mut history = IoHistory::new(n, p, m);
        let (mut ys, mut us): (Vec<Vector>, Vec<Vector>) = (Vec::new(), Vec::new());
        for k in 0..30 {
            let u = Vector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
            let mut y = Vector::zeros(p);
            for i in 1..=n.min(k) {
                y += -&f[i - 1] * &ys[k - i] + &g[i - 1] * &us[k - i];
            }
            history.push(&y, &u).unwrap();
            ys.push(y);
            us.push(u);
        }
        // The state at the newest sample, advanced with the newest input, holds
        // the next ARX output in its first block.
        let k = ys.len();
        let mut expect = Vector::zeros(p);
        for i in 1..=n {
            expect += -&f[i - 1] * &ys[k - i] + &g[i - 1] * &us[k - i];
        }
        let x = build_state(&model, &history).unwrap();
        assert!((x.rows(0, p) - &ys[k - 1]).norm() < 1e-12);
        let next = real.advance(&x, &us[k - 1]);
        assert!((next.rows(0, p) - expect).norm() < 1e-10);
    }
}
