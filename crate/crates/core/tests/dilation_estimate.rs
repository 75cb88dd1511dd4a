use std::f64::consts::PI;

use nhmetro_core::dilation::{build_dilation, build_dilation_with_eta, evolve_dilated, fidelity, solve_eta};
use nhmetro_core::dynamics::{angle_probe, basis_projector, evolve};
use nhmetro_core::estimate::{run_trials, sample_shots, trial_rng, Experiment};
use nhmetro_core::matcore::ComplexVector;
use nhmetro_core::models::{hamiltonian, HamiltonianModel, PtParam};
use proptest::prelude::*;
use rand::RngExt;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dilation_reproduces_direct_dynamics(alpha in 0.05f64..1.45, t in 0.0f64..20.0, phi in 0.0f64..3.0) {
        let m = HamiltonianModel::pt(1.0, alpha, PtParam::Alpha).unwrap();
        let h = hamiltonian(&m, alpha).unwrap();
        let sys = build_dilation(&h).unwrap();
        prop_assert!(sys.check());
        let psi0 = angle_probe(phi);
        let direct = evolve(&m, alpha, t, &psi0).unwrap();
        let d = evolve_dilated(&sys, &psi0, t).unwrap();
        let total = sys.c * psi0.expectation(&sys.eta).re;
        prop_assert!(fidelity(&d.recovered, &direct.phi_out) >= 1.0 - 1e-8);
        prop_assert!((d.norm_sqr - total).abs() < 1e-9 * total.max(1.0));
        prop_assert!((d.success_prob - direct.k / total).abs() < 1e-9);
    }

    #[test]
    fn zeta_ignores_metric_scale(alpha in 0.05f64..1.45, k in 0.1f64..20.0) {
        let m = HamiltonianModel::pt(1.0, alpha, PtParam::Alpha).unwrap();
        let h = hamiltonian(&m, alpha).unwrap();
        let eta = solve_eta(&h).unwrap();
        let a = build_dilation_with_eta(&h, &eta).unwrap();
        let b = build_dilation_with_eta(&h, &eta.scale_re(k)).unwrap();
        prop_assert!(a.zeta.distance(&b.zeta) < 1e-10);
    }
}

/// Binomial draw by inverting the CDF with a uniform variate.
fn inverse_cdf_binomial(p: f64, n: u64, u: f64) -> u64 {
    let q = 1.0 - p;
    // pmf recurrence in log space to stay finite for large n
    let mut log_pmf = n as f64 * q.ln();
    let mut cdf = log_pmf.exp();
    let mut k = 0;
    while cdf < u && k < n {
        log_pmf += ((n - k) as f64).ln() - ((k + 1) as f64).ln() + p.ln() - q.ln();
        k += 1;
        cdf += log_pmf.exp();
    }
    k
}

#[test]
fn binomial_concentration_against_inverse_cdf() {
    let p = 0.9104;
    let n = 1_000_000u64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let x = sample_shots(p, n, &mut trial_rng(2024, 0)).unwrap();
    assert!((x.p_hat - p).abs() < 5.0 * sigma);
    // reference sampler: mean of 200 small draws matches
    let mut rng = trial_rng(99, 1);
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..200 {
        a += inverse_cdf_binomial(p, 1000, rng.random::<f64>());
        b += sample_shots(p, 1000, &mut trial_rng(99, 1000 + i)).unwrap().x;
    }
    let se = (200.0 * 1000.0 * p * (1.0 - p)).sqrt();
    assert!(((a as f64) - (b as f64)).abs() < 5.0 * se * 2f64.sqrt());
}

fn s3_experiment(t: f64) -> Experiment {
    let m = HamiltonianModel::pt(1.0, PI / 4.0, PtParam::S).unwrap();
    Experiment::new(m, t, ComplexVector::basis(2, 0), basis_projector(2, 0)).unwrap()
}

#[test]
fn runs_are_bit_identical() {
    let exp = s3_experiment(5.0 * PI / 8.0);
    let a = run_trials(&exp, 1.0, 500, 50, 17, (0.8, 1.2)).unwrap();
    let b = run_trials(&exp, 1.0, 500, 50, 17, (0.8, 1.2)).unwrap();
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
    let c = run_trials(&exp, 1.0, 500, 50, 18, (0.8, 1.2)).unwrap();
    assert_ne!(a.estimates, c.estimates);
}

#[test]
fn doubling_shots_shrinks_sigma() {
    let exp = s3_experiment(10.0 * PI / 8.0);
    let (lo, hi) = (0.95, 1.05);
    let a = run_trials(&exp, 1.0, 1000, 1000, 3, (lo, hi)).unwrap();
    let b = run_trials(&exp, 1.0, 2000, 1000, 4, (lo, hi)).unwrap();
    let ratio = a.sigma / b.sigma;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn pt_alpha_mean_is_unbiased() {
    let m = HamiltonianModel::pt(1.0, PI / 4.0, PtParam::Alpha).unwrap();
    let exp = Experiment::new(m, 10.0 * PI / 8.0, ComplexVector::basis(2, 0), basis_projector(2, 0)).unwrap();
    let run = run_trials(&exp, PI / 4.0, 2000, 1000, 8, (0.6, 0.95)).unwrap();
    assert!(run.bias_pct() < 1.0, "bias {}%", run.bias_pct());
    assert_eq!(run.failed_trials, 0);
}

#[test]
fn kappa_precision_at_three_sixths() {
    let m = HamiltonianModel::kappa(2.0).unwrap();
    let t = 3.0 * PI / 6.0;
    let exp = Experiment::new(m, t, ComplexVector::basis(2, 0), basis_projector(2, 0)).unwrap();
    let bracket = nhmetro_core::estimate::monotone_bracket(&exp, 2.0, 1.0).unwrap();
    let run = run_trials(&exp, 2.0, 1100, 1000, 21, bracket).unwrap();
    assert!(
        (run.precision / 1.3985 - 1.0).abs() < 0.08,
        "precision {}",
        run.precision
    );
}
