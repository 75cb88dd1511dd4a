//! Monte-Carlo shot simulation and binomial maximum-likelihood estimation.
//!
//! Every trial draws from its own `Pcg64` (PCG XSL-RR 128/64) generator,
//! seeded with `state = seed` and `stream = trial index`, so trials can run
//! in any order and still reproduce bit for bit.

use rand_distr::{Binomial, Distribution};
use rand_pcg::Pcg64;
use rayon::prelude::*;

use crate::dynamics::{check_projector, evolve, survival_probability};
use crate::error::{Error, Result};
use crate::matcore::{ComplexMatrix, ComplexVector};
use crate::models::{HamiltonianModel, PtParam};

/// Points in the scan that locates sign changes of `p(θ) − x/n`.
pub const SCAN_POINTS: usize = 64;
pub const ROOT_TOL: f64 = 1e-12;
/// Largest variation of `p` over a bracket still treated as flat.
pub const FLAT_TOL: f64 = 1e-12;
const MAX_ROOT_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub n: u64,
    pub x: u64,
    pub p_hat: f64,
}

impl ShotRecord {
    pub fn new(n: u64, x: u64) -> Result<Self> {
        if n == 0 || x > n {
            return Err(Error::InvalidArgument(format!("shot record x = {x}, n = {n}")));
        }
        Ok(Self {
            n,
            x,
            p_hat: x as f64 / n as f64,
        })
    }
}

/// Generator for trial `index` under base `seed`.
pub fn trial_rng(seed: u64, index: u64) -> Pcg64 {
    Pcg64::new(seed as u128, index as u128)
}

/// `x ~ Binomial(n, p)`.
pub fn sample_shots(p: f64, n: u64, rng: &mut Pcg64) -> Result<ShotRecord> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            param: "p".into(),
            value: p,
            reason: "probability must lie in [0, 1]".into(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("shot count must be >= 1".into()));
    }
    let dist = Binomial::new(n, p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    ShotRecord::new(n, dist.sample(rng))
}

/// Everything `p(θ)` depends on apart from `θ`.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: HamiltonianModel,
    pub t: f64,
    pub psi0: ComplexVector,
    pub projector: ComplexMatrix,
}

impl Experiment {
    pub fn new(model: HamiltonianModel, t: f64, psi0: ComplexVector, projector: ComplexMatrix) -> Result<Self> {
        check_projector(&projector)?;
        Ok(Self {
            model,
            t,
            psi0,
            projector,
        })
    }

    /// Outcome-0 probability `⟨φ(θ)|A|φ(θ)⟩`.
    pub fn probability(&self, theta: f64) -> Result<f64> {
        let res = evolve(&self.model, theta, self.t, &self.psi0)?;
        survival_probability(&res, &self.projector)
    }
}

/// `p(θ)` sampled on a uniform grid over a bracket; reused across trials.
#[derive(Debug, Clone)]
pub struct LikelihoodScan {
    pub lo: f64,
    pub hi: f64,
    thetas: Vec<f64>,
    probs: Vec<f64>,
}

impl LikelihoodScan {
    /// Tabulates `p(θ)` on the bracket. A curve that does not move across
    /// the bracket carries no information and yields `Degenerate`.
    pub fn new(exp: &Experiment, bracket: (f64, f64)) -> Result<Self> {
        let (lo, hi) = bracket;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::NotBracketed { lo, hi });
        }
        let thetas: Vec<f64> = (0..SCAN_POINTS)
            .map(|k| lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64)
            .collect();
        let probs = thetas
            .iter()
            .map(|&th| exp.probability(th))
            .collect::<Result<Vec<_>>>()?;
        let spread =
            probs.iter().fold(f64::NEG_INFINITY, |m, &p| m.max(p)) - probs.iter().fold(f64::INFINITY, |m, &p| m.min(p));
        if spread <= FLAT_TOL {
            return Err(Error::Degenerate {
                slope: spread / (hi - lo),
            });
        }
        Ok(Self { lo, hi, thetas, probs })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.thetas.iter().copied().zip(self.probs.iter().copied())
    }
}

fn log_likelihood(p: f64, shot: &ShotRecord) -> f64 {
    let (x, n) = (shot.x as f64, shot.n as f64);
    let term = |k: f64, q: f64| if k == 0.0 { 0.0 } else { k * q.ln() };
    term(x, p) + term(n - x, 1.0 - p)
}

/// Bisection with secant steps inside a sign-changing interval.
fn refine_root(exp: &Experiment, target: f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64> {
    for _ in 0..MAX_ROOT_ITER {
        if (b - a).abs() < ROOT_TOL {
            break;
        }
        let secant = if fb != fa {
            b - fb * (b - a) / (fb - fa)
        } else {
            f64::NAN
        };
        let mid = 0.5 * (a + b);
        let lo = a.min(b);
        let hi = a.max(b);
        // take the secant point only when it stays well inside the interval
        let x = if secant.is_finite() && secant > lo + 0.01 * (hi - lo) && secant < hi - 0.01 * (hi - lo) {
            secant
        } else {
            mid
        };
        let fx = exp.probability(x)? - target;
        if fx.abs() < ROOT_TOL {
            return Ok(x);
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Solves `p(θ) = x/n` inside the scanned bracket.
///
/// When several roots exist they share the same likelihood, so the one
/// closest to the bracket midpoint is returned.
pub fn mle_invert(exp: &Experiment, scan: &LikelihoodScan, shot: &ShotRecord) -> Result<f64> {
    let target = shot.p_hat;
    let vals: Vec<f64> = scan.probs.iter().map(|p| p - target).collect();
    let mut roots = Vec::new();
    for k in 0..vals.len() {
        if vals[k] == 0.0 {
            roots.push(scan.thetas[k]);
            continue;
        }
        if k + 1 < vals.len() && vals[k + 1] != 0.0 && (vals[k] < 0.0) != (vals[k + 1] < 0.0) {
            roots.push(refine_root(
                exp,
                target,
                scan.thetas[k],
                scan.thetas[k + 1],
                vals[k],
                vals[k + 1],
            )?);
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRoot {
            target,
            lo: scan.lo,
            hi: scan.hi,
        });
    }
    let mid = 0.5 * (scan.lo + scan.hi);
    let scored = roots
        .into_iter()
        .map(|th| Ok((th, log_likelihood(exp.probability(th)?.clamp(0.0, 1.0), shot))))
        .collect::<Result<Vec<_>>>()?;
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-12 * best.abs().max(1.0);
    scored
        .into_iter()
        .filter(|s| s.1 >= best - tie)
        .map(|s| s.0)
        .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
        .ok_or(Error::NoRoot {
            target,
            lo: scan.lo,
            hi: scan.hi,
        })
}

/// Admissible open interval of the estimated parameter, with a margin.
fn param_domain(model: &HamiltonianModel, theta: f64) -> (f64, f64) {
    const EDGE: f64 = 1e-9;
    match model {
        HamiltonianModel::Pt {
            estimate: PtParam::S, ..
        } => (EDGE, f64::INFINITY),
        HamiltonianModel::Pt {
            estimate: PtParam::Alpha,
            ..
        } => (EDGE, std::f64::consts::FRAC_PI_2 - EDGE),
        HamiltonianModel::Kappa { .. } if theta > 1.0 => (1.0 + EDGE, f64::INFINITY),
        HamiltonianModel::Kappa { .. } => (EDGE, 1.0 - EDGE),
        HamiltonianModel::EpDemo { .. } => (EDGE, std::f64::consts::FRAC_PI_4 - EDGE),
        HamiltonianModel::Custom(_) => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

/// Largest interval around `theta` on which `p` is monotone, found by
/// walking outward in steps of `half_width/400` until the slope flips,
/// the parameter domain ends, or `half_width` is reached.
pub fn monotone_bracket(exp: &Experiment, theta: f64, half_width: f64) -> Result<(f64, f64)> {
    if !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!("half width {half_width} must be > 0")));
    }
    let (dom_lo, dom_hi) = param_domain(&exp.model, theta);
    let step = half_width / 400.0;
    let p0 = exp.probability(theta)?;
    let walk = |dir: f64| -> Result<f64> {
        let limit = if dir > 0.0 { dom_hi } else { dom_lo };
        let mut prev_th = theta;
        let mut prev_p = p0;
        let mut sign = 0.0;
        for k in 1..=400 {
            let th = theta + dir * step * k as f64;
            if (dir > 0.0 && th >= limit) || (dir < 0.0 && th <= limit) {
                return Ok(limit);
            }
            let p = exp.probability(th)?;
            let d = (p - prev_p) * dir;
            if d != 0.0 {
                if sign == 0.0 {
                    sign = d.signum();
                } else if d.signum() != sign {
                    return Ok(prev_th);
                }
            }
            prev_th = th;
            prev_p = p;
        }
        Ok(prev_th)
    };
    let lo = walk(-1.0)?;
    let hi = walk(1.0)?;
    if !(lo < hi) {
        return Err(Error::NotBracketed { lo, hi });
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub n: u64,
    pub trials: usize,
    pub theta_true: f64,
    pub p_true: f64,
    pub shots: Vec<ShotRecord>,
    /// One entry per trial; `None` marks a failed inversion.
    pub estimates: Vec<Option<f64>>,
    pub mean: f64,
    pub sigma: f64,
    pub sigma_err: f64,
    pub precision: f64,
    pub precision_err: f64,
    pub failed_trials: usize,
}

impl EstimationRun {
    pub fn successful(&self) -> impl Iterator<Item = f64> + '_ {
        self.estimates.iter().flatten().copied()
    }

    /// `|E[θ̂] − θ|/|θ|` in percent.
    pub fn bias_pct(&self) -> f64 {
        100.0 * (self.mean - self.theta_true).abs() / self.theta_true.abs()
    }
}

/// Mean and sample standard deviation (n − 1 denominator).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_trials(
    exp: &Experiment,
    theta_true: f64,
    n: u64,
    trials: usize,
    seed: u64,
    bracket: (f64, f64),
) -> Result<EstimationRun> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("trials = {trials} must be >= 2")));
    }
    let p_true = exp.probability(theta_true)?;
    let scan = LikelihoodScan::new(exp, bracket)?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let shot = sample_shots(p_true, n, &mut rng)?;
            let est = match mle_invert(exp, &scan, &shot) {
                Ok(th) => Some(th),
                Err(Error::NoRoot { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok((shot, est))
        })
        .collect::<Result<Vec<_>>>()?;
    let (shots, estimates): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let good: Vec<f64> = estimates.iter().flatten().copied().collect();
    if good.len() < 2 {
        return Err(Error::AllTrialsFailed { trials });
    }
    let (mean, sigma) = mean_std(&good);
    let denom = (2.0 * (trials as f64 - 1.0)).sqrt();
    let precision = 1.0 / (sigma * (n as f64).sqrt());
    Ok(EstimationRun {
        n,
        trials,
        theta_true,
        p_true,
        shots,
        failed_trials: trials - good.len(),
        estimates,
        mean,
        sigma,
        sigma_err: sigma / denom,
        precision,
        precision_err: precision / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::basis_projector;
    use std::f64::consts::PI;

    fn pt_alpha(t: f64) -> Experiment {
        let m = HamiltonianModel::pt(1.0, PI / 4.0, PtParam::Alpha).unwrap();
        Experiment::new(m, t, ComplexVector::basis(2, 0), basis_projector(2, 0)).unwrap()
    }

    #[test]
    fn extreme_probabilities() {
        let mut rng = trial_rng(7, 0);
        assert_eq!(sample_shots(0.0, 1000, &mut rng).unwrap().x, 0);
        assert_eq!(sample_shots(1.0, 1000, &mut rng).unwrap().x, 1000);
        assert!(sample_shots(1.5, 10, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_shots(0.3, 500, &mut trial_rng(42, 3)).unwrap();
        let b = sample_shots(0.3, 500, &mut trial_rng(42, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_inversion() {
        let exp = pt_alpha(10.0 * PI / 8.0);
        let scan = LikelihoodScan::new(&exp, (0.6, 0.95)).unwrap();
        let p = exp.probability(PI / 4.0).unwrap();
        let shot = ShotRecord { n: 1, x: 0, p_hat: p };
        let th = mle_invert(&exp, &scan, &shot).unwrap();
        assert!((th - PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn flat_curve_is_degenerate() {
        // no evolution: p(θ) = 1 for every θ
        let exp = pt_alpha(0.0);
        assert!(matches!(
            LikelihoodScan::new(&exp, (0.6, 0.95)),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn out_of_range_target_has_no_root() {
        let exp = pt_alpha(10.0 * PI / 8.0);
        let scan = LikelihoodScan::new(&exp, (0.6, 0.95)).unwrap();
        let (lo, hi) = scan
            .points()
            .fold((1.0f64, 0.0f64), |(lo, hi), (_, p)| (lo.min(p), hi.max(p)));
        let target = if hi < 0.99 { 1.0 } else { 0.0 };
        assert!(lo > 0.0 || hi < 1.0);
        let shot = ShotRecord::new(100, (target * 100.0) as u64).unwrap();
        assert!(matches!(mle_invert(&exp, &scan, &shot), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn malformed_bracket() {
        let exp = pt_alpha(1.0);
        assert!(matches!(
            LikelihoodScan::new(&exp, (0.9, 0.6)),
            Err(Error::NotBracketed { .. })
        ));
        assert!(matches!(
            LikelihoodScan::new(&exp, (f64::NAN, 0.6)),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn two_trials_error_bar() {
        let exp = pt_alpha(10.0 * PI / 8.0);
        let run = run_trials(&exp, PI / 4.0, 200, 2, 1, (0.6, 0.95)).unwrap();
        assert_eq!(run.estimates.len(), 2);
        assert_eq!(run.sigma_err, run.sigma / 2f64.sqrt());
        assert_eq!(run.precision_err, run.precision / 2f64.sqrt());
    }

    #[test]
    fn monotone_bracket_contains_truth() {
        let exp = pt_alpha(10.0 * PI / 8.0);
        let (lo, hi) = monotone_bracket(&exp, PI / 4.0, 0.5).unwrap();
        assert!(lo < PI / 4.0 && PI / 4.0 < hi);
        let scan = LikelihoodScan::new(&exp, (lo, hi)).unwrap();
        let ps: Vec<f64> = scan.points().map(|p| p.1).collect();
        let up = ps.windows(2).all(|w| w[1] >= w[0]);
        let down = ps.windows(2).all(|w| w[1] <= w[0]);
        assert!(up || down);
    }

    #[test]
    fn sample_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
