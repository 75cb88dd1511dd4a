//! Local generator and quantum Fisher information.
//!
//! The generator `h = i(∂U)U⁻¹` is computed two ways: by Gauss-Legendre
//! quadrature of `∫₀ᵗ e^{−iμH} ∂H e^{iμH} dμ` and by central differences of
//! the propagator. The QFI of the normalized output is then
//! `4(⟨h†h⟩ − ⟨h†⟩⟨h⟩)`.

use crate::dynamics::{check_normalized, evolution_operator, evolve};
use crate::error::{Error, Result};
use crate::matcore::{eig_decompose, mat_exp, mat_inverse, re, ComplexMatrix, ComplexVector, C64, I};
use crate::models::{d_hamiltonian, hamiltonian, HamiltonianModel, PtParam};

pub const DEFAULT_QUAD_ORDER: usize = 64;
pub const MAX_QUAD_ORDER: usize = 1024;
pub const QUAD_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 64;

/// Gauss-Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

fn integrate_panel(
    h: &ComplexMatrix,
    dh: &ComplexMatrix,
    a: f64,
    b: f64,
    nodes: &[f64],
    weights: &[f64],
) -> Result<ComplexMatrix> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = ComplexMatrix::zeros(h.dim());
    for (x, w) in nodes.iter().zip(weights) {
        let mu = mid + half * x;
        let fwd = mat_exp(&h.scale(-I * mu))?;
        let back = mat_exp(&h.scale(I * mu))?;
        acc = &acc + &(&(&fwd * dh) * &back).scale_re(w * half);
    }
    Ok(acc)
}

/// `h = ∫₀ᵗ e^{−iμH} ∂H e^{iμH} dμ` with a single `order`-node rule.
pub fn generator_quadrature(model: &HamiltonianModel, theta: f64, t: f64, order: usize) -> Result<ComplexMatrix> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("quadrature order {order} < 2")));
    }
    let h = hamiltonian(model, theta)?;
    let dh = d_hamiltonian(model, theta)?;
    if t == 0.0 {
        return Ok(ComplexMatrix::zeros(h.dim()));
    }
    let (nodes, weights) = gauss_legendre(order);
    integrate_panel(&h, &dh, 0.0, t, &nodes, &weights)
}

fn composite(h: &ComplexMatrix, dh: &ComplexMatrix, t: f64, panels: usize, order: usize) -> Result<ComplexMatrix> {
    let (nodes, weights) = gauss_legendre(order);
    let width = t / panels as f64;
    let mut acc = ComplexMatrix::zeros(h.dim());
    for p in 0..panels {
        let a = p as f64 * width;
        acc = &acc + &integrate_panel(h, dh, a, a + width, &nodes, &weights)?;
    }
    Ok(acc)
}

/// Quadrature generator with automatic refinement: the node count doubles
/// from 64 up to 1024 until successive results agree to `QUAD_TOL`
/// (relative to `max(1, ‖h‖)`), then the interval is split into panels.
pub fn generator_adaptive(model: &HamiltonianModel, theta: f64, t: f64) -> Result<ComplexMatrix> {
    let h = hamiltonian(model, theta)?;
    let dh = d_hamiltonian(model, theta)?;
    if t == 0.0 {
        return Ok(ComplexMatrix::zeros(h.dim()));
    }
    let converged = |a: &ComplexMatrix, b: &ComplexMatrix| a.distance(b) <= QUAD_TOL * b.frobenius_norm().max(1.0);
    let mut order = DEFAULT_QUAD_ORDER;
    let mut prev = composite(&h, &dh, t, 1, order)?;
    while order < MAX_QUAD_ORDER {
        order *= 2;
        let next = composite(&h, &dh, t, 1, order)?;
        if converged(&prev, &next) {
            return Ok(next);
        }
        prev = next;
    }
    let mut panels = 1;
    while panels < MAX_PANELS {
        panels *= 2;
        let next = composite(&h, &dh, t, panels, MAX_QUAD_ORDER)?;
        if converged(&prev, &next) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonFinite {
        stage: "generator quadrature did not converge".into(),
    })
}

pub fn default_step(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

fn central_difference<F>(f: F, theta: f64, step: f64) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {step} must be > 0"
        )));
    }
    let plus = f(theta + step)?;
    let minus = f(theta - step)?;
    Ok((&plus - &minus).scale_re(0.5 / step))
}

/// `h = i(∂U)U⁻¹` with `∂U` from a central difference of `e^{−iH(θ±step)t}`.
pub fn generator_fd(model: &HamiltonianModel, theta: f64, t: f64, step: f64) -> Result<ComplexMatrix> {
    let du = central_difference(|th| evolution_operator(model, th, t), theta, step)?;
    let u = evolution_operator(model, theta, t)?;
    Ok((&du * &mat_inverse(&u)?).scale(I))
}

/// `4(⟨h†h⟩ − ⟨h†⟩⟨h⟩)` on a normalized state.
pub fn qfi_generator(h: &ComplexMatrix, phi: &ComplexVector) -> Result<f64> {
    check_normalized(phi)?;
    let hphi = h.mul_vec(phi);
    let mean = phi.inner(&hphi);
    let f: C64 = (re(hphi.norm_sqr()) - mean.conj() * mean) * 4.0;
    check_real(f)
}

fn check_real(f: C64) -> Result<f64> {
    if !f.re.is_finite() || !f.im.is_finite() {
        return Err(Error::NonFinite { stage: "QFI".into() });
    }
    if f.im.abs() > IMAG_TOL * f.re.abs().max(1.0) {
        return Err(Error::NonRealQfi { residue: f.im });
    }
    Ok(f.re.max(0.0))
}

/// `(φ, ∂φ)` for the normalized output `Uψ₀/√K`, differentiated through
/// the normalization but with no phase fixing.
pub fn normalized_derivative<F>(
    u_of: F,
    theta: f64,
    psi0: &ComplexVector,
    step: f64,
) -> Result<(ComplexVector, ComplexVector)>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    check_normalized(psi0)?;
    let du = central_difference(&u_of, theta, step)?;
    let psi = u_of(theta)?.mul_vec(psi0);
    let dpsi = du.mul_vec(psi0);
    let k = psi.norm_sqr();
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::NonFinite {
            stage: "output normalization".into(),
        });
    }
    let dk = 2.0 * psi.inner(&dpsi).re;
    let phi = psi.scale(re(1.0 / k.sqrt()));
    let dphi = &dpsi.scale(re(1.0 / k.sqrt())) - &psi.scale(re(dk / (2.0 * k * k.sqrt())));
    Ok((phi, dphi))
}

/// `4(⟨∂φ|∂φ⟩ − |⟨∂φ|φ⟩|²)` for an arbitrary operator family `θ ↦ U(θ)`.
pub fn qfi_operator_family<F>(u_of: F, theta: f64, psi0: &ComplexVector, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    let (phi, dphi) = normalized_derivative(u_of, theta, psi0, step)?;
    let f = 4.0 * (dphi.norm_sqr() - dphi.inner(&phi).norm_sqr());
    check_real(re(f))
}

pub fn qfi_state_derivative(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    psi0: &ComplexVector,
    step: f64,
) -> Result<f64> {
    qfi_operator_family(|th| evolution_operator(model, th, t), theta, psi0, step)
}

fn is_ket0(psi0: &ComplexVector) -> bool {
    psi0.dim() == 2 && psi0[1].norm() < 1e-12 && (psi0[0].norm() - 1.0).abs() < 1e-12
}

/// Closed-form QFI for probe `|0⟩` on the pt (either parameter) and kappa families.
pub fn qfi_closed_form(model: &HamiltonianModel, theta: f64, t: f64, psi0: &ComplexVector) -> Result<f64> {
    let model = model.with_theta(theta)?;
    if matches!(model, HamiltonianModel::EpDemo { .. } | HamiltonianModel::Custom(_)) {
        return Err(Error::UnsupportedFamily {
            family: model.family_name().into(),
        });
    }
    if !is_ket0(psi0) {
        return Err(Error::UnsupportedProbe);
    }
    let f = match model {
        HamiltonianModel::Pt { s, alpha, estimate } => {
            let (sa, ca) = alpha.sin_cos();
            let st = s * t;
            let w = 2.0 * st * ca;
            match estimate {
                PtParam::S => {
                    let den = -1.0 + sa * (alpha - w).sin();
                    4.0 * t * t * ca.powi(4) / (den * den)
                }
                PtParam::Alpha => {
                    let sec = 1.0 / ca;
                    let num = 1.0 - sec * (alpha - w).cos() + 2.0 * st * sa;
                    let den = sec - (alpha - w).sin() * sa / ca;
                    (num / den).powi(2)
                }
            }
        }
        HamiltonianModel::Kappa { kappa } => {
            let r = kappa.sqrt();
            let x = t * r;
            let num = (-2.0 * x + (2.0 * x).sin()).powi(2);
            let den = 4.0 * kappa * (kappa * x.cos().powi(2) + x.sin().powi(2)).powi(2);
            num / den
        }
        _ => unreachable!(),
    };
    if !f.is_finite() {
        return Err(Error::NonFinite {
            stage: "closed-form QFI".into(),
        });
    }
    Ok(f)
}

/// QFI and related quantities at one `(θ, t)` point.
#[derive(Debug, Clone)]
pub struct QfiRecord {
    pub theta: f64,
    pub t: f64,
    pub h: ComplexMatrix,
    pub f: f64,
    pub k: f64,
    pub i: f64,
    /// `|λ₊ − λ₋|` of `h`.
    pub gap: f64,
}

impl QfiRecord {
    pub fn sqrt_f(&self) -> f64 {
        self.f.sqrt()
    }
}

/// QFI record with the adaptive quadrature generator.
pub fn qfi_record(model: &HamiltonianModel, theta: f64, t: f64, psi0: &ComplexVector) -> Result<QfiRecord> {
    let evo = evolve(model, theta, t, psi0)?;
    let h = generator_adaptive(model, theta, t)?;
    let f = qfi_generator(&h, &evo.phi_out)?;
    let gap = eig_decompose(&h)?.spread();
    Ok(QfiRecord {
        theta,
        t,
        h,
        f,
        k: evo.k,
        i: evo.k * f,
        gap,
    })
}

pub fn scaled_info(rec: &QfiRecord) -> f64 {
    rec.k * rec.f
}

/// Relative QFI deviation between `U` and `scalar(θ)·U`.
pub fn gauge_invariance_check<S>(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    psi0: &ComplexVector,
    scalar: S,
) -> Result<f64>
where
    S: Fn(f64) -> C64,
{
    let step = default_step(theta);
    for th in [theta - step, theta, theta + step] {
        let z = scalar(th);
        if !(z.norm() > 1e-12) || !z.is_finite() {
            return Err(Error::ZeroScalar { theta: th });
        }
    }
    let plain = qfi_state_derivative(model, theta, t, psi0, step)?;
    let scaled = qfi_operator_family(
        |th| Ok(evolution_operator(model, th, t)?.scale(scalar(th))),
        theta,
        psi0,
        step,
    )?;
    if plain == 0.0 && scaled == 0.0 {
        return Ok(0.0);
    }
    Ok((scaled - plain).abs() / plain.abs().max(scaled.abs()))
}

/// `F/4` through the two-level eigen-decomposition of `h`.
///
/// With `φ = a|λ₁⟩ + b|λ₂⟩` and the orthogonal complement
/// `φ⊥ = c|λ₁⟩ + d|λ₂⟩`, the variance is `|a|²·|λ₁ − λ₂|²·|c* + d*⟨λ₂|λ₁⟩|²`.
pub fn two_level_variance(h: &ComplexMatrix, phi: &ComplexVector) -> Result<f64> {
    check_normalized(phi)?;
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: h.dim(),
        });
    }
    let ed = eig_decompose(h)?;
    if ed.defective {
        return Err(Error::Singular { det: 0.0 });
    }
    let (l1, l2) = (ed.eigenvalues[0], ed.eigenvalues[1]);
    let (v1, v2) = (ed.eigenvector(0), ed.eigenvector(1));
    let vinv = mat_inverse(&ed.right_eigenvectors)?;
    let ab = vinv.mul_vec(phi);
    let perp = ComplexVector::new(vec![-phi[1].conj(), phi[0].conj()]);
    let cd = vinv.mul_vec(&perp);
    let (a, c, d) = (ab[0], cd[0], cd[1]);
    let overlap = v2.inner(&v1);
    Ok(a.norm_sqr() * (l1 - l2).norm_sqr() * (c.conj() + d.conj() * overlap).norm_sqr())
}

/// Probe `ψ₀ ∝ U⁻¹(a|λ₁⟩ + b|λ₂⟩)`, whose output has fixed coefficients in
/// the eigenbasis of `H(θ)` (eigenvalues ascending).
pub fn probe_for_output(model: &HamiltonianModel, theta: f64, t: f64, a: C64, b: C64) -> Result<ComplexVector> {
    let ed = eig_decompose(&hamiltonian(model, theta)?)?;
    if ed.defective {
        return Err(Error::Singular { det: 0.0 });
    }
    let target = &ed.eigenvector(0).scale(a) + &ed.eigenvector(1).scale(b);
    let u = evolution_operator(model, theta, t)?;
    mat_inverse(&u)?.mul_vec(&target).normalized()
}
