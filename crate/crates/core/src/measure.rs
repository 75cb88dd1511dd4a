//! Observables, error-propagation precision and the optimal-measurement test.

use crate::dynamics::{evolution_operator, evolve};
use crate::error::{Error, Result};
use crate::fisher::{generator_adaptive, normalized_derivative};
use crate::matcore::{hermitian_eigen, ComplexMatrix, ComplexVector, C64, I};
use crate::models::HamiltonianModel;

const HERMITIAN_TOL: f64 = 1e-10;
const DEGENERATE_SLOPE: f64 = 1e-12;
const ZERO_G: f64 = 1e-12;
pub const OPTIMAL_RESIDUAL: f64 = 1e-6;
pub const OPTIMAL_IMAG_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Observable {
    pub a: ComplexMatrix,
    pub label: String,
}

impl Observable {
    pub fn new(a: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let deviation = a.hermitian_deviation();
        if !(deviation < HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { a, label: label.into() })
    }

    /// `|index⟩⟨index|`.
    pub fn basis_projector(dim: usize, index: usize) -> Self {
        Self {
            a: ComplexVector::basis(dim, index).projector(),
            label: format!("|{index}><{index}|"),
        }
    }

    pub fn mean(&self, phi: &ComplexVector) -> f64 {
        phi.expectation(&self.a).re
    }

    pub fn variance(&self, phi: &ComplexVector) -> f64 {
        let m = self.mean(phi);
        (self.a.mul_vec(phi).norm_sqr() - m * m).max(0.0)
    }
}

fn mean_at(model: &HamiltonianModel, theta: f64, t: f64, psi0: &ComplexVector, a: &Observable) -> Result<f64> {
    Ok(a.mean(&evolve(model, theta, t, psi0)?.phi_out))
}

/// Single-shot precision `1/Δθ = |∂⟨A⟩|/ΔA`.
pub fn error_propagation_precision(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    psi0: &ComplexVector,
    a: &Observable,
    fd_step: f64,
) -> Result<f64> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {fd_step} must be > 0"
        )));
    }
    let slope =
        (mean_at(model, theta + fd_step, t, psi0, a)? - mean_at(model, theta - fd_step, t, psi0, a)?) / (2.0 * fd_step);
    if !(slope.abs() > DEGENERATE_SLOPE) {
        return Err(Error::Degenerate { slope: slope.abs() });
    }
    let phi = evolve(model, theta, t, psi0)?.phi_out;
    let spread = a.variance(&phi).sqrt();
    if !(spread > 0.0) {
        return Err(Error::NonFinite {
            stage: "observable variance vanishes".into(),
        });
    }
    Ok(slope.abs() / spread)
}

/// Fit of `|f⟩ = ic|g⟩` with `|f⟩ = δh|φ⟩`, `|g⟩ = δA|φ⟩`.
#[derive(Debug, Clone)]
pub struct OptimalityReport {
    /// `‖f − i·Re(c)·g‖ / ‖f‖`, in [0, 2].
    pub residual: f64,
    /// Complex least-squares coefficient.
    pub c: C64,
    /// `|Im c| / |c|`.
    pub c_imag_fraction: f64,
}

impl OptimalityReport {
    pub fn is_optimal(&self) -> bool {
        self.residual < OPTIMAL_RESIDUAL && self.c_imag_fraction < OPTIMAL_IMAG_FRACTION
    }
}

/// `(O − ⟨O⟩)|φ⟩`.
fn shifted(o: &ComplexMatrix, phi: &ComplexVector) -> ComplexVector {
    let ophi = o.mul_vec(phi);
    let mean = phi.inner(&ophi);
    &ophi - &phi.scale(mean)
}

/// Optimality report for a given generator and output state.
pub fn optimality_from_generator(h: &ComplexMatrix, phi: &ComplexVector, a: &Observable) -> Result<OptimalityReport> {
    let f = shifted(h, phi);
    let g = shifted(&a.a, phi);
    let gn = g.norm_sqr();
    if !(gn.sqrt() > ZERO_G) {
        return Err(Error::ZeroG { norm: gn.sqrt() });
    }
    // ic = ⟨g|f⟩/⟨g|g⟩
    let c = g.inner(&f) / gn * (-I);
    let fnorm = f.norm();
    // The condition demands real c, so the residual uses the real part only;
    // in two dimensions the unconstrained complex fit is always exact.
    let residual = if fnorm > 0.0 {
        (&f - &g.scale(I * c.re)).norm() / fnorm
    } else {
        0.0
    };
    let c_imag_fraction = if c.norm() > 0.0 { c.im.abs() / c.norm() } else { 0.0 };
    Ok(OptimalityReport {
        residual,
        c,
        c_imag_fraction,
    })
}

pub fn optimality_residual(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    psi0: &ComplexVector,
    a: &Observable,
) -> Result<OptimalityReport> {
    let phi = evolve(model, theta, t, psi0)?.phi_out;
    let h = generator_adaptive(model, theta, t)?;
    optimality_from_generator(&h, &phi, a)
}

/// Symmetric logarithmic derivative `L = 2(|∂φ⟩⟨φ| + |φ⟩⟨∂φ|)`.
pub fn sld_operator(
    model: &HamiltonianModel,
    theta: f64,
    t: f64,
    psi0: &ComplexVector,
    fd_step: f64,
) -> Result<ComplexMatrix> {
    let (phi, dphi) = normalized_derivative(|th| evolution_operator(model, th, t), theta, psi0, fd_step)?;
    let l = (&dphi.outer(&phi) + &phi.outer(&dphi)).scale_re(2.0);
    Ok(l.hermitian_part())
}

/// `Tr[ρL²]` for the pure state `φ`.
pub fn sld_information(l: &ComplexMatrix, phi: &ComplexVector) -> f64 {
    l.mul_vec(phi).norm_sqr()
}

/// Eigenprojectors of a Hermitian operator, ascending eigenvalue order.
pub fn eigenprojectors(l: &ComplexMatrix) -> Result<Vec<Observable>> {
    let (vals, v) = hermitian_eigen(l)?;
    Ok((0..vals.len())
        .map(|k| Observable {
            a: v.column(k).projector(),
            label: format!("sld eigenprojector {k}"),
        })
        .collect())
}

/// Both sides of `(Δh)²(ΔA)² ≥ |⟨h†A⟩ − ⟨h†⟩⟨A⟩|²`.
pub fn uncertainty_sides(h: &ComplexMatrix, a: &Observable, phi: &ComplexVector) -> (f64, f64) {
    let f = shifted(h, phi);
    let g = shifted(&a.a, phi);
    let lhs = f.norm_sqr() * g.norm_sqr();
    let rhs = f.inner(&g).norm_sqr();
    (lhs, rhs)
}
