//! Parametric Hamiltonian families and their closed-form oracles.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matcore::{c, re, ComplexMatrix, C64};

/// Which PT parameter is under estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtParam {
    S,
    Alpha,
}

pub type MatrixFn = Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;

/// A user-supplied family `H(θ)` with its analytic derivative.
#[derive(Clone)]
pub enum CustomFamily {
    /// `H(θ) = H0 + θ·H1`.
    Affine {
        h0: ComplexMatrix,
        h1: ComplexMatrix,
    },
    Closure {
        h: MatrixFn,
        dh: MatrixFn,
    },
}

#[derive(Clone)]
pub struct CustomModel {
    pub name: String,
    pub family: CustomFamily,
    /// Nominal value of θ.
    pub theta: f64,
}

impl CustomModel {
    pub fn affine(name: &str, h0: ComplexMatrix, h1: ComplexMatrix, theta: f64) -> Result<Self> {
        if h0.dim() != h1.dim() {
            return Err(Error::DimensionMismatch {
                expected: h0.dim(),
                found: h1.dim(),
            });
        }
        Ok(Self {
            name: name.to_string(),
            family: CustomFamily::Affine { h0, h1 },
            theta,
        })
    }

    pub fn closure(
        name: &str,
        h: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
        dh: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
        theta: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            family: CustomFamily::Closure {
                h: Arc::new(h),
                dh: Arc::new(dh),
            },
            theta,
        }
    }

    /// `H(ω) = (ω/2)σ_z`, the textbook Ramsey family.
    pub fn ramsey(omega: f64) -> Self {
        let half_z = ComplexMatrix::pauli_z().scale_re(0.5);
        Self::affine("ramsey", ComplexMatrix::zeros(2), half_z, omega).expect("2x2")
    }

    /// Constant Hermitian (or not) Hamiltonian with θ entering nowhere.
    pub fn constant(name: &str, h: ComplexMatrix) -> Self {
        let dim = h.dim();
        Self::affine(name, h, ComplexMatrix::zeros(dim), 0.0).expect("same dim")
    }
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.family {
            CustomFamily::Affine { .. } => "affine",
            CustomFamily::Closure { .. } => "closure",
        };
        f.debug_struct("CustomModel")
            .field("name", &self.name)
            .field("kind", &kind)
            .field("theta", &self.theta)
            .finish()
    }
}

/// Catalog of Hamiltonian families.
///
/// * `Pt`: `s·[[i sin α, 1], [1, −i sin α]]`, exceptional point at α = π/2.
/// * `Kappa`: `[[0, κ], [1, 0]]`.
/// * `EpDemo`: `i sin α·σ_z + cos α·σ_x`, exceptional point at α = π/4.
/// * `Custom`: anything else.
#[derive(Debug, Clone)]
pub enum HamiltonianModel {
    Pt { s: f64, alpha: f64, estimate: PtParam },
    Kappa { kappa: f64 },
    EpDemo { alpha: f64 },
    Custom(CustomModel),
}

fn out_of_range(param: &str, value: f64, reason: &str) -> Error {
    Error::OutOfRange {
        param: param.into(),
        value,
        reason: reason.into(),
    }
}

fn check_pt(s: f64, alpha: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(out_of_range("s", s, "must be finite and >= 0"));
    }
    if !(alpha > 0.0 && alpha < FRAC_PI_2) {
        return Err(out_of_range("alpha", alpha, "must lie in (0, pi/2)"));
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(out_of_range("kappa", kappa, "must be finite and > 0"));
    }
    if kappa == 1.0 {
        return Err(out_of_range("kappa", kappa, "kappa = 1 is the Hermitian point"));
    }
    Ok(())
}

fn check_ep_demo(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < FRAC_PI_4) {
        return Err(out_of_range("alpha", alpha, "must lie in (0, pi/4)"));
    }
    Ok(())
}

impl HamiltonianModel {
    pub fn pt(s: f64, alpha: f64, estimate: PtParam) -> Result<Self> {
        check_pt(s, alpha)?;
        Ok(Self::Pt { s, alpha, estimate })
    }

    pub fn kappa(kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(Self::Kappa { kappa })
    }

    pub fn ep_demo(alpha: f64) -> Result<Self> {
        check_ep_demo(alpha)?;
        Ok(Self::EpDemo { alpha })
    }

    pub fn family_name(&self) -> &str {
        match self {
            Self::Pt { .. } => "pt",
            Self::Kappa { .. } => "kappa",
            Self::EpDemo { .. } => "ep_demo",
            Self::Custom(m) => &m.name,
        }
    }

    pub fn estimated_param(&self) -> &'static str {
        match self {
            Self::Pt {
                estimate: PtParam::S, ..
            } => "s",
            Self::Pt {
                estimate: PtParam::Alpha,
                ..
            } => "alpha",
            Self::Kappa { .. } => "kappa",
            Self::EpDemo { .. } => "alpha",
            Self::Custom(_) => "theta",
        }
    }

    /// Nominal value of the estimated parameter.
    pub fn theta(&self) -> f64 {
        match *self {
            Self::Pt {
                s,
                estimate: PtParam::S,
                ..
            } => s,
            Self::Pt {
                alpha,
                estimate: PtParam::Alpha,
                ..
            } => alpha,
            Self::Kappa { kappa } => kappa,
            Self::EpDemo { alpha } => alpha,
            Self::Custom(ref m) => m.theta,
        }
    }

    /// Copy of the model with the estimated parameter set to `theta`.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        match self {
            Self::Pt { s, alpha, estimate } => match estimate {
                PtParam::S => Self::pt(theta, *alpha, *estimate),
                PtParam::Alpha => Self::pt(*s, theta, *estimate),
            },
            Self::Kappa { .. } => Self::kappa(theta),
            Self::EpDemo { .. } => Self::ep_demo(theta),
            Self::Custom(m) => Ok(Self::Custom(CustomModel { theta, ..m.clone() })),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Custom(m) => match &m.family {
                CustomFamily::Affine { h0, .. } => h0.dim(),
                CustomFamily::Closure { h, .. } => h(m.theta).dim(),
            },
            _ => 2,
        }
    }

    /// True when `H(θ) = θ·G` with `G` independent of θ.
    pub fn is_multiplicative(&self) -> bool {
        matches!(
            self,
            Self::Pt {
                estimate: PtParam::S,
                ..
            }
        )
    }
}

/// `H(θ)` with `θ` bound to the model's estimated parameter.
pub fn hamiltonian(model: &HamiltonianModel, theta: f64) -> Result<ComplexMatrix> {
    match model.with_theta(theta)? {
        HamiltonianModel::Pt { s, alpha, .. } => {
            let g = s * alpha.sin();
            Ok(ComplexMatrix::from_rows(&[[c(0.0, g), re(s)], [re(s), c(0.0, -g)]]))
        }
        HamiltonianModel::Kappa { kappa } => Ok(ComplexMatrix::from_rows(&[[re(0.0), re(kappa)], [re(1.0), re(0.0)]])),
        HamiltonianModel::EpDemo { alpha } => {
            let (sa, ca) = alpha.sin_cos();
            Ok(ComplexMatrix::from_rows(&[[c(0.0, sa), re(ca)], [re(ca), c(0.0, -sa)]]))
        }
        HamiltonianModel::Custom(m) => custom_eval(&m, theta, false),
    }
}

/// Analytic `∂H/∂θ`.
pub fn d_hamiltonian(model: &HamiltonianModel, theta: f64) -> Result<ComplexMatrix> {
    match model.with_theta(theta)? {
        HamiltonianModel::Pt {
            alpha,
            estimate: PtParam::S,
            ..
        } => {
            let g = alpha.sin();
            Ok(ComplexMatrix::from_rows(&[[c(0.0, g), re(1.0)], [re(1.0), c(0.0, -g)]]))
        }
        HamiltonianModel::Pt {
            s,
            alpha,
            estimate: PtParam::Alpha,
        } => {
            let g = s * alpha.cos();
            Ok(ComplexMatrix::from_diag(&[c(0.0, g), c(0.0, -g)]))
        }
        HamiltonianModel::Kappa { .. } => Ok(ComplexMatrix::from_rows(&[[re(0.0), re(1.0)], [re(0.0), re(0.0)]])),
        HamiltonianModel::EpDemo { alpha } => {
            let (sa, ca) = alpha.sin_cos();
            Ok(ComplexMatrix::from_rows(&[
                [c(0.0, ca), re(-sa)],
                [re(-sa), c(0.0, -ca)],
            ]))
        }
        HamiltonianModel::Custom(m) => custom_eval(&m, theta, true),
    }
}

fn custom_eval(m: &CustomModel, theta: f64, derivative: bool) -> Result<ComplexMatrix> {
    let out = match (&m.family, derivative) {
        (CustomFamily::Affine { h0, h1 }, false) => h0 + &h1.scale_re(theta),
        (CustomFamily::Affine { h1, .. }, true) => h1.clone(),
        (CustomFamily::Closure { h, .. }, false) => h(theta),
        (CustomFamily::Closure { dh, .. }, true) => dh(theta),
    };
    if !out.is_finite() {
        return Err(Error::NonFinite {
            stage: format!("custom model {}", m.name),
        });
    }
    Ok(out)
}

/// Closed-form evolution operator `e^{−iH(θ)t}` for the pt and kappa families.
pub fn closed_form_u(model: &HamiltonianModel, theta: f64, t: f64) -> Result<ComplexMatrix> {
    match model.with_theta(theta)? {
        HamiltonianModel::Pt { s, alpha, .. } => {
            let ca = alpha.cos();
            let sec = 1.0 / ca;
            let w = t * s * ca;
            let off = c(0.0, -sec * w.sin());
            Ok(ComplexMatrix::from_rows(&[
                [re(sec * (w - alpha).cos()), off],
                [off, re(sec * (w + alpha).cos())],
            ]))
        }
        HamiltonianModel::Kappa { kappa } => {
            let r = kappa.sqrt();
            let (sn, cs) = (t * r).sin_cos();
            Ok(ComplexMatrix::from_rows(&[
                [re(cs), c(0.0, -r * sn)],
                [c(0.0, -sn / r), re(cs)],
            ]))
        }
        other => Err(Error::UnsupportedFamily {
            family: other.family_name().into(),
        }),
    }
}

/// Closed-form local generator `i(∂U)U⁻¹` for pt (either parameter) and kappa.
pub fn closed_form_generator(model: &HamiltonianModel, theta: f64, t: f64) -> Result<ComplexMatrix> {
    match model.with_theta(theta)? {
        HamiltonianModel::Pt {
            alpha,
            estimate: PtParam::S,
            ..
        } => {
            // multiplicative: h = t·∂H = t·H/s
            let h = hamiltonian(&HamiltonianModel::pt(1.0, alpha, PtParam::S)?, 1.0)?;
            Ok(h.scale_re(t))
        }
        HamiltonianModel::Pt {
            s,
            alpha,
            estimate: PtParam::Alpha,
        } => {
            let (sa, ca) = alpha.sin_cos();
            let sec = 1.0 / ca;
            let st = s * t;
            let w = 2.0 * st * ca;
            let half = sec / 2.0;
            let diag = half * (sec * w.sin() - 2.0 * st * sa * sa);
            let h01 = half * (sec * (alpha - w).cos() - 2.0 * st * sa - 1.0);
            let h10 = half * (1.0 - sec * (alpha + w).cos() - 2.0 * st * sa);
            Ok(ComplexMatrix::from_rows(&[
                [c(0.0, diag), re(h01)],
                [re(h10), c(0.0, -diag)],
            ]))
        }
        HamiltonianModel::Kappa { kappa } => {
            let r = kappa.sqrt();
            let x = t * r;
            let pre = 1.0 / (4.0 * kappa * r);
            let d = 2.0 * r * x.sin().powi(2);
            Ok(ComplexMatrix::from_rows(&[
                [
                    c(0.0, pre * d),
                    re(pre * (2.0 * t * kappa * r + kappa * (2.0 * x).sin())),
                ],
                [re(pre * (2.0 * x - (2.0 * x).sin())), c(0.0, -pre * d)],
            ]))
        }
        other => Err(Error::UnsupportedFamily {
            family: other.family_name().into(),
        }),
    }
}

/// Closed-form eigenvalue pair `(λ₊, λ₋)` of the local generator.
///
/// Small `t` can give a negative radicand, so the square root is complex.
pub fn h_eigen_oracle(model: &HamiltonianModel, theta: f64, t: f64) -> Result<(C64, C64)> {
    let lam = match model.with_theta(theta)? {
        HamiltonianModel::Pt {
            alpha,
            estimate: PtParam::S,
            ..
        } => re(t * alpha.cos()),
        HamiltonianModel::Pt {
            s,
            alpha,
            estimate: PtParam::Alpha,
        } => {
            let sec = 1.0 / alpha.cos();
            let arg = 4.0 * (2.0 * s * t * alpha.cos()).cos() - 4.0 + s * s * t * t * (1.0 - (4.0 * alpha).cos());
            re(arg).sqrt() * (sec / (2.0 * 2f64.sqrt()))
        }
        HamiltonianModel::Kappa { kappa } => {
            let arg = -1.0 + 2.0 * kappa * t * t + (2.0 * t * kappa.sqrt()).cos();
            (re(arg) / (8.0 * kappa * kappa)).sqrt()
        }
        HamiltonianModel::EpDemo { alpha } => {
            let c2 = (2.0 * alpha).cos();
            let arg = (2.0 * t * c2.sqrt()).cos() + t * t * (2.0 * alpha).sin() * (4.0 * alpha).sin() - 1.0;
            (re(arg) / 2.0).sqrt() / c2
        }
        HamiltonianModel::Custom(m) => {
            return Err(Error::UnsupportedFamily { family: m.name });
        }
    };
    Ok((lam, -lam))
}

/// Closed-form eigenvalues of `H(θ)`, ascending, for the catalog families.
pub fn h_spectrum_oracle(model: &HamiltonianModel, theta: f64) -> Result<(C64, C64)> {
    let lam = match model.with_theta(theta)? {
        HamiltonianModel::Pt { s, alpha, .. } => re(s * alpha.cos()),
        HamiltonianModel::Kappa { kappa } => re(kappa.sqrt()),
        HamiltonianModel::EpDemo { alpha } => re((2.0 * alpha).cos()).sqrt(),
        HamiltonianModel::Custom(m) => {
            return Err(Error::UnsupportedFamily { family: m.name });
        }
    };
    Ok((-lam, lam))
}
