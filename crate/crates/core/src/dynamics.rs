//! Non-unitary evolution and post-selection statistics.

use crate::error::{Error, Result};
use crate::matcore::{mat_exp, re, ComplexMatrix, ComplexVector, C64, I};
use crate::models::{hamiltonian, HamiltonianModel};

/// Input states must satisfy `|⟨ψ|ψ⟩ − 1|` below this.
pub const NORMALIZATION_TOL: f64 = 1e-12;

const PROJECTOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub u: ComplexMatrix,
    /// `U|ψ₀⟩` before normalization.
    pub psi_out_raw: ComplexVector,
    /// Normalized output, first nonzero amplitude real-positive.
    pub phi_out: ComplexVector,
    /// `⟨ψ_out|ψ_out⟩`.
    pub k: f64,
}

pub fn check_normalized(psi: &ComplexVector) -> Result<()> {
    if !psi.is_normalized(NORMALIZATION_TOL) {
        return Err(Error::NotNormalized {
            norm_sqr: psi.norm_sqr(),
        });
    }
    Ok(())
}

/// Rotates the global phase so the first nonzero amplitude is real-positive.
pub fn fix_phase(v: &ComplexVector) -> ComplexVector {
    let scale = v.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
    match v.as_slice().iter().find(|z| z.norm() > 1e-14 * scale) {
        Some(z) => v.scale(z.conj() / z.norm()),
        None => v.clone(),
    }
}

/// `e^{−iHt}`.
pub fn evolution_operator(model: &HamiltonianModel, theta: f64, t: f64) -> Result<ComplexMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            param: "t".into(),
            value: t,
            reason: "time must be finite and >= 0".into(),
        });
    }
    mat_exp(&hamiltonian(model, theta)?.scale(-I * t))
}

pub fn evolve(model: &HamiltonianModel, theta: f64, t: f64, psi0: &ComplexVector) -> Result<EvolutionResult> {
    check_normalized(psi0)?;
    if psi0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: psi0.dim(),
        });
    }
    let u = evolution_operator(model, theta, t)?;
    let psi_out_raw = u.mul_vec(psi0);
    let k = psi_out_raw.norm_sqr();
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::NonFinite {
            stage: "output normalization".into(),
        });
    }
    let phi_out = fix_phase(&psi_out_raw.scale(re(1.0 / k.sqrt())));
    Ok(EvolutionResult {
        u,
        psi_out_raw,
        phi_out,
        k,
    })
}

/// `|index⟩⟨index|`.
pub fn basis_projector(dim: usize, index: usize) -> ComplexMatrix {
    ComplexVector::basis(dim, index).projector()
}

/// Checks that `a` is a rank-1 Hermitian projector.
pub fn check_projector(a: &ComplexMatrix) -> Result<()> {
    let herm = a.hermitian_deviation();
    let idem = (a * a).distance(a);
    let rank = (a.trace() - re(1.0)).norm();
    let deviation = herm.max(idem).max(rank);
    if !(deviation <= PROJECTOR_TOL) {
        return Err(Error::NotProjector { deviation });
    }
    Ok(())
}

/// `⟨φ|A|φ⟩` for a rank-1 projector `A`.
pub fn survival_probability(res: &EvolutionResult, a: &ComplexMatrix) -> Result<f64> {
    check_projector(a)?;
    if a.dim() != res.phi_out.dim() {
        return Err(Error::DimensionMismatch {
            expected: res.phi_out.dim(),
            found: a.dim(),
        });
    }
    let p: C64 = res.phi_out.expectation(a);
    Ok(p.re.clamp(0.0, 1.0))
}

/// Probe `cos 2φ|0⟩ + sin 2φ|1⟩`, the linear-polarization family (φ in radians).
pub fn angle_probe(phi: f64) -> ComplexVector {
    let (s, c) = (2.0 * phi).sin_cos();
    ComplexVector::from_re(&[c, s])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CustomModel, PtParam};
    use std::f64::consts::PI;

    fn pt() -> HamiltonianModel {
        HamiltonianModel::pt(1.0, PI / 4.0, PtParam::S).unwrap()
    }

    fn ket0() -> ComplexVector {
        ComplexVector::basis(2, 0)
    }

    #[test]
    fn zero_time_is_identity() {
        let psi = angle_probe(0.3);
        let r = evolve(&pt(), 1.0, 0.0, &psi).unwrap();
        assert!(r.u.distance(&ComplexMatrix::identity(2)) < 1e-15);
        assert!((r.k - 1.0).abs() < 1e-15);
        assert!(r.phi_out.distance(&psi) < 1e-15);
    }

    #[test]
    fn normalization_coefficient_at_pi_over_8() {
        let r = evolve(&pt(), 1.0, PI / 8.0, &ket0()).unwrap();
        assert!((r.k - 1.6778).abs() < 1e-3, "K = {}", r.k);
        assert!((r.phi_out.norm_sqr() - 1.0).abs() < 1e-12);
        let back = r.phi_out.scale(re(r.k.sqrt()));
        // same ray, phase fixed
        assert!((back.inner(&r.psi_out_raw).norm() - r.k).abs() < 1e-12);
    }

    #[test]
    fn hermitian_evolution_keeps_norm() {
        let m = HamiltonianModel::Custom(CustomModel::constant("z", ComplexMatrix::pauli_z()));
        let psi = angle_probe(0.4);
        for &t in &[0.1, 1.0, 7.3] {
            let r = evolve(&m, 0.0, t, &psi).unwrap();
            assert!((r.k - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table_survival_probabilities() {
        let a = basis_projector(2, 0);
        let r = evolve(&pt(), 1.0, PI / 8.0, &ket0()).unwrap();
        assert!((survival_probability(&r, &a).unwrap() - 0.9104).abs() < 5e-4);
        let r = evolve(&pt(), 1.0, PI, &ket0()).unwrap();
        assert!((survival_probability(&r, &a).unwrap() - 0.0277).abs() < 5e-4);
        let m = HamiltonianModel::pt(1.0, PI / 10.0, PtParam::Alpha).unwrap();
        let t = PI / (2.0 * (PI / 10.0).cos());
        let r = evolve(&m, PI / 10.0, t, &ket0()).unwrap();
        assert!((survival_probability(&r, &a).unwrap() - 0.0872).abs() < 5e-4);
    }

    #[test]
    fn complementary_projectors_sum_to_one() {
        let r = evolve(&pt(), 1.0, 2.3, &angle_probe(0.2)).unwrap();
        let p0 = survival_probability(&r, &basis_projector(2, 0)).unwrap();
        let p1 = survival_probability(&r, &basis_projector(2, 1)).unwrap();
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = evolve(&pt(), 1.0, 1.0, &ket0()).unwrap();
        let not_proj = ComplexMatrix::identity(2);
        assert!(matches!(
            survival_probability(&r, &not_proj),
            Err(Error::NotProjector { .. })
        ));
        let bad = ComplexVector::from_re(&[1.0, 1.0]);
        assert!(matches!(
            evolve(&pt(), 1.0, 1.0, &bad),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            evolve(&pt(), 1.0, -1.0, &ket0()),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn phase_fixing_is_deterministic() {
        let psi = ComplexVector::new(vec![C64::new(0.0, 0.6), C64::new(0.8, 0.0)]);
        let a = evolve(&pt(), 1.0, 1.7, &psi).unwrap();
        let b = evolve(&pt(), 1.0, 1.7, &psi).unwrap();
        assert_eq!(a.phi_out, b.phi_out);
        assert!(a.phi_out[0].im == 0.0 && a.phi_out[0].re > 0.0);
    }
}
