//! Hermitian two-qubit dilation of a pseudo-Hermitian qubit Hamiltonian.
//!
//! Tensor order is ancilla ⊗ system: basis index `2·a + s` with `a` the
//! ancilla bit. Post-selecting the ancilla on `|0⟩` recovers the
//! non-unitary system dynamics `e^{−iHt}ψ₀`.

use crate::error::{Error, Result};
use crate::matcore::{
    c as cplx, herm_funct, herm_map, hermitian_eigen, mat_exp, mat_inverse, re, ComplexMatrix, ComplexVector,
    SpectralFunction, I,
};

const POSITIVE_TOL: f64 = 1e-10;
const NULLSPACE_TOL: f64 = 1e-9;

/// Hermitian 2×2 from the real parameters `(a, b, c, d)` as `[[a, b + ic], [b − ic, d]]`.
fn hermitian_from_params(p: &[f64; 4]) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[[re(p[0]), cplx(p[1], p[2])], [cplx(p[1], -p[2]), re(p[3])]])
}

/// `‖ηH − H†η‖_F`.
pub fn pseudo_hermiticity_residual(eta: &ComplexMatrix, h: &ComplexMatrix) -> f64 {
    (eta * h).distance(&(&h.adjoint() * eta))
}

fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eigen(m)?.0[0])
}

/// 2-norm condition number of a positive-definite metric.
pub fn eta_condition(eta: &ComplexMatrix) -> Result<f64> {
    let (vals, _) = hermitian_eigen(eta)?;
    let lo = vals[0];
    let hi = vals[vals.len() - 1];
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Real basis of `{η Hermitian : ηH = H†η}` in `(a, b, c, d)` coordinates.
fn metric_nullspace(h: &ComplexMatrix) -> Result<Vec<[f64; 4]>> {
    // Columns of the real 8×4 system, one per unit parameter.
    let mut cols = [[0.0; 8]; 4];
    for (k, col) in cols.iter_mut().enumerate() {
        let mut p = [0.0; 4];
        p[k] = 1.0;
        let e = hermitian_from_params(&p);
        let r = &(&e * h) - &(&h.adjoint() * &e);
        for (idx, z) in r.as_slice().iter().enumerate() {
            col[2 * idx] = z.re;
            col[2 * idx + 1] = z.im;
        }
    }
    let mut gram = ComplexMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            gram[(i, j)] = re((0..8).map(|r| cols[i][r] * cols[j][r]).sum());
        }
    }
    let (vals, vecs) = hermitian_eigen(&gram)?;
    let top = vals[3].max(f64::MIN_POSITIVE);
    Ok((0..4)
        .filter(|&k| vals[k].max(0.0).sqrt() <= NULLSPACE_TOL * top.sqrt())
        .map(|k| [vecs[(0, k)].re, vecs[(1, k)].re, vecs[(2, k)].re, vecs[(3, k)].re])
        .collect())
}

/// Unit-trace element of the nullspace closest (Frobenius) to `I/2`.
fn closest_to_half_identity(basis: &[[f64; 4]]) -> Option<ComplexMatrix> {
    let m = basis.len();
    // Frobenius weights of (a, b, c, d) and the trace functional.
    let w = [1.0, 2.0, 2.0, 1.0];
    let target = [0.5, 0.0, 0.0, 0.5];
    let trace = [1.0, 0.0, 0.0, 1.0];
    let dot = |x: &[f64; 4], y: &[f64; 4], wt: bool| -> f64 {
        (0..4).map(|i| x[i] * y[i] * if wt { w[i] } else { 1.0 }).sum()
    };
    // KKT system [[G, τ], [τᵀ, 0]] [x; λ] = [r; 1].
    let mut kkt = ComplexMatrix::zeros(m + 1);
    let mut rhs = ComplexMatrix::zeros(m + 1);
    for i in 0..m {
        for j in 0..m {
            kkt[(i, j)] = re(dot(&basis[i], &basis[j], true));
        }
        let tau = dot(&basis[i], &trace, false);
        kkt[(i, m)] = re(tau);
        kkt[(m, i)] = re(tau);
        rhs[(i, 0)] = re(dot(&basis[i], &target, true));
    }
    rhs[(m, 0)] = re(1.0);
    let sol = &mat_inverse(&kkt).ok()? * &rhs;
    let mut p = [0.0; 4];
    for (i, b) in basis.iter().enumerate() {
        for k in 0..4 {
            p[k] += sol[(i, 0)].re * b[k];
        }
    }
    Some(hermitian_from_params(&p))
}

/// `Σ|u_i⟩⟨u_i|` over eigenvectors of `H†`, scaled to unit trace.
fn left_eigen_metric(h: &ComplexMatrix) -> Option<ComplexMatrix> {
    let ed = crate::matcore::eig_decompose(&h.adjoint()).ok()?;
    if ed.defective {
        return None;
    }
    let mut eta = ComplexMatrix::zeros(h.dim());
    for k in 0..h.dim() {
        eta = &eta + &ed.eigenvector(k).projector();
    }
    let tr = eta.trace().re;
    Some(eta.scale_re(1.0 / tr).hermitian_part())
}

/// Positive-definite unit-trace metric with `ηH = H†η`.
pub fn solve_eta(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: h.dim(),
        });
    }
    let basis = metric_nullspace(h)?;
    if basis.is_empty() {
        return Err(Error::NoPositiveSolution);
    }
    let scale = h.frobenius_norm().max(1.0);
    let accept = |eta: &ComplexMatrix| -> bool {
        matches!(min_eigenvalue(eta), Ok(v) if v > POSITIVE_TOL)
            && pseudo_hermiticity_residual(eta, h) <= 1e-9 * scale * eta.frobenius_norm()
    };
    if let Some(eta) = closest_to_half_identity(&basis) {
        if accept(&eta) {
            return Ok(eta);
        }
    }
    match left_eigen_metric(h) {
        Some(eta) if accept(&eta) => Ok(eta),
        _ => Err(Error::NoPositiveSolution),
    }
}

/// Dilated Hermitian system `H_tot = I ⊗ H_s + σ_y ⊗ V`.
#[derive(Debug, Clone)]
pub struct DilationSystem {
    pub h: ComplexMatrix,
    pub eta: ComplexMatrix,
    /// `Σ 1/λ_i(η)`.
    pub c: f64,
    pub zeta: ComplexMatrix,
    pub zeta_sqrt: ComplexMatrix,
    pub zeta_inv_sqrt: ComplexMatrix,
    pub h_s: ComplexMatrix,
    pub v: ComplexMatrix,
    pub h_tot: ComplexMatrix,
}

/// Deviations of each structural identity; all should be near zero.
#[derive(Debug, Clone, Copy)]
pub struct InvariantReport {
    pub pseudo_hermiticity: f64,
    pub min_eig_eta: f64,
    pub min_eig_zeta: f64,
    pub h_s_hermitian: f64,
    pub v_hermitian: f64,
    pub h_tot_hermitian: f64,
    /// `‖H_s − iVζ^{1/2} − H‖`.
    pub lower_block: f64,
    /// `‖H_s + iVζ^{−1/2} − ζ^{1/2}Hζ^{−1/2}‖`.
    pub upper_block: f64,
}

impl InvariantReport {
    pub fn holds(&self, h_norm: f64, eta_norm: f64) -> bool {
        self.pseudo_hermiticity < 1e-9 * h_norm.max(1.0) * eta_norm.max(1.0)
            && self.min_eig_eta > POSITIVE_TOL
            && self.min_eig_zeta > POSITIVE_TOL
            && self.h_s_hermitian < 1e-9
            && self.v_hermitian < 1e-9
            && self.h_tot_hermitian < 1e-9
            && self.lower_block < 1e-8
            && self.upper_block < 1e-8
    }
}

impl DilationSystem {
    pub fn invariants(&self) -> Result<InvariantReport> {
        let id_block = &(&self.h_s - &(&self.v * &self.zeta_sqrt).scale(I)) - &self.h;
        let similar = &(&self.zeta_sqrt * &self.h) * &self.zeta_inv_sqrt;
        let up_block = &(&self.h_s + &(&self.v * &self.zeta_inv_sqrt).scale(I)) - &similar;
        Ok(InvariantReport {
            pseudo_hermiticity: pseudo_hermiticity_residual(&self.eta, &self.h),
            min_eig_eta: min_eigenvalue(&self.eta)?,
            min_eig_zeta: min_eigenvalue(&self.zeta)?,
            h_s_hermitian: self.h_s.hermitian_deviation(),
            v_hermitian: self.v.hermitian_deviation(),
            h_tot_hermitian: self.h_tot.hermitian_deviation(),
            lower_block: id_block.frobenius_norm(),
            upper_block: up_block.frobenius_norm(),
        })
    }

    pub fn check(&self) -> bool {
        self.invariants()
            .map(|r| r.holds(self.h.frobenius_norm(), self.eta.frobenius_norm()))
            .unwrap_or(false)
    }
}

pub fn build_dilation(h: &ComplexMatrix) -> Result<DilationSystem> {
    let eta = solve_eta(h)?;
    build_dilation_with_eta(h, &eta)
}

/// Dilation from an explicit metric (any positive scale).
pub fn build_dilation_with_eta(h: &ComplexMatrix, eta: &ComplexMatrix) -> Result<DilationSystem> {
    let (vals, _) = hermitian_eigen(eta)?;
    if !(vals[0] > POSITIVE_TOL) {
        return Err(Error::NotPositive { eigenvalue: vals[0] });
    }
    let c: f64 = vals.iter().map(|v| 1.0 / v).sum();
    let zeta = (&eta.scale_re(c) - &ComplexMatrix::identity(h.dim())).hermitian_part();
    let min_zeta = min_eigenvalue(&zeta)?;
    if !(min_zeta > POSITIVE_TOL) {
        return Err(Error::ZetaNotPositive {
            min_eigenvalue: min_zeta,
        });
    }
    let zeta_sqrt = herm_funct(&zeta, SpectralFunction::Sqrt)?;
    let zeta_inv_sqrt = herm_funct(&zeta, SpectralFunction::InvSqrt)?;
    // (ζ^{1/2} + ζ^{−1/2})⁻¹ in ζ's eigenbasis
    let w = herm_map(&zeta, |x| {
        let r = x.sqrt();
        1.0 / (r + 1.0 / r)
    })?;
    let similar = &(&zeta_sqrt * h) * &zeta_inv_sqrt;
    let v = (&(h - &similar) * &w).scale(I);
    let h_s = h + &(&v * &zeta_sqrt).scale(I);
    let h_tot = &ComplexMatrix::identity(2).kron(&h_s) + &ComplexMatrix::pauli_y().kron(&v);
    Ok(DilationSystem {
        h: h.clone(),
        eta: eta.clone(),
        c,
        zeta,
        zeta_sqrt,
        zeta_inv_sqrt,
        h_s,
        v,
        h_tot,
    })
}

#[derive(Debug, Clone)]
pub struct DilatedEvolution {
    pub psi_tot: ComplexVector,
    /// Ancilla-`|0⟩` block, normalized.
    pub recovered: ComplexVector,
    pub success_prob: f64,
    /// `‖Ψ_tot‖²`, conserved.
    pub norm_sqr: f64,
}

/// `|Ψ(0)⟩ = |0⟩⊗ψ₀ + |1⟩⊗ζ^{1/2}ψ₀`, unnormalized.
pub fn initial_dilated_state(sys: &DilationSystem, psi0: &ComplexVector) -> ComplexVector {
    let lower = sys.zeta_sqrt.mul_vec(psi0);
    let mut amps = psi0.as_slice().to_vec();
    amps.extend_from_slice(lower.as_slice());
    ComplexVector::new(amps)
}

pub fn evolve_dilated(sys: &DilationSystem, psi0: &ComplexVector, t: f64) -> Result<DilatedEvolution> {
    crate::dynamics::check_normalized(psi0)?;
    let u = mat_exp(&sys.h_tot.scale(-I * t))?;
    let psi_tot = u.mul_vec(&initial_dilated_state(sys, psi0));
    let d = psi0.dim();
    let block = ComplexVector::new(psi_tot.as_slice()[..d].to_vec());
    let norm_sqr = psi_tot.norm_sqr();
    let success_prob = block.norm_sqr() / norm_sqr;
    Ok(DilatedEvolution {
        recovered: crate::dynamics::fix_phase(&block.normalized()?),
        psi_tot,
        success_prob,
        norm_sqr,
    })
}

/// `|⟨a|b⟩|²` for normalized states.
pub fn fidelity(a: &ComplexVector, b: &ComplexVector) -> f64 {
    a.inner(b).norm_sqr()
}
