//! Subcommand bodies. Each writes rows in grid order and returns a tally.

use std::io;
use std::path::{Path, PathBuf};

use nhmetro_core::dilation::{build_dilation, evolve_dilated, fidelity, pseudo_hermiticity_residual, DilationSystem};
use nhmetro_core::dynamics::evolve;
use nhmetro_core::estimate::{monotone_bracket, run_trials, EstimationRun, Experiment};
use nhmetro_core::fisher::{
    default_step, generator_fd, qfi_closed_form, qfi_generator, qfi_record, qfi_state_derivative,
};
use nhmetro_core::measure::{error_propagation_precision, optimality_residual, Observable};
use nhmetro_core::models::hamiltonian;
use nhmetro_core::{Error, Result};

use crate::config::{Plan, Probe};
use crate::table::{Cell, Table};

/// Rows written and rows that carry a failure status.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub rows: usize,
    pub failed: usize,
}

impl Tally {
    fn record(&mut self, ok: bool) {
        self.rows += 1;
        self.failed += usize::from(!ok);
    }
}

/// Short machine-readable tag for a row status column.
pub fn status(e: &Error) -> &'static str {
    match e {
        Error::NonFinite { .. } => "non_finite",
        Error::NotHermitian { .. } => "not_hermitian",
        Error::NotPositive { .. } => "not_positive",
        Error::Singular { .. } => "singular",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::OutOfRange { .. } => "out_of_range",
        Error::UnsupportedFamily { .. } => "unsupported_family",
        Error::UnsupportedProbe => "unsupported_probe",
        Error::NotNormalized { .. } => "not_normalized",
        Error::NonRealQfi { .. } => "non_real_qfi",
        Error::NotProjector { .. } => "not_projector",
        Error::ZeroScalar { .. } => "zero_scalar",
        Error::Degenerate { .. } => "degenerate",
        Error::ZeroG { .. } => "zero_g",
        Error::NoRoot { .. } => "no_root",
        Error::NotBracketed { .. } => "not_bracketed",
        Error::AllTrialsFailed { .. } => "all_trials_failed",
        Error::NoPositiveSolution => "no_positive_solution",
        Error::ZetaNotPositive { .. } => "zeta_not_positive",
        Error::InvalidArgument(_) => "invalid_argument",
    }
}

fn header<'a>(plan: &Plan, rest: &[&'a str]) -> Vec<&'a str> {
    let mut h = vec!["t"];
    if plan.angle_column() {
        h.push("phi_deg");
    }
    h.extend_from_slice(rest);
    h
}

fn lead(plan: &Plan, t: f64, p: &Probe) -> Vec<Cell> {
    let mut cells = vec![Cell::Num(t)];
    if plan.angle_column() {
        cells.push(p.phi_deg.into());
    }
    cells
}

fn failed_row(mut cells: Vec<Cell>, blanks: usize, e: &Error) -> Vec<Cell> {
    cells.extend((0..blanks).map(|_| Cell::Empty));
    cells.push(Cell::Text(status(e).into()));
    cells
}

fn max_rel_spread(values: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for a in values {
        for b in values {
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    worst
}

struct QfiRow {
    f: f64,
    k: f64,
    i: f64,
    gap: f64,
    closed: Option<f64>,
    deviation: f64,
}

fn qfi_point(plan: &Plan, t: f64, psi0: &nhmetro_core::ComplexVector) -> Result<QfiRow> {
    let (m, th) = (&plan.model, plan.theta);
    let rec = qfi_record(m, th, t, psi0)?;
    let step = default_step(th);
    let phi = evolve(m, th, t, psi0)?.phi_out;
    let closed = match qfi_closed_form(m, th, t, psi0) {
        Ok(f) => Some(f),
        Err(Error::UnsupportedFamily { .. } | Error::UnsupportedProbe) => None,
        Err(e) => return Err(e),
    };
    let mut routes = vec![
        rec.f,
        qfi_generator(&generator_fd(m, th, t, step)?, &phi)?,
        qfi_state_derivative(m, th, t, psi0, step)?,
    ];
    routes.extend(closed);
    Ok(QfiRow {
        f: rec.f,
        k: rec.k,
        i: rec.i,
        gap: rec.gap,
        closed,
        deviation: max_rel_spread(&routes),
    })
}

pub fn qfi(plan: &Plan, out: Option<&Path>) -> io::Result<Tally> {
    let cols = [
        "F",
        "sqrtF",
        "K",
        "I",
        "sqrtI",
        "gap",
        "F_closed_form",
        "route_deviation",
        "status",
    ];
    let mut table = Table::create(out, &header(plan, &cols))?;
    let mut tally = Tally::default();
    for (t, p) in plan.points() {
        let cells = lead(plan, t, p);
        let row = match qfi_point(plan, t, &p.psi) {
            Ok(r) => {
                let mut c = cells;
                c.extend([
                    r.f.into(),
                    r.f.sqrt().into(),
                    r.k.into(),
                    r.i.into(),
                    r.i.sqrt().into(),
                    r.gap.into(),
                    r.closed.into(),
                    r.deviation.into(),
                    Cell::Text("ok".into()),
                ]);
                tally.record(true);
                c
            }
            Err(e) => {
                tally.record(false);
                failed_row(cells, cols.len() - 1, &e)
            }
        };
        table.row(row)?;
    }
    Ok(tally)
}

/// Per-trial dump next to the summary CSV: `<stem>_trials.csv`.
pub fn trials_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_trials.csv"))
}

fn estimate_point(plan: &Plan, t: f64, p: &Probe, seed: u64) -> Result<(f64, EstimationRun)> {
    let est = plan.estimation.as_ref().expect("checked by caller");
    let exp = Experiment::new(plan.model.clone(), t, p.psi.clone(), plan.projector.clone())?;
    let bracket = match est.bracket {
        Some(b) => b,
        None => monotone_bracket(&exp, plan.theta, 0.5 * plan.theta.abs().max(0.2))?,
    };
    let sqrt_f = qfi_record(&plan.model, plan.theta, t, &p.psi)?.sqrt_f();
    let run = run_trials(&exp, plan.theta, est.n, est.trials, seed, bracket)?;
    Ok((sqrt_f, run))
}

/// Grid point `k` draws from seed `seed + k`.
pub fn estimate(plan: &Plan, out: Option<&Path>) -> io::Result<Tally> {
    let est = plan.estimation.as_ref().expect("checked by caller");
    let cols = [
        "p_true",
        "sqrtF",
        "precision",
        "precision_err",
        "mean_estimate",
        "bias_pct",
        "failed_trials",
        "status",
    ];
    let mut table = Table::create(out, &header(plan, &cols))?;
    let mut trials = match out {
        Some(path) => Some(Table::create(
            Some(&trials_path(path)),
            &header(plan, &["trial", "x", "estimate"]),
        )?),
        None => None,
    };
    let mut tally = Tally::default();
    for (k, (t, p)) in plan.points().enumerate() {
        let cells = lead(plan, t, p);
        let seed = est.seed.wrapping_add(k as u64);
        let row = match estimate_point(plan, t, p, seed) {
            Ok((sqrt_f, run)) => {
                if let Some(tt) = trials.as_mut() {
                    for (i, (shot, th)) in run.shots.iter().zip(&run.estimates).enumerate() {
                        let mut c = lead(plan, t, p);
                        c.extend([Cell::Int(i as u64), Cell::Int(shot.x), (*th).into()]);
                        tt.row(c)?;
                    }
                }
                let mut c = cells;
                c.extend([
                    run.p_true.into(),
                    sqrt_f.into(),
                    run.precision.into(),
                    run.precision_err.into(),
                    run.mean.into(),
                    run.bias_pct().into(),
                    Cell::Int(run.failed_trials as u64),
                    Cell::Text("ok".into()),
                ]);
                tally.record(true);
                c
            }
            Err(e) => {
                tally.record(false);
                let mut c = cells;
                let p_true = Experiment::new(plan.model.clone(), t, p.psi.clone(), plan.projector.clone())
                    .and_then(|x| x.probability(plan.theta))
                    .ok();
                c.push(p_true.into());
                c.extend((0..5).map(|_| Cell::Empty));
                c.push(match e {
                    Error::AllTrialsFailed { trials } => Cell::Int(trials as u64),
                    _ => Cell::Empty,
                });
                c.push(Cell::Text(status(&e).into()));
                c
            }
        };
        table.row(row)?;
    }
    Ok(tally)
}

pub fn optimal(plan: &Plan, out: Option<&Path>) -> io::Result<Tally> {
    let cols = [
        "residual",
        "c_real",
        "c_imag_fraction",
        "precision_ep",
        "sqrtF",
        "status",
    ];
    let mut table = Table::create(out, &header(plan, &cols))?;
    let a = Observable::new(plan.projector.clone(), "measurement").expect("projector is Hermitian");
    let (m, th) = (&plan.model, plan.theta);
    let mut tally = Tally::default();
    for (t, p) in plan.points() {
        let cells = lead(plan, t, p);
        let point = || -> Result<Vec<Cell>> {
            let rep = optimality_residual(m, th, t, &p.psi, &a)?;
            let sqrt_f = qfi_record(m, th, t, &p.psi)?.sqrt_f();
            let (precision, tag) = match error_propagation_precision(m, th, t, &p.psi, &a, default_step(th)) {
                Ok(x) => (Some(x), "ok"),
                Err(e @ Error::Degenerate { .. }) => (None, status(&e)),
                Err(e) => return Err(e),
            };
            Ok(vec![
                rep.residual.into(),
                rep.c.re.into(),
                rep.c_imag_fraction.into(),
                precision.into(),
                sqrt_f.into(),
                Cell::Text(tag.into()),
            ])
        };
        let row = match point() {
            Ok(rest) => {
                tally.record(true);
                let mut c = cells;
                c.extend(rest);
                c
            }
            Err(e) => {
                tally.record(false);
                failed_row(cells, cols.len() - 1, &e)
            }
        };
        table.row(row)?;
    }
    Ok(tally)
}

pub fn dilate(plan: &Plan, out: Option<&Path>) -> io::Result<Tally> {
    let cols = ["fidelity", "success_prob", "norm_drift", "eta_residual", "status"];
    let mut table = Table::create(out, &header(plan, &cols))?;
    let system: Result<DilationSystem> = hamiltonian(&plan.model, plan.theta).and_then(|h| build_dilation(&h));
    let mut tally = Tally::default();
    for (t, p) in plan.points() {
        let cells = lead(plan, t, p);
        let point = |sys: &DilationSystem| -> Result<Vec<Cell>> {
            let direct = evolve(&plan.model, plan.theta, t, &p.psi)?;
            let d = evolve_dilated(sys, &p.psi, t)?;
            let total = sys.c * p.psi.expectation(&sys.eta).re;
            Ok(vec![
                fidelity(&d.recovered, &direct.phi_out).into(),
                d.success_prob.into(),
                ((d.norm_sqr - total).abs() / total.max(1.0)).into(),
                pseudo_hermiticity_residual(&sys.eta, &sys.h).into(),
                Cell::Text("ok".into()),
            ])
        };
        let row = match system.as_ref().map_err(Clone::clone).and_then(point) {
            Ok(rest) => {
                tally.record(true);
                let mut c = cells;
                c.extend(rest);
                c
            }
            Err(e) => {
                tally.record(false);
                failed_row(cells, cols.len() - 1, &e)
            }
        };
        table.row(row)?;
    }
    Ok(tally)
}
