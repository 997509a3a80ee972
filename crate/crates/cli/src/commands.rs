//! The four CLI verbs, each producing CSV text.

use std::fmt::Write as _;

use nljm::hamiltonian::stability_scan;
use nljm::reference::{
    chi_irr, chi_reconstruct, chi_reg, cosine_like_all, laguerre_basis_reference, sine_like_all, Basis, EnergyPoint, Summation,
};
use nljm::solver::{precompute, scan, Precomputed, ScanPoint, ScatteringResult, Status, D_CONVERGENCE_TOL};
use nljm::Complex64;

use crate::config::{BasisChoice, RunConfig};
use crate::CliError;

/// Cross-validate the Green's matrix on every k-th energy of a scan.
pub const CROSS_VALIDATE_EVERY: usize = 10;
/// Direct vs spectral Green's agreement expected on sampled points.
pub const GREENS_AGREEMENT: f64 = 1e-9;

/// CSV body plus diagnostics destined for stderr.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub body: String,
    pub warnings: Vec<String>,
    /// Grid points whose solve failed.
    pub failed: usize,
}

/// Fixed 6-decimal formatting without negative zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn abs_one_minus(s: Complex64) -> f64 {
    (Complex64::new(1.0, 0.0) - s).norm()
}

fn prepare(cfg: &RunConfig, warnings: &mut Vec<String>) -> Result<Precomputed, CliError> {
    let pre = precompute(&cfg.physics, &cfg.numerics).map_err(|e| CliError::Numerical(e.to_string()))?;
    if let Some(dev) = pre.d_self_check {
        if dev > D_CONVERGENCE_TOL {
            warnings.push(format!(
                "D tensor differs by {dev:.3e} between quadrature orders {} and {} (accepted under the override)",
                cfg.numerics.quad_order,
                2 * cfg.numerics.quad_order
            ));
        }
    }
    Ok(pre)
}

fn run_scan(cfg: &RunConfig, warnings: &mut Vec<String>) -> Result<Vec<ScanPoint>, CliError> {
    let pre = prepare(cfg, warnings)?;
    let points =
        scan(&cfg.physics, &cfg.numerics, &pre, &cfg.energies, Some(CROSS_VALIDATE_EVERY)).map_err(|e| CliError::Config(e.to_string()))?;
    for p in &points {
        match &p.outcome {
            Ok(r) => {
                if r.energy_used != r.energy {
                    warnings.push(format!("E = {}: singular Green's matrix, solved at E = {}", fmt6(r.energy), r.energy_used));
                }
                if let Some(x) = r.diagnostics.greens_crosscheck {
                    if x > GREENS_AGREEMENT {
                        warnings.push(format!("E = {}: direct and spectral Green's matrices differ by {x:.3e}", fmt6(r.energy)));
                    }
                }
            }
            Err(e) => warnings.push(format!("E = {}: {e}", fmt6(p.energy))),
        }
    }
    Ok(points)
}

fn status_label(r: &ScatteringResult) -> &'static str {
    match r.status {
        Status::Converged { .. } => "converged",
        Status::Bifurcated { period: 2, .. } => "bifurcated",
        Status::Bifurcated { .. } => "cycle3",
        Status::MaxIterations => "max_iterations",
    }
}

/// `E,status,iterations,abs_one_minus_S,re_S,im_S,bif_value_a,bif_value_b`,
/// one row per grid energy in ascending order.
pub fn cmd_scan(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut report = Report::default();
    let points = run_scan(cfg, &mut report.warnings)?;
    report.body.push_str("E,status,iterations,abs_one_minus_S,re_S,im_S,bif_value_a,bif_value_b\n");
    for p in &points {
        match &p.outcome {
            Ok(r) => {
                let s = r.final_s();
                let (a, b) = match &r.status {
                    Status::Bifurcated { values, .. } => (fmt6(abs_one_minus(values[0])), fmt6(abs_one_minus(values[1]))),
                    _ => (String::new(), String::new()),
                };
                let _ = writeln!(
                    report.body,
                    "{},{},{},{},{},{},{a},{b}",
                    fmt6(p.energy),
                    status_label(r),
                    r.iterations(),
                    fmt6(abs_one_minus(s)),
                    fmt6(s.re),
                    fmt6(s.im),
                );
            }
            Err(_) => {
                report.failed += 1;
                let _ = writeln!(report.body, "{},failed,,,,,,", fmt6(p.energy));
            }
        }
    }
    Ok(report)
}

/// Parses `0-12`, `0,3,5` or mixtures such as `0-3,7`.
pub fn parse_orders(list: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Config(format!("invalid order list '{list}'"));
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// |1 − S_m| with rows m and columns E. A converged run repeats its
/// converged value and a certified cycle its cycle values past the last
/// computed order; other missing cells stay blank. Both cases are
/// footnoted.
pub fn cmd_table(cfg: &RunConfig, orders: &[usize]) -> Result<Report, CliError> {
    let mut report = Report::default();
    let points = run_scan(cfg, &mut report.warnings)?;
    let mut notes = Vec::new();
    let mut cols: Vec<Vec<String>> = Vec::new();
    for p in &points {
        let e = fmt6(p.energy);
        let col = match &p.outcome {
            Ok(r) => {
                let h = &r.history;
                let last = h.len() - 1;
                let mut extended = false;
                let mut blank = false;
                let cells = orders
                    .iter()
                    .map(|&m| {
                        if m <= last {
                            return fmt6(abs_one_minus(h[m]));
                        }
                        match &r.status {
                            Status::Converged { s, .. } => {
                                extended = true;
                                fmt6(abs_one_minus(*s))
                            }
                            Status::Bifurcated { period, values } => {
                                extended = true;
                                fmt6(abs_one_minus(values[m % period]))
                            }
                            Status::MaxIterations => {
                                blank = true;
                                String::new()
                            }
                        }
                    })
                    .collect();
                if extended {
                    let what = if matches!(r.status, Status::Converged { .. }) { "the converged value" } else { "the certified cycle" };
                    notes.push(format!("# E={e}: orders after m={last} repeat {what}"));
                }
                if blank {
                    notes.push(format!("# E={e}: no value beyond m={last} (iteration cap reached)"));
                }
                cells
            }
            Err(err) => {
                report.failed += 1;
                notes.push(format!("# E={e}: solve failed ({err})"));
                vec![String::new(); orders.len()]
            }
        };
        cols.push(col);
    }
    report.body.push('m');
    for p in &points {
        report.body.push(',');
        report.body.push_str(&fmt6(p.energy));
    }
    report.body.push('\n');
    for (row, &m) in orders.iter().enumerate() {
        report.body.push_str(&m.to_string());
        for col in &cols {
            report.body.push(',');
            report.body.push_str(&col[row]);
        }
        report.body.push('\n');
    }
    for n in notes {
        report.body.push_str(&n);
        report.body.push('\n');
    }
    Ok(report)
}

/// Reconstructed and target reference functions on an r grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCurves {
    pub basis: Basis,
    pub energy: f64,
    pub r: Vec<f64>,
    pub chi_sin: Vec<f64>,
    pub chi_reg: Vec<f64>,
    pub chi_cos: Vec<f64>,
    pub chi_irr: Vec<f64>,
}

impl BasisCurves {
    /// max |χ_sin − χ_reg| over the whole grid.
    pub fn sin_deviation(&self) -> f64 {
        max_dev(&self.chi_sin, &self.chi_reg)
    }

    /// max |χ_cos − χ_irr| over the outer half of the grid.
    pub fn cos_outer_deviation(&self) -> f64 {
        let h = self.r.len() / 2;
        max_dev(&self.chi_cos[h..], &self.chi_irr[h..])
    }
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(_, y)| y.is_finite()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn basis_curves(
    basis: Basis,
    energy: f64,
    lambda: f64,
    ell: usize,
    size: usize,
    r: &[f64],
    summation: Summation,
) -> Result<BasisCurves, CliError> {
    let num = |e: &dyn std::fmt::Display| CliError::Numerical(e.to_string());
    let ep = EnergyPoint::new(energy, lambda).map_err(|e| num(&e))?;
    let (s, c) = match basis {
        Basis::Oscillator => (sine_like_all(&ep, ell, size), cosine_like_all(&ep, ell, size).map_err(|e| num(&e))?),
        Basis::Laguerre => {
            let rc = laguerre_basis_reference(&ep, ell, size).map_err(|e| num(&e))?;
            (rc.s, rc.c)
        }
    };
    let chi_sin = chi_reconstruct(&s, basis, lambda, ell, r, summation);
    let chi_cos = chi_reconstruct(&c, basis, lambda, ell, r, summation);
    let chi_reg = r.iter().map(|&x| chi_reg(ep.kappa, ell, x)).collect::<Result<Vec<_>, _>>().map_err(|e| num(&e))?;
    let chi_irr = r.iter().map(|&x| chi_irr(ep.kappa, ell, x)).collect::<Result<Vec<_>, _>>().map_err(|e| num(&e))?;
    Ok(BasisCurves { basis, energy, r: r.to_vec(), chi_sin, chi_reg, chi_cos, chi_irr })
}

/// One block of `r,chi_sin,chi_reg_target,chi_cos,chi_irr_target` per
/// (basis, energy), headed by a comment line and followed by the
/// max-deviation summary.
pub fn cmd_basis_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut report = Report::default();
    let bases: &[Basis] = match cfg.basis_check {
        BasisChoice::Oscillator => &[Basis::Oscillator],
        BasisChoice::Laguerre => &[Basis::Laguerre],
        BasisChoice::Both => &[Basis::Oscillator, Basis::Laguerre],
    };
    let (lambda, ell, size) = (cfg.numerics.lambda, cfg.physics.ell, cfg.numerics.size);
    for &basis in bases {
        for &e in &cfg.energies {
            let c = basis_curves(basis, e, lambda, ell, size, &cfg.r_grid, cfg.summation)?;
            let name = match basis {
                Basis::Oscillator => "oscillator",
                Basis::Laguerre => "laguerre",
            };
            let _ = writeln!(report.body, "# basis={name} E={} ell={ell} lambda={} N={size}", fmt6(e), fmt6(lambda));
            report.body.push_str("r,chi_sin,chi_reg_target,chi_cos,chi_irr_target\n");
            for i in 0..c.r.len() {
                let _ = writeln!(
                    report.body,
                    "{},{},{},{},{}",
                    fmt6(c.r[i]),
                    fmt6(c.chi_sin[i]),
                    fmt6(c.chi_reg[i]),
                    fmt6(c.chi_cos[i]),
                    fmt6(c.chi_irr[i])
                );
            }
            let _ = writeln!(report.body, "# max_abs_dev_sin={:.6e}", c.sin_deviation());
            let _ = writeln!(report.body, "# max_abs_dev_cos_outer_half={:.6e}", c.cos_outer_deviation());
        }
    }
    Ok(report)
}

/// Diagonal diagnostics over a (λ, N) grid; empty overrides fall back to
/// the configuration's `stability` section.
pub fn cmd_stability_scan(cfg: &RunConfig, lambdas: Option<&[f64]>, sizes: Option<&[usize]>) -> Result<Report, CliError> {
    let lambdas = lambdas.unwrap_or(&cfg.stability_lambdas);
    let sizes = sizes.unwrap_or(&cfg.stability_sizes);
    if lambdas.is_empty() || sizes.is_empty() {
        return Err(CliError::Config("stability scan needs nonempty lambda and N grids".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
        return Err(CliError::Config(format!("N = {n} in the stability grid is below 2")));
    }
    if let Some(&l) = lambdas.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(CliError::Config(format!("λ = {l} in the stability grid is not positive")));
    }
    let rows = stability_scan(
        cfg.physics.n,
        cfg.physics.ell,
        &cfg.physics.potential,
        lambdas,
        sizes,
        cfg.numerics.quad_order,
        cfg.stability_threshold,
    )
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut report = Report::default();
    report.body.push_str("lambda,N,Q,pot_diag_norm,pot_edge,pot_drift,f_diag_norm,f_edge,f_drift,plateau\n");
    for r in rows {
        let _ = writeln!(
            report.body,
            "{},{},{},{},{},{:.6e},{},{},{:.6e},{}",
            fmt6(r.lambda),
            r.size,
            r.quad_order,
            fmt6(r.pot_diag_norm),
            fmt6(r.pot_edge),
            r.pot_drift,
            fmt6(r.f_diag_norm),
            fmt6(r.f_edge),
            r.f_drift,
            r.plateau
        );
    }
    Ok(report)
}
