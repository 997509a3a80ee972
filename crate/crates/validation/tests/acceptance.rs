use std::process::ExitCode;
use std::time::Instant;

use nljm::hamiltonian::{f_weight_analytic, f_weight_quadrature, stability_scan, Potential};
use nljm::linearize::{c_tensor_matrix_poly, c_tensor_quadrature, canonical_tuples, exact_quadrature_bound};
use nljm::quadrature::{build_jacobi, gauss_rule};
use nljm::reference::Basis;
use nljm::solver::{precompute, scan, solve_energy, Numerics, PhysicsParams, ScanPoint, ScatteringResult, Status};
use nljm::Complex64;
use nljm_cli::commands::basis_curves;
use nljm_cli::config::RunConfig;
use nljm_cli::presets;
use nljm_validation::{settles_at, stable_digits_from, Report};

const TABLE3_CONVERGED: [f64; 7] = [1.145541, 1.944628, 0.267753, 1.999996, 1.410498, 0.695971, 0.048302];
const TABLE3_TOL: f64 = 1e-3;
const TABLE3_TARGET: f64 = 1e-4;

const TABLE4_CONVERGED: [(f64, f64); 5] = [(1.0, 1.120633), (2.0, 1.951591), (5.0, 1.606543), (6.0, 0.909557), (7.0, 0.175036)];
const TABLE4_TOL: f64 = 1e-3;
const TABLE4_E4: f64 = 1.945614;
const TABLE4_E4_TOL: f64 = 2e-3;
const TABLE4_E4_MAX_ORDER: usize = 25;
const TABLE4_CYCLE: [f64; 2] = [0.075, 1.730];
const TABLE4_CYCLE_TOL: f64 = 5e-3;
const TABLE4_CONVERGED_Q: usize = 150;

const TABLE1_M9: [f64; 5] = [1.814162, 1.838208, 1.856844, 1.894445, 1.912217];
const TABLE2_M9: [f64; 6] = [0.193032, 0.324751, 0.868347, 1.962627, 0.778133, 0.123286];
const TABLES12_TOL: f64 = 1e-3;
const TABLES12_MAX_ORDER: usize = 9;

const RESONANCE_L0: (f64, f64) = (2.517, 0.01);
const RESONANCE_L1: (f64, f64) = (4.11, 0.1);

const REFERENCE_PAIRS: [(usize, f64); 4] = [(0, 1.5), (1, 1.0), (2, 1.5), (3, 2.5)];
const SIN_TOL: f64 = 1e-6;
const COS_TOL: f64 = 1e-3;

const EXACTNESS_TOL: f64 = 1e-10;
const REMAINDER_TOL: f64 = 1e-6;
const C_DUAL_TOL: f64 = 1e-10;
const C_SYMMETRY_TOL: f64 = 1e-12;
const F_TOL: f64 = 1e-10;
const R_ADJOINT_TOL: f64 = 1e-10;
const UNIMODULAR_TOL: f64 = 1e-8;
const GREENS_TOL: f64 = 1e-9;
const FREE_TOL: f64 = 1e-8;
const WEAK_G: f64 = 1e-6;
const WEAK_TOL: f64 = 1e-4;

fn one_minus(s: Complex64) -> f64 {
    (Complex64::new(1.0, 0.0) - s).norm()
}

fn preset(name: &str) -> RunConfig {
    RunConfig::parse(presets::preset(name).expect("bundled preset"), name, false).expect("preset parses")
}

/// Largest diagnostics seen over every nonlinear run.
#[derive(Default)]
struct Accumulated {
    unimodularity: f64,
    hermiticity: f64,
    greens: f64,
    greens_at: (usize, f64),
    runs: usize,
    iterations: usize,
}

impl Accumulated {
    fn absorb(&mut self, ell: usize, points: &[ScanPoint]) {
        for p in points {
            if let Ok(r) = &p.outcome {
                self.unimodularity = self.unimodularity.max(r.diagnostics.max_unimodularity_defect);
                self.hermiticity = self.hermiticity.max(r.diagnostics.max_hermiticity_defect);
                if let Some(g) = r.diagnostics.greens_crosscheck {
                    if g > self.greens {
                        self.greens = g;
                        self.greens_at = (ell, p.energy);
                    }
                }
                self.runs += 1;
                self.iterations += r.history.len();
            }
        }
    }
}

fn run_preset(cfg: &RunConfig, acc: &mut Accumulated) -> Vec<ScanPoint> {
    let pre = precompute(&cfg.physics, &cfg.numerics).expect("precompute");
    let points = scan(&cfg.physics, &cfg.numerics, &pre, &cfg.energies, Some(1)).expect("scan");
    acc.absorb(cfg.physics.ell, &points);
    points
}

fn result_at(points: &[ScanPoint], e: f64) -> Option<&ScatteringResult> {
    points.iter().find(|p| (p.energy - e).abs() < 1e-9).and_then(|p| p.outcome.as_ref().ok())
}

fn converged_value(r: Option<&ScatteringResult>) -> Option<f64> {
    match r?.status {
        Status::Converged { s, .. } => Some(one_minus(s)),
        _ => None,
    }
}

fn table3(rep: &mut Report, acc: &mut Accumulated) {
    let cfg = preset("table3");
    let t = Instant::now();
    let points = run_preset(&cfg, acc);
    let secs = t.elapsed().as_secs_f64() / points.len() as f64;
    let mut worst = 0.0f64;
    let mut missing = Vec::new();
    for (k, want) in TABLE3_CONVERGED.iter().enumerate() {
        let e = (k + 1) as f64;
        match converged_value(result_at(&points, e)) {
            Some(v) => worst = worst.max((v - want).abs()),
            None => missing.push(e),
        }
    }
    if !missing.is_empty() {
        worst = f64::INFINITY;
    }
    rep.at_most("1 table3", "max |Δ(|1−S|)| over E=1..7 (converged)", worst, TABLE3_TOL);
    rep.info(format!(
        "1 table3: tighter target {TABLE3_TARGET:.0e} {}, {secs:.3} s per energy",
        if worst <= TABLE3_TARGET { "met" } else { "missed" }
    ));
}

fn table4(rep: &mut Report, acc: &mut Accumulated) {
    let cfg = preset("table4");
    let points = run_preset(&cfg, acc);
    let mut worst = 0.0f64;
    for &(e, want) in &TABLE4_CONVERGED {
        worst = worst.max(converged_value(result_at(&points, e)).map_or(f64::INFINITY, |v| (v - want).abs()));
    }
    rep.at_most("2a table4", "max |Δ(|1−S|)| at E∈{1,2,5,6,7} (converged)", worst, TABLE4_TOL);

    let r4 = result_at(&points, 4.0);
    let settle = r4.and_then(|r| settles_at(&r.abs_one_minus_s(), TABLE4_E4, TABLE4_E4_TOL));
    let converged = converged_value(r4);
    let ok = matches!((settle, converged), (Some(m), Some(v)) if m <= TABLE4_E4_MAX_ORDER && (v - TABLE4_E4).abs() <= TABLE4_E4_TOL);
    rep.holds(
        "2b table4",
        &format!("E=4.0 converges to {TABLE4_E4} within {TABLE4_E4_TOL:.0e} by m ≤ {TABLE4_E4_MAX_ORDER}"),
        ok,
        format!("settles at m={settle:?}, converged value {converged:?}, converged at order {:?}", r4.map(|r| r.iterations())),
    );

    let r3 = result_at(&points, 3.0);
    let (ok, detail) = match r3.map(|r| &r.status) {
        Some(Status::Bifurcated { period: 2, values }) => {
            let mut v: Vec<f64> = values.iter().map(|s| one_minus(*s)).collect();
            v.sort_by(f64::total_cmp);
            let dev = (v[0] - TABLE4_CYCLE[0]).abs().max((v[1] - TABLE4_CYCLE[1]).abs());
            (dev <= TABLE4_CYCLE_TOL, format!("cycle {{{:.6}, {:.6}}}, max deviation {dev:.3e}", v[0], v[1]))
        }
        other => (false, format!("status {other:?}")),
    };
    rep.holds("2c table4", &format!("E=3.0 period-2 cycle within {TABLE4_CYCLE_TOL:.0e} of {{0.075, 1.730}}"), ok, detail);

    let mut qcfg = cfg.clone();
    qcfg.numerics.quad_order = TABLE4_CONVERGED_Q;
    qcfg.numerics.override_quadrature_bound = false;
    let qpoints = run_preset(&qcfg, acc);
    let row: Vec<String> = qpoints
        .iter()
        .map(|p| match &p.outcome {
            Ok(r) => match &r.status {
                Status::Converged { s, .. } => format!("E={}: {:.6}", p.energy, one_minus(*s)),
                Status::Bifurcated { period, values } => {
                    format!(
                        "E={}: period {period} {:?}",
                        p.energy,
                        values.iter().map(|s| format!("{:.6}", one_minus(*s))).collect::<Vec<_>>()
                    )
                }
                Status::MaxIterations => format!("E={}: unconverged after {}", p.energy, r.iterations()),
            },
            Err(e) => format!("E={}: {e}", p.energy),
        })
        .collect();
    rep.info(format!("2 table4 at Q={TABLE4_CONVERGED_Q} (D tensor converged): {}", row.join("; ")));
}

fn tables12(rep: &mut Report, acc: &mut Accumulated) {
    for (id, name, expected) in [("3a table1", "table1", &TABLE1_M9[..]), ("3b table2", "table2", &TABLE2_M9[..])] {
        let cfg = preset(name);
        let lambdas = [0.8, 0.9, 1.0, 1.1, 1.25];
        let sizes = [10, 15, 20, 25, 30];
        let rows = stability_scan(
            cfg.physics.n,
            cfg.physics.ell,
            &cfg.physics.potential,
            &lambdas,
            &sizes,
            cfg.numerics.quad_order,
            cfg.stability_threshold,
        )
        .expect("stability scan");
        let plateau: Vec<(f64, usize)> = rows.iter().filter(|r| r.plateau).map(|r| (r.lambda, r.size)).collect();
        let selected = plateau.iter().any(|&(l, n)| l == cfg.numerics.lambda && n == cfg.numerics.size);
        rep.info(format!(
            "{id}: {} of {} (λ, N) cells on the plateau; selected λ={}, N={} {}",
            plateau.len(),
            rows.len(),
            cfg.numerics.lambda,
            cfg.numerics.size,
            if selected { "(on plateau)" } else { "(off plateau)" }
        ));
        let points = run_preset(&cfg, acc);
        let mut worst = if selected { 0.0f64 } else { f64::INFINITY };
        let mut latest = 0usize;
        for (p, want) in points.iter().zip(expected) {
            match p.outcome.as_ref().ok().filter(|r| matches!(r.status, Status::Converged { .. })) {
                Some(r) => {
                    worst = worst.max((one_minus(r.final_s()) - want).abs());
                    latest = latest.max(stable_digits_from(&r.abs_one_minus_s()));
                }
                None => worst = f64::INFINITY,
            }
        }
        rep.holds(
            id,
            &format!("converged values within {TABLES12_TOL:.0e} and 6-digit stable by m ≤ {TABLES12_MAX_ORDER}"),
            worst <= TABLES12_TOL && latest <= TABLES12_MAX_ORDER,
            format!("max deviation {worst:.3e}, stable from m={latest}"),
        );

        let mut spread = 0.0f64;
        for (lambda, size) in [(0.9, 20), (1.1, 20), (1.0, 15), (1.0, 25)] {
            let mut c = cfg.clone();
            c.numerics.lambda = lambda;
            c.numerics.size = size;
            let pts = run_preset(&c, acc);
            for (p, want) in pts.iter().zip(expected) {
                if let Ok(r) = &p.outcome {
                    spread = spread.max((one_minus(r.final_s()) - want).abs());
                }
            }
        }
        rep.info(format!("{id}: neighbouring plateau cells (λ=0.9, 1.1; N=15, 25) deviate by up to {spread:.3e}"));
    }
}

fn argmax(points: &[ScanPoint], window: Option<(f64, f64)>) -> (f64, f64) {
    points
        .iter()
        .filter(|p| window.is_none_or(|(a, b)| p.energy >= a && p.energy <= b))
        .filter_map(|p| p.outcome.as_ref().ok().map(|r| (p.energy, one_minus(r.final_s()))))
        .fold((f64::NAN, -1.0), |best, x| if x.1 > best.1 { x } else { best })
}

fn resonances(rep: &mut Report, acc: &mut Accumulated) {
    for (id, name, (centre, width), table_window) in
        [("4a fig1", "fig1", RESONANCE_L0, (2.40, 2.60)), ("4b fig2", "fig2", RESONANCE_L1, (3.5, 4.5))]
    {
        let cfg = preset(name);
        let points = run_preset(&cfg, acc);
        let (e, v) = argmax(&points, None);
        rep.at_most(
            id,
            &format!("|argmax_E |1−S| − {centre}| over [{}, {}]", cfg.energies[0], cfg.energies[cfg.energies.len() - 1]),
            (e - centre).abs(),
            width,
        );
        let (el, vl) = argmax(&points, Some(table_window));
        rep.info(format!("{id}: global max {v:.6} at E={e:.3}; within [{}, {}] max {vl:.6} at E={el:.3}", table_window.0, table_window.1));
    }
}

fn reference_fidelity(rep: &mut Report) {
    let oscillator = preset("fig3b");
    let r = &oscillator.r_grid;
    let (lambda, size) = (oscillator.numerics.lambda, oscillator.numerics.size);
    let mut sin_worst = 0.0f64;
    let mut cos_worst = 0.0f64;
    for &(ell, e) in &REFERENCE_PAIRS {
        let c = basis_curves(Basis::Oscillator, e, lambda, ell, size, r, oscillator.summation).expect("oscillator curves");
        rep.info(format!("5 oscillator ℓ={ell} E={e}: sin {:.3e}, cos outer half {:.3e}", c.sin_deviation(), c.cos_outer_deviation()));
        sin_worst = sin_worst.max(c.sin_deviation());
        cos_worst = cos_worst.max(c.cos_outer_deviation());
    }
    rep.at_most("5a oscillator sin", "max |χ_sin − √(κr)J_ℓ(κr)| on [0, 25], four (ℓ, E) pairs, N=1000", sin_worst, SIN_TOL);
    rep.at_most("5b oscillator cos", "max |χ_cos − √(κr)Y_ℓ(κr)| on the outer half, four (ℓ, E) pairs, N=1000", cos_worst, COS_TOL);

    let laguerre = preset("fig5");
    let e = laguerre.energies[0];
    let c = basis_curves(
        Basis::Laguerre,
        e,
        laguerre.numerics.lambda,
        laguerre.physics.ell,
        laguerre.numerics.size,
        &laguerre.r_grid,
        laguerre.summation,
    )
    .expect("laguerre curves");
    rep.at_most("5c laguerre sin", "max |χ_sin − √(κr)J_1(κr)| on [0, 25], E=1, N=1000", c.sin_deviation(), SIN_TOL);
    rep.at_most("5d laguerre cos", "max |χ_cos − √(κr)Y_1(κr)| on the outer half, E=1, N=1000", c.cos_outer_deviation(), COS_TOL);
    let h = c.r.len() / 2;
    let tail: Vec<String> = [h, 3 * c.r.len() / 4, c.r.len() - 1]
        .iter()
        .map(|&i| format!("r={:.2}: {:.3e}", c.r[i], (c.chi_cos[i] - c.chi_irr[i]).abs()))
        .collect();
    rep.info(format!("5d laguerre cos deviation decays with r: {}", tail.join(", ")));
}

fn moment(m: usize, ell: usize) -> f64 {
    (1..=m).map(|i| (ell + i) as f64).product()
}

fn quadrature_exactness(rep: &mut Report) {
    let mut exact_worst = 0.0f64;
    let mut remainder_worst = 0.0f64;
    let mut fail_floor = f64::INFINITY;
    for order in 1..=10 {
        for ell in 0..=3 {
            let rule = gauss_rule(order, ell).expect("rule");
            let w = rule.weights();
            let quad = |d: usize| rule.nodes.iter().zip(&w).map(|(x, wl)| wl * x.powi(d as i32)).sum::<f64>();
            for d in 0..2 * order {
                exact_worst = exact_worst.max((quad(d) - moment(d, ell)).abs() / moment(d, ell));
            }
            let d = 2 * order;
            let err = quad(d) - moment(d, ell);
            let predicted = -(1..=order).map(|i| i as f64).product::<f64>() * moment(order, ell);
            remainder_worst = remainder_worst.max((err - predicted).abs() / predicted.abs());
            fail_floor = fail_floor.min(err.abs() / moment(d, ell));
        }
    }
    rep.at_most("6a quadrature exact", "max relative error on x^d, d ≤ 2N−1, N ≤ 10, ℓ ≤ 3", exact_worst, EXACTNESS_TOL);
    rep.at_most(
        "6b quadrature sharp",
        "relative mismatch of the degree-2N error against the Gauss remainder",
        remainder_worst,
        REMAINDER_TOL,
    );
    rep.info(format!("6b smallest relative error at degree 2N: {fail_floor:.3e}"));
}

fn c_tensor(rep: &mut Report) {
    let mut dual = 0.0f64;
    let mut sym = 0.0f64;
    for n in 1..=2 {
        for ell in 0..=2 {
            let size = 6;
            let bound = exact_quadrature_bound(n, size);
            let rule = gauss_rule(bound + 3, ell).expect("rule");
            let quad = c_tensor_quadrature(n, ell, size, &rule).expect("C by quadrature");
            let poly = c_tensor_matrix_poly(n, ell, size, &build_jacobi(bound, ell)).expect("C by matrix polynomials");
            let table = rule.laguerre_table(size);
            let w = rule.weights();
            for t in canonical_tuples(2 * n + 2, size) {
                let v = quad.get(&t).expect("entry");
                dual = dual.max((v - poly.get(&t).expect("entry")).abs() / v.abs().max(1.0));
                let rev: Vec<usize> = t.iter().rev().copied().collect();
                let rot: Vec<usize> = t[1..].iter().chain(&t[..1]).copied().collect();
                for perm in [rev, rot] {
                    let direct: f64 = (0..rule.order()).map(|l| perm.iter().fold(w[l], |acc, &k| acc * table[(k, l)])).sum();
                    sym = sym.max((direct - v).abs() / v.abs().max(1.0));
                    sym = sym.max((quad.get(&perm).expect("entry") - v).abs());
                }
            }
        }
    }
    rep.at_most("6c C dual method", "max relative quadrature vs matrix-polynomial mismatch, n ≤ 2, ℓ ≤ 2, N=6", dual, C_DUAL_TOL);
    rep.at_most("6d C symmetry", "max deviation under index permutation", sym, C_SYMMETRY_TOL);
}

fn f_weights(rep: &mut Report) {
    let mut worst = 0.0f64;
    for n in 1..=2 {
        for ell in 0..=2 {
            let rule = gauss_rule(100, ell).expect("rule");
            for i in 0..20 {
                for j in i..20 {
                    let a = f_weight_analytic(n, ell, i, j).expect("closed form");
                    worst = worst.max((a - f_weight_quadrature(n, ell, i, j, &rule)).abs());
                }
            }
        }
    }
    rep.at_most("6e F weights", "max |F analytic − F quadrature|, n ≤ 2, ℓ ≤ 2, i,j < 20, Q=100", worst, F_TOL);
}

fn free_particle(rep: &mut Report, acc: &mut Accumulated) {
    let zero = Potential::PowerExponential { strength: 0.0, power: 0.0, decay: 1.0 };
    let energies: Vec<f64> = (1..=12).map(|k| 0.5 * k as f64).collect();
    let mut worst = 0.0f64;
    for n in 1..=2 {
        for ell in 0..=2 {
            let params = PhysicsParams { n, g: 0.0, ell, potential: zero.clone() };
            let numerics = Numerics::standard();
            let pre = precompute(&params, &numerics).expect("precompute");
            let points = scan(&params, &numerics, &pre, &energies, Some(1)).expect("scan");
            acc.absorb(ell, &points);
            for p in &points {
                let r = p.outcome.as_ref().expect("free solve");
                worst = r.history.iter().fold(worst, |m, s| m.max(one_minus(*s)));
            }
        }
    }
    rep.at_most("6f free particle", "max |1−S| with V=0, g=0, n ≤ 2, ℓ ≤ 2, E ∈ [0.5, 6]", worst, FREE_TOL);
}

fn weak_coupling(rep: &mut Report) {
    let mut worst = 0.0f64;
    let mut at = (0, 0.0);
    for name in ["table1", "table2"] {
        let cfg = preset(name);
        let mut linear = cfg.physics.clone();
        linear.g = 0.0;
        let mut weak = cfg.physics.clone();
        weak.g = WEAK_G;
        let pre0 = precompute(&linear, &cfg.numerics).expect("precompute");
        let pre1 = precompute(&weak, &cfg.numerics).expect("precompute");
        for &e in &cfg.energies {
            let s0 = solve_energy(&linear, &cfg.numerics, &pre0, e).expect("linear solve").final_s();
            let s1 = solve_energy(&weak, &cfg.numerics, &pre1, e).expect("weak solve").final_s();
            let d = (s1 - s0).norm();
            if d > worst {
                worst = d;
                at = (cfg.physics.ell, e);
            }
        }
    }
    rep.at_most("6j g→0 continuity", &format!("max |S(g={WEAK_G:.0e}) − S(0)| over the table1/table2 preset energies"), worst, WEAK_TOL);
    rep.info(format!("6j largest difference at ℓ={}, E={}", at.0, at.1));
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut rep = Report::new();
    let mut acc = Accumulated::default();
    table3(&mut rep, &mut acc);
    table4(&mut rep, &mut acc);
    tables12(&mut rep, &mut acc);
    resonances(&mut rep, &mut acc);
    reference_fidelity(&mut rep);
    quadrature_exactness(&mut rep);
    c_tensor(&mut rep);
    f_weights(&mut rep);
    free_particle(&mut rep, &mut acc);
    rep.at_most("6g R self-adjoint", "max |R − R†| before symmetrization, every iteration of every run", acc.hermiticity, R_ADJOINT_TOL);
    rep.at_most("6h unimodularity", "max ||S| − 1| on every iteration of every run", acc.unimodularity, UNIMODULAR_TOL);
    rep.at_most("6i Green's triple", "max direct vs eigenvector-sum vs determinant-ratio mismatch, every run", acc.greens, GREENS_TOL);
    rep.info(format!("6i largest mismatch at ℓ={}, E={}", acc.greens_at.0, acc.greens_at.1));
    weak_coupling(&mut rep);
    rep.info(format!("{} runs, {} iterates checked, {:.1} s", acc.runs, acc.iterations, start.elapsed().as_secs_f64()));
    println!("{}", rep.summary());
    if rep.failures() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
