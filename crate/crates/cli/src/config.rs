//! Run configuration: a TOML document with fixed field names.

use std::ops::Range;

use nljm::hamiltonian::{Potential, Segment};
use nljm::linearize::exact_quadrature_bound;
use nljm::reference::Summation;
use nljm::solver::{Numerics, PhysicsParams};
use serde::Deserialize;
use toml::Spanned;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    nonlinearity_n: Spanned<i64>,
    coupling_g: Spanned<f64>,
    ell: Spanned<i64>,
    potential: Spanned<RawPotential>,
    lambda: Spanned<f64>,
    #[serde(rename = "basis_size_N")]
    basis_size_n: Spanned<i64>,
    quadrature_order: Spanned<i64>,
    energy_grid: Spanned<RawGrid>,
    tolerance: Spanned<f64>,
    bifurcation_tolerance: Spanned<f64>,
    max_iterations: Spanned<i64>,
    #[serde(default)]
    basis_check: Option<Spanned<BasisChoice>>,
    #[serde(default)]
    summation: Option<SummationChoice>,
    #[serde(default)]
    override_quadrature_bound: bool,
    #[serde(default)]
    r_grid: Option<Spanned<RawGrid>>,
    #[serde(default)]
    stability: Option<Spanned<RawStability>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawPotential {
    PowerExponential { strength: f64, power: f64, decay: f64 },
    PiecewiseLinear { segments: Vec<RawSegment> },
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    start: f64,
    end: f64,
    intercept: f64,
    slope: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    Range(RangeGrid),
    Values(ValueGrid),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeGrid {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueGrid {
    values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStability {
    #[serde(default)]
    lambda_grid: Vec<f64>,
    #[serde(default)]
    n_grid: Vec<i64>,
    #[serde(default)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    Oscillator,
    Laguerre,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummationChoice {
    Partial,
    Tapered,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub physics: PhysicsParams,
    pub numerics: Numerics,
    pub energies: Vec<f64>,
    pub basis_check: BasisChoice,
    pub summation: Summation,
    pub r_grid: Vec<f64>,
    pub stability_lambdas: Vec<f64>,
    pub stability_sizes: Vec<usize>,
    pub stability_threshold: f64,
}

pub const DEFAULT_R_GRID: (f64, f64, f64) = (0.0, 25.0, 0.05);
pub const DEFAULT_STABILITY_THRESHOLD: f64 = 1e-3;

fn line_of(src: &str, span: Range<usize>) -> usize {
    src[..span.start.min(src.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    src: &'a str,
    origin: &'a str,
}

impl Ctx<'_> {
    fn err<T>(&self, span: Range<usize>, msg: impl std::fmt::Display) -> Result<T, CliError> {
        Err(CliError::Config(format!("{}:{}: {msg}", self.origin, line_of(self.src, span))))
    }

    fn positive(&self, v: &Spanned<f64>, name: &str) -> Result<f64, CliError> {
        let x = *v.get_ref();
        if !(x.is_finite() && x > 0.0) {
            return self.err(v.span(), format!("{name} must be a positive finite number, got {x}"));
        }
        Ok(x)
    }

    fn count(&self, v: &Spanned<i64>, name: &str, min: i64) -> Result<usize, CliError> {
        let x = *v.get_ref();
        if x < min {
            return self.err(v.span(), format!("{name} must be at least {min}, got {x}"));
        }
        Ok(x as usize)
    }

    fn grid(&self, g: &Spanned<RawGrid>, name: &str, allow_zero: bool) -> Result<Vec<f64>, CliError> {
        let values = match g.get_ref() {
            RawGrid::Values(v) => v.values.clone(),
            RawGrid::Range(r) => {
                if !(r.step > 0.0 && r.step.is_finite()) || !r.start.is_finite() || !r.stop.is_finite() {
                    return self.err(g.span(), format!("{name}: step must be positive and bounds finite"));
                }
                if r.stop < r.start {
                    return self.err(g.span(), format!("{name}: stop {} is below start {}", r.stop, r.start));
                }
                let count = ((r.stop - r.start) / r.step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| r.start + i as f64 * r.step).collect()
            }
        };
        if values.is_empty() {
            return self.err(g.span(), format!("{name} is empty"));
        }
        if let Some(bad) = values.iter().find(|&&x| !x.is_finite() || x < 0.0 || (!allow_zero && x == 0.0)) {
            let req = if allow_zero { "nonnegative" } else { "positive" };
            return self.err(g.span(), format!("{name}: every value must be {req}, got {bad}"));
        }
        Ok(values)
    }
}

impl RunConfig {
    /// Parses and validates a TOML document. `origin` prefixes error
    /// locations (a path or preset name).
    pub fn parse(src: &str, origin: &str, override_flag: bool) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| format!("{}:", line_of(src, s))).unwrap_or_default();
            CliError::Config(format!("{origin}:{line} {}", e.message()))
        })?;
        let cx = Ctx { src, origin };
        let n = cx.count(&raw.nonlinearity_n, "nonlinearity_n", 1)?;
        let g = *raw.coupling_g.get_ref();
        if !g.is_finite() {
            return cx.err(raw.coupling_g.span(), "coupling_g must be finite");
        }
        let ell = cx.count(&raw.ell, "ell", 0)?;
        let lambda = cx.positive(&raw.lambda, "lambda")?;
        let size = cx.count(&raw.basis_size_n, "basis_size_N", 2)?;
        let quad_order = cx.count(&raw.quadrature_order, "quadrature_order", 1)?;
        let override_bound = override_flag || raw.override_quadrature_bound;
        let required = exact_quadrature_bound(n, size);
        if quad_order < required && !override_bound {
            return cx.err(
                raw.quadrature_order.span(),
                format!("quadrature_order {quad_order} is below (n+1)N−n = {required}; set override_quadrature_bound or pass --override-quadrature-bound"),
            );
        }
        if quad_order < size {
            return cx.err(raw.quadrature_order.span(), format!("quadrature_order {quad_order} is below basis_size_N {size}"));
        }
        let tolerance = cx.positive(&raw.tolerance, "tolerance")?;
        let bifurcation_tolerance = cx.positive(&raw.bifurcation_tolerance, "bifurcation_tolerance")?;
        let max_iterations = cx.count(&raw.max_iterations, "max_iterations", 0)?;
        let potential = match raw.potential.get_ref().clone() {
            RawPotential::PowerExponential { strength, power, decay } => Potential::PowerExponential { strength, power, decay },
            RawPotential::PiecewiseLinear { segments } => Potential::PiecewiseLinear {
                segments: segments
                    .into_iter()
                    .map(|s| Segment { start: s.start, end: s.end, intercept: s.intercept, slope: s.slope })
                    .collect(),
            },
            RawPotential::Tabulated { r, v } => Potential::Tabulated { r, v },
        };
        if let Err(e) = potential.validate() {
            return cx.err(raw.potential.span(), e);
        }
        let energies = cx.grid(&raw.energy_grid, "energy_grid", false)?;
        let r_grid = match &raw.r_grid {
            Some(g) => cx.grid(g, "r_grid", true)?,
            None => {
                let (a, b, h) = DEFAULT_R_GRID;
                let count = ((b - a) / h + 1e-9).floor() as usize + 1;
                (0..count).map(|i| a + i as f64 * h).collect()
            }
        };
        let (stability_lambdas, stability_sizes, stability_threshold) = match &raw.stability {
            Some(s) => {
                let st = s.get_ref();
                if st.lambda_grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return cx.err(s.span(), "stability.lambda_grid values must be positive");
                }
                if st.n_grid.iter().any(|&x| x < 2) {
                    return cx.err(s.span(), "stability.n_grid values must be at least 2");
                }
                let threshold = st.threshold.unwrap_or(DEFAULT_STABILITY_THRESHOLD);
                if !(threshold > 0.0) {
                    return cx.err(s.span(), "stability.threshold must be positive");
                }
                (st.lambda_grid.clone(), st.n_grid.iter().map(|&x| x as usize).collect(), threshold)
            }
            None => (vec![lambda], vec![size], DEFAULT_STABILITY_THRESHOLD),
        };
        Ok(RunConfig {
            physics: PhysicsParams { n, g, ell, potential },
            numerics: Numerics {
                lambda,
                size,
                quad_order,
                tolerance,
                bifurcation_tolerance,
                max_iterations,
                override_quadrature_bound: override_bound,
            },
            energies,
            basis_check: raw.basis_check.map_or(BasisChoice::Oscillator, |b| *b.get_ref()),
            summation: match raw.summation.unwrap_or(SummationChoice::Tapered) {
                SummationChoice::Partial => Summation::Partial,
                SummationChoice::Tapered => Summation::Tapered,
            },
            r_grid,
            stability_lambdas,
            stability_sizes,
            stability_threshold,
        })
    }
}
