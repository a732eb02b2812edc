//! Cartesian parameter sweeps and the preset datasets behind the figures.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emit::Format;
use crate::error::{Error, Result};
use crate::measure::macroscopicity;
use crate::model::{make_params, thermal_occupation_from_ratio, ModelParams, MAX_PARTICLES};
use crate::oracle::{check_feasible, quadrature_pass, QuadratureSpec};
use crate::wigner::{normalization, phonon_number};

/// Note attached to every emitted dataset describing how dephasing enters the state.
pub const DEPHASING_CONVENTION: &str = "dephasing phi(r-r') = exp[-(d (r-r'))^2] weights every (r,r') term of the \
     two-mirror Wigner function; normalization, phonon number and both evaluations of the measure use the \
     dephased state";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    NParticles,
    Gamma,
    Nbar,
    /// `ħω_m/(k_B T)`, converted to `n̄` through the Bose–Einstein occupation.
    TemperatureRatio,
    DFactor,
}

impl ParamName {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::NParticles => "n_particles",
            ParamName::Gamma => "gamma",
            ParamName::Nbar => "nbar",
            ParamName::TemperatureRatio => "temperature_ratio",
            ParamName::DFactor => "d_factor",
        }
    }

    /// The model slot this name fills; `nbar` and `temperature_ratio` share one.
    fn slot(self) -> ParamName {
        match self {
            ParamName::TemperatureRatio => ParamName::Nbar,
            other => other,
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n_particles" => ParamName::NParticles,
            "gamma" => ParamName::Gamma,
            "nbar" => ParamName::Nbar,
            "temperature_ratio" => ParamName::TemperatureRatio,
            "d_factor" => ParamName::DFactor,
            _ => return Err(Error::Parse(format!("unknown parameter `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: ParamName,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(name: ParamName, values: impl Into<Vec<f64>>) -> Self {
        Self {
            name,
            values: values.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ClosedForm,
    Quadrature,
    Both,
}

/// Which state the `n_ph` column describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhononReference {
    /// The swept (possibly dephased) state.
    #[default]
    State,
    /// The same point with `d = 0`.
    DecoherenceFree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub fixed: BTreeMap<ParamName, f64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub phonon_reference: PhononReference,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    /// Free-form provenance notes copied into emitted metadata.
    #[serde(default)]
    pub notes: Vec<String>,
}

/// One record of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub row_index: usize,
    pub n_particles: u32,
    pub gamma: f64,
    pub nbar: f64,
    pub d_factor: f64,
    pub i_raw: f64,
    pub i_value: f64,
    pub n_ph: f64,
    pub z_norm: f64,
    pub method: String,
}

impl SweepRow {
    pub fn param(&self, name: ParamName) -> f64 {
        match name.slot() {
            ParamName::NParticles => f64::from(self.n_particles),
            ParamName::Gamma => self.gamma,
            ParamName::DFactor => self.d_factor,
            _ => self.nbar,
        }
    }
}

fn check_value(name: ParamName, v: f64) -> Result<()> {
    let bad = |reason: &str| Err(Error::domain(name.as_str(), format!("{v} {reason}")));
    if !v.is_finite() {
        return bad("is not finite");
    }
    match name {
        ParamName::NParticles if v.fract() != 0.0 || v < 1.0 => bad("is not a positive integer"),
        ParamName::NParticles if v > f64::from(MAX_PARTICLES) => bad(&format!("exceeds {MAX_PARTICLES}")),
        ParamName::TemperatureRatio if v <= 0.0 => bad("must be positive"),
        _ if v < 0.0 => bad("is negative"),
        _ => Ok(()),
    }
}

impl SweepSpec {
    pub fn new(axes: Vec<SweepAxis>, fixed: impl IntoIterator<Item = (ParamName, f64)>) -> Self {
        Self {
            axes,
            fixed: fixed.into_iter().collect(),
            method: Method::ClosedForm,
            quadrature: None,
            phonon_reference: PhononReference::State,
            output: None,
            notes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeMap<ParamName, ParamName> = BTreeMap::new();
        let names = self
            .axes
            .iter()
            .map(|a| a.name)
            .chain(self.fixed.keys().copied());
        for name in names {
            if let Some(prev) = seen.insert(name.slot(), name) {
                return Err(Error::Domain {
                    field: name.as_str(),
                    reason: format!("given more than once (also as {prev})"),
                });
            }
        }
        for slot in [ParamName::NParticles, ParamName::Gamma, ParamName::Nbar, ParamName::DFactor] {
            if !seen.contains_key(&slot) {
                let what = if slot == ParamName::Nbar { "nbar or temperature_ratio" } else { slot.as_str() };
                return Err(Error::Domain {
                    field: slot.as_str(),
                    reason: format!("missing: {what} must appear in axes or fixed"),
                });
            }
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(Error::Domain {
                    field: axis.name.as_str(),
                    reason: "axis has no values".into(),
                });
            }
            for &v in &axis.values {
                check_value(axis.name, v)?;
            }
        }
        for (&name, &v) in &self.fixed {
            check_value(name, v)?;
        }
        if self.method != Method::ClosedForm {
            for p in self.points()? {
                check_feasible(&p)?;
            }
        }
        Ok(())
    }

    /// The Cartesian product of the axes, first axis slowest.
    pub fn points(&self) -> Result<Vec<ModelParams>> {
        let total: usize = self.axes.iter().map(|a| a.values.len()).product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.axes.len()];
        for _ in 0..total {
            let mut values = self.fixed.clone();
            for (axis, &i) in self.axes.iter().zip(&idx) {
                values.insert(axis.name, axis.values[i]);
            }
            out.push(resolve(&values)?);
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < self.axes[k].values.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(out)
    }

    fn quadrature_spec(&self) -> QuadratureSpec {
        self.quadrature.unwrap_or_default()
    }
}

fn resolve(values: &BTreeMap<ParamName, f64>) -> Result<ModelParams> {
    let get = |n| values.get(&n).copied();
    let nbar = match (get(ParamName::Nbar), get(ParamName::TemperatureRatio)) {
        (Some(nb), _) => nb,
        (None, Some(x)) => thermal_occupation_from_ratio(x),
        (None, None) => 0.0,
    };
    make_params(
        get(ParamName::NParticles).unwrap_or(1.0) as i64,
        get(ParamName::Gamma).unwrap_or(0.0),
        nbar,
        get(ParamName::DFactor).unwrap_or(0.0),
    )
}

fn evaluate(params: &ModelParams, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let phonon_params = match spec.phonon_reference {
        PhononReference::State => *params,
        PhononReference::DecoherenceFree => params.with_d_factor(0.0)?,
    };
    let row = |i_raw: f64, i_value: f64, n_ph: f64, z_norm: f64, method: &str| SweepRow {
        row_index: 0,
        n_particles: params.n_particles(),
        gamma: params.gamma(),
        nbar: params.nbar(),
        d_factor: params.d_factor(),
        i_raw,
        i_value,
        n_ph,
        z_norm,
        method: method.to_string(),
    };
    let mut rows = Vec::with_capacity(2);
    if matches!(spec.method, Method::ClosedForm | Method::Both) {
        let m = macroscopicity(params)?;
        rows.push(row(m.raw_value, m.value, phonon_number(&phonon_params), normalization(params), "closed_form"));
    }
    if matches!(spec.method, Method::Quadrature | Method::Both) {
        let q_spec = spec.quadrature_spec();
        let q = quadrature_pass(params, &q_spec, true)?;
        let n_ph = if spec.phonon_reference == PhononReference::DecoherenceFree && params.d_factor() != 0.0 {
            quadrature_pass(&phonon_params, &q_spec, false)?.phonons
        } else {
            q.phonons
        };
        rows.push(row(q.measure_raw, q.measure(), n_ph, q.norm, "quadrature"));
    }
    Ok(rows)
}

/// Evaluates every point of the sweep; rows come back in axis order with
/// consecutive `row_index` however the points were scheduled.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points()?;
    let per_point: Vec<Result<Vec<SweepRow>>> = points
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            evaluate(p, spec).map_err(|e| Error::SweepPoint {
                index,
                point: p.to_string(),
                source: Box::new(e),
            })
        })
        .collect();
    let mut rows = Vec::new();
    for chunk in per_point {
        rows.extend(chunk?);
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r.row_index = i;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(FigureId::Fig2),
            "fig3" => Ok(FigureId::Fig3),
            "fig4" => Ok(FigureId::Fig4),
            "fig5" => Ok(FigureId::Fig5),
            other => Err(Error::UnknownFigure(other.to_string())),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
        })
    }
}

/// Particle numbers used by the N sweeps.
pub const FIGURE_N_RANGE: std::ops::RangeInclusive<u32> = 1..=8;
/// Bath occupations of the temperature sweep.
pub const FIGURE_NBAR_GRID: [f64; 11] = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0];

/// `0, 0.05, …, 1.5`, each value the correctly rounded decimal.
pub fn figure_d_grid() -> Vec<f64> {
    (0..=30).map(|i| f64::from(i) / 20.0).collect()
}

fn n_axis() -> SweepAxis {
    SweepAxis::new(ParamName::NParticles, FIGURE_N_RANGE.map(f64::from).collect::<Vec<_>>())
}

/// The preset sweep behind each figure. The first axis is the plotted
/// abscissa; the second enumerates the curves.
pub fn figure_spec(fig: FigureId) -> SweepSpec {
    let mut spec = match fig {
        FigureId::Fig2 => SweepSpec::new(
            vec![n_axis(), SweepAxis::new(ParamName::Nbar, [0.0, 10.0])],
            [(ParamName::Gamma, 10.0), (ParamName::DFactor, 0.0)],
        ),
        FigureId::Fig3 => SweepSpec::new(
            vec![n_axis(), SweepAxis::new(ParamName::Gamma, [1.0, 10.0])],
            [(ParamName::Nbar, 0.0), (ParamName::DFactor, 0.0)],
        ),
        FigureId::Fig4 => SweepSpec::new(
            vec![
                SweepAxis::new(ParamName::Nbar, FIGURE_NBAR_GRID),
                SweepAxis::new(ParamName::Gamma, [1.0, 10.0]),
            ],
            [(ParamName::NParticles, 5.0), (ParamName::DFactor, 0.0)],
        ),
        FigureId::Fig5 => {
            let mut s = SweepSpec::new(
                vec![
                    SweepAxis::new(ParamName::DFactor, figure_d_grid()),
                    SweepAxis::new(ParamName::Gamma, [1.0, 2.0, 10.0]),
                ],
                [(ParamName::NParticles, 5.0), (ParamName::Nbar, 0.0)],
            );
            s.phonon_reference = PhononReference::DecoherenceFree;
            s
        }
    };
    spec.notes.push(format!(
        "{fig}: axis ranges and point densities are chosen to bracket the plotted trends; \
         they are not a point-for-point reproduction of the original figure"
    ));
    if fig == FigureId::Fig5 {
        spec.notes.push("n_ph is evaluated at d = 0 for every row".into());
    }
    spec
}

pub fn figure_dataset(fig: FigureId) -> Result<Vec<SweepRow>> {
    run_sweep(&figure_spec(fig))
}

pub fn figure_dataset_by_name(name: &str) -> Result<Vec<SweepRow>> {
    figure_dataset(name.parse()?)
}
