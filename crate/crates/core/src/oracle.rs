//! Brute-force phase-space quadrature of the measure's defining functional.
//!
//! The oracle only ever *evaluates* the Wigner field. Second derivatives come
//! from central finite differences of field values at off-grid offsets, and
//! integrals from the trapezoid rule on a uniform tensor grid. Nothing here
//! shares algebra with the closed form in [`crate::measure`], which is what
//! gives the comparison its adjudicating power.
//!
//! The functional on an `M`-mode field `W̃` (unit mass) is
//!
//! ```text
//! I = −(π^M / 2) ∫ W̃ Σ_m (∂²/∂α_m∂α_m* + 1) W̃,   ∂²/∂α∂α* = ¼(∂²_re + ∂²_im)
//! ```
//!
//! and the oracle normalizes by its own quadrature mass, not the analytic one.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::macroscopicity;
use crate::model::ModelParams;
use crate::numerics::{log_binomial, NeumaierSum};
use crate::wigner::{normalization, peak_centers, phonon_number, PhasePoint, WignerField};

/// Largest parameters for which the 4D grid stays desk-scale.
pub const FEASIBLE_MAX_N: u32 = 3;
pub const FEASIBLE_MAX_GAMMA: f64 = 3.0;
pub const FEASIBLE_MAX_NBAR: f64 = 2.0;

/// Largest fraction of the normalization mass the grid may leave outside.
pub const MAX_MISSING_MASS: f64 = 1e-8;

/// Below this magnitude a quadrature value of the measure counts as zero.
/// Sits well above the finite-difference floor of the default grid (~10⁻⁸).
pub const ZERO_TOLERANCE: f64 = 1e-6;

/// Accuracy order of the central-difference second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn order(self) -> u32 {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
        }
    }
}

impl TryFrom<u8> for FdOrder {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(FdOrder::Second),
            4 => Ok(FdOrder::Fourth),
            _ => Err(Error::domain("fd_order", format!("{v} (expected 2 or 4)"))),
        }
    }
}

impl From<FdOrder> for u8 {
    fn from(o: FdOrder) -> u8 {
        o.order() as u8
    }
}

/// How the two-mirror field is sampled on the grid.
///
/// Both kernels apply the same stencils to the same field values and differ
/// only in rounding. `Direct` evaluates the field at every node and stencil
/// point; `Separable` tabulates the Gaussian and cosine factors of each term
/// along each axis first, which is orders of magnitude faster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Direct,
    #[default]
    Separable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct QuadratureSpec {
    points_per_axis: usize,
    extent_sigma: f64,
    fd_step: f64,
    fd_order: FdOrder,
    kernel: Kernel,
}

#[derive(Deserialize)]
struct RawSpec {
    points_per_axis: usize,
    extent_sigma: f64,
    fd_step: f64,
    fd_order: FdOrder,
    #[serde(default)]
    kernel: Kernel,
}

impl TryFrom<RawSpec> for QuadratureSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        Ok(QuadratureSpec::new(r.points_per_axis, r.extent_sigma, r.fd_step, r.fd_order)?.with_kernel(r.kernel))
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            points_per_axis: 61,
            extent_sigma: 7.0,
            fd_step: 0.01,
            fd_order: FdOrder::Fourth,
            kernel: Kernel::Separable,
        }
    }
}

impl QuadratureSpec {
    pub fn new(points_per_axis: usize, extent_sigma: f64, fd_step: f64, fd_order: FdOrder) -> Result<Self> {
        if points_per_axis < 41 || points_per_axis.is_multiple_of(2) {
            return Err(Error::domain(
                "points_per_axis",
                format!("{points_per_axis} must be odd and at least 41"),
            ));
        }
        if !(extent_sigma.is_finite() && extent_sigma >= 4.0) {
            return Err(Error::domain("extent_sigma", format!("{extent_sigma} must be at least 4")));
        }
        if !(fd_step.is_finite() && fd_step > 0.0) {
            return Err(Error::domain("fd_step", format!("{fd_step} must be positive")));
        }
        Ok(Self {
            points_per_axis,
            extent_sigma,
            fd_step,
            fd_order,
            kernel: Kernel::Separable,
        })
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn extent_sigma(&self) -> f64 {
        self.extent_sigma
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn fd_order(&self) -> FdOrder {
        self.fd_order
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn with_points(&self, points_per_axis: usize) -> Result<Self> {
        Ok(Self::new(points_per_axis, self.extent_sigma, self.fd_step, self.fd_order)?.with_kernel(self.kernel))
    }

    pub fn with_fd(&self, fd_step: f64, fd_order: FdOrder) -> Result<Self> {
        Ok(Self::new(self.points_per_axis, self.extent_sigma, fd_step, fd_order)?.with_kernel(self.kernel))
    }

    pub fn with_kernel(&self, kernel: Kernel) -> Self {
        Self { kernel, ..*self }
    }
}

/// Uniform axis `lo, lo + step, …, lo + (n−1)·step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn spanning(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            lo,
            step: (hi - lo) / (n - 1) as f64,
            n,
        }
    }

    #[inline]
    fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5
        } else {
            1.0
        }
    }
}

/// Trapezoid sums of a field over a tensor grid, each already multiplied by the cell volume.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridMoments {
    /// ∫ f
    pub mass: f64,
    /// ∫ f²
    pub square: f64,
    /// ∫ f ∇²f (finite differences); zero when not requested
    pub laplacian: f64,
    /// ∫ f |z|²
    pub second_moment: f64,
}

#[derive(Default, Clone, Copy)]
struct Partial {
    mass: NeumaierSum,
    square: NeumaierSum,
    laplacian: NeumaierSum,
    second: NeumaierSum,
}

impl Partial {
    fn merge(&mut self, o: &Partial) {
        self.mass.merge(&o.mass);
        self.square.merge(&o.square);
        self.laplacian.merge(&o.laplacian);
        self.second.merge(&o.second);
    }
}

/// Central second difference of `f` at `x`, given `f(x)`.
#[inline]
fn second_difference(f: impl Fn(f64) -> f64, x: f64, center: f64, h: f64, order: FdOrder) -> f64 {
    match order {
        FdOrder::Second => (f(x + h) + f(x - h) - 2.0 * center) / (h * h),
        FdOrder::Fourth => {
            let near = f(x + h) + f(x - h);
            let far = f(x + 2.0 * h) + f(x - 2.0 * h);
            (16.0 * near - far - 30.0 * center) / (12.0 * h * h)
        }
    }
}

/// Sum of central second differences along every axis at `z`, given `f(z)`.
#[inline]
fn fd_laplacian<const D: usize, F: Fn(&[f64; D]) -> f64>(
    field: &F,
    z: &[f64; D],
    center: f64,
    h: f64,
    order: FdOrder,
) -> f64 {
    (0..D)
        .map(|axis| {
            let along = |t: f64| {
                let mut probe = *z;
                probe[axis] = t;
                field(&probe)
            };
            second_difference(along, z[axis], center, h, order)
        })
        .sum()
}

/// Trapezoid-rule moments of `field` on the tensor grid `axes`.
///
/// Work is split into slabs along the first axis; slab partial sums are
/// reduced in ascending slab order, so the result does not depend on the
/// number of worker threads.
pub fn integrate_grid<const D: usize, F>(
    field: &F,
    axes: &[Axis; D],
    fd: Option<(f64, FdOrder)>,
) -> GridMoments
where
    F: Fn(&[f64; D]) -> f64 + Sync,
{
    let slabs: Vec<Partial> = (0..axes[0].n)
        .into_par_iter()
        .map(|i0| {
            let mut part = Partial::default();
            let mut idx = [0usize; D];
            idx[0] = i0;
            let inner: usize = axes[1..].iter().map(|a| a.n).product();
            for _ in 0..inner {
                let mut z = [0.0; D];
                let mut w = 1.0;
                for k in 0..D {
                    z[k] = axes[k].node(idx[k]);
                    w *= axes[k].weight(idx[k]);
                }
                let f = field(&z);
                part.mass.add(w * f);
                part.square.add(w * f * f);
                part.second.add(w * f * z.iter().map(|c| c * c).sum::<f64>());
                if let Some((h, order)) = fd {
                    part.laplacian.add(w * f * fd_laplacian(field, &z, f, h, order));
                }
                // odometer over axes 1..D, last axis fastest
                for k in (1..D).rev() {
                    idx[k] += 1;
                    if idx[k] < axes[k].n {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            part
        })
        .collect();
    let mut total = Partial::default();
    for s in &slabs {
        total.merge(s);
    }
    let volume: f64 = axes.iter().map(|a| a.step).product();
    GridMoments {
        mass: total.mass.total() * volume,
        square: total.square.total() * volume,
        laplacian: total.laplacian.total() * volume,
        second_moment: total.second.total() * volume,
    }
}

/// Values of a one-dimensional factor at every node of `axis`, with its
/// second differences when `fd` is given.
fn tabulate(axis: &Axis, f: impl Fn(f64) -> f64, fd: Option<(f64, FdOrder)>) -> (Vec<f64>, Vec<f64>) {
    (0..axis.n)
        .map(|i| {
            let x = axis.node(i);
            let v = f(x);
            let dd = fd.map_or(0.0, |(h, order)| second_difference(&f, x, v, h, order));
            (v, dd)
        })
        .unzip()
}

/// [`integrate_grid`] for the two-mirror field, exploiting that every term is
/// `w · g(x1) g(x2) cos(k(x1 − x2)) · G₁(y1) G₂(y2)`.
///
/// With `cos(k(x1 − x2)) = cos kx1 cos kx2 + sin kx1 sin kx2`, a stencil along
/// one axis only touches that axis' factor, so the field and its
/// finite-difference Laplacian at a node reduce to short sums of products of
/// tabulated 1D factors. Axes are `[x1, y1, x2, y2]`; slabs run along `y1`.
fn integrate_separable(field: &WignerField, axes: &[Axis; 4], fd: Option<(f64, FdOrder)>) -> GridMoments {
    let beta = 2.0 / field.params().s();
    let [ax1, ay1, ax2, ay2] = axes;

    // Distinct frequencies and, per frequency, Re[e^{ik x1} e^{-ik x2}]-type
    // products on the (x1, x2) plane together with their x-Laplacians.
    let mut freqs: Vec<f64> = Vec::new();
    let terms: Vec<(f64, (f64, f64), usize)> = field
        .terms()
        .map(|(lw, c, k)| {
            let slot = freqs.iter().position(|&f| f == k).unwrap_or_else(|| {
                freqs.push(k);
                freqs.len() - 1
            });
            (lw.exp(), c, slot)
        })
        .collect();
    let plane = ax1.n * ax2.n;
    let mut p_re = vec![0.0; freqs.len() * plane];
    let mut q_re = vec![0.0; freqs.len() * plane];
    for (slot, &k) in freqs.iter().enumerate() {
        let env = |x: f64| (-beta * x * x).exp();
        let (c1, c1dd) = tabulate(ax1, |x| env(x) * (k * x).cos(), fd);
        let (s1, s1dd) = tabulate(ax1, |x| env(x) * (k * x).sin(), fd);
        let (c2, c2dd) = tabulate(ax2, |x| env(x) * (k * x).cos(), fd);
        let (s2, s2dd) = tabulate(ax2, |x| env(x) * (k * x).sin(), fd);
        for i in 0..ax1.n {
            for m in 0..ax2.n {
                let at = slot * plane + i * ax2.n + m;
                p_re[at] = c1[i] * c2[m] + s1[i] * s2[m];
                q_re[at] = c1dd[i] * c2[m] + s1dd[i] * s2[m] + c1[i] * c2dd[m] + s1[i] * s2dd[m];
            }
        }
    }
    let y_tables: Vec<[(Vec<f64>, Vec<f64>); 2]> = terms
        .iter()
        .map(|&(_, (m1, m2), _)| {
            [
                tabulate(ay1, |y| (-beta * (y - m1).powi(2)).exp(), fd),
                tabulate(ay2, |y| (-beta * (y - m2).powi(2)).exp(), fd),
            ]
        })
        .collect();
    let x_plane: Vec<(f64, f64)> = (0..plane)
        .map(|at| {
            let (i, m) = (at / ax2.n, at % ax2.n);
            let (x1, x2) = (ax1.node(i), ax2.node(m));
            (ax1.weight(i) * ax2.weight(m), x1 * x1 + x2 * x2)
        })
        .collect();

    let slabs: Vec<Partial> = (0..ay1.n)
        .into_par_iter()
        .map(|j| {
            let mut part = Partial::default();
            let mut s = vec![0.0; freqs.len()];
            let mut sy = vec![0.0; freqs.len()];
            let y1 = ay1.node(j);
            for l in 0..ay2.n {
                s.iter_mut().for_each(|v| *v = 0.0);
                sy.iter_mut().for_each(|v| *v = 0.0);
                for (&(w, _, slot), [g1, g2]) in terms.iter().zip(&y_tables) {
                    s[slot] += w * g1.0[j] * g2.0[l];
                    sy[slot] += w * (g1.1[j] * g2.0[l] + g1.0[j] * g2.1[l]);
                }
                let y2 = ay2.node(l);
                let wy = ay1.weight(j) * ay2.weight(l);
                let ysq = y1 * y1 + y2 * y2;
                let (mut mass, mut square, mut lap, mut second) = (0.0, 0.0, 0.0, 0.0);
                for (at, &(wx, xsq)) in x_plane.iter().enumerate() {
                    let mut f = 0.0;
                    let mut lf = 0.0;
                    for slot in 0..s.len() {
                        let p = p_re[slot * plane + at];
                        f += s[slot] * p;
                        lf += s[slot] * q_re[slot * plane + at] + sy[slot] * p;
                    }
                    let wf = wx * f;
                    mass += wf;
                    square += wf * f;
                    lap += wf * lf;
                    second += wf * (xsq + ysq);
                }
                part.mass.add(wy * mass);
                part.square.add(wy * square);
                part.laplacian.add(wy * lap);
                part.second.add(wy * second);
            }
            part
        })
        .collect();
    let mut total = Partial::default();
    for s in &slabs {
        total.merge(s);
    }
    let volume: f64 = axes.iter().map(|a| a.step).product();
    GridMoments {
        mass: total.mass.total() * volume,
        square: total.square.total() * volume,
        laplacian: if fd.is_some() { total.laplacian.total() * volume } else { 0.0 },
        second_moment: total.second.total() * volume,
    }
}

/// Two-sided Gaussian tail mass beyond `t` standard deviations (Mills-ratio bound).
fn gaussian_tail_bound(t: f64) -> f64 {
    2.0 * (-0.5 * t * t).exp() / (t * (2.0 * PI).sqrt())
}

pub fn check_feasible(params: &ModelParams) -> Result<()> {
    if params.n_particles() > FEASIBLE_MAX_N {
        return Err(Error::domain(
            "n_particles",
            format!("{} exceeds the quadrature limit of {FEASIBLE_MAX_N}", params.n_particles()),
        ));
    }
    if params.gamma() > FEASIBLE_MAX_GAMMA {
        return Err(Error::domain(
            "gamma",
            format!("{} exceeds the quadrature limit of {FEASIBLE_MAX_GAMMA}", params.gamma()),
        ));
    }
    if params.nbar() > FEASIBLE_MAX_NBAR {
        return Err(Error::domain(
            "nbar",
            format!("{} exceeds the quadrature limit of {FEASIBLE_MAX_NBAR}", params.nbar()),
        ));
    }
    Ok(())
}

fn check_fd_step(spec: &QuadratureSpec, axes: &[Axis]) -> Result<()> {
    let min_step = axes.iter().map(|a| a.step).fold(f64::INFINITY, f64::min);
    if spec.fd_step > min_step / 4.0 {
        return Err(Error::domain(
            "fd_step",
            format!("{} exceeds a quarter of the grid spacing {min_step:.6}", spec.fd_step),
        ));
    }
    Ok(())
}

/// Grid for the two-mirror field: position axes centred on 0, momentum
/// axes spanning every peak centre, all padded by `extent_sigma·σ` with
/// `σ = √s / 2`.
pub fn plan_grid(params: &ModelParams, spec: &QuadratureSpec) -> Result<[Axis; 4]> {
    let margin = spec.extent_sigma * params.s().sqrt() / 2.0;
    let centers = peak_centers(params);
    let (lo1, hi1) = centers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.0), hi.max(c.0)));
    let (lo2, hi2) = centers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.1), hi.max(c.1)));
    let n = spec.points_per_axis;
    let axes = [
        Axis::spanning(-margin, margin, n),
        Axis::spanning(lo1 - margin, hi1 + margin, n),
        Axis::spanning(-margin, margin, n),
        Axis::spanning(lo2 - margin, hi2 + margin, n),
    ];
    check_fd_step(spec, &axes)?;
    Ok(axes)
}

/// Everything one pass over the 4D grid yields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOutcome {
    /// ∫ wigner_raw
    pub norm: f64,
    /// Functional before the outer max; NaN when the Laplacian was skipped.
    pub measure_raw: f64,
    pub phonons: f64,
    /// Upper bound on the fraction of mass outside the grid.
    pub missing_mass_bound: f64,
}

impl QuadratureOutcome {
    pub fn measure(&self) -> f64 {
        if self.measure_raw > 0.0 {
            self.measure_raw
        } else {
            0.0
        }
    }
}

/// One grid pass over the two-mirror field. `with_laplacian = false` skips
/// the finite differences and leaves `measure_raw` as NaN.
pub fn quadrature_pass(params: &ModelParams, spec: &QuadratureSpec, with_laplacian: bool) -> Result<QuadratureOutcome> {
    check_feasible(params)?;
    let axes = plan_grid(params, spec)?;
    let field = WignerField::new(params);
    let fd = with_laplacian.then_some((spec.fd_step, spec.fd_order));
    let m = match spec.kernel {
        Kernel::Direct => {
            let eval = |z: &[f64; 4]| field.raw(&PhasePoint::new(z[0], z[1], z[2], z[3]));
            integrate_grid(&eval, &axes, fd)
        }
        Kernel::Separable => integrate_separable(&field, &axes, fd),
    };

    // |term| integrates to at most C(N,r)C(N,r′)φ/C(2N,N); the grid leaves at
    // most the Gaussian tail of each of the four axes outside.
    let n = u64::from(params.n_particles());
    let central = log_binomial(2 * n, n)?;
    let envelope: f64 = (0..=n)
        .flat_map(|r| (0..=n).map(move |q| (r, q)))
        .map(|(r, q)| {
            let a = r as f64 - q as f64;
            (log_binomial(n, r).unwrap() + log_binomial(n, q).unwrap() - central - (params.d_factor() * a).powi(2)).exp()
        })
        .sum();
    let missing_mass_bound = 4.0 * gaussian_tail_bound(spec.extent_sigma) * envelope / m.mass.abs();
    if missing_mass_bound.is_nan() || missing_mass_bound > MAX_MISSING_MASS {
        return Err(Error::Diagnostic(format!(
            "grid may miss up to {missing_mass_bound:.3e} of the mass for {params}; increase extent_sigma"
        )));
    }

    let z = m.mass;
    let measure_raw = if with_laplacian {
        -(PI * PI / 2.0) * (0.25 * m.laplacian + 2.0 * m.square) / (z * z)
    } else {
        f64::NAN
    };
    Ok(QuadratureOutcome {
        norm: z,
        measure_raw,
        phonons: m.second_moment / z - 1.0,
        missing_mass_bound,
    })
}

/// `max[0, −(π²/2) ∫ W̃ Σ_m (∂∂* + 1) W̃]` on the grid.
pub fn measure_by_quadrature(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    Ok(quadrature_pass(params, spec, true)?.measure())
}

/// `⟨|α⁽¹⁾|² + |α⁽²⁾|²⟩ − 1` on the grid.
pub fn phonons_by_quadrature(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    Ok(quadrature_pass(params, spec, false)?.phonons)
}

/// `∫ wigner_raw` on the grid.
pub fn norm_by_quadrature(params: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    Ok(quadrature_pass(params, spec, false)?.norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatCalibration {
    pub alpha: f64,
    /// Single-mode functional on the even cat, by quadrature.
    pub i_one_mode: f64,
    /// Mean excitation number from the Fock expansion.
    pub mean_excitation: f64,
    /// Quadrature mass of the cat's Wigner function.
    pub norm: f64,
}

impl CatCalibration {
    pub fn relative_gap(&self) -> f64 {
        (self.i_one_mode - self.mean_excitation).abs() / self.mean_excitation
    }
}

/// Wigner function of the normalized even cat `|α⟩ + |−α⟩` (real `α`).
pub fn even_cat_wigner(alpha: f64, x: f64, y: f64) -> f64 {
    let norm = PI * (1.0 + (-2.0 * alpha * alpha).exp());
    let left = (-2.0 * ((x - alpha).powi(2) + y * y)).exp();
    let right = (-2.0 * ((x + alpha).powi(2) + y * y)).exp();
    let fringe = 2.0 * (-2.0 * (x * x + y * y)).exp() * (4.0 * alpha * y).cos();
    (left + right + fringe) / norm
}

/// `⟨n⟩` of the even cat from its Fock weights `p_n ∝ α^{2n}/n!`, `n` even.
pub fn even_cat_mean_excitation(alpha: f64) -> f64 {
    let a4 = alpha.powi(4);
    let mut p = 1.0;
    let mut weight = NeumaierSum::new();
    let mut moment = NeumaierSum::new();
    let mut n = 0u32;
    while n < 2000 {
        weight.add(p);
        moment.add(f64::from(n) * p);
        p *= a4 / (f64::from(n + 1) * f64::from(n + 2));
        n += 2;
        if p < 1e-18 * weight.total() && f64::from(n) > alpha * alpha {
            break;
        }
    }
    moment.total() / weight.total()
}

/// Evaluates the single-mode functional `−(π/2)∫W(∂∂* + 1)W` on the even
/// cat by the same grid machinery used for the two-mirror field, and pairs it
/// with the independently computed mean excitation.
pub fn single_mode_cat_calibration(alpha: f64, spec: &QuadratureSpec) -> Result<CatCalibration> {
    if !(0.5..=3.0).contains(&alpha) {
        return Err(Error::domain("alpha", format!("{alpha} lies outside [0.5, 3]")));
    }
    let margin = spec.extent_sigma * 0.5;
    let n = spec.points_per_axis;
    let axes = [
        Axis::spanning(-alpha - margin, alpha + margin, n),
        Axis::spanning(-margin, margin, n),
    ];
    check_fd_step(spec, &axes)?;
    let field = |z: &[f64; 2]| even_cat_wigner(alpha, z[0], z[1]);
    let m = integrate_grid(&field, &axes, Some((spec.fd_step, spec.fd_order)));
    let missing = 2.0 * gaussian_tail_bound(spec.extent_sigma) * 2.0 / m.mass;
    if missing.is_nan() || missing > MAX_MISSING_MASS {
        return Err(Error::Diagnostic(format!(
            "cat grid may miss up to {missing:.3e} of the mass; increase extent_sigma"
        )));
    }
    let z = m.mass;
    let i_one_mode = -(PI / 2.0) * (0.25 * m.laplacian + m.square) / (z * z);
    Ok(CatCalibration {
        alpha,
        i_one_mode,
        mean_excitation: even_cat_mean_excitation(alpha),
        norm: z,
    })
}

/// Closed form versus quadrature at one parameter point.
///
/// `i_closed` and `i_quad` are the values before the outer `max[0, ·]`, so
/// that the ratio stays informative where thermal noise drives both negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub params: ModelParams,
    pub i_closed: f64,
    pub i_quad: f64,
    /// `i_closed / i_quad`; `None` when `|i_quad|` is below [`ZERO_TOLERANCE`].
    pub ratio: Option<f64>,
    pub nph_closed: f64,
    pub nph_quad: f64,
    pub norm_closed: f64,
    pub norm_quad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub mean_ratio: f64,
    /// Population standard deviation over mean.
    pub coefficient_of_variation: f64,
    pub determinate: usize,
    pub indeterminate: usize,
    /// Mean ratio differs from 1 by more than 10⁻³.
    pub constant_factor_flag: bool,
    /// Coefficient of variation below 10⁻⁴.
    pub ratio_is_constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    /// `None` when no row has a determinate ratio.
    pub summary: Option<RatioSummary>,
    pub quadrature: QuadratureSpec,
}

impl ConsistencyReport {
    pub fn max_norm_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.norm_quad / r.norm_closed - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_phonon_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.nph_quad - r.nph_closed).abs() / r.nph_closed.abs().max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Tolerance on the ratio spread for the closed form to count as agreeing.
pub const RATIO_CV_TOLERANCE: f64 = 1e-4;

pub fn consistency_row(params: &ModelParams, spec: &QuadratureSpec) -> Result<ConsistencyRow> {
    let q = quadrature_pass(params, spec, true)?;
    let closed = macroscopicity(params)?;
    let ratio = (q.measure_raw.abs() > ZERO_TOLERANCE).then(|| closed.raw_value / q.measure_raw);
    Ok(ConsistencyRow {
        params: *params,
        i_closed: closed.raw_value,
        i_quad: q.measure_raw,
        ratio,
        nph_closed: phonon_number(params),
        nph_quad: q.phonons,
        norm_closed: normalization(params),
        norm_quad: q.norm,
    })
}

pub fn summarize(rows: &[ConsistencyRow]) -> Option<RatioSummary> {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    if ratios.is_empty() {
        return None;
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let cv = var.sqrt() / mean.abs();
    Some(RatioSummary {
        mean_ratio: mean,
        coefficient_of_variation: cv,
        determinate: ratios.len(),
        indeterminate: rows.len() - ratios.len(),
        constant_factor_flag: (mean - 1.0).abs() > 1e-3,
        ratio_is_constant: cv < RATIO_CV_TOLERANCE,
    })
}

pub fn consistency_report(grid: &[ModelParams], spec: &QuadratureSpec) -> Result<ConsistencyReport> {
    let rows = grid
        .iter()
        .enumerate()
        .map(|(index, p)| {
            consistency_row(p, spec).map_err(|e| Error::SweepPoint {
                index,
                point: p.to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyReport {
        summary: summarize(&rows),
        rows,
        quadrature: *spec,
    })
}
