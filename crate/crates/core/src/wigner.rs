//! The two-mirror Wigner function: a double sum over `(r, r′) ∈ [0, N]²` of
//! Gaussians centred on the momentum quadratures, modulated by a cosine in
//! `α⁽¹⁾_r − α⁽²⁾_r`, with the dephasing weight `φ(r − r′)` applied per term.
//!
//! The printed field integrates to `Z = Σ C(N,r)C(N,r′)φ(r−r′)e^{−sγ²(r−r′)²} / C(2N,N)`
//! rather than 1; [`wigner_normalized`] divides it out.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::numerics::{log_binomial, stable_weighted_exp_sum};

/// One point `(α⁽¹⁾, α⁽²⁾)` of the four-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub a1_re: f64,
    pub a1_im: f64,
    pub a2_re: f64,
    pub a2_im: f64,
}

impl PhasePoint {
    pub fn new(a1_re: f64, a1_im: f64, a2_re: f64, a2_im: f64) -> Self {
        Self {
            a1_re,
            a1_im,
            a2_re,
            a2_im,
        }
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a1_re, self.a1_im, self.a2_re, self.a2_im]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

/// Summation indices of one Gaussian term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermIndex {
    pub r: u32,
    pub r_prime: u32,
}

impl TermIndex {
    /// `r − r′`
    pub fn delta(&self) -> i64 {
        i64::from(self.r) - i64::from(self.r_prime)
    }

    /// Peak centre `(γ(2N − r − r′)/2, γ(r + r′)/2)` on the two momentum quadratures.
    pub fn center(&self, n_particles: u32, gamma: f64) -> (f64, f64) {
        let sum = f64::from(self.r) + f64::from(self.r_prime);
        (
            0.5 * gamma * (2.0 * f64::from(n_particles) - sum),
            0.5 * gamma * sum,
        )
    }
}

const COSINE_TABLE: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Term {
    /// ln C(N,r) + ln C(N,r′) − (d(r−r′))² + ln prefactor
    log_weight: f64,
    center1: f64,
    center2: f64,
    /// index into the per-|r−r′| cosine table
    abs_delta: usize,
}

/// Precomputed term table for repeated evaluation of the field.
///
/// Building one is `O(N²)`; each evaluation then costs one exponential per
/// term and one cosine per distinct `|r − r′|`.
#[derive(Debug, Clone)]
pub struct WignerField {
    params: ModelParams,
    terms: Vec<Term>,
    /// cosine frequency per |r − r′|: 2γ|r − r′|
    frequencies: Vec<f64>,
    inv_z: f64,
}

impl WignerField {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.n_particles();
        let s = params.s();
        let gamma = params.gamma();
        let d = params.d_factor();
        let log_prefactor = (4.0 / (PI * PI * s * s)).ln() - ln_central(n);
        let log_c: Vec<f64> = (0..=n)
            .map(|k| log_binomial(u64::from(n), u64::from(k)).expect("k <= n"))
            .collect();
        let mut terms = Vec::with_capacity(((n + 1) * (n + 1)) as usize);
        for r in 0..=n {
            for r_prime in 0..=n {
                let idx = TermIndex { r, r_prime };
                let delta = idx.delta() as f64;
                let (center1, center2) = idx.center(n, gamma);
                terms.push(Term {
                    log_weight: log_c[r as usize] + log_c[r_prime as usize] - (d * delta).powi(2)
                        + log_prefactor,
                    center1,
                    center2,
                    abs_delta: idx.delta().unsigned_abs() as usize,
                });
            }
        }
        let frequencies = (0..=n).map(|a| 2.0 * gamma * f64::from(a)).collect();
        Self {
            params: *params,
            terms,
            frequencies,
            inv_z: 1.0 / normalization(params),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Per-term `(ln weight, peak centre, cosine frequency)`; term `t` of the
    /// raw field is `weight · exp(−(2/s)[x1² + x2² + (y1−c1)² + (y2−c2)²]) · cos(k(x1 − x2))`.
    pub fn terms(&self) -> impl Iterator<Item = (f64, (f64, f64), f64)> + '_ {
        self.terms
            .iter()
            .map(|t| (t.log_weight, (t.center1, t.center2), self.frequencies[t.abs_delta]))
    }

    /// The field exactly as printed (not unit-normalized).
    #[inline]
    pub fn raw(&self, p: &PhasePoint) -> f64 {
        let beta = 2.0 / self.params.s();
        let dx = p.a1_re - p.a2_re;
        let shared = p.a1_re * p.a1_re + p.a2_re * p.a2_re;
        let gaussian = |t: &Term| {
            let y1 = p.a1_im - t.center1;
            let y2 = p.a2_im - t.center2;
            (t.log_weight - beta * (shared + y1 * y1 + y2 * y2)).exp()
        };
        if self.frequencies.len() > COSINE_TABLE {
            return self
                .terms
                .iter()
                .map(|t| gaussian(t) * (self.frequencies[t.abs_delta] * dx).cos())
                .sum();
        }
        let mut cosines = [0.0f64; COSINE_TABLE];
        for (c, &k) in cosines.iter_mut().zip(&self.frequencies) {
            *c = (k * dx).cos();
        }
        self.terms
            .iter()
            .map(|t| gaussian(t) * cosines[t.abs_delta])
            .sum()
    }

    /// The field divided by its analytic integral.
    #[inline]
    pub fn normalized(&self, p: &PhasePoint) -> f64 {
        self.raw(p) * self.inv_z
    }
}

/// ln C(2N, N)
fn ln_central(n: u32) -> f64 {
    log_binomial(2 * u64::from(n), u64::from(n)).expect("k <= n")
}

/// Per-term Gaussian integral in log form, together with the term index.
fn integrated_terms(params: &ModelParams) -> impl Iterator<Item = (TermIndex, f64)> + '_ {
    let n = params.n_particles();
    let lc: Vec<f64> = (0..=n)
        .map(|k| log_binomial(u64::from(n), u64::from(k)).expect("k <= n"))
        .collect();
    let damping = params.s() * params.gamma().powi(2) + params.d_factor().powi(2);
    let central = ln_central(n);
    (0..=n).flat_map(move |r| {
        let lc = lc.clone();
        (0..=n).map(move |r_prime| {
            let idx = TermIndex { r, r_prime };
            let a = idx.delta() as f64;
            (idx, lc[r as usize] + lc[r_prime as usize] - damping * a * a - central)
        })
    })
}

/// Evaluates the printed two-mirror field at a point, with dephasing.
pub fn wigner_raw(params: &ModelParams, point: &PhasePoint) -> f64 {
    WignerField::new(params).raw(point)
}

/// `∫ wigner_raw d⁴α`, obtained term by term by Gaussian integration.
pub fn normalization(params: &ModelParams) -> f64 {
    let terms: Vec<(f64, f64)> = integrated_terms(params).map(|(_, e)| (1.0, e)).collect();
    stable_weighted_exp_sum(&terms)
}

pub fn wigner_normalized(params: &ModelParams, point: &PhasePoint) -> f64 {
    WignerField::new(params).normalized(point)
}

/// Mean phonon number `⟨|α⁽¹⁾|² + |α⁽²⁾|²⟩ − 1` of the normalized field.
///
/// Each term is a Gaussian of variance `s/4` per quadrature. Its momentum
/// quadratures contribute `s/4 + c²` each. The cosine `cos k(x₁ − x₂)` with
/// `k = 2γa` damps the term's integral by `e^{−sγ²a²}` and shifts each
/// position second moment to `s/4 − k²s²/16`. Summed:
/// `s + c₁² + c₂² − s²γ²a²/2` per unit of term weight.
pub fn phonon_number(params: &ModelParams) -> f64 {
    let s = params.s();
    let gamma = params.gamma();
    let n = params.n_particles();
    let mut weights = Vec::new();
    let mut moments = Vec::new();
    for (idx, log_w) in integrated_terms(params) {
        let (c1, c2) = idx.center(n, gamma);
        let a = idx.delta() as f64;
        let second = s + c1 * c1 + c2 * c2 - 0.5 * s * s * gamma * gamma * a * a;
        weights.push((1.0, log_w));
        moments.push((second, log_w));
    }
    let value = stable_weighted_exp_sum(&moments) / stable_weighted_exp_sum(&weights) - 1.0;
    // Exact zero at the vacuum; guards against -1e-16 from rounding.
    value.max(0.0)
}

/// All `(N+1)²` peak centres, in `(r, r′)` row-major order.
pub fn peak_centers(params: &ModelParams) -> Vec<(f64, f64)> {
    let n = params.n_particles();
    (0..=n)
        .flat_map(|r| (0..=n).map(move |r_prime| TermIndex { r, r_prime }))
        .map(|idx| idx.center(n, params.gamma()))
        .collect()
}
