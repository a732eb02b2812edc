//! Closed-form interference measure `I(W)` of the two-mirror state.
//!
//! ```text
//! I = max{0, Σ_{r,r′,R,R′} 𝒩(r,r′,R,R′) / (8 s² [Σ_{r,r′} 𝒟(r,r′)]²)}
//! ```
//!
//! The raw numerator term carries `exp[2sγ²(r−r′)(R−R′)]`, which reaches
//! `e^5000` at `N = 5, γ = 10`. It is never formed on its own: with
//! `a = r − r′`, `b = R − R′` the two addends of 𝒩 are rewritten to carry
//! the exponents `−½sγ²(a−b)²` and `−½sγ²(a+b)²`, both nonpositive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, MAX_PARTICLES};
use crate::numerics::{binomial_exact, log_binomial, stable_weighted_exp_sum, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroResult {
    /// The bracketed ratio before clamping; negative when thermal noise dominates.
    pub raw_value: f64,
    /// `max(0, raw_value)`
    pub value: f64,
    /// `Σ 𝒩·φφ` over all index quadruples.
    pub numerator: f64,
    /// `8 s² (Σ 𝒟·φ)²`
    pub denominator: f64,
    /// Number of summands actually evaluated.
    pub n_terms: u64,
}

impl MacroResult {
    fn from_parts(numerator: f64, denominator: f64, n_terms: u64) -> Self {
        let raw_value = numerator / denominator;
        Self {
            raw_value,
            value: clamp(raw_value),
            numerator,
            denominator,
            n_terms,
        }
    }
}

fn clamp(raw: f64) -> f64 {
    if raw > 0.0 {
        raw
    } else {
        0.0
    }
}

/// One class of index quadruples sharing `a = r − r′` and `b = R − R′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPair {
    pub a: i32,
    pub b: i32,
    /// Count of `(r, r′, R, R′)` tuples in the class.
    pub multiplicity: u64,
    /// ln of the class's summed binomial prefactor `Σ C(N,r)C(N,r′)C(N,R)C(N,R′)`.
    pub log_weight: f64,
}

/// How the quadruple sum is organised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    /// `O(N²)` sum over [`DeltaPair`] classes, dominant exponents first.
    #[default]
    Grouped,
    /// Literal `O(N⁴)` loop, partitioned by `r` and reduced in ascending `r`.
    Naive,
}

/// Dephasing weight `φ(r) = exp[−(d·r)²]`.
pub fn phi(r: i64, d_factor: f64) -> f64 {
    let x = d_factor * r as f64;
    (-(x * x)).exp()
}

fn check_index(params: &ModelParams, name: &'static str, v: i64) -> Result<u32> {
    let n = i64::from(params.n_particles());
    if !(0..=n).contains(&v) {
        return Err(Error::domain(name, format!("{v} lies outside [0, {n}]")));
    }
    Ok(v as u32)
}

/// Binomial row `C(N, k)` as exact integers when available.
struct BinomialRow {
    exact: Option<Vec<u128>>,
    log: Vec<f64>,
}

impl BinomialRow {
    fn new(n: u32) -> Self {
        let n64 = u64::from(n);
        let exact = if n64 <= crate::numerics::MAX_EXACT_BINOMIAL_N {
            (0..=n64).map(|k| binomial_exact(n64, k)).collect::<Result<Vec<_>>>().ok()
        } else {
            None
        };
        let log = (0..=n64)
            .map(|k| log_binomial(n64, k).expect("k <= n"))
            .collect();
        Self { exact, log }
    }

    /// `C(N,i)·C(N,j)` rounded once; symmetric in its arguments bit for bit.
    fn pair(&self, i: u32, j: u32) -> f64 {
        match &self.exact {
            Some(row) => (row[i as usize] * row[j as usize]) as f64,
            None => (self.log[i as usize] + self.log[j as usize]).exp(),
        }
    }

    fn log_pair(&self, i: u32, j: u32) -> f64 {
        self.log[i as usize] + self.log[j as usize]
    }
}

/// `C(N,r)·C(N,r′)·exp[−sγ²(r−r′)²]·φ(r−r′)`.
pub fn d_term(params: &ModelParams, r: i64, r_prime: i64) -> Result<f64> {
    let r = check_index(params, "r", r)?;
    let r_prime = check_index(params, "r_prime", r_prime)?;
    Ok(d_term_with(&BinomialRow::new(params.n_particles()), params, r, r_prime))
}

fn d_term_with(row: &BinomialRow, params: &ModelParams, r: u32, r_prime: u32) -> f64 {
    let a = f64::from(r) - f64::from(r_prime);
    let exponent = -(params.s() * params.gamma().powi(2) + params.d_factor().powi(2)) * a * a;
    if exponent.abs() > 700.0 {
        (row.log_pair(r, r_prime) + exponent).exp()
    } else {
        row.pair(r, r_prime) * exponent.exp()
    }
}

/// The two addends of 𝒩 for a class `(a, b)` as `(coefficient, exponent)`,
/// with the dephasing weights folded into the exponents.
fn numerator_addends(params: &ModelParams, a: f64, b: f64) -> [(f64, f64); 2] {
    let s = params.s();
    let g2 = params.gamma().powi(2);
    let d2 = params.d_factor().powi(2);
    let thermal = -8.0 * params.nbar() / s;
    let dephasing = -d2 * (a * a + b * b);
    let sum2 = (a + b) * (a + b);
    let diff2 = (a - b) * (a - b);
    [
        (thermal + g2 * sum2, -0.5 * s * g2 * diff2 + dephasing),
        (thermal + g2 * diff2, -0.5 * s * g2 * sum2 + dephasing),
    ]
}

/// `𝒩(r,r′,R,R′)·φ(r−r′)·φ(R−R′)`.
pub fn n_term(params: &ModelParams, r: i64, r_prime: i64, big_r: i64, big_r_prime: i64) -> Result<f64> {
    let idx = [
        check_index(params, "r", r)?,
        check_index(params, "r_prime", r_prime)?,
        check_index(params, "R", big_r)?,
        check_index(params, "R_prime", big_r_prime)?,
    ];
    Ok(n_term_with(&BinomialRow::new(params.n_particles()), params, idx))
}

fn n_term_with(row: &BinomialRow, params: &ModelParams, [r, rp, br, brp]: [u32; 4]) -> f64 {
    let a = f64::from(r) - f64::from(rp);
    let b = f64::from(br) - f64::from(brp);
    let addends = numerator_addends(params, a, b);
    row.pair(r, rp) * row.pair(br, brp) * stable_weighted_exp_sum(&addends)
}

/// ln Σ_{r−r′=a} C(N,r)·C(N,r′) for a = −N..=N.
fn class_marginals(params: &ModelParams) -> Vec<f64> {
    let n = params.n_particles() as i32;
    let row = BinomialRow::new(params.n_particles());
    (-n..=n)
        .map(|a| {
            let terms: Vec<(f64, f64)> = (0..=n)
                .filter(|r| (0..=n).contains(&(r - a)))
                .map(|r| (1.0, row.log_pair(r as u32, (r - a) as u32)))
                .collect();
            stable_weighted_exp_sum(&terms).ln()
        })
        .collect()
}

/// The `(2N+1)²` classes of the quadruple sum.
///
/// Class weights are accumulated directly from the binomial products (they
/// coincide with `C(2N, N+a)·C(2N, N+b)` by Vandermonde's identity).
pub fn delta_pairs(params: &ModelParams) -> Vec<DeltaPair> {
    let n = params.n_particles() as i32;
    let marginal = class_marginals(params);
    let mut pairs = Vec::with_capacity(marginal.len() * marginal.len());
    for a in -n..=n {
        for b in -n..=n {
            pairs.push(DeltaPair {
                a,
                b,
                multiplicity: ((n + 1 - a.abs()) * (n + 1 - b.abs())) as u64,
                log_weight: marginal[(a + n) as usize] + marginal[(b + n) as usize],
            });
        }
    }
    pairs
}

pub fn macroscopicity(params: &ModelParams) -> Result<MacroResult> {
    macroscopicity_with(params, Summation::Grouped)
}

pub fn macroscopicity_with(params: &ModelParams, summation: Summation) -> Result<MacroResult> {
    if params.n_particles() > MAX_PARTICLES {
        return Err(Error::domain(
            "n_particles",
            format!("{} exceeds the supported maximum of {MAX_PARTICLES}", params.n_particles()),
        ));
    }
    Ok(match summation {
        Summation::Grouped => grouped(params),
        Summation::Naive => naive(params),
    })
}

fn grouped(params: &ModelParams) -> MacroResult {
    let n = params.n_particles();
    let pairs = delta_pairs(params);
    // Both sums are scaled by C(2N, N) per index pair to keep them O(1).
    let scale = log_binomial(2 * u64::from(n), u64::from(n)).expect("k <= n");

    let mut addends: Vec<(f64, f64)> = Vec::with_capacity(2 * pairs.len());
    for p in &pairs {
        for (c, e) in numerator_addends(params, f64::from(p.a), f64::from(p.b)) {
            addends.push((c, e + p.log_weight - 2.0 * scale));
        }
    }
    addends.sort_by(|x, y| y.1.total_cmp(&x.1));
    let numerator = stable_weighted_exp_sum(&addends);

    let damping = params.s() * params.gamma().powi(2) + params.d_factor().powi(2);
    let ni = n as i32;
    let mut diag: Vec<(f64, f64)> = class_marginals(params)
        .into_iter()
        .zip(-ni..=ni)
        .map(|(log_w, a)| (1.0, log_w - scale - damping * f64::from(a * a)))
        .collect();
    diag.sort_by(|x, y| y.1.total_cmp(&x.1));
    let d_sum = stable_weighted_exp_sum(&diag);

    let s = params.s();
    let raw = numerator / (8.0 * s * s * d_sum * d_sum);
    let unscale = (2.0 * scale).exp();
    MacroResult {
        raw_value: raw,
        value: clamp(raw),
        numerator: numerator * unscale,
        denominator: 8.0 * s * s * d_sum * d_sum * unscale,
        n_terms: 2 * pairs.len() as u64,
    }
}

fn naive(params: &ModelParams) -> MacroResult {
    let n = params.n_particles();
    let row = BinomialRow::new(n);
    let partials: Vec<(NeumaierSum, NeumaierSum)> = (0..=n)
        .into_par_iter()
        .map(|r| {
            let mut num = NeumaierSum::new();
            let mut den = NeumaierSum::new();
            for rp in 0..=n {
                den.add(d_term_with(&row, params, r, rp));
                for br in 0..=n {
                    for brp in 0..=n {
                        num.add(n_term_with(&row, params, [r, rp, br, brp]));
                    }
                }
            }
            (num, den)
        })
        .collect();
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (pn, pd) in &partials {
        num.merge(pn);
        den.merge(pd);
    }
    let s = params.s();
    let d = den.total();
    MacroResult::from_parts(num.total(), 8.0 * s * s * d * d, u64::from(n + 1).pow(4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;

    fn p(n: i64, g: f64, nb: f64, d: f64) -> ModelParams {
        make_params(n, g, nb, d).unwrap()
    }

    fn analytic_n1(g: f64) -> f64 {
        let g2 = g * g;
        g2 * (1.0 + (-g2 / 2.0).exp()) / (2.0 * (1.0 + (-g2).exp()).powi(2))
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(3, 0.0), 1.0);
        assert_eq!(phi(0, 7.5), 1.0);
        assert!((phi(2, 1.0) - 0.018_315_638_888_734_18).abs() < 1e-17);
        assert_eq!(phi(-2, 1.0), phi(2, 1.0));
    }

    #[test]
    fn d_term_examples() {
        let params = p(4, 0.0, 1.0, 0.0);
        for r in 0..=4 {
            for rp in 0..=4 {
                let expected = (binomial_exact(4, r).unwrap() * binomial_exact(4, rp).unwrap()) as f64;
                assert_eq!(d_term(&params, r as i64, rp as i64).unwrap(), expected);
            }
        }
        let e1 = (-1f64).exp();
        assert!((d_term(&p(1, 1.0, 0.0, 0.0), 0, 1).unwrap() - e1).abs() < 1e-16);
        let e4 = (-4f64).exp();
        assert!((d_term(&p(1, 1.0, 1.0, 1.0), 0, 1).unwrap() - e4).abs() < 1e-17);
        assert!(d_term(&p(1, 1.0, 1.0, 1.0), 0, 2).is_err());
        assert!(d_term(&p(1, 1.0, 1.0, 1.0), -1, 0).is_err());
    }

    #[test]
    fn d_term_log_branch_is_continuous() {
        // sγ²a² crosses 700 between γ = 13.2 and 13.3 for a = 2.
        let lo = d_term(&p(4, 13.22, 0.0, 0.0), 0, 2).unwrap();
        let hi = d_term(&p(4, 13.23, 0.0, 0.0), 0, 2).unwrap();
        assert!(lo > hi && hi > 0.0);
        let expected = 6.0 * (-4.0 * 13.23f64 * 13.23).exp();
        assert!(rel(hi, expected) < 1e-12);
    }

    #[test]
    fn n_term_examples() {
        for g in [0.0, 0.5, 3.0] {
            for d in [0.0, 1.0] {
                let params = p(3, g, 0.0, d);
                assert_eq!(n_term(&params, 1, 1, 2, 2).unwrap(), 0.0);
            }
        }
        let v = n_term(&p(1, 1.0, 0.0, 0.0), 0, 1, 0, 1).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
        let big = n_term(&p(1, 100.0, 0.0, 0.0), 0, 1, 1, 0).unwrap();
        assert!(big.is_finite());
        assert!((big - 40_000.0).abs() < 1e-9);
        assert!(n_term(&p(1, 1.0, 0.0, 0.0), 0, 0, 0, 2).is_err());
    }

    #[test]
    fn zero_kick_gives_zero() {
        for n in 1..=10 {
            for nb in [0.0, 1.0, 10.0] {
                for d in [0.0, 1.0] {
                    let m = macroscopicity(&p(n, 0.0, nb, d)).unwrap();
                    assert_eq!(m.value, 0.0);
                    assert!(m.raw_value <= 0.0);
                }
            }
        }
    }

    #[test]
    fn n1_analytic_curve() {
        for g in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let m = macroscopicity(&p(1, g, 0.0, 0.0)).unwrap();
            assert!(rel(m.value, analytic_n1(g)) < 1e-12, "γ={g}: {} vs {}", m.value, analytic_n1(g));
        }
        assert!((analytic_n1(1.0) - 0.429_302_460_898_614).abs() < 1e-13);
    }

    #[test]
    fn large_dephasing_kills_measure() {
        for (n, g, nb) in [(1, 1.0, 0.0), (3, 2.0, 0.5), (5, 10.0, 2.0)] {
            let m = macroscopicity(&p(n, g, nb, 40.0)).unwrap();
            assert_eq!(m.value, 0.0);
            assert!(m.raw_value <= 0.0);
        }
    }

    #[test]
    fn grouped_matches_naive() {
        for (n, g, nb, d) in [
            (1, 1.0, 0.0, 0.0),
            (2, 1.5, 0.5, 0.3),
            (3, 0.4, 0.0, 0.0),
            (4, 2.0, 1.0, 0.25),
            (5, 10.0, 0.0, 0.0),
            (6, 0.8, 0.0, 0.5),
            (8, 1.0, 2.0, 0.0),
        ] {
            let params = p(n, g, nb, d);
            let a = macroscopicity_with(&params, Summation::Grouped).unwrap();
            let b = macroscopicity_with(&params, Summation::Naive).unwrap();
            assert!(rel(a.raw_value, b.raw_value) < 1e-12, "{params}: {} vs {}", a.raw_value, b.raw_value);
            assert!(rel(a.denominator, b.denominator) < 1e-12);
            assert!(rel(a.numerator, b.numerator) < 1e-12);
        }
    }

    #[test]
    fn class_weights_follow_vandermonde() {
        let params = p(7, 1.0, 0.0, 0.0);
        for dp in delta_pairs(&params) {
            let expected = log_binomial(14, (7 + dp.a) as u64).unwrap() + log_binomial(14, (7 + dp.b) as u64).unwrap();
            assert!((dp.log_weight - expected).abs() < 1e-12);
        }
        let total: u64 = delta_pairs(&params).iter().map(|d| d.multiplicity).sum();
        assert_eq!(total, 8u64.pow(4));
    }

    #[test]
    fn n_term_index_symmetries_are_exact() {
        for (n, g, nb, d) in [(2, 1.3, 0.4, 0.2), (4, 0.7, 0.0, 0.6), (3, 2.0, 1.0, 0.0)] {
            let params = p(n, g, nb, d);
            for r in 0..=n {
                for rp in 0..=n {
                    for br in 0..=n {
                        for brp in 0..=n {
                            let v = n_term(&params, r, rp, br, brp).unwrap();
                            assert_eq!(v, n_term(&params, rp, r, brp, br).unwrap());
                            assert_eq!(v, n_term(&params, br, brp, r, rp).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn symmetry_reduced_sum_matches_loop() {
        // Sum over orbit representatives of the group generated by
        // (r,r′,R,R′) → (r′,r,R′,R) and → (R,R′,r,r′), weighted by orbit size.
        for n in 1..=4i64 {
            let params = p(n, 1.1, 0.3, 0.15);
            let mut seen = std::collections::HashSet::new();
            let mut reduced = NeumaierSum::new();
            for r in 0..=n {
                for rp in 0..=n {
                    for br in 0..=n {
                        for brp in 0..=n {
                            let orbit = [[r, rp, br, brp], [rp, r, brp, br], [br, brp, r, rp], [brp, br, rp, r]];
                            let canon = *orbit.iter().min().unwrap();
                            if seen.insert(canon) {
                                let size = orbit.iter().collect::<std::collections::HashSet<_>>().len();
                                let [a, b, c, e] = canon;
                                reduced.add(size as f64 * n_term(&params, a, b, c, e).unwrap());
                            }
                        }
                    }
                }
            }
            let full = macroscopicity_with(&params, Summation::Naive).unwrap().numerator;
            assert!(rel(reduced.total(), full) < 1e-13, "N={n}");
        }
    }

    #[test]
    fn stress_points_stay_finite() {
        for params in [p(10, 10.0, 10.0, 0.0), p(60, 10.0, 0.0, 0.0), p(60, 0.01, 3.0, 0.1), p(5, 300.0, 50.0, 0.0)] {
            let m = macroscopicity(&params).unwrap();
            for v in [m.raw_value, m.value, m.numerator, m.denominator] {
                assert!(v.is_finite(), "{params}: {m:?}");
            }
            assert!(m.value >= 0.0 && m.denominator > 0.0);
        }
    }

    #[test]
    fn rejects_too_many_particles() {
        assert!(matches!(
            macroscopicity(&p(61, 1.0, 0.0, 0.0)),
            Err(Error::Domain { field: "n_particles", .. })
        ));
    }

    #[test]
    fn value_is_clamped_raw() {
        let m = macroscopicity(&p(2, 0.3, 2.0, 0.0)).unwrap();
        assert!(m.raw_value < 0.0);
        assert_eq!(m.value, 0.0);
        let q = macroscopicity(&p(2, 2.0, 0.0, 0.0)).unwrap();
        assert_eq!(q.value, q.raw_value);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn finite_and_nonnegative(n in 1i64..=20, g in 0.0f64..50.0, nb in 0.0f64..50.0, d in 0.0f64..5.0) {
                let m = macroscopicity(&p(n, g, nb, d)).unwrap();
                prop_assert!(m.value.is_finite() && m.raw_value.is_finite());
                prop_assert!(m.value >= 0.0);
                prop_assert!(m.denominator > 0.0);
                prop_assert_eq!(m.value, m.raw_value.max(0.0));
            }
        }
    }
}
