//! Physical configuration of the two-mirror interface and the thermal
//! occupation of the mechanical baths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const K_B: f64 = 1.380_649e-23;

/// Largest particle number accepted by the closed-form measure.
pub const MAX_PARTICLES: u32 = 60;

/// Particle number `N`, kick strength `γ`, bath occupation `n̄` and dephasing
/// factor `d`, with the variance scale `s = 2n̄ + 1` cached.
///
/// Fields are private so that every value in circulation has been validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    n_particles: u32,
    gamma: f64,
    nbar: f64,
    d_factor: f64,
    s: f64,
}

#[derive(Deserialize)]
struct RawParams {
    n_particles: i64,
    gamma: f64,
    nbar: f64,
    #[serde(default)]
    d_factor: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        make_params(raw.n_particles, raw.gamma, raw.nbar, raw.d_factor)
    }
}

fn check_nonneg(field: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::domain(field, format!("{value} is not finite")));
    }
    if value < 0.0 {
        return Err(Error::domain(field, format!("{value} is negative")));
    }
    // -0.0 would otherwise leak into formatted output.
    Ok(value + 0.0)
}

/// Validates the four model parameters and caches `s = 2n̄ + 1`.
pub fn make_params(n_particles: i64, gamma: f64, nbar: f64, d_factor: f64) -> Result<ModelParams> {
    if n_particles < 1 {
        return Err(Error::domain(
            "n_particles",
            format!("{n_particles} is below the minimum of 1"),
        ));
    }
    let n_particles = u32::try_from(n_particles)
        .map_err(|_| Error::domain("n_particles", format!("{n_particles} is too large")))?;
    let gamma = check_nonneg("gamma", gamma)?;
    let nbar = check_nonneg("nbar", nbar)?;
    let d_factor = check_nonneg("d_factor", d_factor)?;
    Ok(ModelParams {
        n_particles,
        gamma,
        nbar,
        d_factor,
        s: 2.0 * nbar + 1.0,
    })
}

impl ModelParams {
    pub fn new(n_particles: u32, gamma: f64, nbar: f64, d_factor: f64) -> Result<Self> {
        make_params(i64::from(n_particles), gamma, nbar, d_factor)
    }

    pub fn n_particles(&self) -> u32 {
        self.n_particles
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    pub fn d_factor(&self) -> f64 {
        self.d_factor
    }

    /// Quadrature variance scale `2n̄ + 1`.
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn with_n_particles(&self, n_particles: u32) -> Result<Self> {
        Self::new(n_particles, self.gamma, self.nbar, self.d_factor)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n_particles, gamma, self.nbar, self.d_factor)
    }

    pub fn with_nbar(&self, nbar: f64) -> Result<Self> {
        Self::new(self.n_particles, self.gamma, nbar, self.d_factor)
    }

    pub fn with_d_factor(&self, d_factor: f64) -> Result<Self> {
        Self::new(self.n_particles, self.gamma, self.nbar, d_factor)
    }
}

impl std::fmt::Display for ModelParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "N={}, gamma={}, nbar={}, d={}",
            self.n_particles, self.gamma, self.nbar, self.d_factor
        )
    }
}

/// A mechanical bath: mirror angular frequency (rad/s) and temperature (K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    omega_m: f64,
    temperature: f64,
}

impl BathSpec {
    pub fn new(omega_m: f64, temperature: f64) -> Result<Self> {
        if !(omega_m.is_finite() && omega_m > 0.0) {
            return Err(Error::domain("omega_m", format!("{omega_m} must be positive")));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::domain(
                "temperature",
                format!("{temperature} must be nonnegative"),
            ));
        }
        Ok(Self {
            omega_m,
            temperature,
        })
    }

    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// `ħω_m / (k_B T)`, infinite at zero temperature.
    pub fn energy_ratio(&self) -> f64 {
        if self.temperature == 0.0 {
            f64::INFINITY
        } else {
            HBAR * self.omega_m / (K_B * self.temperature)
        }
    }
}

/// Bose–Einstein occupation `1 / (exp(ħω_m/k_BT) − 1)` of a bath.
pub fn thermal_occupation(bath: &BathSpec) -> f64 {
    thermal_occupation_from_ratio(bath.energy_ratio())
}

/// Occupation as a function of the dimensionless ratio `x = ħω/(k_BT)`.
///
/// `x = ∞` (zero temperature) maps to 0. Nonpositive or NaN ratios are not
/// physical and return NaN.
pub fn thermal_occupation_from_ratio(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    1.0 / x.exp_m1()
}
