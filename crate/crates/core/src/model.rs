//! Physical coefficients and constitutive functions of the
//! Navier-Stokes-Allen-Cahn-heat system.
//!
//! Density is fixed to one throughout; the Boussinesq correction enters
//! only as the buoyancy body force.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("{0} must be finite")]
    NotFinite(&'static str),
    #[error("isothermal mode (b = 0): smallness condition on the temperature is vacuous")]
    Isothermal,
}

/// All model coefficients, plus user-supplied estimates for constants
/// that the analysis leaves unspecified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Viscosity.
    pub nu: f64,
    /// Phase relaxation rate.
    pub gamma: f64,
    /// Thermal diffusivity.
    pub k: f64,
    /// Capillary scale of the surface tension.
    pub lambda0: f64,
    /// Surface-tension offset.
    pub a: f64,
    /// Thermal slope of the surface tension.
    pub b: f64,
    /// Thermal expansion coefficient.
    pub alpha: f64,
    /// Gravitational acceleration.
    pub g: f64,
    /// Interface thickness.
    pub eps: f64,
    /// Estimate of the Gagliardo-Nirenberg constant used by the smallness check.
    pub c1_estimate: f64,
    /// Weight of the temperature L2 term in the total energy.
    pub omega_weight: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            gamma: 1.0,
            k: 1.0,
            lambda0: 0.05,
            a: 1.0,
            b: 0.5,
            alpha: 1.0,
            g: 1.0,
            eps: 0.05,
            c1_estimate: 1.0,
            omega_weight: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            ("nu", self.nu),
            ("gamma", self.gamma),
            ("k", self.k),
            ("lambda0", self.lambda0),
            ("a", self.a),
            ("b", self.b),
            ("alpha", self.alpha),
            ("g", self.g),
            ("eps", self.eps),
            ("c1_estimate", self.c1_estimate),
            ("omega", self.omega_weight),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(ModelError::NotFinite(name));
            }
        }
        let positive = [
            ("nu", self.nu),
            ("gamma", self.gamma),
            ("k", self.k),
            ("lambda0", self.lambda0),
            ("a", self.a),
            ("eps", self.eps),
            ("c1_estimate", self.c1_estimate),
            ("omega", self.omega_weight),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(ModelError::NotPositive(name));
            }
        }
        Ok(())
    }

    /// Copy with the thermal couplings switched off (b = 0, alpha = 0).
    pub fn isothermal(&self) -> Self {
        Self {
            b: 0.0,
            alpha: 0.0,
            ..*self
        }
    }
}

/// Weights of the temperature terms in the total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights {
    /// Weight of the squared temperature gradient.
    pub zeta: f64,
    /// Weight of the squared temperature.
    pub omega: f64,
}

/// Double-well potential (phi^2 - 1)^2 / (4 eps^2).
#[inline]
pub fn potential_value(phi: f64, eps: f64) -> f64 {
    let s = phi * phi - 1.0;
    s * s / (4.0 * eps * eps)
}

/// Derivative (phi^3 - phi) / eps^2 of [`potential_value`].
#[inline]
pub fn potential_derivative(phi: f64, eps: f64) -> f64 {
    (phi * phi * phi - phi) / (eps * eps)
}

/// Second derivative (3 phi^2 - 1) / eps^2.
#[inline]
pub fn potential_second_derivative(phi: f64, eps: f64) -> f64 {
    (3.0 * phi * phi - 1.0) / (eps * eps)
}

/// Temperature-dependent surface tension lambda0 (a - b theta).
#[inline]
pub fn surface_tension(theta: f64, params: &PhysicalParams) -> f64 {
    params.lambda0 * (params.a - params.b * theta)
}

/// Upward body-force density alpha g theta. The constant part of the
/// Boussinesq density is a gradient and lives in the pressure.
#[inline]
pub fn buoyancy_density(theta: f64, params: &PhysicalParams) -> f64 {
    params.alpha * params.g * theta
}

/// Upper bound on the initial temperature sup-norm under which the
/// dissipative energy inequality is guaranteed, evaluated with the
/// supplied estimate of the embedding constant (so the verdict is only
/// as rigorous as that estimate).
pub fn smallness_threshold(params: &PhysicalParams) -> Result<f64, ModelError> {
    if params.b == 0.0 {
        return Err(ModelError::Isothermal);
    }
    let c1 = params.c1_estimate;
    let root = (params.a * params.gamma * params.nu / (2.0 * params.lambda0)).sqrt();
    Ok(root / (4.0 * c1 * c1 * params.b.abs()))
}

pub fn energy_weights(params: &PhysicalParams) -> EnergyWeights {
    EnergyWeights {
        zeta: params.k * params.b * params.b * params.lambda0 / (params.a * params.gamma),
        omega: params.omega_weight,
    }
}
