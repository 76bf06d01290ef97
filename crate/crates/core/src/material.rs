//! Constitutive laws: isotropic bulk elasticity, the phase-field stiffness
//! interpolation for single and graded materials, their energy derivatives,
//! and the double-well potential.
//!
//! The 2D law is the Lamé form `sigma = lambda tr(eps) I + 2 mu eps` applied to
//! in-plane strains (plane strain), with unit out-of-plane thickness.
//!
//! Graded stiffness is `C(phi, chi) = C(chi) (phi^p + gamma^2 (1 - phi)^p)` with
//! `C(chi) = [chi + (1 - chi) / beta] C_bulk`: `chi = 1` is the bulk material and
//! `chi = 0` the soft one, `beta` times softer. `C(chi)` does not depend on
//! `phi`, so `beta = 1` reduces exactly to the single-material law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 2D strain tensor (tensor components, `xy` is not the engineering shear).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Strain {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Strain {
    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// `eps : eps`
    pub fn contract(&self) -> f64 {
        self.xx * self.xx + self.yy * self.yy + 2.0 * self.xy * self.xy
    }
}

/// Lamé parameters `(lambda, mu)` from Young's modulus and Poisson's ratio.
pub fn lame_from_e_nu(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0 && young.is_finite()) {
        return Err(Error::invalid(format!("Young modulus must be positive, got {young}")));
    }
    if !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::invalid(format!(
            "Poisson ratio must lie in (-1, 0.5), got {poisson}"
        )));
    }
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    Ok((lambda, mu))
}

/// Isotropic fourth-order tensor `lambda 1 (x) 1 + 2 mu I`, stored by its Lamé pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityTensor {
    pub lambda: f64,
    pub mu: f64,
}

impl ElasticityTensor {
    /// `(C eps) : eps`
    #[inline]
    pub fn energy(&self, eps: &Strain) -> f64 {
        let tr = eps.trace();
        self.lambda * tr * tr + 2.0 * self.mu * eps.contract()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lambda: self.lambda * s,
            mu: self.mu * s,
        }
    }

    /// Voigt matrix acting on `[eps_xx, eps_yy, 2 eps_xy]`.
    pub fn voigt(&self) -> [[f64; 3]; 3] {
        let (l, m) = (self.lambda, self.mu);
        [[l + 2.0 * m, l, 0.0], [l, l + 2.0 * m, 0.0], [0.0, 0.0, m]]
    }

    /// Positive definite in the 2D strain space.
    pub fn is_positive_definite(&self) -> bool {
        self.mu > 0.0 && self.lambda + self.mu > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicElasticity {
    pub young: f64,
    pub poisson: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicElasticity {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        let (lambda, mu) = lame_from_e_nu(young, poisson)?;
        Ok(Self {
            young,
            poisson,
            lambda,
            mu,
        })
    }

    pub fn tensor(&self) -> ElasticityTensor {
        ElasticityTensor {
            lambda: self.lambda,
            mu: self.mu,
        }
    }
}

/// Parameters of the phase-field stiffness interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSpec {
    /// Penalty exponent `p`.
    pub penalty: f64,
    /// Interface thickness `gamma_phi`; the void keeps `gamma_phi^2` of the stiffness.
    pub gamma_phi: f64,
    /// Softening divisor: the soft graded material is `C_bulk / beta`.
    pub beta: f64,
}

impl Default for InterpolationSpec {
    fn default() -> Self {
        Self {
            penalty: 3.0,
            gamma_phi: 0.02,
            beta: 1.0,
        }
    }
}

impl InterpolationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty > 0.0) {
            return Err(Error::invalid(format!("penalty p must be positive, got {}", self.penalty)));
        }
        if !(self.gamma_phi > 0.0) {
            return Err(Error::invalid(format!(
                "gamma_phi must be positive, got {}",
                self.gamma_phi
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    #[inline]
    fn pow(&self, x: f64) -> f64 {
        if self.penalty == 3.0 {
            x * x * x
        } else {
            x.powf(self.penalty)
        }
    }

    #[inline]
    fn pow_minus_one(&self, x: f64) -> f64 {
        if self.penalty == 3.0 {
            x * x
        } else {
            x.powf(self.penalty - 1.0)
        }
    }

    /// `phi^p + gamma^2 (1 - phi)^p`
    #[inline]
    pub fn density_scale(&self, phi: f64) -> f64 {
        let g2 = self.gamma_phi * self.gamma_phi;
        self.pow(phi) + g2 * self.pow(1.0 - phi)
    }

    /// `d/dphi [phi^p + gamma^2 (1 - phi)^p]`
    #[inline]
    pub fn density_scale_derivative(&self, phi: f64) -> f64 {
        let g2 = self.gamma_phi * self.gamma_phi;
        self.penalty * (self.pow_minus_one(phi) - g2 * self.pow_minus_one(1.0 - phi))
    }

    /// `chi + (1 - chi) / beta`
    #[inline]
    pub fn grading_blend(&self, chi: f64) -> f64 {
        chi + (1.0 - chi) / self.beta
    }

    /// `d/dchi` of [`Self::grading_blend`].
    #[inline]
    pub fn grading_blend_derivative(&self) -> f64 {
        1.0 - 1.0 / self.beta
    }

    /// Stiffness multiple of `C_bulk` for the single-material law.
    #[inline]
    pub fn single_scale(&self, phi: f64) -> f64 {
        self.density_scale(phi)
    }

    /// Stiffness multiple of `C_bulk` for the graded law.
    #[inline]
    pub fn graded_scale(&self, phi: f64, chi: f64) -> f64 {
        self.grading_blend(chi) * self.density_scale(phi)
    }
}

pub fn c_single(phi: f64, mat: &IsotropicElasticity, spec: &InterpolationSpec) -> ElasticityTensor {
    mat.tensor().scaled(spec.single_scale(phi))
}

pub fn c_graded(
    phi: f64,
    chi: f64,
    mat: &IsotropicElasticity,
    spec: &InterpolationSpec,
) -> Result<ElasticityTensor> {
    if chi > phi {
        return Err(Error::invalid(format!(
            "grading variable {chi} exceeds density {phi}"
        )));
    }
    Ok(mat.tensor().scaled(spec.graded_scale(phi, chi)))
}

/// Energy density `(C(phi) eps) : eps` of the single-material law.
pub fn energy_single(phi: f64, eps: &Strain, mat: &IsotropicElasticity, spec: &InterpolationSpec) -> f64 {
    spec.single_scale(phi) * mat.tensor().energy(eps)
}

/// Energy density `(C(phi, chi) eps) : eps` of the graded law.
pub fn energy_graded(
    phi: f64,
    chi: f64,
    eps: &Strain,
    mat: &IsotropicElasticity,
    spec: &InterpolationSpec,
) -> f64 {
    spec.graded_scale(phi, chi) * mat.tensor().energy(eps)
}

pub fn denergy_dphi_single(
    phi: f64,
    eps: &Strain,
    mat: &IsotropicElasticity,
    spec: &InterpolationSpec,
) -> f64 {
    spec.density_scale_derivative(phi) * mat.tensor().energy(eps)
}

/// `[p phi^{p-1} - p gamma^2 (1 - phi)^{p-1}] (C(chi) eps) : eps`
pub fn denergy_dphi_graded(
    phi: f64,
    chi: f64,
    eps: &Strain,
    mat: &IsotropicElasticity,
    spec: &InterpolationSpec,
) -> f64 {
    spec.grading_blend(chi) * spec.density_scale_derivative(phi) * mat.tensor().energy(eps)
}

/// `(1 - 1/beta) (phi^p + gamma^2 (1 - phi)^p) (C_bulk eps) : eps`
pub fn denergy_dchi_graded(
    phi: f64,
    _chi: f64,
    eps: &Strain,
    mat: &IsotropicElasticity,
    spec: &InterpolationSpec,
) -> f64 {
    spec.grading_blend_derivative() * spec.density_scale(phi) * mat.tensor().energy(eps)
}

/// Double-well potential `(phi - phi^2)^2` and its derivative.
#[inline]
pub fn double_well(phi: f64) -> (f64, f64) {
    let s = phi - phi * phi;
    (s * s, 2.0 * s * (1.0 - 2.0 * phi))
}
