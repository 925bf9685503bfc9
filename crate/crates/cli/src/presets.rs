//! Named functions selectable from a config file.

use std::f64::consts::PI;

use mimfd::fem::Coefficients;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoPreset {
    /// `2 + (2πt)²`
    Example1,
    One,
    Zero,
}

impl RhoPreset {
    pub fn parse(v: &str) -> Result<Self, CliError> {
        match v {
            "example1" => Ok(Self::Example1),
            "one" => Ok(Self::One),
            "zero" => Ok(Self::Zero),
            _ => Err(CliError::Config(format!(
                "rho: unknown preset {v:?}, expected example1, one or zero"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::One => "one",
            Self::Zero => "zero",
        }
    }

    pub fn eval(self, t: f64) -> f64 {
        match self {
            Self::Example1 => 2.0 + (2.0 * PI * t).powi(2),
            Self::One => 1.0,
            Self::Zero => 0.0,
        }
    }
}

/// Spatial fields used for `g_true`, the initial value and the initial guess.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldPreset {
    /// `cos(πx) cos(πy) / 2 + 1`
    Example1,
    /// `3 − exp(1 − (x + y)/2)`
    Example2a,
    /// `cos(πx) cos(2πy) / 2 + 1`
    Example2b,
    /// `sin(πx) cos(πy) / 2 + 1`
    Example2c,
    /// `sin(πx) sin(πy)`
    Sin,
    One,
    Zero,
}

impl FieldPreset {
    const ALL: [FieldPreset; 7] = [
        Self::Example1,
        Self::Example2a,
        Self::Example2b,
        Self::Example2c,
        Self::Sin,
        Self::One,
        Self::Zero,
    ];

    pub fn parse(key: &str, v: &str) -> Result<Self, CliError> {
        Self::ALL.into_iter().find(|p| p.name() == v).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
            CliError::Config(format!(
                "{key}: unknown preset {v:?}, expected one of {}",
                names.join(", ")
            ))
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2a => "example2a",
            Self::Example2b => "example2b",
            Self::Example2c => "example2c",
            Self::Sin => "sin",
            Self::One => "one",
            Self::Zero => "zero",
        }
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Self::Example1 => 0.5 * (PI * x).cos() * (PI * y).cos() + 1.0,
            Self::Example2a => 3.0 - (1.0 - 0.5 * (x + y)).exp(),
            Self::Example2b => 0.5 * (PI * x).cos() * (2.0 * PI * y).cos() + 1.0,
            Self::Example2c => 0.5 * (PI * x).sin() * (PI * y).cos() + 1.0,
            Self::Sin => (PI * x).sin() * (PI * y).sin(),
            Self::One => 1.0,
            Self::Zero => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientPreset {
    /// `A = I`, `c = 0`
    Laplacian,
}

impl CoefficientPreset {
    pub fn parse(v: &str) -> Result<Self, CliError> {
        match v {
            "laplacian" => Ok(Self::Laplacian),
            _ => Err(CliError::Config(format!(
                "coefficients: unknown preset {v:?}, expected laplacian"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Laplacian => "laplacian",
        }
    }

    pub fn build(self) -> Coefficients {
        match self {
            Self::Laplacian => Coefficients::laplacian(),
        }
    }
}
