use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Named model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    /// Inverse temperature.
    Beta,
    /// Nearest-neighbor interaction energy.
    J,
    /// External field.
    H,
    /// Adsorption rate constant.
    Ca,
    /// Desorption rate constant.
    Cd,
    /// Diffusion rate constant.
    Cdiff,
    /// Reaction rate constant.
    Cr,
}

impl Param {
    pub const ALL: [Param; 7] = [
        Param::Beta,
        Param::J,
        Param::H,
        Param::Ca,
        Param::Cd,
        Param::Cdiff,
        Param::Cr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Beta => "beta",
            Param::J => "J",
            Param::H => "h",
            Param::Ca => "c_a",
            Param::Cd => "c_d",
            Param::Cdiff => "c_diff",
            Param::Cr => "c_r",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// Rate constants must be nonnegative; energies are unconstrained.
    pub fn is_rate(self) -> bool {
        matches!(self, Param::Ca | Param::Cd | Param::Cdiff | Param::Cr)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

/// The parameter vector θ. Parameters a model does not use may be absent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParameterVector {
    values: [Option<f64>; 7],
}

impl ParameterVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, p: Param, value: f64) -> Self {
        self.values[p.index()] = Some(value);
        self
    }

    pub fn set(&mut self, p: Param, value: f64) {
        self.values[p.index()] = Some(value);
    }

    pub fn get(&self, p: Param) -> Option<f64> {
        self.values[p.index()]
    }

    pub fn require(&self, p: Param) -> Result<f64> {
        self.get(p)
            .ok_or_else(|| Error::InvalidParameter(format!("missing parameter `{p}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, f64)> + '_ {
        Param::ALL
            .into_iter()
            .filter_map(|p| self.get(p).map(|v| (p, v)))
    }

    /// Checks finiteness, nonnegative rate constants and `beta >= 0`.
    pub fn validate(&self) -> Result<()> {
        for (p, v) in self.iter() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("`{p}` is not finite")));
            }
            if (p.is_rate() || p == Param::Beta) && v < 0.0 {
                return Err(Error::InvalidParameter(format!("`{p}` = {v} is negative")));
            }
        }
        Ok(())
    }
}

/// Finite-difference direction `h e_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationDirection {
    pub param: Param,
    pub step: f64,
}

impl PerturbationDirection {
    pub fn new(param: Param, step: f64) -> Result<Self> {
        if step == 0.0 || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "perturbation step must be finite and nonzero, got {step}"
            )));
        }
        Ok(Self { param, step })
    }

    pub fn named(name: &str, step: f64) -> Result<Self> {
        Self::new(name.parse()?, step)
    }
}

/// `θ + h e_l`.
pub fn perturb(theta: &ParameterVector, d: &PerturbationDirection) -> Result<ParameterVector> {
    let base = theta
        .get(d.param)
        .ok_or_else(|| Error::UnknownParameter(d.param.name().to_string()))?;
    let mut out = *theta;
    out.set(d.param, base + d.step);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturb_examples() {
        let theta = ParameterVector::new()
            .with(Param::Beta, 1.0)
            .with(Param::J, 1.0);
        let d = PerturbationDirection::named("beta", 0.1).unwrap();
        let out = perturb(&theta, &d).unwrap();
        assert!((out.get(Param::Beta).unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(out.get(Param::J), Some(1.0));

        let theta = ParameterVector::new().with(Param::Beta, 0.1);
        let d = PerturbationDirection::new(Param::Beta, 1e-3).unwrap();
        assert!((perturb(&theta, &d).unwrap().get(Param::Beta).unwrap() - 0.101).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_unknown_directions_rejected() {
        assert!(PerturbationDirection::new(Param::Beta, 0.0).is_err());
        assert!(PerturbationDirection::new(Param::Beta, f64::NAN).is_err());
        assert!(matches!(
            PerturbationDirection::named("gamma", 0.1),
            Err(Error::UnknownParameter(_))
        ));
        let theta = ParameterVector::new().with(Param::Beta, 1.0);
        let d = PerturbationDirection::new(Param::Cdiff, 0.1).unwrap();
        assert!(matches!(
            perturb(&theta, &d),
            Err(Error::UnknownParameter(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(ParameterVector::new()
            .with(Param::Ca, -1.0)
            .validate()
            .is_err());
        assert!(ParameterVector::new()
            .with(Param::Beta, -0.1)
            .validate()
            .is_err());
        assert!(ParameterVector::new()
            .with(Param::H, -3.0)
            .validate()
            .is_ok());
        for p in Param::ALL {
            assert_eq!(p.name().parse::<Param>().unwrap(), p);
        }
    }
}
