use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};

/// A state in chart coordinates. Coordinates are always finite; the
/// constructor rejects NaN and infinities so downstream metric code can
/// assume totality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    coords: Vec<f64>,
}

impl StatePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(DynError::invalid("coords", "empty coordinate vector"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(DynError::invalid(
                "coords",
                format!("non-finite coordinate {bad}"),
            ));
        }
        Ok(StatePoint { coords })
    }

    /// Panics on non-finite input; for literals in tests and model internals
    /// that already guarantee finiteness.
    pub fn from_slice(coords: &[f64]) -> Self {
        StatePoint::new(coords.to_vec()).expect("finite coordinates")
    }

    pub fn scalar(x: f64) -> Self {
        StatePoint::from_slice(&[x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }
}

impl std::fmt::Display for StatePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c:.6}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_coordinates() {
        assert!(StatePoint::new(vec![0.5, f64::NAN]).is_err());
        assert!(StatePoint::new(vec![f64::INFINITY]).is_err());
        assert!(StatePoint::new(vec![]).is_err());
        assert!(StatePoint::new(vec![0.25, 0.75]).is_ok());
    }
}
