use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordering class of a mass vector, bottom ball first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassOrdering {
    StrictlyDecreasing,
    Nonincreasing,
    Equal,
    Unordered,
}

impl MassOrdering {
    /// Most specific class describing `m`.
    pub fn classify(m: &[f64]) -> Self {
        let pairs = || m.windows(2);
        if pairs().all(|w| w[0] == w[1]) {
            MassOrdering::Equal
        } else if pairs().all(|w| w[0] > w[1]) {
            MassOrdering::StrictlyDecreasing
        } else if pairs().all(|w| w[0] >= w[1]) {
            MassOrdering::Nonincreasing
        } else {
            MassOrdering::Unordered
        }
    }

    /// Whether a vector of class `self` also satisfies `other`.
    pub fn satisfies(self, other: MassOrdering) -> bool {
        use MassOrdering::*;
        match other {
            Unordered => true,
            Nonincreasing => matches!(self, StrictlyDecreasing | Nonincreasing | Equal),
            StrictlyDecreasing => self == StrictlyDecreasing,
            Equal => self == Equal,
        }
    }
}

/// Masses `m_1..m_n` of the balls, index 0 is the lowest ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassVector {
    m: Vec<f64>,
    mode: MassOrdering,
}

impl MassVector {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if m.len() < 2 {
            return Err(Error::InvalidMasses(format!(
                "need at least two balls, got {}",
                m.len()
            )));
        }
        if let Some(bad) = m.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidMasses(format!(
                "masses must be positive and finite, got {bad}"
            )));
        }
        let mode = MassOrdering::classify(&m);
        Ok(Self { m, mode })
    }

    /// Builds a mass vector and checks it belongs to the requested class.
    pub fn with_mode(m: Vec<f64>, required: MassOrdering) -> Result<Self> {
        let masses = Self::new(m)?;
        if !masses.mode.satisfies(required) {
            return Err(Error::InvalidMasses(format!(
                "masses {:?} are {:?}, expected {:?}",
                masses.m, masses.mode, required
            )));
        }
        Ok(masses)
    }

    pub fn equal(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Rescales so that the masses sum to one. Only ratios enter the dynamics.
    pub fn normalized(&self) -> Self {
        let total: f64 = self.m.iter().sum();
        Self {
            m: self.m.iter().map(|x| x / total).collect(),
            mode: self.mode,
        }
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    pub fn mode(&self) -> MassOrdering {
        self.mode
    }

    /// `gamma` for the pair whose lower ball has zero-based index `lower`.
    pub fn gamma(&self, lower: usize) -> f64 {
        let (a, b) = (self.m[lower], self.m[lower + 1]);
        (a - b) / (a + b)
    }

    /// Shear coefficient of the pair cocycle, given the incoming velocities.
    pub fn alpha(&self, lower: usize, v_lower: f64, v_upper: f64) -> f64 {
        let (a, b) = (self.m[lower], self.m[lower + 1]);
        2.0 * a * b * (a - b) / ((a + b) * (a + b)) * (v_lower - v_upper)
    }
}

impl std::ops::Index<usize> for MassVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.m[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(MassOrdering::classify(&[3.0, 2.0, 1.0]), MassOrdering::StrictlyDecreasing);
        assert_eq!(MassOrdering::classify(&[3.0, 3.0, 1.0]), MassOrdering::Nonincreasing);
        assert_eq!(MassOrdering::classify(&[1.0, 1.0]), MassOrdering::Equal);
        assert_eq!(MassOrdering::classify(&[1.0, 2.0]), MassOrdering::Unordered);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MassVector::new(vec![1.0]).is_err());
        assert!(MassVector::new(vec![1.0, 0.0]).is_err());
        assert!(MassVector::new(vec![1.0, -2.0]).is_err());
        assert!(MassVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(MassVector::with_mode(vec![1.0, 2.0], MassOrdering::Nonincreasing).is_err());
        assert!(MassVector::with_mode(vec![2.0, 2.0], MassOrdering::Nonincreasing).is_ok());
        assert!(MassVector::with_mode(vec![2.0, 2.0], MassOrdering::StrictlyDecreasing).is_err());
    }

    #[test]
    fn gamma_and_alpha() {
        let m = MassVector::new(vec![2.0, 1.0]).unwrap();
        assert!((m.gamma(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.alpha(0, 1.0, -1.0) - 8.0 / 9.0).abs() < 1e-15);
        let eq = MassVector::equal(3, 0.5).unwrap();
        assert_eq!(eq.gamma(1), 0.0);
        assert_eq!(eq.alpha(1, 2.0, -1.0), 0.0);
    }

    #[test]
    fn normalization_keeps_ratios() {
        let m = MassVector::new(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().normalized();
        assert!((m.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((m[0] / m[4] - 5.0).abs() < 1e-12);
        assert_eq!(m.mode(), MassOrdering::StrictlyDecreasing);
    }
}
