use crate::error::{Error, Result};

use super::TrainingSet;

/// Per-feature max-abs normalization fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    max_abs: Vec<f64>,
}

impl Scaler {
    /// Scaler from explicit per-feature divisors. Every entry must be finite and > 0.
    pub fn from_max_abs(max_abs: Vec<f64>) -> Result<Scaler> {
        if max_abs.is_empty() {
            return Err(Error::Empty("scaler has no features"));
        }
        if let Some(v) = max_abs.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!("scaler entry {v} must be finite and > 0")));
        }
        Ok(Scaler { max_abs })
    }

    pub fn identity(width: usize) -> Scaler {
        Scaler { max_abs: vec![1.0; width] }
    }

    pub fn width(&self) -> usize {
        self.max_abs.len()
    }

    pub fn max_abs(&self) -> &[f64] {
        &self.max_abs
    }

    /// Divide each feature by its training max-abs.
    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        let mut out = features.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, features: &mut [f64]) -> Result<()> {
        if features.len() != self.max_abs.len() {
            return Err(Error::WidthMismatch { expected: self.max_abs.len(), got: features.len() });
        }
        for (x, s) in features.iter_mut().zip(&self.max_abs) {
            *x /= s;
        }
        Ok(())
    }

    pub fn apply_set(&self, set: &TrainingSet) -> Result<TrainingSet> {
        if set.width() != self.width() {
            return Err(Error::WidthMismatch { expected: self.width(), got: set.width() });
        }
        let mut out = set.clone();
        for row in out.values_mut().chunks_exact_mut(self.width()) {
            self.apply_in_place(row)?;
        }
        Ok(out)
    }
}

/// Fit max-abs divisors. An all-zero column gets divisor 1.
pub fn normalize_fit(set: &TrainingSet) -> Result<Scaler> {
    if set.is_empty() {
        return Err(Error::Empty("cannot fit a scaler on zero rows"));
    }
    let mut max_abs = vec![0.0f64; set.width()];
    for i in 0..set.len() {
        for (m, x) in max_abs.iter_mut().zip(set.row(i)) {
            *m = m.max(x.abs());
        }
    }
    for m in max_abs.iter_mut() {
        if !(*m > 0.0) || !m.is_finite() {
            *m = 1.0;
        }
    }
    Ok(Scaler { max_abs })
}

pub fn normalize_apply(scaler: &Scaler, features: &[f64]) -> Result<Vec<f64>> {
    scaler.apply(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::FaultLabel;

    fn column(values: &[f64]) -> TrainingSet {
        let mut set = TrainingSet::new(vec!["x".into()]).unwrap();
        for v in values {
            set.push(&[*v], FaultLabel::NORMAL).unwrap();
        }
        set
    }

    #[test]
    fn max_abs_column() {
        let set = column(&[-14.28, 7.0, 13.6]);
        let s = normalize_fit(&set).unwrap();
        assert_eq!(s.max_abs(), &[14.28]);
        assert_eq!(s.apply(&[-14.28]).unwrap(), vec![-1.0]);
        let applied = s.apply_set(&set).unwrap();
        assert!((0..applied.len()).all(|i| applied.row(i)[0].abs() <= 1.0));
    }

    #[test]
    fn zero_column_is_identity() {
        let s = normalize_fit(&column(&[0.0, 0.0])).unwrap();
        assert_eq!(s.max_abs(), &[1.0]);
        assert_eq!(s.apply(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn errors() {
        let empty = TrainingSet::new(vec!["x".into()]).unwrap();
        assert!(normalize_fit(&empty).is_err());
        let s = Scaler::identity(2);
        assert!(matches!(s.apply(&[1.0]), Err(Error::WidthMismatch { expected: 2, got: 1 })));
        assert!(Scaler::from_max_abs(vec![0.0]).is_err());
    }
}
