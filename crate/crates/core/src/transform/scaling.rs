use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stored min-max parameters. Applying them does not clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("min-max scaling of an empty column"));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        Ok(MinMax { min, max })
    }

    /// Constant columns scale to zero.
    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    pub fn apply(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }
}

pub fn minmax_fit_apply(values: &[f64]) -> Result<(Vec<f64>, MinMax)> {
    let mm = MinMax::fit(values)?;
    Ok((values.iter().map(|&x| mm.apply(x)).collect(), mm))
}

/// Maps labels to their index in `categories`.
pub fn label_encode<S: AsRef<str>>(labels: &[S], categories: &[String]) -> Result<Vec<u32>> {
    let lookup: HashMap<&str, u32> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i as u32)).collect();
    labels
        .iter()
        .map(|l| {
            lookup
                .get(l.as_ref())
                .copied()
                .ok_or_else(|| Error::invalid(format!("unknown category `{}`", l.as_ref())))
        })
        .collect()
}

pub fn label_decode(codes: &[u32], categories: &[String]) -> Result<Vec<String>> {
    codes
        .iter()
        .map(|&c| {
            categories
                .get(c as usize)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("category code {c} out of range")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmax_cases() {
        let (v, mm) = minmax_fit_apply(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
        assert_eq!(mm.apply(8.0), 1.5);
        let (v, mm) = minmax_fit_apply(&[5.0, 5.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        assert!(mm.is_degenerate());
        assert!(minmax_fit_apply(&[]).is_err());
    }

    #[test]
    fn label_codes() {
        let cats: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(label_encode(&["b"], &cats).unwrap(), vec![1]);
        let col = ["c", "a", "c", "b", "c"];
        let codes = label_encode(&col, &cats).unwrap();
        assert_eq!(label_decode(&codes, &cats).unwrap(), col);
        let hist = crate::data::category_counts(&codes, 3);
        assert_eq!(hist, vec![1, 1, 3]);
        assert!(label_encode(&["z"], &cats).is_err());
    }
}
