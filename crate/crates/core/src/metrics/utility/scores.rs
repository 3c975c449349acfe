use crate::error::{Error, Result};

/// F1 of class 1 for binary targets; macro-F1 over the classes present in
/// either vector otherwise.
pub fn f1_score(predictions: &[u32], truth: &[u32], n_classes: usize) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::shape(truth.len(), predictions.len()));
    }
    if truth.is_empty() {
        return Err(Error::invalid("F1 of empty vectors"));
    }
    let k = n_classes.max(1 + *predictions.iter().chain(truth).max().expect("non-empty") as usize);
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p == t {
            tp[p as usize] += 1;
        } else {
            fp[p as usize] += 1;
            fn_[t as usize] += 1;
        }
    }
    let f1 = |c: usize| {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom == 0 {
            0.0
        } else {
            2.0 * tp[c] as f64 / denom as f64
        }
    };
    if n_classes == 2 {
        return Ok(f1(1));
    }
    let present: Vec<usize> = (0..k).filter(|&c| tp[c] + fp[c] + fn_[c] > 0).collect();
    Ok(present.iter().map(|&c| f1(c)).sum::<f64>() / present.len() as f64)
}

/// Coefficient of determination. A constant truth scores 1 when predicted
/// exactly and 0 otherwise.
pub fn r2(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::shape(truth.len(), predictions.len()));
    }
    if truth.is_empty() {
        return Err(Error::invalid("r² of empty vectors"));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = predictions.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(if ss_res == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// r² floored at -1 and mapped affinely onto [0, 1].
pub fn r2_normalized(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    let r = r2(predictions, truth)?;
    let r = if r.is_nan() { -1.0 } else { r.max(-1.0) };
    Ok((r + 1.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 1, 0, 0], &[1, 0, 1, 0], 2).unwrap(), 0.5);
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1], 2).unwrap(), 1.0);
        assert_eq!(f1_score(&[0, 0, 0], &[1, 0, 1], 2).unwrap(), 0.0);
        // class 0: tp 1 fp 0 fn 1 → 2/3; class 1: tp 1 fp 1 fn 0 → 2/3; class 2: tp 1 → 1
        let m = f1_score(&[0, 1, 1, 2], &[0, 0, 1, 2], 3).unwrap();
        assert!((m - (2.0 / 3.0 + 2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn r2_examples() {
        let t = [1.0, 2.0, 3.0, 6.0];
        assert_eq!(r2_normalized(&t, &t).unwrap(), 1.0);
        assert_eq!(r2_normalized(&[3.0; 4], &t).unwrap(), 0.5);
        assert_eq!(r2_normalized(&[100.0; 4], &t).unwrap(), 0.0);
        assert_eq!(r2(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 1.0);
    }
}
