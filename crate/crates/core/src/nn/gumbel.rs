use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

pub struct GumbelSample {
    /// Forward value: the soft sample, or its one-hot argmax when `hard`.
    pub value: Array2<f64>,
    /// Soft sample; gradients always flow through this.
    pub soft: Array2<f64>,
}

/// Standard Gumbel noise `-ln(-ln U)`.
pub fn sample_gumbel<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        -(-u.ln()).ln()
    })
}

pub fn gumbel_softmax<R: Rng>(logits: ArrayView2<'_, f64>, tau: f64, rng: &mut R, hard: bool) -> Result<GumbelSample> {
    let noise = sample_gumbel(logits.nrows(), logits.ncols(), rng);
    gumbel_softmax_with_noise(logits, noise.view(), tau, hard)
}

/// `softmax((logits + noise) / tau)` per row.
pub fn gumbel_softmax_with_noise(
    logits: ArrayView2<'_, f64>,
    noise: ArrayView2<'_, f64>,
    tau: f64,
    hard: bool,
) -> Result<GumbelSample> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("Gumbel-softmax temperature must be positive, got {tau}")));
    }
    if logits.dim() != noise.dim() {
        return Err(Error::shape(format!("{:?}", logits.dim()), format!("{:?}", noise.dim())));
    }
    let soft = softmax_rows(((&logits + &noise) / tau).view());
    let value = if hard {
        let mut onehot = Array2::zeros(soft.raw_dim());
        for (r, row) in soft.rows().into_iter().enumerate() {
            onehot[[r, crate::util::argmax(row)]] = 1.0;
        }
        onehot
    } else {
        soft.clone()
    };
    Ok(GumbelSample { value, soft })
}

pub fn softmax_rows(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    out
}

/// Gradient with respect to the logits of `softmax(logits / tau)` given the
/// upstream gradient on its output.
pub fn softmax_backward(soft: ArrayView2<'_, f64>, upstream: ArrayView2<'_, f64>, tau: f64) -> Array2<f64> {
    let mut out = Array2::zeros(soft.raw_dim());
    for ((mut o, y), u) in out.rows_mut().into_iter().zip(soft.rows()).zip(upstream.rows()) {
        let dot = y.dot(&u);
        for j in 0..y.len() {
            o[j] = y[j] * (u[j] - dot) / tau;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_are_on_the_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = array![[1.0, -2.0, 0.5], [0.0, 0.0, 0.0], [30.0, -30.0, 1.0]];
        for hard in [false, true] {
            let s = gumbel_softmax(logits.view(), 0.2, &mut rng, hard).unwrap();
            for row in s.value.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn low_temperature_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = Array2::from_shape_fn((10_000, 3), |(_, j)| if j == 0 { 10.0 } else { 0.0 });
        let s = gumbel_softmax(logits.view(), 0.1, &mut rng, false).unwrap();
        let hits = s.value.column(0).iter().filter(|&&p| p > 0.999).count();
        assert!(hits as f64 / 10_000.0 >= 0.99, "hits {hits}");
    }

    #[test]
    fn zero_noise_is_softmax() {
        let logits = array![[1.0, 2.0, 3.0]];
        let s = gumbel_softmax_with_noise(logits.view(), Array2::zeros((1, 3)).view(), 1.0, false).unwrap();
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
        for j in 0..3 {
            assert!((s.value[[0, j]] - ((j + 1) as f64).exp() / z).abs() < 1e-15);
        }
        let hard = gumbel_softmax_with_noise(logits.view(), Array2::zeros((1, 3)).view(), 1.0, true).unwrap();
        assert_eq!(hard.value, array![[0.0, 0.0, 1.0]]);
        assert_eq!(hard.soft, s.soft);
    }

    #[test]
    fn bad_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(gumbel_softmax(array![[1.0]].view(), 0.0, &mut rng, false).is_err());
        assert!(gumbel_softmax(array![[1.0]].view(), -1.0, &mut rng, false).is_err());
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let logits = array![[0.3, -1.2, 2.0, 0.1]];
        let up = array![[0.5, -0.25, 1.5, 2.0]];
        let tau = 0.7;
        let f = |l: &Array2<f64>| (softmax_rows((l / tau).view()) * &up).sum();
        let soft = softmax_rows((&logits / tau).view());
        let g = softmax_backward(soft.view(), up.view(), tau);
        for j in 0..4 {
            let mut p = logits.clone();
            p[[0, j]] += 1e-6;
            let mut m = logits.clone();
            m[[0, j]] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - g[[0, j]]).abs() < 1e-8);
        }
    }
}
