use super::tensor::Tensor3;
use crate::error::{dim_err, Result};

/// Mean squared error over every element of a sequence of maps, with its
/// gradient `2(pred − target)/N` per element.
pub fn mse_loss(pred: &[Tensor3], target: &[Tensor3]) -> Result<(f64, Vec<Tensor3>)> {
    if pred.len() != target.len() {
        return Err(dim_err!(
            "mse over {} predictions vs {} targets",
            pred.len(),
            target.len()
        ));
    }
    for (p, t) in pred.iter().zip(target) {
        p.ensure_shape(t, "mse operands")?;
    }
    let count: usize = pred.iter().map(Tensor3::len).sum();
    if count == 0 {
        return Err(dim_err!("mse over empty tensors"));
    }
    let n = count as f64;
    let mut sum = 0.0;
    let grads = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let data = p
                .data()
                .iter()
                .zip(t.data())
                .map(|(a, b)| {
                    let d = a - b;
                    sum += d * d;
                    2.0 * d / n
                })
                .collect();
            Tensor3::from_vec_unchecked(p.channels(), p.height(), p.width(), data)
        })
        .collect();
    Ok((sum / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_rel_error, numeric_grad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, t: usize) -> Vec<Tensor3> {
        (0..t)
            .map(|_| {
                Tensor3::from_vec(2, 3, 4, (0..24).map(|_| rng.gen_range(0.0..1.0)).collect())
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn identical_inputs_have_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_seq(&mut rng, 3);
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn unit_offset_gives_unit_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_seq(&mut rng, 2);
        let b: Vec<Tensor3> = a.iter().map(|t| t.map(|v| v + 1.0)).collect();
        assert!((mse_loss(&b, &a).unwrap().0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_loop_and_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_seq(&mut rng, 3);
        let b = random_seq(&mut rng, 3);
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for (x, y) in a.iter().zip(&b) {
            for i in 0..x.len() {
                acc += (x.data()[i] - y.data()[i]).powi(2);
                cnt += 1;
            }
        }
        let (l, g) = mse_loss(&a, &b).unwrap();
        assert!((l - acc / cnt as f64).abs() < 1e-12);
        let flat: Vec<f64> = a.iter().flat_map(|t| t.data().to_vec()).collect();
        let num = numeric_grad(&flat, |v| {
            let seq: Vec<Tensor3> = v
                .chunks(24)
                .map(|c| Tensor3::from_vec(2, 3, 4, c.to_vec()).unwrap())
                .collect();
            mse_loss(&seq, &b).unwrap().0
        });
        let ana: Vec<f64> = g.iter().flat_map(|t| t.data().to_vec()).collect();
        assert!(max_rel_error(&ana, &num) < 1e-5);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = vec![Tensor3::zeros(1, 2, 2)];
        let b = vec![Tensor3::zeros(1, 2, 3)];
        assert!(mse_loss(&a, &b).is_err());
        assert!(mse_loss(&a, &[]).is_err());
    }
}
