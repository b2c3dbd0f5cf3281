use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

/// Mean over labelled rows of `−log softmax(logits)[label]`.
///
/// `logits` is `[..., V]` with one row per entry of `labels`.
pub fn mlm_loss<T: Float>(logits: &Tensor<T>, labels: &[Option<u32>]) -> Result<f64> {
    let v = logits.last_dim();
    if logits.rows() != labels.len() {
        return Err(Error::shape("mlm_loss", logits.shape(), &[labels.len()]));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (row, label) in logits.data().chunks(v).zip(labels) {
        let Some(label) = *label else { continue };
        let label = label as usize;
        if label >= v {
            return Err(Error::Input(format!("label {label} out of range for vocabulary {v}")));
        }
        let max = row.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.to_f64()));
        let lse = max + row.iter().map(|x| (x.to_f64() - max).exp()).sum::<f64>().ln();
        total += lse - row[label].to_f64();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Contract("mlm_loss needs at least one labelled position".into()));
    }
    let loss = total / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite { op: "mlm_loss" });
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confident_logits_give_near_zero_loss() {
        let mut data = vec![-50.0; 2 * 8];
        data[3] = 50.0;
        data[8 + 6] = 50.0;
        let t = Tensor::new(vec![2, 8], data).unwrap();
        assert!(mlm_loss(&t, &[Some(3), Some(6)]).unwrap() < 1e-30);
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let t = Tensor::<f64>::full(&[2, 4, 16], 0.25);
        let labels = [Some(1), None, None, Some(15), None, Some(0), None, None];
        assert!((mlm_loss(&t, &labels).unwrap() - 16f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn no_labels_is_contract_error() {
        let t = Tensor::<f64>::zeros(&[2, 4]);
        assert!(matches!(mlm_loss(&t, &[None, None]), Err(Error::Contract(_))));
        assert!(mlm_loss(&t, &[None]).is_err());
    }
}
