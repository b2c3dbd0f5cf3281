use bsb_core::autograd::Tape;
use bsb_core::pretrain::mlm_loss;
use bsb_core::tensor::Tensor;
use proptest::prelude::*;

/// Scalar loop: −log(exp(z_y) / Σ exp(z_j)) averaged over labelled rows.
fn oracle(logits: &[f64], v: usize, labels: &[Option<u32>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0.0;
    for (r, label) in labels.iter().enumerate() {
        if let Some(y) = label {
            let row = &logits[r * v..(r + 1) * v];
            let mut z = 0.0;
            for &x in row {
                z += x.exp();
            }
            total += -(row[*y as usize].exp() / z).ln();
            n += 1.0;
        }
    }
    total / n
}

proptest! {
    #[test]
    fn matches_scalar_oracle_on_2x4x16(
        data in prop::collection::vec(-4.0f64..4.0, 2 * 4 * 16),
        raw_labels in prop::collection::vec(prop::option::of(0u32..16), 8),
        forced in 0usize..8,
    ) {
        let mut labels = raw_labels;
        if labels.iter().all(Option::is_none) {
            labels[forced] = Some(forced as u32);
        }
        let t = Tensor::new(vec![2, 4, 16], data.clone()).unwrap();
        let got = mlm_loss(&t, &labels).unwrap();
        prop_assert!((got - oracle(&data, 16, &labels)).abs() <= 1e-10);

        // the differentiable path agrees too
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![8, 16], data).unwrap());
        let ls: Vec<Option<usize>> = labels.iter().map(|l| l.map(|y| y as usize)).collect();
        let loss = tape.cross_entropy(x, &ls).unwrap();
        prop_assert!((tape.value(loss).data()[0] - got).abs() <= 1e-12);
    }
}

#[test]
fn uniform_logits_equal_ln_v() {
    for v in [2usize, 16, 100, 32_000] {
        let t = Tensor::<f64>::full(&[3, v], -1.7);
        let l = mlm_loss(&t, &[Some(0), None, Some(v as u32 - 1)]).unwrap();
        assert!((l - (v as f64).ln()).abs() <= 1e-12, "{v}: {l}");
    }
}
