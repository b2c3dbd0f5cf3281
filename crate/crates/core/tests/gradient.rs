mod common;

use bsb_core::autograd::Tape;
use bsb_core::tensor::{GeluKind, Tensor};
use proptest::prelude::*;

#[test]
fn toy_encoder_gradients_match_finite_differences() {
    let r = common::gradient_check();
    assert!(r.worst_relative <= 1e-4, "{r:?}");
    let (cfg, p, _) = common::gradient_toy();
    assert_eq!(r.checked as u64, cfg.count_parameters());
    assert_eq!(p.total_elements(), cfg.count_parameters());
}

fn numeric_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// A small graph whose op sequence is chosen by `ops`, ending in a scalar.
fn graph(tape: &mut Tape, x: bsb_core::autograd::Var, w: bsb_core::autograd::Var, ops: &[u8]) -> bsb_core::autograd::Var {
    let mut h = x;
    for &op in ops {
        h = match op % 6 {
            0 => tape.matmul(h, w).unwrap(),
            1 => tape.gelu(h, GeluKind::Exact).unwrap(),
            2 => tape.softmax(h, 1).unwrap(),
            3 => tape.mul(h, h).unwrap(),
            4 => tape.scale(h, 0.7).unwrap(),
            _ => tape.add(h, x).unwrap(),
        };
    }
    let s = tape.mul(h, h).unwrap();
    tape.sum(s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn random_graphs_match_finite_differences(
        xs in prop::collection::vec(-1.0f64..1.0, 9),
        ws in prop::collection::vec(-0.8f64..0.8, 9),
        ops in prop::collection::vec(any::<u8>(), 1..6),
    ) {
        let run = |xv: &[f64]| {
            let mut tape = Tape::inference();
            let x = tape.constant(Tensor::new(vec![3, 3], xv.to_vec()).unwrap());
            let w = tape.constant(Tensor::new(vec![3, 3], ws.clone()).unwrap());
            let out = graph(&mut tape, x, w, &ops);
            tape.value(out).data()[0]
        };
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![3, 3], xs.clone()).unwrap());
        let w = tape.constant(Tensor::new(vec![3, 3], ws.clone()).unwrap());
        let out = graph(&mut tape, x, w, &ops);
        let g = tape.backward(out).unwrap();
        let analytic = g.get_or_zeros(x, &[3, 3]);
        let numeric = numeric_grad(&run, &xs);
        for (a, n) in analytic.data().iter().zip(&numeric) {
            prop_assert!((a - n).abs() <= 1e-5 * (1.0 + a.abs().max(n.abs())), "{a} vs {n}");
        }
    }
}
