use rand::Rng;

use super::config::TrainingConfig;
use crate::encoder::InputBatch;
use crate::tokenizer::Vocabulary;

/// An input batch after MLM corruption.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedBatch {
    /// Corrupted ids, attention mask and types.
    pub input: InputBatch,
    /// Original id at each selected position, `None` elsewhere.
    pub labels: Vec<Option<u32>>,
    pub corrupted: usize,
    /// Sequences that had no maskable token.
    pub skipped: usize,
}

impl MaskedBatch {
    /// Flat indices of labelled positions with their labels.
    pub fn targets(&self) -> Vec<(usize, u32)> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
            .collect()
    }
}

/// Selects each real non-special position with probability `mask_prob`;
/// a selected position becomes `[MASK]`, a uniformly random regular token,
/// or is left unchanged according to `mask_split`.
pub fn mlm_corrupt<R: Rng + ?Sized>(input: &InputBatch, vocab: &Vocabulary, cfg: &TrainingConfig, rng: &mut R) -> MaskedBatch {
    let regular = vocab.regular_ids();
    let mut out = input.clone();
    let mut labels = vec![None; input.ids.len()];
    let mut corrupted = 0;
    let mut skipped = 0;
    let [p_mask, p_random, _] = cfg.mask_split;
    for s in 0..input.batch {
        let span = s * input.seq_len..(s + 1) * input.seq_len;
        let maskable: Vec<usize> = span
            .filter(|&i| input.attention_mask[i] != 0 && !vocab.is_special(input.ids[i]))
            .collect();
        if maskable.is_empty() {
            skipped += 1;
            continue;
        }
        for i in maskable {
            if !rng.random_bool(cfg.mask_prob) {
                continue;
            }
            labels[i] = Some(input.ids[i]);
            corrupted += 1;
            let r: f64 = rng.random();
            if r < p_mask {
                out.ids[i] = vocab.mask_id();
            } else if r < p_mask + p_random && !regular.is_empty() {
                out.ids[i] = regular[rng.random_range(0..regular.len())];
            }
        }
    }
    MaskedBatch {
        input: out,
        labels,
        corrupted,
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tokenizer::{Encoding, NormalizerConfig, Tokenizer};

    fn vocab() -> Vocabulary {
        Vocabulary::with_specials((0..20).map(|i| format!("t{i}"))).unwrap()
    }

    fn input(rows: &[Vec<u32>]) -> InputBatch {
        let encs: Vec<Encoding> = rows
            .iter()
            .map(|ids| Encoding {
                ids: ids.clone(),
                attention_mask: vec![1; ids.len()],
                type_ids: vec![0; ids.len()],
                word_ids: vec![None; ids.len()],
            })
            .collect();
        InputBatch::from_encodings(&encs).unwrap()
    }

    #[test]
    fn zero_probability_selects_nothing() {
        let cfg = TrainingConfig {
            mask_prob: 0.0,
            ..Default::default()
        };
        let b = input(&[vec![2, 5, 6, 7, 3]]);
        let m = mlm_corrupt(&b, &vocab(), &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(m.corrupted, 0);
        assert!(m.targets().is_empty());
        assert_eq!(m.input, b);
    }

    #[test]
    fn full_probability_masks_every_regular_token() {
        let cfg = TrainingConfig {
            mask_prob: 1.0,
            mask_split: [1.0, 0.0, 0.0],
            ..Default::default()
        };
        let b = input(&[vec![2, 5, 6, 7, 3], vec![2, 8, 3]]);
        let m = mlm_corrupt(&b, &vocab(), &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(m.input.ids, vec![2, 4, 4, 4, 3, 2, 4, 3, 0, 0]);
        assert_eq!(m.corrupted, 4);
        assert_eq!(m.labels[1], Some(5));
        assert_eq!(m.labels[8], None);
    }

    #[test]
    fn corrupted_fraction_concentrates() {
        let v = vocab();
        let tok = Tokenizer::new(v.clone(), NormalizerConfig::default());
        // 100 sequences of 100 regular tokens = 10,000 maskable tokens
        let text: String = (0..100).map(|i| format!("t{} ", i % 20)).collect();
        let enc = tok.encode(&text, 102, false).unwrap();
        let b = InputBatch::from_encodings(&vec![enc; 100]).unwrap();
        let m = mlm_corrupt(&b, &v, &TrainingConfig::default(), &mut ChaCha8Rng::seed_from_u64(42));
        let frac = m.corrupted as f64 / 10_000.0;
        assert!((0.13..=0.17).contains(&frac), "{frac}");
    }

    #[test]
    fn sequences_without_regular_tokens_are_skipped() {
        let b = input(&[vec![2, 3], vec![2, 5, 3]]);
        let m = mlm_corrupt(&b, &vocab(), &TrainingConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(m.skipped, 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let b = input(&[vec![2, 5, 6, 7, 8, 9, 10, 11, 3]]);
        let cfg = TrainingConfig {
            mask_prob: 0.5,
            ..Default::default()
        };
        let a = mlm_corrupt(&b, &vocab(), &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let c = mlm_corrupt(&b, &vocab(), &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, c);
    }

    proptest! {
        #[test]
        fn specials_never_corrupted(
            rows in prop::collection::vec(prop::collection::vec(0u32..25, 1..12), 1..6),
            seed in any::<u64>(),
            p in 0.0f64..=1.0,
        ) {
            let v = vocab();
            let b = input(&rows);
            let cfg = TrainingConfig { mask_prob: p, ..Default::default() };
            let m = mlm_corrupt(&b, &v, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            for i in 0..b.ids.len() {
                let special = v.is_special(b.ids[i]) || b.attention_mask[i] == 0;
                if special {
                    prop_assert_eq!(m.input.ids[i], b.ids[i]);
                    prop_assert!(m.labels[i].is_none());
                }
                match m.labels[i] {
                    Some(l) => prop_assert_eq!(l, b.ids[i]),
                    None => prop_assert_eq!(m.input.ids[i], b.ids[i]),
                }
            }
            prop_assert_eq!(m.corrupted, m.labels.iter().filter(|l| l.is_some()).count());
        }
    }
}
