/// Pretraining sentences need at least this many whitespace-delimited words.
pub const MIN_SENTENCE_WORDS: usize = 5;
/// Inclusive character-length window for mask-prediction examples.
pub const MASK_EVAL_MIN_CHARS: usize = 150;
pub const MASK_EVAL_MAX_CHARS: usize = 512;

pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Keeps sentences with at least [`MIN_SENTENCE_WORDS`] words.
pub fn corpus_filter<I, S>(sentences: I) -> impl Iterator<Item = S>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    sentences
        .into_iter()
        .filter(|s| word_count(s.as_ref()) >= MIN_SENTENCE_WORDS)
}

/// Keeps examples whose character count lies in `lo..=hi`.
pub fn charlen_filter<I, S>(examples: I, lo: usize, hi: usize) -> impl Iterator<Item = S>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    assert!(lo <= hi, "charlen_filter bounds reversed: {lo} > {hi}");
    examples.into_iter().filter(move |s| {
        let n = s.as_ref().chars().count();
        lo <= n && n <= hi
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn five_word_threshold() {
        let input = ["bir iki üç dört", "bir iki üç dört beş", "", "  bir   iki üç dört beş altı "];
        let kept: Vec<_> = corpus_filter(input).collect();
        assert_eq!(kept, vec!["bir iki üç dört beş", "  bir   iki üç dört beş altı "]);
    }

    #[test]
    fn char_window_is_inclusive() {
        let mk = |n: usize| "ş".repeat(n);
        let input = vec![mk(149), mk(150), mk(512), mk(513)];
        let kept: Vec<_> = charlen_filter(input, MASK_EVAL_MIN_CHARS, MASK_EVAL_MAX_CHARS)
            .map(|s| s.chars().count())
            .collect();
        assert_eq!(kept, vec![150, 512]);
    }

    proptest! {
        #[test]
        fn filters_return_subsequences(lines in prop::collection::vec("[a-z ]{0,40}", 0..30)) {
            let kept: Vec<_> = corpus_filter(lines.iter()).collect();
            let mut it = lines.iter();
            for k in &kept {
                prop_assert!(it.any(|l| std::ptr::eq(l, *k)));
            }
            let kept: Vec<_> = charlen_filter(lines.iter(), 5, 20).collect();
            let mut it = lines.iter();
            for k in &kept {
                prop_assert!(it.any(|l| std::ptr::eq(l, *k)));
            }
        }
    }
}
