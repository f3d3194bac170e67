use crate::error::{Error, Result};

/// Sizes of the chronological 4:1:1 train/validation/test partition.
///
/// `⌊4N/6⌋` train, `⌊N/6⌋` validation, the remainder test.
pub fn split_counts(n: usize) -> Result<(usize, usize, usize)> {
    if n < 6 {
        return Err(Error::InsufficientData(format!("need at least 6 samples to split 4:1:1, got {n}")));
    }
    let train = 4 * n / 6;
    let val = n / 6;
    Ok((train, val, n - train - val))
}

/// Splits samples (already ordered by anchor) without shuffling.
pub fn split_4_1_1<T>(samples: &[T]) -> Result<(&[T], &[T], &[T])> {
    let (train, val, _) = split_counts(samples.len())?;
    let (a, rest) = samples.split_at(train);
    let (b, c) = rest.split_at(val);
    Ok((a, b, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_sizes() {
        assert_eq!(split_counts(600).unwrap(), (400, 100, 100));
        assert_eq!(split_counts(6).unwrap(), (4, 1, 1));
        assert_eq!(split_counts(601).unwrap(), (400, 100, 101));
        assert!(split_counts(5).is_err());
    }

    proptest! {
        #[test]
        fn partitions_in_order(n in 6usize..5000) {
            let v: Vec<usize> = (0..n).collect();
            let (a, b, c) = split_4_1_1(&v).unwrap();
            prop_assert_eq!(a.len() + b.len() + c.len(), n);
            prop_assert!(a.last() < b.first() && b.last() < c.first());
        }
    }
}
