use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::BinaryPattern;

use super::BinaryDataset;

/// Every `D × D` image whose rows are each all-on or all-off, together with
/// its 90° rotation (columns), flattened row-major and deduplicated. The
/// all-off and all-on images occur in both families, so `D = 3` yields
/// `2 · 2³ - 2 = 14` patterns.
pub fn gen_bars_stripes(d: usize) -> Result<BinaryDataset> {
    if d == 0 || d > 20 {
        return Err(Error::invalid("bars & stripes size", format!("need 1 <= D <= 20, got {d}")));
    }
    let mut seen = BTreeSet::new();
    let mut patterns = Vec::new();
    for assignment in 0..1u32 << d {
        let on = |line: usize| ((assignment >> line) & 1) as u8;
        let rows: Vec<u8> = (0..d * d).map(|p| on(p / d)).collect();
        let cols: Vec<u8> = (0..d * d).map(|p| on(p % d)).collect();
        for bits in [rows, cols] {
            if seen.insert(bits.clone()) {
                patterns.push(BinaryPattern::new(bits)?);
            }
        }
    }
    BinaryDataset::new(format!("bars-stripes-{d}"), d * d, patterns)
}

/// The `N` cyclic shifts of a bar of `B` consecutive ones.
pub fn gen_shifting_bar(n: usize, b: usize) -> Result<BinaryDataset> {
    if b == 0 || b >= n {
        return Err(Error::invalid("shifting bar", format!("need 1 <= B < N, got N={n}, B={b}")));
    }
    let patterns = (0..n)
        .map(|start| {
            let mut bits = vec![0u8; n];
            for k in 0..b {
                bits[(start + k) % n] = 1;
            }
            BinaryPattern::new(bits)
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryDataset::new(format!("shifting-bar-{n}-{b}"), n, patterns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn as_set(d: &BinaryDataset) -> BTreeSet<Vec<u8>> {
        d.patterns().iter().map(|p| p.as_slice().to_vec()).collect()
    }

    #[test]
    fn bars_stripes_counts() {
        assert_eq!(gen_bars_stripes(3).unwrap().len(), 14);
        assert_eq!(gen_bars_stripes(1).unwrap().len(), 2);
        assert!(gen_bars_stripes(0).is_err());
    }

    #[test]
    fn bars_stripes_two_matches_set_union() {
        // all-bars ∪ all-stripes, written out independently
        let mut expect = BTreeSet::new();
        for r0 in 0..2u8 {
            for r1 in 0..2u8 {
                expect.insert(vec![r0, r0, r1, r1]);
                expect.insert(vec![r0, r1, r0, r1]);
            }
        }
        assert_eq!(as_set(&gen_bars_stripes(2).unwrap()), expect);
        assert_eq!(expect.len(), 6);
    }

    #[test]
    fn bars_stripes_closed_under_rotation() {
        for d in 1..=5 {
            let ds = gen_bars_stripes(d).unwrap();
            let set = as_set(&ds);
            assert_eq!(set.len(), ds.len(), "duplicates for D={d}");
            for p in &set {
                // rotate 90° clockwise: new[r][c] = old[d-1-c][r]
                let rot: Vec<u8> = (0..d * d).map(|k| p[(d - 1 - k % d) * d + k / d]).collect();
                assert!(set.contains(&rot));
            }
        }
    }

    #[test]
    fn shifting_bar_examples() {
        assert_eq!(gen_shifting_bar(9, 1).unwrap().len(), 9);
        let got = as_set(&gen_shifting_bar(4, 2).unwrap());
        let want: BTreeSet<Vec<u8>> = [[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 1]]
            .iter()
            .map(|r| r.to_vec())
            .collect();
        assert_eq!(got, want);
        assert!(gen_shifting_bar(4, 4).is_err());
        assert!(gen_shifting_bar(4, 0).is_err());
    }

    proptest! {
        #[test]
        fn shifting_bar_patterns_are_contiguous_and_distinct(n in 2usize..40, frac in 0.0f64..1.0) {
            let b = 1 + ((n - 1) as f64 * frac) as usize % (n - 1);
            let ds = gen_shifting_bar(n, b).unwrap();
            prop_assert_eq!(as_set(&ds).len(), n);
            for p in ds.patterns() {
                let bits = p.as_slice();
                prop_assert_eq!(p.count_ones(), b);
                // exactly one 0 -> 1 transition going around the ring
                let rises = (0..n).filter(|&k| bits[k] == 1 && bits[(k + n - 1) % n] == 0).count();
                prop_assert_eq!(rises, 1);
            }
        }
    }
}
