//! Conditioning-set enumeration.

use itertools::Itertools;

/// Size-`k` subsets of `items` in lexicographic order of positions.
pub(crate) fn of_size(items: &[usize], k: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    items.iter().copied().combinations(k)
}

/// Subsets of `items` that contain `c`, with `1 ≤ |S| ≤ max_size`, each
/// sorted ascending. `items` must contain `c`.
pub(crate) fn containing(items: &[usize], c: usize, max_size: usize) -> Vec<Vec<usize>> {
    let rest: Vec<usize> = items.iter().copied().filter(|&v| v != c).collect();
    let mut out = Vec::new();
    for k in 0..max_size.min(rest.len() + 1) {
        for mut s in rest.iter().copied().combinations(k) {
            s.push(c);
            s.sort_unstable();
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let v: Vec<_> = of_size(&[3, 1, 2], 2).collect();
        assert_eq!(v, vec![vec![3, 1], vec![3, 2], vec![1, 2]]);
        assert_eq!(of_size(&[1, 2], 0).count(), 1);
        assert_eq!(of_size(&[1, 2], 3).count(), 0);
    }

    #[test]
    fn containing_respects_cap() {
        assert_eq!(containing(&[5], 5, 2), vec![vec![5]]);
        assert_eq!(
            containing(&[1, 5, 7], 5, 2),
            vec![vec![5], vec![1, 5], vec![5, 7]]
        );
        assert_eq!(containing(&[1, 5, 7], 5, 3).len(), 4);
        assert!(containing(&[1, 5], 5, 0).is_empty());
    }
}
