//! Binomial coefficients, colexicographic ranking and subset enumeration.

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::One;

/// `C(n, k)` with the convention `C(n, k) = 0` for `k < 0`, `k > n` or
/// `n < 0`.
///
/// Panics if the value does not fit in a `u128`.
pub fn binomial(n: i64, k: i64) -> u128 {
    if n < 0 || k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 1..=k {
        // acc * (n - k + i) is divisible by i after the multiplication
        acc = acc.checked_mul(n - k + i).expect("binomial coefficient overflows u128") / i;
    }
    acc
}

/// Arbitrary precision `C(n, k)`, same conventions as [`binomial`].
pub fn binomial_big(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::default();
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc *= n - k + i;
        acc /= i;
    }
    acc
}

/// `C(n, k)` as a `u64`; `None` on overflow.
pub fn binomial_u64(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul(n - k + i)? / i;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Colexicographic rank of a strictly increasing vertex list:
/// `sum_i C(v_i, i + 1)`.
pub fn rank_colex(sorted: &[usize]) -> u64 {
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| binomial(v as i64, i as i64 + 1) as u64)
        .sum()
}

/// Inverse of [`rank_colex`] for subsets of size `k`.
pub fn unrank_colex(mut rank: u64, k: usize) -> Vec<usize> {
    let mut out = alloc::vec![0usize; k];
    for i in (0..k).rev() {
        // largest v with C(v, i + 1) <= rank
        let idx = i as i64 + 1;
        let mut v = i;
        while binomial(v as i64 + 1, idx) as u64 <= rank {
            v += 1;
        }
        rank -= binomial(v as i64, idx) as u64;
        out[i] = v;
    }
    out
}

/// Calls `f` with every `k`-subset of `items`, in lexicographic order of
/// positions. The slice handed to `f` is reused between calls.
pub fn for_each_subset<F: FnMut(&[usize])>(items: &[usize], k: usize, mut f: F) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
    loop {
        f(&buf);
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        buf[i] = items[idx[i]];
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
            buf[j] = items[idx[j]];
        }
    }
}

/// Merges two sorted, disjoint vertex lists.
pub fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Size of the intersection of two sorted lists.
pub fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// `true` if sorted `small` is contained in sorted `big`.
pub fn is_subset(small: &[usize], big: &[usize]) -> bool {
    intersection_size(small, big) == small.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn binomial_conventions() {
        assert_eq!(binomial(6, -1), 0);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial_big(30, 15), BigUint::from(155_117_520u64));
        assert_eq!(binomial_u64(60, 30), Some(118_264_581_564_861_424));
        assert_eq!(binomial_u64(70, 35), None);
    }

    #[test]
    fn colex_rank_small_cases() {
        assert_eq!(rank_colex(&[0, 1, 2]), 0);
        // colex order of 3-subsets: 012, 013, 023, 123, 014, ...
        assert_eq!(rank_colex(&[0, 1, 3]), 1);
        assert_eq!(rank_colex(&[0, 2, 3]), 2);
        assert_eq!(rank_colex(&[1, 2, 3]), 3);
        assert_eq!(rank_colex(&[7, 8, 9]), binomial(10, 3) as u64 - 1);
    }

    #[test]
    fn rank_unrank_exhaustive() {
        for n in 1..=20usize {
            for k in 1..=5.min(n) {
                let items: Vec<usize> = (0..n).collect();
                let mut seen = Vec::new();
                for_each_subset(&items, k, |s| {
                    let r = rank_colex(s);
                    assert_eq!(unrank_colex(r, k), s);
                    seen.push(r);
                });
                seen.sort_unstable();
                let expect: Vec<u64> = (0..binomial(n as i64, k as i64) as u64).collect();
                assert_eq!(seen, expect);
            }
        }
    }

    #[test]
    fn subset_helpers() {
        assert_eq!(merge_sorted(&[1, 4], &[2, 3, 9]), vec![1, 2, 3, 4, 9]);
        assert_eq!(intersection_size(&[1, 2, 5], &[2, 5, 7]), 2);
        assert!(is_subset(&[2, 5], &[1, 2, 5]));
        let mut count = 0;
        for_each_subset(&[3, 4, 5], 0, |s| {
            assert!(s.is_empty());
            count += 1;
        });
        assert_eq!(count, 1);
    }
}
