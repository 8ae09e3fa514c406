//! The inductive partial order on stop-time vectors used to define minimal
//! optimal tuples.
//!
//! `a ≺_d a'` holds when `min a < min a'`, or when the minima agree and every
//! coordinate attaining the minimum of `a'` also attains the minimum of `a`,
//! with the remaining coordinates ordered by `≺_{d-1}`. For `d = 1` it is `<=`.
//!
//! Quantifying over the minimal coordinates of `a'` makes `≺_2` the pair
//! order `min a < min a'`, or equal minima and `a <= a'` componentwise. With
//! the quantifier on `a` instead, `(0,0)` would not precede `(0,1)`.

use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TupleOrder {
    Less,
    Greater,
    Equal,
    Incomparable,
}

impl TupleOrder {
    /// `a ≺_d b` (including equality).
    pub fn is_le(self) -> bool {
        matches!(self, TupleOrder::Less | TupleOrder::Equal)
    }
}

/// `a ≺_d b` test.
pub fn precedes(a: &[usize], b: &[usize]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    if a.len() == 1 {
        return a[0] <= b[0];
    }
    let min_a = *a.iter().min().expect("non-empty");
    let min_b = *b.iter().min().expect("non-empty");
    match min_a.cmp(&min_b) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => (0..a.len()).filter(|&i| b[i] == min_b).all(|i| {
            a[i] == min_a && precedes(&without(a, i), &without(b, i))
        }),
    }
}

fn without(v: &[usize], i: usize) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, &x)| x)
        .collect()
}

pub fn tuple_order_compare(a: &[usize], b: &[usize]) -> Result<TupleOrder> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("tuple order needs d >= 1".into()));
    }
    if a == b {
        return Ok(TupleOrder::Equal);
    }
    Ok(match (precedes(a, b), precedes(b, a)) {
        (true, false) => TupleOrder::Less,
        (false, true) => TupleOrder::Greater,
        (false, false) => TupleOrder::Incomparable,
        // Antisymmetry: both directions imply a == b, handled above.
        (true, true) => TupleOrder::Equal,
    })
}

/// Greatest lower bound of two pairs under `≺`.
pub fn pair_infimum(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let (ma, mb) = (a.0.min(a.1), b.0.min(b.1));
    match ma.cmp(&mb) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => (a.0.min(b.0), a.1.min(b.1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_vectors(d: usize, max: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..d {
            out = out
                .into_iter()
                .flat_map(|v| {
                    (0..=max).map(move |x| {
                        let mut w = v.clone();
                        w.push(x);
                        w
                    })
                })
                .collect();
        }
        out
    }

    /// Independent 2-d form: (a∧b < a'∧b') or (a∧b = a'∧b' and a<=a' and b<=b').
    fn pair_prec(a: &[usize], b: &[usize]) -> bool {
        let (ma, mb) = (a[0].min(a[1]), b[0].min(b[1]));
        ma < mb || (ma == mb && a[0] <= b[0] && a[1] <= b[1])
    }

    #[test]
    fn documented_examples() {
        assert_eq!(tuple_order_compare(&[1, 3], &[2, 3]).unwrap(), TupleOrder::Less);
        assert_eq!(tuple_order_compare(&[2, 2, 2], &[2, 2, 2]).unwrap(), TupleOrder::Equal);
        assert_eq!(tuple_order_compare(&[1, 2], &[2, 1]).unwrap(), TupleOrder::Incomparable);
        assert!(tuple_order_compare(&[1], &[1, 2]).is_err());
        assert_eq!(tuple_order_compare(&[3], &[1]).unwrap(), TupleOrder::Greater);
    }

    #[test]
    fn two_dimensional_case_matches_pair_order() {
        for a in all_vectors(2, 3) {
            for b in all_vectors(2, 3) {
                assert_eq!(precedes(&a, &b), pair_prec(&a, &b), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn partial_order_axioms() {
        for d in 1..=3 {
            let vs = all_vectors(d, 2);
            for a in &vs {
                assert_eq!(tuple_order_compare(a, a).unwrap(), TupleOrder::Equal);
                for b in &vs {
                    let ab = tuple_order_compare(a, b).unwrap();
                    let ba = tuple_order_compare(b, a).unwrap();
                    let flipped = match ab {
                        TupleOrder::Less => TupleOrder::Greater,
                        TupleOrder::Greater => TupleOrder::Less,
                        other => other,
                    };
                    assert_eq!(ba, flipped);
                    if precedes(a, b) && precedes(b, a) {
                        assert_eq!(a, b);
                    }
                    for c in &vs {
                        if precedes(a, b) && precedes(b, c) {
                            assert!(precedes(a, c), "{a:?} {b:?} {c:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn infimum_is_a_lower_bound() {
        for a in all_vectors(2, 3) {
            for b in all_vectors(2, 3) {
                let inf = pair_infimum((a[0], a[1]), (b[0], b[1]));
                let inf = [inf.0, inf.1];
                assert!(precedes(&inf, &a) && precedes(&inf, &b));
            }
        }
    }
}
