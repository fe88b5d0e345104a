//! Non-dominated filtering of bi-objective samples and the knee point.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoResult {
    /// Sample indices on the front, ascending.
    pub front: Vec<usize>,
    pub dominated: Vec<usize>,
    /// Sample index of the knee, a member of `front`.
    pub knee: Option<usize>,
}

/// `a` dominates `b` when it is no worse in both losses and better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

pub fn pareto_front(losses: &[(f64, f64)]) -> ParetoResult {
    // Sweep in (loss1, loss2) order: a sample is dominated iff an earlier,
    // different sample has loss2 no larger than its own.
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| {
        losses[a]
            .0
            .total_cmp(&losses[b].0)
            .then(losses[a].1.total_cmp(&losses[b].1))
            .then(a.cmp(&b))
    });
    let mut on_front = vec![false; losses.len()];
    let mut best2 = f64::INFINITY;
    let mut k = 0;
    while k < order.len() {
        let l = losses[order[k]];
        let mut end = k;
        while end < order.len() && losses[order[end]] == l {
            end += 1;
        }
        for &i in &order[k..end] {
            on_front[i] = best2 > l.1;
        }
        best2 = best2.min(l.1);
        k = end;
    }
    let front: Vec<usize> = (0..losses.len()).filter(|&i| on_front[i]).collect();
    let dominated = (0..losses.len()).filter(|&i| !on_front[i]).collect();
    let knee = knee_point(losses, &front);
    ParetoResult { front, dominated, knee }
}

/// Front member farthest from the chord joining the two extreme front points,
/// measured after min-max normalizing each loss over the front. Distances
/// below 1e-12 count as zero.
fn knee_point(losses: &[(f64, f64)], front: &[usize]) -> Option<usize> {
    if front.len() < 3 {
        return None;
    }
    let range = |f: fn(&(f64, f64)) -> f64| {
        let vals = front.iter().map(|&i| f(&losses[i]));
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (lo1, s1) = range(|p| p.0);
    let (lo2, s2) = range(|p| p.1);
    let norm = |i: usize| ((losses[i].0 - lo1) / s1, (losses[i].1 - lo2) / s2);
    let first = *front
        .iter()
        .min_by(|&&a, &&b| norm(a).0.total_cmp(&norm(b).0).then(norm(a).1.total_cmp(&norm(b).1)))?;
    let last = *front
        .iter()
        .max_by(|&&a, &&b| norm(a).0.total_cmp(&norm(b).0).then(norm(b).1.total_cmp(&norm(a).1)))?;
    let (a, b) = (norm(first), norm(last));
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    for &i in front {
        let p = norm(i);
        let dist = (dx * (a.1 - p.1) - dy * (a.0 - p.0)).abs() / len;
        if best.is_none_or(|(d, _)| dist > d) {
            best = Some((dist, i));
        }
    }
    best.filter(|(d, _)| *d > 1e-12).map(|(_, i)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(losses: &[(f64, f64)]) -> Vec<usize> {
        (0..losses.len())
            .filter(|&i| !(0..losses.len()).any(|j| dominates(losses[j], losses[i])))
            .collect()
    }

    #[test]
    fn hand_example() {
        let r = pareto_front(&[(0.2, 0.8), (0.8, 0.2), (0.5, 0.5), (0.6, 0.6)]);
        assert_eq!(r.front, vec![0, 1, 2]);
        assert_eq!(r.dominated, vec![3]);
        // The three front points are collinear, so there is no knee.
        assert_eq!(r.knee, None);
        let r = pareto_front(&[(0.0, 1.0), (1.0, 0.0), (0.1, 0.1), (0.5, 0.6)]);
        assert_eq!((r.front, r.knee), (vec![0, 1, 2], Some(2)));
    }

    #[test]
    fn single_and_duplicates() {
        let r = pareto_front(&[(0.3, 0.3)]);
        assert_eq!((r.front, r.knee), (vec![0], None));
        let r = pareto_front(&[(0.3, 0.3), (0.3, 0.3), (0.4, 0.4)]);
        assert_eq!(r.front, vec![0, 1]);
        let r = pareto_front(&[(0.3, 0.5), (0.3, 0.4)]);
        assert_eq!(r.front, vec![1]);
    }

    #[test]
    fn collinear_front_has_no_knee() {
        let r = pareto_front(&[(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]);
        assert_eq!(r.front.len(), 3);
        assert_eq!(r.knee, None);
    }

    proptest! {
        #[test]
        fn matches_brute_force(pts in prop::collection::vec((0u8..20, 0u8..20), 1..80)) {
            let losses: Vec<(f64, f64)> = pts.iter().map(|&(a, b)| (a as f64 / 20.0, b as f64 / 20.0)).collect();
            let r = pareto_front(&losses);
            prop_assert_eq!(&r.front, &brute(&losses));
            for &d in &r.dominated {
                prop_assert!(r.front.iter().any(|&f| dominates(losses[f], losses[d])));
            }
        }

        #[test]
        fn knee_affine_invariant(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..60),
                                 a in 0.1..10.0f64, b in -5.0..5.0f64, c in 0.1..10.0f64, d in -5.0..5.0f64) {
            let losses: Vec<(f64, f64)> = pts.clone();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (a * x + b, c * y + d)).collect();
            let r1 = pareto_front(&losses);
            let r2 = pareto_front(&scaled);
            prop_assert_eq!(&r1.front, &r2.front);
            prop_assert_eq!(r1.knee, r2.knee);
        }
    }
}
