//! Size/latency Pareto fronts.
//!
//! A row is dominated when another row is no larger and no slower, and
//! strictly better in at least one of the two. Identical rows never dominate
//! each other, so duplicates survive together.

/// Indices of the non-dominated rows, in input order.
///
/// Sorts by size and sweeps once, tracking the best latency seen among
/// strictly smaller rows.
pub fn pareto_indices<T, F>(rows: &[T], coords: F) -> Vec<usize>
where
    F: Fn(&T) -> (f64, f64),
{
    let points: Vec<(f64, f64)> = rows.iter().map(&coords).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let mut keep = Vec::new();
    let mut best_smaller = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let size = points[order[i]].0;
        let group_end = i + order[i..].partition_point(|&j| points[j].0.total_cmp(&size).is_eq());
        // the group is sorted by latency, so its minimum comes first
        let group_min = points[order[i]].1;
        for &j in &order[i..group_end] {
            let latency = points[j].1;
            if latency.total_cmp(&group_min).is_eq() && latency < best_smaller {
                keep.push(j);
            }
        }
        best_smaller = best_smaller.min(group_min);
        i = group_end;
    }
    keep.sort_unstable();
    keep
}

/// The non-dominated rows, in input order.
pub fn pareto_front<T, F>(rows: &[T], coords: F) -> Vec<T>
where
    T: Clone,
    F: Fn(&T) -> (f64, f64),
{
    pareto_indices(rows, coords)
        .into_iter()
        .map(|i| rows[i].clone())
        .collect()
}

/// Exhaustive check: the first `(dominating, dominated)` pair, if any.
pub fn first_dominated_pair<T, F>(rows: &[T], coords: F) -> Option<(usize, usize)>
where
    F: Fn(&T) -> (f64, f64),
{
    let points: Vec<(f64, f64)> = rows.iter().map(coords).collect();
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1) {
                return Some((i, j));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(p: &(f64, f64)) -> (f64, f64) {
        *p
    }

    #[test]
    fn small_examples() {
        let rows = [(10.0, 5.0), (20.0, 3.0), (30.0, 4.0)];
        assert_eq!(pareto_front(&rows, id), vec![(10.0, 5.0), (20.0, 3.0)]);
        assert_eq!(pareto_front(&[(1.0, 1.0)], id), vec![(1.0, 1.0)]);
        let dup = [(5.0, 5.0), (5.0, 5.0), (5.0, 6.0), (6.0, 5.0)];
        assert_eq!(pareto_indices(&dup, id), vec![0, 1]);
        assert!(pareto_front::<(f64, f64), _>(&[], id).is_empty());
        assert_eq!(first_dominated_pair(&rows, id), Some((1, 2)));
    }

    proptest! {
        #[test]
        fn matches_exhaustive_definition(
            rows in prop::collection::vec((0u8..12, 0u8..12), 0..40),
        ) {
            let rows: Vec<(f64, f64)> = rows.into_iter().map(|(a, b)| (a as f64, b as f64)).collect();
            let kept = pareto_indices(&rows, id);
            let expected: Vec<usize> = (0..rows.len())
                .filter(|&j| !rows.iter().any(|a| {
                    let b = rows[j];
                    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
                }))
                .collect();
            prop_assert_eq!(&kept, &expected);
            let front: Vec<(f64, f64)> = kept.iter().map(|&i| rows[i]).collect();
            prop_assert_eq!(first_dominated_pair(&front, id), None);
        }
    }
}
