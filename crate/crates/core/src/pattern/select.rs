use crate::error::{Error, Result};

/// Relative slack when comparing a cumulative sum against `gamma`, so that
/// `gamma = 1` is reached despite rounding in the running sum.
const GAMMA_SLACK: f64 = 1e-12;

/// Indices sorted by descending score; equal scores keep the smaller index first.
pub fn argsort_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Smallest top-K set whose (normalized) mass reaches `gamma`.
///
/// Returned in descending-score order. Zero-mass entries are never selected,
/// and at least one index is always returned.
pub fn select_cumulative(scores: &[f64], gamma: f64) -> Result<Vec<usize>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if scores.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput("scores must be finite and nonnegative".into()));
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let target = gamma * (1.0 - GAMMA_SLACK);
    let mut selected = Vec::new();
    let mut mass = 0.0;
    for idx in argsort_descending(scores) {
        if scores[idx] == 0.0 {
            break;
        }
        selected.push(idx);
        mass += scores[idx] / total;
        if mass >= target {
            break;
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        assert_eq!(select_cumulative(&[0.5, 0.3, 0.1, 0.1], 0.9).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn full_mass_takes_all_nonzero() {
        let mut sel = select_cumulative(&[0.2, 0.0, 0.3, 0.5, 0.0], 1.0).unwrap();
        sel.sort();
        assert_eq!(sel, vec![0, 2, 3]);
    }

    #[test]
    fn unnormalized_input_and_ties() {
        assert_eq!(select_cumulative(&[1.0, 1.0, 1.0, 1.0], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(select_cumulative(&[3.0, 5.0], 0.1).unwrap(), vec![1]);
    }

    #[test]
    fn errors() {
        assert!(matches!(select_cumulative(&[0.0, 0.0], 0.5), Err(Error::EmptyDistribution)));
        assert!(select_cumulative(&[1.0], 0.0).is_err());
        assert!(select_cumulative(&[1.0], 1.5).is_err());
        assert!(select_cumulative(&[-1.0, 2.0], 0.5).is_err());
    }
}
