use crate::prep::Dataset;
use crate::util::sq_dist;
use crate::{Error, Result};

/// Lazy K-nearest-neighbour model: the training set and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    train: Dataset,
    k: usize,
}

impl KnnModel {
    pub fn new(train: Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if train.n_rows() < k {
            return Err(Error::param(
                "k",
                format!("{k} exceeds the {} training rows", train.n_rows()),
            ));
        }
        Ok(Self { train, k })
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Majority label among the `k` nearest training rows (Euclidean). Equal
/// distances are ordered by row index; tied votes go to the class with the
/// smaller mean neighbour distance, then to the lower class index.
pub fn knn_predict(train: &Dataset, x: &[f64], k: usize) -> Result<usize> {
    if k == 0 || k > train.n_rows() {
        return Err(Error::param("k", format!("must be in 1..={}", train.n_rows())));
    }
    if x.len() != train.n_features() {
        return Err(Error::Mismatch {
            expected: train.n_features(),
            actual: x.len(),
        });
    }
    let mut d: Vec<(f64, usize)> = train
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| (sq_dist(r, x), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    let nc = train.classes().len();
    let mut votes = vec![0usize; nc];
    let mut dist = vec![0.0f64; nc];
    for &(sq, i) in &d {
        let c = train.label(i);
        votes[c] += 1;
        dist[c] += sq.sqrt();
    }
    let mean = |c: usize| dist[c] / votes[c] as f64;
    let mut best = None::<usize>;
    for c in (0..nc).filter(|&c| votes[c] > 0) {
        best = match best {
            None => Some(c),
            Some(b) if votes[c] > votes[b] || (votes[c] == votes[b] && mean(c) < mean(b)) => {
                Some(c)
            }
            keep => keep,
        };
    }
    Ok(best.expect("k >= 1 neighbours"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, &str)]) -> Dataset {
        let rows = points.iter().map(|p| vec![p.0]).collect();
        let labels: Vec<&str> = points.iter().map(|p| p.1).collect();
        Dataset::new(vec!["x".into()], rows, &labels).unwrap()
    }

    #[test]
    fn nearest_neighbour() {
        let d = line(&[(0.0, "a"), (10.0, "b")]);
        assert_eq!(knn_predict(&d, &[2.0], 1).unwrap(), 0);
        assert_eq!(knn_predict(&d, &[8.0], 1).unwrap(), 1);
    }

    #[test]
    fn vote_tie_uses_mean_distance() {
        let d = line(&[(1.0, "a"), (-3.0, "a"), (2.0, "b"), (-2.0, "b")]);
        // a: 1 and 3, b: 2 and 2 -> both mean 2; falls to class order
        assert_eq!(knn_predict(&d, &[0.0], 4).unwrap(), 0);
        let d = line(&[(1.0, "a"), (-4.0, "a"), (2.0, "b"), (-2.0, "b")]);
        assert_eq!(knn_predict(&d, &[0.0], 4).unwrap(), 1);
    }

    #[test]
    fn equal_distance_prefers_earlier_row() {
        let d = line(&[(1.0, "b"), (-1.0, "a")]);
        assert_eq!(knn_predict(&d, &[0.0], 1).unwrap(), 1);
    }

    #[test]
    fn bad_k() {
        let d = line(&[(0.0, "a")]);
        assert!(KnnModel::new(d.clone(), 0).is_err());
        assert!(KnnModel::new(d.clone(), 2).is_err());
        assert!(knn_predict(&d, &[0.0, 1.0], 1).is_err());
    }
}
