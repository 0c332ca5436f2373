use crate::prep::Dataset;
use crate::{Error, Result};

/// Variance floor per feature: `1e-9 * (variance over all rows + 1)`.
const VAR_FLOOR: f64 = 1e-9;

/// Gaussian Naive Bayes with per-class priors, means and variances.
#[derive(Debug, Clone, PartialEq)]
pub struct GnbModel {
    pub classes: Vec<String>,
    pub log_priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

pub fn gnb_train(data: &Dataset) -> Result<GnbModel> {
    let d = data.n_features();
    let counts = data.class_counts();
    let n = data.n_rows() as f64;
    let nc = counts.len();
    let mut means = vec![vec![0.0; d]; nc];
    let mut vars = vec![vec![0.0; d]; nc];
    if data.n_rows() == 0 {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    for (r, &l) in data.rows().iter().zip(data.labels()) {
        for (m, v) in means[l].iter_mut().zip(r) {
            *m += v;
        }
    }
    for c in 0..nc {
        if counts[c] > 0 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
    }
    for (r, &l) in data.rows().iter().zip(data.labels()) {
        for f in 0..d {
            let e = r[f] - means[l][f];
            vars[l][f] += e * e;
        }
    }
    let floors: Vec<f64> = (0..d)
        .map(|f| {
            let col = data.column(f);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            VAR_FLOOR * (var + 1.0)
        })
        .collect();
    for c in 0..nc {
        if counts[c] > 0 {
            for (v, fl) in vars[c].iter_mut().zip(&floors) {
                *v = (*v / counts[c] as f64).max(*fl);
            }
        } else {
            vars[c].clone_from(&floors);
        }
    }
    let log_priors = counts
        .iter()
        .map(|&c| {
            if c == 0 {
                f64::NEG_INFINITY
            } else {
                (c as f64 / n).ln()
            }
        })
        .collect();
    Ok(GnbModel {
        classes: data.classes().to_vec(),
        log_priors,
        means,
        vars,
    })
}

/// Most probable class and the normalized posterior over all classes.
pub fn gnb_predict(model: &GnbModel, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    let d = model.means.first().map_or(0, Vec::len);
    if x.len() != d {
        return Err(Error::Mismatch {
            expected: d,
            actual: x.len(),
        });
    }
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let log_post: Vec<f64> = (0..model.classes.len())
        .map(|c| {
            if model.log_priors[c] == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            model.log_priors[c]
                + x.iter()
                    .zip(&model.means[c])
                    .zip(&model.vars[c])
                    .map(|((&v, &m), &s2)| -0.5 * (ln2pi + s2.ln() + (v - m) * (v - m) / s2))
                    .sum::<f64>()
        })
        .collect();
    let mut best = 0;
    for c in 1..log_post.len() {
        if log_post[c] > log_post[best] {
            best = c;
        }
    }
    let top = log_post[best];
    let mut post: Vec<f64> = log_post.iter().map(|&l| (l - top).exp()).collect();
    let z: f64 = post.iter().sum();
    post.iter_mut().for_each(|p| *p /= z);
    Ok((best, post))
}
