//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Criterion 11 needs the real leaf corpus; set
//! `LEAFSIGHT_CORPUS` to a directory with 5 disease classes to run it.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use leafsight_core::bovw::{classify_features, classify_health, image_features, train_health_gate, GateConfig};
use leafsight_core::classify::{
    cross_validate, kkt_residuals, ovo_train, smo_train, stratified_folds, svm_decision, KernelKind,
    KernelSpec, SmoParams, StandardizeMode, SvmLearner,
};
use leafsight_core::glcm::{build_glcm, marginal_stats, texture_features, GlcmOffset, QuantizedImage, TextureFeatures};
use leafsight_core::imaging::{to_grayscale, RgbImage};
use leafsight_core::metrics::ConfusionMatrix;
use leafsight_core::pipeline::{extract_image, run, PipelineConfig, RunOptions, Subcommand};
use leafsight_core::prep::{apply_standardizer, fit_standardizer, forward_select, relieff_rank, CvAccuracy, Dataset};
use leafsight_core::segmentation::{leaf_mask, otsu_threshold, BinaryMask, Histogram256, SegmentationParams};
use leafsight_core::synth::{checkered_leaf, fixture_corpus, healthy_leaf, write_corpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// 1. GLCM

fn naive_glcm(q: &[u8], mask: &[bool], w: usize, h: usize, ng: usize, offs: &[(i32, i32)], sym: bool) -> Vec<u64> {
    let mut c = vec![0u64; ng * ng];
    for &(dx, dy) in offs {
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let (x2, y2) = (x + dx, y + dy);
                if x2 < 0 || y2 < 0 || x2 >= w as i32 || y2 >= h as i32 {
                    continue;
                }
                let a = y as usize * w + x as usize;
                let b = y2 as usize * w + x2 as usize;
                if mask[a] && mask[b] {
                    c[q[a] as usize * ng + q[b] as usize] += 1;
                    if sym {
                        c[q[b] as usize * ng + q[a] as usize] += 1;
                    }
                }
            }
        }
    }
    c
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Every statistic evaluated straight from its definition over the cells
/// of the normalized matrix.
fn oracle_features(counts: &[u64], ng: usize) -> [f64; 22] {
    let total: u64 = counts.iter().sum();
    let p = |i: usize, j: usize| counts[i * ng + j] as f64 / total as f64;
    let cells: Vec<(f64, f64, f64)> = (0..ng)
        .flat_map(|i| (0..ng).map(move |j| (i, j)))
        .map(|(i, j)| (i as f64, j as f64, p(i, j)))
        .collect();
    let sum = |f: &dyn Fn(f64, f64, f64) -> f64| cells.iter().map(|&(i, j, p)| f(i, j, p)).sum::<f64>();
    let px: Vec<f64> = (0..ng).map(|i| (0..ng).map(|j| p(i, j)).sum()).collect();
    let py: Vec<f64> = (0..ng).map(|j| (0..ng).map(|i| p(i, j)).sum()).collect();
    let mu_x = sum(&|i, _, p| i * p);
    let mu_y = sum(&|_, j, p| j * p);
    let var_x = sum(&|i, _, p| (i - mu_x).powi(2) * p);
    let var_y = sum(&|_, j, p| (j - mu_y).powi(2) * p);
    let p_sum: Vec<f64> = (0..2 * ng - 1)
        .map(|k| cells.iter().filter(|c| (c.0 + c.1) as usize == k).map(|c| c.2).sum())
        .collect();
    let p_diff: Vec<f64> = (0..ng)
        .map(|k| cells.iter().filter(|c| (c.0 - c.1).abs() as usize == k).map(|c| c.2).sum())
        .collect();
    let sa = sum(&|i, j, p| (i + j) * p);
    let dm = sum(&|i, j, p| (i - j).abs() * p);
    let hxy = -sum(&|_, _, p| xlogx(p));
    let hx = -px.iter().map(|&v| xlogx(v)).sum::<f64>();
    let hy = -py.iter().map(|&v| xlogx(v)).sum::<f64>();
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            let pp = px[i] * py[j];
            if pp > 0.0 {
                hxy1 -= p(i, j) * pp.ln();
                hxy2 -= pp * pp.ln();
            }
        }
    }
    let ngf = ng as f64;
    let autocorr = sum(&|i, j, p| i * j * p);
    let corr = if var_x > 0.0 && var_y > 0.0 {
        sum(&|i, j, p| (i - mu_x) * (j - mu_y) * p) / (var_x * var_y).sqrt()
    } else {
        0.0
    };
    let hmax = hx.max(hy);
    // maximal correlation: Q = D^-1/2 (B B^T) D^1/2 with B(i,k) = p(i,k)/sqrt(px(i) py(k))
    let rows: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..ng).filter(|&k| py[k] > 0.0).collect();
    let mcc = if rows.len() < 2 {
        0.0
    } else {
        let b: Vec<Vec<f64>> = rows
            .iter()
            .map(|&i| cols.iter().map(|&k| p(i, k) / (px[i] * py[k]).sqrt()).collect())
            .collect();
        let bbt: Vec<Vec<f64>> = b
            .iter()
            .map(|r1| b.iter().map(|r2| r1.iter().zip(r2).map(|(x, y)| x * y).sum()).collect())
            .collect();
        let mut ev = jacobi_eigenvalues(bbt);
        ev.sort_by(|a, b| b.total_cmp(a));
        ev[1].clamp(0.0, 1.0).sqrt()
    };
    [
        sum(&|_, _, p| p * p),
        hxy,
        sum(&|i, j, p| (i - j).powi(2) * p),
        sum(&|i, j, p| (i - j).abs() * p),
        sum(&|i, j, p| p / (1.0 + (i - j).powi(2))),
        sum(&|i, j, p| p / (1.0 + (i - j).abs())),
        corr,
        autocorr,
        sum(&|i, j, p| (i + j - mu_x - mu_y).powi(3) * p),
        sum(&|i, j, p| (i + j - mu_x - mu_y).powi(4) * p),
        cells.iter().map(|c| c.2).fold(0.0, f64::max),
        var_x,
        sa,
        sum(&|i, j, p| (i + j - sa).powi(2) * p),
        -p_sum.iter().map(|&v| xlogx(v)).sum::<f64>(),
        sum(&|i, j, p| ((i - j).abs() - dm).powi(2) * p),
        -p_diff.iter().map(|&v| xlogx(v)).sum::<f64>(),
        if hmax > 0.0 { (hxy - hxy1) / hmax } else { 0.0 },
        (1.0 - (-2.0 * (hxy2 - hxy).max(0.0)).exp()).clamp(0.0, 1.0).sqrt(),
        mcc,
        sum(&|i, j, p| p / (1.0 + (i - j).abs() / ngf)),
        sum(&|i, j, p| p / (1.0 + (i - j).powi(2) / (ngf * ngf))),
    ]
}

fn criterion_glcm() -> Outcome {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let all_offsets = GlcmOffset::standard();
    let (mut worst_rel, mut worst_mcc, mut empty) = (0.0f64, 0.0f64, 0);
    let mcc_idx = TextureFeatures::NAMES.iter().position(|n| *n == "mcc").unwrap();
    for case in 0..1000 {
        let (w, h) = (16, 16);
        let ng = r.gen_range(2..=16);
        let density = r.gen_range(0.2..1.0);
        let data: Vec<u8> = (0..w * h).map(|_| r.gen_range(0..ng) as u8).collect();
        let bits: Vec<bool> = (0..w * h).map(|_| r.gen_bool(density)).collect();
        let n_off = r.gen_range(1..=all_offsets.len());
        let offs: Vec<GlcmOffset> = all_offsets[..n_off].to_vec();
        let sym = r.gen_bool(0.5);
        let q = QuantizedImage::new(w, h, ng, data.clone()).map_err(|e| e.to_string())?;
        let mask = BinaryMask::new(w, h, bits.clone()).map_err(|e| e.to_string())?;
        let raw: Vec<(i32, i32)> = offs.iter().map(|o| (o.dx(), o.dy())).collect();
        let expected = naive_glcm(&data, &bits, w, h, ng, &raw, sym);
        let built = build_glcm(&q, &mask, &offs, sym);
        if expected.iter().all(|&c| c == 0) {
            empty += 1;
            if built.is_ok() {
                return Err(format!("case {case}: empty co-occurrence accepted"));
            }
            continue;
        }
        let g = built.map_err(|e| format!("case {case}: {e}"))?;
        if g.counts() != expected.as_slice() {
            return Err(format!("case {case}: counts differ from pair enumeration"));
        }
        let got = texture_features(&g, &marginal_stats(&g)).to_array();
        let want = oracle_features(&expected, ng);
        for (f, (a, b)) in got.iter().zip(&want).enumerate() {
            let err = (a - b).abs();
            if f == mcc_idx {
                worst_mcc = worst_mcc.max(err);
                if err > 1e-6 {
                    return Err(format!("case {case}: mcc {a} vs oracle {b}"));
                }
            } else {
                let rel = err / b.abs().max(1e-300);
                if err > 1e-12 {
                    worst_rel = worst_rel.max(rel);
                }
                if err > 1e-12 && rel > 1e-9 {
                    return Err(format!("case {case}: {} {a} vs oracle {b}", TextureFeatures::NAMES[f]));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        secs < 30.0,
        format!("1000 random masked images, counts exact, max rel err {worst_rel:.1e}, max mcc err {worst_mcc:.1e}, {empty} empty, {secs:.1}s"),
    )
}

// ---------------------------------------------------------------------------
// 2. Otsu

/// Exhaustive argmax of `w0 w1 (mu0 - mu1)^2` in exact integer arithmetic:
/// proportional to `(S0 n1 - S1 n0)^2 / (n0 n1)`; ties go to the floor of
/// the mean maximizing level.
fn otsu_oracle(counts: &[u64; 256]) -> Option<u8> {
    let mut best: Option<(u128, u128)> = None;
    let mut winners: Vec<u64> = Vec::new();
    for t in 0..256usize {
        let n0: u128 = counts[..=t].iter().map(|&c| c as u128).sum();
        let n1: u128 = counts[t + 1..].iter().map(|&c| c as u128).sum();
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s0: i128 = (0..=t).map(|l| l as i128 * counts[l] as i128).sum();
        let s1: i128 = (t + 1..256).map(|l| l as i128 * counts[l] as i128).sum();
        let d = (s0 * n1 as i128 - s1 * n0 as i128).unsigned_abs();
        let (num, den) = (d * d, n0 * n1);
        match best {
            Some((bn, bd)) if num * bd < bn * den => {}
            Some((bn, bd)) if num * bd == bn * den => winners.push(t as u64),
            _ => {
                best = Some((num, den));
                winners = vec![t as u64];
            }
        }
    }
    (!winners.is_empty()).then(|| (winners.iter().sum::<u64>() / winners.len() as u64) as u8)
}

fn criterion_otsu() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let (mut ties, mut degenerate) = (0, 0);
    for case in 0..1000 {
        let mut counts = [0u64; 256];
        match case % 4 {
            0 => counts.iter_mut().for_each(|c| *c = r.gen_range(0..1000)),
            1 => {
                for _ in 0..r.gen_range(1..=5) {
                    counts[r.gen_range(0..256)] = r.gen_range(1..1000);
                }
            }
            2 => {
                // mirror-symmetric histograms produce ties
                for l in 0..128 {
                    let c = if r.gen_bool(0.2) { r.gen_range(1..50) } else { 0 };
                    counts[l] = c;
                    counts[255 - l] = c;
                }
            }
            _ => {
                let (a, b) = (r.gen_range(0..256), r.gen_range(0..256));
                counts[a] += r.gen_range(1..1000);
                counts[b] += r.gen_range(1..1000);
            }
        }
        let got = otsu_threshold(&Histogram256::from_counts(counts)).ok();
        let want = otsu_oracle(&counts);
        if got != want {
            return Err(format!("case {case}: otsu {got:?} vs oracle {want:?}"));
        }
        match want {
            None => degenerate += 1,
            Some(_) => {
                let occupied: Vec<usize> = (0..256).filter(|&l| counts[l] > 0).collect();
                if occupied.len() == 2 || case % 4 == 2 {
                    ties += 1;
                }
            }
        }
    }
    Ok(format!("1000 random histograms match exactly ({ties} tie-prone, {degenerate} degenerate rejected)"))
}

// ---------------------------------------------------------------------------
// 3. Standardization

fn criterion_standardization() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let names: Vec<String> = (0..29).map(|i| format!("f{i}")).collect();
    let scales: Vec<(f64, f64)> = (0..29)
        .map(|f| if f == 7 { (42.0, 0.0) } else { (r.gen_range(-1e3..1e3), 10f64.powf(r.gen_range(-3.0..4.0))) })
        .collect();
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| scales.iter().map(|&(m, s)| m + s * r.gen_range(-1.0..1.0)).collect())
        .collect();
    let labels: Vec<&str> = (0..500).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
    let data = Dataset::new(names, rows, &labels).map_err(|e| e.to_string())?;
    let z = apply_standardizer(&data, &fit_standardizer(&data).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let (mut worst_mean, mut worst_sd) = (0.0f64, 0.0f64);
    for f in 0..29 {
        let col = z.column(f);
        let mean = col.iter().sum::<f64>() / 500.0;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0).sqrt();
        if f == 7 {
            if col.iter().any(|&v| v != 0.0) {
                return Err("constant column not mapped to 0".into());
            }
            continue;
        }
        worst_mean = worst_mean.max(mean.abs());
        worst_sd = worst_sd.max((sd - 1.0).abs());
    }
    check(
        worst_mean < 1e-9 && worst_sd < 1e-9,
        format!("500x29, max |mean| {worst_mean:.1e}, max |sd-1| {worst_sd:.1e}, constant column -> 0"),
    )
}

// ---------------------------------------------------------------------------
// 4. Metrics reconciliation

fn criterion_metrics() -> Outcome {
    // rows scaled to 1,000,000 each: diseased recall 99.1720 %, healthy recall 99.7848 %
    let cm = ConfusionMatrix::from_counts(
        vec!["diseased".into(), "healthy".into()],
        vec![991_720, 8_280, 2_152, 997_848],
    )
    .map_err(|e| e.to_string())?;
    let rep = cm.report().map_err(|e| e.to_string())?;
    let d = &rep.per_class[0];
    let got = [d.precision * 100.0, d.recall * 100.0, rep.accuracy * 100.0, d.f1 * 100.0];
    let want = [99.78, 99.17, 99.48, 99.48];
    let ok = got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= 0.01);
    check(
        ok,
        format!(
            "precision {:.4}, recall {:.4}, accuracy {:.4}, F1 {:.4} (targets 99.78/99.17/99.48/99.48 +-0.01)",
            got[0], got[1], got[2], got[3]
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. SVM

fn criterion_svm() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        x.push(vec![2.5 * s + r.gen_range(-1.0..1.0), 2.5 * s + r.gen_range(-1.0..1.0)]);
        y.push(s);
    }
    let params = SmoParams { c: 1.0, seed: 5, ..SmoParams::default() };
    let m = smo_train(&x, &y, &KernelSpec::Linear, &params).map_err(|e| e.to_string())?;
    let acc = |m: &_, x: &[Vec<f64>], y: &[f64]| {
        x.iter().zip(y).filter(|(xi, &yi)| svm_decision(m, xi).unwrap() * yi > 0.0).count() as f64 / y.len() as f64
    };
    let a_lin = acc(&m, &x, &y);
    let kkt = kkt_residuals(&m, &x, &y).into_iter().fold(0.0, f64::max);
    let balance: f64 = m.dual_coefs.iter().sum::<f64>().abs();

    let xor_x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let xor_y = vec![-1.0, -1.0, 1.0, 1.0];
    let g = smo_train(&xor_x, &xor_y, &KernelSpec::Gaussian { sigma: 0.5 }, &SmoParams { c: 10.0, ..params.clone() })
        .map_err(|e| e.to_string())?;
    let a_xor = acc(&g, &xor_x, &xor_y);

    let names = vec!["u".to_string(), "v".to_string()];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..26 {
        let angle = c as f64 * std::f64::consts::TAU / 26.0;
        for _ in 0..4 {
            rows.push(vec![10.0 * angle.cos() + r.gen_range(-0.3..0.3), 10.0 * angle.sin() + r.gen_range(-0.3..0.3)]);
            labels.push(format!("class{c:02}"));
        }
    }
    let data = Dataset::new(names, rows, &labels).map_err(|e| e.to_string())?;
    let ovo = ovo_train(&data, KernelKind::Linear, &params).map_err(|e| e.to_string())?;
    let pairs = ovo.pairs.len();

    check(
        a_lin == 1.0 && kkt <= params.tol && balance <= 1e-8 && a_xor == 1.0 && pairs == 325,
        format!(
            "linear blobs acc {a_lin}, max KKT residual {kkt:.1e}, |sum alpha y| {balance:.1e}; XOR gaussian acc {a_xor}; 26 classes -> {pairs} pairs"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Selection sanity

/// 300 rows; the label is the sign pattern of features 0..3, the other 26
/// features are pure noise. Informative columns are placed at random.
fn selection_set(seed: u64) -> (Dataset, BTreeSet<usize>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<usize> = (0..29).collect();
    for i in (1..29).rev() {
        cols.swap(i, r.gen_range(0..=i));
    }
    let informative: BTreeSet<usize> = cols[..3].iter().copied().collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..300 {
        let bits: Vec<bool> = (0..3).map(|_| r.gen_bool(0.5)).collect();
        let mut row: Vec<f64> = (0..29).map(|_| r.gen_range(-1.5..1.5)).collect();
        for (b, &c) in bits.iter().zip(&cols[..3]) {
            row[c] = if *b { 1.0 } else { -1.0 } + r.gen_range(-0.6..0.6);
        }
        rows.push(row);
        labels.push(format!("{}{}{}", bits[0] as u8, bits[1] as u8, bits[2] as u8));
    }
    let names = (0..29).map(|i| format!("f{i:02}")).collect();
    (Dataset::new(names, rows, &labels).unwrap(), informative)
}

fn criterion_selection() -> Outcome {
    let results: Vec<(bool, bool)> = (1..=20u64)
        .into_par_iter()
        .map(|seed| {
            let (data, informative) = selection_set(seed);
            let learner = SvmLearner {
                kernel: KernelKind::Linear,
                params: SmoParams { seed, ..SmoParams::default() },
            };
            let eval = CvAccuracy {
                learner: &learner,
                folds: 5,
                seed,
                standardize: StandardizeMode::PerFold,
            };
            let trace = forward_select(&data, &eval, 1e-6).unwrap();
            let first: BTreeSet<usize> = trace.features().into_iter().take(3).collect();
            let w = relieff_rank(&data, 10, None, seed).unwrap();
            let top: BTreeSet<usize> = w.rank[..3].iter().copied().collect();
            (first == informative, top == informative)
        })
        .collect();
    let ffs_ok = results.iter().filter(|r| r.0).count();
    let relief_ok = results.iter().filter(|r| r.1).count();
    let both = results.iter().filter(|r| r.0 && r.1).count();
    check(
        both >= 18,
        format!("forward selection {ffs_ok}/20, ReliefF {relief_ok}/20, both {both}/20 seeds (need 18)"),
    )
}

// ---------------------------------------------------------------------------
// 7 and 8. Stage-two kernel ordering and selected subset

fn stage_two_table(seed: u64) -> Result<Dataset, String> {
    let cfg = PipelineConfig::default();
    let corpus = fixture_corpus(5, 100, 0, 96, seed);
    let jobs: Vec<(&str, &RgbImage)> = corpus
        .iter()
        .flat_map(|(name, imgs)| imgs.iter().map(move |i| (name.as_str(), i)))
        .collect();
    let rows: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|(_, img)| extract_image(img, &cfg).map(|(_, v)| v))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let labels: Vec<&str> = jobs.iter().map(|(n, _)| *n).collect();
    let names = leafsight_core::glcm::feature_names().iter().map(|s| s.to_string()).collect();
    Dataset::new(names, rows, &labels).map_err(|e| e.to_string())
}

fn cv_accuracy(data: &Dataset, kernel: KernelKind, seed: u64) -> Result<f64, String> {
    let learner = SvmLearner {
        kernel,
        params: SmoParams { seed, ..SmoParams::default() },
    };
    let plan = stratified_folds(data, 10, seed).map_err(|e| e.to_string())?;
    cross_validate(data, &learner, &plan, StandardizeMode::PerFold)
        .map(|r| r.accuracy_mean)
        .map_err(|e| e.to_string())
}

struct StageTwo {
    linear: f64,
    cubic: f64,
    selected: Vec<String>,
    selected_acc: f64,
    n_features: usize,
    extract_and_cv: Duration,
    selection: Duration,
}

fn stage_two() -> Result<StageTwo, String> {
    let seed = 1;
    let start = Instant::now();
    let data = stage_two_table(seed)?;
    let linear = cv_accuracy(&data, KernelKind::Linear, seed)?;
    let cubic = cv_accuracy(&data, KernelKind::Cubic, seed)?;
    let extract_and_cv = start.elapsed();
    let start = Instant::now();
    let learner = SvmLearner {
        kernel: KernelKind::Cubic,
        params: SmoParams { seed, ..SmoParams::default() },
    };
    let eval = CvAccuracy {
        learner: &learner,
        folds: 10,
        seed,
        standardize: StandardizeMode::PerFold,
    };
    let trace = forward_select(&data, &eval, 1e-6).map_err(|e| e.to_string())?;
    Ok(StageTwo {
        linear,
        cubic,
        selected: trace.names(),
        selected_acc: trace.final_accuracy().unwrap_or(0.0),
        n_features: data.n_features(),
        extract_and_cv,
        selection: start.elapsed(),
    })
}

fn criterion_kernel_order(s: &StageTwo) -> Outcome {
    let secs = s.extract_and_cv.as_secs_f64();
    check(
        s.cubic >= s.linear && secs < 600.0,
        format!(
            "5 classes x 100 images, 10-fold CV: cubic {:.4} >= linear {:.4} ({secs:.0}s)",
            s.cubic, s.linear
        ),
    )
}

fn criterion_selected_subset(s: &StageTwo) -> Outcome {
    check(
        s.selected_acc >= s.cubic - 0.02,
        format!(
            "forward-selected {} of {} features: CV {:.4} >= full {:.4} - 0.02 ({:.0}s)",
            s.selected.len(),
            s.n_features,
            s.selected_acc,
            s.cubic,
            s.selection.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Determinism

fn criterion_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path().join("corpus");
    write_corpus(&root, &fixture_corpus(3, 20, 0, 64, 9)).map_err(|e| e.to_string())?;
    let files = ["crossval_folds.csv", "crossval_report.csv", "crossval_confusion.csv", "crossval_report.txt"];
    let mut outputs = Vec::new();
    for (name, threads) in [("a", 1), ("b", 3)] {
        let config = PipelineConfig {
            seed: 17,
            ..PipelineConfig::default()
        };
        let opts = RunOptions {
            root: Some(root.clone()),
            out: tmp.path().join(name),
            config,
            jobs: Some(threads),
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| -> Result<(), String> {
            run(Subcommand::Extract, &opts).map_err(|e| e.to_string())?;
            run(Subcommand::Crossval, &opts).map_err(|e| e.to_string())?;
            Ok(())
        })?;
        outputs.push(files.map(|f| fs::read(opts.out.join(f)).unwrap_or_default()));
    }
    let same = outputs[0] == outputs[1] && outputs[0].iter().all(|b| !b.is_empty());
    check(same, format!("two crossval runs (1 and 3 threads) byte-identical across {} reports", files.len()))
}

// ---------------------------------------------------------------------------
// 10. Gate fixture

fn criterion_gate() -> Outcome {
    let size = 96;
    let params = SegmentationParams::default();
    let mut images = Vec::new();
    for i in 0..40u64 {
        images.push((healthy_leaf(size, 1000 + i), true));
        images.push((checkered_leaf(size, 2000 + i), false));
    }
    let masks: Vec<BinaryMask> = images
        .par_iter()
        .map(|(img, _)| leaf_mask(img, &params))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let cfg = GateConfig { seed: 10, ..GateConfig::default() };
    let feats: Vec<_> = images
        .par_iter()
        .zip(&masks)
        .map(|((img, _), m)| image_features(&to_grayscale(img), Some(m), &cfg.detector))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (train, test): (Vec<usize>, Vec<usize>) = (0..images.len()).partition(|i| i % 4 < 2);
    let gate = train_health_gate(
        &train.iter().map(|&i| feats[i].clone()).collect::<Vec<_>>(),
        &train.iter().map(|&i| images[i].1).collect::<Vec<_>>(),
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let correct = test
        .iter()
        .filter(|&&i| classify_features(&gate, &feats[i]).map(|d| d.healthy == images[i].1).unwrap_or(false))
        .count();
    let acc = correct as f64 / test.len() as f64;
    let flat = RgbImage::filled(size, size, [90, 140, 60]).map_err(|e| e.to_string())?;
    let d = classify_health(&gate, &flat, None).map_err(|e| e.to_string())?;
    let fallback = d.descriptors == 0 && !d.healthy && d.low_confidence;
    check(
        acc >= 0.9 && fallback,
        format!(
            "held-out accuracy {correct}/{} = {acc:.3}; zero-descriptor image -> {} (low confidence {})",
            test.len(),
            if d.healthy { "healthy" } else { "diseased" },
            d.low_confidence
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. Real corpus (optional)

fn criterion_real_corpus(root: &Path) -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut accs = Vec::new();
    for kernel in ["linear", "cubic"] {
        let mut config = PipelineConfig::default();
        config.set("kernel", kernel).map_err(|e| e.to_string())?;
        let opts = RunOptions {
            root: Some(root.to_path_buf()),
            out: tmp.path().to_path_buf(),
            config,
            jobs: None,
        };
        if accs.is_empty() {
            run(Subcommand::Extract, &opts).map_err(|e| e.to_string())?;
        }
        run(Subcommand::Crossval, &opts).map_err(|e| e.to_string())?;
        let csv = fs::read_to_string(tmp.path().join("crossval_folds.csv")).map_err(|e| e.to_string())?;
        let mean: f64 = csv
            .lines()
            .find(|l| l.starts_with("mean,"))
            .and_then(|l| l.split(',').nth(1))
            .and_then(|v| v.parse().ok())
            .ok_or("no mean row")?;
        accs.push(mean);
    }
    let bytes = fs::read(tmp.path().join("features.csv")).map_err(|e| e.to_string())?;
    let data = Dataset::read_csv(bytes.as_slice()).map_err(|e| e.to_string())?;
    let counts = data.class_counts();
    let majority = *counts.iter().max().unwrap_or(&0) as f64 / data.n_rows() as f64;
    check(
        accs[1] >= accs[0] && accs[1] - majority >= 0.40,
        format!("cubic {:.4}, linear {:.4}, majority baseline {majority:.4}", accs[1], accs[0]),
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        match o {
            Ok(msg) => println!("PASS criterion {n:>2} ({name}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}): {msg}");
            }
        }
    };
    let simple: [Criterion; 6] = [
        (1, "glcm oracle", criterion_glcm),
        (2, "otsu oracle", criterion_otsu),
        (3, "standardization", criterion_standardization),
        (4, "metrics reconciliation", criterion_metrics),
        (5, "svm correctness", criterion_svm),
        (6, "selection sanity", criterion_selection),
    ];
    for (n, name, f) in simple {
        if wanted(n) {
            report(n, name, f());
        }
    }
    if wanted(7) || wanted(8) {
        match stage_two() {
            Ok(s) => {
                if wanted(7) {
                    report(7, "kernel ordering", criterion_kernel_order(&s));
                }
                if wanted(8) {
                    report(8, "selected subset", criterion_selected_subset(&s));
                }
            }
            Err(e) => {
                for n in [7, 8].into_iter().filter(|&n| wanted(n)) {
                    report(n, "stage two", Err(e.clone()));
                }
            }
        }
    }
    if wanted(9) {
        report(9, "determinism", criterion_determinism());
    }
    if wanted(10) {
        report(10, "gate fixture", criterion_gate());
    }
    match std::env::var_os("LEAFSIGHT_CORPUS") {
        Some(root) if wanted(11) => report(11, "real corpus", criterion_real_corpus(Path::new(&root))),
        _ => println!("SKIP criterion 11 (real corpus): set LEAFSIGHT_CORPUS to run"),
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
