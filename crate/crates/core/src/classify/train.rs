//! Small SMO trainer so the repository can produce its own models.
//!
//! Not meant for clinical data: the full kernel matrix is kept in memory and
//! each class is subsampled to `max_samples_per_class`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maps::ClassInfo;
use super::svm::{BinaryClassifier, SvmModel, MODEL_VERSION};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    /// Box constraint.
    pub c: f64,
    pub gamma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
    pub max_samples_per_class: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            c: 10.0,
            gamma: 1.0,
            tol: 1e-3,
            max_iter: 200_000,
            max_samples_per_class: 400,
            seed: 0,
        }
    }
}

/// Trains one calibrated RBF classifier per class (one-vs-rest).
pub fn svm_train_toy(
    samples: &[Vec<f64>],
    labels: &[usize],
    classes: Vec<ClassInfo>,
    params: &TrainParams,
) -> Result<SvmModel> {
    if samples.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    if classes.len() < 2 {
        return Err(Error::Degenerate("at least two classes are required".into()));
    }
    if !(params.gamma > 0.0) || !(params.c > 0.0) {
        return Err(Error::InvalidInput("gamma and C must be positive".into()));
    }
    let features = samples.first().map_or(0, Vec::len);
    if features == 0 || samples.iter().any(|s| s.len() != features) {
        return Err(Error::InvalidInput("samples must share a non-zero length".into()));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, &l) in labels.iter().enumerate() {
        per_class
            .get_mut(l)
            .ok_or_else(|| Error::InvalidInput(format!("label {l} has no class entry")))?
            .push(i);
    }
    for (c, members) in per_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Degenerate(format!(
                "class {c} ({}) has {} samples, need at least 2",
                classes[c].name,
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut chosen = Vec::new();
    for members in &per_class {
        if members.len() <= params.max_samples_per_class {
            chosen.extend_from_slice(members);
        } else {
            let mut picked = rand::seq::index::sample(&mut rng, members.len(), params.max_samples_per_class).into_vec();
            picked.sort_unstable();
            chosen.extend(picked.into_iter().map(|k| members[k]));
        }
    }
    let xs: Vec<&[f64]> = chosen.iter().map(|&i| samples[i].as_slice()).collect();
    let ys: Vec<usize> = chosen.iter().map(|&i| labels[i]).collect();
    let n = xs.len();

    let gamma = params.gamma;
    let kernel: Vec<f64> = par::map_indexed(n, |r| {
        xs.iter()
            .map(|b| {
                let d: f64 = xs[r].iter().zip(*b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-gamma * d).exp()
            })
            .collect::<Vec<f64>>()
    })
    .concat();

    let classifiers = (0..classes.len())
        .map(|class| {
            let y: Vec<f64> = ys.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let sol = smo(&kernel, &y, params.c, params.tol, params.max_iter);
            let decisions: Vec<f64> = (0..n).map(|t| y[t] * (sol.gradient[t] + 1.0) - sol.rho).collect();
            let (platt_a, platt_b) = sigmoid_train(&decisions, &y);
            let mut support_vectors = Vec::new();
            let mut dual_coefs = Vec::new();
            for t in 0..n {
                if sol.alpha[t] > 0.0 {
                    support_vectors.push(xs[t].to_vec());
                    dual_coefs.push(sol.alpha[t] * y[t]);
                }
            }
            BinaryClassifier {
                gamma,
                bias: -sol.rho,
                platt_a,
                platt_b,
                support_vectors,
                dual_coefs,
            }
        })
        .collect();

    let model = SvmModel {
        version: MODEL_VERSION,
        feature_count: features,
        classes,
        classifiers,
    };
    model.validate()?;
    Ok(model)
}

struct Solution {
    alpha: Vec<f64>,
    gradient: Vec<f64>,
    rho: f64,
}

const TAU: f64 = 1e-12;

/// Dual SMO with second-order working-set selection (Fan, Chen & Lin).
fn smo(kernel: &[f64], y: &[f64], c: f64, eps: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let k = |a: usize, b: usize| kernel[a * n + b];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let is_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    for _ in 0..max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let b = gmax + v;
            if b > 0.0 {
                let mut a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < eps || j == usize::MAX {
            break;
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        gradient: grad,
        rho,
    }
}

/// Fits `p(y=1|f) = 1 / (1 + exp(a f + b))` by regularized Newton iterations
/// (Lin, Lin & Weng's variant of Platt scaling).
fn sigmoid_train(decisions: &[f64], labels: &[f64]) -> (f64, f64) {
    let positives = labels.iter().filter(|&&y| y > 0.0).count() as f64;
    let negatives = labels.len() as f64 - positives;
    let hi = (positives + 1.0) / (positives + 2.0);
    let lo = 1.0 / (negatives + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&y| if y > 0.0 { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (1.0 + (-z).exp()).ln()
                } else {
                    (t - 1.0) * z + (1.0 + z.exp()).ln()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((negatives + 1.0) / (positives + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21) = (1e-12, 1e-12, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&f, &t) in decisions.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

/// Training-set accuracy of a nearest-class-mean classifier; the baseline the
/// toy trainer has to match.
pub fn nearest_centroid_accuracy(samples: &[Vec<f64>], labels: &[usize]) -> f64 {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let dim = samples.first().map_or(0, Vec::len);
    let mut means = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (s, &l) in samples.iter().zip(labels) {
        counts[l] += 1;
        for (m, v) in means[l].iter_mut().zip(s) {
            *m += v;
        }
    }
    for (m, &n) in means.iter_mut().zip(&counts) {
        if n > 0 {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    let correct = samples
        .iter()
        .zip(labels)
        .filter(|(s, &l)| {
            let best = (0..classes)
                .filter(|&c| counts[c] > 0)
                .min_by(|&a, &b| {
                    let da: f64 = s.iter().zip(&means[a]).map(|(x, m)| (x - m).powi(2)).sum();
                    let db: f64 = s.iter().zip(&means[b]).map(|(x, m)| (x - m).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            best == l
        })
        .count();
    correct as f64 / samples.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::CompiledSvm;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn two_classes() -> Vec<ClassInfo> {
        vec![ClassInfo::new("neg", [0, 0, 255]), ClassInfo::new("pos", [255, 0, 0])]
    }

    fn predict_all(model: &SvmModel, xs: &[Vec<f64>]) -> Vec<usize> {
        let compiled = CompiledSvm::new(model).unwrap();
        let mut p = vec![0.0; model.class_count()];
        xs.iter()
            .map(|x| {
                compiled.probabilities(x, &mut p);
                (0..p.len()).fold(0, |best, c| if p[c] > p[best] { c } else { best })
            })
            .collect()
    }

    fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
        pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
    }

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..120 {
            let l = i % 2;
            let cx = if l == 0 { -2.0 } else { 2.0 };
            xs.push(vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
            ys.push(l);
        }
        (xs, ys)
    }

    #[test]
    fn separable_blobs_are_learned_perfectly() {
        let (xs, ys) = blobs(3);
        let model = svm_train_toy(&xs, &ys, two_classes(), &TrainParams::default()).unwrap();
        assert_eq!(accuracy(&predict_all(&model, &xs), &ys), 1.0);
    }

    #[test]
    fn xor_needs_the_rbf_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..400 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            if x.abs() < 0.05 || y.abs() < 0.05 {
                continue;
            }
            xs.push(vec![x, y]);
            ys.push(usize::from((x > 0.0) != (y > 0.0)));
        }
        let params = TrainParams {
            gamma: 4.0,
            c: 100.0,
            ..TrainParams::default()
        };
        let model = svm_train_toy(&xs, &ys, two_classes(), &params).unwrap();
        let acc = accuracy(&predict_all(&model, &xs), &ys);
        assert!(acc >= 0.95, "xor training accuracy {acc}");
        // a linear separator cannot do better than chance here
        assert!(nearest_centroid_accuracy(&xs, &ys) < 0.7);
    }

    #[test]
    fn beats_nearest_centroid_on_overlapping_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..300 {
            let l = i % 3;
            xs.push(vec![l as f64 + noise.sample(&mut rng), noise.sample(&mut rng) * 0.5]);
            ys.push(l);
        }
        let classes = vec![
            ClassInfo::new("a", [1, 1, 1]),
            ClassInfo::new("b", [2, 2, 2]),
            ClassInfo::new("c", [3, 3, 3]),
        ];
        let model = svm_train_toy(&xs, &ys, classes, &TrainParams::default()).unwrap();
        let acc = accuracy(&predict_all(&model, &xs), &ys);
        assert!(acc >= nearest_centroid_accuracy(&xs, &ys), "svm {acc}");
    }

    #[test]
    fn same_seed_gives_identical_model_file() {
        let (xs, ys) = blobs(9);
        let params = TrainParams {
            max_samples_per_class: 25,
            seed: 77,
            ..TrainParams::default()
        };
        let a = svm_train_toy(&xs, &ys, two_classes(), &params)
            .unwrap()
            .to_json()
            .unwrap();
        let b = svm_train_toy(&xs, &ys, two_classes(), &params)
            .unwrap()
            .to_json()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_is_degenerate() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let err = svm_train_toy(&xs, &[0, 0, 0], two_classes(), &TrainParams::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }
}
