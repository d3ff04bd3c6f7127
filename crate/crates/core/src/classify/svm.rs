//! Linear soft-margin SVM trained on the dual by SMO with maximal-violating-pair
//! working-set selection, combined one-vs-one for multiclass problems.

use rayon::prelude::*;

use super::{ClassifyError, LabeledFeatureSet};

/// Floor for the curvature of a working pair whose kernel block is singular.
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    /// Stop once the maximal KKT violation falls to this value.
    pub tolerance: f64,
    /// Iteration cap per binary problem, as a multiple of its sample count.
    pub max_passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 40.0,
            tolerance: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ClassifyError::Config(format!("C must be positive, got {}", self.c)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(ClassifyError::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(ClassifyError::Config("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Symmetric matrix of linear-kernel values `x_i · x_j` accumulated in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gram {
    n: usize,
    values: Vec<f64>,
}

impl Gram {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn gram_matrix(features: &[Vec<f32>]) -> Gram {
    let n = features.len();
    let values = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (0..n).map(move |j| dot(&features[i], &features[j])))
        .collect();
    Gram { n, values }
}

/// One class-pair machine. Positive decision values vote for `class_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMachine {
    pub class_a: usize,
    pub class_b: usize,
    pub w: Vec<f64>,
    pub b: f64,
    /// Maximal KKT violation `max_{I_up} -yG - min_{I_low} -yG` at exit.
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f32]) -> f64 {
        self.w.iter().zip(x).map(|(&w, &v)| w * v as f64).sum::<f64>() + self.b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    class_names: Vec<String>,
    /// Class indices seen in training, ascending.
    classes: Vec<usize>,
    machines: Vec<BinaryMachine>,
    dim: usize,
}

impl SvmModel {
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn machines(&self) -> &[BinaryMachine] {
        &self.machines
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    violation: f64,
    iterations: usize,
    converged: bool,
}

/// Minimises `½ αᵀQα - eᵀα` subject to `0 <= α <= C`, `yᵀα = 0`, with
/// `Q_ij = y_i y_j K_ij`.
fn solve(y: &[f64], kernel: impl Fn(usize, usize) -> f64, c: f64, tol: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let kdiag: Vec<f64> = (0..n).map(|i| kernel(i, i)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let (violation, converged) = loop {
        let (mut gmax, mut i_sel) = (f64::NEG_INFINITY, usize::MAX);
        let (mut gmin, mut j_sel) = (f64::INFINITY, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let (up, low) = if y[t] > 0.0 {
                (alpha[t] < c, alpha[t] > 0.0)
            } else {
                (alpha[t] > 0.0, alpha[t] < c)
            };
            if up && v > gmax {
                gmax = v;
                i_sel = t;
            }
            if low && v < gmin {
                gmin = v;
                j_sel = t;
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX {
            break (0.0, true);
        }
        let violation = gmax - gmin;
        if violation <= tol {
            break (violation, true);
        }
        if iterations >= max_iter {
            break (violation, false);
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let kij = kernel(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (kdiag[i] + kdiag[j] + 2.0 * y[i] * y[j] * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kdiag[i] + kdiag[j] - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kernel(t, i) * di + y[j] * kernel(t, j) * dj);
        }
    };

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
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
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        rho,
        violation,
        iterations,
        converged,
    }
}

/// Trains on the rows `indices` of `data`, reading kernel values from a Gram
/// matrix computed over all of `data`.
pub fn svm_train_with_gram(
    data: &LabeledFeatureSet,
    gram: &Gram,
    indices: &[usize],
    cfg: &SvmConfig,
) -> Result<SvmModel, ClassifyError> {
    cfg.validate()?;
    if gram.len() != data.len() {
        return Err(ClassifyError::InvalidSet(format!(
            "Gram matrix is {}x{0}, data has {} rows",
            gram.len(),
            data.len()
        )));
    }
    let mut classes: Vec<usize> = indices.iter().map(|&i| data.labels()[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifyError::SingleClass(classes.len()));
    }
    let dim = data.dim();
    let mut machines = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let rows: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| data.labels()[i] == a || data.labels()[i] == b)
                .collect();
            let y: Vec<f64> = rows
                .iter()
                .map(|&i| if data.labels()[i] == a { 1.0 } else { -1.0 })
                .collect();
            let max_iter = cfg.max_passes.saturating_mul(rows.len());
            let sol = solve(&y, |p, q| gram.get(rows[p], rows[q]), cfg.c, cfg.tolerance, max_iter);
            if !sol.converged {
                log::warn!(
                    "SVM pair ({a}, {b}) stopped after {} iterations with KKT violation {:.3e}",
                    sol.iterations,
                    sol.violation
                );
            }
            let mut w = vec![0.0f64; dim];
            for ((&row, &alpha), &yi) in rows.iter().zip(&sol.alpha).zip(&y) {
                if alpha != 0.0 {
                    for (wk, &xk) in w.iter_mut().zip(&data.features()[row]) {
                        *wk += alpha * yi * xk as f64;
                    }
                }
            }
            if !sol.rho.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(ClassifyError::Numeric(format!("SVM pair ({a}, {b}) diverged")));
            }
            machines.push(BinaryMachine {
                class_a: a,
                class_b: b,
                w,
                b: -sol.rho,
                kkt_violation: sol.violation,
                iterations: sol.iterations,
                converged: sol.converged,
            });
        }
    }
    Ok(SvmModel {
        class_names: data.class_names().to_vec(),
        classes,
        machines,
        dim,
    })
}

pub fn svm_train(train: &LabeledFeatureSet, cfg: &SvmConfig) -> Result<SvmModel, ClassifyError> {
    let gram = gram_matrix(train.features());
    let all: Vec<usize> = (0..train.len()).collect();
    svm_train_with_gram(train, &gram, &all, cfg)
}

/// One-vs-one max-wins vote. Ties go to the larger summed decision value,
/// then to the lower class index.
pub fn svm_predict(model: &SvmModel, query: &[f32]) -> Result<usize, ClassifyError> {
    if query.len() != model.dim {
        return Err(ClassifyError::QueryDims {
            expected: model.dim,
            got: query.len(),
        });
    }
    let k = model.class_names.len();
    let mut votes = vec![0usize; k];
    let mut sums = vec![0.0f64; k];
    for m in &model.machines {
        let d = m.decision(query);
        if d > 0.0 {
            votes[m.class_a] += 1;
        } else {
            votes[m.class_b] += 1;
        }
        sums[m.class_a] += d;
        sums[m.class_b] -= d;
    }
    let mut best = model.classes[0];
    for &c in &model.classes[1..] {
        if votes[c] > votes[best] || (votes[c] == votes[best] && sums[c] > sums[best]) {
            best = c;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn set(points: Vec<Vec<f32>>, labels: Vec<usize>, k: usize) -> LabeledFeatureSet {
        LabeledFeatureSet::from_labeled(points, labels, names(k)).unwrap()
    }

    #[test]
    fn one_dimensional_max_margin() {
        let s = set(vec![vec![1.0], vec![-1.0]], vec![0, 1], 2);
        let m = svm_train(&s, &SvmConfig::default()).unwrap();
        let bm = &m.machines()[0];
        assert!((bm.w[0] - 1.0).abs() <= 1e-3, "w = {}", bm.w[0]);
        assert!(bm.b.abs() <= 1e-3, "b = {}", bm.b);
        assert!(bm.kkt_violation <= 1e-3);
        assert_eq!(svm_predict(&m, &[0.4]).unwrap(), 0);
        assert_eq!(svm_predict(&m, &[-0.4]).unwrap(), 1);
    }

    #[test]
    fn shifted_one_dimensional_margin() {
        // Closest points 2 and 4: w = 1, b = -3.
        let s = set(vec![vec![4.0], vec![6.0], vec![2.0], vec![0.0]], vec![0, 0, 1, 1], 2);
        let bm = svm_train(&s, &SvmConfig::default()).unwrap().machines()[0].clone();
        assert!((bm.w[0] - 1.0).abs() <= 1e-3);
        assert!((bm.b + 3.0).abs() <= 1e-3);
    }

    #[test]
    fn soft_margin_caps_alpha() {
        // Overlapping labels force bounded multipliers; the solver must still converge.
        let s = set(
            vec![vec![0.0], vec![1.0], vec![0.5], vec![0.6], vec![2.0], vec![-1.0]],
            vec![1, 0, 0, 1, 0, 1],
            2,
        );
        let cfg = SvmConfig { c: 1.0, ..SvmConfig::default() };
        let m = svm_train(&s, &cfg).unwrap();
        assert!(m.machines()[0].converged);
        assert!(m.machines()[0].kkt_violation <= 1e-3);
    }

    #[test]
    fn three_class_votes() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.2, 0.1],
            vec![5.0, 0.0],
            vec![5.2, 0.3],
            vec![0.0, 5.0],
            vec![0.3, 5.1],
        ];
        let s = set(pts, vec![0, 0, 1, 1, 2, 2], 3);
        let m = svm_train(&s, &SvmConfig::default()).unwrap();
        assert_eq!(m.machines().len(), 3);
        assert_eq!(svm_predict(&m, &[-3.0, -3.0]).unwrap(), 0);
        assert_eq!(svm_predict(&m, &[9.0, 0.0]).unwrap(), 1);
        assert_eq!(svm_predict(&m, &[0.0, 9.0]).unwrap(), 2);
        assert!(svm_predict(&m, &[0.0]).is_err());
    }

    #[test]
    fn invalid_inputs() {
        let s = set(vec![vec![1.0], vec![2.0]], vec![0, 0], 2);
        assert!(matches!(svm_train(&s, &SvmConfig::default()), Err(ClassifyError::SingleClass(1))));
        let s = set(vec![vec![1.0], vec![2.0]], vec![0, 1], 2);
        let bad = SvmConfig { c: 0.0, ..SvmConfig::default() };
        assert!(matches!(svm_train(&s, &bad), Err(ClassifyError::Config(_))));
    }
}
