//! Binary soft-margin SVM trained on the dual with pairwise (SMO) updates and
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use crate::sigproc::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            other => Err(Error::InvalidParameter(format!("unknown kernel '{other}', expected linear or rbf"))),
        }
    }
}

/// RBF width: `1 / (D * mean column variance)` of the training rows, or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "GammaRepr", into = "GammaRepr")]
pub enum Gamma {
    #[default]
    Scale,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Value(f64),
    Name(String),
}

impl TryFrom<GammaRepr> for Gamma {
    type Error = String;

    fn try_from(r: GammaRepr) -> Result<Self, String> {
        match r {
            GammaRepr::Value(v) if v.is_finite() && v > 0.0 => Ok(Gamma::Value(v)),
            GammaRepr::Value(v) => Err(format!("gamma must be positive, got {v}")),
            GammaRepr::Name(s) if s == "scale" => Ok(Gamma::Scale),
            GammaRepr::Name(s) => Err(format!("unknown gamma '{s}', expected \"scale\" or a number")),
        }
    }
}

impl From<Gamma> for GammaRepr {
    fn from(g: Gamma) -> Self {
        match g {
            Gamma::Scale => GammaRepr::Name("scale".into()),
            Gamma::Value(v) => GammaRepr::Value(v),
        }
    }
}

/// Kernel with all parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: Gamma,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Cap on pair updates.
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: KernelKind::Rbf,
            c: 1.0,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvmParams {
    pub fn with_kernel(self, kernel: KernelKind) -> Self {
        SvmParams { kernel, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("svm.c must be positive, got {}", self.c)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("svm.tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    fn resolve(&self, rows: &[Vec<f64>]) -> Kernel {
        match (self.kernel, self.gamma) {
            (KernelKind::Linear, _) => Kernel::Linear,
            (KernelKind::Rbf, Gamma::Value(gamma)) => Kernel::Rbf { gamma },
            (KernelKind::Rbf, Gamma::Scale) => {
                let d = rows[0].len();
                let n = rows.len() as f64;
                let mean_var = (0..d)
                    .map(|c| {
                        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
                        rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n
                    })
                    .sum::<f64>()
                    / d as f64;
                let gamma = if mean_var > 0.0 { 1.0 / (d as f64 * mean_var) } else { 1.0 };
                Kernel::Rbf { gamma }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector, `y = +1` for class 1.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    /// Final maximal KKT violation.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, c)| c * self.kernel.eval(sv, row))
            .sum::<f64>()
            + self.bias
    }

    /// Class 1 when the decision value is `>= 0`.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<Label>> {
        rows.iter()
            .map(|r| {
                if r.len() != self.dim() {
                    return Err(Error::Shape(format!(
                        "row has {} features, model expects {}",
                        r.len(),
                        self.dim()
                    )));
                }
                Ok(if self.decision(r) >= 0.0 { Label::Class1 } else { Label::Class2 })
            })
            .collect()
    }
}

pub fn accuracy(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput("no predictions to score".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

const TAU: f64 = 1e-12;

/// Dual solution together with the quantities the invariants are stated on.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub bias: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// `sum(alpha) - 0.5 * alpha' Q alpha`.
    pub objective: f64,
}

pub fn train(rows: &[Vec<f64>], labels: &[Label], params: &SvmParams) -> Result<SvmModel> {
    let (kernel, sol) = solve(rows, labels, params)?;
    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(rows[i].clone());
            dual_coefficients.push(a * sol.y[i]);
        }
    }
    Ok(SvmModel {
        kernel,
        c: params.c,
        support_vectors,
        dual_coefficients,
        bias: sol.bias,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
    })
}

/// Solves the dual and returns the raw multipliers for every training row.
pub fn solve(rows: &[Vec<f64>], labels: &[Label], params: &SvmParams) -> Result<(Kernel, DualSolution)> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::Shape(format!("{} rows for {} labels", rows.len(), labels.len())));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("training rows differ in length".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("training rows must be finite".into()));
    }
    for class in [Label::Class1, Label::Class2] {
        if !labels.contains(&class) {
            return Err(Error::ClassMissing(format!("{class:?} absent from SVM training labels")));
        }
    }

    let kernel = params.resolve(rows);
    let n = rows.len();
    let c = params.c;
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel.eval(&rows[i], &rows[j])).collect())
        .collect();
    let mut alpha = vec![0.0; n];
    // Gradient of 0.5 a'Qa - e'a.
    let mut grad = vec![-1.0; n];

    let is_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let is_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let residual = loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = k[i_sel][i_sel] + k[t][t] - 2.0 * k[i_sel][t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        let gap = gmax - gmin;
        if gap < params.tol || j_sel == usize::MAX {
            break gap.max(0.0);
        }
        if iterations >= params.max_iter {
            return Err(Error::Convergence { iterations, residual: gap });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let mut quad = k[i][i] + k[j][j] - 2.0 * k[i][j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
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
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[i][t] * dai + y[j] * k[j][t] * daj);
        }
    };

    // Bias from free vectors, else the midpoint of the feasible interval.
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { 0.5 * (ub + lb) };

    let objective = alpha.iter().sum::<f64>()
        - 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g + 1.0)).sum::<f64>();
    Ok((
        kernel,
        DualSolution {
            alpha,
            y,
            bias: -rho,
            kkt_residual: residual,
            iterations,
            objective,
        },
    ))
}

#[cfg(test)]
mod tests {
    use rand::seq::SliceRandom;
    use rand::Rng;

    use super::*;
    use crate::seed;

    const C1: Label = Label::Class1;
    const C2: Label = Label::Class2;

    fn linear() -> SvmParams {
        SvmParams::default().with_kernel(KernelKind::Linear)
    }

    #[test]
    fn max_margin_matches_hand_solution() {
        // Optimum: w = (1, 0), b = 0, alpha = 0.5 on (1,0) and (-1,0).
        let rows = vec![vec![1.0, 0.0], vec![2.0, 1.0], vec![-1.0, 0.0], vec![-2.0, -1.0]];
        let labels = vec![C1, C1, C2, C2];
        let (_, sol) = solve(&rows, &labels, &SvmParams { tol: 1e-8, ..linear() }).unwrap();
        let model = train(&rows, &labels, &SvmParams { tol: 1e-8, ..linear() }).unwrap();
        let mut w = [0.0; 2];
        for (sv, c) in model.support_vectors.iter().zip(&model.dual_coefficients) {
            w[0] += c * sv[0];
            w[1] += c * sv[1];
        }
        assert!((w[0] - 1.0).abs() < 1e-3 && w[1].abs() < 1e-3, "w = {w:?}");
        assert!(model.bias.abs() < 1e-3);
        assert!((sol.alpha[0] - 0.5).abs() < 1e-3 && (sol.alpha[2] - 0.5).abs() < 1e-3);
        assert!(sol.alpha[1].abs() < 1e-9 && sol.alpha[3].abs() < 1e-9);
        assert_eq!(model.predict(&rows).unwrap(), labels);
        // Mirrored across the boundary x = 0.
        assert_eq!(model.predict(&[vec![0.3, 5.0], vec![-0.3, 5.0]]).unwrap(), vec![C1, C2]);
    }

    #[test]
    fn xor_needs_rbf() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = vec![C1, C1, C2, C2];
        let rbf = train(&rows, &labels, &SvmParams::default()).unwrap();
        assert_eq!(accuracy(&rbf.predict(&rows).unwrap(), &labels).unwrap(), 1.0);
        let lin = train(&rows, &labels, &linear()).unwrap();
        assert!(accuracy(&lin.predict(&rows).unwrap(), &labels).unwrap() < 1.0);
    }

    #[test]
    fn duplicated_points_split_at_midpoint() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 0.0]];
        let labels = vec![C1, C1, C2, C2];
        let m = train(&rows, &labels, &linear()).unwrap();
        assert!(m.decision(&[1.0, 0.0]).abs() < 1e-3);
        assert_eq!(m.predict(&[vec![0.9, 0.0], vec![1.1, 0.0]]).unwrap(), vec![C1, C2]);
    }

    fn random_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = seed::rng(seed);
        let n = rng.random_range(10..40);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<Label> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let noisy = rng.random::<f64>() < 0.2;
                if i < 2 {
                    return if i == 0 { C1 } else { C2 };
                }
                if (r[0] + r[1] > 1.0) ^ noisy { C1 } else { C2 }
            })
            .collect();
        (rows, labels)
    }

    #[test]
    fn dual_invariants_on_random_problems() {
        for s in 0..20 {
            let (rows, labels) = random_problem(s);
            for params in [linear(), SvmParams::default()] {
                let (kernel, sol) = solve(&rows, &labels, &params).unwrap();
                assert!(sol.kkt_residual < 1e-3);
                let balance: f64 = sol.alpha.iter().zip(&sol.y).map(|(a, y)| a * y).sum();
                assert!(balance.abs() < 1e-6, "sum alpha y = {balance}");
                assert!(sol.alpha.iter().all(|&a| (0.0..=params.c).contains(&a)));
                assert!(sol.objective >= 0.0);
                let model = train(&rows, &labels, &params).unwrap();
                assert_eq!(model.kernel, kernel);
                for (i, &a) in sol.alpha.iter().enumerate() {
                    if a > 1e-8 && a < params.c - 1e-8 {
                        let f = model.decision(&rows[i]);
                        assert!((sol.y[i] * f - 1.0).abs() < 10.0 * params.tol, "margin {f}");
                    }
                }
            }
        }
    }

    #[test]
    fn prediction_invariant_to_row_order() {
        let (rows, labels) = random_problem(99);
        let (test, truth) = random_problem(100);
        let base = accuracy(&train(&rows, &labels, &SvmParams::default()).unwrap().predict(&test).unwrap(), &truth).unwrap();
        let mut rng = seed::rng(5);
        for _ in 0..5 {
            let mut idx: Vec<usize> = (0..rows.len()).collect();
            idx.shuffle(&mut rng);
            let r: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
            let l: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            let m = train(&r, &l, &SvmParams::default()).unwrap();
            assert_eq!(accuracy(&m.predict(&test).unwrap(), &truth).unwrap(), base);
        }
    }

    #[test]
    fn free_class2_vector_predicted_class2() {
        let (rows, labels) = random_problem(7);
        let (_, sol) = solve(&rows, &labels, &linear()).unwrap();
        let model = train(&rows, &labels, &linear()).unwrap();
        let i = (0..rows.len())
            .find(|&i| labels[i] == C2 && sol.alpha[i] > 1e-8 && sol.alpha[i] < 1.0 - 1e-8)
            .expect("a free class-2 vector");
        assert_eq!(model.predict(&[rows[i].clone()]).unwrap(), vec![C2]);
    }

    #[test]
    fn errors() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train(&rows, &[C1, C1], &linear()), Err(Error::ClassMissing(_))));
        let (rows, labels) = random_problem(3);
        let capped = SvmParams { max_iter: 1, ..SvmParams::default() };
        assert!(matches!(train(&rows, &labels, &capped), Err(Error::Convergence { iterations: 1, .. })));
        let m = train(&rows, &labels, &linear()).unwrap();
        assert!(matches!(m.predict(&[vec![0.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[C1, C2], &[C1, C2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[C1, C2], &[C2, C1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[C1, C1, C1, C2, C2], &[C1, C1, C2, C2, C1]).unwrap(), 0.6);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn gamma_and_kernel_parsing() {
        let p: SvmParams = toml::from_str("kernel = \"linear\"\ngamma = 0.5").unwrap();
        assert_eq!((p.kernel, p.gamma), (KernelKind::Linear, Gamma::Value(0.5)));
        assert!(toml::from_str::<SvmParams>("gamma = \"auto\"").is_err());
        assert_eq!("rbf".parse::<KernelKind>().unwrap(), KernelKind::Rbf);
        assert!("poly".parse::<KernelKind>().is_err());
    }
}
