//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured quantities and its runtime; the process exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fesc::augment::{balance, smote};
use fesc::cli;
use fesc::cluster::{adjusted_rand_index, Dendrogram, KMeans, Partition, PointSet, SimilarityGraph, SpectralEmbedding};
use fesc::config::PipelineConfig;
use fesc::consensus::{consensus_filter, consensus_matrix, similarity_matrix};
use fesc::pipeline::{self, CvReport};
use fesc::sigproc::Label;
use fesc::spectral::{band_average, fft_spectrum, msc, BandTable, FeatureMatrix};
use fesc::svm::{self, Gamma, Kernel, KernelKind, SvmParams};
use fesc::synth::SynthSpec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

// ---------------------------------------------------------------- criterion 1

fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len().next_power_of_two();
    (0..=n / 2)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| Complex64::from_polar(v, -2.0 * PI * (k * t) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn spectral_oracle() -> Outcome {
    let mut r = rng(1);
    let mut fft_err = 0.0f64;
    for _ in 0..50 {
        let len = r.random_range(2..=64);
        let x: Vec<f64> = normal(&mut r, len);
        let (_, got) = fft_spectrum(&x, 100.0).unwrap();
        let want = naive_dft(&x);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            fft_err = fft_err.max((a - b).norm());
        }
    }

    let mut d0 = vec![0.0; 8];
    d0[0] = 1.0;
    let mut d1 = vec![0.0; 8];
    d1[1] = 1.0;
    let (_, m) = msc(&[d0.clone(), d1], &[d0.clone(), d0], 8.0).unwrap();
    let s2 = 2f64.sqrt();
    let want = [1.0, (2.0 + s2) / 4.0, 0.5, (2.0 - s2) / 4.0, 0.0];
    let msc_err = m.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    Outcome::new(
        fft_err < 1e-9 && msc_err < 1e-12 && m.len() == 5,
        format!("fft max err {fft_err:.2e} (< 1e-9), hand MSC max err {msc_err:.2e} (< 1e-12)"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn msc_bounds() -> Outcome {
    let bands = BandTable::default();
    let fs = 500.0;
    let len = 512;
    let mut r = rng(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let n = r.random_range(2..=6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| normal(&mut r, len)).collect();
        let y: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mix: f64 = r.random();
                normal(&mut r, len).iter().zip(&x[i]).map(|(e, v)| mix * v + e).collect()
            })
            .collect();
        let (freqs, m) = msc(&x, &y, fs).unwrap();
        for v in band_average(&freqs, &m, &bands).unwrap() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }

    let mut linear_err = 0.0f64;
    for scale in [3.0, -0.25, 1e-3] {
        let x: Vec<Vec<f64>> = (0..10).map(|_| normal(&mut r, len)).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|t| t.iter().map(|v| scale * v).collect()).collect();
        let (_, m) = msc(&x, &y, fs).unwrap();
        linear_err = m.iter().fold(linear_err, |e, v| e.max((v - 1.0).abs()));
    }

    let x: Vec<Vec<f64>> = (0..200).map(|_| normal(&mut r, len)).collect();
    let y: Vec<Vec<f64>> = (0..200).map(|_| normal(&mut r, len)).collect();
    let (_, m) = msc(&x, &y, fs).unwrap();
    let noise_mean = m.iter().sum::<f64>() / m.len() as f64;

    Outcome::new(
        lo >= 0.0 && hi <= 1.0 && linear_err <= 1e-9 && noise_mean <= 0.05,
        format!(
            "band features in [{lo:.4}, {hi:.4}], linear |MSC-1| {linear_err:.2e} (<= 1e-9), white-noise mean MSC {noise_mean:.4} (<= 0.05)"
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn sse(points: &[Vec<f64>], members: &[usize]) -> f64 {
    let d = points[0].len();
    let mut c = vec![0.0; d];
    for &i in members {
        for (a, v) in c.iter_mut().zip(&points[i]) {
            *a += v / members.len() as f64;
        }
    }
    members
        .iter()
        .map(|&i| points[i].iter().zip(&c).map(|(v, m)| (v - m).powi(2)).sum::<f64>())
        .sum()
}

/// Greedy agglomeration that scores every candidate merge by recomputing the
/// within-cluster sum of squares from scratch. Returns the partition at every
/// cluster count (index `m`) and the merge costs.
fn brute_ward(points: &[Vec<f64>]) -> (Vec<Vec<usize>>, Vec<f64>) {
    let n = points.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut by_m = vec![Vec::new(); n + 1];
    let mut costs = Vec::new();
    let labels = |cl: &Vec<Vec<usize>>| {
        let mut l = vec![0; n];
        for (c, members) in cl.iter().enumerate() {
            for &i in members {
                l[i] = c;
            }
        }
        l
    };
    by_m[n] = labels(&clusters);
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut both = clusters[a].clone();
                both.extend(&clusters[b]);
                let cost = sse(points, &both) - sse(points, &clusters[a]) - sse(points, &clusters[b]);
                if cost < best.0 {
                    best = (cost, a, b);
                }
            }
        }
        let moved = clusters.remove(best.2);
        clusters[best.1].extend(moved);
        costs.push(best.0);
        by_m[clusters.len()] = labels(&clusters);
    }
    (by_m, costs)
}

fn exhaustive_two_means(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    (1..(1u32 << n) - 1)
        .map(|mask| {
            let a: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let b: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
            sse(points, &a) + sse(points, &b)
        })
        .fold(f64::INFINITY, f64::min)
}

fn clustering_oracles() -> Outcome {
    let mut r = rng(3);
    let mut ward_mismatch = 0;
    let mut ward_cost_err = 0.0f64;
    for _ in 0..30 {
        let pts: Vec<Vec<f64>> = (0..7).map(|_| normal(&mut r, 3)).collect();
        let (want, costs) = brute_ward(&pts);
        let dendro = Dendrogram::build(&PointSet::new(pts.clone()).unwrap());
        for (merge, c) in dendro.merges().iter().zip(&costs) {
            ward_cost_err = ward_cost_err.max((merge.cost - c).abs());
        }
        for m in 1..=7 {
            if dendro.cut(m).assignment() != Partition::from_labels(&want[m]).assignment() {
                ward_mismatch += 1;
            }
        }
    }

    let mut kmeans_gap = 0.0f64;
    for s in 0..30 {
        let pts: Vec<Vec<f64>> = (0..6).map(|_| normal(&mut r, 2)).collect();
        let best = exhaustive_two_means(&pts);
        let got = KMeans::default().fit(&PointSet::new(pts.clone()).unwrap(), 2, s).unwrap();
        kmeans_gap = kmeans_gap.max((got.inertia - best).abs() / best.max(1e-12));
    }

    let mut min_ari = f64::INFINITY;
    for s in 0..20u64 {
        let mut br = rng(1000 + s);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, centre) in [[0.0, 0.0], [6.0, 6.0]].iter().enumerate() {
            for _ in 0..30 {
                let d = normal(&mut br, 2);
                pts.push(vec![centre[0] + 0.5 * d[0], centre[1] + 0.5 * d[1]]);
                truth.push(c);
            }
        }
        let ps = PointSet::new(pts).unwrap();
        let (embedding, _) = SpectralEmbedding::compute_or_densify(&ps, &SimilarityGraph::default()).unwrap();
        let got = embedding.cluster(2, s).unwrap();
        min_ari = min_ari.min(adjusted_rand_index(&got, &Partition::from_labels(&truth)));
    }

    Outcome::new(
        ward_mismatch == 0 && ward_cost_err < 1e-9 && kmeans_gap < 1e-9 && min_ari == 1.0,
        format!(
            "ward mismatches {ward_mismatch}/210 (max merge-cost err {ward_cost_err:.1e}), k-means gap to exhaustive {kmeans_gap:.1e}, spectral min ARI {min_ari}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn consensus_algebra() -> Outcome {
    let mut r = rng(4);
    let mut bad = Vec::new();
    let sigmas = [0.0, 0.25, 0.4, 0.5, 0.6, 0.75, 0.99];
    for case in 0..50 {
        let n = r.random_range(5..=60);
        let ka = r.random_range(1..=8);
        let kb = r.random_range(1..=8);
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| r.random_range(0..kb)).collect();
        let cm = consensus_matrix(&[
            similarity_matrix(&Partition::from_labels(&a)),
            similarity_matrix(&Partition::from_labels(&b)),
        ])
        .unwrap();
        for i in 0..n {
            for j in 0..n {
                let v = cm.get(i, j);
                let want = ((a[i] == a[j]) as u8 + (b[i] == b[j]) as u8) as f64 / 2.0;
                if v != cm.get(j, i) || v != want || ![0.0, 0.5, 1.0].contains(&v) || (i == j && v != 1.0) {
                    bad.push(format!("case {case} entry ({i},{j}) = {v}"));
                }
            }
        }
        let survivors = |s: f64, nu: usize| consensus_filter(&cm, s, nu);
        for (si, &s) in sigmas.iter().enumerate() {
            for nu in 0..n {
                let here = survivors(s, nu);
                let next_nu = survivors(s, nu + 1);
                if !next_nu.iter().all(|f| here.contains(f)) {
                    bad.push(format!("case {case}: nu {nu}->{} not nested at sigma {s}", nu + 1));
                }
                if let Some(&s2) = sigmas.get(si + 1) {
                    if !survivors(s2, nu).iter().all(|f| here.contains(f)) {
                        bad.push(format!("case {case}: sigma {s}->{s2} not nested at nu {nu}"));
                    }
                }
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        match bad.first() {
            None => "50 partition pairs: symmetric, unit diagonal, entries in {0, 0.5, 1}; filter nested over the (sigma, nu) lattice".into(),
            Some(first) => format!("{} violations, first: {first}", bad.len()),
        },
    )
}

// ---------------------------------------------------------------- criterion 5

fn knn(rows: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    (0..rows.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..rows.len()).filter(|&j| j != i).map(|j| (d2(&rows[i], &rows[j]), j)).collect();
            others.sort_by(|a, b| a.partial_cmp(b).unwrap());
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Smallest distance from `s` to any segment `x_i -> x_n` with `n` among the
/// `k` nearest minority neighbours of `i`.
fn segment_residual(s: &[f64], minority: &[Vec<f64>], neighbours: &[Vec<usize>]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, nn) in neighbours.iter().enumerate() {
        let x = &minority[i];
        for &n in nn {
            let dir: Vec<f64> = minority[n].iter().zip(x).map(|(b, a)| b - a).collect();
            let len2: f64 = dir.iter().map(|v| v * v).sum();
            let u = (s.iter().zip(x).zip(&dir).map(|((sv, xv), dv)| (sv - xv) * dv).sum::<f64>() / len2).clamp(0.0, 1.0);
            let res = s.iter().zip(x).zip(&dir).map(|((sv, xv), dv)| (sv - xv - u * dv).powi(2)).sum::<f64>().sqrt();
            best = best.min(res);
        }
    }
    best
}

fn smote_geometry() -> Outcome {
    let mut r = rng(5);
    let cols = 352;
    let (n1, n2) = (672, 456);
    let rows: Vec<Vec<f64>> = (0..n1 + n2).map(|_| (0..cols).map(|_| r.random::<f64>()).collect()).collect();
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Class1, n1).chain(std::iter::repeat_n(Label::Class2, n2)).collect();
    labels.shuffle(&mut r);
    let input_counts = [
        labels.iter().filter(|&&l| l == Label::Class1).count(),
        labels.iter().filter(|&&l| l == Label::Class2).count(),
    ];
    let (out_rows, out_labels) = balance(&rows, &labels, 5, 11).unwrap();
    let counts = [
        out_labels.iter().filter(|&&l| l == Label::Class1).count(),
        out_labels.iter().filter(|&&l| l == Label::Class2).count(),
    ];
    let originals_kept = out_rows[..rows.len()] == rows[..] && out_labels[..labels.len()] == labels[..];

    let minority: Vec<Vec<f64>> = rows.iter().zip(&labels).filter(|(_, &l)| l == Label::Class2).map(|(x, _)| x.clone()).collect();
    let neighbours = knn(&minority, 5);
    let mut worst = out_rows[rows.len()..]
        .iter()
        .map(|s| segment_residual(s, &minority, &neighbours))
        .fold(0.0, f64::max);

    // A low-dimensional direct call, where off-segment points would be obvious.
    let small: Vec<Vec<f64>> = (0..30).map(|_| normal(&mut r, 2)).collect();
    let small_nn = knn(&small, 5);
    for s in smote(&small, 90, 5, 3).unwrap() {
        worst = worst.max(segment_residual(&s, &small, &small_nn));
    }

    Outcome::new(
        input_counts == [n1, n2] && counts == [672, 672] && originals_kept && worst <= 1e-9,
        format!(
            "{}/{} -> {}/{} rows, max segment residual {worst:.1e} (<= 1e-9)",
            input_counts[0], input_counts[1], counts[0], counts[1]
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

/// Largest violation of the KKT conditions of the soft-margin dual, measured
/// on the margins `y_i f(x_i)` of the returned multipliers and bias.
fn kkt_violation(rows: &[Vec<f64>], kernel: &Kernel, sol: &svm::DualSolution, c: f64) -> f64 {
    let n = rows.len();
    (0..n)
        .map(|i| {
            let f: f64 = (0..n).map(|j| sol.alpha[j] * sol.y[j] * kernel.eval(&rows[j], &rows[i])).sum::<f64>() + sol.bias;
            let margin = sol.y[i] * f;
            let a = sol.alpha[i];
            if a < -1e-12 || a > c + 1e-12 {
                f64::INFINITY
            } else if a <= 1e-12 {
                (1.0 - margin).max(0.0)
            } else if a >= c - 1e-12 {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn svm_correctness() -> Outcome {
    let mut r = rng(6);
    let mut worst_kkt = 0.0f64;
    let mut worst_eq = 0.0f64;
    for p in 0..20 {
        let n = r.random_range(10..=40);
        let d = r.random_range(2..=4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| normal(&mut r, d)).collect();
        let mut labels: Vec<Label> = (0..n).map(|_| if r.random::<bool>() { Label::Class1 } else { Label::Class2 }).collect();
        labels[0] = Label::Class1;
        labels[1] = Label::Class2;
        let kernel = if p % 2 == 0 { KernelKind::Linear } else { KernelKind::Rbf };
        let c = [0.5, 1.0, 10.0][p % 3];
        let params = SvmParams { kernel, c, ..SvmParams::default() };
        let (k, sol) = svm::solve(&rows, &labels, &params).unwrap();
        worst_kkt = worst_kkt.max(kkt_violation(&rows, &k, &sol, c));
        worst_eq = worst_eq.max(sol.alpha.iter().zip(&sol.y).map(|(a, y)| a * y).sum::<f64>().abs());
    }

    let mut sep_rows = Vec::new();
    let mut sep_labels = Vec::new();
    for i in 0..40 {
        let (centre, l) = if i % 2 == 0 { (-2.0, Label::Class1) } else { (2.0, Label::Class2) };
        let d = normal(&mut r, 2);
        sep_rows.push(vec![centre + 0.3 * d[0], centre + 0.3 * d[1]]);
        sep_labels.push(l);
    }
    let lin = SvmParams { kernel: KernelKind::Linear, c: 10.0, ..SvmParams::default() };
    let model = svm::train(&sep_rows, &sep_labels, &lin).unwrap();
    let sep_acc = svm::accuracy(&model.predict(&sep_rows).unwrap(), &sep_labels).unwrap();

    let mut xor_rows = Vec::new();
    let mut xor_labels = Vec::new();
    for i in 0..40 {
        let (x, y) = ((i % 2) as f64, ((i / 2) % 2) as f64);
        let d = normal(&mut r, 2);
        xor_rows.push(vec![x + 0.05 * d[0], y + 0.05 * d[1]]);
        xor_labels.push(if x == y { Label::Class1 } else { Label::Class2 });
    }
    let fit = |kernel| {
        let params = SvmParams { kernel, c: 100.0, gamma: Gamma::Value(5.0), ..SvmParams::default() };
        let m = svm::train(&xor_rows, &xor_labels, &params).unwrap();
        svm::accuracy(&m.predict(&xor_rows).unwrap(), &xor_labels).unwrap()
    };
    let (xor_rbf, xor_lin) = (fit(KernelKind::Rbf), fit(KernelKind::Linear));

    Outcome::new(
        worst_kkt < 1e-3 && worst_eq <= 1e-6 && sep_acc == 1.0 && xor_rbf == 1.0 && xor_lin < 1.0,
        format!(
            "max KKT residual {worst_kkt:.2e} (< 1e-3), max |sum alpha y| {worst_eq:.1e} (<= 1e-6), separable acc {sep_acc}, XOR rbf {xor_rbf} vs linear {xor_lin}"
        ),
    )
}

// ------------------------------------------------------------ criteria 7 to 9

fn path_arg(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn fesc(args: &[&str]) -> i32 {
    cli::run(std::iter::once("fesc").chain(args.iter().copied()))
}

fn read_report(dir: &Path) -> CvReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn columns(report: &CvReport) -> Vec<usize> {
    report.selected_features.iter().map(|f| f.column).collect()
}

struct Planted {
    dir: tempfile::TempDir,
    features: PathBuf,
    config: PathBuf,
    rbf: Option<CvReport>,
}

fn run_kernel(p: &Planted, features: &Path, kernel: &str, out: &str) -> Option<CvReport> {
    let out = p.dir.path().join(out);
    let code = fesc(&["--jobs", "4", "--config", &path_arg(&p.config), "--kernel", kernel, "run", &path_arg(features), "--out", &path_arg(&out)]);
    (code == 0).then(|| read_report(&out))
}

fn planted_recovery(p: &mut Planted) -> Outcome {
    let spec_path = data_dir().join("planted.json");
    let truth = SynthSpec::load(&spec_path).unwrap().ground_truth_columns();
    let data = p.dir.path().join("data");
    if fesc(&["synth", &path_arg(&spec_path), "--out", &path_arg(&data)]) != 0 {
        return Outcome::new(false, "synth failed");
    }
    if fesc(&["--config", &path_arg(&p.config), "features", &path_arg(&data), "--out", &path_arg(&p.features)]) != 0 {
        return Outcome::new(false, "features failed");
    }
    let (Some(rbf), Some(lin)) = (run_kernel(p, &p.features, "rbf", "rbf"), run_kernel(p, &p.features, "linear", "linear")) else {
        return Outcome::new(false, "run failed");
    };
    let found = columns(&rbf).iter().filter(|c| truth.contains(c)).count();
    let outcome = Outcome::new(
        truth.len() == 10 && found >= 7 && rbf.holdout_accuracy >= 0.90 && rbf.holdout_accuracy > lin.holdout_accuracy,
        format!(
            "{found}/{} planted columns in {} selected (>= 7), rbf holdout {:.4} (>= 0.90) at gamma [{}, {}, {}], linear holdout {:.4}",
            truth.len(),
            rbf.selected_features.len(),
            rbf.holdout_accuracy,
            rbf.gamma.m,
            rbf.gamma.sigma,
            rbf.gamma.nu,
            lin.holdout_accuracy
        ),
    );
    p.rbf = Some(rbf);
    outcome
}

fn no_leakage(p: &Planted) -> Outcome {
    let Some(base) = &p.rbf else {
        return Outcome::new(false, "needs the planted-recovery run");
    };
    let mut fm = FeatureMatrix::read_csv(&p.features).unwrap();
    let cfg = PipelineConfig::load(&p.config).unwrap();
    let plan = pipeline::split_plan(&fm, &cfg).unwrap();
    let mut r = rng(8);
    for &row in &plan.holdout {
        for v in fm.values[row].iter_mut() {
            *v = r.random();
        }
    }
    let noisy = p.dir.path().join("noisy.csv");
    fm.write_csv(&noisy).unwrap();
    let Some(perturbed) = run_kernel(p, &noisy, "rbf", "noisy") else {
        return Outcome::new(false, "run on perturbed holdout failed");
    };
    let Some(_) = run_kernel(p, &p.features, "rbf", "repeat") else {
        return Outcome::new(false, "repeat run failed");
    };
    let first = std::fs::read(p.dir.path().join("rbf/report.json")).unwrap();
    let second = std::fs::read(p.dir.path().join("repeat/report.json")).unwrap();
    let same_gamma = perturbed.gamma == base.gamma;
    let same_features = columns(&perturbed) == columns(base);
    Outcome::new(
        same_gamma && same_features && first == second,
        format!(
            "{} holdout rows replaced: gamma unchanged {same_gamma}, selected features unchanged {same_features}; repeat report.json byte-identical {}",
            plan.holdout.len(),
            first == second
        ),
    )
}

fn infeasibility(p: &Planted) -> Outcome {
    let fm = FeatureMatrix::read_csv(&p.features).unwrap();
    let nu = fm.n_features() + 48;
    let cfg = p.dir.path().join("infeasible.toml");
    std::fs::write(&cfg, format!("seed = 42\n\n[preprocess]\nrectify_emg = false\n\n[grid]\nm = [50, 60]\nsigma = [0.4, 0.6]\nnu = [{nu}]\n")).unwrap();
    let out = p.dir.path().join("infeasible");
    let code = fesc(&["--jobs", "4", "--config", &path_arg(&cfg), "run", &path_arg(&p.features), "--out", &path_arg(&out)]);
    let mut cells = 0;
    let mut filled = 0;
    let mut grids = 0;
    for entry in std::fs::read_dir(&out).into_iter().flatten().flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.starts_with("grid_") {
            continue;
        }
        grids += 1;
        for line in std::fs::read_to_string(entry.path()).unwrap().lines().skip(1) {
            for cell in line.split(',').skip(2) {
                cells += 1;
                filled += usize::from(!cell.is_empty());
            }
        }
    }
    Outcome::new(
        code == cli::EXIT_INFEASIBLE && grids > 0 && cells > 0 && filled == 0 && !out.join("report.json").exists(),
        format!("nu {nu} over {} features: exit {code} (3), {filled}/{cells} grid cells filled across {grids} folds", fm.n_features()),
    )
}

// ----------------------------------------------------------------------- main

fn report(n: usize, limit: Duration, outcome: Outcome, elapsed: Duration) -> bool {
    let pass = outcome.pass && elapsed <= limit;
    println!(
        "criterion {n}: {} {} [{:.2} s, limit {} s]",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;
    let fast: [(usize, Duration, fn() -> Outcome); 6] = [
        (1, secs(1), spectral_oracle),
        (2, secs(10), msc_bounds),
        (3, secs(30), clustering_oracles),
        (4, secs(5), consensus_algebra),
        (5, secs(5), smote_geometry),
        (6, secs(10), svm_correctness),
    ];
    for (n, limit, f) in fast {
        let (o, t) = timed(f);
        all &= report(n, limit, o, t);
    }

    let dir = tempfile::tempdir().unwrap();
    let mut planted = Planted {
        features: dir.path().join("features.csv"),
        config: data_dir().join("planted.toml"),
        dir,
        rbf: None,
    };
    let (o, t) = timed(|| planted_recovery(&mut planted));
    all &= report(7, secs(300), o, t);
    let (o, t) = timed(|| no_leakage(&planted));
    all &= report(8, secs(600), o, t);
    let (o, t) = timed(|| infeasibility(&planted));
    all &= report(9, secs(60), o, t);

    if !all {
        std::process::exit(1);
    }
}
