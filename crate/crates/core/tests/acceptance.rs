//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topic_diffusion::alignment::{hungarian, CostMatrix};
use topic_diffusion::cli::run_cli;
use topic_diffusion::divergence::{chi2_quantile, gjs, gjs_threshold, jsd_pair, uniform_weights, ProbDist, ThresholdParams};
use topic_diffusion::factorization::{fit_array, normalize, FitOptions};
use topic_diffusion::pipeline::{self, Convergence, RunConfig};
use topic_diffusion::synthetic::{self, PlantedSpec, DRIFT_TERM, STABLE_TERM};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> ProbDist {
    let mut v: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    ProbDist::new(v.iter().map(|x| x / s).collect()).expect("normalized")
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn threshold_formula() -> Outcome {
    let thr = gjs_threshold(ThresholdParams::new(10, 6, 0.01).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let q = chi2_quantile(45, 0.99).map_err(|e| e.to_string())?;
    check((thr - 0.2532).abs() <= 1e-3, format!("threshold {thr}"))?;
    check((q - 69.957).abs() <= 1e-2, format!("quantile {q}"))?;
    Ok(format!("threshold {thr:.5}, chi2(45, 0.99) {q:.4}"))
}

fn worked_matching() -> Outcome {
    let dist = |a: f64| ProbDist::new(vec![a, 1.0 - a]).expect("valid");
    let earlier = [dist(0.5), dist(0.1), dist(0.9)];
    let later = [dist(0.8), dist(0.4), dist(0.1)];
    let values = Array2::from_shape_fn((3, 3), |(a, b)| jsd_pair(&earlier[a], &later[b]).expect("same length"));
    let assignment = hungarian(&CostMatrix::new(values)).map_err(|e| e.to_string())?;
    let pairs: Vec<String> = assignment.perm.iter().enumerate().map(|(a, b)| format!("{}->{}", a + 1, b + 1)).collect();
    check(assignment.perm == [1, 2, 0], format!("got {}", pairs.join(", ")))?;
    Ok(pairs.join(", "))
}

fn brute_force_min(cost: &Array2<f64>) -> f64 {
    fn rec(cost: &Array2<f64>, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        let k = cost.nrows();
        if row == k {
            *best = best.min(acc);
            return;
        }
        for col in 0..k {
            if !used[col] {
                used[col] = true;
                rec(cost, row + 1, used, acc + cost[[row, col]], best);
                used[col] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.nrows()], 0.0, &mut best);
    best
}

fn hungarian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let k = 2 + case % 5;
        // even cases use small integers so ties are common
        let values = if case % 2 == 0 {
            Array2::from_shape_fn((k, k), |_| rng.random_range(0..6) as f64)
        } else {
            Array2::from_shape_fn((k, k), |_| rng.random::<f64>())
        };
        let a = hungarian(&CostMatrix::new(values.clone())).map_err(|e| e.to_string())?;
        let along: f64 = a.perm.iter().enumerate().map(|(r, &c)| values[[r, c]]).sum();
        let best = brute_force_min(&values);
        check(
            along == best && a.total_cost == best,
            format!("case {case} (k={k}): hungarian {} vs brute force {best}", a.total_cost),
        )?;
    }
    Ok("200 matrices, k in 2..=6, exact match".into())
}

fn factorization_properties() -> Outcome {
    for (seed, theta) in [(1u64, 0.0), (2, 0.4)] {
        let x = uniform_matrix(100, 200, seed);
        let opts = FitOptions {
            k: 10,
            theta,
            seed,
            ..FitOptions::default()
        };
        let model = fit_array(&x, &opts).map_err(|e| e.to_string())?;
        for (i, pair) in model.objective_trace.windows(2).enumerate() {
            check(
                pair[1] <= pair[0] * (1.0 + 1e-9),
                format!("theta {theta}: objective rose at sweep {}: {} -> {}", i + 2, pair[0], pair[1]),
            )?;
        }
        // truncated fits replay the same sweeps
        for stop in [1, 2, 5, 20, 100, model.iterations_run] {
            let partial = fit_array(&x, &FitOptions { max_iter: stop, ..opts.clone() }).map_err(|e| e.to_string())?;
            check(
                partial.w.iter().chain(partial.h.iter()).all(|&v| v >= 0.0),
                format!("theta {theta}: negative entry after {stop} sweeps"),
            )?;
        }
        let normalized = normalize(&model, "bench");
        let direct = model.reconstruct();
        let rel = frobenius(&(&normalized.reconstruct() - &direct)) / frobenius(&direct);
        check(rel <= 1e-10, format!("theta {theta}: normalization identity off by {rel:e}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let w0 = Array2::from_shape_fn((50, 5), |_| rng.random::<f64>());
    let h0 = Array2::from_shape_fn((5, 80), |_| rng.random::<f64>());
    let x = w0.dot(&h0);
    let opts = FitOptions {
        k: 5,
        theta: 0.0,
        max_iter: 2000,
        rel_tol: 1e-12,
        seed: 3,
    };
    let model = fit_array(&x, &opts).map_err(|e| e.to_string())?;
    let rel = frobenius(&(&x - &model.reconstruct())) / frobenius(&x);
    check(rel < 1e-2, format!("planted rank-5 relative error {rel:e}"))?;
    Ok(format!("monotone, non-negative, identity holds; planted rank-5 error {rel:.2e} in {} sweeps", model.iterations_run))
}

fn divergence_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for case in 0..1000 {
        let n = rng.random_range(2..=8);
        let t = rng.random_range(2..=6);
        let dists: Vec<ProbDist> = (0..t).map(|_| random_dist(&mut rng, n)).collect();
        let base = n.max(2);
        let weights = if case % 2 == 0 {
            uniform_weights(t)
        } else {
            let raw: Vec<f64> = (0..t).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|w| w / s).collect()
        };
        let g = gjs(&dists, &weights, base).map_err(|e| e.to_string())?.value;
        lo = lo.min(g);
        hi = hi.max(g);
        check((-1e-12..=1.0 + 1e-12).contains(&g), format!("case {case}: gjs {g} out of range"))?;

        let same = vec![dists[0].clone(); t];
        let zero = gjs(&same, &weights, base).map_err(|e| e.to_string())?.value;
        check(zero.abs() <= 1e-12, format!("case {case}: identical inputs give {zero}"))?;

        let mut shuffled = dists.clone();
        shuffled.shuffle(&mut rng);
        let a = gjs(&dists, &uniform_weights(t), base).map_err(|e| e.to_string())?.value;
        let b = gjs(&shuffled, &uniform_weights(t), base).map_err(|e| e.to_string())?.value;
        check((a - b).abs() <= 1e-12, format!("case {case}: permutation changed gjs {a} -> {b}"))?;

        let pair = gjs(&dists[..2], &uniform_weights(2), 2).map_err(|e| e.to_string())?.value;
        let jsd = jsd_pair(&dists[0], &dists[1]).map_err(|e| e.to_string())?;
        check((pair - jsd).abs() <= 1e-12, format!("case {case}: gjs(t=2) {pair} vs jsd {jsd}"))?;
    }
    let point = |i: usize| ProbDist::new(if i == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).expect("valid");
    let disjoint = gjs(&[point(0), point(1)], &uniform_weights(2), 2).map_err(|e| e.to_string())?.value;
    check((disjoint - 1.0).abs() <= 1e-12, format!("disjoint point masses give {disjoint}"))?;
    Ok(format!("1000 random inputs in [{lo:.3e}, {hi:.4}]; disjoint masses {disjoint}"))
}

fn planted_diffusion() -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let corpus = synthetic::generate(&PlantedSpec {
            seed,
            ..PlantedSpec::default()
        });
        let moved = corpus.drift_posterior[0]
            .iter()
            .zip(&corpus.drift_posterior[1])
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        check(moved >= 0.6, format!("seed {seed}: planted drift moves only {moved}"))?;
        check(
            corpus.stable_posterior.windows(2).all(|w| w[0] == w[1]),
            format!("seed {seed}: planted stable posterior varies"),
        )?;

        let mut config = RunConfig::new(corpus.plan.clone());
        config.alpha = 0.01;
        config.fit.k = 5;
        config.fit.theta = 0.0;
        config.fit.rel_tol = 1e-9;
        config.fit.seed = seed;
        let result = pipeline::run(&corpus.docs, &corpus.dictionary, &config).map_err(|e| e.to_string())?;
        let verdict = |name: &str| {
            let idx = corpus.dictionary.index_of(name).expect("marker term");
            result
                .series
                .iter()
                .zip(&result.classifications)
                .find(|(s, _)| s.term == idx)
                .map(|(_, c)| c.convergence)
        };
        if verdict(DRIFT_TERM) == Some(Convergence::Divergent) && verdict(STABLE_TERM) == Some(Convergence::Convergent) {
            hits += 1;
        } else {
            misses.push(seed);
        }
    }
    check(hits >= 18, format!("{hits}/20 runs correct, misses {misses:?}"))?;
    Ok(format!("{hits}/20 runs correct, misses {misses:?}"))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                acc.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(root, root, &mut acc);
    acc
}

fn run_determinism() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let config = data.join("smoke_config.json");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for name in ["first", "second"] {
        let out = tmp.path().join(name);
        let args = [
            "topic-diffusion".as_ref(),
            "run".as_ref(),
            "--config".as_ref(),
            config.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ];
        let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
        let code = run_cli(args, &mut stdout, &mut stderr);
        check(code == 0, format!("run exited {code}: {}", String::from_utf8_lossy(&stderr)))?;
        trees.push(tree(&out));
    }
    check(!trees[0].is_empty(), "empty output tree")?;
    check(trees[0] == trees[1], "output trees differ")?;
    Ok(format!("{} files byte-identical", trees[0].len()))
}

fn sparseness_direction() -> Outcome {
    let x = uniform_matrix(100, 200, 8);
    let fraction = |theta: f64| -> Result<f64, String> {
        let opts = FitOptions {
            k: 10,
            theta,
            seed: 8,
            ..FitOptions::default()
        };
        let model = normalize(&fit_array(&x, &opts).map_err(|e| e.to_string())?, "bench");
        let small = model.h_hat.iter().filter(|&&v| v < 1e-4).count();
        Ok(small as f64 / model.h_hat.len() as f64)
    };
    let (smooth, plain) = (fraction(0.5)?, fraction(0.0)?);
    check(smooth >= plain, format!("theta 0.5 fraction {smooth} < theta 0 fraction {plain}"))?;
    Ok(format!("fraction below 1e-4: {smooth:.4} at theta 0.5 vs {plain:.4} at theta 0"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 threshold formula", threshold_formula, Duration::from_secs(1)),
        ("2 worked matching example", worked_matching, Duration::from_secs(1)),
        ("3 hungarian oracle equivalence", hungarian_oracle, Duration::from_secs(5)),
        ("4 factorization properties", factorization_properties, Duration::from_secs(30)),
        ("5 divergence suite", divergence_suite, Duration::from_secs(5)),
        ("6 planted diffusion", planted_diffusion, Duration::from_secs(60)),
        ("7 run determinism", run_determinism, Duration::from_secs(30)),
        ("8 sparseness direction", sparseness_direction, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (name, criterion, budget) in criteria {
        let start = Instant::now();
        let outcome = criterion();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
