//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1-7 and 11 drive the library directly; 8-10 and 12 drive the
//! `dpxattn` binary and read its JSON reports.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

use dpxattn::dataset::write_matrix;
use dpxattn_core::adaptive::{AdaptiveIndex, AdaptiveParams};
use dpxattn_core::attention::{AttentionLayer, AttentionParams, Normalizer};
use dpxattn_core::distance::{DistanceIndex, DistanceMode, DistanceParams};
use dpxattn_core::dptree::DpTree;
use dpxattn_core::highdim::{HighDimIndex, HighDimParams};
use dpxattn_core::kernel::KernelParams;
use dpxattn_core::noise::NoiseSpec;
use dpxattn_core::oracle::{exact_weighted_lp, truncated_exp_multinomial};
use dpxattn_core::softmax::{SoftmaxIndex, SoftmaxParams};
use dpxattn_core::{total_draws, Matrix, Noise, NoiseRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn dpx(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dpxattn"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_report(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("temp paths are UTF-8")
}

fn gen(dir: &Path, n: usize, d: usize, m: usize, seed: u64) -> Result<(), String> {
    let (n, d, m, seed) = (n.to_string(), d.to_string(), m.to_string(), seed.to_string());
    dpx(&["gen", "--n", &n, "--d", &d, "--m", &m, "--seed", &seed, "--out", p(dir)]).map(drop)
}

fn c1_sampler() -> Outcome {
    let start = Instant::now();
    let spec = NoiseSpec::new(1.0, 1.0, 0.1).map_err(|e| e.to_string())?;
    let mut rng = NoiseRng::from_seed(1);
    let n = 1_000_000;
    let (mut sum, mut sq, mut outside) = (0.0, 0.0, 0usize);
    for _ in 0..n {
        let x = spec.sample(&mut rng);
        sum += x;
        sq += x * x;
        outside += usize::from(x.abs() > spec.bound());
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    let rel = (var / spec.variance() - 1.0).abs();
    let secs = start.elapsed().as_secs_f64();
    check(
        mean.abs() <= 0.01 && rel <= 0.05 && outside == 0 && secs < 5.0,
        format!("mean {mean:.2e}, variance {var:.4} vs {:.4} ({:.2}%), {outside} outside ±{:.4}, {secs:.2}s", spec.variance(), rel * 100.0, spec.bound()),
    )
}

fn c2_tree_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_nodes = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=4096usize);
        // Integer entries keep every partial sum exact, so the comparison
        // can be bitwise.
        let values: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-1000..=1000i32))).collect();
        let tree = DpTree::build(&values, 2.0, 1.0, 0.01, &mut NoiseRng::from_seed(case), Noise::Disabled)
            .map_err(|e| e.to_string())?;
        let mut prefix = vec![0.0];
        for v in &values {
            prefix.push(prefix.last().unwrap() + v);
        }
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        let (x, y) = (a.min(b), a.max(b));
        let t = tree.true_query(x, y).map_err(|e| e.to_string())?;
        if t.to_bits() != (prefix[y] - prefix[x - 1]).to_bits() {
            return Err(format!("case {case}: n={n} [{x},{y}] tree {t} vs prefix {}", prefix[y] - prefix[x - 1]));
        }
        let nodes = tree.canonical_nodes(x, y).map_err(|e| e.to_string())?.len();
        let limit = 2 * tree.levels() as usize;
        if nodes > limit {
            return Err(format!("case {case}: {nodes} nodes > {limit}"));
        }
        worst_nodes = worst_nodes.max(nodes);
    }
    Ok(format!("1000 cases bitwise equal, at most {worst_nodes} canonical nodes"))
}

fn c3_tree_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut queries, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
    for trial in 0..200 {
        let n = rng.random_range(1..=4096usize);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let tree = DpTree::build(&values, 2.0, 1.0, 0.01, &mut NoiseRng::from_seed(trial), Noise::Enabled)
            .map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let a = rng.random_range(1..=n);
            let b = rng.random_range(1..=n);
            let (x, y) = (a.min(b), a.max(b));
            let r = tree.query(x, y).map_err(|e| e.to_string())?;
            let truth = tree.true_query(x, y).map_err(|e| e.to_string())?;
            let bound = r.node_count as f64 * tree.node_bound();
            let err = (r.value - truth).abs();
            worst = worst.max(err / bound);
            queries += 1;
            violations += usize::from(err > bound + 1e-9 * (1.0 + truth.abs()));
        }
    }
    check(violations == 0, format!("{queries} queries, {violations} violations, max err/bound {worst:.3}"))
}

fn c4_tree_sigma() -> Outcome {
    let n = 1024;
    let values: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
    let intervals = [(1, n), (2, n - 1), (3, 700)];
    let mut errors = vec![Vec::new(); intervals.len()];
    let mut predicted = vec![0.0; intervals.len()];
    for trial in 0..2000 {
        let tree = DpTree::build(&values, 2.0, 1.0, 0.01, &mut NoiseRng::from_seed(trial), Noise::Enabled)
            .map_err(|e| e.to_string())?;
        for (k, &(x, y)) in intervals.iter().enumerate() {
            let r = tree.query(x, y).map_err(|e| e.to_string())?;
            errors[k].push(r.value - tree.true_query(x, y).map_err(|e| e.to_string())?);
            predicted[k] = (r.node_count as f64 * tree.node_variance()).sqrt();
        }
    }
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, &(x, y)) in intervals.iter().enumerate() {
        let s = std_dev(&errors[k]);
        let rel = (s / predicted[k] - 1.0).abs();
        ok &= rel <= 0.10;
        parts.push(format!("[{x},{y}] σ {s:.1} vs {:.1} ({:.1}%)", predicted[k], rel * 100.0));
    }
    check(ok, parts.join("; "))
}

const NINE_X: [f64; 9] = [0.1, 0.3, 0.3, 0.3, 0.4, 0.6, 0.7, 0.9, 0.9];
const NINE_W: [f64; 9] = [2.2, 3.1, -2.0, -3.0, 2.0, 6.0, 0.5, -1.0, 1.0];

fn c5_nine_point() -> Outcome {
    let (radius, wb, alpha) = (1.0, 6.0, 0.1);
    let params = DistanceParams::new(radius, wb, 1.0, 0.01, DistanceMode::L1)
        .with_grid(10)
        .with_noise(Noise::Disabled);
    let idx = DistanceIndex::build(&NINE_X, &NINE_W, &params, &mut NoiseRng::from_seed(5)).map_err(|e| e.to_string())?;
    let exact = idx.exact_rounded_distance(0.0).map_err(|e| e.to_string())?;
    let shell = idx.distance_query(0.0, alpha).map_err(|e| e.to_string())?;
    let (lo, hi) = (4.4 * (1.0 - alpha) - 2.0 * wb * radius, 4.4 * (1.0 + alpha) + 2.0 * wb * radius);
    check(
        (exact - 4.4).abs() <= 1e-12 && (lo..=hi).contains(&shell),
        format!("exact rounded {exact:.15}, shell query {shell:.6} in [{lo:.2}, {hi:.2}]"),
    )
}

fn c6_distance_noisy() -> Outcome {
    let n = 512;
    let (alpha, y) = (0.3, 0.37);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    let params = DistanceParams::new(1.0, 1.0, 2.0, 0.01, DistanceMode::L1);
    let points = Matrix::new(n, 1, x.clone()).map_err(|e| e.to_string())?;
    let truth = exact_weighted_lp(&points, &w, &[y], 1).map_err(|e| e.to_string())?;
    let step = 1.0 / n as f64;
    let discretization: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (alpha * ((xi - y).abs() + step) + step)).sum();
    let (mut within, mut noise, mut variance) = (0usize, Vec::new(), 0.0);
    let trials = 1000;
    for t in 0..trials {
        let idx = DistanceIndex::build(&x, &w, &params, &mut NoiseRng::from_seed(600 + t)).map_err(|e| e.to_string())?;
        let est = idx.distance_query(y, alpha).map_err(|e| e.to_string())?;
        let bound = idx.noise_bound(y, alpha).map_err(|e| e.to_string())?;
        within += usize::from((est - truth).abs() <= discretization + bound);
        noise.push(est - idx.bucketed_distance(y, alpha).map_err(|e| e.to_string())?);
        variance = idx.noise_variance(y, alpha).map_err(|e| e.to_string())?;
    }
    let frac = within as f64 / trials as f64;
    let (s, pred) = (std_dev(&noise), variance.sqrt());
    let rel = (s / pred - 1.0).abs();
    check(frac >= 0.99 && rel <= 0.25, format!("{:.1}% within bound, σ {s:.2} vs {pred:.2} ({:.1}%)", frac * 100.0, rel * 100.0))
}

fn c7_kernel() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut pairs, mut bad, mut identity_checks, mut worst_identity) = (0usize, 0usize, 0usize, 0.0f64);
    for d in 1..=3usize {
        for radius in [1.0, 2.0] {
            for eps in [0.1, 0.05] {
                let k = KernelParams::select(d, radius, eps).map_err(|e| e.to_string())?;
                for _ in 0..1000 {
                    let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=radius)).collect();
                    let y: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=radius)).collect();
                    let exact = (x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / d as f64).exp();
                    let approx = k.approx_kernel(&x, &y).map_err(|e| e.to_string())?;
                    pairs += 1;
                    bad += usize::from((approx - exact).abs() > eps * exact);
                    if k.degree() <= 4 {
                        let oracle = truncated_exp_multinomial(&x, &y, k.degree()).map_err(|e| e.to_string())?;
                        worst_identity = worst_identity.max((approx - oracle).abs() / oracle);
                        identity_checks += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        bad == 0 && worst_identity <= 1e-10 && identity_checks > 0 && secs < 30.0,
        format!("{pairs} pairs, {bad} outside ε_s; identity on {identity_checks} pairs, max rel {worst_identity:.1e}; {secs:.2}s"),
    )
}

fn summary(report: &Value, label: &str) -> Result<Value, String> {
    report["summaries"]
        .as_array()
        .and_then(|s| s.iter().find(|x| x["label"] == label))
        .cloned()
        .ok_or_else(|| format!("no summary for {label}"))
}

fn c8_softmax() -> Outcome {
    let start = Instant::now();
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    gen(dir.path(), 256, 2, 8, 8)?;
    let rep = dir.path().join("r.json");
    dpx(&[
        "eval", "--data", p(dir.path()), "--mode", "softmax", "--trials", "200", "--alpha", "0.3", "--epsilon", "2",
        "--delta", "0.01", "--delta-prime", "0.01", "--epsilon-s", "0.05", "--report", p(&rep),
    ])?;
    let s = summary(&read_report(&rep)?, "softmax")?;
    let frac = s["within_fraction"].as_f64().unwrap_or(0.0);
    let secs = start.elapsed().as_secs_f64();
    check(
        frac >= 0.95 && s["count"] == 200 && secs < 300.0,
        format!("{:.1}% of {} trials within (α+ε_s)·truth + B_det, max err/bound {:.3}, {secs:.1}s", frac * 100.0, s["count"], s["max_error_over_bound"].as_f64().unwrap_or(f64::NAN)),
    )
}

fn c9_attack() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    gen(dir.path(), 128, 2, 1, 9)?;
    let rep = dir.path().join("r.json");
    dpx(&["attack", "--data", p(dir.path()), "--grid", "20", "--rounds", "100", "--report", p(&rep)])?;
    let report = read_report(&rep)?;
    let records = report["records"].as_array().ok_or("no records")?;
    let adaptive: Vec<&Value> = records.iter().filter(|r| r["label"] == "adaptive").collect();
    let violations = adaptive.iter().filter(|r| r["within_bound"] != true).count();
    let (a, s) = (summary(&report, "adaptive")?, summary(&report, "single")?);
    check(
        adaptive.len() == 100 && violations == 0 && s["count"] == 100,
        format!(
            "l={}, {} rounds, {violations} violations, worst error {:.3e} (bound ratio {:.3}); single copy worst {:.3e}",
            report["structure"]["copies"], adaptive.len(), a["max_abs_error"].as_f64().unwrap_or(f64::NAN),
            a["max_error_over_bound"].as_f64().unwrap_or(f64::NAN), s["max_abs_error"].as_f64().unwrap_or(f64::NAN)
        ),
    )
}

fn c10_attention() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    gen(dir.path(), 128, 2, 8, 10)?;
    let rep = dir.path().join("r.json");
    dpx(&["eval", "--data", p(dir.path()), "--mode", "attention", "--trials", "200", "--normalizer", "exact", "--report", p(&rep)])?;
    let s = summary(&read_report(&rep)?, "attention")?;
    let frac = s["within_fraction"].as_f64().unwrap_or(0.0);

    let one = TempDir::new().map_err(|e| e.to_string())?;
    let v = [0.4, -0.9];
    let w = |f: &str, m: Matrix, r: f64| write_matrix(&one.path().join(f), &m, r).map_err(|e| e.to_string());
    w("K.csv", Matrix::from_rows(&[[0.2, 0.6]]).unwrap(), 1.0)?;
    w("V.csv", Matrix::from_rows(&[v]).unwrap(), 1.0)?;
    w("Q.csv", Matrix::from_rows(&[[0.0, 0.0], [0.5, 1.0], [1.0, 1.0]]).unwrap(), 1.0)?;
    let out = one.path().join("out.csv");
    dpx(&["attn", "--data", p(one.path()), "--out", p(&out), "--noise", "off", "--unsafe-test"])?;
    let got = dpxattn::dataset::read_matrix(&out).map_err(|e| e.to_string())?.matrix;
    let exact_v = got.iter_rows().all(|r| r == v);
    check(
        frac >= 0.95 && s["count"] == 3200 && exact_v,
        format!("{:.2}% of {} entries within n^-1 bound, max err/bound {:.3}; n=1 returns V exactly: {exact_v}", frac * 100.0, s["count"], s["max_error_over_bound"].as_f64().unwrap_or(f64::NAN)),
    )
}

fn c11_audit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, d) = (48, 2);
    let k = Matrix::new(n, d, (0..n * d).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
    let v = Matrix::new(n, d, (0..n * d).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap();
    let w = v.column(0);
    let e = |x: dpxattn_core::Error| x.to_string();
    let mut seed = NoiseRng::from_seed(11);
    let tree = DpTree::build(&w, 2.0, 1.0, 0.01, &mut seed.fork(), Noise::Enabled).map_err(e)?;
    let dist = DistanceIndex::build(&k.column(0), &w, &DistanceParams::new(1.0, 1.0, 1.0, 0.01, DistanceMode::L1), &mut seed.fork()).map_err(e)?;
    let high = HighDimIndex::build(&k, &w, &HighDimParams::new(1.0, 1.0, 1.0, 0.01, 0.01, DistanceMode::L2Sq), &mut seed.fork()).map_err(e)?;
    let sp = SoftmaxParams::new(1.0, 1.0, 1.0, 0.01, 0.01, 0.1);
    let soft = SoftmaxIndex::build(&k, &w, &sp, &mut seed.fork()).map_err(e)?;
    let adaptive = AdaptiveIndex::build(&k, &w, &AdaptiveParams { copies: Some(7), ..AdaptiveParams::new(sp, 0.01) }, &mut seed.fork()).map_err(e)?;
    let layer = AttentionLayer::build(
        &k,
        &v,
        &AttentionParams { normalizer: Normalizer::Private, ..AttentionParams::new(AdaptiveParams { copies: Some(3), ..AdaptiveParams::new(sp, 0.01) }) },
        &mut seed.fork(),
    )
    .map_err(e)?;

    let before = total_draws();
    let mut queries = 0usize;
    for _ in 0..300 {
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        let alpha = rng.random_range(0.05..0.9);
        tree.query(a.min(b), a.max(b)).map_err(e)?;
        dist.distance_query(y[0], alpha).map_err(e)?;
        dist.noise_bound(y[0], alpha).map_err(e)?;
        high.distance_query(&y, alpha).map_err(e)?;
        soft.query(&y, alpha).map_err(e)?;
        soft.noise_bound(&y, alpha).map_err(e)?;
        adaptive.query(&y, alpha).map_err(e)?;
        layer.attend_row(&y, alpha).map_err(e)?;
        queries += 8;
    }
    let draws_after = total_draws() - before;

    // Neighbouring datasets: one weight replaced by any other in [-R_w, R_w].
    let rw = 1.0;
    let quiet = DistanceParams::new(1.0, rw, 1.0, 0.01, DistanceMode::L1).with_noise(Noise::Disabled);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mut w2 = w.clone();
        let i = rng.random_range(0..n);
        w2[i] = if rng.random_bool(0.5) { -w[i].signum() * rw } else { rng.random_range(-rw..=rw) };
        let a = DistanceIndex::build(&k.column(0), &w, &quiet, &mut NoiseRng::from_seed(0)).map_err(e)?;
        let b = DistanceIndex::build(&k.column(0), &w2, &quiet, &mut NoiseRng::from_seed(0)).map_err(e)?;
        for (x, y) in a.tree().exact_nodes().iter().zip(b.tree().exact_nodes()) {
            worst = worst.max((x - y).abs());
        }
    }
    check(
        draws_after == 0 && worst <= 2.0 * rw + 1e-12,
        format!("{queries} queries on 6 built structures drew {draws_after} times; max node difference {worst:.4} ≤ 2R_w = {}", 2.0 * rw),
    )
}

fn c12_reproducible() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let runs: Vec<Vec<&str>> = vec![
        vec!["eval", "--mode", "l1", "--trials", "10"],
        vec!["eval", "--mode", "l2sq", "--trials", "10"],
        vec!["eval", "--mode", "softmax", "--trials", "10"],
        vec!["eval", "--mode", "adaptive", "--trials", "3", "--noisy-scalars"],
        vec!["eval", "--mode", "attention", "--trials", "2", "--normalizer", "private"],
        vec!["attack", "--rounds", "20"],
        vec!["attn", "--compose-columns"],
    ];
    let mut checked = 0;
    let mut bytes = Vec::new();
    for rep in 0..2 {
        let data = dir.path().join(format!("data{rep}"));
        gen(&data, 64, 2, 4, 12)?;
        let mut outputs = Vec::new();
        for k in ["K.csv", "V.csv", "Q.csv"] {
            outputs.push(fs::read(data.join(k)).map_err(|e| e.to_string())?);
        }
        for (i, run) in runs.iter().enumerate() {
            let report = dir.path().join(format!("r{i}_{rep}.json"));
            let out = dir.path().join(format!("o{i}_{rep}.csv"));
            let mut args = vec![run[0], "--data", p(&data), "--seed", "12", "--report", p(&report)];
            args.extend(&run[1..]);
            if run[0] == "attn" {
                args.extend(["--out", p(&out)]);
            }
            let stdout = dpx(&args)?.replace(&format!("data{rep}"), "data").replace(&format!("_{rep}."), ".");
            outputs.push(stdout.into_bytes());
            outputs.push(fs::read(&report).map_err(|e| e.to_string())?);
            if run[0] == "attn" {
                outputs.push(fs::read(&out).map_err(|e| e.to_string())?);
            }
            checked += usize::from(rep == 0);
        }
        bytes.push(outputs);
    }
    let same = bytes[0] == bytes[1];
    check(same, format!("gen + {checked} commands rerun, {} artifacts byte-identical: {same}", bytes[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("truncated Laplace sampler", c1_sampler),
        ("tree exactness", c2_tree_exactness),
        ("tree deterministic error", c3_tree_bound),
        ("tree statistical error", c4_tree_sigma),
        ("distance noise off, nine-point instance", c5_nine_point),
        ("distance noisy", c6_distance_noisy),
        ("kernel approximation", c7_kernel),
        ("softmax end to end", c8_softmax),
        ("adaptive robustness", c9_attack),
        ("attention", c10_attention),
        ("privacy structure audit", c11_audit),
        ("reproducibility", c12_reproducible),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = fmt(start.elapsed());
        match outcome {
            Ok(d) => println!("PASS {:>2} {name} [{took}]: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{took}]: {d}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fmt(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}
