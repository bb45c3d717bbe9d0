//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any failure.

use std::path::Path;
use std::process::Command;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use stgraph_core::diffengine::gradcheck::{check_inputs, check_params, GradCheck, GradCheckConfig};
use stgraph_core::diffengine::layers::Linear;
use stgraph_core::diffengine::Conv1dGeometry;
use stgraph_core::encoders::{EncoderSpec, TcnEncoder};
use stgraph_core::graph::{gcn_operator, DiffPoolLevel, GcnLayer, SageLayer};
use stgraph_core::harness::{auc, plan_folds, InnerRole};
use stgraph_core::prep::{ledoit_wolf, threshold_edges, Label};
use stgraph_core::zoo::{Model, ModelName, ModelSpec, PredictionHead};
use stgraph_core::{Mode, ParamStore, Tape, Tensor};

type Outcome = Result<String, String>;

fn stgraph(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_stgraph"))
        .args(args)
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "stgraph {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

// ---------------------------------------------------------------- 1

fn head_count() -> usize {
    let mut store = ParamStore::<f64>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Linear::new(&mut store, "head", 256, 1, &mut rng);
    store.trainable_count()
}

fn criterion_1() -> Outcome {
    let expected = [
        ("mean_CNN", "1200", 1_248_545usize),
        ("mean_CNN_GCN5", "1200", 1_314_337),
        ("mean_CNN", "75", 101_665),
    ];
    for (model, length, want) in expected {
        let out = stgraph(&["params", "--model", model, "--length", length])?;
        let got: usize = out.trim().parse().map_err(|_| format!("unparsable params output {out:?}"))?;
        if got != want {
            return Err(format!("{model} T={length}: {got} != {want}"));
        }
    }
    if head_count() != 257 {
        return Err("head is not 257 parameters".into());
    }
    let lengths: Vec<usize> = (16..=80).chain([100, 160, 300, 599, 600, 1199, 1200]).collect();
    let count = |name: &str, t: usize| -> Result<usize, String> {
        let name: ModelName = name.parse().map_err(|e: stgraph_core::Error| e.to_string())?;
        let spec = ModelSpec::from_name(&name, None, 4, t, 50).map_err(|e| e.to_string())?;
        Ok(Model::<f32>::build(&spec).map_err(|e| e.to_string())?.parameter_count())
    };
    for &t in &lengths {
        let (base, gcn) = (count("mean_CNN", t)?, count("mean_CNN_GCN5", t)?);
        if gcn - base != 65_792 {
            return Err(format!("GCN delta {} at T={t}", gcn - base));
        }
    }
    Ok(format!("3 counts exact, GCN delta 65792 at {} lengths", lengths.len()))
}

// ---------------------------------------------------------------- 2

const GRAD_TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn cfg(seed: u64) -> GradCheckConfig {
    GradCheckConfig { seed, ..GradCheckConfig::default() }
}

fn random_adjacency(rng: &mut ChaCha8Rng, b: usize, n: usize) -> Vec<DMatrix<f64>> {
    (0..b)
        .map(|_| {
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.5) {
                        a[(i, j)] = 1.0;
                        a[(j, i)] = 1.0;
                    }
                }
            }
            a
        })
        .collect()
}

fn stack(mats: &[DMatrix<f64>]) -> Tensor<f64> {
    let n = mats[0].nrows();
    let mut data = Vec::with_capacity(mats.len() * n * n);
    for m in mats {
        for i in 0..n {
            for j in 0..n {
                data.push(m[(i, j)]);
            }
        }
    }
    Tensor::new(vec![mats.len(), n, n], data).unwrap()
}

fn grad_case(kind: usize, seed: u64) -> stgraph_core::Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        // conv1d: symmetric padding, stride, dilation
        0 | 1 => {
            let (b, c_in, c_out) = (rng.gen_range(1..3), rng.gen_range(1..4), rng.gen_range(1..4));
            let (k, stride, dilation) = (rng.gen_range(1..5), rng.gen_range(1..4), rng.gen_range(1..4));
            let geom = if kind == 0 {
                Conv1dGeometry::symmetric(stride, rng.gen_range(0..3), dilation)
            } else {
                Conv1dGeometry::causal(k, stride, dilation)
            };
            let len = dilation * (k - 1) + 1 + rng.gen_range(0..6);
            let inputs = [
                rand_tensor(&mut rng, &[b, c_in, len]),
                rand_tensor(&mut rng, &[c_out, c_in, k]),
                rand_tensor(&mut rng, &[c_out]),
            ];
            check_inputs(&inputs, cfg(seed), |t, v| t.conv1d(v[0], v[1], Some(v[2]), geom))
        }
        2 => {
            let (b, c, l) = (rng.gen_range(2..4), rng.gen_range(1..4), rng.gen_range(1..5));
            let inputs = [
                rand_tensor(&mut rng, &[b, c, l]),
                rand_tensor(&mut rng, &[c]),
                rand_tensor(&mut rng, &[c]),
            ];
            check_inputs(&inputs, cfg(seed), |t, v| Ok(t.batchnorm_train(v[0], v[1], v[2], 1e-5)?.0))
        }
        3 => {
            let (o, i, k) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4));
            let inputs = [rand_tensor(&mut rng, &[o, i, k]), rand_tensor(&mut rng, &[o])];
            check_inputs(&inputs, cfg(seed), |t, v| t.weight_norm(v[0], v[1]))
        }
        4 => {
            let (n, i, o) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5));
            let inputs = [
                rand_tensor(&mut rng, &[n, i]),
                rand_tensor(&mut rng, &[o, i]),
                rand_tensor(&mut rng, &[o]),
            ];
            check_inputs(&inputs, cfg(seed), |t, v| t.linear(v[0], v[1], Some(v[2])))
        }
        5 => {
            let (b, n, fi, fo) = (rng.gen_range(1..3), rng.gen_range(2..6), rng.gen_range(1..4), rng.gen_range(1..4));
            let ops: Vec<DMatrix<f64>> = random_adjacency(&mut rng, b, n)
                .iter()
                .map(|a| gcn_operator(a).unwrap())
                .collect();
            let op = stack(&ops);
            let mut store = ParamStore::<f64>::new();
            let layer = GcnLayer::new(&mut store, "gcn", fi, fo, &mut rng);
            let bias = rand_tensor(&mut rng, &[fo]);
            store.get_mut(layer.bias).value = bias;
            let h = store.add_param("h", rand_tensor(&mut rng, &[b, n, fi]));
            check_params(&mut store, cfg(seed), |t, s| {
                let hv = t.param(s, h);
                let o = t.constant(op.clone());
                layer.forward(t, s, hv, o)
            })
        }
        6 => {
            let (b, n, fi, fo) = (rng.gen_range(1..3), rng.gen_range(2..6), rng.gen_range(1..4), rng.gen_range(1..4));
            let adj = stack(&random_adjacency(&mut rng, b, n));
            let mut store = ParamStore::<f64>::new();
            let layer = SageLayer::new(&mut store, "sage", fi, fo, &mut rng);
            store.get_mut(layer.bias).value = rand_tensor(&mut rng, &[fo]);
            let h = store.add_param("h", rand_tensor(&mut rng, &[b, n, fi]));
            check_params(&mut store, cfg(seed), |t, s| {
                let hv = t.param(s, h);
                let a = t.constant(adj.clone());
                let m = t.row_normalize_clamped(a)?;
                layer.forward(t, s, hv, m)
            })
        }
        7 => {
            let (b, n, f) = (2, rng.gen_range(3..6), rng.gen_range(1..3));
            let clusters = rng.gen_range(1..n);
            let adj = stack(&random_adjacency(&mut rng, b, n));
            let mut store = ParamStore::<f64>::new();
            let level = DiffPoolLevel::with_clusters(&mut store, "pool", n, clusters, f, &mut rng);
            let x = store.add_param("x", rand_tensor(&mut rng, &[b, n, f]));
            let c = cfg(seed);
            let c = GradCheckConfig { max_entries: Some(6), ..c };
            check_params(&mut store, c, |t, s| {
                let xv = t.param(s, x);
                let a = t.constant(adj.clone());
                let out = level.forward(t, s, xv, a)?;
                let px = t.sum_squares(out.x);
                let pa = t.sum_squares(out.adjacency);
                let pa = t.scale(pa, 0.1);
                let total = t.add(px, pa)?;
                let total = t.add(total, out.link_loss)?;
                t.add(total, out.entropy)
            })
        }
        _ => {
            let (b, f) = (rng.gen_range(1..6), rng.gen_range(1..6));
            let mut store = ParamStore::<f64>::new();
            let head = PredictionHead { linear: Linear::new(&mut store, "head", f, 1, &mut rng), dropout: 0.0 };
            let h = store.add_param("h", rand_tensor(&mut rng, &[b, f]));
            let targets: Vec<f64> = (0..b).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
            check_params(&mut store, cfg(seed), |t, s| {
                let hv = t.param(s, h);
                let p = head.forward(t, s, hv)?;
                t.bce_loss(p, &targets)
            })
        }
    }
}

fn criterion_2() -> Outcome {
    const NAMES: [&str; 9] = [
        "conv1d", "conv1d_causal", "batchnorm", "weight_norm", "linear", "gcn", "graphsage", "diffpool", "bce_head",
    ];
    let per_kind = 12;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (kind, name) in NAMES.iter().enumerate() {
        for s in 0..per_kind {
            let seed = 1000 * kind as u64 + s;
            let r = grad_case(kind, seed).map_err(|e| format!("{name} seed {seed}: {e}"))?;
            if r.max_rel_error >= GRAD_TOL {
                return Err(format!("{name} seed {seed}: rel err {:.3e} at {:?}", r.max_rel_error, r.worst));
            }
            worst = worst.max(r.max_rel_error);
            cases += 1;
        }
    }
    Ok(format!("{cases} shapes, max rel err {worst:.2e}"))
}

// ---------------------------------------------------------------- 3

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                total += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    total / pairs
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for draw in 0..200 {
        let n = rng.gen_range(2..120);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let levels = if draw % 2 == 0 { 0 } else { rng.gen_range(2..6) };
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                if levels == 0 {
                    u
                } else {
                    (u * levels as f64).floor() / levels as f64
                }
            })
            .collect();
        let got = auc(&scores, &labels).map_err(|e| e.to_string())?;
        let diff = (got - brute_auc(&scores, &labels)).abs();
        if diff > 1e-12 {
            return Err(format!("draw {draw}: diff {diff:e}"));
        }
        worst = worst.max(diff);
    }
    Ok(format!("200 draws, max diff {worst:.1e}"))
}

// ---------------------------------------------------------------- 4

/// Direct form: per-observation outer products, no algebraic shortcuts.
fn ledoit_wolf_direct(x: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (t, n) = x.shape();
    let means: Vec<f64> = (0..n).map(|j| x.column(j).sum() / t as f64).collect();
    let rows: Vec<DMatrix<f64>> = (0..t)
        .map(|k| DMatrix::from_fn(n, 1, |j, _| x[(k, j)] - means[j]))
        .collect();
    let mut s = DMatrix::zeros(n, n);
    for r in &rows {
        s += r * r.transpose();
    }
    s /= t as f64;
    let mu = s.trace() / n as f64;
    let target = DMatrix::identity(n, n) * mu;
    let d2 = (&s - &target).norm_squared();
    let mut b2 = 0.0;
    for r in &rows {
        b2 += (r * r.transpose() - &s).norm_squared();
    }
    b2 /= (t * t) as f64;
    let rho = b2.min(d2) / d2;
    (&target * rho + &s * (1.0 - rho), rho)
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let mix = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let z = DMatrix::from_fn(500, 5, |_, _| rng.gen_range(-1.0..1.0));
        let x = z * mix;
        let lw = ledoit_wolf(&x).map_err(|e| e.to_string())?;
        let (want, rho) = ledoit_wolf_direct(&x);
        let diff = (&lw.covariance - &want).amax();
        if diff > 1e-10 {
            return Err(format!("seed {seed}: entry diff {diff:e}"));
        }
        if !(0.0..=1.0).contains(&lw.shrinkage) || (lw.shrinkage - rho).abs() > 1e-10 {
            return Err(format!("seed {seed}: shrinkage {} vs {rho}", lw.shrinkage));
        }
        if (&lw.covariance - lw.covariance.transpose()).amax() > 0.0 {
            return Err(format!("seed {seed}: not symmetric"));
        }
        let min_eig = SymmetricEigen::new(lw.covariance.clone()).eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(format!("seed {seed}: min eigenvalue {min_eig}"));
        }
        worst = worst.max(diff);
    }
    Ok(format!("50 datasets, max entry diff {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let subjects: std::collections::BTreeMap<String, Label> = (0..100)
            .map(|i| {
                let label = if rng.gen_bool(0.5) { Label::Positive } else { Label::Negative };
                (format!("s{i:03}"), label)
            })
            .collect();
        let plan = plan_folds(&subjects, 5, seed).map_err(|e| e.to_string())?;
        plan.check_disjoint().map_err(|e| format!("seed {seed}: {e}"))?;
        let global = subjects.values().filter(|l| **l == Label::Positive).count() as f64 / 100.0;
        let mut seen = std::collections::BTreeSet::new();
        for fold in 0..5 {
            let test = plan.test_subjects(fold);
            for s in &test {
                if !seen.insert(s.to_string()) {
                    return Err(format!("seed {seed}: {s} in two outer folds"));
                }
            }
            let pos = test.iter().filter(|s| subjects[**s] == Label::Positive).count() as f64;
            if (pos / test.len() as f64 - global).abs() > 0.05 {
                return Err(format!("seed {seed} fold {fold}: proportion off"));
            }
            let train = plan.inner_subjects(fold, InnerRole::Train);
            let val = plan.inner_subjects(fold, InnerRole::Validation);
            if train.intersection(&val).next().is_some() || train.iter().chain(&val).any(|s| test.contains(s)) {
                return Err(format!("seed {seed} fold {fold}: inner leak"));
            }
            if train.len() + val.len() + test.len() != 100 {
                return Err(format!("seed {seed} fold {fold}: subjects missing"));
            }
        }
        if seen.len() != 100 {
            return Err(format!("seed {seed}: outer folds cover {} subjects", seen.len()));
        }
    }
    Ok("50 seeds, 100 subjects each".into())
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let spec = EncoderSpec::tcn(64);
    let mut checked = 0usize;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let mut store = ParamStore::<f64>::new();
        let enc = TcnEncoder::new(&spec, 0.0, &mut store, &mut rng).map_err(|e| e.to_string())?;
        let x = rand_tensor(&mut rng, &[2, 1, spec.input_length]);
        let t_pert = rng.gen_range(0..spec.input_length);
        let mut y = x.clone();
        y.data_mut()[t_pert] += 1.0 + rng.gen::<f64>();
        y.data_mut()[spec.input_length + t_pert] -= 0.5;

        let run = |input: &Tensor<f64>| {
            let mut tape = Tape::new(Mode::Eval, 0);
            let v = tape.constant(input.clone());
            let tr = enc.trace(&mut tape, &store, v).unwrap();
            let grab = |vars: &[stgraph_core::Var]| vars.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>();
            (grab(&tr.pre_residual), grab(&tr.blocks))
        };
        let (pa, ba) = run(&x);
        let (pb, bb) = run(&y);
        for (layer, acts) in [(&pa, &pb), (&ba, &bb)].iter().flat_map(|(a, b)| a.iter().zip(b.iter()).enumerate()) {
            let stride = spec.stride.pow(layer as u32 + 1);
            let (bsz, ch, len) = (acts.0.dim(0), acts.0.dim(1), acts.0.dim(2));
            for b in 0..bsz {
                for c in 0..ch {
                    for p in 0..len {
                        if p * stride < t_pert {
                            let i = (b * ch + c) * len + p;
                            if acts.0.data()[i] != acts.1.data()[i] {
                                return Err(format!("seed {seed}: layer {layer} position {p} changed after t={t_pert}"));
                            }
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("50 seeds, {checked} earlier activations unchanged"))
}

// ---------------------------------------------------------------- 7-9

fn mean_auc(results: &Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(results).map_err(|e| e.to_string())?;
    let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v["aggregate"]["auc"]["mean"]
        .as_f64()
        .ok_or_else(|| "results.json lacks aggregate.auc.mean".to_string())
}

fn run_model(data: &Path, out: &Path, model: &str, extra: &[&str]) -> Result<f64, String> {
    let mut args = vec![
        "--seed", "7", "--out", out.to_str().unwrap(), "run", "--data", data.to_str().unwrap(),
        "--model", model, "--grid-fast", "--no-timestamp",
    ];
    args.extend_from_slice(extra);
    stgraph(&args)?;
    mean_auc(&out.join("results.json"))
}

struct Synthetic {
    _dir: tempfile::TempDir,
    manifest: std::path::PathBuf,
    root: std::path::PathBuf,
}

fn synthetic() -> Result<Synthetic, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_path_buf();
    let data = root.join("data");
    let out = stgraph(&[
        "--seed", "7", "--out", data.to_str().unwrap(), "synth", "--subjects", "40", "--nodes", "20",
        "--sessions", "4", "--length", "160", "--effect", "1.0",
    ])?;
    Ok(Synthetic { _dir: dir, manifest: out.trim().into(), root })
}

fn criterion_7(data: &Synthetic, deep_auc: &mut Option<f64>) -> Outcome {
    let real = run_model(&data.manifest, &data.root.join("deep"), "mean_CNN_GCN5", &[])?;
    *deep_auc = Some(real);
    let permuted = run_model(&data.manifest, &data.root.join("permuted"), "mean_CNN_GCN5", &["--permute-labels"])?;
    if real < 0.90 {
        return Err(format!("AUC {real:.3} < 0.90"));
    }
    if !(0.40..=0.60).contains(&permuted) {
        return Err(format!("permuted AUC {permuted:.3} outside [0.40, 0.60]"));
    }
    Ok(format!("AUC {real:.3}, permuted {permuted:.3}"))
}

fn criterion_8(data: &Synthetic, deep_auc: Option<f64>) -> Outcome {
    let deep = deep_auc.ok_or("deep AUC unavailable")?;
    let flat = run_model(&data.manifest, &data.root.join("logreg"), "logreg", &[])?;
    let binary = run_model(&data.manifest, &data.root.join("logreg_bin"), "logreg_bin", &[])?;
    if flat < deep - 0.05 {
        return Err(format!("baseline {flat:.3} < deep {deep:.3} - 0.05"));
    }
    if binary < 0.75 {
        return Err(format!("binarized baseline {binary:.3} < 0.75"));
    }
    Ok(format!("baseline {flat:.3}, binarized {binary:.3}, deep {deep:.3}"))
}

fn criterion_9(data: &Synthetic) -> Outcome {
    let mut blobs = Vec::new();
    for (i, jobs) in ["1", "2"].iter().enumerate() {
        let out = data.root.join(format!("det{i}"));
        run_model(&data.manifest, &out, "diff4_CNN_GCN", &["--epochs", "2", "--jobs", jobs])?;
        blobs.push(std::fs::read(out.join("results.json")).map_err(|e| e.to_string())?);
    }
    if blobs[0] != blobs[1] {
        return Err("results.json differs between identical runs".into());
    }
    Ok(format!("{} identical bytes", blobs[0].len()))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let quantized = seed % 2 == 1;
        let r = DMatrix::from_fn(50, 50, |_, _| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if quantized {
                (v * 4.0).round() / 4.0
            } else {
                v
            }
        });
        let r = (&r + r.transpose()) / 2.0;
        for (p, want) in [(5.0, 61), (20.0, 245)] {
            let a = threshold_edges(&r, p).map_err(|e| e.to_string())?;
            if a.n_edges() != want || !a.is_symmetric() || !a.has_zero_diagonal() {
                return Err(format!("seed {seed}: {} edges at {p}%", a.n_edges()));
            }
        }
    }
    Ok("100 matrices, 61 and 245 edges".into())
}

fn report(id: usize, outcome: Outcome, failures: &mut usize) {
    match outcome {
        Ok(detail) => println!("criterion {id:>2}: PASS  {detail}"),
        Err(detail) => {
            *failures += 1;
            println!("criterion {id:>2}: FAIL  {detail}");
        }
    }
}

fn main() {
    let mut failures = 0;
    report(1, criterion_1(), &mut failures);
    report(2, criterion_2(), &mut failures);
    report(3, criterion_3(), &mut failures);
    report(4, criterion_4(), &mut failures);
    report(5, criterion_5(), &mut failures);
    report(6, criterion_6(), &mut failures);
    match synthetic() {
        Ok(data) => {
            let mut deep = None;
            report(7, criterion_7(&data, &mut deep), &mut failures);
            report(8, criterion_8(&data, deep), &mut failures);
            report(9, criterion_9(&data), &mut failures);
        }
        Err(e) => {
            for id in 7..=9 {
                report(id, Err(format!("synthetic data: {e}")), &mut failures);
            }
        }
    }
    report(10, criterion_10(), &mut failures);
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
