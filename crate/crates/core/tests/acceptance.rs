//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL/SKIP line.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qkdisc::criteria::validation_cost;
use qkdisc::genome::{enumerate_valid, random_genome, GateSpec, KernelGenome, SearchSpace};
use qkdisc::kernels::{gram_with, overlap_kernel, projected_kernel, swap_test_p0, KernelKind};
use qkdisc::ocsvm::train_ocsvm;
use qkdisc::optimizers::{
    bayesian_search, genetic_search, greedy_search, random_search, EvaluationCache, Evaluator, FnCost,
    GeneticParams, GreedyParams, BayesianParams, OptimizationTrace, OptimizerConfig, OptimizerKind, TraceHeader,
};
use qkdisc::pauli::{dla_closure, PauliString};
use qkdisc::pipeline::{run_assess, run_discover, RunConfig};
use qkdisc::statevector::{encode, reduced_density};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn random_space(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> SearchSpace {
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_m);
    let d = rng.random_range(1..=4);
    let b = rng.random_range(1..=4);
    SearchSpace::new(n, m, d, b)
}

// 1. Gram matrices are symmetric, PSD and (overlap) unit-diagonal.
fn kernel_correctness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_asym, mut worst_eig, mut worst_diag) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..50 {
        let space = random_space(&mut rng, 4, 8);
        let g = random_genome(&space, &mut rng).unwrap();
        let rows = common::random_rows(16, space.d, &mut rng);
        for kind in [KernelKind::Projected, KernelKind::Overlap] {
            let k = gram_with(&g, &rows, kind).unwrap();
            worst_asym = worst_asym.max(k.max_asymmetry());
            worst_eig = worst_eig.min(k.min_eigenvalue().unwrap());
            if kind == KernelKind::Overlap {
                for i in 0..rows.len() {
                    worst_diag = worst_diag.max((k.get(i, i) - 1.0).abs());
                }
            }
        }
    }
    let t = start.elapsed();
    verdict(
        worst_asym <= 1e-12 && worst_eig >= -1e-8 && worst_diag <= 1e-10 && within(t, 30),
        format!("max asym {worst_asym:.1e}, min eig {worst_eig:.1e}, diag err {worst_diag:.1e}, {t:.1?}"),
    )
}

// 2. Closed forms for one-gate circuits.
fn closed_forms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut err_single = 0.0f64;
    let mut err_xx = 0.0f64;
    let mut err_full = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=4);
        let d = rng.random_range(1..=3);
        let b = rng.random_range(1..=5);
        let space = SearchSpace::new(n, 1, d, b);
        // a word with X or Y somewhere never has |0…0⟩ as eigenvector
        let (alpha, beta) = loop {
            let (a, c) = (rng.random_range(0..4u8), rng.random_range(0..4u8));
            if matches!(a, 1 | 2) || matches!(c, 1 | 2) {
                break (a, c);
            }
        };
        let p = rng.random_range(0..n);
        let q = rng.random_range(0..n - 1);
        let k = rng.random_range(0..d);
        let j = rng.random_range(0..b);
        let gate = GateSpec::new(alpha, beta, p, q, k, j);
        let mut g = qkdisc::genome::identity_in(&space);
        g.gates[0] = gate;
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let bw = g.bandwidths[j];
        let expected = (bw * (x[k] - y[k]) / 2.0).cos().powi(2);
        err_single = err_single.max((overlap_kernel(&g, &x, &y).unwrap() - expected).abs());

        // X⊗X with one measured qubit: the reduced state is
        // diag(cos²(θ/2), sin²(θ/2)), so tr[ρρ'] = (1 + cos θ cos θ')/2
        let mut xx = g.clone();
        xx.gates[0] = GateSpec::new(1, 1, p, q, k, j);
        let measured = if rng.random::<bool>() { p } else { xx.gates[0].second_qubit() };
        xx.measure_mask = 1 << measured;
        let (t1, t2) = (bw * x[k], bw * y[k]);
        let expected = (1.0 + t1.cos() * t2.cos()) / 2.0;
        err_xx = err_xx.max((projected_kernel(&xx, &x, &y).unwrap() - expected).abs());

        let full = random_genome(&SearchSpace::new(n, 4, d, b), &mut rng).unwrap();
        let full = KernelGenome {
            measure_mask: full.full_mask(),
            ..full
        };
        let diff = projected_kernel(&full, &x, &y).unwrap() - overlap_kernel(&full, &x, &y).unwrap();
        err_full = err_full.max(diff.abs());
    }
    verdict(
        err_single <= 1e-10 && err_xx <= 1e-10 && err_full <= 1e-10,
        format!("single-gate {err_single:.1e}, XX one-qubit {err_xx:.1e}, full-mask {err_full:.1e}"),
    )
}

// 3. 2·p0 − 1 of the swap test equals the projected kernel.
fn swap_test() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let space = random_space(&mut rng, 4, 6);
        let g = random_genome(&space, &mut rng).unwrap();
        let x: Vec<f64> = (0..space.d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..space.d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = reduced_density(&encode(&g, &x).unwrap(), g.measure_mask).unwrap();
        let b = reduced_density(&encode(&g, &y).unwrap(), g.measure_mask).unwrap();
        let lhs = 2.0 * swap_test_p0(&a, &b).unwrap() - 1.0;
        worst = worst.max((lhs - projected_kernel(&g, &x, &y).unwrap()).abs());
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:.1e}"))
}

// 4. Symplectic DLA closure equals dense-matrix closure.
fn dla_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let count = rng.random_range(1..=4);
        let gens: Vec<PauliString> = (0..count)
            .map(|_| loop {
                let x = rng.random_range(0..1u64 << n);
                let z = rng.random_range(0..1u64 << n);
                if x | z != 0 {
                    break PauliString::from_masks(n, x, z).unwrap();
                }
            })
            .collect();
        let fast = dla_closure(&gens, 4usize.pow(n as u32) - 1).unwrap();
        let oracle: BTreeSet<PauliString> = common::brute_force_dla(&gens, n).into_iter().collect();
        if fast.basis != oracle {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("{mismatches}/200 mismatches"))
}

// 5. OC-SVM optimum, ν-property and KKT conditions.
fn ocsvm_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_obj = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(2..=10);
        let space = random_space(&mut rng, 3, 4);
        let g = random_genome(&space, &mut rng).unwrap();
        let rows = common::random_rows(m, space.d, &mut rng);
        let k = gram_with(&g, &rows, KernelKind::Projected).unwrap();
        let nu = rng.random_range((1.0 / m as f64).max(0.05)..0.95);
        let model = train_ocsvm(&k, nu).unwrap();
        let reference = common::reference_ocsvm_objective(&k, nu, 20_000);
        worst_obj = worst_obj.max((model.objective() - reference).abs());
        worst_kkt = worst_kkt.max(model.kkt_residual());
    }

    let m = 200;
    let nu = 0.2;
    let g = random_genome(&SearchSpace::new(3, 6, 2, 4), &mut rng).unwrap();
    let rows = common::random_rows(m, 2, &mut rng);
    let k = gram_with(&g, &rows, KernelKind::Projected).unwrap();
    let model = train_ocsvm(&k, nu).unwrap();
    worst_kkt = worst_kkt.max(model.kkt_residual());
    let margins = model.training_margins();
    let outliers = margins.iter().filter(|&&s| s - model.rho < -1e-9).count() as f64 / m as f64;
    let svs = model.support_indices.len() as f64 / m as f64;
    let nu_ok = outliers <= nu + 0.05 && svs >= nu - 0.05;
    verdict(
        worst_obj <= 1e-6 && worst_kkt <= 1e-6 && nu_ok,
        format!(
            "objective gap {worst_obj:.1e}, KKT {worst_kkt:.1e}, m=200 ν={nu}: outliers {outliers:.3}, SVs {svs:.3}"
        ),
    )
}

fn toy_evaluator<'a>(f: &'a FnCost<impl Fn(&KernelGenome) -> f64 + Sync>, budget: usize, seed: u64) -> Evaluator<'a> {
    let header = TraceHeader::new(OptimizerConfig::default(), SearchSpace::new(2, 1, 1, 1), seed);
    Evaluator::new(f, EvaluationCache::new(), budget, header)
}

fn best(t: &OptimizationTrace) -> f64 {
    t.best_cost().unwrap_or(f64::INFINITY)
}

// 6. Optimizers on the enumerable toy space.
fn optimizer_sanity() -> Verdict {
    let start = Instant::now();
    let space = SearchSpace::new(2, 1, 1, 1);
    let data = common::toy_validation_data(606);
    let all = enumerate_valid(&space).unwrap();
    let table: HashMap<Vec<u32>, f64> = all
        .iter()
        .map(|g| (g.encode_flat().unwrap(), validation_cost(g, &data, 0.1).unwrap().value))
        .collect();
    let optimum = table.values().cloned().fold(f64::INFINITY, f64::min);
    let optimal = table.values().filter(|&&v| v <= optimum).count();
    let f = FnCost(|g: &KernelGenome| table[&g.encode_flat().unwrap()]);

    let mut greedy_hits = 0;
    for g in &all {
        let mut ev = toy_evaluator(&f, 10_000, 0);
        greedy_search(g, &mut ev, &GreedyParams::default(), false).unwrap();
        if best(ev.trace()) <= optimum {
            greedy_hits += 1;
        }
    }
    let greedy_rate = greedy_hits as f64 / all.len() as f64;

    let mut genetic_hits = 0;
    for seed in 0..20 {
        let mut ev = toy_evaluator(&f, 500, seed);
        genetic_search(&space, &mut ev, &GeneticParams::default(), None, seed).unwrap();
        if best(ev.trace()) <= optimum {
            genetic_hits += 1;
        }
    }
    let genetic_rate = genetic_hits as f64 / 20.0;

    let mut bayes_wins = 0;
    let initial = qkdisc::genome::identity_in(&space);
    for seed in 0..20 {
        let mut ev = toy_evaluator(&f, 10_000, seed);
        bayesian_search(&initial, &mut ev, &BayesianParams::default(), None, seed).unwrap();
        let used = ev.misses();
        let bayes = best(ev.trace());
        let mut ev = toy_evaluator(&f, used, seed + 1000);
        random_search(&space, &mut ev, None, seed + 1000).unwrap();
        if bayes <= best(ev.trace()) {
            bayes_wins += 1;
        }
    }
    let bayes_rate = bayes_wins as f64 / 20.0;
    let t = start.elapsed();
    verdict(
        greedy_rate >= 0.8 && genetic_rate >= 0.9 && bayes_rate >= 0.7 && within(t, 300),
        format!(
            "optimum {optimum:.4} ({optimal}/{} genomes optimal); greedy {greedy_hits}/{}, genetic {genetic_hits}/20, bayesian ≤ random {bayes_wins}/20, {t:.1?}",
            all.len(),
            all.len()
        ),
    )
}

fn blob_config(dir: &Path, data: PathBuf) -> RunConfig {
    let mut c = RunConfig::default();
    c.output = Some(dir.to_path_buf());
    c.data.path = Some(data);
    c.space.m = 8;
    c.space.b = 10;
    c.optimizer = OptimizerConfig::new(OptimizerKind::Bayesian, 100);
    c.optimizer.bayesian.iterations = 5;
    c.optimizer.bayesian.batch = 5;
    c.criteria.nu = 0.1;
    c.criteria.weights = BTreeMap::from([("validation".to_string(), 1.0)]);
    c.seeds.split = 1;
    c.seeds.optimizer = 2;
    c.seeds.assessment = 3;
    c
}

// 7. Discovery plus assessment on Gaussian blobs.
fn end_to_end() -> Verdict {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("blobs.csv");
    common::gaussian_blobs(5000, 5000, 4, 2.0, 707).write_csv(&csv).unwrap();
    let config = blob_config(&tmp.path().join("run"), csv);
    let found = run_discover(&config, None).unwrap();
    let summary = run_assess(&config, &found.best, None).unwrap();
    let t = start.elapsed();
    verdict(
        summary.auc_mean >= 0.90 && within(t, 600),
        format!(
            "validation cost {:.4}, AUC {:.4} ± {:.4} over {} repeats, {t:.1?}",
            found.summary.best_cost,
            summary.auc_mean,
            summary.auc_std,
            summary.repeats.len()
        ),
    )
}

const HEP_SETS: [(&str, Option<f64>); 3] = [("narrow_g", Some(0.97)), ("a_to_hz", Some(0.94)), ("broad_g", None)];

fn hep_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/hep")
}

// 8. Public latent datasets; only runs when they have been imported.
fn public_datasets() -> Verdict {
    let dir = hep_dir();
    let missing: Vec<_> = HEP_SETS
        .iter()
        .map(|(name, _)| dir.join(format!("{name}.csv")))
        .filter(|p| !p.exists())
        .collect();
    if !missing.is_empty() {
        return Verdict::Skip(format!(
            "datasets not imported (expected {}/{{narrow_g,a_to_hz,broad_g}}.csv)",
            dir.display()
        ));
    }
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, threshold) in HEP_SETS {
        let mut best_auc = f64::NEG_INFINITY;
        for m in [8, 12] {
            for t in [5, 10] {
                let mut c = blob_config(&tmp.path().join(format!("{name}_{m}_{t}")), dir.join(format!("{name}.csv")));
                c.space.m = m;
                c.optimizer.bayesian.iterations = t;
                let found = run_discover(&c, None).unwrap();
                let s = run_assess(&c, &found.best, None).unwrap();
                best_auc = best_auc.max(s.auc_mean);
            }
        }
        if let Some(th) = threshold {
            ok &= best_auc >= th;
        }
        parts.push(format!("{name} {best_auc:.4}"));
    }
    verdict(ok, parts.join(", "))
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

// 9. Identical config and seeds give byte-identical artifacts.
fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("blobs.csv");
    common::gaussian_blobs(1000, 1000, 4, 1.5, 909).write_csv(&csv).unwrap();
    let mut mismatched = Vec::new();
    for kind in [OptimizerKind::Bayesian, OptimizerKind::Genetic, OptimizerKind::Sarsa] {
        let run_dir = tmp.path().join(kind.as_str());
        let mut c = blob_config(&run_dir, csv.clone());
        c.space.m = 4;
        c.optimizer.kind = kind;
        c.optimizer.budget = 25;
        c.optimizer.sarsa.episodes = 30;
        c.assessment.train = 100;
        c.assessment.test = 300;
        let mut snapshots = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(&run_dir);
            let found = run_discover(&c, None).unwrap();
            run_assess(&c, &found.best, Some(&run_dir.join("assess"))).unwrap();
            let mut files = read_dir_bytes(&run_dir);
            for (k, v) in read_dir_bytes(&run_dir.join("assess")) {
                files.insert(format!("assess/{k}"), v);
            }
            snapshots.push(files);
        }
        if snapshots[0] != snapshots[1] {
            mismatched.push(kind.as_str());
        }
    }
    verdict(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "bayesian, genetic and sarsa runs reproduced byte for byte".to_string()
        } else {
            format!("differing artifacts for {mismatched:?}")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("1 kernel correctness", kernel_correctness),
        ("2 closed-form kernels", closed_forms),
        ("3 swap-test identity", swap_test),
        ("4 DLA oracle", dla_oracle),
        ("5 OC-SVM oracle", ocsvm_oracle),
        ("6 optimizer sanity", optimizer_sanity),
        ("7 end-to-end synthetic discovery", end_to_end),
        ("8 public dataset reproduction", public_datasets),
        ("9 determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Verdict::Pass(d) => println!("criterion {name}: PASS ({d})"),
            Verdict::Skip(d) => println!("criterion {name}: SKIP ({d})"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("criterion {name}: FAIL ({d})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
