//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts the same condition.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use streamcast::conformal::{conformal_pi, default_grid, ConformityMeasure};
use streamcast::gpp::{
    build_ar1_kernel, gpp_iid_hyperparams, gpp_iid_predict, gpp_inid_hyperparams, gpp_inid_predict_from,
    sample_variance, Whitener,
};
use streamcast::harness::{batch_cpe, run_all, run_prequential, HarnessConfig, REFERENCE_RUNS};
use streamcast::harness::{burn_in_len, method_seed};
use streamcast::shtarkov::{
    binomial_argmax, binomial_objective, BetaPrior, GammaPrior, NormalVariant, ShtarkovModel, ShtarkovState,
};
use streamcast::sketch::{CountMinTable, Eedf, HashFamily, IntervalMap};
use streamcast::{Method, MethodParams};

fn report(id: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {id:>2} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[test]
fn criterion_01_count_min_worked_example() {
    let start = Instant::now();
    // rows are hash functions, columns the tokens A, B, C, D (0-based buckets)
    let table = vec![
        vec![0, 1, 2, 2],
        vec![0, 1, 1, 2],
        vec![0, 0, 1, 1],
        vec![0, 2, 1, 1],
        vec![2, 1, 0, 0],
    ];
    let mut cm = CountMinTable::new(HashFamily::from_table(3, table).unwrap());
    let stream = [0, 1, 2, 0, 0, 2, 3, 1, 3, 0];
    let mut first = Vec::new();
    for (i, &k) in stream.iter().enumerate() {
        cm.increment_key(k).unwrap();
        if i == 0 {
            first = (0..5).map(|j| cm.row(j).to_vec()).collect();
        }
    }
    let rows: Vec<Vec<u64>> = (0..5).map(|j| cm.row(j).to_vec()).collect();
    let want_first = vec![vec![1, 0, 0], vec![1, 0, 0], vec![1, 0, 0], vec![1, 0, 0], vec![0, 0, 1]];
    let want = vec![vec![4, 2, 4], vec![4, 4, 2], vec![6, 4, 0], vec![4, 4, 2], vec![4, 2, 4]];
    let est: Vec<u64> = (0..4).map(|k| cm.estimate(k)).collect();
    let elapsed = start.elapsed();
    let ok = first == want_first && rows == want && est == [4, 2, 4, 2] && elapsed < Duration::from_secs(1);
    report(1, "count-min worked example", ok, format!("estimates {est:?}, {elapsed:?}"));
    assert!(ok);
}

#[test]
fn criterion_02_binomial_shtarkov_argmax() {
    let start = Instant::now();
    let (trials, n, sum) = (30, 10, 100);
    let freq = binomial_argmax(trials, n, sum, None);
    let prior = Some(BetaPrior { alpha: 1.0, beta: 1.0 });
    let bayes = binomial_argmax(trials, n, sum, prior);
    let unimodal = |p: Option<BetaPrior>| {
        let f: Vec<f64> = (0..=trials).map(|y| binomial_objective(trials, n, sum, p, y)).collect();
        let peak = f
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > f[best] { i } else { best });
        f[..=peak].windows(2).all(|w| w[0] <= w[1]) && f[peak..].windows(2).all(|w| w[0] >= w[1])
    };
    let elapsed = start.elapsed();
    let ok = freq.abs_diff(11) <= 1
        && bayes.abs_diff(11) <= 1
        && unimodal(None)
        && unimodal(prior)
        && elapsed < Duration::from_secs(1);
    report(2, "binomial Shtarkov argmax", ok, format!("freq {freq}, bayes {bayes}, {elapsed:?}"));
    assert!(ok);
}

/// Root of a function that is positive left of it and negative right of it.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * b.abs().max(1.0)
}

#[test]
fn criterion_03_closed_form_shtarkov_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50usize);
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..20.0)).collect();
        let nf = n as f64;
        let total: f64 = ys.iter().sum();
        let mean = total / nf;
        let mu0 = rng.random_range(-5.0..5.0);
        let s0 = rng.random_range(0.1..4.0);
        let alpha = rng.random_range(1.05..6.0);
        let a0 = rng.random_range(0.5..5.0);
        let b0 = rng.random_range(0.5..5.0);

        let run = |model: ShtarkovModel| {
            let mut s = ShtarkovState::new(&model).unwrap();
            for (i, &y) in ys.iter().enumerate() {
                s.push(i as u64 + 1, y).unwrap();
            }
            s.predict().unwrap()
        };

        // sample mean and the posterior-mode mean
        let mut cases = vec![
            (run(ShtarkovModel::Normal { variant: NormalVariant::FreqKnownVar }), mean),
            (
                run(ShtarkovModel::Normal {
                    variant: NormalVariant::BayesBoth { mu0, sigma0_sq: s0, alpha: 2.0, beta: 1.0 },
                }),
                (total + mu0 / s0) / (nf + 1.0 / s0),
            ),
        ];

        // the exponential objective is decreasing in the next value, so its
        // maximizer over [0, inf) is the left end
        let expo = |y: f64| -(nf + a0) * (total + y + b0).ln();
        let decreasing = (0..100).all(|k| expo(k as f64 * 0.1) > expo((k + 1) as f64 * 0.1));
        assert!(decreasing);
        cases.push((run(ShtarkovModel::Exponential { prior: None }), 0.0));
        cases.push((run(ShtarkovModel::Exponential { prior: Some(GammaPrior { alpha0: a0, beta0: b0 }) }), 0.0));

        // stationary points of the log objectives, found by bisection on
        // their derivatives
        let freq_root = bisect(|y| (alpha - 1.0) / y - (nf + 1.0) * alpha / (total + y), 1e-300, 10.0 * total + 10.0);
        cases.push((run(ShtarkovModel::Gamma { alpha, prior: None }), freq_root));
        cases.push((run(ShtarkovModel::Gamma { alpha, prior: None }), nf * (alpha - 1.0) * mean / (nf * alpha + 1.0)));
        let shape = (nf + 1.0) * alpha + a0 - 1.0;
        let bayes_root = bisect(|y| (alpha - 1.0) / y - shape / (b0 + total + y), 1e-300, 10.0 * (total + b0) + 10.0);
        let bayes_model = ShtarkovModel::Gamma { alpha, prior: Some(GammaPrior { alpha0: a0, beta0: b0 }) };
        cases.push((run(bayes_model), bayes_root));
        cases.push((run(bayes_model), (alpha - 1.0) * (b0 + total) / (nf * alpha + a0)));

        for (got, want) in cases {
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
            if !close(got, want) {
                failures += 1;
            }
        }
    }
    let ok = failures == 0;
    report(3, "closed-form Shtarkov oracle suite", ok, format!("max scaled error {worst:.2e}"));
    assert!(ok);
}

/// Deterministic Zipf-like stream over `keys` keys, interleaved.
fn zipf_stream(keys: usize, n: usize) -> (Vec<usize>, Vec<u64>) {
    let h: f64 = (1..=keys).map(|k| 1.0 / k as f64).sum();
    let mut counts: Vec<u64> = (1..=keys).map(|k| (n as f64 / (k as f64 * h)).floor() as u64).collect();
    let short = n as u64 - counts.iter().sum::<u64>();
    counts[0] += short;
    let mut left = counts.clone();
    let mut stream = Vec::with_capacity(n);
    while stream.len() < n {
        for (k, c) in left.iter_mut().enumerate() {
            if *c > 0 {
                stream.push(k);
                *c -= 1;
            }
        }
    }
    (stream, counts)
}

#[test]
fn criterion_04_count_min_guarantee() {
    let start = Instant::now();
    let (eps, delta) = (0.04, 0.05);
    let (d, v) = streamcast::sketch::dimensions_for(eps, delta);
    assert_eq!((d, v), (3, 50));
    let keys = 1000;
    let n = 100_000;
    let runs = 2000;
    let (stream, truth) = zipf_stream(keys, n);
    let mut exceed = vec![0u32; keys];
    let mut never_under = true;
    for seed in 0..runs {
        let mut cm = CountMinTable::new(HashFamily::sample(d, v, keys, seed).unwrap());
        for &k in &stream {
            cm.increment_key(k).unwrap();
        }
        for k in 0..keys {
            let est = cm.estimate(k);
            never_under &= est >= truth[k];
            if est as f64 > truth[k] as f64 + eps * n as f64 {
                exceed[k] += 1;
            }
        }
    }
    let worst = *exceed.iter().max().unwrap() as f64 / runs as f64;
    let limit = delta + 3.0 * (delta * (1.0 - delta) / runs as f64).sqrt();
    let elapsed = start.elapsed();
    let ok = worst <= limit && never_under && elapsed < Duration::from_secs(120);
    report(
        4,
        "count-min (eps, delta) guarantee",
        ok,
        format!("worst-key failure rate {worst:.4} vs {limit:.4}, no underestimates {never_under}, {elapsed:?}"),
    );
    assert!(ok);
}

/// Sup distances of the EEDF to the exact EDF and to the Uniform(0,1) cdf.
fn eedf_distances(eedf: &Eedf, sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len() as f64;
    let range = eedf.range();
    let at_most = |x: f64| sorted.partition_point(|&y| y <= x) as f64 / n;
    let below = |x: f64| sorted.partition_point(|&y| y < x) as f64 / n;
    let mut edges = vec![range.lo()];
    edges.extend((0..range.len()).map(|k| range.upper_edge(k)));
    let (mut to_edf, mut to_cdf) = (0.0f64, 0.0f64);
    for (j, &left) in edges.iter().enumerate() {
        let f_hat = eedf.cdf(left);
        let right = edges.get(j + 1).copied();
        let edf_right = right.map_or(1.0, below);
        to_edf = to_edf.max((f_hat - at_most(left)).abs()).max((f_hat - edf_right).abs());
        let cdf = |x: f64| x.clamp(0.0, 1.0);
        to_cdf = to_cdf.max((f_hat - cdf(left)).abs()).max((f_hat - right.map_or(1.0, cdf)).abs());
    }
    (to_edf, to_cdf)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[test]
fn criterion_05_eedf_consistency() {
    let start = Instant::now();
    let depths = [1usize, 3, 10, 25];
    let (v, k_int, n, seeds) = (200, 200, 10_000, 50u64);
    let mut to_edf = vec![Vec::new(); depths.len()];
    let mut worst_cdf_at_25 = 0.0f64;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut sorted = ys.clone();
        sorted.sort_by(f64::total_cmp);
        for (i, &d) in depths.iter().enumerate() {
            let hashes = HashFamily::sample(d, v, k_int, seed * 100 + d as u64).unwrap();
            let mut cm = CountMinTable::with_range(hashes, IntervalMap::new(0.0, 1.0, k_int).unwrap()).unwrap();
            for &y in &ys {
                cm.update(y).unwrap();
            }
            let (e, c) = eedf_distances(&Eedf::from_table(&cm).unwrap(), &sorted);
            to_edf[i].push(e);
            if d == 25 {
                worst_cdf_at_25 = worst_cdf_at_25.max(c);
            }
        }
    }
    let medians: Vec<f64> = to_edf.into_iter().map(median).collect();
    // one token of slack between successive depths
    let monotone = medians.windows(2).all(|w| w[1] <= w[0] + 1.0 / n as f64);
    let elapsed = start.elapsed();
    let ok = monotone && worst_cdf_at_25 < 0.05 && elapsed < Duration::from_secs(120);
    report(
        5,
        "EEDF consistency",
        ok,
        format!("median sup|F^ - F^_n| by depth {medians:.4?}, max sup|F^ - F| at d=25 {worst_cdf_at_25:.4}, {elapsed:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_06_gpp_moment_identities() {
    let start = Instant::now();
    let (n, sigma2, gamma, delta, rho) = (50usize, 1.0f64, 2.0f64, 0.1f64, 0.8);
    let delta2 = delta * delta;
    let reps = 10_000;
    let chol = build_ar1_kernel(n, rho).unwrap().shifted().cholesky().unwrap().l();
    let whitener = Whitener::new(n, rho).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut est = Vec::with_capacity(reps);
    for _ in 0..reps {
        // bias ~ N(gamma 1, sigma2 delta2 I), data ~ N(bias, sigma2 (I + K))
        let bias: Vec<f64> = normals(&mut rng, n).iter().map(|z| gamma + (sigma2 * delta2).sqrt() * z).collect();
        let z = nalgebra::DVector::from_vec(normals(&mut rng, n));
        let noise = &chol * z * sigma2.sqrt();
        let y: Vec<f64> = bias.iter().zip(noise.iter()).map(|(a, e)| a + e).collect();
        est.push(sample_variance(&whitener.apply(&y).unwrap()) / (1.0 + delta2));
    }
    let m = est.iter().sum::<f64>() / reps as f64;
    let var = sample_variance(&est);
    let se = (var / reps as f64).sqrt();
    let nf = n as f64;
    let predicted = 2.0 * sigma2 / ((nf - 1.0) * (nf - 1.0)) * (sigma2 + 2.0 * nf * gamma * gamma / (1.0 + delta2));
    let mean_ok = (m - sigma2).abs() <= 3.0 * se;
    let var_ok = (var - predicted).abs() <= 0.2 * predicted;
    let elapsed = start.elapsed();
    let ok = mean_ok && var_ok && elapsed < Duration::from_secs(60);
    report(
        6,
        "GPP moment identities",
        ok,
        format!(
            "mean {m:.5} (3 SE = {:.5}, {}), variance {var:.5} vs predicted {predicted:.5} ({}), {elapsed:?}",
            3.0 * se,
            if mean_ok { "ok" } else { "off" },
            if var_ok { "ok" } else { "off" }
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_gpp_location_ignores_alpha_beta() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y: Vec<f64> = normals(&mut rng, 30).iter().map(|z| 3.0 + z).collect();
    let (rho, delta2) = (0.8, 0.01);
    let iid = gpp_iid_hyperparams(&y, rho, delta2).unwrap();
    let inid = gpp_inid_hyperparams(&y, rho, delta2).unwrap();
    let base_iid = gpp_iid_predict(&y, &iid).unwrap().location;
    let base_inid = gpp_inid_predict_from(&y, &inid).unwrap().location;
    let grid = [0.5, 1.0, 2.5, 10.0, 100.0];
    let mut max_change = 0.0f64;
    for &alpha in &grid {
        for &beta in &grid {
            let a = gpp_iid_predict(&y, &streamcast::gpp::GppHyper { alpha, beta, ..iid.clone() }).unwrap();
            let b = gpp_inid_predict_from(&y, &streamcast::gpp::GppHyper { alpha, beta, ..inid.clone() }).unwrap();
            max_change = max_change.max((a.location - base_iid).abs()).max((b.location - base_inid).abs());
        }
    }
    let ok = max_change == 0.0;
    report(7, "GPP location invariance", ok, format!("max change over 5x5 grid {max_change:e}"));
    assert!(ok);
}

#[test]
fn criterion_08_conformal_coverage_and_nesting() {
    let start = Instant::now();
    let (n, reps) = (200, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut covered = 0;
    let mut nested = 0;
    for _ in 0..reps {
        let sample = normals(&mut rng, n + 1);
        let (y, next) = (&sample[..n], sample[n]);
        let grid = default_grid(y, 512);
        let wide = conformal_pi(y, &ConformityMeasure::Dta, 0.15, &grid).unwrap();
        let narrow = conformal_pi(y, &ConformityMeasure::Dta, 0.3, &grid).unwrap();
        if wide.interval.0 <= next && next <= wide.interval.1 {
            covered += 1;
        }
        if wide.interval.0 <= narrow.interval.0 && narrow.interval.1 <= wide.interval.1 {
            nested += 1;
        }
    }
    let coverage = covered as f64 / reps as f64;
    let elapsed = start.elapsed();
    let ok = (coverage - 0.85).abs() <= 0.03 && nested == reps && elapsed < Duration::from_secs(120);
    report(
        8,
        "conformal coverage and nesting",
        ok,
        format!("coverage {coverage:.4}, nested {nested}/{reps}, {elapsed:?}"),
    );
    assert!(ok);
}

/// AR(1) level plus noise, kept positive.
fn synthetic_stream(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            level = 0.9 * level + z;
            (100.0 + 10.0 * level + 5.0 * e).max(1.0)
        })
        .collect()
}

#[test]
fn criterion_09_harness_self_consistency() {
    let y = synthetic_stream(10_000, 9);
    let params = MethodParams::default();
    let cfg = HarnessConfig { seed: 99, ..HarnessConfig::default() };
    let start = Instant::now();
    let runs = run_all(&Method::ALL, &params, &y, &cfg);
    let elapsed = start.elapsed();
    let burn_in = burn_in_len(y.len(), cfg.burnin_frac).unwrap();
    let mut worst_batch = 0.0f64;
    let mut bitwise = true;
    let mut shapes = true;
    for (m, run) in Method::ALL.iter().zip(runs) {
        let run = run.unwrap_or_else(|e| panic!("{m}: {e}"));
        let ys: Vec<f64> = run.base.rows.iter().map(|r| r.y).collect();
        let yh: Vec<f64> = run.base.rows.iter().map(|r| r.yhat).collect();
        let batch = batch_cpe(&ys, &yh);
        worst_batch = worst_batch.max((run.base.cpe - batch).abs() / batch.max(1.0));
        let alone = run_prequential(*m, &params, &y, burn_in, method_seed(cfg.seed, *m)).unwrap();
        bitwise &= run.curve.cpes[0].to_bits() == alone.cpe.to_bits();
        shapes &= run.curve.taus.len() == run.curve.cpes.len() && run.curve.cpes.iter().all(|c| c.is_finite());
    }
    let ok = worst_batch <= 1e-12 && bitwise && shapes && elapsed < Duration::from_secs(600);
    report(
        9,
        "harness self-consistency",
        ok,
        format!("recursive vs batch {worst_batch:.1e}, zero-noise point bitwise {bitwise}, 12 methods x 11 points in {elapsed:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_10_reference_values_are_metadata_only() {
    let sigmas: Vec<f64> = REFERENCE_RUNS.iter().map(|r| r.sigma_rv).collect();
    let ok = sigmas == [154.0, 890.0, 0.18, 630.0, 198.0, 900.0];
    report(
        10,
        "reference sigma_RV values recorded, not asserted against runs",
        ok,
        format!("{sigmas:?}"),
    );
    assert!(ok);
}
