//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. The M5 checks run only when `IDCOMB_M5_SALES` points at the
//! bottom-level sales CSV (`id,item_id,...,d_1,...`).

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use idcomb::combiner::{
    build_training_set, feature_importance, fit_inner_windows, predict_weights, softmax, train,
    weighted_loss, weighted_loss_grad_hess, Hyperparams, MetaModel, Mode, ModelSpec, TrainerMode,
    TrainingInstance, WeightVector,
};
use idcomb::diversity::{diversity_vector, pair_diversity, pair_indices};
use idcomb::features::{
    approx_entropy, cv2, idi, linear_chunk_var, ratio_last_chunk, simple_ratios, SbcClass,
};
use idcomb::forecasters::{self, forecast_all, Fit, MethodId};
use idcomb::ingest::write_wide;
use idcomb::metrics::{average_rank, pinball, rmsse, spl, LossKind};
use idcomb::pipeline::{self, RunConfig};
use idcomb::pooling::{
    lasso_path, pool_criterion, pool_islands, pool_lasso, pool_screened, select_pool, GapMode,
    PoolingAlgorithm,
};
use idcomb::quantiles::{quantile_forecast, residual_quantile};
use idcomb::synthetic::{self, separable_clusters};
use idcomb::{combiner, Dataset, DemandSeries, Period};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT: f64 = 1e-12;

/// Failures collected while checking one criterion.
#[derive(Default)]
struct Checks {
    count: usize,
    failures: Vec<String>,
}

impl Checks {
    fn ok(&mut self, name: &str, cond: bool, detail: impl FnOnce() -> String) {
        self.count += 1;
        if !cond {
            self.failures.push(format!("{name}: {}", detail()));
        }
    }

    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.ok(name, (got - want).abs() <= tol, || {
            format!("got {got}, want {want} (tol {tol:e})")
        });
    }

    fn close_all(&mut self, name: &str, got: &[f64], want: &[f64], tol: f64) {
        let same = got.len() == want.len() && got.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol);
        self.ok(name, same, || format!("got {got:?}, want {want:?}"));
    }

    fn finish(self, what: &str) -> Result<String, String> {
        if self.failures.is_empty() {
            Ok(format!("{} {what}", self.count))
        } else {
            Err(format!(
                "{} of {} failed: {}",
                self.failures.len(),
                self.count,
                self.failures.join("; ")
            ))
        }
    }
}

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Verdict,
}

fn verdict(r: Result<String, String>) -> Verdict {
    match r {
        Ok(d) => Verdict::Pass(d),
        Err(d) => Verdict::Fail(d),
    }
}

fn type7(xs: &[f64], u: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * u;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn dominant_instances(n: usize, m: usize, k: usize, dim: usize, seed: u64) -> Vec<TrainingInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| TrainingInstance {
            series_id: format!("d{i}"),
            x: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            err: (0..m).map(|j| if j == k { 0.0 } else { 1.0 }).collect(),
        })
        .collect()
}

fn spec_for(methods: &[MethodId], dim: usize, loss: LossKind, trainer: TrainerMode) -> ModelSpec {
    ModelSpec {
        mode: Mode::Fide,
        loss_kind: loss,
        trainer,
        methods: methods.to_vec(),
        input_dim: dim,
        feature_subset: None,
    }
}

fn brute_force_ma_order(y: &[f64]) -> usize {
    let kmax = 24.min(y.len() - 1);
    let mut best = (f64::INFINITY, 0);
    for k in 1..=kmax {
        let errs: Vec<f64> = (k..y.len())
            .map(|t| {
                let f = mean(&y[t - k..t]);
                (y[t] - f).powi(2)
            })
            .collect();
        let mse = mean(&errs);
        if mse < best.0 * (1.0 - 1e-10) {
            best = (mse, k);
        }
    }
    best.1
}

/// Pincus approximate entropy by explicit template enumeration.
fn apen_oracle(y: &[f64], m: usize, r: f64) -> f64 {
    let phi = |m: usize| {
        let n = y.len() - m + 1;
        let mut total = 0.0;
        for i in 0..n {
            let c = (0..n)
                .filter(|&j| (0..m).all(|k| (y[i + k] - y[j + k]).abs() <= r))
                .count();
            total += (c as f64 / n as f64).ln();
        }
        total / n as f64
    };
    phi(m) - phi(m + 1)
}

fn sample_sd(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    (xs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn formula_fixtures() -> Verdict {
    verdict(formula_checks())
}

fn formula_checks() -> Result<String, String> {
    let mut c = Checks::default();
    let e = |r: idcomb::Result<f64>| r.unwrap_or(f64::NAN);

    let y: Vec<f64> = (1..=13).map(f64::from).collect();
    let want: Vec<f64> = (1..=2).map(|h| y[y.len() - 12 + h - 1]).collect();
    c.close_all(
        "snaive",
        &forecasters::seasonal_naive(&y, 12, 2).forecast,
        &want,
        EXACT,
    );

    let y = [0.0, 4.0, 0.0, 4.0, 0.0, 4.0];
    let k = brute_force_ma_order(&y);
    c.ok("ma order", k == 2, || format!("brute force chose {k}"));
    let want = mean(&y[y.len() - k..]);
    c.close("ma", forecasters::moving_average(&y, 1).forecast[0], want, EXACT);
    c.close("ma value", want, 2.0, EXACT);

    let mut level = 2.0;
    level = 0.5 * 0.0 + 0.5 * level;
    c.close(
        "ses",
        forecasters::ses_with(&[2.0, 0.0], 0.5, 1).forecast[0],
        level,
        EXACT,
    );

    let flat = [2.0; 4];
    let cro = forecasters::croston(&flat, 1)
        .map(|f| f.forecast[0])
        .unwrap_or(f64::NAN);
    let sba = forecasters::sba(&flat, 1)
        .map(|f| f.forecast[0])
        .unwrap_or(f64::NAN);
    c.close("sba", sba, 0.95 * cro, EXACT);
    c.close("sba value", sba, 1.9, EXACT);

    let y = [3.0, 0.0, 3.0, 0.0, 3.0, 0.0];
    let a = 2;
    let buckets: Vec<f64> = y.rchunks_exact(a).map(|b| b.iter().sum()).collect();
    let level = buckets[0];
    c.ok("adida buckets", buckets.iter().all(|&b| b == level), || {
        format!("{buckets:?}")
    });
    let adida = forecasters::adida(&y, 2).map(|f| f.forecast).unwrap_or_default();
    c.close_all("adida", &adida, &[level / a as f64; 2], EXACT);

    let res = [4.0, 1.0, 3.0, 2.0];
    c.close(
        "residual quantile",
        e(residual_quantile(&res, 0.75)),
        type7(&res, 0.75),
        EXACT,
    );
    c.close("residual quantile value", type7(&res, 0.75), 3.25, EXACT);
    let qf = quantile_forecast(&[1.0, 2.0, 3.0], &[-1.0, 0.0, 1.0], 0.5)
        .map(|q| q.values)
        .unwrap_or_default();
    c.close_all("quantile forecast", &qf, &[1.0, 2.0, 3.0], EXACT);

    let y = [5.0, 0.0, 0.0, 2.0, 0.0, 1.0];
    let pos: Vec<f64> = (0..y.len())
        .filter(|&i| y[i] != 0.0)
        .map(|i| (i + 1) as f64)
        .collect();
    let intervals: Vec<f64> = pos.windows(2).map(|w| w[1] - w[0]).collect();
    c.close("idi", e(idi(&y)), mean(&intervals), EXACT);
    c.close("idi value", mean(&intervals), 2.5, EXACT);

    let nz = [2.0, 4.0];
    let want = (sample_sd(&nz) / mean(&nz)).powi(2);
    c.close("cv2", e(cv2(&[0.0, 2.0, 0.0, 4.0])), want, EXACT);
    c.close("cv2 value", want, 2.0 / 9.0, EXACT);

    let periodic: Vec<f64> = (0..20).map(|i| ((i + 1) % 2) as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let random: Vec<f64> = (0..20).map(|_| f64::from(rng.gen_range(0..2))).collect();
    let ap = e(approx_entropy(&periodic));
    let ar = e(approx_entropy(&random));
    c.close(
        "apen periodic",
        ap,
        apen_oracle(&periodic, 2, 0.2 * sample_sd(&periodic)),
        EXACT,
    );
    c.close(
        "apen random",
        ar,
        apen_oracle(&random, 2, 0.2 * sample_sd(&random)),
        EXACT,
    );
    c.ok("apen order", ap < ar, || format!("periodic {ap} vs random {ar}"));

    let y: [f64; 3] = [1.0, 4.0, 2.0];
    let want = mean(&y.windows(2).map(|w| (w[1] - w[0]).abs()).collect::<Vec<_>>());
    c.close("f7", simple_ratios(&y).2, want, EXACT);
    c.close("f7 value", want, 2.5, EXACT);

    let chunks = [[0.0, 2f64.sqrt()], [0.0, 2.0], [0.0, 6f64.sqrt()]];
    let vars: Vec<f64> = chunks.iter().map(|ch| (ch[1] - ch[0]).powi(2) / 2.0).collect();
    let slope = (vars[2] - vars[0]) / 2.0;
    let flat: Vec<f64> = chunks.concat();
    c.close("chunk variance slope", linear_chunk_var(&flat, 2), slope, EXACT);
    c.close("chunk variance slope value", slope, 1.0, 1e-14);

    let y = [1.0; 4];
    let want = y[3] * y[3] / y.iter().map(|v| v * v).sum::<f64>();
    c.close("ratio last chunk", ratio_last_chunk(&y, 4), want, EXACT);
    c.close("ratio last chunk value", want, 0.25, EXACT);

    let (fi, fj, hist) = ([2.0, 2.0], [0.0, 0.0], [1.0; 4]);
    let scale = mean(&hist).powi(2);
    let want = fi.iter().zip(&fj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 2.0 / scale;
    c.close("diversity", pair_diversity(&fi, &fj, &hist), want, EXACT);
    c.close("diversity value", want, 4.0, EXACT);

    let hist: [f64; 4] = [0.0, 2.0, 0.0, 2.0];
    let diffs: Vec<f64> = hist.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    let want = ((3.0f64 - 1.0).powi(2) / mean(&diffs)).sqrt();
    c.close("rmsse", e(rmsse(&hist, &[1.0], &[3.0])), want, EXACT);
    c.close("rmsse value", want, 1.0, EXACT);
    let s = mean(&hist.windows(2).map(|w| (w[1] - w[0]).abs()).collect::<Vec<_>>());
    c.close(
        "spl under",
        e(spl(&hist, &[1.0], &[3.0], 0.75)),
        0.75 * (3.0 - 1.0) / s,
        EXACT,
    );
    c.close(
        "spl over",
        e(spl(&hist, &[3.0], &[1.0], 0.75)),
        0.25 * (3.0 - 1.0) / s,
        EXACT,
    );
    c.close("spl under value", 0.75 * 2.0 / s, 0.75, EXACT);

    let ranks = average_rank(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]);
    c.close_all("average rank", &ranks, &[2.0; 3], EXACT);

    let rows = [vec![2.0, 2.0], vec![4.0, 4.0]];
    let combined = combiner::combine_rows(&rows, 2, &WeightVector::new(vec![0.5, 0.5])).unwrap_or_default();
    let want: Vec<f64> = (0..2).map(|h| 0.5 * rows[0][h] + 0.5 * rows[1][h]).collect();
    c.close_all("combine", &combined, &want, EXACT);

    islands_fixture(&mut c);
    screened_fixture(&mut c);
    lasso_fixtures(&mut c);
    learned_fixtures(&mut c);
    c.finish("fixtures")
}

fn islands_fixture(c: &mut Checks) {
    let methods = [MethodId::Naive, MethodId::SES, MethodId::CRO, MethodId::TSB];
    let crit = [0.50, 0.52, 0.55, 0.90];
    let gaps: Vec<f64> = (0..crit.len())
        .map(|j| if j == 0 { 0.0 } else { crit[j] - crit[j - 1] })
        .collect();
    let tau = type7(&gaps, 0.75) + 1.5 * (type7(&gaps, 0.75) - type7(&gaps, 0.25));
    c.close("islands threshold", tau, 0.2525, EXACT);
    let breach = (1..gaps.len())
        .find(|&j| gaps[j] > 0.0 && gaps[j] >= tau)
        .unwrap_or(gaps.len());
    match pool_islands(&methods, &crit, GapMode::Gaps) {
        Ok(sel) => {
            c.ok("islands keep", sel.kept == methods[..breach], || {
                format!("{:?}", sel.kept)
            });
            c.close(
                "islands diagnostic",
                sel.diagnostics.threshold.unwrap_or(f64::NAN),
                tau,
                EXACT,
            );
        }
        Err(e) => c.ok("islands", false, || e.to_string()),
    }
}

fn screened_fixture(c: &mut Checks) {
    let methods = [MethodId::Naive, MethodId::SES, MethodId::CRO];
    let e1 = vec![0.1, 0.5, 0.2, 0.9, 0.4];
    let errors = vec![e1.clone(), vec![0.7, 0.1, 0.6, 0.2, 0.8], e1];
    match pool_screened(&methods, &errors, &[0.4, 0.5, 0.6]) {
        Ok(sel) => c.ok("screened", sel.kept == methods[..2], || format!("{:?}", sel.kept)),
        Err(e) => c.ok("screened", false, || e.to_string()),
    }
}

fn lasso_fixtures(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let methods = [MethodId::Naive, MethodId::SES, MethodId::CRO, MethodId::TSB];
    let k = 2;
    let design: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..methods.len()).map(|_| rng.gen_range(0.0..5.0)).collect())
        .collect();
    let actual: Vec<f64> = design.iter().map(|r| r[k]).collect();
    match pool_lasso(&methods, &design, &actual, &[0.3, 0.6, 0.5, 0.7], 9) {
        Ok(sel) => c.ok("lasso recovery", sel.kept.contains(&methods[k]), || {
            format!("{:?}", sel.kept)
        }),
        Err(e) => c.ok("lasso recovery", false, || e.to_string()),
    }

    let base: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..5.0)).collect();
    let other: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..5.0)).collect();
    let x: Vec<Vec<f64>> = (0..30).map(|i| vec![base[i], base[i], other[i]]).collect();
    let y: Vec<f64> = (0..30).map(|i| 2.0 * base[i] + 0.3 * other[i]).collect();
    let xty = |j: usize| x.iter().zip(&y).map(|(r, v)| r[j] * v).sum::<f64>().abs();
    let lam_max = (0..3).map(xty).fold(0.0, f64::max) / 30.0;
    let lambdas: Vec<f64> = (0..20).map(|i| lam_max * 0.7f64.powi(i)).collect();
    let path = lasso_path(&x, &y, &lambdas);
    let both = path
        .iter()
        .any(|b| b[0] != 0.0 && b[1] != 0.0 && b[0].signum() == b[1].signum());
    c.ok("lasso duplicates", !both, || {
        "both duplicates active with one sign".into()
    });
}

fn learned_fixtures(c: &mut Checks) {
    let methods = MethodId::ALL;
    let k = 4;
    let hp = Hyperparams::default();
    let all = dominant_instances(60, methods.len(), k, 3, 21);
    let (fit_on, held) = all.split_at(40);
    match train(
        fit_on,
        spec_for(&methods, 3, LossKind::Rmsse, TrainerMode::WeightedLoss),
        &hp,
    ) {
        Ok((model, _)) => {
            let min_w = held
                .iter()
                .map(|inst| {
                    predict_weights(&model, &inst.x)
                        .map(|w| w.as_slice()[k])
                        .unwrap_or(0.0)
                })
                .fold(1.0, f64::min);
            c.ok("dominant method", min_w > 0.9, || {
                format!("min held-out weight {min_w}")
            });
        }
        Err(e) => c.ok("dominant method", false, || e.to_string()),
    }

    let u = 0.995;
    let hist = [0.0, 3.0, 1.0, 0.0, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spl_instances: Vec<TrainingInstance> = (0..60)
        .map(|i| {
            let actual: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..4.0)).collect();
            let err = (0..methods.len())
                .map(|j| {
                    let q: Vec<f64> = actual
                        .iter()
                        .map(|a| if j == k { *a } else { a + 1.0 + j as f64 })
                        .collect();
                    spl(&hist, &q, &actual, u).unwrap_or(f64::NAN)
                })
                .collect();
            TrainingInstance {
                series_id: format!("q{i}"),
                x: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                err,
            }
        })
        .collect();
    let (fit_on, held) = spl_instances.split_at(40);
    match train(
        fit_on,
        spec_for(&methods, 3, LossKind::Spl(u), TrainerMode::WeightedLoss),
        &hp,
    ) {
        Ok((model, _)) => {
            let min_w = held
                .iter()
                .map(|inst| {
                    predict_weights(&model, &inst.x)
                        .map(|w| w.as_slice()[k])
                        .unwrap_or(0.0)
                })
                .fold(1.0, f64::min);
            c.ok("dominant quantile method", min_w > 0.9, || {
                format!("min held-out weight {min_w}")
            });
        }
        Err(e) => c.ok("dominant quantile method", false, || e.to_string()),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let imp_instances: Vec<TrainingInstance> = (0..60)
        .map(|i| {
            let v: f64 = rng.gen_range(0.0..1.0);
            let best = if v < 0.5 { 0 } else { 1 };
            TrainingInstance {
                series_id: format!("f{i}"),
                x: vec![1.0, v, -2.0],
                err: (0..methods.len())
                    .map(|j| if j == best { 0.0 } else { 1.0 })
                    .collect(),
            }
        })
        .collect();
    match train(
        &imp_instances,
        spec_for(&methods, 3, LossKind::Rmsse, TrainerMode::WeightedLoss),
        &hp,
    ) {
        Ok((model, _)) => {
            let imp = feature_importance(&model);
            c.close("importance", imp[1], 1.0, 1e-9);
        }
        Err(e) => c.ok("importance", false, || e.to_string()),
    }
}

fn invariant_suites() -> Verdict {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let dom = dominant_instances(30, 12, 3, 4, 1);
    let model = train(
        &dom,
        spec_for(&MethodId::ALL, 4, LossKind::Rmsse, TrainerMode::WeightedLoss),
        &Hyperparams::default(),
    )
    .map(|(m, _)| m)
    .unwrap_or_else(|_| {
        MetaModel::untrained(
            spec_for(&MethodId::ALL, 4, LossKind::Rmsse, TrainerMode::WeightedLoss),
            Hyperparams::default(),
        )
    });
    for t in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let w = predict_weights(&model, &x)
            .map(|w| w.as_slice().to_vec())
            .unwrap_or_default();
        let sum: f64 = w.iter().sum();
        c.ok(
            "simplex",
            w.len() == 12 && (sum - 1.0).abs() <= 1e-9 && w.iter().all(|&v| v >= 0.0),
            || format!("trial {t}: {w:?}"),
        );
        let scores: Vec<f64> = (0..12).map(|_| rng.gen_range(-800.0..800.0)).collect();
        let s = softmax(&scores);
        let sum: f64 = s.iter().sum();
        c.ok(
            "softmax simplex",
            (sum - 1.0).abs() <= 1e-9 && s.iter().all(|v| *v >= 0.0 && v.is_finite()),
            || format!("trial {t}: sum {sum}"),
        );
    }

    for t in 0..200 {
        let h = rng.gen_range(1..8);
        let n = rng.gen_range(2..20);
        let fi: Vec<f64> = (0..h).map(|_| rng.gen_range(0.0..10.0)).collect();
        let fj: Vec<f64> = (0..h).map(|_| rng.gen_range(0.0..10.0)).collect();
        let hist: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let act: Vec<f64> = (0..h).map(|_| rng.gen_range(0.0..10.0)).collect();
        let k: f64 = rng.gen_range(0.01..100.0);
        let sc = |v: &[f64]| v.iter().map(|x| x * k).collect::<Vec<f64>>();
        let d = pair_diversity(&fi, &fj, &hist);
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        c.ok("diversity symmetry", d == pair_diversity(&fj, &fi, &hist), || {
            format!("trial {t}")
        });
        let ds = pair_diversity(&sc(&fi), &sc(&fj), &sc(&hist));
        c.ok("diversity scale", rel(d, ds), || {
            format!("trial {t}: {d} vs {ds}")
        });
        if let (Ok(a), Ok(b)) = (rmsse(&hist, &fi, &act), rmsse(&sc(&hist), &sc(&fi), &sc(&act))) {
            c.ok("rmsse scale", rel(a, b), || format!("trial {t}: {a} vs {b}"));
        }
        let u = rng.gen_range(0.01..0.99);
        if let (Ok(a), Ok(b)) = (spl(&hist, &fi, &act, u), spl(&sc(&hist), &sc(&fi), &sc(&act), u)) {
            c.ok("spl scale", rel(a, b), || format!("trial {t}: {a} vs {b}"));
        }
    }

    type Method = fn(&[f64], usize) -> idcomb::Result<Fit<f64>>;
    let methods: [(&str, Method); 9] = [
        ("Naive", |y, h| Ok(forecasters::naive(y, h))),
        ("SNaive", |y, h| Ok(forecasters::seasonal_naive(y, 12, h))),
        ("SES", |y, h| Ok(forecasters::ses(y, h))),
        ("MA", |y, h| Ok(forecasters::moving_average(y, h))),
        ("CRO", forecasters::croston),
        ("SBA", forecasters::sba),
        ("TSB", forecasters::tsb),
        ("ADIDA", forecasters::adida),
        ("IMAPA", forecasters::imapa),
    ];
    for t in 0..200 {
        let len = rng.gen_range(8..60);
        let mut y = match t % 4 {
            0 => synthetic::smooth_values(&mut rng, len),
            1 => synthetic::intermittent_values(&mut rng, len),
            2 => synthetic::lumpy_values(&mut rng, len),
            _ => synthetic::erratic_values(&mut rng, len),
        };
        if y.iter().all(|&v| v == 0.0) {
            y[0] = 1.0;
        }
        let k: f64 = rng.gen_range(0.1..10.0);
        let yk: Vec<f64> = y.iter().map(|v| v * k).collect();
        let top = yk.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (name, f) in &methods {
            match (f(&y, 4), f(&yk, 4)) {
                (Ok(a), Ok(b)) => {
                    let pairs = a
                        .forecast
                        .iter()
                        .zip(&b.forecast)
                        .chain(a.residuals.iter().zip(&b.residuals));
                    let worst = pairs.map(|(p, q)| (p * k - q).abs() / top).fold(0.0, f64::max);
                    c.ok(
                        "scale equivariance",
                        worst <= 1e-9 && a.residuals.len() == b.residuals.len(),
                        || format!("{name} trial {t}: relative deviation {worst:e}"),
                    );
                }
                (Err(_), Err(_)) => {}
                _ => c.ok("scale equivariance", false, || {
                    format!("{name} trial {t}: error on one side only")
                }),
            }
        }
    }

    for t in 0..500 {
        let n = rng.gen_range(1..=7);
        let ys: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.gen_range(0..6)) + rng.gen_range(0.0..1.0))
            .collect();
        let u: f64 = rng.gen_range(0.01..0.99);
        let risk = |q: f64| ys.iter().map(|&y| pinball(q, y, u)).sum::<f64>();
        let mut sorted = ys.clone();
        sorted.sort_by(f64::total_cmp);
        let emp = sorted[((n as f64 * u).ceil() as usize).clamp(1, n) - 1];
        let lo = sorted[0] - 1.0;
        let hi = sorted[n - 1] + 1.0;
        let grid = (0..=4000).map(|i| lo + (hi - lo) * i as f64 / 4000.0);
        let brute = grid
            .chain(ys.iter().copied())
            .map(risk)
            .fold(f64::INFINITY, f64::min);
        c.ok("pinball minimiser", risk(emp) <= brute + 1e-12, || {
            format!(
                "trial {t}: risk at empirical quantile {} vs brute force {brute}",
                risk(emp)
            )
        });
    }
    verdict(c.finish("checks"))
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = 12;
        let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let err: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        let (g, _) = weighted_loss_grad_hess(&s, &err);
        let step = 1e-5;
        let fd: Vec<f64> = (0..m)
            .map(|i| {
                let mut up = s.clone();
                let mut dn = s.clone();
                up[i] += step;
                dn[i] -= step;
                (weighted_loss(&up, &err) - weighted_loss(&dn, &err)) / (2.0 * step)
            })
            .collect();
        let norm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let diff = g.iter().zip(&fd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        worst = worst.max(diff / norm);
    }
    let detail = format!("worst relative error {worst:.2e} over 100 instances");
    if worst < 1e-6 {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn separable_clusters_end_to_end() -> Verdict {
    verdict(separable_checks())
}

fn separable_checks() -> Result<String, String> {
    let h = 6;
    let fx = separable_clusters(300, 48, h, 7);
    let all = fx.dataset.series();
    let train_ds = Dataset::new("train", all[..240].to_vec()).map_err(|e| e.to_string())?;
    let hold_ds = Dataset::new("holdout", all[240..].to_vec()).map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        horizon: h,
        seed: 7,
        hyperparams: Hyperparams {
            min_child_weight: 0.0,
            ..Hyperparams::default()
        },
        ..RunConfig::default()
    };
    let trained = pipeline::run_train(&train_ds, &cfg).map_err(|e| e.to_string())?;
    let mut c = Checks::default();
    let trace = &trained.report.trace;
    let worst_rise = trace
        .windows(2)
        .map(|p| p[1].train_weighted_loss - p[0].train_weighted_loss)
        .fold(f64::NEG_INFINITY, f64::max);
    c.ok("loss trace", worst_rise <= 1e-9, || {
        format!("training loss rose by {worst_rise:e}")
    });

    let position = |id: &str| all.iter().position(|s| s.id() == id).unwrap_or(0);
    let held = build_training_set(&hold_ds, h, Mode::Fide, LossKind::Rmsse).map_err(|e| e.to_string())?;
    c.ok("holdout size", held.instances.len() == 60, || {
        format!("{} instances", held.instances.len())
    });
    let mut min_w = 1.0f64;
    let (mut weighted, mut sa) = (0.0, 0.0);
    for inst in &held.instances {
        let w = predict_weights(&trained.bundle.point, &inst.x).map_err(|e| e.to_string())?;
        min_w = min_w.min(w.as_slice()[fx.method_of(position(&inst.series_id)).index()]);
        weighted += w
            .as_slice()
            .iter()
            .zip(&inst.err)
            .map(|(a, b)| a * b)
            .sum::<f64>();
        sa += mean(&inst.err);
    }
    let n = held.instances.len() as f64;
    let (weighted, sa) = (weighted / n, sa / n);
    c.ok("cluster weight", min_w > 0.9, || {
        format!("min weight on the correct method {min_w:.4}")
    });
    c.ok("weighted rmsse", weighted <= 0.7 * sa, || {
        format!("weighted {weighted:.4} vs SA {sa:.4}")
    });

    let run = pipeline::run_forecast(&hold_ds, &trained.bundle, &cfg).map_err(|e| e.to_string())?;
    let (mut final_w, mut comb, mut sa_comb) = (1.0f64, 0.0, 0.0);
    for f in &run.series {
        let s = &all[position(&f.series_id)];
        let (history, actual) = s.values().split_at(s.len() - h);
        final_w = final_w.min(f.weights.as_slice()[fx.method_of(position(&f.series_id)).index()]);
        comb += rmsse(history, &f.combined, actual).unwrap_or(f64::NAN);
        let avg: Vec<f64> = (0..h)
            .map(|k| mean(&f.matrix.values.iter().map(|r| r[k]).collect::<Vec<_>>()))
            .collect();
        sa_comb += rmsse(history, &avg, actual).unwrap_or(f64::NAN);
    }
    let m = run.series.len() as f64;
    let (comb, sa_comb) = (comb / m, sa_comb / m);
    c.ok("combined rmsse", comb <= 0.7 * sa_comb, || {
        format!("combined {comb:.4} vs SA {sa_comb:.4}")
    });
    c.finish("checks").map(|d| {
        format!(
            "{d}; inner window: min correct weight {min_w:.4}, weighted RMSSE {weighted:.4} vs SA {sa:.4}; \
             final window: min correct weight {final_w:.4}, combined RMSSE {comb:.4} vs SA {sa_comb:.4}"
        )
    })
}

fn diversity_dimensionality() -> Verdict {
    let mut c = Checks::default();
    c.ok("pairs", pair_indices(12).len() == 66, || {
        format!("{}", pair_indices(12).len())
    });
    let ds = synthetic::mixed_dataset(4, 30, 40, 3);
    let s = &ds.series()[0];
    let dv = diversity_vector(&forecast_all(s, 6), s.values());
    c.ok("diversity vector", dv.values.len() == 66, || {
        format!("{}", dv.values.len())
    });
    match build_training_set(&ds, 6, Mode::Divide, LossKind::Rmsse) {
        Ok(set) => c.ok(
            "divide instances",
            set.instances.iter().all(|i| i.x.len() == 66),
            || {
                format!(
                    "{:?}",
                    set.instances.iter().map(|i| i.x.len()).collect::<Vec<_>>()
                )
            },
        ),
        Err(e) => c.ok("divide instances", false, || e.to_string()),
    }
    verdict(c.finish("checks"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_idcomb"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Verdict {
    verdict(determinism_checks())
}

fn determinism_checks() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("demand.csv");
    let ds = synthetic::mixed_dataset(40, 30, 60, 13);
    let file = std::fs::File::create(&data).map_err(|e| e.to_string())?;
    write_wide(&ds, file).map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    let cfg = r#"{"horizon": 6, "seed": 42, "quantile_models": true,
        "hyperparams": {"n_rounds": 60, "subsample": 0.8, "colsample": 0.7}}"#;
    std::fs::write(&config, cfg).map_err(|e| e.to_string())?;
    let files = ["model.json", "forecasts.csv", "weights.csv"];
    let mut outputs = Vec::new();
    for (run, threads) in ["1", "8", "1", "8"].iter().enumerate() {
        let out = dir.path().join(format!("run{run}"));
        let out_s = out.to_string_lossy().to_string();
        let model = out.join("model.json").to_string_lossy().to_string();
        let common = [
            "--config",
            config.to_str().unwrap_or_default(),
            "--data",
            data.to_str().unwrap_or_default(),
        ];
        let mut train_args = vec!["train"];
        train_args.extend(common);
        train_args.extend(["--out", &out_s, "--threads", threads]);
        run_cli(&train_args)?;
        let mut fc_args = vec!["forecast"];
        fc_args.extend(common);
        fc_args.extend([
            "--model",
            &model,
            "--out",
            &out_s,
            "--threads",
            threads,
            "--with-methods",
            "--with-weights",
        ]);
        run_cli(&fc_args)?;
        let bytes = files
            .iter()
            .map(|f| std::fs::read(out.join(f)).map_err(|e| format!("{f}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        outputs.push(bytes);
    }
    let mut c = Checks::default();
    for (run, bytes) in outputs.iter().enumerate().skip(1) {
        for (f, (a, b)) in files.iter().zip(outputs[0].iter().zip(bytes)) {
            c.ok(f, a == b, || format!("run {run} differs from run 0"));
        }
    }
    c.finish("file comparisons across 4 runs at 1 and 8 threads")
}

fn pooling_safety() -> Verdict {
    verdict(pooling_checks())
}

fn pooling_checks() -> Result<String, String> {
    let mut c = Checks::default();
    let algorithms = [
        PoolingAlgorithm::Islands,
        PoolingAlgorithm::Screened,
        PoolingAlgorithm::Lasso,
    ];
    let mut sizes = vec![Vec::new(); algorithms.len()];
    for d in 0..50u64 {
        let ds = synthetic::mixed_dataset(12, 30, 48, 1000 + d);
        let (fits, _) = fit_inner_windows(&ds, 6);
        let crit = pool_criterion(&fits, &MethodId::ALL).map_err(|e| e.to_string())?;
        let best = (0..crit.len())
            .min_by(|&a, &b| crit[a].total_cmp(&crit[b]))
            .unwrap_or(0);
        for (a, &alg) in algorithms.iter().enumerate() {
            let sel = match select_pool(&fits, &MethodId::ALL, alg, GapMode::Gaps, d) {
                Ok(sel) => sel,
                Err(e) => {
                    c.ok("select", false, || format!("{alg} on dataset {d}: {e}"));
                    continue;
                }
            };
            sizes[a].push(sel.kept.len() as f64);
            c.ok("non-empty", !sel.kept.is_empty(), || {
                format!("{alg} on dataset {d}")
            });
            c.ok("best kept", sel.kept.contains(&MethodId::ALL[best]), || {
                format!(
                    "{alg} on dataset {d} dropped {} from {:?}",
                    MethodId::ALL[best],
                    sel.kept
                )
            });
            let cfg = RunConfig {
                horizon: 6,
                mode: Mode::Divide,
                pooling: alg,
                seed: d,
                ..RunConfig::default()
            };
            let end_to_end = pipeline::run_train(&ds, &cfg).and_then(|t| {
                let run = pipeline::run_forecast(&ds, &t.bundle, &cfg)?;
                let dim = pair_indices(t.bundle.point.spec.methods.len()).len();
                Ok(t.bundle.point.spec.methods == sel.kept
                    && t.bundle.point.spec.input_dim == dim
                    && run
                        .series
                        .iter()
                        .all(|f| f.combined.iter().all(|v| v.is_finite())))
            });
            c.ok("divide end to end", matches!(end_to_end, Ok(true)), || {
                format!("{alg} on dataset {d}: {end_to_end:?}")
            });
        }
    }
    let means: Vec<String> = algorithms
        .iter()
        .zip(&sizes)
        .map(|(a, s)| format!("{a} {:.1}", mean(s)))
        .collect();
    c.finish("checks")
        .map(|d| format!("{d}; mean pool size {}", means.join(", ")))
}

fn m5_dataset() -> Option<Result<Dataset, String>> {
    let path = std::env::var_os("IDCOMB_M5_SALES")?;
    Some(read_m5(Path::new(&path)))
}

fn read_m5(path: &Path) -> Result<Dataset, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty M5 file")?.split(',').collect();
    let first_day = header
        .iter()
        .position(|h| h.starts_with("d_"))
        .ok_or("no d_ columns")?;
    let mut series = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        let values = cols[first_day..]
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{}: {e}", cols[0])))
            .collect::<Result<Vec<f64>, String>>()?;
        series.push(DemandSeries::new(cols[0], values, Period::Daily).map_err(|e| e.to_string())?);
    }
    Dataset::new("m5", series).map_err(|e| e.to_string())
}

fn m5_census() -> Verdict {
    let ds = match m5_dataset() {
        None => return Verdict::Skip("IDCOMB_M5_SALES not set".into()),
        Some(Err(e)) => return Verdict::Fail(e),
        Some(Ok(ds)) => ds,
    };
    let (rows, bad) = pipeline::run_classify(&ds);
    let counts = pipeline::census(rows.iter().map(|r| r.3));
    let get = |k: SbcClass| counts.iter().find(|(c, _)| *c == k).map_or(0, |c| c.1);
    let got = [
        get(SbcClass::Intermittent),
        get(SbcClass::Lumpy),
        get(SbcClass::Erratic),
        get(SbcClass::Smooth),
    ];
    let detail = format!(
        "intermittent/lumpy/erratic/smooth = {}/{}/{}/{}, {} unclassifiable",
        got[0],
        got[1],
        got[2],
        got[3],
        bad.len()
    );
    if got == [22206, 5359, 897, 2028] {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn m5_directional() -> Verdict {
    let ds = match m5_dataset() {
        None => return Verdict::Skip("IDCOMB_M5_SALES not set".into()),
        Some(Err(e)) => return Verdict::Fail(e),
        Some(Ok(ds)) => ds,
    };
    verdict(m5_directional_checks(&ds))
}

fn m5_directional_checks(ds: &Dataset) -> Result<String, String> {
    let mut c = Checks::default();
    let mut summary = Vec::new();
    for mode in [Mode::Fide, Mode::Divide] {
        let cfg = RunConfig {
            horizon: 28,
            period: Period::Daily,
            mode,
            ..RunConfig::default()
        };
        let trained = pipeline::run_train(ds, &cfg).map_err(|e| e.to_string())?;
        let run = pipeline::run_forecast(ds, &trained.bundle, &cfg).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        pipeline::write_forecasts(&run, &mut buf, false).map_err(|e| e.to_string())?;
        let table = pipeline::read_forecasts(buf.as_slice()).map_err(|e| e.to_string())?;
        let eval = pipeline::run_evaluate(ds, &table, &cfg).map_err(|e| e.to_string())?;
        let score = |name: &str| {
            eval.overall
                .iter()
                .find(|r| r.method == name)
                .map_or(f64::NAN, |r| r.rmsse)
        };
        let (learned, sa, median) = (score(mode.name()), score("SA"), score("Median"));
        c.ok(mode.name(), learned < sa && learned < median, || {
            format!("{learned:.4} vs SA {sa:.4}, Median {median:.4}")
        });
        summary.push(format!("{} {learned:.4}", mode.name()));
        if mode == Mode::Divide {
            summary.push(format!("SA {sa:.4}, Median {median:.4}"));
        }
    }
    c.finish("checks")
        .map(|d| format!("{d}; RMSSE {}", summary.join(", ")))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "formula fixtures",
            budget: Some(Duration::from_secs(1)),
            run: formula_fixtures,
        },
        Criterion {
            name: "invariant suites",
            budget: Some(Duration::from_secs(30)),
            run: invariant_suites,
        },
        Criterion {
            name: "gradient check",
            budget: None,
            run: gradient_check,
        },
        Criterion {
            name: "separable clusters end to end",
            budget: Some(Duration::from_secs(60)),
            run: separable_clusters_end_to_end,
        },
        Criterion {
            name: "diversity dimensionality",
            budget: None,
            run: diversity_dimensionality,
        },
        Criterion {
            name: "determinism",
            budget: None,
            run: determinism,
        },
        Criterion {
            name: "pooling safety",
            budget: None,
            run: pooling_safety,
        },
        Criterion {
            name: "M5 census",
            budget: Some(Duration::from_secs(300)),
            run: m5_census,
        },
        Criterion {
            name: "M5 directional check",
            budget: None,
            run: m5_directional,
        },
    ];
    let mut failed = 0;
    for cr in &criteria {
        let start = Instant::now();
        let v = (cr.run)();
        let elapsed = start.elapsed();
        let over = cr.budget.filter(|b| elapsed > *b);
        let (tag, detail) = match v {
            Verdict::Pass(d) if over.is_none() => ("PASS", d),
            Verdict::Pass(d) => (
                "FAIL",
                format!("{d}; over the {:?} budget", over.unwrap_or_default()),
            ),
            Verdict::Fail(d) => ("FAIL", d),
            Verdict::Skip(d) => ("SKIP", d),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} {}: {detail} ({:.2} s)", cr.name, elapsed.as_secs_f64());
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
