//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use falsify_core::config::{DataPaths, RunConfig};
use falsify_core::execution::{simulate, ExitReason, ExitSpec, FrictionModel, TradeRecord};
use falsify_core::features::{
    gmm_fit, hurst_exponent, kalman_velocity, markov_transition_prob, ou_fit, regime_labels,
    volume_zscore,
};
use falsify_core::market::{Bar, MarketData, Price, SessionKind, TickSize, TradingDay};
use falsify_core::pipeline::{run_to_dir, Engine};
use falsify_core::seed::derive_seed;
use falsify_core::signals::vvg::{vvg_flags, vvg_metrics, vvg_terciles, VvgMetrics};
use falsify_core::signals::{Direction, Family, SignalEvent};
use falsify_core::stats::{
    permutation_test, plan_folds, select_grid_point, validate_inputs, walk_forward, GateConfig,
    GateInputs, Phase,
};
use falsify_core::synth::{
    gen_edge_days, gen_market, gen_null_days, gen_regime_days, write_corpus, DriftSpec,
    MarketSynthSpec, RegimeSpec, SynthSpec,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(
        elapsed < limit,
        format!(
            "{detail}; {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn gate_reproduction() -> Outcome {
    let t0 = Instant::now();
    let cfg = GateConfig::default();
    let gate = |t: f64, n: usize, net: f64, stable: bool, p: Option<f64>| {
        validate_inputs(
            &GateInputs {
                t: Some(t),
                n,
                mean_net: Some(net),
                year_stable: stable,
                p,
                perm_applicable: true,
            },
            &cfg,
        )
        .failure_label
    };
    let gap = gate(3.23, 22, 14.52, true, Some(0.01));
    let london = gate(5.15, 289, 5.77, true, Some(0.0009));
    let orb = gate(1.50, 447, 2.82, false, None);
    let ok = gap == "FAIL – N < 30"
        && london == "PASS"
        && orb.starts_with("FAIL")
        && t0.elapsed() < Duration::from_secs(1);
    check(
        ok,
        format!("gap continuation {gap:?}, London B {london:?}, ORB long b+15 {orb:?}"),
    )
}

fn friction_arithmetic() -> Outcome {
    let cent = TickSize::new(0.01).unwrap();
    let f = FrictionModel::default().ticks(cent).unwrap();
    let mut out = Vec::new();
    let mut ok = true;
    for (g, n) in [(16.52, 14.52), (3.37, 1.37), (1.06, -0.94)] {
        let net = cent.exact(g).unwrap() - f;
        ok &= net == cent.exact(n).unwrap();
        out.push(format!("{g}→{}", cent.format(net)));
    }
    let quarter = FrictionModel::default().ticks(TickSize::default()).unwrap();
    ok &= quarter == Price(8);
    check(ok, out.join(", "))
}

/// Mean gross and its standard error with trades clustered by day, since
/// trades on one day share overlapping bars.
fn clustered_mean_se(trades: &[TradeRecord]) -> Option<(f64, f64)> {
    let n = trades.len();
    let mut days: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for t in trades {
        days.entry(t.date).or_default().push(t.gross_pts());
    }
    if days.len() < 2 {
        return None;
    }
    let mean = trades.iter().map(|t| t.gross_pts()).sum::<f64>() / n as f64;
    let g = days.len() as f64;
    let ss: f64 = days
        .values()
        .map(|v| v.iter().map(|x| x - mean).sum::<f64>().powi(2))
        .sum();
    Some((mean, (g / (g - 1.0) * ss).sqrt() / n as f64))
}

const CALIBRATION_SEED: u64 = 1;

fn null_calibration() -> Outcome {
    let t0 = Instant::now();
    let mut passes = 0usize;
    let mut variants = 0usize;
    let mut outside = Vec::new();
    let mut lines = Vec::new();
    for seed in 1..=100u64 {
        let m = gen_market(&MarketSynthSpec::null(500, seed)).map_err(|e| e.to_string())?;
        let config = RunConfig::with_defaults(DataPaths::default(), seed);
        let families = config.families_for(None).unwrap();
        let engine = Engine::new(&config, &m.market).map_err(|e| e.to_string())?;
        for r in engine.run(&families) {
            let r = r.map_err(|e| e.to_string())?;
            variants += 1;
            if r.report.verdict.overall {
                passes += 1;
                lines.push(format!("seed {seed} {} passed", r.report.family));
            }
            if seed == CALIBRATION_SEED {
                match clustered_mean_se(&r.trades) {
                    Some((mean, se)) if mean.abs() > 3.0 * se => {
                        outside.push(format!("{} mean {mean:.2} se {se:.2}", r.report.family))
                    }
                    Some(_) => {}
                    None => lines.push(format!(
                        "{} has {} trades, no SE",
                        r.report.family,
                        r.trades.len()
                    )),
                }
            }
        }
    }
    let detail = format!(
        "{passes}/{variants} family-variants pass; {} families outside 3 SE on seed {CALIBRATION_SEED} {outside:?}; {}",
        outside.len(),
        lines.join("; ")
    );
    if outside.is_empty() && passes * 100 <= variants {
        within(t0.elapsed(), Duration::from_secs(300), detail)
    } else {
        Err(detail)
    }
}

fn planted_edge_power() -> Outcome {
    let t0 = Instant::now();
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 1..=100u64 {
        let m = gen_market(&MarketSynthSpec::confluence(500, seed)).map_err(|e| e.to_string())?;
        let config = RunConfig::with_defaults(DataPaths::default(), seed);
        let engine = Engine::new(&config, &m.market).map_err(|e| e.to_string())?;
        let r = engine
            .run_family(Family::ConfluenceRth)
            .map_err(|e| e.to_string())?;
        let mm = &r.report.metrics;
        let t = mm.t_stat.unwrap_or(f64::NAN);
        let p = mm.permutation_p.unwrap_or(1.0);
        if r.report.verdict.overall && t >= 3.0 && p < 0.001 {
            hits += 1;
        } else {
            misses.push(format!(
                "seed {seed}: t {t:.2} p {p:.4} {}",
                r.report.verdict.failure_label
            ));
        }
    }
    let detail = format!("{hits}/100 seeds pass with T ≥ 3 and p < 0.001 {misses:?}");
    if hits >= 95 {
        within(t0.elapsed(), Duration::from_secs(600), detail)
    } else {
        Err(detail)
    }
}

/// Replaces every bar stamped after `cutoff` with random bars, in all
/// sessions, and relinks the prior RTH closes.
fn mutate_after(market: &mut MarketData, cutoff: chrono::NaiveDateTime, rng: &mut ChaCha8Rng) {
    for s in SessionKind::ALL {
        for day in market.session_mut(s) {
            for b in day.bars.iter_mut().filter(|b| b.ts > cutoff) {
                let open = b.open + Price(rng.random_range(-40..=40));
                let close = open + Price(rng.random_range(-60..=60));
                *b = Bar {
                    ts: b.ts,
                    open,
                    high: open.max(close) + Price(rng.random_range(0..=20)),
                    low: open.min(close) - Price(rng.random_range(0..=20)),
                    close,
                    volume: rng.random_range(1..=20_000),
                };
            }
        }
    }
    let mut prev: Option<Price> = None;
    for day in &mut market.rth {
        if day.complete {
            day.prior_rth_close = prev;
            prev = day.bars.last().map(|b| b.close);
        }
    }
}

fn entries_through(trades: &[TradeRecord], t: usize) -> Vec<(usize, usize, Price, Direction)> {
    trades
        .iter()
        .filter(|r| r.entry_bar <= t)
        .map(|r| (r.signal_bar, r.entry_bar, r.entry_price, r.direction))
        .collect()
}

fn no_lookahead() -> Outcome {
    let mut spec = MarketSynthSpec::confluence(240, 7);
    spec.years = 3;
    spec.event_rate = 0.3;
    let base_market = gen_market(&spec).map_err(|e| e.to_string())?.market;
    let config = RunConfig::with_defaults(DataPaths::default(), 7);
    let base = Engine::new(&config, &base_market).map_err(|e| e.to_string())?;
    for k in 0..base.plan().folds.len() {
        for s in SessionKind::ALL {
            let _ = base.regime_model(k, s);
        }
    }
    let families = config.families_for(None).unwrap();
    let friction = FrictionModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = Vec::new();
    let mut emitted = 0usize;
    let mut entries = 0usize;
    let trials = 10_000;
    for trial in 0..trials {
        let family = families[rng.random_range(0..families.len())];
        let grid = &config.families[&family];
        let params = &grid.params[rng.random_range(0..grid.params.len())];
        let k = rng.random_range(0..base.plan().folds.len());
        let stream = base.stream(family.session());
        let days = stream.days_in(&[base.plan().folds[k].test_year]);
        if days.is_empty() {
            continue;
        }
        let d = rng.random_range(days);
        let day = &stream.days[d];
        let t = rng.random_range(0..day.len());
        let mut market = base_market.clone();
        mutate_after(&mut market, day.bars[t].ts, &mut rng);
        let probe = base.rebind(&market).map_err(|e| e.to_string())?;
        let before = base
            .signals_on(family, params, k, d)
            .map_err(|e| e.to_string())?;
        let after = probe
            .signals_on(family, params, k, d)
            .map_err(|e| e.to_string())?;
        let upto = |evs: &[SignalEvent]| -> Vec<SignalEvent> {
            evs.iter().filter(|e| e.bar_index <= t).cloned().collect()
        };
        let (b, a) = (upto(&before), upto(&after));
        emitted += b.len();
        if a != b {
            violations.push(format!(
                "trial {trial}: {family} day {} bar {t} signals",
                day.date
            ));
            continue;
        }
        let mday = &probe.stream(family.session()).days[d];
        for exit in &grid.exits {
            let x = simulate(&before, day, exit, &friction).map_err(|e| e.to_string())?;
            let y = simulate(&after, mday, exit, &friction).map_err(|e| e.to_string())?;
            let (x, y) = (entries_through(&x.trades, t), entries_through(&y.trades, t));
            entries += x.len();
            if x != y {
                violations.push(format!(
                    "trial {trial}: {family} {exit} day {} bar {t} entries",
                    day.date
                ));
            }
        }
    }
    check(
        violations.is_empty(),
        format!(
            "{trials} trials, {emitted} signals and {entries} entries compared, {} violations {:?}",
            violations.len(),
            &violations[..violations.len().min(5)]
        ),
    )
}

fn ar1(seed: u64, n: usize, phi: f64, mu: f64, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = Normal::new(0.0, sd).unwrap();
    let mut x = mu;
    (0..n)
        .map(|_| {
            x = mu + phi * (x - mu) + e.sample(&mut rng);
            x
        })
        .collect()
}

fn estimator_oracles() -> Outcome {
    let mut out = Vec::new();
    let mut ok = true;

    // A single 5000-bar path pins the half-life to roughly ±7%, so the
    // recovery is judged on the median over independent paths.
    let phi = (-std::f64::consts::LN_2 / 7.85).exp();
    let mut hls: Vec<f64> = (0..100)
        .map(|s| {
            ou_fit(&ar1(s, 5000, phi, 2000.0, 1.5))
                .ok()
                .and_then(|f| f.half_life)
                .unwrap_or(f64::NAN)
        })
        .collect();
    hls.sort_by(f64::total_cmp);
    let hl = (hls[49] + hls[50]) / 2.0;
    ok &= (hl - 7.85).abs() / 7.85 < 0.05;
    out.push(format!("OU half-life {hl:.3}"));

    let mut worst_h: f64 = 0.5;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
            .collect();
        let h = hurst_exponent(&xs, 8).map_err(|e| e.to_string())?;
        if (h - 0.5).abs() > (worst_h - 0.5).abs() {
            worst_h = h;
        }
    }
    ok &= (worst_h - 0.5).abs() < 0.07;
    out.push(format!("Hurst worst of 20 {worst_h:.3}"));

    let ramp: Vec<f64> = (0..300).map(|i| 100.0 + 1.75 * i as f64).collect();
    let v = kalman_velocity(&ramp, 1e-3, 1.0).map_err(|e| e.to_string())?;
    let kerr = v[50..].iter().map(|x| (x - 1.75).abs()).fold(0.0, f64::max);
    ok &= kerr < 1e-3;
    out.push(format!("Kalman max error {kerr:.2e}"));

    let regimes = RegimeSpec {
        transition: vec![
            vec![0.90, 0.05, 0.05],
            vec![0.45, 0.10, 0.45],
            vec![0.05, 0.05, 0.90],
        ],
        mean: vec![-8.0, 0.0, 8.0],
        vol_mult: vec![0.3, 0.5, 0.3],
        volume_mult: vec![1.0, 3.0, 1.0],
    };
    let mut worst_acc: f64 = 1.0;
    for seed in 0..5 {
        let spec = SynthSpec {
            n_days: 60,
            regimes: Some(regimes.clone()),
            seed,
            ..Default::default()
        };
        let (days, labels) = gen_regime_days(&spec).map_err(|e| e.to_string())?;
        let bars: Vec<Bar> = days.iter().flat_map(|d| d.bars.clone()).collect();
        let truth: Vec<u8> = labels.concat();
        let vz = volume_zscore(&bars, 50).map_err(|e| e.to_string())?;
        let tick = days[0].tick;
        let (mut xs, mut want) = (Vec::new(), Vec::new());
        for (i, b) in bars.iter().enumerate() {
            if let Some(z) = vz[i] {
                xs.push([tick.to_points(b.body()), tick.to_points(b.range()), z]);
                want.push(truth[i]);
            }
        }
        let m = gmm_fit(&xs, 3, seed).map_err(|e| e.to_string())?;
        let got = regime_labels(&m, &xs);
        let acc = got.iter().zip(&want).filter(|(a, b)| a == b).count() as f64 / want.len() as f64;
        worst_acc = worst_acc.min(acc);
    }
    ok &= worst_acc >= 0.95;
    out.push(format!("GMM worst accuracy {worst_acc:.3}"));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels: Vec<Option<u8>> = (0..400)
        .map(|_| (!rng.random_bool(0.05)).then(|| rng.random_range(0..3u8)))
        .collect();
    let mut mismatches = 0;
    for w in [10usize, 17, 60] {
        for from in 0..3u8 {
            for to in 0..3u8 {
                let fast =
                    markov_transition_prob(&labels, w, from, to).map_err(|e| e.to_string())?;
                for i in 0..labels.len() {
                    let (mut nf, mut nt) = (0u32, 0u32);
                    for j in i.saturating_sub(w)..i.saturating_sub(1) {
                        if labels[j] == Some(from) && labels[j + 1].is_some() {
                            nf += 1;
                            nt += u32::from(labels[j + 1] == Some(to));
                        }
                    }
                    let slow = (nf > 0).then(|| nt as f64 / nf as f64);
                    mismatches += usize::from(fast[i] != slow);
                }
            }
        }
    }
    ok &= mismatches == 0;
    out.push(format!("Markov mismatches {mismatches}"));
    check(ok, out.join(", "))
}

fn trade(date: NaiveDate, net_ticks: i64) -> TradeRecord {
    TradeRecord {
        family: Family::OrbLong,
        date,
        direction: Direction::Long,
        signal_bar: 0,
        entry_bar: 1,
        exit_bar: 2,
        entry_price: Price(0),
        exit_price: Price(net_ticks + 8),
        gross: Price(net_ticks + 8),
        net: Price(net_ticks),
        exit_reason: ExitReason::Horizon,
        tick: TickSize::default(),
    }
}

fn walk_forward_isolation() -> Outcome {
    let plan = plan_folds(&[2022, 2023, 2024, 2025]).map_err(|e| e.to_string())?;
    let folds: Vec<(Vec<i32>, i32)> = plan
        .folds
        .iter()
        .map(|f| (f.train_years.clone(), f.test_year))
        .collect();
    let want = vec![
        (vec![2022], 2023),
        (vec![2022, 2023], 2024),
        (vec![2022, 2023, 2024], 2025),
    ];
    let mut ok = folds == want;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut wrong = 0;
    let trials = 1000;
    for _ in 0..trials {
        let grid = rng.random_range(2..8usize);
        let good = rng.random_range(0..grid);
        let noise: Vec<Vec<i64>> = (0..grid)
            .map(|_| (0..40).map(|_| rng.random_range(-20..=20)).collect())
            .collect();
        let r = walk_forward(&[2022, 2023, 2024, 2025], grid, |fold, g, phase| {
            let date = NaiveDate::from_ymd_opt(fold.test_year, 6, 1).unwrap();
            // The train-dominant point loses heavily in the test year and
            // every other point wins heavily there.
            let drift = match (phase, g == good) {
                (Phase::Train, true) => 30,
                (Phase::Train, false) => -10,
                (Phase::Test, true) => -200,
                (Phase::Test, false) => 200,
            };
            Ok(noise[g].iter().map(|&e| trade(date, drift + e)).collect())
        })
        .map_err(|e| e.to_string())?;
        wrong += r.chosen.iter().filter(|&&c| c != good).count();
    }
    ok &= wrong == 0;
    ok &= select_grid_point(&[(Some(1.0), 50), (Some(4.0), 50)]) == Some(1);
    check(
        ok,
        format!("folds {folds:?}; {wrong} wrong selections over {trials} adversarial grids"),
    )
}

fn ks_uniform(ps: &mut [f64]) -> f64 {
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    ps.iter()
        .enumerate()
        .map(|(i, &p)| (p - i as f64 / n).abs().max(((i + 1) as f64 / n - p).abs()))
        .fold(0.0, f64::max)
}

fn random_trades(days: &[TradingDay], exit: &ExitSpec, n: usize, seed: u64) -> Vec<TradeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots: Vec<(usize, usize)> = days
        .iter()
        .enumerate()
        .flat_map(|(d, day)| {
            (0..day.len())
                .filter(move |&b| exit.admits(day, b))
                .map(move |b| (d, b))
        })
        .collect();
    let mut out = Vec::new();
    for _ in 0..n {
        let (d, b) = slots[rng.random_range(0..slots.len())];
        let dir = if rng.random_bool(0.5) {
            Direction::Long
        } else {
            Direction::Short
        };
        let ev = SignalEvent::new(Family::VolSpike, days[d].date, b, dir);
        out.extend(
            simulate(&[ev], &days[d], exit, &FrictionModel::default())
                .unwrap()
                .trades,
        );
    }
    out
}

fn permutation_correctness() -> Outcome {
    const ROOT: u64 = 8;
    let exit = ExitSpec::Horizon { horizon: 6 };
    let friction = FrictionModel::default();
    let mut ps = Vec::new();
    for rep in 0..200u64 {
        let days = gen_null_days(&SynthSpec {
            n_days: 30,
            seed: derive_seed(ROOT, "ks/days", rep),
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let trades = random_trades(&days, &exit, 40, derive_seed(ROOT, "ks/entries", rep));
        let seed = derive_seed(ROOT, "ks/permutation", rep);
        ps.push(
            permutation_test(&trades, &days, &exit, &friction, 1000, seed)
                .map_err(|e| e.to_string())?,
        );
    }
    let ks = ks_uniform(&mut ps);

    let edge = gen_edge_days(&SynthSpec {
        n_days: 60,
        seed: 4,
        drift: Some(DriftSpec {
            magnitude: 15.0,
            horizon: 13,
            events_per_day: 1,
            direction: None,
            family: Family::ConfluenceRth,
        }),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let edge_exit = ExitSpec::Horizon { horizon: 13 };
    let mut trades = Vec::new();
    for ev in &edge.planted {
        let day = edge.days.iter().find(|d| d.date == ev.day).unwrap();
        trades.extend(
            simulate(std::slice::from_ref(ev), day, &edge_exit, &friction)
                .map_err(|e| e.to_string())?
                .trades,
        );
    }
    let p_edge = permutation_test(&trades, &edge.days, &edge_exit, &friction, 1000, 17)
        .map_err(|e| e.to_string())?;
    let p_again = permutation_test(&trades, &edge.days, &edge_exit, &friction, 1000, 17)
        .map_err(|e| e.to_string())?;
    check(
        ks < 0.1 && p_edge < 0.001 && p_edge == p_again,
        format!(
            "KS {ks:.4} over 200 null replications; planted-edge p {p_edge:.6} ({} trades); repeat p {p_again:.6}",
            trades.len()
        ),
    )
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = MarketSynthSpec::confluence(500, 21);
    let corpus = tmp.path().join("corpus");
    write_corpus(
        &corpus,
        &gen_market(&spec).map_err(|e| e.to_string())?,
        &spec,
    )
    .map_err(|e| e.to_string())?;
    let data = DataPaths {
        rth: "corpus/rth.csv".into(),
        asia: Some("corpus/asia.csv".into()),
        london: Some("corpus/london.csv".into()),
        events: Some("corpus/events.csv".into()),
    };
    let text = RunConfig::with_defaults(data, 21).to_toml();
    std::fs::write(tmp.path().join("run.toml"), text).map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    for out in ["a", "b"] {
        let config = RunConfig::load(&tmp.path().join("run.toml")).map_err(|e| e.to_string())?;
        let (market, _) =
            falsify_core::pipeline::load_market(&config).map_err(|e| e.to_string())?;
        let families = config.families_for(None).unwrap();
        let r = run_to_dir(&config, &market, &families, &tmp.path().join(out))
            .map_err(|e| e.to_string())?;
        if !r.errors.is_empty() {
            return Err(format!("run errors {:?}", r.errors));
        }
        dirs.push(r.dir);
    }
    let (a, b) = (tree(&dirs[0]), tree(&dirs[1]));
    check(
        a == b && !a.is_empty() && dirs[0].file_name() == dirs[1].file_name(),
        format!("{} files compared, identical: {}", a.len(), a == b),
    )
}

fn vvg_activation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let draws: Vec<Option<VvgMetrics>> = (0..10_000)
        .map(|_| {
            Some(VvgMetrics {
                abs_first30: rng.random(),
                abs_gap: rng.random(),
                volume_dev: rng.random(),
            })
        })
        .collect();
    let rate = |m: &[Option<VvgMetrics>]| {
        let known: Vec<VvgMetrics> = m.iter().flatten().copied().collect();
        let t = vvg_terciles(&known).unwrap();
        vvg_flags(m, &t).iter().filter(|&&f| f).count() as f64 / known.len() as f64
    };
    let independent = rate(&draws);
    let market = gen_market(&MarketSynthSpec::null(10_020, 10))
        .map_err(|e| e.to_string())?
        .market;
    let metrics = vvg_metrics(&market.rth, 20);
    let bars = rate(&metrics);
    let target = 1.0 / 27.0;
    check(
        (independent - target).abs() <= 0.005 && (bars - target).abs() <= 0.005,
        format!(
            "independent draws {:.4}, synthetic days {:.4} ({} days), target {target:.4}",
            independent,
            bars,
            metrics.iter().flatten().count()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gate reproduction", gate_reproduction),
        ("friction arithmetic", friction_arithmetic),
        ("null calibration", null_calibration),
        ("planted-edge power", planted_edge_power),
        ("no lookahead", no_lookahead),
        ("estimator oracles", estimator_oracles),
        ("walk-forward isolation", walk_forward_isolation),
        ("permutation correctness", permutation_correctness),
        ("determinism", determinism),
        ("VVG activation", vvg_activation),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let t0 = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({secs:.1}s) {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s) {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
