//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fail. Criterion 12 needs a live chat-completions
//! endpoint and only runs when `TSQA_LIVE_ENDPOINT` is set.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use tsqa_core::agent::{
    Agent, AgentConfig, BackendConfig, ChatCompletionsClient, MockBackend, MockEntry, MockNoise, MockScript,
};
use tsqa_core::eval::{
    load_benchmark, replay_script, run_benchmark, stub_table, write_reports, BenchmarkItem, EvalMode, RunConfig,
    RunReport, Scoring,
};
use tsqa_core::market::SECONDS_PER_DAY;
use tsqa_core::registry::ArgValue;
use tsqa_core::tools::{
    abnormal_deviations, correlation_between, lowest_traded_volume, peak_traded_volume, pearson,
    round_the_clock_pattern, volatility, Bucketing,
};
use tsqa_core::{
    Candle, CandleSeries, Grounding, InstrumentKey, MarketStore, TimeUnit, ToolError, ToolRegistry, WindowSpec,
};

type Check = Result<(), String>;
type Criterion = fn() -> Check;
type Args = Vec<(&'static str, ArgValue)>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

// 2024-01-01 00:00 UTC, a Monday
const MONDAY: i64 = 1_704_067_200;

fn benchmark_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/benchmark.tsv")
}

fn load_items(registry: &ToolRegistry) -> Vec<BenchmarkItem> {
    load_benchmark(&benchmark_path(), registry).expect("benchmark loads")
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn key(base: &str) -> InstrumentKey {
    InstrumentKey::new(base, "USDT", "BINANCE").unwrap()
}

fn random_series(rng: &mut ChaCha8Rng, base: &str, n: usize, interval: i64) -> CandleSeries {
    let mut price = rng.random_range(1.0..50_000.0);
    let candles = (0..n)
        .map(|i| {
            let open: f64 = price;
            let close = open * (1.0 + rng.random_range(-0.05..0.05));
            let high = open.max(close) * (1.0 + rng.random_range(0.0..0.03));
            let low = open.min(close) * (1.0 - rng.random_range(0.0..0.03));
            price = close;
            Candle::new(
                MONDAY + i as i64 * interval,
                open,
                high,
                low,
                close,
                rng.random_range(1.0..1e4),
            )
            .unwrap()
        })
        .collect();
    CandleSeries::from_candles(key(base), interval, candles).unwrap()
}

fn whole_window(n: usize, interval: i64) -> (WindowSpec, i64) {
    let as_of = MONDAY + (n as i64 - 1) * interval;
    let days = ((n as i64 * interval) / SECONDS_PER_DAY + 2) as u32;
    (WindowSpec::lookback(days, TimeUnit::Day).unwrap(), as_of)
}

// ---------------------------------------------------------------- criterion 1

fn parkinson_oracle(candles: &[Candle]) -> f64 {
    let n = candles.len() as f64;
    let mut terms = Vec::with_capacity(candles.len());
    for c in candles {
        let r = c.high.ln() - c.low.ln();
        terms.push(r * r);
    }
    let sum: f64 = terms.iter().sum();
    100.0 * ((1.0 / (4.0 * n * 2f64.ln())) * sum).sqrt()
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let started = Instant::now();
    for i in 0..100 {
        let n = rng.random_range(2..=500);
        let series = random_series(&mut rng, "BTC", n, 3600);
        let oracle = parkinson_oracle(&series.candles);
        let mut store = MarketStore::new();
        store.insert(series).unwrap();
        let (window, as_of) = whole_window(n, 3600);
        let got = volatility(&store, &key("BTC"), &window, as_of).map_err(|e| e.to_string())?;
        ensure!(
            rel_close(got, oracle, 1e-9),
            "series {i} (n={n}): {got} vs oracle {oracle}"
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    let flat: Vec<Candle> = (0..50)
        .map(|i| Candle::new(MONDAY + i * 3600, 7.0, 7.0, 7.0, 7.0, 1.0).unwrap())
        .collect();
    let mut store = MarketStore::new();
    store
        .insert(CandleSeries::from_candles(key("BTC"), 3600, flat).unwrap())
        .unwrap();
    let (window, as_of) = whole_window(50, 3600);
    let zero = volatility(&store, &key("BTC"), &window, as_of).map_err(|e| e.to_string())?;
    ensure!(zero == 0.0, "all H=L series gave {zero}");
    ensure!(elapsed < 1.0, "took {elapsed:.3}s");
    Ok(())
}

// ---------------------------------------------------------------- criterion 2

fn pearson_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let started = Instant::now();
    for i in 0..100 {
        let n = rng.random_range(3..=300);
        let a = random_series(&mut rng, "BTC", n, 3600);
        let b = random_series(&mut rng, "ETH", n, 3600);
        let xs: Vec<f64> = a.candles.iter().map(|c| c.close).collect();
        let ys: Vec<f64> = b.candles.iter().map(|c| c.close).collect();
        let oracle = pearson_oracle(&xs, &ys);
        let mut store = MarketStore::new();
        store.insert(a).unwrap();
        store.insert(b).unwrap();
        let (window, as_of) = whole_window(n, 3600);
        let got = correlation_between(&store, &key("BTC"), &key("ETH"), &window, as_of).map_err(|e| e.to_string())?;
        ensure!(
            (got - oracle).abs() <= 1e-12,
            "pair {i} (n={n}): {got} vs oracle {oracle}"
        );

        let alpha = rng.random_range(0.1..10.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
        let beta = rng.random_range(-100.0..100.0);
        let affine: Vec<f64> = xs.iter().map(|x| alpha * x + beta).collect();
        let r = pearson(&xs, &affine).map_err(|e| e.to_string())?;
        ensure!(
            (r - alpha.signum()).abs() <= 1e-12,
            "affine pair {i}: r = {r}, alpha = {alpha}"
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    match pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]) {
        Err(ToolError::ZeroVariance { .. }) => {}
        other => return Err(format!("zero variance gave {other:?}")),
    }
    ensure!(elapsed < 1.0, "took {elapsed:.3}s");
    Ok(())
}

// ------------------------------------------------------------ criteria 3 to 5

/// Daily candles starting on a Monday with the given volume per day.
fn daily(volumes: &[f64]) -> Vec<Candle> {
    volumes
        .iter()
        .enumerate()
        .map(|(i, v)| Candle::new(MONDAY + i as i64 * SECONDS_PER_DAY, 1.0, 1.0, 1.0, 1.0, *v).unwrap())
        .collect()
}

fn weekly() -> Bucketing {
    Bucketing::new(TimeUnit::Week, TimeUnit::Day).unwrap()
}

fn criterion_3() -> Check {
    let b = weekly();
    let planted: Vec<f64> = (0..52 * 7).map(|d| if d % 7 == 0 { 300.0 } else { 100.0 }).collect();
    let peaks = peak_traded_volume(&daily(&planted), SECONDS_PER_DAY, &b, 5.0).map_err(|e| e.to_string())?;
    ensure!(peaks == ["Monday"], "planted Monday gave {peaks:?}");

    let uniform = vec![100.0; 52 * 7];
    let peaks = peak_traded_volume(&daily(&uniform), SECONDS_PER_DAY, &b, 5.0).map_err(|e| e.to_string())?;
    ensure!(peaks.is_empty(), "uniform series gave {peaks:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sweep = [0.0, 5.0, 10.0, 25.0, 50.0];
    for trial in 0..20 {
        let weights: Vec<f64> = (0..7).map(|_| rng.random_range(0.3..2.5)).collect();
        let vols: Vec<f64> = (0..52 * 7)
            .map(|d| weights[d % 7] * rng.random_range(50.0..150.0))
            .collect();
        let candles = daily(&vols);
        for pair in sweep.windows(2) {
            for f in [peak_traded_volume, lowest_traded_volume] {
                let lo = f(&candles, SECONDS_PER_DAY, &b, pair[0]).map_err(|e| e.to_string())?;
                let hi = f(&candles, SECONDS_PER_DAY, &b, pair[1]).map_err(|e| e.to_string())?;
                ensure!(
                    hi.iter().all(|l| lo.contains(l)),
                    "trial {trial}: threshold {} gave {hi:?}, not a subset of {lo:?} at {}",
                    pair[1],
                    pair[0]
                );
            }
        }
    }
    Ok(())
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bucketings = [
        (
            Bucketing::new(TimeUnit::Week, TimeUnit::Day).unwrap(),
            SECONDS_PER_DAY,
            7 * 20,
        ),
        (Bucketing::new(TimeUnit::Day, TimeUnit::Hour).unwrap(), 3600, 24 * 30),
        (Bucketing::new(TimeUnit::Week, TimeUnit::Hour).unwrap(), 3600, 168 * 6),
    ];
    for trial in 0..50 {
        let (b, interval, n) = bucketings[trial % bucketings.len()];
        let candles: Vec<Candle> = (0..n)
            .map(|i| {
                let v = rng.random_range(0.0..1000.0);
                Candle::new(MONDAY + i as i64 * interval, 1.0, 1.0, 1.0, 1.0, v).unwrap()
            })
            .collect();
        let t = rng.random_range(0.0..60.0);
        let pair = round_the_clock_pattern(&candles, interval, &b, t).map_err(|e| e.to_string())?;
        let peak = peak_traded_volume(&candles, interval, &b, t).map_err(|e| e.to_string())?;
        let low = lowest_traded_volume(&candles, interval, &b, t).map_err(|e| e.to_string())?;
        ensure!(pair == (peak, low), "trial {trial} differs");
    }
    Ok(())
}

fn criterion_5() -> Check {
    let b = weekly();
    let weeks = 8;
    let mut vols = vec![100.0; weeks * 7];
    vols[(weeks - 1) * 7] = 200.0;
    let d = abnormal_deviations(&daily(&vols), SECONDS_PER_DAY, &b, 50.0).map_err(|e| e.to_string())?;
    ensure!(d.deviation_percents.len() == 1, "expected one entry, got {d:?}");
    ensure!(
        (d.deviation_percents[0] - 100.0).abs() <= 1e-9,
        "deviation {}",
        d.deviation_percents[0]
    );
    let last_monday = MONDAY + ((weeks - 1) * 7) as i64 * SECONDS_PER_DAY;
    ensure!(d.timestamps == [last_monday], "timestamps {:?}", d.timestamps);

    let flat = vec![100.0; weeks * 7];
    let d = abnormal_deviations(&daily(&flat), SECONDS_PER_DAY, &b, 50.0).map_err(|e| e.to_string())?;
    ensure!(
        d.timestamps.is_empty() && d.deviation_percents.is_empty(),
        "flat series gave {d:?}"
    );
    Ok(())
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Check {
    let s = |v: &str| ArgValue::Str(v.into());
    let i = ArgValue::Int;
    let seasonal = |base: &str| -> Vec<(&'static str, ArgValue)> {
        vec![
            ("base_token", s(base)),
            ("quote_token", s("USDT")),
            ("exchange", s("BINANCE")),
            ("time_interval", i(1)),
            ("time_unit", s("year")),
            ("period_unit", s("week")),
            ("granularity_unit", s("day")),
            ("threshold_percent", ArgValue::Float(5.0)),
        ]
    };
    let market = |base: &str| -> Vec<(&'static str, ArgValue)> {
        vec![
            ("base_token", s(base)),
            ("quote_token", s("USDT")),
            ("exchange", s("BINANCE")),
            ("time_interval", i(1)),
            ("time_unit", s("day")),
        ]
    };
    let table: Vec<(&str, Value, Args)> = vec![
        ("peak_traded_volume", json!({"base_token": "BTC"}), seasonal("BTC")),
        ("lowest_traded_volume", json!({"base_token": "BTC"}), seasonal("BTC")),
        ("round_the_clock_pattern", json!({"base_token": "BTC"}), seasonal("BTC")),
        ("abnormal_deviations", json!({"base_token": "BTC"}), seasonal("BTC")),
        ("price", json!({"base_token": "BTC"}), market("BTC")),
        ("volatility", json!({"base_token": "BTC"}), market("BTC")),
        ("predict_price", json!({"base_token": "BTC"}), market("BTC")),
        ("predict_volatility", json!({"base_token": "BTC"}), market("BTC")),
        (
            "correlation_between_tokens",
            json!({"base_token_a": "BTC", "base_token_b": "ETH"}),
            vec![
                ("base_token_a", s("BTC")),
                ("base_token_b", s("ETH")),
                ("quote_token", s("USDT")),
                ("exchange", s("BINANCE")),
                ("time_interval", i(7)),
                ("time_unit", s("day")),
            ],
        ),
        (
            "correlation_between_exchanges",
            json!({"base_token": "BTC", "exchange_a": "BINANCE", "exchange_b": "KRAKEN"}),
            vec![
                ("base_token", s("BTC")),
                ("exchange_a", s("BINANCE")),
                ("exchange_b", s("KRAKEN")),
                ("quote_token", s("USDT")),
                ("time_interval", i(7)),
                ("time_unit", s("day")),
            ],
        ),
        ("get_base_tokens", json!({}), vec![]),
        ("get_exchanges", json!({}), vec![]),
        ("get_quote_tokens", json!({}), vec![]),
        ("get_valid_time_units", json!({}), vec![]),
    ];
    let registry = ToolRegistry::standard();
    ensure!(table.len() == registry.len(), "registry has {} tools", registry.len());
    for (tool, required, expected) in table {
        let raw: Map<String, Value> = required.as_object().unwrap().clone();
        let filled = registry.fill_defaults(tool, &raw).map_err(|e| e.to_string())?;
        let expected: BTreeMap<String, ArgValue> = expected.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        ensure!(filled.args == expected, "{tool}: {:?} != {:?}", filled.args, expected);
        let again = registry
            .fill_defaults(tool, &tsqa_core::registry::args_to_json(&filled.args))
            .map_err(|e| e.to_string())?;
        ensure!(again.args == filled.args, "{tool}: fill is not idempotent");
    }
    Ok(())
}

// ------------------------------------------------------------ criteria 7 to 10

fn run(items: &[BenchmarkItem], script: MockScript, seeds: &[u64], workers: usize) -> Result<RunReport, String> {
    let registry = ToolRegistry::standard();
    let table = stub_table(items).map_err(|e| e.to_string())?;
    let backend = MockBackend::new(script);
    let config = RunConfig {
        agent: AgentConfig {
            temperature: if seeds.len() > 1 { 1.0 } else { 0.0 },
            ..AgentConfig::default()
        },
        seeds: seeds.to_vec(),
        timing: false,
        workers,
    };
    run_benchmark(
        items,
        &registry,
        &backend,
        EvalMode::Stub(&table),
        &Scoring::Fallback,
        &config,
    )
    .map_err(|e| e.to_string())
}

fn criterion_7() -> Check {
    let started = Instant::now();
    let registry = ToolRegistry::standard();
    let items = load_items(&registry);
    ensure!(items.len() == 100, "benchmark has {} items", items.len());

    let perfect = run(&items, replay_script(&items), &[1], 4)?;
    let a = perfect.averages;
    ensure!(
        (a.rr, a.ma, a.la, a.hr) == (1.0, 1.0, 1.0, 0.0),
        "perfect mock gave RR {} MA {} LA {} HR {}",
        a.rr,
        a.ma,
        a.la,
        a.hr
    );

    let mut corrupted = replay_script(&items);
    for entry in corrupted.entries.iter_mut().take(10) {
        let args = &mut entry.calls[0].arguments;
        let bumped = args.get("time_interval").and_then(Value::as_i64).map_or(99, |n| n + 1);
        args.insert("time_interval".into(), Value::from(bumped));
    }
    let ma = run(&items, corrupted, &[1], 4)?.averages.ma;
    ensure!(ma == 0.90, "10 corrupted items gave MA {ma}");

    let mut silent = replay_script(&items);
    for entry in silent.entries.iter_mut().skip(40).take(2) {
        entry.empty_attempts = 6;
    }
    let rr = run(&items, silent, &[1], 4)?.averages.rr;
    ensure!(rr == 0.98, "2 silent items gave RR {rr}");

    let elapsed = started.elapsed().as_secs_f64();
    ensure!(elapsed < 30.0, "took {elapsed:.1}s");
    Ok(())
}

fn criterion_8() -> Check {
    let registry = ToolRegistry::standard();
    let items = load_items(&registry);
    let table = stub_table(&items).map_err(|e| e.to_string())?;
    let backend = MockBackend::new(replay_script(&items));
    let agent = Agent::new(&registry, &backend, AgentConfig::default()).map_err(|e| e.to_string())?;

    let vol = items
        .iter()
        .find(|i| i.nlq == "What is the volatility of BTC?")
        .ok_or("no BTC volatility item")?;
    let outcome = agent.answer(
        &vol.nlq,
        &Grounding::Stub {
            table: &table,
            item_id: &vol.item_id,
        },
        Some(&vol.item_id),
    );
    let payload = outcome
        .results
        .first()
        .and_then(|r| r.result())
        .map(|r| r.payload.clone());
    ensure!(
        payload == Some(json!({"volatility_percent": 5.0})),
        "volatility payload {payload:?}"
    );

    let corr = items
        .iter()
        .find(|i| i.nlq == "What is the correlation between BTC and ETH?")
        .ok_or("no BTC/ETH correlation item")?;
    let outcome = agent.answer(
        &corr.nlq,
        &Grounding::Stub {
            table: &table,
            item_id: &corr.item_id,
        },
        Some(&corr.item_id),
    );
    ensure!(outcome.nlr.contains("1.0"), "correlation NLR: {}", outcome.nlr);
    Ok(())
}

fn noisy_script(items: &[BenchmarkItem]) -> MockScript {
    let mut script = replay_script(items);
    script.noise = Some(MockNoise {
        corrupt_probability: 0.3,
        empty_probability: 0.6,
    });
    script
}

fn criterion_9() -> Check {
    let registry = ToolRegistry::standard();
    let items = load_items(&registry);
    let report = run(&items, noisy_script(&items), &[1, 10, 100], 4)?;
    ensure!(report.runs.len() == 3, "{} sub-reports", report.runs.len());
    let mpe = report.mpe.ok_or("no MPE on a 3-seed report")?;

    type Metric = fn(&tsqa_core::eval::EvalRecord) -> f64;
    let metrics: [(&str, Metric, f64); 5] = [
        ("RR", |r| r.rr, mpe.rr),
        ("MA", |r| r.ma, mpe.ma),
        ("LA", |r| r.la, mpe.la),
        ("HR", |r| r.hr, mpe.hr),
        ("SPQ", |r| r.spq_seconds, mpe.spq),
    ];
    for (name, metric, reported) in metrics {
        let per_seed: Vec<f64> = report
            .runs
            .iter()
            .map(|run| run.records.iter().map(metric).sum::<f64>() / run.records.len() as f64)
            .collect();
        let mean = per_seed.iter().sum::<f64>() / 3.0;
        let hand = if mean == 0.0 {
            0.0
        } else {
            per_seed.iter().map(|x| (x - mean).abs() / mean).sum::<f64>() / 3.0 * 100.0
        };
        ensure!(
            (hand - reported).abs() <= 1e-12,
            "{name}: hand {hand} vs reported {reported}"
        );
    }
    ensure!(mpe.ma > 0.0, "noise did not vary MA across seeds");
    Ok(())
}

fn criterion_10() -> Check {
    let registry = ToolRegistry::standard();
    let items = load_items(&registry);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let report = run(&items, noisy_script(&items), &[1, 10, 100], 8)?;
        let files = write_reports(&report, &dir.path().join(name)).map_err(|e| e.to_string())?;
        let bytes: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|f| {
                (
                    f.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(f).unwrap(),
                )
            })
            .collect();
        outputs.push(bytes);
    }
    ensure!(outputs[0].len() == 4, "wrote {} files", outputs[0].len());
    for ((name, a), (_, b)) in outputs[0].iter().zip(&outputs[1]) {
        ensure!(a == b, "{name} differs between runs");
    }
    Ok(())
}

// --------------------------------------------------------------- criterion 11

fn criterion_11() -> Check {
    let registry = ToolRegistry::standard();
    let items = load_items(&registry);
    let item = &items[0];
    let mut script = replay_script(std::slice::from_ref(item));
    script.entries[0].empty_attempts = 3;
    let backend = MockBackend::new(script);
    let table = stub_table(std::slice::from_ref(item)).map_err(|e| e.to_string())?;
    let agent = Agent::new(&registry, &backend, AgentConfig::default()).map_err(|e| e.to_string())?;
    let outcome = agent.answer(
        &item.nlq,
        &Grounding::Stub {
            table: &table,
            item_id: &item.item_id,
        },
        Some(&item.item_id),
    );
    ensure!(outcome.attempts == 4, "attempts = {}", outcome.attempts);
    ensure!(tsqa_core::eval::metric_rr(&outcome) == 1.0, "RR contribution 0");

    let entry = MockEntry {
        empty_attempts: 6,
        ..backend_entry(item)
    };
    let backend = MockBackend::new(MockScript {
        entries: vec![entry],
        noise: None,
    });
    let agent = Agent::new(&registry, &backend, AgentConfig::default()).map_err(|e| e.to_string())?;
    let outcome = agent.answer(
        &item.nlq,
        &Grounding::Stub {
            table: &table,
            item_id: &item.item_id,
        },
        Some(&item.item_id),
    );
    ensure!(
        outcome.attempts == 6 && outcome.nlr.is_empty(),
        "beyond 5 retries: {outcome:?}"
    );
    Ok(())
}

fn backend_entry(item: &BenchmarkItem) -> MockEntry {
    replay_script(std::slice::from_ref(item)).entries.remove(0)
}

// --------------------------------------------------------------- criterion 12

fn criterion_12(endpoint: String) -> Check {
    let registry = ToolRegistry::standard();
    let items = load_items(&registry);
    let mut seen = std::collections::BTreeSet::new();
    let subset: Vec<BenchmarkItem> = items
        .into_iter()
        .filter(|i| i.expected_calls.len() == 1 && seen.insert(i.expected_calls[0].tool_name.clone()))
        .take(10)
        .collect();
    let backend_config = BackendConfig {
        endpoint,
        model: std::env::var("TSQA_LIVE_MODEL").unwrap_or_else(|_| BackendConfig::default().model),
        ..BackendConfig::default()
    };
    let client = ChatCompletionsClient::new(&backend_config);
    let table = stub_table(&subset).map_err(|e| e.to_string())?;
    let config = RunConfig {
        agent: AgentConfig {
            backend: backend_config,
            ..AgentConfig::default()
        },
        seeds: vec![1],
        timing: true,
        workers: 1,
    };
    let report = run_benchmark(
        &subset,
        &registry,
        &client,
        EvalMode::Stub(&table),
        &Scoring::Fallback,
        &config,
    )
    .map_err(|e| e.to_string())?;
    let a = report.averages;
    ensure!(a.rr == 1.0 && a.ma >= 0.8, "live run gave RR {} MA {}", a.rr, a.ma);
    Ok(())
}

// ------------------------------------------------------------------------ main

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 11] = [
        ("Parkinson volatility matches term-by-term oracle", criterion_1),
        ("Pearson correlation matches two-pass oracle", criterion_2),
        (
            "planted weekday signal, uniform series and threshold monotonicity",
            criterion_3,
        ),
        ("round_the_clock_pattern equals (peak, lowest)", criterion_4),
        ("abnormal deviation of a doubled Monday", criterion_5),
        ("default filling and idempotence for every tool", criterion_6),
        ("metric definitions on scripted mocks", criterion_7),
        ("stub fidelity of volatility and correlation items", criterion_8),
        ("multi-seed MPE equals hand recomputation", criterion_9),
        ("reports are byte-identical across runs", criterion_10),
        ("retry contract on empty output", criterion_11),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}", k + 1);
        if filter
            .as_ref()
            .is_some_and(|f| !name.contains(f.as_str()) && !label.contains(f.as_str()))
        {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(()) => println!("{label}: PASS  {name} ({secs:.3}s)"),
            Err(why) => {
                failed += 1;
                println!("{label}: FAIL  {name}: {why}");
            }
        }
    }
    match std::env::var("TSQA_LIVE_ENDPOINT") {
        Ok(endpoint) if !endpoint.is_empty() => match criterion_12(endpoint) {
            Ok(()) => println!("criterion 12: PASS  live endpoint smoke test"),
            // live results depend on the model; reported but never fatal
            Err(why) => println!("criterion 12: FAIL  live endpoint smoke test (non-blocking): {why}"),
        },
        _ => println!("criterion 12: SKIP  live endpoint smoke test (set TSQA_LIVE_ENDPOINT to run)"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
