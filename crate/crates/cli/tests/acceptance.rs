//! Acceptance suite. Run with
//! `cargo test -p watchrisk-cli --test acceptance -- --nocapture`
//! to see one line per criterion.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use watchrisk_core::cost::{category_costs, risk_coefficient};
use watchrisk_core::entropy::{build_histogram, kl_divergence, Divergences};
use watchrisk_core::menagerie::categorize;
use watchrisk_core::rates::sweep;
use watchrisk_core::synth::{generate, Fractions, Profiles};
use watchrisk_core::{
    Binning, Category, CostParams, LossVector, MatchRecord, MenagerieAssignment, MenagerieConfig,
    Population, RateGroup, ScoreClass, SynthSpec, ThresholdGrid, TravelerRisk,
};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// (traveler, class, d_goat, d_wl, d_sheep, r)
type Row = (&'static str, ScoreClass, f64, f64, f64, f64);
const REFERENCE_ROWS: [Row; 18] = [
    ("4315", ScoreClass::Genuine, 19.3834, 1.5000, 1.2857, 12.2086),
    ("4493", ScoreClass::Genuine, 21.4335, 1.4057, 1.2061, 13.4024),
    ("4472", ScoreClass::Genuine, 8.1941, 1.2029, 1.0842, 5.3858),
    ("4315", ScoreClass::Impostor, 4.9675, 1.9530, 4.7111, 4.0375),
    ("4493", ScoreClass::Impostor, 4.7866, 1.8759, 4.5387, 3.8886),
    ("4472", ScoreClass::Impostor, 7.2058, 2.8461, 6.8617, 5.8635),
    ("4202", ScoreClass::Genuine, 75.8104, 1.3291, 0.3451, 45.9195),
    ("4408", ScoreClass::Genuine, 44.6677, 1.1112, 0.3347, 27.1675),
    ("4435", ScoreClass::Genuine, 84.4652, 1.2451, 0.0621, 51.0589),
    ("4202", ScoreClass::Impostor, 4.7009, 1.8339, 4.4565, 3.8164),
    ("4408", ScoreClass::Impostor, 4.9644, 1.9450, 4.7082, 4.0330),
    ("4435", ScoreClass::Impostor, 4.6357, 1.8120, 4.3935, 3.7644),
    ("2463", ScoreClass::Genuine, 38.2000, 1.3801, 0.8165, 23.4157),
    ("4201", ScoreClass::Genuine, 55.8247, 1.1022, 0.2087, 33.8464),
    ("4203", ScoreClass::Genuine, 42.4947, 0.8047, 0.3470, 25.7729),
    ("2463", ScoreClass::Impostor, 8.4654, 3.3284, 8.0840, 6.8862),
    ("4201", ScoreClass::Impostor, 7.0656, 2.7951, 6.7258, 5.7505),
    ("4203", ScoreClass::Impostor, 7.3538, 2.9030, 7.0048, 5.9837),
];

fn bayes_risk_rows() -> Outcome {
    let loss = LossVector::new(0.1, 0.6, 0.3).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (id, class, g, wl, s, want) in REFERENCE_ROWS {
        let d = Divergences {
            goat: g,
            wolf_lamb: wl,
            sheep: s,
        };
        let r = TravelerRisk::from_divergences(id, class, d, &loss).map_err(|e| e.to_string())?;
        let err = (r.r - want).abs();
        worst = worst.max(err);
        check(err <= 5e-4, || format!("{id} {class:?}: {} vs {want}", r.r))?;
    }
    Ok(format!("{} rows, max |err| {worst:.1e}", REFERENCE_ROWS.len()))
}

fn risk_coefficient_is_90() -> Outcome {
    let p = CostParams::new(10.0, 1.0, 0.1).map_err(|e| e.to_string())?;
    let k = risk_coefficient(&p).map_err(|e| e.to_string())?;
    let rel = (k - 90.0).abs() / 90.0;
    check(rel <= 1e-12, || format!("coefficient {k}"))?;
    // same ratio, other scale
    let q = CostParams::new(250.0, 25.0, 0.1).map_err(|e| e.to_string())?;
    let k2 = risk_coefficient(&q).map_err(|e| e.to_string())?;
    check((k2 - 90.0).abs() / 90.0 <= 1e-12, || format!("scaled coefficient {k2}"))?;
    Ok(format!("coefficient {k}, relative error {rel:.1e}"))
}

fn menagerie_quota() -> Outcome {
    let start = Instant::now();
    for seed in 0..20u64 {
        let spec = SynthSpec {
            seed,
            profiles: Profiles::separated(6.0, 4.0),
            fractions: Fractions {
                goat: 0.02,
                wolf_lamb: 0.02,
                worm: 0.005,
            },
            ..SynthSpec::default()
        };
        let out = generate(&spec).map_err(|e| e.to_string())?;
        check(out.population.len() == 568, || "population size".into())?;
        let a = categorize(&out.population, &MenagerieConfig::default())
            .map_err(|e| e.to_string())?;
        check(a.goat_side().len() == 15 && a.wolf_side().len() == 15, || {
            format!(
                "seed {seed}: {} goat-side, {} wolf-side",
                a.goat_side().len(),
                a.wolf_side().len()
            )
        })?;
        let t = &out.ground_truth;
        check(
            a.goat_side() == t.goat_side()
                && a.wolf_side() == t.wolf_side()
                && a.members(Category::Worm) == t.members(Category::Worm),
            || format!("seed {seed}: planted sets not recovered"),
        )?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("15/15 tails, exact recovery over 20 seeds in {secs:.2}s"))
}

fn random_histogram(rng: &mut ChaCha8Rng, b: &Binning) -> watchrisk_core::ScoreHistogram {
    let n = rng.random_range(5..400);
    let center: f64 = rng.random_range(0.0..100.0);
    let width: f64 = rng.random_range(2.0..60.0);
    let scores: Vec<f64> = (0..n)
        .map(|_| (center + rng.random_range(-width..width)).clamp(0.0, 100.0))
        .collect();
    build_histogram(&scores, b).unwrap()
}

fn kl_properties() -> Outcome {
    let b = Binning::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pairs = 2000;
    let (mut distinct, mut asymmetric) = (0usize, 0usize);
    for i in 0..pairs {
        let p = random_histogram(&mut rng, &b);
        let q = random_histogram(&mut rng, &b);
        check(p.p.len() == 20, || "bin count".into())?;
        let pq = kl_divergence(&p, &q).map_err(|e| e.to_string())?;
        let qp = kl_divergence(&q, &p).map_err(|e| e.to_string())?;
        check(pq >= 0.0 && qp >= 0.0, || format!("pair {i}: negative kl"))?;
        let pp = kl_divergence(&p, &p).map_err(|e| e.to_string())?;
        check(pp <= 1e-12, || format!("pair {i}: kl(P,P) = {pp}"))?;
        if p.p != q.p {
            distinct += 1;
            if (pq - qp).abs() > 1e-12 {
                asymmetric += 1;
            }
        }
    }
    let share = asymmetric as f64 / distinct as f64;
    check(share >= 0.99, || format!("asymmetric in {asymmetric}/{distinct}"))?;
    Ok(format!("{pairs} pairs, asymmetric in {asymmetric}/{distinct}"))
}

fn random_population(rng: &mut ChaCha8Rng) -> Population {
    let n_subjects = rng.random_range(10..=100);
    let mut records = Vec::new();
    for i in 0..n_subjects {
        let id = format!("s{i:03}");
        let g_center = rng.random_range(20.0..95.0);
        let i_center = rng.random_range(5.0..60.0);
        for _ in 0..rng.random_range(1..10) {
            let s: f64 = (g_center + rng.random_range(-25.0..25.0f64)).clamp(0.0, 100.0);
            records.push(MatchRecord::new(id.clone(), id.clone(), s.round()).unwrap());
        }
        for _ in 0..rng.random_range(1..20) {
            let s: f64 = (i_center + rng.random_range(-25.0..25.0f64)).clamp(0.0, 100.0);
            let other = format!("s{:03}", rng.random_range(0..n_subjects + 5));
            if other == id {
                continue;
            }
            records.push(MatchRecord::new(id.clone(), other, s.round()).unwrap());
        }
    }
    Population::from_records(records, 100.0).unwrap()
}

fn oracle_counts(
    pop: &Population,
    assign: &MenagerieAssignment,
    group: RateGroup,
    t: f64,
) -> (u64, u64, u64, u64) {
    let (mut fn_, mut ng, mut fp, mut ni) = (0, 0, 0, 0);
    for (id, c) in assign.iter() {
        if group != RateGroup::All && group != RateGroup::Category(c) {
            continue;
        }
        let s = pop.get(id).unwrap();
        for &g in &s.genuine {
            ng += 1;
            fn_ += u64::from(g < t);
        }
        for &i in &s.impostor {
            ni += 1;
            fp += u64::from(i >= t);
        }
    }
    (fn_, ng, fp, ni)
}

fn rate_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let runs = 60;
    let mut cells = 0usize;
    for run in 0..runs {
        let pop = random_population(&mut rng);
        let cfg = MenagerieConfig {
            tail_fraction: 0.1,
            ..MenagerieConfig::default()
        };
        let assign = categorize(&pop, &cfg).map_err(|e| e.to_string())?;
        let n_t = rng.random_range(1..=101);
        let mut ts: Vec<f64> = (0..n_t).map(|_| rng.random_range(0..=100) as f64).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let grid = ThresholdGrid::new(ts, 100.0).map_err(|e| e.to_string())?;
        let rates = sweep(&pop, &assign, &grid).map_err(|e| e.to_string())?;
        for g in RateGroup::ALL {
            let counts = rates.counts(g);
            for (idx, &t) in grid.thresholds().iter().enumerate() {
                let c = counts[idx];
                let want = oracle_counts(&pop, &assign, g, t);
                check(
                    (c.false_negatives, c.n_genuine, c.false_positives, c.n_impostor) == want,
                    || format!("run {run}, {g} @ {t}"),
                )?;
                cells += 1;
            }
            for w in counts.windows(2) {
                check(w[0].fnr() <= w[1].fnr() && w[0].fpr() >= w[1].fpr(), || {
                    format!("run {run}: rates not monotone for {g}")
                })?;
            }
        }
    }
    Ok(format!("{runs} populations, {cells} cells equal to the oracle"))
}

fn landscape_consistency() -> Outcome {
    let mut rows = 0usize;
    for seed in 0..10u64 {
        let spec = SynthSpec {
            seed,
            n_subjects: 400,
            profiles: Profiles::separated(2.0, 12.0),
            fractions: Fractions {
                goat: 0.03,
                wolf_lamb: 0.03,
                worm: 0.01,
            },
            ..SynthSpec::default()
        };
        let out = generate(&spec).map_err(|e| e.to_string())?;
        let assign = categorize(&out.population, &MenagerieConfig::default())
            .map_err(|e| e.to_string())?;
        let grid = ThresholdGrid::uniform(41, 100.0).map_err(|e| e.to_string())?;
        let rates = sweep(&out.population, &assign, &grid).map_err(|e| e.to_string())?;
        let params = CostParams::default().with_empirical_priors(&assign);
        let land = category_costs(&rates, &params).map_err(|e| e.to_string())?;
        for c in Category::ALL {
            let entries: Vec<_> = land.entries_for(c).collect();
            rows += entries.len();
            for w in entries.windows(2) {
                check(w[0].cost_g <= w[1].cost_g, || {
                    format!("seed {seed}: cost_g decreases for {c}")
                })?;
                check(w[0].cost_i >= w[1].cost_i, || {
                    format!("seed {seed}: cost_i increases for {c}")
                })?;
            }
            for e in &entries {
                let g_nonzero = e.cost_g.is_some_and(|v| v != 0.0);
                let i_nonzero = e.cost_i.is_some_and(|v| v != 0.0);
                check(!g_nonzero || c.is_goat_side(), || {
                    format!("seed {seed}: nonzero cost_g on {c}")
                })?;
                check(!i_nonzero || c.is_wolf_side(), || {
                    format!("seed {seed}: nonzero cost_i on {c}")
                })?;
            }
        }
        // the attributed columns do carry cost somewhere
        check(
            land.entries.iter().any(|e| e.cost_g.is_some_and(|v| v > 0.0))
                && land.entries.iter().any(|e| e.cost_i.is_some_and(|v| v > 0.0)),
            || format!("seed {seed}: landscape is all zero"),
        )?;
    }
    Ok(format!("{rows} landscape rows monotone with goat/wolf column structure"))
}

fn not_reproducible() -> Outcome {
    Ok("NOT REPRODUCIBLE at desk scale: absolute costs and divergences measured on the \
        original face databases need that data and matcher; covered instead by criteria \
        1, 4, 5 and 6"
        .into())
}

fn run(dir: &Path, args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_watchrisk"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok(out.status.code().unwrap_or(-1))
}

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let steps: [&[&str]; 3] = [
        &["synth", "--seed", "42", "--out", "data"],
        &[
            "landscape", "--scores", "data/scores.csv", "--out", "out/landscape.json",
            "--timestamp", "0",
        ],
        &[
            "assess", "--scores", "data/scores.csv", "--out", "out/assess.json", "--timestamp",
            "0",
        ],
    ];
    for args in steps {
        let code = run(dir, args)?;
        check(code == 0, || format!("{} exited {code}", args[0]))?;
    }
    let mut files = Vec::new();
    for sub in ["data", "out"] {
        let mut entries: Vec<_> = fs::read_dir(dir.join(sub))
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            let name = p.strip_prefix(dir).unwrap().display().to_string();
            files.push((name, fs::read(&p).map_err(|e| e.to_string())?));
        }
    }
    Ok(files)
}

fn end_to_end_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = pipeline(a.path())?;
    let fb = pipeline(b.path())?;
    check(fa.len() == fb.len(), || "different file sets".into())?;
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        check(na == nb && ba == bb, || format!("{na} differs"))?;
    }
    Ok(format!("{} files byte-identical across two runs", fa.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 8] = [
        ("bayes risk on reference rows", bayes_risk_rows),
        ("risk coefficient equals 90", risk_coefficient_is_90),
        ("menagerie quota and planted recovery", menagerie_quota),
        ("kl property suite", kl_properties),
        ("rate sweep equals counting oracle", rate_oracle),
        ("cost landscape consistency", landscape_consistency),
        ("absolute published values", not_reproducible),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({ms} ms): {detail}", i + 1),
            Err(detail) => {
                println!("criterion {}: FAIL {name} ({ms} ms): {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
