use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ckmc::coupling::{run_coupled_path, CoupledSetup, Scheme};
use ckmc::engine::{simulate_path, TimeGrid};
use ckmc::ensemble::{map_shards, Execution};
use ckmc::estimators::{estimate_fd, variance_ratio, EstimatorResult};
use ckmc::lattice::Configuration;
use ckmc::observables::Observable;
use ckmc::oracle::{
    build_generator, exact_fd, exact_marginal, expected_observable, total_variation, OracleOptions,
    StateSpace,
};
use ckmc::rng::RngStream;
use serde_json::{json, Value};

use crate::config::Experiment;
use crate::CliError;

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))
}

/// File-name form of a scheme, e.g. `coarse_4`.
fn slug(scheme: Scheme) -> String {
    match scheme {
        Scheme::Coarse(q) => format!("coarse_{q}"),
        s => s.to_string(),
    }
}

fn setup(exp: &Experiment, scheme: Scheme) -> Result<CoupledSetup, CliError> {
    Ok(CoupledSetup::new(
        &exp.spec,
        &exp.direction,
        exp.observable,
        exp.partition.clone(),
        scheme,
    )?)
}

struct SchemeRun {
    scheme: Scheme,
    result: EstimatorResult,
    seconds: f64,
}

fn estimate(exp: &Experiment, scheme: Scheme, exec: Execution) -> Result<SchemeRun, CliError> {
    let s = setup(exp, scheme)?;
    let start = Instant::now();
    let result = estimate_fd(
        &s,
        &exp.sigma0,
        &exp.grid,
        exp.direction.step,
        exp.samples,
        exp.seed,
        exec,
    )?;
    Ok(SchemeRun {
        scheme,
        result,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean variance over the second half of the grid, the window used by the
/// variance-ratio summary.
fn summary_variance(r: &EstimatorResult) -> f64 {
    let half = &r.times[r.len() / 2..];
    r.mean_variance(half[0], half[half.len() - 1])
}

fn scheme_entry(run: &SchemeRun, csv: &Path) -> Value {
    let e = run.result.events;
    json!({
        "scheme": run.scheme.to_string(),
        "csv": csv,
        "wall_clock_seconds": run.seconds,
        "n_samples": run.result.n_samples(),
        "summary_variance": summary_variance(&run.result),
        "events": { "steps": e.steps, "jumps_a": e.jumps_a, "jumps_b": e.jumps_b, "joint": e.joint },
    })
}

fn write_manifest(
    exp: &Experiment,
    command: &str,
    config_text: &str,
    started: Instant,
    body: Value,
) -> Result<PathBuf, CliError> {
    let workers = match exp.exec {
        Execution::Sequential => json!(1),
        Execution::Parallel => json!("all"),
        Execution::Workers(w) => json!(w),
    };
    let manifest = json!({
        "command": command,
        "config": exp.config,
        "config_text": config_text,
        "seed": exp.seed,
        "workers": workers,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
        "results": body,
    });
    let path = exp.out_dir.join(format!("{command}_manifest.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&path, &text)?;
    Ok(path)
}

/// Per-scheme estimator CSVs plus a manifest.
pub fn run(exp: &Experiment, config_text: &str) -> Result<(), CliError> {
    if exp.schemes.is_empty() {
        return Err(CliError::Config(
            "[coupling] schemes: list at least one scheme".into(),
        ));
    }
    prepare_dir(&exp.out_dir)?;
    let started = Instant::now();
    let mut entries = Vec::new();
    for &scheme in &exp.schemes {
        let r = estimate(exp, scheme, exp.exec)?;
        let csv = exp.out_dir.join(format!("{}.csv", slug(scheme)));
        write(&csv, &r.result.to_csv())?;
        println!(
            "{scheme}: {} samples, summary variance {:.6e}, {:.2}s",
            r.result.n_samples(),
            summary_variance(&r.result),
            r.seconds
        );
        entries.push(scheme_entry(&r, &csv));
    }
    let path = write_manifest(exp, "run", config_text, started, Value::Array(entries))?;
    println!("manifest: {}", path.display());
    Ok(())
}

/// Variance against cell size `q`; `q = 0` is the uncoupled baseline.
pub fn sweep_q(exp: &Experiment, config_text: &str) -> Result<(), CliError> {
    if exp.qs.is_empty() {
        return Err(CliError::Config(
            "[coupling] q: list at least one cell size".into(),
        ));
    }
    prepare_dir(&exp.out_dir)?;
    let started = Instant::now();
    let n = exp.spec.lattice.n_sites();
    let baseline = estimate(exp, Scheme::Uncoupled, exp.exec)?;
    let mut table =
        String::from("q,scheme,summary_variance,variance_ratio_vs_uncoupled,wall_clock_seconds\n");
    let mut entries = Vec::new();
    for &q in &exp.qs {
        let scheme = Scheme::from_q(q, n)?;
        let r = if scheme == Scheme::Uncoupled {
            SchemeRun {
                scheme,
                result: baseline.result.clone(),
                seconds: baseline.seconds,
            }
        } else {
            estimate(exp, scheme, exp.exec)?
        };
        let ratio = variance_ratio(&baseline.result, &r.result)?.summary;
        let csv = exp.out_dir.join(format!("sweep_q_{q}.csv"));
        write(&csv, &r.result.to_csv())?;
        writeln!(
            table,
            "{q},{scheme},{},{ratio},{}",
            summary_variance(&r.result),
            r.seconds
        )
        .unwrap();
        println!("q={q:<4} {scheme:<12} variance ratio vs uncoupled {ratio:.2}");
        let mut entry = scheme_entry(&r, &csv);
        entry["q"] = json!(q);
        entry["variance_ratio_vs_uncoupled"] = json!(ratio);
        entries.push(entry);
    }
    let path = exp.out_dir.join("sweep_q.csv");
    write(&path, &table)?;
    write_manifest(exp, "sweep-q", config_text, started, Value::Array(entries))?;
    println!("table: {}", path.display());
    Ok(())
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Wall-clock per scheme and per `q`, median over repeats, relative to the
/// uncoupled pair.
pub fn bench(exp: &Experiment, config_text: &str) -> Result<(), CliError> {
    prepare_dir(&exp.out_dir)?;
    let started = Instant::now();
    let n = exp.spec.lattice.n_sites();
    let mut schemes = vec![Scheme::Uncoupled];
    for s in exp.schemes.iter().copied().chain(
        exp.qs
            .iter()
            .map(|&q| Scheme::from_q(q, n))
            .collect::<Result<Vec<_>, _>>()?,
    ) {
        if !schemes.contains(&s) {
            schemes.push(s);
        }
    }
    let mut rows = Vec::new();
    for &scheme in &schemes {
        let mut times = Vec::with_capacity(exp.repeats);
        let mut events = None;
        for _ in 0..exp.repeats {
            let r = estimate(exp, scheme, exp.exec)?;
            times.push(r.seconds);
            events = Some(r.result.events);
        }
        rows.push((
            scheme,
            median(&mut times),
            events.expect("at least one repeat"),
        ));
    }
    let base = rows[0].1;
    let mut table =
        String::from("scheme,cell_size,median_seconds,ratio_vs_uncoupled,repeats,steps\n");
    let mut entries = Vec::new();
    for (scheme, secs, events) in &rows {
        let q = scheme.cell_size(n).map_or(String::new(), |q| q.to_string());
        let ratio = secs / base;
        writeln!(
            table,
            "{scheme},{q},{secs},{ratio},{},{}",
            exp.repeats, events.steps
        )
        .unwrap();
        println!("{scheme:<12} median {secs:.3}s ratio {ratio:.2}");
        entries.push(json!({
            "scheme": scheme.to_string(),
            "median_seconds": secs,
            "ratio_vs_uncoupled": ratio,
            "events": { "steps": events.steps, "jumps_a": events.jumps_a, "jumps_b": events.jumps_b, "joint": events.joint },
        }));
    }
    let path = exp.out_dir.join("bench.csv");
    write(&path, &table)?;
    write_manifest(exp, "bench", config_text, started, Value::Array(entries))?;
    println!("table: {}", path.display());
    Ok(())
}

/// `|mc - exact|` bound in standard errors for oracle-check rows.
const Z_TOL: f64 = 4.0;

/// Expected total-variation distance of an `n`-sample empirical law from
/// `p` is about `½ Σ sqrt(2 p (1-p) / (π n))`; rows pass below three times
/// that.
fn tv_bound(p: &[f64], n: u64) -> f64 {
    let s: f64 = p
        .iter()
        .map(|&x| (2.0 * x * (1.0 - x).max(0.0) / (std::f64::consts::PI * n as f64)).sqrt())
        .sum();
    1.5 * s
}

fn flag(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

/// Exact-vs-Monte-Carlo comparison on a lattice small enough for the oracle.
pub fn oracle_check(exp: &Experiment, config_text: &str) -> Result<bool, CliError> {
    let opts = OracleOptions::default();
    let model = exp.spec.build()?;
    // refuse before any sampling
    StateSpace::new(
        exp.spec.species().values(),
        model.n_sites(),
        opts.state_budget,
    )?;
    prepare_dir(&exp.out_dir)?;
    let started = Instant::now();
    let times = exp.grid.times();
    let mut all_pass = true;

    // u(t)
    let f = Observable::new(exp.observable, &exp.spec)?;
    let exact_u = expected_observable(&exp.spec, exp.observable, &exp.sigma0, times, &opts)?;
    let sums = map_shards(0..exp.samples, exp.exec, |paths| {
        let mut acc = vec![(0.0, 0.0); times.len()];
        for p in paths {
            let mut rng = RngStream::new(exp.seed, p, 0);
            let tr = simulate_path(&model, exp.sigma0.clone(), &exp.grid, &f, &mut rng)?;
            for (a, v) in acc.iter_mut().zip(&tr.values) {
                a.0 += v;
                a.1 += v * v;
            }
        }
        Ok(acc)
    })?;
    let n = exp.samples as f64;
    let mut u_table = String::from("time,exact,mc_mean,standard_error,z,status\n");
    for (i, &t) in times.iter().enumerate() {
        let (s, sq) = sums
            .iter()
            .fold((0.0, 0.0), |a, part| (a.0 + part[i].0, a.1 + part[i].1));
        let m = s / n;
        let se = ((sq / n - m * m).max(0.0) / (n - 1.0)).sqrt();
        let z = if se > 0.0 {
            (m - exact_u[i]).abs() / se
        } else if m == exact_u[i] {
            0.0
        } else {
            f64::INFINITY
        };
        let pass = z <= Z_TOL;
        all_pass &= pass;
        writeln!(u_table, "{t},{},{m},{se},{z},{}", exact_u[i], flag(pass)).unwrap();
    }
    write(&exp.out_dir.join("oracle_u.csv"), &u_table)?;

    // finite differences and coupled marginals
    let exact = exact_fd(
        &exp.spec,
        &exp.direction,
        exp.observable,
        &exp.sigma0,
        times,
        &opts,
    )?;
    let schemes = if exp.schemes.is_empty() {
        vec![
            Scheme::Uncoupled,
            Scheme::MicroUnopt,
            Scheme::MicroOpt,
            Scheme::Macro,
        ]
    } else {
        exp.schemes.clone()
    };
    let mut fd_table = String::from("scheme,time,exact_diff,mc_diff,standard_error,z,status\n");
    let mut tv_table = String::from("scheme,process,time,total_variation,bound,status\n");
    let t_last = times[times.len() - 1];
    for &scheme in &schemes {
        let s = setup(exp, scheme)?;
        let r = estimate_fd(
            &s,
            &exp.sigma0,
            &exp.grid,
            exp.direction.step,
            exp.samples,
            exp.seed,
            exp.exec,
        )?;
        for (i, &t) in times.iter().enumerate() {
            let se = (r.variance(i) / r.n_samples() as f64).sqrt();
            let gap = (r.mean_diff(i) - exact[i]).abs();
            let z = if se > 0.0 {
                gap / se
            } else if gap < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            let pass = z <= Z_TOL;
            all_pass &= pass;
            writeln!(
                fd_table,
                "{scheme},{t},{},{},{se},{z},{}",
                exact[i],
                r.mean_diff(i),
                flag(pass)
            )
            .unwrap();
        }
        let (ha, hb) = coupled_marginals(&s, &exp.sigma0, t_last, exp.samples, exp.seed, exp.exec)?;
        for (label, model, h) in [("sigma", &s.model_a, ha), ("eta", &s.model_b, hb)] {
            let p = exact_marginal(&build_generator(model, &opts)?, &exp.sigma0, t_last, &opts)?;
            let tv = total_variation(&h, &p);
            let bound = tv_bound(&p, exp.samples);
            let pass = tv <= bound;
            all_pass &= pass;
            writeln!(
                tv_table,
                "{scheme},{label},{t_last},{tv},{bound},{}",
                flag(pass)
            )
            .unwrap();
        }
    }
    write(&exp.out_dir.join("oracle_fd.csv"), &fd_table)?;
    write(&exp.out_dir.join("oracle_marginals.csv"), &tv_table)?;

    // zero step: identical processes under micro_opt give an identically zero estimator
    let same = CoupledSetup::from_specs(
        &exp.spec,
        &exp.spec,
        exp.observable,
        exp.partition.clone(),
        Scheme::MicroOpt,
    )?;
    let r = estimate_fd(
        &same,
        &exp.sigma0,
        &exp.grid,
        exp.direction.step,
        exp.samples,
        exp.seed,
        exp.exec,
    )?;
    let zero = (0..r.len()).all(|i| r.mean_diff(i) == 0.0 && r.variance(i) == 0.0);
    all_pass &= zero;
    let zero_table = format!(
        "check,status\nzero_step_micro_opt_identically_zero,{}\n",
        flag(zero)
    );
    write(&exp.out_dir.join("oracle_zero_step.csv"), &zero_table)?;

    write_manifest(
        exp,
        "oracle-check",
        config_text,
        started,
        json!({ "all_pass": all_pass, "z_tolerance": Z_TOL }),
    )?;
    print!("{u_table}\n{fd_table}\n{tv_table}\n{zero_table}");
    Ok(all_pass)
}

fn coupled_marginals(
    s: &CoupledSetup,
    sigma0: &Configuration,
    t: f64,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let space = StateSpace::new(s.model_a.spec().species().values(), s.n_sites(), usize::MAX)?;
    let grid = TimeGrid::new(vec![t], t)?;
    let parts = map_shards(0..samples, exec, |paths| {
        let mut ha = vec![0u64; space.len()];
        let mut hb = vec![0u64; space.len()];
        for p in paths {
            run_coupled_path(s, sigma0, sigma0, &grid, seed, p, |g| {
                ha[space.index(g.sigma)] += 1;
                hb[space.index(g.eta)] += 1;
            })?;
        }
        Ok((ha, hb))
    })?;
    let mut ha = vec![0.0; space.len()];
    let mut hb = vec![0.0; space.len()];
    for (a, b) in parts {
        for i in 0..space.len() {
            ha[i] += a[i] as f64 / samples as f64;
            hb[i] += b[i] as f64 / samples as f64;
        }
    }
    Ok((ha, hb))
}
