use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use coreadership::communities::{community_report, project, sphere_query, CitationTable};
use coreadership::pipeline::{analyze, ingest, AnalysisParams, Ingested};
use coreadership::spectra::{fit_alpha, nested_sweep, Bins, EigenOptions, ScalingFit, SweepOptions};
use coreadership::synth::{generate, SynthConfig};
use coreadership::Exec;

use crate::manifest::{absolute, Manifest, Run};

pub const EVENTS_FILE: &str = "events.log";
pub const TRUTH_FILE: &str = "truth.json";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

pub fn run(run: &Run, out: &Path) -> Result<()> {
    prepare_out(out)?;
    match run {
        Run::Synth { config } => synth(config, out)?,
        Run::Analyze { logs, params, bins } => analyze_cmd(logs, params, *bins, out)?,
        Run::Sweep {
            logs,
            params,
            sizes,
            fit_points,
        } => sweep(logs, params, sizes, fit_points.as_deref(), out)?,
        Run::Probe {
            run,
            center,
            radius,
            k,
            citations,
            min_citations,
        } => probe(run, center, *radius, *k, citations.as_deref(), *min_citations, out)?,
    }
    Manifest::new(run.clone()).write(out)
}

fn synth(config: &SynthConfig, out: &Path) -> Result<()> {
    let generated = generate(config)?;
    let mut w = create(out, EVENTS_FILE)?;
    w.write_all(generated.log.as_bytes())?;
    w.flush()?;
    write_json(out, TRUTH_FILE, &generated.truth)?;
    log::info!(
        "wrote {} users ({} noise) to {}",
        generated.truth.users.len(),
        config.noise_users,
        out.display()
    );
    Ok(())
}

fn load(logs: &[PathBuf], params: &AnalysisParams) -> Result<Ingested> {
    let mut readers = Vec::with_capacity(logs.len());
    for p in logs {
        let f = File::open(p).with_context(|| format!("opening log {}", p.display()))?;
        readers.push(BufReader::new(f));
    }
    Ok(ingest(readers, params, Exec::default())?)
}

pub fn resolve_logs(logs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    logs.iter().map(|p| absolute(p)).collect()
}

#[derive(Serialize)]
struct Summary {
    n_s: usize,
    epsilon1: f64,
    r_statistic: Option<f64>,
    r_statistic_error: Option<String>,
    complete_spectrum: bool,
    eigenvalue_sum: f64,
    trace_relative_error: Option<f64>,
    min_eigenvalue: Option<f64>,
    max_residual_ratio: Option<f64>,
    orthonormality_error: Option<f64>,
    asymmetry: Option<f64>,
    checks_passed: bool,
    density_bins: Option<usize>,
    density_error: Option<String>,
    events: usize,
    malformed_lines: usize,
    users_seen: usize,
    population: usize,
}

fn analyze_cmd(logs: &[PathBuf], params: &AnalysisParams, bins: Option<usize>, out: &Path) -> Result<()> {
    let ing = load(logs, params)?;
    let bins = bins.map_or(Bins::Auto, Bins::Count);
    let a = analyze(&ing.sample, params, bins, Exec::default())?;

    let mut w = create(out, "sample.csv")?;
    ing.sample.write_csv(&mut w)?;
    w.flush()?;

    let values = a.summary.eigenvalues();
    write_csv(
        out,
        "eigenvalues.csv",
        &["rank", "eigenvalue"],
        values.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]),
    )?;

    let (density_bins, density_error) = match &a.density {
        Some(Ok(d)) => {
            write_csv(
                out,
                "density.csv",
                &["bin_lo", "bin_hi", "rho"],
                d.density
                    .iter()
                    .enumerate()
                    .map(|(i, rho)| vec![d.bin_edges[i].to_string(), d.bin_edges[i + 1].to_string(), rho.to_string()]),
            )?;
            (Some(d.density.len()), None)
        }
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, Some("spectrum is partial; density needs every eigenvalue".to_owned())),
    };
    if let Some(e) = &density_error {
        log::warn!("density.csv not written: {e}");
    }
    if let Err(e) = &a.separation {
        log::warn!("separation statistic: {e}");
    }

    let summary = Summary {
        n_s: a.summary.n_s(),
        epsilon1: a.summary.epsilon1(),
        r_statistic: a.separation.as_ref().ok().copied(),
        r_statistic_error: a.separation.as_ref().err().map(ToString::to_string),
        complete_spectrum: a.summary.is_complete(),
        eigenvalue_sum: values.iter().sum(),
        trace_relative_error: a.checks.trace_relative_error,
        min_eigenvalue: a.checks.min_eigenvalue,
        max_residual_ratio: a.checks.max_residual_ratio,
        orthonormality_error: a.checks.orthonormality_error,
        asymmetry: a.checks.asymmetry,
        checks_passed: a.checks.passes(),
        density_bins,
        density_error,
        events: ing.events,
        malformed_lines: ing.malformed,
        users_seen: ing.users_seen,
        population: ing.population,
    };
    write_json(out, "summary.json", &summary)?;
    if a.density.as_ref().is_some_and(|d| d.is_err()) {
        bail!("spectra: {}", summary.density_error.unwrap_or_default());
    }
    Ok(())
}

/// Sorted, duplicate-free sweep sizes.
pub fn normalize_sizes(sizes: &[usize]) -> Vec<usize> {
    let mut s = sizes.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != sizes.len() {
        log::warn!("duplicate sweep sizes removed: {sizes:?} -> {s:?}");
    }
    s
}

fn read_fit_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).context("fit points need two columns: n_s,epsilon1")?;
            s.trim().parse().with_context(|| format!("bad number {s:?} in {}", path.display()))
        };
        points.push((field(0)?, field(1)?));
    }
    Ok(points)
}

#[derive(Serialize)]
struct FitOut<'a> {
    alpha: f64,
    r_squared: f64,
    log_intercept: f64,
    points: &'a [(f64, f64)],
}

fn write_fit(out: &Path, fit: &ScalingFit) -> Result<()> {
    write_json(
        out,
        "fit.json",
        &FitOut {
            alpha: fit.alpha,
            r_squared: fit.r_squared,
            log_intercept: fit.log_intercept,
            points: &fit.points,
        },
    )
}

fn sweep(
    logs: &[PathBuf],
    params: &AnalysisParams,
    sizes: &[usize],
    fit_points: Option<&Path>,
    out: &Path,
) -> Result<()> {
    if let Some(path) = fit_points {
        let points = read_fit_points(path)?;
        write_csv(
            out,
            "scaling.csv",
            &["n_s", "epsilon1", "R_stat"],
            points.iter().map(|(n, e)| vec![n.to_string(), e.to_string(), String::new()]),
        )?;
        return write_fit(out, &fit_alpha(&points).map_err(coreadership::Error::from)?);
    }
    let sizes = normalize_sizes(sizes);
    let Some(&largest) = sizes.last() else {
        bail!("sweep needs at least one size");
    };
    let params = AnalysisParams {
        n_s: largest,
        ..params.clone()
    };
    let ing = load(logs, &params)?;
    if ing.sample.len() < largest {
        bail!(
            "sweep size {largest} exceeds the population: only {} users qualify",
            ing.sample.len()
        );
    }
    let exec = Exec::default();
    let opts = SweepOptions {
        coread: params.coread_options(exec),
        eigen: EigenOptions {
            vectors: false,
            ..params.eigen_options(exec)
        },
        exec,
    };
    let spectra = nested_sweep(&ing.sample, &sizes, &opts).map_err(coreadership::Error::from)?;
    let rows: Vec<(usize, f64, Option<f64>)> = sizes
        .iter()
        .zip(&spectra)
        .map(|(&n, s)| (n, s.epsilon1(), coreadership::spectra::separation_statistic(s).ok()))
        .collect();
    write_csv(
        out,
        "scaling.csv",
        &["n_s", "epsilon1", "R_stat"],
        rows.iter()
            .map(|(n, e, r)| vec![n.to_string(), e.to_string(), r.map(|r| r.to_string()).unwrap_or_default()]),
    )?;
    let points: Vec<(f64, f64)> = rows.iter().map(|&(n, e, _)| (n as f64, e)).collect();
    write_fit(out, &fit_alpha(&points).map_err(coreadership::Error::from)?)
}

#[allow(clippy::too_many_arguments)]
fn probe(
    run_dir: &Path,
    center: &[f64],
    radius: f64,
    k: usize,
    citations: Option<&Path>,
    min_citations: u64,
    out: &Path,
) -> Result<()> {
    let Run::Analyze { logs, params, .. } = Manifest::read(run_dir)?.run else {
        bail!("{} is not an analyze run", run_dir.display());
    };
    if center.len() != k {
        return Err(coreadership::Error::from(coreadership::communities::CommunityError::Dimension {
            got: center.len(),
            expected: k,
        })
        .into());
    }
    let table = match citations {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening citation table {}", p.display()))?;
            CitationTable::read(BufReader::new(f)).map_err(coreadership::Error::from)?
        }
        None => CitationTable::default(),
    };
    let ing = load(&logs, &params)?;
    let a = analyze(&ing.sample, &params, Bins::Auto, Exec::default())?;
    let cloud = project(&a.matrices, &a.summary, &ing.sample, k, Exec::default()).map_err(coreadership::Error::from)?;

    let header: Vec<String> = ["index".to_owned(), "cookie_id".to_owned()]
        .into_iter()
        .chain((1..=k).map(|i| format!("c{i}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        out,
        "points.csv",
        &header,
        (0..cloud.len()).map(|u| {
            [(u + 1).to_string(), cloud.users()[u].to_string()]
                .into_iter()
                .chain(cloud.point(u).iter().map(f64::to_string))
                .collect()
        }),
    )?;

    let members = sphere_query(&cloud, center, radius).map_err(coreadership::Error::from)?;
    let report = community_report(&cloud, center, radius, &members, &ing.sample, &table, min_citations)
        .map_err(coreadership::Error::from)?;
    write_json(out, "report.json", &report)?;
    log::info!("{} users, {} papers in the sphere", report.members.len(), report.papers.len());
    Ok(())
}
