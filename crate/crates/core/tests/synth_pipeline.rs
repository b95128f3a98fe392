use coreadership::pipeline::{analyze, ingest, AnalysisParams};
use coreadership::spectra::Bins;
use coreadership::synth::{generate, SynthConfig};
use coreadership::Exec;

fn popularity_sorted(cfg: &SynthConfig) -> Vec<usize> {
    let out = generate(cfg).unwrap();
    let mut pops: Vec<usize> = out.truth.paper_popularity().values().copied().collect();
    pops.resize(cfg.n_papers, 0);
    pops.sort_unstable();
    pops
}

#[test]
fn default_popularity_is_heavy_tailed() {
    let cfg = SynthConfig::default();
    let pops = popularity_sorted(&cfg);
    let median = pops[pops.len() / 2] as f64;
    let top = &pops[pops.len() - pops.len() / 100..];
    let top_mean = top.iter().sum::<usize>() as f64 / top.len() as f64;
    // measured at seed 7: median 11, top-1% minimum ~6.6x, top-1% mean ~7.7x
    assert!(top[0] as f64 >= 6.0 * median, "min {} median {median}", top[0]);
    assert!(top_mean >= 7.0 * median, "mean {top_mean} median {median}");

    let flat = popularity_sorted(&SynthConfig { attachment_bias: 0.0, ..cfg });
    let flat_median = flat[flat.len() / 2] as f64;
    assert!((flat[flat.len() - flat.len() / 100] as f64) < 3.0 * flat_median);
}

#[test]
fn noise_users_never_reach_the_sample() {
    let cfg = SynthConfig {
        n_users: 300,
        n_papers: 1000,
        noise_users: 150,
        ..Default::default()
    };
    let out = generate(&cfg).unwrap();
    let params = AnalysisParams {
        n_s: 10_000,
        ..Default::default()
    };
    let ing = ingest(vec![out.log.as_bytes()], &params, Exec::default()).unwrap();
    assert!(ing.sample.users().iter().all(|c| c.as_str().starts_with("u_")));
    assert_eq!(ing.users_seen, 450);
    let expected = out
        .truth
        .users
        .iter()
        .filter(|u| u.regular && (10..=100).contains(&u.papers.len()))
        .count();
    assert_eq!(ing.population, expected);
}

#[test]
fn small_end_to_end_run() {
    let cfg = SynthConfig {
        n_users: 400,
        n_papers: 1500,
        ..Default::default()
    };
    let out = generate(&cfg).unwrap();
    let params = AnalysisParams {
        n_s: 200,
        ..Default::default()
    };
    let ing = ingest(vec![out.log.as_bytes()], &params, Exec::default()).unwrap();
    assert_eq!(ing.sample.len(), 200);
    let a = analyze(&ing.sample, &params, Bins::Auto, Exec::default()).unwrap();
    assert!(a.checks.passes(), "{:?}", a.checks);
    assert_eq!(a.summary.eigenvalues().len(), 200);
    let sum: f64 = a.summary.eigenvalues().iter().sum();
    assert!((sum - 200.0).abs() <= 1e-8 * 200.0);
    assert!(a.separation.unwrap() > 1.0);
    assert!((a.density.unwrap().unwrap().integral() - 1.0).abs() < 1e-12);

    let seq = analyze(&ing.sample, &params, Bins::Auto, Exec::Sequential).unwrap();
    for (x, y) in seq.summary.eigenvalues().iter().zip(a.summary.eigenvalues()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn empty_log_is_a_population_error() {
    let err = ingest(vec!["".as_bytes()], &AnalysisParams::default(), Exec::default()).unwrap_err();
    assert!(err.to_string().starts_with("population"), "{err}");
}
