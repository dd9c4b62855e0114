use std::fs;
use std::process::{Command, Output};

fn selfnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfnorm"))
        .args(args)
        .env_remove("SELFNORM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn equal_weights_delta() {
    let o = selfnorm(&[
        "delta",
        "--y-law",
        "pointmass:c=1",
        "--n",
        "4",
        "--gamma",
        "1.5",
        "--method",
        "mc",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "0.5\n");
}

#[test]
fn kolmogorov_bound_value() {
    let o = selfnorm(&["bound", "--kind", "kolmogorov", "--xi3", "1", "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0.056\n");
}

#[test]
fn switch_bound_outside_regime_warns() {
    let o = selfnorm(&["bound", "--kind", "switch", "--m4", "3", "--n", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
    let o = selfnorm(&["bound", "--kind", "switch", "--m4", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn an_solve_loglog() {
    let o = selfnorm(&["an-solve", "--ell", "loglog", "--n", "100000000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,a_n,residual,iterations,ratio_to_n_loglog_n"));
    let f: Vec<&str> = lines.next().unwrap().split(',').collect();
    let residual: f64 = f[2].parse().unwrap();
    let ratio: f64 = f[4].parse().unwrap();
    assert!(residual <= 1e-10);
    assert!(ratio > 0.9 && ratio < 1.1, "{ratio}");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["delta", "-n", "4"][..],
        &["bound", "--kind", "nope"][..],
        &["an-solve", "--n", "10"][..],
        &["frobnicate"][..],
        &["delta", "--y-law", "normal", "--n", "4", "--bogus"][..],
    ] {
        let o = selfnorm(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stdout(&o).is_empty());
    }
}

#[test]
fn help_on_every_subcommand() {
    for sub in [
        "simulate",
        "delta",
        "bound",
        "an-solve",
        "distance",
        "rate-fit",
        "oracle-check",
        "report",
    ] {
        let o = selfnorm(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let text = stdout(&o);
        assert!(text.contains("--threads") && text.contains("--seed"), "{sub}");
    }
}

#[test]
fn precondition_errors_exit_1() {
    let o = selfnorm(&["delta", "--y-law", "cauchy", "--n", "100", "--method", "asym_fin3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("infinite"));
    let o = selfnorm(&[
        "delta",
        "--y-law",
        "normal",
        "--n",
        "10",
        "--method",
        "mc",
        "--replicates",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sample_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.txt");
    fs::write(&p, "# header\n0.5\n\n-1.25\nnot-a-number\n").unwrap();
    let o = selfnorm(&["distance", "--sample", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn distance_of_a_sample() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.txt");
    fs::write(&p, "0\n# only one point\n").unwrap();
    let o = selfnorm(&["distance", "--sample", p.to_str().unwrap(), "--kind", "kolmogorov"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "kolmogorov");
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.5);
}

fn write_config(dir: &std::path::Path) -> std::path::PathBuf {
    let p = dir.join("exp.cfg");
    fs::write(
        &p,
        "x_law=normal\ny_law=pareto_sq:alpha=1.5\nn_grid=10,20,40\nreplicates=300\n\
         sample_replicates_for_distance=2000\nseed=11\n\
         outputs=delta_mc,delta_laplace,dk_empirical,dw_empirical,bounds,rate_fit\n",
    )
    .unwrap();
    p
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let c = cfg.to_str().unwrap();
    let a = selfnorm(&["simulate", "--config", c, "--threads", "1"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = selfnorm(&["simulate", "--config", c, "--threads", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("x_law,y_law,statistic,n,quantity,method,gamma,value,stderr,wall_time_ms,seed\n"));
    // 6 quantities per n, 3 values of n, 6 fits
    assert_eq!(text.lines().count(), 1 + 18 + 6);

    let c2 = selfnorm(&["simulate", "--config", c, "--seed", "12"]);
    assert_ne!(a.stdout, c2.stdout);
}

#[test]
fn env_seed_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let c = cfg.to_str().unwrap();
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_selfnorm"))
            .args(["simulate", "--config", c])
            .env("SELFNORM_SEED", seed)
            .output()
            .unwrap()
    };
    let env = run("12");
    let flag = selfnorm(&["simulate", "--config", c, "--seed", "12"]);
    assert_eq!(env.stdout, flag.stdout);
}

#[test]
fn simulate_report_and_rate_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let csv = dir.path().join("rows.csv");
    let o = selfnorm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());

    let r = selfnorm(&["report", "--input", csv.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert!(stdout(&r).contains("delta_laplace"));
    assert!(dir.path().join("rows_plot.py").exists());

    let f = selfnorm(&[
        "rate-fit",
        "--input",
        csv.to_str().unwrap(),
        "--quantity",
        "delta_laplace",
    ]);
    assert_eq!(f.status.code(), Some(0), "{}", stderr(&f));
    let slope: f64 = stdout(&f)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope < 0.0 && slope > -0.5, "{slope}");
}

#[test]
fn rate_fit_from_lists() {
    let o = selfnorm(&["rate-fit", "--ns", "10,100,1000", "--values", "1,0.1,0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let slope: f64 = stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope + 1.0).abs() < 1e-12);
}

#[test]
fn bad_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    fs::write(&p, "y_law=normal\nn_grid=10\noutputs=delta_mc\nreplicate=100\n").unwrap();
    let o = selfnorm(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"));
}

#[test]
fn oracle_check_small_grid() {
    let o = selfnorm(&[
        "oracle-check",
        "--laws",
        "normal;pareto_sq:alpha=1.5",
        "--ns",
        "2,10",
        "--gammas",
        "1.5",
        "--replicates",
        "2000",
        "--seed",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.ends_with("PASS")).count(), 4);
}
