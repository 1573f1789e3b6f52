use std::process::{Command, Output};

fn coning_kit(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coning-kit"));
    cmd.args(args).env_remove("CONING_KIT_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn validate_passes_every_check() {
    let o = coning_kit(&["validate"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().count() >= 5);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}

#[test]
fn coning_sweep_has_one_row_per_method_and_step() {
    let o = coning_kit(
        &[
            "sweep",
            "--signal",
            "coning",
            "--methods",
            "rk4omega,theta2,theta3",
            "--dt-max",
            "0.25",
            "--halvings",
            "6",
            "--horizon",
            "4",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "method,jacobian_mode,dt,steps,final_error_rad,wall_time_s"
    );
    assert_eq!(lines.len(), 1 + 3 * 7);
    assert!(lines[1].starts_with("rk4omega,exact,0.25,16,"));
    assert!(lines[21].starts_with("theta3,n/a,0.00390625,1024,"));
    assert!(stderr(&o).contains("order"));
}

#[test]
fn unknown_method_lists_valid_names() {
    let o = coning_kit(&["sweep", "--methods", "rk4omega,heun"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("heun"));
    for name in [
        "fwdeuleromega",
        "exmidomega",
        "rk3omega",
        "rk4omega",
        "theta2",
        "theta3",
        "rk4theta2",
        "twospeed",
    ] {
        assert!(err.contains(name), "missing {name} in {err}");
    }
}

#[test]
fn csv_is_byte_stable_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |file: &str, threads: &str| {
        let path = dir.path().join(file);
        let o = coning_kit(
            &[
                "sweep",
                "--signal",
                "fourier3",
                "--methods",
                "rk3omega,theta3,twospeed4",
                "--dt",
                "0.5,0.25,0.125",
                "--horizon",
                "2",
                "--no-timing",
                "--output",
                path.to_str().unwrap(),
            ],
            &[("CONING_KIT_THREADS", threads)],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "4");
    let c = run("c.csv", "0");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 10);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sweep.conf");
    std::fs::write(
        &conf,
        "# small sweep\nsignal = poly3\nmethods = exmidomega\ndt = 0.5, 0.25\nhorizon = 1\nformat = tsv\n",
    )
    .unwrap();
    let o = coning_kit(
        &[
            "sweep",
            "--config",
            conf.to_str().unwrap(),
            "--format",
            "csv",
            "--no-timing",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("exmidomega,exact,0.5,2,"));

    std::fs::write(&conf, "speed = 3\n").unwrap();
    let o = coning_kit(&["sweep", "--config", conf.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("speed"));
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(coning_kit(&[], &[]).status.code(), Some(2));
    assert_eq!(
        coning_kit(&["sweep", "--dt", "0.3"], &[]).status.code(),
        Some(2)
    );
    assert_eq!(
        coning_kit(&["sweep", "--tolerance", "1e-15"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        coning_kit(&["sweep", "--dt", "0.25,0.5"], &[])
            .status
            .code(),
        Some(2)
    );
    let o = coning_kit(&["sweep"], &[("CONING_KIT_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CONING_KIT_THREADS"));
    let o = coning_kit(&["sweep", "--config", "/nonexistent/sweep.conf"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tableaux_and_help() {
    let o = coning_kit(&["tableaux"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for name in ["forward-euler", "explicit-midpoint", "rk3", "rk4"] {
        assert!(out.contains(name));
    }
    assert_eq!(coning_kit(&["--help"], &[]).status.code(), Some(0));
    assert_eq!(coning_kit(&["sweep", "--help"], &[]).status.code(), Some(0));
}
