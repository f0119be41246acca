use std::path::Path;
use std::process::{Command, Output};

fn recvrp(args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recvrp"))
        .args(args)
        .env_clear()
        .envs(env.iter().copied())
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Writes a solvable instance and returns its path.
fn instance(dir: &Path) -> String {
    let out = recvrp(
        &[
            "--seed",
            "2",
            "gen",
            "--scenario",
            "SR-n12-k11",
            "--map-size",
            "25",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let p = dir.join("i.recvrp");
    std::fs::write(&p, out.stdout).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance(dir.path());
    let out_dir = dir.path().join("out");
    let o = recvrp(&["--out", out_dir.to_str().unwrap(), "solve", &inst], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("time clustering"));
    let sol = out_dir.join("SR-n12-k11.sol");
    assert!(text(&std::fs::read(&sol).unwrap()).starts_with("RECVRP-SOLUTION"));
    let traces = dir.path().join("t.csv");
    let v = recvrp(
        &[
            "validate",
            "--instance",
            &inst,
            "--solution",
            sol.to_str().unwrap(),
            "--samples",
            "500",
            "--traces",
            traces.to_str().unwrap(),
        ],
        &[],
    );
    let body = text(&v.stdout);
    assert!(body.starts_with("feasible\n"), "{body}");
    assert!(body.contains("samples 500"));
    assert_eq!(
        std::fs::read_to_string(&traces).unwrap().lines().count(),
        501
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance(dir.path());
    assert_eq!(
        recvrp(&["solve", "/nonexistent"], &[]).status.code(),
        Some(3)
    );
    assert_eq!(recvrp(&["solve"], &[]).status.code(), Some(3));
    assert_eq!(
        recvrp(&["--pe", "1.5", "solve", &inst], &[]).status.code(),
        Some(3)
    );
    assert_eq!(
        recvrp(&["--timeout", "0", "solve", &inst], &[])
            .status
            .code(),
        Some(4)
    );
    // Demand of this seed exceeds the single vehicle's capacity.
    let big = dir.path().join("big.recvrp");
    std::fs::write(
        &big,
        recvrp(&["--seed", "1", "gen", "--scenario", "SR-n12-k11"], &[]).stdout,
    )
    .unwrap();
    assert_eq!(
        recvrp(&["solve", big.to_str().unwrap()], &[]).status.code(),
        Some(2)
    );
    assert_eq!(recvrp(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn flag_beats_env_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance(dir.path());
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"pt": 0.5, "format": "json"}"#).unwrap();
    let cost = |args: &[&str], env: &[(&str, &str)]| {
        let mut a = vec!["--config", cfg.to_str().unwrap()];
        a.extend_from_slice(args);
        a.extend(["solve", &inst]);
        let o = recvrp(&a, env);
        assert!(o.status.success(), "{}", text(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let c = &v["cost_report"];
        (
            c["per_route_sum"].as_f64().unwrap(),
            v["deterministic_time"].as_f64().unwrap(),
        )
    };
    let (median, mean) = cost(&[], &[]);
    assert!((median - mean).abs() < 1e-9);
    let (env_cost, _) = cost(&[], &[("RECVRP_PT", "0.9")]);
    assert!(env_cost > median);
    let (flag_cost, _) = cost(&["--pt", "0.5"], &[("RECVRP_PT", "0.9")]);
    assert_eq!(flag_cost, median);
    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(
        recvrp(&["--config", cfg.to_str().unwrap(), "solve", &inst], &[])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn bench_reports_gap_against_reference() {
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("set");
    std::fs::create_dir(&inst_dir).unwrap();
    instance(&inst_dir);
    let solved = recvrp(
        &[
            "--format",
            "json",
            "solve",
            inst_dir.join("i.recvrp").to_str().unwrap(),
        ],
        &[],
    );
    let v: serde_json::Value = serde_json::from_slice(&solved.stdout).unwrap();
    let cost = v["cost_report"]["per_route_sum"].as_f64().unwrap();
    let reference = dir.path().join("ref.csv");
    std::fs::write(
        &reference,
        format!("name,cost,reported_gap\ni,{},13.0\n", cost / 1.1),
    )
    .unwrap();
    let o = recvrp(
        &[
            "bench",
            inst_dir.to_str().unwrap(),
            "--reference",
            reference.to_str().unwrap(),
            "--no-timings",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", text(&o.stderr));
    let body = text(&o.stdout);
    let mut lines = body.lines();
    assert_eq!(
        lines.next(),
        Some("name,status,runs,solved,cost,deterministic,reference,gap_pct,reported_gap,gap_mismatch")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "i");
    assert_eq!(row[1], "ok");
    let gap: f64 = row[7].parse().unwrap();
    assert!((gap - 10.0).abs() < 1e-9, "{gap}");
    assert_eq!(row[9], "true");
}

#[test]
fn gen_many_and_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = recvrp(
        &[
            "--out",
            out.to_str().unwrap(),
            "gen",
            "--nodes",
            "20",
            "--depots",
            "2,1",
            "--count",
            "3",
            "--map-size",
            "30",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", text(&o.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "SR-n20-k221-s0.recvrp",
            "SR-n20-k221-s1.recvrp",
            "SR-n20-k221-s2.recvrp"
        ]
    );
    let c = recvrp(&["cluster", out.join(&names[0]).to_str().unwrap()], &[]);
    assert_eq!(c.status.code(), Some(0));
    let body = text(&c.stdout);
    assert!(body.starts_with("RECVRP-CLUSTERING"));
    assert!(body.ends_with("valid yes\n"));
    assert_eq!(body.lines().filter(|l| l.starts_with("group ")).count(), 3);
}

#[test]
fn benchmark_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("tiny.evrp");
    std::fs::write(
        &p,
        "NAME : tiny\nTYPE : EVRP\nVEHICLES : 1\nDIMENSION : 3\nSTATIONS : 1\nCAPACITY : 10\n\
         ENERGY_CAPACITY : 100\nENERGY_CONSUMPTION : 1.0\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n\
         1 0 0\n2 3 4\n3 0 4\n4 1 1\nDEMAND_SECTION\n1 0\n2 5\n3 5\nSTATIONS_COORD_SECTION\n4\nDEPOT_SECTION\n1\n-1\nEOF\n",
    )
    .unwrap();
    let o = recvrp(&["solve", p.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("instance tiny"));
    let m = recvrp(&["export-mip", p.to_str().unwrap()], &[]);
    assert!(text(&m.stdout).contains("Subject To"));
}
