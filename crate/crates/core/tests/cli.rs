use std::path::Path;
use std::process::{Command, Output};

fn pointloss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointloss")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn chamfer_single_points() {
    let d = tempfile::tempdir().unwrap();
    let a = write(d.path(), "a.xyz", "0 0 0\n");
    let b = write(d.path(), "b.xyz", "1 0 0\n");
    let o = pointloss(&["chamfer", &a, &b]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "squared: false\nchamfer: 1.0\n");
}

#[test]
fn emd_of_a_cloud_with_itself_is_zero() {
    let d = tempfile::tempdir().unwrap();
    let a = write(d.path(), "a.xyz", "0 0 0\n1 0 0\n0 2 0\n");
    let o = pointloss(&["emd", &a, &a]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(value(&out, "mean_cost"), "0.0");
    assert_eq!(value(&out, "converged"), "true");
}

#[test]
fn size_mismatch_exits_one_and_mentions_size() {
    let d = tempfile::tempdir().unwrap();
    let a = write(d.path(), "a.xyz", "0 0 0\n1 0 0\n");
    let c = write(d.path(), "c.xyz", "0 0 0\n");
    for extra in [&[][..], &["--exact"][..]] {
        let mut args = vec!["emd", a.as_str(), c.as_str()];
        args.extend_from_slice(extra);
        let o = pointloss(&args);
        assert_eq!(o.status.code(), Some(1));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("size"), "{err}");
        assert_eq!(err.lines().count(), 1);
    }
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let good = write(d.path(), "good.xyz", "0 0 0\n1 1 1\n");
    let nan = write(d.path(), "nan.xyz", "0 0 nan\n");
    let garbage = write(d.path(), "bad.xyz", "0 0 zero\n");
    let missing = d.path().join("missing.xyz").to_string_lossy().into_owned();

    assert_eq!(pointloss(&["chamfer", &good, &good]).status.code(), Some(0));
    assert_eq!(pointloss(&["chamfer", &good, &nan]).status.code(), Some(1));
    assert_eq!(pointloss(&["chamfer", &good, &garbage]).status.code(), Some(2));
    assert_eq!(pointloss(&["chamfer", &good, &missing]).status.code(), Some(2));
    assert_eq!(pointloss(&["chamfer", &good, &good, "--bogus"]).status.code(), Some(2));
    assert_eq!(pointloss(&["sample", &good, "--method", "mds", "--count", "3"]).status.code(), Some(1));
    assert_eq!(pointloss(&["expansion", &good, "--k", "1", "--n", "3"]).status.code(), Some(1));
    assert_eq!(pointloss(&["chamfer", &good, &good, "--threads", "0"]).status.code(), Some(1));

    let o = pointloss(&["chamfer", &good, &garbage]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn every_subcommand_runs() {
    let d = tempfile::tempdir().unwrap();
    let p = |n: &str| d.path().join(n).to_string_lossy().into_owned();
    let ok = |args: &[&str]| {
        let o = pointloss(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };

    ok(&["gen", "uniform-box", "--n", "32", "--min", "-1,-1,-1", "--max", "1,1,1", "-o", &p("a.xyz")]);
    ok(&["gen", "uniform-box", "--n", "32", "--seed", "1", "-o", &p("b.ply")]);
    ok(&["gen", "uniform-box", "--n", "32", "--seed", "2", "-o", &p("c.xyz")]);
    ok(&["gen", "two-density", "--left", "20", "--right", "40", "-o", &p("td.xyz")]);

    let exact = ok(&["emd", &p("a.xyz"), &p("b.ply"), "--exact"]);
    assert_eq!(value(&exact, "method"), "exact");
    let auction = ok(&["emd", &p("a.xyz"), &p("b.ply"), "--assignment", &p("map.txt")]);
    let e: f64 = value(&auction, "epsilon").parse().unwrap();
    let (m1, m2): (f64, f64) = (
        value(&exact, "mean_cost").parse().unwrap(),
        value(&auction, "mean_cost").parse().unwrap(),
    );
    assert!(m1 <= m2 + 1e-12 && m2 <= m1 + e);
    let mut mapping: Vec<usize> = std::fs::read_to_string(p("map.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    mapping.sort_unstable();
    assert_eq!(mapping, (0..32).collect::<Vec<_>>());
    ok(&["emd", &p("a.xyz"), &p("b.ply"), "--no-scaling", "--epsilon", "0.01", "--max-iters", "5"]);

    let sq = ok(&["chamfer", &p("a.xyz"), &p("td.xyz"), "--squared"]);
    assert_eq!(value(&sq, "squared"), "true");

    let exp = ok(&["expansion", &p("a.xyz"), "--k", "2", "--n", "16", "--lambda", "1.2", "--gradients", &p("g.txt")]);
    assert_eq!(value(&exp, "elements"), "2");
    assert_eq!(std::fs::read_to_string(p("g.txt")).unwrap().lines().count(), 32);

    for method in ["mds", "fps", "pds", "random"] {
        let out = ok(&["sample", &p("td.xyz"), "--method", method, "--count", "30", "--report", "-o", &p("s.xyz")]);
        assert_eq!(value(&out, "count"), "30");
        let left: usize = value(&out, "left_count").parse().unwrap();
        let right: usize = value(&out, "right_count").parse().unwrap();
        assert_eq!(left + right, 30);
    }

    let merged = ok(&["merge", &p("a.xyz"), &p("c.xyz"), "-o", &p("m.xyzl")]);
    assert_eq!(value(&merged, "points"), "64");
    let sub = ok(&["merge", &p("a.xyz"), &p("c.xyz"), "-o", &p("m2.xyzl"), "--count", "40", "--sigma", "0.3"]);
    assert_eq!(value(&sub, "points"), "40");
    let report = ok(&["sample", &p("m2.xyzl"), "--method", "mds", "--count", "20", "--report"]);
    let i: usize = value(&report, "input_count").parse().unwrap();
    let c: usize = value(&report, "coarse_count").parse().unwrap();
    assert_eq!(i + c, 20);

    let loss = ok(&[
        "loss", &p("a.xyz"), &p("b.ply"), &p("c.xyz"), "--k", "2", "--n", "16",
        "--alpha", "0.5", "--beta", "2.0", "--epsilon", "1e-4",
    ]);
    let get = |k: &str| value(&loss, k).parse::<f64>().unwrap();
    let total = get("emd_coarse") + 0.5 * get("expansion") + 2.0 * get("emd_final");
    assert_eq!(get("total"), total);

    let converted = ok(&["sample", &p("b.ply"), "--method", "fps", "--count", "32", "--format", "ply", "-o", &p("b2.ply")]);
    assert_eq!(value(&converted, "count"), "32");
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(pointloss(&["--help"]).status.code(), Some(0));
    assert_eq!(pointloss(&["--version"]).status.code(), Some(0));
    assert_eq!(pointloss(&[]).status.code(), Some(2));
}
