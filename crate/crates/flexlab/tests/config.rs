use flexlab::config::{parse_config, Command, CutoffSection, RunConfig, StaircaseSection};
use flexlab::cutoff::Cutoff;
use flexlab::report::{execute, RunError};

#[test]
fn minimal_staircase_config_fills_defaults() {
    let cfg = parse_config("command = \"staircase\"\n").unwrap();
    assert_eq!(cfg.command, Command::Staircase);
    let s = cfg.staircase.unwrap();
    assert_eq!(s, StaircaseSection::default());
    assert_eq!((s.eps, s.n, s.l, s.report_grid), (1e-4, 200, None, 4097));
    assert_eq!(cfg.grid.x_samples, None);
}

#[test]
fn partial_section_keeps_other_defaults() {
    let cfg = parse_config("command = \"cutoff\"\n[cutoff]\ndelta = 0.05\n").unwrap();
    assert_eq!(cfg.cutoff.unwrap(), CutoffSection { delta: 0.05, ..Default::default() });
}

#[test]
fn delta_outside_quarter_names_the_range() {
    let err = parse_config("command = \"cutoff\"\n\n[cutoff]\neps = 0.5\ndelta = 0.3\n").unwrap_err();
    assert_eq!(err.issues.len(), 1);
    assert_eq!(err.issues[0].line, Some(5));
    assert_eq!(err.issues[0].key.as_deref(), Some("cutoff.delta"));
    assert!(err.to_string().contains("(0, 1/4)"), "{err}");
    let err = parse_config("command = \"glue\"\n[glue]\ndelta_schedule = [0.1, 0.25]\n").unwrap_err();
    assert_eq!(err.issues[0].line, Some(3));
    assert!(err.to_string().contains("(0, 1/4)"));
}

#[test]
fn duplicate_and_unknown_keys_are_rejected_with_lines() {
    let err = parse_config("command = \"curve\"\n[curve]\nmu = 2.0\nmu = 3.0\n").unwrap_err();
    assert_eq!(err.issues[0].line, Some(4));
    assert!(err.to_string().contains("duplicate"), "{err}");
    let err = parse_config("command = \"curve\"\n[curve]\nmu = 2.0\nnu = 3.0\n").unwrap_err();
    assert_eq!(err.issues[0].line, Some(4));
    assert!(err.to_string().contains("unknown field `nu`"), "{err}");
    let err = parse_config("command = \"bend\"\n").unwrap_err();
    assert_eq!(err.issues[0].line, Some(1));
    assert!(parse_config("[curve]\nmu = 2.0\n").is_err());
}

#[test]
fn several_range_errors_are_all_reported() {
    let text = "command = \"staircase\"\n[staircase]\neps = -1.0\nN = 0\nseq = \"sobol\"\n";
    let err = parse_config(text).unwrap_err();
    let lines: Vec<_> = err.issues.iter().map(|i| i.line).collect();
    assert_eq!(lines, vec![Some(3), Some(4), Some(5)]);
}

#[test]
fn foreign_section_is_rejected() {
    let err = parse_config("command = \"cutoff\"\n[curve]\nmu = 2.0\n").unwrap_err();
    assert_eq!(err.issues[0].line, Some(2));
}

#[test]
fn execute_rejects_unvalidated_configs() {
    let mut cfg = RunConfig::new(Command::Cutoff);
    cfg.cutoff.as_mut().unwrap().delta = 0.25;
    assert!(matches!(execute(&cfg), Err(RunError::Config(_))));
    let mut cfg = RunConfig::new(Command::Tangent);
    cfg.tangent.as_mut().unwrap().set = "/nonexistent/points.txt".into();
    assert!(matches!(execute(&cfg), Err(RunError::Input(_))));
}

#[test]
fn cutoff_table_matches_direct_evaluation() {
    let mut cfg = RunConfig::new(Command::Cutoff);
    *cfg.cutoff.as_mut().unwrap() = CutoffSection { delta: 0.1, eps: 0.5, order: 2, samples: 11, certify: true };
    let out = execute(&cfg).unwrap();
    let t = out.table.as_ref().unwrap();
    assert_eq!(t.header, ["r", "tau", "d1", "d2"]);
    assert_eq!(t.rows.len(), 11);
    let c = Cutoff::new(0.1, 0.5).unwrap();
    for row in &t.rows {
        let j = c.eval(row[0], 2);
        assert_eq!(&row[1..], &[j.value(), j.deriv(1), j.deriv(2)]);
    }
    assert_eq!(t.rows[0][0], 0.025);
    assert!((t.rows[10][0] - 1.0).abs() < 1e-15);
    assert!(out.report.certified);
    assert_eq!(out.report.result["bounds"].as_array().unwrap().len(), 2);
    let csv = t.to_csv();
    assert!(csv.starts_with("r,tau,d1,d2\n0.025,1,0,0\n"));
}

#[test]
fn report_is_reloadable_and_echoes_the_config() {
    let mut cfg = RunConfig::new(Command::Cover);
    cfg.cover.as_mut().unwrap().eps = 0.25;
    let out = execute(&cfg).unwrap();
    let text = out.report_json();
    let back: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(back["command"], "cover");
    let echoed: RunConfig = serde_json::from_value(back["input"].clone()).unwrap();
    assert_eq!(echoed, RunConfig { output: Default::default(), ..cfg });
    assert_eq!(back["result"]["multiplicity_ok"], true);
    assert!(back.get("wall_clock_s").is_none());
}

#[test]
fn emit_writes_table_before_report() {
    let out = execute(&RunConfig::new(Command::Cover)).unwrap();
    let mut buf = Vec::new();
    out.emit(None, None, &mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    let brace = s.find('{').unwrap();
    assert!(s.starts_with("x,y\n"));
    assert_eq!(&s[..brace], out.table.as_ref().unwrap().to_csv());
    assert_eq!(&s[brace..], out.report_json());
}

#[test]
fn tangent_inconclusive_is_uncertified() {
    let dir = std::env::temp_dir().join(format!("flexlab-config-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pts.txt");
    std::fs::write(&path, "# two far-apart points\n0 0\n5 5\n").unwrap();
    let mut cfg = RunConfig::new(Command::Tangent);
    let s = cfg.tangent.as_mut().unwrap();
    s.set = path.to_string_lossy().into_owned();
    s.point = vec![0.0, 0.0];
    let out = execute(&cfg).unwrap();
    assert!(!out.report.certified);
    assert_eq!(out.exit_code(), 1);
    std::fs::write(&path, "0 0\n1 x\n").unwrap();
    let err = execute(&cfg).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
    std::fs::remove_dir_all(&dir).unwrap();
}
