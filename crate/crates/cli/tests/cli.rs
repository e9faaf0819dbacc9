use std::process::{Command, Output};

fn quadham(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadham")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_record(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(err.lines().last().unwrap()).expect("stderr ends with a JSON record")
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn mu_matches_closed_form_columns() {
    let o = quadham(&["mu", "--model", "caldirola_kanai", "--omega0", "1", "--lambda", "0.1", "--t-end", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("t,mu,mu_prime,mu_closed,mu_prime_closed\n"));
    let rows = rows(&text);
    assert_eq!(rows.len(), 101);
    for r in rows {
        assert!((r[1] - r[3]).abs() < 1e-8 && (r[2] - r[4]).abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn green_prints_re_then_im() {
    let o = quadham(&["green", "--model", "modified_oscillator", "--t", "0.5", "--x", "0.3", "--y", "-0.2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.find("\"re\"").unwrap() < text.find("\"im\"").unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let (re, im) = (v["re"].as_f64().unwrap(), v["im"].as_f64().unwrap());
    // |G| = (2π|μ|)^{-1/2}, with μ taken from the kernel subcommand
    let k = quadham(&["kernel", "--model", "modified_oscillator", "--t", "0.5"]);
    let mu = rows(&stdout(&k))[0][1];
    let modulus = (2.0 * std::f64::consts::PI * mu.abs()).powf(-0.5);
    assert!(((re * re + im * im).sqrt() - modulus).abs() < 1e-12);
}

#[test]
fn list_models_has_ten_entries_and_constraints() {
    let o = quadham(&["list_models"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 11);
    let o = quadham(&["list_models", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let models = v.as_array().unwrap();
    assert_eq!(models.len(), 10);
    let mpo = models.iter().find(|m| m["id"] == "modified_parametric").unwrap();
    assert!(mpo["constraint"].as_str().unwrap().contains("delta != 0"));
}

#[test]
fn validation_errors_exit_2_with_record() {
    let o = quadham(&["green", "--model", "modified_parametric", "--delta", "0", "--t", "0.5", "--x", "0", "--y", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["module"], "coefficients");
    assert_eq!(rec["code"], "invalid_model_params");

    let o = quadham(&["mu", "--model", "nonesuch"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["code"], "invalid_input");

    let o = quadham(&["no_such_task"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["code"], "usage");
}

#[test]
fn caustic_exits_3() {
    let o = quadham(&["kernel", "--model", "simple_harmonic", "--t", "3.141592653589793"]);
    assert_eq!(o.status.code(), Some(3));
    let rec = error_record(&o);
    assert_eq!(rec["module"], "characteristic");
    assert_eq!(rec["code"], "caustic_encountered");
}

#[test]
fn config_file_with_flag_override_and_byte_identical_output() {
    let dir = std::env::temp_dir().join(format!("quadham-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let ini = dir.join("run.ini");
    std::fs::write(&ini, "[model]\nmodel = united\nomega0 = 1\nlambda = 0.2\nmu = 0.1\n[numeric]\nt_end = 2\nsamples = 20\n").unwrap();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for out in [&a, &b] {
        let o = quadham(&["moments", "--config", ini.to_str().unwrap(), "--mu", "0.05", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let last = rows(&String::from_utf8(ta).unwrap()).pop().unwrap();
    // the flag wins: norm decays as e^{-μt} with μ = 0.05
    assert!((last[4] - (-0.05f64 * 2.0).exp()).abs() < 1e-9, "{last:?}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_stacks_parameter_columns() {
    let o = Command::new(env!("CARGO_BIN_EXE_quadham"))
        .args(["invariant", "--model", "caldirola_kanai", "--lambda", "0.1,0.2,0.3", "--t-end", "1", "--samples", "4"])
        .env("QUADHAM_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("omega0,lambda,mu,delta,t,a,b,c,d,expectation\n"));
    let rows = rows(&text);
    assert_eq!(rows.len(), 15);
    assert_eq!(rows[0][1], 0.1);
    assert_eq!(rows[14][1], 0.3);
}

#[test]
fn bad_thread_count_is_validation_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_quadham"))
        .args(["moments", "--model", "simple_harmonic"])
        .env("QUADHAM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_propagation_reports_moments() {
    let o = quadham(&[
        "propagate", "--model", "simple_harmonic", "--method", "grid", "--n", "512", "--t-end", "0.1", "--samples", "2",
    ]);
    assert!(o.status.success());
    let rows = rows(&stdout(&o));
    assert!(rows.iter().all(|r| (r[1] - 1.0).abs() < 1e-8));
}

#[test]
fn verify_all_rejects_single_model() {
    let o = quadham(&["verify_all", "--model", "united"]);
    assert_eq!(o.status.code(), Some(2));
}
