use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use symext::decomp::{extract_edge_state, test_decomposable, Decomposability, EdgeDiagnostics};
use symext::hierarchy::{run_ladder, run_test, DensityMatrix, ExtensionSpec, HierarchyOptions, Verdict};
use symext::io::{
    to_text, write_text, DecompositionRecord, MatrixFile, MatrixKind, PositivityRecord, TestRecord,
};
use symext::posmap::{check_strict_positivity, table1, Direction, PositivityVerdict};
use symext::qlinalg::{frobenius, CMat};
use symext::states::{
    bell_state, choi_state, choi_witness, gisin_state, gisin_witness, maximally_mixed, CATALOG,
};
use symext::witness::{
    evaluate_on_product_states, scale_state, verify_ksos_identity, witness_from_blocks, KsosRecord,
    ProductMinimum, Witness,
};

use crate::config::{CatalogAction, Cli, CliResult, Command, Failure, LevelArgs, RunConfig};

/// Product-state minimum accepted for a valid witness.
const PRODUCT_TOL: f64 = 1e-9;

pub fn run(cli: &Cli) -> CliResult<u8> {
    cli.global.validate()?;
    match &cli.command {
        Command::Catalog { action } => catalog(action),
        command => {
            cli.global.prepare_output()?;
            match command {
                Command::Test { state, level } => test(cli, state, level),
                Command::Ladder { state, k_max, no_ppt, no_reduce } => ladder(cli, state, *k_max, *no_ppt, *no_reduce),
                Command::Sweep { family, from, to, step, alpha, level } => {
                    sweep(cli, family, (*from, *to, *step), *alpha, level)
                }
                Command::Decompose { witness } => decompose(cli, witness),
                Command::Posmap { map, kmax } => posmap(cli, map, *kmax),
                Command::Table1 { kmax } => table(cli, *kmax),
                Command::VerifyWitness { witness, state, report, samples } => {
                    verify_witness(cli, witness, state.as_deref(), report.as_deref(), *samples)
                }
                Command::Catalog { .. } => unreachable!("handled above"),
            }
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a RunConfig<'a>,
    result: T,
}

/// Writes `<verb>-<hash>.json` and returns its path.
fn write_report<T: Serialize>(cli: &Cli, config: &RunConfig, verb: &str, result: T) -> CliResult<PathBuf> {
    let path = cli.global.out.join(format!("{verb}-{}.json", config.hash()));
    let text = to_text(&Envelope { config, result })?;
    write_text(&path, &text)?;
    Ok(path)
}

fn artifact(cli: &Cli, config: &RunConfig, stem: &str, ext: &str) -> PathBuf {
    cli.global.out.join(format!("{stem}-{}.{ext}", config.hash()))
}

fn read_matrix(path: &Path) -> CliResult<MatrixFile> {
    MatrixFile::read(path).map_err(|e| Failure::input(path, e))
}

fn read_state(path: &Path) -> CliResult<DensityMatrix> {
    read_matrix(path)?.to_state().map_err(|e| Failure::input(path, e))
}

fn read_operator(path: &Path) -> CliResult<(CMat, usize, usize)> {
    read_matrix(path)?.to_bipartite_operator().map_err(|e| Failure::input(path, e))
}

fn spec_from(level: &LevelArgs) -> CliResult<ExtensionSpec> {
    Ok(ExtensionSpec::new(level.k, !level.no_ppt, !level.no_reduce)?)
}

fn test(cli: &Cli, state: &Path, level: &LevelArgs) -> CliResult<u8> {
    let rho = read_state(state)?;
    let spec = spec_from(level)?;
    let config = RunConfig::new(cli, &[state])?;
    let report = run_test(&rho, &spec, &cli.global.hierarchy_options())?;
    let record = TestRecord::new(&report)?;
    if let Some(w) = &record.witness {
        let path = artifact(cli, &config, "witness", "mat");
        w.operator.write(&path)?;
        println!("witness: {}", path.display());
    }
    let path = write_report(cli, &config, "test", &record)?;
    println!("verdict: {:?}", report.status);
    println!("margin_t: {}", fmt_opt(report.margin_t()));
    println!("report: {}", path.display());
    Ok(report.status.exit_code() as u8)
}

fn ladder(cli: &Cli, state: &Path, k_max: usize, no_ppt: bool, no_reduce: bool) -> CliResult<u8> {
    let rho = read_state(state)?;
    let base = ExtensionSpec { k: 1, ppt: !no_ppt, reduced: !no_reduce };
    let config = RunConfig::new(cli, &[state])?;
    let reports = run_ladder(&rho, k_max, &base, &cli.global.hierarchy_options())?;
    let records = reports.iter().map(TestRecord::new).collect::<Result<Vec<_>, _>>()?;
    for r in &reports {
        println!("k = {}: {:?} (margin_t {})", r.spec.k, r.status, fmt_opt(r.margin_t()));
    }
    let path = write_report(cli, &config, "ladder", &records)?;
    println!("report: {}", path.display());
    let last = reports.last().expect("at least one level runs");
    Ok(last.status.exit_code() as u8)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    parameter: f64,
    verdict: Option<Verdict>,
    margin_t: Option<f64>,
    error: Option<String>,
}

/// `from, from + step, …` up to `to` inclusive, computed without accumulation.
fn grid(from: f64, to: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && step > 0.0 && step.is_finite()) || to < from {
        return Err(Failure::usage("need finite --from <= --to and a positive --step"));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(Failure::usage(format!("{n} grid points requested")));
    }
    Ok((0..n).map(|i| ((from + i as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Applies `f` to every item on at most `jobs` scoped worker threads, preserving order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn sweep(cli: &Cli, family: &str, range: (f64, f64, f64), alpha: f64, level: &LevelArgs) -> CliResult<u8> {
    let make: Box<dyn Fn(f64) -> symext::Result<DensityMatrix> + Sync> = match family {
        "choi" => Box::new(choi_state),
        "gisin" => Box::new(gisin_state),
        "choi-gamma" => {
            let base = choi_state(alpha)?;
            Box::new(move |g| scale_state(&base, g).map(|(s, _)| s))
        }
        other => return Err(Failure::usage(format!("unknown family `{other}` (choi, gisin, choi-gamma)"))),
    };
    let spec = spec_from(level)?;
    let points = grid(range.0, range.1, range.2)?;
    let config = RunConfig::new(cli, &[])?;
    let options: HierarchyOptions = cli.global.hierarchy_options();
    let rows = parallel_map(&points, cli.global.jobs, |&p| {
        match make(p).and_then(|rho| run_test(&rho, &spec, &options)) {
            Ok(r) => SweepRow { parameter: p, verdict: Some(r.status), margin_t: r.margin_t(), error: None },
            Err(e) => SweepRow { parameter: p, verdict: None, margin_t: None, error: Some(e.to_string()) },
        }
    });
    let header = if family == "choi-gamma" { "gamma" } else { "alpha" };
    let mut table = format!("{header}\tverdict\tmargin_t\n");
    for r in &rows {
        let verdict = r.verdict.map_or_else(|| format!("error: {}", r.error.as_deref().unwrap_or("")), |v| format!("{v:?}"));
        writeln!(table, "{}\t{verdict}\t{}", r.parameter, fmt_opt(r.margin_t)).expect("string write");
    }
    let table_path = artifact(cli, &config, "sweep", "tsv");
    write_text(&table_path, &table)?;
    write_report(cli, &config, "sweep", &rows)?;
    print!("{table}");
    println!("table: {}", table_path.display());
    if rows.iter().any(|r| r.error.is_some()) {
        return Err(Failure::internal("some sweep points failed"));
    }
    Ok(0)
}

#[derive(Serialize)]
struct DecomposeResult {
    report: DecompositionRecord,
    edge: Option<EdgeDiagnostics>,
}

fn decompose(cli: &Cli, witness: &Path) -> CliResult<u8> {
    let (z, d_a, d_b) = read_operator(witness)?;
    let config = RunConfig::new(cli, &[witness])?;
    let report = test_decomposable(&z, d_a, d_b)?;
    let edge = if report.verdict == Decomposability::Indecomposable {
        let (rho, diag) = extract_edge_state(&report)?;
        let path = artifact(cli, &config, "rho-opt", "mat");
        MatrixFile::state(&rho).write(&path)?;
        println!("rho_opt: {}", path.display());
        Some(diag)
    } else {
        None
    };
    let path = write_report(cli, &config, "decompose", DecomposeResult { report: DecompositionRecord::new(&report)?, edge })?;
    println!("verdict: {:?}", report.verdict);
    println!("epsilon: {:.10e}", report.epsilon);
    println!("report: {}", path.display());
    Ok(match report.verdict {
        Decomposability::Decomposable => 0,
        Decomposability::Indecomposable => 1,
        Decomposability::Marginal => 2,
    })
}

fn posmap(cli: &Cli, map_path: &Path, kmax: usize) -> CliResult<u8> {
    let file = read_matrix(map_path)?;
    let map = file.to_map().map_err(|e| Failure::input(map_path, e))?;
    let config = RunConfig::new(cli, &[map_path])?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.global.seed);
    let report = check_strict_positivity(&map, kmax, &mut rng)?;
    let code = match report.verdict {
        PositivityVerdict::CompletelyPositive | PositivityVerdict::StrictlyPositiveCertified { .. } => 0,
        PositivityVerdict::NotPositive { .. } => 1,
        PositivityVerdict::Undetermined { .. } => 2,
    };
    println!("verdict: {:?}", report.verdict);
    println!("choi_min_eigenvalue: {:.10e}", report.choi_min_eigenvalue);
    let record = PositivityRecord { map: MatrixFile::map(&map, file.direction.unwrap_or(Direction::AToB))?, k_max: kmax, report };
    let path = write_report(cli, &config, "posmap", &record)?;
    println!("report: {}", path.display());
    Ok(code)
}

fn table(cli: &Cli, kmax: usize) -> CliResult<u8> {
    let config = RunConfig::new(cli, &[])?;
    let rows = table1(kmax)?;
    let mut text = String::from("k\talpha_k\n");
    for (k, a) in &rows {
        writeln!(text, "{k}\t{a:.6}").expect("string write");
    }
    let path = artifact(cli, &config, "table1", "tsv");
    write_text(&path, &text)?;
    write_report(cli, &config, "table1", &rows)?;
    print!("{text}");
    println!("table: {}", path.display());
    Ok(0)
}

fn catalog(action: &CatalogAction) -> CliResult<u8> {
    match action {
        CatalogAction::List => {
            for (name, description) in CATALOG {
                println!("{name:<16} {description}");
            }
            Ok(0)
        }
        CatalogAction::Emit { name, param, dims, output } => {
            let need = || param.ok_or_else(|| Failure::usage(format!("`{name}` needs --param")));
            let file = match name.as_str() {
                "choi" => MatrixFile::state(&choi_state(need()?)?),
                "gisin" => MatrixFile::state(&gisin_state(need()?)?),
                "bell" => MatrixFile::state(&bell_state()),
                "maximally-mixed" => {
                    let (a, b) = dims.as_ref().map_or((3, 3), |d| (d[0], d[1]));
                    MatrixFile::state(&maximally_mixed(a, b)?)
                }
                "choi-witness" => MatrixFile::operator(&choi_witness(), vec![3, 3])?,
                "gisin-witness" => MatrixFile::operator(&gisin_witness(), vec![4, 4])?,
                other => return Err(Failure::usage(format!("unknown catalog entry `{other}`"))),
            };
            match output {
                Some(path) => file.write(path)?,
                None => print!("{}", file.to_text()),
            }
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct WitnessCheck {
    witness: MatrixFile,
    product_minimum: ProductMinimum,
    state_value: Option<f64>,
    /// ‖W_file − W_blocks‖_F for the operator rebuilt from the report's dual blocks.
    reconstruction_error: Option<f64>,
    ksos: Option<KsosRecord>,
    passed: bool,
}

fn verify_witness(cli: &Cli, path: &Path, state: Option<&Path>, report: Option<&Path>, samples: usize) -> CliResult<u8> {
    let (w, d_a, d_b) = read_operator(path)?;
    let witness = Witness::from_operator(w, d_a, d_b).map_err(|e| Failure::input(path, e))?;
    let mut inputs = vec![path];
    inputs.extend(state);
    inputs.extend(report);
    let config = RunConfig::new(cli, &inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.global.seed);
    let product_minimum = evaluate_on_product_states(&witness.operator, d_a, d_b, samples, true, &mut rng)?;
    let mut passed = product_minimum.value >= -PRODUCT_TOL;
    let state_value = match state {
        Some(p) => {
            let rho = read_state(p)?;
            if (rho.d_a(), rho.d_b()) != (d_a, d_b) {
                return Err(Failure::usage("state and witness dimensions differ"));
            }
            let v = witness.value(rho.matrix());
            passed &= v < 0.0;
            Some(v)
        }
        None => None,
    };
    let (reconstruction_error, ksos) = match report {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            let record: TestRecord = serde_json::from_value(value.get("result").cloned().unwrap_or(value))
                .map_err(|e| Failure::usage(format!("{}: not a test report: {e}", p.display())))?;
            let zs = record
                .dual_block_matrices()
                .ok_or_else(|| Failure::usage(format!("{}: report carries no dual blocks", p.display())))?;
            let rebuilt = witness_from_blocks(d_a, d_b, &record.spec, &zs)?;
            let err = frobenius(&(&rebuilt.operator - &witness.operator));
            let k = verify_ksos_identity(&rebuilt, cli.global.hierarchy_options().ksos_samples, cli.global.seed)?;
            passed &= k.passed && err < 1e-8;
            (Some(err), Some(k))
        }
        None => (None, None),
    };
    println!("product_minimum: {:.10e}", product_minimum.value);
    if let Some(v) = state_value {
        println!("state_value: {v:.10e}");
    }
    if let Some(k) = &ksos {
        println!("ksos_residual: {:.3e}", k.max_relative_residual);
    }
    let check = WitnessCheck {
        witness: MatrixFile::from_matrix(&witness.operator, vec![d_a, d_b], MatrixKind::Operator)?,
        product_minimum,
        state_value,
        reconstruction_error,
        ksos,
        passed,
    };
    let out = write_report(cli, &config, "verify-witness", &check)?;
    println!("passed: {passed}");
    println!("report: {}", out.display());
    Ok(if passed { 0 } else { 1 })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |t| format!("{t:.6e}"))
}
