//! Command-line front end. [`run`] does all the work so tests can drive it
//! without spawning a process.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wrig_core::io::{format_f64, measure_from_json, measure_to_value, to_canonical_json, vector_to_value};
use wrig_core::norms::sphere_sample;
use wrig_core::potentials::{atom_estimate, direction_search, potential_eval};
use wrig_core::projections::{max_subspace_in_kernel, project_measure, project_point};
use wrig_core::rigidity::{alignment_check, dirac_align_construct, isometry_certificate, IsometryCandidate};
use wrig_core::scenarios::{self, Status, SCENARIOS};
use wrig_core::transport::{cost_matrix, solve};
use wrig_core::{AffineSubspace, DiscreteMeasure, Error, NormSpec, Vector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCENARIO_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "wrig",
    version,
    about = "Wasserstein distances, projections and isometry checks for discrete measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// W_p distance between two measures.
    Distance(Pair),
    /// Optimal coupling between two measures.
    Plan(Pair),
    /// Alignment defect of a triple; builds eta when mu is a Dirac mass.
    Align(AlignArgs),
    /// Projection of a measure onto an affine subspace.
    Project(ProjectArgs),
    /// Potential x -> d(mu, delta_x)^p on a planar grid.
    Potential(PotentialArgs),
    /// Atom masses recovered from second differences of the potential.
    Atoms(AtomsArgs),
    /// Direction pair with a non-trivial pairing kernel, or the kernel set
    /// of a projection when --subspace is given.
    KernelSearch(KernelArgs),
    /// Checks whether a candidate map preserves distances on probe pairs.
    Certify(CertifyArgs),
    /// Runs one scenario, or all of them.
    Scenario(ScenarioArgs),
    /// Lists scenario ids.
    ListScenarios(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Norm as inline JSON or @file.
    #[arg(long, default_value = r#"{"kind":"euclidean"}"#)]
    norm: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Pair {
    #[arg(long)]
    mu: String,
    #[arg(long)]
    nu: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long)]
    mu: String,
    #[arg(long)]
    nu: String,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long, default_value_t = wrig_core::rigidity::ALIGN_TOL)]
    tol: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    mu: String,
    /// Subspace `{"base": [...], "directions": [[...]]}` as @file or inline.
    #[arg(long)]
    subspace: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PotentialArgs {
    #[arg(long)]
    mu: String,
    /// Grid `lo,hi,step`, used for both coordinates.
    #[arg(long, default_value = "-3,3,0.1")]
    grid: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AtomsArgs {
    #[arg(long)]
    mu: String,
    /// Extra evaluation points as comma-separated coordinates.
    #[arg(long = "at")]
    at: Vec<String>,
    /// Unit direction of the second differences; a seeded sample by default.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long, default_value_t = 0.25)]
    h0: f64,
    #[arg(long, default_value_t = 0.5)]
    shrink: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 16)]
    grid: usize,
    #[arg(long)]
    subspace: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Candidate as JSON: phi_t {t}, phi_star, rotation {angle} or translation {v}.
    #[arg(long)]
    candidate: String,
    #[arg(long)]
    mu: String,
    /// One probe pair (mu, nu) per occurrence.
    #[arg(long, required = true)]
    nu: Vec<String>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario id, or `all`.
    #[arg(long)]
    id: String,
    #[command(flatten)]
    common: Common,
}

/// Failures mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

/// `body` goes to `--out` or stdout; `note` always goes to stdout.
struct Output {
    body: String,
    note: Option<String>,
    code: i32,
}

impl Output {
    fn ok(body: String) -> Self {
        Output {
            body,
            note: None,
            code: EXIT_OK,
        }
    }
}

type Outcome = Result<Output, Failure>;

/// Parses `argv` (program name first), writes results to `out` or the
/// `--out` file and diagnostics to `err`, and returns the exit code.
pub fn run<O: Write, E: Write>(argv: &[String], out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let target = common(&cli.command).out.clone();
    match dispatch(cli.command) {
        Ok(Output { body, note, code }) => {
            let written = match target {
                Some(path) => fs::write(&path, &body).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out.write_all(body.as_bytes()).map_err(|e| e.to_string()),
            }
            .and_then(|()| match note {
                Some(n) => out.write_all(n.as_bytes()).map_err(|e| e.to_string()),
                None => Ok(()),
            });
            match written {
                Ok(()) => code,
                Err(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                    EXIT_USAGE
                }
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DOMAIN
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Distance(a) | Command::Plan(a) => &a.common,
        Command::Align(a) => &a.common,
        Command::Project(a) => &a.common,
        Command::Potential(a) => &a.common,
        Command::Atoms(a) => &a.common,
        Command::KernelSearch(a) => &a.common,
        Command::Certify(a) => &a.common,
        Command::Scenario(a) => &a.common,
        Command::ListScenarios(c) => c,
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Distance(a) => distance_cmd(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Align(a) => align_cmd(a),
        Command::Project(a) => project_cmd(a),
        Command::Potential(a) => potential_cmd(a),
        Command::Atoms(a) => atoms_cmd(a),
        Command::KernelSearch(a) => kernel_cmd(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Scenario(a) => scenario_cmd(a),
        Command::ListScenarios(_) => {
            let mut text = String::new();
            for s in SCENARIOS {
                text.push_str(&format!("{}\t{}\n", s.id, s.source));
            }
            Ok(Output::ok(text))
        }
    }
}

/// `@path` reads a file, text starting with `{` or `[` is inline JSON and
/// anything else is a path.
fn read_arg(arg: &str) -> Result<String, Failure> {
    let path = match arg.strip_prefix('@') {
        Some(p) => p,
        None if matches!(arg.trim_start().chars().next(), Some('{' | '[')) => return Ok(arg.to_string()),
        None => arg,
    };
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))
}

fn load_measure(arg: &str) -> Result<DiscreteMeasure, Failure> {
    Ok(measure_from_json(&read_arg(arg)?)?)
}

fn load_norm(arg: &str) -> Result<NormSpec, Failure> {
    Ok(NormSpec::from_json(&read_arg(arg)?)?)
}

fn parse_json(arg: &str, what: &str) -> Result<Value, Failure> {
    serde_json::from_str(&read_arg(arg)?).map_err(|e| Failure::Usage(format!("{what}: {e}")))
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("{what} must be comma-separated numbers: {e}")))
}

fn json_out(mut value: Value, seed: u64) -> String {
    if let Value::Object(map) = &mut value {
        map.insert("seed".into(), json!(seed));
    }
    let mut s = to_canonical_json(&value);
    s.push('\n');
    s
}

fn vectors(vs: &[Vector]) -> Value {
    Value::Array(vs.iter().map(vector_to_value).collect())
}

fn distance_cmd(a: Pair) -> Outcome {
    let c = &a.common;
    let (mu, nu, spec) = (load_measure(&a.mu)?, load_measure(&a.nu)?, load_norm(&c.norm)?);
    let r = solve(&mu, &nu, &spec, c.p)?;
    Ok(Output::ok(json_out(
        json!({"distance": r.distance, "cost_p": r.cost_p}),
        c.seed,
    )))
}

fn plan_cmd(a: Pair) -> Outcome {
    let c = &a.common;
    let (mu, nu, spec) = (load_measure(&a.mu)?, load_measure(&a.nu)?, load_norm(&c.norm)?);
    let r = solve(&mu, &nu, &spec, c.p)?;
    if c.format == Format::Csv {
        let cost = cost_matrix(&mu, &nu, &spec, c.p)?;
        return Ok(Output::ok(format!("# seed: {}\n{}", c.seed, r.plan.to_csv(&cost))));
    }
    let mass: Vec<Vec<f64>> = r
        .plan
        .mass
        .row_iter()
        .map(|row| row.iter().copied().collect())
        .collect();
    let value = json!({
        "distance": r.distance,
        "cost_p": r.cost_p,
        "plan": mass,
        "stats": {
            "iterations": r.stats.iterations,
            "status": format!("{:?}", r.stats.status).to_lowercase(),
            "min_reduced_cost": r.stats.min_reduced_cost,
            "certified": r.stats.certified,
        },
    });
    Ok(Output::ok(json_out(value, c.seed)))
}

fn align_cmd(a: AlignArgs) -> Outcome {
    let c = &a.common;
    let (mu, nu, spec) = (load_measure(&a.mu)?, load_measure(&a.nu)?, load_norm(&c.norm)?);
    let (eta, constructed) = match &a.eta {
        Some(e) => (load_measure(e)?, false),
        None if mu.is_dirac() => (dirac_align_construct(&mu.atoms()[0].point, &nu, &spec, c.p)?, true),
        None => return Err(Failure::Usage("--eta is required unless mu is a Dirac mass".into())),
    };
    let r = alignment_check(&mu, &nu, &eta, &spec, c.p, a.tol)?;
    let value = json!({
        "d_mu_nu": r.d_mu_nu,
        "d_nu_eta": r.d_nu_eta,
        "d_mu_eta": r.d_mu_eta,
        "defect": r.defect,
        "aligned": r.aligned,
        "eta": measure_to_value(&eta),
        "eta_constructed": constructed,
    });
    Ok(Output::ok(json_out(value, c.seed)))
}

fn load_subspace(arg: &str) -> Result<AffineSubspace, Failure> {
    Ok(AffineSubspace::from_json(&read_arg(arg)?)?)
}

fn project_cmd(a: ProjectArgs) -> Outcome {
    let c = &a.common;
    let (mu, spec, sub) = (load_measure(&a.mu)?, load_norm(&c.norm)?, load_subspace(&a.subspace)?);
    let image = project_measure(&mu, &sub, &spec, c.p)?;
    let d = wrig_core::transport::distance(&mu, &image, &spec, c.p)?;
    let value = json!({"projection": measure_to_value(&image), "distance": d});
    Ok(Output::ok(json_out(value, c.seed)))
}

fn potential_cmd(a: PotentialArgs) -> Outcome {
    let c = &a.common;
    let (mu, spec) = (load_measure(&a.mu)?, load_norm(&c.norm)?);
    if mu.dim() != 2 {
        return Err(Failure::Domain("grid scans are planar; mu must live in R^2".into()));
    }
    let g = parse_list(&a.grid, "--grid")?;
    let [lo, hi, step] = g[..] else {
        return Err(Failure::Usage("--grid takes lo,hi,step".into()));
    };
    if !(step > 0.0 && hi >= lo) {
        return Err(Failure::Usage("--grid needs lo <= hi and step > 0".into()));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let mut rows = Vec::with_capacity(count * count);
    for i in 0..count {
        for j in 0..count {
            let x = Vector::from_row_slice(&[lo + step * i as f64, lo + step * j as f64]);
            rows.push((x[0], x[1], potential_eval(&mu, &spec, c.p, &x)?));
        }
    }
    if c.format == Format::Csv {
        let mut text = format!("# seed: {}\nx,y,potential\n", c.seed);
        for (x, y, v) in rows {
            text.push_str(&format!("{},{},{}\n", format_f64(x), format_f64(y), format_f64(v)));
        }
        return Ok(Output::ok(text));
    }
    let points: Vec<Value> = rows
        .iter()
        .map(|(x, y, v)| json!({"x": x, "y": y, "potential": v}))
        .collect();
    Ok(Output::ok(json_out(json!({"grid": points}), c.seed)))
}

fn atoms_cmd(a: AtomsArgs) -> Outcome {
    let c = &a.common;
    let (mu, spec) = (load_measure(&a.mu)?, load_norm(&c.norm)?);
    let direction = match &a.direction {
        Some(d) => {
            let v = Vector::from_vec(parse_list(d, "--direction")?);
            if v.norm() == 0.0 {
                return Err(Failure::Usage("--direction must be non-zero".into()));
            }
            &v / v.norm()
        }
        None => sphere_sample(mu.dim(), 1, c.seed)?.remove(0),
    };
    let mut points: Vec<Vector> = mu.points().cloned().collect();
    for s in &a.at {
        points.push(Vector::from_vec(parse_list(s, "--at")?));
    }
    let mut estimates = Vec::with_capacity(points.len());
    for x in &points {
        let est = atom_estimate(&mu, &spec, c.p, x, &direction, a.h0, a.shrink, a.steps)?;
        let seq: Vec<Value> = est.h_sequence.iter().map(|(h, g)| json!({"h": h, "g": g})).collect();
        estimates.push(json!({
            "location": vector_to_value(&est.location),
            "estimate": est.estimate,
            "converged": est.converged,
            "h_sequence": seq,
        }));
    }
    let value = json!({"direction": vector_to_value(&direction), "estimates": estimates});
    Ok(Output::ok(json_out(value, c.seed)))
}

fn kernel_cmd(a: KernelArgs) -> Outcome {
    let c = &a.common;
    let spec = load_norm(&c.norm)?;
    if let Some(s) = &a.subspace {
        let sub = load_subspace(s)?;
        let seeds: Vec<Vector> = sphere_sample(sub.dim(), 8, c.seed)?
            .into_iter()
            .map(|y| project_point(&y, &sub, &spec, c.p).map(|py| &y - py))
            .collect::<Result<_, _>>()?;
        let found = max_subspace_in_kernel(&sub, &spec, c.p, &seeds)?;
        let value = json!({"mode": "projection", "rank": found.rank(), "basis": vectors(found.directions())});
        return Ok(Output::ok(json_out(value, c.seed)));
    }
    let value = match direction_search(&spec, c.p, a.dim, a.grid, c.seed)? {
        Some(d) => json!({
            "mode": "pairing",
            "found": true,
            "v1": vector_to_value(&d.v1),
            "v2": vector_to_value(&d.v2),
            "min_value": d.min_value,
            "max_value": d.max_value,
            "argmin": vector_to_value(&d.argmin),
            "nonconstant": d.nonconstant,
        }),
        None => json!({"mode": "pairing", "found": false}),
    };
    Ok(Output::ok(json_out(value, c.seed)))
}

fn parse_candidate(arg: &str, dim: usize) -> Result<IsometryCandidate, Failure> {
    let v = parse_json(arg, "candidate")?;
    let num = |key: &str| {
        v.get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Failure::Usage(format!("candidate needs a numeric \"{key}\"")))
    };
    match v.get("kind").and_then(Value::as_str) {
        Some("phi_t") => Ok(IsometryCandidate::phi_t(num("t")?, dim)),
        Some("phi_star") => Ok(IsometryCandidate::phi_star(dim)),
        Some("rotation") => Ok(IsometryCandidate::rotation(num("angle")?)),
        Some("translation") => {
            let shift: Vec<f64> = v
                .get("v")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_f64).collect())
                .ok_or_else(|| Failure::Usage("translation needs a vector \"v\"".into()))?;
            if shift.len() != dim {
                return Err(Failure::Domain(format!(
                    "translation has dimension {}, measures {dim}",
                    shift.len()
                )));
            }
            Ok(IsometryCandidate::translation(Vector::from_vec(shift)))
        }
        other => Err(Failure::Usage(format!("unknown candidate kind {other:?}"))),
    }
}

fn certify_cmd(a: CertifyArgs) -> Outcome {
    let c = &a.common;
    let (mu, spec) = (load_measure(&a.mu)?, load_norm(&c.norm)?);
    let cand = parse_candidate(&a.candidate, mu.dim())?;
    let probes =
        a.nu.iter()
            .map(|n| load_measure(n).map(|nu| (mu.clone(), nu)))
            .collect::<Result<Vec<_>, _>>()?;
    let cert = isometry_certificate(&cand, &probes, &spec, c.p, a.tol)?;
    Ok(Output::ok(json_out(cert.to_json(), c.seed)))
}

fn scenario_cmd(a: ScenarioArgs) -> Outcome {
    let c = &a.common;
    if a.id != "all" && !scenarios::scenario_ids().contains(&a.id.as_str()) {
        return Err(Failure::Usage(format!(
            "unknown scenario {:?}; see list-scenarios",
            a.id
        )));
    }
    let results = if a.id == "all" {
        scenarios::run_all(c.seed)
    } else {
        vec![scenarios::run_scenario(&a.id, c.seed)?]
    };
    let code = if results.iter().all(|r| r.status == Status::Pass) {
        EXIT_OK
    } else {
        EXIT_SCENARIO_FAIL
    };
    if a.id == "all" && c.format == Format::Csv {
        return Err(Failure::Usage("scenario results are JSON or a table".into()));
    }
    let mut output = Output::ok(String::new());
    output.code = code;
    if a.id != "all" {
        output.body = to_canonical_json(&results[0]) + "\n";
    } else if c.out.is_some() {
        // JSON for the file, the table for the terminal.
        output.body = to_canonical_json(&results) + "\n";
        output.note = Some(summary_table(&results, c.seed));
    } else {
        output.body = summary_table(&results, c.seed);
    }
    Ok(output)
}

fn summary_table(results: &[scenarios::ScenarioResult], seed: u64) -> String {
    let width = results.iter().map(|r| r.scenario_id.len()).max().unwrap_or(0);
    let mut s = format!("{:<width$}  status\n", "scenario");
    for r in results {
        let status = match r.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
        };
        s.push_str(&format!("{:<width$}  {status}\n", r.scenario_id));
    }
    let passed = results.iter().filter(|r| r.status == Status::Pass).count();
    s.push_str(&format!("{passed}/{} passed (seed {seed})\n", results.len()));
    s
}
