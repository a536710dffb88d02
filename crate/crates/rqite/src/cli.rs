//! Command-line front end. Every subcommand prints one JSON report on
//! stdout; exit codes are 0 on success, 1 on domain errors and 2 on usage
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::caps::Caps;
use crate::continuation::{
    continuation_order, continued_log_partition, select_with_nu, zero_free_certificate, ContinuationOptions,
};
use crate::error::{Error, Result};
use crate::expansion::{compute_moments, estimate_partition, BackendKind, ExpansionOptions, MomentPropagator};
use crate::graph::{beta_star, build_graph, cluster_count_check, enumerate_connected_clusters};
use crate::hadamard::{
    cauchy_norm, estimate_z, sample_count, truncation_time, HadamardSimulator, McMode, McSampleSet, SampleSpec,
};
use crate::hamiltonian::{
    conjugate_by_circuit, normalize_hamiltonian, parse_hamiltonian, LocalHamiltonian, NormMode, ParseOptions,
    Pauli, PauliString, ProductState, SemiClassicalState, ShallowCircuit,
};
use crate::oracle::spectrum;
use crate::rqite::{scan, RqiteConfig};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "RQITE_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "rqite", version, about = "Ground-state energy estimation by residue scans of imaginary-time partition functions")]
struct Cli {
    /// Render the result as an aligned key/value table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    timing: bool,
    /// Key-value config file (`caps.<name> = N`, `workers = N`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; overrides the config file and RQITE_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the residue scan for E0.
    Estimate(EstimateArgs),
    /// Estimate one partition function D_β(H − x).
    Partition(PartitionArgs),
    /// Exact spectrum summary for a Hamiltonian and guiding state.
    Oracle(OracleArgs),
    /// Connected-cluster counts against their combinatorial bound.
    Clusters(ClustersArgs),
    /// Standalone Monte-Carlo estimator.
    Mc(McArgs),
    /// Continued log-partition function beyond β*.
    Continue(ContinueArgs),
    /// Timing sweeps for cluster enumeration and moment propagation.
    Bench(BenchArgs),
    /// Run the built-in example checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BackendArg {
    Exact,
    Cluster,
    Mc,
    Continuation,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => BackendKind::Exact,
            BackendArg::Cluster => BackendKind::Cluster,
            BackendArg::Mc => BackendKind::HadamardMc,
            BackendArg::Continuation => BackendKind::Continuation,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormalizeArg {
    None,
    Exact,
    Bound,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Expectation,
    Bernoulli,
}

impl From<ModeArg> for McMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Expectation => McMode::Expectation,
            ModeArg::Bernoulli => McMode::Bernoulli,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Hamiltonian text file.
    #[arg(long)]
    hamiltonian: PathBuf,
    /// Guiding-state JSON file; defaults to |0…0⟩.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Circuit JSON file; H is replaced by U†HU.
    #[arg(long)]
    circuit: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    gap: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true)]
    ea: f64,
    #[arg(long, allow_hyphen_values = true)]
    eb: f64,
    #[arg(long, value_enum, default_value = "exact")]
    backend: BackendArg,
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rescale H before the scan; energies are given and reported in the
    /// original units.
    #[arg(long, value_enum, default_value = "none")]
    normalize: NormalizeArg,
    #[arg(long, value_enum, default_value = "expectation")]
    mode: ModeArg,
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta_im: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, value_enum, default_value = "cluster")]
    backend: BackendArg,
    #[arg(long, default_value_t = 0.01)]
    trunc_eps: f64,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long, value_enum, default_value = "expectation")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Include every eigenvalue and weight.
    #[arg(long)]
    levels: bool,
}

#[derive(Args, Debug, Serialize)]
struct ClustersArgs {
    #[arg(long)]
    hamiltonian: PathBuf,
    #[arg(long, default_value_t = 3)]
    max_m: usize,
    /// Include the clusters themselves as term-index lists.
    #[arg(long)]
    list: bool,
}

#[derive(Args, Debug, Serialize)]
struct McArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    beta: f64,
    /// Energy shift x in e^{−β|H − x|}.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, default_value_t = 0.01)]
    trunc_eps: f64,
    /// Sample count; defaults to the count for --stat-eps and --mu.
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    stat_eps: f64,
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, value_enum, default_value = "expectation")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ContinueArgs {
    #[arg(long)]
    hamiltonian: PathBuf,
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift: f64,
    /// Series order; chosen from --eps when absent.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Disk radius ν in (1, ν′); the midpoint by default.
    #[arg(long)]
    nu: Option<f64>,
    /// Ground-space weight of |0…0⟩; computed exactly when absent.
    #[arg(long)]
    p0: Option<f64>,
    /// Spectral gap; computed exactly when absent.
    #[arg(long)]
    gap: Option<f64>,
    /// Amplitude-floor term added to F_max.
    #[arg(long, default_value_t = 0.0)]
    poly_n: f64,
    /// Multiplier on |S| in the order formula.
    #[arg(long, default_value_t = 1.0)]
    poly_s: f64,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Benchmark spec file (key-value).
    #[arg(long)]
    spec: PathBuf,
    /// Also write the table as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    version: &'static str,
    config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    inputs: Vec<InputHash>,
    result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Value>,
}

struct Context {
    caps: Caps,
    workers: usize,
    inputs: Vec<InputHash>,
}

impl Context {
    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| Error::InvalidInput(format!("{} is not UTF-8", path.display())))
    }

    fn hamiltonian(&mut self, path: &Path) -> Result<LocalHamiltonian> {
        let text = self.read(path)?;
        Ok(parse_hamiltonian(&text, &ParseOptions::default())?.hamiltonian)
    }

    fn inputs(&mut self, args: &InputArgs) -> Result<(LocalHamiltonian, SemiClassicalState)> {
        let mut h = self.hamiltonian(&args.hamiltonian)?;
        if let Some(c) = &args.circuit {
            let circuit = ShallowCircuit::from_json(&self.read(c)?)?;
            h = conjugate_by_circuit(&h, &circuit, self.caps.circuit_terms)?;
        }
        let psi = match &args.state {
            Some(p) => SemiClassicalState::from_json(&self.read(p)?)?,
            None => SemiClassicalState::single(ProductState::zeros(h.n_qubits())),
        };
        if psi.n_qubits() != h.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: h.n_qubits(),
                got: psi.n_qubits(),
            });
        }
        Ok((h, psi))
    }
}

/// Parses `key = value` lines with `#` comments.
fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key = value, got {body:?}"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn resolve_context(cli: &Cli) -> Result<Context> {
    let mut caps = Caps::default();
    let mut workers = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(1usize);
    let mut inputs = Vec::new();
    if let Some(path) = &cli.config {
        let bytes = std::fs::read(path)?;
        inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        });
        let entries = parse_kv(&String::from_utf8_lossy(&bytes))?;
        for (k, v) in &entries {
            if k == "workers" {
                workers = v
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("workers = {v:?} is not an integer")))?;
            } else if !k.starts_with("caps.") {
                return Err(Error::InvalidInput(format!("unknown config key {k:?}")));
            }
        }
        caps.apply_overrides(entries.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    }
    if let Some(w) = cli.workers {
        workers = w;
    }
    Ok(Context {
        caps,
        workers: workers.max(1),
        inputs,
    })
}

fn complex_json(prefix: &str, z: Complex64) -> [(String, Value); 2] {
    [
        (format!("{prefix}_re"), json!(z.re)),
        (format!("{prefix}_im"), json!(z.im)),
    ]
}

fn cmd_estimate(ctx: &mut Context, a: &EstimateArgs) -> Result<Value> {
    let (h, psi) = ctx.inputs(&a.input)?;
    let (h, scale) = match a.normalize {
        NormalizeArg::None => (h, 1.0),
        NormalizeArg::Exact => normalize_hamiltonian(&h, NormMode::Exact, &ctx.caps)?,
        NormalizeArg::Bound => normalize_hamiltonian(&h, NormMode::Bound, &ctx.caps)?,
    };
    let mut cfg = RqiteConfig::new(a.gamma, a.gap / scale, a.eps / scale, a.ea / scale, a.eb / scale, a.backend.into());
    cfg.mu = a.mu;
    cfg.seed = a.seed;
    cfg.mc_mode = a.mode.into();
    cfg.workers = ctx.workers;
    cfg.caps = ctx.caps.clone();
    let res = scan(&h, &psi, &cfg)?;
    Ok(json!({
        "scale": scale,
        "e0_estimate": res.e0_estimate * scale,
        "e_max": res.e_max * scale,
        "scan": res,
    }))
}

fn continuation_result(
    ctx: &Context,
    h: &LocalHamiltonian,
    beta: f64,
    shift: f64,
    order: Option<usize>,
    eps: f64,
    nu: Option<f64>,
    p0_gap: (Option<f64>, Option<f64>),
    opts: &ContinuationOptions,
) -> Result<Value> {
    let (p0, gap) = match p0_gap {
        (Some(p), Some(g)) => (p, g),
        (p, g) => {
            let spec = spectrum(h, &SemiClassicalState::single(ProductState::zeros(h.n_qubits())), &ctx.caps)?;
            (p.unwrap_or(spec.p0), g.unwrap_or(spec.gap))
        }
    };
    let bstar = beta_star(build_graph(h).max_degree());
    let params = select_with_nu(beta, bstar, nu)?;
    let cert = zero_free_certificate(p0, gap, Complex64::new(beta, 0.0))?;
    let choice = continuation_order(&params, eps, h.n_terms(), beta * h.coeff_l1(), opts)?;
    let m = match order {
        Some(m) => m,
        None if choice.feasible => choice.order as usize,
        None => {
            return Err(Error::CapExceeded {
                what: "continuation order",
                limit: ctx.caps.continuation_order,
                actual: choice.order.min(usize::MAX as f64) as usize,
            })
        }
    };
    let est = continued_log_partition(h, shift, &params, m, &cert, opts)?;
    let mut v = serde_json::Map::new();
    v.extend(complex_json("logD", est.log_value));
    v.extend(complex_json("value", est.value));
    v.insert("remainder".into(), json!(est.remainder));
    v.insert("additive_error_bound".into(), json!(est.additive_error_bound));
    v.insert("order".into(), json!(m));
    v.insert("order_choice".into(), json!(choice));
    v.insert("f_max".into(), json!(est.f_max));
    v.insert("params".into(), json!(params));
    v.insert("certificate".into(), json!(cert));
    v.insert("caveat".into(), json!(est.caveat));
    Ok(Value::Object(v))
}

fn mc_set(
    ctx: &Context,
    h: &LocalHamiltonian,
    psi: &SemiClassicalState,
    beta: f64,
    trunc_eps: f64,
    shots: Option<usize>,
    stat_eps: f64,
    mu: f64,
    mode: McMode,
    seed: u64,
) -> Result<McSampleSet> {
    let sim = HadamardSimulator::new(h, psi, &ctx.caps)?;
    let t_max = truncation_time(beta, trunc_eps)?;
    let count = match shots {
        Some(s) => s,
        None => sample_count(cauchy_norm(beta, t_max), stat_eps, 1, mu)?,
    };
    let spec = SampleSpec {
        beta,
        t_max,
        count,
        mode,
        m_points: 1,
        mu,
        seed,
    };
    McSampleSet::generate(&sim, &spec, ctx.workers, &ctx.caps)
}

fn cmd_partition(ctx: &mut Context, a: &PartitionArgs) -> Result<Value> {
    let (h, psi) = ctx.inputs(&a.input)?;
    let beta = Complex64::new(a.beta, a.beta_im);
    let est = match a.backend {
        BackendArg::Exact => {
            let spec = spectrum(&h, &psi, &ctx.caps)?;
            crate::expansion::PartitionEstimate {
                value: spec.partition(a.shift, beta),
                additive_error_bound: 0.0,
                order: 0,
                backend: BackendKind::Exact,
                direct_pairs: 0,
            }
        }
        BackendArg::Cluster => {
            let opts = ExpansionOptions {
                caps: ctx.caps.clone(),
                ..ExpansionOptions::default()
            };
            estimate_partition(&h, a.shift, beta, &psi, a.eps, &opts)?
        }
        BackendArg::Mc => {
            if a.beta_im != 0.0 {
                return Err(Error::InvalidInput("the Monte-Carlo backend needs real β".into()));
            }
            let set = mc_set(ctx, &h, &psi, a.beta, a.trunc_eps, a.shots, a.eps, a.mu, a.mode.into(), a.seed)?;
            estimate_z(&set, a.shift)?
        }
        BackendArg::Continuation => {
            if a.beta_im != 0.0 {
                return Err(Error::InvalidInput("continuation needs real β".into()));
            }
            let opts = ContinuationOptions {
                caps: ctx.caps.clone(),
                ..ContinuationOptions::default()
            };
            return continuation_result(ctx, &h, a.beta, a.shift, None, a.eps, None, (None, None), &opts);
        }
    };
    let mut v = serde_json::Map::new();
    v.extend(complex_json("value", est.value));
    v.insert("additive_error_bound".into(), json!(est.additive_error_bound));
    v.insert("order".into(), json!(est.order));
    v.insert("backend".into(), json!(est.backend));
    v.insert("direct_pairs".into(), json!(est.direct_pairs));
    Ok(Value::Object(v))
}

fn cmd_oracle(ctx: &mut Context, a: &OracleArgs) -> Result<Value> {
    let (h, psi) = ctx.inputs(&a.input)?;
    let spec = spectrum(&h, &psi, &ctx.caps)?;
    let norm = spec.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut v = json!({
        "n_qubits": h.n_qubits(),
        "E0": spec.ground_energy,
        "gap": spec.gap,
        "p0": spec.p0,
        "ground_degeneracy": spec.ground_degeneracy,
        "spectral_norm": norm,
    });
    if a.levels {
        v["eigenvalues"] = json!(spec.eigenvalues);
        v["overlaps"] = json!(spec.overlaps);
    }
    Ok(v)
}

fn cmd_clusters(ctx: &mut Context, a: &ClustersArgs) -> Result<Value> {
    let h = ctx.hamiltonian(&a.hamiltonian)?;
    let g = build_graph(&h);
    let mut counts = Vec::new();
    let mut lists = Vec::new();
    for m in 1..=a.max_m {
        counts.push(cluster_count_check(&g, m, ctx.caps.clusters)?);
        if a.list {
            let cl = enumerate_connected_clusters(&g, m, ctx.caps.clusters)?;
            lists.push(cl.iter().map(|c| c.terms()).collect::<Vec<_>>());
        }
    }
    let mut v = json!({
        "n_terms": h.n_terms(),
        "max_degree": g.max_degree(),
        "effective_degree": g.effective_degree(),
        "beta_star": beta_star(g.max_degree()),
        "counts": counts,
    });
    if a.list {
        v["clusters"] = json!(lists);
    }
    Ok(v)
}

fn cmd_mc(ctx: &mut Context, a: &McArgs) -> Result<Value> {
    let (h, psi) = ctx.inputs(&a.input)?;
    let set = mc_set(ctx, &h, &psi, a.beta, a.trunc_eps, a.shots, a.stat_eps, a.mu, a.mode.into(), a.seed)?;
    let z = estimate_z(&set, a.x)?;
    Ok(json!({
        "Z_re": z.value.re,
        "Z_im": z.value.im,
        "stat_err": set.statistical_error(),
        "tail_err": set.tail_error(),
        "S": set.samples.len(),
        "T": set.t_max,
    }))
}

fn cmd_continue(ctx: &mut Context, a: &ContinueArgs) -> Result<Value> {
    let mut h = ctx.hamiltonian(&a.hamiltonian)?;
    if let Some(c) = &a.circuit {
        let circuit = ShallowCircuit::from_json(&ctx.read(c)?)?;
        h = conjugate_by_circuit(&h, &circuit, ctx.caps.circuit_terms)?;
    }
    let opts = ContinuationOptions {
        caps: ctx.caps.clone(),
        poly_s_multiplier: a.poly_s,
        poly_n: a.poly_n,
    };
    continuation_result(ctx, &h, a.beta, a.shift, a.order, a.eps, a.nu, (a.p0, a.gap), &opts)
}

struct BenchSpec {
    ns: Vec<usize>,
    m: usize,
    orders: Vec<usize>,
    repeats: usize,
    field: f64,
}

fn parse_list(v: &str) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for part in v.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (usize, usize) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            out.extend(a..=b);
        } else {
            out.push(part.parse().ok()?);
        }
    }
    Some(out)
}

fn parse_bench_spec(text: &str) -> Result<BenchSpec> {
    let mut spec = BenchSpec {
        ns: vec![4, 6, 8],
        m: 3,
        orders: vec![4, 8, 16],
        repeats: 3,
        field: 1.0,
    };
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: i + 1, msg };
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key = value, got {body:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        let num = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad integer {v:?}")));
        match k {
            "kind" if v == "chain" => {}
            "kind" => return Err(bad(format!("unknown kind {v:?}"))),
            "n" => spec.ns = parse_list(v).ok_or_else(|| bad(format!("bad list {v:?}")))?,
            "orders" => spec.orders = parse_list(v).ok_or_else(|| bad(format!("bad list {v:?}")))?,
            "m" => spec.m = num(v)?,
            "repeats" => spec.repeats = num(v)?.max(1),
            "field" => spec.field = v.parse().map_err(|_| bad(format!("bad number {v:?}")))?,
            _ => return Err(bad(format!("unknown key {k:?}"))),
        }
    }
    if spec.ns.iter().any(|&n| n < 2) || spec.m == 0 {
        return Err(Error::InvalidInput("bench needs n ≥ 2 and m ≥ 1".into()));
    }
    Ok(spec)
}

/// Transverse-field Ising chain `−Σ Z_i Z_{i+1} − h Σ X_i`.
fn tfim_chain(n: usize, field: f64) -> Result<LocalHamiltonian> {
    let mut terms = Vec::new();
    for q in 0..n - 1 {
        terms.push((-1.0, PauliString::new(n, [(q, Pauli::Z), (q + 1, Pauli::Z)])?));
    }
    for q in 0..n {
        terms.push((-field, PauliString::new(n, [(q, Pauli::X)])?));
    }
    LocalHamiltonian::new(n, terms)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

fn cmd_bench(ctx: &mut Context, a: &BenchArgs) -> Result<Value> {
    let spec = parse_bench_spec(&ctx.read(&a.spec)?)?;
    let mut rows = Vec::new();
    let mut csv = String::from("n,n_terms,m,clusters,enum_mean_s,enum_std_s,order,sparse_len,moment_mean_s,moment_std_s\n");
    for &n in &spec.ns {
        let h = tfim_chain(n, spec.field)?;
        let g = build_graph(&h);
        let mut enum_t = Vec::new();
        let mut count = 0;
        for _ in 0..spec.repeats {
            let t0 = Instant::now();
            count = enumerate_connected_clusters(&g, spec.m, ctx.caps.clusters)?.len();
            enum_t.push(t0.elapsed().as_secs_f64());
        }
        let (em, es) = mean_std(&enum_t);
        let zero = ProductState::zeros(n);
        for &order in &spec.orders {
            let mut mom_t = Vec::new();
            for _ in 0..spec.repeats {
                let t0 = Instant::now();
                compute_moments(&h, &zero, &zero, order, &ctx.caps)?;
                mom_t.push(t0.elapsed().as_secs_f64());
            }
            let mut p = MomentPropagator::new(&h, &zero, &ctx.caps)?;
            for _ in 0..order {
                p.step()?;
            }
            let (mm, ms) = mean_std(&mom_t);
            csv.push_str(&format!(
                "{n},{},{},{count},{em:e},{es:e},{order},{},{mm:e},{ms:e}\n",
                h.n_terms(),
                spec.m,
                p.sparse_len()
            ));
            rows.push(json!({
                "n": n, "n_terms": h.n_terms(), "m": spec.m, "clusters": count,
                "enum_mean_s": em, "enum_std_s": es, "order": order,
                "sparse_len": p.sparse_len(), "moment_mean_s": mm, "moment_std_s": ms,
            }));
        }
    }
    if let Some(path) = &a.csv {
        std::fs::write(path, &csv)?;
    }
    Ok(json!({ "rows": rows, "csv": csv }))
}

fn selftest_checks() -> Vec<(&'static str, bool)> {
    use crate::expansion::{log_amplitude_series, truncation_order};
    use crate::rqite::{derive_parameters, validate_gap_assumption};
    use crate::series::{series_log, TruncatedSeries, LOG_FLOOR};

    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;
    let z = || -> Result<LocalHamiltonian> { Ok(parse_hamiltonian("1 Z0", &ParseOptions::default())?.hamiltonian) };
    let plus = SemiClassicalState::single(ProductState::plus(1));
    let mut checks: Vec<(&'static str, bool)> = Vec::new();

    checks.push(("cauchy_norm(1, 1) = 1/2", close(cauchy_norm(1.0, 1.0), 0.5, 1e-15)));
    checks.push((
        "truncation_time(1, 0.5) = 1",
        truncation_time(1.0, 0.5).is_ok_and(|t| close(t, 1.0, 1e-12)),
    ));
    checks.push(("sample_count(0.9, 0.05, 100, 0.01) = 3434", sample_count(0.9, 0.05, 100, 0.01).ok() == Some(3434)));
    checks.push((
        "derive_parameters(2, 0.1, √0.5)",
        derive_parameters(2.0, 0.1, 0.5f64.sqrt()).is_ok_and(|p| {
            close(p.beta, 1.49787, 1e-5) && close(p.t_max, 25.465, 1e-3) && close(p.xi, 0.087447, 1e-6)
        }),
    ));
    checks.push((
        "gap assumption examples",
        validate_gap_assumption(2.0, 0.1, 0.5f64.sqrt()) && !validate_gap_assumption(0.1, 0.1, 0.5f64.sqrt()),
    ));
    checks.push((
        "continuation params at β = β*",
        select_with_nu(1.0, 1.0, None).is_ok_and(|p| close(p.nu_prime, 1.045166, 1e-6) && close(p.nu, 1.022583, 1e-6)),
    ));
    checks.push((
        "certificate threshold p0 = 1/2",
        zero_free_certificate(0.5, 1.0, Complex64::new(1.0, 0.0)).is_ok_and(|c| c.certified)
            && zero_free_certificate(0.4, 1.0, Complex64::new(1.0, 0.0)).is_ok_and(|c| !c.certified),
    ));
    checks.push((
        "log(1 + z) coefficients",
        series_log(&TruncatedSeries::from_real(&[1.0, 1.0, 0.0, 0.0]), LOG_FLOOR).is_ok_and(|s| {
            [0.0, 1.0, -0.5, 1.0 / 3.0]
                .iter()
                .enumerate()
                .all(|(j, &c)| (s.coeff(j) - Complex64::new(c, 0.0)).norm() < 1e-15)
        }),
    ));
    checks.push((
        "log-series of Z on |+⟩",
        z().and_then(|h| log_amplitude_series(&h, &ProductState::plus(1), &ProductState::plus(1), 4, &Caps::default()))
            .is_ok_and(|s| close(s.coeff(2).re, 0.5, 1e-15) && close(s.coeff(4).re, -1.0 / 12.0, 1e-15)),
    ));
    checks.push((
        "truncation order at β*/2, ε = 1e-3",
        truncation_order(2, 0.5 * beta_star(1), beta_star(1), 1e-3).ok() == Some(12),
    ));
    checks.push((
        "exact D for Z, |+⟩, x = −1, β = 1",
        z().and_then(|h| spectrum(&h, &plus, &Caps::default()))
            .is_ok_and(|s| close(s.partition(-1.0, Complex64::new(1.0, 0.0)).re, 0.5 * (1.0 + (-2f64).exp()), 1e-12)),
    ));
    let cfg = RqiteConfig::new(0.5f64.sqrt(), 2.0, 0.1, -2.0, 0.0, BackendKind::Exact);
    checks.push((
        "scan on Z, |+⟩ lands in [−1.1, −0.9]",
        z().and_then(|h| scan(&h, &plus, &cfg))
            .is_ok_and(|r| (-1.1 - 1e-9..=-0.9 + 1e-9).contains(&r.e0_estimate)),
    ));
    let cfg = RqiteConfig::new(0.5f64.sqrt(), 2.0, 0.1, 0.0, 1.0, BackendKind::Exact);
    checks.push((
        "scan on [0, 1] is exhausted",
        matches!(z().and_then(|h| scan(&h, &plus, &cfg)), Err(Error::ScanExhausted { .. })),
    ));
    checks.push((
        "CNOT conjugation maps Z0 Z1 to Z1",
        (|| -> Result<bool> {
            let h = parse_hamiltonian("1 Z0 Z1", &ParseOptions::default())?.hamiltonian;
            let u = ShallowCircuit::new(2, vec![crate::hamiltonian::Gate::cnot(0, 1)])?;
            let c = conjugate_by_circuit(&h, &u, 100)?;
            Ok(c.n_terms() == 1 && c.terms()[0].op.to_string() == "Z1" && close(c.terms()[0].coeff, 1.0, 1e-12))
        })()
        .unwrap_or(false),
    ));
    checks
}

fn cmd_selftest() -> (Value, bool) {
    let checks = selftest_checks();
    let failed = checks.iter().filter(|c| !c.1).count();
    let list: Vec<Value> = checks.iter().map(|(n, p)| json!({ "name": n, "pass": p })).collect();
    (
        json!({ "checks": list, "passed": checks.len() - failed, "failed": failed }),
        failed == 0,
    )
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        _ => out.push((prefix.to_string(), v.to_string())),
    }
}

fn render_table(v: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    let width = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}\n"))
        .collect()
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Estimate(_) => "estimate",
        Command::Partition(_) => "partition",
        Command::Oracle(_) => "oracle",
        Command::Clusters(_) => "clusters",
        Command::Mc(_) => "mc",
        Command::Continue(_) => "continue",
        Command::Bench(_) => "bench",
        Command::Selftest => "selftest",
    }
}

fn execute(cli: &Cli) -> Result<(RunReport, bool)> {
    let mut ctx = resolve_context(cli)?;
    let start = Instant::now();
    let (args, seed, result, ok) = match &cli.command {
        Command::Estimate(a) => (json!(a), Some(a.seed), cmd_estimate(&mut ctx, a)?, true),
        Command::Partition(a) => (json!(a), Some(a.seed), cmd_partition(&mut ctx, a)?, true),
        Command::Oracle(a) => (json!(a), None, cmd_oracle(&mut ctx, a)?, true),
        Command::Clusters(a) => (json!(a), None, cmd_clusters(&mut ctx, a)?, true),
        Command::Mc(a) => (json!(a), Some(a.seed), cmd_mc(&mut ctx, a)?, true),
        Command::Continue(a) => (json!(a), None, cmd_continue(&mut ctx, a)?, true),
        Command::Bench(a) => (json!(a), None, cmd_bench(&mut ctx, a)?, true),
        Command::Selftest => {
            let (v, ok) = cmd_selftest();
            (json!({}), None, v, ok)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        RunReport {
            command: command_name(&cli.command),
            version: env!("CARGO_PKG_VERSION"),
            config: json!({ "args": args, "caps": ctx.caps, "workers": ctx.workers }),
            seed,
            inputs: ctx.inputs,
            result,
            timing: cli.timing.then(|| json!({ "wall_seconds": elapsed })),
        },
        ok,
    ))
}

/// Runs the CLI on `args` (program name first), writing the report to
/// `out`, and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (value, code) = match execute(&cli) {
        Ok((report, ok)) => (
            serde_json::to_value(&report).expect("report serializes"),
            if ok { 0 } else { 1 },
        ),
        Err(e) => (
            json!({
                "command": command_name(&cli.command),
                "version": env!("CARGO_PKG_VERSION"),
                "error": { "code": e.code(), "message": e.to_string() },
            }),
            1,
        ),
    };
    let text = if cli.pretty {
        render_table(&value)
    } else {
        let mut s = serde_json::to_string(&value).expect("report serializes");
        s.push('\n');
        s
    };
    if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
        return 1;
    }
    code
}
