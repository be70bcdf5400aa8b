use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use enpar::bailout::{as_k_bailout, compute_bounds, Pipeline};
use enpar::gadgets::{assemble_g2, energy_trade, Transform};
use enpar::gain::{assemble_g2_full, build_g1, ssg_as_gain, synthesize_g3, verify_conp_gain, verify_g3, G3Certificate};
use enpar::generate::{generate, GenParams};
use enpar::oracle::CappedSolution;
use enpar::solver::Decider;
use enpar::synthesis::{exact_validate, simulate, Adversary, ModeStrategy, SynthesisOptions, Synthesizer};
use enpar::{parse_game, to_json, to_text, Caps, Error, Game, MdStrategy, Owner, StateId, StateSet};

#[derive(Parser)]
#[command(name = "enpar", version, about = "Almost-sure energy-parity games on simple stochastic games")]
struct Cli {
    /// Resource caps, e.g. `product=100000,strategies=64`; overrides ENPAR_CAPS.
    #[arg(long, global = true)]
    caps: Option<String>,
    /// Override the storage bound L.
    #[arg(long, global = true)]
    l: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    EnergyParity,
    Bailout,
    Gain,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    GPrime,
    GDoubleprime,
    G1,
    G2,
    G3,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide an objective for one state or all states.
    Solve(SolveArgs),
    /// Least initial credit for almost-sure energy-parity.
    MinCredit {
        game: PathBuf,
        #[arg(long)]
        state: Option<usize>,
    },
    /// Emit an intermediate game with a provenance sidecar.
    Transform {
        game: PathBuf,
        #[arg(long, value_enum)]
        to: Target,
        /// Game output file; the sidecar goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Build a three-mode witness strategy.
    Synthesize {
        game: PathBuf,
        #[arg(long)]
        state: usize,
        #[arg(long, default_value_t = 0)]
        k: u64,
        #[arg(long)]
        out: PathBuf,
        /// Never fall back to the Start-only strategy.
        #[arg(long)]
        three_mode: bool,
    },
    /// Monte Carlo runs of a synthesized strategy.
    Simulate {
        game: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        /// Minimizer strategy file; uniform choices when absent.
        #[arg(long)]
        adversary: Option<PathBuf>,
    },
    /// Check a Gain certificate.
    CheckCert(CertArgs),
    /// Differential test of the main solver against the capped oracle.
    OracleCompare(CompareArgs),
    /// Print a seeded random game.
    Generate(GenArgs),
}

#[derive(Args)]
struct SolveArgs {
    game: PathBuf,
    #[arg(long, value_enum, default_value_t = Objective::EnergyParity)]
    objective: Objective,
    #[arg(long)]
    state: Option<usize>,
    #[arg(long, default_value_t = 0)]
    k: u64,
    /// Exit with status 1 when the verdict is "no".
    #[arg(long, requires = "state")]
    expect: bool,
    /// With `--objective gain`: write a G3 certificate.
    #[arg(long)]
    emit_np: Option<PathBuf>,
    /// With `--objective gain`: write the minimizer strategy refuting Gain.
    #[arg(long)]
    emit_conp: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "cert")]
struct CertKind {
    #[arg(long)]
    np: Option<PathBuf>,
    #[arg(long)]
    conp: Option<PathBuf>,
}

#[derive(Args)]
struct CertArgs {
    game: PathBuf,
    #[command(flatten)]
    kind: CertKind,
    #[arg(long)]
    state: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    max_states: usize,
    #[arg(long, default_value_t = 2)]
    max_reward: i64,
    #[arg(long, default_value_t = 2)]
    max_priority: u32,
    #[arg(long, default_value_t = 0.4)]
    density: f64,
    /// Largest credit queried per state.
    #[arg(long, default_value_t = 3)]
    k_max: u64,
    /// Oracle energy cap; K + L + 1 of each game when absent.
    #[arg(long)]
    b: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    max_states: usize,
    #[arg(long, default_value_t = 2)]
    max_reward: i64,
    #[arg(long, default_value_t = 2)]
    max_priority: u32,
    #[arg(long, default_value_t = 0.4)]
    density: f64,
    /// Use exactly `max_states` states.
    #[arg(long)]
    exact_size: bool,
}

struct Failure {
    code: &'static str,
    message: String,
    status: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let status = match e {
            Error::Parse { .. } | Error::InvalidGame(_) | Error::Precondition(_) => 2,
            Error::ResourceCap { .. } => 3,
            Error::Infeasible(_) | Error::Internal(_) => 4,
        };
        Failure { code: e.code(), message: e.to_string(), status }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: "E_USAGE", message: message.into(), status: 2 }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: "E_IO", message: format!("{}: {e}", path.display()), status: 2 }
}

type Res<T> = std::result::Result<T, Failure>;

/// What a subcommand prints, plus whether a `--expect` query failed.
struct Outcome {
    value: Value,
    expect_failed: bool,
    raw: Option<String>,
}

impl Outcome {
    fn json(value: Value) -> Outcome {
        Outcome { value, expect_failed: false, raw: None }
    }
}

fn read(path: &Path) -> Res<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

fn write(path: &Path, text: &str) -> Res<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn load_game(path: &Path) -> Res<Game> {
    Ok(parse_game(&read(path)?)?)
}

fn state_arg(g: &Game, s: usize) -> Res<StateId> {
    if s >= g.num_states() {
        return Err(usage(format!("state {s} is not in the game ({} states)", g.num_states())));
    }
    Ok(StateId(s))
}

fn ids(set: &StateSet) -> Vec<usize> {
    set.iter().map(|s| s.0).collect()
}

fn verdicts(g: &Game, win: &StateSet) -> Value {
    let m: BTreeMap<String, bool> = g.ids().map(|s| (s.0.to_string(), win.contains(&s))).collect();
    json!(m)
}

fn strategy_json(tau: &MdStrategy) -> Value {
    let m: BTreeMap<String, usize> = tau.choice.iter().map(|(s, e)| (s.0.to_string(), *e)).collect();
    json!({ "owner": tau.owner.keyword(), "choice": m })
}

fn parse_strategy(path: &Path, owner: Owner) -> Res<MdStrategy> {
    let text = read(path)?;
    let v: Value = serde_json::from_slice(&text).map_err(|e| Failure {
        code: "E_PARSE",
        message: format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()),
        status: 2,
    })?;
    let table = v.get("choice").unwrap_or(&v);
    let obj = table.as_object().ok_or_else(|| usage("strategy must map states to edge indices"))?;
    let mut out = MdStrategy::empty(owner);
    for (k, e) in obj {
        let s: usize = k.parse().map_err(|_| usage(format!("`{k}` is not a state id")))?;
        let e = e.as_u64().ok_or_else(|| usage(format!("edge at state {s} is not an index")))?;
        out.choice.insert(StateId(s), e as usize);
    }
    Ok(out)
}

fn solve(a: &SolveArgs, caps: &Caps) -> Res<Outcome> {
    let g = load_game(&a.game)?;
    let state = a.state.map(|s| state_arg(&g, s)).transpose()?;
    let (mut value, win) = match a.objective {
        Objective::EnergyParity => {
            let d = Decider::new(&g, caps)?;
            let mut win = StateSet::new();
            for s in g.ids() {
                if d.decide(s, a.k)? {
                    win.insert(s);
                }
            }
            let v = json!({
                "objective": "energy-parity",
                "k": a.k,
                "W": ids(&d.w),
                "trace": d.trace,
                "bounds": d.bounds,
                "verdicts": verdicts(&g, &win),
            });
            (v, win)
        }
        Objective::Bailout => {
            let sol = as_k_bailout(&g, a.k, caps)?;
            let v = json!({
                "objective": "bailout",
                "k": a.k,
                "k_used": sol.k,
                "bounds": sol.bounds,
                "verdicts": verdicts(&g, &sol.win),
            });
            (v, sol.win)
        }
        Objective::Gain => {
            let sol = ssg_as_gain(&g, caps)?;
            if let Some(p) = &a.emit_np {
                let cert = synthesize_g3(&g, caps)?.certificate;
                write(p, &serde_json::to_string_pretty(&cert).expect("certificate serializes"))?;
            }
            if let Some(p) = &a.emit_conp {
                write(p, &serde_json::to_string_pretty(&strategy_json(&sol.tau_star)).unwrap())?;
            }
            let v = json!({
                "objective": "gain",
                "verdicts": verdicts(&g, &sol.win),
                "tau_star_exact": sol.tau_star_exact,
            });
            (v, sol.win)
        }
    };
    if a.objective != Objective::Gain && (a.emit_np.is_some() || a.emit_conp.is_some()) {
        return Err(usage("certificates are only emitted for --objective gain"));
    }
    let mut expect_failed = false;
    if let Some(s) = state {
        let verdict = win.contains(&s);
        value["state"] = json!(s.0);
        value["verdict"] = json!(verdict);
        expect_failed = a.expect && !verdict;
    }
    Ok(Outcome { value, expect_failed, raw: None })
}

fn min_credit(path: &Path, state: Option<usize>, caps: &Caps) -> Res<Outcome> {
    let g = load_game(path)?;
    let d = Decider::new(&g, caps)?;
    if let Some(s) = state {
        let s = state_arg(&g, s)?;
        return Ok(Outcome::json(json!({ "state": s.0, "credit": d.minimal_credit(s)? })));
    }
    let mut credits = BTreeMap::new();
    for s in g.ids() {
        credits.insert(s.0.to_string(), d.minimal_credit(s)?);
    }
    Ok(Outcome::json(json!({ "credits": credits, "W": ids(&d.w), "bounds": d.bounds })))
}

/// Input-game origin of every output state through a chain of transforms.
fn compose_origin(stages: &[&Transform]) -> Vec<Option<usize>> {
    let Some(last) = stages.last() else { return Vec::new() };
    (0..last.output.num_states())
        .map(|v| {
            let mut cur = Some(StateId(v));
            for t in stages.iter().rev() {
                cur = cur.and_then(|c| t.origin[c.0]);
            }
            cur.map(|s| s.0)
        })
        .collect()
}

fn provenance(target: &str, stages: &[&Transform], extra: Value) -> Value {
    json!({
        "target": target,
        "origin": compose_origin(stages),
        "stages": stages.iter().map(|t| t.provenance_json()).collect::<Vec<_>>(),
        "extra": extra,
    })
}

fn transform(path: &Path, to: Target, out: Option<&Path>, side: Option<&Path>, fmt: Format, caps: &Caps) -> Res<Outcome> {
    let g = load_game(path)?;
    let (game, prov) = match to {
        Target::GPrime => {
            let t = energy_trade(&g)?;
            (t.output.clone(), provenance("g-prime", &[&t], Value::Null))
        }
        Target::GDoubleprime => {
            let p = Pipeline::build(&g)?;
            (p.game().clone(), provenance("g-doubleprime", &[&p.g_prime, &p.g_doubleprime], Value::Null))
        }
        Target::G1 => {
            let g1 = build_g1(&g, caps)?;
            (g1.game.clone(), provenance("g1", &[&g1.normalized], json!({ "blowup": g1.f })))
        }
        Target::G2 => {
            let g2 = assemble_g2_full(&g, caps)?;
            let extra = json!({ "blowup": g2.g1.f, "u": ids(&g2.collapsed.u), "trade_ins": g2.trade_ins });
            let stages = [&g2.g1.normalized, &g2.collapsed.transform, &g2.transform];
            (g2.game().clone(), provenance("g2", &stages, extra))
        }
        Target::G3 => {
            let syn = synthesize_g3(&g, caps)?;
            let t = assemble_g2(syn.g2.collapsed.game(), &syn.certificate.trade_ins)?;
            let extra = json!({ "blowup": syn.g2.g1.f, "certificate": syn.certificate, "source": syn.source });
            let stages = [&syn.g2.g1.normalized, &syn.g2.collapsed.transform, &t];
            (t.output.clone(), provenance("g3", &stages, extra))
        }
    };
    let text = to_text(&game);
    let prov_text = serde_json::to_string_pretty(&prov).unwrap();
    match out {
        Some(o) => {
            write(o, &text)?;
            let mut side_path = side.map(Path::to_path_buf).unwrap_or_else(|| o.to_path_buf());
            if side.is_none() {
                let mut name = side_path.file_name().unwrap_or_default().to_os_string();
                name.push(".provenance.json");
                side_path.set_file_name(name);
            }
            write(&side_path, &prov_text)?;
            Ok(Outcome::json(json!({
                "game": o.display().to_string(),
                "provenance": side_path.display().to_string(),
                "states": game.num_states(),
                "edges": game.num_edges(),
            })))
        }
        None => {
            if let Some(p) = side {
                write(p, &prov_text)?;
            }
            if fmt == Format::Text {
                return Ok(Outcome { value: Value::Null, expect_failed: false, raw: Some(text) });
            }
            Ok(Outcome::json(json!({ "game": to_json(&game), "provenance": prov })))
        }
    }
}

fn synthesize(path: &Path, state: usize, k: u64, out: &Path, three_mode: bool, caps: &Caps) -> Res<Outcome> {
    let g = load_game(path)?;
    let s = state_arg(&g, state)?;
    let syn = Synthesizer::new(&g, caps)?;
    let ms = syn.strategy(s, k, SynthesisOptions { allow_start_only: !three_mode })?;
    let report = exact_validate(&g, s, k, &ms, ms.energy_cap, caps)?;
    write(out, &serde_json::to_string_pretty(&ms.to_json()).unwrap())?;
    Ok(Outcome::json(json!({
        "state": s.0,
        "k": k,
        "strategy": out.display().to_string(),
        "modes": if ms.thresholds.is_some() { "three-mode" } else { "start-only" },
        "params": ms.params,
        "thresholds": ms.thresholds,
        "energy_cap": ms.energy_cap,
        "validation": report,
    })))
}

fn run_simulation(path: &Path, strategy: &Path, trials: u64, seed: u64, horizon: u64, adversary: Option<&Path>) -> Res<Outcome> {
    let g = load_game(path)?;
    let text = String::from_utf8_lossy(&read(strategy)?).into_owned();
    let ms = ModeStrategy::from_json(&text)?;
    let adv = match adversary {
        Some(p) => {
            let tau = parse_strategy(p, Owner::Min)?;
            tau.validate(&g)?;
            Adversary::Md(tau)
        }
        None => Adversary::Uniform,
    };
    let stats = simulate(&g, &ms, &adv, horizon, trials, seed)?;
    Ok(Outcome::json(json!({ "seed": seed, "stats": stats })))
}

fn check_cert(a: &CertArgs, caps: &Caps) -> Res<Outcome> {
    let g = load_game(&a.game)?;
    let query: StateSet = match a.state {
        Some(s) => [state_arg(&g, s)?].into(),
        None => g.all_states(),
    };
    if let Some(p) = &a.kind.np {
        let cert: G3Certificate = serde_json::from_slice(&read(p)?).map_err(|e| Failure {
            code: "E_PARSE",
            message: format!("{}: line {}, column {}: {e}", p.display(), e.line(), e.column()),
            status: 2,
        })?;
        let v = verify_g3(&g, &cert, &query, caps)?;
        let m: BTreeMap<String, bool> = v.iter().map(|(s, b)| (s.0.to_string(), *b)).collect();
        return Ok(Outcome::json(json!({ "kind": "np", "wins_gain": m })));
    }
    let p = a.kind.conp.as_ref().expect("clap enforces one certificate");
    let tau = parse_strategy(p, Owner::Min)?;
    tau.validate(&g)?;
    let mut m = BTreeMap::new();
    for &s in &query {
        m.insert(s.0.to_string(), verify_conp_gain(&g, &tau, s, caps)?);
    }
    Ok(Outcome::json(json!({ "kind": "conp", "loses_gain": m })))
}

fn gen_params(max_states: usize, max_reward: i64, max_priority: u32, density: f64, exact_size: bool) -> Res<GenParams> {
    if max_states == 0 || max_reward < 0 || !(0.0..=1.0).contains(&density) {
        return Err(usage("need max-states ≥ 1, max-reward ≥ 0 and density in [0, 1]"));
    }
    Ok(GenParams { max_states, max_reward, max_priority, density, exact_size, ..GenParams::default() })
}

fn oracle_compare(a: &CompareArgs, caps: &Caps) -> Res<Outcome> {
    let p = gen_params(a.max_states, a.max_reward, a.max_priority, a.density, false)?;
    let (mut queries, mut agreed, mut doubled, mut skipped) = (0u64, 0u64, 0u64, Vec::new());
    let mut mismatches = Vec::new();
    for i in 0..a.trials {
        let game_seed = a.seed.wrapping_add(i);
        let g = generate(game_seed, &p);
        let d = Decider::new(&g, caps)?;
        let bounds = compute_bounds(&g)?;
        let b = a.b.unwrap_or(bounds.k + bounds.l + 1).max(a.k_max);
        let oracle = match CappedSolution::solve(&g, b, caps) {
            Ok(o) => o,
            Err(Error::ResourceCap { .. }) => {
                skipped.push(game_seed);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let mut wider: Option<CappedSolution> = None;
        for s in g.ids() {
            for k in 0..=a.k_max {
                queries += 1;
                let main = d.decide(s, k)?;
                if main == oracle.wins(s, k) {
                    agreed += 1;
                    continue;
                }
                if wider.is_none() {
                    wider = Some(CappedSolution::solve(&g, 2 * b, caps)?);
                }
                let retry = wider.as_ref().unwrap().wins(s, k);
                if retry == main {
                    doubled += 1;
                } else {
                    mismatches.push(json!({ "seed": game_seed, "state": s.0, "k": k, "main": main, "oracle": retry, "b": 2 * b }));
                }
            }
        }
    }
    Ok(Outcome::json(json!({
        "trials": a.trials,
        "seed": a.seed,
        "queries": queries,
        "agreed": agreed,
        "resolved_by_doubling": doubled,
        "skipped_seeds": skipped,
        "mismatches": mismatches,
    })))
}

fn run(cli: &Cli) -> Res<Outcome> {
    let mut caps = match &cli.caps {
        Some(spec) => Caps::parse(spec)?,
        None => Caps::from_env()?,
    };
    if let Some(l) = cli.l {
        if l == 0 {
            return Err(usage("L must be positive"));
        }
        caps.l_override = Some(l);
    }
    match &cli.cmd {
        Cmd::Solve(a) => solve(a, &caps),
        Cmd::MinCredit { game, state } => min_credit(game, *state, &caps),
        Cmd::Transform { game, to, out, provenance } => {
            transform(game, *to, out.as_deref(), provenance.as_deref(), cli.format, &caps)
        }
        Cmd::Synthesize { game, state, k, out, three_mode } => synthesize(game, *state, *k, out, *three_mode, &caps),
        Cmd::Simulate { game, strategy, trials, seed, horizon, adversary } => {
            run_simulation(game, strategy, *trials, *seed, *horizon, adversary.as_deref())
        }
        Cmd::CheckCert(a) => check_cert(a, &caps),
        Cmd::OracleCompare(a) => oracle_compare(a, &caps),
        Cmd::Generate(a) => {
            let p = gen_params(a.max_states, a.max_reward, a.max_priority, a.density, a.exact_size)?;
            let g = generate(a.seed, &p);
            if cli.format == Format::Text {
                return Ok(Outcome { value: Value::Null, expect_failed: false, raw: Some(to_text(&g)) });
            }
            Ok(Outcome::json(to_json(&g)))
        }
    }
}

fn render_text(v: &Value) -> String {
    match v {
        Value::Object(m) => m
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}: {s}\n"),
                other => format!("{k}: {other}\n"),
            })
            .collect(),
        other => format!("{other}\n"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let text = match (out.raw, cli.format) {
                (Some(raw), _) => raw,
                (None, Format::Json) => serde_json::to_string_pretty(&out.value).unwrap() + "\n",
                (None, Format::Text) => render_text(&out.value),
            };
            // a closed pipe is not an error of the run
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::from(if out.expect_failed { 1 } else { 0 })
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": f.code, "message": f.message }));
            ExitCode::from(f.status)
        }
    }
}
