//! Command-line driver: deal and run executions, verify transcripts,
//! evaluate feasibility, and explore hue classes on small spaces.
//!
//! Exit codes: 0 success; 1 a verification check failed; 2 infeasible
//! parameters or size guard without --force; 3 protocol error or
//! malformed input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rcards::{
    check_informative, check_weak_safety, deal_random, density, feasible, hue_explore,
    is_distinguished, knit_colouring, lines_meeting, prime_power, run_protocol, search_k, sigma,
    suggest_params, sweep, verify_execution, Colouring, Deal, Leftover, ProtocolParams, Regime,
    Space, Transcript, VerifyError, DEFAULT_HUE_CAP,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const SIZE_GUARD: u64 = 81;

#[derive(Parser)]
#[command(name = "rcards", version, about = "Colouring protocol for card-deal secret exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deal (or load) a deal and run the four-announcement protocol
    Run(RunArgs),
    /// Check an execution: legality, informativity, weak 1-security
    Verify(VerifyArgs),
    /// Feasibility reports, k-search, regime suggestions, sweeps
    Params(ParamsArgs),
    /// Dump the hue class of a point set under a colouring
    Hue(HueArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    a: u64,
    #[arg(long)]
    b: Option<u64>,
    #[arg(long)]
    c: u64,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    k: Option<u64>,
    /// RNG seed (falls back to RC_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the transcript JSON
    #[arg(long, default_value = "transcript.json")]
    transcript: PathBuf,
    /// Where to write (or read, if it exists) the deal JSON
    #[arg(long, default_value = "deal.json")]
    deal: PathBuf,
    /// Leftover direction colours: deterministic | randomized
    #[arg(long, default_value = "deterministic")]
    mode: String,
    /// Run even when the feasibility report fails
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long)]
    deal: PathBuf,
    /// Where to write the verification report JSON
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check safety only on this many sampled cards (default: all)
    #[arg(long)]
    sample: Option<usize>,
    /// Seed for safety sampling
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ParamsArgs {
    #[command(subcommand)]
    action: Option<ParamsAction>,
    #[arg(long)]
    a: Option<u64>,
    #[arg(long)]
    c: Option<u64>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    k: Option<u64>,
    /// Output: table | json
    #[arg(long, default_value = "table")]
    mode: String,
}

#[derive(Subcommand)]
enum ParamsAction {
    /// Parameters from an asymptotic regime (d3 or d4)
    Suggest {
        #[arg(long)]
        a: u64,
        #[arg(long)]
        regime: String,
    },
    /// Feasibility atlas as CSV: a,d,k,c_max,b
    Sweep {
        #[arg(long)]
        max_a: u64,
    },
}

#[derive(Args)]
struct HueArgs {
    /// Transcript supplying the space, colouring and card map
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Deal supplying E = f(D \ B); required with --transcript
    #[arg(long)]
    deal: Option<PathBuf>,
    /// Without a transcript: trivial k-colouring of F_a^d, E = first line
    #[arg(long)]
    a: Option<u64>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long, default_value_t = 1)]
    k: u64,
    /// BFS cap on the number of hue class members
    #[arg(long, default_value_t = DEFAULT_HUE_CAP)]
    cap: usize,
    /// Ignore the q^d size guard
    #[arg(long)]
    force: bool,
}

fn seed_of(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("RC_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

fn read_json(path: &PathBuf) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_json(path: &PathBuf, value: &Value) -> Result<(), String> {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap())
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let seed = seed_of(args.seed);
    // derive d from a+b+c = a^d when omitted
    let d = match args.d {
        Some(d) => d,
        None => {
            let Some(b) = args.b else {
                eprintln!("need --d or --b to determine the dimension");
                return ExitCode::from(3);
            };
            let total = args.a + b + args.c;
            match (1..=40).find(|&d| args.a.checked_pow(d) == Some(total)) {
                Some(d) => d,
                None => {
                    eprintln!("a+b+c = {total} is not a power of a = {}", args.a);
                    return ExitCode::from(3);
                }
            }
        }
    };
    let b = (args.a as i128).pow(d) - args.a as i128 - args.c as i128;
    if b < 0 {
        eprintln!("negative b: a^d - a - c = {b}");
        return ExitCode::from(2);
    }
    let b = b as u64;
    if let Some(explicit) = args.b {
        if explicit != b {
            eprintln!("inconsistent --b: expected {b}");
            return ExitCode::from(3);
        }
    }
    let k = match args.k.or_else(|| search_k(args.a, args.c, d)) {
        Some(k) => k,
        None => {
            eprintln!("no feasible k for a={} c={} d={d}", args.a, args.c);
            return ExitCode::from(2);
        }
    };
    let report = feasible(args.a, args.c, d, k);
    if !report.feasible && !args.force {
        eprintln!(
            "infeasible parameters (pass --force to run anyway): {}",
            serde_json::to_string(&report).unwrap()
        );
        return ExitCode::from(2);
    }

    let params = match ProtocolParams::new(args.a, b, args.c, d, k as u32, None) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(3);
        }
    };
    let space = params.space();
    let deal = if args.deal.exists() {
        match read_json(&args.deal).and_then(|v| Deal::from_json(&v).map_err(|e| e.to_string())) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        deal_random(args.a, b, args.c, &mut rng)
    };
    let leftover = match args.mode.as_str() {
        "deterministic" => Leftover::Deterministic,
        "randomized" => Leftover::Randomized,
        other => {
            eprintln!("unknown mode {other}");
            return ExitCode::from(3);
        }
    };
    let transcript = match run_protocol(&deal, &params, &space, seed, leftover) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("protocol error: {e}");
            return ExitCode::from(3);
        }
    };

    let e = rcards::non_bob_image(&transcript.f, &deal.bob);
    let heavy = lines_meeting(&space, &e, args.a - k).len();
    let dens = density(&space, &transcript.xi);
    let mut tjson = transcript.to_json(&space);
    tjson["version"] = json!(VERSION);
    let mut djson = deal.to_json();
    djson["version"] = json!(VERSION);
    djson["seed"] = json!(seed);
    if let Err(e) = write_json(&args.transcript, &tjson).and_then(|_| write_json(&args.deal, &djson))
    {
        eprintln!("{e}");
        return ExitCode::from(3);
    }
    println!(
        "colour announced: {} of {k}; heavy lines |L_{}(E)| = {heavy}; density = {dens} (need {})",
        transcript.colour,
        args.a - k,
        args.c + 2
    );
    println!(
        "transcript -> {}; deal -> {}; seed {seed}",
        args.transcript.display(),
        args.deal.display()
    );
    ExitCode::SUCCESS
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    let loaded = read_json(&args.transcript)
        .and_then(|t| Transcript::from_json(&t).map_err(|e| e.to_string()))
        .and_then(|(t, s)| {
            read_json(&args.deal)
                .and_then(|d| Deal::from_json(&d).map_err(|e| e.to_string()))
                .map(|d| (t, s, d))
        });
    let (transcript, space, deal) = match loaded {
        Ok(x) => x,
        Err(e) => {
            eprintln!("malformed input: {e}");
            return ExitCode::from(3);
        }
    };

    let executed = match verify_execution(&space, &transcript, &deal) {
        Ok(ok) => ok,
        Err(VerifyError::MalformedTranscript(m)) => {
            eprintln!("malformed input: {m}");
            return ExitCode::from(3);
        }
    };
    let informative = check_informative(&space, &transcript, &deal);
    let sample_cards: Option<Vec<u32>> = args.sample.map(|n| {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed_of(args.seed));
        let mut pool: Vec<u32> = (1..=space.num_points() as u32)
            .filter(|c| !deal.cath.contains(c))
            .collect();
        pool.shuffle(&mut rng);
        pool.truncate(n);
        pool.sort_unstable();
        pool
    });
    let safety = check_weak_safety(&space, &transcript, &deal, sample_cards.as_deref());
    let leaked = safety.leaked_to_alice();
    let pass = executed && informative && safety.pass;

    let report = json!({
        "version": VERSION,
        "params": { "a": transcript.params.a, "b": transcript.params.b,
                    "c": transcript.params.c, "d": transcript.params.d,
                    "k": transcript.params.k },
        "seed": transcript.seed,
        "executed": executed,
        "informative": informative,
        "safety": serde_json::to_value(&safety).unwrap(),
        "leaked_to_alice": leaked,
        "pass": pass,
    });
    if let Some(out) = &args.out {
        if let Err(e) = write_json(out, &report) {
            eprintln!("{e}");
            return ExitCode::from(3);
        }
    }
    println!(
        "executed: {executed}; informative: {informative}; safe: {} ({} cards checked)",
        safety.pass,
        safety.cards.len()
    );
    if !leaked.is_empty() {
        let names: Vec<String> = leaked
            .iter()
            .map(|&c| {
                let p = space.point(transcript.f[c as usize - 1]);
                let digits: String = p.coords.iter().map(|x| x.to_string()).collect();
                format!("card {c} (point {digits})")
            })
            .collect();
        println!("leak: Cath learns Alice holds {}", names.join(", "));
    }
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_params(args: ParamsArgs) -> ExitCode {
    match args.action {
        Some(ParamsAction::Suggest { a, regime }) => {
            let regime: Regime = match regime.parse() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(3);
                }
            };
            match suggest_params(a, regime) {
                Ok((k, c, b, report)) => {
                    println!("k={k} c={c} b={b} (c/a = {:.2})", c as f64 / a as f64);
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
        Some(ParamsAction::Sweep { max_a }) => {
            println!("a,d,k,c_max,b");
            for row in sweep(max_a) {
                println!("{},{},{},{},{}", row.a, row.d, row.k, row.c_max, row.b);
            }
            ExitCode::SUCCESS
        }
        None => {
            let (Some(a), Some(c), Some(d)) = (args.a, args.c, args.d) else {
                eprintln!("need --a --c --d (and optionally --k)");
                return ExitCode::from(3);
            };
            let k = match args.k.or_else(|| search_k(a, c, d)) {
                Some(k) => k,
                None => {
                    println!("no feasible k for a={a} c={c} d={d}");
                    return ExitCode::from(2);
                }
            };
            let report = feasible(a, c, d, k);
            if args.mode == "json" {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                println!("a={a} b={} c={c} d={d} k={k}", report.b);
                println!(
                    "prime power: {}; b >= 0: {}; k < a: {}; heavy-line bound: {}; directions sigma_{d}({a})={} >= k(c+3)={}: {}",
                    report.cond1, report.cond2, report.cond3, report.cond4,
                    sigma(d, a), k * (c + 3), report.cond5
                );
                println!("feasible: {}; c/a = {:.2}", report.feasible, c as f64 / a as f64);
            }
            if report.feasible {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn cmd_hue(args: HueArgs) -> ExitCode {
    let (space, xi, e): (Space, Colouring, rcards::PointSet) = if let Some(tp) = &args.transcript {
        let Some(dp) = &args.deal else {
            eprintln!("--transcript requires --deal");
            return ExitCode::from(3);
        };
        let loaded = read_json(tp)
            .and_then(|t| Transcript::from_json(&t).map_err(|e| e.to_string()))
            .and_then(|(t, s)| {
                read_json(dp)
                    .and_then(|d| Deal::from_json(&d).map_err(|e| e.to_string()))
                    .map(|d| (t, s, d))
            });
        match loaded {
            Ok((t, s, d)) => {
                let e = rcards::non_bob_image(&t.f, &d.bob);
                (s, t.xi, e)
            }
            Err(e) => {
                eprintln!("malformed input: {e}");
                return ExitCode::from(3);
            }
        }
    } else {
        let (Some(a), Some(d)) = (args.a, args.d) else {
            eprintln!("need --transcript/--deal or --a --d");
            return ExitCode::from(3);
        };
        let Some((p, n)) = prime_power(a) else {
            eprintln!("a = {a} is not a prime power");
            return ExitCode::from(3);
        };
        let field = match rcards::Field::new(p, n, None) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
        };
        let space = Space::new(field, d);
        let xi = if args.k == 1 {
            Colouring::trivial(&space)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_of(None));
            let m = space.num_directions() / args.k;
            match knit_colouring(&space, &[], args.k as u32, m, &mut rng, Leftover::Deterministic) {
                Ok(xi) => xi,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(3);
                }
            }
        };
        let e: rcards::PointSet = space.all_lines()[0].points.iter().copied().collect();
        (space, xi, e)
    };

    if space.num_points() > SIZE_GUARD && !args.force {
        eprintln!(
            "space has {} points (> {SIZE_GUARD}); pass --force to explore anyway",
            space.num_points()
        );
        return ExitCode::from(2);
    }

    let (class, truncated) = hue_explore(&space, &xi, &e, args.cap);
    println!(
        "hue class of {:?}: {} members{}",
        e.iter().collect::<Vec<_>>(),
        class.len(),
        if truncated { " (truncated)" } else { "" }
    );
    let mut all_distinguished = true;
    for member in &class {
        let ok = is_distinguished(&space, &xi, member);
        all_distinguished &= ok;
        println!(
            "  {:?} distinguished: {ok}",
            member.iter().collect::<Vec<_>>()
        );
    }
    println!("all distinguished: {all_distinguished}");
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Params(a) => cmd_params(a),
        Command::Hue(a) => cmd_hue(a),
    }
}
