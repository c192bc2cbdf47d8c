//! Command-line front end: build and verify schemes, sweep the randomness
//! tradeoff grid to CSV, brute-force the tiny-instance converse, and walk
//! through the three-server demo instance.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage/parameter error,
//! 3 construction failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use seclinsep::assignment::{converse_min_max, gcd, ProblemParams};
use seclinsep::field::FieldModulus;
use seclinsep::scheme::{
    build_combined_scheme, build_cyclic_scheme, build_fractional_repetition_scheme, h_value,
    SchemeSpec,
};
use seclinsep::verify::{verify_scheme, DecodeMode};
use seclinsep::Error;

const DEFAULT_FIELD: u64 = 2147483647;
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "seclinsep",
    version,
    about = "Secure distributed linearly separable computation: scheme construction and exact verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and fully verify the (K=3, N=3, N_r=2) walkthrough instance
    Demo {
        /// Prime field order
        #[arg(long, default_value_t = 3)]
        field: u64,
        /// RNG seed for the sampled coefficients
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Construct a scheme and emit it as JSON
    Build {
        /// Server count N
        #[arg(long)]
        n: usize,
        /// Responding-server count N_r
        #[arg(long)]
        nr: usize,
        /// Dataset count K (defaults to N; N must divide K)
        #[arg(long)]
        k: Option<usize>,
        /// Which construction to use
        #[arg(long, value_enum)]
        scheme: SchemeKind,
        /// Prime field order
        #[arg(long, default_value_t = DEFAULT_FIELD)]
        field: u64,
        /// RNG seed
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the scheme JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a serialized scheme and print the report as JSON
    Verify {
        /// Path to a scheme JSON file
        #[arg(long = "in")]
        input: PathBuf,
        /// Decodability mode
        #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
        mode: ModeArg,
        /// Subsets to draw in sampled mode
        #[arg(long, default_value_t = 10_000)]
        sample_count: usize,
    },
    /// Tabulate randomness sizes over an (N, M') grid as CSV
    Sweep {
        /// Inclusive N range, e.g. 16..30
        #[arg(long, value_parser = parse_range)]
        n_range: (usize, usize),
        /// Inclusive M' range, e.g. 5..15
        #[arg(long, value_parser = parse_range)]
        m_range: (usize, usize),
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force the min-max chain bound over all assignments (tiny N)
    Converse {
        /// Server (= dataset) count N
        #[arg(long)]
        n: usize,
        /// Replication factor M'
        #[arg(long)]
        m: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeKind {
    Cyclic,
    FracRep,
    Combined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Sampled,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got '{s}'"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad bound: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad bound: {e}"))?;
    if lo == 0 || hi < lo {
        return Err(format!("range {lo}..{hi} is empty or starts at zero"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Demo { field, seed } => cmd_demo(field, seed),
        Command::Build {
            n,
            nr,
            k,
            scheme,
            field,
            seed,
            out,
        } => cmd_build(n, nr, k.unwrap_or(n), scheme, field, seed, out),
        Command::Verify {
            input,
            mode,
            sample_count,
        } => cmd_verify(input, mode, sample_count),
        Command::Sweep {
            n_range,
            m_range,
            out,
        } => cmd_sweep(n_range, m_range, out),
        Command::Converse { n, m } => cmd_converse(n, m),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::ConstructionFailed { .. } => 3u8,
                _ => 2u8,
            })
        }
    }
}

fn term_name(s: &SchemeSpec, col: usize) -> String {
    let n = s.params.n;
    if col < n {
        format!("W{}", col + 1)
    } else {
        format!("Q{}", col - n + 1)
    }
}

/// Renders a coefficient row like `2*W1 + W2 + Q1` (residues as stored).
fn format_row(s: &SchemeSpec, row: &[u64]) -> String {
    let terms: Vec<String> = row
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(i, &c)| {
            if c == 1 {
                term_name(s, i)
            } else {
                format!("{c}*{}", term_name(s, i))
            }
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

fn cmd_demo(field: u64, seed: u64) -> Result<ExitCode, Error> {
    let q = FieldModulus::new(field)?;
    let params = ProblemParams::new(3, 3, 2, q, seed)?;
    println!("# demo: K=3 N=3 N_r=2 | field={field} seed={seed}");
    let scheme = build_cyclic_scheme(&params)?;
    println!("answers:");
    for i in 0..3 {
        println!("  server {} sends {}", i + 1, format_row(&scheme, &scheme.expanded_row(i)));
    }
    println!("decoding (any 2 of 3 servers):");
    let target = scheme.target_row();
    for pair in [[0usize, 1], [0, 2], [1, 2]] {
        let rows = vec![scheme.expanded_row(pair[0]), scheme.expanded_row(pair[1])];
        let m = seclinsep::field::FieldMatrix::from_rows(q, &rows)?;
        match m.solve_left(&target)? {
            Some(u) => println!(
                "  servers {{{}, {}}}: {}*X{} + {}*X{} = W1 + W2 + W3",
                pair[0] + 1,
                pair[1] + 1,
                u[0],
                pair[0] + 1,
                u[1],
                pair[1] + 1
            ),
            None => println!("  servers {{{}, {}}}: cannot decode", pair[0] + 1, pair[1] + 1),
        }
    }
    let report = verify_scheme(&scheme, DecodeMode::Exhaustive)?;
    println!(
        "verdict: decodable={} secure={} cost={} eta={}",
        report.decodability.decodable,
        report.security.secure,
        report.communication_cost,
        report.randomness_size
    );
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_build(
    n: usize,
    nr: usize,
    k: usize,
    kind: SchemeKind,
    field: u64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let q = FieldModulus::new(field)?;
    let params = ProblemParams::new(k, n, nr, q, seed)?;
    let scheme = match kind {
        SchemeKind::Cyclic => build_cyclic_scheme(&params)?,
        SchemeKind::FracRep => build_fractional_repetition_scheme(&params)?,
        SchemeKind::Combined => build_combined_scheme(&params)?,
    };
    let summary = format!(
        "# built {:?}: lambda={} eta={} cost={} | field={field} seed={seed}",
        kind, scheme.lambda, scheme.randomness_count, params.n_r
    );
    let json = serde_json::to_string_pretty(&scheme)
        .map_err(|e| Error::Integrity(format!("serialization failed: {e}")))?;
    match out {
        Some(path) => {
            fs::write(&path, json.as_bytes())
                .map_err(|e| Error::InvalidParameters(format!("cannot write {}: {e}", path.display())))?;
            println!("{summary}");
            println!("# wrote {}", path.display());
        }
        None => {
            eprintln!("{summary}");
            println!("{json}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(input: PathBuf, mode: ModeArg, sample_count: usize) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(&input)
        .map_err(|e| Error::InvalidParameters(format!("cannot read {}: {e}", input.display())))?;
    let scheme: SchemeSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameters(format!("cannot parse scheme: {e}")))?;
    let mode = match mode {
        ModeArg::Exhaustive => DecodeMode::Exhaustive,
        ModeArg::Sampled => DecodeMode::Sampled {
            count: sample_count,
        },
    };
    let report = verify_scheme(&scheme, mode)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Integrity(format!("serialization failed: {e}")))?;
    println!("{json}");
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_sweep(
    n_range: (usize, usize),
    m_range: (usize, usize),
    out: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let mut csv = String::from("n,m_prime,eta_cyclic,eta_combined,eta_floor,optimal\n");
    for n in n_range.0..=n_range.1 {
        for m in m_range.0..=m_range.1.min(n) {
            let h = h_value(n, m)?.value;
            let eta_cyclic = n - m; // N_r - 1
            let eta_combined = h - 1;
            let eta_floor = n.div_ceil(m) - 1;
            assert!(
                eta_floor <= eta_combined && eta_combined <= eta_cyclic,
                "bound ordering violated at ({n}, {m})"
            );
            let optimal = usize::from(m / gcd(n, m) <= 4);
            csv.push_str(&format!(
                "{n},{m},{eta_cyclic},{eta_combined},{eta_floor},{optimal}\n"
            ));
        }
    }
    match out {
        Some(path) => fs::write(&path, csv.as_bytes())
            .map_err(|e| Error::InvalidParameters(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_converse(n: usize, m: usize) -> Result<ExitCode, Error> {
    println!("# converse: N={n} M'={m}");
    let (value, witness) = converse_min_max(n, m)?;
    let h = h_value(n, m)?.value;
    println!("min-max chain length: {value} (eta lower bound {})", value - 1);
    println!("witness assignment:");
    for (i, z) in witness.sets.iter().enumerate() {
        println!("  server {}: {:?}", i + 1, z);
    }
    let ratio = m / gcd(n, m);
    println!(
        "h({n}, {m}) = {h}; min-max {} h (tightness expected iff M'/gcd <= 4; here M'/gcd = {ratio})",
        if value == h { "matches" } else { "differs from" }
    );
    Ok(ExitCode::SUCCESS)
}
