use std::process::ExitCode;

use fep_cli::commands;
use fep_cli::config::RunConfig;

const USAGE: &str = "\
fep: boundary-driven facilitated exclusion process laboratory

USAGE:
    fep <hydro|fig3|stationary|pde|verify> [OPTIONS]

SUBCOMMANDS:
    hydro        simulate replicas, solve the matching PDE, compare profiles
    fig3         long-run stationary density estimate vs the closed form
    stationary   exact finite-state stationary analysis (small N)
    pde          solve the macroscopic equation only
    verify       run a named check suite: core|measures|exact|paths|pde|decay

OPTIONS (config file keys use the same names, flags win):
    --config FILE        key=value experiment file
    --n N                lattice size parameter (default 128)
    --alpha A --beta B   reservoir densities in (0,1) (defaults 0.3, 0.8)
    --theta T            boundary speed exponent (default 0)
    --kappa K            boundary speed prefactor (default 1)
    --replicas R         independent chains (default 16)
    --seed S             root seed (default 1)
    --t T1,T2,...        macroscopic checkpoint times (default 0.05,0.1)
    --init SPEC          const:V or linear:A,B (default linear:0.6,0.3)
    --m M                PDE grid nodes (default 256)
    --l1-tol X           hydro pass threshold (default 0.02)
    --out DIR            output directory (default out)

EXIT CODES: 0 pass, 1 suite or comparison failure, 2 usage error.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(subcommand) = args.first() else {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    };
    if subcommand == "--help" || subcommand == "-h" || subcommand == "help" {
        println!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    // `verify` takes the suite name before the flags
    let (suite, rest) = if subcommand == "verify" {
        match args.get(1) {
            Some(s) if !s.starts_with("--") => (Some(s.clone()), &args[2..]),
            _ => {
                eprintln!("usage error: verify needs a suite name");
                return ExitCode::from(2);
            }
        }
    } else {
        (None, &args[1..])
    };
    let cfg = match RunConfig::from_args(rest) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let result = match subcommand.as_str() {
        "hydro" => commands::cmd_hydro(&cfg),
        "fig3" => commands::cmd_fig3(&cfg),
        "stationary" => commands::cmd_stationary(&cfg),
        "pde" => commands::cmd_pde(&cfg),
        "verify" => commands::cmd_verify(suite.as_deref().unwrap(), &cfg),
        other => {
            eprintln!("usage error: unknown subcommand '{other}'\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
