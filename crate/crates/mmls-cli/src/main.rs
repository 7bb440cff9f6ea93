//! Command-line front end: dataset generation, fitting, projection and the
//! experiment drivers.
//!
//! Exit codes: 0 on success, 2 on usage or input-parse errors, 3 on
//! numerical failure.

mod commands;
mod config;

use config::{KeyValues, KNOWN_KEYS};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or malformed input files; exit code 2.
    Usage(String),
    /// Malformed data file content; exit code 2.
    Parse(String),
    /// The computation itself failed; exit code 3.
    Numerical(String),
}

const USAGE: &str = "\
mmls - moving least-squares regression over manifold-supported samples

USAGE:
    mmls <COMMAND> [--key value]...

COMMANDS:
    gen <helix|sphere|klein>  generate a synthetic sample file (--out FILE)
    fit-eval                  evaluate the regressor at query points
    project                   project query points onto the fitted manifold
    convergence               error-vs-resolution slope study on the sphere
    klein-bench               regression benchmark on the Klein bottle
    loo-cv                    leave-one-out cross-validation over a sample file
    scaling                   per-query timing across ambient dimensions
    helix-demo                the two helix denoising setups, with CSV output

COMMON OPTIONS:
    --samples FILE   input samples (CSV: x1..xn,f1..fm header)
    --queries FILE   query points (CSV: x1..xn header)
    --config FILE    flat key = value configuration; flags override it
    --out PATH       output file (gen, fit-eval, project) or directory
    --seed N         base seed for every stochastic choice
    --d N            intrinsic dimension (default 1)
    --m N            polynomial degree (default 1)
    --weight F       truncated-exp | gaussian | interpolatory
    --k X            support multiplier for a fixed bandwidth
    --h X|auto       bandwidth; 'auto' sizes the support from the data
    --interpolatory  interpolate the samples exactly

Run-specific keys double as flags: --resolutions, --query-count, --trials,
--test-count, --n, --g, --snrdb, --sigma-r, --sigma-domain, --sigma-target,
--t-min, --t-max, --n-list, --n-samples, --support-factor, --support-margin,
--init, --tol-q, --max-iter, --mu, --eps-reg-factor, --dump-frames.
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(match dispatch(&args) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run 'mmls --help' for usage");
            2
        }
        Err(CliError::Parse(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    });
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let mut it = args.iter();
    let command = match it.next() {
        None => return Err(CliError::Usage("no command given".into())),
        Some(c) if c == "--help" || c == "-h" || c == "help" => {
            println!("{USAGE}");
            return Ok(());
        }
        Some(c) => c.clone(),
    };

    // `gen` takes a dataset name before the flags.
    let mut dataset = None;
    if command == "gen" {
        match it.next() {
            Some(name) if !name.starts_with("--") => dataset = Some(name.clone()),
            _ => return Err(CliError::Usage("gen requires a dataset name".into())),
        }
    }

    // Collect flags first so --config can be loaded before the overrides.
    let mut flags: Vec<(String, String)> = Vec::new();
    let mut config_path = None;
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("unexpected argument '{arg}'")))?;
        if key == "help" {
            println!("{USAGE}");
            return Ok(());
        }
        if key == "interpolatory" {
            flags.push(("interpolatory".into(), "true".into()));
            continue;
        }
        let value = it
            .next()
            .ok_or_else(|| CliError::Usage(format!("option --{key} needs a value")))?
            .clone();
        if key == "config" {
            config_path = Some(value);
            continue;
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown option --{key}")));
        }
        flags.push((key.to_string(), value));
    }

    let mut kv = KeyValues::default();
    if let Some(path) = config_path {
        kv.load_file(&path)?;
    }
    for (k, v) in flags {
        kv.set(&k, &v);
    }

    match command.as_str() {
        "gen" => commands::cmd_gen(dataset.as_deref().unwrap(), &kv),
        "fit-eval" => commands::cmd_fit_eval(&kv, false),
        "project" => commands::cmd_fit_eval(&kv, true),
        "convergence" => commands::cmd_convergence(&kv),
        "klein-bench" => commands::cmd_klein(&kv),
        "loo-cv" => commands::cmd_loo(&kv),
        "scaling" => commands::cmd_scaling(&kv),
        "helix-demo" => commands::cmd_helix_demo(&kv),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}
