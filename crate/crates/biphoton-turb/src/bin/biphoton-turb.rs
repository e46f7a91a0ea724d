//! Command-line front end: concurrence-curve sweeps, parameter reports and
//! self-verification.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical or
//! integrability failures.

use biphoton_turb::cli::{
    parse_k_list, parse_w_range, report_params, run_sweep, PartialConfig, SweepScenario,
};
use biphoton_turb::error::Error;
use biphoton_turb::evolve::{propagate_general, Scenario};
use biphoton_turb::kernel::spdc_kernel;
use biphoton_turb::oracle::{fd_extract, quad_propagate, QuadratureSpec};
use biphoton_turb::params::{verify_structure_constant, StructureQuadrature, TurbulenceScales};
use biphoton_turb::project::{extract_element, MuQuadraticForm};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use std::fs;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "biphoton-turb",
    version,
    about = "Biphoton entanglement in turbulence"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a concurrence sweep over W (and K) and write a CSV dataset.
    Sweep {
        /// Key-value config file; flags override its entries.
        #[arg(long)]
        config: Option<String>,
        /// Azimuthal magnitude of the qubit modes.
        #[arg(long)]
        q: Option<u32>,
        /// correlated | uncorrelated | sps-correlated | sps-uncorrelated.
        #[arg(long)]
        scenario: Option<String>,
        /// Comma-separated turbulence strengths (numeric scenarios).
        #[arg(long = "K")]
        k_values: Option<String>,
        /// W grid as min:max:count.
        #[arg(long = "W")]
        w_range: Option<String>,
        /// Output CSV path.
        #[arg(long)]
        out: Option<String>,
    },
    /// Print all derived beam/turbulence parameters.
    Params {
        #[arg(long)]
        cn2: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        waist: f64,
        #[arg(long)]
        z: f64,
        /// Crystal length (with --no, enables the beta report line).
        #[arg(long = "L")]
        crystal_length: Option<f64>,
        /// Ordinary refractive index of the crystal.
        #[arg(long = "no")]
        ordinary_index: Option<f64>,
    },
    /// Verify the structure constant and the oracle pairings.
    Verify,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(args: Args) -> Result<(), Error> {
    match args.command {
        Command::Sweep {
            config,
            q,
            scenario,
            k_values,
            w_range,
            out,
        } => {
            let from_file = match config {
                Some(path) => PartialConfig::parse(&fs::read_to_string(path)?)?,
                None => PartialConfig::default(),
            };
            let flags = PartialConfig {
                q,
                scenario: scenario.map(|s| s.parse::<SweepScenario>()).transpose()?,
                k_values: k_values.map(|s| parse_k_list(&s)).transpose()?,
                w_range: w_range.map(|s| parse_w_range(&s)).transpose()?,
                output_path: out,
            };
            let config = flags.or(from_file).build()?;
            let csv = run_sweep(&config)?;
            fs::write(&config.output_path, csv)?;
            println!("wrote {}", config.output_path);
            Ok(())
        }
        Command::Params {
            cn2,
            lambda,
            waist,
            z,
            crystal_length,
            ordinary_index,
        } => {
            let mut scales = TurbulenceScales::new(cn2, lambda, waist, z)?;
            if let (Some(l), Some(no)) = (crystal_length, ordinary_index) {
                scales = scales.with_crystal(l, no)?;
            }
            print!("{}", report_params(&scales));
            Ok(())
        }
        Command::Verify => verify(),
    }
}

/// Structure-constant check plus the two oracle pairings, mirroring the
/// acceptance gates; exits nonzero if any tolerance is missed.
fn verify() -> Result<(), Error> {
    let mut failures = 0;

    let s = verify_structure_constant(&StructureQuadrature::default())?;
    let ok = (s - 1.457).abs() <= 0.01;
    println!(
        "[{}] structure constant: {s:.5} (target 1.457 +/- 0.01)",
        if ok { "pass" } else { "FAIL" }
    );
    failures += u32::from(!ok);

    // Propagation quadrature pairing at fixed, reproducible sample points.
    let input = spdc_kernel(1.0, 0.05)?;
    let samples: Vec<[[f64; 2]; 4]> = (0..5)
        .map(|i| {
            let base = 0.03 * (i as f64 + 1.0);
            [
                [base, -0.5 * base],
                [-base, 0.25 * base],
                [0.5 * base, base],
                [0.1 * base, -base],
            ]
        })
        .collect();
    for scenario in [Scenario::Correlated, Scenario::Uncorrelated] {
        let evolved = propagate_general(&input, 0.8, 0.7, scenario)?;
        // 40 nodes per axis suffice for ~1e-8 here and keep the 4D case fast.
        let spec = QuadratureSpec {
            nodes_per_dim: if scenario == Scenario::Correlated {
                80
            } else {
                40
            },
            ..Default::default()
        };
        let quad = quad_propagate(&input, 0.8, 0.7, scenario, &spec, &samples)?;
        let mut worst = 0.0f64;
        for (qv, sample) in quad.iter().zip(samples.iter()) {
            let av = evolved.evaluate(sample);
            worst = worst.max((qv - av).norm() / av.norm());
        }
        let ok = worst < 1e-6;
        println!(
            "[{}] propagation quadrature ({scenario:?}): worst rel {worst:.3e} (tol 1e-6)",
            if ok { "pass" } else { "FAIL" }
        );
        failures += u32::from(!ok);
    }

    // Finite-difference pairing on a fixed form.
    let b13 = Complex64::new(0.4, -0.2);
    let mut quad_form = [[Complex64::new(0.0, 0.0); 4]; 4];
    quad_form[0][2] = b13;
    quad_form[2][0] = b13;
    quad_form[1][3] = b13.conj();
    quad_form[3][1] = b13.conj();
    quad_form[0][1] = Complex64::new(-0.3, 0.0);
    quad_form[1][0] = quad_form[0][1];
    quad_form[2][3] = quad_form[0][1];
    quad_form[3][2] = quad_form[0][1];
    let form = MuQuadraticForm::new(Complex64::new(1.0, 0.0), quad_form);
    for q in 1..=3u32 {
        let exact = extract_element(&form, q)?;
        let fd = fd_extract(&form, q, 0.06)?;
        let rel = (fd - exact).norm() / exact.norm().max(1e-300);
        let ok = rel < 1e-6;
        println!(
            "[{}] derivative extraction q={q}: fd vs series rel {rel:.3e} (tol 1e-6)",
            if ok { "pass" } else { "FAIL" }
        );
        failures += u32::from(!ok);
    }

    if failures > 0 {
        Err(Error::InvalidState(format!(
            "{failures} verification check(s) failed"
        )))
    } else {
        println!("all verification checks passed");
        Ok(())
    }
}
