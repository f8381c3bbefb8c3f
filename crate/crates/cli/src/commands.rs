//! Subcommand implementations: each builds a JSON section (plus CSV
//! artifacts in the output directory) and a verdict.

use crate::config::{parse_forcing, parse_initial, InitialRecipe, RunConfig};
use crate::report::write_csv;
use conewedge_core::cross_section::{BoundaryCondition, Spectrum};
use conewedge_core::domains::{
    adjoint_complement, check_e3_criterion, max_domain, neumann_extension, pairing_matrix,
    DomainDescriptor, E3Condition, ExtensionChoice,
};
use conewedge_core::error::{Error, Result};
use conewedge_core::indicial::{laplacian_window_igamma, RootSign};
use conewedge_core::mellin::{f_sigma, g_recursion, AsymptoticFunction, ConormalData};
use conewedge_core::model_cone::{sectoriality_probe, LogGrid, SectorSpec};
use conewedge_core::pme::{pme_solve, tip_exponent_fit, PMEState, WedgeGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Outcome of a subcommand: the report section and whether every verdict
/// passed (false maps to exit code 2).
pub struct CommandOutcome {
    pub section: Value,
    pub verdict_pass: bool,
}

fn cjson(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &DMatrix<Complex64>) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|i| Value::Array((0..m.ncols()).map(|j| cjson(m[(i, j)])).collect()))
        .collect();
    Value::Array(rows)
}

fn asymptotic_json(f: &AsymptoticFunction) -> Value {
    let terms: Vec<Value> = f
        .terms()
        .iter()
        .map(|t| {
            json!({
                "q": cjson(t.exponent),
                "k": t.log_power,
                "coeffs": t.coeff.iter().map(|&c| cjson(c)).collect::<Vec<_>>(),
            })
        })
        .collect();
    Value::Array(terms)
}

fn choice_json(c: &ExtensionChoice) -> Value {
    match c {
        ExtensionChoice::Zero => json!({"kind": "zero"}),
        ExtensionChoice::Full => json!({"kind": "full"}),
        ExtensionChoice::Constants => json!({"kind": "constants"}),
        ExtensionChoice::Span(cols) => json!({
            "kind": "span",
            "basis": cols
                .iter()
                .map(|col| col.iter().map(|&c| cjson(c)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        }),
    }
}

fn descriptor_json(d: &DomainDescriptor) -> Value {
    let roots: Vec<Value> = d
        .spaces
        .iter()
        .zip(&d.choices)
        .map(|(s, c)| {
            json!({
                "q": s.root.re(),
                "mode": s.root.mode,
                "order": s.root.pole_order,
                "multiplicity": s.multiplicity,
                "structure": format!("{:?}", s.structure),
                "choice": choice_json(c),
            })
        })
        .collect();
    json!({
        "gamma": d.gamma,
        "bc": d.bc.to_string(),
        "mu": d.mu,
        "minimal": {"regularity": d.minimal.regularity, "weight": d.minimal.weight},
        "roots": roots,
    })
}

/// Builds the extension descriptor selected by the config preset.
pub fn build_descriptor(config: &RunConfig, spectrum: &Spectrum) -> Result<DomainDescriptor> {
    let gamma = config.gamma(spectrum);
    match config.extension.preset.as_str() {
        "neumann" => {
            let delta = match config.weight.delta {
                Some(d) => d,
                None => gamma - (spectrum.n() as f64 - 3.0) / 2.0,
            };
            neumann_extension(spectrum, delta)
        }
        "maximal" => max_domain(spectrum, gamma, spectrum.bc()),
        "minimal" => {
            let mut d = max_domain(spectrum, gamma, spectrum.bc())?;
            for c in d.choices.iter_mut() {
                *c = ExtensionChoice::Zero;
            }
            Ok(d)
        }
        other => Err(Error::Domain(format!("unknown extension preset {other:?}"))),
    }
}

pub fn cmd_spectrum(config: &RunConfig) -> Result<CommandOutcome> {
    let spectrum = config.spectrum()?;
    let entries: Vec<Value> = spectrum
        .entries()
        .iter()
        .map(|e| json!({"j": e.mode, "lambda": e.lambda, "multiplicity": e.multiplicity}))
        .collect();
    let fd = if config.cross_section.kind == "interval" {
        let oracle = config.fd_oracle_spectrum(2000)?;
        let rows: Vec<Value> = oracle
            .entries()
            .iter()
            .map(|e| {
                json!({
                    "j": e.mode,
                    "lambda_fd": e.lambda,
                    "abs_err": (e.lambda - spectrum.lambda(e.mode)).abs(),
                })
            })
            .collect();
        Value::Array(rows)
    } else {
        Value::Null
    };
    Ok(CommandOutcome {
        section: json!({
            "n": spectrum.n(),
            "bc": spectrum.bc().to_string(),
            "entries": entries,
            "fd_oracle": fd,
        }),
        verdict_pass: true,
    })
}

pub fn cmd_indicial(config: &RunConfig, gamma_flag: Option<f64>) -> Result<CommandOutcome> {
    let spectrum = config.spectrum()?;
    let gamma = gamma_flag.unwrap_or_else(|| config.gamma(&spectrum));
    let window = laplacian_window_igamma(&spectrum, gamma)?;
    let roots: Vec<Value> = window
        .roots
        .iter()
        .map(|r| {
            json!({
                "j": r.mode,
                "sign": match r.sign { RootSign::Plus => "+", RootSign::Minus => "-" },
                "q": r.re(),
                "order": r.pole_order,
            })
        })
        .collect();
    Ok(CommandOutcome {
        section: json!({
            "gamma": gamma,
            "window": [window.lower, window.upper],
            "roots": roots,
        }),
        verdict_pass: true,
    })
}

pub fn cmd_conormal(config: &RunConfig, sigma: f64, ell: usize) -> Result<CommandOutcome> {
    let spectrum = config.spectrum()?;
    let gamma = config.gamma(&spectrum);
    let warp = config.warp(&spectrum);
    let data = ConormalData::new(spectrum.clone(), warp, spectrum.bc());
    let sigma_c = Complex64::new(sigma, 0.0);

    let f = data.f_families()?;
    let g = g_recursion(&f, &spectrum, ell)?;
    let laurent = g[ell].laurent_at(sigma_c, 2);
    let laurent_json = json!({
        "min_order": laurent.min_order,
        "coeffs": laurent.coeffs.iter().map(matrix_json).collect::<Vec<_>>(),
    });

    let fs = f_sigma(&data, sigma_c, gamma)?;
    Ok(CommandOutcome {
        section: json!({
            "sigma": sigma,
            "ell": ell,
            "mu_sigma": fs.mu_sigma,
            "g_ell_laurent": laurent_json,
            "F_basis": fs.f_basis.iter().map(asymptotic_json).collect::<Vec<_>>(),
            "Fhat_basis": fs.fhat_basis.iter().map(asymptotic_json).collect::<Vec<_>>(),
            "theta": matrix_json(&fs.theta),
        }),
        verdict_pass: true,
    })
}

pub fn cmd_domain(
    config: &RunConfig,
    delta_flag: Option<f64>,
    check_e3: bool,
) -> Result<CommandOutcome> {
    let spectrum = config.spectrum()?;
    let mut cfg = config.clone();
    if let Some(d) = delta_flag {
        cfg.weight.delta = Some(d);
        cfg.weight.gamma = None;
    }
    let gamma = cfg.gamma(&spectrum);
    let descriptor = build_descriptor(&cfg, &spectrum)?;

    let plus = max_domain(&spectrum, gamma, spectrum.bc())?;
    let minus = max_domain(&spectrum, -gamma, spectrum.bc())?;
    let pairing = pairing_matrix(&plus, &minus)?;
    let complement = adjoint_complement(&descriptor)?;

    let mut pass = true;
    let e3 = if check_e3 {
        let report = check_e3_criterion(&descriptor)?;
        pass = report.pass;
        let verdicts: Vec<Value> = report
            .verdicts
            .iter()
            .map(|v| {
                json!({
                    "q": v.q,
                    "mode": v.mode,
                    "condition": match v.condition {
                        E3Condition::ComplementSymmetry => "complement-symmetry",
                        E3Condition::FullForced => "full-forced",
                        E3Condition::ZeroForced => "zero-forced",
                    },
                    "pass": v.pass,
                    "detail": v.detail,
                })
            })
            .collect();
        json!({"pass": report.pass, "verdicts": verdicts})
    } else {
        Value::Null
    };

    Ok(CommandOutcome {
        section: json!({
            "gamma": gamma,
            "descriptor": descriptor_json(&descriptor),
            "pairing_matrix": matrix_json(&pairing),
            "complement": descriptor_json(&complement),
            "check_e3": e3,
        }),
        verdict_pass: pass,
    })
}

pub fn cmd_probe(
    config: &RunConfig,
    rays_deg: Option<Vec<f64>>,
    lmax: Option<f64>,
    out_dir: &Path,
) -> Result<CommandOutcome> {
    let spectrum = config.spectrum()?;
    let descriptor = build_descriptor(config, &spectrum)?;
    let pc = &config.probe;
    let rays = rays_deg.unwrap_or_else(|| pc.rays_deg.clone());
    let args: Vec<f64> = rays.iter().map(|d| d.to_radians()).collect();
    let mags = SectorSpec::log_spaced(
        pc.lambda_min,
        lmax.unwrap_or(pc.lambda_max),
        pc.samples_per_decade,
    );
    let sector = SectorSpec::new(pc.theta, args, mags)?;

    let grid = LogGrid::new(pc.x_min, pc.x_max, pc.nodes)?;
    let table = sectoriality_probe(&descriptor, &sector, &grid, pc.seed)?;

    // Truncation sensitivity: double the window and keep the spacing.
    let span = (pc.x_max / pc.x_min).ln();
    let span_wide = (2.0 * pc.x_max / (0.5 * pc.x_min)).ln();
    let nodes_wide = ((pc.nodes - 1) as f64 * span_wide / span).round() as usize + 1;
    let grid_wide = LogGrid::new(0.5 * pc.x_min, 2.0 * pc.x_max, nodes_wide)?;
    let table_wide = sectoriality_probe(&descriptor, &sector, &grid_wide, pc.seed)?;

    let mut rows = Vec::with_capacity(table.samples.len());
    let mut samples_json = Vec::with_capacity(table.samples.len());
    for (s, sw) in table.samples.iter().zip(&table_wide.samples) {
        let delta = (s.estimate - sw.estimate).abs() / s.estimate.abs().max(1e-300);
        rows.push(format!(
            "{:.6},{:.6e},{:.6e},{},{:.3e}",
            s.arg.to_degrees(),
            s.magnitude,
            s.estimate,
            pc.nodes,
            delta
        ));
        samples_json.push(json!({
            "ray_deg": s.arg.to_degrees(),
            "magnitude": s.magnitude,
            "estimate": s.estimate,
            "converged": s.converged,
            "truncation_delta": delta,
        }));
    }
    let csv_path = out_dir.join("probe.csv");
    write_csv(&csv_path, "ray_deg,magnitude,estimate,nodes,truncation_delta", &rows)
        .map_err(|e| Error::Numerical(format!("writing {}: {e}", csv_path.display())))?;

    let sup_delta = (table.sup - table_wide.sup).abs() / table.sup.max(1e-300);
    Ok(CommandOutcome {
        section: json!({
            "sup": table.sup,
            "sup_widened": table_wide.sup,
            "sup_truncation_delta": sup_delta,
            "flagged": table.flagged,
            "samples": samples_json,
            "csv": csv_path.display().to_string(),
        }),
        verdict_pass: true,
    })
}

pub fn cmd_pme(
    config: &RunConfig,
    horizon_flag: Option<f64>,
    out_flag: Option<PathBuf>,
    out_dir: &Path,
) -> Result<CommandOutcome> {
    if config.cross_section.kind != "interval" {
        return Err(Error::Unsupported(
            "the PME solver runs on the interval wedge (kind = \"interval\")".into(),
        ));
    }
    if config.cross_section.bc != BoundaryCondition::Neumann {
        return Err(Error::Unsupported("the PME solver uses Neumann walls".into()));
    }
    let pc = &config.pme;
    let length = config.cross_section.length.unwrap();
    let grid = WedgeGrid::new(length, pc.x_min, pc.nodes, pc.modes, pc.tau)?;
    let forcing = parse_forcing(&pc.forcing)
        .ok_or_else(|| Error::Domain(format!("bad forcing recipe {:?}", pc.forcing)))?;
    let initial = parse_initial(&pc.initial)
        .ok_or_else(|| Error::Domain(format!("bad initial recipe {:?}", pc.initial)))?;
    let v0 = match initial {
        InitialRecipe::Constant { c } => PMEState::constant(&grid, c, pc.m)?,
        InitialRecipe::Cosine { c, a } => {
            let values: Vec<Vec<f64>> = grid
                .x
                .iter()
                .map(|_| {
                    grid.y_nodes()
                        .iter()
                        .map(|&y| c + a * (std::f64::consts::PI * y / length).cos())
                        .collect()
                })
                .collect();
            PMEState::from_pointwise(&grid, &values, pc.m)?
        }
        InitialRecipe::TipCosine { c, a } => {
            let q1 = grid.mode_exponent(1);
            let values: Vec<Vec<f64>> = grid
                .x
                .iter()
                .map(|&x| {
                    grid.y_nodes()
                        .iter()
                        .map(|&y| c + a * x.powf(q1) * (std::f64::consts::PI * y / length).cos())
                        .collect()
                })
                .collect();
            PMEState::from_pointwise(&grid, &values, pc.m)?
        }
    };

    let horizon = horizon_flag.unwrap_or(pc.horizon);
    let traj = pme_solve(&grid, v0, &forcing, horizon, pc.snapshots)?;

    // Trajectory CSV: t, x, mode, amplitude.
    let mut rows = Vec::new();
    for snap in &traj.snapshots {
        for (k, mode) in snap.modes.iter().enumerate() {
            for (i, &a) in mode.iter().enumerate() {
                rows.push(format!("{:.9},{:.9e},{},{:.9e}", snap.time, grid.x[i], k, a));
            }
        }
    }
    let csv_path = out_flag.unwrap_or_else(|| out_dir.join("pme_trajectory.csv"));
    write_csv(&csv_path, "t,x,mode,amplitude", &rows)
        .map_err(|e| Error::Numerical(format!("writing {}: {e}", csv_path.display())))?;

    let final_state = traj.final_state();
    let mut exponents = serde_json::Map::new();
    for k in 0..grid.modes {
        if let Some(fit) = tip_exponent_fit(&grid, final_state, k) {
            exponents.insert(k.to_string(), json!(fit));
        }
    }
    let converged = traj.converged();
    Ok(CommandOutcome {
        section: json!({
            "c_of_t": traj.tip_values,
            "exponents": Value::Object(exponents),
            "min_v": traj.min_v,
            "converged": converged,
            "halted": traj.halted.as_ref().map(|h| format!("{h:?}")),
            "csv": csv_path.display().to_string(),
        }),
        verdict_pass: converged,
    })
}
