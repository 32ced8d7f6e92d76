//! Experiment driver: spectra, QSE benchmarks, scattering runs and circuit
//! resource reports, all from one `key = value` configuration.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde_json::{json, Value};
use z2lgt::circuits::{packet_circuit, ResourceReport};
use z2lgt::dynamics::{run_scattering, PacketConfig, ScatterConfig, ScatterSummary};
use z2lgt::linalg::fidelity;
use z2lgt::qse::{build_qse_matrices, lowest_band, match_to_spectrum, meson_images, momentum_set, solve_qse};
use z2lgt::spectrum::{ground_state, lowest_k, resolve_with_symmetry, SolverConfig};
use z2lgt::wavepacket::{build_packet_operator, WavePacketSpec};
use z2lgt::Model;

use config::{ExperimentConfig, Mode, RawConfig};

#[derive(Parser, Debug)]
#[command(name = "z2lgt", about = "Z2 lattice gauge theory meson experiments")]
struct Cli {
    /// Mode, overriding the `mode` key: spectrum, qse_bench, scatter, circuit.
    mode: Option<String>,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit nonzero if any acceptance tolerance is violated.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "L")]
    sites: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

/// Outcome of one tolerance check.
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, v)?;
        writeln!(w)?;
        Ok(())
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut raw = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    if let Some(m) = &cli.mode {
        raw.set("mode", m.clone());
    }
    if let Some(s) = cli.seed {
        raw.set("seed", s.to_string());
    }
    if let Some(l) = cli.sites {
        raw.set("L", l.to_string());
    }
    if let Some(m) = cli.m {
        raw.set("m", m.to_string());
    }
    if let Some(e) = cli.eps {
        raw.set("eps", e.to_string());
    }
    raw.validate()
}

fn solver(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        seed: cfg.seed,
        ..SolverConfig::default()
    }
}

fn spectrum(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Check>> {
    let model = Model::new(cfg.params())?;
    let k = cfg.n_exact.min(model.sector.dim());
    let mut sol = lowest_k(&model.hamiltonian, k, &solver(cfg))?;
    let cvals = resolve_with_symmetry(&mut sol, &model.conjugation, 1e-8);
    let mut w = out.create("spectrum.csv")?;
    writeln!(w, "index,energy,gap,c_re,c_im")?;
    let e0 = sol.energies[0];
    for (i, (e, c)) in sol.energies.iter().zip(&cvals).enumerate() {
        writeln!(w, "{i},{e:.12e},{:.12e},{:.12e},{:.12e}", e - e0, c.re, c.im)?;
    }
    let ortho = sol.orthonormality_error();
    let res = sol.residuals.iter().copied().fold(0.0, f64::max);
    Ok(vec![
        Check::new("orthonormality", ortho < 1e-8, format!("{ortho:.3e}")),
        Check::new("residuals", res < 1e-8, format!("{res:.3e}")),
    ])
}

fn qse_bench(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Check>> {
    let model = Model::new(cfg.params())?;
    let gs = ground_state(&model.hamiltonian, &solver(cfg))?;
    let ground = gs.ground_vector().to_vec();
    let mats = build_qse_matrices(&model, &ground)?;
    let sols = solve_qse(&mats, &cfg.qse())?;
    let images = meson_images(&model, &ground)?;
    let k = cfg.n_exact.min(model.sector.dim());
    let mut exact = lowest_k(&model.hamiltonian, k, &solver(cfg))?;
    resolve_with_symmetry(&mut exact, &model.conjugation, 1e-8);
    let mut w = out.create("qse_bench.csv")?;
    writeln!(w, "k_int,c,E_QSE,E_exact,infidelity")?;
    let (mut worst_err, mut worst_fid, mut worst_nz) = (0.0f64, 1.0f64, 0.0f64);
    for c in [-1, 1] {
        for sol in lowest_band(&sols, c) {
            let mut s = sol.clone();
            let m = match_to_spectrum(&images, &mut s, &exact);
            writeln!(
                w,
                "{},{},{:.12e},{:.12e},{:.6e}",
                s.k_int,
                c,
                m.qse_gap,
                m.exact_gap,
                1.0 - m.fidelity
            )?;
            if c == -1 {
                worst_err = worst_err.max(m.rel_error);
                worst_fid = worst_fid.min(m.fidelity);
                worst_nz = worst_nz.max(s.nz);
            }
        }
    }
    Ok(vec![
        Check::new(
            "vector_energy",
            worst_err < cfg.tol_energy,
            format!("max relative error {worst_err:.3e}"),
        ),
        Check::new(
            "vector_fidelity",
            worst_fid >= cfg.tol_fidelity,
            format!("min fidelity {worst_fid:.6}"),
        ),
        Check::new("annihilation_norm", worst_nz < 0.01, format!("max N_Z {worst_nz:.3e}")),
    ])
}

fn scatter(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Check>> {
    let mut sc = ScatterConfig::new(cfg.params(), cfg.t_final);
    for (p, (kbar, xbar)) in sc.packets.iter_mut().zip(cfg.packets) {
        *p = PacketConfig {
            kbar,
            xbar,
            sigma_k: cfg.sigma_k,
        };
    }
    sc.dt = cfg.dt;
    sc.cadence = cfg.cadence;
    sc.meson_cadence = cfg.meson_cadence;
    sc.exact_check = cfg.exact_check;
    sc.qse = cfg.qse();
    sc.solver = solver(cfg);
    let outcome = run_scattering(&sc)?;
    let rec = &outcome.record;
    rec.write_density_csv(out.create("density.csv")?)?;
    rec.write_energy_csv(out.create("energy.csv")?)?;
    rec.write_mesons_csv(out.create("mesons.csv")?)?;
    rec.write_strings_csv(out.create("strings.csv")?)?;
    rec.write_entropy_csv(out.create("entropy.csv")?)?;
    let s = ScatterSummary::new(&outcome)?;
    out.json(
        "summary.json",
        &json!({
            "summary": s,
            "ground_energy": outcome.ground_energy,
            "excitation_energy": outcome.excitation_energy,
            "lambda_star": outcome.lambda_star,
        }),
    )?;
    Ok(vec![
        Check::new("rho_initial", s.rho_in_window(), format!("{:.4}", s.rho_initial)),
        Check::new(
            "energy_drift",
            s.drifts_bounded(),
            format!("{:.4} of excitation energy", s.max_drift_fraction),
        ),
        Check::new(
            "string_peak",
            s.string_peak_then_decay(),
            format!(
                "peak {:.4} at t={:.2} (t_c={:.2}), tail {:.4}",
                s.string_peak, s.string_peak_time, s.collision_time, s.string_tail
            ),
        ),
        Check::new(
            "entropy_relaxes",
            s.entropy_relaxes(),
            format!("final {:.4} vs peak {:.4}", s.entropy_final, s.entropy_peak),
        ),
    ])
}

fn circuit(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Check>> {
    let model = Model::new(cfg.params())?;
    let gs = ground_state(&model.hamiltonian, &solver(cfg))?;
    let ground = gs.ground_vector().to_vec();
    let mats = build_qse_matrices(&model, &ground)?;
    let sols = solve_qse(&mats, &cfg.qse())?;
    let spec = WavePacketSpec::new(cfg.kbar, cfg.xbar, cfg.sigma_k, momentum_set(&sols, -1))?;
    let packet = build_packet_operator(&model, &spec, &sols)?;
    let layout = model.layout();
    let pc = packet_circuit(&packet, &layout)?;
    pc.circuit.write_gate_list(out.create("gates.txt")?)?;
    let report = ResourceReport::new(&layout, &pc.circuit);
    let mut checks = vec![
        Check::new(
            "cnot_total",
            report.cnot_total == report.tabulated_cnot_total,
            format!("{} (tabulated {})", report.cnot_total, report.tabulated_cnot_total),
        ),
        Check::new(
            "cnot_depth",
            report.cnot_depth == report.tabulated_cnot_depth,
            format!("{} (tabulated {})", report.cnot_depth, report.tabulated_cnot_depth),
        ),
    ];
    let mut sim = Value::Null;
    // statevector simulation is limited to 2L + 1 <= 13 qubits
    if cfg.sites <= 6 {
        let (psi, prob) = pc.prepare(&model.sector, &ground)?;
        let f_b = fidelity(&psi, &packet.b_dag.apply(&ground));
        let f_a = fidelity(&psi, &packet.a_dag_dressed(&model)?.apply(&ground));
        sim = json!({
            "success_probability": prob,
            "fidelity_b_dag": f_b,
            "fidelity_a_dag_dressed": f_a,
        });
        checks.push(Check::new("circuit_fidelity", f_b >= 0.999, format!("{f_b:.6}")));
    }
    out.json(
        "resources.json",
        &json!({
            "resources": report,
            "mu": pc.mu,
            "normalisation": pc.normalisation,
            "simulation": sim,
        }),
    )?;
    println!("CNOTs: {} (tabulated {})", report.cnot_total, report.tabulated_cnot_total);
    println!("CNOT depth: {} (tabulated {})", report.cnot_depth, report.tabulated_cnot_depth);
    Ok(checks)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load(cli)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut out = Outputs {
        dir: cli.out.clone(),
        files: Vec::new(),
    };
    let checks = match cfg.mode {
        Mode::Spectrum => spectrum(&cfg, &mut out)?,
        Mode::QseBench => qse_bench(&cfg, &mut out)?,
        Mode::Scatter => scatter(&cfg, &mut out)?,
        Mode::Circuit => circuit(&cfg, &mut out)?,
    };
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "files": out.files,
        "checks": checks
            .iter()
            .map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail}))
            .collect::<Vec<_>>(),
    });
    out.json("manifest.json", &manifest)?;
    Ok(checks.iter().all(|c| c.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if cli.check => {
            eprintln!("acceptance check failed");
            ExitCode::from(2)
        }
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
