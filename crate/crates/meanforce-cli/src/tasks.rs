//! Task execution: each task turns the parsed config into a JSON report,
//! optionally a CSV table, and a list of failure strings (empty = success).

use anyhow::Result;
use nalgebra::Matrix3;
use serde_json::{json, Value};

use meanforce::langevin::simulate;
use meanforce::oracle::build_discrete_bath;
use meanforce::response::{momentum_correlator, position_correlator};
use meanforce::thermo::{thermo_point, thermo_sweep, ThermoPoint};
use meanforce::SusceptibilityModel;

use crate::config::Config;

pub struct TaskOutput {
    pub report: Value,
    /// Header line plus data rows, written as results.csv when present.
    pub csv: Option<(String, Vec<String>)>,
    pub failures: Vec<String>,
}

fn tensor_json(m: &Matrix3<f64>) -> Value {
    json!([
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ])
}

/// (xx, yy, zz, xy, xz, yz) of a symmetric tensor as CSV fields.
fn sym_fields(m: &Matrix3<f64>) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        m[(0, 0)],
        m[(1, 1)],
        m[(2, 2)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 2)]
    )
}

fn model_summary(model: &SusceptibilityModel) -> Value {
    json!({
        "omega0": model.omega0(),
        "bands": model.bands().len(),
        "frequency_scale": model.frequency_scale(),
        "static_stability_margin": model.static_stability_margin(),
    })
}

pub fn run_validate(cfg: &Config, model: &SusceptibilityModel) -> Result<TaskOutput> {
    let grid = cfg
        .validate
        .as_ref()
        .and_then(|v| v.grid.clone())
        .unwrap_or_else(|| {
            let hi = 3.0 * model.frequency_scale();
            (1..=24).map(|i| hi * i as f64 / 24.0).collect()
        });
    let report = model.validate(&grid, &cfg.quadrature);
    let mut failures = Vec::new();
    if !report.static_stability.passed {
        failures.push(format!(
            "static stability violated: min eigenvalue {:.3e}",
            report.static_stability.worst_value
        ));
    }
    if !report.passivity.passed {
        failures.push(format!(
            "passivity violated: min Im χ̃ eigenvalue {:.3e} at ω = {}",
            report.passivity.worst_value, report.passivity.at
        ));
    }
    if !report.kramers_kronig.passed {
        failures.push(format!(
            "Kramers–Kronig inconsistency {:.3e} at ω = {}",
            report.kramers_kronig.worst_value, report.kramers_kronig.at
        ));
    }
    Ok(TaskOutput {
        report: json!({ "checks": report, "probe_grid": grid }),
        csv: None,
        failures,
    })
}

const SWEEP_HEADER: &str = "temperature,u_mean_force,u_alternative,f_mean_force,s_mean_force,\
                            bath_energy,interaction_energy,quad_error,legendre_residual,\
                            entropy_residual,cutoff_sensitive,evaluations";

fn sweep_row(p: &ThermoPoint) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
        p.temperature,
        p.u_mean_force,
        p.u_alternative,
        p.f_mean_force,
        p.s_mean_force,
        p.bath_energy,
        p.interaction_energy,
        p.quad_error,
        p.legendre_residual,
        p.entropy_residual,
        p.cutoff_sensitive,
        p.evaluations
    )
}

pub fn run_thermo_sweep(cfg: &Config, model: &SusceptibilityModel) -> Result<TaskOutput> {
    let temperatures = cfg.temperatures.as_ref().unwrap().expand()?;
    let results = thermo_sweep(model, &temperatures, &cfg.quadrature);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (t, r) in temperatures.iter().zip(results) {
        match r {
            Ok(p) => {
                rows.push(sweep_row(&p));
                points.push(p);
            }
            Err(e) => failures.push(format!("T = {t}: {e}")),
        }
    }
    Ok(TaskOutput {
        report: json!({ "points": points }),
        csv: Some((SWEEP_HEADER.to_string(), rows)),
        failures,
    })
}

pub fn run_correlators(cfg: &Config, model: &SusceptibilityModel) -> Result<TaskOutput> {
    let spec = cfg.correlators.as_ref().unwrap();
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for &tau in &spec.taus {
        let pos = position_correlator(model, tau, spec.temperature, &cfg.quadrature);
        let mom = momentum_correlator(model, tau, spec.temperature, &cfg.quadrature);
        match (pos, mom) {
            (Ok(p), Ok(m)) => {
                rows.push(format!(
                    "{:.16e},{},{},{:.16e},{:.16e}",
                    tau,
                    sym_fields(&p.tensor),
                    sym_fields(&m.tensor),
                    p.est_error,
                    m.est_error
                ));
                entries.push(json!({
                    "tau": tau,
                    "position": tensor_json(&p.tensor),
                    "momentum": tensor_json(&m.tensor),
                    "position_est_error": p.est_error,
                    "momentum_est_error": m.est_error,
                }));
            }
            (Err(e), _) | (_, Err(e)) => failures.push(format!("τ = {tau}: {e}")),
        }
    }
    let header = "tau,\
                  pos_xx,pos_yy,pos_zz,pos_xy,pos_xz,pos_yz,\
                  mom_xx,mom_yy,mom_zz,mom_xy,mom_xz,mom_yz,\
                  pos_est_error,mom_est_error";
    Ok(TaskOutput {
        report: json!({
            "temperature": spec.temperature,
            "correlators": entries,
        }),
        csv: Some((header.to_string(), rows)),
        failures,
    })
}

fn rel_dev_scalar(continuum: f64, oracle: f64) -> f64 {
    (continuum - oracle).abs() / oracle.abs().max(1e-300)
}

fn rel_dev_tensor(continuum: &Matrix3<f64>, oracle: &Matrix3<f64>) -> f64 {
    (continuum - oracle).abs().max() / oracle.abs().max().max(1e-300)
}

pub fn run_oracle_compare(cfg: &Config, model: &SusceptibilityModel) -> Result<TaskOutput> {
    let spec = cfg.oracle.as_ref().unwrap();
    let temperatures = cfg.temperatures.as_ref().unwrap().expand()?;
    let omega_max = spec
        .omega_max
        .unwrap_or_else(|| 30.0 * model.frequency_scale());
    let modes = build_discrete_bath(model, spec.n_modes, omega_max)?.diagonalize()?;

    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    let mut failures = Vec::new();
    for &t in &temperatures {
        let cont = thermo_point(model, t, &cfg.quadrature)?;
        let disc = modes.thermo(t)?;
        let pos_c = position_correlator(model, 0.0, t, &cfg.quadrature)?.tensor;
        let mom_c = momentum_correlator(model, 0.0, t, &cfg.quadrature)?.tensor;
        let pos_o = modes.position_covariance(t);
        let mom_o = modes.momentum_covariance(t);

        let scalars = [
            ("u_mean_force", cont.u_mean_force, disc.u_mean_force),
            ("u_alternative", cont.u_alternative, disc.u_alternative),
            ("f_mean_force", cont.f_mean_force, disc.f_mean_force),
            ("s_mean_force", cont.s_mean_force, disc.s_mean_force),
            ("bath_energy", cont.bath_energy, disc.bath_energy),
            (
                "interaction_energy",
                cont.interaction_energy,
                disc.interaction_energy,
            ),
        ];
        let mut devs = serde_json::Map::new();
        for (name, c, o) in scalars {
            let dev = rel_dev_scalar(c, o);
            rows.push(format!("{t:.16e},{name},{c:.16e},{o:.16e},{dev:.16e}"));
            devs.insert(name.to_string(), json!(dev));
            if let Some(limit) = spec.fail_above {
                if dev > limit {
                    failures.push(format!("T = {t}: {name} deviates {dev:.3e} > {limit:.3e}"));
                }
            }
        }
        for (name, c, o) in [
            ("position_covariance", &pos_c, &pos_o),
            ("momentum_covariance", &mom_c, &mom_o),
        ] {
            let dev = rel_dev_tensor(c, o);
            rows.push(format!(
                "{t:.16e},{name},{:.16e},{:.16e},{dev:.16e}",
                c.abs().max(),
                o.abs().max()
            ));
            devs.insert(name.to_string(), json!(dev));
            if let Some(limit) = spec.fail_above {
                if dev > limit {
                    failures.push(format!("T = {t}: {name} deviates {dev:.3e} > {limit:.3e}"));
                }
            }
        }
        blocks.push(json!({
            "temperature": t,
            "relative_deviations": Value::Object(devs),
            "continuum": cont,
            "oracle": disc,
            "position_covariance": { "continuum": tensor_json(&pos_c), "oracle": tensor_json(&pos_o) },
            "momentum_covariance": { "continuum": tensor_json(&mom_c), "oracle": tensor_json(&mom_o) },
        }));
    }
    Ok(TaskOutput {
        report: json!({
            "n_modes": spec.n_modes,
            "omega_max": omega_max,
            "comparisons": blocks,
        }),
        csv: Some((
            "temperature,quantity,continuum,oracle,relative_deviation".to_string(),
            rows,
        )),
        failures,
    })
}

pub fn run_langevin(cfg: &Config, model: &SusceptibilityModel) -> Result<TaskOutput> {
    let sim = cfg.sim.as_ref().unwrap();
    let ens = simulate(model, sim)?;
    let rows = ens
        .acf
        .iter()
        .map(|s| format!("{:.16e},{}", s.lag, sym_fields(&s.tensor)))
        .collect();
    Ok(TaskOutput {
        report: json!({ "ensemble": ens }),
        csv: Some((
            "lag,acf_xx,acf_yy,acf_zz,acf_xy,acf_xz,acf_yz".to_string(),
            rows,
        )),
        failures: Vec::new(),
    })
}

pub fn run(cfg: &Config) -> Result<TaskOutput> {
    let model = cfg.model.build()?;
    let mut out = match cfg.task {
        crate::config::Task::Validate => run_validate(cfg, &model)?,
        crate::config::Task::ThermoSweep => run_thermo_sweep(cfg, &model)?,
        crate::config::Task::Correlators => run_correlators(cfg, &model)?,
        crate::config::Task::OracleCompare => run_oracle_compare(cfg, &model)?,
        crate::config::Task::Langevin => run_langevin(cfg, &model)?,
    };
    out.report = json!({
        "task": cfg.task,
        "config": cfg,
        "model": model_summary(&model),
        "results": out.report,
        "failures": out.failures,
    });
    Ok(out)
}
